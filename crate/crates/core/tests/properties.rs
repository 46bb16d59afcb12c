mod common;

use common::{auc_by_pairs, penrose_max_deviation, random_with_rank};
use evolm::dataset::Label;
use evolm::evaluation::{confusion, roc_pr_auc, threshold_sweep};
use evolm::numerics::pseudoinverse;
use evolm::pipeline::{candidate_len, decide, decode, encode, expected_probability_grade};
use evolm::sca::{r1_schedule, update_position};
use evolm::{Matrix, RngStream};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudoinverse_satisfies_penrose(rows in 1usize..=50, cols in 1usize..=20, rank_cut in 0usize..=20, seed: u64) {
        let rank = rank_cut.min(rows.min(cols)).max(1);
        let a = random_with_rank(rows, cols, rank, &mut RngStream::new(seed, 0));
        let p = pseudoinverse(&a).unwrap();
        prop_assert_eq!(p.shape(), (cols, rows));
        prop_assert!(penrose_max_deviation(&a, &p) < 1e-8);
    }

    #[test]
    fn encode_decode_round_trip(n in 1usize..=50, hidden in 1usize..=50, seed: u64) {
        let mut s = RngStream::new(seed, 0);
        let w = s.matrix(hidden, n, -5.0, 5.0);
        let b: Vec<f64> = (0..hidden).map(|_| s.standard_normal()).collect();
        let v = encode(&w, &b).unwrap();
        prop_assert_eq!(v.len(), candidate_len(n, hidden));
        let (w2, b2) = decode(&v, n, hidden).unwrap();
        prop_assert_eq!(w2, w);
        prop_assert_eq!(b2, b);
        prop_assert!(decode(&v[1..], n, hidden).is_err());
    }

    #[test]
    fn classify_monotone_in_threshold(grade in 0.0f64..=1.0, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if decide(grade, lo) == Label::Negative {
            prop_assert_eq!(decide(grade, hi), Label::Negative);
        }
    }

    #[test]
    fn grades_sum_to_one(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -10.0f64..10.0) {
        let g = expected_probability_grade(&[a, b]).unwrap();
        let h = expected_probability_grade(&[b, a]).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert!((g + h - 1.0).abs() < 1e-12);
        let shifted = expected_probability_grade(&[a + c, b + c]).unwrap();
        prop_assert!((g - shifted).abs() < 1e-9);
    }

    #[test]
    fn auc_equals_pair_count(seed: u64, len in 2usize..=30, levels in 2u64..=6) {
        let mut s = RngStream::new(seed, 0);
        let mut labels: Vec<Label> = (0..len).map(|_| Label::from_decision(s.below(2) == 1)).collect();
        labels[0] = Label::Positive;
        labels[1] = Label::Negative;
        // coarse grades force ties
        let grades: Vec<f64> = (0..len).map(|_| s.below(levels) as f64 / levels as f64).collect();
        let curves = roc_pr_auc(&grades, &labels).unwrap();
        prop_assert_eq!(curves.auc, auc_by_pairs(&grades, &labels));
        prop_assert!(curves.roc.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn confusion_partitions_samples(seed: u64, len in 1usize..=40, thr in 0.0f64..=1.0) {
        let mut s = RngStream::new(seed, 0);
        let labels: Vec<Label> = (0..len).map(|_| Label::from_decision(s.below(2) == 1)).collect();
        let grades: Vec<f64> = (0..len).map(|_| s.next_f64()).collect();
        let row = &threshold_sweep(&grades, &labels, &[thr]).unwrap()[0];
        let c = row.confusion;
        prop_assert_eq!(c.tp + c.fp + c.tn + c.fn_, len as u64);
        let preds: Vec<Label> = grades.iter().map(|&g| decide(g, thr)).collect();
        prop_assert_eq!(confusion(&labels, &preds).unwrap(), c);
    }

    #[test]
    fn sca_moves_stay_in_box(seed: u64, dim in 1usize..=8, t in 0usize..=20) {
        let mut s = RngStream::new(seed, 0);
        let bounds: Vec<(f64, f64)> = (0..dim).map(|_| { let lo = s.uniform_in(-10.0, 0.0); (lo, lo + s.uniform_in(0.1, 10.0)) }).collect();
        let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| s.uniform_in(lo, hi)).collect();
        let p: Vec<f64> = bounds.iter().map(|&(lo, hi)| s.uniform_in(lo, hi)).collect();
        let r1 = r1_schedule(2.0, t, 20).unwrap();
        let y = update_position(&x, &p, r1, &mut s, &bounds).unwrap();
        for (v, &(lo, hi)) in y.iter().zip(&bounds) {
            prop_assert!((lo..=hi).contains(v));
        }
    }
}

#[test]
fn least_squares_beats_perturbations() {
    let mut s = RngStream::new(42, 0);
    let h = random_with_rank(40, 12, 9, &mut s);
    let t = s.matrix(40, 2, -1.0, 1.0);
    let q = evolm::numerics::solve_least_squares(&h, &t).unwrap();
    let residual = |q: &Matrix| h.matmul(q).unwrap().sub(&t).unwrap().frobenius_norm();
    let best = residual(&q);
    for _ in 0..100 {
        let dq = s.matrix(12, 2, -1e-3, 1e-3);
        assert!(residual(&q.add(&dq).unwrap()) >= best - 1e-12);
    }
}
