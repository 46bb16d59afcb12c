//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use evolm::cnn::{CnnArchitecture, CnnModel, ParamClass};
use evolm::dataset::Label;
use evolm::exec::Execution;
use evolm::{Matrix, RngStream};

/// Largest deviation across the four Penrose conditions.
pub fn penrose_max_deviation(a: &Matrix, p: &Matrix) -> f64 {
    let apa = a.matmul(p).unwrap().matmul(a).unwrap();
    let pap = p.matmul(a).unwrap().matmul(p).unwrap();
    let ap = a.matmul(p).unwrap();
    let pa = p.matmul(a).unwrap();
    [
        apa.max_abs_diff(a),
        pap.max_abs_diff(p),
        ap.max_abs_diff(&ap.transpose()),
        pa.max_abs_diff(&pa.transpose()),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `rows × cols` product of two random factors, so rank ≤ `rank`.
pub fn random_with_rank(rows: usize, cols: usize, rank: usize, stream: &mut RngStream) -> Matrix {
    let left = stream.matrix(rows, rank, -1.0, 1.0);
    let right = stream.matrix(rank, cols, -1.0, 1.0);
    left.matmul(&right).unwrap()
}

/// `P(grade_pos > grade_neg) + ½·P(tie)` over all positive/negative pairs.
pub fn auc_by_pairs(grades: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (gp, lp) in grades.iter().zip(labels) {
        if !lp.is_positive() {
            continue;
        }
        for (gn, ln) in grades.iter().zip(labels) {
            if ln.is_positive() {
                continue;
            }
            pairs += 1.0;
            if gp > gn {
                wins += 1.0;
            } else if gp == gn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Exact two-sided rank-sum p-value `P(|W − E| ≥ |w − E|)` by enumerating
/// every `n`-subset of the pooled ranks (doubled to stay integral).
pub fn rank_sum_p_by_enumeration(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks2: Vec<i64> = pooled
        .iter()
        .map(|&v| {
            let below = pooled.iter().filter(|&&u| u < v).count() as i64;
            let equal = pooled.iter().filter(|&&u| u == v).count() as i64;
            2 * below + equal + 1
        })
        .collect();
    let observed: i64 = ranks2[..a.len()].iter().sum();
    let total = pooled.len();
    let mean2 = a.len() as i64 * (total as i64 + 1);
    let dev = (observed - mean2).abs();
    let (mut extreme, mut count) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let s: i64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| ranks2[i]).sum();
        count += 1;
        extreme += u64::from((s - mean2).abs() >= dev);
    }
    extreme as f64 / count as f64
}

/// Worst relative error between backprop and central differences, per
/// parameter class, on a randomized two-stage micro-net.
pub fn cnn_gradient_check(seed: u64) -> Vec<(ParamClass, f64)> {
    let arch = CnnArchitecture::parse_with_input("in_2c_2p_3c_2p", 16).unwrap();
    let mut s = RngStream::new(seed, 0);
    let mut model = CnnModel::new(arch, 2, &mut s);
    let params: Vec<f64> = model.parameters().iter().map(|_| s.uniform_in(-0.5, 0.5)).collect();
    model.set_parameters(&params).unwrap();
    let images: Vec<Matrix> = (0..3).map(|_| s.matrix(16, 16, 0.0, 1.0)).collect();
    let labels = [0, 1, 1];
    let (_, grad) = model.loss_and_gradient(&images, &labels, Execution::Sequential).unwrap();

    let h = 1e-5;
    let loss_at = |p: &[f64]| {
        let mut m = model.clone();
        m.set_parameters(p).unwrap();
        m.loss_and_gradient(&images, &labels, Execution::Sequential).unwrap().0
    };
    let mut out = Vec::new();
    let mut offset = 0;
    for (class, len) in model.parameter_layout() {
        let mut worst: f64 = 0.0;
        for i in offset..offset + len {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let err = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
        out.push((class, worst));
        offset += len;
    }
    out
}
