//! Optimizer test-bed: unimodal, multimodal, fixed-dimension multimodal and
//! composition functions with their search boxes and known minima.
//!
//! TF8/TF9 are composition functions built as the minimum over ten shifted,
//! scaled copies of a base function plus per-component biases
//! `0, 100, …, 900`. The shifts come from a fixed seed ([`COMPOSITION_SEED`])
//! rather than published shift/rotation files, so the global minimum 0 sits
//! at the first shift.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::exec::Execution;
use crate::numerics::RngStream;
use crate::sca::{self, ScaConfig, ScaOutcome};
use crate::{Error, Result};

/// Seed for the composition-function shift vectors.
pub const COMPOSITION_SEED: u64 = 0x5C_A2_00_5E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionId {
    Tf1,
    Tf2,
    Tf3,
    Tf4,
    Tf5,
    Tf6,
    Tf7,
    Tf8,
    Tf9,
}

impl FunctionId {
    pub const ALL: [FunctionId; 9] = [
        FunctionId::Tf1,
        FunctionId::Tf2,
        FunctionId::Tf3,
        FunctionId::Tf4,
        FunctionId::Tf5,
        FunctionId::Tf6,
        FunctionId::Tf7,
        FunctionId::Tf8,
        FunctionId::Tf9,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionId::Tf1 => "tf1",
            FunctionId::Tf2 => "tf2",
            FunctionId::Tf3 => "tf3",
            FunctionId::Tf4 => "tf4",
            FunctionId::Tf5 => "tf5",
            FunctionId::Tf6 => "tf6",
            FunctionId::Tf7 => "tf7",
            FunctionId::Tf8 => "tf8",
            FunctionId::Tf9 => "tf9",
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown benchmark function {s:?} (expected tf1..tf9)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Unimodal,
    Multimodal,
    FixedDimensionMultimodal,
    Composition,
}

#[derive(Debug, Clone, PartialEq)]
struct Composition {
    shifts: Vec<Vec<f64>>,
    lambda: f64,
    sigma: f64,
    base: Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Base {
    Sphere,
    Griewank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkFunction {
    pub id: FunctionId,
    pub name: &'static str,
    pub group: Group,
    pub dim: usize,
    pub range: (f64, f64),
    /// Minimum as declared in the reference table.
    pub f_min: f64,
    /// Only TF6 and TF7 have a fixed dimension.
    pub fixed_dim: bool,
    composition: Option<Composition>,
}

impl BenchmarkFunction {
    pub fn new(id: FunctionId) -> Self {
        use FunctionId::*;
        let (name, group, dim, range, f_min, fixed_dim) = match id {
            Tf1 => ("schwefel_2_22", Group::Unimodal, 30, (-10.0, 10.0), 0.0, false),
            Tf2 => ("rosenbrock", Group::Unimodal, 30, (-30.0, 30.0), 0.0, false),
            Tf3 => ("schwefel_2_26", Group::Multimodal, 30, (-500.0, 500.0), -418.9829 * 30.0, false),
            Tf4 => ("griewank", Group::Multimodal, 30, (-600.0, 600.0), 0.0, false),
            Tf5 => ("penalized", Group::Multimodal, 30, (-50.0, 50.0), 0.0, false),
            Tf6 => ("shekel_foxholes", Group::FixedDimensionMultimodal, 2, (-65.0, 65.0), 1.0, true),
            Tf7 => ("goldstein_price", Group::FixedDimensionMultimodal, 2, (-2.0, 2.0), 3.0, true),
            Tf8 => ("composition_sphere", Group::Composition, 10, (-5.0, 5.0), 0.0, false),
            Tf9 => ("composition_griewank", Group::Composition, 10, (-5.0, 5.0), 0.0, false),
        };
        let mut f = Self {
            id,
            name,
            group,
            dim,
            range,
            f_min,
            fixed_dim,
            composition: None,
        };
        f.rebuild_composition();
        f
    }

    fn rebuild_composition(&mut self) {
        let (lambda, base) = match self.id {
            FunctionId::Tf8 => (5.0 / 100.0, Base::Sphere),
            FunctionId::Tf9 => (1.0, Base::Griewank),
            _ => return,
        };
        let mut stream = RngStream::new(COMPOSITION_SEED, self.dim as u64);
        let shifts = (0..10)
            .map(|_| (0..self.dim).map(|_| stream.uniform_in(-5.0, 5.0)).collect())
            .collect();
        self.composition = Some(Composition {
            shifts,
            lambda,
            sigma: 1.0,
            base,
        });
    }

    /// Same function at another dimension (fixed-dimension functions refuse).
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if self.fixed_dim && dim != self.dim {
            return Err(Error::Domain(format!("{} is fixed at dimension {}", self.id, self.dim)));
        }
        let mut f = Self::new(self.id);
        f.dim = dim;
        if self.id == FunctionId::Tf3 {
            f.f_min = -418.9829 * dim as f64;
        }
        f.rebuild_composition();
        Ok(f)
    }

    /// Note describing how a composition function was built.
    pub fn variant(&self) -> Option<String> {
        self.composition.as_ref().map(|c| {
            format!(
                "fixed-seed shifts (seed {COMPOSITION_SEED:#x}), no rotation, lambda {}, sigma {}, min-combination",
                c.lambda, c.sigma
            )
        })
    }

    /// A point where `f_min` is attained (TF3: the transcendental optimum to
    /// four decimals). `None` for TF6, whose minimum is only near a foxhole.
    pub fn optimum(&self) -> Option<Vec<f64>> {
        use FunctionId::*;
        match self.id {
            Tf1 | Tf4 => Some(vec![0.0; self.dim]),
            Tf2 => Some(vec![1.0; self.dim]),
            Tf3 => Some(vec![420.9687; self.dim]),
            Tf5 => Some(vec![-1.0; self.dim]),
            Tf6 => None,
            Tf7 => Some(vec![0.0, -1.0]),
            Tf8 | Tf9 => self.composition.as_ref().map(|c| c.shifts[0].clone()),
        }
    }

    /// Evaluates with length and box checks.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "{} expects {} coordinates, got {}",
                self.id,
                self.dim,
                x.len()
            )));
        }
        let (lo, hi) = self.range;
        if let Some(i) = x.iter().position(|v| !(lo..=hi).contains(v)) {
            return Err(Error::Domain(format!(
                "{}: coordinate {i} = {} outside [{lo}, {hi}]",
                self.id, x[i]
            )));
        }
        Ok(self.value(x))
    }

    /// Evaluates without checks; the caller guarantees length and box.
    pub fn value(&self, x: &[f64]) -> f64 {
        use FunctionId::*;
        match self.id {
            Tf1 => x.iter().map(|v| v.abs()).sum::<f64>() + x.iter().map(|v| v.abs()).product::<f64>(),
            Tf2 => rosenbrock(x),
            Tf3 => x.iter().map(|&v| -v * v.abs().sqrt().sin()).sum(),
            Tf4 => griewank(x),
            Tf5 => penalized(x),
            Tf6 => foxholes(x),
            Tf7 => goldstein_price(x),
            Tf8 | Tf9 => {
                let c = self.composition.as_ref().expect("composition data");
                compose(c, x)
            }
        }
    }
}

/// All nine functions at their declared dimensions.
pub fn registry() -> Vec<BenchmarkFunction> {
    FunctionId::ALL.into_iter().map(BenchmarkFunction::new).collect()
}

/// Looks up `"tf1"` … `"tf9"`.
pub fn lookup(id: &str) -> Result<BenchmarkFunction> {
    Ok(BenchmarkFunction::new(id.parse()?))
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

fn griewank(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    sum - prod + 1.0
}

fn penalty(x: f64, a: f64, k: f64, m: i32) -> f64 {
    if x > a {
        k * (x - a).powi(m)
    } else if x < -a {
        k * (-x - a).powi(m)
    } else {
        0.0
    }
}

fn penalized(x: &[f64]) -> f64 {
    let n = x.len();
    let y: Vec<f64> = x.iter().map(|v| 1.0 + (v + 1.0) / 4.0).collect();
    let mut s = (3.0 * PI * y[0]).sin().powi(2);
    for i in 0..n - 1 {
        s += (y[i] - 1.0).powi(2) * (1.0 + (3.0 * PI * y[i + 1]).sin().powi(2));
    }
    s += (y[n - 1] - 1.0).powi(2) * (1.0 + (2.0 * PI * y[n - 1]).sin().powi(2));
    0.1 * s + x.iter().map(|&v| penalty(v, 5.0, 100.0, 4)).sum::<f64>()
}

const FOXHOLE_GRID: [f64; 5] = [-32.0, -16.0, 0.0, 16.0, 32.0];

fn foxholes(x: &[f64]) -> f64 {
    let mut s = 1.0 / 500.0;
    for j in 0..25 {
        let a1 = FOXHOLE_GRID[j % 5];
        let a2 = FOXHOLE_GRID[j / 5];
        s += 1.0 / ((j + 1) as f64 + (x[0] - a1).powi(6) + (x[1] - a2).powi(6));
    }
    1.0 / s
}

fn goldstein_price(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let a = 1.0
        + (x1 + x2 + 1.0).powi(2)
            * (19.0 - 14.0 * x1 + 3.0 * x1 * x1 - 14.0 * x2 + 6.0 * x1 * x2 + 3.0 * x2 * x2);
    let b = 30.0
        + (2.0 * x1 - 3.0 * x2).powi(2)
            * (18.0 - 32.0 * x1 + 12.0 * x1 * x1 + 48.0 * x2 - 36.0 * x1 * x2 + 27.0 * x2 * x2);
    a * b
}

fn compose(c: &Composition, x: &[f64]) -> f64 {
    let mut scratch = vec![0.0; x.len()];
    c.shifts
        .iter()
        .enumerate()
        .map(|(i, shift)| {
            for ((s, &xi), &oi) in scratch.iter_mut().zip(x).zip(shift) {
                *s = (xi - oi) / c.lambda;
            }
            let v = match c.base {
                Base::Sphere => sphere(&scratch),
                Base::Griewank => griewank(&scratch),
            };
            v + 100.0 * i as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// SCA settings over the function's search box.
pub fn sca_config(f: &BenchmarkFunction, population: usize, max_iterations: usize, a: f64) -> ScaConfig {
    ScaConfig {
        population,
        max_iterations,
        a,
        ..ScaConfig::new(f.dim, f.range.0, f.range.1)
    }
}

/// Seed of run `run` on function `id` under a master seed.
pub fn run_seed(master: u64, id: FunctionId, run: usize) -> u64 {
    RngStream::new(master, 0).child(id.as_str()).child_indexed(run as u64).next_u64()
}

/// `runs` independent optimizations of `f`, each with its own derived seed.
/// Runs are spread over workers; each run is sequential inside.
pub fn run_many(f: &BenchmarkFunction, base: &ScaConfig, runs: usize, master: u64, exec: Execution) -> Result<Vec<ScaOutcome>> {
    exec.map_indexed(runs, |k| {
        let config = ScaConfig {
            seed: run_seed(master, f.id, k),
            ..base.clone()
        };
        sca::optimize(|x| f.value(x), &config, Execution::Sequential)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_metadata() {
        let r = registry();
        assert_eq!(r.len(), 9);
        let tf6 = &r[5];
        assert_eq!((tf6.dim, tf6.range, tf6.f_min), (2, (-65.0, 65.0), 1.0));
        let tf8 = &r[7];
        assert_eq!((tf8.dim, tf8.range, tf8.f_min), (10, (-5.0, 5.0), 0.0));
        assert!(tf8.variant().unwrap().contains("fixed-seed"));
        assert_eq!(r[2].f_min, -418.9829 * 30.0);
    }

    #[test]
    fn point_values() {
        assert_eq!(lookup("tf4").unwrap().evaluate(&[0.0; 30]).unwrap(), 0.0);
        assert_eq!(lookup("tf2").unwrap().evaluate(&[1.0; 30]).unwrap(), 0.0);
        let gp = lookup("tf7").unwrap().evaluate(&[0.0, -1.0]).unwrap();
        assert!((gp - 3.0).abs() < 1e-9);
        let s = lookup("tf3").unwrap().evaluate(&[420.9687; 30]).unwrap();
        assert!((s + 418.9829 * 30.0).abs() < 0.5, "{s}");
    }

    #[test]
    fn known_optima_hit_f_min() {
        for f in registry() {
            let Some(x) = f.optimum() else { continue };
            let tol = if f.id == FunctionId::Tf3 { 0.5 } else { 1e-6 };
            let v = f.evaluate(&x).unwrap();
            assert!((v - f.f_min).abs() <= tol, "{}: {v}", f.id);
        }
    }

    #[test]
    fn foxholes_minimum_near_declared() {
        let v = lookup("tf6").unwrap().evaluate(&[-32.0, -32.0]).unwrap();
        assert!((v - 0.998).abs() < 1e-3, "{v}");
    }

    #[test]
    fn random_points_respect_lower_bound() {
        let mut s = RngStream::new(17, 0);
        for id in ["tf1", "tf2", "tf4", "tf7"] {
            let f = lookup(id).unwrap();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..f.dim).map(|_| s.uniform_in(f.range.0, f.range.1)).collect();
                assert!(f.evaluate(&x).unwrap() >= f.f_min - 1e-9);
            }
        }
    }

    #[test]
    fn checks_length_and_box() {
        let f = lookup("tf1").unwrap();
        assert!(matches!(f.evaluate(&[0.0; 3]), Err(Error::Dimension(_))));
        let mut x = vec![0.0; 30];
        x[4] = 11.0;
        assert!(matches!(f.evaluate(&x), Err(Error::Domain(_))));
        assert!("tf10".parse::<FunctionId>().is_err());
    }

    #[test]
    fn dimension_override() {
        let f = lookup("tf1").unwrap().with_dim(10).unwrap();
        assert_eq!(f.evaluate(&[0.0; 10]).unwrap(), 0.0);
        assert!(lookup("tf7").unwrap().with_dim(3).is_err());
        let c = lookup("tf9").unwrap().with_dim(4).unwrap();
        let o = c.optimum().unwrap();
        assert_eq!(o.len(), 4);
        assert!(c.evaluate(&o).unwrap().abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let a = lookup("tf8").unwrap();
        let b = lookup("tf8").unwrap();
        let x = vec![0.3; 10];
        assert_eq!(a.evaluate(&x).unwrap(), b.evaluate(&x).unwrap());
    }
}
