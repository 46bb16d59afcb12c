//! Sine-cosine algorithm (minimization).
//!
//! Each agent moves component-wise toward or around the destination (the
//! best position found so far):
//!
//! ```text
//! x' = x + r1·sin(r2)·|r3·p − x|   if r4 < 0.5
//! x' = x + r1·cos(r2)·|r3·p − x|   otherwise
//! ```
//!
//! with `r2 ∈ [0, 2π)`, `r3 ∈ [0, 2)`, `r4 ∈ [0, 1)` drawn per dimension and
//! `r1` shrinking linearly from `a` to 0 over the run. Positions are clamped
//! to the search box after every move.
//!
//! Every agent owns a child random stream keyed by its index, so a run is
//! reproducible from its seed no matter how fitness evaluations are
//! scheduled.

use std::fmt::Write as _;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::numerics::{Matrix, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaConfig {
    pub population: usize,
    pub max_iterations: usize,
    pub a: f64,
    /// Per-dimension `[lo, hi]`.
    pub bounds: Vec<(f64, f64)>,
    /// Stop once the best fitness is at or below this value.
    pub loss_threshold: Option<f64>,
    pub seed: u64,
    /// Keep a full position snapshot per iteration.
    pub record_history: bool,
    /// Agent whose first coordinate is logged as the trajectory.
    pub trajectory_agent: usize,
}

impl ScaConfig {
    /// Defaults (population 50, 10 iterations, `a = 2`) over a uniform box.
    pub fn new(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            population: 50,
            max_iterations: 10,
            a: 2.0,
            bounds: vec![(lo, hi); dim],
            loss_threshold: None,
            seed: 0,
            record_history: false,
            trajectory_agent: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Domain("population must be at least 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Domain("max iterations must be at least 1".into()));
        }
        if self.a.is_nan() || self.a <= 0.0 {
            return Err(Error::Domain(format!("a must be positive, got {}", self.a)));
        }
        if self.bounds.is_empty() {
            return Err(Error::Domain("search space has no dimensions".into()));
        }
        if let Some(i) = self.bounds.iter().position(|&(lo, hi)| lo.is_nan() || hi.is_nan() || lo >= hi) {
            return Err(Error::Domain(format!("dimension {i}: lower bound is not below upper bound")));
        }
        if self.trajectory_agent >= self.population {
            return Err(Error::Domain("trajectory agent index exceeds the population".into()));
        }
        Ok(())
    }
}

/// Per-iteration records of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsLog {
    pub convergence: Vec<f64>,
    pub average_fitness: Vec<f64>,
    /// First coordinate of the designated agent.
    pub trajectory: Vec<f64>,
    /// Population snapshots (`population × dim`), when requested.
    pub search_history: Option<Vec<Matrix>>,
}

impl DiagnosticsLog {
    pub fn iterations(&self) -> usize {
        self.convergence.len()
    }

    /// CSV with header `iteration,best_fitness,avg_fitness,trajectory_dim0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,best_fitness,avg_fitness,trajectory_dim0\n");
        for t in 0..self.iterations() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                t, self.convergence[t], self.average_fitness[t], self.trajectory[t]
            );
        }
        out
    }

    /// CSV with header `iteration,agent,dim,value`; `None` without history.
    pub fn history_csv(&self) -> Option<String> {
        let history = self.search_history.as_ref()?;
        let mut out = String::from("iteration,agent,dim,value\n");
        for (t, snap) in history.iter().enumerate() {
            for agent in 0..snap.rows() {
                for (d, v) in snap.row(agent).iter().enumerate() {
                    let _ = writeln!(out, "{t},{agent},{d},{v}");
                }
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub diagnostics: DiagnosticsLog,
}

impl ScaOutcome {
    pub fn iterations(&self) -> usize {
        self.diagnostics.iterations()
    }
}

/// Step amplitude `a − t·a/T`.
pub fn r1_schedule(a: f64, t: usize, max_iterations: usize) -> Result<f64> {
    if max_iterations == 0 {
        return Err(Error::Domain("max iterations must be at least 1".into()));
    }
    if t > max_iterations {
        return Err(Error::Domain(format!("t = {t} exceeds T = {max_iterations}")));
    }
    Ok(a - t as f64 * a / max_iterations as f64)
}

/// One coordinate of the position update with explicit random coefficients.
#[inline]
pub fn update_component(x: f64, p: f64, r1: f64, r2: f64, r3: f64, r4: f64) -> f64 {
    let reach = (r3 * p - x).abs();
    if r4 < 0.5 {
        x + r1 * r2.sin() * reach
    } else {
        x + r1 * r2.cos() * reach
    }
}

/// Moves `x` relative to destination `p`, drawing fresh `(r2, r3, r4)` per
/// dimension from `stream`, then clamps to `bounds`.
pub fn update_position(
    x: &[f64],
    p: &[f64],
    r1: f64,
    stream: &mut RngStream,
    bounds: &[(f64, f64)],
) -> Result<Vec<f64>> {
    if x.len() != p.len() || x.len() != bounds.len() {
        return Err(Error::Dimension(format!(
            "position {}, destination {}, bounds {} differ in length",
            x.len(),
            p.len(),
            bounds.len()
        )));
    }
    let mut out = x.to_vec();
    move_agent(&mut out, p, r1, stream, bounds);
    Ok(out)
}

fn move_agent(x: &mut [f64], p: &[f64], r1: f64, stream: &mut RngStream, bounds: &[(f64, f64)]) {
    for ((xi, &pi), &(lo, hi)) in x.iter_mut().zip(p).zip(bounds) {
        let r2 = stream.uniform_in(0.0, TAU);
        let r3 = stream.uniform_in(0.0, 2.0);
        let r4 = stream.next_f64();
        *xi = update_component(*xi, pi, r1, r2, r3, r4).clamp(lo, hi);
    }
}

struct Agent {
    position: Vec<f64>,
    stream: RngStream,
}

/// Minimizes `objective` over the configured box.
///
/// Each iteration evaluates every agent, updates the destination on strict
/// improvement, records diagnostics, then (unless this was the last
/// iteration or the loss threshold is met) moves every agent with
/// `r1 = r1_schedule(a, t + 1, T)`. Non-finite objective values count
/// as `+inf`.
pub fn optimize<F>(objective: F, config: &ScaConfig, exec: Execution) -> Result<ScaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = config.dim();
    let root = RngStream::new(config.seed, 0);
    let mut agents: Vec<Agent> = (0..config.population)
        .map(|i| {
            let mut stream = root.child_indexed(i as u64);
            let position = config.bounds.iter().map(|&(lo, hi)| stream.uniform_in(lo, hi)).collect();
            Agent { position, stream }
        })
        .collect();

    let mut best_fitness = f64::INFINITY;
    let mut destination: Option<Vec<f64>> = None;
    let mut log = DiagnosticsLog {
        search_history: config.record_history.then(Vec::new),
        ..Default::default()
    };

    for t in 0..config.max_iterations {
        let fitness = exec.map_slice(&agents, |agent| {
            let f = objective(&agent.position);
            if f.is_finite() {
                f
            } else {
                f64::INFINITY
            }
        });
        for (agent, &f) in agents.iter().zip(&fitness) {
            if f < best_fitness {
                best_fitness = f;
                destination = Some(agent.position.clone());
            }
        }
        let dest = destination.get_or_insert_with(|| agents[0].position.clone());

        log.convergence.push(best_fitness);
        log.average_fitness.push(fitness.iter().sum::<f64>() / fitness.len() as f64);
        log.trajectory.push(agents[config.trajectory_agent].position[0]);
        if let Some(history) = log.search_history.as_mut() {
            let data = agents.iter().flat_map(|a| a.position.iter().copied()).collect();
            history.push(Matrix::from_vec(agents.len(), dim, data)?);
        }

        let reached = config.loss_threshold.is_some_and(|thr| best_fitness <= thr);
        if reached || t + 1 == config.max_iterations {
            break;
        }
        let r1 = r1_schedule(config.a, t + 1, config.max_iterations)?;
        let dest: &[f64] = dest;
        exec.for_each_mut(&mut agents, |_, agent| {
            move_agent(&mut agent.position, dest, r1, &mut agent.stream, &config.bounds);
        });
    }

    Ok(ScaOutcome {
        best_position: destination.expect("at least one iteration ran"),
        best_fitness,
        diagnostics: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(r1_schedule(2.0, 0, 10).unwrap(), 2.0);
        assert_eq!(r1_schedule(2.0, 10, 10).unwrap(), 0.0);
        assert_eq!(r1_schedule(2.0, 5, 10).unwrap(), 1.0);
        assert!(matches!(r1_schedule(2.0, 11, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn schedule_strictly_decreasing() {
        let v: Vec<f64> = (0..=50).map(|t| r1_schedule(2.0, t, 50).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_amplitude_keeps_position() {
        let mut s = RngStream::new(1, 0);
        let x = vec![0.3, -0.2, 0.9];
        let out = update_position(&x, &[1.0, 1.0, 1.0], 0.0, &mut s, &[(-1.0, 1.0); 3]).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn destination_is_a_fixed_point_with_unit_r3() {
        for &(r2, r4) in &[(0.4, 0.2), (2.0, 0.7)] {
            assert_eq!(update_component(0.37, 0.37, 2.0, r2, 1.0, r4), 0.37);
        }
    }

    #[test]
    fn step_bounded_by_amplitude() {
        let mut s = RngStream::new(2, 0);
        for _ in 0..1000 {
            let (x, p) = (s.uniform_in(-5.0, 5.0), s.uniform_in(-5.0, 5.0));
            let (r2, r3, r4) = (s.uniform_in(0.0, TAU), s.uniform_in(0.0, 2.0), s.next_f64());
            let r1 = s.uniform_in(0.0, 2.0);
            let step = (update_component(x, p, r1, r2, r3, r4) - x).abs();
            assert!(step <= r1 * (r3 * p - x).abs() + 1e-12);
        }
    }

    #[test]
    fn update_clamps() {
        let mut s = RngStream::new(3, 0);
        let bounds = vec![(-1.0, 1.0); 20];
        for _ in 0..50 {
            let x: Vec<f64> = (0..20).map(|_| s.uniform_in(-1.0, 1.0)).collect();
            let p: Vec<f64> = (0..20).map(|_| s.uniform_in(-1.0, 1.0)).collect();
            let out = update_position(&x, &p, 2.0, &mut s, &bounds).unwrap();
            assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        assert!(update_position(&[0.0], &[0.0, 1.0], 1.0, &mut s, &bounds[..1]).is_err());
    }

    #[test]
    fn constant_objective_stops_at_threshold() {
        let mut cfg = ScaConfig::new(3, -1.0, 1.0);
        cfg.loss_threshold = Some(0.0);
        let out = optimize(|_| 0.0, &cfg, Execution::Sequential).unwrap();
        assert_eq!(out.iterations(), 1);
        assert_eq!(out.best_fitness, 0.0);
    }

    #[test]
    fn runs_exactly_t_iterations_without_threshold() {
        let mut cfg = ScaConfig::new(2, -1.0, 1.0);
        cfg.max_iterations = 17;
        let out = optimize(|x| x[0] * x[0] + x[1] * x[1], &cfg, Execution::Sequential).unwrap();
        assert_eq!(out.iterations(), 17);
        let d = &out.diagnostics;
        assert_eq!(d.average_fitness.len(), 17);
        assert_eq!(d.trajectory.len(), 17);
        assert!(d.convergence.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn non_finite_objective_is_infinite_fitness() {
        let mut cfg = ScaConfig::new(1, -1.0, 1.0);
        cfg.max_iterations = 5;
        let out = optimize(|x| if x[0] > 0.0 { f64::NAN } else { -x[0] }, &cfg, Execution::Sequential).unwrap();
        assert!(out.best_fitness.is_finite());
        assert!(out.best_position[0] <= 0.0);
    }

    #[test]
    fn sphere_median_over_seeds() {
        let mut finals: Vec<f64> = (0..10)
            .map(|seed| {
                let mut cfg = ScaConfig::new(2, -5.0, 5.0);
                cfg.population = 30;
                cfg.max_iterations = 200;
                cfg.seed = seed;
                optimize(|x| x[0] * x[0] + x[1] * x[1], &cfg, Execution::Sequential)
                    .unwrap()
                    .best_fitness
            })
            .collect();
        finals.sort_by(f64::total_cmp);
        let median = 0.5 * (finals[4] + finals[5]);
        assert!(median < 1e-2, "median {median}");
    }

    #[test]
    fn history_and_bounds() {
        let mut cfg = ScaConfig::new(3, -2.0, 3.0);
        cfg.max_iterations = 8;
        cfg.population = 6;
        cfg.record_history = true;
        let out = optimize(|x| x.iter().map(|v| (v - 2.9).abs()).sum(), &cfg, Execution::Sequential).unwrap();
        let hist = out.diagnostics.search_history.as_ref().unwrap();
        assert_eq!(hist.len(), 8);
        assert!(hist.iter().all(|m| m.as_slice().iter().all(|v| (-2.0..=3.0).contains(v))));
        let csv = out.diagnostics.history_csv().unwrap();
        assert_eq!(csv.lines().count(), 1 + 8 * 6 * 3);
        assert!(out.diagnostics.to_csv().starts_with("iteration,best_fitness,avg_fitness,trajectory_dim0\n"));
    }

    #[test]
    fn execution_mode_does_not_change_results() {
        let mut cfg = ScaConfig::new(5, -3.0, 3.0);
        cfg.max_iterations = 30;
        cfg.seed = 99;
        cfg.record_history = true;
        let f = |x: &[f64]| x.iter().map(|v| v * v - v.cos()).sum::<f64>();
        let a = optimize(f, &cfg, Execution::Sequential).unwrap();
        let b = optimize(f, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ScaConfig::new(2, -1.0, 1.0);
        cfg.population = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = ScaConfig::new(2, 1.0, 1.0);
        assert!(cfg.validate().is_err());
        cfg = ScaConfig::new(2, -1.0, 1.0);
        cfg.a = 0.0;
        assert!(cfg.validate().is_err());
        cfg = ScaConfig::new(2, -1.0, 1.0);
        cfg.max_iterations = 0;
        assert!(cfg.validate().is_err());
    }
}
