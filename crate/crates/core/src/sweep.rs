//! Three-factor, four-level sensitivity sweep over (architecture, `a`,
//! batch size) with per-level mean losses.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnn::CnnArchitecture;
use crate::dataset::ImageRecord;
use crate::exec::Execution;
use crate::numerics::RngStream;
use crate::pipeline::{train_pipeline, PipelineConfig};
use crate::{Error, Result};

pub const LEVELS: usize = 4;
pub const FACTORS: [&str; 3] = ["layers", "a", "batch"];

/// Level indices `(layers, a, batch)` of the 16 experiments. Every level of
/// every factor occurs exactly four times.
pub const DESIGN: [[usize; 3]; 16] = [
    [0, 0, 0],
    [0, 1, 1],
    [0, 2, 2],
    [0, 3, 3],
    [1, 0, 1],
    [1, 1, 0],
    [1, 2, 3],
    [1, 3, 2],
    [2, 0, 0],
    [2, 1, 3],
    [2, 2, 1],
    [2, 3, 2],
    [3, 0, 3],
    [3, 1, 2],
    [3, 2, 1],
    [3, 3, 0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLevels {
    /// Architecture strings.
    pub layers: Vec<String>,
    pub a: Vec<f64>,
    pub batch: Vec<usize>,
}

impl Default for SweepLevels {
    fn default() -> Self {
        Self {
            layers: ["in_4c_2p_8c_2p", "in_6c_2p_12c_2p", "in_8c_2p_16c_2p", "in_10c_2p_20c_2p"]
                .map(String::from)
                .to_vec(),
            a: vec![0.25, 0.5, 0.75, 1.0],
            batch: vec![6, 8, 10, 12],
        }
    }
}

impl SweepLevels {
    pub fn validate(&self) -> Result<Vec<CnnArchitecture>> {
        for (name, len) in [("layers", self.layers.len()), ("a", self.a.len()), ("batch", self.batch.len())] {
            if len != LEVELS {
                return Err(Error::Domain(format!("factor {name} needs {LEVELS} levels, got {len}")));
            }
        }
        if let Some(a) = self.a.iter().find(|a| a.is_nan() || **a <= 0.0) {
            return Err(Error::Domain(format!("a level {a} is not positive")));
        }
        if self.batch.contains(&0) {
            return Err(Error::Domain("batch level 0".into()));
        }
        self.layers.iter().map(|s| CnnArchitecture::parse(s)).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let levels: Self = serde_json::from_str(text)?;
        levels.validate()?;
        Ok(levels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: usize,
    pub levels: [usize; 3],
    pub layers: String,
    pub a: f64,
    pub batch: usize,
    pub seed: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `level_means[factor][level]`
    pub level_means: [[f64; LEVELS]; 3],
    /// Level index with the lowest mean, per factor.
    pub best_levels: [usize; 3],
}

/// Mean loss per factor level and the argmin level per factor.
pub fn level_means(losses: &[f64; 16]) -> ([[f64; LEVELS]; 3], [usize; 3]) {
    let mut means = [[0.0; LEVELS]; 3];
    for (row, loss) in DESIGN.iter().zip(losses) {
        for f in 0..3 {
            means[f][row[f]] += loss / LEVELS as f64;
        }
    }
    let best = means.map(|m| {
        (0..LEVELS)
            .min_by(|&i, &j| m[i].total_cmp(&m[j]))
            .expect("four levels")
    });
    (means, best)
}

/// Trains one pipeline per design row. Each row's seed is a child of
/// `seed`, so rows are independent of evaluation order.
pub fn run_sweep(
    train: &[ImageRecord],
    levels: &SweepLevels,
    base: &PipelineConfig,
    seed: u64,
    exec: Execution,
) -> Result<SweepResult> {
    let archs = levels.validate()?;
    let master = RngStream::new(seed, 0);
    let rows = exec.map_indexed(DESIGN.len(), |k| -> Result<SweepRow> {
        let [l, a, b] = DESIGN[k];
        let mut config = base.clone();
        config.a = levels.a[a];
        config.pretrain.batch_size = levels.batch[b];
        let row_seed = master.child_indexed(k as u64).next_u64();
        let run = train_pipeline(train, &archs[l], &config, row_seed, exec)?;
        Ok(SweepRow {
            experiment: k + 1,
            levels: DESIGN[k],
            layers: levels.layers[l].clone(),
            a: levels.a[a],
            batch: levels.batch[b],
            seed: row_seed,
            loss: run.report.best_fitness,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let losses: [f64; 16] = std::array::from_fn(|k| rows[k].loss);
    let (level_means, best_levels) = level_means(&losses);
    Ok(SweepResult {
        rows,
        level_means,
        best_levels,
    })
}

impl SweepResult {
    /// CSV with header `experiment,layers,a,batch,seed,loss`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("experiment,layers,a,batch,seed,loss\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.experiment, r.layers, r.a, r.batch, r.seed, r.loss);
        }
        out
    }

    /// CSV with header `factor,level,value,mean_loss,best`.
    pub fn levels_csv(&self, levels: &SweepLevels) -> String {
        let mut out = String::from("factor,level,value,mean_loss,best\n");
        for (f, name) in FACTORS.iter().enumerate() {
            for l in 0..LEVELS {
                let value = match f {
                    0 => levels.layers[l].clone(),
                    1 => levels.a[l].to_string(),
                    _ => levels.batch[l].to_string(),
                };
                let _ = writeln!(
                    out,
                    "{name},{},{value},{},{}",
                    l + 1,
                    self.level_means[f][l],
                    self.best_levels[f] == l
                );
            }
        }
        out
    }
}
