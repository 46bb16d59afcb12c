//! CNN feature extractor with an SCA-evolved ELM head.
//!
//! An ELM head with `n` inputs and `L` hidden neurons is searched as the
//! flat vector `[W row-major (L×n), b (L)]`. Each candidate is scored by
//! solving the output weights in closed form on the training features and
//! measuring `½·√(Σ(o − u)² / N)`.

mod baseline;
mod bundle;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use baseline::GdbpHead;
pub use bundle::{BundleManifest, BUNDLE_CNN_FILE, BUNDLE_ELM_FILE, BUNDLE_MANIFEST_FILE};

use crate::cnn::{CnnArchitecture, CnnModel, PretrainConfig};
use crate::dataset::{class_indices, ClassCounts, ImageRecord, Label};
use crate::elm::{self, ElmModel, DEFAULT_HIDDEN, DEFAULT_OUTPUTS};
use crate::evaluation::{time_action, Timing};
use crate::exec::Execution;
use crate::numerics::{Matrix, RngStream};
use crate::sca::{self, DiagnosticsLog, ScaConfig};
use crate::{Error, Result};

/// Candidate length for `n` inputs and `hidden` neurons.
pub fn candidate_len(n: usize, hidden: usize) -> usize {
    n * hidden + hidden
}

/// Flattens `W` (`L×n`) row by row, then appends `b`.
pub fn encode(weights: &Matrix, biases: &[f64]) -> Result<Vec<f64>> {
    if biases.len() != weights.rows() {
        return Err(Error::Shape(format!(
            "{} weight rows but {} biases",
            weights.rows(),
            biases.len()
        )));
    }
    let mut v = Vec::with_capacity(weights.as_slice().len() + biases.len());
    v.extend_from_slice(weights.as_slice());
    v.extend_from_slice(biases);
    Ok(v)
}

pub fn decode(candidate: &[f64], n: usize, hidden: usize) -> Result<(Matrix, Vec<f64>)> {
    if candidate.len() != candidate_len(n, hidden) {
        return Err(Error::Shape(format!(
            "candidate has length {} but n = {n}, L = {hidden} needs {}",
            candidate.len(),
            candidate_len(n, hidden)
        )));
    }
    let (w, b) = candidate.split_at(n * hidden);
    Ok((Matrix::from_vec(hidden, n, w.to_vec())?, b.to_vec()))
}

/// `½·√(Σ(o − u)² / N)` over all entries, `N` = number of rows.
pub fn loss(outputs: &Matrix, targets: &Matrix) -> Result<f64> {
    if outputs.shape() != targets.shape() {
        return Err(Error::Dimension(format!(
            "outputs {:?} vs targets {:?}",
            outputs.shape(),
            targets.shape()
        )));
    }
    if targets.rows() == 0 {
        return Err(Error::Domain("loss over zero samples".into()));
    }
    let sq: f64 = outputs
        .as_slice()
        .iter()
        .zip(targets.as_slice())
        .map(|(o, u)| (o - u) * (o - u))
        .sum();
    Ok(0.5 * (sq / targets.rows() as f64).sqrt())
}

/// Training loss of the ELM decoded from `candidate`, with output weights
/// solved on `features`. Non-finite values become `+inf`.
pub fn fitness(candidate: &[f64], features: &Matrix, targets: &Matrix, n: usize, hidden: usize) -> Result<f64> {
    if features.rows() != targets.rows() {
        return Err(Error::Dimension(format!(
            "{} feature rows vs {} target rows",
            features.rows(),
            targets.rows()
        )));
    }
    let (w, b) = decode(candidate, n, hidden)?;
    let model = ElmModel::fit(w, b, features, targets)?;
    let value = loss(&model.predict(features)?, targets)?;
    Ok(if value.is_finite() { value } else { f64::INFINITY })
}

/// Training loss of an already fitted model.
pub fn model_loss(model: &ElmModel, features: &Matrix, targets: &Matrix) -> Result<f64> {
    loss(&model.predict(features)?, targets)
}

/// SCA settings over the `[-1, 1]` candidate box.
pub fn candidate_config(n: usize, hidden: usize, population: usize, max_iterations: usize, a: f64, seed: u64) -> ScaConfig {
    ScaConfig {
        population,
        max_iterations,
        a,
        seed,
        ..ScaConfig::new(candidate_len(n, hidden), -1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedElm {
    pub model: ElmModel,
    pub best_fitness: f64,
    pub diagnostics: DiagnosticsLog,
}

/// Searches ELM input weights and biases with SCA, then re-solves the
/// output weights from the best candidate.
pub fn evolve_elm(
    features: &Matrix,
    targets: &Matrix,
    config: &ScaConfig,
    hidden: usize,
    exec: Execution,
) -> Result<EvolvedElm> {
    if features.rows() == 0 || features.cols() == 0 {
        return Err(Error::Domain("evolve_elm needs a non-empty feature matrix".into()));
    }
    if features.rows() != targets.rows() {
        return Err(Error::Dimension(format!(
            "{} feature rows vs {} target rows",
            features.rows(),
            targets.rows()
        )));
    }
    let n = features.cols();
    if config.dim() != candidate_len(n, hidden) {
        return Err(Error::Shape(format!(
            "search space has {} dimensions, n = {n}, L = {hidden} needs {}",
            config.dim(),
            candidate_len(n, hidden)
        )));
    }
    let outcome = sca::optimize(
        |c| fitness(c, features, targets, n, hidden).unwrap_or(f64::INFINITY),
        config,
        exec,
    )?;
    let (w, b) = decode(&outcome.best_position, n, hidden)?;
    Ok(EvolvedElm {
        model: ElmModel::fit(w, b, features, targets)?,
        best_fitness: outcome.best_fitness,
        diagnostics: outcome.diagnostics,
    })
}

/// Training loss of a randomly initialized ELM (weights in `[-1, 1)`).
pub fn random_elm_loss(features: &Matrix, targets: &Matrix, hidden: usize, stream: &mut RngStream) -> Result<f64> {
    let (w, b) = elm::random_elm(features.cols(), hidden, stream);
    model_loss(&ElmModel::fit(w, b, features, targets)?, features, targets)
}

/// Positive-class softmax probability of a `[negative, positive]` score pair.
pub fn expected_probability_grade(scores: &[f64]) -> Result<f64> {
    let [neg, pos] = scores else {
        return Err(Error::Shape(format!("expected 2 scores, got {}", scores.len())));
    };
    Ok(1.0 / (1.0 + (neg - pos).exp()))
}

/// Positive iff `grade >= threshold`.
pub fn decide(grade: f64, threshold: f64) -> Label {
    Label::from_decision(grade >= threshold)
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub cnn: CnnModel,
    pub elm: ElmModel,
    pub threshold: f64,
}

impl PipelineModel {
    pub fn new(cnn: CnnModel, elm: ElmModel, threshold: f64) -> Result<Self> {
        if !cnn.is_frozen() {
            return Err(Error::State("pipeline needs a frozen CNN".into()));
        }
        if cnn.feature_dim() != elm.inputs() {
            return Err(Error::Shape(format!(
                "CNN emits {} features but the ELM expects {}",
                cnn.feature_dim(),
                elm.inputs()
            )));
        }
        if elm.outputs() != DEFAULT_OUTPUTS {
            return Err(Error::Shape(format!("ELM must have 2 outputs, has {}", elm.outputs())));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Domain(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(Self { cnn, elm, threshold })
    }

    pub fn predict_epg(&self, image: &Matrix) -> Result<f64> {
        let f = self.cnn.forward_features(image)?;
        let x = Matrix::from_vec(1, f.len(), f)?;
        expected_probability_grade(self.elm.predict(&x)?.row(0))
    }

    /// Grades for a batch, in input order.
    pub fn predict_epgs<M: AsRef<Matrix> + Sync>(&self, images: &[M], exec: Execution) -> Result<Vec<f64>> {
        let features = self.cnn.extract_features(images, exec)?;
        self.grades_from_features(&features)
    }

    pub fn grades_from_features(&self, features: &Matrix) -> Result<Vec<f64>> {
        let scores = self.elm.predict(features)?;
        scores.row_iter().map(expected_probability_grade).collect()
    }

    pub fn classify(&self, image: &Matrix, threshold: f64) -> Result<Label> {
        Ok(decide(self.predict_epg(image)?, threshold))
    }
}

/// Hyperparameters of one end-to-end training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub pretrain: PretrainConfig,
    pub population: usize,
    pub max_iterations: usize,
    pub a: f64,
    pub hidden: usize,
    pub loss_threshold: Option<f64>,
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pretrain: PretrainConfig::default(),
            population: 50,
            max_iterations: 10,
            a: 2.0,
            hidden: DEFAULT_HIDDEN,
            loss_threshold: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Seed of the SCA run derived from a master seed.
pub fn sca_seed(master: u64) -> u64 {
    RngStream::new(master, 0).child("sca").next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub pretrain_loss: Vec<f64>,
    pub best_fitness: f64,
    pub diagnostics: DiagnosticsLog,
    /// `pretrain`, `extract` and `evolve` wall-clock times.
    pub timings: BTreeMap<String, Timing>,
}

impl TrainReport {
    /// CSV with header `epoch,loss`.
    pub fn pretrain_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.pretrain_loss.iter().enumerate() {
            let _ = writeln!(out, "{},{l}", e + 1);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub model: PipelineModel,
    pub report: TrainReport,
    /// Frozen-CNN features of the training images, in input order.
    pub features: Matrix,
}

/// Pretrains the CNN, freezes it, extracts training features and evolves
/// the ELM head. Randomness comes from labelled children of `seed`.
pub fn train_pipeline(
    train: &[ImageRecord],
    arch: &CnnArchitecture,
    config: &PipelineConfig,
    seed: u64,
    exec: Execution,
) -> Result<TrainedPipeline> {
    let counts = ClassCounts::of(train);
    if counts.positive == 0 || counts.negative == 0 {
        return Err(Error::Domain(format!(
            "training needs both classes, got {} positive / {} negative",
            counts.positive, counts.negative
        )));
    }
    let master = RngStream::new(seed, 0);
    let labels = class_indices(train);
    let targets = elm::one_hot(&labels, DEFAULT_OUTPUTS)?;

    let mut cnn = CnnModel::new(arch.clone(), DEFAULT_OUTPUTS, &mut master.child("cnn-init"));
    let mut shuffle = master.child("data-shuffle");
    let (trace, pretrain_time) =
        time_action(train.len(), || cnn.pretrain_gdbp(train, &labels, &config.pretrain, &mut shuffle, exec));
    let pretrain_loss = trace?;
    let cnn = cnn.freeze();

    let (features, extract_time) = time_action(train.len(), || cnn.extract_features(train, exec));
    let features = features?;

    let sca_config = ScaConfig {
        loss_threshold: config.loss_threshold,
        ..candidate_config(
            features.cols(),
            config.hidden,
            config.population,
            config.max_iterations,
            config.a,
            sca_seed(seed),
        )
    };
    let (evolved, evolve_time) = time_action(config.population * config.max_iterations, || {
        evolve_elm(&features, &targets, &sca_config, config.hidden, exec)
    });
    let evolved = evolved?;

    let timings = BTreeMap::from([
        ("pretrain".to_string(), pretrain_time),
        ("extract".to_string(), extract_time),
        ("evolve".to_string(), evolve_time),
    ]);
    Ok(TrainedPipeline {
        model: PipelineModel::new(cnn, evolved.model, config.threshold)?,
        report: TrainReport {
            pretrain_loss,
            best_fitness: evolved.best_fitness,
            diagnostics: evolved.diagnostics,
            timings,
        },
        features,
    })
}
