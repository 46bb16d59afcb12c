//! Extreme learning machine head.
//!
//! Hidden layer `H = sigmoid(X Wᵀ + b)` with fixed (random or evolved)
//! input weights; output weights `Q = H⁺ T` are the minimum-norm
//! least-squares solution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::{solve_least_squares, Matrix, RngStream};
use crate::{Error, Result, FORMAT_VERSION};

pub const DEFAULT_HIDDEN: usize = 120;
pub const DEFAULT_OUTPUTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `β×L` matrix with entry `(j, i) = sigmoid(w_i · x_j + b_i)`.
pub fn hidden_output_matrix(x: &Matrix, weights: &Matrix, biases: &[f64]) -> Result<Matrix> {
    if x.cols() != weights.cols() {
        return Err(Error::Shape(format!(
            "samples have {} features but input weights expect {}",
            x.cols(),
            weights.cols()
        )));
    }
    if biases.len() != weights.rows() {
        return Err(Error::Shape(format!(
            "{} hidden neurons but {} biases",
            weights.rows(),
            biases.len()
        )));
    }
    let mut h = x.matmul_transposed(weights)?;
    for j in 0..h.rows() {
        for (v, &b) in h.row_mut(j).iter_mut().zip(biases) {
            *v = sigmoid(*v + b);
        }
    }
    Ok(h)
}

/// Output weights minimizing `‖HQ − T‖_F`, minimum norm among minimizers.
pub fn train_output_weights(h: &Matrix, targets: &Matrix) -> Result<Matrix> {
    if h.rows() != targets.rows() {
        return Err(Error::Shape(format!(
            "H has {} rows but targets have {}",
            h.rows(),
            targets.rows()
        )));
    }
    solve_least_squares(h, targets)
}

/// Input weights (`hidden × inputs`) and biases uniform in `[-1, 1)`.
pub fn random_elm(inputs: usize, hidden: usize, stream: &mut RngStream) -> (Matrix, Vec<f64>) {
    let w = stream.matrix(hidden, inputs, -1.0, 1.0);
    let b = (0..hidden).map(|_| stream.uniform_in(-1.0, 1.0)).collect();
    (w, b)
}

/// One-hot targets in {0, 1}, one row per label.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut t = Matrix::zeros(labels.len(), classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Domain(format!("label {l} outside 0..{classes}")));
        }
        t[(i, l)] = 1.0;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    /// `hidden × inputs`
    pub input_weights: Matrix,
    pub biases: Vec<f64>,
    /// `hidden × outputs`
    pub output_weights: Matrix,
    pub activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct ElmFile {
    format_version: u32,
    n: usize,
    hidden: usize,
    m: usize,
    activation: Activation,
    w: Matrix,
    b: Vec<f64>,
    q: Matrix,
}

impl ElmModel {
    /// Solves the output weights for fixed input weights on `(x, targets)`.
    pub fn fit(input_weights: Matrix, biases: Vec<f64>, x: &Matrix, targets: &Matrix) -> Result<Self> {
        let h = hidden_output_matrix(x, &input_weights, &biases)?;
        let output_weights = train_output_weights(&h, targets)?;
        Ok(Self {
            input_weights,
            biases,
            output_weights,
            activation: Activation::Sigmoid,
        })
    }

    pub fn inputs(&self) -> usize {
        self.input_weights.cols()
    }

    pub fn hidden(&self) -> usize {
        self.input_weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.output_weights.cols()
    }

    /// Raw scores `H Q`, one row per sample.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.inputs() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.inputs(),
                x.cols()
            )));
        }
        hidden_output_matrix(x, &self.input_weights, &self.biases)?.matmul(&self.output_weights)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ElmFile {
            format_version: FORMAT_VERSION,
            n: self.inputs(),
            hidden: self.hidden(),
            m: self.outputs(),
            activation: self.activation,
            w: self.input_weights.clone(),
            b: self.biases.clone(),
            q: self.output_weights.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ElmFile = serde_json::from_str(text)?;
        if f.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: f.format_version,
                expected: FORMAT_VERSION,
            });
        }
        if f.w.shape() != (f.hidden, f.n) || f.b.len() != f.hidden || f.q.shape() != (f.hidden, f.m) {
            return Err(Error::Shape("ELM arrays disagree with declared n / hidden / m".into()));
        }
        if !(f.w.is_finite() && f.q.is_finite() && f.b.iter().all(|v| v.is_finite())) {
            return Err(Error::Domain("ELM weights must be finite".into()));
        }
        Ok(Self {
            input_weights: f.w,
            biases: f.b,
            output_weights: f.q,
            activation: f.activation,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
