//! Gradient-trained replacement for the ELM head, used as a timing and
//! accuracy reference: `n → L sigmoid → m softmax`, cross-entropy loss.

use crate::cnn::PretrainConfig;
use crate::elm::hidden_output_matrix;
use crate::numerics::{Matrix, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GdbpHead {
    /// `L × n`
    pub hidden_weights: Matrix,
    pub hidden_biases: Vec<f64>,
    /// `m × L`
    pub output_weights: Matrix,
    pub output_biases: Vec<f64>,
}

fn scaled_uniform(stream: &mut RngStream, rows: usize, cols: usize) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    stream.matrix(rows, cols, -limit, limit)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    z.iter_mut().for_each(|v| *v = (*v - max).exp());
    let sum: f64 = z.iter().sum();
    z.iter_mut().for_each(|v| *v /= sum);
}

impl GdbpHead {
    pub fn new(inputs: usize, hidden: usize, outputs: usize, stream: &mut RngStream) -> Self {
        Self {
            hidden_weights: scaled_uniform(stream, hidden, inputs),
            hidden_biases: vec![0.0; hidden],
            output_weights: scaled_uniform(stream, outputs, hidden),
            output_biases: vec![0.0; outputs],
        }
    }

    /// Batched forward pass: hidden activations `B×L` and probabilities `B×m`.
    fn forward(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let h = hidden_output_matrix(x, &self.hidden_weights, &self.hidden_biases)?;
        let mut p = h.matmul_transposed(&self.output_weights)?;
        for r in 0..p.rows() {
            let row = p.row_mut(r);
            row.iter_mut().zip(&self.output_biases).for_each(|(v, b)| *v += b);
            softmax_in_place(row);
        }
        Ok((h, p))
    }

    /// Class probabilities, one row per sample.
    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.hidden_weights.cols() {
            return Err(Error::Shape(format!(
                "head expects {} features, got {}",
                self.hidden_weights.cols(),
                features.cols()
            )));
        }
        Ok(self.forward(features)?.1)
    }

    /// Mini-batch SGD; returns the mean cross-entropy of each epoch.
    pub fn train(
        &mut self,
        features: &Matrix,
        labels: &[usize],
        config: &PretrainConfig,
        stream: &mut RngStream,
    ) -> Result<Vec<f64>> {
        let (n, outputs) = (self.hidden_weights.cols(), self.output_weights.rows());
        if features.cols() != n || features.rows() != labels.len() {
            return Err(Error::Shape("features and labels disagree with the head".into()));
        }
        if features.rows() == 0 || config.batch_size == 0 {
            return Err(Error::Domain("training needs samples and a positive batch size".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= outputs) {
            return Err(Error::Domain(format!("label {l} outside 0..{outputs}")));
        }
        let mut order: Vec<usize> = (0..features.rows()).collect();
        let mut trace = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            stream.shuffle(&mut order);
            let mut total = 0.0;
            for batch in order.chunks(config.batch_size) {
                let x = features.select_rows(batch);
                let (h, mut dz2) = self.forward(&x)?;
                // dz2 = p − onehot
                for (r, &i) in batch.iter().enumerate() {
                    let row = dz2.row_mut(r);
                    total -= row[labels[i]].max(f64::MIN_POSITIVE).ln();
                    row[labels[i]] -= 1.0;
                }
                let mut dz1 = dz2.matmul(&self.output_weights)?;
                dz1.as_mut_slice()
                    .iter_mut()
                    .zip(h.as_slice())
                    .for_each(|(d, &a)| *d *= a * (1.0 - a));
                let gw2 = dz2.transposed_matmul(&h)?;
                let gw1 = dz1.transposed_matmul(&x)?;
                let step = config.learning_rate / batch.len() as f64;
                let apply = |p: &mut [f64], g: &[f64]| p.iter_mut().zip(g).for_each(|(p, g)| *p -= step * g);
                apply(self.hidden_weights.as_mut_slice(), gw1.as_slice());
                apply(&mut self.hidden_biases, &column_sums(&dz1));
                apply(self.output_weights.as_mut_slice(), gw2.as_slice());
                apply(&mut self.output_biases, &column_sums(&dz2));
            }
            trace.push(total / features.rows() as f64);
        }
        Ok(trace)
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for row in m.row_iter() {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_separable_blobs() {
        let mut s = RngStream::new(1, 0);
        let labels: Vec<usize> = (0..80).map(|i| i % 2).collect();
        let x = Matrix::from_fn(80, 2, |i, _| if labels[i] == 1 { 1.0 } else { -1.0 } + 0.3 * s.standard_normal());
        let mut head = GdbpHead::new(2, 8, 2, &mut s);
        let config = PretrainConfig { learning_rate: 0.5, batch_size: 8, epochs: 30 };
        let trace = head.train(&x, &labels, &config, &mut s).unwrap();
        assert!(trace.last().unwrap() < &trace[0]);
        let p = head.predict(&x).unwrap();
        let correct = (0..80).filter(|&i| (p[(i, 1)] >= 0.5) == (labels[i] == 1)).count();
        assert!(correct >= 76, "{correct}/80");
        for row in p.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut s = RngStream::new(2, 0);
        let x = s.matrix(1, 3, -1.0, 1.0);
        let head = GdbpHead::new(3, 4, 2, &mut s);
        let loss = |h: &GdbpHead| -h.predict(&x).unwrap()[(0, 1)].ln();
        // one SGD step with lr = eps changes loss by about -eps·|g|²
        let mut trained = head.clone();
        let eps = 1e-6;
        let config = PretrainConfig { learning_rate: eps, batch_size: 1, epochs: 1 };
        trained.train(&x, &[1], &config, &mut s).unwrap();
        let mut g2 = 0.0;
        let pairs = [
            (head.hidden_weights.as_slice(), trained.hidden_weights.as_slice()),
            (head.hidden_biases.as_slice(), trained.hidden_biases.as_slice()),
            (head.output_weights.as_slice(), trained.output_weights.as_slice()),
            (head.output_biases.as_slice(), trained.output_biases.as_slice()),
        ];
        for (a, b) in pairs {
            g2 += a.iter().zip(b).map(|(p, q)| ((p - q) / eps).powi(2)).sum::<f64>();
        }
        let delta = loss(&trained) - loss(&head);
        assert!(((-delta / eps) - g2).abs() / g2 < 1e-3, "{} vs {g2}", -delta / eps);
    }
}
