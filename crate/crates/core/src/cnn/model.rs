use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{CnnArchitecture, Stage};
use super::layers::{conv_backward, conv_forward, pool_backward, pool_forward, ConvLayer, Layer, PoolLayer};
use crate::exec::Execution;
use crate::numerics::{Matrix, RngStream};
use crate::{Error, Result, FORMAT_VERSION};

/// Fully connected softmax head used only while pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHead {
    pub classes: usize,
    pub inputs: usize,
    /// `[class][input]`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Kind of each trainable parameter block, in flattening order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamClass {
    ConvKernel,
    ConvBias,
    PoolScale,
    PoolBias,
    HeadWeight,
    HeadBias,
}

/// Mini-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 12,
            epochs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    arch: CnnArchitecture,
    layers: Vec<Layer>,
    head: Option<DenseHead>,
    classes: usize,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    architecture: String,
    input_size: usize,
    classes: usize,
    frozen: bool,
    layers: Vec<Layer>,
    head: Option<DenseHead>,
}

fn glorot(stream: &mut RngStream, fan_in: usize, fan_out: usize, count: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count).map(|_| stream.uniform_in(-limit, limit)).collect()
}

impl CnnModel {
    /// Fresh model with scaled-uniform kernels and head weights, zero
    /// biases, and pooling scales of `1/factor²` (window mean).
    pub fn new(arch: CnnArchitecture, classes: usize, stream: &mut RngStream) -> Self {
        let mut model = Self::zeroed(arch, classes);
        for layer in &mut model.layers {
            match layer {
                Layer::Conv(c) => {
                    let kk = c.kernel * c.kernel;
                    c.weights = glorot(stream, c.in_maps * kk, c.out_maps * kk, c.weights.len());
                }
                Layer::Pool(p) => {
                    let s = 1.0 / (p.factor * p.factor) as f64;
                    p.scale.iter_mut().for_each(|v| *v = s);
                }
            }
        }
        if let Some(h) = model.head.as_mut() {
            h.weights = glorot(stream, h.inputs, h.classes, h.weights.len());
        }
        model
    }

    /// Model with every parameter set to zero.
    pub fn zeroed(arch: CnnArchitecture, classes: usize) -> Self {
        let chain = arch.shape_chain();
        let layers = arch
            .stages()
            .iter()
            .enumerate()
            .map(|(i, stage)| match *stage {
                Stage::Conv { maps, kernel } => Layer::Conv(ConvLayer::zeros(chain[i].0, maps, kernel)),
                Stage::Pool { factor } => Layer::Pool(PoolLayer::new(chain[i].0, factor, 0.0, 0.0)),
            })
            .collect();
        let inputs = arch.feature_dim();
        Self {
            arch,
            layers,
            head: Some(DenseHead {
                classes,
                inputs,
                weights: vec![0.0; classes * inputs],
                bias: vec![0.0; classes],
            }),
            classes,
            frozen: false,
        }
    }

    pub fn architecture(&self) -> &CnnArchitecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn head(&self) -> Option<&DenseHead> {
        self.head.as_ref()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn feature_dim(&self) -> usize {
        self.arch.feature_dim()
    }

    /// Drops the pretraining head and locks the weights. Idempotent.
    pub fn freeze(mut self) -> Self {
        self.head = None;
        self.frozen = true;
        self
    }

    /// Input image plus the output of every stage.
    fn forward_trace(&self, image: &Matrix) -> Result<Vec<Vec<Matrix>>> {
        let side = self.arch.input_size();
        if image.shape() != (side, side) {
            return Err(Error::Shape(format!(
                "expected a {side}x{side} image, got {}x{}",
                image.rows(),
                image.cols()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(vec![image.clone()]);
        for layer in &self.layers {
            let input = acts.last().expect("non-empty");
            let out = match layer {
                Layer::Conv(c) => conv_forward(c, input)?,
                Layer::Pool(p) => pool_forward(p, input)?,
            };
            acts.push(out);
        }
        Ok(acts)
    }

    /// Flattened final feature-map stack (map-major, then row-major).
    pub fn forward_features(&self, image: &Matrix) -> Result<Vec<f64>> {
        let acts = self.forward_trace(image)?;
        Ok(flatten(acts.last().expect("non-empty")))
    }

    /// One feature row per image.
    pub fn extract_features<M: AsRef<Matrix> + Sync>(&self, images: &[M], exec: Execution) -> Result<Matrix> {
        let rows = exec.map_slice(images, |img| self.forward_features(img.as_ref()));
        let dim = self.feature_dim();
        let mut data = Vec::with_capacity(images.len() * dim);
        for r in rows {
            data.extend(r?);
        }
        Matrix::from_vec(images.len(), dim, data)
    }

    /// Block sizes of the flattened parameter vector.
    pub fn parameter_layout(&self) -> Vec<(ParamClass, usize)> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push((ParamClass::ConvKernel, c.weights.len()));
                    out.push((ParamClass::ConvBias, c.biases.len()));
                }
                Layer::Pool(p) => {
                    out.push((ParamClass::PoolScale, p.scale.len()));
                    out.push((ParamClass::PoolBias, p.bias.len()));
                }
            }
        }
        if let Some(h) = &self.head {
            out.push((ParamClass::HeadWeight, h.weights.len()));
            out.push((ParamClass::HeadBias, h.bias.len()));
        }
        out
    }

    fn blocks(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&c.weights, &c.biases]),
                Layer::Pool(p) => out.extend([&p.scale, &p.bias]),
            }
        }
        if let Some(h) = &self.head {
            out.extend([&h.weights, &h.bias]);
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.weights, &mut c.biases]),
                Layer::Pool(p) => out.extend([&mut p.scale, &mut p.bias]),
            }
        }
        if let Some(h) = &mut self.head {
            out.extend([&mut h.weights, &mut h.bias]);
        }
        out
    }

    /// All trainable parameters in [`CnnModel::parameter_layout`] order.
    pub fn parameters(&self) -> Vec<f64> {
        self.blocks().into_iter().flatten().copied().collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if self.frozen {
            return Err(Error::State("model is frozen".into()));
        }
        let total: usize = self.blocks().iter().map(|b| b.len()).sum();
        if params.len() != total {
            return Err(Error::Dimension(format!(
                "expected {total} parameters, got {}",
                params.len()
            )));
        }
        let mut rest = params;
        for block in self.blocks_mut() {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Cross-entropy loss and parameter gradient for one labeled image.
    fn sample_gradient(&self, image: &Matrix, label: usize) -> Result<(f64, Vec<f64>)> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::State("model has no classification head".into()))?;
        let acts = self.forward_trace(image)?;
        let features = flatten(acts.last().expect("non-empty"));

        let logits: Vec<f64> = (0..head.classes)
            .map(|c| {
                head.bias[c]
                    + head.weights[c * head.inputs..(c + 1) * head.inputs]
                        .iter()
                        .zip(&features)
                        .map(|(w, f)| w * f)
                        .sum::<f64>()
            })
            .collect();
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_norm = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        let loss = log_norm - logits[label];
        let d_logits: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(c, &l)| (l - log_norm).exp() - if c == label { 1.0 } else { 0.0 })
            .collect();

        let layout = self.parameter_layout();
        let mut offsets = Vec::with_capacity(layout.len() + 1);
        let mut acc = 0;
        for (_, len) in &layout {
            offsets.push(acc);
            acc += len;
        }
        offsets.push(acc);
        let mut grad = vec![0.0; acc];

        // head blocks are the last two
        let hw = offsets[layout.len() - 2];
        let hb = offsets[layout.len() - 1];
        let mut d_features = vec![0.0; head.inputs];
        for (c, &g) in d_logits.iter().enumerate() {
            grad[hb + c] = g;
            let row = &head.weights[c * head.inputs..(c + 1) * head.inputs];
            for (j, (&f, &w)) in features.iter().zip(row).enumerate() {
                grad[hw + c * head.inputs + j] = g * f;
                d_features[j] += g * w;
            }
        }

        let last = acts.last().expect("non-empty");
        let area = last[0].rows() * last[0].cols();
        let mut d_out: Vec<Vec<f64>> = d_features.chunks(area).map(<[f64]>::to_vec).collect();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let (a, b) = (offsets[2 * li], offsets[2 * li + 1]);
            let (first, second) = grad[a..offsets[2 * li + 2]].split_at_mut(b - a);
            let want_input = li > 0;
            let d_in = match layer {
                Layer::Conv(c) => conv_backward(c, &acts[li], &acts[li + 1], &d_out, first, second, want_input),
                Layer::Pool(p) => pool_backward(p, &acts[li], &acts[li + 1], &d_out, first, second, want_input),
            };
            match d_in {
                Some(d) => d_out = d,
                None => break,
            }
        }
        Ok((loss, grad))
    }

    fn check_labels(&self, n_images: usize, labels: &[usize]) -> Result<()> {
        if n_images != labels.len() {
            return Err(Error::Dimension(format!(
                "{n_images} images but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.classes) {
            return Err(Error::Domain(format!(
                "label {bad} outside 0..{}",
                self.classes
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy and mean gradient over a set of labeled images.
    pub fn loss_and_gradient<M: AsRef<Matrix> + Sync>(
        &self,
        images: &[M],
        labels: &[usize],
        exec: Execution,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_labels(images.len(), labels)?;
        if images.is_empty() {
            return Err(Error::Domain("no samples".into()));
        }
        let idx: Vec<usize> = (0..images.len()).collect();
        let (losses, grad) = self.batch_gradient(images, labels, &idx, exec)?;
        let n = images.len() as f64;
        Ok((losses.iter().sum::<f64>() / n, grad.into_iter().map(|g| g / n).collect()))
    }

    /// Per-sample losses and the summed gradient over `batch`. Per-sample
    /// results are reduced in batch order, so the sum does not depend on
    /// the execution mode.
    fn batch_gradient<M: AsRef<Matrix> + Sync>(
        &self,
        images: &[M],
        labels: &[usize],
        batch: &[usize],
        exec: Execution,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let per_sample = exec.map_slice(batch, |&i| self.sample_gradient(images[i].as_ref(), labels[i]));
        let mut losses = Vec::with_capacity(batch.len());
        let mut total: Option<Vec<f64>> = None;
        for r in per_sample {
            let (loss, g) = r?;
            losses.push(loss);
            match total.as_mut() {
                None => total = Some(g),
                Some(t) => t.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            }
        }
        Ok((losses, total.unwrap_or_default()))
    }

    /// Mini-batch SGD through the softmax head. Returns the mean training
    /// loss of each epoch, measured on the forward passes used for the
    /// updates.
    pub fn pretrain_gdbp<M: AsRef<Matrix> + Sync>(
        &mut self,
        images: &[M],
        labels: &[usize],
        config: &PretrainConfig,
        stream: &mut RngStream,
        exec: Execution,
    ) -> Result<Vec<f64>> {
        if self.frozen {
            return Err(Error::State("cannot train a frozen model".into()));
        }
        if images.is_empty() {
            return Err(Error::Domain("pretraining needs at least one sample".into()));
        }
        if config.batch_size == 0 {
            return Err(Error::Domain("batch size must be at least 1".into()));
        }
        self.check_labels(images.len(), labels)?;

        let mut order: Vec<usize> = (0..images.len()).collect();
        let mut trace = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            stream.shuffle(&mut order);
            let mut sample_loss = vec![0.0; images.len()];
            for batch in order.chunks(config.batch_size) {
                let (losses, grad) = self.batch_gradient(images, labels, batch, exec)?;
                for (&i, l) in batch.iter().zip(losses) {
                    sample_loss[i] = l;
                }
                let step = config.learning_rate / batch.len() as f64;
                let mut rest = grad.as_slice();
                for block in self.blocks_mut() {
                    let (g, tail) = rest.split_at(block.len());
                    block.iter_mut().zip(g).for_each(|(p, g)| *p -= step * g);
                    rest = tail;
                }
            }
            trace.push(sample_loss.iter().sum::<f64>() / images.len() as f64);
        }
        Ok(trace)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            architecture: self.arch.to_string(),
            input_size: self.arch.input_size(),
            classes: self.classes,
            frozen: self.frozen,
            layers: self.layers.clone(),
            head: self.head.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: file.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let arch = CnnArchitecture::parse_with_input(&file.architecture, file.input_size)?;
        let template = Self::zeroed(arch.clone(), file.classes);
        if file.layers.len() != template.layers.len() {
            return Err(Error::Shape("layer count does not match the architecture".into()));
        }
        for (got, want) in file.layers.iter().zip(&template.layers) {
            let ok = match (got, want) {
                (Layer::Conv(g), Layer::Conv(w)) => {
                    g.validate()?;
                    (g.in_maps, g.out_maps, g.kernel) == (w.in_maps, w.out_maps, w.kernel)
                }
                (Layer::Pool(g), Layer::Pool(w)) => {
                    g.validate()?;
                    (g.maps, g.factor) == (w.maps, w.factor)
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Shape("layer does not match the architecture".into()));
            }
        }
        if let Some(h) = &file.head {
            if h.classes != file.classes
                || h.inputs != arch.feature_dim()
                || h.weights.len() != h.classes * h.inputs
                || h.bias.len() != h.classes
            {
                return Err(Error::Shape("head does not match the architecture".into()));
            }
        }
        Ok(Self {
            arch,
            layers: file.layers,
            head: file.head,
            classes: file.classes,
            frozen: file.frozen,
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

fn flatten(maps: &[Matrix]) -> Vec<f64> {
    maps.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

impl AsRef<Matrix> for Matrix {
    fn as_ref(&self) -> &Matrix {
        self
    }
}
