use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;
use crate::{Error, Result};

/// Fully connected bank of square kernels.
///
/// `weights` is laid out `[out][in][ky][kx]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_maps: usize,
    pub out_maps: usize,
    pub kernel: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Window-sum pooling with one trainable `(scale, bias)` per map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolLayer {
    pub maps: usize,
    pub factor: usize,
    pub scale: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer {
    Conv(ConvLayer),
    Pool(PoolLayer),
}

impl ConvLayer {
    pub fn zeros(in_maps: usize, out_maps: usize, kernel: usize) -> Self {
        Self {
            in_maps,
            out_maps,
            kernel,
            weights: vec![0.0; out_maps * in_maps * kernel * kernel],
            biases: vec![0.0; out_maps],
        }
    }

    #[inline]
    fn kernel_slice(&self, o: usize, i: usize) -> &[f64] {
        let kk = self.kernel * self.kernel;
        let start = (o * self.in_maps + i) * kk;
        &self.weights[start..start + kk]
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let kk = self.kernel * self.kernel;
        if self.weights.len() != self.out_maps * self.in_maps * kk || self.biases.len() != self.out_maps {
            return Err(Error::Shape(format!(
                "conv layer {}->{} ({}x{}) has {} weights and {} biases",
                self.in_maps,
                self.out_maps,
                self.kernel,
                self.kernel,
                self.weights.len(),
                self.biases.len()
            )));
        }
        Ok(())
    }
}

impl PoolLayer {
    pub fn new(maps: usize, factor: usize, scale: f64, bias: f64) -> Self {
        Self {
            maps,
            factor,
            scale: vec![scale; maps],
            bias: vec![bias; maps],
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.scale.len() != self.maps || self.bias.len() != self.maps {
            return Err(Error::Shape(format!(
                "pool layer over {} maps has {} scales and {} biases",
                self.maps,
                self.scale.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

fn check_stack(input: &[Matrix], maps: usize) -> Result<usize> {
    if input.len() != maps {
        return Err(Error::Shape(format!("expected {maps} input maps, got {}", input.len())));
    }
    let side = input.first().map_or(0, Matrix::rows);
    if input.iter().any(|m| m.rows() != side || m.cols() != side) {
        return Err(Error::Shape("input maps must be square and equally sized".into()));
    }
    Ok(side)
}

/// Convolution stage: `tanh(bias + Σ_in kernel ⋆ input)` per output map.
pub fn conv_forward(layer: &ConvLayer, input: &[Matrix]) -> Result<Vec<Matrix>> {
    let side = check_stack(input, layer.in_maps)?;
    let k = layer.kernel;
    if side < k {
        return Err(Error::Shape(format!(
            "{side}x{side} input is smaller than the {k}x{k} kernel"
        )));
    }
    let out_side = side - k + 1;
    let mut out = Vec::with_capacity(layer.out_maps);
    for o in 0..layer.out_maps {
        let mut z = vec![layer.biases[o]; out_side * out_side];
        for (i, src) in input.iter().enumerate() {
            let kern = layer.kernel_slice(o, i);
            let src = src.as_slice();
            for ky in 0..k {
                for kx in 0..k {
                    let w = kern[ky * k + kx];
                    if w == 0.0 {
                        continue;
                    }
                    for y in 0..out_side {
                        let src_row = &src[(y + ky) * side + kx..(y + ky) * side + kx + out_side];
                        let dst = &mut z[y * out_side..(y + 1) * out_side];
                        for (d, &s) in dst.iter_mut().zip(src_row) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
        z.iter_mut().for_each(|v| *v = v.tanh());
        out.push(Matrix::from_vec(out_side, out_side, z)?);
    }
    Ok(out)
}

/// Window sums of one map, `side/factor` squared.
fn window_sums(map: &Matrix, factor: usize) -> Vec<f64> {
    let side = map.rows();
    let out_side = side / factor;
    let src = map.as_slice();
    let mut sums = vec![0.0; out_side * out_side];
    for y in 0..side {
        let oy = y / factor;
        for x in 0..side {
            sums[oy * out_side + x / factor] += src[y * side + x];
        }
    }
    sums
}

/// Pooling stage: `tanh(scale · Σ window + bias)` per map.
pub fn pool_forward(layer: &PoolLayer, input: &[Matrix]) -> Result<Vec<Matrix>> {
    let side = check_stack(input, layer.maps)?;
    if layer.factor == 0 || side % layer.factor != 0 {
        return Err(Error::Shape(format!(
            "side {side} is not divisible by pool factor {}",
            layer.factor
        )));
    }
    let out_side = side / layer.factor;
    input
        .iter()
        .enumerate()
        .map(|(m, map)| {
            let (scale, bias) = (layer.scale[m], layer.bias[m]);
            let data = window_sums(map, layer.factor)
                .into_iter()
                .map(|s| (scale * s + bias).tanh())
                .collect();
            Matrix::from_vec(out_side, out_side, data)
        })
        .collect()
}

/// Backward pass through a conv stage.
///
/// `output` is the stage's tanh output and `d_output` the loss gradient with
/// respect to it. Parameter gradients are accumulated into `d_weights` /
/// `d_biases`; the input gradient is returned when `want_input` is set.
pub(crate) fn conv_backward(
    layer: &ConvLayer,
    input: &[Matrix],
    output: &[Matrix],
    d_output: &[Vec<f64>],
    d_weights: &mut [f64],
    d_biases: &mut [f64],
    want_input: bool,
) -> Option<Vec<Vec<f64>>> {
    let side = input[0].rows();
    let k = layer.kernel;
    let out_side = side - k + 1;
    let kk = k * k;
    let mut d_input = want_input.then(|| vec![vec![0.0; side * side]; layer.in_maps]);
    for o in 0..layer.out_maps {
        let dz: Vec<f64> = d_output[o]
            .iter()
            .zip(output[o].as_slice())
            .map(|(&g, &a)| g * (1.0 - a * a))
            .collect();
        d_biases[o] += dz.iter().sum::<f64>();
        for (i, src) in input.iter().enumerate() {
            let src = src.as_slice();
            let base = (o * layer.in_maps + i) * kk;
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = 0.0;
                    for y in 0..out_side {
                        let src_row = &src[(y + ky) * side + kx..(y + ky) * side + kx + out_side];
                        let dz_row = &dz[y * out_side..(y + 1) * out_side];
                        acc += src_row.iter().zip(dz_row).map(|(a, b)| a * b).sum::<f64>();
                    }
                    d_weights[base + ky * k + kx] += acc;
                }
            }
            if let Some(d_in) = d_input.as_mut() {
                let kern = layer.kernel_slice(o, i);
                let d_in = &mut d_in[i];
                for ky in 0..k {
                    for kx in 0..k {
                        let w = kern[ky * k + kx];
                        for y in 0..out_side {
                            let dst = &mut d_in[(y + ky) * side + kx..(y + ky) * side + kx + out_side];
                            let dz_row = &dz[y * out_side..(y + 1) * out_side];
                            for (d, &g) in dst.iter_mut().zip(dz_row) {
                                *d += w * g;
                            }
                        }
                    }
                }
            }
        }
    }
    d_input
}

/// Backward pass through a pooling stage; see [`conv_backward`].
pub(crate) fn pool_backward(
    layer: &PoolLayer,
    input: &[Matrix],
    output: &[Matrix],
    d_output: &[Vec<f64>],
    d_scale: &mut [f64],
    d_bias: &mut [f64],
    want_input: bool,
) -> Option<Vec<Vec<f64>>> {
    let side = input[0].rows();
    let f = layer.factor;
    let out_side = side / f;
    let mut d_input = want_input.then(|| vec![vec![0.0; side * side]; layer.maps]);
    for m in 0..layer.maps {
        let sums = window_sums(&input[m], f);
        let dz: Vec<f64> = d_output[m]
            .iter()
            .zip(output[m].as_slice())
            .map(|(&g, &a)| g * (1.0 - a * a))
            .collect();
        d_bias[m] += dz.iter().sum::<f64>();
        d_scale[m] += dz.iter().zip(&sums).map(|(g, s)| g * s).sum::<f64>();
        if let Some(d_in) = d_input.as_mut() {
            let scale = layer.scale[m];
            let d_in = &mut d_in[m];
            for y in 0..side {
                for x in 0..side {
                    d_in[y * side + x] = scale * dz[(y / f) * out_side + x / f];
                }
            }
        }
    }
    d_input
}
