//! Layer-graph network descriptions, parameter packing, and forward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Tape, Var};
use crate::{Error, Result};

/// One layer of a feed-forward network. Shapes are per sample; the batch
/// dimension is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense { input: usize, output: usize },
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize },
    ConvT2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize },
    LeakyRelu,
    Reshape { shape: Vec<usize> },
    Flatten,
    /// Crop the spatial extent of `[C,H,W]` to `h x w` from the top-left.
    Crop { h: usize, w: usize },
    /// Zero-pad the spatial extent of `[C,H,W]` up to `h x w` at the
    /// top-left, so strided convolutions tile on arbitrary inputs.
    Pad { h: usize, w: usize },
}

/// Negative slope shared by every leaky-ReLU in the crate.
pub const LEAKY_SLOPE: f64 = 0.2;

impl Layer {
    /// Number of trainable parameters (weights + biases).
    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Dense { input, output } => input * output + output,
            Layer::Conv2d { in_ch, out_ch, kernel, .. } | Layer::ConvT2d { in_ch, out_ch, kernel, .. } => {
                in_ch * out_ch * kernel * kernel + out_ch
            }
            _ => 0,
        }
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>> {
        let fail = |msg: String| Err(Error::shape(msg));
        match self {
            Layer::Dense { input, output } => {
                if in_shape != [*input] {
                    return fail(format!("dense expects [{input}], got {in_shape:?}"));
                }
                Ok(vec![*output])
            }
            Layer::Conv2d { in_ch, kernel, stride, pad, out_ch } => {
                let [c, h, w] = in_shape else {
                    return fail(format!("conv2d expects [C,H,W], got {in_shape:?}"));
                };
                if c != in_ch {
                    return fail(format!("conv2d expects {in_ch} channels, got {c}"));
                }
                if (h + 2 * pad) < *kernel || (h + 2 * pad - kernel) % stride != 0 {
                    return fail(format!("conv2d height {h} does not tile with k={kernel} s={stride} p={pad}"));
                }
                if (w + 2 * pad) < *kernel || (w + 2 * pad - kernel) % stride != 0 {
                    return fail(format!("conv2d width {w} does not tile with k={kernel} s={stride} p={pad}"));
                }
                Ok(vec![*out_ch, (h + 2 * pad - kernel) / stride + 1, (w + 2 * pad - kernel) / stride + 1])
            }
            Layer::ConvT2d { in_ch, kernel, stride, pad, out_ch } => {
                let [c, h, w] = in_shape else {
                    return fail(format!("conv_transpose2d expects [C,H,W], got {in_shape:?}"));
                };
                if c != in_ch {
                    return fail(format!("conv_transpose2d expects {in_ch} channels, got {c}"));
                }
                let oh = (h - 1) * stride + kernel;
                let ow = (w - 1) * stride + kernel;
                if oh <= 2 * pad || ow <= 2 * pad {
                    return fail("conv_transpose2d padding swallows the output".to_string());
                }
                Ok(vec![*out_ch, oh - 2 * pad, ow - 2 * pad])
            }
            Layer::LeakyRelu => Ok(in_shape.to_vec()),
            Layer::Reshape { shape } => {
                if shape.iter().product::<usize>() != in_shape.iter().product::<usize>() {
                    return fail(format!("reshape {in_shape:?} -> {shape:?} changes length"));
                }
                Ok(shape.clone())
            }
            Layer::Flatten => Ok(vec![in_shape.iter().product()]),
            Layer::Crop { h, w } => {
                let [c, ih, iw] = in_shape else {
                    return fail(format!("crop expects [C,H,W], got {in_shape:?}"));
                };
                if h > ih || w > iw {
                    return fail(format!("crop {h}x{w} larger than input {ih}x{iw}"));
                }
                Ok(vec![*c, *h, *w])
            }
            Layer::Pad { h, w } => {
                let [c, ih, iw] = in_shape else {
                    return fail(format!("pad expects [C,H,W], got {in_shape:?}"));
                };
                if h < ih || w < iw {
                    return fail(format!("pad {h}x{w} smaller than input {ih}x{iw}"));
                }
                Ok(vec![*c, *h, *w])
            }
        }
    }
}

/// An ordered layer list with a fixed per-sample input shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl NetSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let spec = NetSpec { input_shape, layers };
        spec.output_shape()?;
        Ok(spec)
    }

    /// Per-sample output shape, checking that consecutive layers compose.
    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            shape = layer
                .out_shape(&shape)
                .map_err(|e| Error::shape(format!("layer {k}: {e}")))?;
        }
        Ok(shape)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }
}

/// Weight initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    Glorot,
    Zero,
}

/// Flat trainable parameter vector for a `NetSpec`, layers in order, weights
/// before biases within a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub data: Vec<f64>,
}

impl NetParams {
    pub fn init(spec: &NetSpec, scheme: InitScheme, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(spec.param_count());
        for layer in &spec.layers {
            let (n_w, n_b, fan_in, fan_out) = match *layer {
                Layer::Dense { input, output } => (input * output, output, input, output),
                Layer::Conv2d { in_ch, out_ch, kernel, .. } => {
                    (in_ch * out_ch * kernel * kernel, out_ch, in_ch * kernel * kernel, out_ch * kernel * kernel)
                }
                Layer::ConvT2d { in_ch, out_ch, kernel, .. } => {
                    (in_ch * out_ch * kernel * kernel, out_ch, in_ch * kernel * kernel, out_ch * kernel * kernel)
                }
                _ => continue,
            };
            match scheme {
                InitScheme::Glorot => {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for _ in 0..n_w {
                        data.push(rng.gen_range(-bound..bound));
                    }
                }
                InitScheme::Zero => data.extend(std::iter::repeat(0.0).take(n_w)),
            }
            data.extend(std::iter::repeat(0.0).take(n_b));
        }
        NetParams { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Parameter leaves bound to a tape, one `(weights, bias)` pair per
/// parameterized layer, aligned with the layer order.
pub struct BoundParams {
    pub vars: Vec<(Var, Var)>,
}

impl BoundParams {
    pub fn all_vars(&self) -> Vec<Var> {
        self.vars.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

/// Bind every parameter of `spec` as a constant, for forward passes that
/// should not propagate gradients into this network.
pub fn bind_params_const(tape: &mut Tape, spec: &NetSpec, params: &NetParams) -> Result<BoundParams> {
    bind_params_with(tape, spec, params, false)
}

/// Create differentiable leaves for every parameter of `spec`.
pub fn bind_params(tape: &mut Tape, spec: &NetSpec, params: &NetParams) -> Result<BoundParams> {
    bind_params_with(tape, spec, params, true)
}

fn bind_params_with(tape: &mut Tape, spec: &NetSpec, params: &NetParams, trainable: bool) -> Result<BoundParams> {
    if params.len() != spec.param_count() {
        return Err(Error::shape(format!(
            "parameter vector has {} entries, spec needs {}",
            params.len(),
            spec.param_count()
        )));
    }
    let mut vars = Vec::new();
    let mut offset = 0;
    for layer in &spec.layers {
        let (w_shape, b_len): (Vec<usize>, usize) = match *layer {
            Layer::Dense { input, output } => (vec![input, output], output),
            Layer::Conv2d { in_ch, out_ch, kernel, .. } => (vec![out_ch, in_ch, kernel, kernel], out_ch),
            Layer::ConvT2d { in_ch, out_ch, kernel, .. } => (vec![in_ch, out_ch, kernel, kernel], out_ch),
            _ => continue,
        };
        let n_w: usize = w_shape.iter().product();
        let w_data = params.data[offset..offset + n_w].to_vec();
        offset += n_w;
        let b_data = params.data[offset..offset + b_len].to_vec();
        offset += b_len;
        let (w, b) = if trainable {
            (tape.leaf(&w_shape, w_data), tape.leaf(&[b_len], b_data))
        } else {
            (tape.constant(&w_shape, w_data), tape.constant(&[b_len], b_data))
        };
        vars.push((w, b));
    }
    Ok(BoundParams { vars })
}

/// Forward pass over a batch. `input` must have shape `[N, input_shape...]`.
pub fn forward(tape: &mut Tape, spec: &NetSpec, bound: &BoundParams, input: Var) -> Result<Var> {
    let in_shape = tape.shape(input).to_vec();
    if in_shape.len() != spec.input_shape.len() + 1 || in_shape[1..] != spec.input_shape[..] {
        return Err(Error::shape(format!(
            "input shape {:?} does not match [N, {:?}]",
            in_shape, spec.input_shape
        )));
    }
    let n = in_shape[0];
    let mut x = input;
    let mut param_idx = 0;
    for layer in &spec.layers {
        match *layer {
            Layer::Dense { .. } => {
                let (w, b) = bound.vars[param_idx];
                param_idx += 1;
                let y = tape.matmul(x, w);
                x = tape.add_row_bias(y, b);
            }
            Layer::Conv2d { stride, pad, .. } => {
                let (w, b) = bound.vars[param_idx];
                param_idx += 1;
                let y = tape.conv2d(x, w, stride, pad);
                x = tape.add_bias(y, b);
            }
            Layer::ConvT2d { stride, pad, .. } => {
                let (w, b) = bound.vars[param_idx];
                param_idx += 1;
                let y = tape.conv_transpose2d(x, w, stride, pad);
                x = tape.add_bias(y, b);
            }
            Layer::LeakyRelu => {
                x = tape.leaky_relu(x, LEAKY_SLOPE);
            }
            Layer::Reshape { ref shape } => {
                let mut full = vec![n];
                full.extend_from_slice(shape);
                x = tape.reshape(x, &full);
            }
            Layer::Flatten => {
                let len: usize = tape.shape(x)[1..].iter().product();
                x = tape.reshape(x, &[n, len]);
            }
            Layer::Crop { h, w } => {
                x = tape.crop(x, 0, 0, h, w);
            }
            Layer::Pad { h, w } => {
                x = tape.zero_pad(x, 0, 0, h, w);
            }
        }
    }
    Ok(x)
}

/// Forward pass without gradient bookkeeping, for prediction.
pub fn predict(spec: &NetSpec, params: &NetParams, input: &[f64], n: usize) -> Result<Vec<f64>> {
    let per_sample: usize = spec.input_shape.iter().product();
    if input.len() != n * per_sample {
        return Err(Error::shape(format!(
            "input length {} != {n} x {per_sample}",
            input.len()
        )));
    }
    let mut tape = Tape::new();
    let bound = bind_params(&mut tape, spec, params)?;
    let mut shape = vec![n];
    shape.extend_from_slice(&spec.input_shape);
    let x = tape.constant(&shape, input.to_vec());
    let y = forward(&mut tape, spec, &bound, x)?;
    Ok(tape.value(y).to_vec())
}

/// Collect gradients returned by `Tape::backward` into a flat vector laid
/// out like `NetParams`.
pub fn flatten_grads(tape: &Tape, grads: &[Var]) -> Vec<f64> {
    let mut out = Vec::new();
    for &g in grads {
        out.extend_from_slice(tape.value(g));
    }
    out
}

/// Gradient penalty `mean_i (||grad_x D(x_i)|| - 1)^2` and its parameter
/// gradient, computed by differentiating through the first backward pass.
///
/// At a zero-norm input gradient the subgradient 0 is used for the norm, so
/// the penalty contributes value 1 and zero parameter gradient there.
pub fn input_grad_norm_penalty(spec: &NetSpec, params: &NetParams, x_batch: &[f64], n: usize) -> Result<(f64, Vec<f64>)> {
    let out_shape = spec.output_shape()?;
    if out_shape.iter().product::<usize>() != 1 {
        return Err(Error::shape(format!(
            "gradient penalty needs a scalar-output network, got {out_shape:?}"
        )));
    }
    let mut tape = Tape::new();
    let bound = bind_params(&mut tape, spec, params)?;
    let mut shape = vec![n];
    shape.extend_from_slice(&spec.input_shape);
    let x = tape.leaf(&shape, x_batch.to_vec());
    let y = forward(&mut tape, spec, &bound, x)?;
    // Per-sample outputs are independent, so the gradient of the batch sum
    // stacks the per-sample input gradients.
    let total = tape.sum(y);
    let gx = tape.backward(total, &[x])?[0];
    let per_sample: usize = spec.input_shape.iter().product();
    let g2d = tape.reshape(gx, &[n, per_sample]);
    let sq = tape.mul(g2d, g2d);
    let ones = tape.constant(&[per_sample, 1], vec![1.0; per_sample]);
    let row_sums = tape.matmul(sq, ones);
    let norms = tape.sqrt(row_sums);
    let shifted = tape.add_scalar(norms, -1.0);
    let sq_dev = tape.mul(shifted, shifted);
    let penalty = tape.mean(sq_dev);
    let theta = bound.all_vars();
    let grads = tape.backward(penalty, &theta)?;
    Ok((tape.value(penalty)[0], flatten_grads(&tape, &grads)))
}
