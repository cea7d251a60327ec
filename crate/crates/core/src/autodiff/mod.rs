//! Tape-based reverse-mode automatic differentiation on dense f64 tensors.
//!
//! Every operation evaluates eagerly and records itself on the tape.
//! `backward` emits the gradient computation as new tape nodes, so gradients
//! are themselves differentiable; the gradient penalty differentiates through
//! a first backward pass (double backprop). Activations are piecewise linear,
//! which keeps the second derivative of the activation zero almost
//! everywhere, so activation masks are treated as constants.

mod adam;
pub mod net;
#[cfg(test)]
mod tests;

pub use adam::AdamState;
pub use net::{InitScheme, Layer, NetParams, NetSpec};

use crate::{Error, Result};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    Scale(f64),
    AddScalar,
    /// Elementwise reciprocal with the convention `1/0 = 0` (used as the
    /// subgradient at the nondifferentiable point of the norm).
    Recip,
    Sqrt,
    Matmul,
    Transpose,
    Sum,
    ExpandTo,
    LeakyRelu { slope: f64 },
    Reshape,
    AddBias,
    SumChannels,
    BroadcastChannels,
    AddRowBias,
    SumRows,
    BroadcastRows,
    Conv2d { stride: usize, pad: usize },
    ConvT2d { stride: usize, pad: usize },
    Conv2dWGrad,
    ConvT2dWGrad,
    Crop { off_h: usize, off_w: usize },
    ZeroPad { off_h: usize, off_w: usize },
}

struct Node {
    op: Op,
    inputs: Vec<Var>,
    shape: Vec<usize>,
    value: Vec<f64>,
    needs_grad: bool,
}

/// Records the computation and owns all intermediate values.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    fn push(&mut self, op: Op, inputs: Vec<Var>, shape: Vec<usize>, value: Vec<f64>) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let needs_grad = match op {
            Op::Leaf => false,
            _ => inputs.iter().any(|&i| self.nodes[i.0].needs_grad),
        };
        self.nodes.push(Node { op, inputs, shape, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable leaf (network parameter or probed input).
    pub fn leaf(&mut self, shape: &[usize], data: Vec<f64>) -> Var {
        let v = self.push(Op::Leaf, vec![], shape.to_vec(), data);
        self.nodes[v.0].needs_grad = true;
        v
    }

    /// A constant leaf; no gradient flows into it.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Var {
        self.push(Op::Leaf, vec![], shape.to_vec(), data)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(&[1], vec![v])
    }

    fn assert_same_shape(&self, a: Var, b: Var) {
        assert_eq!(self.shape(a), self.shape(b), "elementwise shape mismatch");
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b);
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Add, vec![a, b], shape, value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b);
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Sub, vec![a, b], shape, value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b);
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Mul, vec![a, b], shape, value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| -x).collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Neg, vec![a], shape, value)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).iter().map(|x| c * x).collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Scale(c), vec![a], shape, value)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).iter().map(|x| x + c).collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::AddScalar, vec![a], shape, value)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let value = self
            .value(a)
            .iter()
            .map(|&x| if x == 0.0 { 0.0 } else { 1.0 / x })
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Recip, vec![a], shape, value)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| x.max(0.0).sqrt()).collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Sqrt, vec![a], shape, value)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self
            .value(a)
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::LeakyRelu { slope }, vec![a], shape, value)
    }

    /// Matrix product of `[a, b]` and `[b, c]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        assert_eq!(sa.len(), 2, "matmul lhs must be 2-d");
        assert_eq!(sb.len(), 2, "matmul rhs must be 2-d");
        assert_eq!(sa[1], sb[0], "matmul inner dims {} vs {}", sa[1], sb[0]);
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut value = vec![0.0; m * n];
        {
            let av = self.value(a);
            let bv = self.value(b);
            for i in 0..m {
                for kk in 0..k {
                    let x = av[i * k + kk];
                    if x == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        value[i * n + j] += x * bv[kk * n + j];
                    }
                }
            }
        }
        self.push(Op::Matmul, vec![a, b], vec![m, n], value)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let sa = self.shape(a).to_vec();
        assert_eq!(sa.len(), 2);
        let (m, n) = (sa[0], sa[1]);
        let av = self.value(a);
        let mut value = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                value[j * m + i] = av[i * n + j];
            }
        }
        self.push(Op::Transpose, vec![a], vec![n, m], value)
    }

    /// Sum of all entries, a `[1]` scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = vec![self.value(a).iter().sum()];
        self.push(Op::Sum, vec![a], vec![1], value)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Broadcast a scalar to `shape`.
    pub fn expand_to(&mut self, a: Var, shape: &[usize]) -> Var {
        assert_eq!(self.value(a).len(), 1, "expand_to takes a scalar");
        let v = self.value(a)[0];
        self.push(Op::ExpandTo, vec![a], shape.to_vec(), vec![v; numel(shape)])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        assert_eq!(numel(shape), self.value(a).len(), "reshape must conserve length");
        let value = self.value(a).to_vec();
        self.push(Op::Reshape, vec![a], shape.to_vec(), value)
    }

    /// `x [N,C,H,W] + b [C]`, bias broadcast over batch and space.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let sx = self.shape(x).to_vec();
        assert_eq!(sx.len(), 4);
        assert_eq!(self.shape(b), &[sx[1]]);
        let (n, c, h, w) = (sx[0], sx[1], sx[2], sx[3]);
        let mut value = self.value(x).to_vec();
        let bv = self.value(b).to_vec();
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * h * w;
                for k in 0..h * w {
                    value[base + k] += bv[ci];
                }
            }
        }
        self.push(Op::AddBias, vec![x, b], sx, value)
    }

    fn sum_channels(&mut self, x: Var) -> Var {
        let sx = self.shape(x).to_vec();
        assert_eq!(sx.len(), 4);
        let (n, c, h, w) = (sx[0], sx[1], sx[2], sx[3]);
        let xv = self.value(x);
        let mut value = vec![0.0; c];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * h * w;
                value[ci] += xv[base..base + h * w].iter().sum::<f64>();
            }
        }
        self.push(Op::SumChannels, vec![x], vec![c], value)
    }

    fn broadcast_channels(&mut self, b: Var, n: usize, h: usize, w: usize) -> Var {
        let c = self.shape(b)[0];
        let bv = self.value(b).to_vec();
        let mut value = vec![0.0; n * c * h * w];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * h * w;
                value[base..base + h * w].fill(bv[ci]);
            }
        }
        self.push(Op::BroadcastChannels, vec![b], vec![n, c, h, w], value)
    }

    /// `x [N,F] + b [F]`, bias broadcast over rows.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Var {
        let sx = self.shape(x).to_vec();
        assert_eq!(sx.len(), 2);
        assert_eq!(self.shape(b), &[sx[1]]);
        let (n, f) = (sx[0], sx[1]);
        let mut value = self.value(x).to_vec();
        let bv = self.value(b).to_vec();
        for ni in 0..n {
            for fi in 0..f {
                value[ni * f + fi] += bv[fi];
            }
        }
        self.push(Op::AddRowBias, vec![x, b], sx, value)
    }

    fn sum_rows(&mut self, x: Var) -> Var {
        let sx = self.shape(x).to_vec();
        let (n, f) = (sx[0], sx[1]);
        let xv = self.value(x);
        let mut value = vec![0.0; f];
        for ni in 0..n {
            for fi in 0..f {
                value[fi] += xv[ni * f + fi];
            }
        }
        self.push(Op::SumRows, vec![x], vec![f], value)
    }

    fn broadcast_rows(&mut self, b: Var, n: usize) -> Var {
        let f = self.shape(b)[0];
        let bv = self.value(b).to_vec();
        let mut value = vec![0.0; n * f];
        for ni in 0..n {
            value[ni * f..(ni + 1) * f].copy_from_slice(&bv);
        }
        self.push(Op::BroadcastRows, vec![b], vec![n, f], value)
    }

    /// 2D convolution. `x` is `[N,Ci,H,W]`, `w` is `[Co,Ci,k,k]`; the input
    /// extent must tile exactly: `(H + 2 pad - k) % stride == 0`.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        assert_eq!(sx.len(), 4);
        assert_eq!(sw.len(), 4);
        assert_eq!(sx[1], sw[1], "conv2d channel mismatch");
        assert_eq!(sw[2], sw[3], "square kernels only");
        let (n, ci, h, w_in) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, k) = (sw[0], sw[2]);
        assert!(h + 2 * pad >= k && w_in + 2 * pad >= k, "kernel larger than padded input");
        assert_eq!((h + 2 * pad - k) % stride, 0, "conv2d height does not tile");
        assert_eq!((w_in + 2 * pad - k) % stride, 0, "conv2d width does not tile");
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w_in + 2 * pad - k) / stride + 1;
        let value = conv2d_forward(self.value(x), self.value(w), n, ci, h, w_in, co, k, stride, pad, oh, ow);
        self.push(Op::Conv2d { stride, pad }, vec![x, w], vec![n, co, oh, ow], value)
    }

    /// Transposed 2D convolution. `x` is `[N,Ci,H,W]`, `w` is `[Ci,Co,k,k]`;
    /// output extent is `(H-1) stride + k - 2 pad`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        assert_eq!(sx.len(), 4);
        assert_eq!(sw.len(), 4);
        assert_eq!(sx[1], sw[0], "conv_transpose2d channel mismatch");
        assert_eq!(sw[2], sw[3], "square kernels only");
        let (n, ci, h, w_in) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, k) = (sw[1], sw[2]);
        assert!((h - 1) * stride + k > 2 * pad, "padding swallows the whole output");
        let oh = (h - 1) * stride + k - 2 * pad;
        let ow = (w_in - 1) * stride + k - 2 * pad;
        let value = convt2d_forward(self.value(x), self.value(w), n, ci, h, w_in, co, k, stride, pad, oh, ow);
        self.push(Op::ConvT2d { stride, pad }, vec![x, w], vec![n, co, oh, ow], value)
    }

    fn conv2d_wgrad(&mut self, x: Var, gy: Var, stride: usize, pad: usize, kernel: usize) -> Var {
        let sx = self.shape(x).to_vec();
        let sg = self.shape(gy).to_vec();
        let (n, ci, h, w_in) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, oh, ow) = (sg[1], sg[2], sg[3]);
        let value = conv2d_wgrad_kernel(self.value(x), self.value(gy), n, ci, h, w_in, co, kernel, stride, pad, oh, ow);
        self.push(Op::Conv2dWGrad, vec![x, gy], vec![co, ci, kernel, kernel], value)
    }

    fn convt2d_wgrad(&mut self, x: Var, gy: Var, stride: usize, pad: usize, kernel: usize) -> Var {
        let sx = self.shape(x).to_vec();
        let sg = self.shape(gy).to_vec();
        let (n, ci, h, w_in) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, oh, ow) = (sg[1], sg[2], sg[3]);
        let value = convt2d_wgrad_kernel(self.value(x), self.value(gy), n, ci, h, w_in, co, kernel, stride, pad, oh, ow);
        self.push(Op::ConvT2dWGrad, vec![x, gy], vec![ci, co, kernel, kernel], value)
    }

    /// Crop the spatial extent of `[N,C,H,W]` to `out_h x out_w` starting at
    /// `(off_h, off_w)`.
    pub fn crop(&mut self, x: Var, off_h: usize, off_w: usize, out_h: usize, out_w: usize) -> Var {
        let sx = self.shape(x).to_vec();
        assert_eq!(sx.len(), 4);
        let (n, c, h, w) = (sx[0], sx[1], sx[2], sx[3]);
        assert!(off_h + out_h <= h && off_w + out_w <= w, "crop out of range");
        let xv = self.value(x);
        let mut value = vec![0.0; n * c * out_h * out_w];
        for nc in 0..n * c {
            for r in 0..out_h {
                let src = nc * h * w + (off_h + r) * w + off_w;
                let dst = nc * out_h * out_w + r * out_w;
                value[dst..dst + out_w].copy_from_slice(&xv[src..src + out_w]);
            }
        }
        self.push(Op::Crop { off_h, off_w }, vec![x], vec![n, c, out_h, out_w], value)
    }

    /// Embed `[N,C,H,W]` into a zero field of `out_h x out_w` at offset
    /// `(off_h, off_w)`.
    pub fn zero_pad(&mut self, x: Var, off_h: usize, off_w: usize, out_h: usize, out_w: usize) -> Var {
        let sx = self.shape(x).to_vec();
        let (n, c, h, w) = (sx[0], sx[1], sx[2], sx[3]);
        let xv = self.value(x);
        let mut value = vec![0.0; n * c * out_h * out_w];
        for nc in 0..n * c {
            for r in 0..h {
                let src = nc * h * w + r * w;
                let dst = nc * out_h * out_w + (off_h + r) * out_w + off_w;
                value[dst..dst + w].copy_from_slice(&xv[src..src + w]);
            }
        }
        self.push(Op::ZeroPad { off_h, off_w }, vec![x], vec![n, c, out_h, out_w], value)
    }

    /// Reverse-mode gradients of a scalar `output` with respect to `wrt`.
    ///
    /// The gradient computation is appended to the tape, so the returned
    /// variables can be differentiated again.
    pub fn backward(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        if self.value(output).len() != 1 {
            return Err(Error::shape("backward requires a scalar output".to_string()));
        }
        let limit = output.0 + 1;
        let mut adjoint: Vec<Option<Var>> = vec![None; limit];
        let seed = self.constant(&[1], vec![1.0]);
        adjoint[output.0] = Some(seed);

        for id in (0..limit).rev() {
            let Some(up) = adjoint[id] else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            let op = self.nodes[id].op.clone();
            let inputs = self.nodes[id].inputs.clone();
            let contribs: Vec<(Var, Var)> = match op {
                Op::Leaf => vec![],
                Op::Add => vec![(inputs[0], up), (inputs[1], up)],
                Op::Sub => {
                    let n = self.neg(up);
                    vec![(inputs[0], up), (inputs[1], n)]
                }
                Op::Mul => {
                    let ga = self.mul(up, inputs[1]);
                    let gb = self.mul(up, inputs[0]);
                    vec![(inputs[0], ga), (inputs[1], gb)]
                }
                Op::Neg => {
                    let g = self.neg(up);
                    vec![(inputs[0], g)]
                }
                Op::Scale(c) => {
                    let g = self.scale(up, c);
                    vec![(inputs[0], g)]
                }
                Op::AddScalar => vec![(inputs[0], up)],
                Op::Recip => {
                    // d(1/x) = -1/x^2; reuse the recorded output value.
                    let out = Var(id);
                    let sq = self.mul(out, out);
                    let prod = self.mul(up, sq);
                    let g = self.neg(prod);
                    vec![(inputs[0], g)]
                }
                Op::Sqrt => {
                    let out = Var(id);
                    let inv = self.recip(out);
                    let half = self.scale(inv, 0.5);
                    let g = self.mul(up, half);
                    vec![(inputs[0], g)]
                }
                Op::Matmul => {
                    let bt = self.transpose(inputs[1]);
                    let ga = self.matmul(up, bt);
                    let at = self.transpose(inputs[0]);
                    let gb = self.matmul(at, up);
                    vec![(inputs[0], ga), (inputs[1], gb)]
                }
                Op::Transpose => {
                    let g = self.transpose(up);
                    vec![(inputs[0], g)]
                }
                Op::Sum => {
                    let shape = self.shape(inputs[0]).to_vec();
                    let g = self.expand_to(up, &shape);
                    vec![(inputs[0], g)]
                }
                Op::ExpandTo => {
                    let g = self.sum(up);
                    vec![(inputs[0], g)]
                }
                Op::LeakyRelu { slope } => {
                    // The mask is constant almost everywhere.
                    let mask: Vec<f64> = self
                        .value(inputs[0])
                        .iter()
                        .map(|&x| if x > 0.0 { 1.0 } else { slope })
                        .collect();
                    let shape = self.shape(inputs[0]).to_vec();
                    let mask_var = self.constant(&shape, mask);
                    let g = self.mul(up, mask_var);
                    vec![(inputs[0], g)]
                }
                Op::Reshape => {
                    let shape = self.shape(inputs[0]).to_vec();
                    let g = self.reshape(up, &shape);
                    vec![(inputs[0], g)]
                }
                Op::AddBias => {
                    let gb = self.sum_channels(up);
                    vec![(inputs[0], up), (inputs[1], gb)]
                }
                Op::SumChannels => {
                    let sx = self.shape(inputs[0]).to_vec();
                    let g = self.broadcast_channels(up, sx[0], sx[2], sx[3]);
                    vec![(inputs[0], g)]
                }
                Op::BroadcastChannels => {
                    let g = self.sum_channels(up);
                    vec![(inputs[0], g)]
                }
                Op::AddRowBias => {
                    let gb = self.sum_rows(up);
                    vec![(inputs[0], up), (inputs[1], gb)]
                }
                Op::SumRows => {
                    let n = self.shape(inputs[0])[0];
                    let g = self.broadcast_rows(up, n);
                    vec![(inputs[0], g)]
                }
                Op::BroadcastRows => {
                    let g = self.sum_rows(up);
                    vec![(inputs[0], g)]
                }
                Op::Conv2d { stride, pad } => {
                    let k = self.shape(inputs[1])[2];
                    let gx = self.conv_transpose2d(up, inputs[1], stride, pad);
                    let gw = self.conv2d_wgrad(inputs[0], up, stride, pad, k);
                    vec![(inputs[0], gx), (inputs[1], gw)]
                }
                Op::ConvT2d { stride, pad } => {
                    let k = self.shape(inputs[1])[2];
                    let gx = self.conv2d(up, inputs[1], stride, pad);
                    let gw = self.convt2d_wgrad(inputs[0], up, stride, pad, k);
                    vec![(inputs[0], gx), (inputs[1], gw)]
                }
                Op::Conv2dWGrad | Op::ConvT2dWGrad => {
                    return Err(Error::numerical(
                        "third-order differentiation through a kernel gradient is not supported".to_string(),
                    ));
                }
                Op::Crop { off_h, off_w } => {
                    let sx = self.shape(inputs[0]).to_vec();
                    let g = self.zero_pad(up, off_h, off_w, sx[2], sx[3]);
                    vec![(inputs[0], g)]
                }
                Op::ZeroPad { off_h, off_w, .. } => {
                    let sx = self.shape(inputs[0]).to_vec();
                    let g = self.crop(up, off_h, off_w, sx[2], sx[3]);
                    vec![(inputs[0], g)]
                }
            };
            for (input, g) in contribs {
                if !self.nodes[input.0].needs_grad {
                    continue;
                }
                adjoint[input.0] = Some(match adjoint[input.0] {
                    None => g,
                    Some(acc) => self.add(acc, g),
                });
            }
        }

        Ok(wrt
            .iter()
            .map(|&v| match adjoint.get(v.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(v).to_vec();
                    let len = numel(&shape);
                    self.constant(&shape, vec![0.0; len])
                }
            })
            .collect())
    }
}

#[allow(clippy::too_many_arguments)]
fn conv2d_forward(
    x: &[f64],
    w: &[f64],
    n: usize,
    ci: usize,
    h: usize,
    w_in: usize,
    co: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; n * co * oh * ow];
    for ni in 0..n {
        for coi in 0..co {
            for cii in 0..ci {
                let xw = &x[(ni * ci + cii) * h * w_in..(ni * ci + cii + 1) * h * w_in];
                let ww = &w[(coi * ci + cii) * k * k..(coi * ci + cii + 1) * k * k];
                let ob = (ni * co + coi) * oh * ow;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for ky in 0..k {
                            let iy = oy * stride + ky;
                            if iy < pad || iy - pad >= h {
                                continue;
                            }
                            let iy = iy - pad;
                            for kx in 0..k {
                                let ix = ox * stride + kx;
                                if ix < pad || ix - pad >= w_in {
                                    continue;
                                }
                                acc += xw[iy * w_in + (ix - pad)] * ww[ky * k + kx];
                            }
                        }
                        out[ob + oy * ow + ox] += acc;
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn convt2d_forward(
    x: &[f64],
    w: &[f64],
    n: usize,
    ci: usize,
    h: usize,
    w_in: usize,
    co: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    // Scatter-accumulate: each input pixel adds its kernel-weighted stamp.
    let mut out = vec![0.0; n * co * oh * ow];
    for ni in 0..n {
        for cii in 0..ci {
            let xw = &x[(ni * ci + cii) * h * w_in..(ni * ci + cii + 1) * h * w_in];
            for coi in 0..co {
                let ww = &w[(cii * co + coi) * k * k..(cii * co + coi + 1) * k * k];
                let ob = (ni * co + coi) * oh * ow;
                for iy in 0..h {
                    for ix in 0..w_in {
                        let xv = xw[iy * w_in + ix];
                        if xv == 0.0 {
                            continue;
                        }
                        for ky in 0..k {
                            let oy = iy * stride + ky;
                            if oy < pad || oy - pad >= oh {
                                continue;
                            }
                            let oy = oy - pad;
                            for kx in 0..k {
                                let ox = ix * stride + kx;
                                if ox < pad || ox - pad >= ow {
                                    continue;
                                }
                                out[ob + oy * ow + (ox - pad)] += xv * ww[ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv2d_wgrad_kernel(
    x: &[f64],
    gy: &[f64],
    n: usize,
    ci: usize,
    h: usize,
    w_in: usize,
    co: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; co * ci * k * k];
    for ni in 0..n {
        for coi in 0..co {
            let gb = &gy[(ni * co + coi) * oh * ow..(ni * co + coi + 1) * oh * ow];
            for cii in 0..ci {
                let xw = &x[(ni * ci + cii) * h * w_in..(ni * ci + cii + 1) * h * w_in];
                let wb = (coi * ci + cii) * k * k;
                for ky in 0..k {
                    for kx in 0..k {
                        let mut acc = 0.0;
                        for oy in 0..oh {
                            let iy = oy * stride + ky;
                            if iy < pad || iy - pad >= h {
                                continue;
                            }
                            let iy = iy - pad;
                            for ox in 0..ow {
                                let ix = ox * stride + kx;
                                if ix < pad || ix - pad >= w_in {
                                    continue;
                                }
                                acc += xw[iy * w_in + (ix - pad)] * gb[oy * ow + ox];
                            }
                        }
                        out[wb + ky * k + kx] += acc;
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn convt2d_wgrad_kernel(
    x: &[f64],
    gy: &[f64],
    n: usize,
    ci: usize,
    h: usize,
    w_in: usize,
    co: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; ci * co * k * k];
    for ni in 0..n {
        for cii in 0..ci {
            let xw = &x[(ni * ci + cii) * h * w_in..(ni * ci + cii + 1) * h * w_in];
            for coi in 0..co {
                let gb = &gy[(ni * co + coi) * oh * ow..(ni * co + coi + 1) * oh * ow];
                let wb = (cii * co + coi) * k * k;
                for ky in 0..k {
                    for kx in 0..k {
                        let mut acc = 0.0;
                        for iy in 0..h {
                            let oy = iy * stride + ky;
                            if oy < pad || oy - pad >= oh {
                                continue;
                            }
                            let oy = oy - pad;
                            for ix in 0..w_in {
                                let ox = ix * stride + kx;
                                if ox < pad || ox - pad >= ow {
                                    continue;
                                }
                                acc += xw[iy * w_in + ix] * gb[oy * ow + (ox - pad)];
                            }
                        }
                        out[wb + ky * k + kx] += acc;
                    }
                }
            }
        }
    }
    out
}
