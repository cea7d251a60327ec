//! Model variants over the zone of interest: deterministic convolutional
//! regressors, the Wasserstein GAN pair with gradient penalty, the POD +
//! random-forest surrogate, and their couplings through the FEM submodel.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::net::{bind_params, bind_params_const, flatten_grads, forward, input_grad_norm_penalty, predict};
use crate::autodiff::{AdamState, InitScheme, Layer, NetParams, NetSpec, Tape};
use crate::container;
use crate::fem::solve_submodel;
use crate::forest::ForestHyper;
use crate::grid::{build_grid, gather_boundary, sample_on_subboundary, sample_on_subgrid, BoundaryTrace, FieldSeries, GridSpec, TimeGrid};
use crate::lhs::{ParamBounds, ParamVector};
use crate::pod::{correlation_matrix, pod_modes, PodRf, Snapshots};
use crate::{Error, Result};

/// Base model kinds. `Bc` kinds regress the Dirichlet trace on the submodel
/// boundary; the others regress the full field on the zone of interest. `T`
/// kinds take the time index as an extra input and emit one frame per call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Nn,
    NnBc,
    NnT,
    NnBcT,
    Wgan,
    WganBc,
    PodRf,
}

impl VariantKind {
    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Nn => "NN",
            VariantKind::NnBc => "NN_BC",
            VariantKind::NnT => "NN_t",
            VariantKind::NnBcT => "NN_BC_t",
            VariantKind::Wgan => "WGAN",
            VariantKind::WganBc => "WGAN_BC",
            VariantKind::PodRf => "POD_RF",
        }
    }

    /// Output is a boundary trace rather than a full field.
    pub fn is_boundary(self) -> bool {
        matches!(self, VariantKind::NnBc | VariantKind::NnBcT | VariantKind::WganBc)
    }

    /// Takes `(p, t)` rows and emits one frame per call.
    pub fn is_per_time(self) -> bool {
        matches!(self, VariantKind::NnT | VariantKind::NnBcT)
    }

    pub fn is_generative(self) -> bool {
        matches!(self, VariantKind::Wgan | VariantKind::WganBc)
    }

    pub const ALL: [VariantKind; 7] = [
        VariantKind::Nn,
        VariantKind::NnBc,
        VariantKind::NnT,
        VariantKind::NnBcT,
        VariantKind::Wgan,
        VariantKind::WganBc,
        VariantKind::PodRf,
    ];
}

/// A model kind plus whether its output is pushed through the FEM submodel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVariant {
    pub kind: VariantKind,
    pub zoom: bool,
}

impl ModelVariant {
    pub fn new(kind: VariantKind, zoom: bool) -> Self {
        ModelVariant { kind, zoom }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.name(), if self.zoom { "_ZOOM" } else { "" })
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, zoom) = match s.strip_suffix("_ZOOM") {
            Some(b) => (b, true),
            None => (s, false),
        };
        for kind in VariantKind::ALL {
            if kind.name() == base {
                return Ok(ModelVariant { kind, zoom });
            }
        }
        let names: Vec<String> = VariantKind::ALL
            .iter()
            .flat_map(|k| [k.name().to_string(), format!("{}_ZOOM", k.name())])
            .collect();
        Err(Error::config(format!("unknown variant '{s}'; valid: {}", names.join(", "))))
    }
}

/// Training hyperparameters for the neural variants. The defaults suit the
/// deterministic regressors; [`TrainHyper::wgan_defaults`] suits the
/// adversarial critic, which needs a momentum-free, flat schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Multiplicative learning-rate decay per epoch (deterministic variants).
    pub lr_decay: f64,
    /// Gradient-penalty weight; 0 recovers the unpenalized critic objective.
    pub lambda_gp: f64,
    /// Critic updates per generator update.
    pub n_critic: usize,
    /// Latent dimension of the generator input.
    pub d_z: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 500,
            batch: 16,
            lr: 5e-3,
            lr_decay: 0.993,
            beta1: 0.9,
            beta2: 0.9,
            lambda_gp: 10.0,
            n_critic: 5,
            d_z: 32,
        }
    }
}

impl TrainHyper {
    /// Defaults for the adversarial variants: constant learning rate and
    /// beta1 = 0, the usual choice for gradient-penalized critics.
    pub fn wgan_defaults() -> Self {
        TrainHyper { epochs: 200, lr: 1e-4, lr_decay: 1.0, beta1: 0.0, ..TrainHyper::default() }
    }
}

/// What a variant emits for one parameter draw.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    Field(FieldSeries),
    Trace(BoundaryTrace),
}

/// Push a variant output through the Dirichlet-driven submodel: boundary
/// traces drive it directly, full fields are first restricted to the
/// submodel boundary.
pub fn zoom_output(output: &ModelOutput, sub: &GridSpec, time: &TimeGrid, c: f64) -> Result<FieldSeries> {
    let trace = match output {
        ModelOutput::Trace(tr) => tr.clone(),
        ModelOutput::Field(f) => gather_boundary(f)?,
    };
    let subgrid = build_grid(*sub)?;
    solve_submodel(&trace, &subgrid, time, c)
}

fn n_boundary(sub: &GridSpec) -> usize {
    2 * sub.n_x + 2 * sub.n_y - 4
}

/// Per-sample output image `[channels, height, width]` of a variant.
fn target_dims(kind: VariantKind, sub: &GridSpec, n_t: usize) -> (usize, usize, usize) {
    match (kind.is_boundary(), kind.is_per_time()) {
        (false, false) => (n_t, sub.n_y, sub.n_x),
        (false, true) => (1, sub.n_y, sub.n_x),
        (true, false) => (1, n_t, n_boundary(sub)),
        (true, true) => (1, 1, n_boundary(sub)),
    }
}

/// Extract the regression target for one sample: the restricted field
/// `[n_t, n'_y, n'_x]` or the boundary trace `[n_t, n_b]`, flattened.
fn extract_target(field: &FieldSeries, sub: &GridSpec, boundary: bool) -> Result<Vec<f64>> {
    if boundary {
        Ok(sample_on_subboundary(field, sub)?.values)
    } else {
        Ok(sample_on_subgrid(field, sub)?.values)
    }
}

/// Map `p` to `[0, 1]^3` features using the sampling bounds.
fn param_features(p: &ParamVector, bounds: &ParamBounds) -> [f64; 3] {
    let norm = |v: f64, (lo, hi): (f64, f64)| (v - lo) / (hi - lo);
    [norm(p.omega, bounds.omega), norm(p.x_s, bounds.x_s), norm(p.y_s, bounds.y_s)]
}

fn time_feature(t: usize, n_t: usize) -> f64 {
    t as f64 / (n_t - 1) as f64
}

fn global_max_abs(rows: &[Vec<f64>]) -> f64 {
    let m = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        1.0
    } else {
        m
    }
}

fn div_up(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Regressor / generator trunk: two dense layers fan out to a coarse image
/// that three stride-2 transposed convolutions upsample by 8x, cropped to
/// the target extent.
pub fn dcnr_spec(input_dim: usize, out_c: usize, out_h: usize, out_w: usize) -> Result<NetSpec> {
    let h0 = div_up(out_h, 8).max(1);
    let w0 = div_up(out_w, 8).max(1);
    NetSpec::new(
        vec![input_dim],
        vec![
            Layer::Dense { input: input_dim, output: 256 },
            Layer::LeakyRelu,
            Layer::Dense { input: 256, output: 32 * h0 * w0 },
            Layer::LeakyRelu,
            Layer::Reshape { shape: vec![32, h0, w0] },
            Layer::ConvT2d { in_ch: 32, out_ch: 16, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::ConvT2d { in_ch: 16, out_ch: 8, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::ConvT2d { in_ch: 8, out_ch: out_c, kernel: 4, stride: 2, pad: 1 },
            Layer::Crop { h: out_h, w: out_w },
        ],
    )
}

/// Critic: zero-pad to a stride-compatible extent, three stride-2
/// convolutions, then a dense head to a scalar score.
pub fn disc_spec(in_c: usize, in_h: usize, in_w: usize) -> Result<NetSpec> {
    let ph = div_up(in_h.max(8), 8) * 8;
    let pw = div_up(in_w.max(8), 8) * 8;
    NetSpec::new(
        vec![in_c, in_h, in_w],
        vec![
            Layer::Pad { h: ph, w: pw },
            Layer::Conv2d { in_ch: in_c, out_ch: 8, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::Conv2d { in_ch: 8, out_ch: 16, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::Conv2d { in_ch: 16, out_ch: 32, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::Flatten,
            Layer::Dense { input: 32 * (ph / 8) * (pw / 8), output: 1 },
        ],
    )
}

/// A trained deterministic regressor (NN, NN_BC, NN_t, NN_BC_t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcnrModel {
    pub kind: VariantKind,
    pub spec: NetSpec,
    pub params: NetParams,
    /// Global max-abs of the training targets; outputs are multiplied back.
    pub scale: f64,
    pub bounds: ParamBounds,
    pub sub: GridSpec,
    pub n_t: usize,
}

impl DcnrModel {
    /// Deterministic prediction at parameter vector `p`, denormalized.
    pub fn predict(&self, p: &ParamVector) -> Result<ModelOutput> {
        let base = param_features(p, &self.bounds);
        let raw = if self.kind.is_per_time() {
            // Batch all time rows in one forward pass.
            let mut input = Vec::with_capacity(self.n_t * 4);
            for t in 0..self.n_t {
                input.extend_from_slice(&base);
                input.push(time_feature(t, self.n_t));
            }
            predict(&self.spec, &self.params, &input, self.n_t)?
        } else {
            predict(&self.spec, &self.params, &base, 1)?
        };
        let values: Vec<f64> = raw.iter().map(|v| v * self.scale).collect();
        if self.kind.is_boundary() {
            let n_b = n_boundary(&self.sub);
            Ok(ModelOutput::Trace(BoundaryTrace { n_t: self.n_t, n_b, values }))
        } else {
            Ok(ModelOutput::Field(FieldSeries { spec: self.sub, n_t: self.n_t, values }))
        }
    }
}

/// One (input row, normalized target row) pair.
struct Rows {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    scale: f64,
    input_dim: usize,
}

fn build_rows(
    kind: VariantKind,
    samples: &[(ParamVector, FieldSeries)],
    bounds: &ParamBounds,
    sub: &GridSpec,
    n_t: usize,
) -> Result<Rows> {
    if samples.is_empty() {
        return Err(Error::domain("training needs at least one sample".to_string()));
    }
    let mut full_targets = Vec::with_capacity(samples.len());
    for (_, field) in samples {
        if field.n_t != n_t {
            return Err(Error::shape(format!("sample has {} steps, expected {n_t}", field.n_t)));
        }
        full_targets.push(extract_target(field, sub, kind.is_boundary())?);
    }
    let scale = global_max_abs(&full_targets);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    if kind.is_per_time() {
        let per_frame = full_targets[0].len() / n_t;
        for ((p, _), tgt) in samples.iter().zip(&full_targets) {
            let base = param_features(p, bounds);
            for t in 0..n_t {
                let mut row = base.to_vec();
                row.push(time_feature(t, n_t));
                inputs.push(row);
                targets.push(tgt[t * per_frame..(t + 1) * per_frame].iter().map(|v| v / scale).collect());
            }
        }
    } else {
        for ((p, _), tgt) in samples.iter().zip(&full_targets) {
            inputs.push(param_features(p, bounds).to_vec());
            targets.push(tgt.iter().map(|v| v / scale).collect());
        }
    }
    let input_dim = inputs[0].len();
    Ok(Rows { inputs, targets, scale, input_dim })
}

/// Batch loss: mean over samples of the per-sample root-mean-square error.
/// Returns the loss variable; targets enter as constants.
fn rmse_loss(tape: &mut Tape, y: crate::autodiff::Var, target_flat: &[f64]) -> crate::autodiff::Var {
    let shape = tape.shape(y).to_vec();
    let n = shape[0];
    let per: usize = shape[1..].iter().product();
    let tgt = tape.constant(&shape, target_flat.to_vec());
    let d = tape.sub(y, tgt);
    let d2 = tape.mul(d, d);
    let flat = tape.reshape(d2, &[n, per]);
    let ones = tape.constant(&[per, 1], vec![1.0 / per as f64; per]);
    let mean_sq = tape.matmul(flat, ones);
    let rmse = tape.sqrt(mean_sq);
    tape.mean(rmse)
}

/// Train a deterministic regressor by minibatch Adam on the mean per-sample
/// RMSE of normalized targets. Returns the model and the per-epoch loss
/// curve; aborts if the loss stops being finite.
pub fn train_dcnr(
    kind: VariantKind,
    samples: &[(ParamVector, FieldSeries)],
    bounds: &ParamBounds,
    sub: &GridSpec,
    n_t: usize,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<(DcnrModel, Vec<f64>)> {
    if kind.is_generative() || kind == VariantKind::PodRf {
        return Err(Error::config(format!("{} is not a deterministic regressor", kind.name())));
    }
    let rows = build_rows(kind, samples, bounds, sub, n_t)?;
    let (c, h, w) = target_dims(kind, sub, n_t);
    let spec = dcnr_spec(rows.input_dim, c, h, w)?;
    let mut params = NetParams::init(&spec, InitScheme::Glorot, seed);
    let mut adam = AdamState::new(params.len(), hyper.lr, hyper.beta1, hyper.beta2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_6e64);
    let n_rows = rows.inputs.len();
    let batch = hyper.batch.max(1).min(n_rows);
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut curve = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        adam.lr = hyper.lr * hyper.lr_decay.powi(epoch as i32);
        // Fisher-Yates shuffle for minibatch order.
        for i in (1..n_rows).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let n = chunk.len();
            let mut x = Vec::with_capacity(n * rows.input_dim);
            let mut t = Vec::with_capacity(n * c * h * w);
            for &idx in chunk {
                x.extend_from_slice(&rows.inputs[idx]);
                t.extend_from_slice(&rows.targets[idx]);
            }
            let mut tape = Tape::new();
            let bound = bind_params(&mut tape, &spec, &params)?;
            let xv = tape.constant(&[n, rows.input_dim], x);
            let y = forward(&mut tape, &spec, &bound, xv)?;
            let loss = rmse_loss(&mut tape, y, &t);
            let loss_val = tape.value(loss)[0];
            if !loss_val.is_finite() {
                return Err(Error::numerical(format!(
                    "training diverged at epoch {epoch}: loss = {loss_val}"
                )));
            }
            epoch_loss += loss_val * n as f64;
            let grads = tape.backward(loss, &bound.all_vars())?;
            let g = flatten_grads(&tape, &grads);
            adam.update(&mut params.data, &g)?;
        }
        curve.push(epoch_loss / n_rows as f64);
    }

    let model = DcnrModel {
        kind,
        spec,
        params,
        scale: rows.scale,
        bounds: bounds.clone(),
        sub: *sub,
        n_t,
    };
    Ok((model, curve))
}

/// A trained generator/critic pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WganModel {
    pub kind: VariantKind,
    pub gen_spec: NetSpec,
    pub gen_params: NetParams,
    pub disc_spec: NetSpec,
    pub disc_params: NetParams,
    pub scale: f64,
    pub d_z: usize,
    pub sub: GridSpec,
    pub n_t: usize,
}

impl WganModel {
    /// Draw one latent vector, uniform in `[-1, 1]^d_z`.
    pub fn sample_z(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.d_z).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Deterministic generator output for a fixed latent vector.
    pub fn predict(&self, z: &[f64]) -> Result<ModelOutput> {
        if z.len() != self.d_z {
            return Err(Error::shape(format!("latent vector has {} entries, expected {}", z.len(), self.d_z)));
        }
        let raw = predict(&self.gen_spec, &self.gen_params, z, 1)?;
        let values: Vec<f64> = raw.iter().map(|v| v * self.scale).collect();
        if self.kind.is_boundary() {
            let n_b = n_boundary(&self.sub);
            Ok(ModelOutput::Trace(BoundaryTrace { n_t: self.n_t, n_b, values }))
        } else {
            Ok(ModelOutput::Field(FieldSeries { spec: self.sub, n_t: self.n_t, values }))
        }
    }
}

/// One row of the WGAN training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WganLogRow {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    /// Estimate of `E_real[D] - E_fake[D]` at the end of the epoch.
    pub wasserstein: f64,
    pub gp: f64,
}

fn sample_latents(rng: &mut ChaCha8Rng, n: usize, d_z: usize) -> Vec<f64> {
    (0..n * d_z).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Mean critic score over a batch held as plain data.
fn critic_mean(spec: &NetSpec, params: &NetParams, batch: &[f64], n: usize) -> Result<f64> {
    let scores = predict(spec, params, batch, n)?;
    Ok(scores.iter().sum::<f64>() / n as f64)
}

/// Train an unconditional WGAN with gradient penalty by alternating
/// `n_critic` critic steps and one generator step per minibatch.
pub fn train_wgan(
    kind: VariantKind,
    samples: &[(ParamVector, FieldSeries)],
    sub: &GridSpec,
    n_t: usize,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<(WganModel, Vec<WganLogRow>)> {
    if !kind.is_generative() {
        return Err(Error::config(format!("{} is not a generative kind", kind.name())));
    }
    if samples.is_empty() {
        return Err(Error::domain("training needs at least one sample".to_string()));
    }
    let mut reals = Vec::with_capacity(samples.len());
    for (_, field) in samples {
        if field.n_t != n_t {
            return Err(Error::shape(format!("sample has {} steps, expected {n_t}", field.n_t)));
        }
        reals.push(extract_target(field, sub, kind.is_boundary())?);
    }
    let scale = global_max_abs(&reals);
    for r in &mut reals {
        for v in r.iter_mut() {
            *v /= scale;
        }
    }
    let (c, h, w) = target_dims(kind, sub, n_t);
    let per = c * h * w;
    let gen_spec = dcnr_spec(hyper.d_z, c, h, w)?;
    let dsc_spec = disc_spec(c, h, w)?;
    let mut gen_params = NetParams::init(&gen_spec, InitScheme::Glorot, seed);
    let mut dsc_params = NetParams::init(&dsc_spec, InitScheme::Glorot, seed ^ 0x6469_7363);
    let mut adam_g = AdamState::new(gen_params.len(), hyper.lr, hyper.beta1, hyper.beta2);
    let mut adam_d = AdamState::new(dsc_params.len(), hyper.lr, hyper.beta1, hyper.beta2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7767_616e);

    let n_real = reals.len();
    let batch = hyper.batch.max(1).min(n_real);
    let steps_per_epoch = n_real.div_ceil(batch);
    let mut log = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        let mut epoch_d = 0.0;
        let mut epoch_g = 0.0;
        let mut epoch_gp = 0.0;
        let mut n_d_steps = 0;
        for _ in 0..steps_per_epoch {
            for _ in 0..hyper.n_critic {
                // Fresh real minibatch and latent draw per critic step.
                let mut real = Vec::with_capacity(batch * per);
                for _ in 0..batch {
                    real.extend_from_slice(&reals[rng.gen_range(0..n_real)]);
                }
                let z = sample_latents(&mut rng, batch, hyper.d_z);
                let fake = predict(&gen_spec, &gen_params, &z, batch)?;

                // Main critic objective E[D(fake)] - E[D(real)].
                let mut tape = Tape::new();
                let bound = bind_params(&mut tape, &dsc_spec, &dsc_params)?;
                let mut shape = vec![batch];
                shape.extend_from_slice(&dsc_spec.input_shape);
                let xr = tape.constant(&shape, real.clone());
                let xf = tape.constant(&shape, fake.clone());
                let dr = forward(&mut tape, &dsc_spec, &bound, xr)?;
                let df = forward(&mut tape, &dsc_spec, &bound, xf)?;
                let mr = tape.mean(dr);
                let mf = tape.mean(df);
                let main = tape.sub(mf, mr);
                let main_val = tape.value(main)[0];
                let grads = tape.backward(main, &bound.all_vars())?;
                let mut g = flatten_grads(&tape, &grads);

                // Gradient penalty on random interpolates.
                let mut x_hat = Vec::with_capacity(batch * per);
                for k in 0..batch {
                    let u: f64 = rng.gen_range(0.0..1.0);
                    for i in 0..per {
                        x_hat.push(u * real[k * per + i] + (1.0 - u) * fake[k * per + i]);
                    }
                }
                let (gp, gp_grad) = input_grad_norm_penalty(&dsc_spec, &dsc_params, &x_hat, batch)?;
                for (gi, pi) in g.iter_mut().zip(&gp_grad) {
                    *gi += hyper.lambda_gp * pi;
                }
                let d_loss = main_val + hyper.lambda_gp * gp;
                if !d_loss.is_finite() {
                    return Err(Error::numerical(format!(
                        "critic loss diverged at epoch {epoch}: {d_loss}"
                    )));
                }
                adam_d.update(&mut dsc_params.data, &g)?;
                epoch_d += d_loss;
                epoch_gp += gp;
                n_d_steps += 1;
            }

            // Generator step on -E_z[D(G(z))].
            let z = sample_latents(&mut rng, batch, hyper.d_z);
            let mut tape = Tape::new();
            let g_bound = bind_params(&mut tape, &gen_spec, &gen_params)?;
            let zv = tape.constant(&[batch, hyper.d_z], z);
            let fake = forward(&mut tape, &gen_spec, &g_bound, zv)?;
            let d_bound = bind_params_const(&mut tape, &dsc_spec, &dsc_params)?;
            let df = forward(&mut tape, &dsc_spec, &d_bound, fake)?;
            let mf = tape.mean(df);
            let g_loss_var = tape.scale(mf, -1.0);
            let g_loss = tape.value(g_loss_var)[0];
            if !g_loss.is_finite() {
                return Err(Error::numerical(format!(
                    "generator loss diverged at epoch {epoch}: {g_loss}"
                )));
            }
            let grads = tape.backward(g_loss_var, &g_bound.all_vars())?;
            let g = flatten_grads(&tape, &grads);
            adam_g.update(&mut gen_params.data, &g)?;
            epoch_g += g_loss;
        }

        // End-of-epoch Wasserstein estimate over the full real set.
        let real_flat: Vec<f64> = reals.iter().flatten().copied().collect();
        let z = sample_latents(&mut rng, n_real, hyper.d_z);
        let fake = predict(&gen_spec, &gen_params, &z, n_real)?;
        let w_est = critic_mean(&dsc_spec, &dsc_params, &real_flat, n_real)?
            - critic_mean(&dsc_spec, &dsc_params, &fake, n_real)?;
        log.push(WganLogRow {
            epoch,
            d_loss: epoch_d / n_d_steps as f64,
            g_loss: epoch_g / steps_per_epoch as f64,
            wasserstein: w_est,
            gp: epoch_gp / n_d_steps as f64,
        });
    }

    let model = WganModel {
        kind,
        gen_spec,
        gen_params,
        disc_spec: dsc_spec,
        disc_params: dsc_params,
        scale,
        d_z: hyper.d_z,
        sub: *sub,
        n_t,
    };
    Ok((model, log))
}

/// POD + random-forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PodRfHyper {
    /// Fraction of correlation energy allowed outside the retained modes.
    pub energy_tol: f64,
    /// Keep every `stride`-th time frame as a snapshot.
    pub snapshot_stride: usize,
    pub forest: ForestHyper,
}

impl Default for PodRfHyper {
    fn default() -> Self {
        PodRfHyper { energy_tol: 1e-6, snapshot_stride: 10, forest: ForestHyper::default() }
    }
}

/// POD basis over submodel snapshots plus forests mapping `(p, t)` to the
/// generalized coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PodRfModel {
    pub surrogate: PodRf,
    pub sub: GridSpec,
    pub n_t: usize,
}

impl PodRfModel {
    pub fn predict(&self, p: &ParamVector) -> Result<ModelOutput> {
        let mut out = FieldSeries::zeros(self.sub, self.n_t);
        for t in 0..self.n_t {
            let frame = self.surrogate.predict_field(p, time_feature(t, self.n_t))?;
            out.frame_mut(t).copy_from_slice(&frame);
        }
        Ok(ModelOutput::Field(out))
    }
}

/// Fit the POD basis on strided submodel snapshots and one forest per
/// retained coordinate.
pub fn train_pod_rf(
    samples: &[(ParamVector, FieldSeries)],
    sub: &GridSpec,
    n_t: usize,
    hyper: &PodRfHyper,
    seed: u64,
) -> Result<PodRfModel> {
    if samples.is_empty() {
        return Err(Error::domain("training needs at least one sample".to_string()));
    }
    if hyper.snapshot_stride == 0 {
        return Err(Error::config("snapshot stride must be at least 1".to_string()));
    }
    let n_dof = sub.n_nodes();
    let mut data = Vec::new();
    let mut inputs = Vec::new();
    for (p, field) in samples {
        if field.n_t != n_t {
            return Err(Error::shape(format!("sample has {} steps, expected {n_t}", field.n_t)));
        }
        let restricted = sample_on_subgrid(field, sub)?;
        for t in (0..n_t).step_by(hyper.snapshot_stride) {
            data.extend_from_slice(restricted.frame(t));
            inputs.push((p.clone(), time_feature(t, n_t)));
        }
    }
    let snaps = Snapshots::new(inputs.len(), n_dof, data)?;
    let corr = correlation_matrix(&snaps, None);
    let basis = pod_modes(&corr, &snaps, hyper.energy_tol, None)?;
    let surrogate = PodRf::fit(basis, &inputs, &snaps, &hyper.forest, seed)?;
    Ok(PodRfModel { surrogate, sub: *sub, n_t })
}

// --- Persistence -----------------------------------------------------------

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    Ok(fs::write(path, serde_json::to_vec_pretty(value)?)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::missing(format!("model file {} does not exist", path.display())));
    }
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Metadata half of a persisted regressor; weights live in a container file.
#[derive(Serialize, Deserialize)]
struct DcnrMeta {
    kind: VariantKind,
    spec: NetSpec,
    scale: f64,
    bounds: ParamBounds,
    sub: GridSpec,
    n_t: usize,
}

pub fn save_dcnr(dir: &Path, model: &DcnrModel) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = DcnrMeta {
        kind: model.kind,
        spec: model.spec.clone(),
        scale: model.scale,
        bounds: model.bounds.clone(),
        sub: model.sub,
        n_t: model.n_t,
    };
    write_json(&dir.join("dcnr.json"), &meta)?;
    container::write_array(&dir.join("weights.f64"), &[model.params.len()], &model.params.data)
}

pub fn load_dcnr(dir: &Path) -> Result<DcnrModel> {
    let meta: DcnrMeta = read_json(&dir.join("dcnr.json"))?;
    let (dims, data) = container::read_array(&dir.join("weights.f64"))?;
    if dims != [meta.spec.param_count()] {
        return Err(Error::shape(format!(
            "weight file holds {dims:?} values, spec needs {}",
            meta.spec.param_count()
        )));
    }
    Ok(DcnrModel {
        kind: meta.kind,
        spec: meta.spec,
        params: NetParams { data },
        scale: meta.scale,
        bounds: meta.bounds,
        sub: meta.sub,
        n_t: meta.n_t,
    })
}

#[derive(Serialize, Deserialize)]
struct WganMeta {
    kind: VariantKind,
    gen_spec: NetSpec,
    disc_spec: NetSpec,
    scale: f64,
    d_z: usize,
    sub: GridSpec,
    n_t: usize,
}

pub fn save_wgan(dir: &Path, model: &WganModel) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = WganMeta {
        kind: model.kind,
        gen_spec: model.gen_spec.clone(),
        disc_spec: model.disc_spec.clone(),
        scale: model.scale,
        d_z: model.d_z,
        sub: model.sub,
        n_t: model.n_t,
    };
    write_json(&dir.join("wgan.json"), &meta)?;
    container::write_array(&dir.join("gen_weights.f64"), &[model.gen_params.len()], &model.gen_params.data)?;
    container::write_array(&dir.join("disc_weights.f64"), &[model.disc_params.len()], &model.disc_params.data)
}

pub fn load_wgan(dir: &Path) -> Result<WganModel> {
    let meta: WganMeta = read_json(&dir.join("wgan.json"))?;
    let (gd, gen_data) = container::read_array(&dir.join("gen_weights.f64"))?;
    let (dd, disc_data) = container::read_array(&dir.join("disc_weights.f64"))?;
    if gd != [meta.gen_spec.param_count()] || dd != [meta.disc_spec.param_count()] {
        return Err(Error::shape("weight files do not match the network specs".to_string()));
    }
    Ok(WganModel {
        kind: meta.kind,
        gen_spec: meta.gen_spec,
        gen_params: NetParams { data: gen_data },
        disc_spec: meta.disc_spec,
        disc_params: NetParams { data: disc_data },
        scale: meta.scale,
        d_z: meta.d_z,
        sub: meta.sub,
        n_t: meta.n_t,
    })
}

pub fn save_pod_rf(dir: &Path, model: &PodRfModel) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("pod_rf.json"), model)
}

pub fn load_pod_rf(dir: &Path) -> Result<PodRfModel> {
    read_json(&dir.join("pod_rf.json"))
}
