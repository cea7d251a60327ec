//! Uncertainty-quantification indicators: relative error curves, kinetic
//! energy, pointwise discrepancy against the training distribution, and
//! maximum-amplitude statistics.

use serde::{Deserialize, Serialize};

use crate::grid::FieldSeries;
use crate::{Error, Result};

/// A time index is skipped when the per-time normalizer falls below this
/// fraction of its maximum over the whole trajectory; the division would
/// otherwise be dominated by round-off before the wavefront arrives.
pub const DENOM_GUARD_REL: f64 = 1e-8;

/// One point of a per-time indicator curve. `skipped` marks indices where the
/// normalizing denominator was degenerate; `value` is 0 there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t: usize,
    pub value: f64,
    pub skipped: bool,
}

fn check_same_layout(a: &FieldSeries, b: &FieldSeries) -> Result<()> {
    if a.n_t != b.n_t || a.spec.n_x != b.spec.n_x || a.spec.n_y != b.spec.n_y {
        return Err(Error::shape(format!(
            "field series layouts differ: [{},{},{}] vs [{},{},{}]",
            a.n_t, a.spec.n_y, a.spec.n_x, b.n_t, b.spec.n_y, b.spec.n_x
        )));
    }
    Ok(())
}

fn max_abs(frame: &[f64]) -> f64 {
    frame.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Relative error curve on flat `[n_t, per]` trajectories: at each time, the
/// mean of `|model - truth|` over the frame divided by the max of `|truth|`.
/// Times where the max is below `DENOM_GUARD_REL` times its trajectory-wide
/// peak are skipped.
pub fn epsilon_curve_flat(n_t: usize, model: &[f64], truth: &[f64]) -> Result<Vec<TimePoint>> {
    if n_t == 0 || model.len() != truth.len() || truth.len() % n_t != 0 {
        return Err(Error::shape(format!(
            "trajectory lengths {} / {} do not split into {n_t} frames",
            model.len(),
            truth.len()
        )));
    }
    let per = truth.len() / n_t;
    fn frame(v: &[f64], t: usize, per: usize) -> &[f64] {
        &v[t * per..(t + 1) * per]
    }
    let global: f64 = (0..n_t).map(|t| max_abs(frame(truth, t, per))).fold(0.0, f64::max);
    if global == 0.0 {
        return Err(Error::numerical(
            "relative error is undefined for an identically zero reference trajectory".to_string(),
        ));
    }
    let mut curve = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let denom = max_abs(frame(truth, t, per));
        if denom < DENOM_GUARD_REL * global {
            curve.push(TimePoint { t, value: 0.0, skipped: true });
            continue;
        }
        let mf = frame(model, t, per);
        let uf = frame(truth, t, per);
        let mean_abs: f64 =
            mf.iter().zip(uf).map(|(m, u)| (m - u).abs()).sum::<f64>() / per as f64;
        curve.push(TimePoint { t, value: mean_abs / denom, skipped: false });
    }
    Ok(curve)
}

/// `epsilon_curve_flat` on gridded field series.
pub fn epsilon_curve(model: &FieldSeries, truth: &FieldSeries) -> Result<Vec<TimePoint>> {
    check_same_layout(model, truth)?;
    epsilon_curve_flat(truth.n_t, &model.values, &truth.values)
}

/// Pointwise mean of per-sample curves. A time index is skipped in the
/// aggregate only when every sample skipped it; otherwise the mean runs over
/// the samples that kept it.
pub fn epsilon_aggregate(curves: &[Vec<TimePoint>]) -> Result<Vec<TimePoint>> {
    let Some(first) = curves.first() else {
        return Err(Error::domain("cannot aggregate an empty curve set".to_string()));
    };
    let n_t = first.len();
    if curves.iter().any(|c| c.len() != n_t) {
        return Err(Error::shape("curves have differing lengths".to_string()));
    }
    let mut out = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let kept: Vec<f64> = curves
            .iter()
            .filter(|c| !c[t].skipped)
            .map(|c| c[t].value)
            .collect();
        if kept.is_empty() {
            out.push(TimePoint { t, value: 0.0, skipped: true });
        } else {
            out.push(TimePoint {
                t,
                value: kept.iter().sum::<f64>() / kept.len() as f64,
                skipped: false,
            });
        }
    }
    Ok(out)
}

/// Pointwise kinetic energy with unit mass: `((u_i - u_{i-1}) / dt)^2 / 2`
/// for `i >= 1`. The first time index has no backward difference, so the
/// result has `n_t - 1` frames.
pub fn kinetic_energy(field: &FieldSeries, dt: f64) -> Result<FieldSeries> {
    if field.n_t < 2 {
        return Err(Error::domain("kinetic energy needs at least two time steps".to_string()));
    }
    if dt <= 0.0 {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    let mut out = FieldSeries::zeros(field.spec, field.n_t - 1);
    for t in 1..field.n_t {
        let prev = field.frame(t - 1).to_vec();
        let cur = field.frame(t).to_vec();
        for (o, (c, p)) in out.frame_mut(t - 1).iter_mut().zip(cur.iter().zip(&prev)) {
            let v = (c - p) / dt;
            *o = 0.5 * v * v;
        }
    }
    Ok(out)
}

fn check_rows_same_len(rows: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(Error::domain("cannot reduce an empty trajectory set".to_string()));
    };
    if rows.iter().any(|r| r.len() != first.len()) {
        return Err(Error::shape("trajectories have differing lengths".to_string()));
    }
    Ok(first.len())
}

/// Pointwise mean over flat trajectories of equal length.
pub fn pointwise_mean_flat(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let len = check_rows_same_len(rows)?;
    let mut out = vec![0.0; len];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    Ok(out)
}

/// Pointwise population standard deviation over flat trajectories.
pub fn pointwise_std_flat(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mean = pointwise_mean_flat(rows)?;
    let mut out = vec![0.0; mean.len()];
    for r in rows {
        for ((o, v), m) in out.iter_mut().zip(r).zip(&mean) {
            let d = v - m;
            *o += d * d;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    out.iter_mut().for_each(|o| *o = (*o * inv).sqrt());
    Ok(out)
}

/// Pointwise mean over a set of equally shaped field series.
pub fn pointwise_mean(fields: &[FieldSeries]) -> Result<FieldSeries> {
    let Some(first) = fields.first() else {
        return Err(Error::domain("cannot average an empty field set".to_string()));
    };
    for f in &fields[1..] {
        check_same_layout(first, f)?;
    }
    let rows: Vec<Vec<f64>> = fields.iter().map(|f| f.values.clone()).collect();
    Ok(FieldSeries { spec: first.spec, n_t: first.n_t, values: pointwise_mean_flat(&rows)? })
}

/// Pointwise population standard deviation over a set of field series.
pub fn pointwise_std(fields: &[FieldSeries]) -> Result<FieldSeries> {
    let Some(first) = fields.first() else {
        return Err(Error::domain("cannot average an empty field set".to_string()));
    };
    for f in &fields[1..] {
        check_same_layout(first, f)?;
    }
    let rows: Vec<Vec<f64>> = fields.iter().map(|f| f.values.clone()).collect();
    Ok(FieldSeries { spec: first.spec, n_t: first.n_t, values: pointwise_std_flat(&rows)? })
}

/// Pointwise discrepancy of flat draws against a reference mean:
/// `sqrt(E_z[(M(z) - mean_ref)^2])`, a Monte-Carlo estimate over the draws.
pub fn discrepancy_flat(draws: &[Vec<f64>], mean_ref: &[f64]) -> Result<Vec<f64>> {
    if draws.is_empty() {
        return Err(Error::domain("discrepancy needs at least one draw".to_string()));
    }
    if draws.iter().any(|d| d.len() != mean_ref.len()) {
        return Err(Error::shape("draw length does not match the reference mean".to_string()));
    }
    let mut out = vec![0.0; mean_ref.len()];
    for d in draws {
        for ((o, v), m) in out.iter_mut().zip(d).zip(mean_ref) {
            let e = v - m;
            *o += e * e;
        }
    }
    let inv = 1.0 / draws.len() as f64;
    out.iter_mut().for_each(|o| *o = (*o * inv).sqrt());
    Ok(out)
}

/// `discrepancy_flat` on gridded field series.
pub fn discrepancy(draws: &[FieldSeries], mean_ref: &FieldSeries) -> Result<FieldSeries> {
    for d in draws {
        check_same_layout(mean_ref, d)?;
    }
    let rows: Vec<Vec<f64>> = draws.iter().map(|d| d.values.clone()).collect();
    Ok(FieldSeries {
        spec: mean_ref.spec,
        n_t: mean_ref.n_t,
        values: discrepancy_flat(&rows, &mean_ref.values)?,
    })
}

/// Relative discrepancy curve on flat `[n_t, per]` maps: at each time, the
/// frame mean of `|sigma - sigma_ref|` divided by the frame max of
/// `sigma_ref`, with the same near-zero guard as `epsilon_curve`.
pub fn discrepancy_rel_flat(n_t: usize, sigma: &[f64], sigma_ref: &[f64]) -> Result<Vec<TimePoint>> {
    if n_t == 0 || sigma.len() != sigma_ref.len() || sigma_ref.len() % n_t != 0 {
        return Err(Error::shape(format!(
            "map lengths {} / {} do not split into {n_t} frames",
            sigma.len(),
            sigma_ref.len()
        )));
    }
    let per = sigma_ref.len() / n_t;
    fn frame(v: &[f64], t: usize, per: usize) -> &[f64] {
        &v[t * per..(t + 1) * per]
    }
    let global: f64 = (0..n_t).map(|t| max_abs(frame(sigma_ref, t, per))).fold(0.0, f64::max);
    let mut curve = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let denom = max_abs(frame(sigma_ref, t, per));
        if global == 0.0 || denom < DENOM_GUARD_REL * global {
            curve.push(TimePoint { t, value: 0.0, skipped: true });
            continue;
        }
        let sf = frame(sigma, t, per);
        let rf = frame(sigma_ref, t, per);
        let mean_abs: f64 =
            sf.iter().zip(rf).map(|(s, r)| (s - r).abs()).sum::<f64>() / per as f64;
        curve.push(TimePoint { t, value: mean_abs / denom, skipped: false });
    }
    Ok(curve)
}

/// `discrepancy_rel_flat` on gridded field series.
pub fn discrepancy_rel(sigma: &FieldSeries, sigma_ref: &FieldSeries) -> Result<Vec<TimePoint>> {
    check_same_layout(sigma, sigma_ref)?;
    discrepancy_rel_flat(sigma_ref.n_t, &sigma.values, &sigma_ref.values)
}

/// Pointwise amplitude map `|max_t u - min_t u|`, one value per grid node.
pub fn max_amplitude(field: &FieldSeries) -> Vec<f64> {
    let n = field.spec.n_nodes();
    let mut lo = field.frame(0).to_vec();
    let mut hi = lo.clone();
    for t in 1..field.n_t {
        for (k, &v) in field.frame(t).iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    (0..n).map(|k| (hi[k] - lo[k]).abs()).collect()
}

/// Largest pointwise amplitude over the whole domain, one scalar per sample.
pub fn peak_amplitude(field: &FieldSeries) -> f64 {
    max_amplitude(field).into_iter().fold(0.0, f64::max)
}

/// `peak_amplitude` on a flat `[n_t, per]` trajectory.
pub fn peak_amplitude_flat(n_t: usize, values: &[f64]) -> Result<f64> {
    if n_t == 0 || values.len() % n_t != 0 {
        return Err(Error::shape(format!(
            "trajectory length {} does not split into {n_t} frames",
            values.len()
        )));
    }
    let per = values.len() / n_t;
    let mut peak = 0.0f64;
    for k in 0..per {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in 0..n_t {
            let v = values[t * per + k];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        peak = peak.max((hi - lo).abs());
    }
    Ok(peak)
}

/// One histogram bin: `[lo, hi)` except the last bin, which is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Fixed-range histogram. Every input inside `[lo, hi]` lands in exactly one
/// bin, so counts conserve the sample count when the range covers the data.
pub fn histogram(values: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Vec<HistBin>> {
    if n_bins == 0 || !(hi > lo) {
        return Err(Error::domain(format!(
            "invalid histogram layout: [{lo}, {hi}] with {n_bins} bins"
        )));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<HistBin> = (0..n_bins)
        .map(|k| HistBin { lo: lo + k as f64 * width, hi: lo + (k + 1) as f64 * width, count: 0 })
        .collect();
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let k = (((v - lo) / width) as usize).min(n_bins - 1);
        bins[k].count += 1;
    }
    Ok(bins)
}
