//! Composition-structured true conditional class probability functions and
//! their smoothness/rate metadata.
//!
//! A truth is a map η: [0,1]^d → S^K whose per-class coordinates factor as a
//! chain of Hölder-smooth stages, each stage coordinate depending on at most
//! t_i inputs. The metadata (r, d, t, β, Q, K) determines the effective
//! smoothness β_i* = β_i ∏_{l>i} (β_l ∧ 1) and the rate
//! φ_n = max_i n^{−β_i*/(β_i*+t_i)}.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::SimplexVector;
use crate::network::softmax;

/// Structural metadata of a composition class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositionSpec {
    /// Number of inner stages; the chain has r+1 stage maps.
    pub r: usize,
    /// Stage dimensions d_0..d_{r+1}; d_0 is the input dimension and the
    /// per-class chain ends scalar (d_{r+1} = 1).
    pub dims: Vec<usize>,
    /// Active arity t_0..t_r of each stage coordinate.
    pub arities: Vec<usize>,
    /// Smoothness β_0..β_r of each stage.
    pub smoothness: Vec<f64>,
    /// Hölder radius Q.
    pub radius: f64,
    /// Class count K.
    pub classes: usize,
}

impl CompositionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.len() != self.r + 2 {
            return Err(Error::Argument(format!(
                "dims must have r+2 = {} entries, got {}",
                self.r + 2,
                self.dims.len()
            )));
        }
        if self.arities.len() != self.r + 1 || self.smoothness.len() != self.r + 1 {
            return Err(Error::Argument(
                "arities and smoothness must have r+1 entries".into(),
            ));
        }
        if self.dims[self.r + 1] != 1 {
            return Err(Error::Argument(
                "per-class composition must end scalar (last dim 1)".into(),
            ));
        }
        for (i, (&t, &d)) in self.arities.iter().zip(&self.dims).enumerate() {
            if t == 0 || t > d {
                return Err(Error::Argument(format!(
                    "arity t_{i} = {t} must be in 1..=d_{i} = {d}"
                )));
            }
        }
        if self.smoothness.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::Argument("smoothness entries must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Argument("class count must be >= 2".into()));
        }
        if (self.classes as f64) * self.radius < 1.0 {
            return Err(Error::Argument("need K*Q >= 1".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }
}

/// β_i* = β_i ∏_{l=i+1}^r (β_l ∧ 1); the last stage keeps its own smoothness.
pub fn effective_smoothness(spec: &CompositionSpec) -> Vec<f64> {
    let beta = &spec.smoothness;
    (0..beta.len())
        .map(|i| beta[i] * beta[i + 1..].iter().map(|b| b.min(1.0)).product::<f64>())
        .collect()
}

/// φ_n = max_i n^{−β_i*/(β_i*+t_i)} with the achieving index; ties go to the
/// smallest index.
pub fn rate_phi_n(spec: &CompositionSpec, n: u64) -> (f64, usize) {
    let bstar = effective_smoothness(spec);
    let nf = n as f64;
    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for (i, (&b, &t)) in bstar.iter().zip(&spec.arities).enumerate() {
        let val = nf.powf(-b / (b + t as f64));
        if val > best_val + 1e-15 {
            best_val = val;
            best = i;
        }
    }
    (best_val, best)
}

/// Error propagation through a composition with per-stage sup errors:
/// Q_r ∏_{l<r} (2Q_l)^{β_{l+1}} · Σ_i eps_i^{∏_{l>i} (β_l ∧ 1)}.
pub fn composition_error_bound(radii: &[f64], smoothness: &[f64], eps: &[f64]) -> Result<f64> {
    let r1 = radii.len();
    if smoothness.len() != r1 || eps.len() != r1 || r1 == 0 {
        return Err(Error::Argument("radii, smoothness, eps must share length r+1 >= 1".into()));
    }
    if eps.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::Argument("eps entries must be nonnegative".into()));
    }
    let r = r1 - 1;
    let lead: f64 = radii[r]
        * (0..r)
            .map(|l| (2.0 * radii[l]).powf(smoothness[l + 1]))
            .product::<f64>();
    let sum: f64 = (0..=r)
        .map(|i| {
            let expo: f64 = smoothness[i + 1..].iter().map(|b| b.min(1.0)).product();
            eps[i].powf(expo)
        })
        .sum();
    Ok(lead * sum)
}

/// A univariate building block with certified smoothness metadata.
#[derive(Clone)]
pub struct HoelderFn {
    pub beta: f64,
    pub radius: f64,
    pub label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl HoelderFn {
    pub fn new(
        beta: f64,
        radius: f64,
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        HoelderFn {
            beta,
            radius,
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Empirical Hölder-norm estimate on a probe grid: finite-difference
    /// derivatives up to order ⌈β⌉−1, their sup norms, plus the Hölder
    /// quotient of the top derivative at exponent β − (⌈β⌉−1). Membership is
    /// certified when this scan stays at or below the declared radius.
    pub fn hoelder_norm_scan(&self, grid: usize) -> f64 {
        hoelder_norm_scan_fn(|x| self.eval(x), self.beta, grid)
    }
}

pub(crate) fn hoelder_norm_scan_fn<F: Fn(f64) -> f64>(f: F, beta: f64, grid: usize) -> f64 {
    let k = (beta.ceil() as usize).saturating_sub(1);
    let m = grid.max(8);
    let h = 1.0 / (m - 1) as f64;
    let mut level: Vec<f64> = (0..m).map(|i| f(i as f64 * h)).collect();
    let mut norm = 0.0f64;
    for order in 0..=k {
        norm += level.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if order < k {
            // central differences; equal spacing is preserved
            level = (1..level.len() - 1)
                .map(|i| (level[i + 1] - level[i - 1]) / (2.0 * h))
                .collect();
        }
    }
    // Hölder quotient of the order-k level at exponent beta - k
    let expo = beta - k as f64;
    let mut quot = 0.0f64;
    for i in 0..level.len() {
        for j in i + 1..level.len() {
            let dx = (j - i) as f64 * h;
            quot = quot.max((level[j] - level[i]).abs() / dx.powf(expo));
        }
    }
    norm + quot
}

/// Catalog of certified univariate blocks: `polynomial`, `cusp`, `sinusoid`,
/// `zero`. Parameters arrive as a JSON object.
pub fn library_hoelder(name: &str, params: &Value) -> Result<HoelderFn> {
    match name {
        "zero" => Ok(HoelderFn::new(
            params.get("beta").and_then(Value::as_f64).unwrap_or(1.0),
            0.0,
            "zero",
            |_| 0.0,
        )),
        "polynomial" => {
            let coeffs: Vec<f64> = params
                .get("coeffs")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Argument("polynomial requires coeffs array".into()))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| Error::Argument("bad coefficient".into())))
                .collect::<Result<_>>()?;
            if coeffs.is_empty() {
                return Err(Error::Argument("polynomial needs at least one coefficient".into()));
            }
            let deg = coeffs.len() - 1;
            let beta = params
                .get("beta")
                .and_then(Value::as_f64)
                .unwrap_or((deg + 1) as f64);
            if !(beta > 0.0) {
                return Err(Error::Argument("beta must be positive".into()));
            }
            // C^beta norm bound on [0,1] from derivative coefficient sums:
            // sup |f^(o)| <= sum_{j>=o} |c_j| j!/(j-o)!.
            let k = (beta.ceil() as usize).saturating_sub(1);
            let deriv_sup = |o: usize| -> f64 {
                coeffs
                    .iter()
                    .enumerate()
                    .skip(o)
                    .map(|(j, c)| {
                        let fall: f64 = (j - o + 1..=j).map(|v| v as f64).product();
                        c.abs() * fall
                    })
                    .sum()
            };
            let mut radius: f64 = (0..=k).map(deriv_sup).sum();
            radius += deriv_sup(k + 1); // Lipschitz bound covers the top quotient
            let c = coeffs.clone();
            Ok(HoelderFn::new(beta, radius, format!("poly{deg}"), move |x| {
                c.iter().rev().fold(0.0, |acc, &cj| acc * x + cj)
            }))
        }
        "cusp" => {
            let center = params.get("center").and_then(Value::as_f64).unwrap_or(0.5);
            let beta = params.get("beta").and_then(Value::as_f64).unwrap_or(0.5);
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::Argument(format!("cusp beta must be in (0,1], got {beta}")));
            }
            // | |x-c|^b - |y-c|^b | <= |x-y|^b, so the quotient is at most 1.
            let radius = center.max(1.0 - center).powf(beta) + 1.0;
            Ok(HoelderFn::new(beta, radius, format!("cusp@{center}"), move |x| {
                (x - center).abs().powf(beta)
            }))
        }
        "sinusoid" => {
            let amp = params.get("amp").and_then(Value::as_f64).unwrap_or(1.0);
            let freq = params.get("freq").and_then(Value::as_f64).unwrap_or(1.0);
            let phase = params.get("phase").and_then(Value::as_f64).unwrap_or(0.0);
            let beta = params.get("beta").and_then(Value::as_f64).unwrap_or(1.0);
            if !(beta > 0.0) {
                return Err(Error::Argument("beta must be positive".into()));
            }
            let omega = 2.0 * std::f64::consts::PI * freq;
            let k = (beta.ceil() as usize).saturating_sub(1);
            let mut radius: f64 = (0..=k).map(|o| amp.abs() * omega.powi(o as i32)).sum();
            radius += amp.abs() * omega.powi(k as i32 + 1);
            Ok(HoelderFn::new(beta, radius, "sinusoid", move |x| {
                amp * (omega * x + phase).sin()
            }))
        }
        "zigzag" => {
            // truncated Takagi sum: amp · Σ_{j<levels} 2^{-j} Λ(2^j x) with
            // Λ the distance to the nearest integer. Lipschitz but kink-dense
            // (about 2^levels kinks), so it genuinely exercises the beta = 1
            // class instead of hiding extra smoothness.
            let amp = params.get("amp").and_then(Value::as_f64).unwrap_or(1.0);
            let levels = params.get("levels").and_then(Value::as_u64).unwrap_or(6) as usize;
            if levels == 0 || levels > 16 {
                return Err(Error::Argument("zigzag levels must be in 1..=16".into()));
            }
            // each level contributes slope ±amp, values sum below amp
            let radius = amp.abs() * (levels as f64 + 1.0);
            Ok(HoelderFn::new(1.0, radius, format!("zigzag{levels}"), move |x| {
                let mut acc = 0.0;
                for j in 0..levels {
                    let t = x * (1u64 << j) as f64;
                    acc += (t - t.round()).abs() / (1u64 << j) as f64;
                }
                amp * acc
            }))
        }
        "chatter" => {
            // hash-signed tent chatter: on each of `cells` equal cells the
            // function is a tent of height ±amp vanishing at the cell
            // boundary, the sign drawn from a splitmix64 parity of the cell
            // index. Continuous, Lipschitz with constant 2·amp·cells, no
            // self-similar structure a composition can shortcut.
            let amp = params.get("amp").and_then(Value::as_f64).unwrap_or(0.15);
            let cells = params.get("cells").and_then(Value::as_u64).unwrap_or(1024);
            let salt = params.get("salt").and_then(Value::as_u64).unwrap_or(0);
            if cells == 0 {
                return Err(Error::Argument("chatter needs at least one cell".into()));
            }
            let radius = amp.abs() * (2.0 * cells as f64 + 1.0);
            Ok(HoelderFn::new(1.0, radius, format!("chatter{cells}"), move |x| {
                let scaled = (x.clamp(0.0, 1.0)) * cells as f64;
                let idx = (scaled as u64).min(cells - 1);
                let frac = scaled - idx as f64;
                let sign = if crate::rng::splitmix64(idx ^ salt.wrapping_mul(0x9e37)) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                };
                amp * sign * (1.0 - (2.0 * frac - 1.0).abs())
            }))
        }
        other => Err(Error::Argument(format!("unknown library function `{other}`"))),
    }
}

/// An evaluable truth together with its composition metadata.
#[derive(Clone)]
pub struct TrueModel {
    pub spec: CompositionSpec,
    pub label: String,
    eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl TrueModel {
    pub fn new(
        spec: CompositionSpec,
        label: impl Into<String>,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(TrueModel {
            spec,
            label: label.into(),
            eval: Arc::new(eval),
        })
    }

    pub fn prob_raw(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn prob(&self, x: &[f64]) -> Result<SimplexVector> {
        SimplexVector::lenient(self.prob_raw(x))
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub fn beta_star(&self) -> Vec<f64> {
        effective_smoothness(&self.spec)
    }

    pub fn rate(&self, n: u64) -> (f64, usize) {
        rate_phi_n(&self.spec, n)
    }

    /// Evaluation closure usable by the risk integrators.
    pub fn as_fn(&self) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + '_ {
        move |x| self.prob_raw(x)
    }
}

/// Generalized additive truth η_k(x) = softmax_k(Σ_i f_{ki}(x_i)) from a
/// K×d table of score functions. Records the embedding metadata
/// r = 2, dims (d, d, 1, 1), arities (1, d, 1), smoothness (β, (β∨1)d, 1).
pub fn make_gam(scores: Vec<Vec<HoelderFn>>) -> Result<TrueModel> {
    let k = scores.len();
    if k < 2 {
        return Err(Error::Argument("GAM needs at least two classes".into()));
    }
    let d = scores[0].len();
    if d == 0 || scores.iter().any(|row| row.len() != d) {
        return Err(Error::Argument("GAM score table must be rectangular K x d".into()));
    }
    // probe-grid range check against each block's declared radius
    let probes = 257;
    for (ki, row) in scores.iter().enumerate() {
        for (di, f) in row.iter().enumerate() {
            for i in 0..probes {
                let x = i as f64 / (probes - 1) as f64;
                let v = f.eval(x);
                if !v.is_finite() || v.abs() > f.radius + 1e-9 {
                    return Err(Error::Argument(format!(
                        "score ({ki},{di}) leaves [-{}, {}] at x={x}: {v}",
                        f.radius, f.radius
                    )));
                }
            }
        }
    }
    let beta = scores
        .iter()
        .flatten()
        .map(|f| f.beta)
        .fold(f64::INFINITY, f64::min);
    let q_raw = scores
        .iter()
        .flatten()
        .map(|f| f.radius)
        .fold(0.0f64, f64::max);
    let spec = CompositionSpec {
        r: 2,
        dims: vec![d, d, 1, 1],
        arities: vec![1, d, 1],
        smoothness: vec![beta, beta.max(1.0) * d as f64, 1.0],
        radius: ((q_raw + 1.0) * d as f64).max(1.0),
        classes: k,
    };
    let label = format!("gam-k{k}-d{d}");
    TrueModel::new(spec, label, move |x: &[f64]| {
        let logits: Vec<f64> = scores
            .iter()
            .map(|row| row.iter().zip(x).map(|(f, &xi)| f.eval(xi)).sum())
            .collect();
        softmax(&logits)
    })
}

/// One stage of an explicit composition: d_{i+1} coordinate functions of the
/// previous stage's output, with a sup-norm radius.
#[derive(Clone)]
pub struct CompositionStage {
    pub funcs: Vec<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
    pub radius: f64,
}

impl CompositionStage {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.funcs.iter().map(|f| f(x)).collect()
    }
}

pub fn eval_stages(stages: &[CompositionStage], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for s in stages {
        cur = s.eval(&cur);
    }
    cur
}

/// Rewrites g_r ∘ … ∘ g_0 as h_r ∘ … ∘ h_0 with every intermediate stage
/// mapping into [0,1]: h_0 = g_0/(2Q_0) + ½,
/// h_i(x) = g_i(2Q_{i−1}x − Q_{i−1})/(2Q_i) + ½ for 0 < i < r,
/// h_r(x) = g_r(2Q_{r−1}x − Q_{r−1}). The overall composition is unchanged.
pub fn rescale_stages(stages: Vec<CompositionStage>) -> Vec<CompositionStage> {
    let r1 = stages.len();
    if r1 <= 1 {
        return stages;
    }
    let radii: Vec<f64> = stages.iter().map(|s| s.radius).collect();
    stages
        .into_iter()
        .enumerate()
        .map(|(i, stage)| {
            let q_prev = if i > 0 { radii[i - 1] } else { 0.0 };
            let q_own = radii[i];
            let last = i == r1 - 1;
            let funcs = stage
                .funcs
                .into_iter()
                .map(|f| {
                    let g: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = if i == 0 {
                        Arc::new(move |x: &[f64]| f(x) / (2.0 * q_own) + 0.5)
                    } else if last {
                        Arc::new(move |x: &[f64]| {
                            let undone: Vec<f64> =
                                x.iter().map(|&v| 2.0 * q_prev * v - q_prev).collect();
                            f(&undone)
                        })
                    } else {
                        Arc::new(move |x: &[f64]| {
                            let undone: Vec<f64> =
                                x.iter().map(|&v| 2.0 * q_prev * v - q_prev).collect();
                            f(&undone) / (2.0 * q_own) + 0.5
                        })
                    };
                    g
                })
                .collect();
            CompositionStage {
                funcs,
                radius: if last { radii[i] } else { 1.0 },
            }
        })
        .collect()
}

fn score_from_spec(v: &Value) -> Result<HoelderFn> {
    let name = v
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Argument("score spec needs a `name`".into()))?;
    library_hoelder(name, v)
}

/// Named model catalog addressable as (name, JSON parameter block).
///
/// - `uniform`: `{ "k": K, "d": d }`
/// - `constant`: `{ "probs": [...], "d": d }`
/// - `gam`: `{ "scores": [[score, ...], ...] }` with library score specs
/// - `stock-gam`: the documented K=2, d=1, β=1 default
///   (score₁ = 2 sin(2πx), score₂ ≡ 0)
pub fn model_from_catalog(name: &str, params: &Value) -> Result<TrueModel> {
    match name {
        "uniform" => {
            let k = params.get("k").and_then(Value::as_u64).unwrap_or(2) as usize;
            let d = params.get("d").and_then(Value::as_u64).unwrap_or(1) as usize;
            let zeros = vec![vec![library_hoelder("zero", &Value::Null)?; d]; k];
            let mut m = make_gam(zeros)?;
            m.label = format!("uniform-k{k}-d{d}");
            Ok(m)
        }
        "constant" => {
            let probs: Vec<f64> = params
                .get("probs")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Argument("constant model requires probs".into()))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| Error::Argument("bad prob".into())))
                .collect::<Result<_>>()?;
            let d = params.get("d").and_then(Value::as_u64).unwrap_or(1) as usize;
            let sv = SimplexVector::lenient(probs)?;
            let k = sv.k();
            let spec = CompositionSpec {
                r: 0,
                dims: vec![d, 1],
                arities: vec![1],
                smoothness: vec![1.0],
                radius: 1.0,
                classes: k,
            };
            let vals = sv.values().to_vec();
            TrueModel::new(spec, "constant", move |_x: &[f64]| vals.clone())
        }
        "gam" => {
            let rows = params
                .get("scores")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Argument("gam model requires scores".into()))?;
            let scores: Vec<Vec<HoelderFn>> = rows
                .iter()
                .map(|row| {
                    row.as_array()
                        .ok_or_else(|| Error::Argument("scores rows must be arrays".into()))?
                        .iter()
                        .map(score_from_spec)
                        .collect()
                })
                .collect::<Result<_>>()?;
            make_gam(scores)
        }
        "stock-gam" => {
            let s1 = library_hoelder(
                "sinusoid",
                &serde_json::json!({"amp": 2.0, "freq": 1.0, "phase": 0.0, "beta": 1.0}),
            )?;
            let s2 = library_hoelder("zero", &serde_json::json!({"beta": 1.0}))?;
            let mut m = make_gam(vec![vec![s1], vec![s2]])?;
            m.label = "stock-gam".into();
            Ok(m)
        }
        "rough-gam" => {
            // K = 2, d = 1 truth whose score is Lipschitz and kink-dense at
            // two scales: a Takagi-type zigzag plus hash-signed fine chatter.
            // A representative hard member of the beta = 1 additive class.
            let amp = params.get("amp").and_then(Value::as_f64).unwrap_or(2.5);
            let levels = params.get("levels").and_then(Value::as_u64).unwrap_or(7);
            let c_amp = params.get("chatter_amp").and_then(Value::as_f64).unwrap_or(0.2);
            let c_cells = params.get("chatter_cells").and_then(Value::as_u64).unwrap_or(2048);
            let zig = library_hoelder("zigzag", &serde_json::json!({"amp": amp, "levels": levels}))?;
            let cht = library_hoelder(
                "chatter",
                &serde_json::json!({"amp": c_amp, "cells": c_cells}),
            )?;
            let combined = HoelderFn::new(
                1.0,
                zig.radius + cht.radius,
                "zigzag+chatter",
                move |x| zig.eval(x) + cht.eval(x),
            );
            let s2 = library_hoelder("zero", &serde_json::json!({"beta": 1.0}))?;
            let mut m = make_gam(vec![vec![combined], vec![s2]])?;
            m.label = "rough-gam".into();
            Ok(m)
        }
        other => Err(Error::Argument(format!("unknown model `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_152(t: Vec<usize>) -> CompositionSpec {
        CompositionSpec {
            r: 2,
            dims: vec![3, 3, 2, 1],
            arities: t,
            smoothness: vec![1.5, 2.0, 0.5],
            radius: 2.0,
            classes: 2,
        }
    }

    #[test]
    fn effective_smoothness_examples() {
        // r = 0: empty product
        let s = CompositionSpec {
            r: 0,
            dims: vec![1, 1],
            arities: vec![1],
            smoothness: vec![2.0],
            radius: 1.0,
            classes: 2,
        };
        assert_eq!(effective_smoothness(&s), vec![2.0]);
        // hand evaluation
        let s = spec_152(vec![1, 2, 1]);
        let b = effective_smoothness(&s);
        assert_eq!(b, vec![0.75, 1.0, 0.5]);
        // all beta >= 1 keeps every beta_i
        let s = CompositionSpec {
            smoothness: vec![1.2, 3.0, 1.0],
            ..spec_152(vec![1, 2, 1])
        };
        assert_eq!(effective_smoothness(&s), vec![1.2, 3.0, 1.0]);
    }

    #[test]
    fn effective_smoothness_monotone() {
        let mut rng = crate::rng::substream(1, "beta-mono", 0);
        use rand::Rng;
        for _ in 0..500 {
            let base: Vec<f64> = (0..3).map(|_| 0.2 + 2.0 * rng.gen::<f64>()).collect();
            let l = (rng.gen::<f64>() * 3.0) as usize;
            let mut bumped = base.clone();
            bumped[l.min(2)] += rng.gen::<f64>();
            let s0 = CompositionSpec {
                smoothness: base,
                ..spec_152(vec![1, 2, 1])
            };
            let s1 = CompositionSpec {
                smoothness: bumped,
                ..spec_152(vec![1, 2, 1])
            };
            for (a, b) in effective_smoothness(&s0).iter().zip(effective_smoothness(&s1)) {
                assert!(b >= *a - 1e-12);
            }
        }
    }

    #[test]
    fn rate_examples() {
        let s = CompositionSpec {
            r: 0,
            dims: vec![2, 1],
            arities: vec![2],
            smoothness: vec![1.5],
            radius: 1.0,
            classes: 2,
        };
        let (v, i) = rate_phi_n(&s, 100);
        assert_eq!(i, 0);
        assert!((v - (100f64).powf(-1.5 / 3.5)).abs() < 1e-15);

        // frozen oracle: max at index 1, value 1024^{-1/3}
        let s = spec_152(vec![1, 2, 1]);
        let (v, i) = rate_phi_n(&s, 1024);
        assert_eq!(i, 1);
        assert!((v - 0.099212565748012467172).abs() < 1e-15);

        // n = 1 gives 1 for any spec
        let (v, _) = rate_phi_n(&s, 1);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn rate_nonincreasing_in_n() {
        let s = spec_152(vec![1, 2, 1]);
        let mut prev = f64::INFINITY;
        for n in [1u64, 2, 7, 50, 400, 10_000, 1_000_000] {
            let (v, _) = rate_phi_n(&s, n);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn composition_error_bound_examples() {
        assert_eq!(
            composition_error_bound(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]).unwrap(),
            0.0
        );
        let v = composition_error_bound(&[1.0, 1.0], &[1.0, 1.0], &[0.1, 0.1]).unwrap();
        assert!((v - 0.4).abs() < 1e-15);
    }

    #[test]
    fn composition_error_bound_monotone() {
        use rand::Rng;
        let mut rng = crate::rng::substream(2, "ceb-mono", 0);
        for _ in 0..1000 {
            let radii: Vec<f64> = (0..3).map(|_| 0.5 + 2.0 * rng.gen::<f64>()).collect();
            let beta: Vec<f64> = (0..3).map(|_| 0.3 + 2.0 * rng.gen::<f64>()).collect();
            let eps: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let mut eps2 = eps.clone();
            let i = (rng.gen::<f64>() * 3.0) as usize;
            eps2[i.min(2)] += rng.gen::<f64>();
            let a = composition_error_bound(&radii, &beta, &eps).unwrap();
            let b = composition_error_bound(&radii, &beta, &eps2).unwrap();
            assert!(b >= a - 1e-12);
        }
    }

    #[test]
    fn library_certification_scans() {
        // cusp: quotient scan stays within the declared radius
        let cusp = library_hoelder("cusp", &serde_json::json!({"center": 0.5, "beta": 0.5})).unwrap();
        assert!(cusp.hoelder_norm_scan(400) <= cusp.radius * (1.0 + 1e-6) + 1e-9);

        // degree-2 polynomial with beta = 2
        let poly =
            library_hoelder("polynomial", &serde_json::json!({"coeffs": [0.1, -0.3, 0.7], "beta": 2.0}))
                .unwrap();
        assert!(poly.hoelder_norm_scan(400) <= poly.radius * (1.0 + 1e-6) + 1e-9);

        // zero admits any beta with radius 0
        let z = library_hoelder("zero", &serde_json::json!({"beta": 0.7})).unwrap();
        assert_eq!(z.hoelder_norm_scan(100), 0.0);

        let sin = library_hoelder("sinusoid", &serde_json::json!({"amp": 2.0, "beta": 1.0})).unwrap();
        assert!(sin.hoelder_norm_scan(800) <= sin.radius * (1.0 + 1e-3));

        assert!(library_hoelder("nope", &Value::Null).is_err());
    }

    #[test]
    fn gam_examples() {
        // all-zero scores -> uniform
        let m = model_from_catalog("uniform", &serde_json::json!({"k": 3, "d": 2})).unwrap();
        let p = m.prob(&[0.3, 0.9]).unwrap();
        for &v in p.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        // K=2, d=1, f11(x) = x, f21 = 0: logistic closed form on a grid
        let lin = library_hoelder("polynomial", &serde_json::json!({"coeffs": [0.0, 1.0], "beta": 2.0}))
            .unwrap();
        let zero = library_hoelder("zero", &Value::Null).unwrap();
        let m = make_gam(vec![vec![lin], vec![zero]]).unwrap();
        for i in 0..50 {
            let x = i as f64 / 49.0;
            let p = m.prob(&[x]).unwrap();
            let want = x.exp() / (x.exp() + 1.0);
            assert!((p.values()[0] - want).abs() < 1e-12);
        }
        // frozen spot value at x = 0.3
        let p = m.prob(&[0.3]).unwrap();
        assert!((p.values()[0] - 0.57444251681165898715).abs() < 1e-12);

        // softmax output sums to 1 exactly and is strictly positive
        let s: f64 = p.values().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(p.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn gam_low_smoothness_rate_exponent() {
        // beta <= 1 embedding: achieving exponent is beta/(beta+1), index 0,
        // independent of d
        for d in [1usize, 3] {
            let row: Vec<HoelderFn> = (0..d)
                .map(|_| library_hoelder("cusp", &serde_json::json!({"center": 0.4, "beta": 0.5})).unwrap())
                .collect();
            let zeros: Vec<HoelderFn> = (0..d)
                .map(|_| library_hoelder("zero", &Value::Null).unwrap())
                .collect();
            let m = make_gam(vec![row, zeros]).unwrap();
            let (v, i) = m.rate(4096);
            assert_eq!(i, 0);
            let want = (4096f64).powf(-0.5 / 1.5);
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gam_range_violation_detected() {
        // declare a radius that the function exceeds
        let lying = HoelderFn::new(1.0, 0.1, "bad", |x| x);
        let zero = library_hoelder("zero", &Value::Null).unwrap();
        assert!(matches!(
            make_gam(vec![vec![lying], vec![zero]]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn rescaled_stages_preserve_composition() {
        // g0: R^2 -> R^2, g1: R^2 -> R
        let g0 = CompositionStage {
            funcs: vec![
                Arc::new(|x: &[f64]| 1.4 * (x[0] - 0.3)),
                Arc::new(|x: &[f64]| x[1] * x[1] - 0.5),
            ],
            radius: 2.0,
        };
        let g1 = CompositionStage {
            funcs: vec![Arc::new(|x: &[f64]| (x[0] + x[1]).sin())],
            radius: 1.0,
        };
        let direct = vec![g0.clone(), g1.clone()];
        let rescaled = rescale_stages(vec![g0, g1]);
        let mut rng = crate::rng::substream(9, "stages", 0);
        use rand::Rng;
        for _ in 0..200 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let a = eval_stages(&direct, &x);
            let b = eval_stages(&rescaled, &x);
            assert!((a[0] - b[0]).abs() < 1e-12);
            // every intermediate value of the rescaled chain is in [0,1]
            let mid = rescaled[0].eval(&x);
            assert!(mid.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = spec_152(vec![1, 2, 1]);
        assert!(s.validate().is_ok());
        s.arities = vec![4, 2, 1]; // t_0 > d_0
        assert!(s.validate().is_err());
    }
}
