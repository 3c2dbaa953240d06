//! Dense feedforward ReLU networks with identity or softmax heads.
//!
//! A network computes `W_L σ_{v_L} W_{L−1} … W_1 σ_{v_1} W_0 x` followed by
//! the head, where `σ_v(y) = relu(y − v)` subtracts the bias before the
//! rectifier and the output layer carries no bias. Weight matrix `W_i` has
//! shape `m_{i+1} × m_i` (row-major); `biases[i]` is the vector applied
//! right after `W_i` for `i < L`.
//!
//! The module provides exact reverse-mode gradients of the cross-entropy,
//! entrywise sup-norm projection, sparsity counting, network JSON
//! serialization, and (in submodules) the constructive special networks and
//! stitching combinators.

pub mod special;
pub mod stitch;

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::metrics::SimplexVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Identity,
    Softmax,
}

/// Architecture descriptor: depth, widths, weight bound, optional sparsity
/// budget (tracked as metadata, never enforced during training), head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub hidden_layers: usize,
    /// m_0..m_{L+1}
    pub widths: Vec<usize>,
    pub weight_bound: f64,
    pub sparsity: Option<usize>,
    pub head: Head,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() != self.hidden_layers + 2 {
            return Err(Error::Argument(format!(
                "widths must have L+2 = {} entries, got {}",
                self.hidden_layers + 2,
                self.widths.len()
            )));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::Argument("zero width layer".into()));
        }
        if !(self.weight_bound > 0.0) {
            return Err(Error::Argument("weight bound must be positive".into()));
        }
        if let Some(s) = self.sparsity {
            if s > self.param_count() {
                return Err(Error::Argument(format!(
                    "sparsity budget {s} exceeds parameter count {}",
                    self.param_count()
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn max_width(&self) -> usize {
        *self.widths.iter().max().unwrap()
    }

    /// Total number of weight and bias entries.
    pub fn param_count(&self) -> usize {
        let l = self.hidden_layers;
        let mut c = 0;
        for i in 0..=l {
            c += self.widths[i + 1] * self.widths[i];
        }
        for i in 0..l {
            c += self.widths[i + 1];
        }
        c
    }
}

/// Weights and biases matching an `ArchSpec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    /// weights[i]: row-major m_{i+1} × m_i, i = 0..=L
    pub weights: Vec<Vec<f64>>,
    /// biases[i]: length m_{i+1}, subtracted before the rectifier that
    /// follows weights[i], for i = 0..L−1 (no bias on the output layer)
    pub biases: Vec<Vec<f64>>,
}

impl NetParams {
    pub fn zeros(arch: &ArchSpec) -> Self {
        let l = arch.hidden_layers;
        let weights = (0..=l)
            .map(|i| vec![0.0; arch.widths[i + 1] * arch.widths[i]])
            .collect();
        let biases = (0..l).map(|i| vec![0.0; arch.widths[i + 1]]).collect();
        NetParams { weights, biases }
    }

    pub fn validate(&self, arch: &ArchSpec) -> Result<()> {
        arch.validate()?;
        let l = arch.hidden_layers;
        if self.weights.len() != l + 1 || self.biases.len() != l {
            return Err(Error::Argument("parameter tensor count mismatch".into()));
        }
        for i in 0..=l {
            if self.weights[i].len() != arch.widths[i + 1] * arch.widths[i] {
                return Err(Error::Argument(format!("weight matrix {i} has wrong shape")));
            }
        }
        for i in 0..l {
            if self.biases[i].len() != arch.widths[i + 1] {
                return Err(Error::Argument(format!("bias vector {i} has wrong shape")));
            }
        }
        Ok(())
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flatten()
            .fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Applies `f` entrywise over all weights and biases.
    pub fn map_entries(&self, mut f: impl FnMut(f64) -> f64) -> NetParams {
        NetParams {
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().map(|&v| f(v)).collect())
                .collect(),
            biases: self
                .biases
                .iter()
                .map(|b| b.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// log softmax via the log-sum-exp trick; finite for any finite logits.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&v| v - lse).collect()
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        out[r] = acc;
    }
}

/// Pre-activations and post-activations of every layer, for backprop.
struct ForwardTrace {
    /// post-activation h_0 = x, h_1, ..., h_L
    hidden: Vec<Vec<f64>>,
    /// output-layer logits
    logits: Vec<f64>,
}

fn forward_trace(params: &NetParams, arch: &ArchSpec, x: &[f64]) -> ForwardTrace {
    let l = arch.hidden_layers;
    let mut hidden = Vec::with_capacity(l + 1);
    hidden.push(x.to_vec());
    for i in 0..l {
        let rows = arch.widths[i + 1];
        let cols = arch.widths[i];
        let mut u = vec![0.0; rows];
        matvec(&params.weights[i], rows, cols, &hidden[i], &mut u);
        for (uj, &vj) in u.iter_mut().zip(&params.biases[i]) {
            *uj = (*uj - vj).max(0.0);
        }
        hidden.push(u);
    }
    let rows = arch.widths[l + 1];
    let cols = arch.widths[l];
    let mut logits = vec![0.0; rows];
    matvec(&params.weights[l], rows, cols, &hidden[l], &mut logits);
    ForwardTrace { hidden, logits }
}

/// Raw network output: logits under `Head::Identity`, probabilities under
/// `Head::Softmax`.
pub fn forward(params: &NetParams, arch: &ArchSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != arch.input_dim() {
        return Err(Error::Argument(format!(
            "input dimension {} does not match m_0 = {}",
            x.len(),
            arch.input_dim()
        )));
    }
    let t = forward_trace(params, arch, x);
    Ok(match arch.head {
        Head::Identity => t.logits,
        Head::Softmax => softmax(&t.logits),
    })
}

/// Softmax-head forward returning a checked simplex point.
pub fn forward_prob(params: &NetParams, arch: &ArchSpec, x: &[f64]) -> Result<SimplexVector> {
    if arch.head != Head::Softmax {
        return Err(Error::Argument("probability output needs a softmax head".into()));
    }
    SimplexVector::lenient(forward(params, arch, x)?)
}

/// Empirical cross-entropy −(1/n) Σ_i Y_i^T log p(X_i); finite because the
/// softmax never outputs zero.
pub fn cross_entropy(params: &NetParams, arch: &ArchSpec, ds: &Dataset) -> Result<f64> {
    cross_entropy_subset(params, arch, ds, None)
}

pub(crate) fn cross_entropy_subset(
    params: &NetParams,
    arch: &ArchSpec,
    ds: &Dataset,
    idx: Option<&[usize]>,
) -> Result<f64> {
    if arch.head != Head::Softmax {
        return Err(Error::Argument("cross-entropy needs a softmax head".into()));
    }
    if arch.output_dim() != ds.classes {
        return Err(Error::Argument(format!(
            "network outputs {} classes, dataset has {}",
            arch.output_dim(),
            ds.classes
        )));
    }
    let n = idx.map_or(ds.n, <[usize]>::len);
    let mut acc = 0.0;
    for j in 0..n {
        let i = idx.map_or(j, |s| s[j]);
        let t = forward_trace(params, arch, ds.x(i));
        acc -= log_softmax(&t.logits)[ds.labels[i]];
    }
    Ok(acc / n as f64)
}

/// Exact reverse-mode gradient of `cross_entropy` with respect to every
/// weight and bias.
pub fn gradient(params: &NetParams, arch: &ArchSpec, ds: &Dataset) -> Result<NetParams> {
    gradient_subset(params, arch, ds, None)
}

pub(crate) fn gradient_subset(
    params: &NetParams,
    arch: &ArchSpec,
    ds: &Dataset,
    idx: Option<&[usize]>,
) -> Result<NetParams> {
    if arch.head != Head::Softmax {
        return Err(Error::Argument("gradient is defined for the softmax head".into()));
    }
    let l = arch.hidden_layers;
    let mut grad = NetParams::zeros(arch);
    let n = idx.map_or(ds.n, <[usize]>::len);
    let scale = 1.0 / n as f64;
    for j in 0..n {
        let i = idx.map_or(j, |s| s[j]);
        let trace = forward_trace(params, arch, ds.x(i));
        // d loss / d logits = (softmax − one-hot)/n
        let mut delta: Vec<f64> = softmax(&trace.logits);
        delta[ds.labels[i]] -= 1.0;
        for d in &mut delta {
            *d *= scale;
        }
        // output layer
        for layer in (0..=l).rev() {
            let rows = arch.widths[layer + 1];
            let cols = arch.widths[layer];
            let h = &trace.hidden[layer];
            {
                let gw = &mut grad.weights[layer];
                for r in 0..rows {
                    let dr = delta[r];
                    if dr != 0.0 {
                        let row = &mut gw[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            row[c] += dr * h[c];
                        }
                    }
                }
            }
            if layer == 0 {
                break;
            }
            // push through W_layer then the ReLU of the previous hidden layer
            let mut prev = vec![0.0; cols];
            let w = &params.weights[layer];
            for r in 0..rows {
                let dr = delta[r];
                if dr != 0.0 {
                    let row = &w[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        prev[c] += dr * row[c];
                    }
                }
            }
            // h_layer = relu(u − v): zero out dead units, bias gradient is −delta
            for c in 0..cols {
                if trace.hidden[layer][c] <= 0.0 {
                    prev[c] = 0.0;
                }
            }
            for c in 0..cols {
                grad.biases[layer - 1][c] -= prev[c];
            }
            delta = prev;
        }
    }
    Ok(grad)
}

/// Entrywise clamp of every parameter to [−b, b]; idempotent.
pub fn project_sup(params: &NetParams, b: f64) -> Result<NetParams> {
    if !(b > 0.0) {
        return Err(Error::Argument("projection bound must be positive".into()));
    }
    Ok(params.map_entries(|v| v.clamp(-b, b)))
}

/// Σ_j (‖W_j‖₀ + |v_j|₀).
pub fn count_nonzero(params: &NetParams) -> usize {
    params
        .weights
        .iter()
        .chain(params.biases.iter())
        .flatten()
        .filter(|&&v| v != 0.0)
        .count()
}

/// Glorot-style uniform initialization: W ~ U[±√(6/(fan_in+fan_out))],
/// biases zero.
pub fn init_glorot(arch: &ArchSpec, rng: &mut impl Rng) -> NetParams {
    let mut p = NetParams::zeros(arch);
    for i in 0..=arch.hidden_layers {
        let (fan_out, fan_in) = (arch.widths[i + 1], arch.widths[i]);
        let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut p.weights[i] {
            *w = rng.gen_range(-lim..=lim);
        }
    }
    p
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    arch: ArchSpec,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

pub fn save_network(params: &NetParams, arch: &ArchSpec, path: impl AsRef<Path>) -> Result<()> {
    params.validate(arch)?;
    let file = NetworkFile {
        arch: arch.clone(),
        weights: params.weights.clone(),
        biases: params.biases.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<(NetParams, ArchSpec)> {
    let file: NetworkFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let params = NetParams {
        weights: file.weights,
        biases: file.biases,
    };
    params.validate(&file.arch)?;
    Ok((params, file.arch))
}
