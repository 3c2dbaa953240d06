//! Probability vectors on the simplex and the distance/risk functionals
//! built on them.
//!
//! Pointwise quantities:
//!
//! - squared Hellinger distance `H²(p,q) = ½ Σ_k (√p_k − √q_k)²`,
//! - KL divergence `Σ_k p_k ln(p_k/q_k)` with a `+∞` sentinel when the
//!   absolute-continuity condition fails,
//! - truncated KL `Σ_k p_k (B ∧ ln(p_k/q_k))`, always finite.
//!
//! Integrated risks average a pointwise divergence between two conditional
//! class probability maps over an input law on `[0,1]^d`, either by tensor
//! midpoint quadrature (d ≤ 3) or by Monte Carlo. All logarithms are natural.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Tolerance applied to external probability vectors before they enter a
/// risk computation. Values further off the simplex are data errors.
pub const SIMPLEX_INPUT_TOL: f64 = 1e-9;

/// Tolerance of the `SimplexVector` type invariant itself.
pub const SIMPLEX_STRICT_TOL: f64 = 1e-12;

/// A point of the (K−1)-simplex: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Strict constructor: entries must be ≥ 0 and sum to 1 within 1e-12.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("simplex vector must be nonempty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data(format!(
                "simplex entries must be finite and nonnegative, got {values:?}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_STRICT_TOL {
            return Err(Error::Data(format!(
                "simplex entries sum to {sum}, exceeds tolerance {SIMPLEX_STRICT_TOL}"
            )));
        }
        Ok(SimplexVector(values))
    }

    /// Lenient constructor for externally produced vectors: accepts drift up
    /// to `SIMPLEX_INPUT_TOL`, clamps negative noise to zero and renormalizes
    /// (an explicit repair, not a silent one). Anything further off the
    /// simplex is rejected.
    pub fn lenient(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("simplex vector must be nonempty".into()));
        }
        for v in &mut values {
            if !v.is_finite() {
                return Err(Error::Data("non-finite probability entry".into()));
            }
            if *v < 0.0 {
                if *v < -SIMPLEX_INPUT_TOL {
                    return Err(Error::Data(format!(
                        "probability entry {v} below -{SIMPLEX_INPUT_TOL}"
                    )));
                }
                *v = 0.0;
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_INPUT_TOL {
            return Err(Error::Data(format!(
                "probabilities sum to {sum}, off the simplex beyond {SIMPLEX_INPUT_TOL}"
            )));
        }
        for v in &mut values {
            *v /= sum;
        }
        Ok(SimplexVector(values))
    }

    pub fn uniform(k: usize) -> Self {
        SimplexVector(vec![1.0 / k as f64; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// Arithmetic midpoint (p + q)/2, again a simplex point.
    pub fn midpoint(&self, other: &SimplexVector) -> Result<SimplexVector> {
        check_dims(self, other)?;
        Ok(SimplexVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        ))
    }
}

fn check_dims(p: &SimplexVector, q: &SimplexVector) -> Result<()> {
    if p.k() != q.k() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            p.k(),
            q.k()
        )));
    }
    Ok(())
}

/// ½ Σ_k (√p_k − √q_k)². Symmetric, in [0, 1].
pub fn hellinger_sq(p: &SimplexVector, q: &SimplexVector) -> Result<f64> {
    check_dims(p, q)?;
    let s: f64 = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok(0.5 * s)
}

/// Σ_k p_k ln(p_k/q_k) with 0·ln(0/·) = 0; +∞ when some p_k > 0, q_k = 0.
pub fn kl(p: &SimplexVector, q: &SimplexVector) -> Result<f64> {
    check_dims(p, q)?;
    let mut acc = 0.0;
    for (&a, &b) in p.values().iter().zip(q.values()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += a * (a / b).ln();
    }
    Ok(acc)
}

/// Σ_k p_k (B ∧ ln(p_k/q_k)); the cap keeps every term finite.
pub fn truncated_kl(p: &SimplexVector, q: &SimplexVector, b: f64) -> Result<f64> {
    check_dims(p, q)?;
    if !(b > 0.0) {
        return Err(Error::Argument(format!("truncation level must be positive, got {b}")));
    }
    let mut acc = 0.0;
    for (&pk, &qk) in p.values().iter().zip(q.values()) {
        if pk == 0.0 {
            continue;
        }
        let term = if qk == 0.0 { b } else { b.min((pk / qk).ln()) };
        acc += pk * term;
    }
    Ok(acc)
}

/// Pointwise divergence selector used by the risk integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Divergence {
    HellingerSq,
    Kl,
    TruncatedKl(f64),
}

impl Divergence {
    fn eval(&self, p: &SimplexVector, q: &SimplexVector) -> Result<f64> {
        match self {
            Divergence::HellingerSq => hellinger_sq(p, q),
            Divergence::Kl => kl(p, q),
            Divergence::TruncatedKl(b) => truncated_kl(p, q, *b),
        }
    }
}

/// How to integrate over the input law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RiskMethod {
    /// Tensor midpoint rule; 2048 cells for d=1, 128² for d=2, 32³ for d=3.
    Quadrature,
    /// Seeded Monte Carlo with the given sample budget.
    MonteCarlo { budget: usize },
}

impl RiskMethod {
    /// Quadrature where the tensor grid is affordable, Monte Carlo (budget
    /// 10⁵) elsewhere.
    pub fn default_for_dim(d: usize) -> Self {
        if d <= 3 {
            RiskMethod::Quadrature
        } else {
            RiskMethod::MonteCarlo { budget: 100_000 }
        }
    }
}

fn quadrature_cells(d: usize) -> Result<usize> {
    match d {
        1 => Ok(2048),
        2 => Ok(128),
        3 => Ok(32),
        _ => Err(Error::Argument(format!(
            "quadrature supports d <= 3, got d = {d}; use Monte Carlo"
        ))),
    }
}

/// A risk value together with its accuracy metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    /// Monte Carlo standard error, or the quadrature tolerance proxy
    /// |I_full − I_half|.
    pub error: f64,
    pub method: String,
    pub samples: usize,
}

/// Input distribution abstraction used by the integrators. Implemented by
/// the sampling laws in `datagen`.
pub trait InputDistribution: Sync {
    fn dim(&self) -> usize;
    /// Lebesgue density at `x` in `[0,1]^d`.
    fn density(&self, x: &[f64]) -> f64;
    /// Lower and upper density bounds (γ, Γ).
    fn density_bounds(&self) -> (f64, f64);
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

fn eval_prob<F>(f: &F, x: &[f64], who: &str) -> Result<SimplexVector>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    SimplexVector::lenient(f(x)).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{who} output at {x:?}: {msg}")),
        other => other,
    })
}

fn tensor_midpoint_sum<F>(d: usize, cells: usize, law: &dyn InputDistribution, mut f: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let h = 1.0 / cells as f64;
    let vol = h.powi(d as i32);
    let total = cells.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for coord in x.iter_mut().take(d) {
            *coord = ((rem % cells) as f64 + 0.5) * h;
            rem /= cells;
        }
        acc += f(&x)? * law.density(&x) * vol;
    }
    Ok(acc)
}

fn integrate<F>(law: &dyn InputDistribution, method: &RiskMethod, seed: u64, f: F) -> Result<RiskEstimate>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let d = law.dim();
    match method {
        RiskMethod::Quadrature => {
            let cells = quadrature_cells(d)?;
            let full = tensor_midpoint_sum(d, cells, law, |x| f(x))?;
            let half = tensor_midpoint_sum(d, cells / 2, law, |x| f(x))?;
            let error = if full.is_finite() && half.is_finite() {
                (full - half).abs()
            } else {
                f64::INFINITY
            };
            Ok(RiskEstimate {
                value: full,
                error,
                method: "quadrature".into(),
                samples: cells.pow(d as u32),
            })
        }
        RiskMethod::MonteCarlo { budget } => {
            if *budget == 0 {
                return Err(Error::Argument("Monte Carlo budget must be >= 1".into()));
            }
            let mut rng = substream(seed, "risk-mc", 0);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..*budget {
                let x = law.sample(&mut rng);
                let v = f(&x)?;
                sum += v;
                sum_sq += v * v;
            }
            let n = *budget as f64;
            let mean = sum / n;
            let error = if mean.is_finite() {
                let var = (sum_sq / n - mean * mean).max(0.0);
                (var / n).sqrt()
            } else {
                f64::INFINITY
            };
            Ok(RiskEstimate {
                value: mean,
                error,
                method: "mc".into(),
                samples: *budget,
            })
        }
    }
}

/// E_X[D(η(X), p̂(X))] for a chosen pointwise divergence.
pub fn risk_divergence<F, G>(
    eta: F,
    phat: G,
    law: &dyn InputDistribution,
    div: Divergence,
    method: &RiskMethod,
    seed: u64,
) -> Result<RiskEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    integrate(law, method, seed, |x| {
        let p = eval_prob(&eta, x, "true model")?;
        let q = eval_prob(&phat, x, "estimator")?;
        div.eval(&p, &q)
    })
}

/// Squared-Hellinger risk E_X[H²(η(X), p̂(X))].
pub fn risk<F, G>(
    eta: F,
    phat: G,
    law: &dyn InputDistribution,
    method: &RiskMethod,
    seed: u64,
) -> Result<RiskEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    risk_divergence(eta, phat, law, Divergence::HellingerSq, method, seed)
}

/// KL risk; may carry the +∞ sentinel.
pub fn risk_kl<F, G>(
    eta: F,
    phat: G,
    law: &dyn InputDistribution,
    method: &RiskMethod,
    seed: u64,
) -> Result<RiskEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    risk_divergence(eta, phat, law, Divergence::Kl, method, seed)
}

/// Truncated-KL risk at level `b`; always finite.
pub fn risk_truncated_kl<F, G>(
    eta: F,
    phat: G,
    b: f64,
    law: &dyn InputDistribution,
    method: &RiskMethod,
    seed: u64,
) -> Result<RiskEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    risk_divergence(eta, phat, law, Divergence::TruncatedKl(b), method, seed)
}

/// Squared Bernstein semi-norm
/// ρ_M²(g) = 2M² ∫ (e^{|g|/M} − 1 − |g|/M) dP, estimated by Monte Carlo over
/// X with the label average taken exactly under η(x).
pub fn bernstein_seminorm_sq<G, F>(
    g: G,
    m: f64,
    eta: F,
    law: &dyn InputDistribution,
    budget: usize,
    seed: u64,
) -> Result<f64>
where
    G: Fn(&[f64], usize) -> f64,
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(m > 0.0) {
        return Err(Error::Argument(format!("Bernstein scale must be positive, got {m}")));
    }
    if budget == 0 {
        return Err(Error::Argument("budget must be >= 1".into()));
    }
    let mut rng = substream(seed, "bernstein-mc", 0);
    let mut acc = 0.0;
    for _ in 0..budget {
        let x = law.sample(&mut rng);
        let p = eval_prob(&eta, &x, "true model")?;
        for (k, &pk) in p.values().iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            let v = g(&x, k);
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite g value at {x:?}, class {k}")));
            }
            let a = v.abs() / m;
            acc += pk * 2.0 * m * m * (a.exp() - 1.0 - a);
        }
    }
    Ok(acc / budget as f64)
}

/// The empirical-process index function
/// g_p(x, e_k) = ½ ln((p_k(x) + p̃_k(x)) / (2 p̃_k(x))) · 1(p̃_k(x) > 0),
/// bounded below by −½ ln 2.
pub fn gp_function<P, Q>(p: P, ptilde: Q) -> impl Fn(&[f64], usize) -> f64
where
    P: Fn(&[f64]) -> Vec<f64>,
    Q: Fn(&[f64]) -> Vec<f64>,
{
    move |x: &[f64], k: usize| {
        let pv = p(x);
        let tv = ptilde(x);
        let tk = tv[k];
        if tk > 0.0 {
            0.5 * ((pv[k] + tk) / (2.0 * tk)).ln()
        } else {
            0.0
        }
    }
}
