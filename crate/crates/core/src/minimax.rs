//! Hard-instance family for the minimax lower bound: disjoint polynomial
//! bumps on a tensor grid, selected by binary matrices from a
//! Varshamov–Gilbert packing, assembled into conditional class probability
//! vectors.
//!
//! The scalar bump is ξ(z) = b·2^{2β*} z^{β*}(1−z)^{β*} on [0,1] (zero
//! outside), with b the largest normalizer passing a Hölder-quotient scan at
//! radius 1 — the smoothness-ball membership is prioritized, so ‖ξ‖_∞ = b
//! rather than 1 and the recorded sup norm rides along in `BumpSpec`.
//! Each grid cell u carries ψ_u(x) = h^{β*} ∏_j ξ((x_j−u_j)/h); a selection
//! matrix W turns bumps on and off per class, and
//! p_W = (f_{w_1}, …, f_{w_{K−1}}, 1 − Σ f_{w_k}).
//!
//! Verification confirms the two premises that drive the lower bound: the
//! pairwise Hellinger separation and the per-hypothesis/aggregate KL budget,
//! both by bump-aligned tensor quadrature under a bounded input density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{InputDistribution, SimplexVector};
use crate::models::{hoelder_norm_scan_fn, CompositionSpec, TrueModel};
use crate::rng::substream;

/// Scalar bump ξ(z) = b·2^{2β*} z^{β*}(1−z)^{β*} on [0,1], zero elsewhere.
pub fn bump_xi(z: f64, beta_star: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&z) {
        return 0.0;
    }
    if beta_star == 1.0 {
        return b * 4.0 * z * (1.0 - z);
    }
    b * 2.0f64.powf(2.0 * beta_star) * z.powf(beta_star) * (1.0 - z).powf(beta_star)
}

fn pow_or_id(v: f64, e: f64) -> f64 {
    if e == 1.0 {
        v
    } else {
        v.powf(e)
    }
}

/// Largest normalizer b for which the Hölder-quotient scan of ξ certifies
/// membership in the radius-1 ball of exponent β*. The scan is positively
/// homogeneous, so b = 1/scan(ξ with b = 1), shaved by a hair so a finer
/// re-scan still passes.
pub fn hoelder_normalizer(beta_star: f64, grid: usize) -> f64 {
    let norm = hoelder_norm_scan_fn(|z| bump_xi(z, beta_star, 1.0), beta_star, grid);
    1.0 / (norm * (1.0 + 1e-9))
}

/// Localized tensor bump ψ_u(x) = h^{β*} ∏_j ξ((x_j − u_j)/h), supported on
/// the cell u + [0, h]^{t*}.
pub fn psi_u(x: &[f64], u: &[f64], h: f64, beta_star: f64, b: f64) -> f64 {
    let mut prod = h.powf(beta_star);
    for (xj, uj) in x.iter().zip(u) {
        prod *= bump_xi((xj - uj) / h, beta_star, b);
        if prod == 0.0 {
            return 0.0;
        }
    }
    prod
}

/// Grid resolution m_n = ⌈ρ K^{1/β**} n^{1/(β**+t*)}⌉.
pub fn grid_m_n(rho: f64, k: usize, n: u64, beta_dstar: f64, t_star: usize) -> u64 {
    (rho * (k as f64).powf(1.0 / beta_dstar) * (n as f64).powf(1.0 / (beta_dstar + t_star as f64)))
        .ceil() as u64
}

/// Greedy-random binary packing containing the all-ones string, pairwise
/// Hamming distance ≥ `min_dist`, deterministic given the seed.
pub fn vg_packing(
    length: usize,
    min_dist: usize,
    target_size: usize,
    budget: usize,
    seed: u64,
) -> Result<Vec<Vec<u8>>> {
    if target_size < 2 {
        return Err(Error::Argument("packing target size must be >= 2".into()));
    }
    if min_dist > length {
        return Err(Error::Argument(format!(
            "minimum distance {min_dist} exceeds string length {length}"
        )));
    }
    let mut rng = substream(seed, "vg", 0);
    let mut packing: Vec<Vec<u8>> = vec![vec![1u8; length]];
    use rand::Rng;
    let mut attempts = 0usize;
    while packing.len() < target_size {
        if attempts >= budget {
            return Err(Error::Construction(format!(
                "packing of size {target_size} with distance {min_dist} not found within {budget} attempts (have {})",
                packing.len()
            )));
        }
        attempts += 1;
        let cand: Vec<u8> = (0..length).map(|_| u8::from(rng.gen::<bool>())).collect();
        let ok = packing
            .iter()
            .all(|p| hamming(p, &cand) >= min_dist);
        if ok {
            packing.push(cand);
        }
    }
    Ok(packing)
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Bump parameters: exponent β* of the critical stage, its effective value
/// β** = β*·B with B = ∏_{l>i*}(β_l ∧ 1), the arity t*, the certified
/// normalizer b and the grid constant ρ ≥ 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpSpec {
    pub beta_star: f64,
    pub beta_dstar: f64,
    pub t_star: usize,
    pub b_exp: f64,
    pub b: f64,
    pub rho: f64,
}

impl BumpSpec {
    /// Builds the spec with the Hölder-certified normalizer.
    pub fn new(beta_star: f64, t_star: usize, b_exp: f64, rho: f64) -> Result<Self> {
        if !(beta_star > 0.0) || t_star == 0 || !(b_exp > 0.0 && b_exp <= 1.0) {
            return Err(Error::Argument(
                "need beta* > 0, t* >= 1 and exponent B in (0,1]".into(),
            ));
        }
        if !(rho >= 1.0) {
            return Err(Error::Argument(format!("grid constant rho must be >= 1, got {rho}")));
        }
        Ok(BumpSpec {
            beta_star,
            beta_dstar: beta_star * b_exp,
            t_star,
            b_exp,
            b: hoelder_normalizer(beta_star, 2001),
            rho,
        })
    }

    /// Test/diagnostic constructor with an explicit normalizer.
    pub fn with_b(beta_star: f64, t_star: usize, b_exp: f64, rho: f64, b: f64) -> Self {
        BumpSpec {
            beta_star,
            beta_dstar: beta_star * b_exp,
            t_star,
            b_exp,
            b,
            rho,
        }
    }

    /// ‖ξ^B‖₁ and ‖ξ^B‖₂² by one-dimensional midpoint quadrature.
    pub fn xi_pow_b_norms(&self, points: usize) -> (f64, f64) {
        let n = points.max(1024);
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let h = 1.0 / n as f64;
        for i in 0..n {
            let z = (i as f64 + 0.5) * h;
            let v = pow_or_id(bump_xi(z, self.beta_star, self.b), self.b_exp);
            l1 += v * h;
            l2 += v * v * h;
        }
        (l1, l2)
    }
}

/// The packed hypothesis family.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub n: u64,
    pub classes: usize,
    pub spec: BumpSpec,
    pub m_n: u64,
    pub h_n: f64,
    /// Selection strings of length (K−1)·m^{t*}, bit (k, cell) at
    /// k·m^{t*}+cell; index 0 is the all-ones base hypothesis.
    pub packing: Vec<Vec<u8>>,
    pub base_index: usize,
    pub min_dist: usize,
    /// Cached ‖ξ^B‖₁ and ‖ξ^B‖₂².
    pub xi_b_l1: f64,
    pub xi_b_l2sq: f64,
}

impl HypothesisSet {
    /// Assembles a set from explicit parts, computing the cached norms.
    pub fn from_parts(
        n: u64,
        classes: usize,
        spec: BumpSpec,
        m_n: u64,
        packing: Vec<Vec<u8>>,
        min_dist: usize,
    ) -> Self {
        let (xi_b_l1, xi_b_l2sq) = spec.xi_pow_b_norms(1 << 14);
        HypothesisSet {
            n,
            classes,
            m_n,
            h_n: 1.0 / m_n as f64,
            spec,
            packing,
            base_index: 0,
            min_dist,
            xi_b_l1,
            xi_b_l2sq,
        }
    }
}

impl HypothesisSet {
    pub fn cells(&self) -> usize {
        (self.m_n as usize).pow(self.t_star() as u32)
    }

    pub fn t_star(&self) -> usize {
        self.spec.t_star
    }

    fn cell_of(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let m = self.m_n as usize;
        let mut flat = 0usize;
        let mut corner = Vec::with_capacity(self.t_star());
        for j in 0..self.t_star() {
            let c = ((x[j] * m as f64) as usize).min(m - 1);
            flat = flat * m + c;
            corner.push(c as f64 * self.h_n);
        }
        (flat, corner)
    }

    /// ψ_u(x)^B for the cell containing x.
    fn bump_pow_b(&self, x: &[f64], corner: &[f64]) -> f64 {
        let s = &self.spec;
        let mut prod = self.h_n.powf(s.beta_dstar);
        for j in 0..s.t_star {
            let z = (x[j] - corner[j]) / self.h_n;
            prod *= pow_or_id(bump_xi(z, s.beta_star, s.b), s.b_exp);
            if prod == 0.0 {
                return 0.0;
            }
        }
        prod
    }

    /// Raw probability vector of hypothesis `w_index` at x (first t* input
    /// coordinates are active).
    pub fn eval_raw(&self, w_index: usize, x: &[f64]) -> Vec<f64> {
        let w = &self.packing[w_index];
        let cells = self.cells();
        let (cell, corner) = self.cell_of(x);
        let bump = self.bump_pow_b(x, &corner);
        let mut out = Vec::with_capacity(self.classes);
        let mut rest = 1.0;
        for k in 0..self.classes - 1 {
            let f = if w[k * cells + cell] == 1 { bump } else { 0.0 };
            out.push(f);
            rest -= f;
        }
        out.push(rest);
        out
    }

    pub fn eval(&self, w_index: usize, x: &[f64]) -> Result<SimplexVector> {
        SimplexVector::new(self.eval_raw(w_index, x))
    }

    /// Wraps one hypothesis as a sampleable true model on [0,1]^{t*}.
    pub fn to_true_model(&self, w_index: usize) -> Result<TrueModel> {
        if w_index >= self.packing.len() {
            return Err(Error::Argument(format!("hypothesis index {w_index} out of range")));
        }
        let spec = CompositionSpec {
            r: 0,
            dims: vec![self.t_star(), 1],
            arities: vec![self.t_star()],
            smoothness: vec![self.spec.beta_star],
            radius: 1.0,
            classes: self.classes,
        };
        let hs = self.clone();
        TrueModel::new(spec, format!("hypothesis-{w_index}"), move |x: &[f64]| {
            hs.eval_raw(w_index, x)
        })
    }
}

/// Smallness condition tying ρ to the sample size:
/// n(K−1) h^{β**+t*} ≤ 1 / (144 Γ log₂(e) (‖ξ^B‖₁^{t*} + ‖ξ^B‖₂^{2t*})).
pub fn rho_smallness_ok(n: u64, k: usize, spec: &BumpSpec, gamma_upper: f64) -> bool {
    let m = grid_m_n(spec.rho, k, n, spec.beta_dstar, spec.t_star);
    let h = 1.0 / m as f64;
    let (l1, l2sq) = spec.xi_pow_b_norms(1 << 14);
    let t = spec.t_star as f64;
    let lhs = n as f64 * (k as f64 - 1.0) * h.powf(spec.beta_dstar + t);
    let rhs = 1.0
        / (144.0
            * gamma_upper
            * std::f64::consts::LOG2_E
            * (l1.powf(t) + l2sq.powf(t)));
    lhs <= rhs
}

/// Smallest ρ on a 0.25-grid satisfying the smallness condition.
pub fn find_rho(
    n: u64,
    k: usize,
    beta_star: f64,
    t_star: usize,
    b_exp: f64,
    gamma_upper: f64,
) -> Result<BumpSpec> {
    let mut rho = 1.0;
    while rho <= 64.0 {
        let spec = BumpSpec::new(beta_star, t_star, b_exp, rho)?;
        if rho_smallness_ok(n, k, &spec, gamma_upper) {
            return Ok(spec);
        }
        rho += 0.25;
    }
    Err(Error::Construction(
        "no grid constant rho <= 64 satisfies the smallness condition".into(),
    ))
}

/// Builds the hypothesis family: grid, packing (size capped at `cap`,
/// distance ⌈(K−1)m^{t*}/8⌉, all-ones base), simplex probes.
pub fn build_hypotheses(
    n: u64,
    k: usize,
    spec: &BumpSpec,
    cap: usize,
    seed: u64,
) -> Result<HypothesisSet> {
    if k < 2 {
        return Err(Error::Argument("need at least two classes".into()));
    }
    let m = grid_m_n(spec.rho, k, n, spec.beta_dstar, spec.t_star);
    let h = 1.0 / m as f64;
    // last coordinate must stay positive: (K-1) h^{beta**} sup(xi^B)^{t*} < 1,
    // checked with the conservative sup bound 1 (b <= 1)
    let mass = (k as f64 - 1.0) * h.powf(spec.beta_dstar);
    if mass >= 1.0 {
        return Err(Error::Construction(format!(
            "(K-1) h^(beta**) = {mass} >= 1: the residual class probability can vanish"
        )));
    }
    let cells = (m as usize)
        .checked_pow(spec.t_star as u32)
        .filter(|&c| c <= 10_000_000)
        .ok_or_else(|| Error::Construction(format!("grid with m={m}, t*={} too large", spec.t_star)))?;
    let length = (k - 1) * cells;
    let min_dist = length.div_ceil(8);
    let exponent = length as f64 / 8.0;
    let target = if exponent >= (cap as f64).log2() {
        cap
    } else {
        (2.0f64.powf(exponent).ceil() as usize).clamp(2, cap)
    };
    let packing = vg_packing(length, min_dist, target, 400_000, seed)?;
    let hs = HypothesisSet::from_parts(n, k, spec.clone(), m, packing, min_dist);
    // probe every hypothesis for simplex validity
    let probes = 211;
    for w in 0..hs.packing.len() {
        for p in 0..probes {
            let frac = (p as f64 + 0.5) / probes as f64;
            let x: Vec<f64> = (0..spec.t_star)
                .map(|j| ((frac + 0.37 * j as f64) % 1.0).abs())
                .collect();
            hs.eval(w, &x).map_err(|e| {
                Error::Construction(format!("hypothesis {w} fails simplex check at {x:?}: {e}"))
            })?;
        }
    }
    Ok(hs)
}

fn cell_refined_integral(
    hs: &HypothesisSet,
    law: &dyn InputDistribution,
    subdiv: usize,
    f: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    let t = hs.t_star();
    let m = hs.m_n as usize;
    let fine = m * subdiv;
    let step = 1.0 / fine as f64;
    let vol = step.powi(t as i32);
    let total = fine.pow(t as u32);
    let mut x = vec![0.0; t];
    let mut acc = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for coord in x.iter_mut() {
            *coord = ((rem % fine) as f64 + 0.5) * step;
            rem /= fine;
        }
        acc += f(&x) * law.density(&x) * vol;
    }
    acc
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub w_a: usize,
    pub w_b: usize,
    pub hamming: usize,
    pub risk: f64,
    pub quad_tolerance: f64,
    pub lower_bound: f64,
    pub satisfied: bool,
}

/// Quadrature check of the pairwise Hellinger separation
/// R(p_W, p_{W'}) ≥ Ham(W,W')·h^{β**+t*}·‖ξ^B‖₁^{t*}·γ − tolerance, with the
/// quadrature aligned to the bump grid so the integrand's kinks fall on cell
/// boundaries.
pub fn verify_separation(
    hs: &HypothesisSet,
    w_a: usize,
    w_b: usize,
    law: &dyn InputDistribution,
    subdiv: usize,
    extra_tolerance: f64,
) -> Result<SeparationReport> {
    if law.dim() != hs.t_star() {
        return Err(Error::Argument(format!(
            "law dimension {} must match the active arity {}",
            law.dim(),
            hs.t_star()
        )));
    }
    let subdiv = subdiv.max(4);
    let point = |x: &[f64]| -> f64 {
        let pa = hs.eval_raw(w_a, x);
        let pb = hs.eval_raw(w_b, x);
        0.5 * pa
            .iter()
            .zip(&pb)
            .map(|(a, b)| {
                let d = a.sqrt() - b.sqrt();
                d * d
            })
            .sum::<f64>()
    };
    let full = cell_refined_integral(hs, law, subdiv, &point);
    let half = cell_refined_integral(hs, law, subdiv / 2, &point);
    let tol = (full - half).abs();
    if !full.is_finite() {
        return Err(Error::Numeric("separation quadrature did not converge".into()));
    }
    let ham = hamming(&hs.packing[w_a], &hs.packing[w_b]);
    let t = hs.t_star() as f64;
    let gamma = law.density_bounds().0;
    let bound = ham as f64 * hs.h_n.powf(hs.spec.beta_dstar + t) * hs.xi_b_l1.powf(t) * gamma;
    Ok(SeparationReport {
        w_a,
        w_b,
        hamming: ham,
        risk: full,
        quad_tolerance: tol,
        lower_bound: bound,
        satisfied: full >= bound - tol.max(extra_tolerance),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KlBudgetReport {
    /// (index, n·E_X KL, analytic per-hypothesis bound) for every W ≠ base.
    pub per_hypothesis: Vec<(usize, f64, f64)>,
    pub aggregate: f64,
    pub aggregate_bound: f64,
    pub all_within_bound: bool,
    pub aggregate_within_bound: bool,
}

/// Quadrature check of the KL budget: each n·E_X[KL(p_W ‖ p_base)] against
/// 2nΓ(K−1)² m^{t*} h^{β**+t*}(‖ξ^B‖₁^{t*} + ‖ξ^B‖₂^{2t*}), and the sum
/// against |𝒲| ln|𝒲| / 9.
pub fn verify_kl_budget(
    hs: &HypothesisSet,
    law: &dyn InputDistribution,
    subdiv: usize,
) -> Result<KlBudgetReport> {
    if law.dim() != hs.t_star() {
        return Err(Error::Argument("law dimension must match the active arity".into()));
    }
    let subdiv = subdiv.max(4);
    let (l1, l2sq) = (hs.xi_b_l1, hs.xi_b_l2sq);
    let t = hs.t_star() as f64;
    let gamma_up = law.density_bounds().1;
    let k = hs.classes as f64;
    let per_bound = 2.0
        * hs.n as f64
        * gamma_up
        * (k - 1.0)
        * (k - 1.0)
        * (hs.m_n as f64).powf(t)
        * hs.h_n.powf(hs.spec.beta_dstar + t)
        * (l1.powf(t) + l2sq.powf(t));
    let mut per = Vec::new();
    let mut aggregate = 0.0;
    for w in 0..hs.packing.len() {
        if w == hs.base_index {
            continue;
        }
        let point = |x: &[f64]| -> f64 {
            let p = hs.eval_raw(w, x);
            let q = hs.eval_raw(hs.base_index, x);
            let mut acc = 0.0;
            for (pk, qk) in p.iter().zip(&q) {
                if *pk > 0.0 {
                    acc += pk * (pk / qk).ln();
                }
            }
            acc
        };
        let val = hs.n as f64 * cell_refined_integral(hs, law, subdiv, &point);
        if !val.is_finite() {
            return Err(Error::Numeric(format!("KL quadrature diverged for hypothesis {w}")));
        }
        aggregate += val;
        per.push((w, val, per_bound));
    }
    let size = hs.packing.len() as f64;
    let aggregate_bound = size * size.ln() / 9.0;
    Ok(KlBudgetReport {
        all_within_bound: per.iter().all(|&(_, v, b)| v <= b + 1e-9),
        aggregate_within_bound: aggregate <= aggregate_bound + 1e-9,
        per_hypothesis: per,
        aggregate,
        aggregate_bound,
    })
}
