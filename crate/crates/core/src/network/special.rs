//! Constructive special-purpose networks.
//!
//! `build_exp_log_network` realizes a scalar ReLU network G with
//! `sup_{x∈[0,1]} |e^{G(x)} − x| ≤ 4/M` and `min G ≥ ln(4/M)`, as a
//! piecewise-linear interpolation of `x ↦ ln(max(x, 4/M))` on geometric
//! knots. Concavity of the logarithm makes the interpolant a lower bound, so
//! `e^{G(x)} ≤ x` away from the flat region and the deviation is controlled
//! by the per-segment interpolation error; the knot count escalates until a
//! dense grid check passes.
//!
//! `compose_with_floor` combines K clipped scalar networks through G into a
//! normalized exponential, producing a conditional probability whose every
//! coordinate is floored away from zero.

use crate::error::{Error, Result};
use crate::metrics::SimplexVector;
use crate::network::{forward, ArchSpec, Head, NetParams};

/// A constructed approximation of the clipped logarithm together with its
/// verified deviation statistics.
#[derive(Debug, Clone)]
pub struct ExpLogNetwork {
    pub params: NetParams,
    pub arch: ArchSpec,
    pub m: f64,
    /// Number of piecewise-linear segments.
    pub segments: usize,
    /// max over the check grid of |e^{G(x)} − x|
    pub max_deviation: f64,
    /// min over the check grid of G(x)
    pub min_value: f64,
}

impl ExpLogNetwork {
    pub fn eval(&self, x: f64) -> f64 {
        forward(&self.params, &self.arch, &[x]).expect("scalar network")[0]
    }
}

/// Small constant shift keeping e^{G} strictly below its target so the
/// boundary case x = 0 cannot exceed 4/M by a rounding ulp. Stays within
/// the 1e-12 slack allowed on min G.
const LEVEL_SHIFT: f64 = 1e-13;

fn build_pwl(m: f64, segments: usize) -> (NetParams, ArchSpec) {
    // knots t_0 < ... < t_J with t_0 = 4/M, t_J = 1, geometric spacing
    let t0 = 4.0 / m;
    let j = segments;
    let ratio = (1.0 / t0).powf(1.0 / j as f64);
    let knots: Vec<f64> = (0..=j)
        .map(|i| if i == j { 1.0 } else { t0 * ratio.powi(i as i32) })
        .collect();
    let vals: Vec<f64> = knots.iter().map(|&t| t.ln() - LEVEL_SHIFT).collect();

    // G(x) = c + sum_j a_j relu(x - t_j), constant carried by a relu(0x + 1) unit
    let mut slopes = Vec::with_capacity(j);
    for i in 0..j {
        slopes.push((vals[i + 1] - vals[i]) / (knots[i + 1] - knots[i]));
    }
    let mut kinks = Vec::with_capacity(j);
    kinks.push(slopes[0]);
    for i in 1..j {
        kinks.push(slopes[i] - slopes[i - 1]);
    }

    let width = j + 1;
    let arch = ArchSpec {
        hidden_layers: 1,
        widths: vec![1, width, 1],
        weight_bound: 1.0, // recomputed below
        sparsity: None,
        head: Head::Identity,
    };
    let mut params = NetParams::zeros(&arch);
    // kink units: relu(x - t_i); constant unit: relu(0*x - (-1)) = 1
    for i in 0..j {
        params.weights[0][i] = 1.0;
        params.biases[0][i] = knots[i];
    }
    params.weights[0][j] = 0.0;
    params.biases[0][j] = -1.0;
    for i in 0..j {
        params.weights[1][i] = kinks[i];
    }
    params.weights[1][j] = vals[0];
    let bound = params.max_abs_entry();
    let arch = ArchSpec {
        weight_bound: bound,
        ..arch
    };
    (params, arch)
}

fn check_on_grid(net: &NetParams, arch: &ArchSpec, grid: usize) -> (f64, f64) {
    let mut max_dev = 0.0f64;
    let mut min_g = f64::INFINITY;
    for i in 0..=grid {
        let x = i as f64 / grid as f64;
        let g = forward(net, arch, &[x]).unwrap()[0];
        max_dev = max_dev.max((g.exp() - x).abs());
        min_g = min_g.min(g);
    }
    (max_dev, min_g)
}

/// Builds G for the requested accuracy level M ≥ 2, starting from
/// `initial_segments` (clamped to at least 8) and doubling the knot count
/// until a 200001-point grid check certifies both bounds.
pub fn build_exp_log_network(m: f64, initial_segments: usize) -> Result<ExpLogNetwork> {
    if !(m >= 2.0) {
        return Err(Error::Argument(format!("need M >= 2, got {m}")));
    }
    let target = 4.0 / m;
    let floor = target.ln() - 1e-12;
    let mut segments = initial_segments.max(8);
    let budget = 1 << 16;
    while segments <= budget {
        let (params, arch) = build_pwl(m, segments);
        let (max_dev, min_g) = check_on_grid(&params, &arch, 200_000);
        if max_dev <= target && min_g >= floor {
            return Ok(ExpLogNetwork {
                params,
                arch,
                m,
                segments,
                max_deviation: max_dev,
                min_value: min_g,
            });
        }
        segments *= 2;
    }
    Err(Error::Construction(format!(
        "knot budget {budget} exhausted before |e^G - x| <= {target} held"
    )))
}

/// Conditional probability p̃_k = e^{G(clip(H_k))} / Σ_j e^{G(clip(H_j))}
/// built from K scalar networks. The clip is 1 − (1 − relu(h))₊, realized
/// here functionally; a two-layer ReLU realization computes the same map.
pub struct FloorSoftmax {
    g: ExpLogNetwork,
    h: Vec<(NetParams, ArchSpec)>,
}

impl FloorSoftmax {
    pub fn classes(&self) -> usize {
        self.h.len()
    }

    pub fn m(&self) -> f64 {
        self.g.m
    }

    /// Guaranteed lower bound on every output coordinate for arbitrary
    /// clipped inputs: with a = 4/M, each e^{G(h)} lies in [a, 1 + a], so
    /// p̃_k ≥ a / (a + (K−1)(1 + a)). (For K = 2 this is a/(1 + 2a).)
    pub fn floor(&self) -> f64 {
        let a = 4.0 / self.g.m;
        let k = self.h.len() as f64;
        a / (a + (k - 1.0) * (1.0 + a))
    }

    pub fn eval(&self, x: &[f64]) -> Result<SimplexVector> {
        let mut exps = Vec::with_capacity(self.h.len());
        for (params, arch) in &self.h {
            let raw = forward(params, arch, x)?[0];
            let clipped = raw.clamp(0.0, 1.0);
            exps.push(self.g.eval(clipped).exp());
        }
        let s: f64 = exps.iter().sum();
        SimplexVector::lenient(exps.into_iter().map(|e| e / s).collect())
    }
}

/// Assembles the floored combinator from scalar component networks.
pub fn compose_with_floor(h: Vec<(NetParams, ArchSpec)>, m: f64) -> Result<FloorSoftmax> {
    if !(m >= 2.0) {
        return Err(Error::Argument(format!("need M >= 2, got {m}")));
    }
    if h.len() < 2 {
        return Err(Error::Argument("need at least two component networks".into()));
    }
    let d = h[0].1.input_dim();
    for (params, arch) in &h {
        params.validate(arch)?;
        if arch.head != Head::Identity {
            return Err(Error::Argument("component networks must have identity heads".into()));
        }
        if arch.output_dim() != 1 {
            return Err(Error::Argument("component networks must be scalar".into()));
        }
        if arch.input_dim() != d {
            return Err(Error::Argument("component input dimensions differ".into()));
        }
    }
    let g = build_exp_log_network(m, 16)?;
    Ok(FloorSoftmax { g, h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_glorot;

    #[test]
    fn exp_log_bounds_small_m() {
        let net = build_exp_log_network(10.0, 8).unwrap();
        assert!(net.max_deviation <= 0.4);
        assert!(net.min_value >= (0.4f64).ln() - 1e-12);
        // exact knot at x = 4/M
        let g = net.eval(0.4);
        assert!((g.exp() - 0.4).abs() < 1e-12);
        // x = 0 sits in the flat region: e^{G(0)} = 4/M within rounding
        let g0 = net.eval(0.0);
        assert!(g0.exp() <= 0.4);
        assert!((g0.exp() - 0.4).abs() < 1e-10);
    }

    #[test]
    fn exp_log_bound_m100() {
        let net = build_exp_log_network(100.0, 8).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=100_000 {
            let x = i as f64 / 100_000.0;
            let g = net.eval(x);
            worst = worst.max((g.exp() - x).abs());
            assert!(g >= (0.04f64).ln() - 1e-12);
        }
        assert!(worst <= 0.04);
    }

    #[test]
    fn exp_log_rejects_bad_m() {
        assert!(build_exp_log_network(1.5, 8).is_err());
    }

    fn scalar_net(seed: u64, d: usize) -> (NetParams, ArchSpec) {
        let arch = ArchSpec {
            hidden_layers: 1,
            widths: vec![d, 3, 1],
            weight_bound: 5.0,
            sparsity: None,
            head: Head::Identity,
        };
        let mut rng = crate::rng::substream(seed, "floor-h", 0);
        (init_glorot(&arch, &mut rng), arch)
    }

    #[test]
    fn floor_combinator_uniform_on_equal_components() {
        let base = scalar_net(1, 2);
        let fs = compose_with_floor(vec![base.clone(), base.clone(), base], 50.0).unwrap();
        let p = fs.eval(&[0.3, 0.8]).unwrap();
        for &v in p.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_combinator_direct_evaluation() {
        // K=2 with component outputs pinned at 1 and 0, M = 100:
        // p1 = e^{G(1)}/(e^{G(1)} + e^{G(0)}) with e^{G(1)} ≈ 1, e^{G(0)} ≈ 0.04
        let arch = ArchSpec {
            hidden_layers: 1,
            widths: vec![1, 1, 1],
            weight_bound: 2.0,
            sparsity: None,
            head: Head::Identity,
        };
        let mut one = NetParams::zeros(&arch);
        one.weights[0][0] = 0.0;
        one.biases[0][0] = -1.0; // hidden = relu(0x+1) = 1
        one.weights[1][0] = 1.0;
        let zero = NetParams::zeros(&arch);
        let fs = compose_with_floor(vec![(one, arch.clone()), (zero, arch)], 100.0).unwrap();
        let p = fs.eval(&[0.5]).unwrap();
        let g = build_exp_log_network(100.0, 8).unwrap();
        let e1 = g.eval(1.0).exp();
        let e0 = g.eval(0.0).exp();
        assert!((p.values()[0] - e1 / (e1 + e0)).abs() < 1e-12);
        assert!(p.values()[1] >= fs.floor());
    }

    #[test]
    fn floor_holds_on_grid() {
        let fs = compose_with_floor(vec![scalar_net(2, 1), scalar_net(3, 1), scalar_net(4, 1)], 100.0)
            .unwrap();
        let floor = fs.floor();
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            let p = fs.eval(&[x]).unwrap();
            let s: f64 = p.values().iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            assert!(p.values().iter().all(|&v| v >= floor - 1e-15));
        }
    }

    #[test]
    fn floor_rejects_small_m() {
        let a = scalar_net(5, 1);
        let b = scalar_net(6, 1);
        assert!(compose_with_floor(vec![a, b], 1.0).is_err());
    }
}
