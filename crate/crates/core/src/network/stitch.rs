//! Network stitching combinators: composition, parallelization and depth
//! synchronization.
//!
//! All three produce a plain dense network whose forward pass equals the
//! mathematical combination of the inputs. Depth padding inserts identity
//! layers after the last hidden activation, which is exact because
//! post-activation values are nonnegative; a depth-0 (purely linear) network
//! is padded at its input instead, exact on the [0,1]^d domain.

use crate::error::{Error, Result};
use crate::network::{ArchSpec, Head, NetParams};

fn recompute_bound(params: &NetParams) -> f64 {
    params.max_abs_entry().max(f64::MIN_POSITIVE)
}

/// Network computing `outer(inner(x))`. The inner head must be the identity;
/// the boundary linear maps are merged into one matrix.
pub fn stitch_compose(
    outer: (&NetParams, &ArchSpec),
    inner: (&NetParams, &ArchSpec),
) -> Result<(NetParams, ArchSpec)> {
    let (po, ao) = outer;
    let (pi, ai) = inner;
    po.validate(ao)?;
    pi.validate(ai)?;
    if ai.head != Head::Identity {
        return Err(Error::Argument("inner network must have an identity head".into()));
    }
    if ao.input_dim() != ai.output_dim() {
        return Err(Error::Argument(format!(
            "outer expects {} inputs, inner produces {}",
            ao.input_dim(),
            ai.output_dim()
        )));
    }
    let li = ai.hidden_layers;
    let lo = ao.hidden_layers;
    let mut widths = ai.widths[..=li].to_vec();
    widths.extend_from_slice(&ao.widths[1..]);

    // merged = W0_outer · WL_inner
    let (r_o, c_o) = (ao.widths[1], ao.widths[0]);
    let c_i = ai.widths[li];
    let mut merged = vec![0.0; r_o * c_i];
    for r in 0..r_o {
        for c in 0..c_i {
            let mut acc = 0.0;
            for t in 0..c_o {
                acc += po.weights[0][r * c_o + t] * pi.weights[li][t * c_i + c];
            }
            merged[r * c_i + c] = acc;
        }
    }

    let mut weights = pi.weights[..li].to_vec();
    weights.push(merged);
    weights.extend_from_slice(&po.weights[1..]);
    let mut biases = pi.biases.clone();
    biases.extend_from_slice(&po.biases);

    let params = NetParams { weights, biases };
    let arch = ArchSpec {
        hidden_layers: li + lo,
        widths,
        weight_bound: recompute_bound(&params),
        sparsity: None,
        head: ao.head,
    };
    params.validate(&arch)?;
    Ok((params, arch))
}

/// Pads a network with identity hidden layers up to `target_hidden`.
pub fn stitch_sync_depth(
    params: &NetParams,
    arch: &ArchSpec,
    target_hidden: usize,
) -> Result<(NetParams, ArchSpec)> {
    params.validate(arch)?;
    let l = arch.hidden_layers;
    if target_hidden < l {
        return Err(Error::Argument(format!(
            "target depth {target_hidden} below current depth {l}"
        )));
    }
    if target_hidden == l {
        return Ok((params.clone(), arch.clone()));
    }
    let extra = target_hidden - l;
    if l == 0 {
        // purely linear map: pad at the input, exact on the nonnegative domain
        let d = arch.input_dim();
        let mut widths = vec![d];
        widths.extend(std::iter::repeat(d).take(extra));
        widths.push(arch.output_dim());
        let eye = |n: usize| -> Vec<f64> {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = 1.0;
            }
            m
        };
        let mut weights = Vec::with_capacity(extra + 1);
        for _ in 0..extra {
            weights.push(eye(d));
        }
        weights.push(params.weights[0].clone());
        let biases = vec![vec![0.0; d]; extra];
        let out = NetParams { weights, biases };
        let arch2 = ArchSpec {
            hidden_layers: extra,
            widths,
            weight_bound: recompute_bound(&out),
            sparsity: None,
            head: arch.head,
        };
        out.validate(&arch2)?;
        return Ok((out, arch2));
    }
    // insert identities between the last activation and the output layer
    let m_l = arch.widths[l];
    let mut widths = arch.widths[..=l].to_vec();
    widths.extend(std::iter::repeat(m_l).take(extra));
    widths.push(arch.output_dim());
    let mut weights = params.weights[..l].to_vec();
    let mut eye = vec![0.0; m_l * m_l];
    for i in 0..m_l {
        eye[i * m_l + i] = 1.0;
    }
    for _ in 0..extra {
        weights.push(eye.clone());
    }
    weights.push(params.weights[l].clone());
    let mut biases = params.biases.clone();
    biases.extend(std::iter::repeat(vec![0.0; m_l]).take(extra));
    let out = NetParams { weights, biases };
    let arch2 = ArchSpec {
        hidden_layers: target_hidden,
        widths,
        weight_bound: recompute_bound(&out),
        sparsity: None,
        head: arch.head,
    };
    out.validate(&arch2)?;
    Ok((out, arch2))
}

/// Network computing the concatenation `(f_1(x), ..., f_m(x))` of networks
/// sharing the input. Depths are synchronized automatically.
pub fn stitch_parallel(nets: &[(NetParams, ArchSpec)]) -> Result<(NetParams, ArchSpec)> {
    if nets.is_empty() {
        return Err(Error::Argument("nothing to parallelize".into()));
    }
    let d = nets[0].1.input_dim();
    for (p, a) in nets {
        p.validate(a)?;
        if a.head != Head::Identity {
            return Err(Error::Argument("parallel components must have identity heads".into()));
        }
        if a.input_dim() != d {
            return Err(Error::Argument("parallel components must share the input dimension".into()));
        }
    }
    let depth = nets.iter().map(|(_, a)| a.hidden_layers).max().unwrap().max(1);
    let synced: Vec<(NetParams, ArchSpec)> = nets
        .iter()
        .map(|(p, a)| stitch_sync_depth(p, a, depth))
        .collect::<Result<_>>()?;

    let mut widths = vec![d];
    for i in 1..=depth + 1 {
        widths.push(synced.iter().map(|(_, a)| a.widths[i]).sum());
    }
    let mut weights = Vec::with_capacity(depth + 1);
    let mut biases = Vec::with_capacity(depth);
    for layer in 0..=depth {
        let rows: usize = widths[layer + 1];
        let cols: usize = widths[layer];
        let mut w = vec![0.0; rows * cols];
        let mut row_off = 0;
        let mut col_off = 0;
        for (p, a) in &synced {
            let r = a.widths[layer + 1];
            let c = a.widths[layer];
            for i in 0..r {
                for j in 0..c {
                    // layer 0 stacks vertically over the shared input
                    let cj = if layer == 0 { j } else { col_off + j };
                    w[(row_off + i) * cols + cj] = p.weights[layer][i * c + j];
                }
            }
            row_off += r;
            if layer > 0 {
                col_off += c;
            }
        }
        weights.push(w);
        if layer < depth {
            let mut b = Vec::with_capacity(rows);
            for (p, _) in &synced {
                b.extend_from_slice(&p.biases[layer]);
            }
            biases.push(b);
        }
    }
    let params = NetParams { weights, biases };
    let arch = ArchSpec {
        hidden_layers: depth,
        widths,
        weight_bound: recompute_bound(&params),
        sparsity: None,
        head: Head::Identity,
    };
    params.validate(&arch)?;
    Ok((params, arch))
}
