//! Sampling of inputs and one-hot labels from a true model, plus dataset
//! persistence.
//!
//! Labels are categorical draws with probabilities η(X_i). The CSV format is
//! `x1,...,xd,label` with 1-based labels, inputs written with 17 significant
//! digits so a save/load round trip is bit-exact; seed and provenance ride in
//! `#`-prefixed comment lines above the header.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::InputDistribution;
use crate::models::TrueModel;
use crate::rng::substream;

/// Input distribution on [0,1]^d.
///
/// `BoundedMixture` is w·Uniform + (1−w)·tensor-Beta(2,2); its density
/// w + (1−w)∏_j 6x_j(1−x_j) has explicit bounds γ = w and
/// Γ = w + (1−w)(3/2)^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputLaw {
    Uniform { dim: usize },
    BoundedMixture { dim: usize, uniform_weight: f64 },
}

impl InputLaw {
    pub fn uniform(dim: usize) -> Self {
        InputLaw::Uniform { dim }
    }

    pub fn bounded_mixture(dim: usize, uniform_weight: f64) -> Result<Self> {
        if !(uniform_weight > 0.0 && uniform_weight < 1.0) {
            return Err(Error::Argument(format!(
                "mixture weight must lie in (0,1), got {uniform_weight}"
            )));
        }
        Ok(InputLaw::BoundedMixture { dim, uniform_weight })
    }
}

/// Inverse CDF of Beta(2,2): solves x²(3−2x) = u on [0,1] by safeguarded
/// Newton iterations. Documented here so other implementations can match
/// the sample stream exactly.
fn beta22_inv_cdf(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = 0.5f64;
    for _ in 0..64 {
        let f = x * x * (3.0 - 2.0 * x) - u;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = 6.0 * x * (1.0 - x);
        let mut next = if d > 1e-12 { x - f / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    x
}

impl InputDistribution for InputLaw {
    fn dim(&self) -> usize {
        match self {
            InputLaw::Uniform { dim } => *dim,
            InputLaw::BoundedMixture { dim, .. } => *dim,
        }
    }

    fn density(&self, x: &[f64]) -> f64 {
        match self {
            InputLaw::Uniform { .. } => 1.0,
            InputLaw::BoundedMixture { uniform_weight, .. } => {
                let beta: f64 = x.iter().map(|&v| 6.0 * v * (1.0 - v)).product();
                uniform_weight + (1.0 - uniform_weight) * beta
            }
        }
    }

    fn density_bounds(&self) -> (f64, f64) {
        match self {
            InputLaw::Uniform { .. } => (1.0, 1.0),
            InputLaw::BoundedMixture { dim, uniform_weight } => (
                *uniform_weight,
                uniform_weight + (1.0 - uniform_weight) * 1.5f64.powi(*dim as i32),
            ),
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            InputLaw::Uniform { dim } => (0..*dim).map(|_| rng.gen::<f64>()).collect(),
            InputLaw::BoundedMixture { dim, uniform_weight } => {
                let from_uniform = rng.gen::<f64>() < *uniform_weight;
                (0..*dim)
                    .map(|_| {
                        let u = rng.gen::<f64>();
                        if from_uniform {
                            u
                        } else {
                            beta22_inv_cdf(u)
                        }
                    })
                    .collect()
            }
        }
    }
}

/// n inputs in [0,1]^d with one-hot labels over K classes. Labels are stored
/// 0-based in memory and 1-based on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    /// Row-major n×d inputs.
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub seed: u64,
    pub model_label: String,
}

impl Dataset {
    pub fn x(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.classes];
        v[self.labels[i]] = 1.0;
        v
    }
}

fn categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Draws X i.i.d. from `law` and labels from η(X_i). Deterministic given the
/// seed; the stream is the `(seed, "dataset", 0)` substream.
pub fn sample_dataset(model: &TrueModel, n: usize, law: &InputLaw, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Argument("sample size must be >= 1".into()));
    }
    if law.dim() != model.input_dim() {
        return Err(Error::Argument(format!(
            "law dimension {} does not match model input dimension {}",
            law.dim(),
            model.input_dim()
        )));
    }
    let dim = model.input_dim();
    let classes = model.classes();
    let mut rng = substream(seed, "dataset", 0);
    let mut inputs = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = law.sample(&mut rng);
        let p = model.prob(&x)?;
        labels.push(categorical(&mut rng, p.values()));
        inputs.extend_from_slice(&x);
    }
    Ok(Dataset {
        n,
        dim,
        classes,
        inputs,
        labels,
        seed,
        model_label: model.label.clone(),
    })
}

/// Writes the CSV described in the module docs. LF line endings, UTF-8.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# seed: {}\n", ds.seed));
    out.push_str(&format!("# model: {}\n", ds.model_label));
    out.push_str(&format!("# classes: {}\n", ds.classes));
    for j in 1..=ds.dim {
        out.push_str(&format!("x{j}{}", if j == ds.dim { "" } else { "," }));
    }
    out.push_str(",label\n");
    for i in 0..ds.n {
        for v in ds.x(i) {
            out.push_str(&format!("{v:.16e},"));
        }
        out.push_str(&format!("{}\n", ds.labels[i] + 1));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut seed = 0u64;
    let mut model_label = String::new();
    let mut classes: Option<usize> = None;
    let mut dim: Option<usize> = None;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("seed:") {
                seed = v.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: "bad seed".into(),
                })?;
            } else if let Some(v) = rest.strip_prefix("model:") {
                model_label = v.trim().to_string();
            } else if let Some(v) = rest.strip_prefix("classes:") {
                classes = Some(v.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: "bad class count".into(),
                })?);
            }
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.last() != Some(&"label") || cols.len() < 2 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected header `x1,...,xd,label`".into(),
                });
            }
            dim = Some(cols.len() - 1);
            saw_header = true;
            continue;
        }
        let d = dim.unwrap();
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != d + 1 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} columns, got {}", d + 1, cols.len()),
            });
        }
        for c in &cols[..d] {
            let v: f64 = c.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad input value `{c}`"),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("input {v} outside [0,1]"),
                });
            }
            inputs.push(v);
        }
        let label: i64 = cols[d].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label `{}`", cols[d]),
        })?;
        labels.push((label, lineno));
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        });
    }
    let classes = classes.unwrap_or_else(|| {
        labels.iter().map(|&(l, _)| l.max(1) as usize).max().unwrap_or(2)
    });
    let mut out_labels = Vec::with_capacity(labels.len());
    for (l, lineno) in labels {
        if l < 1 || l as usize > classes {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("label {l} outside [1,{classes}]"),
            });
        }
        out_labels.push(l as usize - 1);
    }
    let dim = dim.unwrap();
    Ok(Dataset {
        n: out_labels.len(),
        dim,
        classes,
        inputs,
        labels: out_labels,
        seed,
        model_label,
    })
}
