//! Experiment orchestration: rate studies over (n, seed) grids, slope
//! fitting, result persistence and a per-cell cache.
//!
//! A study cell samples a dataset, derives the architecture, fits the
//! network and estimates its Hellinger risk against the truth. Cells are
//! independent and run on a worker pool; aggregation sorts keys so outputs
//! are byte-identical across thread counts and reruns.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{sample_dataset, InputLaw};
use crate::error::{Error, Result};
use crate::metrics::{risk, RiskMethod};
use crate::models::{model_from_catalog, rate_phi_n, TrueModel};
use crate::network::{forward, ArchSpec};
use crate::rng::fnv1a64;
use crate::training::{architecture_from_theory, fit_npmle, TheoryConstants, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRef {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ArchSource {
    Theory { constants: TheoryConstants },
    Explicit { arch: ArchSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: ModelRef,
    pub law: InputLaw,
    pub n_grid: Vec<u64>,
    pub seeds: Vec<u64>,
    pub arch: ArchSource,
    pub train: TrainConfig,
    pub risk_method: RiskMethod,
    pub out_dir: PathBuf,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.seeds.is_empty() {
            return Err(Error::Argument("n grid and seeds must be nonempty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Argument("n grid must be strictly increasing".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::Argument("seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Hash of the result-relevant fields; the cache key ignores `out_dir`.
    fn config_hash(&self) -> u64 {
        #[derive(Serialize)]
        struct Key<'a> {
            schema_version: u32,
            model: &'a ModelRef,
            law: &'a InputLaw,
            arch: &'a ArchSource,
            train: &'a TrainConfig,
            risk_method: &'a RiskMethod,
        }
        let key = Key {
            schema_version: self.schema_version,
            model: &self.model,
            law: &self.law,
            arch: &self.arch,
            train: &self.train,
            risk_method: &self.risk_method,
        };
        fnv1a64(serde_json::to_string(&key).expect("serializable config").as_bytes())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub n: u64,
    pub seed: u64,
    pub risk: f64,
    pub stderr: f64,
    pub final_loss: f64,
    pub restart_index: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (n, mean risk, standard error of the mean) per grid point.
    pub points: Vec<(u64, f64, f64)>,
    pub theory_exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyOutput {
    pub schema_version: u32,
    pub cells: Vec<CellResult>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
}

/// Ordinary least squares of ln(mean risk) on ln(n).
pub fn fit_rate(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Argument(format!(
            "insufficient points for a rate fit: {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, r)| !(n > 0.0) || !(r > 0.0)) {
        return Err(Error::Argument("rate fit needs positive n and risks".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("degenerate abscissae in rate fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}

fn run_cell(
    cfg: &ExperimentConfig,
    model: &TrueModel,
    n: u64,
    seed: u64,
) -> Result<CellResult> {
    let ds = sample_dataset(model, n as usize, &cfg.law, seed)?;
    let arch = match &cfg.arch {
        ArchSource::Theory { constants } => architecture_from_theory(&model.spec, n, constants)?,
        ArchSource::Explicit { arch } => arch.clone(),
    };
    let mut tc = cfg.train.clone();
    tc.seed = seed;
    let fitted = fit_npmle(&arch, &ds, &tc)?;
    let est = risk(
        |x: &[f64]| model.prob_raw(x),
        |x: &[f64]| forward(&fitted.params, &arch, x).expect("dimension checked"),
        &cfg.law,
        &cfg.risk_method,
        seed,
    )?;
    Ok(CellResult {
        n,
        seed,
        risk: est.value,
        stderr: est.error,
        final_loss: fitted.final_loss,
        restart_index: fitted.restart_index,
        error: None,
    })
}

fn cache_path(dir: &Path, hash: u64, n: u64, seed: u64) -> PathBuf {
    dir.join(format!("cell-{hash:016x}-n{n}-s{seed}.json"))
}

/// Runs the full study: every (n, seed) cell (cached, parallel), per-n
/// aggregation, OLS slope fit, CSV + JSON artifacts under `out_dir`.
pub fn run_rate_study(cfg: &ExperimentConfig, jobs: usize) -> Result<StudyOutput> {
    cfg.validate()?;
    let model = model_from_catalog(&cfg.model.name, &cfg.model.params)?;
    let cache_dir = cfg.out_dir.join("cache");
    fs::create_dir_all(&cache_dir)?;
    let hash = cfg.config_hash();

    let cells: Vec<(u64, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("worker pool: {e}")))?;

    let mut results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, seed)| {
                let path = cache_path(&cache_dir, hash, n, seed);
                if let Ok(text) = fs::read_to_string(&path) {
                    if let Ok(cell) = serde_json::from_str::<CellResult>(&text) {
                        return cell;
                    }
                }
                let cell = match run_cell(cfg, &model, n, seed) {
                    Ok(c) => c,
                    Err(e) => CellResult {
                        n,
                        seed,
                        risk: f64::NAN,
                        stderr: f64::NAN,
                        final_loss: f64::NAN,
                        restart_index: 0,
                        error: Some(e.to_string()),
                    },
                };
                if cell.error.is_none() {
                    if let Ok(text) = serde_json::to_string(&cell) {
                        let _ = fs::write(&path, text);
                    }
                }
                cell
            })
            .collect()
    });
    results.sort_by_key(|c| (c.n, c.seed));

    // per-n aggregation over successful cells
    let mut points = Vec::new();
    for &n in &cfg.n_grid {
        let vals: Vec<f64> = results
            .iter()
            .filter(|c| c.n == n && c.error.is_none())
            .map(|c| c.risk)
            .collect();
        if vals.is_empty() {
            continue;
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let se = if vals.len() > 1 {
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64;
            (var / vals.len() as f64).sqrt()
        } else {
            0.0
        };
        points.push((n, m, se));
    }

    let theory_exponent = {
        let n_ref = *cfg.n_grid.last().unwrap();
        let (_, i) = rate_phi_n(&model.spec, n_ref);
        let bstar = crate::models::effective_smoothness(&model.spec);
        -bstar[i] / (bstar[i] + model.spec.arities[i] as f64)
    };

    let fit_points: Vec<(f64, f64)> = points.iter().map(|&(n, m, _)| (n as f64, m)).collect();
    let (fit, fit_error) = match fit_rate(&fit_points) {
        Ok((slope, intercept, r2)) => (
            Some(RateFit {
                slope,
                intercept,
                r_squared: r2,
                points: points.clone(),
                theory_exponent,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };

    let out = StudyOutput {
        schema_version: cfg.schema_version,
        cells: results,
        fit,
        fit_error,
    };
    emit_plot_data(&out, &model, &cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("ratefit.json"),
        serde_json::to_string_pretty(&out)?,
    )?;
    Ok(out)
}

/// Writes the tidy per-cell CSV (n, seed, risk, stderr) and the per-n
/// summary CSV with the theoretical rate overlay.
pub fn emit_plot_data(out: &StudyOutput, model: &TrueModel, dir: impl AsRef<Path>) -> Result<()> {
    let ok_cells: Vec<&CellResult> = out.cells.iter().filter(|c| c.error.is_none()).collect();
    if ok_cells.is_empty() {
        return Err(Error::Argument("no successful cells to emit".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut tidy = String::from("n,seed,risk,stderr\n");
    for c in &ok_cells {
        tidy.push_str(&format!(
            "{},{},{:.16e},{:.16e}\n",
            c.n, c.seed, c.risk, c.stderr
        ));
    }
    fs::write(dir.join("results.csv"), tidy)?;

    let mut summary = String::from("n,mean_risk,stderr,phi_n\n");
    if let Some(fit) = &out.fit {
        for &(n, m, se) in &fit.points {
            let (phi, _) = rate_phi_n(&model.spec, n);
            summary.push_str(&format!("{n},{m:.16e},{se:.16e},{phi:.16e}\n"));
        }
    }
    fs::write(dir.join("summary.csv"), summary)?;
    Ok(())
}
