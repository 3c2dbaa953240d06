//! Command-line front end for the estimation laboratory.
//!
//! Subcommands: `datagen`, `train`, `risk`, `theory`, `rate-study`,
//! `minimax`, `approx-net`. Exit codes: 0 on success, 2 on argument or
//! parse errors, 3 on numeric/data/construction failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use npmle_lab::datagen::{load_dataset, sample_dataset, save_dataset, InputLaw};
use npmle_lab::error::{Error, Result};
use npmle_lab::harness::{run_rate_study, ExperimentConfig};
use npmle_lab::metrics::{risk, InputDistribution, RiskMethod};
use npmle_lab::minimax::{build_hypotheses, find_rho, verify_kl_budget, verify_separation, BumpSpec};
use npmle_lab::models::{effective_smoothness, model_from_catalog, rate_phi_n, CompositionSpec};
use npmle_lab::network::special::build_exp_log_network;
use npmle_lab::network::{forward, load_network, save_network, ArchSpec};
use npmle_lab::theory;
use npmle_lab::training::{architecture_from_theory, fit_npmle, TheoryConstants, TrainConfig};

#[derive(Parser)]
#[command(name = "npmle-lab", about = "Conditional class probability estimation lab", version)]
struct Cli {
    /// Master seed for commands that sample.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file or directory (command dependent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the study runner.
    #[arg(long, global = true, default_value_t = 2)]
    jobs: usize,
    /// JSON config file (command dependent).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Catalog model name (`stock-gam`, `gam`, `uniform`, `constant`).
    #[arg(long, default_value = "stock-gam")]
    model: String,
    /// JSON parameter block for the model.
    #[arg(long, default_value = "null")]
    params: String,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a catalog model and write it as CSV.
    Datagen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        /// Input law: `uniform` or `mixture[:weight]`.
        #[arg(long, default_value = "uniform")]
        law: String,
    },
    /// Fit the likelihood estimator on a dataset CSV and save the network.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Theory constants as JSON `{"c_l":..,"c_m":..,"c_b":..}`; an
        /// explicit architecture can be given in --config instead.
        #[arg(long, default_value = "{}")]
        constants: String,
    },
    /// Hellinger risk of a saved network against a catalog truth.
    Risk {
        #[arg(long)]
        net: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "quadrature")]
        method: String,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[arg(long, default_value = "uniform")]
        law: String,
    },
    /// Evaluate a named bound/rate calculator on a JSON parameter block.
    Theory {
        #[arg(long)]
        calc: String,
        #[arg(long)]
        params: String,
    },
    /// Run the full rate study described by the --config JSON.
    RateStudy,
    /// Build and verify the packed hard-instance family.
    Minimax {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        beta_star: f64,
        #[arg(long, default_value_t = 1)]
        t_star: usize,
        #[arg(long, default_value_t = 1.0)]
        b_exp: f64,
        /// Grid constant; omit to search for the smallest admissible value.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value = "mixture:0.25")]
        law: String,
        #[arg(long, default_value_t = 64)]
        cap: usize,
        /// Sample a dataset from hypothesis W (by index) after verification.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Construct the log-approximation network for a given accuracy level.
    ApproxNet {
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 16)]
        knots: usize,
    },
}

fn parse_law(text: &str, dim: usize) -> Result<InputLaw> {
    if text == "uniform" {
        return Ok(InputLaw::uniform(dim));
    }
    if text == "mixture" {
        return InputLaw::bounded_mixture(dim, 0.5);
    }
    if let Some(w) = text.strip_prefix("mixture:") {
        let w: f64 = w
            .parse()
            .map_err(|_| Error::Argument(format!("bad mixture weight `{w}`")))?;
        return InputLaw::bounded_mixture(dim, w);
    }
    Err(Error::Argument(format!("unknown law `{text}`")))
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Argument(format!("bad JSON: {e}")))
}

fn json_f64(v: &Value, key: &str) -> Result<f64> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Argument(format!("missing numeric field `{key}`")))
}

fn spec_from_json(v: &Value) -> Result<CompositionSpec> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Argument(format!("bad spec: {e}")))
}

fn theory_calc(calc: &str, p: &Value) -> Result<Value> {
    let value = match calc {
        "covering-bound" => theory::covering_bound_dnn(
            json_f64(p, "delta")?,
            json_f64(p, "l")?,
            json_f64(p, "m_inf")?,
            json_f64(p, "b")?,
            json_f64(p, "s")?,
        )?,
        "bracketing-from-covering" => {
            let l = json_f64(p, "l")?;
            let m_inf = json_f64(p, "m_inf")?;
            let b = json_f64(p, "b")?;
            let s = json_f64(p, "s")?;
            theory::bracketing_from_covering(
                json_f64(p, "delta")?,
                json_f64(p, "p")?,
                json_f64(p, "q_total")?,
                |d| theory::covering_bound_dnn(d, l, m_inf, b, s).unwrap_or(f64::NAN),
            )?
        }
        "entropy-integral" => theory::entropy_integral_bound(
            json_f64(p, "delta")?,
            json_f64(p, "s")?,
            json_f64(p, "l")?,
            json_f64(p, "a")?,
        )?,
        "critical-radius" => theory::critical_radius(
            json_f64(p, "s")?,
            json_f64(p, "l")?,
            json_f64(p, "a")?,
            json_f64(p, "n")?,
        )?,
        "oracle-rhs" => theory::oracle_rhs(
            json_f64(p, "c0_sq")?,
            json_f64(p, "delta_n")?,
            json_f64(p, "approx_risk")?,
            json_f64(p, "n")?,
            json_f64(p, "c")?,
        )?,
        "a-constant" => {
            let beta_star: Vec<f64> = serde_json::from_value(
                p.get("beta_star").cloned().unwrap_or(Value::Null),
            )
            .map_err(|e| Error::Argument(format!("beta_star: {e}")))?;
            let t: Vec<usize> = serde_json::from_value(p.get("t").cloned().unwrap_or(Value::Null))
                .map_err(|e| Error::Argument(format!("t: {e}")))?;
            theory::a_constant(
                json_f64(p, "k")?,
                json_f64(p, "b")?,
                json_f64(p, "m_inf")?,
                json_f64(p, "l")?,
                json_f64(p, "n_approx")?,
                &beta_star,
                &t,
            )?
        }
        "svb-rate" => {
            let spec = spec_from_json(p.get("spec").ok_or_else(|| {
                Error::Argument("svb-rate needs a `spec` block".into())
            })?)?;
            theory::svb_rate(json_f64(p, "alpha")?, &spec, json_f64(p, "n")? as u64)?
        }
        "k-rate" => {
            let spec = spec_from_json(p.get("spec").ok_or_else(|| {
                Error::Argument("k-rate needs a `spec` block".into())
            })?)?;
            theory::k_rate(&spec, json_f64(p, "n")? as u64)
        }
        "besov-effective" => {
            let beta: Vec<f64> =
                serde_json::from_value(p.get("beta").cloned().unwrap_or(Value::Null))
                    .map_err(|e| Error::Argument(format!("beta: {e}")))?;
            let (tilde, bar) = theory::besov_effective(&beta)?;
            return Ok(json!({"calc": calc, "beta_tilde": tilde, "beta_bar": bar}));
        }
        "besov-rate" => theory::besov_rate(json_f64(p, "beta_tilde")?, json_f64(p, "n")? as u64),
        "phi-n" => {
            let spec = spec_from_json(p.get("spec").ok_or_else(|| {
                Error::Argument("phi-n needs a `spec` block".into())
            })?)?;
            let (v, i) = rate_phi_n(&spec, json_f64(p, "n")? as u64);
            return Ok(json!({"calc": calc, "value": v, "argmax_index": i}));
        }
        "beta-star" => {
            let spec = spec_from_json(p.get("spec").ok_or_else(|| {
                Error::Argument("beta-star needs a `spec` block".into())
            })?)?;
            return Ok(json!({"calc": calc, "beta_star": effective_smoothness(&spec)}));
        }
        other => {
            return Err(Error::Argument(format!(
                "unknown calculator `{other}`; available: covering-bound, \
                 bracketing-from-covering, entropy-integral, critical-radius, \
                 oracle-rhs, a-constant, svb-rate, k-rate, besov-effective, \
                 besov-rate, phi-n, beta-star"
            )))
        }
    };
    Ok(json!({"calc": calc, "value": value}))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Datagen { model, n, law } => {
            let m = model_from_catalog(&model.model, &parse_json(&model.params)?)?;
            let law = parse_law(&law, m.input_dim())?;
            let ds = sample_dataset(&m, n, &law, cli.seed)?;
            let out = cli.out.unwrap_or_else(|| PathBuf::from("dataset.csv"));
            save_dataset(&ds, &out)?;
            println!(
                "{}",
                json!({"written": out, "n": ds.n, "dim": ds.dim, "classes": ds.classes})
            );
        }
        Command::Train {
            data,
            model,
            constants,
        } => {
            let ds = load_dataset(&data)?;
            let m = model_from_catalog(&model.model, &parse_json(&model.params)?)?;
            let mut train_cfg = TrainConfig::default();
            let mut explicit_arch: Option<ArchSpec> = None;
            if let Some(cfg_path) = &cli.config {
                let cfg: Value = serde_json::from_str(&std::fs::read_to_string(cfg_path)?)?;
                if let Some(t) = cfg.get("train") {
                    train_cfg = serde_json::from_value(t.clone())
                        .map_err(|e| Error::Argument(format!("bad train config: {e}")))?;
                }
                if let Some(a) = cfg.get("arch") {
                    explicit_arch = Some(
                        serde_json::from_value(a.clone())
                            .map_err(|e| Error::Argument(format!("bad arch: {e}")))?,
                    );
                }
            }
            train_cfg.seed = cli.seed;
            let arch = match explicit_arch {
                Some(a) => a,
                None => {
                    let c: TheoryConstants = serde_json::from_str(&constants)
                        .map_err(|e| Error::Argument(format!("bad constants: {e}")))?;
                    architecture_from_theory(&m.spec, ds.n as u64, &c)?
                }
            };
            let res = fit_npmle(&arch, &ds, &train_cfg)?;
            let out = cli.out.unwrap_or_else(|| PathBuf::from("network.json"));
            save_network(&res.params, &arch, &out)?;
            let result_path = out.with_extension("train.json");
            std::fs::write(&result_path, serde_json::to_string_pretty(&res)?)?;
            println!(
                "{}",
                json!({
                    "written": out,
                    "train_result": result_path,
                    "final_loss": res.final_loss,
                    "restart_index": res.restart_index,
                    "epochs_run": res.loss_history.len(),
                    "wall_time": res.wall_time,
                })
            );
        }
        Command::Risk {
            net,
            model,
            method,
            budget,
            law,
        } => {
            let (params, arch) = load_network(&net)?;
            let m = model_from_catalog(&model.model, &parse_json(&model.params)?)?;
            let law = parse_law(&law, m.input_dim())?;
            let method = match method.as_str() {
                "quadrature" => RiskMethod::Quadrature,
                "mc" => RiskMethod::MonteCarlo { budget },
                other => return Err(Error::Argument(format!("unknown method `{other}`"))),
            };
            let est = risk(
                |x: &[f64]| m.prob_raw(x),
                |x: &[f64]| forward(&params, &arch, x).unwrap_or_else(|_| vec![f64::NAN]),
                &law,
                &method,
                cli.seed,
            )?;
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
        Command::Theory { calc, params } => {
            let out = theory_calc(&calc, &parse_json(&params)?)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::RateStudy => {
            let cfg_path = cli
                .config
                .ok_or_else(|| Error::Argument("rate-study requires --config".into()))?;
            let mut cfg: ExperimentConfig =
                serde_json::from_str(&std::fs::read_to_string(cfg_path)?)
                    .map_err(|e| Error::Argument(format!("bad study config: {e}")))?;
            if let Some(out) = cli.out {
                cfg.out_dir = out;
            }
            let out = run_rate_study(&cfg, cli.jobs)?;
            let failed = out.cells.iter().filter(|c| c.error.is_some()).count();
            println!(
                "{}",
                json!({
                    "cells": out.cells.len(),
                    "failed": failed,
                    "slope": out.fit.as_ref().map(|f| f.slope),
                    "r_squared": out.fit.as_ref().map(|f| f.r_squared),
                    "theory_exponent": out.fit.as_ref().map(|f| f.theory_exponent),
                    "fit_error": out.fit_error,
                    "out_dir": cfg.out_dir,
                })
            );
        }
        Command::Minimax {
            n,
            k,
            beta_star,
            t_star,
            b_exp,
            rho,
            law,
            cap,
            sample,
            samples,
        } => {
            let law = parse_law(&law, t_star)?;
            let (_, gamma_up) = law.density_bounds();
            let spec = match rho {
                Some(r) => BumpSpec::new(beta_star, t_star, b_exp, r)?,
                None => find_rho(n, k, beta_star, t_star, b_exp, gamma_up)?,
            };
            let smallness = npmle_lab::minimax::rho_smallness_ok(n, k, &spec, gamma_up);
            let hs = build_hypotheses(n, k, &spec, cap, cli.seed)?;
            let mut worst: Option<&_> = None;
            let mut reports = Vec::new();
            for i in 0..hs.packing.len() {
                for j in i + 1..hs.packing.len() {
                    reports.push(verify_separation(&hs, i, j, &law, 16, 1e-6)?);
                }
            }
            for r in &reports {
                if worst.map_or(true, |w: &npmle_lab::minimax::SeparationReport| {
                    (r.risk - r.lower_bound) < (w.risk - w.lower_bound)
                }) {
                    worst = Some(r);
                }
            }
            let kl = verify_kl_budget(&hs, &law, 16)?;
            let description = json!({
                "m_n": hs.m_n,
                "h_n": hs.h_n,
                "rho": hs.spec.rho,
                "b": hs.spec.b,
                "beta_star": hs.spec.beta_star,
                "beta_double_star": hs.spec.beta_dstar,
                "packing_size": hs.packing.len(),
                "min_hamming": hs.min_dist,
                "rho_smallness_ok": smallness,
                "separation_pairs": reports.len(),
                "separation_all_satisfied": reports.iter().all(|r| r.satisfied),
                "tightest_pair": worst,
                "kl_budget": kl,
            });
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(
                    dir.join("hypotheses.json"),
                    serde_json::to_string_pretty(&description)?,
                )?;
                std::fs::write(
                    dir.join("separation.json"),
                    serde_json::to_string_pretty(&reports)?,
                )?;
            }
            if let Some(w) = sample {
                let model = hs.to_true_model(w)?;
                let ds = sample_dataset(&model, samples, &law, cli.seed)?;
                let path = cli
                    .out
                    .map(|d| d.join(format!("hypothesis-{w}.csv")))
                    .unwrap_or_else(|| PathBuf::from(format!("hypothesis-{w}.csv")));
                save_dataset(&ds, &path)?;
            }
            println!("{}", serde_json::to_string_pretty(&description)?);
        }
        Command::ApproxNet { m, knots } => {
            let net = build_exp_log_network(m, knots)?;
            if let Some(out) = &cli.out {
                save_network(&net.params, &net.arch, out)?;
            }
            println!(
                "{}",
                json!({
                    "m": net.m,
                    "segments": net.segments,
                    "max_deviation": net.max_deviation,
                    "deviation_target": 4.0 / net.m,
                    "min_value": net.min_value,
                    "min_value_floor": (4.0 / net.m).ln(),
                    "hidden_width": net.arch.widths[1],
                    "weight_bound": net.arch.weight_bound,
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
