//! Command-line front end. Exit codes: 0 success, 1 runtime failure
//! (including divergence or a failed gradient check), 2 configuration or
//! usage error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use grouprobe::evalsel::{pareto_front, read_pareto_csv, write_front_dat, write_pareto_csv};
use grouprobe::experiment::{recipe, row_report, run_experiment, run_sweep, write_atomic, Plan, SweepConfig, RECIPES};
use grouprobe::oracle::{grad_check, transfer_core_mass_lower_bound, worst_group_error_bound, BoundInputs};
use grouprobe::synthgen::{make_balanced_test, noise_dataset, sample_group_dataset};
use grouprobe::{evaluate, Error, GroupDataSpec, LabeledDataset, ModelParams, Result};

#[derive(Parser)]
#[command(name = "grouprobe", version, about = "Worst-group robustness experiments on synthetic group data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset and write it as CSV (or binary with a .bin extension).
    Generate {
        /// `table2` or a path to a JSON data spec.
        #[arg(long, default_value = "table2")]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write a group-balanced set with this many rows per group instead.
        #[arg(long)]
        balanced: Option<usize>,
        /// Also write the noised reconstruction targets next to `out`.
        #[arg(long)]
        with_aux: bool,
    },
    /// Run an experiment plan (JSON file or named recipe) and write results.
    Train {
        #[arg(long, conflicts_with = "recipe", required_unless_present = "recipe")]
        config: Option<PathBuf>,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(RECIPES))]
        recipe: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Write the resolved plan to `out/plan.json` without training.
        #[arg(long)]
        dry_run: bool,
    },
    /// Score saved parameters (or a run record) on a dataset.
    Eval {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a hyper-parameter sweep and extract its Pareto front.
    Sweep {
        #[arg(long, conflicts_with = "recipe", required_unless_present = "recipe")]
        config: Option<PathBuf>,
        /// Only `pareto-default` is a sweep recipe.
        #[arg(long, value_parser = ["pareto-default"])]
        recipe: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the Pareto front from a points CSV.
    Pareto {
        /// CSV with columns avg_acc,wg_acc,method,alpha_aux,alpha_reg,tau,lr,batch.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a two-column file for gnuplot.
        #[arg(long)]
        dat: Option<PathBuf>,
    },
    /// Evaluate the worst-group error and core-mass bounds; prints JSON.
    Bound {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        sigma_spur: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        lam: f64,
        #[arg(long)]
        dc: usize,
        #[arg(long)]
        ds: usize,
        /// Transfer-task error; enables the core-mass bound when d_c > d_s.
        #[arg(long)]
        eps_trans: Option<f64>,
    },
    /// Compare analytic gradients with central differences.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

fn load_spec(spec: &str) -> Result<GroupDataSpec> {
    if spec == "table2" {
        return Ok(GroupDataSpec::table2());
    }
    let text = fs::read_to_string(spec)?;
    let parsed: GroupDataSpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    parsed.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(parsed)
}

fn load_params(path: &PathBuf) -> Result<ModelParams> {
    let text = fs::read_to_string(path)?;
    if let Ok(p) = ModelParams::from_json(&text) {
        return Ok(p);
    }
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let inner = v
        .pointer("/fit/params")
        .or_else(|| v.get("params"))
        .ok_or_else(|| Error::Config(format!("{} holds neither parameters nor a run record", path.display())))?;
    Ok(serde_json::from_value(inner.clone())?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            spec,
            seed,
            out,
            balanced,
            with_aux,
        } => {
            let spec = load_spec(&spec)?;
            let data = match balanced {
                Some(n) => make_balanced_test(&spec, n, seed)?,
                None => sample_group_dataset(&spec, seed)?,
            };
            data.save(&out)?;
            if with_aux {
                let aux = noise_dataset(&data, spec.sigma2_noise, seed)?;
                let noised = LabeledDataset::new(aux.noised, data.labels.clone(), data.spurious_attrs.clone())?;
                let mut name = out.file_stem().unwrap_or_default().to_owned();
                name.push("_noised.csv");
                noised.save(&out.with_file_name(name))?;
            }
            eprintln!("wrote {} rows to {}", data.len(), out.display());
        }
        Command::Train {
            config,
            recipe: name,
            out,
            dry_run,
        } => {
            let plan = match (config, name) {
                (Some(path), _) => Plan::load(&path)?,
                (None, Some(name)) => recipe(&name)?,
                (None, None) => unreachable!("clap requires one of --config/--recipe"),
            };
            plan.validate()?;
            if dry_run {
                write_atomic(&out.join("plan.json"), serde_json::to_string_pretty(&plan)?.as_bytes())?;
                return Ok(true);
            }
            let outcome = run_experiment(&plan, &out)?;
            for r in row_report(&outcome.summary) {
                println!(
                    "{:<24} wg {:.4} ± {:.4}  avg(id) {:.4}",
                    r.row, r.fixed.test_wg.0, r.fixed.test_wg.1, r.fixed.test_id_avg.0
                );
            }
            eprintln!("summary: {}", out.join("summary.csv").display());
        }
        Command::Eval { params, data } => {
            let p = load_params(&params)?;
            let d = LabeledDataset::load(&data)?;
            println!("{}", serde_json::to_string_pretty(&evaluate(&p, &d)?)?);
        }
        Command::Sweep {
            config,
            recipe: name,
            out,
        } => {
            let cfg = match (config, name) {
                (Some(path), _) => SweepConfig::load(&path)?,
                _ => grouprobe::experiment::pareto_default(),
            };
            let res = run_sweep(&cfg, &out)?;
            println!("{} cells, {} on the front", res.points.len(), res.front.len());
            for p in &res.front {
                println!(
                    "avg {:.4} wg {:.4}  alpha_aux {:.4} alpha_reg {:.4} lr {:e} batch {}",
                    p.avg_acc, p.wg_acc, p.tag.alpha_aux, p.tag.alpha_reg, p.tag.lr, p.tag.batch
                );
            }
        }
        Command::Pareto { input, out, dat } => {
            let points = read_pareto_csv(fs::File::open(&input)?)?;
            let front = pareto_front(&points);
            let mut buf = Vec::new();
            write_pareto_csv(&front, &mut buf)?;
            write_atomic(&out, &buf)?;
            if let Some(dat) = dat {
                let mut buf = Vec::new();
                write_front_dat(&front, &mut buf)?;
                write_atomic(&dat, &buf)?;
            }
            println!("{} of {} points on the front", front.len(), points.len());
        }
        Command::Bound {
            gamma,
            sigma_spur,
            eta,
            tau,
            lam,
            dc,
            ds,
            eps_trans,
        } => {
            let inputs = BoundInputs {
                gamma,
                sigma_spur,
                eta,
                tau,
                lam,
                d_c: dc,
                d_s: ds,
                eps_trans: eps_trans.unwrap_or(f64::NAN),
            };
            let wg = worst_group_error_bound(&inputs).map_err(|e| Error::Config(e.to_string()))?;
            let core = match eps_trans {
                Some(_) if dc > ds => Some(transfer_core_mass_lower_bound(&inputs).map_err(|e| Error::Config(e.to_string()))?),
                _ => None,
            };
            let doc = json!({
                "inputs": {
                    "gamma": gamma, "sigma_spur": sigma_spur, "eta": eta, "tau": tau,
                    "lam": lam, "d_c": dc, "d_s": ds, "eps_trans": eps_trans,
                },
                "worst_group_error_bound": wg,
                "core_mass_lower_bound": core,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::GradCheck { trials, seed, tol } => {
            let checks = grad_check(trials, seed)?;
            let mut ok = true;
            for name in grouprobe::oracle::GRAD_CHECK_LOSSES {
                let worst = checks
                    .iter()
                    .filter(|c| c.loss == name)
                    .map(|c| c.relative_error)
                    .fold(0.0, f64::max);
                let pass = worst < tol;
                ok &= pass;
                println!("{:<13} max relative error {worst:.3e}  {}", name, if pass { "ok" } else { "FAIL" });
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
