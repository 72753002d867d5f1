use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use twl_core::decompose::{corona, corona_carleson_sum, corona_check, decompose};
use twl_core::harness::{self, Replay, SweepConfig, VerifyOptions, WeightProfile};
use twl_core::norm::{opnorm_ascent, opnorm_bruteforce, AscentConfig};
use twl_core::operators::{
    apply_t, apply_tbar, apply_u, maximal_function, ComponentFamily, ComponentFamilyJson,
};
use twl_core::suite::SuiteConstants;
use twl_core::testing::{
    carleson_constant, compute_l, compute_l_star, lsu_constants, OptimizerConfig,
};
use twl_core::{Instance, StepFunction, Weight};

#[derive(Parser)]
#[command(
    name = "twl",
    version,
    about = "Two-weight testing conditions on finite dyadic grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    #[value(name = "T")]
    T,
    #[value(name = "Tbar")]
    Tbar,
    #[value(name = "U")]
    U,
    #[value(name = "M")]
    M,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Sigma,
    W,
    Lebesgue,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Instance number within the seed's stream.
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long, default_value_t = 2)]
        depth: u32,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// uniform, lognormal, spiky or near_degenerate
        #[arg(long, default_value = "lognormal")]
        profile: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 0.7)]
        density: f64,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply T, T̄, U or the weighted maximal function.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        /// `one`, an inline JSON array, or a JSON file (array, `{"values": …}`,
        /// or a component family for `--op U`).
        #[arg(long, default_value = "one")]
        f: String,
        #[arg(long, value_enum)]
        op: Op,
        /// Weight of the maximal function.
        #[arg(long, value_enum, default_value = "sigma")]
        weight: WeightArg,
    },
    /// Testing constants ℒ and ℒ*.
    Constants {
        #[arg(long)]
        instance: PathBuf,
        /// Also report the Carleson constant (needs r = q = p).
        #[arg(long)]
        carleson: bool,
        /// Also report the constants of the linear (q = 1) operator.
        #[arg(long)]
        q1: bool,
        /// Certify ℒ per cube with the direction-grid search.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Operator norm of f ↦ T̄(fσ) from L^r(σ) to L^p(w).
    Opnorm {
        #[arg(long)]
        instance: PathBuf,
        /// Brute-force search (at most 8 cells).
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 12)]
        resolution: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Level sets, Whitney and E_k pieces, and the class of every cube.
    Decompose {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "one")]
        f: String,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
    },
    /// Principal cubes of σ-averages of f.
    Corona {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "one")]
        f: String,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        /// Use the Whitney cubes of levels k ≡ residue (mod 3).
        #[arg(long, default_value_t = 0)]
        residue: i32,
        /// Use the instance collection instead of Whitney cubes.
        #[arg(long)]
        from_collection: bool,
    },
    /// Run the verification suite on one instance (or a replay file).
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
        /// Where to write the replay file on failure.
        #[arg(long, default_value = "twl-replay.json")]
        replay_out: PathBuf,
    },
    /// Generate and verify many instances, writing one CSV row each.
    Sweep {
        /// JSON sweep configuration (defaults when absent).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV, `-` for stdout.
        #[arg(long)]
        out_csv: PathBuf,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    Instance::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn json_text(arg: &str) -> anyhow::Result<String> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        Ok(arg.to_string())
    } else {
        read(Path::new(arg))
    }
}

fn load_function(inst: &Instance, arg: &str) -> anyhow::Result<StepFunction> {
    let grid = *inst.grid();
    if arg == "one" {
        return Ok(StepFunction::constant(grid, 1.0));
    }
    let value: Value = serde_json::from_str(&json_text(arg)?).context("parsing --f")?;
    let values = match value {
        Value::Object(mut map) => map
            .remove("values")
            .context("--f object needs a \"values\" array")?,
        v => v,
    };
    let values: Vec<f64> = serde_json::from_value(values).context("--f values must be numbers")?;
    let f = StepFunction::new(grid, values)?;
    inst.check_function(&f)?;
    Ok(f)
}

fn load_family(inst: &Instance, arg: &str) -> anyhow::Result<ComponentFamily> {
    if arg == "one" {
        let grid = *inst.grid();
        let mut g = ComponentFamily::empty(grid);
        for m in inst.members() {
            g.insert(m.cube.clone(), StepFunction::indicator(grid, &m.cube)?)?;
        }
        return Ok(g);
    }
    let raw: ComponentFamilyJson =
        serde_json::from_str(&json_text(arg)?).context("parsing component family")?;
    Ok(ComponentFamily::from_json_value(*inst.grid(), raw)?)
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Runs a subcommand; `Ok(false)` means an invariant failed.
fn run(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Gen {
            seed,
            index,
            depth,
            dim,
            profile,
            p,
            r,
            q,
            density,
            out,
        } => {
            let config = SweepConfig {
                seed,
                depth_range: [depth, depth],
                dimension: dim,
                exponent_grid: vec![[p, r, q]],
                weight_profile: profile.parse::<WeightProfile>()?,
                density,
                ..SweepConfig::default()
            };
            let inst = harness::gen_instance(&config, index)?;
            let text = inst.to_json_pretty();
            match out {
                Some(path) => fs::write(&path, text + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
            Ok(true)
        }
        Command::Eval {
            instance,
            f,
            op,
            weight,
        } => {
            let inst = load_instance(&instance)?;
            let value = match op {
                Op::T => {
                    let f = load_function(&inst, &f)?;
                    json!({"op": "T", "family": apply_t(&inst, &f)?.to_json_value()})
                }
                Op::Tbar => {
                    let f = load_function(&inst, &f)?;
                    json!({"op": "Tbar", "values": apply_tbar(&inst, &f)?.values()})
                }
                Op::U => {
                    let g = load_family(&inst, &f)?;
                    json!({"op": "U", "values": apply_u(&inst, &g)?.values()})
                }
                Op::M => {
                    let f = load_function(&inst, &f)?;
                    let omega = match weight {
                        WeightArg::Sigma => inst.sigma().clone(),
                        WeightArg::W => inst.w().clone(),
                        WeightArg::Lebesgue => Weight::lebesgue(*inst.grid()),
                    };
                    json!({"op": "M", "values": maximal_function(&f, &omega)?.values()})
                }
            };
            print_json(&value)?;
            Ok(true)
        }
        Command::Constants {
            instance,
            carleson,
            q1,
            oracle,
            seed,
        } => {
            let inst = load_instance(&instance)?;
            let l_star = compute_l_star(&inst);
            let l = compute_l(
                &inst,
                &OptimizerConfig {
                    seed,
                    oracle,
                    ..OptimizerConfig::default()
                },
            );
            let carleson = if carleson {
                match carleson_constant(&inst) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        eprintln!("carleson: {e}");
                        None
                    }
                }
            } else {
                None
            };
            let lsu = q1.then(|| lsu_constants(&inst));
            print_json(&json!({
                "L": l.value,
                "L_star": l_star.value,
                "L_witness": l.witness_cube,
                "L_star_witness": l_star.witness_cube,
                "converged": l.trace.converged,
                "lower_bound_only": l.lower_bound_only,
                "carleson": carleson,
                "lsu": lsu,
            }))?;
            Ok(true)
        }
        Command::Opnorm {
            instance,
            oracle,
            resolution,
            seed,
        } => {
            let inst = load_instance(&instance)?;
            let est = if oracle {
                opnorm_bruteforce(&inst, resolution)?
            } else {
                let l_star = compute_l_star(&inst);
                let l = compute_l(
                    &inst,
                    &OptimizerConfig {
                        seed,
                        ..OptimizerConfig::default()
                    },
                );
                let config = AscentConfig {
                    seed,
                    upper_constant: Some(SuiteConstants::default().c_eq),
                    ..AscentConfig::default()
                };
                opnorm_ascent(&inst, &config, Some(&l), Some(&l_star))
            };
            print_json(&json!({
                "lower_bound": est.lower_bound,
                "upper_bound": if est.upper_bound.is_finite() { json!(est.upper_bound) } else { json!("inf") },
                "witness": est.witness_f.values(),
                "method": est.method.as_str(),
                "converged": est.converged,
            }))?;
            Ok(true)
        }
        Command::Decompose { instance, f, eta } => {
            let inst = load_instance(&instance)?;
            let f = load_function(&inst, &f)?;
            let d = decompose(&inst, &f, eta)?;
            let levels: Vec<Value> = d
                .classified
                .iter()
                .map(|level| {
                    let k = level.k;
                    let whitney = d.levels.family(k).map(|fam| fam.cubes.clone()).unwrap_or_default();
                    json!({
                        "k": k,
                        "omega_cells": d.levels.omega(k).iter().collect::<Vec<_>>(),
                        "whitney_cubes": whitney,
                        "E_k": level.e_k.values().collect::<Vec<_>>(),
                        "classes": level.cubes.iter().map(|c| json!({"cube": c.cube, "class": c.class})).collect::<Vec<_>>(),
                        "alpha": level.cubes.iter().map(|c| c.alpha).collect::<Vec<_>>(),
                        "beta": level.cubes.iter().map(|c| c.beta).collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(&json!({
                "tbar": d.levels.tbar.values(),
                "window": d.levels.window,
                "eta": eta,
                "levels": levels,
                "max_occurrence": d.occurrences.max_count(),
                "occurrence_bound": SuiteConstants::c_occ(eta),
            }))?;
            Ok(true)
        }
        Command::Corona {
            instance,
            f,
            eta,
            residue,
            from_collection,
        } => {
            let inst = load_instance(&instance)?;
            let f = load_function(&inst, &f)?;
            let input = if from_collection {
                inst.members().iter().map(|m| m.cube.clone()).collect()
            } else {
                decompose(&inst, &f, eta)?.corona_input(residue.rem_euclid(3))
            };
            let family = corona(&inst, &f, input)?;
            let check = corona_check(&inst, &f, &family);
            let sum = corona_carleson_sum(&inst, &f, &family);
            print_json(&json!({
                "principal_cubes": family.principal_cubes,
                "gamma": family.gamma.iter().collect::<Vec<_>>(),
                "carleson_lhs": sum.lhs,
                "carleson_rhs": sum.rhs,
                "carleson_bound": SuiteConstants::c_corona(inst.r()),
                "check": check,
            }))?;
            Ok(check.pass() && sum.lhs <= SuiteConstants::c_corona(inst.r()) * sum.rhs)
        }
        Command::Verify {
            instance,
            eta,
            seed,
            json: as_json,
            replay_out,
        } => {
            let text = read(&instance)?;
            let raw: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", instance.display()))?;
            let (inst, opts) = if raw.get("instance").is_some() {
                let replay: Replay = serde_json::from_value(raw).context("parsing replay file")?;
                (replay.instance.into_instance()?, replay.options)
            } else {
                let opts = VerifyOptions {
                    eta,
                    seed,
                    ..VerifyOptions::default()
                };
                (Instance::from_json(&text)?, opts)
            };
            let report = harness::run_verify(&inst, &opts)?;
            if as_json {
                print_json(&report)?;
            } else {
                print!("{}", report.table());
                println!(
                    "L={} L_star={} opnorm_lb={} ({}) ratio={} max_cR={}",
                    report.l,
                    report.l_star,
                    report.opnorm_lb,
                    report.opnorm_method.as_str(),
                    report.ratio,
                    report.max_occurrence
                );
                for f in &report.failures {
                    println!("failure: {f:?}");
                }
            }
            let pass = report.pass();
            if !pass {
                let replay = harness::replay(&inst, &opts, &report);
                fs::write(&replay_out, serde_json::to_string_pretty(&replay)? + "\n")
                    .with_context(|| format!("writing {}", replay_out.display()))?;
                eprintln!("replay written to {}", replay_out.display());
            }
            Ok(pass)
        }
        Command::Sweep { config, out_csv } => {
            let config: SweepConfig = match config {
                Some(path) => serde_json::from_str(&read(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => SweepConfig::default(),
            };
            let summary = if out_csv.as_os_str() == "-" {
                harness::run_sweep(&config, io::stdout().lock())?
            } else {
                let file = fs::File::create(&out_csv)
                    .with_context(|| format!("creating {}", out_csv.display()))?;
                harness::run_sweep(&config, io::BufWriter::new(file))?
            };
            eprintln!("{}", serde_json::to_string(&summary)?);
            Ok(summary.failures == 0)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("TWL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("TWL_THREADS must be a positive integer, got {raw:?}"))?;
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        bail!("configuring {threads} threads: {e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let outcome = configure_threads().and_then(|()| run(cli.command));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
