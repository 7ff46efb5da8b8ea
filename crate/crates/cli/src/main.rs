use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bintrack::estimator::DimensionSchedule;
use bintrack::harness::{
    map_runs, parse_seed_range, run_closed_loop_with, run_identification, write_run, ControlPolicy,
    ExperimentConfig, InputPolicy,
};
use bintrack::lti::{impulse_response, Polynomial};
use bintrack::recovery::recover;
use bintrack::reference::read_column;

#[derive(Parser)]
#[command(name = "bintrack", version, about = "Adaptive tracking under binary-valued observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed loop and write per-step CSV plus a JSON summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `oracle` drives the plant with the true impulse response.
        #[arg(long, value_enum, default_value_t = ControllerKind::Adaptive)]
        controller: ControllerKind,
    },
    /// Run the estimator alone on the open-loop plant.
    Identify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyKind::Dither)]
        policy: PolicyKind,
        /// Input column for `--policy file`.
        #[arg(long, required_if_eq("policy", "file"))]
        inputs: Option<PathBuf>,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Directory for `identify_<seed>.json`; reports go to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print `G_1 .. G_m` for `A(z)^{-1} B(z)`.
    Impulse {
        /// `1, a_1, .., a_p` as a comma list or a one-column file.
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        /// `b_1, .., b_q`, same formats.
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long)]
        m: usize,
    },
    /// Recover ARX coefficients from an impulse response.
    Recover {
        /// `G_1, G_2, ..` as a comma list or a one-column file.
        #[arg(long, allow_hyphen_values = true)]
        g: String,
        /// Number of `a` coefficients after the leading 1.
        #[arg(long)]
        p: usize,
        /// Number of `b` coefficients.
        #[arg(long)]
        q: usize,
    },
}

#[derive(clap::Args)]
struct SeedArgs {
    /// Overrides the config's seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Run every seed in `a..b` (or `a..=b`) in parallel.
    #[arg(long)]
    seeds: Option<String>,
}

impl SeedArgs {
    fn resolve(&self, cfg: &ExperimentConfig) -> Result<Vec<u64>> {
        match (&self.seeds, self.seed) {
            (Some(range), _) => parse_seed_range(range)
                .with_context(|| format!("bad seed range {range:?}, expected a..b or a..=b")),
            (None, Some(s)) => Ok(vec![s]),
            (None, None) => Ok(vec![cfg.seed]),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerKind {
    Adaptive,
    Oracle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    Dither,
    File,
}

/// A comma-separated list, or the path of a one-column file.
fn parse_values(arg: &str) -> Result<Vec<f64>> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(read_column(path)?);
    }
    arg.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("not a number: {s:?}")))
        .collect()
}

fn simulate(cfg: ExperimentConfig, seeds: Vec<u64>, out: Option<PathBuf>, kind: ControllerKind) -> Result<()> {
    let Some(out) = out.or_else(|| cfg.output.clone()) else {
        bail!("no output directory: pass --out or set `output` in the config");
    };
    let policy = match kind {
        ControllerKind::Adaptive => ControlPolicy::Adaptive,
        ControllerKind::Oracle => ControlPolicy::Oracle,
    };
    let dims = DimensionSchedule::new(cfg.estimator.a_exponent)?;
    let results = map_runs(&seeds, |seed| -> Result<String> {
        let run = run_closed_loop_with(&cfg.clone().with_seed(*seed), policy)
            .with_context(|| format!("seed {seed}"))?;
        let (csv, _) = write_run(&out, *seed, &run, &dims)?;
        let n = run.records.len();
        let last = &run.records[n - 1];
        Ok(format!(
            "seed {seed}: {} steps, J_n {:.6}, switches {}, wrote {}",
            n,
            last.cum_track_err / n as f64,
            run.switch_log.len(),
            csv.display()
        ))
    });
    report(results)
}

fn identify(cfg: ExperimentConfig, seeds: Vec<u64>, policy: InputPolicy, out: Option<PathBuf>) -> Result<()> {
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let results = map_runs(&seeds, |seed| -> Result<String> {
        let rep = run_identification(&cfg.clone().with_seed(*seed), &policy)
            .with_context(|| format!("seed {seed}"))?;
        let json = serde_json::to_string_pretty(&rep)?;
        match &out {
            Some(dir) => {
                let path = dir.join(format!("identify_{seed}.json"));
                std::fs::write(&path, json)?;
                Ok(format!("seed {seed}: wrote {}", path.display()))
            }
            None => Ok(json),
        }
    });
    report(results)
}

/// Prints successes in seed order; fails if any run failed.
fn report(results: Vec<Result<String>>) -> Result<()> {
    let mut failed = 0;
    for r in results {
        match r {
            Ok(line) => println!("{line}"),
            Err(e) => {
                failed += 1;
                eprintln!("error: {e:#}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} run(s) failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            seeds,
            out,
            controller,
        } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let seeds = seeds.resolve(&cfg)?;
            simulate(cfg, seeds, out, controller)
        }
        Command::Identify {
            config,
            policy,
            inputs,
            seeds,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let seeds = seeds.resolve(&cfg)?;
            let policy = match (policy, inputs) {
                (PolicyKind::Dither, _) => InputPolicy::Dither,
                (PolicyKind::File, Some(path)) => InputPolicy::File(path),
                (PolicyKind::File, None) => bail!("--policy file needs --inputs"),
            };
            identify(cfg, seeds, policy, out)
        }
        Command::Impulse { a, b, m } => {
            let a = Polynomial::new(parse_values(&a)?)?;
            let b = Polynomial::new(parse_values(&b)?)?;
            for g in impulse_response(&a, &b, m)?.coeffs {
                println!("{g}");
            }
            Ok(())
        }
        Command::Recover { g, p, q } => {
            let r = recover(&parse_values(&g)?, p, q)?;
            println!(
                "{}",
                serde_json::json!({
                    "a": r.a_coeffs,
                    "b": r.b_coeffs,
                    "residual": r.residual,
                    "condition": r.condition,
                })
            );
            Ok(())
        }
    }
}
