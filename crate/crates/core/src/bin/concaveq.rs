use clap::{Parser, Subcommand};
use concaveq::harness::{self, GradcheckOptions, LabConfig, RunConfig, EXIT_FAILURE, EXIT_OK};
use concaveq::learner::Ablation;
use concaveq::nets::MixerKind;
use concaveq::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    version,
    about = "Concave value factorization: training, evaluation, theory lab, gradient checks"
)]
struct Cli {
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a TOML run config.
    Train {
        config: PathBuf,
        #[command(flatten)]
        ablation: AblationArgs,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 32)]
        episodes: usize,
    },
    /// Recovery curve and envelope fuzz from a TOML lab config.
    Lab { config: PathBuf },
    /// Central-difference check of every network and the composite loss.
    Gradcheck,
}

/// Ablation overrides applied on top of the config file.
#[derive(clap::Args)]
struct AblationArgs {
    #[arg(long, value_parser = ["concave", "monotonic"])]
    mixer: Option<String>,
    /// Greedy initialization only, no coordinate ascent.
    #[arg(long)]
    no_iter: bool,
    /// Freeze the policy networks and act from utilities.
    #[arg(long)]
    no_policy: bool,
    /// Build targets from the target concave mixer instead of the central estimator.
    #[arg(long)]
    no_qstar: bool,
}

impl AblationArgs {
    fn apply(&self, a: &mut Ablation) {
        match self.mixer.as_deref() {
            Some("monotonic") => a.mixer = MixerKind::Monotonic,
            Some("concave") => a.mixer = MixerKind::Concave,
            _ => {}
        }
        a.iter_selection &= !self.no_iter;
        a.soft_policy &= !self.no_policy;
        a.central_qstar &= !self.no_qstar;
    }
}

fn train(cli: &Cli, path: &Path, ablation: &AblationArgs) -> Result<i32> {
    let mut cfg = RunConfig::load(path)?;
    ablation.apply(&mut cfg.ablation);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    cfg.out_dir = out.display().to_string();
    let run = harness::train(&cfg, &out)?;
    println!("{}", serde_json::to_string(&run.final_eval)?);
    eprintln!("run written to {}", run.out_dir.display());
    Ok(EXIT_OK)
}

fn eval(cli: &Cli, path: &Path, episodes: usize) -> Result<i32> {
    let summary = harness::evaluate_checkpoint(path, episodes, cli.seed.unwrap_or(0))?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(EXIT_OK)
}

fn lab(cli: &Cli, path: &Path) -> Result<i32> {
    let mut cfg = LabConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let outcome = harness::run_lab(&cfg, &out)?;
    println!("{}", concaveq::theorylab::CurveRow::CSV_HEADER);
    for row in &outcome.rows {
        println!("{}", row.csv());
    }
    println!(
        "envelope: {} sequences, {} failures",
        outcome.envelope.trials, outcome.envelope.failures
    );
    Ok(if outcome.envelope.failures == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn gradcheck(cli: &Cli) -> Result<i32> {
    let opts = GradcheckOptions {
        seed: cli.seed.unwrap_or(0),
        ..GradcheckOptions::default()
    };
    let suite = harness::run_gradcheck(&opts)?;
    for c in &suite.checks {
        for t in &c.report.tensors {
            println!("{:<10} {:<28} {:.3e}", c.network, t.name, t.max_rel_error);
        }
    }
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        let rows: Vec<_> = suite
            .checks
            .iter()
            .flat_map(|c| {
                c.report
                    .tensors
                    .iter()
                    .map(move |t| (&c.network, &t.name, t.max_rel_error))
            })
            .collect();
        std::fs::write(
            dir.join("gradcheck.json"),
            serde_json::to_string_pretty(&rows)?,
        )?;
    }
    let failures = suite.failures();
    for (network, tensor, err) in &failures {
        eprintln!(
            "gradcheck failed: {network} {tensor} relative error {err:.3e} > {:.0e}",
            suite.tolerance
        );
    }
    Ok(if failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { config, ablation } => train(&cli, config, ablation),
        Command::Eval {
            checkpoint,
            episodes,
        } => eval(&cli, checkpoint, *episodes),
        Command::Lab { config } => lab(&cli, config),
        Command::Gradcheck => gradcheck(&cli),
    };
    let code = result.unwrap_or_else(|e: Error| {
        eprintln!("error: {e}");
        harness::exit_code(&e)
    });
    ExitCode::from(code as u8)
}
