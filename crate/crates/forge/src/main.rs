use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ebt_cage::agents::TreeVariant;
use ebt_forge::config::{
    DefenderSpec, ExperimentConfig, FireEvalParams, GpParams, Params, RedKind, SwitchParams, TraceEnv, TraceParams,
    TreeSpec,
};
use ebt_forge::{init_threads, run, ForgeError};

#[derive(Parser)]
#[command(name = "ebt-forge", version, about = "Run evolved behavior tree experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; there is no wall-clock fallback.
    #[arg(long)]
    seed: u64,
    /// JSON experiment config; flags given here override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (a file for `trace`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve firefighter trees with GP.
    GpRun {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pop: Option<usize>,
        #[arg(long)]
        gens: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        cv: Option<f64>,
        #[arg(long)]
        cl: Option<f64>,
        #[arg(long)]
        cf: Option<f64>,
    },
    /// Compare baseline, expert and optionally a GP genome on fresh instances.
    FfEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        /// Extra genome to evaluate, in s-expression text.
        #[arg(long)]
        genome: Option<String>,
    },
    /// Evaluate the three defender variants against RedSwitch.
    SwitchEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        train_episodes: Option<usize>,
        /// Load detector weights instead of training.
        #[arg(long)]
        detector: Option<PathBuf>,
    },
    /// Write a single-episode trace.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["firefighter", "netsim"])]
        env: Option<String>,
        /// baseline, expert, or genome text (firefighter).
        #[arg(long)]
        tree: Option<String>,
        #[arg(long, value_parser = ["sleep", "cardiff-like", "oracle-switch", "learned-switch"])]
        defender: Option<String>,
        #[arg(long, value_parser = ["meander", "bline", "red-switch"])]
        red: Option<String>,
        #[arg(long)]
        detector: Option<PathBuf>,
    },
}

fn base_config(common: &Common, default: Params) -> Result<ExperimentConfig, ForgeError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if std::mem::discriminant(&cfg.params) != std::mem::discriminant(&default) {
                return Err(ForgeError::Config(format!(
                    "{} describes a {} experiment, expected {}",
                    path.display(),
                    cfg.params.name(),
                    default.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig {
            seed: common.seed,
            out: None,
            params: default,
        },
    };
    cfg.seed = common.seed;
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn build(cmd: Command) -> Result<ExperimentConfig, ForgeError> {
    match cmd {
        Command::GpRun {
            common,
            pop,
            gens,
            trials,
            episodes,
            cv,
            cl,
            cf,
        } => {
            let mut cfg = base_config(&common, Params::GpTraining(GpParams::default()))?;
            if let Params::GpTraining(p) = &mut cfg.params {
                set(&mut p.population, pop);
                set(&mut p.generations, gens);
                set(&mut p.trials, trials);
                set(&mut p.episodes_per_eval, episodes);
                set(&mut p.coefficients.cv, cv);
                set(&mut p.coefficients.cl, cl);
                set(&mut p.coefficients.cf, cf);
            }
            Ok(cfg)
        }
        Command::FfEval {
            common,
            episodes,
            genome,
        } => {
            let mut cfg = base_config(&common, Params::FirefighterEval(FireEvalParams::default()))?;
            if let Params::FirefighterEval(p) = &mut cfg.params {
                set(&mut p.episodes, episodes);
                if let Some(g) = genome {
                    p.trees.push(TreeSpec::Genome(g));
                }
            }
            Ok(cfg)
        }
        Command::SwitchEval {
            common,
            episodes,
            train_episodes,
            detector,
        } => {
            let mut cfg = base_config(&common, Params::StrategySwitchEval(SwitchParams::default()))?;
            if let Params::StrategySwitchEval(p) = &mut cfg.params {
                set(&mut p.episodes, episodes);
                set(&mut p.training_episodes, train_episodes);
                if detector.is_some() {
                    p.detector = detector;
                }
            }
            Ok(cfg)
        }
        Command::Trace {
            common,
            env,
            tree,
            defender,
            red,
            detector,
        } => {
            let mut cfg = base_config(&common, Params::Trace(TraceParams::default()))?;
            if let Params::Trace(p) = &mut cfg.params {
                match env.as_deref() {
                    Some("firefighter") => p.env = TraceEnv::Firefighter,
                    Some("netsim") => p.env = TraceEnv::Netsim,
                    _ => {}
                }
                set(
                    &mut p.tree,
                    tree.map(|t| match t.as_str() {
                        "baseline" => TreeSpec::Baseline,
                        "expert" => TreeSpec::Expert,
                        _ => TreeSpec::Genome(t),
                    }),
                );
                set(
                    &mut p.defender,
                    defender.map(|d| match d.as_str() {
                        "sleep" => DefenderSpec::Sleep,
                        "cardiff-like" => DefenderSpec::CardiffLike,
                        "oracle-switch" => DefenderSpec::OracleSwitch,
                        _ => DefenderSpec::LearnedSwitch,
                    }),
                );
                set(
                    &mut p.red,
                    red.map(|r| match r.as_str() {
                        "meander" => RedKind::Meander,
                        "bline" => RedKind::Bline,
                        _ => RedKind::RedSwitch,
                    }),
                );
                if detector.is_some() {
                    p.detector = detector;
                }
            }
            Ok(cfg)
        }
    }
}

fn summarize(cfg: &ExperimentConfig) {
    if let Params::StrategySwitchEval(p) = &cfg.params {
        let names: Vec<&str> = p.variants.iter().map(|v: &TreeVariant| v.name()).collect();
        eprintln!("variants: {}", names.join(", "));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| build(cli.command)).and_then(|cfg| {
        summarize(&cfg);
        run(&cfg)
    });
    match result {
        Ok(files) => {
            for f in files.0 {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ebt-forge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
