use std::path::PathBuf;
use std::process::ExitCode;

use bosonet::experiment::{self, ExperimentConfig, Overrides, PRESETS};
use bosonet::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bosonet", version, about = "Pulse synthesis and simulation for bosonic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize, verify, evolve and write all artifacts.
    Run(Common),
    /// Synthesize and verify only (pulses.json, residuals.json).
    Verify(Common),
    /// Repeat a run over values of one spec parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path into the resolved spec, e.g. schedule.f_multiplier.
        #[arg(long)]
        param: String,
        /// JSON array of values.
        #[arg(long, default_value = "[]")]
        values: String,
    },
    /// List the preset catalog.
    Presets {
        /// Print the config JSON Schema instead.
        #[arg(long)]
        schema: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    loops: Option<usize>,
    #[arg(long)]
    steps_per_stage: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.preset.is_some() {
            cfg.preset = self.preset.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        let o = &mut cfg.overrides;
        *o = Overrides {
            loops: self.loops.or(o.loops),
            steps_per_stage: self.steps_per_stage.or(o.steps_per_stage),
            tolerance: self.tolerance.or(o.tolerance),
            threads: self.threads.or(o.threads),
        };
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig, spec: &experiment::ExperimentSpec) -> PathBuf {
        // An explicit flag beats the environment.
        self.out.clone().unwrap_or_else(|| cfg.output_dir(spec))
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(experiment::exit_code(e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Presets { schema } => {
            if schema {
                println!("{}", serde_json::to_string_pretty(&experiment::config_schema()).unwrap());
            } else {
                for (name, about) in PRESETS {
                    println!("{name:<14} {about}");
                }
            }
            return ExitCode::SUCCESS;
        }
        Command::Run(c) => c.config().and_then(|cfg| {
            let spec = cfg.resolve()?;
            let out = c.out_dir(&cfg, &spec);
            let s = experiment::run(&spec, &out)?;
            for chk in &s.checks {
                let state = if chk.skipped { "SKIP" } else if chk.passed { "PASS" } else { "FAIL" };
                println!("{state} {} = {:.10} ({})", chk.name, chk.value, chk.target);
            }
            println!("max residual {:.3e}, max norm drift {:.3e}", s.max_residual, s.max_norm_drift);
            println!("artifacts in {}", out.display());
            if s.passed {
                Ok(())
            } else {
                Err(Error::Acceptance(format!("{} failed its acceptance checks", s.name)))
            }
        }),
        Command::Verify(c) => c.config().and_then(|cfg| {
            let spec = cfg.resolve()?;
            let out = c.out_dir(&cfg, &spec);
            let rep = experiment::verify(&spec, &out)?;
            for p in &rep.passages {
                println!("passage {}: max residual {:.3e} at t = {:.6}", p.k, p.max_residual, p.at);
            }
            if rep.passed {
                Ok(())
            } else {
                Err(Error::Acceptance(format!(
                    "residual {:.3e} above {:.1e}",
                    rep.max_residual, rep.residual_tol
                )))
            }
        }),
        Command::Sweep { common, param, values } => common.config().and_then(|cfg| {
            let spec = cfg.resolve()?;
            let out = common.out_dir(&cfg, &spec);
            let values: Vec<serde_json::Value> =
                serde_json::from_str(&values).map_err(|e| Error::Config(format!("--values: {e}")))?;
            let entries = experiment::sweep(&spec, &param, &values, &out, spec.options.threads)?;
            for e in &entries {
                println!("{} -> {} (exit {})", e.value, e.dir.display(), e.exit_code);
            }
            match entries.iter().map(|e| e.exit_code).max() {
                Some(code) if code != 0 => Err(match code {
                    3 => Error::Synthesis { t: f64::NAN, reason: "in sweep".into() },
                    4 => Error::Integration("in sweep".into()),
                    5 => Error::Acceptance("in sweep".into()),
                    _ => Error::Config("in sweep".into()),
                }),
                _ => Ok(()),
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
