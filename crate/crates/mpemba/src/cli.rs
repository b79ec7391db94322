//! Argument parsing and dispatch; `execute` is what the binary runs.

use crate::accept::{self, Criterion, SuiteOptions};
use crate::compare::compare_files;
use crate::config::{Engine, ExperimentConfig, Overrides};
use crate::engines;
use crate::error::{HarnessError, Result};
use crate::output::write_tables;
use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "mpemba", version, about = "Entanglement asymmetry in U(1) random circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key=value config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "INT")]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Statevector ensemble: quenched and annealed asymmetry.
    Exact,
    /// Haar-averaged replica network: annealed asymmetry and purities.
    Tn,
    /// Large-q Markov process: purity rate.
    Ssep,
    /// Closed-form series and envelope predictions.
    Mft,
    /// |<S+>|^2 decay and its fits.
    Opspread,
    /// Crossing times between trace files and the N_A^2 fit.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Run the acceptance suite.
    Accept {
        /// Run only these criteria.
        #[arg(long, value_name = "NAME")]
        only: Vec<String>,
        /// Print the criterion names and exit.
        #[arg(long)]
        list: bool,
    },
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(HarnessError::field("jobs", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().map_err(|e| HarnessError::Usage(e.to_string()))
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let engine = match &cli.command {
        Command::Exact => Some(Engine::Exact),
        Command::Tn => Some(Engine::Tn),
        Command::Ssep => Some(Engine::Ssep),
        Command::Mft => Some(Engine::Mft),
        Command::Opspread => Some(Engine::Opspread),
        _ => None,
    };
    let io = |e: std::io::Error| HarnessError::io("stdout", e);
    if let Some(engine) = engine {
        let ov = Overrides { file: cli.config.clone(), sets: cli.set.clone(), seed: cli.seed, out: cli.out.clone() };
        let cfg = ExperimentConfig::load(engine, &ov)?;
        let out = pool(cli.jobs)?.install(|| engines::run(&cfg))?;
        let written = write_tables(cfg.out_dir(), engine.as_str(), &cfg.entries(), &out.tables)?;
        for l in &out.summary {
            writeln!(stdout, "{l}").map_err(io)?;
        }
        writeln!(stdout, "wrote {} files to {}", written.len(), cfg.out_dir().display()).map_err(io)?;
        return Ok(());
    }
    match cli.command {
        Command::Compare { traces } => {
            let report = compare_files(&traces)?;
            write!(stdout, "{}", report.text()).map_err(io)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("out"));
            let inputs = vec![("inputs".to_string(), traces.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","))];
            write_tables(&dir, "compare", &inputs, &report.tables())?;
            Ok(())
        }
        Command::Accept { only, list } => {
            if list {
                for c in accept::ALL {
                    writeln!(stdout, "{}", c.name()).map_err(io)?;
                }
                return Ok(());
            }
            let mut criteria = Vec::new();
            for name in &only {
                criteria.push(Criterion::parse(name).ok_or_else(|| HarnessError::field("only", format!("unknown criterion `{name}`")))?);
            }
            if criteria.is_empty() {
                criteria = accept::ALL.to_vec();
            }
            let mut opts = SuiteOptions { jobs: cli.jobs, ..SuiteOptions::default() };
            if let Some(s) = cli.seed {
                opts.seed = s;
            }
            if let Some(o) = cli.out {
                opts.scratch = o;
            }
            let pool = pool(cli.jobs)?;
            let (tx, rx) = std::sync::mpsc::channel::<String>();
            let verdicts = std::thread::scope(|s| {
                let worker = s.spawn(move || {
                    pool.install(|| {
                        accept::run_suite(&criteria, &opts, |v| {
                            let _ = tx.send(v.line());
                        })
                    })
                });
                for line in rx {
                    let _ = writeln!(stdout, "{line}");
                    let _ = stdout.flush();
                }
                worker.join()
            })
            .map_err(|_| HarnessError::Usage("acceptance worker panicked".into()))?;
            let failed = verdicts.iter().filter(|v| !v.passed).count();
            if failed > 0 {
                return Err(HarnessError::Acceptance(failed));
            }
            Ok(())
        }
        _ => unreachable!("engine subcommands handled above"),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand);
            if shown && e.kind() != ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = write!(stderr, "{e}");
            return 1;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
