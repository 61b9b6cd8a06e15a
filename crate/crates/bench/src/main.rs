use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mocc_bench::config::{load_config, ControllerKind, Scenario};
use mocc_bench::run::{self, Overrides};

/// Mixed-objective compensating control: synthesis, verification,
/// benchmarking and tuning from a TOML scenario file.
#[derive(Debug, Parser)]
#[command(name = "mocc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file.
    config: PathBuf,
    /// Integration step.
    #[arg(long)]
    h: Option<f64>,
    /// Horizon in seconds.
    #[arg(long = "T", id = "t_end")]
    t_end: Option<f64>,
    /// Gain factor of the compensator.
    #[arg(long)]
    alpha: Option<f64>,
    /// Robust attenuation level for MOCC and H∞ tracking.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let mut sc = load_config(&self.config)?;
        Overrides { h: self.h, t_end: self.t_end, alpha: self.alpha, gamma: self.gamma }.apply(&mut sc)?;
        Ok(sc)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the nominal, robust and compensator gains.
    Synthesize(Common),
    /// Check that the composite at alpha = 1 equals the robust controller.
    VerifyQ(Common),
    /// Closed-loop norms, alpha sweep and power splits.
    Analyze(Common),
    /// Simulate one controller against one disturbance.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: String,
        #[arg(long)]
        disturbance: String,
    },
    /// Every controller against every disturbance.
    Benchmark(Common),
    /// Extremum-seeking tuning of alpha.
    TuneAlpha(Common),
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// A closed pipe on stdout is not an error.
fn quiet_pipe(r: std::io::Result<()>) -> Result<()> {
    match r {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    quiet_pipe(writeln!(std::io::stdout().lock(), "{text}"))
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Synthesize(c) => {
            let sc = c.scenario()?;
            let s = run::synthesize(&sc)?;
            write_json(&c.out_dir()?.join("synthesis.json"), &s)?;
            print_json(&s)?;
            Ok(true)
        }
        Command::VerifyQ(c) => {
            let sc = c.scenario()?;
            let v = run::verify_q(&sc)?;
            write_json(&c.out_dir()?.join("verify_q.json"), &v)?;
            print_json(&v)?;
            Ok(v.passes)
        }
        Command::Analyze(c) => {
            let sc = c.scenario()?;
            let a = run::analyze(&sc)?;
            write_json(&c.out_dir()?.join("analysis.json"), &a)?;
            print_json(&a)?;
            Ok(a.norms.iter().all(|n| n.error.is_none()) && a.power.iter().all(|p| p.error.is_none()))
        }
        Command::Simulate { common, controller, disturbance } => {
            let sc = common.scenario()?;
            let kind = ControllerKind::parse(&controller).ok_or_else(|| anyhow!("unknown controller `{controller}`"))?;
            let path = common.out_dir()?.join(format!("trace_{}_{disturbance}.csv", kind.label()));
            let (cost, measured) = run::simulate_one(&sc, kind, &disturbance, &path)?;
            let mut o = std::io::stdout().lock();
            quiet_pipe(writeln!(o, "controller={} disturbance={disturbance} cost={cost} measured_cost={measured}", kind.label()))?;
            quiet_pipe(writeln!(o, "trace written to {}", path.display()))?;
            Ok(true)
        }
        Command::Benchmark(c) => {
            let sc = c.scenario()?;
            let dir = c.out_dir()?;
            let start = Instant::now();
            let report = run::run_benchmark(&sc, Some(dir));
            run::write_report(&report, dir)?;
            quiet_pipe(report.write_csv(std::io::stdout().lock()))?;
            for row in &report.rows {
                if let Some(e) = &row.error {
                    eprintln!("{}: {e}", row.controller);
                }
                for cell in row.cells.iter().filter(|c| c.error.is_some()) {
                    eprintln!("{} / {}: {}", row.controller, cell.disturbance, cell.error.as_deref().unwrap_or_default());
                }
            }
            eprintln!("benchmark finished in {:.1} s", start.elapsed().as_secs_f64());
            Ok(report.complete())
        }
        Command::TuneAlpha(c) => {
            let sc = c.scenario()?;
            let (trace, summary) = run::tune(&sc)?;
            let dir = c.out_dir()?;
            let path = dir.join("tune_trace.csv");
            trace.write_csv(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))?;
            write_json(&dir.join("tune_summary.json"), &summary)?;
            print_json(&summary)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
