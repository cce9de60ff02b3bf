use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use cdpr_core::config::{load_geometry, Config, CONFIG_ENV};
use cdpr_core::workspace::SamplerSpec;
use cdpr_service::commands::{fk_bench_report, replay_file, workspace_report};
use cdpr_service::{start, ServeOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cdpr",
    version,
    about = "Cable-driven teleoperation master: simulator and tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Main configuration file (TOML).
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Geometry file with frame and body anchors (TOML); the bundled rig
    /// when omitted.
    #[arg(long)]
    geometry: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> anyhow::Result<(Config, cdpr_core::CdprGeometry)> {
        let config = match &self.config {
            Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => Config::default(),
        };
        let geometry = load_geometry(self.geometry.as_deref()).context("loading geometry")?;
        Ok((config, geometry))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the real-time simulation service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        /// Seed for sensor noise and latency draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Minimum injected slave-command latency (ms).
        #[arg(long)]
        latency_min_ms: Option<f64>,
        /// Maximum injected slave-command latency (ms).
        #[arg(long)]
        latency_max_ms: Option<f64>,
        /// Write the trajectory record to this file.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Stop after this many seconds of simulated time.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Re-run a trajectory record and compare the output byte for byte.
    Replay {
        record: PathBuf,
        /// Replay with a different seed; the result is flagged as not
        /// comparable.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the regenerated record here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample the passive orientation over the workspace and fit the wall.
    Workspace {
        #[command(flatten)]
        common: Common,
        /// Grid points per axis.
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Use this many Monte Carlo samples instead of the grid.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of the frame extent covered by the samples.
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        /// Orientation threshold for the zero-orientation region (degrees).
        #[arg(long, default_value_t = 10.0)]
        threshold_deg: f64,
        /// Write per-sample results (whitespace-separated columns).
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Forward-kinematics round-trip statistics over random poses.
    FkBench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Per-cable Gaussian length noise (mm).
        #[arg(long, default_value_t = 1.0)]
        noise_mm: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve {
            common,
            host,
            port,
            seed,
            latency_min_ms,
            latency_max_ms,
            record,
            duration,
        } => {
            let (mut config, geometry) = common.load()?;
            if let Some(v) = latency_min_ms {
                config.sim.latency_min = v / 1e3;
            }
            if let Some(v) = latency_max_ms {
                config.sim.latency_max = v / 1e3;
            }
            config.validate()?;
            let max_ticks = duration.map(|d| (d / config.sim.dt).round() as u64);
            let opts = ServeOptions {
                addr: format!("{host}:{port}"),
                config,
                geometry,
                seed,
                record,
                max_ticks,
            };
            let rt = tokio::runtime::Runtime::new()?;
            let summary = rt.block_on(async move {
                let server = start(opts).await?;
                println!("listening on ws://{}/{{left,right}}", server.local_addr());
                let stop = server.stopper();
                tokio::spawn(async move {
                    if tokio::signal::ctrl_c().await.is_ok() {
                        let _ = stop.send(true);
                    }
                });
                server.wait().await
            })?;
            println!(
                "{} ticks, mean {:.1} us, max {:.1} us per tick",
                summary.ticks, summary.mean_tick_micros, summary.max_tick_micros
            );
            if let Some(p) = summary.record {
                println!("record written to {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { record, seed, output } => {
            let outcome = replay_file(&record, seed, output.as_deref())?;
            let ticks = outcome.record.ticks.len();
            if !outcome.comparable {
                println!(
                    "replayed {ticks} ticks with seed {}: not comparable to the recorded seed {}",
                    outcome.record.header.seed,
                    cdpr_core::sim::record::TrajectoryRecord::load(&record)?.header.seed
                );
                return Ok(ExitCode::SUCCESS);
            }
            if outcome.identical {
                println!("replayed {ticks} ticks: identical");
                Ok(ExitCode::SUCCESS)
            } else {
                match outcome.first_difference {
                    Some(line) => println!("replayed {ticks} ticks: first difference at line {line}"),
                    None => println!("replayed {ticks} ticks: output differs from the file"),
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Workspace {
            common,
            grid,
            samples,
            seed,
            fraction,
            threshold_deg,
            dump,
        } => {
            let (config, geometry) = common.load()?;
            let spec = match samples {
                Some(count) => SamplerSpec::MonteCarlo { count, fraction, seed },
                None => SamplerSpec::Grid {
                    per_axis: grid,
                    fraction,
                },
            };
            if !(threshold_deg > 0.0 && threshold_deg < 90.0) {
                bail!("threshold must lie in (0, 90) degrees");
            }
            let report = workspace_report(&config, &geometry, &spec, threshold_deg, dump.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::FkBench {
            common,
            trials,
            noise_mm,
            seed,
        } => {
            let (config, geometry) = common.load()?;
            let report = fk_bench_report(&config, &geometry, trials, noise_mm / 1e3, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
