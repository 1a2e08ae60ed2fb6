use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ncma::sim::{self, presets, ScenarioConfig, ThroughputRecord};

#[derive(Parser)]
#[command(
    name = "ncma",
    version,
    about = "Three-user rate-diverse NCMA uplink simulator"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fig4,
    Fig7,
    Exp,
}

#[derive(Subcommand)]
enum Cmd {
    /// Runs one scenario from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also writes per-slot decoder results for the first sweep point.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Slots covered by the trace.
        #[arg(long, default_value_t = 50)]
        trace_slots: u64,
    },
    /// Runs a built-in sweep.
    Sweep {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
        /// Overrides the preset's beacon count.
        #[arg(long)]
        beacons: Option<u64>,
    },
    /// Runs the reference cross-checks.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn print_summary(records: &[ThroughputRecord]) {
    for r in records {
        let t = r.plus_mac_bridge();
        eprintln!(
            "{:<20} C={:>5.1} dB  A={:.3} B={:.3} C={:.3} sys={:.3} [{:.3}, {:.3}]",
            r.mode.name(),
            r.snr_db[2],
            t.users[0].value,
            t.users[1].value,
            t.users[2].value,
            t.sys.value,
            t.sys.ci_low,
            t.sys.ci_high
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            trace,
            trace_slots,
        } => {
            let mut cfg = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let records = sim::run_scenario(&cfg)?;
            sim::emit_results(&records, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = trace {
                sim::emit_trace(&sim::trace_scenario(&cfg, 0, trace_slots)?, &path)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            print_summary(&records);
            Ok(())
        }
        Cmd::Sweep {
            preset,
            out,
            beacons,
        } => {
            let mut cfgs = match preset {
                Preset::Fig4 => presets::fig4(presets::DEFAULT_BEACONS_SIM),
                Preset::Fig7 => presets::fig7(presets::DEFAULT_BEACONS_SIM),
                Preset::Exp => presets::exp(presets::DEFAULT_BEACONS_EXP),
            };
            let mut records = Vec::new();
            for cfg in &mut cfgs {
                if let Some(b) = beacons {
                    cfg.n_beacons = b;
                }
                if let Some(seed) = cli.seed {
                    cfg.seed = seed;
                }
                let r = sim::run_scenario(cfg)?;
                print_summary(&r);
                records.extend(r);
            }
            sim::emit_results(&records, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Cmd::Oracle { seed } => {
            let seed = cli.seed.unwrap_or(seed);
            let report = sim::oracle_suite(seed);
            print!("{report}");
            if !report.passed() {
                bail!("oracle suite failed for seed {seed}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
