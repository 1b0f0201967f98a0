use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use lisee::harness::{aggregate, emit_outputs, run_scenario, Scenario, SweepAxis};
use lisee::solver::{alternating_ee_max, exhaustive_search};
use lisee::{sample_channels, SystemConfig};

#[derive(Parser)]
#[command(name = "lisee", version, about = "Energy-efficiency experiments for surface-assisted multi-user downlinks")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the scenario's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { scenario: PathBuf },
    /// Run a scenario file with its sweep replaced.
    Sweep {
        scenario: PathBuf,
        /// p (budget, dBm), n (elements) or snr (dB).
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Compare alternating optimization with exhaustive search on small
    /// 1-bit instances and print the relative gaps.
    OracleCheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 4, 6, 8])]
        n: Vec<usize>,
        /// Transmit budget in dBm.
        #[arg(long, default_value_t = 20.0)]
        p_budget_dbm: f64,
    },
}

fn execute(mut scenario: Scenario, cli: &Cli) -> Result<()> {
    if let Some(seed) = cli.seed {
        scenario.master_seed = seed;
        scenario.source.insert("master_seed".into(), seed.to_string());
    }
    let rows = run_scenario(&scenario, cli.workers)?;
    let aggregates = aggregate(&rows);
    let paths = emit_outputs(&scenario, &rows, &aggregates, &cli.out)?;
    for a in &aggregates {
        println!(
            "{:<16} {:>8} ee {:.6e} +- {:.2e}  rate {:.4}  feasible {:.2}",
            a.method, a.sweep, a.mean_ee, a.stderr_ee, a.mean_rate, a.feas_rate
        );
    }
    println!("wrote {}", paths.raw.parent().unwrap_or(&cli.out).display());
    Ok(())
}

fn oracle_check(instances: usize, ns: &[usize], p_budget_dbm: f64, seed: u64) -> Result<()> {
    let mut gaps = Vec::new();
    for &n in ns {
        let mut cfg = SystemConfig::new(2, 2, n);
        cfg.p_budget = lisee::units::dbm_to_watts(p_budget_dbm);
        cfg.p_c = lisee::units::dbm_to_watts(20.0);
        for i in 0..instances {
            let s = lisee::seed::mix_seed(seed, n as u64, i as u64);
            let channels = sample_channels(&cfg, s)?;
            let (alt, _) = alternating_ee_max(&channels, &cfg, s)?;
            let ex = exhaustive_search(&channels, &cfg)?;
            if !ex.feasible {
                continue;
            }
            if alt.ee > ex.ee + 1e-9 {
                anyhow::bail!("N={n} instance {i}: alternating EE {} exceeds exhaustive {}", alt.ee, ex.ee);
            }
            gaps.push((ex.ee - alt.ee) / ex.ee);
        }
    }
    if gaps.is_empty() {
        anyhow::bail!("no feasible instances");
    }
    gaps.sort_by(f64::total_cmp);
    println!("instances {}", gaps.len());
    println!("median relative gap {:.4e}", gaps[gaps.len() / 2]);
    println!("max relative gap {:.4e}", gaps[gaps.len() - 1]);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { scenario } => {
            let s = Scenario::from_file(scenario).with_context(|| format!("loading {}", scenario.display()))?;
            execute(s, &cli)
        }
        Command::Sweep { scenario, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let s = Scenario::from_file(scenario)
                .with_context(|| format!("loading {}", scenario.display()))?
                .with_sweep(axis, values.clone())?;
            execute(s, &cli)
        }
        Command::OracleCheck {
            instances,
            n,
            p_budget_dbm,
        } => oracle_check(*instances, n, *p_budget_dbm, cli.seed.unwrap_or(0)),
    }
}
