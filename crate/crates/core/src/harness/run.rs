//! Seeded Monte-Carlo execution of a scenario.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{Allocation, Method, Scenario};
use crate::channel::{sample_channels, ChannelSet};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::SolveReport;
use crate::seed::mix_seed;
use crate::solver::{alternating_ee_max, exhaustive_search, max_rate_power_fill, relay_baseline, Link};

/// One method on one channel draw. Infeasible and failed runs carry zero
/// EE, rate and power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub sweep_index: usize,
    pub sweep: f64,
    pub trial: usize,
    pub seed: u64,
    pub ee: f64,
    pub sum_rate: f64,
    pub total_power: f64,
    pub feasible: bool,
    pub iters: usize,
    pub wall_ms: f64,
    pub error: Option<String>,
}

/// Seed of the channel draw for one sweep point and trial.
pub fn trial_seed(master: u64, sweep_index: usize, trial: usize) -> u64 {
    mix_seed(master, sweep_index as u64, trial as u64)
}

/// Runs one method on given channels.
pub fn run_method(method: Method, channels: &ChannelSet, cfg: &SystemConfig, allocation: Allocation, seed: u64) -> Result<SolveReport> {
    let report = match method {
        Method::Lis(res) => alternating_ee_max(channels, &cfg.with_resolution(res), mix_seed(seed, u64::MAX, 0))?.0,
        Method::Exhaustive => exhaustive_search(channels, cfg)?,
        Method::Relay => relay_baseline(channels, cfg)?,
    };
    if allocation == Allocation::Ee || !report.feasible {
        return Ok(report);
    }
    let (link, cfg) = match method {
        Method::Relay => (Link::Relay, cfg.clone()),
        _ => (Link::Surface(&report.phases), cfg.with_resolution(report.phases.resolution)),
    };
    let problem = link.power_problem(channels, &cfg)?;
    let powers = max_rate_power_fill(channels, link, &cfg)?;
    Ok(SolveReport {
        ee: problem.energy_efficiency(&powers.p),
        sum_rate: problem.rate(&powers.p),
        total_power: problem.consumed(&powers.p),
        powers,
        ..report
    })
}

fn trial_rows(scenario: &Scenario, sweep_index: usize, trial: usize) -> Vec<ResultRow> {
    let seed = trial_seed(scenario.master_seed, sweep_index, trial);
    let sweep = scenario.values[sweep_index];
    let row = |method: Method, outcome: Result<SolveReport>, wall_ms: f64| {
        let (report, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => {
                log::warn!("{method} at sweep {sweep} trial {trial}: {e}");
                (None, Some(e.to_string()))
            }
        };
        ResultRow {
            method: method.to_string(),
            sweep_index,
            sweep,
            trial,
            seed,
            ee: report.as_ref().map_or(0.0, |r| r.ee),
            sum_rate: report.as_ref().map_or(0.0, |r| r.sum_rate),
            total_power: report.as_ref().map_or(0.0, |r| r.total_power),
            feasible: report.as_ref().is_some_and(|r| r.feasible),
            iters: report.as_ref().map_or(0, |r| r.outer_iterations),
            wall_ms,
            error,
        }
    };

    let setup = scenario
        .config_at(sweep_index)
        .and_then(|cfg| sample_channels(&cfg, seed).map(|ch| (cfg, ch)));
    let (cfg, channels) = match setup {
        Ok(x) => x,
        Err(e) => {
            return scenario
                .methods
                .iter()
                .map(|&m| row(m, Err(Error::Scenario(e.to_string())), 0.0))
                .collect()
        }
    };
    scenario
        .methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = run_method(method, &channels, &cfg, scenario.allocation, seed);
            row(method, outcome, start.elapsed().as_secs_f64() * 1e3)
        })
        .collect()
}

/// Runs every method on every (sweep point, trial) pair. All methods of a
/// pair share one channel draw. Rows are ordered by method (in scenario
/// order), sweep index and trial.
pub fn run_scenario(scenario: &Scenario, workers: Option<usize>) -> Result<Vec<ResultRow>> {
    scenario.validate()?;
    let jobs: Vec<(usize, usize)> = (0..scenario.values.len())
        .flat_map(|s| (0..scenario.trials).map(move |t| (s, t)))
        .collect();
    let run = || -> Vec<ResultRow> {
        jobs.par_iter()
            .flat_map_iter(|&(s, t)| trial_rows(scenario, s, t))
            .collect()
    };
    let mut rows = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Scenario(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let rank = |tag: &str| scenario.methods.iter().position(|m| m.to_string() == tag);
    rows.sort_by_key(|r| (rank(&r.method), r.sweep_index, r.trial));
    Ok(rows)
}
