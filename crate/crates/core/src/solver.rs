//! Joint phase / power design: the alternating algorithm, the exhaustive
//! oracle over all discrete phase configurations, and the amplify-and-forward
//! relay baseline.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::{Resolution, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{column_norms_sq, grid_phase, zf_precoder, PhaseConfig, PowerAllocation, SolveReport};
use crate::phase::solve_phase_subproblem;
use crate::power::{qos_min_powers, PowerProblem};
use crate::seed::mix_seed;

/// How the BS signal reaches the users besides the direct path.
#[derive(Clone, Copy, Debug)]
pub enum Link<'a> {
    /// Surface with the given phases; consumes `N P_n(b)`.
    Surface(&'a PhaseConfig),
    /// Amplify-and-forward relay with fixed gain; consumes its transmit power.
    Relay,
}

/// `alpha H2 H1 + H`.
pub fn relay_channel(channels: &ChannelSet, alpha: f64) -> CMatrix {
    &channels.h2 * Complex64::new(alpha, 0.0) * &channels.h1 + &channels.h
}

impl Link<'_> {
    /// Power subproblem for this link: zero-forcing weights and static consumption.
    pub fn power_problem(&self, channels: &ChannelSet, cfg: &SystemConfig) -> Result<PowerProblem> {
        match self {
            Link::Surface(phases) => {
                let cfg = cfg.with_resolution(phases.resolution);
                PowerProblem::for_phases(channels, &phases.theta, &cfg)
            }
            Link::Relay => {
                channels.check_config(cfg)?;
                let g = zf_precoder(&relay_channel(channels, cfg.relay.alpha))?;
                Ok(PowerProblem {
                    weights: column_norms_sq(&g),
                    p_min: qos_min_powers(cfg),
                    mu: cfg.mu.clone(),
                    sigma2: cfg.sigma2,
                    budget: cfg.p_budget,
                    static_power: cfg.k as f64 * cfg.p_c + cfg.relay.tx_power,
                })
            }
        }
    }
}

/// Method label used in reports and output files.
pub fn surface_method_tag(resolution: Resolution) -> String {
    match resolution {
        Resolution::Bits(b) => format!("lis-{b}bit"),
        Resolution::Continuous => "lis-continuous".to_string(),
    }
}

pub const EXHAUSTIVE_TAG: &str = "exhaustive";
pub const RELAY_TAG: &str = "relay";

fn feasible_report(method: &str, problem: &PowerProblem, phases: PhaseConfig, powers: PowerAllocation, iterations: usize) -> SolveReport {
    SolveReport {
        ee: problem.energy_efficiency(&powers.p),
        sum_rate: problem.rate(&powers.p),
        total_power: problem.consumed(&powers.p),
        phases,
        powers,
        outer_iterations: iterations,
        feasible: true,
        method: method.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    Infeasible,
    IterationCap,
}

/// One outer iteration of the alternating algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternatingStep {
    pub phases: PhaseConfig,
    pub powers: PowerAllocation,
    pub ee: f64,
    /// `||Phi_l - Phi_{l-1}||^2`
    pub phase_change: f64,
    /// `||P_l - P_{l-1}||^2`
    pub power_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternatingTrace {
    pub steps: Vec<AlternatingStep>,
    pub termination: Termination,
}

fn phase_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (Complex64::from_polar(1.0, *x) - Complex64::from_polar(1.0, *y)).norm_sqr())
        .sum()
}

fn power_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Alternates the relaxed-and-quantized phase design with Dinkelbach power
/// allocation, starting from equal powers `P/K` and all-zero phases.
///
/// Stops when both squared changes drop below `epsilon`, at the outer
/// iteration cap, or when the phase step cannot meet the budget. Returns the
/// feasible iterate with the highest energy efficiency.
pub fn alternating_ee_max(channels: &ChannelSet, cfg: &SystemConfig, seed: u64) -> Result<(SolveReport, AlternatingTrace)> {
    cfg.validate()?;
    channels.check_config(cfg)?;
    let method = surface_method_tag(cfg.resolution);
    let mut powers = vec![cfg.p_budget / cfg.k as f64; cfg.k];
    let mut phases = PhaseConfig::zeros(cfg.n, cfg.resolution);
    let mut steps: Vec<AlternatingStep> = Vec::new();
    let mut best: Option<SolveReport> = None;
    let mut termination = Termination::IterationCap;

    for outer in 1..=cfg.caps.outer_iterations {
        let outcome = match solve_phase_subproblem(
            channels,
            &powers,
            cfg.resolution,
            &phases.theta,
            &cfg.phase_options,
            cfg.p_budget,
            mix_seed(seed, outer as u64, 0),
        ) {
            Ok(o) => o,
            Err(Error::OptimizationFailure(_)) => {
                termination = Termination::Infeasible;
                break;
            }
            Err(e) => return Err(e),
        };
        if !outcome.feasible {
            termination = Termination::Infeasible;
            break;
        }
        let next_phases = outcome.theta_quantized;
        let problem = match Link::Surface(&next_phases).power_problem(channels, cfg) {
            Ok(p) => p,
            Err(Error::Singular { .. }) => {
                termination = Termination::Infeasible;
                break;
            }
            Err(e) => return Err(e),
        };
        let next_powers = match problem.dinkelbach(cfg.epsilon, cfg.caps.dinkelbach_iterations) {
            Ok((p, _)) => p,
            Err(Error::Infeasible(_)) => {
                termination = Termination::Infeasible;
                break;
            }
            Err(e) => return Err(e),
        };

        let step = AlternatingStep {
            ee: problem.energy_efficiency(&next_powers.p),
            phase_change: phase_distance_sq(&next_phases.theta, &phases.theta),
            power_change: power_distance_sq(&next_powers.p, &powers),
            phases: next_phases.clone(),
            powers: next_powers.clone(),
        };
        let converged = step.phase_change < cfg.epsilon && step.power_change < cfg.epsilon;
        if best.as_ref().is_none_or(|b| step.ee > b.ee) {
            best = Some(feasible_report(&method, &problem, next_phases.clone(), next_powers.clone(), outer));
        }
        steps.push(step);
        phases = next_phases;
        powers = next_powers.p;
        if converged {
            termination = Termination::Converged;
            break;
        }
    }

    let mut report = match best {
        Some(r) => r,
        None => SolveReport::infeasible(&method, phases, cfg.k, steps.len()),
    };
    report.outer_iterations = steps.len().max(1);
    Ok((report, AlternatingTrace { steps, termination }))
}

/// Number of phase configurations exhaustive search would visit.
pub fn enumeration_size(cfg: &SystemConfig) -> Result<u128> {
    let levels = cfg
        .resolution
        .levels()
        .ok_or_else(|| Error::Domain("exhaustive search needs a finite phase resolution".into()))?;
    let n = u32::try_from(cfg.n).map_err(|_| Error::Domain("too many surface elements".into()))?;
    Ok((levels as u128).checked_pow(n).unwrap_or(u128::MAX))
}

fn phases_of_index(mut index: u64, levels: u64, n: usize, resolution: Resolution) -> PhaseConfig {
    let theta = (0..n)
        .map(|_| {
            let digit = index % levels;
            index /= levels;
            grid_phase(digit, levels)
        })
        .collect();
    PhaseConfig { theta, resolution }
}

/// Runs Dinkelbach on every discrete phase configuration whose QoS powers fit
/// the budget and keeps the most energy-efficient one. Ties go to the lowest
/// enumeration index. `outer_iterations` reports the number of candidates.
pub fn exhaustive_search(channels: &ChannelSet, cfg: &SystemConfig) -> Result<SolveReport> {
    cfg.validate()?;
    channels.check_config(cfg)?;
    let required = enumeration_size(cfg)?;
    if required > cfg.caps.enumeration {
        return Err(Error::EnumerationCap {
            required,
            cap: cfg.caps.enumeration,
        });
    }
    let count = u64::try_from(required).map_err(|_| Error::EnumerationCap {
        required,
        cap: cfg.caps.enumeration,
    })?;
    let levels = cfg.resolution.levels().expect("finite resolution checked above");

    let evaluate = |index: u64| -> Result<Option<(u64, SolveReport)>> {
        let phases = phases_of_index(index, levels, cfg.n, cfg.resolution);
        let problem = match Link::Surface(&phases).power_problem(channels, cfg) {
            Ok(p) => p,
            Err(Error::Singular { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !problem.is_feasible() {
            return Ok(None);
        }
        let (powers, _) = problem.dinkelbach(cfg.epsilon, cfg.caps.dinkelbach_iterations)?;
        Ok(Some((index, feasible_report(EXHAUSTIVE_TAG, &problem, phases, powers, 0))))
    };
    let better = |a: Option<(u64, SolveReport)>, b: Option<(u64, SolveReport)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.1.ee > a.1.ee || (b.1.ee == a.1.ee && b.0 < a.0) {
                Some(b)
            } else {
                Some(a)
            }
        }
    };
    let best = (0..count)
        .into_par_iter()
        .map(evaluate)
        .try_reduce(|| None, |a, b| Ok(better(a, b)))?;

    let count_usize = usize::try_from(count).unwrap_or(usize::MAX);
    Ok(match best {
        Some((_, mut report)) => {
            report.outer_iterations = count_usize;
            report
        }
        None => SolveReport::infeasible(EXHAUSTIVE_TAG, PhaseConfig::zeros(cfg.n, cfg.resolution), cfg.k, count_usize),
    })
}

/// Energy-efficient power allocation through a fixed-gain relay in place of
/// the surface. The relay's transmit power replaces `N P_n(b)` in the
/// consumption model. Reported phases are empty.
pub fn relay_baseline(channels: &ChannelSet, cfg: &SystemConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let problem = Link::Relay.power_problem(channels, cfg)?;
    let no_phases = PhaseConfig {
        theta: Vec::new(),
        resolution: Resolution::Continuous,
    };
    if !problem.is_feasible() {
        return Ok(SolveReport::infeasible(RELAY_TAG, no_phases, cfg.k, 1));
    }
    let (powers, _) = problem.dinkelbach(cfg.epsilon, cfg.caps.dinkelbach_iterations)?;
    Ok(feasible_report(RELAY_TAG, &problem, no_phases, powers, 1))
}

/// Sum-rate maximizing powers for a fixed link: the budget is filled by
/// water-filling over the zero-forcing weights, respecting the QoS minimums.
pub fn max_rate_power_fill(channels: &ChannelSet, link: Link<'_>, cfg: &SystemConfig) -> Result<PowerAllocation> {
    Ok(link.power_problem(channels, cfg)?.inner_solve(0.0)?.powers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_channels;
    use crate::model::energy_efficiency;
    use crate::power::dinkelbach;

    fn small_cfg(m: usize, k: usize, n: usize) -> SystemConfig {
        let mut cfg = SystemConfig::new(m, k, n);
        cfg.p_c = 0.1;
        cfg.p_budget = 0.1;
        cfg.sigma2 = 1e-3;
        cfg
    }

    #[test]
    fn exhaustive_candidate_counts() {
        let cfg = small_cfg(2, 1, 1);
        let ch = sample_channels(&cfg, 1).unwrap();
        assert_eq!(exhaustive_search(&ch, &cfg).unwrap().outer_iterations, 2);

        let cfg = small_cfg(2, 2, 2).with_resolution(Resolution::Bits(2));
        let ch = sample_channels(&cfg, 2).unwrap();
        let r = exhaustive_search(&ch, &cfg).unwrap();
        assert_eq!(r.outer_iterations, 16);
        // max over candidates does not depend on visiting order
        let levels = 4;
        let mut best = f64::NEG_INFINITY;
        for idx in (0..16u64).rev() {
            let phases = phases_of_index(idx, levels, 2, Resolution::Bits(2));
            if let Ok((p, _)) = dinkelbach(&ch, &phases.theta, &cfg) {
                best = best.max(Link::Surface(&phases).power_problem(&ch, &cfg).unwrap().energy_efficiency(&p.p));
            }
        }
        assert_eq!(r.ee, best);
    }

    #[test]
    fn exhaustive_cap_and_continuous() {
        let mut cfg = small_cfg(2, 2, 12);
        cfg.caps.enumeration = 1 << 10;
        let ch = sample_channels(&cfg, 3).unwrap();
        match exhaustive_search(&ch, &cfg) {
            Err(Error::EnumerationCap { required, cap }) => {
                assert_eq!(required, 4096);
                assert_eq!(cap, 1024);
            }
            other => panic!("{other:?}"),
        }
        let cfg = small_cfg(2, 2, 2).with_resolution(Resolution::Continuous);
        assert!(exhaustive_search(&sample_channels(&cfg, 3).unwrap(), &cfg).is_err());
    }

    #[test]
    fn exhaustive_monotone_in_budget() {
        let mut cfg = small_cfg(2, 2, 3);
        for seed in 0..5 {
            let ch = sample_channels(&cfg, seed).unwrap();
            cfg.p_budget = 0.01;
            let low = exhaustive_search(&ch, &cfg).unwrap();
            cfg.p_budget = 0.1;
            let high = exhaustive_search(&ch, &cfg).unwrap();
            assert!(high.ee >= low.ee - 1e-9 * low.ee, "seed {seed}");
        }
    }

    #[test]
    fn alternating_without_surface_is_direct_dinkelbach() {
        let cfg = small_cfg(3, 2, 4);
        let mut ch = sample_channels(&cfg, 5).unwrap();
        ch.h2 = CMatrix::zeros(2, 4);
        let (report, trace) = alternating_ee_max(&ch, &cfg, 1).unwrap();
        assert!(report.feasible);
        assert!(trace.steps.len() <= 2);
        assert_eq!(trace.termination, Termination::Converged);
        let (p, _) = dinkelbach(&ch, &[0.0; 4], &cfg).unwrap();
        assert_eq!(report.powers, p);
    }

    #[test]
    fn alternating_dominated_by_exhaustive() {
        let cfg = small_cfg(2, 2, 2);
        for seed in 0..10 {
            let ch = sample_channels(&cfg, 40 + seed).unwrap();
            let (alt, _) = alternating_ee_max(&ch, &cfg, seed).unwrap();
            let ex = exhaustive_search(&ch, &cfg).unwrap();
            assert!(alt.ee <= ex.ee + 1e-9, "seed {seed}: {} > {}", alt.ee, ex.ee);
        }
    }

    #[test]
    fn alternating_report_is_consistent() {
        let cfg = small_cfg(4, 2, 6).with_resolution(Resolution::Bits(2));
        let ch = sample_channels(&cfg, 77).unwrap();
        let (r, trace) = alternating_ee_max(&ch, &cfg, 3).unwrap();
        if r.feasible {
            assert!((r.ee - r.sum_rate / r.total_power).abs() <= 1e-10 * r.ee);
            assert!(PhaseConfig::new(r.phases.theta.clone(), Resolution::Bits(2)).is_ok());
            let problem = Link::Surface(&r.phases).power_problem(&ch, &cfg).unwrap();
            assert!(problem.transmit_power(&r.powers.p) <= cfg.p_budget * (1.0 + 1e-9));
            let direct = energy_efficiency(&ch, &r.phases.theta, &r.powers.p, &cfg).unwrap();
            assert!((direct - r.ee).abs() < 1e-8 * r.ee);
            let first = trace.steps.first().unwrap().ee;
            assert!(r.ee >= first);
        }
        if trace.termination == Termination::Converged {
            let last = trace.steps.last().unwrap();
            assert!(last.phase_change < cfg.epsilon && last.power_change < cfg.epsilon);
        }
    }

    #[test]
    fn relay_with_zero_gain_is_direct_system() {
        let mut cfg = small_cfg(3, 2, 4);
        cfg.relay.alpha = 0.0;
        cfg.relay.tx_power = 0.0;
        let ch = sample_channels(&cfg, 9).unwrap();
        let relay = relay_baseline(&ch, &cfg).unwrap();
        let direct = PowerProblem {
            weights: column_norms_sq(&zf_precoder(&ch.h).unwrap()),
            p_min: qos_min_powers(&cfg),
            mu: cfg.mu.clone(),
            sigma2: cfg.sigma2,
            budget: cfg.p_budget,
            static_power: cfg.k as f64 * cfg.p_c,
        };
        let (p, _) = direct.dinkelbach(cfg.epsilon, 100).unwrap();
        assert_eq!(relay.powers, p);
        assert_eq!(relay.ee, direct.energy_efficiency(&p.p));
    }

    #[test]
    fn relay_matches_manual_recomposition() {
        let cfg = small_cfg(3, 2, 4);
        let ch = sample_channels(&cfg, 10).unwrap();
        let r = relay_baseline(&ch, &cfg).unwrap();
        let heff = relay_channel(&ch, 0.3);
        let g = zf_precoder(&heff).unwrap();
        let rate: f64 = (0..2)
            .map(|k| (1.0 + crate::model::sinr_with_channel(k, &heff, &g, &r.powers.p, cfg.sigma2).unwrap()).log2())
            .sum();
        let total: f64 = r.powers.p.iter().zip(&cfg.mu).map(|(p, m)| p * m).sum::<f64>() + 2.0 * cfg.p_c + 1000.0;
        assert!((r.ee - rate / total).abs() < 1e-8 * r.ee);
        assert!(r.phases.theta.is_empty());
    }

    #[test]
    fn max_rate_fill_examples() {
        let cfg = small_cfg(2, 1, 2);
        let ch = sample_channels(&cfg, 11).unwrap();
        let phases = PhaseConfig::zeros(2, Resolution::Bits(1));
        let p = max_rate_power_fill(&ch, Link::Surface(&phases), &cfg).unwrap();
        let w = Link::Surface(&phases).power_problem(&ch, &cfg).unwrap().weights[0];
        assert!((p.p[0] - cfg.p_budget / w).abs() < 1e-12 * p.p[0]);
    }
}
