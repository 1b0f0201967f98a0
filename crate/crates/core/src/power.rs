//! Transmit power allocation for fixed surface phases.
//!
//! Under zero-forcing the rate of user k is `log2(1 + p_k / sigma2)` and the
//! transmit power constraint is linear in the powers, `sum w_k p_k <= P`, with
//! `w_k` the squared norm of the k-th precoder column. The energy-efficiency
//! ratio is maximized with Dinkelbach's method; every parametric subproblem is
//! solved exactly from its KKT conditions with a bisection on the budget
//! multiplier.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{amplifier_power, column_norms_sq, effective_channel, static_power, zf_precoder, zf_sum_rate, PowerAllocation};
use crate::phase::FEASIBILITY_SLACK;

const BISECTION_MAX_STEPS: usize = 400;
const BISECTION_REL_WIDTH: f64 = 1e-15;

/// Per-user minimum powers implied by the rate targets, `sigma2 (2^R_min - 1)`.
pub fn qos_min_powers(cfg: &SystemConfig) -> Vec<f64> {
    cfg.r_min.iter().map(|r| cfg.sigma2 * (r.exp2() - 1.0)).collect()
}

/// Squared column norms of the zero-forcing precoder for these phases.
pub fn zf_power_weights(channels: &ChannelSet, theta: &[f64]) -> Result<Vec<f64>> {
    let g = zf_precoder(&effective_channel(channels, theta)?)?;
    Ok(column_norms_sq(&g))
}

/// Record of one Dinkelbach run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DinkelbachTrace {
    /// `lambda_0 = 0` followed by one value per iteration.
    pub lambdas: Vec<f64>,
    pub inner_solutions: Vec<PowerAllocation>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power subproblem data for a fixed effective channel.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProblem {
    /// Transmit-power weight of each user, `||g_k||^2`.
    pub weights: Vec<f64>,
    pub p_min: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: f64,
    pub budget: f64,
    /// Consumption that does not depend on the powers, W.
    pub static_power: f64,
}

/// Exact maximizer of the parametric subproblem and its budget multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub powers: PowerAllocation,
    pub nu: f64,
}

impl PowerProblem {
    /// The surface system: weights from the zero-forcing precoder at `theta`,
    /// static power `K P_c + N P_n(b)`.
    pub fn for_phases(channels: &ChannelSet, theta: &[f64], cfg: &SystemConfig) -> Result<Self> {
        channels.check_config(cfg)?;
        Ok(PowerProblem {
            weights: zf_power_weights(channels, theta)?,
            p_min: qos_min_powers(cfg),
            mu: cfg.mu.clone(),
            sigma2: cfg.sigma2,
            budget: cfg.p_budget,
            static_power: static_power(cfg)?,
        })
    }

    pub fn users(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if self.p_min.len() != k || self.mu.len() != k {
            return Err(Error::dims("power problem vectors", k, format!("p_min {} / mu {}", self.p_min.len(), self.mu.len())));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("power weights must be positive and finite: {:?}", self.weights)));
        }
        if self.p_min.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("minimum powers must be finite and non-negative".into()));
        }
        if !(self.sigma2 > 0.0) || !(self.budget >= 0.0) {
            return Err(Error::Domain("noise variance must be positive and budget non-negative".into()));
        }
        Ok(())
    }

    /// Transmit power `sum w_k p_k`.
    pub fn transmit_power(&self, p: &[f64]) -> f64 {
        self.weights.iter().zip(p).map(|(w, p)| w * p).sum()
    }

    pub fn rate(&self, p: &[f64]) -> f64 {
        zf_sum_rate(p, self.sigma2)
    }

    /// Total consumption `sum mu_k p_k + static`.
    pub fn consumed(&self, p: &[f64]) -> f64 {
        amplifier_power(p, &self.mu) + self.static_power
    }

    pub fn energy_efficiency(&self, p: &[f64]) -> f64 {
        self.rate(p) / self.consumed(p)
    }

    /// Rate minus `lambda` times consumption.
    pub fn parametric_objective(&self, p: &[f64], lambda: f64) -> f64 {
        self.rate(p) - lambda * self.consumed(p)
    }

    /// Whether the QoS minimum powers fit the budget.
    pub fn is_feasible(&self) -> bool {
        self.transmit_power(&self.p_min) <= self.budget * (1.0 + FEASIBILITY_SLACK)
    }

    fn kkt_powers(&self, lambda: f64, nu: f64) -> Vec<f64> {
        (0..self.users())
            .map(|k| {
                let price = lambda * self.mu[k] + nu * self.weights[k];
                let p = 1.0 / (LN_2 * price) - self.sigma2;
                p.max(self.p_min[k])
            })
            .collect()
    }

    /// Maximizes `sum log2(1 + p_k/sigma2) - lambda (sum mu_k p_k + static)`
    /// over the QoS and budget constraints.
    ///
    /// The maximizer is `p_k = max(p_min_k, 1/(ln2 (lambda mu_k + nu w_k)) - sigma2)`
    /// with `nu = 0` when that point already fits the budget, otherwise `nu`
    /// found by bisection so the budget holds with equality.
    pub fn inner_solve(&self, lambda: f64) -> Result<InnerSolution> {
        self.validate()?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        if !self.is_feasible() {
            return Err(Error::Infeasible(format!(
                "QoS minimum powers need {:.6e} W of transmit power, budget is {:.6e} W",
                self.transmit_power(&self.p_min),
                self.budget
            )));
        }
        if lambda > 0.0 {
            let p = self.kkt_powers(lambda, 0.0);
            if self.transmit_power(&p) <= self.budget {
                return Ok(InnerSolution {
                    powers: PowerAllocation { p },
                    nu: 0.0,
                });
            }
        } else if !self.budget.is_finite() {
            return Err(Error::Domain("lambda = 0 with an unbounded budget has no maximizer".into()));
        }

        // At nu_hi every unclamped power is already at or below its minimum,
        // so the budget holds there.
        let mut hi = (0..self.users())
            .map(|k| 1.0 / (LN_2 * self.weights[k] * (self.sigma2 + self.p_min[k])))
            .fold(0.0, f64::max);
        let mut lo = 0.0;
        for _ in 0..BISECTION_MAX_STEPS {
            if hi - lo <= BISECTION_REL_WIDTH * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.transmit_power(&self.kkt_powers(lambda, mid)) <= self.budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(InnerSolution {
            powers: PowerAllocation {
                p: self.kkt_powers(lambda, hi),
            },
            nu: hi,
        })
    }

    /// Dinkelbach iterations from `lambda_0 = 0` until two consecutive ratios
    /// differ by less than `epsilon * min(1, lambda)`.
    ///
    /// The step is measured relative to the ratio once it drops below one, so
    /// small-valued ratios (large budgets, large static power) do not stop the
    /// iteration at the first few Newton steps.
    pub fn dinkelbach(&self, epsilon: f64, max_iterations: usize) -> Result<(PowerAllocation, DinkelbachTrace)> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        let mut trace = DinkelbachTrace {
            lambdas: vec![0.0],
            inner_solutions: Vec::new(),
            iterations: 0,
            converged: false,
        };
        let mut lambda = 0.0;
        let mut previous: Option<PowerAllocation> = None;
        for i in 1..=max_iterations {
            let inner = self.inner_solve(lambda)?;
            let next = self.energy_efficiency(&inner.powers.p);
            // In exact arithmetic the ratios never decrease; a drop is
            // rounding at the fixed point, so keep the previous iterate.
            if let Some(prev) = previous.as_ref().filter(|_| next < lambda) {
                trace.converged = true;
                return Ok((prev.clone(), trace));
            }
            trace.lambdas.push(next);
            trace.inner_solutions.push(inner.powers.clone());
            trace.iterations = i;
            if (next - lambda).abs() < epsilon * next.abs().min(1.0) {
                trace.converged = true;
                // One more step at the converged ratio. Newton-type
                // convergence makes it nearly exact and it never lowers EE.
                let polished = self.inner_solve(next)?.powers;
                let polished_ee = self.energy_efficiency(&polished.p);
                if polished_ee > next {
                    trace.lambdas.push(polished_ee);
                    trace.inner_solutions.push(polished.clone());
                    trace.iterations += 1;
                    return Ok((polished, trace));
                }
                return Ok((inner.powers, trace));
            }
            lambda = next;
            previous = Some(inner.powers);
        }
        Err(Error::NonConvergence {
            iterations: max_iterations,
        })
    }
}

/// Exact parametric maximizer for the configuration's QoS, noise, amplifier
/// and budget parameters.
pub fn inner_concave_solve(lambda: f64, weights: &[f64], p_min: &[f64], cfg: &SystemConfig) -> Result<PowerAllocation> {
    let problem = PowerProblem {
        weights: weights.to_vec(),
        p_min: p_min.to_vec(),
        mu: cfg.mu.clone(),
        sigma2: cfg.sigma2,
        budget: cfg.p_budget,
        static_power: static_power(cfg)?,
    };
    Ok(problem.inner_solve(lambda)?.powers)
}

/// Energy-efficient power allocation for fixed phases.
pub fn dinkelbach(channels: &ChannelSet, theta: &[f64], cfg: &SystemConfig) -> Result<(PowerAllocation, DinkelbachTrace)> {
    PowerProblem::for_phases(channels, theta, cfg)?.dinkelbach(cfg.epsilon, cfg.caps.dinkelbach_iterations)
}
