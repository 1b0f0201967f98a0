//! Signal and power model: effective channel, zero-forcing precoder, SINR,
//! sum rate, power consumption and energy efficiency.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::{Resolution, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{pinv_full_row_rank, CMatrix};

/// Surface phase angles in radians together with their resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub theta: Vec<f64>,
    pub resolution: Resolution,
}

/// The `m`-th discrete phase of a `levels`-point grid.
pub fn grid_phase(m: u64, levels: u64) -> f64 {
    TAU * m as f64 / levels as f64
}

impl PhaseConfig {
    /// Checks that every angle lies in `[0, 2pi]` and, for finite resolution,
    /// exactly on the `2^b`-point grid.
    pub fn new(theta: Vec<f64>, resolution: Resolution) -> Result<Self> {
        if let Some(t) = theta.iter().find(|t| !(0.0..=TAU).contains(*t)) {
            return Err(Error::Domain(format!("phase {t} outside [0, 2pi]")));
        }
        if let Some(levels) = resolution.levels() {
            for &t in &theta {
                if !on_grid(t, levels) {
                    return Err(Error::Domain(format!("phase {t} is not a {resolution}-bit level")));
                }
            }
        }
        Ok(PhaseConfig { theta, resolution })
    }

    pub fn zeros(n: usize, resolution: Resolution) -> Self {
        PhaseConfig {
            theta: vec![0.0; n],
            resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `exp(j theta_n)` for every element.
    pub fn phasors(&self) -> Vec<Complex64> {
        self.theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }
}

impl AsRef<[f64]> for PhaseConfig {
    fn as_ref(&self) -> &[f64] {
        &self.theta
    }
}

fn on_grid(theta: f64, levels: u64) -> bool {
    let m = (theta * levels as f64 / TAU).round() as u64;
    m < levels && grid_phase(m, levels) == theta
}

/// Per-user transmit powers in watts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain(format!("powers must be finite and non-negative, got {x}")));
        }
        Ok(PowerAllocation { p })
    }

    pub fn uniform(k: usize, each: f64) -> Self {
        PowerAllocation { p: vec![each; k] }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

impl AsRef<[f64]> for PowerAllocation {
    fn as_ref(&self) -> &[f64] {
        &self.p
    }
}

/// Result of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Energy efficiency, bits/Joule per Hz.
    pub ee: f64,
    /// bits/s/Hz
    pub sum_rate: f64,
    /// W
    pub total_power: f64,
    pub phases: PhaseConfig,
    pub powers: PowerAllocation,
    pub outer_iterations: usize,
    pub feasible: bool,
    pub method: String,
}

impl SolveReport {
    /// Report for a run that found no feasible point. EE and rate are zero.
    pub fn infeasible(method: &str, phases: PhaseConfig, k: usize, outer_iterations: usize) -> Self {
        SolveReport {
            ee: 0.0,
            sum_rate: 0.0,
            total_power: 0.0,
            phases,
            powers: PowerAllocation::uniform(k, 0.0),
            outer_iterations,
            feasible: false,
            method: method.to_string(),
        }
    }
}

/// `H2 diag(exp(j theta)) H1 + H`, a K x M matrix.
pub fn effective_channel(channels: &ChannelSet, theta: &[f64]) -> Result<CMatrix> {
    if theta.len() != channels.n() {
        return Err(Error::dims("phase vector length", channels.n(), theta.len()));
    }
    let mut scaled = channels.h2.clone();
    for (n, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::from_polar(1.0, theta[n]);
    }
    Ok(scaled * &channels.h1 + &channels.h)
}

/// Zero-forcing precoder `G = H_eff^+`, M x K.
pub fn zf_precoder(h_eff: &CMatrix) -> Result<CMatrix> {
    pinv_full_row_rank(h_eff)
}

fn check_powers(powers: &[f64], k: usize) -> Result<()> {
    if powers.len() != k {
        return Err(Error::dims("power vector length", k, powers.len()));
    }
    Ok(())
}

/// SINR of user `k` for an explicit effective channel and precoder.
pub fn sinr_with_channel(k: usize, h_eff: &CMatrix, precoder: &CMatrix, powers: &[f64], sigma2: f64) -> Result<f64> {
    let users = h_eff.nrows();
    if k >= users {
        return Err(Error::IndexOutOfRange { index: k, len: users });
    }
    if precoder.shape() != (h_eff.ncols(), users) {
        return Err(Error::dims("precoder shape", format!("{}x{users}", h_eff.ncols()), format!("{:?}", precoder.shape())));
    }
    check_powers(powers, users)?;
    let row = h_eff.row(k);
    let gain = |i: usize| (row * precoder.column(i))[(0, 0)].norm_sqr();
    let signal = powers[k] * gain(k);
    let interference: f64 = (0..users).filter(|&i| i != k).map(|i| powers[i] * gain(i)).sum();
    Ok(signal / (interference + sigma2))
}

/// SINR of user `k` under phases `theta` and precoder `precoder`.
pub fn sinr(
    k: usize,
    channels: &ChannelSet,
    theta: &[f64],
    precoder: &CMatrix,
    powers: &[f64],
    sigma2: f64,
) -> Result<f64> {
    let h_eff = effective_channel(channels, theta)?;
    sinr_with_channel(k, &h_eff, precoder, powers, sigma2)
}

/// Sum of `log2(1 + SINR_k)` with the SINR evaluated term by term.
pub fn sum_rate(channels: &ChannelSet, theta: &[f64], precoder: &CMatrix, powers: &[f64], sigma2: f64) -> Result<f64> {
    let h_eff = effective_channel(channels, theta)?;
    (0..h_eff.nrows())
        .map(|k| sinr_with_channel(k, &h_eff, precoder, powers, sigma2).map(|g| (1.0 + g).log2()))
        .sum()
}

/// Sum rate under zero-forcing, where every SINR collapses to `p_k / sigma2`.
pub fn zf_sum_rate(powers: &[f64], sigma2: f64) -> f64 {
    powers.iter().map(|p| (1.0 + p / sigma2).log2()).sum()
}

/// Power that does not scale with the transmit powers: `K P_c + N P_n(b)`.
pub fn static_power(cfg: &SystemConfig) -> Result<f64> {
    Ok(cfg.k as f64 * cfg.p_c + cfg.n as f64 * cfg.element_power_for(cfg.resolution)?)
}

/// Amplifier power `sum mu_k p_k`.
pub fn amplifier_power(powers: &[f64], mu: &[f64]) -> f64 {
    powers.iter().zip(mu).map(|(p, m)| m * p).sum()
}

/// Total consumed power `sum mu_k p_k + K P_c + N P_n(b)`.
pub fn total_power(powers: &[f64], cfg: &SystemConfig) -> Result<f64> {
    check_powers(powers, cfg.k)?;
    Ok(amplifier_power(powers, &cfg.mu) + static_power(cfg)?)
}

/// Sum rate over total power, with the zero-forcing precoder of the phases.
pub fn energy_efficiency(channels: &ChannelSet, theta: &[f64], powers: &[f64], cfg: &SystemConfig) -> Result<f64> {
    let h_eff = effective_channel(channels, theta)?;
    let g = zf_precoder(&h_eff)?;
    let rate = sum_rate(channels, theta, &g, powers, cfg.sigma2)?;
    Ok(rate / total_power(powers, cfg)?)
}

/// Expected transmit power `tr(P G^H G) = sum_k p_k ||g_k||^2`.
pub fn transmit_power_used(powers: &[f64], precoder: &CMatrix) -> Result<f64> {
    check_powers(powers, precoder.ncols())?;
    Ok(precoder
        .column_iter()
        .zip(powers)
        .map(|(g, p)| p * g.norm_squared())
        .sum())
}

/// Squared column norms of the precoder.
pub fn column_norms_sq(precoder: &CMatrix) -> Vec<f64> {
    precoder.column_iter().map(|g| g.norm_squared()).collect()
}
