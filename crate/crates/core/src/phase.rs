//! Surface phase design for fixed transmit powers.
//!
//! The phases only enter the problem through the zero-forcing transmit power
//! `tr(G P G^H)`. The discrete problem is relaxed to `theta in [0, 2pi]^N`,
//! solved with a projected quasi-Newton method, and snapped back to the
//! `2^b`-point grid.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::config::Resolution;
use crate::error::{Error, Result};
use crate::model::{effective_channel, grid_phase, transmit_power_used, zf_precoder, PhaseConfig};
use crate::optim::{minimize_box, BoxOptions};

/// Budget slack used by every feasibility comparison.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolveOptions {
    pub max_iterations: usize,
    /// Relative to the objective value.
    pub gradient_tolerance: f64,
    /// Radians.
    pub step_tolerance: f64,
    /// Total starts: the warm start plus `num_restarts - 1` random ones.
    pub num_restarts: usize,
    /// Radians.
    pub finite_difference_step: f64,
}

impl Default for RelaxedSolveOptions {
    fn default() -> Self {
        RelaxedSolveOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-9,
            num_restarts: 4,
            finite_difference_step: 1e-5,
        }
    }
}

impl RelaxedSolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.step_tolerance > 0.0
            && self.finite_difference_step > 0.0;
        if !positive || self.num_restarts == 0 {
            return Err(Error::Domain(format!("relaxed solver options must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolveOutcome {
    pub theta_continuous: Vec<f64>,
    pub theta_quantized: PhaseConfig,
    /// Zero-forcing transmit power at the relaxed solution, W.
    pub objective_continuous: f64,
    /// Zero-forcing transmit power at the quantized phases, W.
    pub objective_quantized: f64,
    pub feasible: bool,
}

/// Transmit power the zero-forcing precoder needs to deliver `powers` with the
/// surface set to `theta`. Infinite when the effective channel is rank deficient.
pub fn trace_objective(theta: &[f64], channels: &ChannelSet, powers: &[f64]) -> f64 {
    effective_channel(channels, theta)
        .and_then(|h| zf_precoder(&h))
        .and_then(|g| transmit_power_used(powers, &g))
        .unwrap_or(f64::INFINITY)
}

/// Minimizes [`trace_objective`] over `[0, 2pi]^N`.
///
/// The first start is `warm_start`; the others are drawn uniformly from a
/// generator seeded with `seed`. The lowest objective wins, ties going to the
/// earliest start.
pub fn solve_relaxed(
    channels: &ChannelSet,
    powers: &[f64],
    warm_start: &[f64],
    options: &RelaxedSolveOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    options.validate()?;
    let n = channels.n();
    if warm_start.len() != n {
        return Err(Error::dims("warm start length", n, warm_start.len()));
    }
    if powers.len() != channels.k() {
        return Err(Error::dims("power vector length", channels.k(), powers.len()));
    }
    let lower = vec![0.0; n];
    let upper = vec![TAU; n];
    let box_opts = BoxOptions {
        max_iterations: options.max_iterations,
        gradient_tolerance: options.gradient_tolerance,
        step_tolerance: options.step_tolerance,
        fd_step: options.finite_difference_step,
        periodic: true,
    };
    let objective = |theta: &[f64]| trace_objective(theta, channels, powers);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..options.num_restarts {
        let start: Vec<f64> = if restart == 0 {
            warm_start.iter().map(|t| t.clamp(0.0, TAU)).collect()
        } else {
            (0..n).map(|_| rng.random::<f64>() * TAU).collect()
        };
        let run = minimize_box(objective, &start, &lower, &upper, &box_opts);
        if run.f.is_finite() && best.as_ref().is_none_or(|(_, f)| run.f < *f) {
            best = Some((run.x, run.f));
        }
    }
    best.map(|(x, _)| x).ok_or_else(|| {
        Error::OptimizationFailure(format!(
            "all {} starts landed on rank-deficient effective channels",
            options.num_restarts
        ))
    })
}

/// Index of the grid level nearest to `theta` on the circle. Level `m` owns the
/// half-open arc `[(2m-1)pi/L, (2m+1)pi/L)`.
fn nearest_level(theta: f64, levels: u64) -> u64 {
    let l = levels as f64;
    let lower = |m: i64| (2 * m - 1) as f64 * PI / l;
    let mut m = (theta * l / TAU + 0.5).floor() as i64;
    while m > 0 && theta < lower(m) {
        m -= 1;
    }
    while theta >= lower(m + 1) {
        m += 1;
    }
    m.rem_euclid(levels as i64) as u64
}

/// Snaps every angle to the nearest point of the `2^b` grid. Continuous
/// resolution returns the angles unchanged.
pub fn quantize_phases(theta: &[f64], resolution: Resolution) -> Result<PhaseConfig> {
    if let Some(t) = theta.iter().find(|t| !(0.0..=TAU).contains(*t)) {
        return Err(Error::Domain(format!("phase {t} outside [0, 2pi]")));
    }
    match resolution {
        Resolution::Continuous => Ok(PhaseConfig {
            theta: theta.to_vec(),
            resolution,
        }),
        Resolution::Bits(0) => Err(Error::Domain("phase resolution must be at least 1 bit".into())),
        Resolution::Bits(_) => {
            let levels = resolution
                .levels()
                .ok_or_else(|| Error::Domain(format!("{resolution} bits is too many levels")))?;
            let theta = theta.iter().map(|&t| grid_phase(nearest_level(t, levels), levels)).collect();
            Ok(PhaseConfig { theta, resolution })
        }
    }
}

/// Whether zero-forcing can deliver `powers` under `budget` with these phases.
pub fn check_feasibility(phases: &PhaseConfig, powers: &[f64], channels: &ChannelSet, budget: f64) -> bool {
    trace_objective(&phases.theta, channels, powers) <= budget * (1.0 + FEASIBILITY_SLACK)
}

/// Relaxed solve followed by quantization to `resolution`.
pub fn solve_phase_subproblem(
    channels: &ChannelSet,
    powers: &[f64],
    resolution: Resolution,
    warm_start: &[f64],
    options: &RelaxedSolveOptions,
    budget: f64,
    seed: u64,
) -> Result<PhaseSolveOutcome> {
    let theta_continuous = solve_relaxed(channels, powers, warm_start, options, seed)?;
    let theta_quantized = quantize_phases(&theta_continuous, resolution)?;
    let objective_continuous = trace_objective(&theta_continuous, channels, powers);
    let objective_quantized = trace_objective(&theta_quantized.theta, channels, powers);
    let feasible = check_feasibility(&theta_quantized, powers, channels, budget);
    Ok(PhaseSolveOutcome {
        theta_continuous,
        theta_quantized,
        objective_continuous,
        objective_quantized,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        })
    }

    fn random_set(m: usize, k: usize, n: usize, seed: u64) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h1 = random(n, m, &mut rng);
        let h2 = random(k, n, &mut rng);
        let h = random(k, m, &mut rng);
        ChannelSet::new(h1, h2, h).unwrap()
    }

    /// Table lookup written straight from the published interval rules.
    fn one_bit_table(t: f64) -> f64 {
        if (0.0..PI / 2.0).contains(&t) || (3.0 * PI / 2.0..2.0 * PI).contains(&t) {
            0.0
        } else if (PI / 2.0..3.0 * PI / 2.0).contains(&t) {
            PI
        } else {
            0.0
        }
    }

    #[test]
    fn one_bit_rule() {
        let q = |t: f64| quantize_phases(&[t], Resolution::Bits(1)).unwrap().theta[0];
        assert_eq!(q(0.1), 0.0);
        assert_eq!(q(3.0 * PI / 2.0), 0.0);
        assert_eq!(q(PI / 2.0), PI);
        assert_eq!(q(TAU), 0.0);
        assert_eq!(q(PI), PI);
        for t in [0.0, 1.0, 1.5707, 1.5708, 3.0, 4.7, 4.72, 6.0] {
            assert_eq!(q(t), one_bit_table(t), "theta {t}");
        }
    }

    #[test]
    fn two_bit_rule() {
        let q = |t: f64| quantize_phases(&[t], Resolution::Bits(2)).unwrap().theta[0];
        assert_eq!(q(PI / 4.0), PI / 2.0);
        assert_eq!(q(7.0 * PI / 4.0), 0.0);
        assert_eq!(q(3.0 * PI / 4.0), PI);
        assert_eq!(q(5.0 * PI / 4.0), 3.0 * PI / 2.0);
        assert_eq!(q(0.8), PI / 2.0);
        assert_eq!(q(0.78), 0.0);
        assert_eq!(q(0.7), 0.0);
    }

    #[test]
    fn grid_points_are_fixed() {
        let thetas: Vec<f64> = (0..8).map(|m| 2.0 * PI * m as f64 / 8.0).collect();
        let q = quantize_phases(&thetas, Resolution::Bits(3)).unwrap();
        assert_eq!(q.theta, thetas);
    }

    #[test]
    fn quantizer_rejects_bad_input() {
        assert!(quantize_phases(&[0.5], Resolution::Bits(0)).is_err());
        assert!(quantize_phases(&[-0.5], Resolution::Bits(1)).is_err());
        let c = quantize_phases(&[0.5, 2.0], Resolution::Continuous).unwrap();
        assert_eq!(c.theta, vec![0.5, 2.0]);
    }

    proptest! {
        #[test]
        fn quantizer_output_on_grid_and_idempotent(theta in prop::collection::vec(0.0..=TAU, 1..12), bits in 1u32..6) {
            let res = Resolution::Bits(bits);
            let q = quantize_phases(&theta, res).unwrap();
            prop_assert!(PhaseConfig::new(q.theta.clone(), res).is_ok());
            let qq = quantize_phases(&q.theta, res).unwrap();
            prop_assert_eq!(&q, &qq);
            // nearest in circular distance
            let levels = 1u64 << bits;
            for (t, tq) in theta.iter().zip(&q.theta) {
                let dist = |a: f64| { let d = (t - a).rem_euclid(TAU); d.min(TAU - d) };
                let best = (0..levels).map(|m| dist(grid_phase(m, levels))).fold(f64::INFINITY, f64::min);
                prop_assert!(dist(*tq) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn trace_objective_unitary_and_zero_power() {
        // K = M = 2, N = 2, H2 = 0 and H unitary
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let h = CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = ChannelSet::new(random(2, 2, &mut rng), CMatrix::zeros(2, 2), h).unwrap();
        assert!((trace_objective(&[0.3, 2.0], &ch, &[0.4, 1.1]) - 1.5).abs() < 1e-14);

        let ch = random_set(3, 2, 4, 3);
        assert_eq!(trace_objective(&[0.1, 0.2, 0.3, 0.4], &ch, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn trace_objective_matches_composition() {
        let ch = random_set(3, 2, 2, 5);
        let theta = [1.1, 4.0];
        let p = [0.3, 0.8];
        let h = effective_channel(&ch, &theta).unwrap();
        let g = zf_precoder(&h).unwrap();
        // explicit tr(G P G^H)
        let pm = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, p.iter().map(|&x| Complex64::new(x, 0.0))));
        let direct = (&g * pm * g.adjoint()).trace().re;
        assert!((trace_objective(&theta, &ch, &p) - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn trace_objective_rank_deficient_is_infinite() {
        let ch = ChannelSet::new(CMatrix::zeros(2, 2), CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(trace_objective(&[0.0, 0.0], &ch, &[1.0, 1.0]), f64::INFINITY);
        let opts = RelaxedSolveOptions::default();
        assert!(matches!(
            solve_relaxed(&ch, &[1.0, 1.0], &[0.0, 0.0], &opts, 1),
            Err(Error::OptimizationFailure(_))
        ));
    }

    #[test]
    fn global_phase_rotation_invariance() {
        // K = 1 and H = 0: rotating H2 by a common phase leaves the objective unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h1 = random(3, 2, &mut rng);
        let h2 = random(1, 3, &mut rng);
        let ch = ChannelSet::new(h1.clone(), h2.clone(), CMatrix::zeros(1, 2)).unwrap();
        let rotated = ChannelSet::new(h1, h2 * Complex64::from_polar(1.0, 0.9), CMatrix::zeros(1, 2)).unwrap();
        let theta = [0.5, 2.5, 5.0];
        let a = trace_objective(&theta, &ch, &[0.7]);
        let b = trace_objective(&theta, &rotated, &[0.7]);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn flat_landscape_keeps_warm_start() {
        let mut ch = random_set(3, 2, 4, 9);
        ch.h2 = CMatrix::zeros(2, 4);
        let warm = [0.5, 1.0, 1.5, 2.0];
        let theta = solve_relaxed(&ch, &[1.0, 2.0], &warm, &RelaxedSolveOptions::default(), 4).unwrap();
        assert_eq!(theta, warm.to_vec());
    }

    #[test]
    fn scalar_instance_matches_dense_grid() {
        let mut best_gap: f64 = 0.0;
        for seed in 0..10 {
            let ch = random_set(1, 1, 1, 100 + seed);
            let p = [0.8];
            let grid_min = (0..10_000)
                .map(|i| trace_objective(&[TAU * i as f64 / 10_000.0], &ch, &p))
                .fold(f64::INFINITY, f64::min);
            let theta = solve_relaxed(&ch, &p, &[0.0], &RelaxedSolveOptions::default(), seed).unwrap();
            let got = trace_objective(&theta, &ch, &p);
            assert!(got <= grid_min + 1e-4 * grid_min, "seed {seed}: {got} vs {grid_min}");
            best_gap = best_gap.max(got - grid_min);
        }
        assert!(best_gap < 1e-4);
    }

    #[test]
    fn relaxed_solve_descends_from_warm_start() {
        for seed in 0..5 {
            let ch = random_set(4, 3, 6, 200 + seed);
            let p = [0.5, 1.0, 1.5];
            let warm: Vec<f64> = (0..6).map(|i| i as f64).collect();
            let before = trace_objective(&warm, &ch, &p);
            let theta = solve_relaxed(&ch, &p, &warm, &RelaxedSolveOptions::default(), seed).unwrap();
            assert!(theta.iter().all(|t| (0.0..=TAU).contains(t)));
            assert!(trace_objective(&theta, &ch, &p) <= before + 1e-12);
        }
    }

    #[test]
    fn feasibility_edge_cases() {
        let ch = random_set(3, 2, 4, 12);
        let phases = PhaseConfig::zeros(4, Resolution::Bits(1));
        assert!(check_feasibility(&phases, &[0.0, 0.0], &ch, 1e-6));
        assert!(!check_feasibility(&phases, &[1.0, 0.0], &ch, 0.0));
        let need = trace_objective(&phases.theta, &ch, &[1.0, 2.0]);
        assert!(check_feasibility(&phases, &[1.0, 2.0], &ch, need));
        assert!(!check_feasibility(&phases, &[1.0, 2.0], &ch, need * 0.999));
    }

    #[test]
    fn subproblem_continuous_is_identity_quantizer() {
        let ch = random_set(3, 2, 4, 13);
        let out = solve_phase_subproblem(&ch, &[1.0, 1.0], Resolution::Continuous, &[0.0; 4], &RelaxedSolveOptions::default(), 10.0, 1).unwrap();
        assert_eq!(out.theta_quantized.theta, out.theta_continuous);
        assert_eq!(out.objective_quantized, out.objective_continuous);
    }

    #[test]
    fn subproblem_one_bit_vs_exhaustive() {
        for seed in 0..10 {
            let ch = random_set(2, 2, 2, 300 + seed);
            let p = [1.0, 0.5];
            let out = solve_phase_subproblem(&ch, &p, Resolution::Bits(1), &[0.0; 2], &RelaxedSolveOptions::default(), 1e9, seed).unwrap();
            let exhaustive = [[0.0, 0.0], [0.0, PI], [PI, 0.0], [PI, PI]]
                .iter()
                .map(|t| trace_objective(t, &ch, &p))
                .fold(f64::INFINITY, f64::min);
            assert!(out.objective_quantized >= exhaustive);
            assert!(out.objective_continuous <= exhaustive * (1.0 + 1e-9));
            assert!(out.feasible);
        }
    }

    #[test]
    fn subproblem_without_surface_depends_on_direct_channel() {
        let mut ch = random_set(3, 2, 4, 14);
        ch.h2 = CMatrix::zeros(2, 4);
        let p = [1.0, 1.0];
        let direct = trace_objective(&[0.0; 4], &ch, &p);
        let opts = RelaxedSolveOptions::default();
        let above = solve_phase_subproblem(&ch, &p, Resolution::Bits(1), &[0.0; 4], &opts, direct * 1.01, 2).unwrap();
        let below = solve_phase_subproblem(&ch, &p, Resolution::Bits(1), &[0.0; 4], &opts, direct * 0.99, 2).unwrap();
        assert!(above.feasible);
        assert!(!below.feasible);
    }
}
