//! Channel realizations and the pathloss model.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{LinkType, PathlossModel, Point, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// The three channel matrices of one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// BS to surface, N x M.
    pub h1: CMatrix,
    /// Surface to users, K x N. Row k is the k-th user's channel.
    pub h2: CMatrix,
    /// BS to users (direct), K x M.
    pub h: CMatrix,
}

impl ChannelSet {
    pub fn new(h1: CMatrix, h2: CMatrix, h: CMatrix) -> Result<Self> {
        let set = ChannelSet { h1, h2, h };
        set.check()?;
        Ok(set)
    }

    pub fn m(&self) -> usize {
        self.h1.ncols()
    }

    pub fn k(&self) -> usize {
        self.h2.nrows()
    }

    pub fn n(&self) -> usize {
        self.h1.nrows()
    }

    fn check(&self) -> Result<()> {
        let (n, m) = self.h1.shape();
        let (k, n2) = self.h2.shape();
        if n2 != n {
            return Err(Error::dims("H2 columns vs H1 rows", n, n2));
        }
        if self.h.shape() != (k, m) {
            return Err(Error::dims("direct channel H", format!("{k}x{m}"), format!("{:?}", self.h.shape())));
        }
        let finite = |a: &CMatrix| a.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !(finite(&self.h1) && finite(&self.h2) && finite(&self.h)) {
            return Err(Error::Domain("channel entries must be finite".into()));
        }
        Ok(())
    }

    /// Verifies the shapes against `(M, K, N)` of a configuration.
    pub fn check_config(&self, cfg: &SystemConfig) -> Result<()> {
        let got = (self.m(), self.k(), self.n());
        if got != (cfg.m, cfg.k, cfg.n) {
            return Err(Error::dims("channel set (M, K, N)", format!("{:?}", (cfg.m, cfg.k, cfg.n)), format!("{got:?}")));
        }
        Ok(())
    }
}

/// Linear channel variance `beta0 * (d / d0)^(-alpha)` for a link of length `distance`.
pub fn pathloss_gain(distance: f64, link: LinkType, model: &PathlossModel) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::Domain(format!("link distance must be positive, got {distance}")));
    }
    let lp = model.link(link);
    let gain = lp.ref_gain * (distance / model.ref_distance).powf(-lp.exponent);
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::Domain(format!("{link:?} channel variance must be positive and finite, got {gain}")));
    }
    Ok(gain)
}

/// Fills a matrix with IID circularly-symmetric complex Gaussians of the given
/// per-row variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, row_variance: &[f64], rng: &mut R) -> CMatrix {
    debug_assert_eq!(row_variance.len(), rows);
    // nalgebra storage is column-major, draw in row-major order so that the
    // stream layout does not depend on the storage order.
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        let scale = (row_variance[i] / 2.0).sqrt();
        for j in 0..cols {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[(i, j)] = Complex64::new(re * scale, im * scale);
        }
    }
    out
}

/// Drops `k` users uniformly inside the configured rectangle.
pub fn sample_user_positions<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<Point> {
    let r = cfg.geometry.users;
    (0..cfg.k)
        .map(|_| Point {
            x: r.x_min + (r.x_max - r.x_min) * rng.random::<f64>(),
            y: r.y_min + (r.y_max - r.y_min) * rng.random::<f64>(),
        })
        .collect()
}

/// Draws one channel realization. A pure function of `(cfg, seed)`.
pub fn sample_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = sample_user_positions(cfg, &mut rng);
    let geo = &cfg.geometry;

    let bs_lis = pathloss_gain(geo.bs.distance(geo.lis), LinkType::BsLis, &cfg.pathloss)?;
    let lis_user = users
        .iter()
        .map(|u| pathloss_gain(geo.lis.distance(*u), LinkType::LisUser, &cfg.pathloss))
        .collect::<Result<Vec<_>>>()?;
    let bs_user = users
        .iter()
        .map(|u| pathloss_gain(geo.bs.distance(*u), LinkType::BsUser, &cfg.pathloss))
        .collect::<Result<Vec<_>>>()?;

    let h1 = complex_gaussian(cfg.n, cfg.m, &vec![bs_lis; cfg.n], &mut rng);
    let h2 = complex_gaussian(cfg.k, cfg.n, &lis_user, &mut rng);
    let h = complex_gaussian(cfg.k, cfg.m, &bs_user, &mut rng);
    ChannelSet::new(h1, h2, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LinkPathloss;

    fn unit_model(exponent: f64) -> PathlossModel {
        let lp = LinkPathloss { exponent, ref_gain: 1.0 };
        PathlossModel {
            ref_distance: 1.0,
            bs_user: lp,
            bs_lis: lp,
            lis_user: lp,
        }
    }

    #[test]
    fn pathloss_reference_points() {
        let mut model = unit_model(2.0);
        model.ref_distance = 5.0;
        model.bs_lis.ref_gain = 0.25;
        assert_eq!(pathloss_gain(5.0, LinkType::BsLis, &model).unwrap(), 0.25);
        assert!((pathloss_gain(50.0, LinkType::BsLis, &model).unwrap() - 0.25e-2).abs() < 1e-16);

        let model = unit_model(2.0);
        let d = (2.0f64 * 100.0 * 100.0).sqrt();
        let g = pathloss_gain(d, LinkType::BsLis, &model).unwrap();
        assert!((g - 1.0 / 20000.0).abs() < 1e-18);
        assert!((g - 5.0e-5).abs() < 1e-9);
    }

    #[test]
    fn pathloss_rejects_degenerate_inputs() {
        let model = unit_model(2.0);
        assert!(pathloss_gain(0.0, LinkType::BsUser, &model).is_err());
        assert!(pathloss_gain(-1.0, LinkType::BsUser, &model).is_err());
        let mut zero = unit_model(2.0);
        zero.lis_user.ref_gain = 0.0;
        assert!(pathloss_gain(3.0, LinkType::LisUser, &zero).is_err());
        let mut cfg = SystemConfig::new(2, 2, 2);
        cfg.pathloss = zero;
        assert!(sample_channels(&cfg, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = SystemConfig::new(3, 2, 4);
        let a = sample_channels(&cfg, 42).unwrap();
        let b = sample_channels(&cfg, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_channels(&cfg, 43).unwrap();
        assert_ne!(a, c);
        a.check_config(&cfg).unwrap();
        assert_eq!((a.h1.shape(), a.h2.shape(), a.h.shape()), ((4, 3), (2, 4), (2, 3)));
    }

    #[test]
    fn second_moment_matches_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let var = 3.7e-3;
        let draws = complex_gaussian(1, 100_000, &[var], &mut rng);
        let mean = draws.iter().map(|z| z.norm_sqr()).sum::<f64>() / 100_000.0;
        assert!((mean / var - 1.0).abs() < 0.03, "mean {mean} vs {var}");
        // real and imaginary parts carry half the power each
        let re = draws.iter().map(|z| z.re * z.re).sum::<f64>() / 100_000.0;
        assert!((re / (var / 2.0) - 1.0).abs() < 0.03);
    }

    #[test]
    fn sampled_h1_uses_bs_lis_pathloss() {
        // H1 has a fixed link length, so its entries pool across realizations.
        let cfg = SystemConfig::new(10, 2, 10);
        let expected = pathloss_gain(cfg.geometry.bs.distance(cfg.geometry.lis), LinkType::BsLis, &cfg.pathloss).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for seed in 0..1000 {
            let ch = sample_channels(&cfg, seed).unwrap();
            acc += ch.h1.iter().map(|z| z.norm_sqr()).sum::<f64>();
            count += ch.h1.len();
        }
        assert_eq!(count, 100_000);
        assert!((acc / count as f64 / expected - 1.0).abs() < 0.03);
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let h1 = CMatrix::zeros(3, 2);
        assert!(ChannelSet::new(h1.clone(), CMatrix::zeros(2, 4), CMatrix::zeros(2, 2)).is_err());
        assert!(ChannelSet::new(h1.clone(), CMatrix::zeros(2, 3), CMatrix::zeros(2, 3)).is_err());
        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(ChannelSet::new(h1, CMatrix::zeros(2, 3), bad).is_err());
    }
}
