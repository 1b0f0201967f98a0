//! System parameters. All powers are stored in watts and all gains on a linear scale.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::RelaxedSolveOptions;
use crate::units::{db_to_linear, dbm_to_watts};

/// Phase resolution of the surface elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Resolution {
    Bits(u32),
    Continuous,
}

impl Resolution {
    /// Number of discrete phase levels, `None` for continuous phases.
    pub fn levels(self) -> Option<u64> {
        match self {
            Resolution::Bits(b) if b < 64 => Some(1u64 << b),
            Resolution::Bits(_) => None,
            Resolution::Continuous => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Resolution::Bits(_))
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::Continuous => f.write_str("continuous"),
        }
    }
}

impl From<Resolution> for String {
    fn from(r: Resolution) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for Resolution {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "continuous" | "inf" | "infinite" => Ok(Resolution::Continuous),
            other => {
                let bits: u32 = other
                    .parse()
                    .map_err(|_| Error::Domain(format!("invalid resolution '{other}'")))?;
                if bits == 0 || bits > 32 {
                    return Err(Error::Domain(format!("resolution must be 1..=32 bits, got {bits}")));
                }
                Ok(Resolution::Bits(bits))
            }
        }
    }
}

/// The three propagation links of the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkType {
    BsUser,
    BsLis,
    LisUser,
}

/// Log-distance pathloss parameters of one link type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPathloss {
    pub exponent: f64,
    /// Linear gain at the reference distance.
    pub ref_gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathlossModel {
    /// Reference distance in meters, shared by all links.
    pub ref_distance: f64,
    pub bs_user: LinkPathloss,
    pub bs_lis: LinkPathloss,
    pub lis_user: LinkPathloss,
}

impl PathlossModel {
    pub fn link(&self, link: LinkType) -> LinkPathloss {
        match link {
            LinkType::BsUser => self.bs_user,
            LinkType::BsLis => self.bs_lis,
            LinkType::LisUser => self.lis_user,
        }
    }

    pub fn link_mut(&mut self, link: LinkType) -> &mut LinkPathloss {
        match link {
            LinkType::BsUser => &mut self.bs_user,
            LinkType::BsLis => &mut self.bs_lis,
            LinkType::LisUser => &mut self.lis_user,
        }
    }
}

impl Default for PathlossModel {
    /// Exponents 3.5 for the direct link and 2.2 for both surface links.
    ///
    /// The reference gains normalize the channels so that received powers sit
    /// on the same scale as transmit powers at the default geometry.
    fn default() -> Self {
        PathlossModel {
            ref_distance: 1.0,
            bs_user: LinkPathloss {
                exponent: 3.5,
                ref_gain: db_to_linear(DEFAULT_BS_USER_REF_DB),
            },
            bs_lis: LinkPathloss {
                exponent: 2.2,
                ref_gain: db_to_linear(DEFAULT_BS_LIS_REF_DB),
            },
            lis_user: LinkPathloss {
                exponent: 2.2,
                ref_gain: db_to_linear(DEFAULT_LIS_USER_REF_DB),
            },
        }
    }
}

pub const DEFAULT_BS_USER_REF_DB: f64 = 70.0;
pub const DEFAULT_BS_LIS_REF_DB: f64 = 47.0;
pub const DEFAULT_LIS_USER_REF_DB: f64 = 23.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Deployment geometry: BS and surface center are points, users are dropped
/// uniformly inside `users`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs: Point,
    pub lis: Point,
    pub users: Rect,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            bs: Point { x: 0.0, y: 0.0 },
            lis: Point { x: 100.0, y: 100.0 },
            users: Rect {
                x_min: 100.0,
                x_max: 110.0,
                y_min: 85.0,
                y_max: 95.0,
            },
        }
    }
}

/// Amplify-and-forward relay baseline parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelayParams {
    pub alpha: f64,
    /// Relay transmit power in watts.
    pub tx_power: f64,
}

impl Default for RelayParams {
    fn default() -> Self {
        RelayParams {
            alpha: 0.3,
            tx_power: dbm_to_watts(60.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverCaps {
    pub dinkelbach_iterations: usize,
    pub outer_iterations: usize,
    /// Largest number of phase configurations exhaustive search may enumerate.
    pub enumeration: u128,
}

impl Default for SolverCaps {
    fn default() -> Self {
        SolverCaps {
            dinkelbach_iterations: 100,
            outer_iterations: 50,
            enumeration: 1 << 20,
        }
    }
}

/// Every scalar parameter of one system instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas.
    pub m: usize,
    /// Single-antenna users.
    pub k: usize,
    /// Surface elements.
    pub n: usize,
    pub resolution: Resolution,
    /// Maximum transmit power, W.
    pub p_budget: f64,
    /// Noise variance, W.
    pub sigma2: f64,
    /// Per-user amplifier inefficiency (inverse efficiency), >= 1.
    pub mu: Vec<f64>,
    /// Circuit power per link, W.
    pub p_c: f64,
    /// Per-element surface power for each resolution, W.
    pub element_power: BTreeMap<Resolution, f64>,
    /// Per-user minimum rate, bits/s/Hz.
    pub r_min: Vec<f64>,
    pub geometry: Geometry,
    pub pathloss: PathlossModel,
    pub relay: RelayParams,
    /// Convergence tolerance of both the Dinkelbach and the alternating loops.
    pub epsilon: f64,
    pub caps: SolverCaps,
    pub phase_options: RelaxedSolveOptions,
}

impl SystemConfig {
    /// A configuration with the published hardware constants (`P_c` = 100 dBm,
    /// `mu` = 1.1, element powers 5/15/45 dBm, relay 0.3 / 60 dBm, epsilon 0.01).
    pub fn new(m: usize, k: usize, n: usize) -> Self {
        let mut element_power = BTreeMap::new();
        element_power.insert(Resolution::Bits(1), dbm_to_watts(5.0));
        element_power.insert(Resolution::Bits(2), dbm_to_watts(15.0));
        element_power.insert(Resolution::Continuous, dbm_to_watts(45.0));
        SystemConfig {
            m,
            k,
            n,
            resolution: Resolution::Bits(1),
            p_budget: dbm_to_watts(20.0),
            sigma2: dbm_to_watts(0.0),
            mu: vec![1.1; k],
            p_c: dbm_to_watts(100.0),
            element_power,
            r_min: vec![0.0; k],
            geometry: Geometry::default(),
            pathloss: PathlossModel::default(),
            relay: RelayParams::default(),
            epsilon: 0.01,
            caps: SolverCaps::default(),
            phase_options: RelaxedSolveOptions::default(),
        }
    }

    /// Copy with a different phase resolution.
    pub fn with_resolution(&self, resolution: Resolution) -> Self {
        SystemConfig {
            resolution,
            ..self.clone()
        }
    }

    /// Resizes the per-user vectors, filling new entries with the first value.
    pub fn set_users(&mut self, k: usize) {
        let mu0 = self.mu.first().copied().unwrap_or(1.1);
        let r0 = self.r_min.first().copied().unwrap_or(0.0);
        self.k = k;
        self.mu.resize(k, mu0);
        self.r_min.resize(k, r0);
    }

    /// `P_n(b)` for the configured resolution.
    pub fn element_power_for(&self, resolution: Resolution) -> Result<f64> {
        self.element_power
            .get(&resolution)
            .copied()
            .ok_or(Error::MissingElementPower(resolution))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Domain(msg));
        if self.k == 0 || self.m == 0 || self.n == 0 {
            return fail(format!("M, K, N must be positive (M={}, K={}, N={})", self.m, self.k, self.n));
        }
        if self.m < self.k {
            return fail(format!("need M >= K for zero-forcing, got M={} K={}", self.m, self.k));
        }
        if self.n < self.k {
            return fail(format!("need N >= K, got N={} K={}", self.n, self.k));
        }
        if self.mu.len() != self.k || self.r_min.len() != self.k {
            return Err(Error::dims(
                "per-user vectors",
                self.k,
                format!("mu {} / r_min {}", self.mu.len(), self.r_min.len()),
            ));
        }
        for (name, v) in [("P_budget", self.p_budget), ("sigma2", self.sigma2), ("P_c", self.p_c)] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if let Some(mu) = self.mu.iter().find(|&&m| !(m >= 1.0) || !m.is_finite()) {
            return fail(format!("mu entries must be >= 1, got {mu}"));
        }
        if let Some(r) = self.r_min.iter().find(|&&r| !(r >= 0.0) || !r.is_finite()) {
            return fail(format!("R_min entries must be >= 0, got {r}"));
        }
        for (res, p) in &self.element_power {
            if !(*p > 0.0) || !p.is_finite() {
                return fail(format!("P_n({res}) must be positive, got {p}"));
            }
        }
        self.element_power_for(self.resolution)?;
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.relay.alpha >= 0.0) || !(self.relay.tx_power >= 0.0) {
            return fail("relay alpha and transmit power must be non-negative".into());
        }
        let r = self.geometry.users;
        if !(r.x_max >= r.x_min && r.y_max >= r.y_min) {
            return fail("user rectangle has negative extent".into());
        }
        if !(self.pathloss.ref_distance > 0.0) {
            return fail("pathloss reference distance must be positive".into());
        }
        for link in [LinkType::BsUser, LinkType::BsLis, LinkType::LisUser] {
            let lp = self.pathloss.link(link);
            if !(lp.ref_gain > 0.0) || !lp.ref_gain.is_finite() || !lp.exponent.is_finite() {
                return fail(format!("{link:?} pathloss needs a positive reference gain, got {}", lp.ref_gain));
            }
        }
        self.phase_options.validate()
    }
}
