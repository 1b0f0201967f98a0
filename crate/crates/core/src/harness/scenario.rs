//! Scenario files: flat `key = value` lines, `#` starts a comment.
//!
//! Powers are given in dBm, gains in dB and distances in meters. Exactly one
//! `sweep.*` key is required.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{LinkType, Point, Rect, Resolution, SystemConfig};
use crate::error::{Error, Result};
use crate::solver::{enumeration_size, surface_method_tag, EXHAUSTIVE_TAG, RELAY_TAG};
use crate::units::{db_to_linear, dbm_to_watts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Transmit power budget in dBm.
    PBudgetDbm,
    /// Number of surface elements.
    N,
    /// Transmit SNR `P / sigma2` in dB, with `sigma2` held fixed.
    SnrDb,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::PBudgetDbm => "p_budget_dbm",
            SweepAxis::N => "n",
            SweepAxis::SnrDb => "snr_db",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "p_budget_dbm" => Ok(SweepAxis::PBudgetDbm),
            "n" => Ok(SweepAxis::N),
            "snr" | "snr_db" => Ok(SweepAxis::SnrDb),
            other => Err(Error::Scenario(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Alternating optimization with a surface of the given resolution.
    Lis(Resolution),
    /// Exhaustive search at the scenario's base resolution.
    Exhaustive,
    Relay,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Lis(res) => f.write_str(&surface_method_tag(*res)),
            Method::Exhaustive => f.write_str(EXHAUSTIVE_TAG),
            Method::Relay => f.write_str(RELAY_TAG),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Scenario(format!("unknown method '{s}'"));
        match s {
            EXHAUSTIVE_TAG => Ok(Method::Exhaustive),
            RELAY_TAG => Ok(Method::Relay),
            "lis-continuous" => Ok(Method::Lis(Resolution::Continuous)),
            _ => {
                let bits = s.strip_prefix("lis-").and_then(|r| r.strip_suffix("bit")).ok_or_else(bad)?;
                let res: Resolution = bits.parse().map_err(|_| bad())?;
                Ok(Method::Lis(res))
            }
        }
    }
}

/// Power allocation used for the reported rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Allocation {
    /// Energy-efficiency maximizing powers.
    Ee,
    /// After the design, powers are refilled to maximize the sum rate.
    MaxRate,
}

/// Per-user minimum rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RateRule {
    Fixed(Vec<f64>),
    /// `log2(1 + SNR / (2K))` at each sweep point, i.e. a minimum power of
    /// `P / (2K)` per user.
    SnrSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub base: SystemConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    pub allocation: Allocation,
    pub rate_rule: RateRule,
    /// The key/value pairs as read, for the run manifest.
    pub source: BTreeMap<String, String>,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Scenario(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_point(key: &str, value: &str) -> Result<Point> {
    match parse_list::<f64>(key, value)?.as_slice() {
        [x, y] => Ok(Point { x: *x, y: *y }),
        _ => Err(Error::Scenario(format!("{key}: expected 'x, y'"))),
    }
}

fn link_of(name: &str) -> Option<LinkType> {
    match name {
        "bs_user" => Some(LinkType::BsUser),
        "bs_lis" => Some(LinkType::BsLis),
        "lis_user" => Some(LinkType::LisUser),
        _ => None,
    }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    /// Replaces the sweep axis and its values.
    pub fn with_sweep(mut self, axis: SweepAxis, values: Vec<f64>) -> Result<Self> {
        self.source.retain(|k, _| !k.starts_with("sweep."));
        self.source.insert(
            format!("sweep.{}", axis.key()),
            values.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        self.axis = axis;
        self.values = values;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Scenario(msg));
        if self.values.is_empty() {
            return fail("sweep list is empty".into());
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) || self.values.iter().any(|v| !v.is_finite()) {
            return fail("sweep values must be finite and strictly increasing".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return fail("no methods given".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return fail(format!("method {m} listed twice"));
            }
        }
        for index in 0..self.values.len() {
            let cfg = self.config_at(index)?;
            for m in &self.methods {
                match m {
                    Method::Lis(res) => {
                        cfg.element_power_for(*res)?;
                    }
                    Method::Exhaustive => {
                        let required = enumeration_size(&cfg)?;
                        if required > cfg.caps.enumeration {
                            return Err(Error::EnumerationCap {
                                required,
                                cap: cfg.caps.enumeration,
                            });
                        }
                    }
                    Method::Relay => {}
                }
            }
        }
        Ok(())
    }

    /// System configuration at one sweep point.
    pub fn config_at(&self, index: usize) -> Result<SystemConfig> {
        let value = *self.values.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.values.len(),
        })?;
        let mut cfg = self.base.clone();
        match self.axis {
            SweepAxis::PBudgetDbm => cfg.p_budget = dbm_to_watts(value),
            SweepAxis::N => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Scenario(format!("sweep.n: {value} is not a positive integer")));
                }
                cfg.n = value as usize;
            }
            SweepAxis::SnrDb => cfg.p_budget = db_to_linear(value) * cfg.sigma2,
        }
        cfg.r_min = match &self.rate_rule {
            RateRule::Fixed(r) => r.clone(),
            RateRule::SnrSplit => {
                let snr = cfg.p_budget / cfg.sigma2;
                vec![(1.0 + snr / (2.0 * cfg.k as f64)).log2(); cfg.k]
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut source = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Scenario(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim().to_string();
            if source.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Scenario(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }

        let get = |k: &str| source.get(k).map(String::as_str);
        let m = parse_num("m", get("m").ok_or_else(|| Error::Scenario("missing key 'm'".into()))?)?;
        let k = parse_num("k", get("k").ok_or_else(|| Error::Scenario("missing key 'k'".into()))?)?;
        let n = match get("n") {
            Some(v) => parse_num("n", v)?,
            None => 1,
        };
        let mut base = SystemConfig::new(m, k, n);
        let mut axis_values: Option<(SweepAxis, Vec<f64>)> = None;
        let mut methods = Vec::new();
        let mut trials = 50;
        let mut master_seed = 0;
        let mut allocation = Allocation::Ee;
        let mut rate_rule = RateRule::Fixed(vec![0.0; k]);

        for (key, value) in &source {
            let key = key.as_str();
            let value = value.as_str();
            match key {
                "m" | "k" | "n" => {}
                "b" => base.resolution = parse_num(key, value)?,
                "p_budget_dbm" => base.p_budget = dbm_to_watts(parse_num(key, value)?),
                "sigma2_dbm" => base.sigma2 = dbm_to_watts(parse_num(key, value)?),
                "p_c_dbm" => base.p_c = dbm_to_watts(parse_num(key, value)?),
                "mu" => {
                    let mu: Vec<f64> = parse_list(key, value)?;
                    base.mu = match mu.as_slice() {
                        [single] => vec![*single; k],
                        _ => mu,
                    };
                }
                "r_min" => {
                    let r: Vec<f64> = parse_list(key, value)?;
                    rate_rule = RateRule::Fixed(match r.as_slice() {
                        [single] => vec![*single; k],
                        _ => r,
                    });
                }
                "r_min_rule" => match value {
                    "snr-split" => rate_rule = RateRule::SnrSplit,
                    "none" => {}
                    _ => return Err(Error::Scenario(format!("r_min_rule: unknown rule '{value}'"))),
                },
                "epsilon" => base.epsilon = parse_num(key, value)?,
                "trials" => trials = parse_num(key, value)?,
                "master_seed" => master_seed = parse_num(key, value)?,
                "methods" => {
                    methods = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<Vec<Method>>>()?
                }
                "allocation" => {
                    allocation = match value {
                        "ee" => Allocation::Ee,
                        "max-rate" => Allocation::MaxRate,
                        _ => return Err(Error::Scenario(format!("allocation: expected 'ee' or 'max-rate', got '{value}'"))),
                    }
                }
                "relay.alpha" => base.relay.alpha = parse_num(key, value)?,
                "relay.tx_dbm" => base.relay.tx_power = dbm_to_watts(parse_num(key, value)?),
                "geometry.bs" => base.geometry.bs = parse_point(key, value)?,
                "geometry.lis" => base.geometry.lis = parse_point(key, value)?,
                "geometry.users" => match parse_list::<f64>(key, value)?.as_slice() {
                    [x_min, x_max, y_min, y_max] => {
                        base.geometry.users = Rect {
                            x_min: *x_min,
                            x_max: *x_max,
                            y_min: *y_min,
                            y_max: *y_max,
                        }
                    }
                    _ => return Err(Error::Scenario(format!("{key}: expected 'x_min, x_max, y_min, y_max'"))),
                },
                "pathloss.ref_distance" => base.pathloss.ref_distance = parse_num(key, value)?,
                "caps.dinkelbach" => base.caps.dinkelbach_iterations = parse_num(key, value)?,
                "caps.outer" => base.caps.outer_iterations = parse_num(key, value)?,
                "caps.enumeration" => base.caps.enumeration = parse_num(key, value)?,
                "phase.max_iterations" => base.phase_options.max_iterations = parse_num(key, value)?,
                "phase.restarts" => base.phase_options.num_restarts = parse_num(key, value)?,
                "phase.gradient_tolerance" => base.phase_options.gradient_tolerance = parse_num(key, value)?,
                "phase.step_tolerance" => base.phase_options.step_tolerance = parse_num(key, value)?,
                "phase.fd_step" => base.phase_options.finite_difference_step = parse_num(key, value)?,
                _ if key.starts_with("sweep.") => {
                    if axis_values.is_some() {
                        return Err(Error::Scenario("more than one sweep.* key".into()));
                    }
                    let axis: SweepAxis = key["sweep.".len()..].parse()?;
                    axis_values = Some((axis, parse_list(key, value)?));
                }
                _ if key.starts_with("p_n_dbm.") => {
                    let res: Resolution = key["p_n_dbm.".len()..].parse()?;
                    base.element_power.insert(res, dbm_to_watts(parse_num(key, value)?));
                }
                _ if key.starts_with("pathloss.") => {
                    let rest = &key["pathloss.".len()..];
                    let (link, field) = rest
                        .split_once('.')
                        .and_then(|(l, f)| Some((link_of(l)?, f)))
                        .ok_or_else(|| Error::Scenario(format!("unknown key '{key}'")))?;
                    let entry = base.pathloss.link_mut(link);
                    match field {
                        "exponent" => entry.exponent = parse_num(key, value)?,
                        "ref_gain_db" => entry.ref_gain = db_to_linear(parse_num(key, value)?),
                        _ => return Err(Error::Scenario(format!("unknown key '{key}'"))),
                    }
                }
                _ => return Err(Error::Scenario(format!("unknown key '{key}'"))),
            }
        }

        let (axis, values) = match axis_values {
            Some(av) => av,
            None => match get("p_budget_dbm") {
                Some(v) => (SweepAxis::PBudgetDbm, vec![parse_num("p_budget_dbm", v)?]),
                None => return Err(Error::Scenario("no sweep.* key and no p_budget_dbm".into())),
            },
        };
        if methods.is_empty() {
            methods.push(Method::Lis(base.resolution));
        }
        let scenario = Scenario {
            base,
            axis,
            values,
            methods,
            trials,
            master_seed,
            allocation,
            rate_rule,
            source,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
