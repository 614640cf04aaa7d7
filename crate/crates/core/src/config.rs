//! Physical and numerical parameters, the control decision vector, and the
//! flat `key = value` file format they are read from.
//!
//! The file format is a subset of TOML: one `key = value` per line, `#`
//! comments, numbers only. Every key in [`REQUIRED_KEYS`] must be present and
//! unknown keys are rejected so that typos surface immediately. Lengths are in
//! meters; in particular the pipe diameter `D` is given in meters
//! (100 mm is written `D = 0.1`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use toml::Value;

use crate::error::{Error, Result};

/// Keys that must appear in every config file.
pub const REQUIRED_KEYS: [&str; 14] = [
    "L", "D", "rho", "c", "f", "P", "P_bar", "gamma", "u_max", "T", "N", "r", "M", "theta_min",
];

/// Keys that may appear but have a default.
pub const OPTIONAL_KEYS: [&str; 1] = ["substeps"];

/// Physical constants of the pipe and the fluid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Pipe length `L` [m].
    pub length: f64,
    /// Pipe diameter `D` [m].
    pub diameter: f64,
    /// Fluid density `rho` [kg/m³].
    pub density: f64,
    /// Pressure wave speed `c` [m/s].
    pub wave_speed: f64,
    /// Darcy-Weisbach friction factor `f`.
    pub friction: f64,
    /// Reservoir pressure `P` at the upstream end [Pa].
    pub reservoir_pressure: f64,
    /// Pressure datum `P_bar` normalizing the objective [Pa].
    pub pressure_datum: f64,
    /// Exponent `gamma`; the objective integrand is a `2*gamma` power.
    pub gamma: u32,
    /// Initial (and maximum) flow velocity `u_max` [m/s].
    pub u_max: f64,
    /// Valve operation horizon `T` [s].
    pub horizon: f64,
}

impl PipelineConfig {
    /// The benchmark pipeline: 100 m, 100 mm bore, water at 1200 m/s wave speed.
    pub fn benchmark() -> Self {
        PipelineConfig {
            length: 100.0,
            diameter: 0.1,
            density: 1000.0,
            wave_speed: 1200.0,
            friction: 0.03,
            reservoir_pressure: 2e5,
            pressure_datum: 1e5,
            gamma: 2,
            u_max: 2.0,
            horizon: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("L", self.length)?;
        positive("D", self.diameter)?;
        positive("rho", self.density)?;
        positive("c", self.wave_speed)?;
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::invalid("f", "f must be non-negative"));
        }
        if !self.reservoir_pressure.is_finite() {
            return Err(Error::invalid("P", "P must be finite"));
        }
        positive("P_bar", self.pressure_datum)?;
        if self.gamma < 1 {
            return Err(Error::invalid("gamma", "gamma must be an integer >= 1"));
        }
        positive("u_max", self.u_max)?;
        positive("T", self.horizon)?;
        Ok(())
    }

    /// Normalized pressure deviation raised to the objective power.
    #[inline]
    pub fn penalty(&self, p: f64) -> f64 {
        ((p - self.reservoir_pressure) / self.pressure_datum).powi(2 * self.gamma as i32)
    }

    /// Derivative of [`penalty`](Self::penalty) with respect to `p`.
    #[inline]
    pub fn penalty_derivative(&self, p: f64) -> f64 {
        let g = self.gamma as i32;
        2.0 * g as f64 / self.pressure_datum
            * ((p - self.reservoir_pressure) / self.pressure_datum).powi(2 * g - 1)
    }
}

/// Grid sizes for the method of lines and the quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizationConfig {
    /// Spatial cell count `N` (even).
    pub cells: usize,
    /// Number of control segments `r`.
    pub segments: usize,
    /// Quadrature/report subintervals per unit of scaled time, `M` (even).
    pub subintervals: usize,
    /// Lower bound on every segment duration [s].
    pub theta_min: f64,
    /// RK4 substeps per subinterval. `None` picks the smallest count that keeps
    /// the step stable for any segment duration up to `T`.
    pub substeps: Option<usize>,
}

impl DiscretizationConfig {
    /// Builds a discretization with the default `theta_min = 0.01 T / r`.
    pub fn new(cells: usize, segments: usize, subintervals: usize, cfg: &PipelineConfig) -> Self {
        DiscretizationConfig {
            cells,
            segments,
            subintervals,
            theta_min: 0.01 * cfg.horizon / segments.max(1) as f64,
            substeps: None,
        }
    }

    /// N = 18, r = 10, M = 100.
    pub fn benchmark(cfg: &PipelineConfig) -> Self {
        Self::new(18, 10, 100, cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 || !self.cells.is_multiple_of(2) {
            return Err(Error::invalid("N", "N must be even and at least 2"));
        }
        if self.segments < 1 {
            return Err(Error::invalid("r", "r must be at least 1"));
        }
        if self.subintervals < 2 || !self.subintervals.is_multiple_of(2) {
            return Err(Error::invalid("M", "M must be even and at least 2"));
        }
        if !(self.theta_min.is_finite() && self.theta_min > 0.0) {
            return Err(Error::invalid("theta_min", "theta_min must be positive"));
        }
        if self.substeps == Some(0) {
            return Err(Error::invalid("substeps", "substeps must be at least 1"));
        }
        Ok(())
    }
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("{key} must be positive")))
    }
}

/// The decision vector: per-segment slopes, intercepts and durations.
///
/// On segment `k` the valve velocity is `sigma1[k] * t + sigma2[k]` where `t`
/// is physical time; `theta[k]` is the segment's duration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlParams {
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ControlParams {
    pub fn segments(&self) -> usize {
        self.theta.len()
    }

    /// Flattens to `[sigma1.., sigma2.., theta..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.theta.len());
        x.extend_from_slice(&self.sigma1);
        x.extend_from_slice(&self.sigma2);
        x.extend_from_slice(&self.theta);
        x
    }

    /// Inverse of [`to_vec`](Self::to_vec).
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(3) || x.is_empty() {
            return Err(Error::InvalidParams(format!(
                "flat vector of length {} is not 3r",
                x.len()
            )));
        }
        let r = x.len() / 3;
        Ok(ControlParams {
            sigma1: x[..r].to_vec(),
            sigma2: x[r..2 * r].to_vec(),
            theta: x[2 * r..].to_vec(),
        })
    }

    /// Switching times `t_k = theta_1 + ... + theta_k` for k = 1..r.
    pub fn switching_times(&self) -> Vec<f64> {
        self.theta
            .iter()
            .scan(0.0, |acc, th| {
                *acc += th;
                Some(*acc)
            })
            .collect()
    }

    /// Serializes as `sigma1_1 = ...` lines (1-based segment labels).
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (name, values) in [
            ("sigma1", &self.sigma1),
            ("sigma2", &self.sigma2),
            ("theta", &self.theta),
        ] {
            for (k, x) in values.iter().enumerate() {
                let _ = writeln!(out, "{name}_{} = {x:?}", k + 1);
            }
        }
        out
    }

    /// Parses the format written by [`to_kv_string`](Self::to_kv_string).
    pub fn parse(text: &str) -> Result<Self> {
        let table = parse_table(text)?;
        let mut groups: [BTreeMap<usize, f64>; 3] = Default::default();
        for (key, value) in &table {
            let (name, idx) = key
                .rsplit_once('_')
                .ok_or_else(|| Error::UnknownKey(key.clone()))?;
            let slot = match name {
                "sigma1" => 0,
                "sigma2" => 1,
                "theta" => 2,
                _ => return Err(Error::UnknownKey(key.clone())),
            };
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::UnknownKey(key.clone()))?;
            groups[slot].insert(idx, number(key, value)?);
        }
        let r = groups[2].len();
        if r == 0 {
            return Err(Error::MissingKey("theta_1".into()));
        }
        let mut out: [Vec<f64>; 3] = Default::default();
        for (slot, name) in ["sigma1", "sigma2", "theta"].iter().enumerate() {
            for k in 1..=r {
                let x = groups[slot]
                    .get(&k)
                    .ok_or_else(|| Error::MissingKey(format!("{name}_{k}")))?;
                out[slot].push(*x);
            }
            if groups[slot].len() != r {
                return Err(Error::InvalidParams(format!(
                    "{name} has {} entries, theta has {r}",
                    groups[slot].len()
                )));
            }
        }
        let [sigma1, sigma2, theta] = out;
        Ok(ControlParams {
            sigma1,
            sigma2,
            theta,
        })
    }
}

/// Checks lengths against `r` and every duration against `theta_min`.
pub fn validate_params(params: &ControlParams, disc: &DiscretizationConfig) -> Result<()> {
    let r = disc.segments;
    for (name, v) in [
        ("sigma1", &params.sigma1),
        ("sigma2", &params.sigma2),
        ("theta", &params.theta),
    ] {
        if v.len() != r {
            return Err(Error::InvalidParams(format!(
                "{name} has {} entries, expected r = {r}",
                v.len()
            )));
        }
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParams(format!("{name}_{} is not finite", k + 1)));
        }
    }
    if let Some(k) = params.theta.iter().position(|&th| !(th >= disc.theta_min)) {
        return Err(Error::InvalidParams(format!(
            "theta_{} = {} is below theta_min = {}",
            k + 1,
            params.theta[k],
            disc.theta_min
        )));
    }
    Ok(())
}

/// A parsed but not yet validated config file, kept as raw values so that
/// command-line overrides can be applied before validation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, Value>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table = parse_table(text)?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            if !is_known_key(&key) {
                return Err(Error::UnknownKey(key));
            }
            values.insert(key, value);
        }
        Ok(RawConfig { values })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Syntax(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        if !is_known_key(key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        let table = parse_table(&format!("v = {}", value.trim()))?;
        let value = table
            .get("v")
            .cloned()
            .ok_or_else(|| Error::Syntax(format!("override `{assignment}` has no value")))?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn build(&self) -> Result<(PipelineConfig, DiscretizationConfig)> {
        let cfg = PipelineConfig {
            length: self.real("L")?,
            diameter: self.real("D")?,
            density: self.real("rho")?,
            wave_speed: self.real("c")?,
            friction: self.real("f")?,
            reservoir_pressure: self.real("P")?,
            pressure_datum: self.real("P_bar")?,
            gamma: self.integer("gamma")?,
            u_max: self.real("u_max")?,
            horizon: self.real("T")?,
        };
        cfg.validate()?;
        let substeps = match self.values.contains_key("substeps") {
            true => Some(self.integer::<usize>("substeps")?),
            false => None,
        };
        let disc = DiscretizationConfig {
            cells: self.integer("N")?,
            segments: self.integer("r")?,
            subintervals: self.integer("M")?,
            theta_min: self.real("theta_min")?,
            substeps,
        };
        disc.validate()?;
        Ok((cfg, disc))
    }

    fn get(&self, key: &str) -> Result<&Value> {
        self.values
            .get(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn real(&self, key: &str) -> Result<f64> {
        number(key, self.get(key)?)
    }

    fn integer<T: TryFrom<i64>>(&self, key: &str) -> Result<T> {
        match self.get(key)? {
            Value::Integer(i) => {
                T::try_from(*i).map_err(|_| Error::invalid(key, format!("{i} is out of range")))
            }
            _ => Err(Error::invalid(key, "expected an integer")),
        }
    }
}

fn is_known_key(key: &str) -> bool {
    REQUIRED_KEYS.contains(&key) || OPTIONAL_KEYS.contains(&key)
}

fn number(key: &str, value: &Value) -> Result<f64> {
    match value {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::invalid(key, "expected a number")),
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    toml::from_str::<toml::Table>(text).map_err(|e| Error::Syntax(e.message().to_string()))
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<(PipelineConfig, DiscretizationConfig)> {
    RawConfig::read(path)?.build()
}

/// Reads a control-parameter file (`sigma1_1 = ...`).
pub fn load_params(path: &Path) -> Result<ControlParams> {
    ControlParams::parse(&read_to_string(path)?)
}

/// Writes both configs in the file format; [`RawConfig::parse`] followed by
/// [`RawConfig::build`] reproduces every field exactly.
pub fn config_to_string(cfg: &PipelineConfig, disc: &DiscretizationConfig) -> String {
    let mut out = String::new();
    let reals = [
        ("L", cfg.length),
        ("D", cfg.diameter),
        ("rho", cfg.density),
        ("c", cfg.wave_speed),
        ("f", cfg.friction),
        ("P", cfg.reservoir_pressure),
        ("P_bar", cfg.pressure_datum),
    ];
    for (k, x) in reals {
        let _ = writeln!(out, "{k} = {x:?}");
    }
    let _ = writeln!(out, "gamma = {}", cfg.gamma);
    let _ = writeln!(out, "u_max = {:?}", cfg.u_max);
    let _ = writeln!(out, "T = {:?}", cfg.horizon);
    let _ = writeln!(out, "N = {}", disc.cells);
    let _ = writeln!(out, "r = {}", disc.segments);
    let _ = writeln!(out, "M = {}", disc.subintervals);
    let _ = writeln!(out, "theta_min = {:?}", disc.theta_min);
    if let Some(q) = disc.substeps {
        let _ = writeln!(out, "substeps = {q}");
    }
    out
}
