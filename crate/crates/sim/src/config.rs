//! JSON configuration. Every field is optional; missing ones take the
//! defaults of [`maisac::Config::default`]. Units are spelled out in the field
//! names (dBm, dB, meters, wavelengths, radians).
//!
//! ```json
//! {
//!   "n_tx": 10, "n_rx": 10, "n_users": 5,
//!   "power_dbm": 30, "sinr_db": 10,
//!   "d_max_wavelengths": 4,
//!   "sweep": { "variable": "power", "grid": [20, 25, 30, 35, 40], "modes": ["full-ma", "fpa"], "seeds": 20 },
//!   "ao": { "epsilon": 1e-3, "max_outer": 30 }
//! }
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use maisac::model::{db_to_linear, dbm_to_watts, linear_to_db};
use maisac::{AoMode, AoSettings, Config};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    PowerDbm,
    SinrDb,
    /// `d_max` in wavelengths.
    RegionWavelengths,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::PowerDbm => "power",
            SweepVariable::SinrDb => "sinr",
            SweepVariable::RegionWavelengths => "region",
        }
    }

    /// Nine evenly spaced points over the range plotted for each variable.
    pub fn default_grid(self) -> Vec<f64> {
        let (lo, hi) = match self {
            SweepVariable::PowerDbm => (20.0, 40.0),
            SweepVariable::SinrDb => (5.0, 15.0),
            SweepVariable::RegionWavelengths => (2.0, 8.0),
        };
        (0..9).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect()
    }

    /// Copy of `base` with only the swept field changed.
    pub fn apply(self, base: &Config, value: f64) -> Config {
        let mut c = base.clone();
        match self {
            SweepVariable::PowerDbm => c.power_budget = dbm_to_watts(value),
            SweepVariable::SinrDb => c.sinr_threshold = db_to_linear(value),
            SweepVariable::RegionWavelengths => c.d_max = value * c.wavelength,
        }
        c
    }

    /// The swept quantity as currently set in `config`.
    pub fn read(self, config: &Config) -> f64 {
        match self {
            SweepVariable::PowerDbm => linear_to_db(config.power_budget) + 30.0,
            SweepVariable::SinrDb => linear_to_db(config.sinr_threshold),
            SweepVariable::RegionWavelengths => config.d_max / config.wavelength,
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "power" | "power_dbm" => Ok(SweepVariable::PowerDbm),
            "sinr" | "sinr_db" => Ok(SweepVariable::SinrDb),
            "region" | "region_wavelengths" | "d_max" => Ok(SweepVariable::RegionWavelengths),
            other => Err(format!("unknown sweep variable '{other}' (power, sinr, region)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub modes: Vec<AoMode>,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub base_config: Config,
    pub settings: AoSettings<f64>,
}

impl SweepSpec {
    pub fn new(base_config: Config, variable: SweepVariable) -> Self {
        Self {
            variable,
            grid: variable.default_grid(),
            modes: AoMode::ALL.to_vec(),
            n_seeds: 20,
            master_seed: base_config.rng_seed,
            base_config,
            settings: AoSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.grid.is_empty() {
            errs.push("sweep.grid must not be empty".to_string());
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            errs.push("sweep.grid values must be finite".into());
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            errs.push("sweep.grid must be strictly increasing".into());
        }
        if self.modes.is_empty() {
            errs.push("sweep.modes must not be empty".into());
        }
        if self.n_seeds == 0 {
            errs.push("sweep.seeds must be >= 1".into());
        }
        if !(self.settings.epsilon > 0.0) {
            errs.push("ao.epsilon must be positive".into());
        }
        if self.settings.max_outer == 0 {
            errs.push("ao.max_outer must be >= 1".into());
        }
        for &v in &self.grid {
            if let Err(maisac::Error::InvalidConfig(e)) = self.variable.apply(&self.base_config, v).validate() {
                errs.extend(e.into_iter().map(|m| format!("at {} = {v}: {m}", self.variable)));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Schema(errs))
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: Option<String>,
    grid: Option<Vec<f64>>,
    modes: Option<Vec<String>>,
    seeds: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAo {
    epsilon: Option<f64>,
    max_outer: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_tx: Option<usize>,
    n_rx: Option<usize>,
    n_users: Option<usize>,
    wavelength_m: Option<f64>,
    frame_len: Option<usize>,
    power_dbm: Option<f64>,
    power_w: Option<f64>,
    sinr_db: Option<f64>,
    noise_comm_dbm: Option<f64>,
    noise_radar_dbm: Option<f64>,
    d_min_wavelengths: Option<f64>,
    d_max_wavelengths: Option<f64>,
    region_half_wavelengths: Option<f64>,
    target_angle_rad: Option<f64>,
    target_distance_m: Option<f64>,
    /// Linear `|α|²`; defaults to the squared path gain at the target distance.
    reflect_gain: Option<f64>,
    ref_gain_db: Option<f64>,
    pathloss_exp: Option<f64>,
    n_tx_paths: Option<usize>,
    n_rx_paths: Option<usize>,
    user_dist_min_m: Option<f64>,
    user_dist_max_m: Option<f64>,
    seed: Option<u64>,
    sweep: Option<RawSweep>,
    ao: Option<RawAo>,
}

/// Parsed file: the base scenario plus the sweep it describes (with defaults
/// for a power sweep when the file has no `sweep` section).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: Config,
    pub sweep: SweepSpec,
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut errs = Vec::new();
    let mut c = Config::default();
    if let Some(v) = raw.wavelength_m {
        c.wavelength = v;
    }
    let lam = c.wavelength;
    macro_rules! set {
        ($field:ident, $target:expr) => {
            if let Some(v) = raw.$field {
                $target = v;
            }
        };
        ($field:ident, $target:expr, $map:expr) => {
            if let Some(v) = raw.$field {
                $target = $map(v);
            }
        };
    }
    set!(n_tx, c.n_tx);
    set!(n_rx, c.n_rx);
    set!(n_users, c.n_users);
    set!(frame_len, c.frame_len);
    match (raw.power_dbm, raw.power_w) {
        (Some(_), Some(_)) => errs.push("give power_dbm or power_w, not both".to_string()),
        (Some(dbm), None) => c.power_budget = dbm_to_watts(dbm),
        (None, Some(w)) => {
            if !(w > 0.0) {
                errs.push(format!("power_w must be positive (got {w})"));
            }
            c.power_budget = w;
        }
        (None, None) => {}
    }
    set!(sinr_db, c.sinr_threshold, db_to_linear);
    set!(noise_comm_dbm, c.noise_comm, dbm_to_watts);
    set!(noise_radar_dbm, c.noise_radar, dbm_to_watts);
    set!(d_min_wavelengths, c.d_min, |v: f64| v * lam);
    set!(d_max_wavelengths, c.d_max, |v: f64| v * lam);
    set!(region_half_wavelengths, c.user_region_half_side, |v: f64| v * lam);
    set!(target_angle_rad, c.target_angle);
    set!(target_distance_m, c.target_distance);
    if let Some(g) = raw.reflect_gain {
        c.reflect_gain = Some(g);
    }
    set!(ref_gain_db, c.ref_gain_1m, db_to_linear);
    set!(pathloss_exp, c.pathloss_exp);
    set!(n_tx_paths, c.n_tx_paths);
    set!(n_rx_paths, c.n_rx_paths);
    set!(user_dist_min_m, c.user_dist_range.0);
    set!(user_dist_max_m, c.user_dist_range.1);
    set!(seed, c.rng_seed);

    if let Err(maisac::Error::InvalidConfig(e)) = c.validate() {
        errs.extend(e);
    }

    let raw_sweep = raw.sweep.unwrap_or_default();
    let variable = match raw_sweep.variable.as_deref().map(str::parse::<SweepVariable>) {
        None => SweepVariable::PowerDbm,
        Some(Ok(v)) => v,
        Some(Err(e)) => {
            errs.push(format!("sweep.variable: {e}"));
            SweepVariable::PowerDbm
        }
    };
    let mut sweep = SweepSpec::new(c.clone(), variable);
    if let Some(g) = raw_sweep.grid {
        sweep.grid = g;
    }
    if let Some(modes) = raw_sweep.modes {
        sweep.modes.clear();
        for m in modes {
            match m.parse::<AoMode>() {
                Ok(mode) => sweep.modes.push(mode),
                Err(e) => errs.push(format!("sweep.modes: {e}")),
            }
        }
    }
    if let Some(n) = raw_sweep.seeds {
        sweep.n_seeds = n;
    }
    if let Some(ao) = raw.ao {
        if let Some(e) = ao.epsilon {
            sweep.settings.epsilon = e;
        }
        if let Some(m) = ao.max_outer {
            sweep.settings.max_outer = m;
        }
    }
    if !errs.is_empty() {
        return Err(ConfigError::Schema(errs));
    }
    sweep.validate()?;
    Ok(LoadedConfig { config: c, sweep })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c.config, Config::default());
        assert_eq!(c.sweep.variable, SweepVariable::PowerDbm);
        assert_eq!(c.sweep.grid.len(), 9);
        assert_eq!(c.sweep.n_seeds, 20);
    }

    #[test]
    fn pathloss_exponent_accepted() {
        let c = parse_config(r#"{"pathloss_exp": 2.8}"#).unwrap();
        assert_eq!(c.config.pathloss_exp, 2.8);
    }

    #[test]
    fn negative_power_is_schema_error() {
        match parse_config(r#"{"power_w": -1}"#) {
            Err(ConfigError::Schema(e)) => assert!(e.iter().any(|m| m.contains("power_w"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_config("{\n  \"n_tx\": 4,\n  \"n_rx\": }") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(matches!(parse_config(r#"{"n_txx": 4}"#), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn all_violations_listed() {
        match parse_config(r#"{"n_tx": 0, "sweep": {"grid": [3, 2], "seeds": 0, "modes": ["x"]}}"#) {
            Err(ConfigError::Schema(e)) => assert!(e.len() >= 2, "{e:?}"),
            other => panic!("{other:?}"),
        }
        match parse_config(r#"{"sweep": {"grid": [3, 2], "seeds": 0}}"#) {
            Err(ConfigError::Schema(e)) => assert_eq!(e.len(), 2, "{e:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_touches_only_its_field() {
        let base = Config::default();
        for (var, v) in [
            (SweepVariable::PowerDbm, 37.0),
            (SweepVariable::SinrDb, 13.0),
            (SweepVariable::RegionWavelengths, 6.5),
        ] {
            let c = var.apply(&base, v);
            assert!((var.read(&c) - v).abs() < 1e-12);
            let mut restored = c.clone();
            match var {
                SweepVariable::PowerDbm => restored.power_budget = base.power_budget,
                SweepVariable::SinrDb => restored.sinr_threshold = base.sinr_threshold,
                SweepVariable::RegionWavelengths => restored.d_max = base.d_max,
            }
            assert_eq!(restored, base, "{var}");
        }
    }

    #[test]
    fn region_grid_must_fit_the_array() {
        // 9 antennas at λ/5 need 1.8λ
        let r = parse_config(r#"{"sweep": {"variable": "region", "grid": [1, 2]}}"#);
        assert!(matches!(r, Err(ConfigError::Schema(_))));
    }
}
