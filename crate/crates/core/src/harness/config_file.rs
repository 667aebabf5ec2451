//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may
//! appear at most once and unknown keys are rejected.
//!
//! | key | meaning |
//! |-----|---------|
//! | `users`, `subcarriers`, `taps` | K, N, S |
//! | `pilot_len`, `payload_len`, `feedback_delay` | M, T, T_D |
//! | `doppler` | normalized Doppler ν_D |
//! | `velocity_kmh` | alternative to `doppler`, converted with `carrier_hz` and `symbol_rate` |
//! | `snr_db` or `power` | transmit power per subcarrier |
//! | `bits` | feedback bits per link |
//! | `pdp` | comma-separated tap powers, rescaled to sum to N; `flat` by default |
//! | `dimension` | `adaptive` or a fixed subspace dimension |
//! | `quantizer` | `perturbation` or `explicit-rvq` |
//! | `spectrum` | `clarke` or `flat` |
//! | `rotations`, `seed`, `trials` | precoder rotations, master seed, Monte-Carlo trials |
//! | `name`, `axis`, `grid`, `strategies` | scenario description, see [`super::scenario`] |

use super::scenario::{parse_grid, parse_strategies, Axis, Strategy};
use crate::config::{doppler_from_velocity, flat_pdp, SimConfig, DEFAULT_CARRIER_HZ, LTE_SYMBOL_RATE};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

const KEYS: &[&str] = &[
    "users",
    "subcarriers",
    "taps",
    "pilot_len",
    "payload_len",
    "feedback_delay",
    "doppler",
    "velocity_kmh",
    "carrier_hz",
    "symbol_rate",
    "snr_db",
    "power",
    "bits",
    "pdp",
    "dimension",
    "quantizer",
    "spectrum",
    "rotations",
    "seed",
    "trials",
    "name",
    "axis",
    "grid",
    "strategies",
];

/// Contents of a configuration file. Scenario keys are optional so a file
/// can also override the parameters of a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub sim: SimConfig,
    /// Keys present in the file, for merging onto presets.
    pub keys: Vec<String>,
    pub name: Option<String>,
    pub axis: Option<Axis>,
    pub grid: Option<Vec<f64>>,
    pub strategies: Option<Vec<Strategy>>,
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("cannot parse `{raw}` as the value of `{key}`")))
}

fn parse_pdp(raw: &str, taps: usize, subcarriers: usize) -> Result<Vec<f64>> {
    if raw == "flat" {
        return Ok(flat_pdp(taps, subcarriers));
    }
    let pdp: Vec<f64> = raw.split(',').map(|t| value("pdp", t.trim())).collect::<Result<_>>()?;
    let total: f64 = pdp.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Config("pdp must have positive total power".into()));
    }
    Ok(pdp.iter().map(|p| p * subcarriers as f64 / total).collect())
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", no + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Self::from_map(&map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let mut sim = SimConfig::default();
        if let Some(v) = get("users") {
            sim.users = value("users", v)?;
        }
        if let Some(v) = get("subcarriers") {
            sim.subcarriers = value("subcarriers", v)?;
        }
        if let Some(v) = get("taps") {
            sim.taps = value("taps", v)?;
        }
        sim.pdp = parse_pdp(get("pdp").unwrap_or("flat"), sim.taps, sim.subcarriers)?;
        if let Some(v) = get("pilot_len") {
            sim.pilot_len = value("pilot_len", v)?;
        }
        if let Some(v) = get("payload_len") {
            sim.payload_len = value("payload_len", v)?;
        }
        if let Some(v) = get("feedback_delay") {
            sim.feedback_delay = value("feedback_delay", v)?;
        }
        match (get("doppler"), get("velocity_kmh")) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `doppler` or `velocity_kmh`".into())),
            (Some(v), None) => sim.doppler = value("doppler", v)?,
            (None, Some(v)) => {
                let carrier = get("carrier_hz").map(|c| value("carrier_hz", c)).transpose()?;
                let rate = get("symbol_rate").map(|c| value("symbol_rate", c)).transpose()?;
                sim.doppler = doppler_from_velocity(
                    value("velocity_kmh", v)?,
                    carrier.unwrap_or(DEFAULT_CARRIER_HZ),
                    rate.unwrap_or(LTE_SYMBOL_RATE),
                );
            }
            (None, None) => {}
        }
        if get("velocity_kmh").is_none() && (get("carrier_hz").is_some() || get("symbol_rate").is_some()) {
            return Err(Error::Config("`carrier_hz` and `symbol_rate` only apply with `velocity_kmh`".into()));
        }
        match (get("snr_db"), get("power")) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `snr_db` or `power`".into())),
            (Some(v), None) => sim.set_snr_db(value("snr_db", v)?),
            (None, Some(v)) => sim.power = value("power", v)?,
            (None, None) => {}
        }
        if let Some(v) = get("bits") {
            sim.bits = value("bits", v)?;
        }
        if let Some(v) = get("dimension") {
            sim.dimension = v.parse()?;
        }
        if let Some(v) = get("quantizer") {
            sim.quantizer = v.parse()?;
        }
        if let Some(v) = get("spectrum") {
            sim.spectrum = v.parse()?;
        }
        if let Some(v) = get("rotations") {
            sim.rotations = value("rotations", v)?;
        }
        if let Some(v) = get("seed") {
            sim.seed = value("seed", v)?;
        }
        if let Some(v) = get("trials") {
            sim.trials = value("trials", v)?;
        }
        sim.validate()?;
        Ok(ConfigFile {
            sim,
            keys: map.keys().cloned().collect(),
            name: get("name").map(str::to_string),
            axis: get("axis").map(str::parse).transpose()?,
            grid: get("grid").map(parse_grid).transpose()?,
            strategies: get("strategies").map(parse_strategies).transpose()?,
        })
    }

    /// Copies every simulation parameter set in this file onto `base`.
    pub fn apply_to(&self, base: &mut SimConfig) -> Result<()> {
        let has = |k: &str| self.keys.iter().any(|x| x == k);
        let s = &self.sim;
        if has("users") {
            base.users = s.users;
        }
        if has("subcarriers") || has("taps") || has("pdp") {
            base.subcarriers = s.subcarriers;
            base.taps = s.taps;
            base.pdp = s.pdp.clone();
        }
        if has("pilot_len") {
            base.pilot_len = s.pilot_len;
        }
        if has("payload_len") {
            base.payload_len = s.payload_len;
        }
        if has("feedback_delay") {
            base.feedback_delay = s.feedback_delay;
        }
        if has("doppler") || has("velocity_kmh") {
            base.doppler = s.doppler;
        }
        if has("snr_db") || has("power") {
            base.power = s.power;
        }
        if has("bits") {
            base.bits = s.bits;
        }
        if has("dimension") {
            base.dimension = s.dimension;
        }
        if has("quantizer") {
            base.quantizer = s.quantizer;
        }
        if has("spectrum") {
            base.spectrum = s.spectrum;
        }
        if has("rotations") {
            base.rotations = s.rotations;
        }
        if has("seed") {
            base.seed = s.seed;
        }
        if has("trials") {
            base.trials = s.trials;
        }
        base.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let f = ConfigFile::parse("# nothing\n\n").unwrap();
        assert_eq!(f.sim, SimConfig::default());
        assert!(f.axis.is_none() && f.strategies.is_none());
    }

    #[test]
    fn parses_keys() {
        let f = ConfigFile::parse(
            "snr_db = 20\nbits=30\nfeedback_delay = 7\npayload_len = 30\nvelocity_kmh = 24.2\npdp = 3,2,1\n\
             strategies = adaptive, baseline, d1\naxis = snr_db\ngrid = 0:10:5\n",
        )
        .unwrap();
        assert!((f.sim.snr_db() - 20.0).abs() < 1e-12);
        assert_eq!(f.sim.bits, 30);
        assert!((f.sim.doppler - 0.004).abs() < 1e-4);
        assert!((f.sim.pdp[0] - 2.5).abs() < 1e-12);
        assert_eq!(f.grid.unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(f.strategies.unwrap(), vec![Strategy::Adaptive, Strategy::Baseline, Strategy::Predictive(1)]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "colour = red",
            "bits = 3\nbits = 4",
            "snr_db = 3\npower = 2",
            "users = 2",
            "taps = 9",
            "trials = many",
            "just a line",
            "carrier_hz = 1e9",
        ] {
            assert!(matches!(ConfigFile::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn overrides_only_given_keys() {
        let f = ConfigFile::parse("bits = 7\nseed = 99").unwrap();
        let mut base = SimConfig::default();
        base.doppler = 0.001;
        f.apply_to(&mut base).unwrap();
        assert_eq!((base.bits, base.seed, base.doppler), (7, 99, 0.001));
    }
}
