//! Sweep descriptions and the built-in figure presets.

use crate::config::SimConfig;
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Transmission scheme evaluated in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Reduced-rank prediction with a fixed subspace dimension.
    Predictive(usize),
    /// Prediction with the dimension picked by the rate-loss bound.
    Adaptive,
    /// Static quantized impulse response.
    Baseline,
    PerfectCsi,
}

impl Strategy {
    pub fn is_predictive(&self) -> bool {
        matches!(self, Strategy::Predictive(_) | Strategy::Adaptive)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Predictive(d) => write!(f, "d{d}"),
            Strategy::Adaptive => f.write_str("adaptive"),
            Strategy::Baseline => f.write_str("baseline"),
            Strategy::PerfectCsi => f.write_str("perfect"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "adaptive" => Ok(Strategy::Adaptive),
            "baseline" => Ok(Strategy::Baseline),
            "perfect" => Ok(Strategy::PerfectCsi),
            other => other
                .strip_prefix('d')
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&d| d > 0)
                .map(Strategy::Predictive)
                .ok_or_else(|| Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// Parameter varied along a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    SnrDb,
    Bits,
    Doppler,
    /// Payload time index; one configuration, results per symbol.
    TimeIndex,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::SnrDb => "snr_db",
            Axis::Bits => "n_bits",
            Axis::Doppler => "nu_d",
            Axis::TimeIndex => "time_index",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "snr_db" => Ok(Axis::SnrDb),
            "n_bits" => Ok(Axis::Bits),
            "nu_d" => Ok(Axis::Doppler),
            "time_index" => Ok(Axis::TimeIndex),
            other => Err(Error::Config(format!("unknown axis `{other}`"))),
        }
    }
}

impl Axis {
    /// Configuration at grid value `v`.
    pub fn apply(&self, base: &SimConfig, v: f64) -> Result<SimConfig> {
        let mut cfg = base.clone();
        match self {
            Axis::SnrDb => cfg.set_snr_db(v),
            Axis::Bits => {
                if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                    return Err(Error::Config(format!("bit count {v} is not a nonnegative integer")));
                }
                cfg.bits = v as u32;
            }
            Axis::Doppler => cfg.doppler = v,
            Axis::TimeIndex => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse grid `{s}`"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let grid = if parts.len() == 3 {
        let nums: Vec<f64> = parts.iter().map(|p| p.parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else if parts.len() == 1 {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<Vec<f64>>>()?
    } else {
        return Err(bad());
    };
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub base: SimConfig,
    pub axis: Axis,
    /// Ignored for [`Axis::TimeIndex`].
    pub grid: Vec<f64>,
    pub strategies: Vec<Strategy>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.strategies.is_empty() {
            return Err(Error::Config(format!("scenario `{}` has no strategies", self.name)));
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return Err(Error::Config(format!("scenario `{}` lists a strategy twice", self.name)));
        }
        if self.axis != Axis::TimeIndex {
            if self.grid.is_empty() {
                return Err(Error::Config(format!("scenario `{}` has an empty grid", self.name)));
            }
            if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config(format!("grid of `{}` must be strictly increasing", self.name)));
            }
            for &v in &self.grid {
                self.axis.apply(&self.base, v)?;
            }
        }
        if self.name.is_empty() || self.name.contains(|c: char| c == ',' || c == '"' || c.is_whitespace()) {
            return Err(Error::Config(format!("scenario name `{}` must be non-empty without commas, quotes or spaces", self.name)));
        }
        Ok(())
    }

    /// Axis values actually evaluated.
    pub fn points(&self) -> Vec<f64> {
        match self.axis {
            Axis::TimeIndex => self.base.payload().map(|m| m as f64).collect(),
            _ => self.grid.clone(),
        }
    }
}

pub const PRESETS: &[&str] = &["fig2", "fig3", "fig4", "fig5", "fig6"];

fn snr_grid() -> Vec<f64> {
    (0..=8).map(|i| 5.0 * i as f64).collect()
}

/// Parameter sets of the published figures.
///
/// * `fig2`: leakage over the payload, 25 dB, ν_D = 0.001, N_d = 15.
/// * `fig3`: dimension choice and rate for D ∈ {1,2,3} over SNR, S = 2, N_d = 30.
/// * `fig4`: rate over N_d at 30 dB, ν_D = 0.004.
/// * `fig5`: rate over ν_D with T_D = 7, T = 30, N_d = 30 at 20 dB.
/// * `fig6`: rate over SNR with T_D = 7, T = 30, for N_d = 30 and N_d = 15.
pub fn preset(name: &str) -> Result<Vec<Scenario>> {
    use Strategy::*;
    let base = SimConfig { trials: 500, ..SimConfig::default() };
    let scenarios = match name {
        "fig2" => {
            let mut cfg = base;
            cfg.set_snr_db(25.0);
            cfg.doppler = 0.001;
            cfg.bits = 15;
            cfg.trials = 1000;
            vec![Scenario {
                name: "fig2".into(),
                base: cfg,
                axis: Axis::TimeIndex,
                grid: Vec::new(),
                strategies: vec![Adaptive, PerfectCsi],
            }]
        }
        "fig3" => {
            let mut cfg = base;
            cfg.set_taps(2);
            cfg.bits = 30;
            vec![Scenario {
                name: "fig3".into(),
                base: cfg,
                axis: Axis::SnrDb,
                grid: snr_grid(),
                strategies: vec![Predictive(1), Predictive(2), Predictive(3), Adaptive, PerfectCsi],
            }]
        }
        "fig4" => {
            let cfg = base;
            vec![Scenario {
                name: "fig4".into(),
                base: cfg,
                axis: Axis::Bits,
                grid: (2..=15).map(|i| 2.0 * i as f64).collect(),
                strategies: vec![Predictive(1), Predictive(2), Adaptive, PerfectCsi],
            }]
        }
        "fig5" => {
            let mut cfg = base;
            cfg.feedback_delay = 7;
            cfg.payload_len = 30;
            cfg.bits = 30;
            cfg.set_snr_db(20.0);
            vec![Scenario {
                name: "fig5".into(),
                base: cfg,
                axis: Axis::Doppler,
                grid: vec![0.0005, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.008, 0.01],
                strategies: vec![Predictive(1), Predictive(2), Adaptive, Baseline, PerfectCsi],
            }]
        }
        "fig6" => [30, 15]
            .into_iter()
            .map(|bits| {
                let mut cfg = base.clone();
                cfg.feedback_delay = 7;
                cfg.payload_len = 30;
                cfg.bits = bits;
                Scenario {
                    name: format!("fig6-nd{bits}"),
                    base: cfg,
                    axis: Axis::SnrDb,
                    grid: snr_grid(),
                    strategies: vec![Predictive(1), Predictive(2), Adaptive, Baseline, PerfectCsi],
                }
            })
            .collect(),
        other => {
            return Err(Error::Config(format!("unknown preset `{other}`; available: {}", PRESETS.join(", "))))
        }
    };
    for s in &scenarios {
        s.validate()?;
    }
    Ok(scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::Predictive(3), Strategy::Adaptive, Strategy::Baseline, Strategy::PerfectCsi] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("d0".parse::<Strategy>().is_err());
        assert!("fast".parse::<Strategy>().is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:40:10").unwrap(), vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(parse_grid("0.001, 0.004").unwrap(), vec![0.001, 0.004]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            assert!(!preset(name).unwrap().is_empty());
        }
        let fig6 = preset("fig6").unwrap();
        assert!(fig6.iter().all(|s| s.base.feedback_delay == 7 && s.base.payload_len == 30));
        let fig2 = &preset("fig2").unwrap()[0];
        assert_eq!(fig2.points().len(), 45);
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn scenario_validation() {
        let mut s = preset("fig4").unwrap().remove(0);
        s.grid = vec![4.0, 4.0];
        assert!(s.validate().is_err());
        s.grid = vec![4.5];
        assert!(s.validate().is_err());
        s.grid = vec![4.0];
        s.strategies.clear();
        assert!(s.validate().is_err());
    }
}
