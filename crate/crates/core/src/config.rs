//! Scenario parameters shared by every stage of the simulation.

use crate::error::{Error, Result};
use crate::math::db_to_linear;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// LTE OFDM symbol rate used for the physical-unit conversion.
pub const LTE_SYMBOL_RATE: f64 = 1.4e4;
/// Carrier frequency used for the physical-unit conversion.
pub const DEFAULT_CARRIER_HZ: f64 = 2.5e9;

/// Largest codebook that is ever materialized.
pub const MAX_EXPLICIT_BITS: u32 = 20;

/// Normalized Doppler `ν_D = v f_c T_s / c₀` for a relative velocity in km/h.
pub fn doppler_from_velocity(velocity_kmh: f64, carrier_hz: f64, symbol_rate: f64) -> f64 {
    velocity_kmh / 3.6 * carrier_hz / (symbol_rate * SPEED_OF_LIGHT)
}

/// Inverse of [`doppler_from_velocity`].
pub fn velocity_from_doppler(doppler: f64, carrier_hz: f64, symbol_rate: f64) -> f64 {
    doppler * symbol_rate * SPEED_OF_LIGHT / carrier_hz * 3.6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimensionMode {
    Fixed(usize),
    Adaptive,
}

impl fmt::Display for DimensionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimensionMode::Fixed(d) => write!(f, "{d}"),
            DimensionMode::Adaptive => write!(f, "adaptive"),
        }
    }
}

impl FromStr for DimensionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "adaptive" => Ok(DimensionMode::Adaptive),
            other => other
                .parse::<usize>()
                .map(DimensionMode::Fixed)
                .map_err(|_| Error::Config(format!("dimension must be an integer or `adaptive`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizerMode {
    ExplicitRvq,
    Perturbation,
}

impl fmt::Display for QuantizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantizerMode::ExplicitRvq => "explicit-rvq",
            QuantizerMode::Perturbation => "perturbation",
        })
    }
}

impl FromStr for QuantizerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "explicit-rvq" => Ok(QuantizerMode::ExplicitRvq),
            "perturbation" => Ok(QuantizerMode::Perturbation),
            other => Err(Error::Config(format!("unknown quantizer `{other}`"))),
        }
    }
}

/// Doppler power spectrum of the simulated fading process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopplerSpectrum {
    /// Clarke/Jakes U-shaped spectrum, autocorrelation `J0(2π ν_D m)`.
    Clarke,
    /// Flat spectrum on `(-ν_D, ν_D)`, autocorrelation `sinc`. Matches the
    /// statistics assumed by the receiver.
    Flat,
}

impl fmt::Display for DopplerSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DopplerSpectrum::Clarke => "clarke",
            DopplerSpectrum::Flat => "flat",
        })
    }
}

impl FromStr for DopplerSpectrum {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "clarke" => Ok(DopplerSpectrum::Clarke),
            "flat" => Ok(DopplerSpectrum::Flat),
            other => Err(Error::Config(format!("unknown doppler spectrum `{other}`"))),
        }
    }
}

/// Full description of one simulated operating point.
///
/// Time indices are 1-based: pilots occupy `1..=M`, the feedback delay
/// `M+1..=M+T_D` and the payload `M+T_D+1..=M+T_D+T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// K
    pub users: usize,
    /// N, subcarriers used as symbol extensions.
    pub subcarriers: usize,
    /// S
    pub taps: usize,
    /// M, total pilot-sequence length over all transmitters.
    pub pilot_len: usize,
    /// T
    pub payload_len: usize,
    /// T_D
    pub feedback_delay: usize,
    /// ν_D
    pub doppler: f64,
    /// Transmit power per subcarrier (linear); equals the SNR.
    pub power: f64,
    /// Feedback bits per link.
    pub bits: u32,
    pub pdp: Vec<f64>,
    pub dimension: DimensionMode,
    pub quantizer: QuantizerMode,
    pub spectrum: DopplerSpectrum,
    /// Random unitary rotations tried by the precoder subspace optimization.
    pub rotations: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            users: 3,
            subcarriers: 5,
            taps: 3,
            pilot_len: 15,
            payload_len: 45,
            feedback_delay: 0,
            doppler: 0.004,
            power: db_to_linear(30.0),
            bits: 15,
            pdp: flat_pdp(3, 5),
            dimension: DimensionMode::Adaptive,
            quantizer: QuantizerMode::Perturbation,
            spectrum: DopplerSpectrum::Clarke,
            rotations: 50,
            seed: 1,
            trials: 200,
        }
    }
}

/// Flat power delay profile with total gain N.
pub fn flat_pdp(taps: usize, subcarriers: usize) -> Vec<f64> {
    vec![subcarriers as f64 / taps as f64; taps]
}

impl SimConfig {
    pub fn snr_db(&self) -> f64 {
        10.0 * self.power.log10()
    }

    pub fn set_snr_db(&mut self, snr_db: f64) {
        self.power = db_to_linear(snr_db);
    }

    /// Changes the tap count and resets the PDP to flat.
    pub fn set_taps(&mut self, taps: usize) {
        self.taps = taps;
        self.pdp = flat_pdp(taps, self.subcarriers);
    }

    /// M_p = M / K
    pub fn pilots_per_user(&self) -> usize {
        self.pilot_len / self.users
    }

    /// M + T_D + T
    pub fn horizon(&self) -> usize {
        self.pilot_len + self.feedback_delay + self.payload_len
    }

    /// Payload indices (1-based, inclusive).
    pub fn payload(&self) -> RangeInclusive<usize> {
        self.pilot_len + self.feedback_delay + 1..=self.horizon()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.users < 1 {
            return fail("users must be at least 1".into());
        }
        if self.subcarriers == 0 || self.taps == 0 {
            return fail("subcarriers and taps must be positive".into());
        }
        crate::ia::stream_allocation(self.users, self.subcarriers)?;
        if self.taps > self.subcarriers {
            return fail(format!("taps ({}) must not exceed subcarriers ({})", self.taps, self.subcarriers));
        }
        if self.pilot_len == 0 || self.pilot_len % self.users != 0 {
            return fail(format!("pilot_len ({}) must be a positive multiple of users ({})", self.pilot_len, self.users));
        }
        if self.payload_len == 0 {
            return fail("payload_len must be positive".into());
        }
        if !(self.doppler >= 0.0 && self.doppler < 0.5) {
            return fail(format!("doppler must lie in [0, 0.5), got {}", self.doppler));
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return fail(format!("power must be positive and finite, got {}", self.power));
        }
        if self.pdp.len() != self.taps {
            return fail(format!("pdp has {} entries, expected {}", self.pdp.len(), self.taps));
        }
        if self.pdp.iter().any(|&p| !(p >= 0.0)) {
            return fail("pdp entries must be nonnegative".into());
        }
        let total: f64 = self.pdp.iter().sum();
        if (total - self.subcarriers as f64).abs() > 1e-9 * self.subcarriers as f64 {
            return fail(format!("pdp must sum to N = {}, got {total}", self.subcarriers));
        }
        if let DimensionMode::Fixed(d) = self.dimension {
            if d == 0 || d > self.pilots_per_user() {
                return fail(format!("dimension {d} must lie in 1..={}", self.pilots_per_user()));
            }
        }
        if self.quantizer == QuantizerMode::ExplicitRvq && self.bits > MAX_EXPLICIT_BITS {
            return fail(format!(
                "explicit codebooks are limited to {MAX_EXPLICIT_BITS} bits; use the perturbation quantizer for {} bits",
                self.bits
            ));
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        Ok(())
    }
}
