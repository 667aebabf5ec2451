//! Time-variant frequency-selective SISO channels and their pilot observations.
//!
//! Every tap of every link is an independent zero-mean circular Gaussian
//! process whose autocorrelation is prescribed by the Doppler spectrum. The
//! process is synthesized from a spectral factor of its Toeplitz covariance
//! over the full frame, so the covariance is exact at every modeled lag.

use crate::config::{DopplerSpectrum, SimConfig};
use crate::error::{Error, Result};
use crate::math::{bessel_j0, complex_gaussian, dft_columns, CMatrix, CVector, C64};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use std::f64::consts::PI;

/// Pilot indices (1-based) of transmitter `k`: `{k + (i-1)K : i = 1..M_p}`.
pub fn pilot_positions(k: usize, cfg: &SimConfig) -> Result<Vec<usize>> {
    pilot_positions_for(k, cfg.users, cfg.pilots_per_user())
}

pub fn pilot_positions_for(k: usize, users: usize, per_user: usize) -> Result<Vec<usize>> {
    if k == 0 || k > users {
        return Err(Error::UserOutOfRange { index: k, users });
    }
    Ok((0..per_user).map(|i| k + i * users).collect())
}

/// Normalized autocorrelation of the fading process at integer lag.
pub fn autocorrelation(spectrum: DopplerSpectrum, doppler: f64, lag: f64) -> f64 {
    match spectrum {
        DopplerSpectrum::Clarke => bessel_j0(2.0 * PI * doppler * lag),
        DopplerSpectrum::Flat => {
            let x = 2.0 * PI * doppler * lag;
            if x == 0.0 {
                1.0
            } else {
                x.sin() / x
            }
        }
    }
}

/// Toeplitz covariance matrix `[R]_{a,b} = R[a-b]` over `len` consecutive samples.
pub fn temporal_covariance(spectrum: DopplerSpectrum, doppler: f64, len: usize) -> DMatrix<f64> {
    let r: Vec<f64> = (0..len).map(|lag| autocorrelation(spectrum, doppler, lag as f64)).collect();
    DMatrix::from_fn(len, len, |a, b| r[a.abs_diff(b)])
}

/// Draws unit-power stationary Gaussian sequences with a fixed covariance.
#[derive(Debug, Clone)]
pub struct FadingSynthesizer {
    factor: DMatrix<f64>,
}

impl FadingSynthesizer {
    pub fn new(spectrum: DopplerSpectrum, doppler: f64, len: usize) -> Self {
        let cov = temporal_covariance(spectrum, doppler, len);
        let eig = SymmetricEigen::new(cov);
        let mut factor = eig.eigenvectors;
        let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            // round-off eigenvalues of a rank-deficient covariance are dropped
            let scale = if lambda > 1e-13 * top { lambda.sqrt() } else { 0.0 };
            factor.column_mut(j).scale_mut(scale);
        }
        FadingSynthesizer { factor }
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.nrows() == 0
    }

    /// One realization with average power `power`.
    pub fn sample<R: Rng + ?Sized>(&self, power: f64, rng: &mut R) -> CVector {
        let n = self.factor.ncols();
        let z = CVector::from_fn(n, |_, _| complex_gaussian(rng));
        let amp = power.sqrt();
        let mut out = CVector::zeros(self.factor.nrows());
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (col, zc) in z.iter().enumerate() {
                acc += zc * self.factor[(row, col)];
            }
            *o = acc * amp;
        }
        out
    }
}

/// `w = D_{N×S} h`, unitary DFT convention.
pub fn to_frequency_response(h_row: &CVector, subcarriers: usize) -> Result<CVector> {
    let taps = h_row.len();
    if taps > subcarriers {
        return Err(Error::TooManyTaps(taps, subcarriers));
    }
    Ok(dft_columns(subcarriers, taps) * h_row)
}

/// One transmitter–receiver link over the whole frame.
#[derive(Debug, Clone)]
pub struct LinkChannel {
    /// (M+T_D+T) × S tap gains; row `m-1` holds `h[m]`.
    pub taps: CMatrix,
    /// (M+T_D+T) × N frequency response; row `m-1` holds `w[m]ᵀ`.
    pub freq: CMatrix,
}

impl LinkChannel {
    pub fn from_taps(taps: CMatrix, subcarriers: usize) -> Result<Self> {
        if taps.ncols() > subcarriers {
            return Err(Error::TooManyTaps(taps.ncols(), subcarriers));
        }
        let dft = dft_columns(subcarriers, taps.ncols());
        // rows of freq are D h[m], i.e. freq = taps · D^T
        let freq = &taps * dft.transpose();
        Ok(LinkChannel { taps, freq })
    }

    pub fn horizon(&self) -> usize {
        self.taps.nrows()
    }

    /// Frequency response `w[m]` at 1-based time index `m`.
    pub fn response(&self, m: usize) -> CVector {
        self.freq.row(m - 1).transpose()
    }

    pub fn impulse(&self, m: usize) -> CVector {
        self.taps.row(m - 1).transpose()
    }
}

/// Generates one link with the tap powers and spectrum of `cfg`.
pub fn generate_link<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> LinkChannel {
    let synth = FadingSynthesizer::new(cfg.spectrum, cfg.doppler, cfg.horizon());
    generate_link_with(&synth, &cfg.pdp, cfg.subcarriers, rng)
}

pub fn generate_link_with<R: Rng + ?Sized>(
    synth: &FadingSynthesizer,
    pdp: &[f64],
    subcarriers: usize,
    rng: &mut R,
) -> LinkChannel {
    let mut taps = CMatrix::zeros(synth.len(), pdp.len());
    for (s, &p) in pdp.iter().enumerate() {
        let seq = synth.sample(p, rng);
        taps.set_column(s, &seq);
    }
    LinkChannel::from_taps(taps, subcarriers).expect("pdp length checked by config validation")
}

/// All K² links of the interference channel, indexed `(receiver, transmitter)`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub users: usize,
    links: Vec<LinkChannel>,
}

impl ChannelSet {
    pub fn generate<R: Rng + ?Sized>(cfg: &SimConfig, synth: &FadingSynthesizer, rng: &mut R) -> Self {
        let links = (0..cfg.users * cfg.users)
            .map(|_| generate_link_with(synth, &cfg.pdp, cfg.subcarriers, rng))
            .collect();
        ChannelSet { users: cfg.users, links }
    }

    pub fn from_links(users: usize, links: Vec<LinkChannel>) -> Self {
        assert_eq!(links.len(), users * users);
        ChannelSet { users, links }
    }

    /// Link from transmitter `tx` to receiver `rx` (both 1-based).
    pub fn link(&self, rx: usize, tx: usize) -> &LinkChannel {
        &self.links[(rx - 1) * self.users + (tx - 1)]
    }

    /// Frequency responses of every link at time `m`.
    pub fn responses(&self, m: usize) -> crate::ia::LinkResponses {
        crate::ia::LinkResponses::from_fn(self.users, |rx, tx| self.link(rx, tx).response(m))
    }
}

/// Noisy channel observations at the pilot positions of one transmitter.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    /// 1-based time indices.
    pub positions: Vec<usize>,
    /// M_p × N matrix of `w'[m,n]`.
    pub values: CMatrix,
}

/// `w'[m,n] = w[m,n] + n'[m,n]/√P`. An infinite `power` gives noiseless observations.
pub fn observe_pilots<R: Rng + ?Sized>(
    link: &LinkChannel,
    positions: &[usize],
    power: f64,
    rng: &mut R,
) -> Result<PilotObservation> {
    if positions.is_empty() {
        return Err(Error::EmptyPilotSet);
    }
    if !(power > 0.0) {
        return Err(Error::Config(format!("pilot power must be positive, got {power}")));
    }
    let horizon = link.horizon();
    if let Some(&bad) = positions.iter().find(|&&m| m == 0 || m > horizon) {
        return Err(Error::TimeOutOfRange { index: bad, horizon });
    }
    let n = link.freq.ncols();
    let scale = if power.is_infinite() { 0.0 } else { 1.0 / power.sqrt() };
    let mut values = CMatrix::zeros(positions.len(), n);
    for (r, &m) in positions.iter().enumerate() {
        for c in 0..n {
            let noise = complex_gaussian(rng) * scale;
            values[(r, c)] = link.freq[(m - 1, c)] + noise;
        }
    }
    Ok(PilotObservation { positions: positions.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::flat_pdp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pilot_positions_examples() {
        assert_eq!(pilot_positions_for(1, 3, 5).unwrap(), vec![1, 4, 7, 10, 13]);
        assert_eq!(pilot_positions_for(3, 3, 5).unwrap(), vec![3, 6, 9, 12, 15]);
        assert_eq!(pilot_positions_for(1, 1, 4).unwrap(), vec![1, 2, 3, 4]);
        assert!(matches!(pilot_positions_for(0, 3, 5), Err(Error::UserOutOfRange { .. })));
        assert!(matches!(pilot_positions_for(4, 3, 5), Err(Error::UserOutOfRange { .. })));
    }

    #[test]
    fn pilot_sets_partition_window() {
        let cfg = SimConfig::default();
        let mut all: Vec<usize> = (1..=cfg.users).flat_map(|k| pilot_positions(k, &cfg).unwrap()).collect();
        all.sort_unstable();
        assert_eq!(all, (1..=cfg.pilot_len).collect::<Vec<_>>());
    }

    #[test]
    fn frequency_response_examples() {
        let n = 5;
        let sq = (n as f64).sqrt();
        let mut h = CVector::zeros(3);
        h[0] = C64::from(sq);
        let w = to_frequency_response(&h, n).unwrap();
        for x in w.iter() {
            assert!((x - C64::from(1.0)).norm() < 1e-14);
        }
        let mut h = CVector::zeros(3);
        h[1] = C64::from(sq);
        let w = to_frequency_response(&h, n).unwrap();
        for (i, x) in w.iter().enumerate() {
            let expect = C64::from_polar(1.0, -2.0 * PI * i as f64 / n as f64);
            assert!((x - expect).norm() < 1e-14);
        }
        assert!(matches!(to_frequency_response(&CVector::zeros(6), 5), Err(Error::TooManyTaps(6, 5))));
    }

    #[test]
    fn frequency_response_matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, s) = (8, 3);
        let h = CVector::from_fn(s, |_, _| complex_gaussian(&mut rng));
        let w = to_frequency_response(&h, n).unwrap();
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..s {
                let angle = -2.0 * PI * (i * j) as f64 / n as f64;
                acc += h[j] * C64::from_polar(1.0, angle);
            }
            acc /= (n as f64).sqrt();
            assert!((w[i] - acc).norm() < 1e-12);
        }
        assert!((w.norm_squared() - h.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn zero_doppler_is_constant() {
        let cfg = SimConfig { doppler: 0.0, ..SimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let link = generate_link(&cfg, &mut rng);
        for m in 1..link.horizon() {
            assert!((link.taps.row(m) - link.taps.row(0)).norm() < 1e-10);
        }
    }

    #[test]
    fn freq_rows_are_dft_of_taps_and_invert() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let link = generate_link(&cfg, &mut rng);
        let dft = dft_columns(cfg.subcarriers, cfg.taps);
        for m in 1..=link.horizon() {
            let w = to_frequency_response(&link.impulse(m), cfg.subcarriers).unwrap();
            assert!((w - link.response(m)).norm() < 1e-12);
            let back = dft.adjoint() * link.response(m);
            assert!((back - link.impulse(m)).norm() < 1e-10);
        }
    }

    #[test]
    fn tap_power_follows_pdp() {
        let cfg = SimConfig { pdp: vec![3.0, 1.5, 0.5], ..SimConfig::default() };
        let synth = FadingSynthesizer::new(cfg.spectrum, cfg.doppler, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 20_000;
        let mut power = [0.0; 3];
        for _ in 0..trials {
            let link = generate_link_with(&synth, &cfg.pdp, cfg.subcarriers, &mut rng);
            for (s, p) in power.iter_mut().enumerate() {
                *p += link.taps[(3, s)].norm_sqr();
            }
        }
        for (s, p) in power.iter().enumerate() {
            let mean = p / trials as f64;
            // exponential with mean pdp[s]: relative s.e. 1/sqrt(trials)
            assert!((mean / cfg.pdp[s] - 1.0).abs() < 4.0 / (trials as f64).sqrt(), "tap {s}: {mean}");
        }
        let flat = flat_pdp(3, 5);
        assert!((flat.iter().sum::<f64>() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn observation_noise_variance() {
        let cfg = SimConfig { doppler: 0.0, ..SimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let link = generate_link(&cfg, &mut rng);
        let pos = pilot_positions(1, &cfg).unwrap();
        let exact = observe_pilots(&link, &pos, f64::INFINITY, &mut rng).unwrap();
        for (r, &m) in pos.iter().enumerate() {
            assert_eq!(exact.values.row(r), link.freq.row(m - 1));
        }
        for &power in &[1.0, 10f64.powf(2.5)] {
            let mut acc = 0.0;
            let mut count = 0usize;
            for _ in 0..4000 {
                let obs = observe_pilots(&link, &pos, power, &mut rng).unwrap();
                for (r, &m) in pos.iter().enumerate() {
                    for c in 0..cfg.subcarriers {
                        acc += (obs.values[(r, c)] - link.freq[(m - 1, c)]).norm_sqr();
                        count += 1;
                    }
                }
            }
            let var = acc / count as f64;
            assert!((var * power - 1.0).abs() < 0.01, "P={power}: {var}");
        }
        assert!(matches!(observe_pilots(&link, &[], 1.0, &mut rng), Err(Error::EmptyPilotSet)));
    }
}
