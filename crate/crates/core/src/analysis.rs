//! Analytic leakage bounds, the rate-loss upper bound and the adaptive
//! subspace-dimension rule built on it.
//!
//! All links share statistics, so the MSE and coefficient-energy terms are
//! computed once per configuration and averaged over the K pilot sets, whose
//! offsets give slightly different extrapolation distances.

use crate::config::SimConfig;
use crate::dps::{optimal_dimension_unquantized, DpsBasis};
use crate::error::{Error, Result};
use crate::feedback::CoefficientStatistics;
use crate::ia::stream_allocation;
use crate::predictor::mse_analytic;
use crate::channel::pilot_positions;
use crate::config::flat_pdp;
use statrs::function::gamma::gamma;

/// `Q(N_d) ≤ Γ(1/(DS−1))/(DS−1) · 2^{−N_d/(DS−1)}`, zero when DS = 1.
pub fn q_bound(bits: u32, dim: usize) -> f64 {
    if dim < 2 {
        return 0.0;
    }
    let e = (dim - 1) as f64;
    gamma(1.0 / e) / e * (-(bits as f64) / e).exp2()
}

/// Per-payload-symbol ingredients of the bound for one subspace dimension.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub dimension: usize,
    pub taps: usize,
    pub subcarriers: usize,
    pub users: usize,
    pub power: f64,
    pub streams: Vec<usize>,
    /// `MSE[m, D, NP/S]` for each payload symbol.
    pub mse: Vec<f64>,
    /// Squared bias part of `mse`.
    pub bias2: Vec<f64>,
    /// `MSE[m, D, P]`, i.e. without delay-domain noise reduction.
    pub mse_unreduced: Vec<f64>,
    /// ζ[m] = fᵀ λ f
    pub zeta: Vec<f64>,
}

impl BoundModel {
    pub fn new(cfg: &SimConfig, dimension: usize) -> Result<Self> {
        cfg.validate()?;
        let basis = DpsBasis::new(cfg.pilot_len, cfg.doppler, cfg.horizon())?;
        let payload: Vec<usize> = cfg.payload().collect();
        let snr = cfg.subcarriers as f64 * cfg.power / cfg.taps as f64;
        let assumed = flat_pdp(cfg.taps, cfg.subcarriers);
        let mut mse = vec![0.0; payload.len()];
        let mut bias2 = vec![0.0; payload.len()];
        let mut mse_unreduced = vec![0.0; payload.len()];
        let mut zeta = vec![0.0; payload.len()];
        let k = cfg.users as f64;
        for tx in 1..=cfg.users {
            let pilots = pilot_positions(tx, cfg)?;
            let sub = basis.subspace(dimension, &pilots)?;
            let stats = CoefficientStatistics::new(&sub, cfg.doppler, &assumed, cfg.power)?;
            for (i, &m) in payload.iter().enumerate() {
                let terms = mse_analytic(m, &sub, snr, cfg.spectrum, cfg.doppler)?;
                mse[i] += terms.total() / k;
                bias2[i] += terms.bias2 / k;
                mse_unreduced[i] += (terms.bias2 + sub.noise_gain(m)? / cfg.power) / k;
                zeta[i] += stats.zeta(&sub.f(m)?) / k;
            }
        }
        Ok(BoundModel {
            dimension,
            taps: cfg.taps,
            subcarriers: cfg.subcarriers,
            users: cfg.users,
            power: cfg.power,
            streams: stream_allocation(cfg.users, cfg.subcarriers)?,
            mse,
            bias2,
            mse_unreduced,
            zeta,
        })
    }

    pub fn payload_len(&self) -> usize {
        self.mse.len()
    }

    fn ds(&self) -> usize {
        self.dimension * self.taps
    }

    /// `J̃ = N²P/(S d_ℓ) · E‖q̂‖² · MSE[m, D, NP/S]` at payload offset `idx`.
    pub fn prediction_leakage_bound(&self, idx: usize, q_energy: f64, tx_streams: usize) -> f64 {
        let n = self.subcarriers as f64;
        n * n * self.power / (self.taps as f64 * tx_streams as f64) * q_energy * self.mse[idx]
    }

    /// Prediction leakage bound for a receiver that skips the delay-domain
    /// step and predicts every subcarrier separately; `b_energy` is ‖b‖².
    pub fn unreduced_prediction_leakage_bound(&self, idx: usize, b_energy: f64, tx_streams: usize) -> f64 {
        self.subcarriers as f64 * self.power / tx_streams as f64 * b_energy * self.mse_unreduced[idx]
    }

    /// `Ĵ = NP·DS/(d_ℓ(DS−1)) · E‖q̂‖² · ζ[m] · Q(N_d)`.
    pub fn quantization_leakage_bound(&self, idx: usize, q_energy: f64, tx_streams: usize, bits: u32) -> f64 {
        let ds = self.ds();
        if ds < 2 {
            return 0.0;
        }
        let n = self.subcarriers as f64;
        n * self.power * ds as f64 / (tx_streams as f64 * (ds - 1) as f64)
            * q_energy
            * self.zeta[idx]
            * q_bound(bits, ds)
    }

    fn quant_term(&self, idx: usize, bits: u32) -> f64 {
        let ds = self.ds();
        if ds < 2 {
            return 0.0;
        }
        ds as f64 * self.zeta[idx] * q_bound(bits, ds) / (ds - 1) as f64
    }

    fn loss_with(&self, term: impl Fn(usize) -> f64) -> f64 {
        let n = self.subcarriers as f64;
        let k = self.users as f64;
        let mut total = 0.0;
        for &d in &self.streams {
            let d = d as f64;
            for idx in 0..self.payload_len() {
                total += d * (1.0 + n * self.power * (k - 1.0 / d) * term(idx)).log2();
            }
        }
        total / (n * self.payload_len() as f64)
    }

    /// ΔR_ub for `bits` feedback bits per link.
    pub fn rate_loss_upper_bound(&self, bits: u32) -> f64 {
        let ratio = self.subcarriers as f64 / self.taps as f64;
        self.loss_with(|i| ratio * self.mse[i] + self.quant_term(i, bits))
    }

    /// ΔR_ub split into its prediction-only and quantization-only parts;
    /// their sum upper-bounds ΔR_ub.
    pub fn decomposition(&self, bits: u32) -> RateLossDecomposition {
        let ratio = self.subcarriers as f64 / self.taps as f64;
        RateLossDecomposition {
            total: self.rate_loss_upper_bound(bits),
            prediction: self.loss_with(|i| ratio * self.mse[i]),
            quantization: self.loss_with(|i| self.quant_term(i, bits)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLossDecomposition {
    pub total: f64,
    pub prediction: f64,
    pub quantization: f64,
}

/// Result of the adaptive dimension choice.
#[derive(Debug, Clone)]
pub struct DimensionChoice {
    pub dimension: usize,
    pub upper: usize,
    /// ΔR_ub for each evaluated dimension 1..=upper (rejected ones omitted).
    pub losses: Vec<(usize, f64)>,
}

/// Bound models for every candidate dimension `1..=D_ub`.
pub fn candidate_models(cfg: &SimConfig) -> Result<Vec<BoundModel>> {
    let upper = optimal_dimension_unquantized(cfg.pilot_len, cfg.doppler, cfg.power)?;
    let mut models = Vec::new();
    for d in 1..=upper {
        match BoundModel::new(cfg, d) {
            Ok(m) => models.push(m),
            Err(Error::DimensionRejected { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    if models.is_empty() {
        return Err(Error::DimensionRejected { dimension: 1, reason: "no usable subspace dimension".into() });
    }
    Ok(models)
}

/// Smallest minimizer of ΔR_ub over the given models.
pub fn choose_dimension(models: &[BoundModel], bits: u32) -> DimensionChoice {
    let losses: Vec<(usize, f64)> = models.iter().map(|m| (m.dimension, m.rate_loss_upper_bound(bits))).collect();
    let mut best = losses[0];
    for &(d, l) in &losses[1..] {
        if l < best.1 {
            best = (d, l);
        }
    }
    DimensionChoice { dimension: best.0, upper: models.last().map_or(1, |m| m.dimension), losses }
}

/// Adaptive subspace dimension switching: `argmin_{D ≤ D_ub} ΔR_ub(D)`.
pub fn adaptive_sds(cfg: &SimConfig) -> Result<DimensionChoice> {
    let models = candidate_models(cfg)?;
    Ok(choose_dimension(&models, cfg.bits))
}

/// `R_lb = E[R_perfect] − ΔR_ub`; may be negative.
pub fn rate_lower_bound(perfect_rate_mean: f64, rate_loss: f64) -> f64 {
    perfect_rate_mean - rate_loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::required_bits;

    fn fig_cfg() -> SimConfig {
        SimConfig::default()
    }

    #[test]
    fn q_bound_examples() {
        for bits in [0, 3, 10] {
            assert!((q_bound(bits, 2) - 0.5f64.powi(bits as i32)).abs() < 1e-15);
        }
        assert_eq!(q_bound(5, 1), 0.0);
        assert!(q_bound(2000, 6) < 1e-100);
        // Γ(1/5)/5 · 2^{-12/5}
        let expect = 4.590_843_711_998_803 / 5.0 * (-2.4f64).exp2();
        assert!((q_bound(12, 6) - expect).abs() < 1e-12);
    }

    #[test]
    fn bound_vanishes_without_error_and_saturates_without_power() {
        // MSE and ζ carry 1/P noise parts, so the NP prefactor cancels them
        // and the bound tends to a constant rather than zero as P → 0.
        let at = |db: f64| {
            let mut cfg = fig_cfg();
            cfg.set_snr_db(db);
            BoundModel::new(&cfg, 1).unwrap().rate_loss_upper_bound(10)
        };
        let (a, b) = (at(-100.0), at(-200.0));
        assert!(a.is_finite() && a > 0.0);
        assert!((a / b - 1.0).abs() < 1e-6);
        let mut cfg = fig_cfg();
        cfg.doppler = 0.0;
        let mut m = BoundModel::new(&cfg, 1).unwrap();
        // zero Doppler leaves no bias; removing the noise too gives zero loss
        assert!(m.bias2.iter().all(|b| b.abs() < 1e-14));
        m.mse.iter_mut().for_each(|v| *v = 0.0);
        assert!(m.rate_loss_upper_bound(100_000) < 1e-12);
    }

    #[test]
    fn monotone_in_bits_and_decomposition_dominates() {
        let cfg = fig_cfg();
        for d in 1..=2 {
            let m = BoundModel::new(&cfg, d).unwrap();
            let mut prev = f64::INFINITY;
            for bits in 0..60 {
                let dec = m.decomposition(bits);
                assert!(dec.total <= prev + 1e-12);
                assert!(dec.total <= dec.prediction + dec.quantization + 1e-12);
                assert!(dec.total >= dec.prediction.max(dec.quantization) - 1e-12);
                prev = dec.total;
            }
        }
    }

    #[test]
    fn bits_ordering_reverses_for_two_dimensions() {
        let mut cfg = fig_cfg();
        cfg.set_snr_db(30.0);
        let d1 = BoundModel::new(&cfg, 1).unwrap();
        let d2 = BoundModel::new(&cfg, 2).unwrap();
        assert!(d1.rate_loss_upper_bound(10) < d2.rate_loss_upper_bound(10));
        let cross = (10..60).find(|&b| d2.rate_loss_upper_bound(b) < d1.rate_loss_upper_bound(b)).unwrap();
        assert!((10..=20).contains(&cross), "{cross}");
    }

    #[test]
    fn adaptive_choice_within_upper() {
        for snr in [0.0, 10.0, 20.0, 30.0, 40.0] {
            let mut cfg = fig_cfg();
            cfg.set_snr_db(snr);
            cfg.bits = 30;
            let c = adaptive_sds(&cfg).unwrap();
            assert!(c.dimension <= c.upper);
            assert!(c.dimension >= 1);
        }
        let mut cfg = fig_cfg();
        cfg.set_snr_db(5.0);
        cfg.bits = 30;
        assert_eq!(adaptive_sds(&cfg).unwrap().dimension, 1);
    }

    #[test]
    fn prediction_bound_scaling() {
        // variance part of J̃ is independent of P, bias part grows with P
        let mut lo = fig_cfg();
        lo.set_snr_db(10.0);
        let mut hi = fig_cfg();
        hi.set_snr_db(30.0);
        let a = BoundModel::new(&lo, 2).unwrap();
        let b = BoundModel::new(&hi, 2).unwrap();
        for i in 0..a.payload_len() {
            let var_a = a.power * (a.mse[i] - a.bias2[i]);
            let var_b = b.power * (b.mse[i] - b.bias2[i]);
            assert!((var_a / var_b - 1.0).abs() < 1e-9);
            assert!((b.power * b.bias2[i]) / (a.power * a.bias2[i]) > 99.9);
            assert_eq!(a.prediction_leakage_bound(i, 0.0, 2), 0.0);
        }
        assert_eq!(b.quantization_leakage_bound(3, 1.0, 2, 100_000), 0.0);
    }

    #[test]
    fn required_bits_keep_quantization_term_finite() {
        let cfg = fig_cfg();
        let mut vals = Vec::new();
        for i in 0..=8 {
            let mut c = cfg.clone();
            c.power = 10f64.powf(i as f64 / 2.0);
            let m = BoundModel::new(&c, 1).unwrap();
            let bits = required_bits(m.dimension * m.taps, c.power);
            vals.push(m.decomposition(bits).quantization);
        }
        assert!(vals.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lower_bound_is_difference() {
        assert_eq!(rate_lower_bound(5.0, 0.0), 5.0);
        assert_eq!(rate_lower_bound(1.0, 2.5), -1.5);
    }
}
