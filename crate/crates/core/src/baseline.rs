//! Non-predictive comparison scheme: the receiver feeds back one quantized
//! channel impulse response per link and the transmitters treat it as
//! constant over the whole frame.

use crate::channel::PilotObservation;
use crate::dps::{optimal_dimension_unquantized, DpsBasis, Subspace};
use crate::error::{Error, Result};
use crate::feedback::Quantizer;
use crate::ia::{design, sum_rate, IaSolution, LinkResponses, RotationBank};
use crate::math::{dft_columns, CVector, C64};
use crate::predictor::SubspaceEstimate;
use crate::config::SimConfig;
use rand::Rng;

/// Time-averaged impulse response of one link and its fed-back version.
#[derive(Debug, Clone)]
pub struct CirEstimate {
    /// Length S.
    pub h_avg: CVector,
    /// Unit-norm quantized direction of `h_avg`.
    pub quantized: CVector,
}

impl CirEstimate {
    /// Frequency response seen by the transmitter, `D_{N×S} ĥ`.
    pub fn response(&self, subcarriers: usize) -> CVector {
        dft_columns(subcarriers, self.quantized.len()) * &self.quantized
    }
}

/// Subspace used for the static estimate of one pilot set: the unquantized
/// optimum at the delay-domain SNR, reduced until the pilots support it.
pub fn estimation_subspace(cfg: &SimConfig, basis: &DpsBasis, pilots: &[usize]) -> Result<Subspace> {
    let snr = cfg.subcarriers as f64 * cfg.power / cfg.taps as f64;
    let upper = optimal_dimension_unquantized(cfg.pilot_len, cfg.doppler, snr)?
        .min(basis.max_dimension())
        .min(pilots.len());
    let mut last = None;
    for d in (1..=upper.max(1)).rev() {
        match basis.subspace(d, pilots) {
            Ok(sub) => return Ok(sub),
            Err(e @ Error::DimensionRejected { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::EmptyPilotSet))
}

/// Reduced-rank delay-domain estimate at every pilot index, averaged.
pub fn average_cir(obs: &PilotObservation, sub: &Subspace, taps: usize) -> Result<CVector> {
    let est = SubspaceEstimate::new(obs, sub, taps)?;
    let mut acc = CVector::zeros(taps);
    for &m in &sub.pilots {
        let f = sub.f(m)?.map(C64::from);
        acc += est.gamma.transpose() * f;
    }
    Ok(acc / C64::from(sub.pilots.len() as f64))
}

pub fn estimate_static_cir<R: Rng + ?Sized>(
    obs: &PilotObservation,
    sub: &Subspace,
    taps: usize,
    quantizer: &Quantizer,
    rng: &mut R,
) -> Result<CirEstimate> {
    let h_avg = average_cir(obs, sub, taps)?;
    let quantized = quantizer.apply(&h_avg, rng)?;
    Ok(CirEstimate { h_avg, quantized })
}

/// The single alignment solution built from the fed-back impulse
/// responses, `cirs` indexed `(rx-1)*K + (tx-1)`.
pub fn baseline_design(cirs: &[CirEstimate], cfg: &SimConfig, bank: &RotationBank) -> Result<IaSolution> {
    let users = cfg.users;
    if cirs.len() != users * users {
        return Err(Error::DimensionMismatch { expected: users * users, actual: cirs.len() });
    }
    let fed = LinkResponses::from_fn(users, |rx, tx| cirs[(rx - 1) * users + tx - 1].response(cfg.subcarriers));
    design(&fed, cfg.power, bank)
}

/// Sum rate of the static design on the true channel at every payload index.
pub fn baseline_rate(
    cirs: &[CirEstimate],
    truth: &[LinkResponses],
    cfg: &SimConfig,
    bank: &RotationBank,
) -> Result<Vec<f64>> {
    let sol = baseline_design(cirs, cfg, bank)?;
    Ok(truth.iter().map(|w| sum_rate(&sol, w, cfg.power)).collect())
}
