//! Reduced-rank channel estimation and prediction.
//!
//! Per subcarrier the receiver fits the D leading Slepian sequences to the
//! noisy pilot observations. The coefficient matrix is then moved to the
//! delay domain with an inverse DFT across subcarriers; only the first S
//! columns carry channel energy, the remaining N−S are noise and are dropped.

use crate::channel::PilotObservation;
use crate::config::DopplerSpectrum;
use crate::dps::Subspace;
use crate::error::{Error, Result};
use crate::math::{dft_columns, gauss_legendre, CMatrix, CVector, C64};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// φ̃ⁿ = G⁻¹ U^(P)ᵀ g'ⁿ for every subcarrier, as a D × N matrix.
pub fn estimate_coefficients(obs: &PilotObservation, sub: &Subspace) -> Result<CMatrix> {
    if obs.positions != sub.pilots {
        return Err(Error::Config(format!(
            "observation pilots {:?} differ from subspace pilots {:?}",
            obs.positions, sub.pilots
        )));
    }
    let projector = real_to_complex(&(&sub.gram_inv * sub.pilot_rows.transpose()));
    Ok(projector * &obs.values)
}

fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(C64::from)
}

/// All N delay-domain coefficient columns `[γ̃¹ … γ̃ᴺ] = Φ conj(D_N)`.
pub fn delay_domain_full(phi: &CMatrix) -> CMatrix {
    let n = phi.ncols();
    phi * dft_columns(n, n).conjugate()
}

/// Delay-domain coefficients restricted to the first `taps` columns.
pub fn to_delay_domain(phi: &CMatrix, taps: usize) -> CMatrix {
    let n = phi.ncols();
    phi * dft_columns(n, taps).conjugate()
}

/// η̃ = [γ̃¹; …; γ̃ˢ], tap-major.
pub fn stack(gamma: &CMatrix) -> CVector {
    let (d, s) = gamma.shape();
    CVector::from_fn(d * s, |i, _| gamma[(i % d, i / d)])
}

pub fn unstack(eta: &CVector, dimension: usize) -> Result<CMatrix> {
    if dimension == 0 || eta.len() % dimension != 0 {
        return Err(Error::DimensionMismatch { expected: dimension, actual: eta.len() });
    }
    let s = eta.len() / dimension;
    Ok(CMatrix::from_fn(dimension, s, |p, t| eta[t * dimension + p]))
}

/// Coefficients of one link in every domain.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    /// D × N
    pub phi: CMatrix,
    /// D × S
    pub gamma: CMatrix,
    /// length DS
    pub eta: CVector,
}

impl SubspaceEstimate {
    pub fn new(obs: &PilotObservation, sub: &Subspace, taps: usize) -> Result<Self> {
        let phi = estimate_coefficients(obs, sub)?;
        if taps > phi.ncols() {
            return Err(Error::TooManyTaps(taps, phi.ncols()));
        }
        let gamma = to_delay_domain(&phi, taps);
        let eta = stack(&gamma);
        Ok(SubspaceEstimate { phi, gamma, eta })
    }
}

/// Predicted impulse and frequency response at time `m`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub impulse: CVector,
    pub response: CVector,
}

/// ĥ[m] = F[m] η̃ and ŵ[m] = D_{N×S} ĥ[m].
pub fn predict(eta: &CVector, sub: &Subspace, m: usize, subcarriers: usize) -> Result<Prediction> {
    let gamma = unstack(eta, sub.dimension)?;
    predict_gamma(&gamma, sub, m, subcarriers)
}

pub fn predict_gamma(gamma: &CMatrix, sub: &Subspace, m: usize, subcarriers: usize) -> Result<Prediction> {
    if gamma.nrows() != sub.dimension {
        return Err(Error::DimensionMismatch { expected: sub.dimension, actual: gamma.nrows() });
    }
    if gamma.ncols() > subcarriers {
        return Err(Error::TooManyTaps(gamma.ncols(), subcarriers));
    }
    let f = sub.f(m)?.map(C64::from);
    let impulse = gamma.transpose() * f;
    let response = dft_columns(subcarriers, gamma.ncols()) * &impulse;
    Ok(Prediction { impulse, response })
}

/// Wiener (MMSE) prediction of one subcarrier trajectory at time `m` from the
/// pilot observations, given the true unit-power autocorrelation and the
/// pilot SNR. An infinite `power` yields the maximum-likelihood limit.
pub fn mmse_predict<F>(obs: &PilotObservation, autocorr: F, power: f64, m: usize) -> Result<CVector>
where
    F: Fn(i64) -> f64,
{
    let pilots = &obs.positions;
    let np = pilots.len();
    let noise = if power.is_infinite() { 0.0 } else { 1.0 / power };
    let r_p = DMatrix::from_fn(np, np, |a, b| {
        autocorr(pilots[a] as i64 - pilots[b] as i64) + if a == b { noise } else { 0.0 }
    });
    let r_m = nalgebra::DVector::from_fn(np, |a, _| autocorr(m as i64 - pilots[a] as i64));
    let lu = r_p.lu();
    let weights = lu
        .solve(&r_m)
        .ok_or_else(|| Error::Singular("pilot covariance".into()))?;
    let w = weights.map(C64::from);
    Ok(obs.values.transpose() * w)
}

/// Squared bias and noise variance of the reduced-rank predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseTerms {
    pub bias2: f64,
    pub variance: f64,
}

impl MseTerms {
    pub fn total(&self) -> f64 {
        self.bias2 + self.variance
    }
}

/// `bias²[m,D] = ∫ |1 − Σ_ℓ c_ℓ e^{-j2πν(m−ℓ)}|² S_h(ν) dν` for a unit-power
/// process with the given Doppler spectrum.
///
/// The Clarke spectrum `1/(π√(ν_D²−ν²))` is integrated with Gauss–Chebyshev
/// nodes, which absorb the endpoint singularity; the flat spectrum uses
/// Gauss–Legendre. Node counts double until the relative change drops below
/// 1e-10.
pub fn bias_squared(sub: &Subspace, m: usize, spectrum: DopplerSpectrum, doppler: f64) -> Result<f64> {
    let weights = sub.weights(m)?;
    let lags: Vec<f64> = sub.pilots.iter().map(|&l| m as f64 - l as f64).collect();
    let integrand = |nu: f64| {
        let mut acc = C64::new(1.0, 0.0);
        for (c, lag) in weights.iter().zip(&lags) {
            acc -= C64::from_polar(*c, -2.0 * PI * nu * lag);
        }
        acc.norm_sqr()
    };
    if doppler == 0.0 {
        return Ok(integrand(0.0));
    }
    let rule = |n: usize| -> f64 {
        match spectrum {
            DopplerSpectrum::Clarke => {
                (1..=n)
                    .map(|i| {
                        let theta = (2 * i - 1) as f64 * PI / (2 * n) as f64;
                        integrand(doppler * theta.cos())
                    })
                    .sum::<f64>()
                    / n as f64
            }
            DopplerSpectrum::Flat => {
                let (x, w) = gauss_legendre(n);
                x.iter().zip(&w).map(|(x, w)| w * integrand(doppler * x)).sum::<f64>() / 2.0
            }
        }
    };
    let mut n = 16;
    let mut prev = rule(n);
    let mut change = f64::INFINITY;
    while n < 4096 {
        n *= 2;
        let next = rule(n);
        change = (next - prev).abs() / next.abs().max(1e-300);
        prev = next;
        if change < 1e-10 {
            return Ok(next);
        }
    }
    if change < 1e-8 {
        Ok(prev)
    } else {
        Err(Error::Quadrature(change))
    }
}

/// `MSE[m, D, snr] = bias²[m, D] + f[m]ᵀ G⁻¹ f[m] / snr`.
pub fn mse_analytic(m: usize, sub: &Subspace, snr: f64, spectrum: DopplerSpectrum, doppler: f64) -> Result<MseTerms> {
    if !(snr > 0.0) {
        return Err(Error::Config(format!("snr must be positive, got {snr}")));
    }
    Ok(MseTerms {
        bias2: bias_squared(sub, m, spectrum, doppler)?,
        variance: sub.noise_gain(m)? / snr,
    })
}
