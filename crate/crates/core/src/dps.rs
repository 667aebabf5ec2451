//! Discrete prolate spheroidal (Slepian) sequences.
//!
//! The basis vectors are the eigenvectors of the flat-spectrum covariance
//! over the pilot window. Outside the window they are continued with the
//! minimum-energy band-limited extension
//! `u_p[m] = (1/λ_p) Σ_l R_flat[m-l] u_p[l]`, which lets the reduced-rank
//! estimator extrapolate into the payload.
//!
//! Two eigenvalue scalings appear in this module. `R_flat` has unit
//! diagonal, so its eigenvalues sum to M. The classical band-limiting kernel
//! `sin(2πν k)/(πk)` is `2ν·R_flat`; its eigenvalues lie in (0, 1) and equal
//! the energy concentration of each extended sequence inside the window.
//! [`DpsBasis::lambda`] stores the classical scaling.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;

/// Concentrations below this value make a dimension unusable for extension.
pub const MIN_CONCENTRATION: f64 = 1e-12;
/// Largest accepted condition number of the pilot Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// `R_flat[k] = sin(2πν k) / (2πν k)`, unit at lag zero.
pub fn flat_kernel(lag: i64, doppler: f64) -> f64 {
    if lag == 0 || doppler == 0.0 {
        1.0
    } else {
        let x = 2.0 * PI * doppler * lag as f64;
        x.sin() / x
    }
}

/// Flat-Doppler-spectrum covariance over `window` samples, unit diagonal.
pub fn flat_covariance(window: usize, doppler: f64) -> Result<DMatrix<f64>> {
    if !(doppler > 0.0 && doppler < 0.5) {
        return Err(Error::Config(format!(
            "flat covariance needs 0 < doppler < 1/2, got {doppler}"
        )));
    }
    Ok(DMatrix::from_fn(window, window, |l, m| flat_kernel(l as i64 - m as i64, doppler)))
}

/// Slepian basis over the window `1..=M`, evaluated on `1..=horizon`.
#[derive(Debug, Clone)]
pub struct DpsBasis {
    pub window: usize,
    pub band: f64,
    pub horizon: usize,
    /// M × M, columns ordered by descending eigenvalue.
    pub vectors: DMatrix<f64>,
    /// Eigenvalues of the classical band-limiting kernel (= κ_p).
    pub lambda: Vec<f64>,
    /// horizon × M matrix of the extended sequences.
    pub extended: DMatrix<f64>,
}

impl DpsBasis {
    pub fn new(window: usize, band: f64, horizon: usize) -> Result<Self> {
        if window == 0 || horizon < window {
            return Err(Error::Config(format!(
                "basis needs 0 < window <= horizon, got window {window}, horizon {horizon}"
            )));
        }
        if band == 0.0 {
            return Ok(Self::constant(window, horizon));
        }
        let cov = flat_covariance(window, band)?;
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..window).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut vectors = DMatrix::zeros(window, window);
        let mut flat_eigs = Vec::with_capacity(window);
        for (p, &idx) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(idx).clone_owned();
            fix_sign(&mut col);
            vectors.set_column(p, &col);
            flat_eigs.push(eig.eigenvalues[idx]);
        }
        let lambda: Vec<f64> = flat_eigs.iter().map(|&l| (2.0 * band * l).clamp(0.0, 1.0)).collect();

        let mut extended = DMatrix::zeros(horizon, window);
        extended.view_mut((0, 0), (window, window)).copy_from(&vectors);
        for p in 0..window {
            if lambda[p] < MIN_CONCENTRATION {
                continue;
            }
            for m in window..horizon {
                let acc: f64 = (0..window)
                    .map(|l| flat_kernel(m as i64 - l as i64, band) * vectors[(l, p)])
                    .sum();
                extended[(m, p)] = acc / flat_eigs[p];
            }
        }
        Ok(DpsBasis { window, band, horizon, vectors, lambda, extended })
    }

    /// ν_D = 0: the band-limited space collapses to the constant sequence.
    fn constant(window: usize, horizon: usize) -> Self {
        let ones = DMatrix::<f64>::from_element(window, window, 1.0);
        let eig = SymmetricEigen::new(ones);
        let mut order: Vec<usize> = (0..window).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vectors = DMatrix::zeros(window, window);
        for (p, &idx) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(idx).clone_owned();
            fix_sign(&mut col);
            vectors.set_column(p, &col);
        }
        let c = 1.0 / (window as f64).sqrt();
        vectors.column_mut(0).fill(c);
        let mut lambda = vec![0.0; window];
        lambda[0] = 1.0;
        let mut extended = DMatrix::zeros(horizon, window);
        extended.view_mut((0, 0), (window, window)).copy_from(&vectors);
        extended.view_mut((window, 0), (horizon - window, 1)).fill(c);
        DpsBasis { window, band: 0.0, horizon, vectors, lambda, extended }
    }

    /// Energy concentrations κ_p.
    pub fn concentration(&self) -> &[f64] {
        &self.lambda
    }

    /// Number of leading sequences whose extension is numerically usable.
    pub fn max_dimension(&self) -> usize {
        self.lambda.iter().take_while(|&&l| l >= MIN_CONCENTRATION).count()
    }

    /// `f[m] = [u_0[m], …, u_{D-1}[m]]ᵀ` at 1-based time `m`.
    pub fn eval(&self, m: usize, dimension: usize) -> Result<DVector<f64>> {
        if m == 0 || m > self.horizon {
            return Err(Error::TimeOutOfRange { index: m, horizon: self.horizon });
        }
        Ok(self.extended.view((m - 1, 0), (1, dimension)).transpose().column(0).into_owned())
    }

    /// Restricts the basis to `dimension` sequences observed at `pilots`.
    pub fn subspace(&self, dimension: usize, pilots: &[usize]) -> Result<Subspace> {
        if dimension == 0 || dimension > self.window {
            return Err(Error::DimensionRejected {
                dimension,
                reason: format!("must lie in 1..={}", self.window),
            });
        }
        if dimension > self.max_dimension() {
            return Err(Error::DimensionRejected {
                dimension,
                reason: format!(
                    "concentration {:e} of sequence {} is below {MIN_CONCENTRATION:e}",
                    self.lambda[dimension - 1],
                    dimension - 1
                ),
            });
        }
        if pilots.is_empty() {
            return Err(Error::EmptyPilotSet);
        }
        if let Some(&bad) = pilots.iter().find(|&&m| m == 0 || m > self.window) {
            return Err(Error::TimeOutOfRange { index: bad, horizon: self.window });
        }
        if pilots.len() < dimension {
            return Err(Error::DimensionRejected {
                dimension,
                reason: format!("only {} pilots", pilots.len()),
            });
        }
        let pilot_rows = DMatrix::from_fn(pilots.len(), dimension, |r, p| self.vectors[(pilots[r] - 1, p)]);
        let gram = pilot_rows.transpose() * &pilot_rows;
        let eig = SymmetricEigen::new(gram.clone());
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if !(lo > 0.0) || hi / lo > MAX_GRAM_CONDITION {
            return Err(Error::DimensionRejected {
                dimension,
                reason: format!("pilot Gram matrix condition {:e}", hi / lo),
            });
        }
        let chol = gram.clone().cholesky().ok_or_else(|| Error::DimensionRejected {
            dimension,
            reason: "pilot Gram matrix not positive definite".into(),
        })?;
        let gram_inv = chol.inverse();
        let eval = self.extended.columns(0, dimension).into_owned();
        Ok(Subspace {
            dimension,
            pilots: pilots.to_vec(),
            pilot_rows,
            gram,
            gram_inv,
            eval,
        })
    }
}

// First entry with non-negligible magnitude is made positive.
fn fix_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * scale.max(1e-300)).copied() {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// A D-dimensional Slepian subspace together with the pilot set it is fitted on.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub dimension: usize,
    /// 1-based pilot indices.
    pub pilots: Vec<usize>,
    /// U^(P): M_p × D
    pub pilot_rows: DMatrix<f64>,
    /// G = U^(P)ᵀ U^(P)
    pub gram: DMatrix<f64>,
    pub gram_inv: DMatrix<f64>,
    /// horizon × D, row `m-1` is `f[m]ᵀ`.
    pub eval: DMatrix<f64>,
}

impl Subspace {
    pub fn horizon(&self) -> usize {
        self.eval.nrows()
    }

    pub fn f(&self, m: usize) -> Result<DVector<f64>> {
        if m == 0 || m > self.horizon() {
            return Err(Error::TimeOutOfRange { index: m, horizon: self.horizon() });
        }
        Ok(self.eval.row(m - 1).transpose())
    }

    /// Interpolation weights `c_ℓ = f[m]ᵀ G⁻¹ f[ℓ]` over the pilots, so that
    /// the unquantized prediction is `Σ_ℓ c_ℓ w'[ℓ]`.
    pub fn weights(&self, m: usize) -> Result<DVector<f64>> {
        let f = self.f(m)?;
        Ok(&self.pilot_rows * (&self.gram_inv * f))
    }

    /// `f[m]ᵀ G⁻¹ f[m]`, the noise gain of the estimator at time `m`.
    pub fn noise_gain(&self, m: usize) -> Result<f64> {
        let f = self.f(m)?;
        Ok(f.dot(&(&self.gram_inv * &f)))
    }
}

/// Energy concentrations κ_p of the basis.
pub fn energy_concentration(basis: &DpsBasis) -> Vec<f64> {
    basis.concentration().to_vec()
}

/// Mean-square-error proxy minimized by the unquantized dimension choice:
/// `(1/(2ν M)) Σ_{p≥D} κ_p + D/(M P)`.
pub fn dimension_objective(kappa: &[f64], band: f64, power: f64, dimension: usize) -> f64 {
    let m = kappa.len() as f64;
    let tail: f64 = kappa[dimension..].iter().sum();
    tail / (2.0 * band * m) + dimension as f64 / (m * power)
}

/// D_ub: the subspace dimension minimizing the unquantized prediction MSE.
pub fn optimal_dimension_unquantized(window: usize, band: f64, power: f64) -> Result<usize> {
    if band == 0.0 {
        return Ok(1);
    }
    let basis = DpsBasis::new(window, band, window)?;
    Ok(optimal_dimension(&basis, power))
}

pub fn optimal_dimension(basis: &DpsBasis, power: f64) -> usize {
    if basis.band == 0.0 {
        return 1;
    }
    let kappa = basis.concentration();
    let mut best = (1, f64::INFINITY);
    for d in 1..=kappa.len() {
        let v = dimension_objective(kappa, basis.band, power, d);
        if v < best.1 {
            best = (d, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_covariance_examples() {
        let r = flat_covariance(5, 0.25).unwrap();
        assert_eq!(r[(2, 2)], 1.0);
        assert!(r[(0, 2)].abs() < 1e-15);
        let r = flat_covariance(3, 0.004).unwrap();
        // sin(0.008π)/(0.008π) evaluated with a Taylor series
        let x: f64 = 0.008 * PI;
        let taylor = 1.0 - x * x / 6.0 + x.powi(4) / 120.0 - x.powi(6) / 5040.0;
        assert!((r[(0, 1)] - taylor).abs() < 1e-15);
        assert!(flat_covariance(3, 0.0).is_err());
    }

    #[test]
    fn orthonormal_and_sorted() {
        let b = DpsBasis::new(15, 0.004, 60).unwrap();
        let gram = b.vectors.transpose() * &b.vectors;
        assert!((gram - DMatrix::identity(15, 15)).amax() < 1e-10);
        for w in b.lambda.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(b.lambda.iter().all(|&l| (0.0..=1.0 + 1e-9).contains(&l)));
        assert_eq!(b.extended.rows(0, 15), b.vectors);
    }

    #[test]
    fn eigen_residual() {
        let b = DpsBasis::new(15, 0.004, 15).unwrap();
        let r = flat_covariance(15, 0.004).unwrap();
        for p in 0..b.max_dimension() {
            let u = b.vectors.column(p);
            let flat_eig = b.lambda[p] / (2.0 * 0.004);
            assert!((&r * u - u * flat_eig).norm() < 1e-9);
        }
    }

    #[test]
    fn sign_convention() {
        let b = DpsBasis::new(15, 0.01, 15).unwrap();
        for p in 0..15 {
            let col = b.vectors.column(p);
            let first = col.iter().find(|x| x.abs() > 1e-10 * col.amax()).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn full_window_gram_is_identity() {
        let b = DpsBasis::new(15, 0.004, 60).unwrap();
        let all: Vec<usize> = (1..=15).collect();
        let s = b.subspace(3, &all).unwrap();
        assert!((&s.gram - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn pilot_gram_positive_definite() {
        let b = DpsBasis::new(15, 0.004, 60).unwrap();
        let pilots = [1, 4, 7, 10, 13];
        for d in 1..=3 {
            let s = b.subspace(d, &pilots).unwrap();
            assert!((&s.gram - s.gram.transpose()).amax() < 1e-15);
            assert!(s.gram.clone().cholesky().is_some());
        }
    }

    #[test]
    fn rejects_ill_conditioned_dimensions() {
        let b = DpsBasis::new(15, 0.001, 60).unwrap();
        // κ_3 ≈ 4e-15 at this time-bandwidth product
        assert_eq!(b.max_dimension(), 3);
        assert!(matches!(b.subspace(4, &[1, 4, 7, 10, 13]), Err(Error::DimensionRejected { .. })));
        assert!(matches!(b.subspace(6, &[1, 4, 7, 10, 13]), Err(Error::DimensionRejected { .. })));
    }

    #[test]
    fn zero_doppler_basis_is_constant() {
        let b = DpsBasis::new(6, 0.0, 10).unwrap();
        assert_eq!(b.max_dimension(), 1);
        for m in 1..=10 {
            assert!((b.eval(m, 1).unwrap()[0] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        }
        assert!(b.subspace(2, &[1, 2, 3]).is_err());
    }

    #[test]
    fn dub_examples() {
        assert_eq!(optimal_dimension_unquantized(15, 0.004, 1e3).unwrap(), 2);
        assert_eq!(optimal_dimension_unquantized(15, 0.004, 1e-6).unwrap(), 1);
        assert_eq!(optimal_dimension_unquantized(15, 0.0, 1e3).unwrap(), 1);
    }

    #[test]
    fn dub_non_decreasing_in_power() {
        for &nu in &[0.001, 0.004, 0.02] {
            let basis = DpsBasis::new(15, nu, 15).unwrap();
            let kappa = basis.concentration();
            let mut prev = 1;
            for i in 0..60 {
                let p = 10f64.powf(i as f64 / 10.0);
                // exhaustive oracle
                let oracle = (1..=15)
                    .min_by(|&a, &b| {
                        dimension_objective(kappa, nu, p, a).total_cmp(&dimension_objective(kappa, nu, p, b))
                    })
                    .unwrap();
                let d = optimal_dimension(&basis, p);
                assert_eq!(d, oracle);
                assert!(d >= prev);
                prev = d;
            }
        }
    }
}
