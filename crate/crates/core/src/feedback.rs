//! Grassmannian limited feedback of the stacked subspace coefficients.
//!
//! The receiver whitens η̃ with the coefficient covariance implied by a flat
//! PDP and a flat Doppler spectrum, quantizes the direction of the whitened
//! vector, and broadcasts the index. The transmitter undoes the whitening.
//! Only the direction survives, which is enough because the IA solution is
//! invariant to per-link scaling.

use crate::dps::{flat_kernel, Subspace};
use crate::error::{Error, Result};
use crate::math::{complex_gaussian_vector, isotropic_unit_vector, CMatrix, CVector, C64};
use nalgebra::DMatrix;
use rand::Rng;
use std::io::{Read, Write};
use std::path::Path;

/// Per-tap coefficient covariance `λˢ = G⁻¹ U_Pᵀ (pˢ R_P + I/P) U_P G⁻¹` and
/// the block-diagonal whitening factor.
#[derive(Debug, Clone)]
pub struct CoefficientStatistics {
    pub lambda: Vec<DMatrix<f64>>,
    /// Lower Cholesky factor of each λˢ; Σ = blockdiag(chol).
    pub chol: Vec<DMatrix<f64>>,
    pub dimension: usize,
}

impl CoefficientStatistics {
    /// `pdp` is the PDP assumed by the receiver, `power` the pilot SNR.
    pub fn new(sub: &Subspace, band: f64, pdp: &[f64], power: f64) -> Result<Self> {
        if !(power > 0.0) {
            return Err(Error::Config(format!("power must be positive, got {power}")));
        }
        let np = sub.pilots.len();
        let r_p = DMatrix::from_fn(np, np, |a, b| {
            flat_kernel(sub.pilots[a] as i64 - sub.pilots[b] as i64, band)
        });
        let proj = &sub.gram_inv * sub.pilot_rows.transpose();
        let mut lambda = Vec::with_capacity(pdp.len());
        let mut chol = Vec::with_capacity(pdp.len());
        for &p in pdp {
            let inner = &r_p * p + DMatrix::identity(np, np) / power;
            let mut l = &proj * inner * proj.transpose();
            l = (&l + l.transpose()) * 0.5;
            let factor = match l.clone().cholesky() {
                Some(c) => c.l(),
                None => {
                    log::warn!("coefficient covariance not positive definite, regularizing");
                    l += DMatrix::identity(sub.dimension, sub.dimension) * 1e-12;
                    l.clone()
                        .cholesky()
                        .ok_or_else(|| Error::Singular("coefficient covariance".into()))?
                        .l()
                }
            };
            lambda.push(l);
            chol.push(factor);
        }
        Ok(CoefficientStatistics { lambda, chol, dimension: sub.dimension })
    }

    pub fn taps(&self) -> usize {
        self.lambda.len()
    }

    /// R_η = blockdiag(λ¹, …, λˢ)
    pub fn covariance(&self) -> DMatrix<f64> {
        block_diagonal(&self.lambda)
    }

    /// Σ with R_η = Σ Σᵀ.
    pub fn sigma(&self) -> DMatrix<f64> {
        block_diagonal(&self.chol)
    }

    /// `Σ_s fᵀ λˢ f / S`, the per-tap coefficient energy seen through `f`.
    pub fn zeta(&self, f: &nalgebra::DVector<f64>) -> f64 {
        self.lambda.iter().map(|l| f.dot(&(l * f))).sum::<f64>() / self.taps() as f64
    }

    /// η̆ = Σ⁻¹ η̃
    pub fn whiten(&self, eta: &CVector) -> Result<CVector> {
        self.check_len(eta)?;
        let d = self.dimension;
        let mut out = CVector::zeros(eta.len());
        for (s, l) in self.chol.iter().enumerate() {
            let lc = l.map(C64::from);
            let block = eta.rows(s * d, d).into_owned();
            let x = lc
                .solve_lower_triangular(&block)
                .ok_or_else(|| Error::Singular("whitening factor".into()))?;
            out.rows_mut(s * d, d).copy_from(&x);
        }
        Ok(out)
    }

    /// Σ η̂
    pub fn unwhiten(&self, eta: &CVector) -> Result<CVector> {
        self.check_len(eta)?;
        let d = self.dimension;
        let mut out = CVector::zeros(eta.len());
        for (s, l) in self.chol.iter().enumerate() {
            let lc = l.map(C64::from);
            let x = lc * eta.rows(s * d, d);
            out.rows_mut(s * d, d).copy_from(&x);
        }
        Ok(out)
    }

    fn check_len(&self, eta: &CVector) -> Result<()> {
        let expected = self.dimension * self.taps();
        if eta.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: eta.len() });
        }
        Ok(())
    }
}

fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), b.shape()).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Squared chordal distance `1 − |aᴴb|² / (‖a‖²‖b‖²)`.
pub fn chordal_distance_sq(a: &CVector, b: &CVector) -> f64 {
    let num = a.dotc(b).norm_sqr();
    let den = a.norm_squared() * b.norm_squared();
    (1.0 - num / den).max(0.0)
}

/// Random vector quantization codebook of 2^bits isotropic unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub bits: u32,
    pub dim: usize,
    /// One codeword per row.
    pub words: CMatrix,
}

const MAGIC: &[u8; 4] = b"RVQ1";

impl Codebook {
    pub fn random<R: Rng + ?Sized>(bits: u32, dim: usize, rng: &mut R) -> Result<Self> {
        if bits > crate::config::MAX_EXPLICIT_BITS {
            return Err(Error::Codebook(format!(
                "{bits} bits exceed the explicit limit of {}",
                crate::config::MAX_EXPLICIT_BITS
            )));
        }
        if dim == 0 {
            return Err(Error::Codebook("dimension must be positive".into()));
        }
        let size = 1usize << bits;
        let mut words = CMatrix::zeros(size, dim);
        for i in 0..size {
            let v = isotropic_unit_vector(dim, rng);
            words.set_row(i, &v.transpose());
        }
        Ok(Codebook { bits, dim, words })
    }

    pub fn from_words(words: CMatrix) -> Result<Self> {
        let size = words.nrows();
        if !size.is_power_of_two() {
            return Err(Error::Codebook(format!("{size} codewords is not a power of two")));
        }
        for i in 0..size {
            let n = words.row(i).norm();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::Codebook(format!("codeword {i} has norm {n}")));
            }
        }
        Ok(Codebook { bits: size.trailing_zeros(), dim: words.ncols(), words })
    }

    pub fn len(&self) -> usize {
        self.words.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.words.nrows() == 0
    }

    pub fn word(&self, index: usize) -> CVector {
        self.words.row(index).transpose()
    }

    /// Index of the codeword maximizing `|cᴴx|`; the lowest index wins ties.
    pub fn quantize(&self, x: &CVector) -> Result<(usize, CVector)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.len() {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.dim {
                acc += self.words[(i, j)].conj() * x[j];
            }
            let g = acc.norm_sqr();
            if g > best.1 {
                best = (i, g);
            }
        }
        Ok((best.0, self.word(best.0)))
    }

    /// Binary layout: "RVQ1", u32 bits, u32 dim, 4 zero bytes, then
    /// little-endian f64 (re, im) pairs row by row.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.bits.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&[0u8; 4])?;
        for i in 0..self.len() {
            for j in 0..self.dim {
                let z = self.words[(i, j)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(Error::Codebook("bad magic".into()));
        }
        let bits = u32::from_le_bytes(header[4..8].try_into().unwrap());
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        if bits > crate::config::MAX_EXPLICIT_BITS {
            return Err(Error::Codebook(format!("{bits} bits in header")));
        }
        let size = 1usize << bits;
        let mut words = CMatrix::zeros(size, dim);
        let mut buf = [0u8; 16];
        for i in 0..size {
            for j in 0..dim {
                r.read_exact(&mut buf)?;
                let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
                let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
                words[(i, j)] = C64::new(re, im);
            }
        }
        Codebook::from_words(words)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Codebook::read_from(std::io::BufReader::new(file))
    }
}

/// Draws the squared chordal distance between an arbitrary direction and the
/// closest of 2^bits isotropic codewords in dimension `dim`.
///
/// Each codeword satisfies `P(d² ≤ x) = x^{dim−1}`, so the minimum over the
/// codebook has `P(d² > x) = (1 − x^{dim−1})^{2^bits}`, inverted here.
pub fn sample_rvq_distance<R: Rng + ?Sized>(bits: u32, dim: usize, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    rvq_distance_quantile(u, bits, dim)
}

/// Inverse CDF of the minimum squared chordal distance.
pub fn rvq_distance_quantile(u: f64, bits: u32, dim: usize) -> f64 {
    if dim < 2 {
        return 0.0;
    }
    // 1 − (1−u)^{2^-bits}, kept accurate when 2^-bits underflows the naive form
    let inner = -((-(bits as f64)).exp2() * (-u).ln_1p()).exp_m1();
    inner.powf(1.0 / (dim - 1) as f64)
}

/// CDF matching [`rvq_distance_quantile`].
pub fn rvq_distance_cdf(x: f64, bits: u32, dim: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let per_word = x.powi(dim as i32 - 1);
    // 1 − (1 − x^{dim−1})^{2^bits}
    -((bits as f64).exp2() * (-per_word).ln_1p()).exp_m1()
}

/// Statistical model of RVQ: returns `√(1−d²) v + d e` with `v` the input
/// direction and `e` isotropic in its orthogonal complement.
pub fn quantize_perturbation<R: Rng + ?Sized>(x: &CVector, bits: u32, rng: &mut R) -> Result<CVector> {
    let dim = x.len();
    let norm = x.norm();
    if !(norm > 0.0) {
        return Err(Error::Singular("cannot quantize a zero vector".into()));
    }
    let v = x / C64::from(norm);
    if dim < 2 {
        return Ok(v);
    }
    let d2 = sample_rvq_distance(bits, dim, rng);
    let e = loop {
        let g = complex_gaussian_vector(dim, rng);
        let r = &g - &v * v.dotc(&g);
        let n = r.norm();
        if n > 1e-12 {
            break r / C64::from(n);
        }
    };
    Ok(v * C64::from((1.0 - d2).sqrt()) + e * C64::from(d2.sqrt()))
}

/// N_d = ⌈(DS − 1) log₂ P⌉, the bit budget keeping the quantization loss bounded.
pub fn required_bits(dim: usize, power: f64) -> u32 {
    if power <= 1.0 || dim < 2 {
        return 0;
    }
    let x = (dim - 1) as f64 * power.log2();
    // guard exact integers against rounding just above them
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as u32
    } else {
        x.ceil() as u32
    }
}

/// How a receiver turns a whitened direction into the fed-back direction.
#[derive(Debug, Clone)]
pub enum Quantizer {
    Explicit(Codebook),
    Perturbation { bits: u32 },
    /// Unquantized feedback.
    Ideal,
}

impl Quantizer {
    /// Unit-norm direction delivered to the transmitter.
    pub fn apply<R: Rng + ?Sized>(&self, x: &CVector, rng: &mut R) -> Result<CVector> {
        match self {
            Quantizer::Explicit(cb) => Ok(cb.quantize(x)?.1),
            Quantizer::Perturbation { bits } => quantize_perturbation(x, *bits, rng),
            Quantizer::Ideal => {
                let n = x.norm();
                if !(n > 0.0) {
                    return Err(Error::Singular("cannot quantize a zero vector".into()));
                }
                Ok(x / C64::from(n))
            }
        }
    }
}
