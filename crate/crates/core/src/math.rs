//! Numerical helpers shared across the simulator: special functions, the
//! unitary DFT, complex Gaussian sampling and small dense linear algebra.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Bessel function of the first kind, order zero.
///
/// Evaluated from `J0(x) = (1/π) ∫₀^π cos(x sin θ) dθ` with the trapezoidal
/// rule; the integrand is smooth and periodic, so the rule converges
/// geometrically once the node count exceeds |x|/2.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    let n = (2.0 * x).ceil() as usize + 48;
    let h = PI / n as f64;
    let sum: f64 = (0..n).map(|k| (x * (k as f64 * h).sin()).cos()).sum();
    sum / n as f64
}

/// Unitary DFT matrix entry `(1/√N) exp(-j2π i j / N)` with zero-based indices.
pub fn dft_entry(i: usize, j: usize, n: usize) -> C64 {
    let angle = -2.0 * PI * ((i * j) % n) as f64 / n as f64;
    C64::from_polar(1.0 / (n as f64).sqrt(), angle)
}

/// First `cols` columns of the N×N unitary DFT matrix.
pub fn dft_columns(n: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(n, cols, |i, j| dft_entry(i, j, n))
}

/// Standard circular complex Gaussian sample, `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVector {
    CVector::from_fn(len, |_, _| complex_gaussian(rng))
}

/// Uniformly distributed unit vector on the complex sphere in `C^dim`.
pub fn isotropic_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    loop {
        let v = complex_gaussian_vector(dim, rng);
        let norm = v.norm();
        if norm > 1e-300 {
            return v / C64::from(norm);
        }
    }
}

/// Haar-distributed d×d unitary matrix (QR of a Gaussian matrix with the
/// diagonal phase ambiguity of R removed).
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / C64::from(d.norm()) } else { C64::from(1.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Splits `C^n` into an orthonormal basis of the dominant `rank`-dimensional
/// column span of `a` and an orthonormal basis of its complement.
///
/// Column-pivoted Gram–Schmidt: at every step the column with the largest
/// residual is taken. Unlike an eigendecomposition of `a aᴴ` this does not
/// square small singular values, so weak but genuine directions of the span
/// stay separated from the complement.
pub fn split_dominant_subspace(a: &CMatrix, rank: usize) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let rank = rank.min(n).min(a.ncols());
    let mut basis = Vec::with_capacity(n);
    pivoted_gram_schmidt((0..a.ncols()).map(|j| a.column(j).into_owned()).collect(), &mut basis, rank);
    let split = basis.len();
    let units = (0..n)
        .map(|i| {
            let mut e = CVector::zeros(n);
            e[i] = C64::from(1.0);
            e
        })
        .collect();
    pivoted_gram_schmidt(units, &mut basis, n - split);
    let rest = basis.split_off(split);
    (columns_to_matrix(n, &basis), columns_to_matrix(n, &rest))
}

/// Appends up to `count` orthonormal vectors to `basis`, each time taking
/// the candidate with the largest component orthogonal to `basis`.
fn pivoted_gram_schmidt(mut candidates: Vec<CVector>, basis: &mut Vec<CVector>, count: usize) {
    let orthogonalize = |v: &mut CVector, basis: &[CVector]| {
        for _pass in 0..2 {
            for b in basis {
                let p = b.dotc(v);
                *v -= b * p;
            }
        }
    };
    for c in candidates.iter_mut() {
        orthogonalize(c, basis);
    }
    for _ in 0..count {
        let Some((best, _)) = candidates
            .iter()
            .map(|c| c.norm())
            .enumerate()
            .filter(|(_, norm)| *norm > 0.0)
            .max_by(|x, y| x.1.total_cmp(&y.1))
        else {
            return;
        };
        let mut q = candidates.swap_remove(best);
        orthogonalize(&mut q, basis);
        let norm = q.norm();
        if !(norm > 0.0) {
            return;
        }
        q /= C64::from(norm);
        for c in candidates.iter_mut() {
            let p = q.dotc(c);
            *c -= &q * p;
        }
        basis.push(q);
    }
}

fn columns_to_matrix(n: usize, cols: &[CVector]) -> CMatrix {
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(cols)
    }
}

/// Orthonormalizes the columns of `a` (modified Gram–Schmidt with one
/// re-orthogonalization pass). Returns `None` if the columns are dependent
/// to within `tol` relative to their original norm.
pub fn orthonormalize_columns(a: &CMatrix, tol: f64) -> Option<CMatrix> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        let original = q.column(j).norm();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).clone_owned();
                let proj = qi.dotc(&q.column(j));
                let mut col = q.column_mut(j);
                col -= qi * proj;
            }
        }
        let norm = q.column(j).norm();
        if original == 0.0 || norm <= tol * original {
            return None;
        }
        let mut col = q.column_mut(j);
        col /= C64::from(norm);
    }
    Some(q)
}

/// Removes from `v` its component in the span of the orthonormal columns of `basis`.
pub fn project_out(v: &CVector, basis: &CMatrix) -> CVector {
    let mut r = v.clone();
    for _pass in 0..2 {
        for i in 0..basis.ncols() {
            let b = basis.column(i);
            let proj = b.dotc(&r);
            r -= b * proj;
        }
    }
    r
}

/// Projector distance ‖P_a − P_b‖_F between the column spans of two matrices.
pub fn span_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let qa = orthonormalize_columns(a, 1e-12).expect("full column rank");
    let qb = orthonormalize_columns(b, 1e-12).expect("full column rank");
    let pa = &qa * qa.adjoint();
    let pb = &qb * qb.adjoint();
    (pa - pb).norm()
}

/// Normalizes every column of `a` to unit Euclidean norm.
pub fn normalize_columns(a: &mut CMatrix) -> Option<()> {
    for j in 0..a.ncols() {
        let norm = a.column(j).norm();
        if norm <= 1e-300 {
            return None;
        }
        let mut col = a.column_mut(j);
        col /= C64::from(norm);
    }
    Some(())
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Power series oracle, accurate for moderate |x|.
    fn j0_series(x: f64) -> f64 {
        let q = -x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        for &x in &[0.0, 0.1, 0.628_318_530_7, 1.0, 2.404_825_557_7, 5.0, 10.0, 15.0] {
            assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-10, "x = {x}");
        }
        // first zero
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-12);
        assert_eq!(bessel_j0(0.0), 1.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact up to degree 15
        let i14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i14 - 2.0 / 15.0).abs() < 1e-14);
        let cos: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((cos - 2.0 * 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn dft_is_unitary() {
        let d = dft_columns(5, 5);
        let eye = &d.adjoint() * &d;
        assert!((eye - CMatrix::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = haar_unitary(3, &mut rng);
        assert!((&q.adjoint() * &q - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn dominant_split_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = CMatrix::from_fn(5, 2, |_, _| complex_gaussian(&mut rng));
        let (top, rest) = split_dominant_subspace(&a, 2);
        assert_eq!((top.ncols(), rest.ncols()), (2, 3));
        assert!((rest.adjoint() * &a).norm() < 1e-12);
        assert!(span_distance(&top, &a) < 1e-10);
        let mut all = top.clone().resize_horizontally(5, C64::from(0.0));
        all.view_mut((0, 2), (5, 3)).copy_from(&rest);
        assert!((all.adjoint() * &all - CMatrix::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn dominant_split_keeps_weak_directions() {
        // third direction 1e-9 below the others: squaring it would drown it,
        // resolving it directly leaves an eps/1e-9 error
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = orthonormalize_columns(&CMatrix::from_fn(5, 3, |_, _| complex_gaussian(&mut rng)), 1e-12).unwrap();
        let scale = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from(1.0), C64::from(0.5), C64::from(1e-9)]));
        let mix = haar_unitary(3, &mut rng);
        let a = &u * scale * mix;
        let (_, rest) = split_dominant_subspace(&a, 3);
        assert!((rest.adjoint() * &u).norm() < 1e-6);
    }
}
