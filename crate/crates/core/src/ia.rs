//! Interference alignment over N symbol extensions.
//!
//! Each link is a diagonal N × N matrix (one entry per subcarrier), so all
//! link matrices commute and the three-user closed-form solution reduces to
//! elementwise arithmetic. Precoders and decoders are recomputed for every
//! payload symbol from whatever channel the transmitter believes in; leakage
//! and rate are then measured on the true channel.

use crate::error::{Error, Result};
use crate::math::{
    dft_columns, haar_unitary, orthonormalize_columns, project_out, split_dominant_subspace, CMatrix, CVector, C64,
};
use rand::Rng;

/// Frequency responses `w_{k,ℓ}` of all K² links at one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkResponses {
    pub users: usize,
    data: Vec<CVector>,
}

impl LinkResponses {
    /// `f(rx, tx)` with 1-based indices.
    pub fn from_fn<F: FnMut(usize, usize) -> CVector>(users: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(users * users);
        for rx in 1..=users {
            for tx in 1..=users {
                data.push(f(rx, tx));
            }
        }
        let n = data.first().map_or(0, |v| v.len());
        assert!(data.iter().all(|v| v.len() == n), "all links need the same length");
        LinkResponses { users, data }
    }

    pub fn subcarriers(&self) -> usize {
        self.data.first().map_or(0, |v| v.len())
    }

    pub fn get(&self, rx: usize, tx: usize) -> &CVector {
        &self.data[(rx - 1) * self.users + (tx - 1)]
    }

    /// Every link rescaled to `‖w‖² = N`. IA spans do not depend on per-link
    /// scale; the rescaling keeps the design objective comparable across
    /// links whose fed-back norm is arbitrary.
    pub fn normalized(&self) -> Self {
        let n = self.subcarriers() as f64;
        LinkResponses {
            users: self.users,
            data: self
                .data
                .iter()
                .map(|w| {
                    let norm = w.norm();
                    if norm > 0.0 {
                        w * C64::from(n.sqrt() / norm)
                    } else {
                        w.clone()
                    }
                })
                .collect(),
        }
    }

    /// Elementwise difference `self − other`.
    pub fn difference(&self, other: &LinkResponses) -> Self {
        LinkResponses {
            users: self.users,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Streams per user: `(n+1, n, n)` for three users on `N = 2n+1` extensions,
/// all N streams for a single user.
pub fn stream_allocation(users: usize, subcarriers: usize) -> Result<Vec<usize>> {
    match users {
        1 => Ok(vec![subcarriers]),
        3 if subcarriers % 2 == 1 && subcarriers >= 3 => {
            let n = subcarriers / 2;
            Ok(vec![n + 1, n, n])
        }
        _ => Err(Error::Config(format!(
            "closed-form alignment needs K = 3 with odd N ≥ 3 (or K = 1), got K = {users}, N = {subcarriers}"
        ))),
    }
}

/// Precoders and decoders for every user; column `i` of each matrix serves stream `i`.
#[derive(Debug, Clone)]
pub struct IaSolution {
    pub streams: Vec<usize>,
    pub precoders: Vec<CMatrix>,
    pub decoders: Vec<CMatrix>,
}

impl IaSolution {
    pub fn users(&self) -> usize {
        self.streams.len()
    }

    pub fn total_streams(&self) -> usize {
        self.streams.iter().sum()
    }
}

fn rms(w: &CVector) -> f64 {
    w.norm() / (w.len() as f64).sqrt()
}

fn check_nonzero(w: &LinkResponses) -> Result<()> {
    for rx in 1..=w.users {
        for tx in 1..=w.users {
            let link = w.get(rx, tx);
            let floor = 1e-12 * rms(link);
            if !(floor > 0.0) || link.iter().any(|x| x.norm() <= floor) {
                return Err(Error::TrialRejected(format!("link ({rx},{tx}) has a vanishing subcarrier")));
            }
        }
    }
    Ok(())
}

/// Three-user closed-form solution with unit-norm precoder columns.
pub fn closed_form_precoders(w: &LinkResponses) -> Result<Vec<CMatrix>> {
    let n_sub = w.subcarriers();
    let streams = stream_allocation(w.users, n_sub)?;
    if w.users == 1 {
        return Ok(vec![CMatrix::identity(n_sub, n_sub)]);
    }
    check_nonzero(w)?;
    let n = n_sub / 2;
    let g = |rx, tx, i: usize| w.get(rx, tx)[i];
    let t: Vec<C64> = (0..n_sub)
        .map(|i| g(1, 3, i) / g(2, 3, i) * g(2, 1, i) / g(3, 1, i) * g(3, 2, i) / g(1, 2, i))
        .collect();
    let powers = |i: usize, p: usize| t[i].powu(p as u32);
    let mut v1 = CMatrix::from_fn(n_sub, n + 1, |i, j| powers(i, j));
    let mut v2 = CMatrix::from_fn(n_sub, n, |i, j| g(3, 1, i) / g(3, 2, i) * powers(i, j + 1));
    let mut v3 = CMatrix::from_fn(n_sub, n, |i, j| g(2, 1, i) / g(2, 3, i) * powers(i, j));
    for v in [&mut v1, &mut v2, &mut v3] {
        crate::math::normalize_columns(v).ok_or_else(|| Error::TrialRejected("zero precoder column".into()))?;
    }
    if orthonormalize_columns(&v1, 1e-8).is_none() {
        return Err(Error::TrialRejected("closed-form precoder of user 1 is rank deficient".into()));
    }
    debug_assert_eq!(streams, vec![v1.ncols(), v2.ncols(), v3.ncols()]);
    Ok(vec![v1, v2, v3])
}

fn apply_link(w: &CVector, v: &CMatrix) -> CMatrix {
    CMatrix::from_fn(v.nrows(), v.ncols(), |r, c| w[r] * v[(r, c)])
}

/// Orthonormal basis of the subspace at receiver `k` that is free of
/// inter-user interference.
fn interference_free_space(w: &LinkResponses, precoders: &[CMatrix], k: usize) -> Result<CMatrix> {
    let n = w.subcarriers();
    let dk = precoders[k - 1].ncols();
    let blocks: Vec<CMatrix> = (1..=w.users)
        .filter(|&l| l != k)
        .map(|l| apply_link(w.get(k, l), &precoders[l - 1]))
        .collect();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    if cols == 0 {
        return Ok(CMatrix::identity(n, n));
    }
    let mut stacked = CMatrix::zeros(n, cols);
    let mut off = 0;
    for b in &blocks {
        stacked.view_mut((0, off), b.shape()).copy_from(b);
        off += b.ncols();
    }
    if n < dk {
        return Err(Error::TrialRejected(format!("receiver {k} has fewer dimensions than streams")));
    }
    let (_, free) = split_dominant_subspace(&stacked, cols.min(n - dk));
    Ok(free)
}

/// Zero-forcing decoders: for each stream, the projection of its desired
/// signal onto the space orthogonal to all other streams at that receiver,
/// normalized.
pub fn zero_forcing_decoders(precoders: &[CMatrix], w: &LinkResponses) -> Result<Vec<CMatrix>> {
    let mut decoders = Vec::with_capacity(w.users);
    for k in 1..=w.users {
        let free = interference_free_space(w, precoders, k)?;
        let desired = free.adjoint() * apply_link(w.get(k, k), &precoders[k - 1]);
        let dk = desired.ncols();
        let mut u = CMatrix::zeros(w.subcarriers(), dk);
        let scale = rms(w.get(k, k));
        for i in 0..dk {
            let others: Vec<CVector> = (0..dk).filter(|&j| j != i).map(|j| desired.column(j).into_owned()).collect();
            let basis = if others.is_empty() {
                CMatrix::zeros(desired.nrows(), 0)
            } else {
                orthonormalize_columns(&CMatrix::from_columns(&others), 1e-10)
                    .ok_or_else(|| Error::TrialRejected(format!("desired streams of user {k} are dependent")))?
            };
            let r = project_out(&desired.column(i).into_owned(), &basis);
            let norm = r.norm();
            // a tiny but nonzero residual is a genuinely weak stream and is
            // kept; only an exactly degenerate design is rejected
            if !(norm > 1e-14 * scale) {
                return Err(Error::TrialRejected(format!("direct gain of stream {i} of user {k} vanishes")));
            }
            u.set_column(i, &(&free * r / C64::from(norm)));
        }
        decoders.push(u);
    }
    Ok(decoders)
}

/// Random unitary rotations tried by [`optimize_precoder_subspace`], drawn
/// once and reused for every symbol of a trial.
#[derive(Debug, Clone)]
pub struct RotationBank {
    per_user: Vec<Vec<CMatrix>>,
}

impl RotationBank {
    pub fn new<R: Rng + ?Sized>(streams: &[usize], count: usize, rng: &mut R) -> Self {
        let per_user = streams
            .iter()
            .map(|&d| (0..count).map(|_| haar_unitary(d, rng)).collect())
            .collect();
        RotationBank { per_user }
    }

    pub fn empty(users: usize) -> Self {
        RotationBank { per_user: vec![Vec::new(); users] }
    }

    pub fn count(&self) -> usize {
        self.per_user.first().map_or(0, |r| r.len())
    }
}

/// Design-channel objective of one user: `Σ_i log₂(1 + (NP/d)/‖row_i(A⁻¹)‖²)`
/// where `A` maps precoder coordinates to the interference-free space.
/// This equals `Σ_i log₂(1 + (NP/d)|u_iᴴ W v_i|²)` with zero-forcing decoders.
fn user_objective(a: &CMatrix, snr_per_stream: f64) -> Option<f64> {
    let inv = a.clone().try_inverse()?;
    let mut total = 0.0;
    for i in 0..inv.nrows() {
        let g = 1.0 / inv.row(i).norm_squared();
        total += (1.0 + snr_per_stream * g).log2();
    }
    Some(total)
}

/// Orthonormalizes every precoder within its span, then keeps the best of
/// the identity and the bank's rotations per user. Rotating user k's
/// precoder leaves every interference subspace unchanged, so users are
/// optimized independently.
pub fn optimize_precoder_subspace(
    precoders: &[CMatrix],
    w: &LinkResponses,
    power: f64,
    bank: &RotationBank,
) -> Result<Vec<CMatrix>> {
    let n = w.subcarriers() as f64;
    let mut out = Vec::with_capacity(precoders.len());
    for (idx, v) in precoders.iter().enumerate() {
        let k = idx + 1;
        let q = orthonormalize_columns(v, 1e-10)
            .ok_or_else(|| Error::TrialRejected(format!("precoder of user {k} is rank deficient")))?;
        let rotations = bank.per_user.get(idx).map(|r| r.as_slice()).unwrap_or(&[]);
        if rotations.is_empty() {
            out.push(q);
            continue;
        }
        let free = interference_free_space(w, precoders, k)?;
        let a0 = free.adjoint() * apply_link(w.get(k, k), &q);
        if a0.nrows() != a0.ncols() {
            out.push(q);
            continue;
        }
        let snr = n * power / q.ncols() as f64;
        let mut best = (user_objective(&a0, snr).unwrap_or(f64::NEG_INFINITY), None);
        for (r, rot) in rotations.iter().enumerate() {
            if let Some(obj) = user_objective(&(&a0 * rot), snr) {
                if obj > best.0 {
                    best = (obj, Some(r));
                }
            }
        }
        out.push(match best.1 {
            Some(r) => q * &rotations[r],
            None => q,
        });
    }
    Ok(out)
}

/// Full design on believed channels: closed form, subspace optimization,
/// zero-forcing decoders.
pub fn design(w: &LinkResponses, power: f64, bank: &RotationBank) -> Result<IaSolution> {
    let w = w.normalized();
    let streams = stream_allocation(w.users, w.subcarriers())?;
    let raw = closed_form_precoders(&w)?;
    let precoders = optimize_precoder_subspace(&raw, &w, power, bank)?;
    let decoders = zero_forcing_decoders(&precoders, &w)?;
    Ok(IaSolution { streams, precoders, decoders })
}

/// Closed-form precoders with zero-forcing decoders and no subspace optimization.
pub fn design_unoptimized(w: &LinkResponses) -> Result<IaSolution> {
    let w = w.normalized();
    let streams = stream_allocation(w.users, w.subcarriers())?;
    let precoders = closed_form_precoders(&w)?;
    let decoders = zero_forcing_decoders(&precoders, &w)?;
    Ok(IaSolution { streams, precoders, decoders })
}

/// `b = conj(u) ∘ v`, so that `uᴴ diag(w) v = wᵀ b`.
pub fn hadamard(u: &CVector, v: &CVector) -> CVector {
    u.zip_map(v, |a, b| a.conj() * b)
}

/// `‖q̂‖²`: energy of `D_Nᴴ b*` in its first S entries.
pub fn q_energy(b: &CVector, taps: usize) -> f64 {
    let d = dft_columns(b.len(), taps);
    (d.adjoint() * b.conjugate()).norm_squared()
}

/// One (receiver stream, transmitter stream) interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub rx: usize,
    pub rx_stream: usize,
    pub tx: usize,
    pub tx_stream: usize,
    /// `(NP/d_ℓ) |wᵀ b|²` on the channel supplied to [`pair_terms`].
    pub power: f64,
    /// Power normalization `NP/d_ℓ` of the transmitting stream.
    pub gain: f64,
    pub b_energy: f64,
}

/// All interfering pairs (every pair except a stream with itself) evaluated
/// on `channel`, which may be the true channel or an error component of it.
pub fn pair_terms(sol: &IaSolution, channel: &LinkResponses, power: f64) -> Vec<PairTerm> {
    let n = channel.subcarriers() as f64;
    let mut out = Vec::new();
    for k in 1..=sol.users() {
        for i in 0..sol.streams[k - 1] {
            let u = sol.decoders[k - 1].column(i).into_owned();
            for l in 1..=sol.users() {
                let gain = n * power / sol.streams[l - 1] as f64;
                let w = channel.get(k, l);
                for j in 0..sol.streams[l - 1] {
                    if k == l && i == j {
                        continue;
                    }
                    let b = hadamard(&u, &sol.precoders[l - 1].column(j).into_owned());
                    let x = w.transpose() * &b;
                    out.push(PairTerm {
                        rx: k,
                        rx_stream: i,
                        tx: l,
                        tx_stream: j,
                        power: gain * x[0].norm_sqr(),
                        gain,
                        b_energy: b.norm_squared(),
                    });
                }
            }
        }
    }
    out
}

/// Signal and leakage of one stream on the true channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamMetrics {
    pub user: usize,
    pub stream: usize,
    pub signal: f64,
    /// Inter-stream leakage.
    pub i1: f64,
    /// Inter-user leakage.
    pub i2: f64,
}

impl StreamMetrics {
    pub fn rate(&self, subcarriers: usize) -> f64 {
        (1.0 + self.signal / (1.0 + self.i1 + self.i2)).log2() / subcarriers as f64
    }
}

pub fn stream_metrics(sol: &IaSolution, channel: &LinkResponses, power: f64) -> Vec<StreamMetrics> {
    let n = channel.subcarriers() as f64;
    let mut out = Vec::with_capacity(sol.total_streams());
    for k in 1..=sol.users() {
        let dk = sol.streams[k - 1];
        for i in 0..dk {
            let u = sol.decoders[k - 1].column(i).into_owned();
            let mut m = StreamMetrics { user: k, stream: i, signal: 0.0, i1: 0.0, i2: 0.0 };
            for l in 1..=sol.users() {
                let gain = n * power / sol.streams[l - 1] as f64;
                let w = channel.get(k, l);
                for j in 0..sol.streams[l - 1] {
                    let b = hadamard(&u, &sol.precoders[l - 1].column(j).into_owned());
                    let p = gain * (w.transpose() * &b)[0].norm_sqr();
                    if k != l {
                        m.i2 += p;
                    } else if i != j {
                        m.i1 += p;
                    } else {
                        m.signal = p;
                    }
                }
            }
            out.push(m);
        }
    }
    out
}

/// Sum rate in bit/s/Hz per subcarrier at one time index.
pub fn sum_rate(sol: &IaSolution, channel: &LinkResponses, power: f64) -> f64 {
    let n = channel.subcarriers();
    stream_metrics(sol, channel, power).iter().map(|m| m.rate(n)).sum()
}

/// Largest `|u_k^iᴴ W_{k,ℓ} v_ℓ^j|` over interfering pairs, relative to the
/// link's RMS gain, and the smallest relative direct gain.
pub fn alignment_residual(sol: &IaSolution, w: &LinkResponses) -> (f64, f64) {
    let mut worst = 0.0_f64;
    let mut weakest = f64::INFINITY;
    for k in 1..=sol.users() {
        for i in 0..sol.streams[k - 1] {
            let u = sol.decoders[k - 1].column(i).into_owned();
            for l in 1..=sol.users() {
                let link = w.get(k, l);
                let scale = rms(link);
                for j in 0..sol.streams[l - 1] {
                    let b = hadamard(&u, &sol.precoders[l - 1].column(j).into_owned());
                    let x = (link.transpose() * &b)[0].norm() / scale;
                    if k == l && i == j {
                        weakest = weakest.min(x);
                    } else {
                        worst = worst.max(x);
                    }
                }
            }
        }
    }
    (worst, weakest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{complex_gaussian_vector, span_distance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_links(users: usize, n: usize, rng: &mut ChaCha8Rng) -> LinkResponses {
        LinkResponses::from_fn(users, |_, _| complex_gaussian_vector(n, rng))
    }

    fn numerical_rank(a: &CMatrix, tol: f64) -> usize {
        let sv = a.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > tol * smax).count()
    }

    #[test]
    fn allocation() {
        assert_eq!(stream_allocation(3, 5).unwrap(), vec![3, 2, 2]);
        assert_eq!(stream_allocation(3, 3).unwrap(), vec![2, 1, 1]);
        assert!(stream_allocation(3, 4).is_err());
        assert!(stream_allocation(2, 5).is_err());
    }

    #[test]
    fn closed_form_aligns_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let w = random_links(3, 5, &mut rng);
            let sol = design_unoptimized(&w).unwrap();
            for (v, d) in sol.precoders.iter().zip(&sol.streams) {
                assert_eq!(v.ncols(), *d);
                for c in 0..v.ncols() {
                    assert!((v.column(c).norm() - 1.0).abs() < 1e-12);
                    assert!((sol.decoders[0].column(0).norm() - 1.0).abs() < 1e-12);
                }
            }
            let (worst, weakest) = alignment_residual(&sol, &w);
            assert!(worst < 1e-8, "{worst}");
            assert!(weakest > 1e-6);
        }
    }

    #[test]
    fn interference_dimension_n3() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_links(3, 3, &mut rng);
        let v = closed_form_precoders(&w).unwrap();
        assert_eq!(v.iter().map(|x| x.ncols()).collect::<Vec<_>>(), vec![2, 1, 1]);
        for k in 1..=3 {
            let cols: Vec<CVector> = (1..=3)
                .filter(|&l| l != k)
                .flat_map(|l| {
                    let m = apply_link(w.get(k, l), &v[l - 1]);
                    (0..m.ncols()).map(move |c| m.column(c).into_owned()).collect::<Vec<_>>()
                })
                .collect();
            let stacked = CMatrix::from_columns(&cols);
            let dk = v[k - 1].ncols();
            assert!(numerical_rank(&stacked, 1e-9) <= 3 - dk);
        }
    }

    #[test]
    fn single_user_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_links(1, 5, &mut rng);
        let v = crate::math::isotropic_unit_vector(5, &mut rng);
        let precoders = vec![CMatrix::from_columns(&[v.clone()])];
        let u = zero_forcing_decoders(&precoders, &w).unwrap();
        let wv = w.get(1, 1).component_mul(&v);
        let mf = &wv / C64::from(wv.norm());
        assert!((u[0].column(0) - mf).norm() < 1e-12);
    }

    #[test]
    fn zero_subcarrier_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut links: Vec<CVector> = (0..9).map(|_| complex_gaussian_vector(5, &mut rng)).collect();
        links[3][2] = C64::new(0.0, 0.0);
        let mut it = links.into_iter();
        let w = LinkResponses::from_fn(3, |_, _| it.next().unwrap());
        assert!(matches!(closed_form_precoders(&w), Err(Error::TrialRejected(_))));
    }

    #[test]
    fn optimization_preserves_spans_and_does_not_hurt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let power = 100.0;
        for _ in 0..20 {
            let w = random_links(3, 5, &mut rng).normalized();
            let raw = closed_form_precoders(&w).unwrap();
            let plain = optimize_precoder_subspace(&raw, &w, power, &RotationBank::empty(3)).unwrap();
            for (a, b) in raw.iter().zip(&plain) {
                assert!(span_distance(a, b) < 1e-10);
            }
            let bank = RotationBank::new(&[3, 2, 2], 30, &mut rng);
            let tuned = optimize_precoder_subspace(&raw, &w, power, &bank).unwrap();
            let objective = |v: &[CMatrix]| {
                let u = zero_forcing_decoders(v, &w).unwrap();
                let sol = IaSolution { streams: vec![3, 2, 2], precoders: v.to_vec(), decoders: u };
                stream_metrics(&sol, &w, power)
                    .iter()
                    .map(|m| (1.0 + m.signal).log2())
                    .sum::<f64>()
            };
            assert!(objective(&tuned) >= objective(&plain) - 1e-9);
            for (a, b) in raw.iter().zip(&tuned) {
                assert!(span_distance(a, b) < 1e-9);
            }
        }
    }

    #[test]
    fn user_objective_matches_decoder_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = random_links(3, 5, &mut rng).normalized();
        let v: Vec<CMatrix> = closed_form_precoders(&w)
            .unwrap()
            .iter()
            .map(|x| orthonormalize_columns(x, 1e-10).unwrap())
            .collect();
        let u = zero_forcing_decoders(&v, &w).unwrap();
        let sol = IaSolution { streams: vec![3, 2, 2], precoders: v.clone(), decoders: u };
        let metrics = stream_metrics(&sol, &w, 10.0);
        let free = interference_free_space(&w, &v, 1).unwrap();
        let a = free.adjoint() * apply_link(w.get(1, 1), &v[0]);
        let snr = 5.0 * 10.0 / 3.0;
        let expect: f64 = metrics.iter().filter(|m| m.user == 1).map(|m| (1.0 + m.signal).log2()).sum();
        assert!((user_objective(&a, snr).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = random_links(3, 5, &mut rng);
        let alpha = C64::new(0.3, -2.0);
        let scaled = LinkResponses::from_fn(3, |rx, tx| w.get(rx, tx) * alpha);
        let a = design_unoptimized(&w).unwrap();
        let b = design_unoptimized(&scaled).unwrap();
        for k in 0..3 {
            assert!(span_distance(&a.precoders[k], &b.precoders[k]) < 1e-9);
            assert!(span_distance(&a.decoders[k], &b.decoders[k]) < 1e-9);
        }
    }

    #[test]
    fn perfect_csi_leakage_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bank = RotationBank::new(&[3, 2, 2], 10, &mut rng);
        for _ in 0..20 {
            let w = random_links(3, 5, &mut rng);
            let power = 1e3;
            let sol = design(&w, power, &bank).unwrap();
            for m in stream_metrics(&sol, &w, power) {
                assert!(m.i1 + m.i2 <= 1e-9 * power, "{m:?} {:?}", alignment_residual(&sol, &w.normalized()));
            }
            for p in pair_terms(&sol, &w, power) {
                assert!(p.b_energy < 1.0);
                assert!(q_energy(&hadamard(&sol.decoders[p.rx - 1].column(p.rx_stream).into_owned(),
                    &sol.precoders[p.tx - 1].column(p.tx_stream).into_owned()), 3) <= p.b_energy + 1e-12);
            }
            assert_eq!(sum_rate(&sol, &w, 0.0), 0.0);
            // for a fixed design, leakage only adds to the denominator
            let noisy = LinkResponses::from_fn(3, |rx, tx| w.get(rx, tx) + complex_gaussian_vector(5, &mut rng) * C64::from(0.1));
            let bad = design(&noisy, power, &bank).unwrap();
            let metrics = stream_metrics(&bad, &w, power);
            let interference_free: f64 = metrics.iter().map(|m| (1.0 + m.signal).log2() / 5.0).sum();
            assert!(sum_rate(&bad, &w, power) <= interference_free);
            assert!(metrics.iter().any(|m| m.i1 + m.i2 > 1e-6));
        }
    }

    #[test]
    fn q_energy_of_flat_vector() {
        // b* = e_1 direction of the DFT: all energy in the first tap
        let b = CVector::from_element(5, C64::from(1.0 / 5f64.sqrt()));
        assert!((q_energy(&b, 1) - 1.0).abs() < 1e-12);
        assert!((q_energy(&b, 3) - 1.0).abs() < 1e-12);
    }
}
