//! Haar-random unitaries and the level twirl
//! `W ↦ ∫ (I⊗U) W (I⊗U*) dU`.
//!
//! The twirl of `W ∈ B(C^q ⊗ C^n, C^p ⊗ C^n)` is `𝒲 ⊗ I_n` where `𝒲` is the
//! normalized partial trace of `W` over the level factor. [`twirl_exact`]
//! computes it in closed form; [`twirl_mc`] estimates the integral by sampling
//! and exists to cross-check the closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, complex_gaussian, lift, zeros, CMat};
use crate::par::{stream_seed, Exec};

/// Haar unitary from a Ginibre draw: QR, then absorb the phases of `diag(R)`
/// into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = complex_gaussian(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn sample_haar_unitary(n: usize, seed: u64) -> CMat {
    haar_unitary(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `W ∈ B(C^q ⊗ C^n, C^p ⊗ C^n)` stored as a `(p·n) × (q·n)` matrix with the
/// level as the trailing Kronecker factor.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator {
    w: CMat,
    p: usize,
    q: usize,
    n: usize,
}

impl BlockOperator {
    pub fn new(w: CMat, p: usize, q: usize, n: usize) -> Result<Self> {
        if n == 0 || w.shape() != (p * n, q * n) {
            return Err(Error::Shape(format!(
                "block operator is {}x{}, expected ({p}*{n})x({q}*{n})",
                w.nrows(),
                w.ncols()
            )));
        }
        Ok(BlockOperator { w, p, q, n })
    }

    /// `𝒲 ⊗ I_n`.
    pub fn lifted(inner: &CMat, n: usize) -> Self {
        BlockOperator { w: lift(inner, n), p: inner.nrows(), q: inner.ncols(), n }
    }

    pub fn matrix(&self) -> &CMat {
        &self.w
    }

    pub fn into_matrix(self) -> CMat {
        self.w
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.p, self.q, self.n)
    }

    pub fn adjoint(&self) -> Self {
        BlockOperator { w: self.w.adjoint(), p: self.q, q: self.p, n: self.n }
    }

    /// `(I_p ⊗ U) W (I_q ⊗ U*)`, computed blockwise as `U W_ab U*`.
    pub fn conjugate(&self, u: &CMat) -> CMat {
        let n = self.n;
        let u_adj = u.adjoint();
        let mut out = zeros(self.w.nrows(), self.w.ncols());
        for a in 0..self.p {
            for b in 0..self.q {
                let blk = self.w.view((a * n, b * n), (n, n));
                out.view_mut((a * n, b * n), (n, n)).copy_from(&(u * blk * &u_adj));
            }
        }
        out
    }
}

/// Normalized partial trace over the level: `𝒲_ab = (1/n) Σ_j W[(a,j),(b,j)]`.
pub fn level_partial_trace(w: &BlockOperator) -> CMat {
    let (p, q, n) = w.dims();
    let inv = 1.0 / n as f64;
    CMat::from_fn(p, q, |a, b| {
        let mut s = c64(0.0, 0.0);
        for j in 0..n {
            s += w.w[(a * n + j, b * n + j)];
        }
        s * inv
    })
}

/// Exact Haar average: returns `𝒲` and the lifted `𝒲 ⊗ I_n`.
pub fn twirl_exact(w: &BlockOperator) -> (CMat, BlockOperator) {
    let inner = level_partial_trace(w);
    let lifted = BlockOperator::lifted(&inner, w.n);
    (inner, lifted)
}

/// Monte-Carlo estimate `(1/N) Σ_i (I⊗U_i) W (I⊗U_i*)` with seeded draws.
pub fn twirl_mc(w: &BlockOperator, draws: usize, seed: u64) -> CMat {
    twirl_mc_with(w, draws, seed, None, Exec::default())
}

/// Fixed number of partial sums, so the summation order does not depend on
/// the thread count.
const MC_CHUNKS: usize = 64;

/// [`twirl_mc`] with every draw replaced by `V·U_i` when `left = Some(V)`.
pub fn twirl_mc_with(w: &BlockOperator, draws: usize, seed: u64, left: Option<&CMat>, exec: Exec) -> CMat {
    let (_, _, n) = w.dims();
    if draws == 0 {
        return zeros(w.w.nrows(), w.w.ncols());
    }
    let chunks = MC_CHUNKS.min(draws);
    let partials = exec.map(chunks, |c| {
        let start = c * draws / chunks;
        let end = (c + 1) * draws / chunks;
        let mut acc = zeros(w.w.nrows(), w.w.ncols());
        for i in start..end {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
            let mut u = haar_unitary(n, &mut rng);
            if let Some(v) = left {
                u = v * u;
            }
            acc += w.conjugate(&u);
        }
        acc
    });
    let mut total = zeros(w.w.nrows(), w.w.ncols());
    for p in partials {
        total += p;
    }
    total * c64(1.0 / draws as f64, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eye, fro_norm, op_norm};

    fn random_block(p: usize, q: usize, n: usize, seed: u64) -> BlockOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BlockOperator::new(complex_gaussian(p * n, q * n, &mut rng), p, q, n).unwrap()
    }

    #[test]
    fn draws_are_unitary() {
        for seed in 0..50 {
            let n = 1 + (seed as usize % 6);
            let u = sample_haar_unitary(n, seed);
            assert!((u.adjoint() * &u - eye(n)).norm() <= 1e-12);
        }
    }

    #[test]
    fn scalar_phase_has_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut mean = c64(0.0, 0.0);
        let draws = 10_000;
        for _ in 0..draws {
            mean += haar_unitary(1, &mut rng)[(0, 0)];
        }
        mean /= draws as f64;
        assert!(mean.norm() <= 0.05, "mean phase {mean}");
    }

    #[test]
    fn entry_second_moment_matches_schur_orthogonality() {
        // |u_11|^2 ~ Beta(1, n-1): mean 1/n, variance (n-1)/(n^2 (n+1))
        let n = 4;
        let draws = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += haar_unitary(n, &mut rng)[(0, 0)].norm_sqr();
        }
        let mean = sum / draws as f64;
        let nf = n as f64;
        let se = ((nf - 1.0) / (nf * nf * (nf + 1.0)) / draws as f64).sqrt();
        assert!((mean - 0.25).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn lifted_operator_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inner = complex_gaussian(2, 3, &mut rng);
        let (w, lifted) = twirl_exact(&BlockOperator::lifted(&inner, 4));
        assert!((w - &inner).norm() <= 1e-14);
        assert!((lifted.matrix() - lift(&inner, 4)).norm() <= 1e-14);
    }

    #[test]
    fn partial_trace_by_hand() {
        let mut e11 = zeros(2, 2);
        e11[(0, 0)] = c64(1.0, 0.0);
        let (w, _) = twirl_exact(&BlockOperator::new(e11, 1, 1, 2).unwrap());
        assert_eq!(w[(0, 0)], c64(0.5, 0.0));
    }

    #[test]
    fn twirl_is_idempotent_adjoint_compatible_and_contractive() {
        for seed in 0..20 {
            let w = random_block(2, 3, 3, seed);
            let (inner, lifted) = twirl_exact(&w);
            let (again, _) = twirl_exact(&lifted);
            assert!((again - &inner).norm() <= 1e-14);
            let (adj, _) = twirl_exact(&w.adjoint());
            assert!((adj - inner.adjoint()).norm() <= 1e-14);
            assert!(op_norm(lifted.matrix()) <= op_norm(w.matrix()) + 1e-12);
        }
    }

    #[test]
    fn single_draw_fixes_lifted_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inner = complex_gaussian(2, 2, &mut rng);
        let w = BlockOperator::lifted(&inner, 3);
        assert!((twirl_mc(&w, 1, 5) - w.matrix()).norm() <= 1e-13);
    }

    #[test]
    fn monte_carlo_converges_to_exact() {
        let draws = 10_000;
        let w = random_block(2, 2, 3, 31);
        let (_, exact) = twirl_exact(&w);
        let mc = twirl_mc(&w, draws, 9);
        let bound = 5.0 * fro_norm(w.matrix()) / (draws as f64).sqrt();
        assert!(fro_norm(&(mc - exact.matrix())) <= bound);
    }

    #[test]
    fn left_translation_stays_within_statistical_bound() {
        let draws = 10_000;
        let w = random_block(2, 2, 3, 32);
        let v = sample_haar_unitary(3, 1234);
        let plain = twirl_mc(&w, draws, 10);
        let shifted = twirl_mc_with(&w, draws, 10, Some(&v), Exec::default());
        let bound = 5.0 * fro_norm(w.matrix()) / (draws as f64).sqrt();
        assert!(fro_norm(&(plain - shifted)) <= 2.0 * bound);
    }

    #[test]
    fn mc_is_strategy_independent() {
        let w = random_block(1, 2, 4, 3);
        let a = twirl_mc_with(&w, 500, 1, None, Exec::Sequential);
        let b = twirl_mc_with(&w, 500, 1, None, Exec::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn near_fixed_points_are_near_commutant() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for trial in 0..10 {
            let inner = complex_gaussian(2, 2, &mut rng);
            let noise = complex_gaussian(6, 6, &mut rng) * c64(1e-3 * (trial + 1) as f64, 0.0);
            let w = BlockOperator::new(lift(&inner, 3) + noise, 2, 2, 3).unwrap();
            let eta =
                (0..50).map(|_| op_norm(&(w.conjugate(&haar_unitary(3, &mut rng)) - w.matrix()))).fold(0.0, f64::max);
            let (_, lifted) = twirl_exact(&w);
            assert!(op_norm(&(w.matrix() - lifted.matrix())) <= 10.0 * eta);
        }
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(BlockOperator::new(zeros(4, 6), 2, 2, 2).is_err());
    }
}
