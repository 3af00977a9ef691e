//! Dense complex linear algebra shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Kronecker products follow the
//! `coefficient ⊗ level` convention: the level index is always the trailing
//! (fastest-varying) factor.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Default cap on condition numbers before a solve is refused.
pub const COND_CAP: f64 = 1e12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// `a ⊗ I_n` without materializing the identity.
pub fn lift(a: &CMat, n: usize) -> CMat {
    let mut out = zeros(a.nrows() * n, a.ncols() * n);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            for l in 0..n {
                out[(i * n + l, j * n + l)] = v;
            }
        }
    }
    out
}

pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Vertical stack `[top; bottom]`.
pub fn vstack(top: &CMat, bottom: &CMat) -> CMat {
    assert_eq!(top.ncols(), bottom.ncols(), "vstack column mismatch");
    let mut out = zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// Horizontal concatenation of blocks that share a row count.
pub fn hstack(blocks: &[CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    out
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.singular_values().iter().copied().collect()
}

/// Spectral (largest singular value) norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.norm()
}

/// `σ_max / σ_min`; infinite for singular or non-square input.
pub fn cond(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() || m.is_empty() {
        return f64::INFINITY;
    }
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eig_hermitian(m: &CMat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    hermitian_part(m).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Eigen-decomposition of the Hermitian part: `(eigenvalues, eigenvectors)`.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Thin SVD truncated at `rel_tol · σ_max`: returns `(U_r, σ_r, V_r)` with
/// `m ≈ U_r diag(σ_r) V_r*`.
pub fn truncated_svd(m: &CMat, rel_tol: f64) -> (CMat, Vec<f64>, CMat) {
    if m.is_empty() {
        return (zeros(m.nrows(), 0), Vec::new(), zeros(m.ncols(), 0));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| smax > 0.0 && sv[i] > rel_tol * smax).collect();
    let mut ur = zeros(m.nrows(), keep.len());
    let mut vr = zeros(m.ncols(), keep.len());
    let mut sr = Vec::with_capacity(keep.len());
    for (col, &i) in keep.iter().enumerate() {
        ur.set_column(col, &u.column(i));
        vr.set_column(col, &v_t.row(i).adjoint());
        sr.push(sv[i]);
    }
    (ur, sr, vr)
}

/// Moore-Penrose pseudoinverse with singular values below `rel_tol · σ_max`
/// treated as zero. Returns the pseudoinverse and the numerical rank.
pub fn pinv(m: &CMat, rel_tol: f64) -> (CMat, usize) {
    let (u, s, v) = truncated_svd(m, rel_tol);
    let mut vs = v;
    for (j, sj) in s.iter().enumerate() {
        vs.column_mut(j).scale_mut(1.0 / sj);
    }
    (&vs * u.adjoint(), s.len())
}

/// Solves `a x = b`, refusing when `cond(a)` exceeds `cap`.
pub fn solve_checked(a: &CMat, b: &CMat, cap: f64) -> Result<CMat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "solve: {}x{} system with {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let k = cond(a);
    if !(k <= cap) {
        return Err(Error::Conditioning { cond: k, cap });
    }
    a.clone().lu().solve(b).ok_or(Error::Conditioning { cond: f64::INFINITY, cap })
}

pub fn inverse_checked(a: &CMat, cap: f64) -> Result<CMat> {
    solve_checked(a, &eye(a.nrows()), cap)
}

/// Orthonormal basis for the orthogonal complement of the column span of the
/// orthonormal columns `q` inside `C^m`.
pub fn orthonormal_complement(q: &CMat) -> CMat {
    let m = q.nrows();
    let proj = eye(m) - q * q.adjoint();
    let (vals, vecs) = eigh(&proj);
    let keep: Vec<usize> = (0..m).filter(|&i| vals[i] > 0.5).collect();
    let mut out = zeros(m, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        out.set_column(col, &vecs.column(i));
    }
    out
}

/// Matrix with i.i.d. standard complex Gaussian entries (`E|z|^2 = 1`).
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(s * re, s * im)
    })
}

/// `result[map_r[i], map_c[j]] = m[i, j]`, the action `Π_r m Π_c*` of two
/// permutation matrices given as index maps.
pub fn permute_into(m: &CMat, map_r: &[usize], map_c: &[usize]) -> CMat {
    let mut out = zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[(map_r[i], map_c[j])] = m[(i, j)];
        }
    }
    out
}

/// Inverse of [`permute_into`]: `result[i, j] = m[map_r[i], map_c[j]]`.
pub fn permute_from(m: &CMat, map_r: &[usize], map_c: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(map_r[i], map_c[j])])
}

/// Dense permutation matrix with ones at `(map[j], j)`.
pub fn permutation_matrix(map: &[usize]) -> CMat {
    let mut p = zeros(map.len(), map.len());
    for (j, &i) in map.iter().enumerate() {
        p[(i, j)] = c64(1.0, 0.0);
    }
    p
}
