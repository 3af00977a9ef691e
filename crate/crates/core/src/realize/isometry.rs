use serde::{Deserialize, Serialize};

use super::{EvaluatedSample, SampleDims};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_unitary, twirl_exact, BlockOperator};
use crate::linalg::{c64, eye, kron, lift, op_norm, orthonormal_complement, truncated_svd, vstack, zeros, CMat};
use crate::ncdomain::DomainSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionMode {
    /// `V = W` on `𝒟`, zero on `𝒟⊥`.
    ZeroExtend,
    /// `W` on `𝒟` plus an isometry `𝒟⊥ → ℛ⊥`; needs `e1 = e2`.
    Unitary,
}

/// The lurking isometry at the aggregate level `n`, in level-free form: it
/// acts as `v ⊗ I_n` on `𝒟 = span(domain) ⊗ C^n`.
#[derive(Clone, Debug)]
pub struct Isometry {
    /// `(Mk + e1) × (Mk + e2)`.
    pub v: CMat,
    /// Orthonormal basis of the level-free domain, `(Mk + e2) × rank`.
    pub domain: CMat,
    /// Orthonormal basis of the level-free range, `(Mk + e1) × rank`.
    pub range: CMat,
    pub rank: usize,
    pub level: usize,
    /// `‖colD*colD − colR*colR‖`.
    pub gram_residual: f64,
    /// Same identity across the unitary orbit of the aggregate point.
    pub orbit_gram_residual: f64,
}

/// Columns `colD = [(I_M⊗δ(R)*)h(R)*; a(R)*]` and
/// `colR = [(I_M⊗ε(R)*)h(R)*; b(R)*]`.
pub(crate) fn columns(s: &EvaluatedSample, spec: &DomainSpec, dims: &SampleDims) -> Result<(CMat, CMat)> {
    let e = spec.epsilon().eval(&s.point)?;
    let dl = spec.delta().eval(&s.point)?;
    let id = eye(dims.m);
    let h_adj = s.h.adjoint();
    let col_d = vstack(&(kron(&id, &dl.adjoint()) * &h_adj), &s.a.adjoint());
    let col_r = vstack(&(kron(&id, &e.adjoint()) * &h_adj), &s.b.adjoint());
    Ok((col_d, col_r))
}

/// `(P·n) × C` with level-trailing rows to `P × (n·C)`:
/// `out[α, i·C + c] = m[α·n + i, c]`.
fn unfold(m: &CMat, n: usize) -> CMat {
    let p = m.nrows() / n;
    let c = m.ncols();
    CMat::from_fn(p, n * c, |alpha, col| m[(alpha * n + col / c, col % c)])
}

/// Largest op-norm over the `n × n` grid of `C × C` blocks.
fn max_block_norm(m: &CMat, n: usize, c: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max(op_norm(&m.view((i * c, j * c), (c, c)).into_owned()));
        }
    }
    worst
}

/// Solves `(v ⊗ I_n) colD = colR` on the orbit span of the sample columns.
///
/// The span of `colD` over the unitary orbit `{U R U*}` is
/// `span(unfold(colD)) ⊗ C^n`, so `v = unfold(colR) · unfold(colD)⁺`; the
/// orbit Gram identity makes `v` isometric there.
pub fn build_isometry(
    agg: &EvaluatedSample,
    spec: &DomainSpec,
    dims: &SampleDims,
    tol: f64,
    rank_tol: f64,
) -> Result<Isometry> {
    let n = agg.level();
    let (col_d, col_r) = columns(agg, spec, dims)?;
    let gram_residual = op_norm(&(col_d.adjoint() * &col_d - col_r.adjoint() * &col_r));
    if !(gram_residual <= tol) {
        return Err(Error::CertificateInconsistent { residual: gram_residual, tol });
    }
    let dh = unfold(&col_d, n);
    let rh = unfold(&col_r, n);
    let orbit = dh.adjoint() * &dh - rh.adjoint() * &rh;
    let orbit_gram_residual = max_block_norm(&orbit, n, col_d.ncols());
    if !(orbit_gram_residual <= tol) {
        return Err(Error::CertificateInconsistent { residual: orbit_gram_residual, tol });
    }

    let (u, s, w) = truncated_svd(&dh, rank_tol);
    let rank = s.len();
    let mut y = &rh * &w;
    for (j, sj) in s.iter().enumerate() {
        y.column_mut(j).scale_mut(1.0 / sj);
    }
    // y is an isometry up to the certificate error; clamp so that ‖v‖ ≤ 1
    let (yu, ys, yv) = truncated_svd(&y, rank_tol);
    let mut y_clamped = zeros(yu.nrows(), yv.nrows());
    for (j, sj) in ys.iter().enumerate() {
        let col = yu.column(j) * c64(sj.min(1.0), 0.0);
        y_clamped += col * yv.column(j).adjoint();
    }
    let v = &y_clamped * u.adjoint();
    Ok(Isometry { v, domain: u, range: yu, rank, level: n, gram_residual, orbit_gram_residual })
}

/// Lifts `v` to level `n` and, in unitary mode, completes it by a seeded
/// unitary between the orthogonal complements of `𝒟` and `ℛ`.
pub fn extend_to_contraction(iso: &Isometry, mode: ExtensionMode, seed: u64) -> Result<BlockOperator> {
    let n = iso.level;
    let (p, q) = iso.v.shape();
    let mut v = lift(&iso.v, n);
    if mode == ExtensionMode::Unitary {
        if p != q {
            return Err(Error::Misuse(format!(
                "unitary completion needs e1 = e2 (input {q} vs output {p} outer dims)"
            )));
        }
        let d_perp = orthonormal_complement(&lift(&iso.domain, n));
        let r_perp = orthonormal_complement(&lift(&iso.range, n));
        if d_perp.ncols() != r_perp.ncols() {
            return Err(Error::Misuse(format!(
                "complements have dimensions {} and {}",
                d_perp.ncols(),
                r_perp.ncols()
            )));
        }
        if d_perp.ncols() > 0 {
            let z = sample_haar_unitary(d_perp.ncols(), seed);
            v += r_perp * z * d_perp.adjoint();
        }
    }
    BlockOperator::new(v, p, q, n)
}

/// `‖V colD − colR‖` at the aggregate point.
pub fn column_residual(v: &CMat, agg: &EvaluatedSample, spec: &DomainSpec, dims: &SampleDims) -> Result<f64> {
    let (col_d, col_r) = columns(agg, spec, dims)?;
    if v.ncols() != col_d.nrows() || v.nrows() != col_r.nrows() {
        return Err(Error::Shape(format!(
            "operator is {}x{}, columns need {}x{}",
            v.nrows(),
            v.ncols(),
            col_r.nrows(),
            col_d.nrows()
        )));
    }
    Ok(op_norm(&(v * col_d - col_r)))
}

/// Level-free colligation `[𝒜 ℬ; 𝒞 𝒟]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Colligation {
    /// `Mk × Mk`.
    pub a: CMat,
    /// `Mk × e2`.
    pub b: CMat,
    /// `e1 × Mk`.
    pub c: CMat,
    /// `e1 × e2`.
    pub d: CMat,
    pub norm: f64,
}

impl Colligation {
    pub fn from_matrix(m: &CMat, dims: &SampleDims) -> Result<Self> {
        let mk = dims.mk();
        if m.shape() != (mk + dims.e1, mk + dims.e2) {
            return Err(Error::Shape(format!(
                "colligation is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                mk + dims.e1,
                mk + dims.e2
            )));
        }
        Ok(Colligation {
            a: m.view((0, 0), (mk, mk)).into_owned(),
            b: m.view((0, mk), (mk, dims.e2)).into_owned(),
            c: m.view((mk, 0), (dims.e1, mk)).into_owned(),
            d: m.view((mk, mk), (dims.e1, dims.e2)).into_owned(),
            norm: op_norm(m),
        })
    }

    pub fn matrix(&self) -> CMat {
        let (mk, e2) = self.b.shape();
        let e1 = self.c.nrows();
        let mut m = zeros(mk + e1, mk + e2);
        m.view_mut((0, 0), (mk, mk)).copy_from(&self.a);
        m.view_mut((0, mk), (mk, e2)).copy_from(&self.b);
        m.view_mut((mk, 0), (e1, mk)).copy_from(&self.c);
        m.view_mut((mk, mk), (e1, e2)).copy_from(&self.d);
        m
    }
}

/// Haar average of `V` over the level, read off as a level-free colligation.
pub fn average_colligation(v: &BlockOperator, dims: &SampleDims) -> Result<Colligation> {
    let (p, q, _) = v.dims();
    if (p, q) != (dims.mk() + dims.e1, dims.mk() + dims.e2) {
        return Err(Error::Shape(format!("operator outer dims {p}x{q} do not match {dims:?}")));
    }
    let (inner, _) = twirl_exact(v);
    Colligation::from_matrix(&inner, dims)
}
