use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Colligation, SampleDims};
use crate::error::{Error, Result};
use crate::factor::gamma_extract;
use crate::haar::haar_unitary;
use crate::linalg::{
    block_diag, c64, complex_gaussian, cond, eigh, eye, inverse_checked, kron, lift, min_eig_hermitian, op_norm,
    permute_into, solve_checked, CMat, COND_CAP,
};
use crate::ncdomain::{is_member, DomainSpec};
use crate::ncpoly::{block_shuffle_map, direct_sum, MatrixTuple, NcFunction};
use crate::par::{stream_seed, Exec};

struct Parts {
    /// `Γ = I_M ⊗ γ(R)*`.
    gamma: CMat,
    /// `Φ (ℬ ⊗ I_n)` with `Φ = (I − (𝒜⊗I_n)Γ)⁻¹`.
    phi_b: CMat,
    /// `f(R)*`.
    f_adj: CMat,
}

fn parts(col: &Colligation, spec: &DomainSpec, r: &MatrixTuple) -> Result<Parts> {
    let n = r.level();
    let k = spec.k();
    let mk = col.a.nrows();
    if !mk.is_multiple_of(k) {
        return Err(Error::Shape(format!("colligation state dim {mk} is not a multiple of k = {k}")));
    }
    let g = gamma_extract(spec, r)?;
    let gamma = kron(&eye(mk / k), &g.adjoint());
    let delta = eye(mk * n) - lift(&col.a, n) * &gamma;
    let phi_b = solve_checked(&delta, &lift(&col.b, n), COND_CAP).map_err(|e| match e {
        Error::Conditioning { cond, .. } => Error::MarginTooSmall { cond },
        other => other,
    })?;
    let f_adj = lift(&col.c, n) * &gamma * &phi_b + lift(&col.d, n);
    Ok(Parts { gamma, phi_b, f_adj })
}

/// `f(R) = [(𝒞⊗I)Γ(R)Φ(R)(ℬ⊗I) + 𝒟⊗I]*`, of size `(e2·n) × (e1·n)`.
pub fn transfer_function(col: &Colligation, spec: &DomainSpec, r: &MatrixTuple) -> Result<CMat> {
    Ok(parts(col, spec, r)?.f_adj.adjoint())
}

/// The realized `f` as an nc evaluator.
#[derive(Clone, Debug)]
pub struct TransferFunction {
    col: Colligation,
    spec: DomainSpec,
    dims: SampleDims,
}

impl TransferFunction {
    pub fn new(col: Colligation, spec: DomainSpec, dims: SampleDims) -> Self {
        TransferFunction { col, spec, dims }
    }

    pub fn colligation(&self) -> &Colligation {
        &self.col
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dims(&self) -> &SampleDims {
        &self.dims
    }
}

impl NcFunction for TransferFunction {
    fn shape(&self) -> (usize, usize) {
        (self.dims.e2, self.dims.e1)
    }

    fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        transfer_function(&self.col, &self.spec, x)
    }
}

/// `[P Q]` with `[P Q]*[P Q] = I − V*V`.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectFactors {
    pub p: CMat,
    pub q: CMat,
}

const DEFECT_CLIP: f64 = 1e-12;

pub fn defect_certificate(col: &Colligation) -> Result<DefectFactors> {
    let v = col.matrix();
    let gap = eye(v.ncols()) - v.adjoint() * &v;
    let (vals, vecs) = eigh(&gap);
    let min_eig = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -DEFECT_CLIP {
        return Err(Error::ContractionViolation { min_eig });
    }
    let mut f = vecs.adjoint();
    for (i, lam) in vals.iter().enumerate() {
        f.row_mut(i).scale_mut(lam.max(0.0).sqrt());
    }
    let mk = col.a.nrows();
    Ok(DefectFactors { p: f.columns(0, mk).into_owned(), q: f.columns(mk, v.ncols() - mk).into_owned() })
}

/// `‖(I − f f*) − [ℬ*Φ*(I − Γ*Γ)Φℬ + (𝒬 + 𝒫ΓΦℬ)*(𝒬 + 𝒫ΓΦℬ)]‖` at `R`.
pub fn verify_defect(col: &Colligation, defect: &DefectFactors, spec: &DomainSpec, r: &MatrixTuple) -> Result<f64> {
    let n = r.level();
    let Parts { gamma, phi_b, f_adj } = parts(col, spec, r)?;
    let lhs = eye(f_adj.ncols()) - f_adj.adjoint() * &f_adj;
    let gap = eye(gamma.nrows()) - gamma.adjoint() * &gamma;
    let z = lift(&defect.p, n) * &gamma * &phi_b + lift(&defect.q, n);
    let rhs = phi_b.adjoint() * gap * &phi_b + z.adjoint() * z;
    Ok(op_norm(&(lhs - rhs)))
}

#[derive(Clone, Debug, Default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub exec: Exec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSup {
    pub level: usize,
    pub sup: f64,
}

/// Held-out diagnostics for a realized `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub probes: usize,
    /// `max ‖a(X) f(X) − b(X)‖`.
    pub max_af_minus_b: f64,
    pub max_f_norm: f64,
    /// `min λ_min(I − f(X) f(X)*)`.
    pub min_defect_eig: f64,
    pub max_defect_residual: f64,
    /// `min λ_min(a(X)a(X)* − b(X)b(X)*)`.
    pub min_kernel_eig: f64,
    /// `max ‖Π f(X⊕Y) Π* − f(X) ⊕ f(Y)‖` over consecutive probe pairs.
    pub direct_sum_residual: f64,
    /// `max ‖f(S⁻¹XS) − (I⊗S⁻¹) f(X) (I⊗S)‖`.
    pub similarity_residual: f64,
    /// The same residual divided by `cond(S)²`, maximized.
    pub similarity_ratio: f64,
    /// Empirical `sup ‖f(X)‖` per level.
    pub sup_f_by_level: Vec<LevelSup>,
}

struct Probe {
    level: usize,
    af_minus_b: f64,
    f_norm: f64,
    defect_eig: f64,
    defect_residual: f64,
    kernel_eig: f64,
    direct_sum: f64,
    similarity: f64,
    similarity_ratio: f64,
}

/// Well-conditioned `S` near `I` keeping `S⁻¹XS` in the domain, or a Haar
/// unitary when no such perturbation is found.
pub fn perturbed_similarity(spec: &DomainSpec, x: &MatrixTuple, rng: &mut ChaCha8Rng) -> Result<CMat> {
    let n = x.level();
    let g = complex_gaussian(n, n, rng);
    let mut t = 0.5 / op_norm(&g).max(f64::MIN_POSITIVE);
    for _ in 0..8 {
        let s = eye(n) + &g * c64(t, 0.0);
        if is_member(spec, &x.similar(&s)?)? {
            return Ok(s);
        }
        t *= 0.5;
    }
    Ok(haar_unitary(n, rng))
}

fn probe(
    f: &TransferFunction,
    defect: &DefectFactors,
    a: &dyn NcFunction,
    b: &dyn NcFunction,
    x: &MatrixTuple,
    y: &MatrixTuple,
    seed: u64,
) -> Result<Probe> {
    let spec = f.spec();
    let dims = f.dims();
    let fx = f.eval(x)?;
    let ax = a.eval(x)?;
    let bx = b.eval(x)?;
    let af_minus_b = op_norm(&(&ax * &fx - &bx));
    let f_norm = op_norm(&fx);
    let defect_eig = min_eig_hermitian(&(eye(fx.nrows()) - &fx * fx.adjoint()));
    let defect_residual = verify_defect(f.colligation(), defect, spec, x)?;
    let kernel_eig = min_eig_hermitian(&(&ax * ax.adjoint() - &bx * bx.adjoint()));

    let fy = f.eval(y)?;
    let levels = [x.level(), y.level()];
    let fxy = f.eval(&direct_sum(x, y)?)?;
    let shuffled = permute_into(&fxy, &block_shuffle_map(dims.e2, &levels), &block_shuffle_map(dims.e1, &levels));
    let direct_sum = op_norm(&(shuffled - block_diag(&[&fx, &fy])));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = perturbed_similarity(spec, x, &mut rng)?;
    let s_inv = inverse_checked(&s, COND_CAP)?;
    let moved = f.eval(&x.similar(&s)?)?;
    let expect = kron(&eye(dims.e2), &s_inv) * &fx * kron(&eye(dims.e1), &s);
    let similarity = op_norm(&(moved - expect));
    let k = cond(&s);

    Ok(Probe {
        level: x.level(),
        af_minus_b,
        f_norm,
        defect_eig,
        defect_residual,
        kernel_eig,
        direct_sum,
        similarity,
        similarity_ratio: similarity / (k * k),
    })
}

/// Probes `f` at every held-out point; direct sums pair each point with the next.
pub fn verify_realization(
    f: &TransferFunction,
    holdout: &[MatrixTuple],
    a: &dyn NcFunction,
    b: &dyn NcFunction,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    if holdout.is_empty() {
        return Err(Error::Misuse("verification needs at least one held-out point".into()));
    }
    let defect = defect_certificate(f.colligation())?;
    let probes = cfg.exec.try_map(holdout.len(), |i| {
        let y = &holdout[(i + 1) % holdout.len()];
        probe(f, &defect, a, b, &holdout[i], y, stream_seed(cfg.seed, i as u64))
    })?;

    let max = |g: fn(&Probe) -> f64| probes.iter().map(g).fold(0.0, f64::max);
    let min = |g: fn(&Probe) -> f64| probes.iter().map(g).fold(f64::INFINITY, f64::min);
    let mut sup_f_by_level: Vec<LevelSup> = Vec::new();
    for p in &probes {
        match sup_f_by_level.iter_mut().find(|s| s.level == p.level) {
            Some(s) => s.sup = s.sup.max(p.f_norm),
            None => sup_f_by_level.push(LevelSup { level: p.level, sup: p.f_norm }),
        }
    }
    sup_f_by_level.sort_by_key(|s| s.level);

    Ok(VerificationReport {
        probes: probes.len(),
        max_af_minus_b: max(|p| p.af_minus_b),
        max_f_norm: max(|p| p.f_norm),
        min_defect_eig: min(|p| p.defect_eig),
        max_defect_residual: max(|p| p.defect_residual),
        min_kernel_eig: min(|p| p.kernel_eig),
        direct_sum_residual: max(|p| p.direct_sum),
        similarity_residual: max(|p| p.similarity),
        similarity_ratio: max(|p| p.similarity_ratio),
        sup_f_by_level,
    })
}
