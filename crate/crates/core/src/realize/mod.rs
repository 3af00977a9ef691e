//! Realization of a contractive solution `f` of `a(X) f(X) = b(X)` from a
//! kernel certificate
//! `a(T)a(R)* − b(T)b(R)* = h(T)[I_M ⊗ (ε(T)ε(R)* − δ(T)δ(R)*)]h(R)*`.
//!
//! Pipeline: evaluate `a, b, h` at construction points, aggregate them into a
//! single direct-sum point, read off the lurking isometry, extend it to a
//! contraction, twirl it into a level-free colligation and evaluate its
//! transfer function.

mod isometry;
mod transfer;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diag, eye, kron, op_norm, permute_from, CMat};
use crate::ncdomain::{membership_margin, DomainSpec, MEMBER_TOL};
use crate::ncpoly::{block_shuffle_map, direct_sum_all, MatrixTuple, NcFunction};
use crate::par::Exec;

pub use isometry::{
    average_colligation, build_isometry, column_residual, extend_to_contraction, Colligation, ExtensionMode, Isometry,
};
pub use transfer::{
    defect_certificate, perturbed_similarity, transfer_function, verify_defect, verify_realization, DefectFactors,
    TransferFunction, VerificationReport, VerifyConfig,
};

/// Dimensions of `E1, E2, E3`, the coefficient size `k` of the domain and the
/// truncation rank `M` of the certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDims {
    pub e1: usize,
    pub e2: usize,
    pub e3: usize,
    pub k: usize,
    pub m: usize,
}

impl SampleDims {
    /// Reads `e3 × e2` for `a`, `e3 × e1` for `b` and `e3 × Mk` for `h`.
    pub fn infer(spec: &DomainSpec, a: &dyn NcFunction, b: &dyn NcFunction, h: &dyn NcFunction) -> Result<Self> {
        let (e3, e2) = a.shape();
        let (e3b, e1) = b.shape();
        let (e3h, mk) = h.shape();
        let k = spec.k();
        if e3b != e3 || e3h != e3 {
            return Err(Error::Shape(format!("a, b, h have {e3}, {e3b}, {e3h} rows; they must agree")));
        }
        if mk % k != 0 || mk == 0 {
            return Err(Error::Shape(format!("certificate has {mk} columns, not a positive multiple of k = {k}")));
        }
        let dims = SampleDims { e1, e2, e3, k, m: mk / k };
        if [e1, e2, e3].contains(&0) {
            return Err(Error::Shape("all of e1, e2, e3 must be positive".into()));
        }
        Ok(dims)
    }

    pub fn mk(&self) -> usize {
        self.m * self.k
    }
}

/// `a, b, h` evaluated at one point `R` of level `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluatedSample {
    pub point: MatrixTuple,
    /// `(e3·n) × (e2·n)`.
    pub a: CMat,
    /// `(e3·n) × (e1·n)`.
    pub b: CMat,
    /// `(e3·n) × (M·k·n)`.
    pub h: CMat,
    pub margin: f64,
}

impl EvaluatedSample {
    pub fn level(&self) -> usize {
        self.point.level()
    }

    fn check(&self, dims: &SampleDims) -> Result<()> {
        let n = self.level();
        let ok = self.a.shape() == (dims.e3 * n, dims.e2 * n)
            && self.b.shape() == (dims.e3 * n, dims.e1 * n)
            && self.h.shape() == (dims.e3 * n, dims.mk() * n);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("sample at level {n} does not match dims {dims:?}")))
        }
    }
}

/// A certificate `h` together with a bound on the truncation error it commits
/// in the kernel identity (zero for exact finite-rank certificates).
#[derive(Clone)]
pub struct Certificate {
    pub h: Arc<dyn NcFunction>,
    pub tail_bound: f64,
}

impl Certificate {
    pub fn exact(h: Arc<dyn NcFunction>) -> Self {
        Certificate { h, tail_bound: 0.0 }
    }
}

/// Evaluator defined only on a finite table of points, matched exactly.
#[derive(Clone, Debug)]
pub struct TabulatedFunction {
    rows: usize,
    cols: usize,
    table: Vec<(MatrixTuple, CMat)>,
}

impl TabulatedFunction {
    pub fn new(rows: usize, cols: usize, table: Vec<(MatrixTuple, CMat)>) -> Result<Self> {
        for (x, v) in &table {
            let n = x.level();
            if v.shape() != (rows * n, cols * n) {
                return Err(Error::Shape(format!(
                    "tabulated value is {}x{}, expected {}x{}",
                    v.nrows(),
                    v.ncols(),
                    rows * n,
                    cols * n
                )));
            }
        }
        Ok(TabulatedFunction { rows, cols, table })
    }

    pub fn points(&self) -> impl Iterator<Item = &MatrixTuple> {
        self.table.iter().map(|(x, _)| x)
    }
}

impl NcFunction for TabulatedFunction {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        self.table
            .iter()
            .find(|(p, _)| p == x)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Misuse("tabulated function has no value at this point".into()))
    }
}

/// Evaluates `a, b, h` at every point; points outside the domain are refused.
pub fn evaluate_samples(
    spec: &DomainSpec,
    points: &[MatrixTuple],
    a: &dyn NcFunction,
    b: &dyn NcFunction,
    h: &dyn NcFunction,
) -> Result<Vec<EvaluatedSample>> {
    let dims = SampleDims::infer(spec, a, b, h)?;
    points
        .iter()
        .map(|r| {
            let margin = membership_margin(spec, r)?;
            if !(margin > MEMBER_TOL) {
                return Err(Error::OutsideDomain { margin });
            }
            let s = EvaluatedSample { point: r.clone(), a: a.eval(r)?, b: b.eval(r)?, h: h.eval(r)?, margin };
            s.check(&dims)?;
            Ok(s)
        })
        .collect()
}

/// Kernel residual
/// `‖a(T)a(R)* − b(T)b(R)* − h(T)[I_M ⊗ (ε(T)ε(R)* − δ(T)δ(R)*)]h(R)*‖`,
/// maximized over ordered pairs of samples at the same level. Aggregate first
/// to cover pairs across levels.
pub fn certificate_check(samples: &[EvaluatedSample], spec: &DomainSpec, dims: &SampleDims) -> Result<f64> {
    let pre: Vec<(CMat, CMat)> = samples
        .iter()
        .map(|s| {
            s.check(dims)?;
            Ok((spec.epsilon().eval(&s.point)?, spec.delta().eval(&s.point)?))
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (t, (et, dt)) in samples.iter().zip(&pre) {
        for (r, (er, dr)) in samples.iter().zip(&pre) {
            if t.level() != r.level() {
                continue;
            }
            let kernel = et * er.adjoint() - dt * dr.adjoint();
            let mid = kron(&eye(dims.m), &kernel);
            let lhs = &t.a * r.a.adjoint() - &t.b * r.b.adjoint();
            let rhs = &t.h * mid * r.h.adjoint();
            worst = worst.max(op_norm(&(lhs - rhs)));
        }
    }
    Ok(worst)
}

/// Direct sum of all samples, with evaluations assembled through the
/// canonical shuffle so that they equal evaluations at `⊕ R_i`.
pub fn aggregate_samples(samples: &[EvaluatedSample], dims: &SampleDims) -> Result<EvaluatedSample> {
    match samples {
        [] => return Err(Error::Shape("no samples to aggregate".into())),
        [one] => {
            one.check(dims)?;
            return Ok(one.clone());
        }
        _ => {}
    }
    for s in samples {
        s.check(dims)?;
    }
    let levels: Vec<usize> = samples.iter().map(EvaluatedSample::level).collect();
    let point = direct_sum_all(&samples.iter().map(|s| s.point.clone()).collect::<Vec<_>>())?;
    let assemble = |rows: usize, cols: usize, pick: fn(&EvaluatedSample) -> &CMat| {
        let blocks: Vec<&CMat> = samples.iter().map(pick).collect();
        permute_from(&block_diag(&blocks), &block_shuffle_map(rows, &levels), &block_shuffle_map(cols, &levels))
    };
    let margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    Ok(EvaluatedSample {
        point,
        a: assemble(dims.e3, dims.e2, |s| &s.a),
        b: assemble(dims.e3, dims.e1, |s| &s.b),
        h: assemble(dims.e3, dims.mk(), |s| &s.h),
        margin,
    })
}

#[derive(Clone, Debug)]
pub struct RealizeConfig {
    /// Base tolerance; the certificate tolerance adds the certificate's tail bound.
    pub tol: f64,
    /// Relative singular-value cutoff for subspace bases.
    pub rank_tol: f64,
    pub mode: ExtensionMode,
    /// Seed for the completion in unitary mode.
    pub seed: u64,
    pub exec: Exec,
}

impl Default for RealizeConfig {
    fn default() -> Self {
        RealizeConfig { tol: 1e-8, rank_tol: 1e-10, mode: ExtensionMode::ZeroExtend, seed: 0, exec: Exec::default() }
    }
}

/// Diagnostics from the construction stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub samples: usize,
    pub aggregate_level: usize,
    pub aggregate_margin: f64,
    pub certificate_residual: f64,
    pub certificate_tol: f64,
    pub gram_residual: f64,
    pub orbit_gram_residual: f64,
    pub rank: usize,
    pub rank_tol: f64,
    pub mode: ExtensionMode,
    /// Column equations `V colD = colR` before and after twirling.
    pub column_residual_extended: f64,
    pub column_residual_twirled: f64,
    /// `max_i ‖a(R_i) f(R_i) − b(R_i)‖` over construction points.
    pub interpolation_residual: f64,
    pub colligation_norm: f64,
}

#[derive(Clone, Debug)]
pub struct Realization {
    pub colligation: Colligation,
    pub dims: SampleDims,
    pub spec: DomainSpec,
    pub report: ConstructionReport,
}

impl Realization {
    pub fn function(&self) -> TransferFunction {
        TransferFunction::new(self.colligation.clone(), self.spec.clone(), self.dims)
    }
}

/// Full construction from construction points.
pub fn realize(
    spec: &DomainSpec,
    a: &dyn NcFunction,
    b: &dyn NcFunction,
    cert: &Certificate,
    points: &[MatrixTuple],
    cfg: &RealizeConfig,
) -> Result<Realization> {
    let dims = SampleDims::infer(spec, a, b, cert.h.as_ref())?;
    let samples = evaluate_samples(spec, points, a, b, cert.h.as_ref())?;
    let agg = aggregate_samples(&samples, &dims)?;
    let certificate_tol = cfg.tol + cert.tail_bound;
    let certificate_residual = certificate_check(std::slice::from_ref(&agg), spec, &dims)?;
    if !(certificate_residual <= certificate_tol) {
        return Err(Error::CertificateInconsistent { residual: certificate_residual, tol: certificate_tol });
    }
    let iso = build_isometry(&agg, spec, &dims, certificate_tol, cfg.rank_tol)?;
    let v = extend_to_contraction(&iso, cfg.mode, cfg.seed)?;
    let column_residual_extended = column_residual(v.matrix(), &agg, spec, &dims)?;
    let colligation = average_colligation(&v, &dims)?;
    let lifted = crate::linalg::lift(&colligation.matrix(), agg.level());
    let column_residual_twirled = column_residual(&lifted, &agg, spec, &dims)?;

    let f = TransferFunction::new(colligation.clone(), spec.clone(), dims);
    let interpolation_residual = samples
        .iter()
        .map(|s| Ok(op_norm(&(&s.a * f.eval(&s.point)? - &s.b))))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let report = ConstructionReport {
        samples: samples.len(),
        aggregate_level: agg.level(),
        aggregate_margin: agg.margin,
        certificate_residual,
        certificate_tol,
        gram_residual: iso.gram_residual,
        orbit_gram_residual: iso.orbit_gram_residual,
        rank: iso.rank,
        rank_tol: cfg.rank_tol,
        mode: cfg.mode,
        column_residual_extended,
        column_residual_twirled,
        interpolation_residual,
        colligation_norm: colligation.norm,
    };
    Ok(Realization { colligation, dims, spec: spec.clone(), report })
}
