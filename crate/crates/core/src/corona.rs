//! Toeplitz-Corona solver on `G_δ`: given scalar `a_1 … a_ℓ` with
//! `Σ a_i(R) a_i(R)* ⪰ μ² I`, find `g` with `Σ a_i g_i = I` and `‖g‖ ≤ 1/μ`
//! by realizing `a_row f = μ I` and setting `g = f / μ`.
//!
//! Also hosts the closed-form certificate fixtures used by the self-test.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, eye, hstack, min_eig_hermitian, op_norm, CMat};
use crate::ncdomain::DomainSpec;
use crate::ncpoly::{parse_poly, FnFunction, FreePolynomial, FreeWord, MatrixTuple, NcFunction};
use crate::par::Exec;
use crate::realize::{
    realize, verify_realization, Certificate, ConstructionReport, Realization, RealizeConfig, TransferFunction,
    VerificationReport, VerifyConfig,
};

/// Fixture names accepted by [`fixture`] and [`fixture_certificate`].
pub const FIXTURES: [&str; 3] = ["disc-ab", "bidisc-ab", "disc-corona"];

/// Closed-form finite-rank certificate. Truncated series certificates carry
/// a geometric tail `scale² · r^(2p)` at sample radius `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct FixtureCertificate {
    pub name: String,
    pub h: FreePolynomial,
    pub tail_power: Option<usize>,
    pub scale: f64,
}

impl FixtureCertificate {
    pub fn tail_bound(&self, radius: f64) -> f64 {
        match self.tail_power {
            None => 0.0,
            Some(p) => self.scale * self.scale * radius.powi(2 * p as i32),
        }
    }

    /// Certificate whose tail bound covers every pair drawn from `points`.
    pub fn certificate(&self, points: &[MatrixTuple]) -> Certificate {
        let radius = points.iter().map(MatrixTuple::max_entry_norm).fold(0.0, f64::max);
        Certificate { h: Arc::new(self.h.clone()), tail_bound: self.tail_bound(radius) }
    }

    /// Certificate for `(s·a, s·b)`.
    pub fn scaled(&self, s: f64) -> Self {
        FixtureCertificate { h: self.h.scale(c64(s, 0.0)), scale: self.scale * s, ..self.clone() }
    }
}

/// Row vector `e_j^T` of length `len`.
fn unit_row(len: usize, j: usize) -> CMat {
    let mut r = CMat::zeros(1, len);
    r[(0, j)] = c64(1.0, 0.0);
    r
}

/// `disc-ab`: `h = 1`; `bidisc-ab`: `h(T) = [I, T1]`; `disc-corona`:
/// `h(T) = [T, T², …, T^M]`. Exact certificates are zero-padded to rank `M`.
pub fn fixture_certificate(name: &str, m: usize) -> Result<FixtureCertificate> {
    if m == 0 {
        return Err(Error::Misuse("truncation M must be at least 1".into()));
    }
    let (h, tail_power) = match name {
        "disc-ab" => (FreePolynomial::constant(1, unit_row(m, 0)), None),
        "bidisc-ab" => {
            let terms = [(FreeWord::empty(), unit_row(2 * m, 0)), (FreeWord::letter(1), unit_row(2 * m, 1))];
            (FreePolynomial::from_terms(2, 1, 2 * m, terms)?, None)
        }
        "disc-corona" => {
            let terms = (1..=m).map(|p| (FreeWord::new(vec![1; p], 1).expect("letter"), unit_row(m, p - 1)));
            (FreePolynomial::from_terms(1, 1, m, terms)?, Some(m + 1))
        }
        other => return Err(Error::UnknownFixture(other.into())),
    };
    Ok(FixtureCertificate { name: name.into(), h, tail_power, scale: 1.0 })
}

/// A fixture's domain, data `a, b` and certificate.
#[derive(Clone, Debug)]
pub struct FixtureProblem {
    pub spec: DomainSpec,
    pub a: FreePolynomial,
    pub b: FreePolynomial,
    pub cert: FixtureCertificate,
}

pub fn fixture(name: &str, m: usize) -> Result<FixtureProblem> {
    let cert = fixture_certificate(name, m)?;
    let (spec, a, b) = match name {
        "disc-ab" => (DomainSpec::disc(), parse_poly("1", 1, (1, 1))?, parse_poly("x1", 1, (1, 1))?),
        "bidisc-ab" => (DomainSpec::polydisc(2), parse_poly("1", 2, (1, 1))?, parse_poly("x1*x2", 2, (1, 1))?),
        _ => (DomainSpec::disc(), parse_poly("[[1,0]] + [[0,1]]*x1", 1, (1, 2))?, parse_poly("1", 1, (1, 1))?),
    };
    Ok(FixtureProblem { spec, a, b, cert })
}

/// Zero certificate, valid exactly when `a(T)a(R)* = b(T)b(R)*`.
pub fn zero_certificate(d: usize, e3: usize, mk: usize) -> Certificate {
    Certificate::exact(Arc::new(FreePolynomial::zero(d, e3, mk)))
}

#[derive(Clone)]
pub struct CoronaProblem {
    spec: DomainSpec,
    mu: f64,
    a: Vec<Arc<dyn NcFunction>>,
    certificate: Certificate,
}

impl CoronaProblem {
    pub fn new(spec: DomainSpec, mu: f64, a: Vec<Arc<dyn NcFunction>>, certificate: Certificate) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Misuse(format!("mu must be positive, got {mu}")));
        }
        if !spec.is_gdelta() {
            return Err(Error::Misuse("corona problems need a G_delta domain (epsilon = I)".into()));
        }
        if a.is_empty() {
            return Err(Error::Misuse("corona problems need at least one function a_i".into()));
        }
        if let Some(i) = a.iter().position(|f| f.shape() != (1, 1)) {
            return Err(Error::Shape(format!("a_{} is not scalar-valued", i + 1)));
        }
        Ok(CoronaProblem { spec, mu, a, certificate })
    }

    pub fn ell(&self) -> usize {
        self.a.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }
}

/// `min_R λ_min(Σ a_i(R) a_i(R)*) − μ²` over the given points.
pub fn check_corona_condition(prob: &CoronaProblem, points: &[MatrixTuple]) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for r in points {
        let n = r.level();
        let mut s = CMat::zeros(n, n);
        for f in &prob.a {
            let v = f.eval(r)?;
            s += &v * v.adjoint();
        }
        worst = worst.min(min_eig_hermitian(&s) - prob.mu * prob.mu);
    }
    Ok(worst)
}

/// `a_row(R) = [a_1(R) ⋯ a_ℓ(R)]` and `b(R) = μ I_n`.
pub fn assemble(prob: &CoronaProblem) -> (Arc<dyn NcFunction>, Arc<dyn NcFunction>) {
    let parts = prob.a.clone();
    let a_row = FnFunction::new(1, prob.ell(), move |x: &MatrixTuple| {
        Ok(hstack(&parts.iter().map(|f| f.eval(x)).collect::<Result<Vec<_>>>()?))
    });
    let b = FreePolynomial::constant(prob.spec.d(), eye(1) * c64(prob.mu, 0.0));
    (Arc::new(a_row), Arc::new(b))
}

/// `g = f / μ`, split into components `g_i` of size `n × n`.
#[derive(Clone, Debug)]
pub struct CoronaSolution {
    f: TransferFunction,
    mu: f64,
    ell: usize,
}

impl CoronaSolution {
    pub fn components(&self, x: &MatrixTuple) -> Result<Vec<CMat>> {
        let g = self.eval(x)?;
        let n = x.level();
        Ok((0..self.ell).map(|i| g.rows(i * n, n).into_owned()).collect())
    }

    pub fn transfer_function(&self) -> &TransferFunction {
        &self.f
    }
}

impl NcFunction for CoronaSolution {
    fn shape(&self) -> (usize, usize) {
        (self.ell, 1)
    }

    fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        Ok(self.f.eval(x)? * c64(1.0 / self.mu, 0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoronaReport {
    pub ell: usize,
    pub mu: f64,
    /// `min λ_min(Σ a_i a_i*) − μ²` on construction points.
    pub condition_margin: f64,
    pub construction: ConstructionReport,
    pub verification: VerificationReport,
    /// `max ‖Σ a_i(R) g_i(R) − I‖` on held-out points.
    pub max_bezout_residual: f64,
    pub max_g_norm: f64,
    pub g_norm_bound: f64,
}

pub struct CoronaOutcome {
    pub solution: CoronaSolution,
    pub realization: Realization,
    pub report: CoronaReport,
}

pub fn corona_solve(
    prob: &CoronaProblem,
    points: &[MatrixTuple],
    holdout: &[MatrixTuple],
    rcfg: &RealizeConfig,
    vcfg: &VerifyConfig,
) -> Result<CoronaOutcome> {
    let condition_margin = check_corona_condition(prob, points)?;
    if condition_margin < -rcfg.tol {
        return Err(Error::CoronaCondition { min_eig: condition_margin });
    }
    let (a_row, b) = assemble(prob);
    let realization = realize(&prob.spec, a_row.as_ref(), b.as_ref(), &prob.certificate, points, rcfg)?;
    let solution = CoronaSolution { f: realization.function(), mu: prob.mu, ell: prob.ell() };
    let verification = verify_realization(&solution.f, holdout, a_row.as_ref(), b.as_ref(), vcfg)?;
    let (max_bezout_residual, max_g_norm) = bezout_check(prob, &solution, holdout, vcfg.exec)?;
    let report = CoronaReport {
        ell: prob.ell(),
        mu: prob.mu,
        condition_margin,
        construction: realization.report.clone(),
        verification,
        max_bezout_residual,
        max_g_norm,
        g_norm_bound: 1.0 / prob.mu,
    };
    Ok(CoronaOutcome { solution, realization, report })
}

/// `(max ‖Σ a_i g_i − I‖, max ‖g‖)` over `points`.
pub fn bezout_check(
    prob: &CoronaProblem,
    g: &CoronaSolution,
    points: &[MatrixTuple],
    exec: Exec,
) -> Result<(f64, f64)> {
    let per_point = exec.try_map(points.len(), |i| {
        let x = &points[i];
        let comps = g.components(x)?;
        let mut sum = CMat::zeros(x.level(), x.level());
        for (f, gi) in prob.a.iter().zip(&comps) {
            sum += f.eval(x)? * gi;
        }
        Ok::<_, Error>((op_norm(&(sum - eye(x.level()))), op_norm(&g.eval(x)?)))
    })?;
    Ok(per_point.iter().fold((0.0, 0.0), |(r, n), &(ri, ni)| (f64::max(r, ri), f64::max(n, ni))))
}
