//! Free domains `K(n) = {X : ε(X)ε(X)* − δ(X)δ(X)* ≻ 0}`, the `G_δ`
//! specialization `ε = I∅`, linear pencils, and seeded domain sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, complex_gaussian, eye, min_eig_hermitian, op_norm, CMat};
use crate::ncpoly::{FreePolynomial, MatrixTuple};
use crate::par::{stream_seed, Exec};

/// Strict membership is `margin > MEMBER_TOL`.
pub const MEMBER_TOL: f64 = 1e-10;

/// Margin floor used when sampling points for realization.
pub const SAMPLE_FLOOR: f64 = 1e-3;

/// The pair `(ε, δ)` of `k × k` free polynomials cutting out a free domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    epsilon: FreePolynomial,
    delta: FreePolynomial,
}

impl DomainSpec {
    /// Validates shapes and the standing assumption `0 ∈ K(1)`.
    pub fn new(epsilon: FreePolynomial, delta: FreePolynomial) -> Result<Self> {
        if epsilon.d() != delta.d() {
            return Err(Error::InvalidSpec(format!("epsilon has {} variables, delta has {}", epsilon.d(), delta.d())));
        }
        let (r, s) = epsilon.shape();
        if r != s || delta.shape() != (r, s) {
            return Err(Error::InvalidSpec(format!(
                "epsilon is {r}x{s} and delta is {}x{}; both must be k x k",
                delta.shape().0,
                delta.shape().1
            )));
        }
        let spec = DomainSpec { epsilon, delta };
        let m0 = membership_margin(&spec, &MatrixTuple::zero(spec.d(), 1))?;
        if !(m0 > MEMBER_TOL) {
            return Err(Error::InvalidSpec(format!("0 is not in K(1): margin {m0:.3e}")));
        }
        Ok(spec)
    }

    /// `ε = I_k ∅`.
    pub fn gdelta(delta: FreePolynomial) -> Result<Self> {
        let (k, _) = delta.shape();
        Self::new(FreePolynomial::identity(delta.d(), k), delta)
    }

    /// Unit disc: `ε = 1`, `δ = x1`.
    pub fn disc() -> Self {
        let delta = FreePolynomial::variable(1, 1, eye(1)).expect("x1");
        Self::gdelta(delta).expect("disc spec")
    }

    /// Free polydisc in `d` variables: `δ = diag(x1, …, xd)`.
    pub fn polydisc(d: usize) -> Self {
        let mut delta = FreePolynomial::zero(d, d, d);
        for j in 1..=d {
            let mut e = CMat::zeros(d, d);
            e[(j - 1, j - 1)] = c64(1.0, 0.0);
            delta = delta.add(&FreePolynomial::variable(d, j, e).expect("letter")).expect("shape");
        }
        Self::gdelta(delta).expect("polydisc spec")
    }

    pub fn epsilon(&self) -> &FreePolynomial {
        &self.epsilon
    }

    pub fn delta(&self) -> &FreePolynomial {
        &self.delta
    }

    pub fn d(&self) -> usize {
        self.delta.d()
    }

    pub fn k(&self) -> usize {
        self.delta.shape().0
    }

    pub fn is_gdelta(&self) -> bool {
        self.epsilon.is_identity_constant()
    }

    fn check_point(&self, x: &MatrixTuple) -> Result<()> {
        if x.d() != self.d() {
            return Err(Error::Shape(format!("domain in {} variables, point has {}", self.d(), x.d())));
        }
        Ok(())
    }
}

/// `λ_min(ε(X)ε(X)* − δ(X)δ(X)*)`, the optimal constant `c` in the strict
/// inequality defining `K(n)`.
pub fn membership_margin(spec: &DomainSpec, x: &MatrixTuple) -> Result<f64> {
    spec.check_point(x)?;
    let e = spec.epsilon.eval(x)?;
    let dl = spec.delta.eval(x)?;
    Ok(min_eig_hermitian(&(&e * e.adjoint() - &dl * dl.adjoint())))
}

pub fn is_member(spec: &DomainSpec, x: &MatrixTuple) -> Result<bool> {
    Ok(membership_margin(spec, x)? > MEMBER_TOL)
}

/// `‖δ(X)‖ < 1`; only meaningful for `ε = I∅`.
pub fn gdelta_member(spec: &DomainSpec, x: &MatrixTuple) -> Result<bool> {
    if !spec.is_gdelta() {
        return Err(Error::Misuse("gdelta_member requires epsilon = I (empty word)".into()));
    }
    spec.check_point(x)?;
    Ok(op_norm(&spec.delta.eval(x)?) < 1.0)
}

/// Linear pencil `Λ(x) = Σ_j A_j x_j` with `r × r` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PencilSpec {
    coeffs: Vec<CMat>,
}

impl PencilSpec {
    pub fn new(coeffs: Vec<CMat>) -> Result<Self> {
        let r = coeffs
            .first()
            .map(|a| a.nrows())
            .ok_or_else(|| Error::InvalidSpec("pencil needs at least one coefficient".into()))?;
        if r == 0 || coeffs.iter().any(|a| a.shape() != (r, r)) {
            return Err(Error::InvalidSpec("pencil coefficients must share an r x r shape".into()));
        }
        Ok(PencilSpec { coeffs })
    }

    pub fn r(&self) -> usize {
        self.coeffs[0].nrows()
    }

    /// Number of variables.
    pub fn g(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    pub fn lambda(&self) -> FreePolynomial {
        let g = self.g();
        self.coeffs.iter().enumerate().fold(FreePolynomial::zero(g, self.r(), self.r()), |acc, (j, a)| {
            acc.add(&FreePolynomial::variable(g, j + 1, a.clone()).expect("letter")).expect("shape")
        })
    }

    /// `L(X) = I − Λ(X) − Λ(X)*`.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        let l = self.lambda().eval(x)?;
        Ok(eye(l.nrows()) - &l - l.adjoint())
    }
}

/// `ε = I∅ − Λ`, `δ = Λ`, so that `εε* − δδ* = I − Λ − Λ*`.
pub fn pencil_to_domain(p: &PencilSpec) -> DomainSpec {
    let lambda = p.lambda();
    let eps = FreePolynomial::identity(p.g(), p.r()).sub(&lambda).expect("shape");
    DomainSpec::new(eps, lambda).expect("pencil domains contain 0 with margin 1")
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    /// Returned points satisfy `margin > floor`.
    pub floor: f64,
    /// Optional cap on `max_j ‖X_j‖`.
    pub max_entry_norm: Option<f64>,
    /// Interior fraction range applied after locating the boundary along a ray.
    pub interior: (f64, f64),
    pub max_iter: usize,
    pub exec: Exec,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            floor: SAMPLE_FLOOR,
            max_entry_norm: None,
            interior: (0.1, 0.9),
            max_iter: 60,
            exec: Exec::default(),
        }
    }
}

/// `count` seeded points of `K(n)` with margin above [`SAMPLE_FLOOR`].
pub fn sample_domain(spec: &DomainSpec, n: usize, count: usize, seed: u64) -> Result<Vec<MatrixTuple>> {
    sample_domain_with(spec, n, count, seed, &SamplerConfig::default())
}

/// Each point draws a Gaussian direction `G`, bisects on `t ∈ (0, 1]` for the
/// boundary of `{t : margin(tG) > floor}`, then pulls back by a random
/// interior fraction.
pub fn sample_domain_with(
    spec: &DomainSpec,
    n: usize,
    count: usize,
    seed: u64,
    cfg: &SamplerConfig,
) -> Result<Vec<MatrixTuple>> {
    if n == 0 {
        return Err(Error::Shape("level must be positive".into()));
    }
    cfg.exec.try_map(count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
        sample_one(spec, n, cfg, &mut rng)
    })
}

fn sample_one(spec: &DomainSpec, n: usize, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<MatrixTuple> {
    let raw = MatrixTuple::new((0..spec.d()).map(|_| complex_gaussian(n, n, rng)).collect())?;
    let scale = cfg.max_entry_norm.unwrap_or(1.0) / raw.max_entry_norm().max(f64::MIN_POSITIVE);
    let dir = raw.scale(scale);
    let (lo_frac, hi_frac) = cfg.interior;
    let frac = rng.random_range(lo_frac..=hi_frac);

    let ok = |t: f64| -> Result<bool> { Ok(membership_margin(spec, &dir.scale(t))? > cfg.floor) };
    if !ok(0.0)? {
        return Err(Error::Sampling { iterations: 0 });
    }
    let boundary = if ok(1.0)? {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..cfg.max_iter {
            let mid = 0.5 * (lo + hi);
            if ok(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == 0.0 {
            return Err(Error::Sampling { iterations: cfg.max_iter });
        }
        lo
    };
    let t = frac * boundary;
    if ok(t)? {
        Ok(dir.scale(t))
    } else {
        Ok(dir.scale(boundary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block_diag, complex_gaussian, zeros};
    use crate::ncpoly::{direct_sum, parse_poly};
    use proptest::prelude::*;

    fn scalar(v: f64) -> MatrixTuple {
        MatrixTuple::scalars(&[c64(v, 0.0)])
    }

    #[test]
    fn disc_margins() {
        let disc = DomainSpec::disc();
        assert!((membership_margin(&disc, &scalar(0.5)).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(membership_margin(&disc, &scalar(0.0)).unwrap(), 1.0);
        let boundary = membership_margin(&disc, &scalar(1.0)).unwrap();
        assert!(boundary.abs() < 1e-15);
        assert!(!is_member(&disc, &scalar(1.0)).unwrap());
    }

    #[test]
    fn gdelta_examples() {
        let disc = DomainSpec::disc();
        assert!(gdelta_member(&disc, &scalar(0.99)).unwrap());
        let mut m = zeros(2, 2);
        m[(0, 1)] = c64(2.0, 0.0);
        assert!(!gdelta_member(&disc, &MatrixTuple::new(vec![m]).unwrap()).unwrap());
        let bidisc = DomainSpec::polydisc(2);
        let x = MatrixTuple::new(vec![eye(3) * c64(0.5, 0.0), eye(3) * c64(0.5, 0.0)]).unwrap();
        assert!(gdelta_member(&bidisc, &x).unwrap());
    }

    #[test]
    fn gdelta_rejects_general_epsilon() {
        let p = PencilSpec::new(vec![eye(2)]).unwrap();
        let spec = pencil_to_domain(&p);
        assert!(matches!(gdelta_member(&spec, &MatrixTuple::zero(1, 1)), Err(Error::Misuse(_))));
    }

    #[test]
    fn spec_requires_zero_inside() {
        let eps = parse_poly("x1", 1, (1, 1)).unwrap();
        let delta = parse_poly("0", 1, (1, 1)).unwrap();
        assert!(matches!(DomainSpec::new(eps, delta), Err(Error::InvalidSpec(_))));
        let eps = parse_poly("1", 2, (1, 1)).unwrap();
        let delta = parse_poly("x1", 1, (1, 1)).unwrap();
        assert!(DomainSpec::new(eps, delta).is_err());
    }

    #[test]
    fn zero_pencil_has_unit_margin() {
        let p = PencilSpec::new(vec![zeros(2, 2)]).unwrap();
        let spec = pencil_to_domain(&p);
        assert!(spec.delta().is_zero());
        assert!(spec.epsilon().is_identity_constant());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = MatrixTuple::new(vec![complex_gaussian(3, 3, &mut rng)]).unwrap();
        assert!((membership_margin(&spec, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nilpotent_pencil_margin_matches_lmi() {
        let mut a = zeros(2, 2);
        a[(0, 1)] = c64(1.0, 0.0);
        let p = PencilSpec::new(vec![a]).unwrap();
        let x = MatrixTuple::new(vec![eye(2) * c64(0.3, 0.0)]).unwrap();
        let spec = pencil_to_domain(&p);
        let direct = min_eig_hermitian(&p.eval(&x).unwrap());
        // L = I - 0.3 (N + N*) ⊗ I_2 has eigenvalues 1 ± 0.3
        assert!((direct - 0.7).abs() < 1e-14);
        assert!((membership_margin(&spec, &x).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn disc_samples_are_inside() {
        let pts = sample_domain(&DomainSpec::disc(), 1, 3, 7).unwrap();
        assert_eq!(pts.len(), 3);
        for p in &pts {
            assert!(p.entry(1)[(0, 0)].norm() < 1.0);
        }
    }

    #[test]
    fn bidisc_samples_are_contractive_pairs() {
        let spec = DomainSpec::polydisc(2);
        for p in sample_domain(&spec, 2, 10, 11).unwrap() {
            assert!(op_norm(p.entry(1)) < 1.0 && op_norm(p.entry(2)) < 1.0);
            assert!(membership_margin(&spec, &p).unwrap() > SAMPLE_FLOOR);
        }
    }

    #[test]
    fn sampler_is_deterministic_and_strategy_independent() {
        let spec = DomainSpec::polydisc(2);
        let seq = SamplerConfig { exec: Exec::Sequential, ..Default::default() };
        let par = SamplerConfig { exec: Exec::Parallel, ..Default::default() };
        let a = sample_domain_with(&spec, 3, 8, 42, &seq).unwrap();
        let b = sample_domain_with(&spec, 3, 8, 42, &par).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn capped_sampling() {
        let cfg = SamplerConfig { max_entry_norm: Some(0.6), ..Default::default() };
        for p in sample_domain_with(&DomainSpec::disc(), 3, 10, 5, &cfg).unwrap() {
            assert!(p.max_entry_norm() <= 0.6 + 1e-12);
        }
    }

    #[test]
    fn gdelta_agrees_with_margin_on_random_probes() {
        let spec = DomainSpec::polydisc(2);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.random_range(1..=3);
            let s = rng.random_range(0.2..1.2);
            let x = MatrixTuple::new(vec![
                complex_gaussian(n, n, &mut rng) * c64(s / n as f64, 0.0),
                complex_gaussian(n, n, &mut rng) * c64(s / n as f64, 0.0),
            ])
            .unwrap();
            let margin = membership_margin(&spec, &x).unwrap();
            if margin.abs() < 1e-9 {
                continue;
            }
            assert_eq!(gdelta_member(&spec, &x).unwrap(), margin > 0.0);
        }
    }

    proptest! {
        #[test]
        fn margin_of_direct_sum_is_min(seed in any::<u64>(), m in 1usize..4, n in 1usize..4) {
            let spec = DomainSpec::polydisc(2);
            let x = sample_domain(&spec, m, 1, seed).unwrap().remove(0);
            let y = sample_domain(&spec, n, 1, seed ^ 0xabc).unwrap().remove(0);
            let mx = membership_margin(&spec, &x).unwrap();
            let my = membership_margin(&spec, &y).unwrap();
            let mxy = membership_margin(&spec, &direct_sum(&x, &y).unwrap()).unwrap();
            prop_assert!((mxy - mx.min(my)).abs() <= 1e-12);
        }

        #[test]
        fn margin_is_unitarily_invariant(seed in any::<u64>()) {
            let a = PencilSpec::new(vec![
                parse_poly("[[0.2,0.1i],[0.3,-0.1]]", 1, (2, 2)).unwrap().terms().values().next().unwrap().clone(),
                parse_poly("[[0,0.4],[0.1,0.2]]", 1, (2, 2)).unwrap().terms().values().next().unwrap().clone(),
            ]).unwrap();
            let spec = pencil_to_domain(&a);
            let x = sample_domain(&spec, 3, 1, seed).unwrap().remove(0);
            let u = crate::haar::sample_haar_unitary(3, seed);
            let y = x.similar(&u).unwrap();
            let d = membership_margin(&spec, &x).unwrap() - membership_margin(&spec, &y).unwrap();
            prop_assert!(d.abs() <= 1e-10);
        }

        #[test]
        fn pencil_identity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rng.random_range(1..=3);
            let g = rng.random_range(1..=3);
            let n = rng.random_range(1..=4);
            let p = PencilSpec::new((0..g).map(|_| complex_gaussian(r, r, &mut rng)).collect()).unwrap();
            let x = MatrixTuple::new((0..g).map(|_| complex_gaussian(n, n, &mut rng) * c64(0.3, 0.0)).collect()).unwrap();
            let spec = pencil_to_domain(&p);
            let e = spec.epsilon().eval(&x).unwrap();
            let dl = spec.delta().eval(&x).unwrap();
            let lhs = &e * e.adjoint() - &dl * dl.adjoint();
            prop_assert!((lhs - p.eval(&x).unwrap()).norm() <= 1e-12);
        }
    }

    #[test]
    fn block_spectrum_sanity() {
        let spec = DomainSpec::disc();
        let x = MatrixTuple::new(vec![block_diag(&[&(eye(1) * c64(0.5, 0.0)), &(eye(1) * c64(0.2, 0.0))])]).unwrap();
        assert!((membership_margin(&spec, &x).unwrap() - 0.75).abs() < 1e-15);
    }
}
