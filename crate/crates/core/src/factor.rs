//! Douglas factorization `B = AE` under `AA* ⪰ BB*`, and the contraction
//! `γ(R)` with `δ(R)* = γ(R)*ε(R)*`.

use crate::error::{Error, Result};
use crate::linalg::{eye, inverse_checked, kron, min_eig_hermitian, op_norm, pinv, solve_checked, CMat, COND_CAP};
use crate::ncdomain::{membership_margin, DomainSpec, MEMBER_TOL};
use crate::ncpoly::MatrixTuple;

/// Default slack on the precondition `AA* − BB* ⪰ −tol·I`.
pub const DOUGLAS_TOL: f64 = 1e-10;

/// Relative rank cutoff for the pseudoinverse of `A`.
const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FactorResult {
    pub e: CMat,
    /// `‖AE − B‖`.
    pub residual: f64,
    pub norm_e: f64,
}

pub fn douglas_solve(a: &CMat, b: &CMat) -> Result<FactorResult> {
    douglas_solve_tol(a, b, DOUGLAS_TOL)
}

/// Minimal-norm least-squares solution `E = A⁺B`.
pub fn douglas_solve_tol(a: &CMat, b: &CMat, tol: f64) -> Result<FactorResult> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "douglas: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let gap = a * a.adjoint() - b * b.adjoint();
    let min_eig = min_eig_hermitian(&gap);
    if min_eig < -tol {
        return Err(Error::FactorizationInfeasible { min_eig });
    }
    let (a_pinv, _) = pinv(a, RANK_TOL);
    let e = a_pinv * b;
    let residual = op_norm(&(a * &e - b));
    let norm_e = op_norm(&e);
    Ok(FactorResult { e, residual, norm_e })
}

/// `γ(R) = ε(R)⁻¹δ(R)`, size `kn × kn`.
pub fn gamma_extract(spec: &DomainSpec, r: &MatrixTuple) -> Result<CMat> {
    let margin = membership_margin(spec, r)?;
    if !(margin > MEMBER_TOL) {
        return Err(Error::OutsideDomain { margin });
    }
    let dl = spec.delta().eval(r)?;
    if spec.is_gdelta() {
        return Ok(dl);
    }
    solve_checked(&spec.epsilon().eval(r)?, &dl, COND_CAP)
}

/// `‖γ(S⁻¹RS) − (I_k⊗S⁻¹)γ(R)(I_k⊗S)‖`.
pub fn verify_gamma_covariance(spec: &DomainSpec, r: &MatrixTuple, s: &CMat) -> Result<f64> {
    let moved = r.similar(s)?;
    let g_moved = gamma_extract(spec, &moved)?;
    let g = gamma_extract(spec, r)?;
    let k = spec.k();
    let s_inv = inverse_checked(s, COND_CAP)?;
    let rhs = kron(&eye(k), &s_inv) * g * kron(&eye(k), s);
    Ok(op_norm(&(g_moved - rhs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{haar_unitary, sample_haar_unitary};
    use crate::linalg::{c64, complex_gaussian, cond, op_norm};
    use crate::ncdomain::{pencil_to_domain, sample_domain, PencilSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, c64(x, 0.0))
    }

    fn diag(v: &[f64]) -> CMat {
        let mut m = CMat::zeros(v.len(), v.len());
        for (i, x) in v.iter().enumerate() {
            m[(i, i)] = c64(*x, 0.0);
        }
        m
    }

    fn contraction(n: usize, bound: f64, rng: &mut ChaCha8Rng) -> CMat {
        let g = complex_gaussian(n, n, rng);
        let s = op_norm(&g);
        g * c64(bound / s, 0.0)
    }

    fn pencil() -> PencilSpec {
        let mut a1 = CMat::zeros(2, 2);
        a1[(0, 1)] = c64(0.4, 0.0);
        let mut a2 = CMat::zeros(2, 2);
        a2[(1, 0)] = c64(0.0, 0.3);
        a2[(0, 0)] = c64(0.2, 0.0);
        PencilSpec::new(vec![a1, a2]).unwrap()
    }

    #[test]
    fn scalar_factor() {
        let r = douglas_solve(&scalar(2.0), &scalar(1.0)).unwrap();
        assert!((r.e[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-15);
        assert!((r.norm_e - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identity_factor_returns_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = contraction(3, 0.8, &mut rng);
        let r = douglas_solve(&eye(3), &b).unwrap();
        assert!((r.e - b).norm() < 1e-14);
    }

    #[test]
    fn construct_then_recover() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = haar_unitary(3, &mut rng);
        let a = &u * diag(&[2.0, 1.5, 1.0]);
        let e0 = contraction(3, 0.9, &mut rng);
        let b = &a * &e0;
        let r = douglas_solve(&a, &b).unwrap();
        assert!(r.residual <= 1e-10);
        assert!(r.norm_e <= 0.9 + 1e-8);
    }

    #[test]
    fn infeasible_reports_negative_eigenvalue() {
        match douglas_solve(&scalar(1.0), &scalar(2.0)) {
            Err(Error::FactorizationInfeasible { min_eig }) => assert!((min_eig + 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rank_deficient_a_is_handled() {
        let a = diag(&[1.0, 0.0]);
        let b = diag(&[0.5, 0.0]);
        let r = douglas_solve(&a, &b).unwrap();
        assert!(r.residual < 1e-14);
        assert!((r.norm_e - 0.5).abs() < 1e-14);
    }

    #[test]
    fn disc_and_bidisc_gamma_are_delta() {
        let disc = DomainSpec::disc();
        for r in sample_domain(&disc, 3, 5, 3).unwrap() {
            assert_eq!(gamma_extract(&disc, &r).unwrap(), r.entry(1).clone());
        }
        let bidisc = DomainSpec::polydisc(2);
        for r in sample_domain(&bidisc, 2, 5, 4).unwrap() {
            let g = gamma_extract(&bidisc, &r).unwrap();
            let expect = crate::linalg::block_diag(&[r.entry(1), r.entry(2)]);
            assert!((g - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn pencil_gamma_matches_douglas() {
        let p = pencil();
        let spec = pencil_to_domain(&p);
        for r in sample_domain(&spec, 2, 10, 5).unwrap() {
            let g = gamma_extract(&spec, &r).unwrap();
            let lam = p.lambda().eval(&r).unwrap();
            let direct = inverse_checked(&(eye(lam.nrows()) - &lam), COND_CAP).unwrap() * &lam;
            assert!((&g - direct).norm() <= 1e-10);
            let dg = douglas_solve(&spec.epsilon().eval(&r).unwrap(), &spec.delta().eval(&r).unwrap()).unwrap();
            assert!((&g - dg.e).norm() <= 1e-10);
        }
    }

    #[test]
    fn gamma_refuses_exterior_points() {
        let r = MatrixTuple::scalars(&[c64(1.5, 0.0)]);
        assert!(matches!(gamma_extract(&DomainSpec::disc(), &r), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn identity_similarity_has_zero_residual() {
        let spec = pencil_to_domain(&pencil());
        let r = &sample_domain(&spec, 2, 1, 6).unwrap()[0];
        assert_eq!(verify_gamma_covariance(&spec, r, &eye(2)).unwrap(), 0.0);
    }

    #[test]
    fn disc_covariance_under_similarity() {
        let spec = DomainSpec::disc();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for r in sample_domain(&spec, 3, 10, 7).unwrap() {
            let s = eye(3) + complex_gaussian(3, 3, &mut rng) * c64(0.05, 0.0);
            if !crate::ncdomain::is_member(&spec, &r.similar(&s).unwrap()).unwrap() {
                continue;
            }
            assert!(verify_gamma_covariance(&spec, &r, &s).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn pencil_covariance_under_unitaries() {
        let spec = pencil_to_domain(&pencil());
        for (i, r) in sample_domain(&spec, 3, 10, 8).unwrap().iter().enumerate() {
            let u = sample_haar_unitary(3, 100 + i as u64);
            assert!(verify_gamma_covariance(&spec, r, &u).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn gamma_is_a_strict_contraction_with_margin_bound() {
        let spec = pencil_to_domain(&pencil());
        for r in sample_domain(&spec, 2, 50, 9).unwrap() {
            let g = gamma_extract(&spec, &r).unwrap();
            let m = membership_margin(&spec, &r).unwrap();
            let e = op_norm(&spec.epsilon().eval(&r).unwrap());
            let ng = op_norm(&g);
            assert!(ng < 1.0);
            assert!(ng * ng <= 1.0 - m / (e * e) + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn douglas_recovers_planted_factor(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = complex_gaussian(n, n, &mut rng) + eye(n) * c64(2.0, 0.0);
            let e0 = contraction(n, 1.0, &mut rng);
            let b = &a * &e0;
            let r = douglas_solve(&a, &b).unwrap();
            prop_assert!((&a * &r.e - &b).norm() <= 1e-10 * (1.0 + b.norm()));
            prop_assert!(r.norm_e <= op_norm(&e0) + 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn gamma_covariance_bound(seed in any::<u64>()) {
            let spec = pencil_to_domain(&pencil());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = &sample_domain(&spec, 2, 1, seed).unwrap()[0];
            let s = eye(2) + complex_gaussian(2, 2, &mut rng) * c64(0.1, 0.0);
            let moved = r.similar(&s).unwrap();
            prop_assume!(crate::ncdomain::is_member(&spec, &moved).unwrap());
            let res = verify_gamma_covariance(&spec, r, &s).unwrap();
            let k = cond(&s);
            prop_assert!(res <= 1e-8 * k * k);
        }
    }
}
