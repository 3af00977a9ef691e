use crate::error::{Error, Result};
use crate::linalg::{block_diag, c64, inverse_checked, op_norm, permutation_matrix, CMat, COND_CAP};

/// A level-`n` point `X = (X_1, …, X_d)` of `n × n` complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    n: usize,
    entries: Vec<CMat>,
}

impl MatrixTuple {
    pub fn new(entries: Vec<CMat>) -> Result<Self> {
        let n = match entries.first() {
            Some(e) => e.nrows(),
            None => return Err(Error::Shape("tuple needs at least one entry".into())),
        };
        if n == 0 {
            return Err(Error::Shape("tuple level must be positive".into()));
        }
        if let Some((j, e)) = entries.iter().enumerate().find(|(_, e)| e.shape() != (n, n)) {
            return Err(Error::Shape(format!("entry {} is {}x{}, expected {n}x{n}", j + 1, e.nrows(), e.ncols())));
        }
        Ok(MatrixTuple { n, entries })
    }

    pub fn zero(d: usize, n: usize) -> Self {
        MatrixTuple { n, entries: vec![CMat::zeros(n, n); d] }
    }

    /// Level-1 tuple from scalars.
    pub fn scalars(values: &[num_complex::Complex64]) -> Self {
        MatrixTuple { n: 1, entries: values.iter().map(|&v| CMat::from_element(1, 1, v)).collect() }
    }

    pub fn level(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[CMat] {
        &self.entries
    }

    /// Entry `X_j`, 1-based.
    pub fn entry(&self, j: usize) -> &CMat {
        &self.entries[j - 1]
    }

    pub fn scale(&self, t: f64) -> Self {
        MatrixTuple { n: self.n, entries: self.entries.iter().map(|e| e * c64(t, 0.0)).collect() }
    }

    /// `max_j ‖X_j‖`.
    pub fn max_entry_norm(&self) -> f64 {
        self.entries.iter().map(op_norm).fold(0.0, f64::max)
    }

    pub fn direct_sum(&self, other: &MatrixTuple) -> Result<MatrixTuple> {
        direct_sum(self, other)
    }

    /// `S⁻¹ X S`, entrywise.
    pub fn similar(&self, s: &CMat) -> Result<MatrixTuple> {
        unitary_conj(self, s)
    }

    pub fn map_entries(&self, f: impl Fn(&CMat) -> CMat) -> Result<MatrixTuple> {
        MatrixTuple::new(self.entries.iter().map(f).collect())
    }
}

/// `X ⊕ Y = (X_1 ⊕ Y_1, …, X_d ⊕ Y_d)`.
pub fn direct_sum(x: &MatrixTuple, y: &MatrixTuple) -> Result<MatrixTuple> {
    direct_sum_all(&[x.clone(), y.clone()])
}

pub fn direct_sum_all(parts: &[MatrixTuple]) -> Result<MatrixTuple> {
    let first = parts.first().ok_or_else(|| Error::Shape("empty direct sum".into()))?;
    let d = first.d();
    if parts.iter().any(|p| p.d() != d) {
        return Err(Error::Shape("direct sum of tuples with different variable counts".into()));
    }
    let entries = (0..d)
        .map(|j| {
            let blocks: Vec<&CMat> = parts.iter().map(|p| &p.entries[j]).collect();
            block_diag(&blocks)
        })
        .collect();
    MatrixTuple::new(entries)
}

/// Similarity `(S⁻¹X_1S, …, S⁻¹X_dS)`; refuses `S` with condition number
/// above the default cap.
pub fn unitary_conj(x: &MatrixTuple, s: &CMat) -> Result<MatrixTuple> {
    if s.shape() != (x.level(), x.level()) {
        return Err(Error::Shape(format!("similarity is {}x{}, tuple level is {}", s.nrows(), s.ncols(), x.level())));
    }
    let s_inv = inverse_checked(s, COND_CAP)?;
    x.map_entries(|e| &s_inv * e * s)
}

/// Index map of the shuffle identifying `C^k ⊗ (⊕_i C^{n_i})` with
/// `⊕_i (C^k ⊗ C^{n_i})`: entry `q` of the Kronecker ordering lands at
/// `map[q]` in the block-diagonal ordering.
pub fn block_shuffle_map(k: usize, levels: &[usize]) -> Vec<usize> {
    let total: usize = levels.iter().sum();
    let mut map = vec![0; k * total];
    let mut level_offset = 0;
    let mut out_offset = 0;
    for &n in levels {
        for a in 0..k {
            for j in 0..n {
                map[a * total + level_offset + j] = out_offset + a * n + j;
            }
        }
        level_offset += n;
        out_offset += k * n;
    }
    map
}

/// Permutation `Π` of size `k(m+n)` with `Π p(X⊕Y) Π* = p(X) ⊕ p(Y)` for
/// every polynomial with `k`-row (resp. `k`-column) coefficients.
pub fn canonical_shuffle(k: usize, m: usize, n: usize) -> CMat {
    permutation_matrix(&block_shuffle_map(k, &[m, n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, eye, zeros};
    use crate::ncpoly::parse_poly;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tuple(d: usize, n: usize, rng: &mut ChaCha8Rng) -> MatrixTuple {
        MatrixTuple::new((0..d).map(|_| complex_gaussian(n, n, rng)).collect()).unwrap()
    }

    #[test]
    fn rejects_ragged_entries() {
        assert!(MatrixTuple::new(vec![eye(2), eye(3)]).is_err());
        assert!(MatrixTuple::new(vec![zeros(2, 3)]).is_err());
        assert!(MatrixTuple::new(vec![]).is_err());
    }

    #[test]
    fn scalar_direct_sum_is_diagonal() {
        let x = MatrixTuple::scalars(&[c64(0.3, 0.0)]);
        let y = MatrixTuple::scalars(&[c64(-0.5, 0.1)]);
        let s = direct_sum(&x, &y).unwrap();
        let mut expect = zeros(2, 2);
        expect[(0, 0)] = c64(0.3, 0.0);
        expect[(1, 1)] = c64(-0.5, 0.1);
        assert_eq!(s.entry(1), &expect);
    }

    #[test]
    fn padding_with_zero_tuple() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tuple(2, 2, &mut rng);
        let s = direct_sum(&x, &MatrixTuple::zero(2, 1)).unwrap();
        assert_eq!(s.level(), 3);
        for j in 1..=2 {
            assert_eq!(s.entry(j).view((0, 0), (2, 2)), x.entry(j).view((0, 0), (2, 2)));
            assert!(s.entry(j).row(2).iter().all(|z| z.norm() == 0.0));
            assert!(s.entry(j).column(2).iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn levels_add_under_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = direct_sum(&random_tuple(3, 2, &mut rng), &random_tuple(3, 3, &mut rng)).unwrap();
        assert_eq!(s.level(), 5);
        assert_eq!(s.d(), 3);
    }

    #[test]
    fn direct_sum_needs_matching_d() {
        assert!(direct_sum(&MatrixTuple::zero(1, 1), &MatrixTuple::zero(2, 1)).is_err());
    }

    #[test]
    fn identity_and_central_similarity_fix_the_tuple() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_tuple(2, 3, &mut rng);
        let same = x.similar(&eye(3)).unwrap();
        assert!((same.entry(1) - x.entry(1)).norm() < 1e-15);
        let scaled = x.similar(&(eye(3) * c64(2.0, 0.0))).unwrap();
        assert!((scaled.entry(2) - x.entry(2)).norm() < 1e-14);
    }

    #[test]
    fn permutation_similarity_permutes_diagonal() {
        let diag = |v: [f64; 3]| {
            let mut m = zeros(3, 3);
            for (i, x) in v.iter().enumerate() {
                m[(i, i)] = c64(*x, 0.0);
            }
            m
        };
        let x = MatrixTuple::new(vec![diag([1.0, 2.0, 3.0])]).unwrap();
        // S e_j = e_{σ(j)} with σ = (0 1 2) → (1 2 0)
        let s = permutation_matrix(&[1, 2, 0]);
        let y = x.similar(&s).unwrap();
        // (S⁻¹XS)_{jj} = X_{σ(j)σ(j)}
        assert!((y.entry(1) - diag([2.0, 3.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn singular_similarity_is_rejected() {
        let x = MatrixTuple::zero(1, 2);
        assert!(matches!(x.similar(&zeros(2, 2)), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn shuffle_k1_is_identity() {
        assert_eq!(canonical_shuffle(1, 2, 3), eye(5));
    }

    #[test]
    fn shuffle_k2_m1_n1_is_perfect_shuffle() {
        // Kronecker order (a, level): (0,0) (0,1) (1,0) (1,1)
        // block order: X block (a=0, a=1), then Y block (a=0, a=1)
        assert_eq!(block_shuffle_map(2, &[1, 1]), vec![0, 2, 1, 3]);
        let p = canonical_shuffle(2, 1, 1);
        let expect = permutation_matrix(&[0, 2, 1, 3]);
        assert_eq!(p, expect);
    }

    proptest! {
        #[test]
        fn shuffle_block_diagonalizes_evaluations(seed in any::<u64>(), m in 1usize..4, n in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = parse_poly("[[1,2],[0,1i]]*x1*x2 + [[0.5,0],[1,-1]]*x2 + [[1,1],[1,0]]", 2, (2, 2)).unwrap();
            let x = random_tuple(2, m, &mut rng);
            let y = random_tuple(2, n, &mut rng);
            let pi = canonical_shuffle(2, m, n);
            let lhs = &pi * p.eval(&direct_sum(&x, &y).unwrap()).unwrap() * pi.adjoint();
            let rhs = block_diag(&[&p.eval(&x).unwrap(), &p.eval(&y).unwrap()]);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * 10.0);
        }

        #[test]
        fn evaluation_is_similarity_covariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = parse_poly("[[1,0,2]]*x1 + [[0,1i,0]]*x2*x1", 2, (1, 3)).unwrap();
            let x = random_tuple(2, 3, &mut rng);
            let s = eye(3) + complex_gaussian(3, 3, &mut rng) * c64(0.3, 0.0);
            let s_inv = inverse_checked(&s, COND_CAP).unwrap();
            let lhs = p.eval(&x.similar(&s).unwrap()).unwrap();
            let rhs = crate::linalg::kron(&eye(1), &s_inv) * p.eval(&x).unwrap() * crate::linalg::kron(&eye(3), &s);
            let k = crate::linalg::cond(&s);
            prop_assert!((lhs - &rhs).norm() <= 1e-10 * k * (1.0 + rhs.norm()));
        }
    }
}
