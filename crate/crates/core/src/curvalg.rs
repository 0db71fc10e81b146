//! Pointwise algebra of a shape operator.
//!
//! Everything here acts on a single symmetric matrix `A` written in an
//! orthonormal tangent frame: the elementary symmetric functions `S_r` of its
//! eigenvalues, the normalized mean curvatures `H_r = (-1)^r S_r / C(n, r)`,
//! the Newton transformations `P_r`, and the trace identities tying them
//! together.
//!
//! Two independent routes to `P_r` are provided. [`newton_seq`] runs the
//! recurrence `P_r = (-1)^r S_r I + A P_{r-1}`; [`newton_reilly`] enumerates
//! generalized Kronecker symbols directly and is only meant as an oracle for
//! small `n`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest dimension accepted by [`newton_reilly`].
pub const REILLY_MAX_DIM: usize = 6;

/// Eigen-gap below which eigenvector checks are skipped.
pub const DEGENERATE_GAP: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric shape operator at one point, with its spectrum.
#[derive(Debug, Clone)]
pub struct ShapeSample {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl ShapeSample {
    /// Validates symmetry and diagonalizes. Entries are compared with an
    /// absolute tolerance scaled by the largest entry.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidSample(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample("non-finite entry".into()));
        }
        let scale = matrix.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidSample(format!(
                        "not symmetric at ({i}, {j}): {} vs {}",
                        matrix[(i, j)],
                        matrix[(j, i)]
                    )));
                }
            }
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self {
            matrix: sym,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns match [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `max(1, |A|_F^n)`, the scale all residual tolerances are measured in.
    pub fn tolerance_scale(&self) -> f64 {
        self.matrix.norm().powi(self.dim() as i32).max(1.0)
    }

    pub fn min_eigen_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `b_r = (n - r) C(n, r)`, equivalently `(r + 1) C(n, r + 1)`.
pub fn b_coefficient(n: usize, r: usize) -> f64 {
    (n.saturating_sub(r)) as f64 * binomial(n, r)
}

/// All elementary symmetric functions `S_0..S_m` of `values`.
pub fn elem_sym_all(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (m, &x) in values.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// The `r`-th elementary symmetric polynomial of `values`.
pub fn elem_sym(values: &[f64], r: usize) -> Result<f64> {
    if r > values.len() {
        return Err(Error::Domain(format!(
            "elementary symmetric index {r} exceeds dimension {}",
            values.len()
        )));
    }
    Ok(elem_sym_all(values)[r])
}

/// Symmetric functions, mean curvatures and the traces of `P_r`, `A P_r`,
/// `A^2 P_r` at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvaturePack {
    pub n: usize,
    /// `S_0..S_n`
    pub s: Vec<f64>,
    /// `H_0..H_n`
    pub h: Vec<f64>,
    /// `tr(P_r)`, r = 0..n
    pub tr_p: Vec<f64>,
    /// `tr(A P_r)`, r = 0..n
    pub tr_ap: Vec<f64>,
    /// `tr(A^2 P_r)`, r = 0..n
    pub tr_a2p: Vec<f64>,
    /// `b_0..b_{n-1}`
    pub b: Vec<f64>,
}

fn sign(r: usize) -> f64 {
    if r % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl CurvaturePack {
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Self {
        let n = eigenvalues.len();
        let s = elem_sym_all(eigenvalues);
        let s_at = |k: usize| s.get(k).copied().unwrap_or(0.0);
        let h = (0..=n).map(|r| sign(r) * s[r] / binomial(n, r)).collect();
        let tr_p = (0..=n).map(|r| sign(r) * (n - r) as f64 * s[r]).collect();
        let tr_ap = (0..=n).map(|r| sign(r) * (r + 1) as f64 * s_at(r + 1)).collect();
        let tr_a2p = (0..=n)
            .map(|r| sign(r) * (s[1] * s_at(r + 1) - (r + 2) as f64 * s_at(r + 2)))
            .collect();
        let b = (0..n).map(|r| b_coefficient(n, r)).collect();
        Self {
            n,
            s,
            h,
            tr_p,
            tr_ap,
            tr_a2p,
            b,
        }
    }

    /// `H_r`, zero beyond `n`.
    pub fn h_at(&self, r: usize) -> f64 {
        self.h.get(r).copied().unwrap_or(0.0)
    }

    pub fn s_at(&self, r: usize) -> f64 {
        self.s.get(r).copied().unwrap_or(0.0)
    }
}

pub fn curvature_pack(sample: &ShapeSample) -> CurvaturePack {
    CurvaturePack::from_eigenvalues(sample.eigenvalues())
}

/// `P_0..P_n` in the frame of `sample`.
#[derive(Debug, Clone)]
pub struct NewtonSequence {
    pub p: Vec<DMatrix<f64>>,
}

impl NewtonSequence {
    pub fn get(&self, r: usize) -> &DMatrix<f64> {
        &self.p[r]
    }
}

pub fn newton_seq(sample: &ShapeSample) -> NewtonSequence {
    let n = sample.dim();
    let s = elem_sym_all(sample.eigenvalues());
    let a = sample.matrix();
    let mut p = Vec::with_capacity(n + 1);
    p.push(DMatrix::identity(n, n));
    for r in 1..=n {
        let mut next = a * &p[r - 1];
        for i in 0..n {
            next[(i, i)] += sign(r) * s[r];
        }
        // P_r is a polynomial in A; remove rounding asymmetry.
        let sym = (&next + next.transpose()) * 0.5;
        p.push(sym);
    }
    NewtonSequence { p }
}

/// Single Newton transformation `P_r`, same route as [`newton_seq`].
pub fn newton_matrix(sample: &ShapeSample, r: usize) -> Result<DMatrix<f64>> {
    if r > sample.dim() {
        return Err(Error::Domain(format!(
            "Newton index {r} exceeds dimension {}",
            sample.dim()
        )));
    }
    Ok(newton_seq(sample).p.swap_remove(r))
}

/// Parity of a permutation given as an index array.
fn permutation_sign(perm: &[usize]) -> f64 {
    let mut seen = vec![false; perm.len()];
    let mut parity = 0usize;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = perm[k];
            len += 1;
        }
        parity += len - 1;
    }
    sign(parity)
}

/// Every permutation of `0..m`, Heap's algorithm.
fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..m).collect();
    let mut c = vec![0usize; m];
    out.push(a.clone());
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Ordered `r`-tuples of distinct indices from `0..n`, excluding `skip`.
fn distinct_tuples(n: usize, r: usize, skip: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, r: usize, skip: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for k in 0..n {
            if k != skip && !cur.contains(&k) {
                cur.push(k);
                rec(n, r, skip, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, r, skip, &mut Vec::with_capacity(r), &mut out);
    out
}

/// `P_r` from the generalized-Kronecker expansion
/// `a^r_ij = (-1)^r / r! * sum eps^{j_1..j_r j}_{i_1..i_r i} a_{j_1 i_1} ... a_{j_r i_r}`.
///
/// The symbol is nonzero only when the lower indices are pairwise distinct and
/// the upper row is a permutation of them, so the sum runs over ordered
/// distinct tuples and the permutations that send `i` to `j`.
pub fn newton_reilly(sample: &ShapeSample, r: usize) -> Result<DMatrix<f64>> {
    let n = sample.dim();
    if n > REILLY_MAX_DIM {
        return Err(Error::Capacity(format!(
            "Kronecker expansion limited to n <= {REILLY_MAX_DIM}, got {n}"
        )));
    }
    if r > n {
        return Err(Error::Domain(format!("Newton index {r} exceeds dimension {n}")));
    }
    let a = sample.matrix();
    let perms = permutations(r + 1);
    let signs: Vec<f64> = perms.iter().map(|p| permutation_sign(p)).collect();
    let factorial: f64 = (1..=r).map(|k| k as f64).product();
    let mut out = DMatrix::zeros(n, n);
    let mut lower = vec![0usize; r + 1];
    for i in 0..n {
        let tuples = distinct_tuples(n, r, i);
        for j in 0..n {
            let mut acc = 0.0;
            for t in &tuples {
                lower[..r].copy_from_slice(t);
                lower[r] = i;
                for (perm, &sg) in perms.iter().zip(&signs) {
                    if lower[perm[r]] != j {
                        continue;
                    }
                    let mut prod = sg;
                    for k in 0..r {
                        prod *= a[(lower[perm[k]], lower[k])];
                    }
                    acc += prod;
                }
            }
            out[(i, j)] = sign(r) * acc / factorial;
        }
    }
    Ok(out)
}

/// `S_r(A_i)`: symmetric function of the spectrum with `λ_i` removed.
pub fn restricted_elem_sym(eigenvalues: &[f64], i: usize, r: usize) -> f64 {
    let rest: Vec<f64> = eigenvalues
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, &v)| v)
        .collect();
    elem_sym_all(&rest).get(r).copied().unwrap_or(0.0)
}

/// Residuals of the four trace identities for one index `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceResidualRow {
    pub r: usize,
    /// `|tr P_r - (-1)^r (n-r) S_r|`
    pub tr_p: f64,
    /// `|tr(A P_r) + b_r H_{r+1}|`
    pub tr_ap: f64,
    /// `|tr(A^2 P_r) - (-1)^r (S_1 S_{r+1} - (r+2) S_{r+2})|`
    pub tr_a2p: f64,
    /// max over i of `|S_r(A_i) - (S_r - λ_i S_{r-1}(A_i))|`
    pub restricted: f64,
    /// max over i of `|P_r e_i - (-1)^r S_r(A_i) e_i|`; `None` for clustered spectra.
    pub eigenvector: Option<f64>,
}

impl TraceResidualRow {
    pub fn max(&self) -> f64 {
        [self.tr_p, self.tr_ap, self.tr_a2p, self.restricted, self.eigenvector.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceResiduals {
    pub rows: Vec<TraceResidualRow>,
    pub scale: f64,
}

impl TraceResiduals {
    pub fn max(&self) -> f64 {
        self.rows.iter().map(TraceResidualRow::max).fold(0.0, f64::max)
    }
}

/// Left-hand sides from the Newton matrices, right-hand sides from the pack.
pub fn trace_identity_residuals(sample: &ShapeSample) -> TraceResiduals {
    let n = sample.dim();
    let a = sample.matrix();
    let a2 = a * a;
    let seq = newton_seq(sample);
    let pack = curvature_pack(sample);
    let lam = sample.eigenvalues();
    let vecs = sample.eigenvectors();
    let check_vectors = sample.min_eigen_gap() >= DEGENERATE_GAP;

    let rows = (0..=n)
        .map(|r| {
            let p = seq.get(r);
            let b_r = if r < n { pack.b[r] } else { 0.0 };
            let tr_p = (p.trace() - sign(r) * (n - r) as f64 * pack.s[r]).abs();
            let tr_ap = ((a * p).trace() + b_r * pack.h_at(r + 1)).abs();
            let rhs = sign(r) * (pack.s[1] * pack.s_at(r + 1) - (r + 2) as f64 * pack.s_at(r + 2));
            let tr_a2p = ((&a2 * p).trace() - rhs).abs();

            let restricted = (0..n)
                .map(|i| {
                    let lhs = restricted_elem_sym(lam, i, r);
                    let prev = if r == 0 { 0.0 } else { restricted_elem_sym(lam, i, r - 1) };
                    (lhs - (pack.s[r] - lam[i] * prev)).abs()
                })
                .fold(0.0, f64::max);

            let eigenvector = check_vectors.then(|| {
                (0..n)
                    .map(|i| {
                        let e = vecs.column(i);
                        let expect = e * (sign(r) * restricted_elem_sym(lam, i, r));
                        (p * e - expect).amax()
                    })
                    .fold(0.0, f64::max)
            });

            TraceResidualRow {
                r,
                tr_p,
                tr_ap,
                tr_a2p,
                restricted,
                eigenvector,
            }
        })
        .collect();
    TraceResiduals {
        rows,
        scale: sample.tolerance_scale(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Sum over all r-subsets, no recurrence.
    fn brute_elem_sym(values: &[f64], r: usize) -> f64 {
        let n = values.len();
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == r)
            .map(|m| {
                (0..n)
                    .filter(|k| m & (1 << k) != 0)
                    .map(|k| values[k])
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn elem_sym_examples() {
        assert_eq!(brute_elem_sym(&[1.0, 2.0, 3.0], 2), 11.0);
        assert_eq!(elem_sym(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(elem_sym(&[4.0, -1.0], 0).unwrap(), 1.0);
        let l = 1.7;
        assert_abs_diff_eq!(elem_sym(&[l; 4], 3).unwrap(), 4.0 * l * l * l, epsilon = 1e-12);
        assert!(matches!(elem_sym(&[1.0, 2.0], 3), Err(Error::Domain(_))));
    }

    #[test]
    fn elem_sym_matches_subset_sum() {
        let v = [0.3, -1.2, 2.5, 0.7, -0.4];
        for r in 0..=5 {
            assert_abs_diff_eq!(elem_sym(&v, r).unwrap(), brute_elem_sym(&v, r), epsilon = 1e-12);
        }
    }

    #[test]
    fn pack_umbilic_minus_one() {
        let p = curvature_pack(&ShapeSample::from_diagonal(&[-1.0, -1.0]).unwrap());
        assert_abs_diff_eq!(p.s[1], -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.s[2], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.h[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.h[2], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pack_diag_one_two() {
        let p = curvature_pack(&ShapeSample::from_diagonal(&[1.0, 2.0]).unwrap());
        assert_abs_diff_eq!(p.s[1], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.s[2], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.h[1], -1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p.h[2], 2.0, epsilon = 1e-14);
        // diag(1,4) * diag(-2,-1) has trace -6.
        assert_abs_diff_eq!(p.tr_a2p[1], -6.0, epsilon = 1e-14);
        assert_eq!(p.b, vec![2.0, 2.0]);
    }

    #[test]
    fn b_coefficient_two_forms_agree() {
        for n in 1..=8 {
            for r in 0..n {
                assert_eq!(b_coefficient(n, r), (r + 1) as f64 * binomial(n, r + 1));
            }
        }
    }

    #[test]
    fn newton_small_cases() {
        let s = ShapeSample::from_diagonal(&[1.0, 2.0]).unwrap();
        let seq = newton_seq(&s);
        let p1 = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -1.0]);
        assert_abs_diff_eq!(seq.get(1), &p1, epsilon = 1e-14);
        assert!(seq.get(2).amax() < 1e-14);
        assert_abs_diff_eq!(&newton_reilly(&s, 1).unwrap(), &p1, epsilon = 1e-14);

        let zero = ShapeSample::new(DMatrix::zeros(3, 3)).unwrap();
        let seq = newton_seq(&zero);
        assert_eq!(seq.get(0), &DMatrix::<f64>::identity(3, 3));
        for r in 1..=3 {
            assert_eq!(seq.get(r).amax(), 0.0);
        }
        let res = trace_identity_residuals(&zero);
        assert_eq!(res.max(), 0.0);
    }

    #[test]
    fn reilly_r_zero_is_identity() {
        let s = ShapeSample::new(DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -2.0])).unwrap();
        assert_eq!(newton_reilly(&s, 0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn reilly_capacity() {
        let s = ShapeSample::new(DMatrix::identity(7, 7)).unwrap();
        assert!(matches!(newton_reilly(&s, 1), Err(Error::Capacity(_))));
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(ShapeSample::new(m), Err(Error::InvalidSample(_))));
    }

    #[test]
    fn diag_trace_identities() {
        let res = trace_identity_residuals(&ShapeSample::from_diagonal(&[1.0, 2.0]).unwrap());
        assert!(res.max() < 1e-12, "{res:?}");
    }

    #[test]
    fn umbilic_mean_curvatures_exact() {
        let l = -0.6;
        let s = ShapeSample::from_diagonal(&[l, l, l]).unwrap();
        let p = curvature_pack(&s);
        for r in 0..=3 {
            assert_abs_diff_eq!(p.h[r], (-l).powi(r as i32), epsilon = 1e-14);
        }
    }

    #[test]
    fn permutation_signs() {
        assert_eq!(permutation_sign(&[0, 1, 2]), 1.0);
        assert_eq!(permutation_sign(&[1, 0, 2]), -1.0);
        assert_eq!(permutation_sign(&[1, 2, 0]), 1.0);
        assert_eq!(permutations(4).len(), 24);
    }
}
