//! Small numerical kernels shared by the geometry modules: compensated
//! summation, convergence-order fits, a symmetric sparse matrix, and the
//! eigensolvers behind the stability spectrum.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Least-squares slope of `log(err)` against `log(h)`.
///
/// Returns `None` with fewer than two usable points (non-positive entries are
/// dropped).
pub fn fitted_order(h: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Symmetric matrix in compressed-row form. Both triangles are stored.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Accumulates `(row, col, value)` contributions before compression.
#[derive(Debug, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseSym {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseSym {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .with_min_len(4096)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `x^T M y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    /// `a * self + diag(d)`.
    pub fn scaled_plus_diagonal(&self, a: f64, d: &[f64]) -> SparseSym {
        let mut b = TripletBuilder::new(self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                b.add(r, c, a * v);
            }
            b.add(r, r, d[r]);
        }
        b.build()
    }

    /// Largest `|M_ij - M_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let t = self.row(c).find(|&(cc, _)| cc == r).map_or(0.0, |(_, v)| v);
                worst = worst.max((v - t).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

/// Top eigenpairs (descending) of the pencil `Q v = μ W v` with `W` a
/// positive diagonal.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// W-orthonormal vectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    pub method: EigenMethod,
    /// False when the iteration limit was hit. The values are then Ritz
    /// values: lower bounds for the true top eigenvalues, with vectors that
    /// still attain them as Rayleigh quotients.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    ShiftInvertLanczos,
    Lanczos,
}

/// Dense route: explicit `W^{-1/2} Q W^{-1/2}` and a full symmetric eigensolve.
pub fn top_eigenpairs_dense(q: &SparseSym, w: &[f64], k: usize) -> Result<Eigenpairs> {
    let n = q.dim();
    let isw: Vec<f64> = w.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut s = q.to_dense();
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] *= isw[i] * isw[j];
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(s, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigensolve("dense symmetric eigensolve did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = k.min(n);
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order[..k]
        .iter()
        .map(|&i| (0..n).map(|r| eig.eigenvectors[(r, i)] * isw[r]).collect())
        .collect();
    Ok(Eigenpairs {
        values,
        vectors,
        method: EigenMethod::Dense,
        converged: true,
    })
}

/// Jacobi-preconditioned conjugate gradients. Fails on non-positive
/// curvature so callers can detect an indefinite operator.
fn pcg(a: &SparseSym, inv_diag: &[f64], b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Eigensolve("shifted operator is not positive definite".into()));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        if norm(&r) <= rel_tol * bnorm {
            return Ok(x);
        }
        z = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::Eigensolve(format!("conjugate gradients stalled after {max_iter} iterations")))
}

type RitzPairs = (Vec<f64>, Vec<Vec<f64>>, bool);

/// Lanczos with full reorthogonalization on a symmetric operator; returns
/// the `k` largest Ritz pairs once their residuals drop below
/// `tol * spectral_scale`, or the last ones (flagged) at `max_iter`.
fn lanczos_top<F>(apply: F, n: usize, k: usize, max_iter: usize, tol: f64) -> Result<RitzPairs>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k = k.min(n);
    let max_iter = max_iter.min(n);
    // Deterministic start vector with no special symmetry.
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract()).collect();
    let q_norm = norm(&q);
    q.iter_mut().for_each(|x| *x /= q_norm);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for j in 0..max_iter {
        let mut w = apply(&basis[j])?;
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            let coeffs: Vec<f64> = basis.par_iter().map(|b| dot(&w, b)).collect();
            for (b, c) in basis.iter().zip(&coeffs) {
                w.iter_mut().zip(b).for_each(|(w, b)| *w -= c * b);
            }
        }
        let beta = norm(&w);

        let m = alphas.len();
        // An exhausted Krylov space is invariant: its Ritz pairs are exact.
        let exhausted = beta < 1e-12;
        let check = exhausted || (m >= k && (m % 5 == 0 || m == max_iter));
        if check {
            let t = DMatrix::from_fn(m, m, |a, b| {
                if a == b {
                    alphas[a]
                } else if a + 1 == b || b + 1 == a {
                    betas[a.min(b)]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let scale = eig.eigenvalues.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(1e-300);
            let kk = k.min(m);
            let converged = order[..kk]
                .iter()
                .all(|&i| (beta * eig.eigenvectors[(m - 1, i)]).abs() <= tol * scale);
            let values: Vec<f64> = order[..kk].iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors: Vec<Vec<f64>> = order[..kk]
                .iter()
                .map(|&i| {
                    let mut v = vec![0.0; n];
                    for (c, b) in basis.iter().enumerate().take(m) {
                        let y = eig.eigenvectors[(c, i)];
                        v.iter_mut().zip(b).for_each(|(v, b)| *v += y * b);
                    }
                    v
                })
                .collect();
            if converged || exhausted || m == max_iter {
                return Ok((values, vectors, converged || exhausted));
            }
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    Err(Error::Eigensolve(format!("Lanczos produced no Ritz pairs in {max_iter} steps")))
}

/// Gershgorin bound on the largest eigenvalue of `Q v = μ W v`.
pub fn gershgorin_upper(q: &SparseSym, w: &[f64]) -> f64 {
    (0..q.dim())
        .map(|i| {
            q.row(i)
                .map(|(j, v)| if i == j { v / w[i] } else { v.abs() / (w[i] * w[j]).sqrt() })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Top `k` eigenpairs of `Q v = μ W v`.
///
/// Small problems go through the dense solver. Larger ones use shift-invert
/// Lanczos with the shift above `upper_bound` (an a-priori bound on the top
/// eigenvalue) and fall back to plain Lanczos when the shifted operator turns
/// out indefinite.
pub fn top_eigenpairs(q: &SparseSym, w: &[f64], k: usize, upper_bound: f64) -> Result<Eigenpairs> {
    let n = q.dim();
    if n <= DENSE_LIMIT {
        return top_eigenpairs_dense(q, w, k);
    }
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let isw: Vec<f64> = sw.iter().map(|x| 1.0 / x).collect();

    let sigma = upper_bound + upper_bound.abs().max(1.0);
    // A_σ = σ W - Q
    let neg_q = q.scaled_plus_diagonal(-1.0, &w.iter().map(|w| sigma * w).collect::<Vec<_>>());
    let inv_diag: Vec<f64> = neg_q.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let shifted = lanczos_top(
        |x| {
            let rhs: Vec<f64> = x.iter().zip(&sw).map(|(x, s)| x * s).collect();
            let y = pcg(&neg_q, &inv_diag, &rhs, 1e-12, 20 * n)?;
            Ok(y.iter().zip(&sw).map(|(y, s)| y * s).collect())
        },
        n,
        k,
        300,
        1e-10,
    );
    match shifted {
        Ok((nus, zs, converged)) => {
            let values = nus.iter().map(|nu| sigma - 1.0 / nu).collect();
            let vectors = zs
                .into_iter()
                .map(|z| z.iter().zip(&isw).map(|(z, s)| z * s).collect())
                .collect();
            Ok(Eigenpairs {
                values,
                vectors,
                method: EigenMethod::ShiftInvertLanczos,
                converged,
            })
        }
        Err(_) => {
            let (values, zs, converged) = lanczos_top(
                |x| {
                    let xs: Vec<f64> = x.iter().zip(&isw).map(|(x, s)| x * s).collect();
                    let y = q.matvec(&xs);
                    Ok(y.iter().zip(&isw).map(|(y, s)| y * s).collect())
                },
                n,
                k,
                3000,
                1e-9,
            )?;
            let vectors = zs
                .into_iter()
                .map(|z| z.iter().zip(&isw).map(|(z, s)| z * s).collect())
                .collect();
            Ok(Eigenpairs {
                values,
                vectors,
                method: EigenMethod::Lanczos,
                converged,
            })
        }
    }
}

/// Problems up to this size use the dense eigensolver.
pub const DENSE_LIMIT: usize = 600;
