//! The strong r-stability form, its spectrum, the support-function
//! identity, and the rigidity probe for slices.
//!
//! In the node basis the form is
//! `Q_r(f) = (r+1) f^T (-S_r + diag(p_r dM)) f` with the stiffness `S_r` of
//! [`crate::calculus::stiffness`] and the potential `p_r = c trP_r - trA²P_r`.
//! Its spectrum is taken against the `dM`-weighted inner product, so
//! eigenvalues approximate those of `(r+1)(L_r + p_r)`.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{coordinate_partials, lr_divergence_form, stiffness};
use crate::curvalg::b_coefficient;
use crate::error::{Error, Result};
use crate::grid::FiberGrid;
use crate::numerics::{dot, gershgorin_upper, top_eigenpairs, EigenMethod, SparseSym, TripletBuilder};
use crate::spacetime::{GRWModel, ModelKind};
use crate::surface::{check_len, embed_graph, lorentz, time_of, timelike_geodesic, GraphFunction, SurfaceGeometry};
use crate::variation::jacobi_potential;

/// Nodes with `|φ'(u)|` below this count as zeros of `φ'`.
pub const PHI_PRIME_ZERO: f64 = 1e-8;
/// Largest fraction of `φ'` zeros for which the zero set is taken to have
/// empty interior.
pub const NONDEGENERATE_FRACTION: f64 = 0.01;
/// `max |u - mean(u)|` below which a graph counts as a slice.
pub const SLICE_TOLERANCE: f64 = 1e-8;

/// `max |H_{r+1}|` below which a surface counts as r-maximal: `10 h^2`.
pub fn maximal_tolerance(grid: &FiberGrid) -> f64 {
    10.0 * grid.h() * grid.h()
}

/// Grid tolerance `100 h^2` used for verdicts and classifications.
pub fn grid_tolerance(grid: &FiberGrid) -> f64 {
    100.0 * grid.h() * grid.h()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StronglyStable,
    Marginal,
    Unstable,
}

impl Verdict {
    /// Sign of the top eigenvalue against the tolerance band `[-tol, tol]`.
    pub fn classify(top: f64, tol: f64) -> Self {
        if top > tol {
            Verdict::Unstable
        } else if top < -tol {
            Verdict::StronglyStable
        } else {
            Verdict::Marginal
        }
    }
}

/// `Q_r` and the weights `dM` in the node basis.
#[derive(Debug, Clone)]
pub struct StabilityMatrix {
    pub r: usize,
    pub q: SparseSym,
    pub weights: Vec<f64>,
    /// Smallest eigenvalue of `P_r` over the nodes.
    pub min_newton_eigen: f64,
    pub potential_max: f64,
}

impl StabilityMatrix {
    pub fn form(&self, f: &[f64]) -> f64 {
        self.q.bilinear(f, f)
    }

    /// A bound `μ_max <= bound`, tight when `P_r` is semi-definite.
    pub fn eigen_upper_bound(&self) -> f64 {
        if self.min_newton_eigen >= 0.0 {
            (self.r + 1) as f64 * self.potential_max.max(0.0)
        } else {
            gershgorin_upper(&self.q, &self.weights)
        }
    }
}

pub fn stability_matrix(geom: &SurfaceGeometry, r: usize) -> Result<StabilityMatrix> {
    let s = stiffness(geom, r)?;
    let pot = jacobi_potential(geom, r)?;
    let weights = geom.area_weights();
    let diag: Vec<f64> = pot.iter().zip(&weights).map(|(p, w)| p * w).collect();
    let scale = (r + 1) as f64;
    let mut b = TripletBuilder::new(geom.len());
    for i in 0..geom.len() {
        for (j, v) in s.row(i) {
            b.add(i, j, -scale * v);
        }
        b.add(i, i, scale * diag[i]);
    }
    let min_newton_eigen = geom
        .nodes
        .iter()
        .map(|n| n.newton_frame[r].symmetric_eigenvalues().min())
        .fold(f64::INFINITY, f64::min);
    Ok(StabilityMatrix {
        r,
        q: b.build(),
        weights,
        min_newton_eigen,
        potential_max: pot.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `Q_r(f)`.
pub fn stability_form(geom: &SurfaceGeometry, r: usize, f: &[f64]) -> Result<f64> {
    check_len(&geom.grid, f.len())?;
    Ok(stability_matrix(geom, r)?.form(f))
}

/// Same form with `L_r` applied to `f` directly instead of assembled.
pub fn stability_form_operator(geom: &SurfaceGeometry, r: usize, f: &[f64]) -> Result<f64> {
    let lf = lr_divergence_form(geom, r, f)?;
    let pot = jacobi_potential(geom, r)?;
    let integrand: Vec<f64> = lf.iter().zip(&pot).zip(f).map(|((l, p), f)| (l + p * f) * f).collect();
    Ok((r + 1) as f64 * geom.integrate(&integrand)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub r: usize,
    /// Largest eigenvalues, descending.
    pub values: Vec<f64>,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    pub method: EigenMethod,
    pub converged: bool,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Top eigenvector when the verdict is unstable.
    #[serde(skip)]
    pub witness: Option<Vec<f64>>,
    /// `Q_r(witness)` for the dM-normalized witness.
    pub witness_value: Option<f64>,
    /// Largest relative asymmetry of the assembled matrix.
    pub asymmetry: f64,
}

impl Spectrum {
    pub fn top(&self) -> f64 {
        self.values[0]
    }
}

/// Top `k` eigenpairs of `Q_r` against `dM` and the resulting verdict.
pub fn stability_spectrum(geom: &SurfaceGeometry, r: usize, k: usize) -> Result<Spectrum> {
    let m = stability_matrix(geom, r)?;
    let eig = top_eigenpairs(&m.q, &m.weights, k.max(1), m.eigen_upper_bound())?;
    let tolerance = grid_tolerance(&geom.grid);
    let top = eig.values[0];
    let verdict = Verdict::classify(top, tolerance);
    if !eig.converged && verdict != Verdict::Unstable {
        // An unconverged Ritz value only bounds the top from below, which
        // settles instability but nothing else.
        return Err(Error::Eigensolve(format!(
            "spectrum did not converge; best lower bound {top:.4e} is inside the tolerance band"
        )));
    }
    let (witness, witness_value) = if verdict == Verdict::Unstable {
        let v = eig.vectors[0].clone();
        let value = m.form(&v);
        (Some(v), Some(value))
    } else {
        (None, None)
    };
    Ok(Spectrum {
        r,
        values: eig.values,
        vectors: eig.vectors,
        method: eig.method,
        converged: eig.converged,
        tolerance,
        verdict,
        witness,
        witness_value,
        asymmetry: m.q.asymmetry(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportIdentityReport {
    pub r: usize,
    /// `L_r η` in divergence form.
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_residual: f64,
    /// Largest gap between `φ''(u) cosh θ` and a finite difference of
    /// `φ'` along the normal geodesic.
    pub normal_derivative_check: f64,
}

/// Residual of
/// `L_r η = trA²P_r η - c trP_r η - b_r H_r N(φ') + b_r H_{r+1} φ' + b_r/(r+1) <V, ∇H_{r+1}>`.
pub fn support_identity_residual(geom: &SurfaceGeometry, r: usize) -> Result<SupportIdentityReport> {
    let c = geom.model.constant_curvature()?;
    let model = &geom.model;
    let n = geom.n();
    let eta = geom.field(|n| n.eta);
    let lhs = lr_divergence_form(geom, r, &eta)?;
    let b = b_coefficient(n, r);
    let dh = coordinate_partials(geom, &geom.h_field(r + 1))?;
    let rhs: Vec<f64> = geom
        .nodes
        .iter()
        .zip(&dh)
        .map(|(node, dh)| {
            let (phi, psi, dpsi) = (model.phi(node.u), model.dphi(node.u), model.ddphi(node.u));
            let n_psi = dpsi * node.cosh_theta;
            let v_grad_h = phi * node.time_tangent.dot(dh);
            node.pack.tr_a2p[r] * node.eta - c * node.pack.tr_p[r] * node.eta - b * node.pack.h_at(r) * n_psi
                + b * node.pack.h_at(r + 1) * psi
                + b / (r + 1) as f64 * v_grad_h
        })
        .collect();
    let residual: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(SupportIdentityReport {
        r,
        max_residual: residual.iter().map(|x| x.abs()).fold(0.0, f64::max),
        normal_derivative_check: normal_derivative_check(geom),
        lhs,
        rhs,
        residual,
    })
}

/// Compares `N(φ') = φ'' cosh θ` with a central difference of `φ'` along
/// the timelike geodesic leaving each node in direction `N`.
fn normal_derivative_check(geom: &SurfaceGeometry) -> f64 {
    let model = &geom.model;
    let eps = 1e-4;
    geom.nodes
        .iter()
        .map(|node| {
            let psi_at = |e: f64| {
                let p = timelike_geodesic(model, &node.position, &node.normal, e);
                model.dphi(time_of(model, &p))
            };
            let fd = (psi_at(eps) - psi_at(-eps)) / (2.0 * eps);
            (fd - model.ddphi(node.u) * node.cosh_theta).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisMargins {
    pub r: usize,
    /// `H_r φ''(u) - max{H_{r+1} φ'(u), 0}` per node.
    pub margin: Vec<f64>,
    pub min_margin: f64,
    /// Fraction of nodes with `|φ'(u)| < PHI_PRIME_ZERO`.
    pub phi_prime_zero_fraction: f64,
    /// de Sitter only: `H_r - max{H_{r+1}, 0}` per node.
    pub corollary_margin: Option<Vec<f64>>,
    pub corollary_min: Option<f64>,
    /// de Sitter only: fraction of nodes on the equator `s = 0`.
    pub equator_fraction: Option<f64>,
}

pub fn hypothesis_margins(geom: &SurfaceGeometry, r: usize) -> Result<HypothesisMargins> {
    let n = geom.n();
    if r >= n {
        return Err(Error::Domain(format!("r = {r} outside 0..={}", n - 1)));
    }
    let model = &geom.model;
    let margin: Vec<f64> = geom.field(|node| {
        node.pack.h_at(r) * model.ddphi(node.u) - (node.pack.h_at(r + 1) * model.dphi(node.u)).max(0.0)
    });
    let count = geom.len() as f64;
    let phi_prime_zero_fraction =
        geom.nodes.iter().filter(|node| model.dphi(node.u).abs() < PHI_PRIME_ZERO).count() as f64 / count;
    let (corollary_margin, corollary_min, equator_fraction) = if model.kind == ModelKind::DeSitter {
        let cm: Vec<f64> = geom.field(|node| node.pack.h_at(r) - node.pack.h_at(r + 1).max(0.0));
        let min = cm.iter().copied().fold(f64::INFINITY, f64::min);
        let eq = geom.nodes.iter().filter(|node| node.u.abs() < PHI_PRIME_ZERO).count() as f64 / count;
        (Some(cm), Some(min), Some(eq))
    } else {
        (None, None, None)
    };
    Ok(HypothesisMargins {
        r,
        min_margin: margin.iter().copied().fold(f64::INFINITY, f64::min),
        margin,
        phi_prime_zero_fraction,
        corollary_margin,
        corollary_min,
        equator_fraction,
    })
}

/// One surface of a probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub label: String,
    pub r: usize,
    pub is_slice: bool,
    pub is_r_maximal: bool,
    pub max_abs_h_next: f64,
    pub min_margin: f64,
    pub corollary_min: Option<f64>,
    pub phi_prime_zero_fraction: f64,
    pub hypothesis_holds: bool,
    pub nondegenerate: bool,
    pub top_eigenvalue: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub witness_value: Option<f64>,
    /// Hypotheses hold, `φ'` nondegenerate, neither slice nor r-maximal.
    pub covered: bool,
    /// A covered surface must be unstable.
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub consistent: bool,
}

/// Classifies one discretized surface and computes its verdict.
pub fn probe_surface(label: &str, geom: &SurfaceGeometry, r: usize) -> Result<ProbeRow> {
    let tol = grid_tolerance(&geom.grid);
    let is_slice = geom.graph().oscillation() < SLICE_TOLERANCE;
    let max_abs_h_next = geom.h_field(r + 1).iter().map(|h| h.abs()).fold(0.0, f64::max);
    let is_r_maximal = max_abs_h_next < maximal_tolerance(&geom.grid);
    let margins = hypothesis_margins(geom, r)?;
    let hypothesis_holds = margins.min_margin >= -tol;
    let nondegenerate = margins.phi_prime_zero_fraction <= NONDEGENERATE_FRACTION;
    let spectrum = stability_spectrum(geom, r, 3)?;
    let covered = hypothesis_holds && nondegenerate && !is_slice && !is_r_maximal;
    let consistent = !covered
        || (spectrum.verdict == Verdict::Unstable && spectrum.witness_value.is_some_and(|q| q > 0.0));
    Ok(ProbeRow {
        label: label.to_string(),
        r,
        is_slice,
        is_r_maximal,
        max_abs_h_next,
        min_margin: margins.min_margin,
        corollary_min: margins.corollary_min,
        phi_prime_zero_fraction: margins.phi_prime_zero_fraction,
        hypothesis_holds,
        nondegenerate,
        top_eigenvalue: spectrum.top(),
        tolerance: tol,
        verdict: spectrum.verdict,
        witness_value: spectrum.witness_value,
        covered,
        consistent,
    })
}

/// Runs [`probe_surface`] over labelled graphs on one grid.
pub fn theorem_probe(
    model: Arc<GRWModel>,
    grid: Arc<FiberGrid>,
    surfaces: &[(String, GraphFunction)],
    r: usize,
) -> Result<ProbeReport> {
    let rows = surfaces
        .iter()
        .map(|(label, u)| {
            let geom = embed_graph(model.clone(), grid.clone(), u)?;
            probe_surface(label, &geom, r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeReport {
        consistent: rows.iter().all(|row| row.consistent),
        rows,
    })
}

/// `<N, N> + 1` and tangency defects, for diagnostics.
pub fn normal_defect(geom: &SurfaceGeometry) -> f64 {
    geom.nodes
        .iter()
        .map(|n| {
            let unit = (lorentz(&n.normal, &n.normal) + 1.0).abs();
            let tangent = n.tangents.iter().map(|t| lorentz(&n.normal, t).abs()).fold(0.0, f64::max);
            unit.max(tangent)
        })
        .fold(0.0, f64::max)
}

/// `∫ f dM` normalized witness, `f^T W f = 1`.
pub fn normalize_witness(geom: &SurfaceGeometry, f: &[f64]) -> Vec<f64> {
    let w = geom.area_weights();
    let norm = dot(&f.iter().zip(&w).map(|(f, w)| f * w).collect::<Vec<_>>(), f).sqrt();
    f.iter().map(|x| x / norm).collect()
}
