//! Vertical variations `u_t = u + t·w` and the functionals along them.
//!
//! A vertical variation keeps every surface a graph, so each `u_t` goes
//! through the same embedding code as the base. The normal speed is
//! `f = w cosh θ`; the rest of `w ∂_s` is tangential and shows up in the
//! pointwise evolution of `S_{r+1}` as the transport term
//! `w <∂_s^⊤, ∇S_{r+1}>`.
//!
//! Time derivatives are central differences on the stencil `{±h_t, ±2h_t}`
//! (fourth order), repeated with `h_t/2` and Richardson-extrapolated.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{coordinate_partials, dirichlet_form, lr_divergence_form, lr_trace_form};
use crate::curvalg::{b_coefficient, CurvaturePack};
use crate::error::{Error, Result};
use crate::grid::FiberGrid;
use crate::numerics::compensated_sum;
use crate::spacetime::GRWModel;
use crate::surface::{check_len, embed_graph, GraphFunction, SurfaceGeometry};

pub const DEFAULT_TIME_STEP: f64 = 1e-2;

fn check_r(n: usize, r: usize) -> Result<()> {
    if r < n {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "r = {r} outside 0..={}; the r-area is defined up to n - 1",
            n - 1
        )))
    }
}

/// Constant `c_r` of the first variation of `𝒜_r`.
pub fn cr_constant(n: usize, r: usize, c: f64) -> Result<f64> {
    check_r(n, r)?;
    if r % 2 == 0 {
        return Ok(0.0);
    }
    let mut cr = n as f64 * c;
    let mut k = 3;
    while k <= r {
        cr *= -c * (n - k + 1) as f64 / (k - 1) as f64;
        k += 2;
    }
    Ok(cr)
}

/// Integrand `F_r(S_1, .., S_r)` of the r-area.
pub fn f_r(n: usize, r: usize, c: f64, pack: &CurvaturePack) -> Result<f64> {
    check_r(n, r)?;
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut f = vec![0.0; r + 1];
    for k in 0..=r {
        f[k] = match k {
            0 => 1.0,
            1 => -pack.s_at(1),
            _ => sign(k) * pack.s_at(k) - c * (n - k + 1) as f64 / (k - 1) as f64 * f[k - 2],
        };
    }
    Ok(f[r])
}

/// `𝒜_r = ∫ F_r dM`.
pub fn r_area(geom: &SurfaceGeometry, r: usize) -> Result<f64> {
    let c = geom.model.constant_curvature()?;
    let n = geom.n();
    let integrand = geom
        .nodes
        .iter()
        .map(|node| f_r(n, r, c, &node.pack))
        .collect::<Result<Vec<_>>>()?;
    geom.integrate(&integrand)
}

/// `c tr(P_r) - tr(A^2 P_r)` per node.
pub fn jacobi_potential(geom: &SurfaceGeometry, r: usize) -> Result<Vec<f64>> {
    let c = geom.model.constant_curvature()?;
    check_r(geom.n(), r)?;
    Ok(geom.field(|n| c * n.pack.tr_p[r] - n.pack.tr_a2p[r]))
}

/// Base graph, vertical speed and the initial normal speed.
#[derive(Debug, Clone)]
pub struct VariationSpec {
    pub model: Arc<GRWModel>,
    pub grid: Arc<FiberGrid>,
    pub base: GraphFunction,
    /// `u_t = u + t·w`.
    pub w: Vec<f64>,
    /// `f0 = w cosh θ(0)`.
    pub f0: Vec<f64>,
    pub h_t: f64,
}

impl VariationSpec {
    /// Variation with prescribed normal speed `f0`; `w = f0 / cosh θ`.
    pub fn from_normal_speed(base: &SurfaceGeometry, f0: Vec<f64>, h_t: f64) -> Result<Self> {
        check_len(&base.grid, f0.len())?;
        let w = f0.iter().zip(&base.nodes).map(|(f, n)| f / n.cosh_theta).collect();
        Self::build(base, w, f0, h_t)
    }

    /// Variation with prescribed vertical speed `w`.
    pub fn from_vertical_speed(base: &SurfaceGeometry, w: Vec<f64>, h_t: f64) -> Result<Self> {
        check_len(&base.grid, w.len())?;
        let f0 = w.iter().zip(&base.nodes).map(|(w, n)| w * n.cosh_theta).collect();
        Self::build(base, w, f0, h_t)
    }

    fn build(base: &SurfaceGeometry, w: Vec<f64>, f0: Vec<f64>, h_t: f64) -> Result<Self> {
        if !(h_t > 0.0 && h_t.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {h_t}")));
        }
        let spec = Self {
            model: base.model.clone(),
            grid: base.grid.clone(),
            base: base.graph(),
            w,
            f0,
            h_t,
        };
        for t in spec.stencil_times() {
            spec.graph_at(t).check_spacelike(&spec.model, &spec.grid)?;
        }
        Ok(spec)
    }

    /// Every time at which geometry is evaluated, ascending.
    pub fn stencil_times(&self) -> Vec<f64> {
        let h = self.h_t;
        vec![-2.0 * h, -h, -0.5 * h, 0.0, 0.5 * h, h, 2.0 * h]
    }

    pub fn graph_at(&self, t: f64) -> GraphFunction {
        GraphFunction::new(self.base.values.iter().zip(&self.w).map(|(u, w)| u + t * w).collect())
    }
}

/// Geometry of `u_t` with its normal speed `f(t) = w cosh θ(t)`.
#[derive(Debug, Clone)]
pub struct Evolved {
    pub t: f64,
    pub geom: SurfaceGeometry,
    pub f: Vec<f64>,
}

pub fn evolve(spec: &VariationSpec, t: f64) -> Result<Evolved> {
    let geom = embed_graph(spec.model.clone(), spec.grid.clone(), &spec.graph_at(t))?;
    let f = geom.nodes.iter().zip(&spec.w).map(|(n, w)| w * n.cosh_theta).collect();
    Ok(Evolved { t, geom, f })
}

// Five-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// `𝒱(t)`: signed spacetime volume between the base and `u_t`,
/// `Σ_nodes ω_k ∫_{u_k}^{u_k + t w_k} φ(s)^n ds` with fiber weights `ω_k`.
pub fn balance_of_volume(spec: &VariationSpec, t: f64) -> Result<f64> {
    let n = spec.model.n as i32;
    let weights = spec.grid.fiber_weights();
    let column = |u: f64, w: f64| {
        let (mid, half) = (u + 0.5 * t * w, 0.5 * t * w);
        half * GL_NODES
            .iter()
            .zip(&GL_WEIGHTS)
            .map(|(x, a)| a * spec.model.phi(mid + half * x).powi(n))
            .sum::<f64>()
    };
    Ok(compensated_sum(
        spec.base
            .values
            .iter()
            .zip(&spec.w)
            .zip(weights)
            .map(|((u, w), omega)| omega * column(*u, *w)),
    ))
}

/// Central first derivative at 0 from samples at `-2h, -h, h, 2h`.
fn d1(m2: f64, m1: f64, p1: f64, p2: f64, h: f64) -> f64 {
    (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
}

/// Central second derivative at 0 from samples at `-2h..2h`.
fn d2(m2: f64, m1: f64, z: f64, p1: f64, p2: f64, h: f64) -> f64 {
    (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h)
}

/// A time derivative at the coarse step, the half step, and extrapolated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derivative {
    pub coarse: f64,
    pub fine: f64,
    pub value: f64,
}

impl Derivative {
    fn new(coarse: f64, fine: f64) -> Self {
        Self {
            coarse,
            fine,
            value: (16.0 * fine - coarse) / 15.0,
        }
    }
}

/// Values on [`VariationSpec::stencil_times`] order:
/// `[-2h, -h, -h/2, 0, h/2, h, 2h]`.
fn first_derivative(v: &[f64], h: f64) -> Derivative {
    Derivative::new(d1(v[0], v[1], v[5], v[6], h), d1(v[1], v[2], v[4], v[5], 0.5 * h))
}

fn second_derivative(v: &[f64], h: f64) -> Derivative {
    Derivative::new(
        d2(v[0], v[1], v[3], v[5], v[6], h),
        d2(v[1], v[2], v[3], v[4], v[5], 0.5 * h),
    )
}

fn evolve_stencil(spec: &VariationSpec) -> Result<Vec<Evolved>> {
    spec.stencil_times().into_par_iter().map(|t| evolve(spec, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeRateReport {
    /// `d𝒱/dt(0)` by finite differences.
    pub fd: Derivative,
    /// `∫ f0 dM`.
    pub integral: f64,
    pub error: f64,
}

/// Compares `d𝒱/dt(0)` with `∫ f0 dM`.
pub fn volume_rate_check(spec: &VariationSpec, base: &SurfaceGeometry) -> Result<VolumeRateReport> {
    let v = spec
        .stencil_times()
        .iter()
        .map(|&t| balance_of_volume(spec, t))
        .collect::<Result<Vec<_>>>()?;
    let fd = first_derivative(&v, spec.h_t);
    let integral = base.integrate(&spec.f0)?;
    Ok(VolumeRateReport {
        fd,
        integral,
        error: (fd.value - integral).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstVariationReport {
    pub r: usize,
    /// `d𝒜_r/dt(0)` by finite differences.
    pub fd: Derivative,
    /// `∫[(-1)^{r+1}(r+1)S_{r+1} + c_r] f0 dM`.
    pub formula: f64,
    pub error: f64,
    /// `∂S_{r+1}/∂t` per node by finite differences.
    pub evolution_fd: Vec<f64>,
    /// Right-hand side of the evolution law per node.
    pub evolution_formula: Vec<f64>,
    /// The transport part `w <∂_s^⊤, ∇S_{r+1}>` of the right-hand side.
    pub transport: Vec<f64>,
    pub evolution_max_residual: f64,
}

pub fn first_variation_check(spec: &VariationSpec, r: usize) -> Result<FirstVariationReport> {
    let c = spec.model.constant_curvature()?;
    let n = spec.model.n;
    check_r(n, r)?;
    let stencil = evolve_stencil(spec)?;
    let base = &stencil[3].geom;

    let areas = stencil
        .iter()
        .map(|e| r_area(&e.geom, r))
        .collect::<Result<Vec<_>>>()?;
    let fd = first_derivative(&areas, spec.h_t);
    let sign = if r % 2 == 0 { -1.0 } else { 1.0 };
    let cr = cr_constant(n, r, c)?;
    let integrand: Vec<f64> = base
        .nodes
        .iter()
        .zip(&spec.f0)
        .map(|(node, f)| (sign * (r + 1) as f64 * node.pack.s_at(r + 1) + cr) * f)
        .collect();
    let formula = base.integrate(&integrand)?;

    let s_series: Vec<Vec<f64>> = stencil.iter().map(|e| e.geom.s_field(r + 1)).collect();
    let evolution_fd: Vec<f64> = (0..base.len())
        .map(|k| {
            let v: Vec<f64> = s_series.iter().map(|s| s[k]).collect();
            first_derivative(&v, spec.h_t).value
        })
        .collect();
    let lf = lr_trace_form(base, r, &spec.f0)?;
    let ds = coordinate_partials(base, &s_series[3])?;
    let transport: Vec<f64> = base
        .nodes
        .iter()
        .zip(&ds)
        .zip(&spec.w)
        .map(|((node, d), w)| w * node.time_tangent.dot(d))
        .collect();
    let evolution_formula: Vec<f64> = (0..base.len())
        .map(|k| {
            let node = &base.nodes[k];
            let f = spec.f0[k];
            sign * (lf[k] + c * node.pack.tr_p[r] * f - node.pack.tr_a2p[r] * f) + transport[k]
        })
        .collect();
    let evolution_max_residual = evolution_fd
        .iter()
        .zip(&evolution_formula)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(FirstVariationReport {
        r,
        fd,
        formula,
        error: (fd.value - formula).abs(),
        evolution_fd,
        evolution_formula,
        transport,
        evolution_max_residual,
    })
}

/// `𝒜_r`, `𝒱` and `𝒥_r = 𝒜_r - λ𝒱` on the stencil.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalSeries {
    pub r: usize,
    pub times: Vec<f64>,
    pub area_r: Vec<f64>,
    pub volume: Vec<f64>,
    pub jacobi: Vec<f64>,
    pub c_r: f64,
    /// `H̄_{r+1}(0) = ∫ H_{r+1} dM / 𝒜_0(0)`.
    pub mean_h: f64,
    pub lambda: f64,
    pub jacobi_first: Derivative,
    pub jacobi_second: Derivative,
}

pub fn jacobi_series(spec: &VariationSpec, r: usize) -> Result<FunctionalSeries> {
    let stencil = evolve_stencil(spec)?;
    series_from(spec, r, &stencil)
}

fn series_from(spec: &VariationSpec, r: usize, stencil: &[Evolved]) -> Result<FunctionalSeries> {
    let c = spec.model.constant_curvature()?;
    let n = spec.model.n;
    let c_r = cr_constant(n, r, c)?;
    let base = &stencil[3].geom;
    let mean_h = base.integrate(&base.h_field(r + 1))? / base.total_area;
    let lambda = c_r + b_coefficient(n, r) * mean_h;
    let times = spec.stencil_times();
    let area_r = stencil
        .iter()
        .map(|e| r_area(&e.geom, r))
        .collect::<Result<Vec<_>>>()?;
    let volume = times
        .iter()
        .map(|&t| balance_of_volume(spec, t))
        .collect::<Result<Vec<_>>>()?;
    let jacobi: Vec<f64> = area_r.iter().zip(&volume).map(|(a, v)| a - lambda * v).collect();
    Ok(FunctionalSeries {
        r,
        jacobi_first: first_derivative(&jacobi, spec.h_t),
        jacobi_second: second_derivative(&jacobi, spec.h_t),
        times,
        area_r,
        volume,
        jacobi,
        c_r,
        mean_h,
        lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondVariationReport {
    pub r: usize,
    /// `𝒥_r''(0)` by finite differences.
    pub fd: Derivative,
    /// `(r+1)[-B_r(f0, f0) + ∫(c trP_r - trA²P_r) f0² dM]`.
    pub bilinear: f64,
    /// `(r+1)∫[L_r f0 + (c trP_r - trA²P_r) f0] f0 dM`, divergence form.
    pub operator: f64,
    pub error: f64,
    /// Largest `|H_{r+1} - H̄_{r+1}|` on the base.
    pub h_deviation: f64,
    pub series: FunctionalSeries,
}

pub fn second_variation_check(spec: &VariationSpec, r: usize) -> Result<SecondVariationReport> {
    let c = spec.model.constant_curvature()?;
    check_r(spec.model.n, r)?;
    let stencil = evolve_stencil(spec)?;
    let series = series_from(spec, r, &stencil)?;
    let base = &stencil[3].geom;
    let h = base.grid.h();
    let h_deviation = base
        .h_field(r + 1)
        .iter()
        .map(|v| (v - series.mean_h).abs())
        .fold(0.0, f64::max);
    if !(h_deviation < 10.0 * h * h) {
        return Err(Error::Precondition(format!(
            "H_{} varies by {h_deviation:.3e} on the base, above 10 h^2 = {:.3e}",
            r + 1,
            10.0 * h * h
        )));
    }
    let f = &spec.f0;
    let weight = (r + 1) as f64;
    let pot: Vec<f64> = base.field(|n| c * n.pack.tr_p[r] - n.pack.tr_a2p[r]);
    let pot_ff: Vec<f64> = pot.iter().zip(f).map(|(p, f)| p * f * f).collect();
    let bilinear = weight * (-dirichlet_form(base, r, f, f)? + base.integrate(&pot_ff)?);
    let lf = lr_divergence_form(base, r, f)?;
    let op_integrand: Vec<f64> = lf.iter().zip(&pot_ff).zip(f).map(|((l, p), f)| l * f + p).collect();
    let operator = weight * base.integrate(&op_integrand)?;
    Ok(SecondVariationReport {
        r,
        fd: series.jacobi_second,
        bilinear,
        operator,
        error: (series.jacobi_second.value - bilinear).abs(),
        h_deviation,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::spacetime::{make_de_sitter, make_static_cylinder};
    use std::f64::consts::PI;

    #[test]
    fn cr_values() {
        assert_eq!(cr_constant(3, 1, 1.0).unwrap(), 3.0);
        assert_eq!(cr_constant(5, 2, 0.7).unwrap(), 0.0);
        assert_eq!(cr_constant(4, 3, 1.0).unwrap(), -4.0);
        assert!(cr_constant(2, 2, 1.0).is_err());
    }

    #[test]
    fn derivative_stencils_are_exact_on_quartics() {
        let h = 0.1;
        let p = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t + 0.5 * t.powi(3) + 0.25 * t.powi(4);
        let v: Vec<f64> = [-2.0 * h, -h, -0.5 * h, 0.0, 0.5 * h, h, 2.0 * h].iter().map(|&t| p(t)).collect();
        assert!((first_derivative(&v, h).value - 2.0).abs() < 1e-12);
        assert!((second_derivative(&v, h).value + 6.0).abs() < 1e-10);
    }

    #[test]
    fn cylinder_volume_of_odd_speed_vanishes() {
        let model = Arc::new(make_static_cylinder(2).unwrap());
        let grid = Arc::new(FiberGrid::new(GridSpec::torus(32, 32)).unwrap());
        let base = embed_graph(model, grid.clone(), &GraphFunction::constant(&grid, 0.0)).unwrap();
        let f0 = grid.params().iter().map(|p| p[0].sin()).collect();
        let spec = VariationSpec::from_normal_speed(&base, f0, DEFAULT_TIME_STEP).unwrap();
        assert_eq!(balance_of_volume(&spec, 0.0).unwrap(), 0.0);
        let rep = volume_rate_check(&spec, &base).unwrap();
        assert!(rep.fd.value.abs() < 1e-10 && rep.integral.abs() < 1e-10);
        let moved = evolve(&spec, 0.5).unwrap();
        assert!((moved.geom.nodes[8].u - 0.5 * grid.param(8)[0].sin()).abs() < 1e-15);
    }

    #[test]
    fn de_sitter_slice_areas() {
        let model = Arc::new(make_de_sitter(2).unwrap());
        let grid = Arc::new(FiberGrid::new(GridSpec::sphere(64, 128)).unwrap());
        let base = embed_graph(model, grid.clone(), &GraphFunction::constant(&grid, 2f64.ln())).unwrap();
        assert!((r_area(&base, 0).unwrap() - 6.25 * PI).abs() < 0.02);
        assert!((r_area(&base, 1).unwrap() - 7.5 * PI).abs() < 0.02);
        assert!(r_area(&base, 2).is_err());
    }
}
