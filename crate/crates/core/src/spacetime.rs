//! Warped-product spacetimes `-I ×_φ F^n` of constant sectional curvature.
//!
//! The closed conformal field is `V = φ(s) ∂_s` with conformal factor
//! `ψ = φ'`. A model has constant curvature `c` exactly when
//! `φ''/φ = c = ((φ')^2 + k)/φ^2`, `k` being the fiber curvature.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default time interval for experiments.
pub const DEFAULT_INTERVAL: (f64, f64) = (-3.0, 3.0);

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `φ` with analytic first and second derivatives.
#[derive(Clone)]
pub struct WarpingFunction {
    name: String,
    phi: ScalarFn,
    dphi: ScalarFn,
    ddphi: ScalarFn,
}

impl fmt::Debug for WarpingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpingFunction").field("name", &self.name).finish()
    }
}

impl WarpingFunction {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            dphi: Arc::new(dphi),
            ddphi: Arc::new(ddphi),
        }
    }

    pub fn cosh() -> Self {
        Self::new("cosh", f64::cosh, f64::sinh, f64::cosh)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("const({value})"), move |_| value, |_| 0.0, |_| 0.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn phi(&self, s: f64) -> f64 {
        (self.phi)(s)
    }

    pub fn dphi(&self, s: f64) -> f64 {
        (self.dphi)(s)
    }

    pub fn ddphi(&self, s: f64) -> f64 {
        (self.ddphi)(s)
    }

    /// Largest disagreement between the supplied derivatives and 4th-order
    /// central differences of `φ` (resp. `φ'`) over `samples`.
    pub fn derivative_self_check(&self, samples: &[f64], step: f64) -> f64 {
        let d4 = |f: &dyn Fn(f64) -> f64, s: f64| {
            (-f(s + 2.0 * step) + 8.0 * f(s + step) - 8.0 * f(s - step) + f(s - 2.0 * step))
                / (12.0 * step)
        };
        samples
            .iter()
            .map(|&s| {
                let e1 = (d4(&|x| self.phi(x), s) - self.dphi(s)).abs();
                let e2 = (d4(&|x| self.dphi(x), s) - self.ddphi(s)).abs();
                e1.max(e2)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    /// Unit round sphere, `k = 1`.
    Sphere,
    /// Flat square torus of side `2π`, `k = 0`.
    Torus,
}

impl FiberKind {
    pub fn curvature(self) -> f64 {
        match self {
            FiberKind::Sphere => 1.0,
            FiberKind::Torus => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientCurvature {
    Constant(f64),
    Nonconstant,
}

/// Which flat realization the discretization may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Hyperquadric `<p,p> = 1` in Minkowski space, `φ = cosh`.
    DeSitter,
    /// Flat product `-R × T^n`, `φ ≡ 1`.
    StaticCylinder,
    /// Analytic warping without an embedding; ODE checks only.
    Custom,
}

#[derive(Debug, Clone)]
pub struct GRWModel {
    pub kind: ModelKind,
    pub n: usize,
    pub fiber: FiberKind,
    pub warping: WarpingFunction,
    pub curvature: AmbientCurvature,
    pub interval: (f64, f64),
}

/// Geometry of the slice `{s0} × F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceData {
    pub s0: f64,
    /// `-φ'(s0)/φ(s0)`
    pub umbilicity: f64,
    /// `H_0..H_n`
    pub h: Vec<f64>,
    pub eta: f64,
    pub psi: f64,
    pub n_psi: f64,
    /// `φ(s0)^n`
    pub area_factor: f64,
}

pub fn make_de_sitter(n: usize) -> Result<GRWModel> {
    if n < 2 {
        return Err(Error::Domain(format!("de Sitter model needs n >= 2, got {n}")));
    }
    Ok(GRWModel {
        kind: ModelKind::DeSitter,
        n,
        fiber: FiberKind::Sphere,
        warping: WarpingFunction::cosh(),
        curvature: AmbientCurvature::Constant(1.0),
        interval: DEFAULT_INTERVAL,
    })
}

pub fn make_static_cylinder(n: usize) -> Result<GRWModel> {
    if n < 1 {
        return Err(Error::Domain("static cylinder needs n >= 1".into()));
    }
    Ok(GRWModel {
        kind: ModelKind::StaticCylinder,
        n,
        fiber: FiberKind::Torus,
        warping: WarpingFunction::constant(1.0),
        curvature: AmbientCurvature::Constant(0.0),
        interval: DEFAULT_INTERVAL,
    })
}

impl GRWModel {
    /// A model from an arbitrary warping function, for ODE diagnostics.
    pub fn custom(
        n: usize,
        fiber: FiberKind,
        warping: WarpingFunction,
        curvature: AmbientCurvature,
    ) -> Self {
        Self {
            kind: ModelKind::Custom,
            n,
            fiber,
            warping,
            curvature,
            interval: DEFAULT_INTERVAL,
        }
    }

    pub fn with_interval(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
        }
        self.interval = (lo, hi);
        Ok(self)
    }

    pub fn fiber_curvature(&self) -> f64 {
        self.fiber.curvature()
    }

    pub fn constant_curvature(&self) -> Result<f64> {
        match self.curvature {
            AmbientCurvature::Constant(c) => Ok(c),
            AmbientCurvature::Nonconstant => Err(Error::UnsupportedModel(
                "ambient curvature is not constant".into(),
            )),
        }
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.interval.0 && s <= self.interval.1
    }

    fn check_in_interval(&self, s: f64) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "s = {s} outside the modeled interval [{}, {}]",
                self.interval.0, self.interval.1
            )))
        }
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.warping.phi(s)
    }

    pub fn dphi(&self, s: f64) -> f64 {
        self.warping.dphi(s)
    }

    pub fn ddphi(&self, s: f64) -> f64 {
        self.warping.ddphi(s)
    }

    /// `(φ''/φ - c, ((φ')^2 + k)/φ^2 - c)`.
    pub fn curvature_residuals(&self, s: f64) -> Result<(f64, f64)> {
        let c = self.constant_curvature()?;
        let (p, dp, ddp) = (self.phi(s), self.dphi(s), self.ddphi(s));
        let k = self.fiber_curvature();
        Ok((ddp / p - c, (dp * dp + k) / (p * p) - c))
    }

    pub fn slice_data(&self, s0: f64) -> Result<SliceData> {
        self.check_in_interval(s0)?;
        let (p, dp, ddp) = (self.phi(s0), self.dphi(s0), self.ddphi(s0));
        let ratio = dp / p;
        Ok(SliceData {
            s0,
            umbilicity: -ratio,
            h: (0..=self.n).map(|r| ratio.powi(r as i32)).collect(),
            eta: -p,
            psi: dp,
            // cosh θ = 1 on a slice
            n_psi: ddp,
            area_factor: p.powi(self.n as i32),
        })
    }
}

/// Free-function form of [`GRWModel::curvature_residuals`].
pub fn curvature_residuals(model: &GRWModel, s: f64) -> Result<(f64, f64)> {
    model.curvature_residuals(s)
}

/// Free-function form of [`GRWModel::slice_data`].
pub fn slice_data(model: &GRWModel, s0: f64) -> Result<SliceData> {
    model.slice_data(s0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn de_sitter_ode() {
        let m = make_de_sitter(2).unwrap();
        let (a, b) = m.curvature_residuals(0.7).unwrap();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        let (a, b) = m.curvature_residuals(-1.3).unwrap();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        assert!(make_de_sitter(1).is_err());
    }

    #[test]
    fn de_sitter_slices() {
        let m = make_de_sitter(2).unwrap();
        let eq = m.slice_data(0.0).unwrap();
        assert_eq!(eq.umbilicity, 0.0);
        assert_eq!(eq.h[1], 0.0);
        assert_eq!(eq.h[2], 0.0);
        assert_eq!(eq.eta, -1.0);

        let d = m.slice_data(2f64.ln()).unwrap();
        assert_abs_diff_eq!(d.umbilicity, -0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(d.h[1], 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(d.h[2], 0.36, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eta, -1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(d.psi, 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(d.n_psi, 1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(d.area_factor, 1.5625, epsilon = 1e-14);
        assert!(m.slice_data(4.0).is_err());
    }

    #[test]
    fn cylinder() {
        let m = make_static_cylinder(2).unwrap();
        assert_eq!(m.curvature_residuals(5.0).unwrap(), (0.0, 0.0));
        let d = m.slice_data(0.0).unwrap();
        assert_eq!(d.umbilicity, 0.0);
        assert_eq!(d.eta, -1.0);
        assert_eq!(d.psi, 0.0);
        assert!(d.h[1..].iter().all(|&h| h == 0.0));
    }

    #[test]
    fn perturbed_warping_is_detected() {
        let w = WarpingFunction::new(
            "cosh+0.01s^2",
            |s: f64| s.cosh() + 0.01 * s * s,
            |s: f64| s.sinh() + 0.02 * s,
            |s: f64| s.cosh() + 0.02,
        );
        let m = GRWModel::custom(2, FiberKind::Sphere, w, AmbientCurvature::Constant(1.0));
        let (a, b) = m.curvature_residuals(1.0).unwrap();
        assert!(a.abs() > 1e-3 || b.abs() > 1e-3, "{a} {b}");
        assert!(m.warping.derivative_self_check(&[0.0, 0.5, 1.0], 1e-3) < 1e-9);
    }

    #[test]
    fn nonconstant_is_unsupported() {
        let m = GRWModel::custom(
            2,
            FiberKind::Sphere,
            WarpingFunction::new("exp", f64::exp, f64::exp, f64::exp),
            AmbientCurvature::Nonconstant,
        );
        assert!(matches!(m.curvature_residuals(0.0), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let m = make_de_sitter(3).unwrap();
        let samples: Vec<f64> = (0..100).map(|i| -3.0 + 6.0 * i as f64 / 99.0).collect();
        assert!(m.warping.derivative_self_check(&samples, 1e-3) < 1e-9);
    }
}
