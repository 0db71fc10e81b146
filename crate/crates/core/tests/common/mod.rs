#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstab_core::families::Mode;
use rstab_core::grid::{FiberGrid, GridSpec};
use rstab_core::numerics::fitted_order;
use rstab_core::spacetime::{make_de_sitter, make_static_cylinder, GRWModel};
use rstab_core::surface::{embed_graph, GraphFunction, SurfaceGeometry};

pub const LN2: f64 = std::f64::consts::LN_2;

/// Errors this small are round-off, not truncation.
pub const EXACT: f64 = 1e-11;

pub fn de_sitter() -> Arc<GRWModel> {
    Arc::new(make_de_sitter(2).unwrap())
}

pub fn cylinder() -> Arc<GRWModel> {
    Arc::new(make_static_cylinder(2).unwrap())
}

pub fn sphere(n: usize) -> Arc<FiberGrid> {
    Arc::new(FiberGrid::new(GridSpec::sphere(n, 2 * n)).unwrap())
}

pub fn torus(n: usize) -> Arc<FiberGrid> {
    Arc::new(FiberGrid::new(GridSpec::torus(n, n)).unwrap())
}

pub fn graph(model: &Arc<GRWModel>, grid: &Arc<FiberGrid>, u: impl Fn([f64; 2]) -> f64) -> SurfaceGeometry {
    let values = grid.params().iter().map(|&p| u(p)).collect();
    embed_graph(model.clone(), grid.clone(), &GraphFunction::new(values)).unwrap()
}

pub fn sample(grid: &FiberGrid, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    grid.params().iter().map(|&p| f(p)).collect()
}

/// Axisymmetric perturbation of a slice; the lat-long grid resolves
/// these to second order everywhere, poles included.
pub fn ds_bump(s0: f64, eps: f64) -> impl Fn([f64; 2]) -> f64 {
    move |p| s0 + eps * p[0].cos()
}

pub fn cyl_bump(eps: f64) -> impl Fn([f64; 2]) -> f64 {
    move |p| eps * (p[0] + p[1]).sin() + 0.5 * eps * (2.0 * p[0]).cos()
}

/// Sphere modes used for random test fields. `|m| = 1` content is left
/// out: its angular derivatives are first order at the pole rows.
pub const SPHERE_MODES: [(usize, i64); 6] = [(1, 0), (2, 0), (2, 2), (3, 0), (3, -2), (4, 3)];

pub const TORUS_MODES: [(i64, i64); 5] = [(1, 0), (0, 1), (1, 1), (2, -1), (1, 2)];

/// Random combination of low modes, with a constant offset.
#[derive(Debug, Clone)]
pub struct RandomField {
    pub offset: f64,
    pub coeffs: Vec<f64>,
}

impl RandomField {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            offset: rng.random_range(-1.0..1.0),
            coeffs: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    pub fn on(&self, grid: &FiberGrid) -> Vec<f64> {
        let kind = grid.kind();
        grid.params()
            .iter()
            .map(|&p| {
                let modes: Vec<Mode> = match kind {
                    rstab_core::grid::GridKind::Sphere => SPHERE_MODES
                        .iter()
                        .map(|&(l, m)| Mode::Harmonic { l, m })
                        .collect(),
                    rstab_core::grid::GridKind::Torus => TORUS_MODES
                        .iter()
                        .map(|&(kx, ky)| Mode::Fourier { kx, ky })
                        .collect(),
                };
                self.offset
                    + modes
                        .iter()
                        .zip(&self.coeffs)
                        .map(|(m, c)| c * m.eval(kind, p).unwrap())
                        .sum::<f64>()
            })
            .collect()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Second order: fitted slope in `[lo, hi]`, or every error at round-off.
pub fn assert_order(what: &str, h: &[f64], err: &[f64], lo: f64, hi: f64) {
    if err.iter().all(|e| *e < EXACT) {
        return;
    }
    let p = fitted_order(h, err).unwrap_or(f64::NAN);
    assert!(
        p >= lo && p <= hi,
        "{what}: order {p:.3} outside [{lo}, {hi}], errors {err:?}"
    );
}

pub fn assert_second_order(what: &str, h: &[f64], err: &[f64]) {
    assert_order(what, h, err, 1.7, 2.3);
}
