//! Structured fiber grids.
//!
//! The sphere uses a cell-centred latitude-longitude layout: colatitudes
//! `θ_i = (i + 1/2) Δθ` never touch the poles, and a stencil that steps past
//! a pole lands on the antipodal column `j + N_φ/2` of the same ring. The
//! stencil keeps the unwrapped parameter so that analytic maps (the
//! embedding of the sphere in particular) extend smoothly across the pole.
//! The torus is periodic in both directions with side `2π`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spacetime::{FiberKind, GRWModel};

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Sphere,
    Torus,
}

impl GridKind {
    pub fn for_fiber(fiber: FiberKind) -> Self {
        match fiber {
            FiberKind::Sphere => GridKind::Sphere,
            FiberKind::Torus => GridKind::Torus,
        }
    }
}

/// Grid kind plus the node count along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub n1: usize,
    pub n2: usize,
}

impl GridSpec {
    pub fn sphere(n_theta: usize, n_phi: usize) -> Self {
        Self {
            kind: GridKind::Sphere,
            n1: n_theta,
            n2: n_phi,
        }
    }

    pub fn torus(nx: usize, ny: usize) -> Self {
        Self {
            kind: GridKind::Torus,
            n1: nx,
            n2: ny,
        }
    }
}

/// One point of a finite-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilPoint {
    /// Node holding the value at this point.
    pub node: usize,
    /// Unwrapped parameter coordinates of the point.
    pub param: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberGrid {
    pub spec: GridSpec,
    /// Parameter spacing along each axis.
    pub d1: f64,
    pub d2: f64,
    params: Vec<[f64; 2]>,
    fiber_weights: Vec<f64>,
}

impl FiberGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec { kind, n1, n2 } = spec;
        let smallest = n1.min(n2);
        if smallest < MIN_RESOLUTION {
            return Err(Error::ResolutionTooSmall {
                got: smallest,
                min: MIN_RESOLUTION,
            });
        }
        let (d1, d2) = match kind {
            GridKind::Sphere => {
                if n2 % 2 != 0 {
                    return Err(Error::Discretization(format!(
                        "pole closure needs an even longitude count, got {n2}"
                    )));
                }
                (PI / n1 as f64, 2.0 * PI / n2 as f64)
            }
            GridKind::Torus => (2.0 * PI / n1 as f64, 2.0 * PI / n2 as f64),
        };
        let mut params = Vec::with_capacity(n1 * n2);
        let mut fiber_weights = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                let p = match kind {
                    GridKind::Sphere => [(i as f64 + 0.5) * d1, j as f64 * d2],
                    GridKind::Torus => [i as f64 * d1, j as f64 * d2],
                };
                let density = match kind {
                    GridKind::Sphere => p[0].sin(),
                    GridKind::Torus => 1.0,
                };
                params.push(p);
                fiber_weights.push(density * d1 * d2);
            }
        }
        Ok(Self {
            spec,
            d1,
            d2,
            params,
            fiber_weights,
        })
    }

    /// Rebuilds a grid from stored node data, e.g. a cache file. The arrays
    /// must have one entry per node of `spec`.
    pub fn from_parts(spec: GridSpec, params: Vec<[f64; 2]>, fiber_weights: Vec<f64>) -> Result<Self> {
        let fresh = Self::new(spec)?;
        if params.len() != fresh.len() || fiber_weights.len() != fresh.len() {
            return Err(Error::FieldLength {
                expected: fresh.len(),
                got: params.len().min(fiber_weights.len()),
            });
        }
        Ok(Self {
            params,
            fiber_weights,
            ..fresh
        })
    }

    /// Sphere grid for `k = 1` fibers, torus for `k = 0`.
    pub fn for_model(model: &GRWModel, n1: usize, n2: usize) -> Result<Self> {
        Self::new(GridSpec {
            kind: GridKind::for_fiber(model.fiber),
            n1,
            n2,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.spec.kind
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Mesh spacing used in convergence fits and grid tolerances.
    pub fn h(&self) -> f64 {
        self.d1.max(self.d2)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.spec.n2 + j
    }

    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node / self.spec.n2, node % self.spec.n2)
    }

    pub fn param(&self, node: usize) -> [f64; 2] {
        self.params[node]
    }

    pub fn params(&self) -> &[[f64; 2]] {
        &self.params
    }

    /// Fiber volume element times the parameter cell, per node.
    pub fn fiber_weights(&self) -> &[f64] {
        &self.fiber_weights
    }

    pub fn cell_area(&self) -> f64 {
        self.d1 * self.d2
    }

    /// The point `(i + di, j + dj)` with pole and periodic closure.
    pub fn stencil(&self, node: usize, di: isize, dj: isize) -> StencilPoint {
        let (n1, n2) = (self.spec.n1 as isize, self.spec.n2 as isize);
        let (i, j) = self.ij(node);
        let (ii, jj) = (i as isize + di, j as isize + dj);
        match self.spec.kind {
            GridKind::Sphere => {
                let param = [(ii as f64 + 0.5) * self.d1, jj as f64 * self.d2];
                let (ri, shift) = if ii < 0 {
                    (-ii - 1, n2 / 2)
                } else if ii >= n1 {
                    (2 * n1 - 1 - ii, n2 / 2)
                } else {
                    (ii, 0)
                };
                let rj = (jj + shift).rem_euclid(n2);
                StencilPoint {
                    node: self.index(ri as usize, rj as usize),
                    param,
                }
            }
            GridKind::Torus => StencilPoint {
                node: self.index(ii.rem_euclid(n1) as usize, jj.rem_euclid(n2) as usize),
                param: [ii as f64 * self.d1, jj as f64 * self.d2],
            },
        }
    }

    /// Point of the fiber in its flat ambient: the unit sphere in `R^3`, or
    /// the universal cover `R^2` of the torus (third coordinate zero).
    pub fn fiber_point(&self, param: [f64; 2]) -> [f64; 3] {
        match self.spec.kind {
            GridKind::Sphere => {
                let (st, ct) = param[0].sin_cos();
                let (sp, cp) = param[1].sin_cos();
                [st * cp, st * sp, ct]
            }
            GridKind::Torus => [param[0], param[1], 0.0],
        }
    }

    /// Diagonal of the fiber metric in parameter coordinates.
    pub fn fiber_metric_diag(&self, param: [f64; 2]) -> [f64; 2] {
        match self.spec.kind {
            GridKind::Sphere => [1.0, param[0].sin().powi(2)],
            GridKind::Torus => [1.0, 1.0],
        }
    }

    /// Total fiber volume from the quadrature weights.
    pub fn fiber_volume(&self) -> f64 {
        crate::numerics::compensated_sum(self.fiber_weights.iter().copied())
    }

    /// Exact `|S^2| = 4π` or `|T^2| = 4π^2`.
    pub fn exact_fiber_volume(&self) -> f64 {
        match self.spec.kind {
            GridKind::Sphere => 4.0 * PI,
            GridKind::Torus => 4.0 * PI * PI,
        }
    }

    /// Central first differences of a node field, per node.
    pub fn partials(&self, f: &[f64]) -> Vec<[f64; 2]> {
        (0..self.len())
            .map(|k| {
                let v = |di, dj| f[self.stencil(k, di, dj).node];
                [
                    (v(1, 0) - v(-1, 0)) / (2.0 * self.d1),
                    (v(0, 1) - v(0, -1)) / (2.0 * self.d2),
                ]
            })
            .collect()
    }
}

/// Free-function form of [`FiberGrid::for_model`].
pub fn build_fiber_grid(model: &GRWModel, resolution: (usize, usize)) -> Result<FiberGrid> {
    FiberGrid::for_model(model, resolution.0, resolution.1)
}
