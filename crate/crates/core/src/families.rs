//! Named analytic families of graphs and initial normal speeds.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FiberGrid, GridKind};
use crate::surface::GraphFunction;

/// Perturbation shape on the fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Real spherical harmonic `P_l^{|m|}(cos θ) · cos(mφ)` (`sin(|m|φ)` for
    /// negative `m`), unnormalized, without the Condon-Shortley phase.
    Harmonic { l: usize, m: i64 },
    /// `sin(kx·x + ky·y)` on the torus.
    Fourier { kx: i64, ky: i64 },
}

/// Associated Legendre `P_l^m(x)`, `m >= 0`, no Condon-Shortley phase.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let somx2 = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2 * ll - 1) as f64 * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

impl Mode {
    pub fn eval(&self, kind: GridKind, param: [f64; 2]) -> Result<f64> {
        match (self, kind) {
            (Mode::Harmonic { l, m }, GridKind::Sphere) => {
                let am = m.unsigned_abs() as usize;
                if am > *l {
                    return Err(Error::Domain(format!("harmonic order |m| = {am} exceeds degree {l}")));
                }
                let radial = assoc_legendre(*l, am, param[0].cos());
                let angular = if *m >= 0 {
                    (*m as f64 * param[1]).cos()
                } else {
                    (am as f64 * param[1]).sin()
                };
                Ok(radial * angular)
            }
            (Mode::Fourier { kx, ky }, GridKind::Torus) => {
                Ok((*kx as f64 * param[0] + *ky as f64 * param[1]).sin())
            }
            (Mode::Harmonic { .. }, GridKind::Torus) => {
                Err(Error::Domain("spherical harmonics need a sphere grid".into()))
            }
            (Mode::Fourier { .. }, GridKind::Sphere) => {
                Err(Error::Domain("Fourier modes need a torus grid".into()))
            }
        }
    }

    pub fn sample(&self, grid: &FiberGrid) -> Result<Vec<f64>> {
        grid.params().iter().map(|&p| self.eval(grid.kind(), p)).collect()
    }
}

/// Graph families `s = u(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceFamily {
    Slice { s0: f64 },
    SlicePlus { s0: f64, eps: f64, mode: Mode },
    /// Node values read from a CSV file per resolution; `{n1}` and `{n2}` in
    /// the path are replaced by the grid size.
    Table { path: String },
}

impl SurfaceFamily {
    pub fn sample(&self, grid: &FiberGrid) -> Result<Vec<f64>> {
        match self {
            SurfaceFamily::Slice { s0 } => Ok(vec![*s0; grid.len()]),
            SurfaceFamily::SlicePlus { s0, eps, mode } => {
                Ok(mode.sample(grid)?.into_iter().map(|m| s0 + eps * m).collect())
            }
            SurfaceFamily::Table { path } => Ok(GraphFunction::read_csv_path(&expand(path, grid), grid)?.values),
        }
    }

    /// File a table family reads on `grid`.
    pub fn table_path(&self, grid: &FiberGrid) -> Option<PathBuf> {
        match self {
            SurfaceFamily::Table { path } => Some(expand(path, grid)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SurfaceFamily::Slice { s0 } => format!("slice({s0})"),
            SurfaceFamily::SlicePlus { s0, eps, mode } => {
                format!("slice_plus({s0}, {eps}, {})", mode_label(mode))
            }
            SurfaceFamily::Table { path } => format!("table({path})"),
        }
    }
}

fn expand(path: &str, grid: &FiberGrid) -> PathBuf {
    PathBuf::from(path.replace("{n1}", &grid.spec.n1.to_string()).replace("{n2}", &grid.spec.n2.to_string()))
}

pub fn mode_label(mode: &Mode) -> String {
    match mode {
        Mode::Harmonic { l, m } => format!("harmonic({l},{m})"),
        Mode::Fourier { kx, ky } => format!("fourier({kx},{ky})"),
    }
}

/// Initial normal speed `f0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationFamily {
    Const { a: f64 },
    Harmonic { l: usize, m: i64, a: f64 },
    Fourier { kx: i64, ky: i64, a: f64 },
}

impl VariationFamily {
    pub fn sample(&self, grid: &FiberGrid) -> Result<Vec<f64>> {
        match *self {
            VariationFamily::Const { a } => Ok(vec![a; grid.len()]),
            VariationFamily::Harmonic { l, m, a } => {
                Ok(Mode::Harmonic { l, m }.sample(grid)?.into_iter().map(|v| a * v).collect())
            }
            VariationFamily::Fourier { kx, ky, a } => {
                Ok(Mode::Fourier { kx, ky }.sample(grid)?.into_iter().map(|v| a * v).collect())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            VariationFamily::Const { a } => format!("const({a})"),
            VariationFamily::Harmonic { l, m, a } => format!("harmonic({l},{m},{a})"),
            VariationFamily::Fourier { kx, ky, a } => format!("fourier({kx},{ky},{a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn legendre_low_orders() {
        let x = 0.3_f64;
        assert!((assoc_legendre(1, 0, x) - x).abs() < 1e-15);
        assert!((assoc_legendre(1, 1, x) - (1.0 - x * x).sqrt()).abs() < 1e-15);
        assert!((assoc_legendre(2, 0, x) - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-15);
        assert!((assoc_legendre(2, 1, x) - 3.0 * x * (1.0 - x * x).sqrt()).abs() < 1e-15);
        assert!((assoc_legendre(2, 2, x) - 3.0 * (1.0 - x * x)).abs() < 1e-15);
        assert!((assoc_legendre(3, 0, x) - 0.5 * (5.0 * x.powi(3) - 3.0 * x)).abs() < 1e-15);
    }

    #[test]
    fn modes_need_matching_grid() {
        let torus = FiberGrid::new(GridSpec::torus(8, 8)).unwrap();
        assert!(Mode::Harmonic { l: 1, m: 0 }.sample(&torus).is_err());
        let v = VariationFamily::Fourier { kx: 1, ky: 0, a: 2.0 }.sample(&torus).unwrap();
        let (i, j) = (2, 5);
        let x = torus.param(torus.index(i, j))[0];
        assert!((v[torus.index(i, j)] - 2.0 * x.sin()).abs() < 1e-15);
    }
}
