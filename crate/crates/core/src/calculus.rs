//! Tangential differential operators on a discrete surface.
//!
//! `L_r f = tr(P_r ∘ Hess f) = div(P_r ∇f)` has two discretizations here.
//! The trace form applies `P_r` to a finite-difference Hessian node by node.
//! The divergence form differentiates the vector field `Y = P_r ∇f` itself,
//! `div Y = ∂_i Y^i + Γ^i_{ik} Y^k`, so it only matches the trace form when
//! `P_r` is divergence free. Both use the same node-centred stencils and the
//! same connection, which keeps them second order up to the pole rows of a
//! sphere grid.
//!
//! The quadratic form `∫ <P_r ∇f, ∇f> dM` is assembled separately as a
//! symmetric stiffness matrix on the dual cells ([`stiffness`]); the
//! stability operator is built from it.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridKind;
use crate::numerics::{compensated_sum, SparseSym, TripletBuilder};
use crate::surface::{check_len, SurfaceGeometry};

/// Per-node vector in the coordinate basis.
pub type TangentField = Vec<Vector2<f64>>;

/// Per-node `(1,1)` tensor in the coordinate basis.
pub type OperatorField = Vec<Matrix2<f64>>;

fn check_r(geom: &SurfaceGeometry, r: usize) -> Result<()> {
    let n = geom.n();
    if r < n {
        Ok(())
    } else {
        Err(Error::Domain(format!("operator index r = {r} outside 0..={}", n - 1)))
    }
}

/// Central first differences in grid coordinates.
pub fn coordinate_partials(geom: &SurfaceGeometry, f: &[f64]) -> Result<Vec<Vector2<f64>>> {
    check_len(&geom.grid, f.len())?;
    Ok(geom.grid.partials(f).into_iter().map(Vector2::from).collect())
}

fn second_partials(geom: &SurfaceGeometry, f: &[f64], k: usize) -> Matrix2<f64> {
    let grid = &geom.grid;
    let v = |di, dj| f[grid.stencil(k, di, dj).node];
    let (d1, d2) = (grid.d1, grid.d2);
    let f0 = f[k];
    let f11 = (v(1, 0) - 2.0 * f0 + v(-1, 0)) / (d1 * d1);
    let f22 = (v(0, 1) - 2.0 * f0 + v(0, -1)) / (d2 * d2);
    let f12 = (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4.0 * d1 * d2);
    Matrix2::new(f11, f12, f12, f22)
}

/// `∇f = g^{-1} ∂f`.
pub fn gradient(geom: &SurfaceGeometry, f: &[f64]) -> Result<TangentField> {
    let d = coordinate_partials(geom, f)?;
    Ok(geom.nodes.iter().zip(d).map(|(n, d)| n.metric_inv * d).collect())
}

/// `|∇f|^2` per node.
pub fn gradient_norm_sq(geom: &SurfaceGeometry, f: &[f64]) -> Result<Vec<f64>> {
    let d = coordinate_partials(geom, f)?;
    Ok(geom.nodes.iter().zip(d).map(|(n, d)| d.dot(&(n.metric_inv * d))).collect())
}

/// Covariant Hessian with both indices down.
fn hessian_lower(geom: &SurfaceGeometry, f: &[f64], d: &[Vector2<f64>], k: usize) -> Matrix2<f64> {
    let gamma = &geom.nodes[k].christoffel;
    second_partials(geom, f, k) - gamma[0] * d[k][0] - gamma[1] * d[k][1]
}

/// `Hess f` as a `(1,1)` tensor, `g^{-1}(∂∂f - Γ ∂f)`.
pub fn hessian(geom: &SurfaceGeometry, f: &[f64]) -> Result<OperatorField> {
    let d = coordinate_partials(geom, f)?;
    Ok((0..geom.len())
        .into_par_iter()
        .map(|k| geom.nodes[k].metric_inv * hessian_lower(geom, f, &d, k))
        .collect())
}

/// `tr(P_r ∘ Hess f)` node by node.
pub fn lr_trace_form(geom: &SurfaceGeometry, r: usize, f: &[f64]) -> Result<Vec<f64>> {
    check_r(geom, r)?;
    let d = coordinate_partials(geom, f)?;
    Ok((0..geom.len())
        .into_par_iter()
        .map(|k| {
            let node = &geom.nodes[k];
            let hl = hessian_lower(geom, f, &d, k);
            (node.newton_contravariant(r) * hl).trace()
        })
        .collect())
}

/// Symmetric matrix `S` with `f^T S f ≈ ∫ <P_r ∇f, ∇f> dM`.
///
/// Built from the density `K = √det g · P_r g^{-1}`: two-point fluxes across
/// cell faces for the diagonal of `K`, corner-centred differences for the
/// mixed term. Faces and corners on a pole carry no flux on the sphere.
pub fn stiffness(geom: &SurfaceGeometry, r: usize) -> Result<SparseSym> {
    check_r(geom, r)?;
    let grid = &geom.grid;
    let (d1, d2) = (grid.d1, grid.d2);
    let n1 = grid.spec.n1;
    let k_density: Vec<Matrix2<f64>> = geom
        .nodes
        .iter()
        .map(|n| n.newton_contravariant(r) * n.sqrt_det)
        .collect();
    let mut b = TripletBuilder::new(grid.len());
    let couple = |b: &mut TripletBuilder, a: usize, c: usize, w: f64| {
        b.add(a, a, w);
        b.add(c, c, w);
        b.add(a, c, -w);
        b.add(c, a, -w);
    };
    for k in 0..grid.len() {
        let (i, _) = grid.ij(k);
        let right = grid.stencil(k, 0, 1).node;
        let w = 0.5 * (k_density[k][(1, 1)] + k_density[right][(1, 1)]) * d1 / d2;
        couple(&mut b, k, right, w);

        let pole_face = grid.kind() == GridKind::Sphere && i + 1 == n1;
        if pole_face {
            continue;
        }
        let down = grid.stencil(k, 1, 0).node;
        let w = 0.5 * (k_density[k][(0, 0)] + k_density[down][(0, 0)]) * d2 / d1;
        couple(&mut b, k, down, w);

        // Corner at (i + 1/2, j + 1/2) spanned by k, down, right, diag.
        let diag = grid.stencil(k, 1, 1).node;
        let quad = [k, down, right, diag];
        let k12 = 0.25 * quad.iter().map(|&q| k_density[q][(0, 1)]).sum::<f64>();
        let alpha = [-1.0, 1.0, -1.0, 1.0].map(|x| x / (2.0 * d1));
        let beta = [-1.0, -1.0, 1.0, 1.0].map(|x| x / (2.0 * d2));
        let w = k12 * d1 * d2;
        for a in 0..4 {
            for c in 0..4 {
                b.add(quad[a], quad[c], w * (alpha[a] * beta[c] + beta[a] * alpha[c]));
            }
        }
    }
    Ok(b.build())
}

/// `div(P_r ∇f)` from central differences of the field `P_r ∇f`.
pub fn lr_divergence_form(geom: &SurfaceGeometry, r: usize, f: &[f64]) -> Result<Vec<f64>> {
    check_r(geom, r)?;
    let d = coordinate_partials(geom, f)?;
    let y: Vec<Vector2<f64>> = geom
        .nodes
        .iter()
        .zip(&d)
        .map(|(n, d)| n.newton_contravariant(r) * d)
        .collect();
    Ok(divergence(geom, &y))
}

/// `div Y` for a contravariant node field.
pub fn divergence(geom: &SurfaceGeometry, y: &[Vector2<f64>]) -> Vec<f64> {
    let grid = &geom.grid;
    let (d1, d2) = (grid.d1, grid.d2);
    let n1 = grid.spec.n1 as isize;
    (0..geom.len())
        .into_par_iter()
        .map(|k| {
            let (i, _) = grid.ij(k);
            // Past a pole the θ direction reverses.
            let y1 = |di: isize| {
                let ii = i as isize + di;
                let flip = grid.kind() == GridKind::Sphere && (ii < 0 || ii >= n1);
                let v = y[grid.stencil(k, di, 0).node][0];
                if flip {
                    -v
                } else {
                    v
                }
            };
            let y2 = |dj: isize| y[grid.stencil(k, 0, dj).node][1];
            let gamma = &geom.nodes[k].christoffel;
            let contracted = Vector2::new(
                gamma[0][(0, 0)] + gamma[1][(1, 0)],
                gamma[0][(0, 1)] + gamma[1][(1, 1)],
            );
            (y1(1) - y1(-1)) / (2.0 * d1) + (y2(1) - y2(-1)) / (2.0 * d2) + contracted.dot(&y[k])
        })
        .collect()
}

/// `B_r(f, g) = ∫ <P_r ∇f, ∇g> dM` with central gradients and nodal quadrature.
pub fn dirichlet_form(geom: &SurfaceGeometry, r: usize, f: &[f64], g: &[f64]) -> Result<f64> {
    check_r(geom, r)?;
    let df = coordinate_partials(geom, f)?;
    let dg = coordinate_partials(geom, g)?;
    Ok(compensated_sum(geom.nodes.iter().enumerate().map(|(k, n)| {
        let p = n.newton_contravariant(r);
        0.5 * (df[k].dot(&(p * dg[k])) + dg[k].dot(&(p * df[k]))) * n.area_weight
    })))
}
