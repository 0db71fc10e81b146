//! Spacelike graphs `s = u(p)` over the fiber and their discrete geometry.
//!
//! Both supported ambients sit in flat Minkowski space `L^4` (three
//! spacelike coordinates, the last one timelike):
//!
//! * de Sitter, as the hyperquadric `<p, p> = 1`, with the graph node at
//!   `(cosh u · q, sinh u)` for `q` on the unit sphere;
//! * the static cylinder `-R × T^2`, as `(x, y, 0, u)` on the universal cover.
//!
//! Tangents and second derivatives of the embedding come from central
//! differences of node positions in grid coordinates. The future unit normal
//! is the part of `∂_s` orthogonal to the tangents (and, for de Sitter, to
//! the position vector), the second fundamental form is `h_ij = <N, X_ij>`
//! and the shape operator is `A = g^{-1} h`, which makes a slice report
//! `A = -(φ'/φ) I`.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::curvalg::{curvature_pack, newton_seq, CurvaturePack, ShapeSample};
use crate::error::{Error, Result};
use crate::grid::{FiberGrid, GridKind};
use crate::numerics::compensated_sum;
use crate::spacetime::{GRWModel, ModelKind};

/// Required gap between the fiber slope of a graph and `φ(u)`.
pub const SPACELIKE_MARGIN: f64 = 1e-6;

pub type Vec4 = [f64; 4];

/// Minkowski product, signature `(+, +, +, -)`.
pub fn lorentz(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] - a[3] * b[3]
}

fn axpy(a: f64, x: &Vec4, y: &Vec4) -> Vec4 {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2], a * x[3] + y[3]]
}

fn scale(a: f64, x: &Vec4) -> Vec4 {
    [a * x[0], a * x[1], a * x[2], a * x[3]]
}

fn sub(x: &Vec4, y: &Vec4) -> Vec4 {
    axpy(-1.0, y, x)
}

/// Node values of a graph over the fiber.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphFunction {
    pub values: Vec<f64>,
}

impl GraphFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &FiberGrid, s0: f64) -> Self {
        Self::new(vec![s0; grid.len()])
    }

    /// Reads `node,u` rows, each node of `grid` exactly once, in any order.
    /// A first row whose node field is not an integer is taken as a header.
    pub fn read_csv<R: Read>(reader: R, grid: &FiberGrid) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = vec![f64::NAN; grid.len()];
        let mut seen = vec![false; grid.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Domain(format!("graph table: {e}")))?;
            let bad = |what: &str| Error::Domain(format!("graph table line {}: {what}", line + 1));
            if rec.len() != 2 {
                return Err(bad(&format!("expected 2 fields, found {}", rec.len())));
            }
            let Ok(node) = rec[0].parse::<usize>() else {
                if line == 0 {
                    continue;
                }
                return Err(bad(&format!("node index {:?} is not an integer", &rec[0])));
            };
            let u: f64 = rec[1].parse().map_err(|_| bad(&format!("u value {:?} is not a number", &rec[1])))?;
            if node >= grid.len() {
                return Err(bad(&format!("node {node} outside a grid of {} nodes", grid.len())));
            }
            if !u.is_finite() {
                return Err(bad("u is not finite"));
            }
            if std::mem::replace(&mut seen[node], true) {
                return Err(bad(&format!("node {node} listed twice")));
            }
            values[node] = u;
        }
        let missing = seen.iter().filter(|s| !**s).count();
        if missing > 0 {
            let first = seen.iter().position(|s| !s).unwrap_or(0);
            return Err(Error::Domain(format!("graph table misses {missing} node(s), first: {first}")));
        }
        Ok(Self::new(values))
    }

    pub fn read_csv_path(path: &Path, grid: &FiberGrid) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
        Self::read_csv(file, grid).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    /// Largest `|u - mean(u)|`.
    pub fn oscillation(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).abs()).fold(0.0, f64::max)
    }

    /// Nodes where `|∇̂u|_ĝ >= φ(u) - SPACELIKE_MARGIN`, using central
    /// differences for the fiber gradient.
    pub fn spacelike_violations(&self, model: &GRWModel, grid: &FiberGrid) -> Result<Vec<usize>> {
        check_len(grid, self.values.len())?;
        let partials = grid.partials(&self.values);
        Ok((0..grid.len())
            .filter(|&k| {
                let g = grid.fiber_metric_diag(grid.param(k));
                let du = partials[k];
                let slope = (du[0] * du[0] / g[0] + du[1] * du[1] / g[1]).sqrt();
                !(slope < model.phi(self.values[k]) - SPACELIKE_MARGIN)
            })
            .collect())
    }

    pub fn check_spacelike(&self, model: &GRWModel, grid: &FiberGrid) -> Result<()> {
        let bad = self.spacelike_violations(model, grid)?;
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::NotSpacelike { nodes: bad })
        }
    }
}

pub(crate) fn check_len(grid: &FiberGrid, got: usize) -> Result<()> {
    if got == grid.len() {
        Ok(())
    } else {
        Err(Error::FieldLength {
            expected: grid.len(),
            got,
        })
    }
}

/// Geometry at one node. Matrices indexed by grid coordinates unless the
/// field name says "frame".
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    pub u: f64,
    pub position: Vec4,
    pub tangents: [Vec4; 2],
    /// Induced metric `g_ij`.
    pub metric: Matrix2<f64>,
    pub metric_inv: Matrix2<f64>,
    pub sqrt_det: f64,
    /// Columns are an orthonormal frame in coordinate components.
    pub frame: Matrix2<f64>,
    pub normal: Vec4,
    pub cosh_theta: f64,
    /// `<V, N>` with `V = φ ∂_s`.
    pub eta: f64,
    /// Contravariant components of the tangential part of `∂_s`.
    pub time_tangent: Vector2<f64>,
    /// Second fundamental form `h_ij = <N, X_ij>`.
    pub second_form: Matrix2<f64>,
    /// Shape operator in the orthonormal frame.
    pub shape: ShapeSample,
    pub pack: CurvaturePack,
    /// `P_0..P_n` in the orthonormal frame.
    pub newton_frame: Vec<Matrix2<f64>>,
    /// `christoffel[l][(i, j)] = Γ^l_ij`.
    pub christoffel: [Matrix2<f64>; 2],
    /// `dM` quadrature weight.
    pub area_weight: f64,
}

impl NodeGeometry {
    /// `P_r` as a (1,1) tensor in coordinates: `E P E^{-1}`, `E^{-1} = E^T g`.
    pub fn newton_coord(&self, r: usize) -> Matrix2<f64> {
        self.frame * self.newton_frame[r] * self.frame.transpose() * self.metric
    }

    /// Symmetric `P_r g^{-1} = E P E^T`.
    pub fn newton_contravariant(&self, r: usize) -> Matrix2<f64> {
        self.frame * self.newton_frame[r] * self.frame.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub model: Arc<GRWModel>,
    pub grid: Arc<FiberGrid>,
    pub nodes: Vec<NodeGeometry>,
    pub total_area: f64,
}

fn embed(model: &GRWModel, grid: &FiberGrid, param: [f64; 2], s: f64) -> Vec4 {
    let q = grid.fiber_point(param);
    match model.kind {
        ModelKind::DeSitter => {
            let (c, sh) = (s.cosh(), s.sinh());
            [c * q[0], c * q[1], c * q[2], sh]
        }
        _ => [q[0], q[1], 0.0, s],
    }
}

/// `∂_s` at the point `(s, param)`.
fn time_direction(model: &GRWModel, grid: &FiberGrid, param: [f64; 2], s: f64) -> Vec4 {
    match model.kind {
        ModelKind::DeSitter => {
            let q = grid.fiber_point(param);
            let (c, sh) = (s.cosh(), s.sinh());
            [sh * q[0], sh * q[1], sh * q[2], c]
        }
        _ => [0.0, 0.0, 0.0, 1.0],
    }
}

/// Unit spacelike direction normal to the spacetime inside `L^4`.
fn ambient_normal(model: &GRWModel, position: &Vec4) -> Vec4 {
    match model.kind {
        ModelKind::DeSitter => *position,
        _ => [0.0, 0.0, 1.0, 0.0],
    }
}

/// Geodesic of the spacetime through `x` with unit timelike velocity `v`.
pub(crate) fn timelike_geodesic(model: &GRWModel, x: &Vec4, v: &Vec4, t: f64) -> Vec4 {
    match model.kind {
        ModelKind::DeSitter => axpy(t.sinh(), v, &scale(t.cosh(), x)),
        _ => axpy(t, v, x),
    }
}

/// Time coordinate `s` of an ambient point.
pub(crate) fn time_of(model: &GRWModel, x: &Vec4) -> f64 {
    match model.kind {
        ModelKind::DeSitter => x[3].asinh(),
        _ => x[3],
    }
}

fn check_supported(model: &GRWModel, grid: &FiberGrid) -> Result<()> {
    let ok = matches!(
        (model.kind, grid.kind()),
        (ModelKind::DeSitter, GridKind::Sphere) | (ModelKind::StaticCylinder, GridKind::Torus)
    );
    if !ok {
        return Err(Error::UnsupportedModel(format!(
            "{:?} model cannot be discretized on a {:?} grid",
            model.kind,
            grid.kind()
        )));
    }
    if model.n != 2 {
        return Err(Error::UnsupportedModel(format!(
            "grids discretize two-dimensional fibers, model has n = {}",
            model.n
        )));
    }
    Ok(())
}

fn node_geometry(model: &GRWModel, grid: &FiberGrid, u: &[f64], k: usize) -> Result<NodeGeometry> {
    let (d1, d2) = (grid.d1, grid.d2);
    let at = |di: isize, dj: isize| {
        let p = grid.stencil(k, di, dj);
        embed(model, grid, p.param, u[p.node])
    };
    let x = at(0, 0);
    let (xp0, xm0, x0p, x0m) = (at(1, 0), at(-1, 0), at(0, 1), at(0, -1));
    let x1 = scale(0.5 / d1, &sub(&xp0, &xm0));
    let x2 = scale(0.5 / d2, &sub(&x0p, &x0m));
    let two_x = scale(2.0, &x);
    let x11 = scale(1.0 / (d1 * d1), &sub(&axpy(1.0, &xp0, &xm0), &two_x));
    let x22 = scale(1.0 / (d2 * d2), &sub(&axpy(1.0, &x0p, &x0m), &two_x));
    let cross = sub(&sub(&at(1, 1), &at(1, -1)), &sub(&at(-1, 1), &at(-1, -1)));
    let x12 = scale(0.25 / (d1 * d2), &cross);

    let metric = Matrix2::new(
        lorentz(&x1, &x1),
        lorentz(&x1, &x2),
        lorentz(&x2, &x1),
        lorentz(&x2, &x2),
    );
    let det = metric.determinant();
    if !(det > 0.0 && metric[(0, 0)] > 0.0) {
        return Err(Error::NotSpacelike { nodes: vec![k] });
    }
    let metric_inv = Matrix2::new(metric[(1, 1)], -metric[(0, 1)], -metric[(1, 0)], metric[(0, 0)]) / det;
    let sqrt_det = det.sqrt();

    // Future normal: ∂_s minus its projection onto span{X_1, X_2, ν}.
    let param = grid.param(k);
    let t = time_direction(model, grid, param, u[k]);
    let nu = ambient_normal(model, &x);
    let span = [x1, x2, nu];
    let gram = Matrix3::from_fn(|a, b| lorentz(&span[a], &span[b]));
    let rhs = Vector3::from_fn(|a, _| lorentz(&t, &span[a]));
    let coeff = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Discretization(format!("degenerate tangent span at node {k}")))?;
    let mut n_raw = t;
    for (c, v) in coeff.iter().zip(&span) {
        n_raw = axpy(-c, v, &n_raw);
    }
    let nn = -lorentz(&n_raw, &n_raw);
    if !(nn > 0.0) {
        return Err(Error::NotSpacelike { nodes: vec![k] });
    }
    let normal = scale(1.0 / nn.sqrt(), &n_raw);
    let cosh_theta = -lorentz(&normal, &t);
    let eta = model.phi(u[k]) * lorentz(&t, &normal);
    let tau = Vector2::new(lorentz(&t, &x1), lorentz(&t, &x2));
    let time_tangent = metric_inv * tau;

    let second_form = Matrix2::new(
        lorentz(&normal, &x11),
        lorentz(&normal, &x12),
        lorentz(&normal, &x12),
        lorentz(&normal, &x22),
    );

    let g11 = metric[(0, 0)];
    let frame = Matrix2::new(
        1.0 / g11.sqrt(),
        -metric[(0, 1)] / g11 / (det / g11).sqrt(),
        0.0,
        1.0 / (det / g11).sqrt(),
    );
    let a_frame = frame.transpose() * second_form * frame;
    let a_frame = (a_frame + a_frame.transpose()) * 0.5;
    let shape = ShapeSample::new(DMatrix::from_fn(2, 2, |i, j| a_frame[(i, j)]))?;
    let pack = curvature_pack(&shape);
    let newton_frame = newton_seq(&shape)
        .p
        .iter()
        .map(|p| Matrix2::new(p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]))
        .collect();

    // Gauss formula: Γ_{k,ij} = <X_ij, X_k>.
    let lower = |xij: &Vec4| Vector2::new(lorentz(xij, &x1), lorentz(xij, &x2));
    let (l11, l12, l22) = (metric_inv * lower(&x11), metric_inv * lower(&x12), metric_inv * lower(&x22));
    let christoffel = [
        Matrix2::new(l11[0], l12[0], l12[0], l22[0]),
        Matrix2::new(l11[1], l12[1], l12[1], l22[1]),
    ];

    Ok(NodeGeometry {
        u: u[k],
        position: x,
        tangents: [x1, x2],
        metric,
        metric_inv,
        sqrt_det,
        frame,
        normal,
        cosh_theta,
        eta,
        time_tangent,
        second_form,
        shape,
        pack,
        newton_frame,
        christoffel,
        area_weight: sqrt_det * d1 * d2,
    })
}

/// Builds the discrete geometry of the graph `u`.
pub fn embed_graph(model: Arc<GRWModel>, grid: Arc<FiberGrid>, u: &GraphFunction) -> Result<SurfaceGeometry> {
    check_supported(&model, &grid)?;
    check_len(&grid, u.len())?;
    if let Some(k) = u.values.iter().position(|s| !model.contains(*s)) {
        return Err(Error::Domain(format!(
            "graph value {} at node {k} leaves the modeled interval",
            u.values[k]
        )));
    }
    u.check_spacelike(&model, &grid)?;
    let nodes = (0..grid.len())
        .into_par_iter()
        .map(|k| node_geometry(&model, &grid, &u.values, k))
        .collect::<Result<Vec<_>>>()?;
    let total_area = compensated_sum(nodes.iter().map(|n| n.area_weight));
    Ok(SurfaceGeometry {
        model,
        grid,
        nodes,
        total_area,
    })
}

/// Per-node curvature fields, indexed `[r][node]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureFields {
    pub s: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub tr_p: Vec<Vec<f64>>,
    pub tr_a2p: Vec<Vec<f64>>,
    /// `H_r φ''(u) - max{H_{r+1} φ'(u), 0}`, r = 0..n-1.
    pub margin: Vec<Vec<f64>>,
}

impl SurfaceGeometry {
    pub fn n(&self) -> usize {
        self.model.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn u(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.u).collect()
    }

    pub fn graph(&self) -> GraphFunction {
        GraphFunction::new(self.u())
    }

    pub fn field(&self, f: impl Fn(&NodeGeometry) -> f64) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    pub fn s_field(&self, r: usize) -> Vec<f64> {
        self.field(|n| n.pack.s_at(r))
    }

    pub fn h_field(&self, r: usize) -> Vec<f64> {
        self.field(|n| n.pack.h_at(r))
    }

    pub fn area_weights(&self) -> Vec<f64> {
        self.field(|n| n.area_weight)
    }

    /// `∫ field dM` by compensated summation in node order.
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        check_len(&self.grid, field.len())?;
        Ok(compensated_sum(
            field.iter().zip(&self.nodes).map(|(f, n)| f * n.area_weight),
        ))
    }

    /// Largest `|A - λ I|` entry over nodes.
    pub fn umbilic_deviation(&self, lambda: f64) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                let a = n.shape.matrix();
                (0..2)
                    .flat_map(|i| (0..2).map(move |j| (i, j)))
                    .map(|(i, j)| (a[(i, j)] - if i == j { lambda } else { 0.0 }).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn curvature_fields(&self) -> CurvatureFields {
        let n = self.n();
        let per_r = |get: &dyn Fn(&CurvaturePack, usize) -> f64| -> Vec<Vec<f64>> {
            (0..=n)
                .map(|r| self.nodes.iter().map(|node| get(&node.pack, r)).collect())
                .collect()
        };
        let margin = (0..n)
            .map(|r| {
                self.nodes
                    .iter()
                    .map(|node| {
                        let (d1, d2) = (self.model.dphi(node.u), self.model.ddphi(node.u));
                        node.pack.h_at(r) * d2 - (node.pack.h_at(r + 1) * d1).max(0.0)
                    })
                    .collect()
            })
            .collect();
        CurvatureFields {
            s: per_r(&|p, r| p.s[r]),
            h: per_r(&|p, r| p.h[r]),
            tr_p: per_r(&|p, r| p.tr_p[r]),
            tr_a2p: per_r(&|p, r| p.tr_a2p[r]),
            margin,
        }
    }
}

/// Free-function form of [`SurfaceGeometry::curvature_fields`].
pub fn pointwise_curvatures(geom: &SurfaceGeometry) -> CurvatureFields {
    geom.curvature_fields()
}

/// Free-function form of [`SurfaceGeometry::integrate`].
pub fn integrate(geom: &SurfaceGeometry, field: &[f64]) -> Result<f64> {
    geom.integrate(field)
}
