mod common;

use std::f64::consts::PI;

use common::*;
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use rstab_core::calculus::*;
use rstab_core::surface::{embed_graph, GraphFunction};

const LEVELS: [usize; 3] = [16, 32, 64];

fn hs(grids: &[usize], sphere_grid: bool) -> Vec<f64> {
    grids
        .iter()
        .map(|&n| if sphere_grid { sphere(n).h() } else { torus(n).h() })
        .collect()
}

#[test]
fn slice_calibration_is_second_order() {
    let model = de_sitter();
    let (mut shape, mut area) = (Vec::new(), Vec::new());
    for n in LEVELS {
        let g = graph(&model, &sphere(n), |_| LN2);
        shape.push(g.umbilic_deviation(-0.6));
        area.push((g.total_area - 6.25 * PI).abs());
    }
    let h = hs(&LEVELS, true);
    assert_second_order("slice shape operator", &h, &shape);
    assert_second_order("slice area", &h, &area);
    assert!(shape[2] < 1e-3 && area[2] < 2e-2, "{shape:?} {area:?}");
}

/// Spacelike graph `t = u(x, y)` in flat `R^{2,1}`: `g = I - Du Du^T`,
/// `h = -D²u / sqrt(1 - |Du|^2)` for the future normal.
fn flat_graph_shape(du: Vector2<f64>, d2u: Matrix2<f64>) -> Matrix2<f64> {
    let g = Matrix2::identity() - du * du.transpose();
    let w = (1.0 - du.norm_squared()).sqrt();
    g.try_inverse().unwrap() * (-d2u / w)
}

#[test]
fn cylinder_graph_curvatures_match_closed_form() {
    let model = cylinder();
    let eps = 0.3;
    let levels = [16, 32, 64];
    let mut errs = Vec::new();
    for n in levels {
        let g = graph(&model, &torus(n), cyl_bump(eps));
        let mut err: f64 = 0.0;
        for (node, p) in g.nodes.iter().zip(g.grid.params()) {
            let (x, y) = (p[0], p[1]);
            let c = eps * (x + y).cos();
            let s = eps * (x + y).sin();
            let du = Vector2::new(c - eps * (2.0 * x).sin(), c);
            let d2u = Matrix2::new(-s - 2.0 * eps * (2.0 * x).cos(), -s, -s, -s);
            let a = flat_graph_shape(du, d2u);
            err = err.max((node.pack.s[1] - a.trace()).abs());
            err = err.max((node.pack.s[2] - a.determinant()).abs());
        }
        errs.push(err);
    }
    assert_second_order("flat graph curvatures", &hs(&levels, false), &errs);
}

#[test]
fn gauss_bonnet_on_de_sitter_graphs() {
    // Gauss equation: K = c - S_2, and the sphere has total curvature 4π.
    let model = de_sitter();
    let mut errs = Vec::new();
    for n in LEVELS {
        let g = graph(&model, &sphere(n), |p| 0.4 + 0.2 * p[0].cos() + 0.1 * (3.0 * p[0].cos().powi(2) - 1.0));
        let k: Vec<f64> = g.field(|node| 1.0 - node.pack.s[2]);
        errs.push((g.integrate(&k).unwrap() - 4.0 * PI).abs());
    }
    assert_second_order("Gauss-Bonnet", &hs(&LEVELS, true), &errs);
}

fn de_sitter_field(p: [f64; 2]) -> f64 {
    let (t, ph) = (p[0], p[1]);
    t.cos() + 0.5 * (3.0 * t.cos().powi(2) - 1.0) + 0.7 * t.sin().powi(2) * (2.0 * ph).cos()
}

fn torus_field(p: [f64; 2]) -> f64 {
    (p[0] + 2.0 * p[1]).sin() + 0.5 * p[0].cos()
}

fn trace_vs_divergence(sphere_grid: bool, r: usize) -> Vec<f64> {
    LEVELS
        .iter()
        .map(|&n| {
            let g = if sphere_grid {
                graph(&de_sitter(), &sphere(n), ds_bump(LN2, 0.1))
            } else {
                graph(&cylinder(), &torus(n), cyl_bump(0.2))
            };
            let f = if sphere_grid { sample(&g.grid, de_sitter_field) } else { sample(&g.grid, torus_field) };
            max_diff(&lr_trace_form(&g, r, &f).unwrap(), &lr_divergence_form(&g, r, &f).unwrap())
        })
        .collect()
}

#[test]
fn trace_and_divergence_forms_agree() {
    for r in 0..2 {
        let e = trace_vs_divergence(true, r);
        assert_second_order(&format!("de Sitter r = {r}"), &hs(&LEVELS, true), &e);
        let e = trace_vs_divergence(false, r);
        assert_second_order(&format!("cylinder r = {r}"), &hs(&LEVELS, false), &e);
    }
}

#[test]
fn integration_by_parts_residual() {
    let mut rng = rng(7);
    for trial in 0..5 {
        let (f, g) = (RandomField::draw(&mut rng), RandomField::draw(&mut rng));
        for sphere_grid in [true, false] {
            for r in 0..2 {
                // Torus fields carry |k|^2 = 5, so start one level finer.
                let levels = if sphere_grid { LEVELS } else { [32, 64, 128] };
                let errs: Vec<f64> = levels
                    .iter()
                    .map(|&n| {
                        let geom = if sphere_grid {
                            graph(&de_sitter(), &sphere(n), ds_bump(LN2, 0.1))
                        } else {
                            graph(&cylinder(), &torus(n), cyl_bump(0.2))
                        };
                        let (fv, gv) = (f.on(&geom.grid), g.on(&geom.grid));
                        let lf = lr_divergence_form(&geom, r, &fv).unwrap();
                        let prod: Vec<f64> = lf.iter().zip(&gv).map(|(a, b)| a * b).collect();
                        (geom.integrate(&prod).unwrap() + dirichlet_form(&geom, r, &fv, &gv).unwrap()).abs()
                    })
                    .collect();
                assert_second_order(
                    &format!("IBP trial {trial}, sphere {sphere_grid}, r = {r}"),
                    &hs(&levels, sphere_grid),
                    &errs,
                );
            }
        }
    }
}

#[test]
fn laplacian_of_first_harmonic_on_slice() {
    // On a slice of radius R = cosh s0, Δ cos θ = -2 cos θ / R².
    let model = de_sitter();
    let mut errs = Vec::new();
    for n in LEVELS {
        let g = graph(&model, &sphere(n), |_| LN2);
        let f = sample(&g.grid, |p| p[0].cos());
        let lf = lr_divergence_form(&g, 0, &f).unwrap();
        let exact: Vec<f64> = f.iter().map(|v| -2.0 * v / 1.5625).collect();
        errs.push(max_diff(&lf, &exact));
    }
    assert_second_order("slice Laplacian", &hs(&LEVELS, true), &errs);
}

#[test]
fn divergence_of_gradient_integrates_to_zero() {
    let g = graph(&de_sitter(), &sphere(32), ds_bump(0.2, 0.15));
    let f = sample(&g.grid, de_sitter_field);
    let lf = lr_divergence_form(&g, 1, &f).unwrap();
    let scale = g.integrate(&lf.iter().map(|x| x.abs()).collect::<Vec<_>>()).unwrap();
    assert!(g.integrate(&lf).unwrap().abs() < 1e-2 * scale);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn slices_are_umbilic(s0 in -1.5..1.5f64) {
        let g = graph(&de_sitter(), &sphere(16), |_| s0);
        let lambda = -s0.tanh();
        let h = g.grid.h();
        prop_assert!(g.umbilic_deviation(lambda) < 0.5 * h * h);
        let area = 4.0 * PI * s0.cosh().powi(2);
        prop_assert!((g.total_area - area).abs() < h * h * area);
    }

    #[test]
    fn operators_kill_constants(eps in -0.3..0.3f64, c in -5.0..5.0f64, r in 0usize..2) {
        for g in [
            graph(&de_sitter(), &sphere(12), ds_bump(0.3, eps)),
            graph(&cylinder(), &torus(12), cyl_bump(eps)),
        ] {
            let f = vec![c; g.len()];
            prop_assert!(max_abs(&lr_trace_form(&g, r, &f).unwrap()) < 1e-9);
            prop_assert!(max_abs(&lr_divergence_form(&g, r, &f).unwrap()) < 1e-9);
            prop_assert!(dirichlet_form(&g, r, &f, &f).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn stiffness_is_symmetric_and_annihilates_constants(eps in -0.3..0.3f64, r in 0usize..2) {
        let g = graph(&cylinder(), &torus(12), cyl_bump(eps));
        let s = stiffness(&g, r).unwrap();
        prop_assert!(s.asymmetry() < 1e-12);
        prop_assert!(max_abs(&s.matvec(&vec![1.0; g.len()])) < 1e-10);
    }

    #[test]
    fn translation_in_time_is_an_isometry_of_the_cylinder(shift in -1.0..1.0f64) {
        let grid = torus(16);
        let base = sample(&grid, cyl_bump(0.2));
        let moved: Vec<f64> = base.iter().map(|u| u + shift).collect();
        let a = embed_graph(cylinder(), grid.clone(), &GraphFunction::new(base)).unwrap();
        let b = embed_graph(cylinder(), grid.clone(), &GraphFunction::new(moved)).unwrap();
        prop_assert!(max_diff(&a.h_field(1), &b.h_field(1)) < 1e-9);
        prop_assert!((a.total_area - b.total_area).abs() < 1e-9);
    }
}
