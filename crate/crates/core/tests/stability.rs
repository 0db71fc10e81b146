mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use rstab_core::stability::*;
use rstab_core::surface::GraphFunction;

const LEVELS: [usize; 3] = [16, 32, 64];

#[test]
fn constant_speed_form_on_slices() {
    // The potential is n(1 - tanh²) and dM = cosh² dS², so Q_0(1) = 2 · 4π.
    for s0 in [-0.5, 0.3, LN2] {
        let mut errs = Vec::new();
        let mut h = Vec::new();
        for n in LEVELS {
            let g = graph(&de_sitter(), &sphere(n), |_| s0);
            errs.push((stability_form(&g, 0, &vec![1.0; g.len()]).unwrap() - 8.0 * PI).abs());
            h.push(g.grid.h());
        }
        assert_second_order(&format!("Q_0(1) at s0 = {s0}"), &h, &errs);
    }
}

#[test]
fn assembled_and_operator_forms_agree() {
    let mut rng = rng(11);
    for _ in 0..3 {
        let f = RandomField::draw(&mut rng);
        for r in 0..2 {
            let mut errs = Vec::new();
            let mut h = Vec::new();
            for n in LEVELS {
                let g = graph(&de_sitter(), &sphere(n), ds_bump(0.4, 0.1));
                let fv = f.on(&g.grid);
                let m = stability_matrix(&g, r).unwrap();
                assert!(m.q.asymmetry() < 1e-10);
                errs.push((m.form(&fv) - stability_form_operator(&g, r, &fv).unwrap()).abs());
                h.push(g.grid.h());
            }
            assert_second_order(&format!("Q_{r} assembled vs operator"), &h, &errs);
        }
    }
}

#[test]
fn equator_spectrum_is_zero_for_r1() {
    let g = graph(&de_sitter(), &sphere(16), |_| 0.0);
    let sp = stability_spectrum(&g, 1, 3).unwrap();
    assert!(sp.values.iter().all(|v| v.abs() <= sp.tolerance));
    assert_eq!(sp.verdict, Verdict::Marginal);
    assert!(sp.witness_value.is_none());
}

#[test]
fn cylinder_slice_tops_out_on_constants() {
    let g = graph(&cylinder(), &torus(24), |_| 0.0);
    let sp = stability_spectrum(&g, 0, 2).unwrap();
    assert_eq!(sp.verdict, Verdict::Marginal);
    assert!(sp.top().abs() < 1e-9, "{}", sp.top());
    let v = &sp.vectors[0];
    let spread = v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max);
    assert!(spread < 1e-6 * v[0].abs());
}

#[test]
fn slice_spectrum_is_unstable_with_witness() {
    let g = graph(&de_sitter(), &sphere(32), |_| LN2);
    let sp = stability_spectrum(&g, 0, 3).unwrap();
    assert_eq!(sp.verdict, Verdict::Unstable);
    assert!(sp.witness_value.unwrap() > 0.0);
    assert!(sp.asymmetry < 1e-10);
    // Constants give Q_0(1)/∫1 = 8π / 6.25π.
    assert!(sp.top() >= 8.0 / 6.25 - 0.01, "{}", sp.top());
}

fn support_orders(u: impl Fn([f64; 2]) -> f64, sphere_grid: bool, r: usize) -> (Vec<f64>, Vec<f64>) {
    let mut errs = Vec::new();
    let mut h = Vec::new();
    for n in LEVELS {
        let g = if sphere_grid { graph(&de_sitter(), &sphere(n), &u) } else { graph(&cylinder(), &torus(n), &u) };
        errs.push(support_identity_residual(&g, r).unwrap().max_residual);
        h.push(g.grid.h());
    }
    (h, errs)
}

#[test]
fn support_identity_on_slices() {
    for r in 0..2 {
        let (h, e) = support_orders(|_| LN2, true, r);
        assert_second_order(&format!("de Sitter slice r = {r}"), &h, &e);
        assert!(e[2] < h[2] * h[2], "{e:?}");
        let (_, e) = support_orders(|_| 0.4, false, r);
        assert!(e.iter().all(|x| *x < EXACT), "cylinder slice r = {r}: {e:?}");
    }
}

#[test]
fn support_identity_on_perturbed_graphs() {
    for r in 0..2 {
        let (h, e) = support_orders(ds_bump(LN2, 0.05), true, r);
        assert_second_order(&format!("perturbed de Sitter r = {r}"), &h, &e);
        let (h, e) = support_orders(|p| LN2 + 0.05 * (3.0 * p[0].cos().powi(2) - 1.0), true, r);
        assert_second_order(&format!("second harmonic r = {r}"), &h, &e);
    }
    let g = graph(&de_sitter(), &sphere(16), ds_bump(LN2, 0.05));
    assert!(support_identity_residual(&g, 0).unwrap().normal_derivative_check < 1e-6);
}

#[test]
fn margins_on_slices_and_degenerate_models() {
    let g = graph(&de_sitter(), &sphere(16), |_| LN2);
    let m = hypothesis_margins(&g, 1).unwrap();
    // 0.6 · 1.25 - 0.36 · 0.75
    let h2 = g.grid.h().powi(2);
    assert!(m.margin.iter().all(|x| (x - 0.48).abs() < h2), "{}", m.min_margin);
    assert_eq!(m.phi_prime_zero_fraction, 0.0);

    let eq = graph(&de_sitter(), &sphere(16), |_| 0.0);
    let m = hypothesis_margins(&eq, 1).unwrap();
    assert!(m.margin.iter().all(|x| x.abs() < 1e-12));
    assert_eq!(m.phi_prime_zero_fraction, 1.0);
    assert_eq!(m.equator_fraction, Some(1.0));

    let cyl = graph(&cylinder(), &torus(16), cyl_bump(0.1));
    let m = hypothesis_margins(&cyl, 0).unwrap();
    assert_eq!(m.phi_prime_zero_fraction, 1.0);
    assert!(m.corollary_margin.is_none());
    assert!(hypothesis_margins(&cyl, 2).is_err());
}

#[test]
fn perturbed_slices_are_caught_unstable() {
    let model = de_sitter();
    let grid = sphere(32);
    let surfaces: Vec<(String, GraphFunction)> = [0.0, 0.02, 0.05, 0.1]
        .iter()
        .map(|&eps| (format!("eps {eps}"), GraphFunction::new(sample(&grid, ds_bump(LN2, eps)))))
        .collect();
    let report = theorem_probe(model, grid, &surfaces, 0).unwrap();
    assert!(report.consistent);
    assert!(report.rows[0].is_slice && !report.rows[0].covered);
    for row in &report.rows[1..] {
        assert!(row.covered, "{row:?}");
        assert_eq!(row.verdict, Verdict::Unstable);
        assert!(row.witness_value.unwrap() > 0.0);
    }
}

#[test]
fn equator_is_maximal_for_r1() {
    let g = graph(&de_sitter(), &sphere(16), |_| 0.0);
    let row = probe_surface("equator", &g, 1).unwrap();
    assert!(row.is_r_maximal && row.is_slice && !row.nondegenerate);
    assert_eq!(row.verdict, Verdict::Marginal);
    assert!(row.consistent);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn unstable_verdicts_carry_positive_witnesses(s0 in -1.0..1.0f64, eps in -0.1..0.1f64, r in 0usize..2) {
        let g = graph(&de_sitter(), &sphere(12), ds_bump(s0, eps));
        let sp = stability_spectrum(&g, r, 2).unwrap();
        if sp.verdict == Verdict::Unstable {
            prop_assert!(sp.witness_value.unwrap() > 0.0);
        }
        prop_assert!(sp.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sp.asymmetry < 1e-10);
    }

    #[test]
    fn form_is_quadratic(c in -3.0..3.0f64, r in 0usize..2) {
        let g = graph(&cylinder(), &torus(12), cyl_bump(0.2));
        let f = sample(&g.grid, |p| p[0].sin() + 0.3 * p[1].cos());
        let scaled: Vec<f64> = f.iter().map(|x| c * x).collect();
        let q = stability_form(&g, r, &f).unwrap();
        prop_assert!((stability_form(&g, r, &scaled).unwrap() - c * c * q).abs() < 1e-9 * (1.0 + q.abs()));
    }
}
