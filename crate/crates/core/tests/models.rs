use proptest::prelude::*;
use rstab_core::grid::{build_fiber_grid, GridKind};
use rstab_core::spacetime::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn constant_curvature_odes_hold(s in -3.0..3.0f64) {
        for model in [make_de_sitter(2).unwrap(), make_static_cylinder(2).unwrap(), make_de_sitter(4).unwrap()] {
            let (a, b) = curvature_residuals(&model, s).unwrap();
            prop_assert!(a.abs() < 1e-10 && b.abs() < 1e-10);
        }
    }

    #[test]
    fn slice_data_is_umbilic(s0 in -2.5..2.5f64) {
        let m = make_de_sitter(3).unwrap();
        let d = slice_data(&m, s0).unwrap();
        prop_assert!((d.umbilicity + s0.tanh()).abs() < 1e-14);
        prop_assert!((d.h[3] - s0.tanh().powi(3)).abs() < 1e-14);
        prop_assert!((d.area_factor - s0.cosh().powi(3)).abs() < 1e-12 * d.area_factor);
    }
}

#[test]
fn warping_derivatives_are_self_consistent() {
    let samples: Vec<f64> = (0..100).map(|k| -3.0 + 6.0 * k as f64 / 99.0).collect();
    assert!(WarpingFunction::cosh().derivative_self_check(&samples, 1e-4) < 1e-6);
    assert!(WarpingFunction::constant(1.0).derivative_self_check(&samples, 1e-4) < 1e-12);
}

#[test]
fn slices_outside_the_interval_are_rejected() {
    let m = make_de_sitter(2).unwrap();
    assert!(slice_data(&m, 3.5).is_err());
    let narrow = m.with_interval(-1.0, 1.0).unwrap();
    assert!(slice_data(&narrow, 1.5).is_err());
}

#[test]
fn grids_follow_the_fiber() {
    let ds = make_de_sitter(2).unwrap();
    let cyl = make_static_cylinder(2).unwrap();
    assert_eq!(build_fiber_grid(&ds, (16, 32)).unwrap().kind(), GridKind::Sphere);
    assert_eq!(build_fiber_grid(&cyl, (16, 16)).unwrap().kind(), GridKind::Torus);
    assert!(build_fiber_grid(&ds, (4, 8)).is_err());
    assert!(build_fiber_grid(&ds, (16, 31)).is_err());
}
