//! Capacities and BL constants with closed forms, evaluated by hand and
//! compared against all three numerical routes.

mod common;

use nalgebra::DMatrix;

use quiver_capacity::bl::{bl_constant, BLDatum, ExtendedReal};
use quiver_capacity::capacity::{capacity_value, minimize_y, FixedPointConfig};
use quiver_capacity::fixtures;
use quiver_capacity::oracle::{brute_force_capacity, OracleConfig};
use quiver_capacity::quiver::{BipartiteQuiver, DimVector, ExponentTuple, QuiverDatum, Representation, Weight};
use quiver_capacity::scaling::{run_scaling, ScalingConfig, ScalingStatus};

use common::rel;

fn single_arrow(m: DMatrix<f64>) -> QuiverDatum {
    let (r, c) = m.shape();
    let mut rep = Representation::default();
    rep.insert("a", m);
    QuiverDatum::new(
        BipartiteQuiver::new(&["v"], &["w"], &[("a", "v", "w")]),
        DimVector::from_pairs(&[("v", c), ("w", r)]),
        Weight::from_pairs(&[("v", 1), ("w", -1)]),
        rep,
    )
}

/// Scaling, fixed point and brute force all give `expected`.
fn all_routes(d: &QuiverDatum, expected: f64, tol: f64) {
    let r = run_scaling(d, &ScalingConfig::default()).unwrap();
    let s = capacity_value(&r);
    let fp = minimize_y(d, &FixedPointConfig::default()).unwrap().value;
    let bf = brute_force_capacity(d, &OracleConfig::default()).unwrap().value;
    for (route, v) in [("scaling", s), ("fixed point", fp), ("brute force", bf)] {
        assert!(rel(v, expected) <= tol, "{route}: {v} vs {expected}");
    }
}

#[test]
fn kronecker_is_square_of_entry() {
    // T(x) = 4x and det X = 1 forces x = 1
    all_routes(&fixtures::kronecker(2.0), 4.0, 1e-10);
}

#[test]
fn two_parallel_scalars_add_in_squares() {
    let (a, b) = (1.5, -0.7);
    let mut rep = Representation::default();
    rep.insert("a", DMatrix::from_element(1, 1, a));
    rep.insert("b", DMatrix::from_element(1, 1, b));
    let d = QuiverDatum::new(
        BipartiteQuiver::new(&["v"], &["w"], &[("a", "v", "w"), ("b", "v", "w")]),
        DimVector::from_pairs(&[("v", 1), ("w", 1)]),
        Weight::from_pairs(&[("v", 1), ("w", -1)]),
        rep,
    );
    all_routes(&d, a * a + b * b, 1e-10);
}

#[test]
fn square_arrow_gives_determinant_squared() {
    all_routes(&single_arrow(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])), 36.0, 1e-10);
    let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.0, 1.0, 1.0]);
    let det = m.determinant();
    all_routes(&single_arrow(m), det * det, 1e-8);
}

#[test]
fn singular_square_arrow_has_capacity_zero() {
    let d = single_arrow(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
    let r = run_scaling(&d, &ScalingConfig::default()).unwrap();
    assert!(r.status.is_zero());
    assert_eq!(r.capacity, Some(0.0));
}

#[test]
fn star_with_gap_infimum_is_not_attained() {
    // D = y₁(4y₁ + 9y₂)/(y₁y₂) = 9 + 4y₁/y₂, infimum 9 as y₁/y₂ → 0
    let d = fixtures::star_with_gap();
    let r = run_scaling(&d, &ScalingConfig::default()).unwrap();
    assert!(rel(capacity_value(&r), 9.0) <= 1e-4, "{}", capacity_value(&r));
    assert!(r.capacity_estimate >= 9.0 * (1.0 - 1e-12));
    let bf = brute_force_capacity(&d, &OracleConfig::default()).unwrap().value;
    assert!(rel(bf, 9.0) <= 1e-4, "{bf}");
    assert!(common::objective(&d, &[DMatrix::identity(1, 1) * 1e-6, DMatrix::identity(1, 1)]) > 9.0);
}

fn bl(quiver: QuiverDatum, p: &[&str]) -> BLDatum {
    BLDatum {
        quiver: quiver.quiver,
        dims: quiver.dims,
        rep: quiver.rep,
        exponents: ExponentTuple::parse(p).unwrap(),
    }
}

fn finite_bl(b: &BLDatum) -> f64 {
    let r = bl_constant(b, &ScalingConfig::default()).unwrap();
    assert_eq!(r.scaling.status, ScalingStatus::Converged);
    r.bl.and_then(ExtendedReal::finite).unwrap()
}

#[test]
fn hoelder_constant_is_one() {
    assert!((finite_bl(&fixtures::hoelder_bl()) - 1.0).abs() <= 1e-12);
}

#[test]
fn scaled_coordinates_divide_by_scales() {
    // ∫ Π f_j(c_j x_j) dx = Π |c_j|⁻¹ ∫ f_j
    let c = [0.5, 2.0, -3.0];
    let mut d = fixtures::hoelder();
    for (k, id) in ["a1", "a2", "a3"].iter().enumerate() {
        *d.rep.0.get_mut(*id).unwrap() *= c[k];
    }
    let expected: f64 = c.iter().map(|x| 1.0 / x.abs()).product();
    assert!(rel(finite_bl(&bl(d, &["1", "1", "1"])), expected) <= 1e-10);
}

#[test]
fn change_of_variables_constant() {
    // ∫ f(Mx) dx = |det M|⁻¹ ∫ f
    let m: DMatrix<f64> = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
    let expected: f64 = 1.0 / m.determinant().abs();
    assert!(rel(finite_bl(&bl(single_arrow(m), &["1"])), expected) <= 1e-10);
}

#[test]
fn degenerate_bl_data_are_infinite() {
    for b in [fixtures::zero_bl(), fixtures::common_kernel_bl()] {
        let r = bl_constant(&b, &ScalingConfig::default()).unwrap();
        assert_eq!(r.bl, Some(ExtendedReal::Infinity));
    }
}
