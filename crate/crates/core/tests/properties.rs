mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quiver_capacity::blowup::BlOperator;
use quiver_capacity::capacity::{log_objective, GramTuple};
use quiver_capacity::fixtures::{self, RandomSpec};
use quiver_capacity::io::{parse_datum_str, serialize_datum, ParsedDatum};
use quiver_capacity::quiver::{act, log_abs_character, QuiverDatum};

fn datum(seed: u64) -> (QuiverDatum, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = fixtures::random_datum(&mut rng, &RandomSpec::default());
    (d, rng)
}

fn gram(d: &QuiverDatum, rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    d.quiver.sinks.iter().map(|w| common::random_spd(rng, d.dims.get(w))).collect()
}

/// Every `M_i` comfortably invertible, so log-dets are not rounding noise.
fn nonsingular(d: &QuiverDatum, y: &[DMatrix<f64>]) -> bool {
    common::m_blocks(d, y).iter().all(|m| {
        let e = m.clone().symmetric_eigen().eigenvalues;
        e.min() > 1e-8 * e.amax()
    })
}

fn lib_log_objective(d: &QuiverDatum, y: &[DMatrix<f64>]) -> f64 {
    let y = GramTuple::new(y.to_vec(), &d.layout().unwrap()).unwrap();
    log_objective(d, &y).unwrap().expect("nondegenerate")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_pairs_with_trace(seed in any::<u64>()) {
        let (d, mut rng) = datum(seed);
        let op = BlOperator::new(&d).unwrap();
        let n = op.n_total();
        let (x, y) = (common::random_sym(&mut rng, n), common::random_sym(&mut rng, n));
        let lhs = op.apply(&x).unwrap().dot(&y);
        let rhs = x.dot(&op.apply_adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn positive_maps_stay_positive(seed in any::<u64>()) {
        let (d, mut rng) = datum(seed);
        let op = BlOperator::new(&d).unwrap();
        let x = common::random_spd(&mut rng, op.n_total());
        for m in [op.apply(&x).unwrap(), op.apply_adjoint(&x).unwrap()] {
            let low = m.clone().symmetric_eigen().eigenvalues.min();
            prop_assert!(low >= -1e-10 * (1.0 + m.norm()));
            prop_assert!((&m - m.transpose()).amax() <= 1e-12 * (1.0 + m.norm()));
        }
    }

    #[test]
    fn objective_matches_reference(seed in any::<u64>()) {
        let (d, mut rng) = datum(seed);
        let y = gram(&d, &mut rng);
        prop_assume!(nonsingular(&d, &y));
        let reference = common::log_objective(&d, &y).unwrap();
        prop_assert!((lib_log_objective(&d, &y) - reference).abs() <= 1e-9 * (1.0 + reference.abs()));
    }

    #[test]
    fn objective_is_homogeneous_and_scale_free(seed in any::<u64>(), c in 0.25f64..4.0, t in 0.1f64..10.0) {
        let (d, mut rng) = datum(seed);
        let y = gram(&d, &mut rng);
        prop_assume!(nonsingular(&d, &y));
        let base = lib_log_objective(&d, &y);
        let n = common::n_total(&d) as f64;
        let scaled = lib_log_objective(&d.with_rep(d.rep.scaled(c)), &y);
        prop_assert!((scaled - base - 2.0 * n * c.ln()).abs() <= 1e-9 * (1.0 + base.abs()));
        let ty: Vec<DMatrix<f64>> = y.iter().map(|m| m * t).collect();
        prop_assert!((lib_log_objective(&d, &ty) - base).abs() <= 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn action_composes(seed in any::<u64>()) {
        let (d, mut rng) = datum(seed);
        let g = fixtures::random_group_element(&mut rng, &d);
        let h = fixtures::random_group_element(&mut rng, &d);
        let twice = act(&g, &d.quiver, &act(&h, &d.quiver, &d.rep).unwrap()).unwrap();
        let once = act(&g.compose(&h).unwrap(), &d.quiver, &d.rep).unwrap();
        for (id, m) in &once.0 {
            prop_assert!((m - twice.get(id).unwrap()).amax() <= 1e-9 * (1.0 + m.amax()));
        }
        let mine = common::act(&g, &d);
        for (id, m) in &mine.0 {
            prop_assert!((m - act(&g, &d.quiver, &d.rep).unwrap().get(id).unwrap()).amax() <= 1e-12 * (1.0 + m.amax()));
        }
    }

    #[test]
    fn character_is_multiplicative(seed in any::<u64>()) {
        let (d, mut rng) = datum(seed);
        let g = fixtures::random_group_element(&mut rng, &d);
        let h = fixtures::random_group_element(&mut rng, &d);
        let chi = |x| log_abs_character(x, &d.weight).unwrap();
        let gh = g.compose(&h).unwrap();
        prop_assert!((chi(&gh) - chi(&g) - chi(&h)).abs() <= 1e-10);
        prop_assert!((chi(&g) - common::log_abs_character(&g, &d)).abs() <= 1e-12);
    }

    #[test]
    fn character_free_elements_fix_the_character(seed in any::<u64>()) {
        let (d, mut rng) = datum(seed);
        let g = fixtures::random_character_free(&mut rng, &d);
        prop_assert!(common::log_abs_character(&g, &d).abs() <= 1e-12);
    }

    #[test]
    fn datum_files_round_trip_exactly(seed in any::<u64>()) {
        let (d, _) = datum(seed);
        let parsed = ParsedDatum::Quiver(d);
        let text = serialize_datum(&parsed);
        let back = parse_datum_str(&text).unwrap();
        prop_assert_eq!(&back, &parsed);
        prop_assert_eq!(serialize_datum(&back), text);
    }
}


proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn capacity_ignores_arrow_order(seed in any::<u64>()) {
        use quiver_capacity::scaling::{run_scaling, ScalingConfig, ScalingStatus};
        let (d, _) = datum(seed);
        let r = run_scaling(&d, &ScalingConfig::default()).unwrap();
        prop_assume!(r.status == ScalingStatus::Converged);
        let mut reversed = d.clone();
        reversed.quiver.arrows.reverse();
        let s = run_scaling(&reversed, &ScalingConfig::default()).unwrap();
        prop_assert_eq!(s.status, ScalingStatus::Converged);
        prop_assert!(common::rel(r.capacity.unwrap(), s.capacity.unwrap()) <= 1e-8);
    }
}
