//! Built-in self-test: the acceptance checks on seeded built-in instances.
//! Groups of checks run on worker threads; results come back in id order.

use std::thread;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bl::{bl_constant, log_abs_chi_p, tilde, BLDatum, ExtendedReal};
use crate::blowup::BlOperator;
use crate::capacity::{
    extremiser_from_scaling, factorization_check, minimize_y, objective, scaling_for_extremiser, stationarity_residual,
    FixedPointConfig, GramTuple,
};
use crate::fixtures::{self, RandomSpec};
use crate::linalg;
use crate::oracle::{brute_force_capacity, OracleConfig};
use crate::quiver::{act, log_abs_character, QuiverDatum};
use crate::scaling::{polystable_from, run_scaling, semistable_from, Decision, ScalingConfig, ScalingStatus};

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(id: u8, name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed,
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn geometric(cfg: &ScalingConfig) -> CriterionResult {
    let mut worst_cap = 0.0f64;
    let mut worst_ds = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut ok = true;
    for d in fixtures::geometric_data() {
        let t = Instant::now();
        let Ok(r) = run_scaling(&d, cfg) else {
            ok = false;
            continue;
        };
        slowest = slowest.max(t.elapsed());
        let c = r.capacity.unwrap_or(f64::NAN);
        worst_cap = worst_cap.max((c - 1.0).abs());
        worst_ds = worst_ds.max(r.ds_final);
        ok &= (c - 1.0).abs() <= 1e-8 && r.ds_final <= 1e-12 && slowest < Duration::from_secs(1);
    }
    result(
        1,
        "geometric capacity",
        ok,
        format!("max |cap-1| {worst_cap:.2e}, max ds {worst_ds:.2e}, slowest {slowest:?}"),
    )
}

/// Converged random instances and their three capacity values.
fn oracle_agreement(cfg: &ScalingConfig, oracle: &OracleConfig) -> Vec<CriterionResult> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x2);
    let spec = RandomSpec::default();
    let (mut count, mut tries) = (0, 0);
    let (mut worst, mut worst_char, mut identical) = (0.0f64, 0.0f64, true);
    while count < 50 && tries < 5000 {
        tries += 1;
        let d = fixtures::random_datum(&mut rng, &spec);
        let Ok(r) = run_scaling(&d, cfg) else { continue };
        if r.status != ScalingStatus::Converged {
            continue;
        }
        let cap = r.capacity.unwrap_or(f64::NAN);
        let fp = minimize_y(&d, &FixedPointConfig::default()).map_or(f64::NAN, |e| e.value);
        let bf = brute_force_capacity(&d, oracle).map_or(f64::NAN, |o| o.value);
        worst = worst.max(rel(cap, fp)).max(rel(cap, bf)).max(rel(fp, bf));
        identical &= (2.0 * r.logabs_character).exp() == cap;
        worst_char = worst_char.max(rel((2.0 * r.logabs_character).exp(), bf));
        count += 1;
    }
    let elapsed = start.elapsed();
    let ok2 = count == 50 && worst <= 1e-4 && elapsed < Duration::from_secs(300);
    vec![
        result(
            2,
            "triple-oracle agreement",
            ok2,
            format!("{count} instances ({tries} drawn), worst pairwise gap {worst:.2e}, {elapsed:?}"),
        ),
        result(
            3,
            "character formula",
            count == 50 && identical && worst_char <= 1e-4,
            format!("identical {identical}, worst gap to oracle {worst_char:.2e}"),
        ),
    ]
}

fn semistability(cfg: &ScalingConfig) -> CriterionResult {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, d) in [
        ("zero", fixtures::zero_rep()),
        ("rank-deficient", fixtures::rank_deficient_pair()),
        ("common kernel", fixtures::common_kernel()),
    ] {
        let good = run_scaling(&d, cfg).is_ok_and(|r| semistable_from(&r) == Decision::No && r.capacity == Some(0.0) && r.witness.as_ref().is_some_and(|w| w.verified));
        if !good {
            notes.push(name);
        }
        ok &= good;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4);
    let positives = (0..20)
        .filter(|_| {
            let d = fixtures::random_generic_semistable(&mut rng);
            run_scaling(&d, cfg).is_ok_and(|r| semistable_from(&r) == Decision::Yes && r.capacity_estimate > 0.0)
        })
        .count();
    ok &= positives == 20;
    result(
        4,
        "semi-stability and positivity",
        ok,
        format!("negatives failing: {notes:?}, positives {positives}/20"),
    )
}

fn factorization(cfg: &ScalingConfig) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..20 {
        let (d, d1) = fixtures::random_block_triangular(&mut rng, &RandomSpec::default());
        match factorization_check(&d, &d1, cfg, f64::MIN_POSITIVE) {
            Ok(f) => {
                let product = f.d_first * f.d_second;
                let ratio = (f.d_full - product).abs() / (1e-4 * product.max(1.0));
                worst = worst.max(ratio);
                ok &= ratio <= 1.0;
            }
            Err(_) => ok = false,
        }
    }
    result(5, "factorization", ok, format!("worst gap / allowance {worst:.2e}"))
}

/// `Y^{1/2}(I + εS)Y^{1/2}` with `S` symmetric, entries in `[−1, 1]`.
fn perturb<R: Rng>(rng: &mut R, y: &GramTuple, eps: f64) -> GramTuple {
    GramTuple(
        y.0.iter()
            .map(|m| {
                let n = m.nrows();
                let s = linalg::symmetrize(&DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0)));
                let root = linalg::spd_roots(m, 0.0).expect("extremiser blocks are positive definite").sqrt;
                linalg::symmetrize(&(&root * (DMatrix::identity(n, n) + s * eps) * &root))
            })
            .collect(),
    )
}

fn extremisers(cfg: &ScalingConfig) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6);
    let mut pool: Vec<QuiverDatum> = fixtures::geometric_data();
    let spec = RandomSpec::default();
    while pool.len() < 20 {
        pool.push(fixtures::random_datum(&mut rng, &spec));
    }
    let (mut used, mut ok) = (0, true);
    let (mut worst_res, mut worst_gap, mut beaten) = (0.0f64, 0.0f64, 0);
    for d in &pool {
        let Ok(r) = scaling_for_extremiser(d, cfg) else { continue };
        if polystable_from(&r, cfg) != Decision::Yes {
            continue;
        }
        let cap = r.capacity.unwrap_or(f64::NAN);
        let Ok(y) = extremiser_from_scaling(d, &r) else {
            ok = false;
            continue;
        };
        let res = stationarity_residual(d, &y).unwrap_or(f64::INFINITY);
        let val = objective(d, &y).unwrap_or(f64::NAN);
        worst_res = worst_res.max(res);
        worst_gap = worst_gap.max(rel(val, cap));
        for _ in 0..100 {
            let p = perturb(&mut rng, &y, 0.01);
            if objective(d, &p).is_ok_and(|v| v < val * (1.0 - 1e-10)) {
                beaten += 1;
            }
        }
        used += 1;
    }
    ok &= used > 0 && worst_res <= 1e-6 && worst_gap <= 1e-6 && beaten == 0;
    result(
        6,
        "extremiser correctness",
        ok,
        format!("{used} instances, residual {worst_res:.2e}, objective gap {worst_gap:.2e}, lower perturbations {beaten}"),
    )
}

fn invariance(cfg: &ScalingConfig) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7);
    let spec = RandomSpec::default();
    let (mut used, mut worst_h, mut worst_o) = (0, 0.0f64, 0.0f64);
    let mut tries = 0;
    while used < 10 && tries < 1000 {
        tries += 1;
        let d = fixtures::random_datum(&mut rng, &spec);
        let Ok(r) = run_scaling(&d, cfg) else { continue };
        let Some(cap) = r.capacity.filter(|_| r.status == ScalingStatus::Converged) else {
            continue;
        };
        let n = d.n_total() as i32;
        for c in [0.5, 2.0] {
            let scaled = d.with_rep(d.rep.scaled(c));
            let v = run_scaling(&scaled, cfg).ok().and_then(|r| r.capacity).unwrap_or(f64::NAN);
            worst_h = worst_h.max(rel(v, c.powi(2 * n) * cap));
        }
        let g = fixtures::random_character_free(&mut rng, &d);
        let moved = act(&g, &d.quiver, &d.rep).map(|rep| d.with_rep(rep));
        let v = moved
            .ok()
            .and_then(|m| run_scaling(&m, cfg).ok())
            .and_then(|r| r.capacity)
            .unwrap_or(f64::NAN);
        worst_o = worst_o.max(rel(v, cap));
        used += 1;
    }
    result(
        7,
        "homogeneity and orbit invariance",
        used == 10 && worst_h <= 1e-8 && worst_o <= 1e-6,
        format!("{used} instances, homogeneity {worst_h:.2e}, orbit {worst_o:.2e}"),
    )
}

fn bl_layer(cfg: &ScalingConfig) -> CriterionResult {
    let hoelder = bl_constant(&fixtures::hoelder_bl(), cfg)
        .ok()
        .and_then(|r| r.bl)
        .and_then(ExtendedReal::finite)
        .unwrap_or(f64::NAN);
    let mut worst_route = 0.0f64;
    let mut converged = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x8);
    let mut cases: Vec<BLDatum> = vec![fixtures::hoelder_bl(), fixtures::rank_one_triple_bl()];
    for _ in 0..6 {
        let mut b = fixtures::rank_one_triple_bl();
        for m in b.rep.0.values_mut() {
            *m += DMatrix::from_fn(m.nrows(), m.ncols(), |_, _| rng.random_range(-0.3..=0.3));
        }
        cases.push(b);
    }
    for b in &cases {
        if let Ok(r) = bl_constant(b, cfg) {
            if let Some(g) = r.route_gap {
                worst_route = worst_route.max(g);
                converged += 1;
            }
        }
    }
    let mut worst_dict = 0.0f64;
    for b in &cases {
        let Ok(d) = b.to_quiver_datum() else { continue };
        let a = fixtures::random_group_element(&mut rng, &d);
        let omega = b.omega();
        let lhs = d.n_total() as f64 * (omega as f64).ln() + 2.0 * log_abs_chi_p(&a, b).unwrap_or(f64::NAN);
        let rhs = 2.0 * log_abs_character(&tilde(&a, &b.quiver, omega), &d.weight).unwrap_or(f64::NAN);
        worst_dict = worst_dict.max((lhs - rhs).exp_m1().abs());
    }
    let ok = (hoelder - 1.0).abs() <= 1e-8 && converged > 0 && worst_route <= 1e-6 && worst_dict <= 1e-10;
    result(
        8,
        "BL layer",
        ok,
        format!("Hoelder BL {hoelder:.12}, {converged} converged, route gap {worst_route:.2e}, dictionary {worst_dict:.2e}"),
    )
}

fn kernels(cfg: &ScalingConfig) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9);
    let spec = RandomSpec::default();
    let (mut worst_k, mut worst_adj) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let d = fixtures::random_datum(&mut rng, &spec);
        let Ok(op) = BlOperator::new(&d) else {
            worst_k = f64::INFINITY;
            continue;
        };
        let n = op.n_total();
        let mut sym = || linalg::symmetrize(&DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0)));
        let (x, y) = (sym(), sym());
        let diff = |a: DMatrix<f64>, b: DMatrix<f64>| (a - b).amax();
        match (op.apply(&x), op.apply_dense(&x), op.apply_adjoint(&y), op.apply_adjoint_dense(&y)) {
            (Ok(tx), Ok(tx_dense), Ok(ty), Ok(ty_dense)) => {
                worst_adj = worst_adj.max((linalg::trace_inner(&tx, &y) - linalg::trace_inner(&x, &ty)).abs());
                worst_k = worst_k.max(diff(tx, tx_dense)).max(diff(ty, ty_dense));
            }
            _ => worst_k = f64::INFINITY,
        }
    }
    result(
        9,
        "operator kernels",
        worst_k <= 1e-12 && worst_adj <= 1e-12,
        format!("structured vs dense {worst_k:.2e}, adjointness {worst_adj:.2e}"),
    )
}

fn performance(cfg: &ScalingConfig) -> CriterionResult {
    let d = fixtures::large_square(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa));
    let t = Instant::now();
    let r = run_scaling(&d, cfg);
    let elapsed = t.elapsed();
    match r {
        Ok(r) => {
            let honest = match r.status {
                ScalingStatus::Converged => r.ds_final <= 1e-10,
                ScalingStatus::Indeterminate => r.capacity.is_none(),
                _ => false,
            };
            result(
                10,
                "performance sanity",
                honest && elapsed < Duration::from_secs(10),
                format!("N = {}, {}, ds {:.2e}, {elapsed:?}", d.n_total(), r.status.as_str(), r.ds_final),
            )
        }
        Err(e) => result(10, "performance sanity", false, e.to_string()),
    }
}

pub fn run(cfg: &ScalingConfig, oracle: &OracleConfig) -> Vec<CriterionResult> {
    type Job<'a> = Box<dyn FnOnce() -> Vec<CriterionResult> + Send + 'a>;
    let jobs: Vec<Job> = vec![
        Box::new(|| oracle_agreement(cfg, oracle)),
        Box::new(|| vec![factorization(cfg)]),
        Box::new(|| vec![extremisers(cfg), invariance(cfg)]),
        Box::new(|| vec![geometric(cfg), semistability(cfg), bl_layer(cfg), kernels(cfg), performance(cfg)]),
    ];
    let mut out: Vec<CriterionResult> = thread::scope(|s| {
        let handles: Vec<_> = jobs.into_iter().map(|job| s.spawn(job)).collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap_or_default())
            .collect()
    });
    out.sort_by_key(|c| c.id);
    out
}
