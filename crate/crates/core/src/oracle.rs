//! Brute-force capacity: direct minimization of `log det T(X) − log det X`
//! over positive definite `X = CᵀC`, `C` lower triangular with a
//! log-parameterized diagonal. Shares nothing with the scaling or the
//! fixed-point code beyond the evaluation of `T` and `T*`.

use std::cell::Cell;
use std::rc::Rc;

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blowup::BlOperator;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quiver::QuiverDatum;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    /// Largest `N` accepted.
    pub cap: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: u64,
    /// Values below this are reported as 0.
    pub floor: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cap: 16,
            restarts: 8,
            seed: 0,
            max_iters: 3000,
            floor: 1e-30,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub value: f64,
    /// Best value reached by each restart, in restart order.
    pub restart_values: Vec<f64>,
}

struct LogDetProblem {
    op: BlOperator,
    n: usize,
    /// Lowest cost seen, kept even if the line search gives up.
    best: Rc<Cell<f64>>,
}

/// Lower triangle in row-major order; diagonal entries hold `log C_kk`.
fn unpack(theta: &[f64], n: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n, n);
    let mut k = 0;
    for r in 0..n {
        for col in 0..=r {
            c[(r, col)] = if r == col { theta[k].exp() } else { theta[k] };
            k += 1;
        }
    }
    c
}

impl LogDetProblem {
    /// `log det T(G) − log det G` and `T(G)`, `G = CᵀC`.
    fn evaluate(&self, theta: &[f64]) -> Option<(f64, DMatrix<f64>, DMatrix<f64>)> {
        let c = unpack(theta, self.n);
        let g = c.transpose() * &c;
        let tg = self.op.apply(&g).ok()?;
        let num = linalg::logdet_spd(&tg)?;
        let mut den = 0.0;
        let mut k = 0;
        for r in 0..self.n {
            den += 2.0 * theta[k + r];
            k += r + 1;
        }
        Some((num - den, c, tg))
    }
}

/// Sentinel for points where `T(G)` is not numerically positive definite.
const INFEASIBLE: f64 = 1e300;

impl CostFunction for LogDetProblem {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let value = self.evaluate(theta).map_or(INFEASIBLE, |e| e.0);
        if value < self.best.get() {
            self.best.set(value);
        }
        Ok(value)
    }
}

impl Gradient for LogDetProblem {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, theta: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let n = self.n;
        let Some((_, c, tg)) = self.evaluate(theta) else {
            return Ok(vec![0.0; theta.len()]);
        };
        let Some(tg_inv) = linalg::spd_inverse(&tg) else {
            return Ok(vec![0.0; theta.len()]);
        };
        // d/dC log det T(CᵀC) = 2·C·T*(T(G)⁻¹)
        let s = self.op.apply_adjoint(&tg_inv)?;
        let grad_c = (&c * s) * 2.0;
        let mut out = Vec::with_capacity(theta.len());
        for r in 0..n {
            for col in 0..=r {
                out.push(if r == col {
                    grad_c[(r, r)] * c[(r, r)] - 2.0
                } else {
                    grad_c[(r, col)]
                });
            }
        }
        Ok(out)
    }
}

fn start_point(rng: &mut ChaCha8Rng, n: usize, restart: usize) -> Vec<f64> {
    let len = n * (n + 1) / 2;
    if restart == 0 {
        return vec![0.0; len];
    }
    let mut theta = Vec::with_capacity(len);
    for r in 0..n {
        for col in 0..=r {
            theta.push(if r == col {
                rng.random_range(-1.0..=1.0)
            } else {
                rng.random_range(-0.5..=0.5)
            });
        }
    }
    theta
}

/// `inf { det T(X) : X ≻ 0, det X = 1 }` by multi-start L-BFGS.
pub fn brute_force_capacity(datum: &QuiverDatum, cfg: &OracleConfig) -> Result<OracleResult> {
    let op = BlOperator::new(datum)?;
    let n = op.n_total();
    if n > cfg.cap {
        return Err(Error::OracleCap { n, cap: cfg.cap });
    }
    // a kernel of T(I) is a common kernel of every Kraus operator
    let t_id = op.apply(&DMatrix::identity(n, n))?;
    let (values, _) = linalg::sym_eigen(&t_id);
    let top = values.last().copied().unwrap_or(0.0);
    if !(top > 0.0) || values[0] <= 1e-13 * top {
        return Ok(OracleResult {
            value: 0.0,
            restart_values: vec![0.0; cfg.restarts.max(1)],
        });
    }

    let log_floor = cfg.floor.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut restart_values = Vec::with_capacity(cfg.restarts);
    let mut best = f64::INFINITY;
    for restart in 0..cfg.restarts.max(1) {
        let init = start_point(&mut rng, n, restart);
        let best_seen = Rc::new(Cell::new(f64::INFINITY));
        let problem = LogDetProblem {
            op: op.clone(),
            n,
            best: Rc::clone(&best_seen),
        };
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
            .with_tolerance_grad(1e-10)
            .and_then(|s| s.with_tolerance_cost(1e-15))
            .map_err(|e| Error::Config(e.to_string()))?;
        let run = Executor::new(problem, solver)
            .configure(|state| state.param(init).max_iters(cfg.max_iters))
            .run();
        if let Err(e) = &run {
            debug!("oracle restart {restart} stopped early: {e}");
        }
        let reached = best_seen.get();
        restart_values.push(if reached < log_floor { 0.0 } else { reached.exp() });
        best = best.min(reached);
    }
    let value = if best < log_floor { 0.0 } else { best.exp() };
    Ok(OracleResult { value, restart_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn kronecker_is_four() {
        let r = brute_force_capacity(&fixtures::kronecker(2.0), &OracleConfig::default()).unwrap();
        assert!((r.value - 4.0).abs() < 1e-10);
    }

    #[test]
    fn geometric_is_one() {
        for d in fixtures::geometric_data() {
            let r = brute_force_capacity(&d, &OracleConfig::default()).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
        }
    }

    #[test]
    fn zero_rep_is_zero() {
        assert_eq!(brute_force_capacity(&fixtures::zero_rep(), &OracleConfig::default()).unwrap().value, 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = OracleConfig {
            cap: 1,
            ..Default::default()
        };
        assert!(matches!(
            brute_force_capacity(&fixtures::hoelder(), &cfg),
            Err(Error::OracleCap { n: 3, cap: 1 })
        ));
    }

    #[test]
    fn gradient_matches_differences() {
        let d = fixtures::star_with_gap();
        let op = BlOperator::new(&d).unwrap();
        let n = op.n_total();
        let p = LogDetProblem {
            op,
            n,
            best: Rc::new(Cell::new(f64::INFINITY)),
        };
        let theta: Vec<f64> = (0..n * (n + 1) / 2).map(|k| 0.1 * k as f64 - 0.2).collect();
        let g = p.gradient(&theta).unwrap();
        let h = 1e-6;
        for k in 0..theta.len() {
            let mut a = theta.clone();
            let mut b = theta.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (p.cost(&a).unwrap() - p.cost(&b).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "{k}: {fd} vs {}", g[k]);
        }
    }
}
