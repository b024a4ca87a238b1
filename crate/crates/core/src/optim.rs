//! Derivative-free minimization with the Nelder-Mead simplex method.
//!
//! Uses the dimension-adaptive coefficients of Gao and Han, which keep the
//! simplex well conditioned in the 10-100 dimensional angle spaces produced
//! by growing circuits. The run is budgeted in objective evaluations; when
//! the simplex collapses before the budget is spent, one randomized restart
//! around the incumbent is attempted, and the best point ever evaluated is
//! returned.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::rng::Rng;

/// Budget and tolerances for one minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Hard cap on objective evaluations.
    pub max_evaluations: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Simplex is considered converged when the spread of objective values
    /// falls below this.
    pub f_tolerance: f64,
    /// Seed for restart perturbations.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_evaluations: 1000,
            initial_step: 0.4,
            f_tolerance: 1e-10,
            seed: 0,
        }
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub restarts: usize,
}

/// Minimizes `f` starting from `x0`, spending at most
/// `config.max_evaluations` objective calls.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimResult> {
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::invalid("cannot optimize a zero-dimensional point"));
    }
    if config.max_evaluations == 0 {
        return Err(Error::invalid("evaluation budget must be positive"));
    }

    let nf = dim as f64;
    // Gao-Han adaptive coefficients.
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = (0.75 - 1.0 / (2.0 * nf)).max(0.1);
    let delta = (1.0 - 1.0 / nf).max(0.1);

    let mut evals = 0usize;
    let mut best_point = x0.to_vec();
    let mut best_value = f64::INFINITY;
    let mut rng = Rng::stream(config.seed, 0x6e6d);
    let mut restarts = 0usize;

    let mut eval = |x: &[f64], evals: &mut usize, bp: &mut Vec<f64>, bv: &mut f64| -> f64 {
        *evals += 1;
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < *bv {
            *bv = v;
            bp.clear();
            bp.extend_from_slice(x);
        }
        v
    };

    let mut origin = x0.to_vec();
    'outer: loop {
        // Build simplex: origin plus a step along each coordinate.
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        let mut values: Vec<f64> = Vec::with_capacity(dim + 1);
        simplex.push(origin.clone());
        for i in 0..dim {
            let mut v = origin.clone();
            let step = if restarts == 0 {
                config.initial_step
            } else {
                config.initial_step * rng.next_range(0.5, 1.5)
                    * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 }
            };
            v[i] += step;
            simplex.push(v);
        }
        for v in &simplex {
            if evals >= config.max_evaluations {
                break;
            }
            values.push(eval(v, &mut evals, &mut best_point, &mut best_value));
        }
        if values.len() < simplex.len() {
            // Budget ran out mid-initialization; stop here.
            break 'outer;
        }

        let mut order: Vec<usize> = (0..=dim).collect();
        loop {
            if evals >= config.max_evaluations {
                break 'outer;
            }
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
            let spread = values[order[dim]] - values[order[0]];
            if spread.abs() < config.f_tolerance {
                if restarts >= 1 {
                    break 'outer;
                }
                restarts += 1;
                origin = best_point.clone();
                continue 'outer;
            }

            let worst = order[dim];
            let second_worst = order[dim - 1];
            let bst = order[0];
            // Centroid of all but the worst vertex.
            let mut centroid = vec![0.0; dim];
            for &i in order.iter().take(dim) {
                for (c, x) in centroid.iter_mut().zip(simplex[i].iter()) {
                    *c += x;
                }
            }
            for c in &mut centroid {
                *c /= nf;
            }

            let reflect: Vec<f64> = centroid
                .iter()
                .zip(simplex[worst].iter())
                .map(|(c, w)| c + alpha * (c - w))
                .collect();
            let fr = eval(&reflect, &mut evals, &mut best_point, &mut best_value);

            if fr < values[bst] {
                if evals >= config.max_evaluations {
                    break 'outer;
                }
                let expand: Vec<f64> = centroid
                    .iter()
                    .zip(simplex[worst].iter())
                    .map(|(c, w)| c + beta * (c - w))
                    .collect();
                let fe = eval(&expand, &mut evals, &mut best_point, &mut best_value);
                if fe < fr {
                    simplex[worst] = expand;
                    values[worst] = fe;
                } else {
                    simplex[worst] = reflect;
                    values[worst] = fr;
                }
            } else if fr < values[second_worst] {
                simplex[worst] = reflect;
                values[worst] = fr;
            } else {
                // Contract toward the better of worst/reflected.
                let worst_vertex = simplex[worst].clone();
                let (base, fbase) = if fr < values[worst] {
                    (&reflect, fr)
                } else {
                    (&worst_vertex, values[worst])
                };
                if evals >= config.max_evaluations {
                    break 'outer;
                }
                let contract: Vec<f64> = centroid
                    .iter()
                    .zip(base.iter())
                    .map(|(c, w)| c + gamma * (w - c))
                    .collect();
                let fc = eval(&contract, &mut evals, &mut best_point, &mut best_value);
                if fc < fbase {
                    simplex[worst] = contract;
                    values[worst] = fc;
                } else {
                    // Shrink everything toward the best vertex.
                    let best_vertex = simplex[bst].clone();
                    for &i in order.iter().skip(1) {
                        let shrunk: Vec<f64> = best_vertex
                            .iter()
                            .zip(simplex[i].iter())
                            .map(|(b, x)| b + delta * (x - b))
                            .collect();
                        if evals >= config.max_evaluations {
                            break 'outer;
                        }
                        values[i] = eval(&shrunk, &mut evals, &mut best_point, &mut best_value);
                        simplex[i] = shrunk;
                    }
                }
            }
        }
    }

    Ok(OptimResult { best_point, best_value, evaluations: evals, restarts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        let mut s = 0.0;
        for w in x.windows(2) {
            s += 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2);
        }
        s
    }

    #[test]
    fn minimizes_sphere() {
        let cfg = OptimizerConfig { max_evaluations: 2000, ..Default::default() };
        let r = minimize(sphere, &[1.5, -2.0, 0.7], &cfg).unwrap();
        assert!(r.best_value < 1e-8, "{}", r.best_value);
        assert!(r.best_point.iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn minimizes_rosenbrock_2d() {
        let cfg = OptimizerConfig { max_evaluations: 4000, ..Default::default() };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!(r.best_value < 1e-6, "{}", r.best_value);
        assert!((r.best_point[0] - 1.0).abs() < 1e-2);
        assert!((r.best_point[1] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn respects_evaluation_budget() {
        for budget in [1usize, 5, 17, 100] {
            let mut count = 0usize;
            let cfg = OptimizerConfig { max_evaluations: budget, ..Default::default() };
            let r = minimize(
                |x| {
                    count += 1;
                    sphere(x)
                },
                &[3.0, 4.0],
                &cfg,
            )
            .unwrap();
            assert!(count <= budget, "budget {budget}, used {count}");
            assert_eq!(r.evaluations, count);
        }
    }

    #[test]
    fn never_worse_than_no_move() {
        // The reported best can never exceed the starting value.
        let cfg = OptimizerConfig { max_evaluations: 3, ..Default::default() };
        let r = minimize(sphere, &[2.0, 2.0], &cfg).unwrap();
        assert!(r.best_value <= sphere(&[2.0, 2.0]));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = OptimizerConfig { max_evaluations: 500, seed: 9, ..Default::default() };
        let a = minimize(rosenbrock, &[0.3, -0.2], &cfg).unwrap();
        let b = minimize(rosenbrock, &[0.3, -0.2], &cfg).unwrap();
        assert_eq!(a.best_point, b.best_point);
        assert_eq!(a.best_value, b.best_value);
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn restart_engages_on_flat_start() {
        // A function flat near zero but lower elsewhere: the first simplex
        // converges instantly, the restart must still be budget-bounded.
        let f = |x: &[f64]| if x[0].abs() < 1.0 { 0.0 } else { -1.0 };
        let cfg = OptimizerConfig { max_evaluations: 200, initial_step: 0.1, ..Default::default() };
        let r = minimize(f, &[0.0], &cfg).unwrap();
        assert!(r.restarts <= 1);
        assert!(r.evaluations <= 200);
    }

    #[test]
    fn handles_nan_objective() {
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                (x[0] - 2.0) * (x[0] - 2.0)
            }
        };
        let cfg = OptimizerConfig { max_evaluations: 300, ..Default::default() };
        let r = minimize(f, &[1.0], &cfg).unwrap();
        assert!((r.best_point[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_empty_input() {
        assert!(minimize(sphere, &[], &OptimizerConfig::default()).is_err());
    }
}
