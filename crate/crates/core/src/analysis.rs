//! Post-training candidate selection, CNOT budget comparison against a
//! product-formula baseline, and scaling-curve fits with confidence bands.
//!
//! Candidates collected across episodes are scored by a weighted error
//! combining free energy, energy, and entropy deviations from the exact
//! thermal values. The winner's two-qubit gate count is compared with the
//! count a first-order product-formula circuit would need for the same
//! Hamiltonian. Gate-count scaling over system size is summarized by cubic
//! and exponential least-squares fits whose uncertainty comes from the
//! delta method.

use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::env::RewardMode;
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::stats::t_quantile;

/// One polished episode outcome, reduced to its selection statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub episode: u64,
    /// |F - F_exact|.
    pub free_energy_error: f64,
    /// |<H> - <H>_exact|.
    pub energy_error: f64,
    /// |S - S_exact|.
    pub entropy_error: f64,
    pub fidelity: f64,
    pub cnot_count: usize,
    pub gate_count: usize,
}

impl CandidateRecord {
    /// Weighted selection error.
    pub fn score(&self, energy_weight: f64, entropy_weight: f64) -> f64 {
        self.free_energy_error
            + energy_weight * self.energy_error
            + entropy_weight * self.entropy_error
    }
}

/// Selection weights for the candidate filter, tuned per system size and
/// reward mode. Sizes outside the tuned range fall back to plain
/// free-energy selection.
pub fn default_filter_weights(mode: RewardMode, majorana_count: usize) -> (f64, f64) {
    match (mode, majorana_count) {
        (RewardMode::FreeEnergy, 8) => (0.5, 0.0),
        (RewardMode::FreeEnergy, 10) => (1.02, 0.0),
        (RewardMode::FreeEnergy, 12) => (2.0, 0.0),
        (RewardMode::FreeEnergy, 14) => (0.0, 2.0),
        (RewardMode::FreeEnergyFidelity, 8) => (0.8, 0.0),
        (RewardMode::FreeEnergyFidelity, 10) => (1.02, 0.0),
        (RewardMode::FreeEnergyFidelity, 12) => (1.16, 0.0),
        (RewardMode::FreeEnergyFidelity, 14) => (0.0, 2.0),
        _ => (1.0, 0.0),
    }
}

/// Index of the best candidate under the weighted error; ties fall to the
/// fewest CNOTs, then the fewest gates, then the earliest episode.
pub fn filter_best(
    records: &[CandidateRecord],
    energy_weight: f64,
    entropy_weight: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        let s = r.score(energy_weight, entropy_weight);
        if !s.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((j, sj)) => {
                let rj = &records[j];
                s < sj
                    || (s == sj
                        && (r.cnot_count, r.gate_count, r.episode)
                            < (rj.cnot_count, rj.gate_count, rj.episode))
            }
        };
        if better {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// CNOT count of a first-order product-formula circuit for `h`: each
/// non-identity term of weight `w` costs `2 (w - 1)` CNOTs per layer (a
/// CNOT ladder down and back up around one rotation).
pub fn trotter_cnot_count(h: &PauliSum, layers: usize) -> usize {
    let per_layer: usize = h
        .terms()
        .iter()
        .map(|t| {
            let w = t.weight();
            if w >= 1 {
                2 * (w - 1)
            } else {
                0
            }
        })
        .sum();
    per_layer * layers
}

/// How many times fewer CNOTs the candidate uses than the baseline.
pub fn cnot_improvement(baseline: usize, candidate: usize) -> f64 {
    if candidate == 0 {
        return f64::INFINITY;
    }
    baseline as f64 / candidate as f64
}

/// A least-squares fit with enough covariance information to draw
/// pointwise confidence bands by the delta method.
#[derive(Debug, Clone)]
pub struct CurveFit {
    /// Fitted parameters.
    pub params: Vec<f64>,
    /// Parameter covariance, row-major `p x p`, already scaled by the
    /// residual variance.
    pub covariance: Vec<f64>,
    /// Unbiased residual variance estimate.
    pub residual_variance: f64,
    /// Residual degrees of freedom.
    pub dof: usize,
    /// Sum of squared residuals.
    pub sse: f64,
    /// Set when the solver hit a flat or rank-deficient direction; the
    /// band is then unreliable.
    pub degenerate: bool,
}

impl CurveFit {
    /// Half-width of the two-sided confidence band at a point with model
    /// Jacobian row `j`, at confidence `level`.
    pub fn band_half_width(&self, j: &[f64], level: f64) -> Result<f64> {
        let p = self.params.len();
        if j.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: j.len() });
        }
        if self.dof == 0 {
            return Err(Error::invalid("no residual degrees of freedom for a band"));
        }
        let mut quad = 0.0;
        for r in 0..p {
            for c in 0..p {
                quad += j[r] * self.covariance[r * p + c] * j[c];
            }
        }
        let t = t_quantile(self.dof as f64, 0.5 + level / 2.0)?;
        Ok(t * quad.max(0.0).sqrt())
    }
}

/// Solves dense `a x = b` (row-major, n x n) by Gaussian elimination with
/// partial pivoting.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return Err(Error::invalid("singular system in least-squares solve"));
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s / a[col * n + col];
    }
    Ok(())
}

/// Inverts a dense symmetric positive matrix via column-by-column solves.
fn invert_dense(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut m = a.to_vec();
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        solve_dense(&mut m, &mut e, n)?;
        for r in 0..n {
            inv[r * n + col] = e[r];
        }
    }
    Ok(inv)
}

/// Linear least squares by Householder QR on the design matrix.
///
/// Returns the coefficient vector and the sum of squared residuals.
fn qr_least_squares(design: &[f64], rows: usize, cols: usize, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    if rows < cols {
        return Err(Error::invalid("least squares needs at least as many points as parameters"));
    }
    let mut a = design.to_vec();
    let mut b = y.to_vec();
    for k in 0..cols {
        // Householder vector for column k below the diagonal.
        let mut norm = 0.0;
        for r in k..rows {
            norm += a[r * cols + k] * a[r * cols + k];
        }
        let norm = norm.sqrt();
        if norm < 1e-300 {
            return Err(Error::invalid("rank-deficient design matrix"));
        }
        let alpha = if a[k * cols + k] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; rows - k];
        v[0] = a[k * cols + k] - alpha;
        for r in k + 1..rows {
            v[r - k] = a[r * cols + k];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv < 1e-300 {
            continue;
        }
        // Apply I - 2 v v^T / (v^T v) to the remaining columns and to b.
        for c in k..cols {
            let mut dot = 0.0;
            for r in k..rows {
                dot += v[r - k] * a[r * cols + c];
            }
            let f = 2.0 * dot / vtv;
            for r in k..rows {
                a[r * cols + c] -= f * v[r - k];
            }
        }
        let mut dot = 0.0;
        for r in k..rows {
            dot += v[r - k] * b[r];
        }
        let f = 2.0 * dot / vtv;
        for r in k..rows {
            b[r] -= f * v[r - k];
        }
    }
    // Back-substitute R x = Q^T y.
    let mut x = vec![0.0; cols];
    for col in (0..cols).rev() {
        let mut s = b[col];
        for c in col + 1..cols {
            s -= a[col * cols + c] * x[c];
        }
        let d = a[col * cols + col];
        if d.abs() < 1e-300 {
            return Err(Error::invalid("rank-deficient design matrix"));
        }
        x[col] = s / d;
    }
    let sse: f64 = b[cols..rows].iter().map(|r| r * r).sum();
    Ok((x, sse))
}

fn covariance_from_design(
    design: &[f64],
    rows: usize,
    cols: usize,
    residual_variance: f64,
) -> Result<Vec<f64>> {
    // Sigma = s^2 (X^T X)^{-1}.
    let mut xtx = vec![0.0; cols * cols];
    for r in 0..rows {
        for i in 0..cols {
            for j in 0..cols {
                xtx[i * cols + j] += design[r * cols + i] * design[r * cols + j];
            }
        }
    }
    let mut cov = invert_dense(&xtx, cols)?;
    for v in &mut cov {
        *v *= residual_variance;
    }
    Ok(cov)
}

/// Fits `y = c0 + c1 x + c2 x^2 + c3 x^3`.
pub fn fit_cubic(xs: &[f64], ys: &[f64]) -> Result<CurveFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let rows = xs.len();
    let cols = 4;
    if rows < cols {
        return Err(Error::invalid("cubic fit needs at least four points"));
    }
    let mut design = Vec::with_capacity(rows * cols);
    for &x in xs {
        let mut p = 1.0;
        for _ in 0..cols {
            design.push(p);
            p *= x;
        }
    }
    let (params, sse) = qr_least_squares(&design, rows, cols, ys)?;
    let dof = rows - cols;
    let residual_variance = if dof > 0 { sse / dof as f64 } else { 0.0 };
    let covariance = covariance_from_design(&design, rows, cols, residual_variance)?;
    Ok(CurveFit { params, covariance, residual_variance, dof, sse, degenerate: false })
}

/// Jacobian row of the cubic model at `x`.
pub fn cubic_jacobian(x: f64) -> [f64; 4] {
    [1.0, x, x * x, x * x * x]
}

pub fn cubic_predict(params: &[f64], x: f64) -> f64 {
    params[0] + x * (params[1] + x * (params[2] + x * params[3]))
}

pub fn exponential_predict(params: &[f64], x: f64) -> f64 {
    params[0] * (params[1] * x).exp() + params[2]
}

/// Jacobian row of `a e^{b x} + c` at `x`.
pub fn exponential_jacobian(params: &[f64], x: f64) -> [f64; 3] {
    let e = (params[1] * x).exp();
    [e, params[0] * x * e, 1.0]
}

fn exponential_sse(params: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys.iter())
        .map(|(&x, &y)| {
            let r = exponential_predict(params, x) - y;
            r * r
        })
        .sum()
}

/// Levenberg-Marquardt refinement from one starting point.
fn lm_refine(start: [f64; 3], xs: &[f64], ys: &[f64]) -> ([f64; 3], f64) {
    let mut params = start;
    let mut lambda = 1e-3;
    let mut sse = exponential_sse(&params, xs, ys);
    for _ in 0..200 {
        // Normal equations J^T J + lambda diag, J^T r.
        let mut jtj = [0.0f64; 9];
        let mut jtr = [0.0f64; 3];
        for (&x, &y) in xs.iter().zip(ys.iter()) {
            let j = exponential_jacobian(&params, x);
            let r = exponential_predict(&params, x) - y;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a * 3 + b] += j[a] * j[b];
                }
            }
        }
        let mut step_ok = false;
        for _ in 0..12 {
            let mut m = jtj;
            for d in 0..3 {
                m[d * 3 + d] += lambda * (1.0 + jtj[d * 3 + d]);
            }
            let mut rhs = [-jtr[0], -jtr[1], -jtr[2]];
            if solve_dense(&mut m, &mut rhs, 3).is_err() {
                lambda *= 10.0;
                continue;
            }
            let trial = [params[0] + rhs[0], params[1] + rhs[1], params[2] + rhs[2]];
            if !trial.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let trial_sse = exponential_sse(&trial, xs, ys);
            if trial_sse.is_finite() && trial_sse < sse {
                let improvement = sse - trial_sse;
                params = trial;
                sse = trial_sse;
                lambda = (lambda * 0.3).max(1e-12);
                step_ok = true;
                if improvement < 1e-14 * (1.0 + sse) {
                    return (params, sse);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !step_ok {
            break;
        }
    }
    (params, sse)
}

/// Fits `y = a e^{b x} + c` by Levenberg-Marquardt from a small grid of
/// growth-rate starts, keeping the best run.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<CurveFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let rows = xs.len();
    if rows < 3 {
        return Err(Error::invalid("exponential fit needs at least three points"));
    }
    let x_span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if x_span.is_nan() || x_span <= 0.0 {
        return Err(Error::invalid("exponential fit needs distinct x values"));
    }
    let y_mean = ys.iter().sum::<f64>() / rows as f64;
    let y_span = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let amp = if y_span > 0.0 { y_span } else { 1.0 };

    let mut best: Option<([f64; 3], f64)> = None;
    for &scale in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        for &sign in &[1.0, -1.0] {
            let b0 = sign * scale / x_span;
            for &a0 in &[amp, -amp] {
                let start = [a0, b0, y_mean];
                let (p, sse) = lm_refine(start, xs, ys);
                if best.as_ref().is_none_or(|(_, s)| sse < *s) {
                    best = Some((p, sse));
                }
            }
        }
    }
    let (params, sse) = best.expect("grid is non-empty");

    let dof = rows.saturating_sub(3);
    let residual_variance = if dof > 0 { sse / dof as f64 } else { 0.0 };
    let mut design = Vec::with_capacity(rows * 3);
    for &x in xs {
        design.extend_from_slice(&exponential_jacobian(&params, x));
    }
    let (covariance, degenerate) =
        match covariance_from_design(&design, rows, 3, residual_variance) {
            Ok(c) => {
                let flat = params[0].abs() * x_span * params[1].abs() < 1e-10;
                (c, flat)
            }
            Err(_) => (vec![0.0; 9], true),
        };
    Ok(CurveFit {
        params: params.to_vec(),
        covariance,
        residual_variance,
        dof,
        sse,
        degenerate,
    })
}

/// One row of a tabulated confidence band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPoint {
    pub x: f64,
    pub y: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Tabulates the cubic fit with its band over the given points.
pub fn cubic_band(fit: &CurveFit, xs: &[f64], level: f64) -> Result<Vec<BandPoint>> {
    xs.iter()
        .map(|&x| {
            let y = cubic_predict(&fit.params, x);
            let h = fit.band_half_width(&cubic_jacobian(x), level)?;
            Ok(BandPoint { x, y, lower: y - h, upper: y + h })
        })
        .collect()
}

/// Tabulates the exponential fit with its band over the given points.
pub fn exponential_band(fit: &CurveFit, xs: &[f64], level: f64) -> Result<Vec<BandPoint>> {
    xs.iter()
        .map(|&x| {
            let y = exponential_predict(&fit.params, x);
            let h = fit.band_half_width(&exponential_jacobian(&fit.params, x), level)?;
            Ok(BandPoint { x, y, lower: y - h, upper: y + h })
        })
        .collect()
}
