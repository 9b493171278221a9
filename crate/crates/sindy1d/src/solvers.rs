//! Gram-compatible sparse solvers: ridge, STLSQ, ElasticNet coordinate
//! descent and SR3.
//!
//! Every method standardizes columns by their root-mean-square (from the
//! Gram diagonal) and the target by its RMS, solves in the standardized
//! frame where thresholds are dimensionless, and unscales coefficients back
//! to physical columns. The standardized system has a unit-diagonal Gram.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::GramSystem;

/// Penalty weight: fixed, or tuned by a 10-point logarithmic sweep that
/// minimizes the Gram-computable Bayesian information criterion
/// `n ln(SSE/n) + k ln(n)` (ties resolve to the larger, i.e. sparser,
/// penalty).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySpec {
    Fixed(f64),
    Sweep,
}

/// Solver selection with hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolveMethod {
    Ridge { lambda: f64 },
    Stlsq { lambda: f64, threshold: f64 },
    ElasticNet { alpha: PenaltySpec, l1_ratio: f64 },
    Sr3 { lambda: PenaltySpec, kappa: f64 },
}

impl SolveMethod {
    /// Reference hyperparameters for PDE identification.
    pub fn default_stlsq() -> Self {
        SolveMethod::Stlsq {
            lambda: 1e-6,
            threshold: 0.1,
        }
    }

    /// Standardized penalty 0.02: soft-thresholds dimensionless coefficients
    /// near 0.018, which zeroes noise terms exactly so the ensemble
    /// consensus count can discriminate.
    pub fn default_elasticnet() -> Self {
        SolveMethod::ElasticNet {
            alpha: PenaltySpec::Fixed(0.02),
            l1_ratio: 0.9,
        }
    }

    /// kappa = 1 with lambda = 4e-4 hard-thresholds standardized
    /// coefficients at sqrt(2 lambda / kappa) ~ 0.028 without shrinking the
    /// survivors.
    pub fn default_sr3() -> Self {
        SolveMethod::Sr3 {
            lambda: PenaltySpec::Fixed(4e-4),
            kappa: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolveMethod::Ridge { .. } => "ridge",
            SolveMethod::Stlsq { .. } => "stlsq",
            SolveMethod::ElasticNet { .. } => "elasticnet",
            SolveMethod::Sr3 { .. } => "sr3",
        }
    }
}

/// Solution of one sparse regression: physical coefficients aligned with the
/// Gram's columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSolution {
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub method: String,
    pub hyperparameters: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl SparseSolution {
    /// Indices of nonzero coefficients.
    pub fn active_set(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Standardized copy of a Gram pair: unit-diagonal G-hat, b-hat, plus the
/// scales needed to unscale coefficients.
struct Standardized {
    g: Vec<f64>,
    b: Vec<f64>,
    col_rms: Vec<f64>,
    y_rms: f64,
    /// Indices of columns with nonzero RMS (the solve frame).
    live: Vec<usize>,
    p_full: usize,
}

fn standardize(gram: &GramSystem) -> Standardized {
    let p_full = gram.p();
    let n = gram.n_rows().max(1) as f64;
    let col_rms: Vec<f64> = (0..p_full).map(|j| gram.rms(j)).collect();
    let y_rms = (gram.y_ss() / n).max(0.0).sqrt();
    let live: Vec<usize> = (0..p_full).filter(|&j| col_rms[j] > 0.0).collect();
    let q = live.len();
    let mut g = vec![0.0; q * q];
    let mut b = vec![0.0; q];
    let ys = if y_rms > 0.0 { y_rms } else { 1.0 };
    for (a, &i) in live.iter().enumerate() {
        for (c, &j) in live.iter().enumerate() {
            g[a * q + c] = gram.g(i, j) / (n * col_rms[i] * col_rms[j]);
        }
        b[a] = gram.b()[i] / (n * col_rms[i] * ys);
    }
    Standardized {
        g,
        b,
        col_rms,
        y_rms,
        live,
        p_full,
    }
}

impl Standardized {
    fn unscale(&self, xi_hat: &[f64]) -> Vec<f64> {
        let ys = if self.y_rms > 0.0 { self.y_rms } else { 1.0 };
        let mut out = vec![0.0; self.p_full];
        for (a, &j) in self.live.iter().enumerate() {
            out[j] = xi_hat[a] * ys / self.col_rms[j];
        }
        out
    }

    fn q(&self) -> usize {
        self.live.len()
    }

    /// Standardized residual 1 - 2 b.xi + xi.G.xi (equals SSE / (n y_rms^2)).
    fn sse(&self, xi: &[f64]) -> f64 {
        let q = self.q();
        let mut lin = 0.0;
        let mut quad = 0.0;
        for i in 0..q {
            lin += self.b[i] * xi[i];
            let mut gx = 0.0;
            for j in 0..q {
                gx += self.g[i * q + j] * xi[j];
            }
            quad += xi[i] * gx;
        }
        1.0 - 2.0 * lin + quad
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix (row-major
/// dense). Fails with the offending pivot when the matrix is singular.
fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= scale * 1e-14 {
                    return Err(Error::Singular { col: i, pivot: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn chol_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solves (G + lambda I) xi = b on a subset of standardized columns.
fn ridge_on(sd: &Standardized, active: &[usize], lambda: f64) -> Result<Vec<f64>> {
    let q = sd.q();
    let m = active.len();
    let mut a = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            a[r * m + c] = sd.g[i * q + j];
        }
        a[r * m + r] += lambda;
        rhs[r] = sd.b[i];
    }
    let l = cholesky(&a, m)?;
    Ok(chol_solve(&l, m, &rhs))
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

const MAX_CD_SWEEPS: usize = 10_000;
const CD_TOL: f64 = 1e-10;

/// ElasticNet objective in the standardized frame.
fn en_objective(sd: &Standardized, xi: &[f64], alpha: f64, l1_ratio: f64) -> f64 {
    let q = sd.q();
    let mut quad = 0.0;
    let mut lin = 0.0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for i in 0..q {
        lin += sd.b[i] * xi[i];
        l1 += xi[i].abs();
        l2 += xi[i] * xi[i];
        let mut gx = 0.0;
        for j in 0..q {
            gx += sd.g[i * q + j] * xi[j];
        }
        quad += xi[i] * gx;
    }
    0.5 * quad - lin + alpha * l1_ratio * l1 + 0.5 * alpha * (1.0 - l1_ratio) * l2
}

/// Cyclic coordinate descent for the elastic net on the standardized Gram.
/// Stops when the largest coefficient change drops below tolerance or the
/// sweep budget runs out; a non-finite iterate is the error case.
/// Returns the solution and the per-sweep objective trace.
fn elasticnet_cd(
    sd: &Standardized,
    alpha: f64,
    l1_ratio: f64,
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = sd.q();
    let mut xi = warm.map_or_else(|| vec![0.0; q], <[f64]>::to_vec);
    let penalty_l1 = alpha * l1_ratio;
    let denom_extra = alpha * (1.0 - l1_ratio);
    let mut trace = Vec::new();
    for _ in 0..MAX_CD_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..q {
            let mut rho = sd.b[j];
            for k in 0..q {
                if k != j {
                    rho -= sd.g[j * q + k] * xi[k];
                }
            }
            let new = soft_threshold(rho, penalty_l1) / (sd.g[j * q + j] + denom_extra);
            max_delta = max_delta.max((new - xi[j]).abs());
            xi[j] = new;
        }
        trace.push(en_objective(sd, &xi, alpha, l1_ratio));
        if !max_delta.is_finite() {
            return Err(Error::NoConvergence {
                method: "elasticnet",
                iterations: trace.len(),
                delta: max_delta,
            });
        }
        if max_delta < CD_TOL {
            break;
        }
    }
    Ok((xi, trace))
}

/// SR3 alternation: xi relaxes through (G + kappa I)^-1, the auxiliary w is
/// hard-thresholded at sqrt(2 lambda / kappa). Returns (w, xi).
fn sr3_iterate(sd: &Standardized, lambda: f64, kappa: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = sd.q();
    let mut a = sd.g.clone();
    for i in 0..q {
        a[i * q + i] += kappa;
    }
    let l = cholesky(&a, q)?;
    let threshold = (2.0 * lambda / kappa).sqrt();
    let mut w = vec![0.0; q];
    let mut xi = vec![0.0; q];
    for it in 0..MAX_CD_SWEEPS {
        let rhs: Vec<f64> = (0..q).map(|i| sd.b[i] + kappa * w[i]).collect();
        xi = chol_solve(&l, q, &rhs);
        let new_w: Vec<f64> = xi
            .iter()
            .map(|&v| if v.abs() >= threshold { v } else { 0.0 })
            .collect();
        let delta = new_w
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = new_w;
        if !delta.is_finite() {
            return Err(Error::NoConvergence {
                method: "sr3",
                iterations: it + 1,
                delta,
            });
        }
        if delta < CD_TOL {
            break;
        }
    }
    Ok((w, xi))
}

/// 10-point logarithmic sweep grid.
fn sweep_grid(lo: f64, hi: f64) -> Vec<f64> {
    let n = 10;
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            lo * (hi / lo).powf(t)
        })
        .collect()
}

/// Bayesian information criterion of a standardized solution, computable
/// from the Gram pair alone (up to an additive constant shared by all
/// candidates): n ln(SSE_std) + k ln(n).
fn bic(sd: &Standardized, xi: &[f64], n_rows: u64) -> f64 {
    let n = n_rows.max(1) as f64;
    let sse = sd.sse(xi).max(1e-300);
    let k = xi.iter().filter(|c| **c != 0.0).count() as f64;
    n * sse.ln() + k * n.ln()
}

/// Solves the accumulated system with the chosen method.
pub fn solve(gram: &GramSystem, method: &SolveMethod) -> Result<SparseSolution> {
    let sd = standardize(gram);
    let mut warnings = Vec::new();
    if gram.n_rows() < gram.p() as u64 {
        warnings.push(format!(
            "gram has fewer rows ({}) than columns ({})",
            gram.n_rows(),
            gram.p()
        ));
    }
    let mut hyper = BTreeMap::new();
    let xi_hat: Vec<f64> = match method {
        SolveMethod::Ridge { lambda } => {
            hyper.insert("lambda".into(), *lambda);
            let all: Vec<usize> = (0..sd.q()).collect();
            ridge_on(&sd, &all, *lambda)?
        }
        SolveMethod::Stlsq { lambda, threshold } => {
            hyper.insert("lambda".into(), *lambda);
            hyper.insert("threshold".into(), *threshold);
            let mut active: Vec<usize> = (0..sd.q()).collect();
            let mut xi = vec![0.0; sd.q()];
            for _ in 0..20 {
                if active.is_empty() {
                    break;
                }
                let sol = ridge_on(&sd, &active, *lambda)?;
                let survivors: Vec<usize> = active
                    .iter()
                    .zip(&sol)
                    .filter(|(_, c)| c.abs() >= *threshold)
                    .map(|(&i, _)| i)
                    .collect();
                xi = vec![0.0; sd.q()];
                for (&i, &c) in active.iter().zip(&sol) {
                    if c.abs() >= *threshold {
                        xi[i] = c;
                    }
                }
                if survivors == active {
                    break;
                }
                active = survivors;
            }
            xi
        }
        SolveMethod::ElasticNet { alpha, l1_ratio } => {
            let alpha = match alpha {
                PenaltySpec::Fixed(a) => *a,
                PenaltySpec::Sweep => {
                    let mut best = (f64::INFINITY, 0.0);
                    let mut warm: Option<Vec<f64>> = None;
                    let mut grid = sweep_grid(1e-6, 1e-1);
                    grid.reverse(); // warm-start from the sparsest end
                    for a in grid {
                        let (xi, _) = elasticnet_cd(&sd, a, *l1_ratio, warm.as_deref())?;
                        let score = bic(&sd, &xi, gram.n_rows());
                        // Strict improvement required, so ties keep the
                        // larger (earlier) penalty.
                        if score + 1e-9 * score.abs().max(1.0) < best.0 {
                            best = (score, a);
                        }
                        warm = Some(xi);
                    }
                    best.1
                }
            };
            hyper.insert("alpha".into(), alpha);
            hyper.insert("l1_ratio".into(), *l1_ratio);
            elasticnet_cd(&sd, alpha, *l1_ratio, None)?.0
        }
        SolveMethod::Sr3 { lambda, kappa } => {
            let lambda = match lambda {
                PenaltySpec::Fixed(l) => *l,
                PenaltySpec::Sweep => {
                    let mut best = (f64::INFINITY, 0.0);
                    for l in sweep_grid(1e-8, 1e-2).into_iter().rev() {
                        let (w, _) = sr3_iterate(&sd, l, *kappa)?;
                        let score = bic(&sd, &w, gram.n_rows());
                        if score + 1e-9 * score.abs().max(1.0) < best.0 {
                            best = (score, l);
                        }
                    }
                    best.1
                }
            };
            hyper.insert("lambda".into(), lambda);
            hyper.insert("kappa".into(), *kappa);
            sr3_iterate(&sd, lambda, *kappa)?.0
        }
    };
    let coefficients = sd.unscale(&xi_hat);
    if !coefficients.iter().all(|c| c.is_finite()) {
        return Err(Error::NoConvergence {
            method: "solve",
            iterations: 0,
            delta: f64::NAN,
        });
    }
    Ok(SparseSolution {
        columns: gram.columns().to_vec(),
        coefficients,
        method: method.name().to_string(),
        hyperparameters: hyper,
        warnings,
    })
}

/// Test hook: runs elastic-net coordinate descent on a Gram system and
/// returns (solution coefficients, per-sweep objective values).
pub fn elasticnet_trace(
    gram: &GramSystem,
    alpha: f64,
    l1_ratio: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sd = standardize(gram);
    let (xi, trace) = elasticnet_cd(&sd, alpha, l1_ratio, None)?;
    Ok((sd.unscale(&xi), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureBatch;
    use rand::Rng;

    /// Builds a Gram from an explicit design matrix.
    fn gram_from(columns: Vec<Vec<f64>>, y: Vec<f64>) -> GramSystem {
        let names: Vec<String> = (0..columns.len()).map(|j| format!("c{j}")).collect();
        let batch = FeatureBatch {
            names: names.clone(),
            columns,
            y,
        };
        let mut gram = GramSystem::new(names);
        gram.accumulate(&batch).unwrap();
        gram
    }

    fn synthetic_sparse(
        rows: usize,
        p: usize,
        support: &[(usize, f64)],
        seed: u64,
    ) -> GramSystem {
        let mut rng = crate::rng::stream(seed, 60, 0);
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..rows)
            .map(|r| support.iter().map(|(j, c)| c * columns[*j][r]).sum())
            .collect();
        gram_from(columns, y)
    }

    #[test]
    fn ridge_solves_decoupled_diagonal_system() {
        // Two orthogonal columns; y = 2 * c0.
        let rows = 64;
        let c0: Vec<f64> = (0..rows).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c1: Vec<f64> = (0..rows)
            .map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let y: Vec<f64> = c0.iter().map(|v| 2.0 * v).collect();
        let gram = gram_from(vec![c0, c1], y);
        let sol = solve(&gram, &SolveMethod::Ridge { lambda: 0.0 }).unwrap();
        assert!((sol.coefficients[0] - 2.0).abs() < 1e-10);
        assert!(sol.coefficients[1].abs() < 1e-10);
    }

    #[test]
    fn ridge_reports_singularity_without_regularization() {
        let c: Vec<f64> = (0..32).map(|i| (i as f64 * 0.2).sin()).collect();
        let c2 = c.clone(); // exact duplicate column
        let y = c.clone();
        let gram = gram_from(vec![c, c2], y);
        assert!(matches!(
            solve(&gram, &SolveMethod::Ridge { lambda: 0.0 }),
            Err(Error::Singular { .. })
        ));
        // Tiny ridge regularization restores solvability.
        assert!(solve(&gram, &SolveMethod::Ridge { lambda: 1e-6 }).is_ok());
    }

    #[test]
    fn all_methods_recover_a_three_sparse_signal() {
        let support = [(1usize, 1.5f64), (4, -2.0), (7, 0.7)];
        let gram = synthetic_sparse(800, 10, &support, 9);
        let methods = [
            SolveMethod::default_stlsq(),
            SolveMethod::ElasticNet {
                alpha: PenaltySpec::Fixed(1e-6),
                l1_ratio: 0.9,
            },
            SolveMethod::Sr3 {
                lambda: PenaltySpec::Fixed(1e-4),
                kappa: 1.0,
            },
            SolveMethod::Ridge { lambda: 1e-10 },
        ];
        for method in methods {
            let sol = solve(&gram, &method).unwrap();
            for (j, c) in &support {
                assert!(
                    (sol.coefficients[*j] - c).abs() < 1e-5,
                    "{}: coeff {} = {}",
                    method.name(),
                    j,
                    sol.coefficients[*j]
                );
            }
            if method.name() != "ridge" {
                let active = sol.active_set();
                let mut expect: Vec<usize> = support.iter().map(|(j, _)| *j).collect();
                expect.sort_unstable();
                assert_eq!(active, expect, "{} support", method.name());
            }
        }
    }

    #[test]
    fn elasticnet_with_huge_alpha_returns_zero() {
        let gram = synthetic_sparse(200, 5, &[(0, 1.0)], 3);
        let sol = solve(
            &gram,
            &SolveMethod::ElasticNet {
                alpha: PenaltySpec::Fixed(1e6),
                l1_ratio: 0.9,
            },
        )
        .unwrap();
        assert!(sol.coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn elasticnet_objective_is_non_increasing() {
        let gram = synthetic_sparse(300, 8, &[(2, 1.0), (5, -0.5)], 17);
        let (_, trace) = elasticnet_trace(&gram, 1e-3, 0.9).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn stlsq_support_is_invariant_under_column_rescaling() {
        let support = [(1usize, 1.5f64), (4, -2.0)];
        let mut rng = crate::rng::stream(21, 60, 0);
        let rows = 400;
        let columns: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..rows)
            .map(|r| support.iter().map(|(j, c)| c * columns[*j][r]).sum())
            .collect();
        let gram_a = gram_from(columns.clone(), y.clone());
        // Rescale one active and one inactive column by positive constants.
        let mut scaled = columns;
        for v in &mut scaled[1] {
            *v *= 250.0;
        }
        for v in &mut scaled[3] {
            *v *= 1e-3;
        }
        let gram_b = gram_from(scaled, y);
        let method = SolveMethod::default_stlsq();
        let a = solve(&gram_a, &method).unwrap();
        let b = solve(&gram_b, &method).unwrap();
        assert_eq!(a.active_set(), b.active_set());
    }

    #[test]
    fn sweep_resolves_to_a_recorded_alpha() {
        let gram = synthetic_sparse(300, 6, &[(0, 1.0)], 5);
        let sol = solve(
            &gram,
            &SolveMethod::ElasticNet {
                alpha: PenaltySpec::Sweep,
                l1_ratio: 0.9,
            },
        )
        .unwrap();
        // Noiseless data: the information criterion favors the weakest
        // penalty, leaving the coefficient essentially unshrunk.
        assert!(sol.hyperparameters.contains_key("alpha"));
        assert!((sol.coefficients[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn undersized_gram_warns() {
        let gram = synthetic_sparse(4, 6, &[(0, 1.0)], 5);
        let sol = solve(&gram, &SolveMethod::Ridge { lambda: 1e-6 }).unwrap();
        assert!(!sol.warnings.is_empty());
    }
}
