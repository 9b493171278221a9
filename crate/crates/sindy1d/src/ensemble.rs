//! Bagging over realizations, coefficient-stability and consensus-frequency
//! aggregation, dual-threshold selection, adaptive iterative pruning and the
//! final refined regression.
//!
//! Estimator m draws a fixed fraction of the realizations without
//! replacement using its own RNG stream, accumulates a fresh Gram pair over
//! the drawn realizations and solves it. Terms align across estimators by
//! name. Determinism contract: per-estimator streams are keyed by (seed,
//! estimator index), so thread count never changes results.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{evaluate_features, FeatureBatch, RegressionTarget};
use crate::gram::GramSystem;
use crate::grid::FieldSnapshot;
use crate::library::MonomialTerm;
use crate::rng::{stream, tags};
use crate::solvers::{solve, SolveMethod, SparseSolution};

/// Noise floor on physical coefficients for consensus counting.
pub const LAMBDA_NOISE: f64 = 1e-5;
/// Division guard in the coefficient-of-variation.
pub const CV_EPSILON: f64 = 1e-10;

/// Ensemble configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Estimator count M.
    pub estimators: usize,
    /// Fraction of realizations drawn (without replacement) per estimator.
    pub subsample_fraction: f64,
    /// Consensus frequency threshold.
    pub f_threshold: f64,
    /// Initial coefficient-of-variation threshold.
    pub cv_init: f64,
    /// Per-iteration decay of the CV threshold (1.0 keeps it fixed).
    pub cv_decay: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub method: SolveMethod,
}

impl EnsembleConfig {
    /// Reference configuration for PDE identification: 10 estimators, 80%
    /// subsampling, consensus 0.8, fixed CV threshold 0.15. SR3 with a
    /// small relaxation keeps the two-stage refinement meaningful (the
    /// full-library pass couples every column, so restricting to the stable
    /// terms genuinely tightens the spread) while its standardized hard
    /// threshold ~0.1 resolves collinear scheme twins the way unregularized
    /// refits do.
    pub fn pde_default(seed: u64) -> Self {
        Self {
            estimators: 10,
            subsample_fraction: 0.8,
            f_threshold: 0.8,
            cv_init: 0.15,
            cv_decay: 1.0,
            max_iterations: 10,
            seed,
            method: SolveMethod::Sr3 {
                lambda: crate::solvers::PenaltySpec::Fixed(5e-4),
                kappa: 0.1,
            },
        }
    }

    /// Reference configuration for SGS discovery: adaptive CV threshold
    /// starting at 0.5 with decay 0.5 over an 8-round schedule (the round-8
    /// threshold ~0.004 sits just above the coefficient-of-variation floor
    /// the bootstrap can resolve).
    pub fn sgs_default(seed: u64, method: SolveMethod) -> Self {
        Self {
            estimators: 10,
            subsample_fraction: 0.8,
            f_threshold: 0.8,
            cv_init: 0.5,
            cv_decay: 0.5,
            max_iterations: 8,
            seed,
            method,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators == 0 {
            return Err(Error::EnsembleConfig("estimator count must be >= 1".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::EnsembleConfig(
                "subsample fraction must lie in (0, 1]".into(),
            ));
        }
        if !(self.f_threshold > 0.0 && self.f_threshold <= 1.0) {
            return Err(Error::EnsembleConfig(
                "consensus threshold must lie in (0, 1]".into(),
            ));
        }
        if !(self.cv_decay > 0.0 && self.cv_decay <= 1.0) {
            return Err(Error::EnsembleConfig("cv decay must lie in (0, 1]".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::EnsembleConfig("max iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Supplies per-realization Gram contributions for a term subset. Bagging,
/// pruning and refinement all run against this interface so cached and
/// freshly-evaluated features share one code path.
pub trait GramSource: Sync {
    /// Number of drawable units (realizations, or realization-width pairs).
    fn units(&self) -> usize;
    /// Full library column names.
    fn term_names(&self) -> &[String];
    /// Gram contribution of one unit restricted to `term_indices` (indices
    /// into the full library, ascending).
    fn unit_gram(&self, unit: usize, term_indices: &[usize]) -> Result<GramSystem>;
}

/// Evaluates features on demand from snapshots.
pub struct SnapshotGramSource<'a> {
    snapshots: &'a [FieldSnapshot],
    terms: &'a [MonomialTerm],
    target: RegressionTarget,
    names: Vec<String>,
}

impl<'a> SnapshotGramSource<'a> {
    pub fn new(
        snapshots: &'a [FieldSnapshot],
        terms: &'a [MonomialTerm],
        target: RegressionTarget,
    ) -> Self {
        let names = terms.iter().map(|t| t.name.clone()).collect();
        Self {
            snapshots,
            terms,
            target,
            names,
        }
    }
}

impl GramSource for SnapshotGramSource<'_> {
    fn units(&self) -> usize {
        self.snapshots.len()
    }

    fn term_names(&self) -> &[String] {
        &self.names
    }

    fn unit_gram(&self, unit: usize, term_indices: &[usize]) -> Result<GramSystem> {
        let subset: Vec<MonomialTerm> = term_indices
            .iter()
            .map(|&i| self.terms[i].clone())
            .collect();
        let batch = evaluate_features(&self.snapshots[unit], &subset, &self.target)?;
        let mut gram = GramSystem::new(batch.names.clone());
        gram.accumulate(&batch)?;
        Ok(gram)
    }
}

/// Serves submatrices of precomputed full-library per-unit Gram pairs;
/// pruning iterations then cost O(p^2) per unit instead of a feature pass.
pub struct CachedGramSource {
    grams: Vec<GramSystem>,
    names: Vec<String>,
    /// Largest single feature batch materialized while building the cache.
    pub peak_batch_bytes: usize,
}

impl CachedGramSource {
    /// Builds the cache by evaluating every unit's features once, in
    /// parallel; `build` maps a unit index to its feature batch.
    pub fn build<F>(units: usize, names: Vec<String>, build: F) -> Result<Self>
    where
        F: Fn(usize) -> Result<FeatureBatch> + Sync,
    {
        let grams: Vec<(GramSystem, usize)> = (0..units)
            .into_par_iter()
            .map(|u| {
                let batch = build(u)?;
                let bytes = batch.bytes();
                let mut gram = GramSystem::new(batch.names.clone());
                gram.accumulate(&batch)?;
                Ok((gram, bytes))
            })
            .collect::<Result<_>>()?;
        let peak = grams.iter().map(|(_, b)| *b).max().unwrap_or(0);
        Ok(Self {
            grams: grams.into_iter().map(|(g, _)| g).collect(),
            names,
            peak_batch_bytes: peak,
        })
    }
}

impl GramSource for CachedGramSource {
    fn units(&self) -> usize {
        self.grams.len()
    }

    fn term_names(&self) -> &[String] {
        &self.names
    }

    fn unit_gram(&self, unit: usize, term_indices: &[usize]) -> Result<GramSystem> {
        Ok(self.grams[unit].submatrix(term_indices))
    }
}

/// Ascending sample of `count` distinct indices from 0..n.
fn sample_without_replacement(n: usize, count: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut drawn = pool[..count].to_vec();
    drawn.sort_unstable();
    drawn
}

/// Fits M estimators on subsampled realizations; solutions share the column
/// order of `term_indices`.
pub fn bootstrap_fit(
    source: &dyn GramSource,
    term_indices: &[usize],
    cfg: &EnsembleConfig,
) -> Result<Vec<SparseSolution>> {
    cfg.validate()?;
    let n = source.units();
    let draw = (cfg.subsample_fraction * n as f64).ceil() as usize;
    if draw < 1 {
        return Err(Error::EnsembleConfig(format!(
            "subsample of {n} realizations at fraction {} is empty",
            cfg.subsample_fraction
        )));
    }
    // One feature pass per unit for the current term set, shared by all
    // estimators; per-estimator work is then pure Gram addition.
    let unit_grams: Vec<GramSystem> = (0..n)
        .into_par_iter()
        .map(|u| source.unit_gram(u, term_indices))
        .collect::<Result<_>>()?;
    (0..cfg.estimators)
        .map(|m| {
            let mut rng = stream(cfg.seed, tags::ENSEMBLE, m as u64);
            let drawn = sample_without_replacement(n, draw, &mut rng);
            let names: Vec<String> = term_indices
                .iter()
                .map(|&i| source.term_names()[i].clone())
                .collect();
            let mut gram = GramSystem::new(names);
            for &u in &drawn {
                gram.merge(&unit_grams[u])?;
            }
            solve(&gram, &cfg.method)
        })
        .collect()
}

/// Per-term ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStats {
    pub name: String,
    /// Mean over the selected estimator subset S_j.
    pub mean: f64,
    /// Population standard deviation over S_j.
    pub std: f64,
    /// std / (|mean| + epsilon).
    pub cv: f64,
    /// |S_j| / M.
    pub consensus: f64,
    /// CV needs at least two selected estimators to be meaningful.
    pub cv_defined: bool,
    pub selected: bool,
}

/// Aggregates aligned solutions into per-term statistics with the
/// dual-threshold selection rule.
pub fn aggregate(
    solutions: &[SparseSolution],
    cfg: &EnsembleConfig,
    cv_threshold: f64,
) -> Vec<TermStats> {
    let m = solutions.len();
    let p = solutions.first().map_or(0, |s| s.columns.len());
    (0..p)
        .map(|j| {
            let coeffs: Vec<f64> = solutions
                .iter()
                .map(|s| s.coefficients[j])
                .filter(|c| c.abs() > LAMBDA_NOISE)
                .collect();
            let sj = coeffs.len();
            let consensus = sj as f64 / m as f64;
            let (mean, std) = if sj == 0 {
                (0.0, 0.0)
            } else {
                let mu = coeffs.iter().sum::<f64>() / sj as f64;
                let var = coeffs.iter().map(|c| (c - mu) * (c - mu)).sum::<f64>() / sj as f64;
                (mu, var.sqrt())
            };
            let cv = std / (mean.abs() + CV_EPSILON);
            TermStats {
                name: solutions[0].columns[j].clone(),
                mean,
                std,
                cv,
                consensus,
                cv_defined: sj >= 2,
                selected: consensus >= cfg.f_threshold && cv <= cv_threshold,
            }
        })
        .collect()
}

/// One pruning iteration in the report history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cv_threshold: f64,
    pub active_before: usize,
    pub active_after: usize,
    pub stats: Vec<TermStats>,
}

/// Full ensemble discovery report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// Canonical names of the surviving terms.
    pub final_terms: Vec<String>,
    /// Refined-regression statistics over the surviving terms.
    pub refined: Vec<TermStats>,
    pub equation: String,
    pub collinearity_warning: bool,
    /// Largest accumulated sample count across estimators.
    pub peak_rows: u64,
}

impl EnsembleReport {
    pub fn refined_coefficient(&self, name: &str) -> Option<f64> {
        self.refined.iter().find(|t| t.name == name).map(|t| t.mean)
    }
}

/// Sort key that orders equation terms by their field factors first, so the
/// advection term precedes dispersion and diffusion as in the usual written
/// form. Parameter factors ("nu", "C1", "Delta^2") never start with the
/// field symbol.
fn equation_order_key(name: &str) -> (String, String) {
    let (mut fields, mut params) = (Vec::new(), Vec::new());
    for part in name.split('*') {
        if part.starts_with('u') {
            fields.push(part);
        } else {
            params.push(part);
        }
    }
    (fields.join("*"), params.join("*"))
}

/// Equation string like `u_t = -1.000*u*u_x|uw2 + 1.000*nu*u_xx|cd2`.
pub fn format_equation(target: &str, terms: &[(String, f64)]) -> String {
    if terms.is_empty() {
        return format!("{target} = 0");
    }
    let mut terms: Vec<&(String, f64)> = terms.iter().collect();
    terms.sort_by_key(|(name, _)| equation_order_key(name));
    let mut s = format!("{target} = ");
    for (i, (name, coef)) in terms.iter().enumerate() {
        if i == 0 {
            s.push_str(&format!("{coef:.3}*{name}"));
        } else if *coef >= 0.0 {
            s.push_str(&format!(" + {coef:.3}*{name}"));
        } else {
            s.push_str(&format!(" - {:.3}*{name}", coef.abs()));
        }
    }
    s
}

/// Iterative stability-based pruning with the adaptive CV threshold
/// `cv_init * decay^iter`, followed by a refined regression on the
/// survivors.
///
/// With decay < 1 the loop runs the full iteration budget so the tightening
/// threshold can keep pruning already-stable sets; a stable set under a
/// fixed threshold (decay = 1) is an exact fixed point, so the loop stops
/// there immediately.
pub fn iterative_prune(
    source: &dyn GramSource,
    cfg: &EnsembleConfig,
    target_name: &str,
) -> Result<EnsembleReport> {
    cfg.validate()?;
    let all: Vec<usize> = (0..source.term_names().len()).collect();
    if all.is_empty() {
        return Err(Error::EnsembleConfig("library is empty".into()));
    }
    let mut active = all;
    let mut iterations = Vec::new();
    let mut converged = false;
    let mut peak_rows = 0u64;
    let mut collinearity_warning = false;
    for iter in 0..cfg.max_iterations {
        let cv_threshold = cfg.cv_init * cfg.cv_decay.powi(iter as i32);
        let solutions = bootstrap_fit(source, &active, cfg)?;
        if iter == 0 {
            // Full-data collinearity check over the complete library.
            let full = full_gram(source, &active)?;
            peak_rows = peak_rows.max(full.n_rows());
            collinearity_warning = !full.near_collinear_pairs(1e-10).is_empty();
        }
        let stats = aggregate(&solutions, cfg, cv_threshold);
        let selected: Vec<usize> = active
            .iter()
            .zip(&stats)
            .filter(|(_, s)| s.selected)
            .map(|(&i, _)| i)
            .collect();
        iterations.push(IterationRecord {
            iteration: iter + 1,
            cv_threshold,
            active_before: active.len(),
            active_after: selected.len(),
            stats,
        });
        if selected.is_empty() {
            return Err(Error::AllTermsPruned {
                last_iteration: iter + 1,
                survivors: active
                    .iter()
                    .map(|&i| source.term_names()[i].clone())
                    .collect(),
            });
        }
        let stable = selected == active;
        active = selected;
        if stable {
            converged = true;
            if cfg.cv_decay == 1.0 {
                break;
            }
        } else {
            converged = false;
        }
    }
    let refined = refined_fit(source, &active, cfg)?;
    let final_terms: Vec<String> = active
        .iter()
        .map(|&i| source.term_names()[i].clone())
        .collect();
    let equation = format_equation(
        target_name,
        &refined
            .iter()
            .map(|t| (t.name.clone(), t.mean))
            .collect::<Vec<_>>(),
    );
    Ok(EnsembleReport {
        iterations,
        converged,
        final_terms,
        refined,
        equation,
        collinearity_warning,
        peak_rows,
    })
}

/// Refined regression restricted to the selected terms; reports coefficient
/// means and standard deviations without further pruning.
pub fn refined_fit(
    source: &dyn GramSource,
    term_indices: &[usize],
    cfg: &EnsembleConfig,
) -> Result<Vec<TermStats>> {
    if term_indices.is_empty() {
        return Err(Error::EnsembleConfig(
            "refined fit needs a non-empty selection".into(),
        ));
    }
    let solutions = bootstrap_fit(source, term_indices, cfg)?;
    Ok(aggregate(&solutions, cfg, f64::INFINITY))
}

fn full_gram(source: &dyn GramSource, term_indices: &[usize]) -> Result<GramSystem> {
    let names: Vec<String> = term_indices
        .iter()
        .map(|&i| source.term_names()[i].clone())
        .collect();
    let mut gram = GramSystem::new(names);
    for u in 0..source.units() {
        gram.merge(&source.unit_gram(u, term_indices)?)?;
    }
    Ok(gram)
}
