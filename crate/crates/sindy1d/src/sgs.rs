//! End-to-end subgrid-scale closure pipeline: filtered-Burgers regression
//! datasets across (nu, Delta), closure discovery via iterative ensemble
//! pruning with ElasticNet and SR3, conversion to the signed
//! Smagorinsky-form constant, benchmarking against the analytic baselines,
//! and the grid-refinement study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    iterative_prune, refined_fit, CachedGramSource, EnsembleConfig, EnsembleReport,
};
use crate::error::{Error, Result};
use crate::features::{evaluate_features, RegressionTarget};
use crate::filtering::{
    closure_eval_snapshot, filter_snapshot, ClosureMetrics, ClosureModel, FilterSpec,
};
use crate::grid::{trim_buffer, FieldSnapshot, Grid1D, Matrix};
use crate::library::{build_library, LibrarySpec, MonomialTerm};
use crate::perlin::perlin_1d;
use crate::simulate::{draw_realization, generate_dataset, solve_pde, CaseSpec, Equation};
use crate::solvers::{PenaltySpec, SolveMethod};

/// Dataset specification for SGS regression: a Burgers case crossed with a
/// list of odd filter widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgsDatasetSpec {
    pub case: CaseSpec,
    /// Filter widths in cells; each must be odd.
    pub widths: Vec<usize>,
}

impl SgsDatasetSpec {
    /// Reference setup: Burgers case, widths 3..11 cells.
    pub fn default_with(realizations: usize, seed: u64) -> Self {
        let mut case = CaseSpec::defaults(Equation::Burgers);
        case.realizations = realizations;
        case.seed = seed;
        Self {
            case,
            widths: vec![3, 5, 7, 9, 11],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.case.validate()?;
        if self.case.equation != Equation::Burgers {
            return Err(Error::CaseSpec(
                "SGS datasets are built from the Burgers case".into(),
            ));
        }
        if self.widths.is_empty() {
            return Err(Error::CaseSpec("at least one filter width".into()));
        }
        for &k in &self.widths {
            FilterSpec::new(k)?;
        }
        Ok(())
    }
}

/// Resolved DNS realizations plus the width list; the regression sees one
/// unit per realization, each unit pooling every filter width.
pub struct SgsDataset {
    pub snapshots: Vec<FieldSnapshot>,
    pub widths: Vec<usize>,
}

/// Runs the DNS solves for every realization of the dataset spec.
pub fn build_sgs_dataset(spec: &SgsDatasetSpec) -> Result<SgsDataset> {
    spec.validate()?;
    Ok(SgsDataset {
        snapshots: generate_dataset(&spec.case)?,
        widths: spec.widths.clone(),
    })
}

/// Precomputes per-realization Gram contributions of the SGS library: for
/// each realization and width, the snapshot is box-filtered, the true SGS
/// stress becomes the target, and `Delta = k dx` joins the parameters.
pub fn sgs_gram_source(
    dataset: &SgsDataset,
    terms: &[MonomialTerm],
) -> Result<CachedGramSource> {
    let names: Vec<String> = terms.iter().map(|t| t.name.clone()).collect();
    let widths = &dataset.widths;
    let snapshots = &dataset.snapshots;
    CachedGramSource::build(snapshots.len(), names.clone(), |r| {
        let mut merged: Option<crate::features::FeatureBatch> = None;
        for &k in widths {
            let target = RegressionTarget::TauSgs(FilterSpec::new(k)?);
            let batch = evaluate_features(&snapshots[r], terms, &target)?;
            merged = Some(match merged {
                None => batch,
                Some(mut acc) => {
                    for (a, b) in acc.columns.iter_mut().zip(batch.columns) {
                        a.extend(b);
                    }
                    acc.y.extend(batch.y);
                    acc
                }
            });
        }
        merged.ok_or_else(|| Error::CaseSpec("no filter widths".into()))
    })
}

/// A discovered closure in raw (`C Delta^2 ubar_x^2`) and signed
/// (`-C Delta^2 ubar_x |ubar_x|`) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredClosure {
    pub method: String,
    pub term: String,
    /// Raw-form coefficient C.
    pub c: f64,
    pub c_std: f64,
    /// Final coefficient of variation of the dominant term.
    pub cv: f64,
    /// Effective Smagorinsky constant sqrt(C).
    pub effective_cs: f64,
    pub iterations: usize,
    pub converged: bool,
    pub report: EnsembleReport,
}

impl DiscoveredClosure {
    pub fn signed_model(&self) -> ClosureModel {
        ClosureModel::SindySigned { c: self.c }
    }
}

/// Result of running discovery with both solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureDiscovery {
    pub elasticnet: DiscoveredClosure,
    pub sr3: DiscoveredClosure,
    /// Method with the lower final coefficient variation.
    pub selected: String,
}

impl ClosureDiscovery {
    pub fn selected_closure(&self) -> &DiscoveredClosure {
        if self.selected == "sr3" {
            &self.sr3
        } else {
            &self.elasticnet
        }
    }
}

fn closure_from_report(method: &str, report: EnsembleReport) -> Result<DiscoveredClosure> {
    if report.final_terms.is_empty() {
        return Err(Error::AllTermsPruned {
            last_iteration: report.iterations.len(),
            survivors: vec![],
        });
    }
    // Dominant term: largest |mean| among survivors.
    let dominant = report
        .refined
        .iter()
        .max_by(|a, b| {
            a.mean
                .abs()
                .partial_cmp(&b.mean.abs())
                .expect("finite coefficients")
        })
        .expect("non-empty refined stats")
        .clone();
    let c = dominant.mean;
    if !(c > 0.0) {
        return Err(Error::EnsembleConfig(format!(
            "dominant closure coefficient is not positive: {} = {c}",
            dominant.name
        )));
    }
    Ok(DiscoveredClosure {
        method: method.to_string(),
        term: dominant.name.clone(),
        c,
        c_std: dominant.std,
        cv: dominant.cv,
        effective_cs: c.sqrt(),
        iterations: report.iterations.len(),
        converged: report.converged,
        report,
    })
}

/// Runs iterative pruning with ElasticNet and SR3 over the same dataset and
/// picks the run with the lower final coefficient variation.
pub fn discover_closure(
    dataset: &SgsDataset,
    library: &LibrarySpec,
    cfg_template: &EnsembleConfig,
) -> Result<ClosureDiscovery> {
    let terms = build_library(library)?;
    let source = sgs_gram_source(dataset, &terms)?;
    let run = |method: SolveMethod, name: &str| -> Result<DiscoveredClosure> {
        let mut cfg = cfg_template.clone();
        cfg.method = method;
        let report = iterative_prune(&source, &cfg, "tau_sgs")?;
        closure_from_report(name, report)
    };
    let elasticnet = run(SolveMethod::default_elasticnet(), "elasticnet")?;
    let sr3 = run(SolveMethod::default_sr3(), "sr3")?;
    let selected = if sr3.cv <= elasticnet.cv {
        "sr3"
    } else {
        "elasticnet"
    };
    Ok(ClosureDiscovery {
        elasticnet,
        sr3,
        selected: selected.to_string(),
    })
}

/// One row of the closure benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: String,
    /// Filter width in cells; `None` marks the width-averaged row.
    pub width: Option<usize>,
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
}

/// Evaluation setup for the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub cases: usize,
    pub nu_range: (f64, f64),
    pub widths: Vec<usize>,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn default_with(cases: usize, seed: u64) -> Self {
        use std::f64::consts::PI;
        Self {
            cases,
            nu_range: (0.001 / PI, 0.01 / PI),
            widths: vec![3, 5, 7, 9, 11],
            seed,
        }
    }
}

/// Pooled single-pass metric accumulator.
#[derive(Default, Clone, Copy)]
struct MetricAcc {
    n: f64,
    sum_t: f64,
    sum_t2: f64,
    ss_res: f64,
    abs: f64,
}

impl MetricAcc {
    fn push(&mut self, pred: f64, truth: f64) {
        self.n += 1.0;
        self.sum_t += truth;
        self.sum_t2 += truth * truth;
        let r = truth - pred;
        self.ss_res += r * r;
        self.abs += r.abs();
    }

    fn metrics(&self) -> ClosureMetrics {
        let ss_tot = self.sum_t2 - self.sum_t * self.sum_t / self.n;
        ClosureMetrics {
            mse: self.ss_res / self.n,
            mae: self.abs / self.n,
            r2: 1.0 - self.ss_res / ss_tot,
        }
    }
}

/// Benchmarks closures on fresh Perlin evaluation cases: signed predictions
/// against true stresses, pooled uniformly over all trimmed space-time
/// points, per width and width-averaged.
pub fn benchmark_closures(
    models: &[ClosureModel],
    spec: &BenchmarkSpec,
) -> Result<Vec<BenchmarkRow>> {
    if models.is_empty() {
        return Err(Error::CaseSpec("no closure models to benchmark".into()));
    }
    let mut case = CaseSpec::defaults(Equation::Burgers);
    case.nu_range = spec.nu_range;
    case.realizations = spec.cases;
    case.seed = spec.seed;
    let snapshots = generate_dataset(&case)?;

    // acc[model][width] pooled over every case.
    let per_case: Vec<Vec<Vec<MetricAcc>>> = snapshots
        .par_iter()
        .map(|snap| {
            let mut acc = vec![vec![MetricAcc::default(); spec.widths.len()]; models.len()];
            for (wi, &k) in spec.widths.iter().enumerate() {
                let filt = filter_snapshot(snap, FilterSpec::new(k)?)?;
                let truth = trim_buffer(&filt.tau, crate::grid::WALL_BUFFER)?;
                for (mi, model) in models.iter().enumerate() {
                    let pred = closure_eval_snapshot(model, &filt)?;
                    let pred = trim_buffer(&pred, crate::grid::WALL_BUFFER)?;
                    for (p, t) in pred.data().iter().zip(truth.data()) {
                        acc[mi][wi].push(*p, *t);
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut pooled = vec![vec![MetricAcc::default(); spec.widths.len()]; models.len()];
    for case_acc in &per_case {
        for (mi, row) in case_acc.iter().enumerate() {
            for (wi, a) in row.iter().enumerate() {
                pooled[mi][wi].n += a.n;
                pooled[mi][wi].sum_t += a.sum_t;
                pooled[mi][wi].sum_t2 += a.sum_t2;
                pooled[mi][wi].ss_res += a.ss_res;
                pooled[mi][wi].abs += a.abs;
            }
        }
    }

    let mut rows = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        let mut avg = (0.0, 0.0, 0.0);
        for (wi, &k) in spec.widths.iter().enumerate() {
            let m = pooled[mi][wi].metrics();
            avg.0 += m.mse;
            avg.1 += m.mae;
            avg.2 += m.r2;
            rows.push(BenchmarkRow {
                model: model.label(),
                width: Some(k),
                mse: m.mse,
                mae: m.mae,
                r2: m.r2,
            });
        }
        let w = spec.widths.len() as f64;
        rows.push(BenchmarkRow {
            model: model.label(),
            width: None,
            mse: avg.0 / w,
            mae: avg.1 / w,
            r2: avg.2 / w,
        });
    }
    Ok(rows)
}

/// Width-averaged R^2 of a model in a benchmark table.
pub fn width_averaged_r2(rows: &[BenchmarkRow], label: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.model == label && r.width.is_none())
        .map(|r| r.r2)
}

/// One grid level of the refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub dx: f64,
    pub n_x: usize,
    pub method: String,
    /// Raw coefficient C of `Delta^2 ubar_x^2`.
    pub c: f64,
    pub c_std: f64,
    /// sqrt(C).
    pub cs: f64,
}

/// Runs single-term discovery at each grid spacing with both solvers.
///
/// The library is restricted to `Delta^2 ubar_x|cd1^2`; realization count and
/// widths follow the dataset spec template whose grid is overridden per
/// level. A level labelled `dx` runs on the production grid with
/// `n_x = round(L / dx)` cells (the labelling convention of the refinement
/// table, where dx = 0.0133 corresponds to the 150-cell Burgers grid).
///
/// A one-term library has nothing to prune, so each level is a plain
/// bootstrap refit; both solvers run with swept penalties, which the
/// information criterion drives to the unbiased least-squares refit.
pub fn grid_refinement_study(
    dx_list: &[f64],
    template: &SgsDatasetSpec,
    cfg_template: &EnsembleConfig,
) -> Result<Vec<RefinementRow>> {
    if dx_list.len() < 3 {
        return Err(Error::CaseSpec(
            "grid refinement needs at least 3 levels".into(),
        ));
    }
    let terms = LibrarySpec::sgs_single_term()?;
    let mut rows = Vec::new();
    for &dx in dx_list {
        let mut spec = template.clone();
        let length = spec.case.x_max - spec.case.x_min;
        spec.case.n_x = (length / dx).round() as usize;
        let dataset = build_sgs_dataset(&spec)?;
        let source = sgs_gram_source(&dataset, &terms)?;
        let actual_dx = length / (spec.case.n_x - 1) as f64;
        for (method, name) in [
            (
                SolveMethod::ElasticNet {
                    alpha: PenaltySpec::Sweep,
                    l1_ratio: 0.9,
                },
                "elasticnet",
            ),
            (
                SolveMethod::Sr3 {
                    lambda: PenaltySpec::Sweep,
                    kappa: 1.0,
                },
                "sr3",
            ),
        ] {
            let mut cfg = cfg_template.clone();
            cfg.method = method;
            let stats = refined_fit(&source, &[0], &cfg)?;
            let c = stats[0].mean;
            rows.push(RefinementRow {
                dx: actual_dx,
                n_x: spec.case.n_x,
                method: name.to_string(),
                c,
                c_std: stats[0].std,
                cs: if c > 0.0 { c.sqrt() } else { f64::NAN },
            });
        }
    }
    Ok(rows)
}

/// Least-squares quadratic fit c0 + c1 x + c2 x^2 through (x, y) points;
/// mirrors the trend line of the refinement figure.
pub fn quadratic_fit(points: &[(f64, f64)]) -> Option<[f64; 3]> {
    if points.len() < 3 {
        return None;
    }
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(x, y) in points {
        let basis = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            rhs[i] += basis[i] * y;
        }
    }
    // Gaussian elimination on the 3x3 normal system.
    let mut a = m;
    let mut b = rhs;
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite")
        })?;
        if a[pivot][col].abs() < 1e-30 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for k in i + 1..3 {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

/// Analytic initial conditions used for the qualitative profile tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticIc {
    /// u0 = -sin(pi x)
    NegSine,
    /// u0 = -sin^3(pi x)
    NegSineCubed,
}

impl AnalyticIc {
    pub fn label(&self) -> &'static str {
        match self {
            AnalyticIc::NegSine => "neg_sine",
            AnalyticIc::NegSineCubed => "neg_sine_cubed",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            AnalyticIc::NegSine => -(PI * x).sin(),
            AnalyticIc::NegSineCubed => -(PI * x).sin().powi(3),
        }
    }
}

/// Point-wise closure comparison at the final stored time of a Burgers run
/// from an analytic initial condition.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileTable {
    pub ic: String,
    pub nu: f64,
    pub width_cells: usize,
    pub time: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub tau_true: Vec<f64>,
    /// (model label, signed predictions) pairs.
    pub predictions: Vec<(String, Vec<f64>)>,
}

pub fn qualitative_profile(
    ic: AnalyticIc,
    nu: f64,
    width_cells: usize,
    t_end: f64,
    models: &[ClosureModel],
) -> Result<ProfileTable> {
    let mut case = CaseSpec::defaults(Equation::Burgers);
    case.t_max = t_end;
    let grid = case.grid()?;
    let values: Vec<f64> = (0..grid.n_x).map(|i| ic.eval(grid.x(i))).collect();
    let snap = solve_pde(
        &grid,
        Equation::Burgers,
        &crate::simulate::RealizationParams::heat_or_burgers(nu),
        &values,
    )?;
    let filt = filter_snapshot(&snap, FilterSpec::new(width_cells)?)?;
    let last = grid.n_t - 1;
    let mut predictions = Vec::new();
    for model in models {
        let pred = closure_eval_snapshot(model, &filt)?;
        predictions.push((model.label(), pred.row(last).to_vec()));
    }
    Ok(ProfileTable {
        ic: ic.label().to_string(),
        nu,
        width_cells,
        time: t_end,
        x: (0..grid.n_x).map(|i| grid.x(i)).collect(),
        u: snap.u.row(last).to_vec(),
        tau_true: filt.tau.row(last).to_vec(),
        predictions,
    })
}

/// Convenience: evaluation realizations share the machinery of the training
/// generator but must use a disjoint seed; exposed for the benchmark CLI.
pub fn eval_snapshot(case: &CaseSpec, index: usize) -> Result<(FieldSnapshot, Grid1D)> {
    let grid = case.grid()?;
    let (params, octaves, frequency, perlin_seed) = draw_realization(case, index);
    let ic = perlin_1d(&grid, octaves, frequency, perlin_seed)?;
    let snap = solve_pde(&grid, case.equation, &params, &ic)?;
    Ok((snap, grid))
}

/// Trimmed matrix helper re-exported for report writers.
pub fn trimmed(values: &Matrix) -> Result<Matrix> {
    trim_buffer(values, crate::grid::WALL_BUFFER)
}
