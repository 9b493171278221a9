//! Batch front-end: subcommand orchestration over the library pipelines.
//!
//! Every subcommand reads one config file (plus `--set` overrides), writes
//! artifacts into the output directory, and leaves a `FAILED` marker when a
//! run dies partway. Exit codes: 0 success, 2 config error, 3 numerical
//! failure, 4 convergence failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{RawConfig, RunConfig};
use crate::dataset_io;
use crate::ensemble::{
    aggregate, bootstrap_fit, iterative_prune, GramSource, SnapshotGramSource,
};
use crate::error::{Error, Result};
use crate::features::RegressionTarget;
use crate::filtering::ClosureModel;
use crate::gram::GramSystem;
use crate::grid::FieldSnapshot;
use crate::library::{build_library, enumerate_and_reduce, DsfMode, LibrarySpec, MonomialTerm};
use crate::report::{library_manifest, write_csv, RunReport};
use crate::sgs::{
    benchmark_closures, discover_closure, grid_refinement_study, qualitative_profile,
    quadratic_fit, AnalyticIc, BenchmarkSpec, SgsDataset, SgsDatasetSpec,
};
use crate::simulate::{generate_dataset, Equation};
use crate::solvers::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Generate a dataset archive.
    Simulate,
    /// Ensemble PDE identification.
    Discover,
    /// SGS closure discovery with ElasticNet and SR3.
    SgsDiscover,
    /// Benchmark closures against true SGS stresses.
    SgsBench,
    /// Grid-refinement study of the closure coefficient.
    RefineStudy,
    /// Toggle grid over DSF, Gram batching and ensembling.
    Ablate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Discover => "discover",
            Command::SgsDiscover => "sgs-discover",
            Command::SgsBench => "sgs-bench",
            Command::RefineStudy => "refine-study",
            Command::Ablate => "ablate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sindy1d", version, about = "Sparse identification of 1D PDEs and SGS closures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    Simulate(RunArgs),
    Discover(RunArgs),
    SgsDiscover(RunArgs),
    SgsBench(RunArgs),
    RefineStudy(RunArgs),
    Ablate(RunArgs),
}

#[derive(Debug, Parser)]
pub struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override `section.key=value`; repeatable, wins over file values.
    #[arg(long = "set")]
    pub set: Vec<String>,
    /// Output directory (default: [output] dir from the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Global RNG seed; wins over [output] seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the resolved library manifest and Gram dimension, touch no data.
    #[arg(long, default_value_t = false)]
    pub dry_run: bool,
}

impl CliCommand {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            CliCommand::Simulate(a) => (Command::Simulate, a),
            CliCommand::Discover(a) => (Command::Discover, a),
            CliCommand::SgsDiscover(a) => (Command::SgsDiscover, a),
            CliCommand::SgsBench(a) => (Command::SgsBench, a),
            CliCommand::RefineStudy(a) => (Command::RefineStudy, a),
            CliCommand::Ablate(a) => (Command::Ablate, a),
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (command, args) = cli.command.split();
    match run(command, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one subcommand; artifacts land in the resolved output directory.
pub fn run(command: Command, args: &RunArgs) -> Result<()> {
    if let Some(n) = args.threads {
        // Ignore the error when a pool already exists (tests call run()
        // repeatedly in one process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut raw = RawConfig::load(&args.config)?;
    raw.apply_overrides(&args.set)?;
    let cfg = RunConfig::resolve(
        &raw,
        args.seed,
        args.out.as_ref().map(|p| p.display().to_string()),
    )?;

    let terms = build_library(&cfg.library)?;
    if args.dry_run {
        println!("library: {} terms (gram dimension p = {})", terms.len(), terms.len());
        for t in &terms {
            println!("  {}  [{}, {}]", t.name, t.dim.length, t.dim.time);
        }
        return Ok(());
    }

    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out)?;
    let marker = out.join(".running");
    std::fs::write(&marker, command.name())?;
    let result = dispatch(command, &cfg, &terms, &out);
    match &result {
        Ok(()) => {
            let _ = std::fs::remove_file(&marker);
        }
        Err(e) => {
            let _ = std::fs::write(out.join("FAILED"), format!("{e}\n"));
            let _ = std::fs::remove_file(&marker);
        }
    }
    result
}

fn dispatch(command: Command, cfg: &RunConfig, terms: &[MonomialTerm], out: &Path) -> Result<()> {
    let mut report = RunReport::new(command.name(), cfg.seed);
    report.config = cfg.echo.clone();
    report.library = library_manifest(terms);
    match command {
        Command::Simulate => simulate_cmd(cfg, out, &mut report)?,
        Command::Discover => discover_cmd(cfg, terms, out, &mut report)?,
        Command::SgsDiscover => sgs_discover_cmd(cfg, out, &mut report)?,
        Command::SgsBench => sgs_bench_cmd(cfg, out, &mut report)?,
        Command::RefineStudy => refine_cmd(cfg, out, &mut report)?,
        Command::Ablate => ablate_cmd(cfg, out, &mut report)?,
    }
    report.write(out)
}

fn load_or_generate(cfg: &RunConfig) -> Result<Vec<FieldSnapshot>> {
    match &cfg.data {
        Some(path) => dataset_io::load_dataset(Path::new(path)),
        None => generate_dataset(&cfg.case),
    }
}

fn simulate_cmd(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let t0 = Instant::now();
    let snaps = generate_dataset(&cfg.case)?;
    report
        .timings_ms
        .insert("simulate".into(), t0.elapsed().as_millis());
    let archive = out.join("dataset");
    dataset_io::save_dataset(&archive, &cfg.case, &snaps)?;
    report.results = json!({
        "realizations": snaps.len(),
        "archive": archive.display().to_string(),
    });
    Ok(())
}

fn discover_cmd(
    cfg: &RunConfig,
    terms: &[MonomialTerm],
    out: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let t0 = Instant::now();
    let snaps = load_or_generate(cfg)?;
    report
        .timings_ms
        .insert("dataset".into(), t0.elapsed().as_millis());
    let source = SnapshotGramSource::new(&snaps, terms, RegressionTarget::TimeDerivative);
    let t1 = Instant::now();
    let ens = iterative_prune(&source, &cfg.ensemble, "u_t")?;
    report
        .timings_ms
        .insert("discovery".into(), t1.elapsed().as_millis());
    report.peak_rows = ens.peak_rows;
    report.peak_memory_bytes = memory_proxy(terms.len(), &snaps);
    write_csv(
        &out.join("terms.csv"),
        "term,mean,std,cv,consensus,selected",
        &ens.refined,
        |t| {
            format!(
                "{},{:.12e},{:.12e},{:.12e},{},{}",
                t.name, t.mean, t.std, t.cv, t.consensus, t.selected
            )
        },
    )?;
    report.results = serde_json::to_value(&ens)?;
    println!("{}", ens.equation);
    Ok(())
}

fn sgs_dataset(cfg: &RunConfig) -> Result<(SgsDatasetSpec, SgsDataset)> {
    let spec = SgsDatasetSpec {
        case: cfg.case.clone(),
        widths: cfg.widths.clone(),
    };
    let snapshots = load_or_generate(cfg)?;
    Ok((
        spec,
        SgsDataset {
            snapshots,
            widths: cfg.widths.clone(),
        },
    ))
}

fn sgs_discover_cmd(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    if cfg.case.equation != Equation::Burgers {
        return Err(Error::Config(
            "sgs-discover runs on the burgers case".into(),
        ));
    }
    let library = LibrarySpec::sgs_library();
    let terms = build_library(&library)?;
    report.library = library_manifest(&terms);
    let t0 = Instant::now();
    let (_, dataset) = sgs_dataset(cfg)?;
    report
        .timings_ms
        .insert("dataset".into(), t0.elapsed().as_millis());
    let t1 = Instant::now();
    let discovery = discover_closure(&dataset, &library, &cfg.ensemble)?;
    report
        .timings_ms
        .insert("discovery".into(), t1.elapsed().as_millis());
    report.peak_rows = discovery
        .elasticnet
        .report
        .peak_rows
        .max(discovery.sr3.report.peak_rows);
    report.peak_memory_bytes = memory_proxy(terms.len(), &dataset.snapshots)
        * dataset.widths.len() as u64;
    let mut rows = Vec::new();
    for closure in [&discovery.elasticnet, &discovery.sr3] {
        for it in &closure.report.iterations {
            let dom = it.stats.iter().find(|s| s.name == closure.term);
            rows.push((
                closure.method.clone(),
                it.iteration,
                it.cv_threshold,
                it.active_before,
                it.active_after,
                dom.map_or(f64::NAN, |d| d.mean),
                dom.map_or(f64::NAN, |d| d.std),
                dom.map_or(f64::NAN, |d| d.cv),
            ));
        }
    }
    write_csv(
        &out.join("iterations.csv"),
        "method,iteration,cv_threshold,active_before,active_after,coeff,std,cv",
        &rows,
        |r| {
            format!(
                "{},{},{:.6},{},{},{:.6},{:.3e},{:.4}",
                r.0, r.1, r.2, r.3, r.4, r.5, r.6, r.7
            )
        },
    )?;
    report.results = serde_json::to_value(&discovery)?;
    let sel = discovery.selected_closure();
    println!(
        "tau_sgs = {:.4}*Delta^2*ubar_x^2  (signed: -{:.4}*Delta^2*ubar_x*|ubar_x|, Cs = {:.4}, {} selected)",
        sel.c, sel.c, sel.effective_cs, sel.method
    );
    Ok(())
}

fn bench_models(cfg: &RunConfig) -> Vec<ClosureModel> {
    vec![
        ClosureModel::Taylor,
        ClosureModel::Leonard { order: 1 },
        ClosureModel::Smagorinsky {
            cs: cfg.smagorinsky_cs,
        },
        ClosureModel::SindySigned { c: cfg.sindy_c },
    ]
}

fn sgs_bench_cmd(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let models = bench_models(cfg);
    let spec = BenchmarkSpec {
        cases: cfg.bench_cases,
        nu_range: cfg.case.nu_range,
        widths: cfg.widths.clone(),
        seed: cfg.seed,
    };
    let t0 = Instant::now();
    let rows = benchmark_closures(&models, &spec)?;
    report
        .timings_ms
        .insert("benchmark".into(), t0.elapsed().as_millis());
    write_csv(
        &out.join("metrics.csv"),
        "model,width,mse,mae,r2",
        &rows,
        |r| {
            format!(
                "{},{},{:.6e},{:.6e},{:.6}",
                r.model,
                r.width.map_or("avg".to_string(), |k| k.to_string()),
                r.mse,
                r.mae,
                r.r2
            )
        },
    )?;
    // Qualitative profiles for the two analytic initial conditions.
    let t1 = Instant::now();
    for ic in [AnalyticIc::NegSine, AnalyticIc::NegSineCubed] {
        let profile = qualitative_profile(ic, 0.005 / std::f64::consts::PI, 5, 0.5, &models)?;
        let mut header = String::from("x,u,tau_true");
        for (label, _) in &profile.predictions {
            header.push(',');
            header.push_str(label);
        }
        let indices: Vec<usize> = (0..profile.x.len()).collect();
        write_csv(
            &out.join(format!("profile_{}.csv", profile.ic)),
            &header,
            &indices,
            |&i| {
                let mut line = format!(
                    "{:.6},{:.6e},{:.6e}",
                    profile.x[i], profile.u[i], profile.tau_true[i]
                );
                for (_, pred) in &profile.predictions {
                    line.push_str(&format!(",{:.6e}", pred[i]));
                }
                line
            },
        )?;
    }
    report
        .timings_ms
        .insert("profiles".into(), t1.elapsed().as_millis());
    report.results = serde_json::to_value(&rows)?;
    Ok(())
}

fn refine_cmd(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let mut template = SgsDatasetSpec {
        case: cfg.case.clone(),
        widths: cfg.widths.clone(),
    };
    template.case.realizations = cfg.refine_realizations;
    let t0 = Instant::now();
    let rows = grid_refinement_study(&cfg.refine_dx, &template, &cfg.ensemble)?;
    report
        .timings_ms
        .insert("refinement".into(), t0.elapsed().as_millis());
    write_csv(
        &out.join("refinement.csv"),
        "dx,n_x,method,c,c_std,cs",
        &rows,
        |r| {
            format!(
                "{:.6},{},{},{:.6},{:.3e},{:.6}",
                r.dx, r.n_x, r.method, r.c, r.c_std, r.cs
            )
        },
    )?;
    let mut fits = BTreeMap::new();
    for method in ["elasticnet", "sr3"] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.dx, r.c))
            .collect();
        if let Some(c) = quadratic_fit(&pts) {
            fits.insert(method.to_string(), c.to_vec());
        }
    }
    report.results = json!({
        "rows": serde_json::to_value(&rows)?,
        "quadratic_fit": fits,
    });
    Ok(())
}

/// One ablation run: DSF on/off x Gram batched/monolithic x ensemble on/off.
#[derive(Debug, serde::Serialize)]
struct AblateRow {
    experiment: String,
    dsf: bool,
    gram_batched: bool,
    ensemble: bool,
    runtime_s: f64,
    ram_proxy_bytes: u64,
    library_size: usize,
    active_terms: usize,
    outcome: String,
}

fn truth_terms(equation: Equation) -> Vec<&'static str> {
    match equation {
        Equation::Heat => vec!["nu*u_xx|cd2"],
        Equation::Burgers => vec!["u*u_x|uw2", "nu*u_xx|cd2"],
        Equation::KdvBurgers => vec!["C1*u*u_x|uw2", "C2*u_xxx|cd2", "nu*u_xx|cd2"],
    }
}

fn ablate_cmd(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let t0 = Instant::now();
    let snaps = load_or_generate(cfg)?;
    report
        .timings_ms
        .insert("dataset".into(), t0.elapsed().as_millis());
    let truth = truth_terms(cfg.case.equation);
    let mut rows: Vec<AblateRow> = Vec::new();
    let mut idx = 0;
    for ensemble in [false, true] {
        for dsf in [false, true] {
            for gram_batched in [false, true] {
                idx += 1;
                let mut lib = cfg.library.clone();
                if !dsf {
                    lib.dsf_mode = DsfMode::Off;
                }
                let terms = match lib.dsf_mode {
                    DsfMode::Off => enumerate_and_reduce(&lib)?,
                    _ => build_library(&lib)?,
                };
                let started = Instant::now();
                let source =
                    SnapshotGramSource::new(&snaps, &terms, RegressionTarget::TimeDerivative);
                let (active_names, peak_rows): (Vec<String>, u64) = if ensemble {
                    let sols = bootstrap_fit(&source, &(0..terms.len()).collect::<Vec<_>>(), &cfg.ensemble)?;
                    let stats = aggregate(&sols, &cfg.ensemble, cfg.ensemble.cv_init);
                    let names = stats
                        .iter()
                        .filter(|s| s.selected)
                        .map(|s| s.name.clone())
                        .collect();
                    (names, 0)
                } else {
                    let mut gram = GramSystem::new(terms.iter().map(|t| t.name.clone()).collect());
                    for u in 0..source.units() {
                        gram.merge(&source.unit_gram(u, &(0..terms.len()).collect::<Vec<_>>())?)?;
                    }
                    let sol = solve(&gram, &cfg.solver)?;
                    let names = sol
                        .columns
                        .iter()
                        .zip(&sol.coefficients)
                        .filter(|(_, c)| c.abs() > crate::ensemble::LAMBDA_NOISE)
                        .map(|(n, _)| n.clone())
                        .collect();
                    (names, gram.n_rows())
                };
                let runtime = started.elapsed().as_secs_f64();
                let p = terms.len();
                let rows_total: u64 = snaps
                    .iter()
                    .map(|s| (s.u.rows() * (s.u.cols() - 4)) as u64)
                    .sum();
                let unit_rows = snaps
                    .first()
                    .map(|s| (s.u.rows() * (s.u.cols() - 4)) as u64)
                    .unwrap_or(0);
                let gram_bytes = (p * p + p) as u64 * 8;
                let batch_bytes = if gram_batched {
                    unit_rows * (p as u64 + 1) * 8
                } else {
                    rows_total * (p as u64 + 1) * 8
                };
                let exact = active_names.len() == truth.len()
                    && truth.iter().all(|t| active_names.iter().any(|n| n == t));
                let covered = truth.iter().all(|t| active_names.iter().any(|n| n == t));
                let outcome = if exact {
                    "exact".to_string()
                } else if covered {
                    format!("superset({})", active_names.len())
                } else {
                    format!("partial({})", active_names.len())
                };
                let _ = peak_rows;
                rows.push(AblateRow {
                    experiment: format!("E{idx}"),
                    dsf,
                    gram_batched,
                    ensemble,
                    runtime_s: runtime,
                    ram_proxy_bytes: gram_bytes.max(batch_bytes),
                    library_size: p,
                    active_terms: active_names.len(),
                    outcome,
                });
            }
        }
    }
    write_csv(
        &out.join("ablate.csv"),
        "experiment,dsf,gram_batched,ensemble,runtime_s,ram_proxy_bytes,library_size,active_terms,outcome",
        &rows,
        |r| {
            format!(
                "{},{},{},{},{:.3},{},{},{},{}",
                r.experiment,
                r.dsf,
                r.gram_batched,
                r.ensemble,
                r.runtime_s,
                r.ram_proxy_bytes,
                r.library_size,
                r.active_terms,
                r.outcome
            )
        },
    )?;
    report.results = serde_json::to_value(&rows)?;
    Ok(())
}

/// max(Gram bytes, largest per-realization batch bytes) for p columns.
fn memory_proxy(p: usize, snaps: &[FieldSnapshot]) -> u64 {
    let gram_bytes = (p * p + p) as u64 * 8;
    let unit_rows = snaps
        .iter()
        .map(|s| (s.u.rows() * s.u.cols().saturating_sub(4)) as u64)
        .max()
        .unwrap_or(0);
    gram_bytes.max(unit_rows * (p as u64 + 1) * 8)
}
