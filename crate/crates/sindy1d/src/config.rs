//! Flat, sectioned key-value run configuration with command-line overrides.
//!
//! The format is INI-like: `[section]` headers followed by `key = value`
//! lines; `#` starts a comment. Overrides of the form `section.key=value`
//! win over file values. Unknown keys are collected and reported as errors
//! so typos never silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::Path;

use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::library::{DsfMetric, DsfMode, LibrarySpec};
use crate::simulate::{CaseSpec, Equation, PerlinSettings};
use crate::solvers::{PenaltySpec, SolveMethod};

/// Raw parsed configuration: section -> key -> value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, BTreeMap<String, String>>,
    consumed: std::cell::RefCell<Vec<(String, String)>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut values: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                values.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key outside any [section]",
                    lineno + 1
                )));
            }
            values
                .get_mut(&section)
                .expect("section entry exists")
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig {
            values,
            consumed: Default::default(),
        })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RawConfig::parse(&text)
    }

    /// Applies `section.key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for item in overrides {
            let (path, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let (section, key) = path.trim().split_once('.').ok_or_else(|| {
                Error::Config(format!("override key `{path}` must be section.key"))
            })?;
            self.values
                .entry(section.to_string())
                .or_default()
                .insert(key.to_string(), value.trim().to_string());
        }
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<String> {
        let v = self.values.get(section)?.get(key)?;
        self.consumed
            .borrow_mut()
            .push((section.to_string(), key.to_string()));
        Some(v.clone())
    }

    fn parse_value<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("[{section}] {key} = `{s}`: invalid value"))
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.parse_value(section, key)?.ok_or_else(|| {
            Error::Config(format!("missing required key [{section}] {key}"))
        })
    }

    /// Remaining (section, key) pairs never consumed by the resolver.
    pub fn unknown_keys(&self) -> Vec<String> {
        let consumed = self.consumed.borrow();
        let mut unknown = Vec::new();
        for (section, keys) in &self.values {
            for key in keys.keys() {
                if !consumed
                    .iter()
                    .any(|(s, k)| s == section && k == key)
                {
                    unknown.push(format!("[{section}] {key}"));
                }
            }
        }
        unknown
    }

    /// Echo of every section for report reproducibility.
    pub fn echo(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.values.clone()
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: CaseSpec,
    /// Optional dataset archive to load instead of simulating.
    pub data: Option<String>,
    pub library: LibrarySpec,
    pub solver: SolveMethod,
    pub ensemble: EnsembleConfig,
    pub widths: Vec<usize>,
    pub bench_cases: usize,
    pub refine_dx: Vec<f64>,
    pub refine_realizations: usize,
    /// Closure coefficient used by the benchmark's discovered model.
    pub sindy_c: f64,
    /// Smagorinsky constant used by the benchmark baseline.
    pub smagorinsky_cs: f64,
    pub out_dir: String,
    pub seed: u64,
    pub echo: BTreeMap<String, BTreeMap<String, String>>,
}

impl RunConfig {
    /// Resolves the raw config; `seed_flag` (from the command line) wins over
    /// the [output] section.
    pub fn resolve(raw: &RawConfig, seed_flag: Option<u64>, out_flag: Option<String>) -> Result<RunConfig> {
        let equation = Equation::parse(&raw.require::<String>("case", "equation")?)?;
        let mut case = CaseSpec::defaults(equation);
        if let Some(v) = raw.parse_value("case", "x_min")? {
            case.x_min = v;
        }
        if let Some(v) = raw.parse_value("case", "x_max")? {
            case.x_max = v;
        }
        if let Some(v) = raw.parse_value("case", "t_max")? {
            case.t_max = v;
        }
        if let Some(v) = raw.parse_value("case", "n_x")? {
            case.n_x = v;
        }
        if let Some(v) = raw.parse_value("case", "n_t")? {
            case.n_t = v;
        }
        if let Some(v) = raw.parse_value("case", "nu_min")? {
            case.nu_range.0 = v;
        }
        if let Some(v) = raw.parse_value("case", "nu_max")? {
            case.nu_range.1 = v;
        }
        for (key, field) in [("c1_min", 0usize), ("c1_max", 1), ("c2_min", 2), ("c2_max", 3)] {
            if let Some(v) = raw.parse_value::<f64>("case", key)? {
                let (range, idx) = if field < 2 {
                    (&mut case.c1_range, field)
                } else {
                    (&mut case.c2_range, field - 2)
                };
                let mut r = range.unwrap_or((0.0, 0.0));
                if idx == 0 {
                    r.0 = v;
                } else {
                    r.1 = v;
                }
                *range = Some(r);
            }
        }
        let mut perlin = PerlinSettings::default();
        if let Some(v) = raw.parse_value("case", "octaves_min")? {
            perlin.octaves_min = v;
        }
        if let Some(v) = raw.parse_value("case", "octaves_max")? {
            perlin.octaves_max = v;
        }
        if let Some(v) = raw.parse_value("case", "frequency_min")? {
            perlin.frequency_min = v;
        }
        if let Some(v) = raw.parse_value("case", "frequency_max")? {
            perlin.frequency_max = v;
        }
        case.perlin = perlin;
        if let Some(v) = raw.parse_value("case", "realizations")? {
            case.realizations = v;
        }
        let data = raw.get("case", "data");

        // Seed: flag > [output] seed; mandatory (no wall-clock fallback).
        let seed = match seed_flag {
            Some(s) => s,
            None => raw.require::<u64>("output", "seed")?,
        };
        case.seed = seed;

        // Library.
        let kind: String = raw
            .parse_value("library", "kind")?
            .unwrap_or_else(|| "pde".to_string());
        let mut library = match kind.as_str() {
            "pde" => LibrarySpec::pde_library(equation == Equation::KdvBurgers),
            "sgs" => LibrarySpec::sgs_library(),
            other => {
                return Err(Error::Config(format!(
                    "[library] kind = `{other}`: expected pde or sgs"
                )))
            }
        };
        if let Some(v) = raw.parse_value("library", "max_degree")? {
            library.max_degree = v;
        }
        if let Some(v) = raw.get("library", "dsf") {
            library.dsf_mode = match v.as_str() {
                "off" => DsfMode::Off,
                "hard" => DsfMode::Hard,
                "soft" => DsfMode::Soft,
                other => {
                    return Err(Error::Config(format!(
                        "[library] dsf = `{other}`: expected off, hard or soft"
                    )))
                }
            };
        }
        if let Some(v) = raw.get("library", "metric") {
            library.metric = match v.as_str() {
                "taxicab" => DsfMetric::Taxicab,
                "euclid" => DsfMetric::Euclid,
                other => {
                    return Err(Error::Config(format!(
                        "[library] metric = `{other}`: expected taxicab or euclid"
                    )))
                }
            };
        }
        if let Some(v) = raw.parse_value("library", "tolerance")? {
            library.tolerance = v;
        }
        if let Some(v) = raw.parse_value("library", "include_constant")? {
            library.include_constant = v;
        }

        // Solver.
        let method: String = raw
            .parse_value("solver", "method")?
            .unwrap_or_else(|| "stlsq".to_string());
        let penalty = |key: &str, default: PenaltySpec| -> Result<PenaltySpec> {
            match raw.get("solver", key) {
                None => Ok(default),
                Some(s) if s == "sweep" => Ok(PenaltySpec::Sweep),
                Some(s) => s
                    .parse::<f64>()
                    .map(PenaltySpec::Fixed)
                    .map_err(|_| Error::Config(format!("[solver] {key} = `{s}`"))),
            }
        };
        let solver = match method.as_str() {
            "ridge" => SolveMethod::Ridge {
                lambda: raw.parse_value("solver", "lambda")?.unwrap_or(1e-6),
            },
            "stlsq" => SolveMethod::Stlsq {
                lambda: raw.parse_value("solver", "lambda")?.unwrap_or(1e-6),
                threshold: raw.parse_value("solver", "threshold")?.unwrap_or(0.1),
            },
            "elasticnet" => SolveMethod::ElasticNet {
                alpha: penalty("alpha", PenaltySpec::Fixed(0.02))?,
                l1_ratio: raw.parse_value("solver", "l1_ratio")?.unwrap_or(0.9),
            },
            "sr3" => SolveMethod::Sr3 {
                lambda: penalty("lambda", PenaltySpec::Fixed(4e-4))?,
                kappa: raw.parse_value("solver", "kappa")?.unwrap_or(1.0),
            },
            other => {
                return Err(Error::Config(format!(
                    "[solver] method = `{other}`: expected ridge, stlsq, elasticnet or sr3"
                )))
            }
        };

        // Ensemble.
        let mut ensemble = EnsembleConfig::pde_default(crate::rng::derive_seed(
            seed,
            crate::rng::tags::ENSEMBLE,
            0,
        ));
        ensemble.method = solver.clone();
        if let Some(v) = raw.parse_value("ensemble", "m")? {
            ensemble.estimators = v;
        }
        if let Some(v) = raw.parse_value("ensemble", "fraction")? {
            ensemble.subsample_fraction = v;
        }
        if let Some(v) = raw.parse_value("ensemble", "f_threshold")? {
            ensemble.f_threshold = v;
        }
        if let Some(v) = raw.parse_value("ensemble", "cv_init")? {
            ensemble.cv_init = v;
        }
        if let Some(v) = raw.parse_value("ensemble", "cv_decay")? {
            ensemble.cv_decay = v;
        }
        if let Some(v) = raw.parse_value("ensemble", "max_iterations")? {
            ensemble.max_iterations = v;
        }

        // SGS extras.
        let widths = match raw.get("sgs", "widths") {
            None => vec![3, 5, 7, 9, 11],
            Some(s) => parse_list::<usize>(&s)
                .map_err(|_| Error::Config(format!("[sgs] widths = `{s}`")))?,
        };
        let bench_cases = raw.parse_value("sgs", "bench_cases")?.unwrap_or(20);
        let refine_dx = match raw.get("sgs", "refine_dx") {
            None => vec![2.0 / 150.0, 2.0 / 300.0, 2.0 / 400.0],
            Some(s) => parse_list::<f64>(&s)
                .map_err(|_| Error::Config(format!("[sgs] refine_dx = `{s}`")))?,
        };
        let refine_realizations = raw
            .parse_value("sgs", "refine_realizations")?
            .unwrap_or(case.realizations);
        let sindy_c = raw.parse_value("sgs", "sindy_c")?.unwrap_or(0.1554);
        let smagorinsky_cs = raw
            .parse_value("sgs", "smagorinsky_cs")?
            .unwrap_or(0.16);

        // Consume both output keys even when the flags supplied the values.
        let file_out = raw.get("output", "dir");
        let _ = raw.get("output", "seed");
        let out_dir = out_flag
            .or(file_out)
            .unwrap_or_else(|| "out".to_string());

        let unknown = raw.unknown_keys();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown configuration keys: {}",
                unknown.join(", ")
            )));
        }

        Ok(RunConfig {
            case,
            data,
            library,
            solver,
            ensemble,
            widths,
            bench_cases,
            refine_dx,
            refine_realizations,
            sindy_c,
            smagorinsky_cs,
            out_dir,
            seed,
            echo: raw.echo(),
        })
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, ()> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| ()))
        .collect()
}
