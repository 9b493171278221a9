//! Parameter-aware candidate-term construction: base terms, monomial
//! enumeration with reduction rules, dimension vectors and the dimensional
//! similarity filter.
//!
//! Base terms are the irreducible building blocks: the constant, the field,
//! tagged spatial derivatives of the field, and physical parameters with
//! their inverses (a parameter entry may carry any integer power, so `Delta`
//! and `Delta^2` can coexist as separate degree-one entries). Monomials are
//! multisets of base terms; reduction cancels inverse pairs by summing net
//! parameter exponents, orders factors canonically to deduplicate, and drops
//! monomials without a field or derivative factor.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::SchemeTag;

/// Dimension vector `[L, T]`: integer exponents of length and time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DimVec {
    pub length: i32,
    pub time: i32,
}

impl DimVec {
    pub const fn new(length: i32, time: i32) -> Self {
        Self { length, time }
    }

    pub const ZERO: DimVec = DimVec::new(0, 0);
    /// Dimensions of a velocity-like field u.
    pub const VELOCITY: DimVec = DimVec::new(1, -1);
    /// Dimensions of the temporal derivative target u_t.
    pub const U_T: DimVec = DimVec::new(1, -2);
    /// Dimensions of the SGS stress target (u^2).
    pub const TAU_SGS: DimVec = DimVec::new(2, -2);

    pub fn scaled(self, k: i32) -> DimVec {
        DimVec::new(self.length * k, self.time * k)
    }

    pub fn plus(self, other: DimVec) -> DimVec {
        DimVec::new(self.length + other.length, self.time + other.time)
    }
}

impl fmt::Display for DimVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.length, self.time)
    }
}

/// Field-valued factor of a monomial: the field itself or one of its tagged
/// spatial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldFactor {
    Field,
    Deriv(SchemeTag),
}

impl FieldFactor {
    pub fn display(&self, field_name: &str) -> String {
        match self {
            FieldFactor::Field => field_name.to_string(),
            FieldFactor::Deriv(tag) => {
                let xs = "x".repeat(tag.derivative_order());
                format!("{field_name}_{xs}|{}", tag.label())
            }
        }
    }

    pub fn dim(&self, field_dim: DimVec) -> DimVec {
        match self {
            FieldFactor::Field => field_dim,
            FieldFactor::Deriv(tag) => {
                field_dim.plus(DimVec::new(-(tag.derivative_order() as i32), 0))
            }
        }
    }
}

/// One parameter entry of the base set: `name` raised to `power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    /// Dimensions of the parameter itself (power +1).
    pub dim: DimVec,
    pub power: i32,
}

/// A product of base symbols with integer exponents.
///
/// `fields` maps field factors to multiplicities >= 1; `params` maps
/// parameter names to net integer exponents != 0. The canonical name lists
/// parameter factors first, then field factors, both alphabetically, so
/// equal monomials have equal names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub fields: Vec<(FieldFactor, u32)>,
    pub params: Vec<(String, i32)>,
    /// Multiset size of the generating combination (0 for the constant).
    pub degree: usize,
    pub dim: DimVec,
    pub name: String,
}

impl MonomialTerm {
    pub fn is_constant(&self) -> bool {
        self.fields.is_empty() && self.params.is_empty()
    }

    fn sort_key(&self, field_name: &str) -> (usize, String, String) {
        let fields = self
            .fields
            .iter()
            .map(|(f, k)| power_name(&f.display(field_name), *k as i32))
            .collect::<Vec<_>>()
            .join("*");
        let params = self
            .params
            .iter()
            .map(|(n, k)| power_name(n, *k))
            .collect::<Vec<_>>()
            .join("*");
        (self.degree, fields, params)
    }
}

fn power_name(base: &str, k: i32) -> String {
    if k == 1 {
        base.to_string()
    } else {
        format!("{base}^{k}")
    }
}

fn compose_name(fields: &[(FieldFactor, u32)], params: &[(String, i32)], field_name: &str) -> String {
    let mut parts: Vec<String> = params.iter().map(|(n, k)| power_name(n, *k)).collect();
    parts.extend(
        fields
            .iter()
            .map(|(f, k)| power_name(&f.display(field_name), *k as i32)),
    );
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

/// DSF operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsfMode {
    Off,
    Hard,
    Soft,
}

/// Distance metric combining the normalized component distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsfMetric {
    Taxicab,
    Euclid,
}

/// Candidate-library specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibrarySpec {
    /// Display name of the field symbol ("u" for resolved, "ubar" for
    /// filtered fields).
    pub field_name: String,
    pub field_dim: DimVec,
    pub derivs: Vec<SchemeTag>,
    pub params: Vec<ParamEntry>,
    pub max_degree: usize,
    pub include_constant: bool,
    pub dsf_mode: DsfMode,
    pub metric: DsfMetric,
    pub tolerance: f64,
    pub target: DimVec,
}

impl LibrarySpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(Error::LibrarySpec("max degree must be >= 1".into()));
        }
        if self.dsf_mode == DsfMode::Soft && !(0.0..=1.0).contains(&self.tolerance) {
            return Err(Error::LibrarySpec(format!(
                "soft tolerance must lie in [0, 1], got {}",
                self.tolerance
            )));
        }
        let mut dims: BTreeMap<&str, DimVec> = BTreeMap::new();
        for p in &self.params {
            if p.power == 0 {
                return Err(Error::LibrarySpec(format!(
                    "parameter entry {} has power 0",
                    p.name
                )));
            }
            if let Some(d) = dims.insert(p.name.as_str(), p.dim) {
                if d != p.dim {
                    return Err(Error::LibrarySpec(format!(
                        "parameter {} declared with conflicting dimensions",
                        p.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of base entries B entering the raw stars-and-bars count
    /// (constant included when enabled).
    pub fn base_count(&self) -> usize {
        1 + self.derivs.len() + self.params.len() + usize::from(self.include_constant)
    }

    /// Distinct parameter names referenced by the library.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.params.iter().map(|p| p.name.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Reference library for PDE identification: fields and derivatives of u
    /// with viscosity (and KdV-Burgers coefficients) plus inverses.
    pub fn pde_library(kdv: bool) -> LibrarySpec {
        let mut derivs = vec![SchemeTag::Cd1, SchemeTag::Uw2, SchemeTag::Cd2];
        let mut params = vec![
            ParamEntry {
                name: "nu".into(),
                dim: DimVec::new(2, -1),
                power: 1,
            },
            ParamEntry {
                name: "nu".into(),
                dim: DimVec::new(2, -1),
                power: -1,
            },
        ];
        let (max_degree, tolerance) = if kdv {
            derivs.push(SchemeTag::Cd2Third);
            for (name, dim) in [("C1", DimVec::ZERO), ("C2", DimVec::new(3, -1))] {
                for power in [1, -1] {
                    params.push(ParamEntry {
                        name: name.into(),
                        dim,
                        power,
                    });
                }
            }
            (3, 0.25)
        } else {
            (2, 0.5)
        };
        LibrarySpec {
            field_name: "u".into(),
            field_dim: DimVec::VELOCITY,
            derivs,
            params,
            max_degree,
            include_constant: false,
            dsf_mode: DsfMode::Soft,
            metric: DsfMetric::Taxicab,
            tolerance,
            target: DimVec::U_T,
        }
    }

    /// Reference library for SGS closure discovery on filtered fields:
    /// degree <= 3 with both Delta and Delta^2 base entries.
    pub fn sgs_library() -> LibrarySpec {
        let nu = DimVec::new(2, -1);
        let delta = DimVec::new(1, 0);
        LibrarySpec {
            field_name: "ubar".into(),
            field_dim: DimVec::VELOCITY,
            derivs: vec![SchemeTag::Cd1, SchemeTag::Uw2, SchemeTag::Cd2],
            params: vec![
                ParamEntry {
                    name: "nu".into(),
                    dim: nu,
                    power: 1,
                },
                ParamEntry {
                    name: "nu".into(),
                    dim: nu,
                    power: -1,
                },
                ParamEntry {
                    name: "Delta".into(),
                    dim: delta,
                    power: 1,
                },
                ParamEntry {
                    name: "Delta".into(),
                    dim: delta,
                    power: -1,
                },
                ParamEntry {
                    name: "Delta".into(),
                    dim: delta,
                    power: 2,
                },
            ],
            max_degree: 3,
            include_constant: false,
            dsf_mode: DsfMode::Soft,
            metric: DsfMetric::Taxicab,
            tolerance: 0.25,
            target: DimVec::TAU_SGS,
        }
    }

    /// Restricts the SGS library to the single term `Delta^2 ubar_x|cd1^2`,
    /// as used by the grid-refinement study.
    pub fn sgs_single_term() -> Result<Vec<MonomialTerm>> {
        let spec = LibrarySpec::sgs_library();
        let terms = enumerate_and_reduce(&spec)?;
        Ok(terms
            .into_iter()
            .filter(|t| t.name == "Delta^2*ubar_x|cd1^2")
            .collect())
    }
}

/// Raw number of degree-d monomials over B base symbols (stars and bars).
pub fn raw_monomial_count(b: usize, d: usize) -> u128 {
    // C(B + d - 1, d)
    if d == 0 {
        return 1;
    }
    let n = (b + d - 1) as u128;
    let k = d as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

enum Entry {
    Constant,
    Field(FieldFactor),
    Param(usize),
}

/// Visits every size-`degree` multiset over `entries` symbols as a
/// non-decreasing index vector.
fn for_each_multiset(entries: usize, degree: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        start: usize,
        entries: usize,
        left: usize,
        combo: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if left == 0 {
            f(combo);
            return;
        }
        for i in start..entries {
            combo.push(i);
            rec(i, entries, left - 1, combo, f);
            combo.pop();
        }
    }
    let mut combo = Vec::with_capacity(degree);
    rec(0, entries, degree, &mut combo, f);
}

/// Enumerates all monomials up to the requested max degree and applies the
/// reduction rules: inverse cancellation (net parameter exponents),
/// canonical ordering with deduplication, and pure-parameter elimination.
/// Output is sorted by (degree, field factors, parameter factors).
pub fn enumerate_and_reduce(spec: &LibrarySpec) -> Result<Vec<MonomialTerm>> {
    spec.validate()?;
    let mut entries: Vec<Entry> = Vec::new();
    if spec.include_constant {
        entries.push(Entry::Constant);
    }
    entries.push(Entry::Field(FieldFactor::Field));
    for tag in &spec.derivs {
        entries.push(Entry::Field(FieldFactor::Deriv(*tag)));
    }
    for (i, _) in spec.params.iter().enumerate() {
        entries.push(Entry::Param(i));
    }

    let mut seen: std::collections::BTreeSet<(Vec<(FieldFactor, u32)>, Vec<(String, i32)>)> =
        Default::default();
    let mut out: Vec<MonomialTerm> = Vec::new();
    if spec.include_constant {
        let term = make_term(Vec::new(), Vec::new(), 0, spec);
        seen.insert((Vec::new(), Vec::new()));
        out.push(term);
    }

    for degree in 1..=spec.max_degree {
        for_each_multiset(entries.len(), degree, &mut |combo| {
            let mut fields: BTreeMap<FieldFactor, u32> = BTreeMap::new();
            let mut params: BTreeMap<String, i32> = BTreeMap::new();
            for &idx in combo {
                match &entries[idx] {
                    Entry::Constant => {}
                    Entry::Field(f) => *fields.entry(*f).or_insert(0) += 1,
                    Entry::Param(pi) => {
                        let p = &spec.params[*pi];
                        *params.entry(p.name.clone()).or_insert(0) += p.power;
                    }
                }
            }
            params.retain(|_, v| *v != 0);
            if fields.is_empty() {
                return; // rule 3: no field or derivative factor
            }
            let fvec: Vec<(FieldFactor, u32)> = fields.into_iter().collect();
            let pvec: Vec<(String, i32)> = params.into_iter().collect();
            let key = (fvec.clone(), pvec.clone());
            if seen.insert(key) {
                out.push(make_term(fvec, pvec, degree, spec));
            }
        });
    }
    out.sort_by(|a, b| a.sort_key(&spec.field_name).cmp(&b.sort_key(&spec.field_name)));
    Ok(out)
}

fn make_term(
    fields: Vec<(FieldFactor, u32)>,
    params: Vec<(String, i32)>,
    degree: usize,
    spec: &LibrarySpec,
) -> MonomialTerm {
    let mut dim = DimVec::ZERO;
    for (f, k) in &fields {
        dim = dim.plus(f.dim(spec.field_dim).scaled(*k as i32));
    }
    for (name, k) in &params {
        let pdim = spec
            .params
            .iter()
            .find(|p| &p.name == name)
            .map(|p| p.dim)
            .unwrap_or(DimVec::ZERO);
        dim = dim.plus(pdim.scaled(*k));
    }
    let name = compose_name(&fields, &params, &spec.field_name);
    MonomialTerm {
        fields,
        params,
        degree,
        dim,
        name,
    }
}

/// Exponent-weighted dimension sum of a monomial (same value the enumerator
/// caches in `term.dim`).
pub fn dim_of(term: &MonomialTerm, spec: &LibrarySpec) -> DimVec {
    let mut dim = DimVec::ZERO;
    for (f, k) in &term.fields {
        dim = dim.plus(f.dim(spec.field_dim).scaled(*k as i32));
    }
    for (name, k) in &term.params {
        let pdim = spec
            .params
            .iter()
            .find(|p| &p.name == name)
            .map(|p| p.dim)
            .unwrap_or(DimVec::ZERO);
        dim = dim.plus(pdim.scaled(*k));
    }
    dim
}

/// Normalized dimensional distance of `dim` from `target` given the
/// candidate-set maxima, or `None` in hard mode.
fn soft_distance(dim: DimVec, target: DimVec, max_l: i32, max_t: i32, metric: DsfMetric) -> f64 {
    let axis = |diff: i32, max: i32| -> f64 {
        if max == 0 {
            // Degenerate axis: zero distance iff the raw difference is zero.
            if diff == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff.abs() as f64 / max as f64
        }
    };
    let dl = axis(target.length - dim.length, max_l);
    let dt = axis(target.time - dim.time, max_t);
    match metric {
        DsfMetric::Taxicab => 0.5 * (dl + dt),
        DsfMetric::Euclid => ((dl * dl + dt * dt) / 2.0).sqrt(),
    }
}

/// Dimensional similarity filter. Hard mode keeps exact matches to the
/// target; soft mode keeps terms whose normalized distance is within the
/// tolerance. Normalizers are the maximum absolute dimensional values over
/// the candidate set passed in. Ordering is preserved.
pub fn dsf_filter(terms: &[MonomialTerm], spec: &LibrarySpec) -> Result<Vec<MonomialTerm>> {
    match spec.dsf_mode {
        DsfMode::Off => Err(Error::LibrarySpec(
            "dsf_filter called with mode = off".into(),
        )),
        DsfMode::Hard => Ok(terms
            .iter()
            .filter(|t| t.dim == spec.target)
            .cloned()
            .collect()),
        DsfMode::Soft => {
            let max_l = terms.iter().map(|t| t.dim.length.abs()).max().unwrap_or(0);
            let max_t = terms.iter().map(|t| t.dim.time.abs()).max().unwrap_or(0);
            Ok(terms
                .iter()
                .filter(|t| {
                    soft_distance(t.dim, spec.target, max_l, max_t, spec.metric)
                        <= spec.tolerance + 1e-12
                })
                .cloned()
                .collect())
        }
    }
}

/// Enumerates, reduces and (when enabled) dimensionally filters the library.
pub fn build_library(spec: &LibrarySpec) -> Result<Vec<MonomialTerm>> {
    let terms = enumerate_and_reduce(spec)?;
    match spec.dsf_mode {
        DsfMode::Off => Ok(terms),
        _ => dsf_filter(&terms, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find<'a>(terms: &'a [MonomialTerm], name: &str) -> Option<&'a MonomialTerm> {
        terms.iter().find(|t| t.name == name)
    }

    #[test]
    fn raw_count_matches_stars_and_bars() {
        // Brute-force multiset count over B symbols of size d.
        fn brute(b: usize, d: usize) -> u128 {
            fn rec(start: usize, b: usize, d: usize) -> u128 {
                if d == 0 {
                    return 1;
                }
                (start..b).map(|i| rec(i, b, d - 1)).sum()
            }
            rec(0, b, d)
        }
        for b in 1..=6 {
            for d in 0..=4 {
                assert_eq!(raw_monomial_count(b, d), brute(b, d), "B={b} d={d}");
            }
        }
        // Spec example: B = 3 base terms, degree 2 -> C(4, 2) = 6.
        assert_eq!(raw_monomial_count(3, 2), 6);
    }

    #[test]
    fn table_of_dimensions() {
        let spec = LibrarySpec::pde_library(true);
        let terms = enumerate_and_reduce(&spec).unwrap();
        let expect = [
            ("u", DimVec::new(1, -1)),
            ("u_x|cd1", DimVec::new(0, -1)),
            ("u_x|uw2", DimVec::new(0, -1)),
            ("u_xx|cd2", DimVec::new(-1, -1)),
            ("u_xxx|cd2", DimVec::new(-2, -1)),
            ("nu*u", DimVec::new(3, -2)),
            ("C1*u", DimVec::new(1, -1)),
            ("C2*u", DimVec::new(4, -2)),
        ];
        for (name, dim) in expect {
            let t = find(&terms, name).unwrap_or_else(|| panic!("missing {name}"));
            assert_eq!(t.dim, dim, "{name}");
            assert_eq!(dim_of(t, &spec), dim, "{name}");
        }
        // nu * u_xx|cd2 has the dimensions of u_t.
        let t = find(&terms, "nu*u_xx|cd2").unwrap();
        assert_eq!(t.dim, DimVec::U_T);
    }

    #[test]
    fn constant_term_has_zero_dims_when_enabled() {
        let mut spec = LibrarySpec::pde_library(false);
        spec.include_constant = true;
        let terms = enumerate_and_reduce(&spec).unwrap();
        let one = find(&terms, "1").unwrap();
        assert_eq!(one.dim, DimVec::ZERO);
        assert_eq!(one.degree, 0);
    }

    #[test]
    fn inverse_cancellation_and_pure_parameter_elimination() {
        let spec = LibrarySpec::pde_library(false);
        let terms = enumerate_and_reduce(&spec).unwrap();
        // No monomial carries both a parameter and its inverse.
        for t in &terms {
            for (name, k) in &t.params {
                assert!(*k != 0, "{}: zero exponent on {name}", t.name);
            }
            assert!(!t.fields.is_empty(), "{} has no field factor", t.name);
        }
        // nu * nu^-1 * u reduces to u: u appears exactly once.
        let us: Vec<_> = terms.iter().filter(|t| t.name == "u").collect();
        assert_eq!(us.len(), 1);
        // Pure parameter monomials (nu^2, nu*nu^-1) are gone.
        assert!(find(&terms, "nu^2").is_none());
        assert!(find(&terms, "nu*nu^-1").is_none());
    }

    #[test]
    fn burgers_library_counts() {
        let spec = LibrarySpec::pde_library(false);
        let raw = enumerate_and_reduce(&spec).unwrap();
        assert_eq!(raw.len(), 22, "pre-DSF Burgers library");
        let kept = dsf_filter(&raw, &spec).unwrap();
        assert_eq!(kept.len(), 17, "post-DSF Burgers library");
        for name in ["u*u_x|uw2", "nu*u_xx|cd2"] {
            assert!(find(&kept, name).is_some(), "missing {name}");
        }
        // The lone second derivative [-1,-1] is dimensionally too far.
        assert!(find(&kept, "u_xx|cd2").is_none());
    }

    #[test]
    fn kdv_library_counts() {
        let spec = LibrarySpec::pde_library(true);
        let raw = enumerate_and_reduce(&spec).unwrap();
        assert_eq!(raw.len(), 265, "pre-DSF KdV-Burgers library");
        let kept = dsf_filter(&raw, &spec).unwrap();
        assert_eq!(kept.len(), 124, "post-DSF KdV-Burgers library");
        for name in ["C1*u*u_x|uw2", "C2*u_xxx|cd2", "nu*u_xx|cd2"] {
            assert!(find(&kept, name).is_some(), "missing {name}");
        }
    }

    #[test]
    fn hard_filter_examples() {
        let mut spec = LibrarySpec::pde_library(false);
        spec.dsf_mode = DsfMode::Hard;
        let raw = enumerate_and_reduce(&spec).unwrap();
        let kept = dsf_filter(&raw, &spec).unwrap();
        assert!(find(&kept, "nu*u_xx|cd2").is_some());
        assert!(find(&kept, "u*u_x|uw2").is_some());
        assert!(find(&kept, "u").is_none());
        for t in &kept {
            assert_eq!(t.dim, DimVec::U_T);
        }
    }

    #[test]
    fn saturated_tolerance_keeps_all_but_extreme_outliers() {
        // With candidate-set normalizers the normalized distance can exceed 1
        // when the target sits away from the origin, so tolerance 1 keeps
        // everything except dimension outliers past the normalized diamond.
        let mut spec = LibrarySpec::pde_library(true);
        spec.tolerance = 1.0;
        let raw = enumerate_and_reduce(&spec).unwrap();
        let kept = dsf_filter(&raw, &spec).unwrap();
        let dropped: Vec<&str> = raw
            .iter()
            .filter(|t| !kept.iter().any(|k| k.name == t.name))
            .map(|t| t.name.as_str())
            .collect();
        assert_eq!(dropped, vec!["C2^-2*u_xxx|cd2"]);
        assert_eq!(kept.len(), raw.len() - 1);
    }

    #[test]
    fn tolerance_monotonicity_and_hard_subset() {
        let mut spec = LibrarySpec::pde_library(true);
        let raw = enumerate_and_reduce(&spec).unwrap();
        let mut prev: Option<Vec<String>> = None;
        for tol in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
            spec.tolerance = tol;
            let kept: Vec<String> = dsf_filter(&raw, &spec)
                .unwrap()
                .iter()
                .map(|t| t.name.clone())
                .collect();
            if let Some(p) = &prev {
                assert!(p.iter().all(|n| kept.contains(n)), "tol {tol} lost terms");
            }
            prev = Some(kept);
        }
        // Hard output is a subset of any soft output.
        spec.dsf_mode = DsfMode::Hard;
        let hard = dsf_filter(&raw, &spec).unwrap();
        spec.dsf_mode = DsfMode::Soft;
        spec.tolerance = 0.0;
        let soft0 = dsf_filter(&raw, &spec).unwrap();
        for t in &hard {
            assert!(soft0.iter().any(|s| s.name == t.name));
        }
    }

    #[test]
    fn enumeration_is_deterministic() {
        let spec = LibrarySpec::pde_library(true);
        let a = enumerate_and_reduce(&spec).unwrap();
        let b = enumerate_and_reduce(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sgs_library_contents() {
        let spec = LibrarySpec::sgs_library();
        let raw = enumerate_and_reduce(&spec).unwrap();
        let kept = dsf_filter(&raw, &spec).unwrap();
        // Terms named in the convergence analysis all survive the 0.25 filter.
        for name in [
            "Delta^2*ubar_x|cd1^2",
            "Delta^2*ubar^2",
            "Delta^2*ubar_x|uw2^2",
            "Delta*nu*ubar_x|cd1",
            "Delta^-1*ubar^2",
            "nu*ubar_x|cd1",
            "Delta^2*ubar*ubar_xx|cd2",
            "Delta*nu*ubar_x|uw2",
            "Delta^-1*nu*ubar_x|cd1",
            "Delta^-1*nu*ubar_x|uw2",
        ] {
            assert!(find(&kept, name).is_some(), "missing {name}");
        }
        // The dominant closure term is an exact dimensional match.
        let t = find(&kept, "Delta^2*ubar_x|cd1^2").unwrap();
        assert_eq!(t.dim, DimVec::TAU_SGS);
        assert_eq!(kept.len(), 54, "post-DSF SGS library size");
    }

    #[test]
    fn delta_powers_merge_to_net_exponents() {
        let spec = LibrarySpec::sgs_library();
        let terms = enumerate_and_reduce(&spec).unwrap();
        // Delta * Delta^-1 * ubar reduces to ubar;
        // Delta^2 * Delta^-1 * ubar reduces to Delta * ubar. No duplicates.
        let count = |name: &str| terms.iter().filter(|t| t.name == name).count();
        assert_eq!(count("ubar"), 1);
        assert_eq!(count("Delta*ubar"), 1);
        assert_eq!(count("Delta^2*ubar"), 1);
        assert_eq!(count("Delta^3*ubar"), 1);
    }

    #[test]
    fn single_term_library() {
        let kept = LibrarySpec::sgs_single_term().unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].name, "Delta^2*ubar_x|cd1^2");
        assert_eq!(kept[0].dim, DimVec::TAU_SGS);
    }

    #[test]
    fn degenerate_axis_rule() {
        // All candidates have zero time dimension -> max_T = 0; terms whose
        // time dimension differs from the target are rejected outright.
        let spec = LibrarySpec {
            field_name: "u".into(),
            field_dim: DimVec::new(1, 0),
            derivs: vec![SchemeTag::Cd1],
            params: vec![],
            max_degree: 2,
            include_constant: false,
            dsf_mode: DsfMode::Soft,
            metric: DsfMetric::Taxicab,
            tolerance: 1.0,
            target: DimVec::new(1, 0),
        };
        let raw = enumerate_and_reduce(&spec).unwrap();
        let kept = dsf_filter(&raw, &spec).unwrap();
        assert_eq!(kept.len(), raw.len(), "zero diff on degenerate axis passes");

        let mut bad = spec.clone();
        bad.target = DimVec::new(1, -2);
        let kept = dsf_filter(&raw, &bad).unwrap();
        assert!(kept.is_empty(), "nonzero diff on degenerate axis rejects");
    }
}
