//! Evaluation of candidate terms on snapshots: derivative fields are
//! computed once per scheme, factors multiplied pointwise, parameter values
//! substituted per realization, and the 2-cell wall buffer trimmed before
//! rows are flattened.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::filtering::{filter_snapshot, FilterSpec};
use crate::grid::{apply_stencil, time_derivative, FieldSnapshot, Matrix, SchemeTag, WALL_BUFFER};
use crate::library::{FieldFactor, MonomialTerm};

/// Regression target of a feature batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegressionTarget {
    /// y = u_t of the resolved field; features evaluate the resolved field.
    TimeDerivative,
    /// y = true SGS stress at the given filter; features evaluate the
    /// box-filtered field and `Delta = k dx` joins the parameter map.
    TauSgs(FilterSpec),
}

/// Flattened design-matrix batch: `columns[j]` holds column j over
/// `rows` samples, aligned with `names`.
#[derive(Debug, Clone)]
pub struct FeatureBatch {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl FeatureBatch {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    /// Bytes a materialized row-major copy of this batch would occupy.
    pub fn bytes(&self) -> usize {
        (self.p() + 1) * self.rows() * std::mem::size_of::<f64>()
    }
}

/// Evaluates every term column and the target over one snapshot.
pub fn evaluate_features(
    snapshot: &FieldSnapshot,
    terms: &[MonomialTerm],
    target: &RegressionTarget,
) -> Result<FeatureBatch> {
    // Resolve the field matrix, target matrix and parameter map.
    let mut params: BTreeMap<String, f64> = snapshot.params.clone();
    let (field, y_mat): (Matrix, Matrix) = match target {
        RegressionTarget::TimeDerivative => {
            (snapshot.u.clone(), time_derivative(snapshot)?)
        }
        RegressionTarget::TauSgs(spec) => {
            let filt = filter_snapshot(snapshot, *spec)?;
            params.insert("Delta".into(), spec.delta(snapshot.grid.dx()));
            (filt.ubar, filt.tau)
        }
    };

    // Scalar parameter factor of each term; error names term and symbol.
    let mut scalars = Vec::with_capacity(terms.len());
    for term in terms {
        let mut s = 1.0;
        for (name, power) in &term.params {
            let v = params.get(name).copied().ok_or_else(|| Error::MissingParam {
                term: term.name.clone(),
                symbol: name.clone(),
            })?;
            s *= v.powi(*power);
        }
        scalars.push(s);
    }

    let tags: BTreeSet<SchemeTag> = terms
        .iter()
        .flat_map(|t| t.fields.iter())
        .filter_map(|(f, _)| match f {
            FieldFactor::Deriv(tag) => Some(*tag),
            FieldFactor::Field => None,
        })
        .collect();

    let n_x = field.cols();
    let n_t = field.rows();
    let dx = snapshot.grid.dx();
    let lo = WALL_BUFFER;
    let hi = n_x - WALL_BUFFER;
    if hi <= lo {
        return Err(Error::BufferTooWide {
            n_cells: WALL_BUFFER,
            n_x,
        });
    }
    let width = hi - lo;
    let rows = n_t * width;

    let mut columns = vec![Vec::with_capacity(rows); terms.len()];
    let mut y = Vec::with_capacity(rows);
    let mut derivs: BTreeMap<SchemeTag, Vec<f64>> = BTreeMap::new();
    for r in 0..n_t {
        let row = field.row(r);
        derivs.clear();
        for tag in &tags {
            let advect = (*tag == SchemeTag::Uw2).then_some(row);
            derivs.insert(*tag, apply_stencil(row, dx, *tag, advect)?);
        }
        for (j, term) in terms.iter().enumerate() {
            let col = &mut columns[j];
            for i in lo..hi {
                let mut v = scalars[j];
                for (factor, mult) in &term.fields {
                    let base = match factor {
                        FieldFactor::Field => row[i],
                        FieldFactor::Deriv(tag) => derivs[tag][i],
                    };
                    v *= base.powi(*mult as i32);
                }
                col.push(v);
            }
        }
        y.extend_from_slice(&y_mat.row(r)[lo..hi]);
    }
    Ok(FeatureBatch {
        names: terms.iter().map(|t| t.name.clone()).collect(),
        columns,
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::library::{DimVec, DsfMetric, DsfMode, LibrarySpec, ParamEntry};

    fn quad_snapshot() -> FieldSnapshot {
        let grid = Grid1D::new(0.0, 1.0, 11, 0.0, 1.0, 3).unwrap();
        let row: Vec<f64> = (0..11).map(|i| grid.x(i).powi(2)).collect();
        let u = Matrix::from_rows(vec![row.clone(), row.clone(), row]);
        let mut params = BTreeMap::new();
        params.insert("nu".to_string(), 0.05);
        FieldSnapshot::new(grid, u, params).unwrap()
    }

    fn spec() -> LibrarySpec {
        LibrarySpec {
            field_name: "u".into(),
            field_dim: DimVec::VELOCITY,
            derivs: vec![SchemeTag::Cd1, SchemeTag::Cd2],
            params: vec![ParamEntry {
                name: "nu".into(),
                dim: DimVec::new(2, -1),
                power: 1,
            }],
            max_degree: 2,
            include_constant: true,
            dsf_mode: DsfMode::Off,
            metric: DsfMetric::Taxicab,
            tolerance: 0.5,
            target: DimVec::U_T,
        }
    }

    #[test]
    fn constant_term_is_all_ones() {
        let snap = quad_snapshot();
        let terms = crate::library::enumerate_and_reduce(&spec()).unwrap();
        let batch = evaluate_features(&snap, &terms, &RegressionTarget::TimeDerivative).unwrap();
        let j = batch.names.iter().position(|n| n == "1").unwrap();
        assert!(batch.columns[j].iter().all(|v| *v == 1.0));
    }

    #[test]
    fn nu_uxx_column_on_quadratic_is_constant() {
        // u = x^2, cd2 exact second derivative 2, times nu = 0.05 -> 0.1.
        let snap = quad_snapshot();
        let terms = crate::library::enumerate_and_reduce(&spec()).unwrap();
        let batch = evaluate_features(&snap, &terms, &RegressionTarget::TimeDerivative).unwrap();
        let j = batch
            .names
            .iter()
            .position(|n| n == "nu*u_xx|cd2")
            .unwrap();
        for v in &batch.columns[j] {
            assert!((v - 0.1).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn row_count_matches_trim_arithmetic() {
        let snap = quad_snapshot();
        let terms = crate::library::enumerate_and_reduce(&spec()).unwrap();
        let batch = evaluate_features(&snap, &terms, &RegressionTarget::TimeDerivative).unwrap();
        assert_eq!(batch.rows(), 3 * (11 - 4));
        assert_eq!(batch.p(), terms.len());
    }

    #[test]
    fn missing_param_is_reported_with_term_and_symbol() {
        let mut snap = quad_snapshot();
        snap.params.clear();
        let terms = crate::library::enumerate_and_reduce(&spec()).unwrap();
        let err = evaluate_features(&snap, &terms, &RegressionTarget::TimeDerivative);
        match err {
            Err(Error::MissingParam { term, symbol }) => {
                assert!(term.contains("nu"), "{term}");
                assert_eq!(symbol, "nu");
            }
            other => panic!("expected MissingParam, got {other:?}"),
        }
    }

    #[test]
    fn tau_target_provides_delta_parameter() {
        use crate::perlin::perlin_1d;
        let grid = Grid1D::new(-1.0, 1.0, 41, 0.0, 1.0, 3).unwrap();
        let ic = perlin_1d(&grid, 2, 1.0, 4).unwrap();
        let u = Matrix::from_rows(vec![ic.clone(), ic.clone(), ic]);
        let mut params = BTreeMap::new();
        params.insert("nu".to_string(), 0.01);
        let snap = FieldSnapshot::new(grid, u, params).unwrap();
        let lib = LibrarySpec::sgs_library();
        let terms: Vec<_> = crate::library::build_library(&lib)
            .unwrap()
            .into_iter()
            .take(8)
            .collect();
        let spec = FilterSpec::new(5).unwrap();
        let batch =
            evaluate_features(&snap, &terms, &RegressionTarget::TauSgs(spec)).unwrap();
        assert_eq!(batch.rows(), 3 * (41 - 4));
        // Every tau value is a nonnegative variance.
        assert!(batch.y.iter().all(|v| *v >= -1e-14));
    }
}
