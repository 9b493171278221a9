//! Box filtering, true subgrid-scale stress extraction and the analytic
//! baseline closures.
//!
//! The box filter of width `Delta = k * dx` is the k-node moving average
//! centered at each node, with periodic wraparound. The true SGS stress is
//! the filtered-variance form `tau = bar(u^2) - bar(u)^2`, which is
//! non-negative for any input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_stencil_periodic, FieldSnapshot, Grid1D, Matrix, SchemeTag};

/// Box-filter width in grid cells; must be odd so the window is symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub width_cells: usize,
}

impl FilterSpec {
    pub fn new(width_cells: usize) -> Result<Self> {
        if width_cells % 2 == 0 || width_cells == 0 {
            return Err(Error::BadFilterWidth {
                k: width_cells,
                n_x: usize::MAX,
            });
        }
        Ok(Self { width_cells })
    }

    /// Physical filter width for a given grid spacing.
    pub fn delta(&self, dx: f64) -> f64 {
        self.width_cells as f64 * dx
    }
}

fn check_width(k: usize, n: usize) -> Result<()> {
    if k % 2 == 0 || k == 0 || k > n {
        return Err(Error::BadFilterWidth { k, n_x: n });
    }
    Ok(())
}

/// Moving average over the k-node window centered at each node, with
/// periodic wraparound; `k = 1` is the identity.
pub fn box_filter(u_row: &[f64], spec: FilterSpec) -> Result<Vec<f64>> {
    let n = u_row.len();
    let k = spec.width_cells;
    check_width(k, n)?;
    if k == 1 {
        return Ok(u_row.to_vec());
    }
    let half = (k / 2) as isize;
    let m = n as isize;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for o in -half..=half {
            let j = (((i as isize + o) % m) + m) % m;
            acc += u_row[j as usize];
        }
        out[i] = acc / k as f64;
    }
    Ok(out)
}

/// True SGS stress of a resolved row: `bar(u^2) - bar(u)^2` with the same
/// discrete window as [`box_filter`].
pub fn true_sgs_stress(u_row: &[f64], spec: FilterSpec) -> Result<Vec<f64>> {
    let sq: Vec<f64> = u_row.iter().map(|v| v * v).collect();
    let filtered_sq = box_filter(&sq, spec)?;
    let filtered = box_filter(u_row, spec)?;
    Ok(filtered_sq
        .iter()
        .zip(&filtered)
        .map(|(s, f)| s - f * f)
        .collect())
}

/// Filtered counterpart of a resolved snapshot: box-filtered field, true SGS
/// stress target, and the `Delta`/`nu` parameters the SGS library reads.
///
/// Rows carry the duplicate periodic endpoint, so filtering acts on the
/// unique nodes and re-appends the duplicate.
#[derive(Debug, Clone)]
pub struct FilteredSnapshot {
    pub grid: Grid1D,
    pub ubar: Matrix,
    pub tau: Matrix,
    pub filter: FilterSpec,
}

pub fn filter_snapshot(snapshot: &FieldSnapshot, spec: FilterSpec) -> Result<FilteredSnapshot> {
    let n = snapshot.grid.n_x;
    let m = n - 1; // unique periodic nodes
    check_width(spec.width_cells, m)?;
    let mut ubar_rows = Vec::with_capacity(snapshot.u.rows());
    let mut tau_rows = Vec::with_capacity(snapshot.u.rows());
    for row in snapshot.u.iter_rows() {
        let unique = &row[..m];
        let mut ub = box_filter(unique, spec)?;
        let mut tau = true_sgs_stress(unique, spec)?;
        ub.push(ub[0]);
        tau.push(tau[0]);
        ubar_rows.push(ub);
        tau_rows.push(tau);
    }
    Ok(FilteredSnapshot {
        grid: snapshot.grid,
        ubar: Matrix::from_rows(ubar_rows),
        tau: Matrix::from_rows(tau_rows),
        filter: spec,
    })
}

/// Symbolic SGS closure with fitted coefficients, evaluable on filtered
/// fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosureModel {
    /// Leading-order Taylor closure `(Delta^2 / 12) (u_x^2 - u u_xx)`.
    Taylor,
    /// Truncated series `sum_{m=1..order} Delta^(2m)/m! (d^m u)^2`.
    Leonard { order: usize },
    /// `-C_s^2 Delta^2 u_x |u_x|`.
    Smagorinsky { cs: f64 },
    /// Signed discovered closure `-C Delta^2 u_x |u_x|`.
    SindySigned { c: f64 },
}

impl ClosureModel {
    pub fn label(&self) -> String {
        match self {
            ClosureModel::Taylor => "taylor".into(),
            ClosureModel::Leonard { order } => format!("leonard{order}"),
            ClosureModel::Smagorinsky { .. } => "smagorinsky".into(),
            ClosureModel::SindySigned { .. } => "sindy_signed".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClosureModel::Leonard { order } if !(1..=3).contains(order) => Err(Error::LibrarySpec(
                format!("leonard truncation order must be 1..=3, got {order}"),
            )),
            ClosureModel::Smagorinsky { cs } if *cs <= 0.0 => {
                Err(Error::LibrarySpec("smagorinsky C_s must be positive".into()))
            }
            ClosureModel::SindySigned { c } if *c <= 0.0 => {
                Err(Error::LibrarySpec("sindy closure C must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Filtered-field derivatives needed by the closures.
#[derive(Debug, Clone)]
pub struct FilteredFields<'a> {
    pub ubar: &'a [f64],
    pub ubar_x: &'a [f64],
    pub ubar_xx: Option<&'a [f64]>,
    pub ubar_xxx: Option<&'a [f64]>,
}

/// Evaluates a closure model pointwise on filtered fields.
pub fn closure_eval(model: &ClosureModel, fields: &FilteredFields, delta: f64) -> Result<Vec<f64>> {
    model.validate()?;
    let n = fields.ubar_x.len();
    let need = |f: Option<&[f64]>, name: &'static str| -> Result<Vec<f64>> {
        f.map(<[f64]>::to_vec).ok_or(Error::MissingDerivative {
            kind: model.label(),
            field: name,
        })
    };
    let d2 = delta * delta;
    match model {
        ClosureModel::Taylor => {
            let uxx = need(fields.ubar_xx, "ubar_xx")?;
            Ok((0..n)
                .map(|i| d2 / 12.0 * (fields.ubar_x[i].powi(2) - fields.ubar[i] * uxx[i]))
                .collect())
        }
        ClosureModel::Leonard { order } => {
            let mut out: Vec<f64> = fields.ubar_x.iter().map(|v| d2 * v * v).collect();
            if *order >= 2 {
                let uxx = need(fields.ubar_xx, "ubar_xx")?;
                let c = d2 * d2 / 2.0;
                for (o, v) in out.iter_mut().zip(&uxx) {
                    *o += c * v * v;
                }
            }
            if *order >= 3 {
                let uxxx = need(fields.ubar_xxx, "ubar_xxx")?;
                let c = d2 * d2 * d2 / 6.0;
                for (o, v) in out.iter_mut().zip(&uxxx) {
                    *o += c * v * v;
                }
            }
            Ok(out)
        }
        ClosureModel::Smagorinsky { cs } => Ok(fields
            .ubar_x
            .iter()
            .map(|&ux| -cs * cs * d2 * ux * ux.abs())
            .collect()),
        ClosureModel::SindySigned { c } => Ok(fields
            .ubar_x
            .iter()
            .map(|&ux| -c * d2 * ux * ux.abs())
            .collect()),
    }
}

/// Evaluates a closure over every row of a filtered snapshot; derivatives of
/// the filtered field use periodic stencils on the unique nodes.
pub fn closure_eval_snapshot(model: &ClosureModel, filt: &FilteredSnapshot) -> Result<Matrix> {
    let dx = filt.grid.dx();
    let delta = filt.filter.delta(dx);
    let m = filt.grid.n_x - 1;
    let mut rows = Vec::with_capacity(filt.ubar.rows());
    for row in filt.ubar.iter_rows() {
        let unique = &row[..m];
        let ux = apply_stencil_periodic(unique, dx, SchemeTag::Cd1, None)?;
        let uxx = apply_stencil_periodic(unique, dx, SchemeTag::Cd2, None)?;
        let uxxx = apply_stencil_periodic(unique, dx, SchemeTag::Cd2Third, None)?;
        let fields = FilteredFields {
            ubar: unique,
            ubar_x: &ux,
            ubar_xx: Some(&uxx),
            ubar_xxx: Some(&uxxx),
        };
        let mut vals = closure_eval(model, &fields, delta)?;
        vals.push(vals[0]);
        rows.push(vals);
    }
    Ok(Matrix::from_rows(rows))
}

/// Standard regression metrics on signed stresses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureMetrics {
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
}

pub fn closure_metrics(predicted: &Matrix, truth: &Matrix) -> Result<ClosureMetrics> {
    if predicted.rows() != truth.rows() || predicted.cols() != truth.cols() {
        return Err(Error::ShapeMismatch(format!(
            "predicted {}x{} vs truth {}x{}",
            predicted.rows(),
            predicted.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let n = truth.data().len();
    let mean = truth.data().iter().sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs = 0.0;
    for (p, t) in predicted.data().iter().zip(truth.data()) {
        ss_res += (t - p) * (t - p);
        ss_tot += (t - mean) * (t - mean);
        abs += (t - p).abs();
    }
    if ss_tot == 0.0 {
        return Err(Error::ConstantTruth);
    }
    Ok(ClosureMetrics {
        mse: ss_res / n as f64,
        mae: abs / n as f64,
        r2: 1.0 - ss_res / ss_tot,
    })
}
