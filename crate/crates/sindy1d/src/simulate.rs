//! Training-data generation: Perlin initial conditions and explicit RK4
//! integration of the heat, Burgers and KdV-Burgers equations.
//!
//! All solves use periodic boundary conditions. The advection term is
//! discretized with the same `uw2` upwind stencil the candidate library uses,
//! diffusion with `cd2` and dispersion with the central third-derivative
//! stencil, so the generated data satisfies the semi-discrete equation the
//! regression later sees.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_stencil_periodic, FieldSnapshot, Grid1D, Matrix, SchemeTag};
use crate::perlin::perlin_1d;
use crate::rng::{derive_seed, stream, tags};

/// Governing equation of a case study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Heat,
    Burgers,
    KdvBurgers,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Heat => "heat",
            Equation::Burgers => "burgers",
            Equation::KdvBurgers => "kdv_burgers",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(Equation::Heat),
            "burgers" => Ok(Equation::Burgers),
            "kdv_burgers" | "kdv-burgers" => Ok(Equation::KdvBurgers),
            other => Err(Error::CaseSpec(format!("unknown equation `{other}`"))),
        }
    }
}

/// Perlin initial-condition settings: octaves and frequency are drawn per
/// realization from these ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerlinSettings {
    pub octaves_min: u32,
    pub octaves_max: u32,
    pub frequency_min: f64,
    pub frequency_max: f64,
}

impl Default for PerlinSettings {
    fn default() -> Self {
        Self {
            octaves_min: 1,
            octaves_max: 3,
            frequency_min: 0.5,
            frequency_max: 1.5,
        }
    }
}

/// Simulation setup for one case study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub equation: Equation,
    pub x_min: f64,
    pub x_max: f64,
    pub t_max: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub nu_range: (f64, f64),
    pub c1_range: Option<(f64, f64)>,
    pub c2_range: Option<(f64, f64)>,
    pub perlin: PerlinSettings,
    pub realizations: usize,
    pub seed: u64,
}

impl CaseSpec {
    /// Reference setups for the three 1D case studies.
    pub fn defaults(equation: Equation) -> Self {
        use std::f64::consts::PI;
        match equation {
            Equation::Heat => Self {
                equation,
                x_min: -1.0,
                x_max: 1.0,
                t_max: 5.0,
                n_x: 100,
                n_t: 3000,
                nu_range: (0.01, 0.1),
                c1_range: None,
                c2_range: None,
                perlin: PerlinSettings::default(),
                realizations: 20,
                seed: 0,
            },
            Equation::Burgers => Self {
                equation,
                x_min: -1.0,
                x_max: 1.0,
                t_max: 1.0,
                n_x: 150,
                n_t: 500,
                nu_range: (0.001 / PI, 0.01 / PI),
                c1_range: None,
                c2_range: None,
                perlin: PerlinSettings::default(),
                realizations: 20,
                seed: 0,
            },
            Equation::KdvBurgers => Self {
                equation,
                x_min: -10.0,
                x_max: 10.0,
                t_max: 3.0,
                n_x: 150,
                n_t: 500,
                nu_range: (0.045, 0.45),
                c1_range: Some((0.5, 1.0)),
                c2_range: Some((0.1, 0.5)),
                perlin: PerlinSettings::default(),
                realizations: 20,
                seed: 0,
            },
        }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, self.n_x, 0.0, self.t_max, self.n_t)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        let (lo, hi) = self.nu_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::CaseSpec(format!(
                "nu range must be a positive interval, got [{lo}, {hi}]"
            )));
        }
        if self.equation == Equation::KdvBurgers {
            for (name, r) in [("C1", self.c1_range), ("C2", self.c2_range)] {
                match r {
                    Some((a, b)) if b >= a => {}
                    _ => {
                        return Err(Error::CaseSpec(format!(
                            "kdv_burgers needs a non-empty {name} range"
                        )))
                    }
                }
            }
        }
        if self.perlin.octaves_min < 1 || self.perlin.octaves_max < self.perlin.octaves_min {
            return Err(Error::CaseSpec("invalid octave range".into()));
        }
        if !(self.perlin.frequency_min > 0.0
            && self.perlin.frequency_max >= self.perlin.frequency_min)
        {
            return Err(Error::CaseSpec("invalid frequency range".into()));
        }
        Ok(())
    }
}

/// Physical parameters of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationParams {
    pub nu: f64,
    pub c1: f64,
    pub c2: f64,
}

impl RealizationParams {
    pub fn heat_or_burgers(nu: f64) -> Self {
        Self {
            nu,
            c1: 0.0,
            c2: 0.0,
        }
    }
}

/// Right-hand side of the semi-discrete system on the unique periodic nodes.
fn rhs(equation: Equation, w: &[f64], dx: f64, p: &RealizationParams) -> Vec<f64> {
    let diff = apply_stencil_periodic(w, dx, SchemeTag::Cd2, None).expect("len checked");
    match equation {
        Equation::Heat => diff.iter().map(|d| p.nu * d).collect(),
        Equation::Burgers => {
            let adv = apply_stencil_periodic(w, dx, SchemeTag::Uw2, Some(w)).expect("len checked");
            w.iter()
                .zip(&adv)
                .zip(&diff)
                .map(|((&u, a), d)| -u * a + p.nu * d)
                .collect()
        }
        Equation::KdvBurgers => {
            let adv = apply_stencil_periodic(w, dx, SchemeTag::Uw2, Some(w)).expect("len checked");
            let disp =
                apply_stencil_periodic(w, dx, SchemeTag::Cd2Third, None).expect("len checked");
            w.iter()
                .zip(&adv)
                .zip(disp.iter().zip(&diff))
                .map(|((&u, a), (s, d))| -p.c1 * u * a - p.c2 * s + p.nu * d)
                .collect()
        }
    }
}

/// Largest stable sub-step for the current state.
fn max_stable_dt(equation: Equation, w: &[f64], dx: f64, p: &RealizationParams) -> f64 {
    let mut dt = f64::INFINITY;
    if p.nu > 0.0 {
        dt = dt.min(0.25 * dx * dx / p.nu);
    }
    if equation != Equation::Heat {
        let umax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if umax > 0.0 {
            dt = dt.min(0.5 * dx / umax);
        }
    }
    if equation == Equation::KdvBurgers && p.c2.abs() > 0.0 {
        dt = dt.min(0.1 * dx * dx * dx / p.c2.abs());
    }
    dt
}

/// Integrates the chosen PDE with explicit RK4 and stability-bounded
/// sub-stepping; the solution is stored at the `n_t` output times only.
///
/// `ic` holds the initial condition on all `n_x` grid nodes; for periodic
/// consistency the last node should equal the first.
pub fn solve_pde(
    grid: &Grid1D,
    equation: Equation,
    params: &RealizationParams,
    ic: &[f64],
) -> Result<FieldSnapshot> {
    if ic.len() != grid.n_x {
        return Err(Error::ShapeMismatch(format!(
            "initial condition has {} values, grid has {} nodes",
            ic.len(),
            grid.n_x
        )));
    }
    let m = grid.n_x - 1; // unique periodic nodes; node m aliases node 0
    let dx = grid.dx();
    let dt_out = grid.dt();
    let mut w: Vec<f64> = ic[..m].to_vec();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(grid.n_t);
    let store = |w: &[f64]| -> Vec<f64> {
        let mut row = Vec::with_capacity(grid.n_x);
        row.extend_from_slice(w);
        row.push(w[0]);
        row
    };
    rows.push(store(&w));
    let mut substep = 0usize;
    for j in 1..grid.n_t {
        let n_sub = (dt_out / max_stable_dt(equation, &w, dx, params)).ceil().max(1.0) as usize;
        let dt = dt_out / n_sub as f64;
        for local in 0..n_sub {
            substep += 1;
            let k1 = rhs(equation, &w, dx, params);
            let w2: Vec<f64> = w.iter().zip(&k1).map(|(u, k)| u + 0.5 * dt * k).collect();
            let k2 = rhs(equation, &w2, dx, params);
            let w3: Vec<f64> = w.iter().zip(&k2).map(|(u, k)| u + 0.5 * dt * k).collect();
            let k3 = rhs(equation, &w3, dx, params);
            let w4: Vec<f64> = w.iter().zip(&k3).map(|(u, k)| u + dt * k).collect();
            let k4 = rhs(equation, &w4, dx, params);
            for i in 0..m {
                w[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence {
                    step: substep,
                    time: grid.t(j - 1) + (local + 1) as f64 * dt,
                });
            }
        }
        rows.push(store(&w));
    }
    let mut params_map = BTreeMap::new();
    params_map.insert("nu".to_string(), params.nu);
    if equation == Equation::KdvBurgers {
        params_map.insert("C1".to_string(), params.c1);
        params_map.insert("C2".to_string(), params.c2);
    }
    FieldSnapshot::new(*grid, Matrix::from_rows(rows), params_map)
}

/// Parameter and initial-condition draw for realization `index`.
///
/// Draw order per realization is fixed: nu, C1, C2, octaves, frequency.
pub fn draw_realization(spec: &CaseSpec, index: usize) -> (RealizationParams, u32, f64, u64) {
    let mut rng = stream(spec.seed, tags::PARAMS, index as u64);
    let nu = rng.random_range(spec.nu_range.0..=spec.nu_range.1);
    let c1 = spec
        .c1_range
        .map(|(a, b)| rng.random_range(a..=b))
        .unwrap_or(0.0);
    let c2 = spec
        .c2_range
        .map(|(a, b)| rng.random_range(a..=b))
        .unwrap_or(0.0);
    let octaves = rng.random_range(spec.perlin.octaves_min..=spec.perlin.octaves_max);
    let frequency = rng.random_range(spec.perlin.frequency_min..=spec.perlin.frequency_max);
    let perlin_seed = derive_seed(spec.seed, tags::PERLIN, index as u64);
    (
        RealizationParams { nu, c1, c2 },
        octaves,
        frequency,
        perlin_seed,
    )
}

/// Generates the full dataset for a case spec; fully deterministic given the
/// seed, independent of thread count.
pub fn generate_dataset(spec: &CaseSpec) -> Result<Vec<FieldSnapshot>> {
    spec.validate()?;
    let grid = spec.grid()?;
    (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let (params, octaves, frequency, perlin_seed) = draw_realization(spec, r);
            let ic = perlin_1d(&grid, octaves, frequency, perlin_seed)?;
            solve_pde(&grid, spec.equation, &params, &ic).map_err(|e| Error::Realization {
                index: r,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_ic(grid: &Grid1D) -> Vec<f64> {
        (0..grid.n_x).map(|i| (PI * grid.x(i)).sin()).collect()
    }

    #[test]
    fn heat_matches_analytic_decay() {
        let grid = Grid1D::new(-1.0, 1.0, 100, 0.0, 1.0, 600).unwrap();
        let nu = 0.05;
        let snap = solve_pde(
            &grid,
            Equation::Heat,
            &RealizationParams::heat_or_burgers(nu),
            &sine_ic(&grid),
        )
        .unwrap();
        let t = 1.0;
        let decay = (-nu * PI * PI * t).exp();
        let linf = (0..grid.n_x)
            .map(|i| (snap.u.get(grid.n_t - 1, i) - decay * (PI * grid.x(i)).sin()).abs())
            .fold(0.0, f64::max);
        assert!(linf <= 1e-3, "L_inf {linf}");
    }

    #[test]
    fn zero_ic_stays_zero() {
        let grid = Grid1D::new(-1.0, 1.0, 64, 0.0, 1.0, 50).unwrap();
        for eq in [Equation::Heat, Equation::Burgers, Equation::KdvBurgers] {
            let p = RealizationParams {
                nu: 0.05,
                c1: 1.0,
                c2: 0.2,
            };
            let snap = solve_pde(&grid, eq, &p, &vec![0.0; 64]).unwrap();
            assert!(snap.u.data().iter().all(|v| *v == 0.0), "{eq:?}");
        }
    }

    #[test]
    fn burgers_forms_interior_shock_near_origin() {
        let grid = Grid1D::new(-1.0, 1.0, 150, 0.0, 0.5, 250).unwrap();
        let nu = 0.005 / PI;
        let ic: Vec<f64> = (0..grid.n_x).map(|i| -(PI * grid.x(i)).sin()).collect();
        let snap = solve_pde(
            &grid,
            Equation::Burgers,
            &RealizationParams::heat_or_burgers(nu),
            &ic,
        )
        .unwrap();
        let last = snap.u.row(grid.n_t - 1);
        // Steepest (most negative) gradient should sit near x = 0.
        let dx = grid.dx();
        let mut steepest = (0usize, 0.0f64);
        for i in 1..grid.n_x - 1 {
            let slope = (last[i + 1] - last[i - 1]) / (2.0 * dx);
            if slope < steepest.1 {
                steepest = (i, slope);
            }
        }
        let x_shock = grid.x(steepest.0);
        assert!(x_shock.abs() < 0.1, "shock at x = {x_shock}");
        assert!(steepest.1 < -5.0, "gradient {} too mild", steepest.1);
        let umax = last.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(umax <= 1.05, "max |u| grew to {umax}");
    }

    #[test]
    fn heat_conserves_spatial_mean() {
        let grid = Grid1D::new(-1.0, 1.0, 100, 0.0, 1.0, 200).unwrap();
        let ic = perlin_1d(&grid, 3, 1.0, 7).unwrap();
        let snap = solve_pde(
            &grid,
            Equation::Heat,
            &RealizationParams::heat_or_burgers(0.08),
            &ic,
        )
        .unwrap();
        // Mean over the unique periodic nodes.
        let m = grid.n_x - 1;
        let mean = |row: &[f64]| row[..m].iter().sum::<f64>() / m as f64;
        let m0 = mean(snap.u.row(0));
        let m1 = mean(snap.u.row(grid.n_t - 1));
        let drift = (m1 - m0).abs() / (grid.t_max - grid.t_min);
        assert!(drift <= 1e-10, "mean drift rate {drift}");
    }

    #[test]
    fn burgers_energy_is_non_increasing() {
        let grid = Grid1D::new(-1.0, 1.0, 150, 0.0, 1.0, 300).unwrap();
        let ic = perlin_1d(&grid, 2, 1.0, 3).unwrap();
        let snap = solve_pde(
            &grid,
            Equation::Burgers,
            &RealizationParams::heat_or_burgers(0.005 / PI),
            &ic,
        )
        .unwrap();
        let m = grid.n_x - 1;
        let energy = |row: &[f64]| row[..m].iter().map(|v| v * v).sum::<f64>() * grid.dx();
        let mut prev = energy(snap.u.row(0));
        for j in 1..grid.n_t {
            let e = energy(snap.u.row(j));
            assert!(e <= prev * (1.0 + 1e-12), "energy grew at row {j}");
            prev = e;
        }
    }

    #[test]
    fn heat_self_convergence_order() {
        // Error against a 4x-refined reference halves-squared when doubling n_x.
        let solve = |n_x: usize| {
            let grid = Grid1D::new(-1.0, 1.0, n_x, 0.0, 0.5, 100).unwrap();
            let snap = solve_pde(
                &grid,
                Equation::Heat,
                &RealizationParams::heat_or_burgers(0.05),
                &sine_ic(&grid),
            )
            .unwrap();
            snap.u.row(grid.n_t - 1).to_vec()
        };
        let reference = solve(401);
        let err = |n_x: usize, sol: &[f64]| {
            let stride = 400 / (n_x - 1);
            sol.iter()
                .enumerate()
                .map(|(i, v)| (v - reference[i * stride]).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(51, &solve(51));
        let e2 = err(101, &solve(101));
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "observed order {order}");
    }

    #[test]
    fn dataset_is_deterministic_and_in_range() {
        let mut spec = CaseSpec::defaults(Equation::Heat);
        spec.realizations = 3;
        spec.n_t = 50;
        spec.t_max = 0.1;
        spec.seed = 11;
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.u, y.u);
            assert_eq!(x.params, y.params);
        }
        for s in &a {
            let nu = s.param("nu").unwrap();
            assert!((0.01..=0.1).contains(&nu), "nu = {nu}");
        }
    }

    #[test]
    fn empty_dataset_for_zero_realizations() {
        let mut spec = CaseSpec::defaults(Equation::Burgers);
        spec.realizations = 0;
        assert!(generate_dataset(&spec).unwrap().is_empty());
    }

    #[test]
    fn divergence_is_reported_with_substep() {
        // Negative viscosity makes the heat equation explode.
        let grid = Grid1D::new(-1.0, 1.0, 64, 0.0, 20.0, 80).unwrap();
        let p = RealizationParams::heat_or_burgers(-0.5);
        let err = solve_pde(&grid, Equation::Heat, &p, &sine_ic(&grid));
        assert!(matches!(err, Err(Error::Divergence { .. })), "{err:?}");
    }
}
