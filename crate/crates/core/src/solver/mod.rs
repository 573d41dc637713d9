//! Lie-split time stepping.
//!
//! One step is the implicit upwind transport/diffusion update (solved by a
//! Picard iteration on the density that enters the flux) followed by the
//! implicit reaction update in log variables.

mod anderson;
mod assembly;
mod linear;
mod predictor;
mod reaction;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{column_rho, compute_rho, DensityField, Grid, GridError, RhoProfile};
use crate::model::{initial_density, ModelError, RunConfig, SolverTolerances};

pub use assembly::AdvectionSystem;
pub use linear::LinearSolveStats;
pub use reaction::RootSolution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("linear solve stopped after {sweeps} sweeps at relative residual {relative_residual:e}")]
    LinearSolve { sweeps: usize, relative_residual: f64 },
    #[error("Picard iteration did not converge in {iterations} iterations (last change {residual:e})")]
    Picard { iterations: usize, residual: f64 },
    #[error("transport step produced a negative density {min:e} (max {max:e})")]
    NegativeDensity { min: f64, max: f64 },
    #[error("reaction root: {0}")]
    Root(String),
    #[error("front reached the right boundary: rho = {rho:e} at x = {x}")]
    BoundaryReached { rho: f64, x: f64 },
    #[error("field is not nonnegative and finite")]
    InvalidField,
    #[error("snapshot sink failed: {0}")]
    Sink(String),
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub picard_iterations: usize,
    /// Sup-norm change of ρ in the last Picard iteration.
    pub picard_residual: f64,
    /// Relative residual of the last linear solve.
    pub linear_residual: f64,
    pub linear_sweeps: usize,
    pub root_max_residual: f64,
    /// Most negative transport output before round-off clipping (0 if none).
    pub transport_min: f64,
    pub mass_before: f64,
    pub mass_after: f64,
}

/// Discretization of a validated [`RunConfig`], with the coefficient
/// functions sampled at the trait cell centres.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub(crate) grid: Grid,
    pub(crate) dt: f64,
    pub(crate) epsilon: f64,
    pub(crate) rho_max: f64,
    pub(crate) mobility: Vec<f64>,
    /// `(min μ_k, max μ_k)`
    pub(crate) mobility_range: (f64, f64),
    pub(crate) growth: Vec<f64>,
    pub(crate) growth_sup: f64,
    pub(crate) tolerances: SolverTolerances,
}

impl Scheme {
    pub fn new(config: &RunConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let grid = Grid::from_config(config)?;
        let spec = &config.model;
        let centres: Vec<f64> = (0..grid.m_y).map(|k| grid.y_center(k)).collect();
        let mobility = centres.iter().map(|&y| spec.eval_mobility(y)).collect::<Result<Vec<_>, _>>()?;
        let mobility_range = mobility
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| (lo.min(m), hi.max(m)));
        let growth = centres.iter().map(|&y| spec.eval_growth_rate(y)).collect::<Result<Vec<_>, _>>()?;
        // r is decreasing, so its supremum on [0, Y] is r(0).
        let growth_sup = spec.growth_rate.value(0.0).max(growth.iter().copied().fold(f64::MIN, f64::max));
        Ok(Self {
            grid,
            dt: config.dt,
            epsilon: spec.epsilon,
            rho_max: spec.rho_max,
            mobility,
            mobility_range,
            growth,
            growth_sup,
            tolerances: config.tolerances.clone(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check_field(&self, field: &DensityField) -> Result<(), SolverError> {
        if field.dims() != (self.grid.m_x, self.grid.m_y) {
            return Err(GridError::DimensionMismatch {
                got_x: field.dims().0,
                got_y: field.dims().1,
                m_x: self.grid.m_x,
                m_y: self.grid.m_y,
            }
            .into());
        }
        if field.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SolverError::InvalidField);
        }
        Ok(())
    }

    fn mass(&self, field: &DensityField) -> f64 {
        self.grid.dx * self.grid.dy * field.values().iter().sum::<f64>()
    }

    pub fn assemble_advection_system(
        &self,
        field_prev: &DensityField,
        rho_iterate: &RhoProfile,
    ) -> Result<AdvectionSystem, SolverError> {
        self.assemble(field_prev, rho_iterate)
    }

    /// Column means `Δy Σ_k μ_k N[j,k] / ρ_j`; empty columns keep `fallback`.
    fn mean_mobility(&self, values: &[f64], fallback: &mut [f64]) {
        // Round-off negatives in an iterate are left out of the weights, so
        // the mean stays within the range of μ.
        for (m, col) in fallback.iter_mut().zip(values.chunks_exact(self.grid.m_y)) {
            let (weighted, rho) = col
                .iter()
                .zip(&self.mobility)
                .fold((0.0, 0.0), |(w, r), (&n, mu)| (w + n.max(0.0) * mu, r + n.max(0.0)));
            // Subnormal columns can round the weighted sum to zero.
            if rho > 0.0 {
                let mean = weighted / rho;
                if mean.is_finite() {
                    *m = mean.clamp(self.mobility_range.0, self.mobility_range.1);
                }
            }
        }
    }

    /// Implicit transport + trait diffusion.
    ///
    /// The density entering the flux is resolved by a Picard iteration: freeze
    /// `ρ` in the coefficients, solve the linear system, recompute `ρ`, until
    /// the sup-norm change is below the Picard tolerance. Each frozen density
    /// comes from the summed density equation with the column mean mobilities
    /// of the previous iterate (see `predictor`).
    pub fn advection_diffusion_step(&self, field: &DensityField) -> Result<(DensityField, StepReport), SolverError> {
        self.check_field(field)?;
        let tol = &self.tolerances;
        let mut report = StepReport {
            mass_before: self.mass(field),
            ..StepReport::default()
        };
        let rho_prev = compute_rho(field, &self.grid)?;
        let mut mean_mobility =
            vec![self.mobility.iter().sum::<f64>() / self.mobility.len() as f64; self.grid.m_x];
        self.mean_mobility(field.values(), &mut mean_mobility);
        let mut rho = rho_prev.clone();
        let mut x = field.values().to_vec();
        // The outer iteration runs on ln m, mixed over the last few iterates.
        let (mu_lo, mu_hi) = self.mobility_range;
        let mut mixer = anderson::Anderson::new(5);
        let mut refreshed = mean_mobility.clone();
        loop {
            let predictor = predictor::DensityPredictor {
                grid: &self.grid,
                dt: self.dt,
                rho_prev: &rho_prev.values,
                mean_mobility: &mean_mobility,
            };
            predictor.solve(&mut rho.values, 1e-15, 50);
            let system = self.assemble(field, &rho)?;
            let stats = system.solve_into(&mut x, tol.linear_tol, tol.max_linear_iterations)?;
            report.picard_iterations += 1;
            report.linear_residual = stats.relative_residual;
            report.linear_sweeps += stats.sweeps;
            let next = RhoProfile {
                values: x.chunks_exact(self.grid.m_y).map(|c| column_rho(c, self.grid.dy)).collect(),
                time: field.time,
            };
            let change = next.sup_distance(&rho);
            report.picard_residual = change;
            rho = next;
            if change <= tol.picard_tol {
                break;
            }
            refreshed.copy_from_slice(&mean_mobility);
            self.mean_mobility(&x, &mut refreshed);
            let log_m: Vec<f64> = mean_mobility.iter().map(|m| m.ln()).collect();
            let step: Vec<f64> = refreshed.iter().zip(&log_m).map(|(r, l)| r.ln() - l).collect();
            for (m, l) in mean_mobility.iter_mut().zip(mixer.step(&log_m, &step)) {
                *m = l.exp().clamp(mu_lo, mu_hi);
            }
            if report.picard_iterations >= tol.max_picard_iterations || !change.is_finite() {
                return Err(SolverError::Picard {
                    iterations: report.picard_iterations,
                    residual: change,
                });
            }
        }

        let max = x.iter().copied().fold(0.0, f64::max);
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-12 * max {
            return Err(SolverError::NegativeDensity { min, max });
        }
        report.transport_min = min.min(0.0);
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        let out = DensityField::from_values(&self.grid, x, field.time)?;
        report.mass_after = self.mass(&out);
        Ok((out, report))
    }

    /// Column equation of the reaction step; see [`reaction_rho_root`].
    pub fn reaction_rho_root(&self, u_column: &[f64]) -> Result<RootSolution, SolverError> {
        if u_column.len() != self.grid.m_y {
            return Err(SolverError::Root(format!(
                "column has {} entries, expected {}",
                u_column.len(),
                self.grid.m_y
            )));
        }
        self.rho_root(u_column)
    }

    pub fn reaction_step(&self, field: &DensityField) -> Result<(DensityField, StepReport), SolverError> {
        self.check_field(field)?;
        let mut out = field.clone();
        let worst = out
            .values_mut()
            .par_chunks_mut(self.grid.m_y)
            .map(|col| self.react_column(col).map(|r| r.residual))
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        let report = StepReport {
            root_max_residual: worst,
            mass_before: self.mass(field),
            mass_after: self.mass(&out),
            ..StepReport::default()
        };
        Ok((out, report))
    }

    /// One full step; the returned field is labelled `t + Δt`.
    pub fn advance(&self, field: &DensityField) -> Result<(DensityField, StepReport), SolverError> {
        let (mid, transport) = self.advection_diffusion_step(field)?;
        let (mut next, reaction) = self.reaction_step(&mid)?;
        next.time = field.time + self.dt;
        Ok((
            next,
            StepReport {
                root_max_residual: reaction.root_max_residual,
                mass_after: reaction.mass_after,
                ..transport
            },
        ))
    }

    /// Fails if the density on the last 5% of x-cells exceeds the guard.
    pub fn check_boundary(&self, field: &DensityField) -> Result<(), SolverError> {
        let Some(guard) = self.tolerances.boundary_guard else {
            return Ok(());
        };
        let g = self.grid;
        let band = ((g.m_x as f64 * 0.05).ceil() as usize).max(1);
        for j in g.m_x - band..g.m_x {
            let rho = column_rho(field.column(j), g.dy);
            if rho > guard {
                return Err(SolverError::BoundaryReached { rho, x: g.x_center(j) });
            }
        }
        Ok(())
    }
}

pub fn assemble_advection_system(
    field_prev: &DensityField,
    rho_iterate: &RhoProfile,
    config: &RunConfig,
) -> Result<AdvectionSystem, SolverError> {
    Scheme::new(config)?.assemble(field_prev, rho_iterate)
}

pub fn advection_diffusion_step(
    field: &DensityField,
    config: &RunConfig,
) -> Result<(DensityField, StepReport), SolverError> {
    Scheme::new(config)?.advection_diffusion_step(field)
}

/// Unique `ρ ≥ 0` with `ρ = Δy Σ_k exp((U_k + Δt R(y_k, ρ))/ε)`.
pub fn reaction_rho_root(u_column: &[f64], config: &RunConfig) -> Result<f64, SolverError> {
    Ok(Scheme::new(config)?.reaction_rho_root(u_column)?.rho)
}

pub fn reaction_step(field: &DensityField, config: &RunConfig) -> Result<(DensityField, StepReport), SolverError> {
    Scheme::new(config)?.reaction_step(field)
}

pub fn advance(field: &DensityField, config: &RunConfig) -> Result<(DensityField, StepReport), SolverError> {
    Scheme::new(config)?.advance(field)
}

/// Receives the state of a running simulation.
pub trait RunObserver {
    /// Called at each requested output time, including `t = 0`.
    fn on_snapshot(&mut self, _field: &DensityField, _grid: &Grid) -> Result<(), SolverError> {
        Ok(())
    }

    /// Called after every completed step.
    fn on_step(&mut self, _field: &DensityField, _grid: &Grid, _report: &StepReport) -> Result<(), SolverError> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NullObserver;

impl RunObserver for NullObserver {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub report: StepReport,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_field: DensityField,
    pub steps: Vec<StepRecord>,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, Error)]
#[error("run aborted at t = {}: {error}", summary.final_field.time)]
pub struct RunFailure {
    /// State reached before the failing step.
    pub summary: RunSummary,
    pub error: SolverError,
}

/// Integrates from the initial datum to `t_max`, reporting to `observer`.
pub fn run(config: &RunConfig, observer: &mut dyn RunObserver) -> Result<RunSummary, Box<RunFailure>> {
    let setup = || -> Result<(Scheme, DensityField), SolverError> {
        Ok((Scheme::new(config)?, initial_density(config)?))
    };
    let (scheme, initial) = setup().map_err(|error| {
        Box::new(RunFailure {
            summary: RunSummary {
                final_field: DensityField::zeros(&Grid::new(0, 0, config.dx, config.dy), 0.0),
                steps: Vec::new(),
                snapshot_times: Vec::new(),
            },
            error,
        })
    })?;
    run_from(&scheme, config, initial, observer)
}

/// Integrates an arbitrary initial field with the time grid of `config`.
pub fn run_from(
    scheme: &Scheme,
    config: &RunConfig,
    initial: DensityField,
    observer: &mut dyn RunObserver,
) -> Result<RunSummary, Box<RunFailure>> {
    let grid = scheme.grid;
    let output_steps = config.output_steps();
    let mut summary = RunSummary {
        final_field: initial,
        steps: Vec::new(),
        snapshot_times: Vec::new(),
    };
    let n_steps = match config.steps() {
        Ok(n) => n,
        Err(e) => return Err(Box::new(RunFailure { summary, error: e.into() })),
    };

    let emit = |observer: &mut dyn RunObserver, summary: &mut RunSummary, step: usize| -> Result<(), SolverError> {
        if output_steps.contains(&step) {
            observer.on_snapshot(&summary.final_field, &grid)?;
            summary.snapshot_times.push(summary.final_field.time);
        }
        Ok(())
    };
    if let Err(error) = emit(observer, &mut summary, 0) {
        return Err(Box::new(RunFailure { summary, error }));
    }
    for h in 1..=n_steps {
        let result = scheme.advance(&summary.final_field).and_then(|(mut next, report)| {
            // Avoid drift from repeated addition.
            next.time = h as f64 * config.dt;
            scheme.check_boundary(&next)?;
            Ok((next, report))
        });
        let (next, report) = match result {
            Ok(v) => v,
            Err(error) => return Err(Box::new(RunFailure { summary, error })),
        };
        summary.steps.push(StepRecord { t: next.time, report });
        summary.final_field = next;
        let observed = observer
            .on_step(&summary.final_field, &grid, &report)
            .and_then(|_| emit(observer, &mut summary, h));
        if let Err(error) = observed {
            return Err(Box::new(RunFailure { summary, error }));
        }
    }
    Ok(summary)
}
