//! Implicit reaction step in the log variables `U = ε ln N`.
//!
//! Per x-cell the new density solves the scalar equation
//! `f(ρ) = ρ − Δy Σ_k exp((U_k + Δt (r_k − ρ))/ε) = 0`. Because the fitness
//! is affine in `ρ`, the sum factors as `exp(L − Δt ρ/ε)` with
//! `L = ln Δy Σ_k exp((U_k + Δt r_k)/ε)`, which is evaluated once per column.
//! `f` is strictly increasing and `f(0) < 0`, so the root is unique.

use super::{Scheme, SolverError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolution {
    pub rho: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// `ln(Δy Σ exp(v_k))` without overflow.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone, dy: f64) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + (dy * sum).ln()
}

/// Root of `ρ = exp(log_mass − rate·ρ)` with `rate ≥ 0`, by Newton's method
/// safeguarded with bisection on `[0, upper]`.
pub(crate) fn solve_scalar(
    log_mass: f64,
    rate: f64,
    upper: f64,
    guess: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<RootSolution, SolverError> {
    let f = |rho: f64| rho - (log_mass - rate * rho).exp();
    let df = |rho: f64| 1.0 + rate * (log_mass - rate * rho).exp();
    if !(upper.is_finite() && log_mass.is_finite()) {
        return Err(SolverError::Root(format!(
            "non-finite bracket (ln mass = {log_mass}, upper = {upper})"
        )));
    }
    let (mut lo, mut hi) = (0.0, upper);
    let f_hi = f(hi);
    if f_hi < 0.0 {
        return Err(SolverError::Root(format!("f({hi}) = {f_hi} < 0: bracket expansion failed")));
    }
    let mut rho = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    let mut value = f(rho);
    for it in 1..=max_iterations {
        if !value.is_finite() {
            return Err(SolverError::Root(format!("f({rho}) is not finite")));
        }
        if value == 0.0 {
            return Ok(RootSolution { rho, residual: 0.0, iterations: it });
        }
        if value < 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        let newton = rho - value / df(rho);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - rho).abs();
        rho = next;
        value = f(rho);
        let converged = step <= 2.0 * f64::EPSILON * rho.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= 2.0 * f64::EPSILON * hi;
        if converged || value.abs() <= 0.01 * tol {
            if value.abs() > tol {
                return Err(SolverError::Root(format!(
                    "stalled at ρ = {rho} with residual {value:e}"
                )));
            }
            return Ok(RootSolution {
                rho,
                residual: value.abs(),
                iterations: it,
            });
        }
    }
    if value.abs() <= tol {
        return Ok(RootSolution {
            rho,
            residual: value.abs(),
            iterations: max_iterations,
        });
    }
    Err(SolverError::Root(format!(
        "no convergence after {max_iterations} iterations (residual {value:e})"
    )))
}

impl Scheme {
    /// Solves the column equation for `ρ^{h+1}` given `U*`.
    pub(crate) fn rho_root(&self, u: &[f64]) -> Result<RootSolution, SolverError> {
        let eps = self.epsilon;
        let dt = self.dt;
        let dy = self.grid.dy;
        if let Some(v) = u.iter().find(|v| !v.is_finite()) {
            return Err(SolverError::Root(format!("non-finite log-density {v}")));
        }
        let shifted = u.iter().zip(&self.growth).map(|(&uk, &rk)| (uk + dt * rk) / eps);
        let log_mass = log_sum_exp(shifted, dy);
        let log_upper = log_sum_exp(u.iter().map(|&uk| (uk + dt * self.growth_sup) / eps), dy);
        let upper = self.rho_max.max(log_upper.exp());
        let guess = log_sum_exp(u.iter().map(|&uk| uk / eps), dy).exp();
        solve_scalar(
            log_mass,
            dt / eps,
            upper,
            guess,
            self.tolerances.root_tol,
            self.tolerances.max_root_iterations,
        )
    }

    /// Applies the reaction update to one column in place and returns the
    /// root diagnostics.
    pub(crate) fn react_column(&self, column: &mut [f64]) -> Result<RootSolution, SolverError> {
        let eps = self.epsilon;
        let floor = self.tolerances.density_floor;
        let u: Vec<f64> = column.iter().map(|&n| eps * n.max(floor).ln()).collect();
        let root = self.rho_root(&u)?;
        for ((n, uk), rk) in column.iter_mut().zip(&u).zip(&self.growth) {
            let increment = self.dt * (rk - root.rho);
            *n = if *n >= floor {
                ((uk + increment) / eps).exp()
            } else {
                // Sub-floor cells are scaled rather than lifted to the floor,
                // so empty regions stay empty.
                *n * (increment / eps).exp()
            };
        }
        Ok(root)
    }
}
