//! Alternating-direction line relaxation for the transport system.
//!
//! Each sweep solves every x-line (fixed `k`) and then every y-line (fixed
//! `j`) exactly with the Thomas algorithm, lagging the couplings in the other
//! direction. Lines are visited in red-black order, so lines of one colour are
//! independent and the result does not depend on how they are scheduled.
//! The matrix is a column diagonally dominant M-matrix; the iteration
//! converges for it and keeps nonnegative iterates nonnegative.

use rayon::prelude::*;

use super::assembly::AdvectionSystem;
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveStats {
    pub sweeps: usize,
    /// `‖b − Mx‖∞ / ‖b‖∞`
    pub relative_residual: f64,
}

/// Solves `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` in place of
/// `rhs`. `sub[0]` and `sup[n-1]` are ignored.
pub(crate) fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut Vec<f64>) {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut denom = diag[0];
    scratch[0] = if n > 1 { sup[0] / denom } else { 0.0 };
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * scratch[i - 1];
        if i + 1 < n {
            scratch[i] = sup[i] / denom;
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

struct LineWork {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl LineWork {
    fn new(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: Vec::with_capacity(n),
        }
    }
}

impl AdvectionSystem {
    /// Exact solve of x-line `k` with y-couplings taken from `x`.
    fn solve_x_line(&self, x: &[f64], k: usize) -> Vec<f64> {
        let g = self.grid;
        let mut w = LineWork::new(g.m_x);
        for j in 0..g.m_x {
            let i = g.index(j, k);
            w.diag[j] = self.diagonal(j, k);
            w.sub[j] = if j > 0 { -self.a[i - g.m_y] } else { 0.0 };
            w.sup[j] = if j + 1 < g.m_x { -self.c[i + g.m_y] } else { 0.0 };
            let mut r = self.rhs[i];
            if k > 0 {
                r += self.lambda * x[i - 1];
            }
            if k + 1 < g.m_y {
                r += self.lambda * x[i + 1];
            }
            w.rhs[j] = r;
        }
        thomas(&w.sub, &w.diag, &w.sup, &mut w.rhs, &mut w.scratch);
        w.rhs
    }

    /// Exact solve of y-line `j` with x-couplings taken from `x`.
    fn solve_y_line(&self, x: &[f64], j: usize) -> Vec<f64> {
        let g = self.grid;
        let mut w = LineWork::new(g.m_y);
        for k in 0..g.m_y {
            let i = g.index(j, k);
            w.diag[k] = self.diagonal(j, k);
            w.sub[k] = -self.lambda;
            w.sup[k] = -self.lambda;
            let mut r = self.rhs[i];
            if j > 0 {
                r += self.a[i - g.m_y] * x[i - g.m_y];
            }
            if j + 1 < g.m_x {
                r += self.c[i + g.m_y] * x[i + g.m_y];
            }
            w.rhs[k] = r;
        }
        thomas(&w.sub, &w.diag, &w.sup, &mut w.rhs, &mut w.scratch);
        w.rhs
    }

    fn x_sweep(&self, x: &mut [f64]) {
        let g = self.grid;
        for parity in 0..2 {
            let lines: Vec<(usize, Vec<f64>)> = (parity..g.m_y)
                .into_par_iter()
                .step_by(2)
                .map(|k| (k, self.solve_x_line(x, k)))
                .collect();
            for (k, line) in lines {
                for (j, v) in line.into_iter().enumerate() {
                    x[g.index(j, k)] = v;
                }
            }
        }
    }

    fn y_sweep(&self, x: &mut [f64]) {
        let g = self.grid;
        for parity in 0..2 {
            let lines: Vec<(usize, Vec<f64>)> = (parity..g.m_x)
                .into_par_iter()
                .step_by(2)
                .map(|j| (j, self.solve_y_line(x, j)))
                .collect();
            for (j, line) in lines {
                x[g.index(j, 0)..g.index(j, 0) + g.m_y].copy_from_slice(&line);
            }
        }
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        let g = self.grid;
        (0..g.m_x)
            .into_par_iter()
            .map(|j| {
                (0..g.m_y)
                    .map(|k| (self.rhs[g.index(j, k)] - self.row_product(x, j, k)).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Iterates from the initial guess in `x` until the relative sup-norm
    /// residual drops to `tol`.
    pub fn solve_into(&self, x: &mut [f64], tol: f64, max_sweeps: usize) -> Result<LinearSolveStats, SolverError> {
        let scale = self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(LinearSolveStats {
                sweeps: 0,
                relative_residual: 0.0,
            });
        }
        let mut residual = self.residual_norm(x) / scale;
        let mut sweeps = 0;
        while residual > tol {
            if sweeps == max_sweeps || !residual.is_finite() {
                return Err(SolverError::LinearSolve {
                    sweeps,
                    relative_residual: residual,
                });
            }
            self.x_sweep(x);
            if self.grid.m_y > 1 {
                self.y_sweep(x);
            }
            sweeps += 1;
            residual = self.residual_norm(x) / scale;
        }
        Ok(LinearSolveStats {
            sweeps,
            relative_residual: residual,
        })
    }

    pub fn solve(&self, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, LinearSolveStats), SolverError> {
        let mut x = self.rhs.clone();
        let stats = self.solve_into(&mut x, tol, max_sweeps)?;
        Ok((x, stats))
    }
}
