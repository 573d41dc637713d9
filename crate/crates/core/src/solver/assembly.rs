//! Frozen-coefficient matrix of the implicit transport/diffusion step.
//!
//! For a fixed density iterate `ρ` the row of unknown `N[j, k]` reads
//!
//! ```text
//! b[j,k] N[j,k] − a[j−1,k] N[j−1,k] − c[j+1,k] N[j+1,k]
//!     + λ (deg_k N[j,k] − N[j,k−1] − N[j,k+1]) = N^h[j,k]
//! ```
//!
//! with `a[j,k] = κ μ_k (δρ_j)⁻`, `c[j,k] = κ μ_k (δρ_{j−1})⁺`,
//! `b = 1 + a + c`, `κ = Δt/Δx`, `λ = εΔt/Δy²` and `δρ_j` the forward
//! difference across the right face of cell `j`. Both x-faces of the domain
//! carry zero flux and the y-direction uses a zero-Neumann closure, so every
//! column of the matrix sums to one.

use crate::grid::{DensityField, Grid, RhoProfile};

use super::{Scheme, SolverError};

#[derive(Debug, Clone)]
pub struct AdvectionSystem {
    pub(crate) grid: Grid,
    pub(crate) a: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) c: Vec<f64>,
    /// `εΔt/Δy²`
    pub(crate) lambda: f64,
    pub(crate) rhs: Vec<f64>,
}

impl AdvectionSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn a(&self, j: usize, k: usize) -> f64 {
        self.a[self.grid.index(j, k)]
    }

    pub fn b(&self, j: usize, k: usize) -> f64 {
        self.b[self.grid.index(j, k)]
    }

    pub fn c(&self, j: usize, k: usize) -> f64 {
        self.c[self.grid.index(j, k)]
    }

    pub fn diffusion_coupling(&self) -> f64 {
        self.lambda
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Number of y-neighbours of trait cell `k`.
    #[inline]
    pub(crate) fn degree(&self, k: usize) -> f64 {
        let m_y = self.grid.m_y;
        match m_y {
            1 => 0.0,
            _ if k == 0 || k + 1 == m_y => 1.0,
            _ => 2.0,
        }
    }

    #[inline]
    pub(crate) fn diagonal(&self, j: usize, k: usize) -> f64 {
        self.b[self.grid.index(j, k)] + self.lambda * self.degree(k)
    }

    /// Nonzero entries as `(row, col, value)`, with unknowns ordered
    /// x-major like [`DensityField`].
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let g = self.grid;
        let mut out = Vec::with_capacity(5 * g.len());
        for j in 0..g.m_x {
            for k in 0..g.m_y {
                let row = g.index(j, k);
                out.push((row, row, self.diagonal(j, k)));
                if j > 0 {
                    out.push((row, g.index(j - 1, k), -self.a(j - 1, k)));
                }
                if j + 1 < g.m_x {
                    out.push((row, g.index(j + 1, k), -self.c(j + 1, k)));
                }
                if k > 0 {
                    out.push((row, g.index(j, k - 1), -self.lambda));
                }
                if k + 1 < g.m_y {
                    out.push((row, g.index(j, k + 1), -self.lambda));
                }
            }
        }
        out
    }

    /// `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.m_x {
            for k in 0..g.m_y {
                out[g.index(j, k)] = self.row_product(x, j, k);
            }
        }
        out
    }

    #[inline]
    pub(crate) fn row_product(&self, x: &[f64], j: usize, k: usize) -> f64 {
        let g = self.grid;
        let i = g.index(j, k);
        let mut s = self.diagonal(j, k) * x[i];
        if j > 0 {
            s -= self.a[i - g.m_y] * x[i - g.m_y];
        }
        if j + 1 < g.m_x {
            s -= self.c[i + g.m_y] * x[i + g.m_y];
        }
        if k > 0 {
            s -= self.lambda * x[i - 1];
        }
        if k + 1 < g.m_y {
            s -= self.lambda * x[i + 1];
        }
        s
    }

    /// Smallest `|diag| − Σ|off-diagonal|` over all columns. Positive means
    /// strict column diagonal dominance.
    pub fn column_dominance_margin(&self) -> f64 {
        let g = self.grid;
        let mut margin = f64::INFINITY;
        for j in 0..g.m_x {
            for k in 0..g.m_y {
                let mut off = 0.0;
                if j + 1 < g.m_x {
                    off += self.a(j, k);
                }
                if j > 0 {
                    off += self.c(j, k);
                }
                off += self.lambda * self.degree(k);
                margin = margin.min(self.diagonal(j, k).abs() - off);
            }
        }
        margin
    }
}

impl Scheme {
    pub(crate) fn assemble(
        &self,
        field_prev: &DensityField,
        rho: &RhoProfile,
    ) -> Result<AdvectionSystem, SolverError> {
        let g = self.grid;
        if rho.len() != g.m_x || field_prev.dims() != (g.m_x, g.m_y) {
            return Err(SolverError::Assembly("dimension mismatch".into()));
        }
        if let Some((j, r)) = rho
            .values
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r >= 0.0))
        {
            return Err(SolverError::Assembly(format!("density iterate ρ[{j}] = {r}")));
        }

        let kappa = self.dt / g.dx;
        // Forward differences across interior faces; the outer faces carry no flux.
        let face_gradient = |j: usize| -> f64 {
            if j + 1 < g.m_x {
                (rho.values[j + 1] - rho.values[j]) / g.dx
            } else {
                0.0
            }
        };

        let n = g.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        for j in 0..g.m_x {
            let right = face_gradient(j);
            let left = if j > 0 { face_gradient(j - 1) } else { 0.0 };
            let right_neg = (-right).max(0.0);
            let left_pos = left.max(0.0);
            for k in 0..g.m_y {
                let i = g.index(j, k);
                let mu = self.mobility[k];
                a[i] = kappa * mu * right_neg;
                c[i] = kappa * mu * left_pos;
                b[i] = 1.0 + a[i] + c[i];
            }
        }
        Ok(AdvectionSystem {
            grid: g,
            a,
            b,
            c,
            lambda: self.epsilon * self.dt / (g.dy * g.dy),
            rhs: field_prev.values().to_vec(),
        })
    }
}
