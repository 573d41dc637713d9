//! Density predictor for the nonlinear transport step.
//!
//! Summing the transport scheme over the trait cells gives a closed equation
//! for the density once the mean mobility `m_j = Δy Σ_k μ_k N[j,k] / ρ_j` of
//! each column is known:
//!
//! ```text
//! ρ_j − ρ^h_j − (Δt/Δx) (F_j − F_{j−1}) = 0,
//! F_j = m_up · max(ρ_j, ρ_{j+1}) · (ρ_{j+1} − ρ_j)/Δx,
//! ```
//!
//! where `up` is the upwind column (the one with the larger density) and the
//! boundary faces carry no flux. With `m` frozen this is a tridiagonal
//! nonlinear system whose Jacobian is an M-matrix; it is solved by damped
//! Newton. The outer Picard loop refreshes `m` from the transported field.

use crate::grid::Grid;

use super::linear::thomas;

pub(crate) struct DensityPredictor<'a> {
    pub grid: &'a Grid,
    pub dt: f64,
    pub rho_prev: &'a [f64],
    pub mean_mobility: &'a [f64],
}

impl DensityPredictor<'_> {
    fn face(&self, rho: &[f64], j: usize) -> (f64, f64, f64) {
        // Returns (F_j, dF_j/dρ_j, dF_j/dρ_{j+1}).
        let dx = self.grid.dx;
        let (l, r) = (rho[j], rho[j + 1]);
        if l >= r {
            let s = self.mean_mobility[j] / dx;
            (s * l * (r - l), s * (r - 2.0 * l), s * l)
        } else {
            let s = self.mean_mobility[j + 1] / dx;
            (s * r * (r - l), -s * r, s * (2.0 * r - l))
        }
    }

    /// Fills `out` with the residual and returns its Euclidean norm.
    fn residual(&self, rho: &[f64], out: &mut [f64]) -> f64 {
        let kappa = self.dt / self.grid.dx;
        let n = rho.len();
        for j in 0..n {
            out[j] = rho[j] - self.rho_prev[j];
        }
        for j in 0..n - 1 {
            let (f, _, _) = self.face(rho, j);
            out[j] -= kappa * f;
            out[j + 1] += kappa * f;
        }
        out.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Newton iteration from `rho`; returns the final residual norm.
    pub fn solve(&self, rho: &mut [f64], tol: f64, max_iterations: usize) -> f64 {
        let n = rho.len();
        let kappa = self.dt / self.grid.dx;
        let mut g = vec![0.0; n];
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial_res = vec![0.0; n];
        let mut scratch = Vec::with_capacity(n);
        let mut norm = self.residual(rho, &mut g);
        for _ in 0..max_iterations {
            if norm <= tol {
                break;
            }
            diag.iter_mut().for_each(|d| *d = 1.0);
            sub.iter_mut().for_each(|d| *d = 0.0);
            sup.iter_mut().for_each(|d| *d = 0.0);
            for j in 0..n - 1 {
                let (_, dl, dr) = self.face(rho, j);
                // Row j holds −κF_j, row j+1 holds +κF_j.
                diag[j] -= kappa * dl;
                sup[j] -= kappa * dr;
                sub[j + 1] += kappa * dl;
                diag[j + 1] += kappa * dr;
            }
            let mut step: Vec<f64> = g.iter().map(|v| -v).collect();
            thomas(&sub, &diag, &sup, &mut step, &mut scratch);

            let mut theta = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                for j in 0..n {
                    trial[j] = (rho[j] + theta * step[j]).max(0.0);
                }
                let trial_norm = self.residual(&trial, &mut trial_res);
                if trial_norm.is_finite() && trial_norm < norm {
                    rho.copy_from_slice(&trial);
                    g.copy_from_slice(&trial_res);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                theta *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_profile_is_a_fixed_point() {
        let grid = Grid::new(6, 1, 0.1, 1.0);
        let prev = vec![0.4; 6];
        let mob = vec![1.0; 6];
        let p = DensityPredictor { grid: &grid, dt: 0.5, rho_prev: &prev, mean_mobility: &mob };
        let mut rho = prev.clone();
        let res = p.solve(&mut rho, 1e-14, 20);
        assert_eq!(res, 0.0);
        assert_eq!(rho, prev);
    }

    #[test]
    fn steep_step_converges_and_conserves() {
        let grid = Grid::new(40, 1, 0.01, 1.0);
        let prev: Vec<f64> = (0..40).map(|j| if j < 20 { 1.0 } else { 0.0 }).collect();
        let mob = vec![1.0; 40];
        let p = DensityPredictor { grid: &grid, dt: 0.01, rho_prev: &prev, mean_mobility: &mob };
        let mut rho = prev.clone();
        let res = p.solve(&mut rho, 1e-13, 100);
        assert!(res <= 1e-13, "{res}");
        let before: f64 = prev.iter().sum();
        let after: f64 = rho.iter().sum();
        assert!((before - after).abs() < 1e-12);
        assert!(rho.windows(2).all(|w| w[1] <= w[0] + 1e-14));
        assert!(rho.iter().all(|&r| (0.0..=1.0 + 1e-12).contains(&r)));
    }
}
