#![allow(dead_code)]

use phenofront::solver::{advection_diffusion_step, reaction_step};
use phenofront::verify::random_field;
use phenofront::{DensityField, Grid, ModelSpec, RunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One-step configuration on an `m_x × m_y` grid.
pub fn small_config(spec: ModelSpec, m_x: usize, m_y: usize, dx: f64, dt: f64) -> RunConfig {
    let mut c = RunConfig::fig1();
    c.dy = spec.y_max / m_y as f64;
    c.model = spec;
    c.dx = dx;
    c.x_max = m_x as f64 * dx;
    c.dt = dt;
    c.t_max = dt;
    c.output_times = vec![0.0];
    c.level_set_values = vec![];
    c.tolerances.boundary_guard = None;
    c
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The implicit transport/diffusion matrix written out from the scheme.
pub fn dense_matrix(config: &RunConfig, rho: &[f64]) -> Vec<Vec<f64>> {
    let g = Grid::from_config(config).unwrap();
    let n = g.m_x * g.m_y;
    let kappa = config.dt / g.dx;
    let lambda = config.model.epsilon * config.dt / (g.dy * g.dy);
    let grad = |j: usize| (rho[j + 1] - rho[j]) / g.dx;
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..g.m_x {
        for k in 0..g.m_y {
            let row = j * g.m_y + k;
            let mu = config.model.mobility.value(g.y_center(k));
            m[row][row] += 1.0;
            if j + 1 < g.m_x {
                // right face: outflow −(δρ)₋ N_j, inflow (δρ)₊ N_{j+1}
                let d = grad(j);
                m[row][row] += kappa * mu * (-d).max(0.0);
                m[row][row + g.m_y] -= kappa * mu * d.max(0.0);
            }
            if j > 0 {
                let d = grad(j - 1);
                m[row][row] += kappa * mu * d.max(0.0);
                m[row][row - g.m_y] -= kappa * mu * (-d).max(0.0);
            }
            for kk in [k.wrapping_sub(1), k + 1] {
                if kk < g.m_y {
                    m[row][row] += lambda;
                    m[row][j * g.m_y + kk] -= lambda;
                }
            }
        }
    }
    m
}

pub fn rho_of(values: &[f64], m_y: usize, dy: f64) -> Vec<f64> {
    values.chunks(m_y).map(|c| dy * c.iter().sum::<f64>()).collect()
}

/// Frozen-coefficient fixed point from `ρ^h`, each system solved densely.
/// The update is under-relaxed whenever the residual stops shrinking. This
/// leaves the fixed point unchanged and damps the period-two cycles that
/// plain substitution falls into on rough data.
pub fn dense_picard(config: &RunConfig, field: &DensityField) -> Vec<f64> {
    let g = Grid::from_config(config).unwrap();
    let mut rho = rho_of(field.values(), g.m_y, g.dy);
    let mut omega = 1.0;
    let mut last = f64::INFINITY;
    for _ in 0..100_000 {
        let x = dense_solve(dense_matrix(config, &rho), field.values().to_vec());
        let next = rho_of(&x, g.m_y, g.dy);
        let residual = sup_diff(&next, &rho);
        if residual < 1e-14 {
            return x;
        }
        if residual > 0.9 * last {
            omega = (omega * 0.5f64).max(1.0 / 64.0);
        }
        last = residual;
        for (r, n) in rho.iter_mut().zip(&next) {
            *r += omega * (n - *r);
        }
    }
    panic!("dense Picard oracle did not converge");
}

/// `dN_k/dt = N_k (r_k − ρ)/ε` integrated with classical RK4.
pub fn rk4_reaction(column: &[f64], growth: &[f64], dy: f64, eps: f64, t: f64, substeps: usize) -> Vec<f64> {
    let rhs = |n: &[f64]| -> Vec<f64> {
        let rho = dy * n.iter().sum::<f64>();
        n.iter().zip(growth).map(|(v, r)| v * (r - rho) / eps).collect()
    };
    let h = t / substeps as f64;
    let mut n = column.to_vec();
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    for _ in 0..substeps {
        let k1 = rhs(&n);
        let k2 = rhs(&axpy(&n, 0.5 * h, &k1));
        let k3 = rhs(&axpy(&n, 0.5 * h, &k2));
        let k4 = rhs(&axpy(&n, h, &k3));
        for i in 0..n.len() {
            n[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    n
}

/// Largest sup-norm gap between Step 1 and [`dense_picard`] over `cases`
/// random 8×4 instances.
pub fn transport_oracle_deviation(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let spec = if case % 2 == 0 { ModelSpec::fig1() } else { ModelSpec::fig2_with_y_max(2.0) };
        let dt = [0.001, 0.002, 0.004][case % 3];
        let mut config = small_config(spec, 8, 4, 0.1, dt);
        config.model.epsilon = [0.01, 0.05][case % 2];
        let field = random_field(&mut rng, &config, case % 4 == 0);
        let (out, _) = advection_diffusion_step(&field, &config).unwrap();
        worst = worst.max(sup_diff(out.values(), &dense_picard(&config, &field)));
    }
    worst
}

/// Largest relative gap between Step 2 and [`rk4_reaction`] over `cases`
/// random 4×10 instances. Cells the oracle leaves empty must stay empty.
pub fn reaction_oracle_deviation(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        // Δt/ε = 0.01 keeps the splitting error of the implicit-in-ρ update
        // well below the comparison tolerance.
        let mut config = small_config(ModelSpec::fig1(), 4, 10, 0.1, 1e-4);
        config.model.epsilon = 0.01;
        let g = Grid::from_config(&config).unwrap();
        let field = random_field(&mut rng, &config, false);
        let (out, _) = reaction_step(&field, &config).unwrap();
        let growth: Vec<f64> = (0..g.m_y).map(|k| config.model.growth_rate.value(g.y_center(k))).collect();
        for j in 0..g.m_x {
            let oracle = rk4_reaction(field.column(j), &growth, g.dy, 0.01, config.dt, 1000);
            for (a, b) in out.column(j).iter().zip(&oracle) {
                let rel = if *b > 0.0 { (a - b).abs() / b } else if *a == 0.0 { 0.0 } else { f64::INFINITY };
                worst = worst.max(rel);
            }
        }
    }
    worst
}
