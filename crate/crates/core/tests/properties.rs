//! Randomized invariants of the model, grid, scheme and diagnostics.

mod common;

use phenofront::diagnostics::{
    column_peak, dominant_trait, estimate_front_speed, level_set_position, minimal_speed_bound,
};
use phenofront::solver::{advection_diffusion_step, assemble_advection_system, reaction_rho_root, reaction_step};
use phenofront::verify::{bisection_root, random_config, random_field, reaction_residual};
use phenofront::{
    compute_rho, initial_density, total_mass, DensityField, Grid, InitialProfile, ModelSpec, RhoProfile, RunConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_and_values(max_x: usize, max_y: usize) -> impl Strategy<Value = (Grid, Vec<f64>)> {
    (1..=max_x, 1..=max_y, 0.01f64..1.0, 0.01f64..1.0).prop_flat_map(|(m_x, m_y, dx, dy)| {
        let grid = Grid::new(m_x, m_y, dx, dy);
        (Just(grid), prop::collection::vec(0.0f64..10.0, m_x * m_y))
    })
}

fn seeded(seed: u64) -> (RunConfig, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_config(&mut rng), rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rho_is_linear(
        (grid, a) in grid_and_values(12, 12),
        seed in any::<u64>(),
        alpha in 0.0f64..5.0,
        beta in 0.0f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| rand::Rng::gen_range(&mut rng, 0.0..10.0)).collect();
        let fa = DensityField::from_values(&grid, a, 0.0).unwrap();
        let fb = DensityField::from_values(&grid, b, 0.0).unwrap();
        let combined = compute_rho(&fa.linear_combination(alpha, &fb, beta), &grid).unwrap();
        let ra = compute_rho(&fa, &grid).unwrap();
        let rb = compute_rho(&fb, &grid).unwrap();
        for j in 0..grid.m_x {
            let expected = alpha * ra.values[j] + beta * rb.values[j];
            prop_assert!((combined.values[j] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn mass_is_dx_times_summed_rho((grid, v) in grid_and_values(12, 12)) {
        let field = DensityField::from_values(&grid, v, 0.0).unwrap();
        let rho = compute_rho(&field, &grid).unwrap();
        let expected = grid.dx * rho.values.iter().sum::<f64>();
        let mass = total_mass(&field, &grid).unwrap();
        prop_assert!((mass - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn fitness_decreases_in_both_arguments(
        fig2 in any::<bool>(),
        s in 0.001f64..1.0,
        h in 0.001f64..0.5,
        rho in 0.0f64..2.0,
        drho in 0.001f64..1.0,
    ) {
        let spec = if fig2 { ModelSpec::fig2() } else { ModelSpec::fig1() };
        let y = s * spec.y_max * (1.0 - h);
        let y2 = y + h * spec.y_max * s.max(0.01);
        let f = spec.eval_fitness(y, rho).unwrap();
        prop_assert!(spec.eval_fitness(y, rho + drho).unwrap() < f);
        prop_assert!(spec.eval_fitness(y2.min(spec.y_max), rho).unwrap() < f);
        let mu = spec.eval_mobility(y).unwrap();
        prop_assert!(mu > 0.0);
        prop_assert!(spec.eval_mobility(y2.min(spec.y_max)).unwrap() > mu);
    }

    #[test]
    fn initial_density_is_positive_and_decreasing(
        m_x in 2usize..40,
        m_y in 2usize..40,
        center in 0.05f64..0.95,
        wkb in any::<bool>(),
    ) {
        let mut c = RunConfig::fig1();
        c.dx = 0.05;
        c.x_max = m_x as f64 * c.dx;
        c.dy = 1.0 / m_y as f64;
        c.t_max = 0.0;
        c.output_times = vec![0.0];
        c.model.ic_center = center;
        c.model.ic_profile = if wkb { InitialProfile::Wkb } else { InitialProfile::Unit };
        let grid = Grid::from_config(&c).unwrap();
        let n0 = initial_density(&c).unwrap();
        prop_assert!(n0.values().iter().all(|&v| v > 0.0));
        let rho = compute_rho(&n0, &grid).unwrap();
        prop_assert!(rho.values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn level_sets_move_left_as_the_level_rises(
        mut v in prop::collection::vec(0.0f64..1.0, 2..60),
        l1 in 0.0f64..1.0,
        l2 in 0.0f64..1.0,
    ) {
        v.sort_by(|a, b| b.total_cmp(a));
        let grid = Grid::new(v.len(), 1, 0.1, 1.0);
        let rho = RhoProfile { values: v, time: 0.0 };
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        if let (Some(x_lo), Some(x_hi)) = (level_set_position(&rho, &grid, lo), level_set_position(&rho, &grid, hi)) {
            prop_assert!(x_hi <= x_lo + 1e-12);
        }
    }

    #[test]
    fn speed_fit_is_affine_equivariant(
        xs in prop::collection::vec(-50.0f64..50.0, 3..30),
        shift in -100.0f64..100.0,
        scale in 0.1f64..10.0,
    ) {
        let track: Vec<(f64, f64)> = xs.iter().enumerate().map(|(i, &x)| (i as f64 * 0.5, x)).collect();
        let t1 = 0.5 * (xs.len() - 1) as f64;
        let base = estimate_front_speed(&track, (0.0, t1)).unwrap();
        let shifted: Vec<(f64, f64)> = track.iter().map(|&(t, x)| (t, x + shift)).collect();
        let s = estimate_front_speed(&shifted, (0.0, t1)).unwrap();
        let tol = 1e-9 * (1.0 + base.slope.abs());
        prop_assert!((s.slope - base.slope).abs() <= tol);
        let stretched: Vec<(f64, f64)> = track.iter().map(|&(t, x)| (scale * t, x)).collect();
        let s = estimate_front_speed(&stretched, (0.0, scale * t1)).unwrap();
        prop_assert!((s.slope * scale - base.slope).abs() <= tol);
    }

    #[test]
    fn delta_columns_report_their_cell(m_x in 1usize..10, m_y in 1usize..40, seed in any::<u64>()) {
        let grid = Grid::new(m_x, m_y, 0.1, 1.0 / m_y as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<usize> = (0..m_x).map(|_| rand::Rng::gen_range(&mut rng, 0..m_y)).collect();
        let field = DensityField::from_fn(&grid, 0.0, |j, k| if k == cells[j] { 1.0 / grid.dy } else { 0.0 });
        let ybar = dominant_trait(&field, &grid, 0.5).unwrap();
        for (j, y) in ybar.iter().enumerate() {
            prop_assert_eq!(*y, Some(grid.y_center(cells[j])));
            prop_assert_eq!(column_peak(field.column(j), &grid), grid.y_center(cells[j]));
        }
    }

    #[test]
    fn speed_bound_is_scale_invariant(
        m_x in 1usize..8,
        centers in prop::collection::vec(0.1f64..0.9, 8),
        widths in prop::collection::vec(0.005f64..0.05, 8),
        factor in 1e-3f64..1e3,
    ) {
        let spec = ModelSpec::fig1();
        let grid = Grid::new(m_x, 50, 0.1, 0.02);
        let field = DensityField::from_fn(&grid, 0.0, |j, k| {
            let y = grid.y_center(k);
            (-(y - centers[j]).powi(2) / widths[j]).exp()
        });
        let scaled = field.linear_combination(factor, &field, 0.0);
        let threshold = 1e-6;
        let a = minimal_speed_bound(&field, &grid, &spec, threshold).unwrap();
        let b = minimal_speed_bound(&scaled, &grid, &spec, factor * threshold).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-8 * a.value.max(1.0));
        prop_assert_eq!(a.x, b.x);
    }

    #[test]
    fn assembled_system_has_the_m_matrix_structure(seed in any::<u64>()) {
        let (config, mut rng) = seeded(seed);
        let field = random_field(&mut rng, &config, false);
        let grid = Grid::from_config(&config).unwrap();
        let iterate = compute_rho(&random_field(&mut rng, &config, false), &grid).unwrap();
        let system = assemble_advection_system(&field, &iterate, &config).unwrap();
        for j in 0..grid.m_x {
            for k in 0..grid.m_y {
                let (a, b, c) = (system.a(j, k), system.b(j, k), system.c(j, k));
                prop_assert!(a >= 0.0 && c >= 0.0);
                prop_assert!((b - 1.0 - a - c).abs() <= 1e-12 * b);
            }
        }
        prop_assert!(system.column_dominance_margin() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_step_is_positive_bounded_and_conservative(seed in any::<u64>(), monotone in any::<bool>()) {
        let (config, mut rng) = seeded(seed);
        let grid = Grid::from_config(&config).unwrap();
        let field = random_field(&mut rng, &config, monotone);
        let (next, report) = advection_diffusion_step(&field, &config).unwrap();
        let peak = field.max_value();
        prop_assert!(report.transport_min >= -1e-12 * peak);
        let rho = compute_rho(&next, &grid).unwrap();
        let rho_max = config.model.rho_max;
        prop_assert!(rho.values.iter().all(|&r| (-1e-10..=rho_max + 1e-10).contains(&r)));
        if monotone {
            prop_assert!(rho.values.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        }
        let before = total_mass(&field, &grid).unwrap();
        let after = total_mass(&next, &grid).unwrap();
        prop_assert!((after - before).abs() <= 1e-9 * before.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn reaction_step_keeps_rho_below_the_carrying_capacity(seed in any::<u64>()) {
        let (config, mut rng) = seeded(seed);
        let grid = Grid::from_config(&config).unwrap();
        let field = random_field(&mut rng, &config, false);
        let (next, _) = reaction_step(&field, &config).unwrap();
        let rho = compute_rho(&next, &grid).unwrap();
        prop_assert!(rho.values.iter().all(|&r| (0.0..=config.model.rho_max + 1e-10).contains(&r)));
    }

    #[test]
    fn reaction_root_agrees_with_bisection(seed in any::<u64>()) {
        let (config, mut rng) = seeded(seed);
        let grid = Grid::from_config(&config).unwrap();
        let field = random_field(&mut rng, &config, false);
        let eps = config.model.epsilon;
        let growth: Vec<f64> = (0..grid.m_y).map(|k| config.model.growth_rate.value(grid.y_center(k))).collect();
        for col in field.columns() {
            let u: Vec<f64> = col.iter().map(|&n| eps * n.max(1e-250).ln()).collect();
            let root = reaction_rho_root(&u, &config).unwrap();
            let residual = reaction_residual(&u, &growth, config.dt, grid.dy, eps, root);
            prop_assert!(residual.abs() <= 1e-12);
            let oracle = bisection_root(&u, &growth, config.dt, grid.dy, eps, config.model.rho_max.max(1.0) * 4.0);
            prop_assert!((root - oracle).abs() <= 1e-10);
        }
    }
}
