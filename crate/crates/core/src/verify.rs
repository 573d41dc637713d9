//! Randomized property suites for the two sub-steps, plus the refinement
//! study. Every suite uses a fixed seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{compute_rho, total_mass, DensityField, Grid, RhoProfile};
use crate::model::{ModelSpec, RunConfig};
use crate::solver::{run, Scheme, SolverError};

pub const SEED: u64 = 0x5eed_2024;
pub const TRANSPORT_CASES: usize = 200;
pub const ROOT_CASES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Positivity,
    MaximumPrinciple,
    Monotonicity,
    Mass,
    Root,
    Refinement,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Positivity,
        Suite::MaximumPrinciple,
        Suite::Monotonicity,
        Suite::Mass,
        Suite::Root,
        Suite::Refinement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Positivity => "positivity",
            Suite::MaximumPrinciple => "maximum-principle",
            Suite::Monotonicity => "monotonicity",
            Suite::Mass => "mass",
            Suite::Root => "root",
            Suite::Refinement => "refinement",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!("unknown suite `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Outcome of one property over all generated cases.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed violation measure (property specific).
    pub worst: f64,
    pub first_failure: Option<String>,
}

impl PropertyOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            cases: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
        }
    }

    fn check(&mut self, ok: bool, measure: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if measure.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(measure);
        }
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}/{} cases, worst {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases - self.failures,
            self.cases,
            self.worst
        )?;
        if let Some(msg) = &self.first_failure {
            write!(f, " (first failure: {msg})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub properties: Vec<PropertyOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyOutcome::passed)
    }
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport, SolverError> {
    let properties = match suite {
        Suite::Positivity => vec![transport_suite(TRANSPORT_CASES, SEED, false)?.positivity],
        Suite::MaximumPrinciple => {
            let t = transport_suite(TRANSPORT_CASES, SEED, false)?;
            vec![t.transport_bounds, t.reaction_bounds]
        }
        Suite::Monotonicity => vec![transport_suite(TRANSPORT_CASES, SEED, true)?.monotonicity],
        Suite::Mass => vec![transport_suite(TRANSPORT_CASES, SEED, false)?.mass],
        Suite::Root => root_suite(ROOT_CASES, SEED),
        Suite::Refinement => {
            let study = refinement_study(&refinement_config(), 2)?;
            let ratio = study.ratios()[0];
            let mut p = PropertyOutcome::new("first-order refinement ratio in [0.3, 0.8]");
            p.check((0.3..=0.8).contains(&ratio), ratio, || {
                format!("differences {:?}", study.differences)
            });
            vec![p]
        }
    };
    Ok(SuiteReport { suite, properties })
}

/// A small random configuration with one time step.
///
/// The `fig2` family is drawn with `Y ≤ 5`: random fields have O(1) density
/// jumps between neighbouring cells, and with `μ(Y) = Y⁴` for larger `Y` the
/// transport coefficients reach 1e7, where rounding in the density equation
/// alone exceeds the Picard tolerance.
pub fn random_config(rng: &mut impl Rng) -> RunConfig {
    let m_x = rng.gen_range(2..=32);
    let m_y = rng.gen_range(1..=16);
    let model = if rng.gen_bool(0.5) {
        ModelSpec::fig1()
    } else {
        ModelSpec::fig2_with_y_max(rng.gen_range(1..=5) as f64)
    };
    let mut config = RunConfig::fig1();
    config.dx = [0.01, 0.025, 0.05, 0.1, 0.2][rng.gen_range(0..5)];
    config.x_max = m_x as f64 * config.dx;
    config.dy = model.y_max / m_y as f64;
    config.dt = [0.001, 0.002, 0.005, 0.01, 0.02][rng.gen_range(0..5)];
    config.t_max = config.dt;
    config.output_times = vec![0.0];
    config.level_set_values = vec![];
    config.model = model;
    config.model.epsilon = [0.001, 0.01, 0.05, 0.1][rng.gen_range(0..4)];
    config.model.ic_center = 0.5 * config.model.y_max;
    config.tolerances.boundary_guard = None;
    config
}

/// Random nonnegative field with column densities in `[0, ρ_M]`; sorted into
/// a non-increasing profile when `monotone`.
pub fn random_field(rng: &mut impl Rng, config: &RunConfig, monotone: bool) -> DensityField {
    let grid = Grid::from_config(config).expect("valid config");
    let rho_max = config.model.rho_max;
    let mut targets: Vec<f64> = (0..grid.m_x)
        .map(|_| match rng.gen_range(0..6) {
            0 => 0.0,
            1 => rho_max,
            _ => rng.gen_range(0.0..=rho_max),
        })
        .collect();
    if monotone {
        targets.sort_by(|a, b| b.total_cmp(a));
    }
    let mut values = Vec::with_capacity(grid.len());
    for &target in &targets {
        let shape: Vec<f64> = (0..grid.m_y)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) })
            .collect();
        let sum: f64 = shape.iter().sum();
        if sum > 0.0 {
            values.extend(shape.iter().map(|s| target * s / (grid.dy * sum)));
        } else {
            values.extend(std::iter::repeat(target / (grid.dy * grid.m_y as f64)).take(grid.m_y));
        }
    }
    DensityField::from_values(&grid, values, 0.0).expect("sized to the grid")
}

pub struct TransportOutcomes {
    pub positivity: PropertyOutcome,
    pub transport_bounds: PropertyOutcome,
    pub reaction_bounds: PropertyOutcome,
    pub monotonicity: PropertyOutcome,
    pub mass: PropertyOutcome,
}

fn range_violation(rho: &RhoProfile, upper: f64) -> f64 {
    rho.values
        .iter()
        .map(|&r| (-r).max(r - upper).max(0.0))
        .fold(0.0, f64::max)
}

/// Step 1 (and Step 2 for the bounds) on `cases` random instances.
pub fn transport_suite(cases: usize, seed: u64, monotone: bool) -> Result<TransportOutcomes, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TransportOutcomes {
        positivity: PropertyOutcome::new("step 1 output nonnegative (min >= -1e-12 max)"),
        transport_bounds: PropertyOutcome::new("step 1 density within [0, rho_max] (slack 1e-10)"),
        reaction_bounds: PropertyOutcome::new("step 2 density within [0, rho_max] (slack 1e-10)"),
        monotonicity: PropertyOutcome::new("non-increasing density stays non-increasing (slack 1e-10)"),
        mass: PropertyOutcome::new("step 1 mass drift <= 1e-9 relative"),
    };
    for case in 0..cases {
        let config = random_config(&mut rng);
        let field = random_field(&mut rng, &config, monotone);
        let scheme = Scheme::new(&config)?;
        let grid = *scheme.grid();
        let rho_max = config.model.rho_max;
        let tag = |what: &str| format!("case {case} ({what}), dt={} dx={} eps={}", config.dt, config.dx, config.model.epsilon);
        let (mid, report) = match scheme.advection_diffusion_step(&field) {
            Ok(v) => v,
            Err(e) => {
                let msg = tag(&e.to_string());
                for p in [&mut out.positivity, &mut out.transport_bounds, &mut out.monotonicity, &mut out.mass] {
                    p.check(false, f64::INFINITY, || msg.clone());
                }
                out.reaction_bounds.check(false, f64::INFINITY, || msg.clone());
                continue;
            }
        };
        let max = field.max_value().max(mid.max_value());
        let neg = (-report.transport_min).max(-mid.min_value()).max(0.0);
        out.positivity.check(neg <= 1e-12 * max, neg, || tag("negative entry"));

        let rho_mid = compute_rho(&mid, &grid)?;
        let v = range_violation(&rho_mid, rho_max);
        out.transport_bounds.check(v <= 1e-10, v, || tag("rho* out of range"));

        let rise = rho_mid
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]).max(0.0))
            .fold(0.0, f64::max);
        let input_monotone = compute_rho(&field, &grid)?.values.windows(2).all(|w| w[1] <= w[0] + 1e-14);
        if input_monotone {
            out.monotonicity.check(rise <= 1e-10, rise, || tag("increase in rho*"));
        }

        let before = total_mass(&field, &grid)?;
        let after = total_mass(&mid, &grid)?;
        let drift = if before > 0.0 { (after - before).abs() / before } else { after.abs() };
        out.mass.check(drift <= 1e-9, drift, || tag("mass drift"));

        match scheme.reaction_step(&mid) {
            Ok((next, _)) => {
                let v = range_violation(&compute_rho(&next, &grid)?, rho_max);
                // The bound is only claimed when the input density respects it.
                if range_violation(&rho_mid, rho_max) == 0.0 {
                    out.reaction_bounds.check(v <= 1e-10, v, || tag("rho^{h+1} out of range"));
                }
            }
            Err(e) => out.reaction_bounds.check(false, f64::INFINITY, || tag(&e.to_string())),
        }
    }
    Ok(out)
}

/// `ρ − Δy Σ_k exp((U_k + Δt (r_k − ρ))/ε)` evaluated term by term.
pub fn reaction_residual(u: &[f64], growth: &[f64], dt: f64, dy: f64, eps: f64, rho: f64) -> f64 {
    rho - dy * u.iter().zip(growth).map(|(uk, rk)| ((uk + dt * (rk - rho)) / eps).exp()).sum::<f64>()
}

/// Bisection on the term-by-term residual.
pub fn bisection_root(u: &[f64], growth: &[f64], dt: f64, dy: f64, eps: f64, upper: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, upper);
    while reaction_residual(u, growth, dt, dy, eps, hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reaction_residual(u, growth, dt, dy, eps, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Step-2 root checks on `cases` random columns.
pub fn root_suite(cases: usize, seed: u64) -> Vec<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2007);
    let mut residual = PropertyOutcome::new("root residual <= 1e-12");
    let mut range = PropertyOutcome::new("root within [0, rho_max + 1e-10] when rho* <= rho_max");
    let mut oracle = PropertyOutcome::new("agreement with bisection oracle <= 1e-10");
    for case in 0..cases {
        let mut config = random_config(&mut rng);
        config.dx = config.x_max / 2.0;
        config.x_max = 2.0 * config.dx;
        // Empty columns have the trivial root and are redrawn.
        let field = loop {
            let f = random_field(&mut rng, &config, false);
            if f.column(0).iter().any(|&n| n > 0.0) {
                break f;
            }
        };
        // Occasionally push the column above the carrying capacity.
        let scale = if rng.gen_bool(0.2) { rng.gen_range(1.0..3.0) } else { 1.0 };
        let scheme = match Scheme::new(&config) {
            Ok(s) => s,
            Err(e) => {
                residual.check(false, f64::INFINITY, || e.to_string());
                continue;
            }
        };
        let grid = *scheme.grid();
        let eps = config.model.epsilon;
        let growth: Vec<f64> = (0..grid.m_y)
            .map(|k| config.model.growth_rate.value(grid.y_center(k)))
            .collect();
        let column: Vec<f64> = field.column(0).iter().map(|n| n * scale).collect();
        let u: Vec<f64> = column.iter().map(|&n| eps * n.max(config.tolerances.density_floor).ln()).collect();
        let rho_star = grid.dy * column.iter().sum::<f64>();
        let tag = || format!("case {case}: m_y={} dt={} eps={} rho*={rho_star}", grid.m_y, config.dt, eps);
        let root = match scheme.reaction_rho_root(&u) {
            Ok(r) => r.rho,
            Err(e) => {
                let msg = format!("{}: {e}", tag());
                residual.check(false, f64::INFINITY, || msg.clone());
                oracle.check(false, f64::INFINITY, || msg);
                continue;
            }
        };
        let f = reaction_residual(&u, &growth, config.dt, grid.dy, eps, root).abs();
        residual.check(f <= 1e-12, f, tag);
        if rho_star <= config.model.rho_max {
            let v = (-root).max(root - config.model.rho_max).max(0.0);
            range.check(v <= 1e-10, v, tag);
        }
        let reference = bisection_root(&u, &growth, config.dt, grid.dy, eps, config.model.rho_max.max(rho_star));
        let d = (root - reference).abs();
        oracle.check(d <= 1e-10, d, tag);
    }
    vec![residual, range, oracle]
}

/// The `fig1` preset truncated to `T = 2`, the coarsest level of the
/// refinement study.
pub fn refinement_config() -> RunConfig {
    let mut c = RunConfig::fig1();
    c.t_max = 2.0;
    c.output_times = vec![2.0];
    c
}

pub struct RefinementStudy {
    /// Final density profile per level, coarsest first.
    pub profiles: Vec<RhoProfile>,
    /// `‖ρ_h − R ρ_{h/2}‖∞` per successive pair, on the coarser grid.
    pub differences: Vec<f64>,
}

impl RefinementStudy {
    pub fn ratios(&self) -> Vec<f64> {
        self.differences.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Averages pairs of cells onto the grid with twice the spacing.
pub fn restrict(fine: &RhoProfile) -> RhoProfile {
    RhoProfile {
        values: fine.values.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect(),
        time: fine.time,
    }
}

/// Runs `base` and `halvings` successive halvings of `Δt` and `Δx`.
pub fn refinement_study(base: &RunConfig, halvings: usize) -> Result<RefinementStudy, SolverError> {
    let mut profiles = Vec::new();
    for level in 0..=halvings {
        let mut c = base.clone();
        let f = 2f64.powi(level as i32);
        c.dt /= f;
        c.dx /= f;
        let summary = run(&c, &mut crate::solver::NullObserver).map_err(|e| e.error)?;
        let grid = Grid::from_config(&c)?;
        profiles.push(compute_rho(&summary.final_field, &grid)?);
    }
    let differences = profiles
        .windows(2)
        .map(|w| w[0].sup_distance(&restrict(&w[1])))
        .collect();
    Ok(RefinementStudy { profiles, differences })
}
