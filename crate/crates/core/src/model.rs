//! Continuous model: coefficient functions, fitness, initial condition and
//! the validated run configuration.
//!
//! The density `n(t, x, y)` evolves under
//!
//! ```text
//! ε ∂t n − ε μ(y) ∂x(n ∂x ρ) = (r(y) − ρ) n + ε² ∂yy n,   ρ = ∫ n dy
//! ```
//!
//! on `(0, X) × (0, Y)`. Coefficients are described by [`Profile`]s so that
//! configurations stay plain data and can be serialized alongside results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{DensityField, Grid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("trait value y = {y} lies outside [0, {y_max}]")]
    Domain { y: f64, y_max: f64 },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("unknown preset `{0}` (expected `fig1` or `fig2`)")]
    UnknownPreset(String),
}

/// A scalar coefficient function of the trait variable.
///
/// Serialized as `{ polynomial = [c0, c1, ...] }` (ascending powers) or
/// `{ rational = { numerator = [...], denominator = [...] } }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Polynomial(Vec<f64>),
    Rational {
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    },
}

fn horner(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
}

fn horner_derivative(coeffs: &[f64], y: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &c)| acc * y + i as f64 * c)
}

impl Profile {
    pub fn value(&self, y: f64) -> f64 {
        match self {
            Profile::Polynomial(c) => horner(c, y),
            Profile::Rational {
                numerator,
                denominator,
            } => horner(numerator, y) / horner(denominator, y),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            Profile::Polynomial(c) => horner_derivative(c, y),
            Profile::Rational {
                numerator,
                denominator,
            } => {
                let p = horner(numerator, y);
                let q = horner(denominator, y);
                let dp = horner_derivative(numerator, y);
                let dq = horner_derivative(denominator, y);
                (dp * q - p * dq) / (q * q)
            }
        }
    }

    fn is_well_formed(&self) -> bool {
        match self {
            Profile::Polynomial(c) => !c.is_empty() && c.iter().all(|v| v.is_finite()),
            Profile::Rational {
                numerator,
                denominator,
            } => {
                !numerator.is_empty()
                    && !denominator.is_empty()
                    && numerator.iter().chain(denominator).all(|v| v.is_finite())
            }
        }
    }
}

/// Spatial factor of the initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProfile {
    /// `e^{−x²}`
    #[default]
    Unit,
    /// `e^{−x²/ε}`, i.e. `u(0, x, y) = −x² − (y − a)²` in the WKB variable.
    Wkb,
}

/// Continuous model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Upper bound `Y` of the trait domain.
    pub y_max: f64,
    /// Mobility `μ(y)`.
    pub mobility: Profile,
    /// Proliferation rate `r(y)`; fitness is `R(y, ρ) = r(y) − ρ`.
    pub growth_rate: Profile,
    /// Carrying capacity `ρ_M`.
    pub rho_max: f64,
    pub epsilon: f64,
    /// Initially dominant trait `a`.
    pub ic_center: f64,
    #[serde(default)]
    pub ic_profile: InitialProfile,
}

impl ModelSpec {
    /// Bounded mobility, travelling fronts: `μ = y² + 0.01`, `r = 1 − y²`, `Y = 1`.
    pub fn fig1() -> Self {
        Self {
            y_max: 1.0,
            mobility: Profile::Polynomial(vec![0.01, 0.0, 1.0]),
            growth_rate: Profile::Polynomial(vec![1.0, 0.0, -1.0]),
            rho_max: 1.0,
            epsilon: 0.01,
            ic_center: 0.2,
            ic_profile: InitialProfile::Wkb,
        }
    }

    /// Unbounded mobility, accelerating fronts: `μ = 0.01 + y⁴`,
    /// `r = 1 − y/(1+y)`, `Y = 20`.
    pub fn fig2() -> Self {
        Self::fig2_with_y_max(20.0)
    }

    /// The `fig2` coefficient family on a trait domain `[0, y_max]`.
    pub fn fig2_with_y_max(y_max: f64) -> Self {
        Self {
            y_max,
            mobility: Profile::Polynomial(vec![0.01, 0.0, 0.0, 0.0, 1.0]),
            // 1 − y/(1+y) = 1/(1+y)
            growth_rate: Profile::Rational {
                numerator: vec![1.0],
                denominator: vec![1.0, 1.0],
            },
            rho_max: 1.0,
            epsilon: 0.01,
            ic_center: 0.2,
            ic_profile: InitialProfile::Wkb,
        }
    }

    fn check_domain(&self, y: f64) -> Result<(), ModelError> {
        if (0.0..=self.y_max).contains(&y) {
            Ok(())
        } else {
            Err(ModelError::Domain {
                y,
                y_max: self.y_max,
            })
        }
    }

    pub fn eval_mobility(&self, y: f64) -> Result<f64, ModelError> {
        self.check_domain(y)?;
        Ok(self.mobility.value(y))
    }

    pub fn eval_growth_rate(&self, y: f64) -> Result<f64, ModelError> {
        self.check_domain(y)?;
        Ok(self.growth_rate.value(y))
    }

    /// Fitness `R(y, ρ) = r(y) − ρ`.
    pub fn eval_fitness(&self, y: f64, rho: f64) -> Result<f64, ModelError> {
        self.check_domain(y)?;
        Ok(self.growth_rate.value(y) - rho)
    }

    /// Checks the structural assumptions on `μ` and `r`, sampling monotonicity
    /// at the trait cell centers of a grid with step `dy`.
    pub fn validate(&self, dy: f64) -> Result<(), ModelError> {
        let invalid = |msg: String| Err(ModelError::Invalid(msg));
        if !(self.y_max.is_finite() && self.y_max > 0.0) {
            return invalid(format!("y_max must be positive, got {}", self.y_max));
        }
        if !(self.rho_max.is_finite() && self.rho_max > 0.0) {
            return invalid(format!("rho_max must be positive, got {}", self.rho_max));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.ic_center > 0.0 && self.ic_center < self.y_max) {
            return invalid(format!(
                "ic_center must lie in (0, {}), got {}",
                self.y_max, self.ic_center
            ));
        }
        if !self.mobility.is_well_formed() || !self.growth_rate.is_well_formed() {
            return invalid("coefficient profiles need finite, non-empty coefficients".into());
        }
        if !(self.mobility.value(0.0) > 0.0) {
            return invalid(format!("mu(0) must be positive, got {}", self.mobility.value(0.0)));
        }
        let r0 = self.growth_rate.value(0.0);
        if (r0 - self.rho_max).abs() > 1e-12 * self.rho_max {
            return invalid(format!("r(0) = {r0} must equal rho_max = {}", self.rho_max));
        }
        let r_top = self.growth_rate.value(self.y_max);
        if !(r_top >= 0.0 && r_top < self.rho_max) {
            return invalid(format!("r(Y) = {r_top} must lie in [0, rho_max)"));
        }

        if !(dy > 0.0 && dy.is_finite()) {
            return invalid(format!("dy must be positive, got {dy}"));
        }
        let m_y = (self.y_max / dy).round() as usize;
        let centers = (0..m_y).map(|k| (k as f64 + 0.5) * dy);
        let mut prev: Option<(f64, f64, f64)> = None;
        for y in centers {
            let mu = self.mobility.value(y);
            let r = self.growth_rate.value(y);
            if !(mu.is_finite() && mu > 0.0 && r.is_finite()) {
                return invalid(format!("coefficients not finite/positive at y = {y}"));
            }
            if let Some((py, pmu, pr)) = prev {
                if !(mu > pmu) {
                    return invalid(format!("mobility not strictly increasing between y = {py} and y = {y}"));
                }
                if !(r < pr) {
                    return invalid(format!("growth rate not strictly decreasing between y = {py} and y = {y}"));
                }
            }
            prev = Some((y, mu, r));
        }
        Ok(())
    }
}

/// Tolerances and iteration caps for the time-stepping scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverTolerances {
    /// Sup-norm change of ρ between Picard iterates.
    pub picard_tol: f64,
    pub max_picard_iterations: usize,
    /// Relative sup-norm residual of each linear solve.
    pub linear_tol: f64,
    pub max_linear_iterations: usize,
    /// Absolute residual of the scalar reaction equation.
    pub root_tol: f64,
    pub max_root_iterations: usize,
    /// Floor applied to densities before taking logarithms.
    pub density_floor: f64,
    /// Fail when ρ exceeds this value on the last 5% of x-cells.
    /// `None` disables the check; serialized as `"off"`.
    #[serde(with = "guard_serde")]
    pub boundary_guard: Option<f64>,
}

mod guard_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Value(*x),
            None => Repr::Word("off".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Word(w) if w == "off" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "boundary_guard must be a number or \"off\", got \"{w}\""
            ))),
        }
    }
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            picard_tol: 1e-10,
            max_picard_iterations: 100,
            linear_tol: 1e-12,
            max_linear_iterations: 10_000,
            root_tol: 1e-12,
            max_root_iterations: 200,
            density_floor: 1e-250,
            boundary_guard: Some(1e-6),
        }
    }
}

/// Post-processing parameters; not part of the scheme itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Support threshold for `ȳ`, the fitness residual and the speed bound.
    pub support_threshold: f64,
    /// Fit window for front speeds; defaults to `[T/2, T]`.
    pub speed_window: Option<(f64, f64)>,
    /// Early/late windows for the acceleration test; defaults to
    /// `[T/4, 5T/8]` and `[5T/8, T]`.
    pub acceleration_windows: Option<((f64, f64), (f64, f64))>,
    /// Relative slope increase flagged as acceleration.
    pub acceleration_margin: f64,
}

impl DiagnosticsConfig {
    pub fn for_model(model: &ModelSpec) -> Self {
        Self {
            support_threshold: 0.05 * model.rho_max,
            speed_window: None,
            acceleration_windows: None,
            acceleration_margin: 0.1,
        }
    }
}

/// Fully resolved simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub x_max: f64,
    pub t_max: f64,
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub output_times: Vec<f64>,
    pub level_set_values: Vec<f64>,
    pub tolerances: SolverTolerances,
    pub diagnostics: DiagnosticsConfig,
}

fn integer_ratio(total: f64, step: f64, what: &str) -> Result<usize, ModelError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(ModelError::Config(format!("{what}: step must be positive, got {step}")));
    }
    let n = (total / step).round();
    if (n * step - total).abs() > 1e-9 * total.abs().max(step) {
        return Err(ModelError::Config(format!(
            "{what}: {total} is not an integer multiple of {step}"
        )));
    }
    Ok(n as usize)
}

impl RunConfig {
    /// Grid and time values of the `fig1` preset.
    pub fn fig1() -> Self {
        let model = ModelSpec::fig1();
        let diagnostics = DiagnosticsConfig::for_model(&model);
        Self {
            model,
            x_max: 25.0,
            t_max: 8.0,
            dt: 0.01,
            dx: 0.01,
            dy: 0.02,
            output_times: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            level_set_values: vec![0.2, 0.6, 0.8],
            tolerances: SolverTolerances::default(),
            diagnostics,
        }
    }

    /// Grid and time values of the `fig2` preset.
    pub fn fig2() -> Self {
        let model = ModelSpec::fig2();
        let mut diagnostics = DiagnosticsConfig::for_model(&model);
        diagnostics.acceleration_windows = Some(((2.0, 5.0), (5.0, 8.0)));
        Self {
            model,
            x_max: 200.0,
            t_max: 8.0,
            dt: 0.002,
            dx: 0.1,
            dy: 0.05,
            output_times: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            level_set_values: vec![0.1, 0.25, 0.45, 0.8],
            tolerances: SolverTolerances::default(),
            diagnostics,
        }
    }

    pub fn preset(name: &str) -> Result<Self, ModelError> {
        match name {
            "fig1" => Ok(Self::fig1()),
            "fig2" => Ok(Self::fig2()),
            other => Err(ModelError::UnknownPreset(other.to_string())),
        }
    }

    pub fn m_x(&self) -> Result<usize, ModelError> {
        integer_ratio(self.x_max, self.dx, "x_max/dx")
    }

    pub fn m_y(&self) -> Result<usize, ModelError> {
        integer_ratio(self.model.y_max, self.dy, "y_max/dy")
    }

    pub fn steps(&self) -> Result<usize, ModelError> {
        if self.t_max == 0.0 {
            return Ok(0);
        }
        integer_ratio(self.t_max, self.dt, "t_max/dt")
    }

    /// Speed-fit window, `[T/2, T]` unless configured.
    pub fn speed_window(&self) -> (f64, f64) {
        self.diagnostics
            .speed_window
            .unwrap_or((0.5 * self.t_max, self.t_max))
    }

    pub fn acceleration_windows(&self) -> ((f64, f64), (f64, f64)) {
        let t = self.t_max;
        self.diagnostics
            .acceleration_windows
            .unwrap_or(((0.25 * t, 0.625 * t), (0.625 * t, t)))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let cfg = |msg: String| Err(ModelError::Config(msg));
        for (name, v) in [("x_max", self.x_max), ("dt", self.dt), ("dx", self.dx), ("dy", self.dy)] {
            if !(v.is_finite() && v > 0.0) {
                return cfg(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return cfg(format!("t_max must be non-negative, got {}", self.t_max));
        }
        self.model.validate(self.dy)?;
        if self.m_x()? < 2 {
            return cfg("need at least two x-cells".into());
        }
        if self.m_y()? < 1 {
            return cfg("need at least one y-cell".into());
        }
        self.steps()?;
        if self.output_times.windows(2).any(|w| !(w[0] < w[1])) {
            return cfg("output_times must be strictly increasing".into());
        }
        if let Some(t) = self
            .output_times
            .iter()
            .find(|&&t| !(0.0..=self.t_max).contains(&t))
        {
            return cfg(format!("output time {t} outside [0, {}]", self.t_max));
        }
        for &t in &self.output_times {
            let h = t / self.dt;
            if (h - h.round()).abs() > 1e-6 {
                return cfg(format!("output time {t} is not a multiple of dt = {}", self.dt));
            }
        }
        if let Some(l) = self
            .level_set_values
            .iter()
            .find(|&&l| !(l > 0.0 && l < self.model.rho_max))
        {
            return cfg(format!("level {l} outside (0, rho_max)"));
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("picard_tol", tol.picard_tol),
            ("linear_tol", tol.linear_tol),
            ("root_tol", tol.root_tol),
            ("density_floor", tol.density_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return cfg(format!("{name} must be positive, got {v}"));
            }
        }
        if tol.max_picard_iterations == 0 || tol.max_linear_iterations == 0 || tol.max_root_iterations == 0 {
            return cfg("iteration caps must be positive".into());
        }
        if !(self.diagnostics.support_threshold > 0.0) {
            return cfg("support_threshold must be positive".into());
        }
        Ok(())
    }

    /// Output times as step indices.
    pub fn output_steps(&self) -> Vec<usize> {
        self.output_times
            .iter()
            .map(|t| (t / self.dt).round() as usize)
            .collect()
    }
}

/// Separable initial datum `C e^{−x²} e^{−(y−a)²/ε}` on the grid of `config`
/// (`e^{−x²/ε}` in place of `e^{−x²}` for [`InitialProfile::Wkb`]).
///
/// `C` normalises the midpoint sum in `y`, so the discrete density of the
/// initial field equals the spatial factor at every x-cell.
pub fn initial_density(config: &RunConfig) -> Result<DensityField, ModelError> {
    config.validate()?;
    let grid = Grid::from_config(config)?;
    let spec = &config.model;
    let trait_profile: Vec<f64> = (0..grid.m_y)
        .map(|k| {
            let d = grid.y_center(k) - spec.ic_center;
            (-d * d / spec.epsilon).exp()
        })
        .collect();
    let c = 1.0 / (grid.dy * trait_profile.iter().sum::<f64>());
    let width = match spec.ic_profile {
        InitialProfile::Unit => 1.0,
        InitialProfile::Wkb => spec.epsilon,
    };
    Ok(DensityField::from_fn(&grid, 0.0, |j, k| {
        let x = grid.x_center(j);
        c * (-x * x / width).exp() * trait_profile[k]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::compute_rho;

    #[test]
    fn mobility_values() {
        let f1 = ModelSpec::fig1();
        assert_eq!(f1.eval_mobility(0.0).unwrap(), 0.01);
        assert_eq!(f1.eval_mobility(1.0).unwrap(), 1.01);
        let f2 = ModelSpec::fig2();
        assert_eq!(f2.eval_mobility(2.0).unwrap(), 16.01);
        assert!(matches!(f1.eval_mobility(1.5), Err(ModelError::Domain { .. })));
        assert!(f1.eval_mobility(-0.1).is_err());
    }

    #[test]
    fn fitness_values() {
        let f1 = ModelSpec::fig1();
        assert_eq!(f1.eval_fitness(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(f1.eval_fitness(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(f1.eval_fitness(0.5, 0.25).unwrap(), 0.5);
        assert!(f1.eval_fitness(2.0, 0.0).is_err());
    }

    #[test]
    fn rational_derivative() {
        let f2 = ModelSpec::fig2();
        let d = f2.growth_rate.derivative(5.0);
        assert!((d + 1.0 / 36.0).abs() < 1e-15);
        assert!((f2.growth_rate.value(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(f2.mobility.derivative(1.0), 4.0);
    }

    #[test]
    fn presets_validate() {
        RunConfig::fig1().validate().unwrap();
        RunConfig::fig2().validate().unwrap();
        let c = RunConfig::fig1();
        assert_eq!(c.m_x().unwrap(), 2500);
        assert_eq!(c.m_y().unwrap(), 50);
        assert_eq!(c.steps().unwrap(), 800);
        let c = RunConfig::fig2();
        assert_eq!(c.m_x().unwrap(), 2000);
        assert_eq!(c.m_y().unwrap(), 400);
        assert_eq!(c.steps().unwrap(), 4000);
    }

    #[test]
    fn monotonicity_violations_are_rejected() {
        let mut spec = ModelSpec::fig1();
        spec.mobility = Profile::Polynomial(vec![0.01]);
        assert!(spec.validate(0.02).is_err());
        let mut spec = ModelSpec::fig1();
        spec.growth_rate = Profile::Polynomial(vec![1.0, 0.5, -1.5]);
        assert!(spec.validate(0.02).is_err());
        let mut spec = ModelSpec::fig1();
        spec.ic_center = 1.0;
        assert!(spec.validate(0.02).is_err());
    }

    #[test]
    fn non_integer_grid_is_rejected() {
        let mut c = RunConfig::fig1();
        c.dx = 0.03;
        assert!(matches!(c.validate(), Err(ModelError::Config(_))));
        let mut c = RunConfig::fig1();
        c.output_times = vec![4.0, 2.0];
        assert!(c.validate().is_err());
        let mut c = RunConfig::fig1();
        c.level_set_values = vec![1.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        for mut c in [RunConfig::fig1(), RunConfig::fig2()] {
            let text = toml::to_string(&c).unwrap();
            assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
            c.tolerances.boundary_guard = None;
            let text = toml::to_string(&c).unwrap();
            assert!(text.contains("boundary_guard = \"off\""));
            assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
        }
    }

    #[test]
    fn zero_final_time_has_no_steps() {
        let mut c = RunConfig::fig1();
        c.t_max = 0.0;
        c.output_times = vec![0.0];
        c.validate().unwrap();
        assert_eq!(c.steps().unwrap(), 0);
    }

    fn small_fig1() -> RunConfig {
        let mut c = RunConfig::fig1();
        c.x_max = 5.0;
        c.dx = 0.05;
        c.t_max = 0.0;
        c.output_times = vec![0.0];
        c.model.ic_profile = InitialProfile::Unit;
        c
    }

    #[test]
    fn initial_density_profile() {
        let c = small_fig1();
        let grid = Grid::from_config(&c).unwrap();
        let n0 = initial_density(&c).unwrap();
        let rho = compute_rho(&n0, &grid).unwrap();
        for (j, r) in rho.values.iter().enumerate() {
            let x = grid.x_center(j);
            assert!((r - (-x * x).exp()).abs() <= 4.0 * f64::EPSILON);
        }
        assert!(rho.values.windows(2).all(|w| w[1] < w[0]));
        assert!(n0.values().iter().all(|&v| v > 0.0));
        // a = 0.2 sits on the boundary between cells 9 and 10 for dy = 0.02;
        // the tie goes to the lower index.
        let col = n0.column(3);
        let argmax = (0..col.len()).fold(0, |b, k| if col[k] > col[b] { k } else { b });
        assert!((grid.y_center(argmax) - 0.2).abs() <= grid.dy);
    }

    #[test]
    fn wkb_profile_scales_x_by_epsilon() {
        let mut c = small_fig1();
        c.model.ic_profile = InitialProfile::Wkb;
        let grid = Grid::from_config(&c).unwrap();
        let rho = compute_rho(&initial_density(&c).unwrap(), &grid).unwrap();
        for (j, r) in rho.values.iter().enumerate().take(20) {
            let x = grid.x_center(j);
            let exact = (-x * x / 0.01).exp();
            assert!((r - exact).abs() <= 1e-14 * exact);
        }
    }

    #[test]
    fn initial_density_argmax_contains_center() {
        let mut c = small_fig1();
        c.model.ic_center = 0.31;
        let grid = Grid::from_config(&c).unwrap();
        let n0 = initial_density(&c).unwrap();
        for col in n0.columns() {
            let argmax = (0..col.len()).fold(0, |b, k| if col[k] > col[b] { k } else { b });
            let lo = argmax as f64 * grid.dy;
            assert!(lo <= 0.31 && 0.31 < lo + grid.dy);
        }
    }

    #[test]
    fn sampled_invariants_hold_on_presets() {
        for spec in [ModelSpec::fig1(), ModelSpec::fig2()] {
            let dy = spec.y_max / 200.0;
            let mut prev: Option<(f64, f64)> = None;
            for k in 0..200 {
                let y = (k as f64 + 0.5) * dy;
                let mu = spec.eval_mobility(y).unwrap();
                assert!(mu > 0.0);
                let fit = spec.eval_fitness(y, 0.3).unwrap();
                assert!(spec.eval_fitness(y, 0.4).unwrap() < fit);
                if let Some((pmu, pfit)) = prev {
                    assert!(mu > pmu);
                    assert!(fit < pfit);
                }
                prev = Some((mu, fit));
            }
        }
    }
}
