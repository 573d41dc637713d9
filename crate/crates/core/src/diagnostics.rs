//! Observables extracted from simulation output: dominant trait, level-set
//! tracks and speeds, WKB phase, minimal-speed bound and the zero-fitness
//! residual.

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::grid::{compute_rho, DensityField, Grid, RhoProfile};
use crate::model::{ModelError, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("speed fit needs at least 3 samples in [{t0}, {t1}], got {got}")]
    TooFewSamples { t0: f64, t1: f64, got: usize },
    #[error("no x-cell has density above the support threshold {0}")]
    EmptySupport(f64),
    #[error("no supported column is concentrated (D²u < 0 nowhere; {skipped} skipped)")]
    NotConcentrated { skipped: usize },
    #[error("field does not match the grid")]
    Dimensions,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Floor applied before taking logarithms of the density.
pub const DENSITY_FLOOR: f64 = 1e-300;

fn profile(field: &DensityField, grid: &Grid) -> Result<RhoProfile, DiagnosticsError> {
    compute_rho(field, grid).map_err(|_| DiagnosticsError::Dimensions)
}

/// Peak position of a column with sub-cell parabolic refinement of `ln N`.
///
/// The boundary cells use mirror ghosts (zero-Neumann), so a maximum pinned to
/// the first cell refines towards `y = 0`. Columns with a second local maximum
/// above 1% of the peak, or with an empty neighbour cell, keep the raw argmax.
pub fn column_peak(column: &[f64], grid: &Grid) -> f64 {
    let m = column.len();
    let argmax = (0..m).fold(0, |b, k| if column[k] > column[b] { k } else { b });
    let raw = grid.y_center(argmax);
    if m < 2 {
        return raw;
    }
    let peak = column[argmax];
    let secondary = (0..m).any(|k| {
        k != argmax
            && column[k] > 0.01 * peak
            && (k == 0 || column[k] > column[k - 1])
            && (k + 1 == m || column[k] > column[k + 1])
    });
    let empty_neighbour = [argmax.wrapping_sub(1), argmax + 1]
        .iter()
        .any(|&k| k < m && column[k] <= DENSITY_FLOOR);
    if secondary || empty_neighbour {
        return raw;
    }
    let ln = |k: isize| {
        let k = k.clamp(0, m as isize - 1) as usize;
        column[k].max(DENSITY_FLOOR).ln()
    };
    let k = argmax as isize;
    let (l, c, r) = (ln(k - 1), ln(k), ln(k + 1));
    let curvature = l - 2.0 * c + r;
    if !(curvature < 0.0) {
        return raw;
    }
    let offset = (0.5 * (l - r) / curvature).clamp(-0.5, 0.5);
    (raw + offset * grid.dy).clamp(0.0, grid.y_max())
}

/// Dominant trait `ȳ(x)` of each column whose density reaches
/// `support_threshold`; `None` elsewhere.
pub fn dominant_trait(
    field: &DensityField,
    grid: &Grid,
    support_threshold: f64,
) -> Result<Vec<Option<f64>>, DiagnosticsError> {
    let rho = profile(field, grid)?;
    Ok(field
        .columns()
        .zip(&rho.values)
        .map(|(col, &r)| (r >= support_threshold).then(|| column_peak(col, grid)))
        .collect())
}

/// Rightmost `x` where the linearly interpolated profile equals `level`.
pub fn level_set_position(rho: &RhoProfile, grid: &Grid, level: f64) -> Option<f64> {
    let v = &rho.values;
    for j in (0..v.len().saturating_sub(1)).rev() {
        let (a, b) = (v[j] - level, v[j + 1] - level);
        if b == 0.0 {
            return Some(grid.x_center(j + 1));
        }
        if a == 0.0 {
            return Some(grid.x_center(j));
        }
        if (a < 0.0) != (b < 0.0) {
            let s = a / (a - b);
            return Some(grid.x_center(j) + s * grid.dx);
        }
    }
    None
}

/// A time series of `(t, x)` samples.
pub type Track = Vec<(f64, f64)>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares line through the samples with `t` in `window`.
pub fn estimate_front_speed(track: &[(f64, f64)], window: (f64, f64)) -> Result<SpeedFit, DiagnosticsError> {
    let slack = 1e-9 * window.1.abs().max(1.0);
    let pts: Vec<(f64, f64)> = track
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 - slack && t <= window.1 + slack)
        .collect();
    if pts.len() < 3 {
        return Err(DiagnosticsError::TooFewSamples {
            t0: window.0,
            t1: window.1,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let xm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum();
    let slope = stx / stt;
    let intercept = xm - slope * tm;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(SpeedFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceleration {
    pub accelerating: bool,
    pub early: SpeedFit,
    pub late: SpeedFit,
}

/// Flags acceleration when the late slope exceeds `(1 + margin)` times the
/// early slope.
pub fn detect_acceleration(
    track: &[(f64, f64)],
    early: (f64, f64),
    late: (f64, f64),
    margin: f64,
) -> Result<Acceleration, DiagnosticsError> {
    let early = estimate_front_speed(track, early)?;
    let late = estimate_front_speed(track, late)?;
    Ok(Acceleration {
        accelerating: late.slope > (1.0 + margin) * early.slope,
        early,
        late,
    })
}

/// `u = ε ln max(N, floor)`, laid out like the density field.
#[derive(Debug, Clone, PartialEq)]
pub struct WkbField {
    pub values: Vec<f64>,
    pub m_y: usize,
    pub epsilon: f64,
}

impl WkbField {
    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.m_y..(j + 1) * self.m_y]
    }
}

pub fn wkb_transform(field: &DensityField, epsilon: f64, floor: f64) -> WkbField {
    WkbField {
        values: field.values().iter().map(|&n| epsilon * n.max(floor).ln()).collect(),
        m_y: field.dims().1,
        epsilon,
    }
}

/// Second difference of `u` at cell `k` (one-sided at the ends).
fn second_difference(u: &[f64], k: usize, dy: f64) -> Option<f64> {
    let m = u.len();
    if m < 3 {
        return None;
    }
    let c = k.clamp(1, m - 2);
    Some((u[c - 1] - 2.0 * u[c] + u[c + 1]) / (dy * dy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedBound {
    pub value: f64,
    /// x of the column attaining the supremum.
    pub x: f64,
    pub skipped: usize,
}

/// `sup_x 2|r′(ȳ)| sqrt(μ(ȳ)/|D²u(x, ȳ)|)` over supported columns of a
/// snapshot.
pub fn minimal_speed_bound(
    field: &DensityField,
    grid: &Grid,
    spec: &ModelSpec,
    support_threshold: f64,
) -> Result<SpeedBound, DiagnosticsError> {
    let ybar = dominant_trait(field, grid, support_threshold)?;
    let u = wkb_transform(field, spec.epsilon, DENSITY_FLOOR);
    let mut best: Option<(f64, f64)> = None;
    let mut skipped = 0;
    let mut supported = 0;
    for (j, y) in ybar.iter().enumerate() {
        let Some(y) = *y else { continue };
        supported += 1;
        let col = u.column(j);
        let argmax = (0..col.len()).fold(0, |b, k| if col[k] > col[b] { k } else { b });
        let d2 = match second_difference(col, argmax, grid.dy) {
            Some(d) if d < 0.0 => d,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let value = 2.0 * spec.growth_rate.derivative(y).abs() * (spec.eval_mobility(y)? / d2.abs()).sqrt();
        if best.map_or(true, |(b, _)| value > b) {
            best = Some((value, grid.x_center(j)));
        }
    }
    if supported == 0 {
        return Err(DiagnosticsError::EmptySupport(support_threshold));
    }
    let (value, x) = best.ok_or(DiagnosticsError::NotConcentrated { skipped })?;
    Ok(SpeedBound { value, x, skipped })
}

/// `sup |ρ − r(ȳ)|` over supported columns.
pub fn fitness_residual(
    field: &DensityField,
    grid: &Grid,
    spec: &ModelSpec,
    support_threshold: f64,
) -> Result<f64, DiagnosticsError> {
    let rho = profile(field, grid)?;
    let ybar = dominant_trait(field, grid, support_threshold)?;
    let mut worst: Option<f64> = None;
    for (r, y) in rho.values.iter().zip(&ybar) {
        if let Some(y) = y {
            let d = (r - spec.eval_growth_rate(*y)?).abs();
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst.ok_or(DiagnosticsError::EmptySupport(support_threshold))
}

/// Centre of the rightmost x-cell with `ρ ≥ threshold`.
pub fn edge_position(rho: &RhoProfile, grid: &Grid, threshold: f64) -> Option<f64> {
    rho.values.iter().rposition(|&r| r >= threshold).map(|j| grid.x_center(j))
}

/// `(Y, |r′(Y)| sqrt(μ(Y)))` for each spec.
pub fn check_cstar_divergence(specs: &[ModelSpec]) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    specs
        .iter()
        .map(|s| {
            let y = s.y_max;
            Ok((y, s.growth_rate.derivative(y).abs() * s.eval_mobility(y)?.sqrt()))
        })
        .collect()
}

/// Standard deviation in `y` of the normalised column `n/ρ`.
pub fn trait_spread(column: &[f64], grid: &Grid) -> Option<f64> {
    let total: f64 = column.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mean = column.iter().enumerate().map(|(k, n)| n * grid.y_center(k)).sum::<f64>() / total;
    let var = column
        .iter()
        .enumerate()
        .map(|(k, n)| n * (grid.y_center(k) - mean).powi(2))
        .sum::<f64>()
        / total;
    Some(var.sqrt())
}

/// Per-snapshot observables.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDiagnostics {
    pub t: f64,
    pub rho: RhoProfile,
    pub ybar: Vec<Option<f64>>,
    pub cstar_bound: Option<f64>,
    pub fitness_residual: Option<f64>,
    pub edge_position: Option<f64>,
}

impl SnapshotDiagnostics {
    pub fn evaluate(
        field: &DensityField,
        grid: &Grid,
        spec: &ModelSpec,
        support_threshold: f64,
    ) -> Result<Self, DiagnosticsError> {
        let rho = profile(field, grid)?;
        Ok(Self {
            t: field.time,
            ybar: dominant_trait(field, grid, support_threshold)?,
            cstar_bound: minimal_speed_bound(field, grid, spec, support_threshold).ok().map(|b| b.value),
            fitness_residual: fitness_residual(field, grid, spec, support_threshold).ok(),
            edge_position: edge_position(&rho, grid, support_threshold),
            rho,
        })
    }
}

/// Collects level-set positions over time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelTracker {
    pub levels: Vec<f64>,
    pub tracks: BTreeMap<usize, Track>,
}

impl LevelTracker {
    pub fn new(levels: &[f64]) -> Self {
        Self {
            levels: levels.to_vec(),
            tracks: (0..levels.len()).map(|i| (i, Vec::new())).collect(),
        }
    }

    /// Adds the positions present in `rho`; absent levels leave a gap.
    pub fn record(&mut self, rho: &RhoProfile, grid: &Grid) {
        for (i, &level) in self.levels.iter().enumerate() {
            if let Some(x) = level_set_position(rho, grid, level) {
                self.tracks.entry(i).or_default().push((rho.time, x));
            }
        }
    }

    pub fn track(&self, level: f64) -> Option<&Track> {
        let i = self.levels.iter().position(|&l| l == level)?;
        self.tracks.get(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Track)> {
        self.levels.iter().enumerate().map(|(i, &l)| (l, &self.tracks[&i]))
    }
}

/// Everything the diagnostics CSVs are written from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrontDiagnostics {
    pub tracker: LevelTracker,
    /// `(level, fit)` for each level with enough samples in the speed window.
    pub fitted_speeds: Vec<(f64, Result<SpeedFit, DiagnosticsError>)>,
    pub snapshots: Vec<SnapshotDiagnostics>,
}

impl FrontDiagnostics {
    pub fn fit_speeds(&mut self, window: (f64, f64)) {
        self.fitted_speeds = self
            .tracker
            .iter()
            .map(|(l, track)| (l, estimate_front_speed(track, window)))
            .collect();
    }

    pub fn latest(&self) -> Option<&SnapshotDiagnostics> {
        self.snapshots.last()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

pub fn write_level_tracks<W: Write>(mut out: W, tracker: &LevelTracker) -> io::Result<()> {
    writeln!(out, "t,level,x")?;
    for (level, track) in tracker.iter() {
        for (t, x) in track {
            writeln!(out, "{t},{level},{x:.16e}")?;
        }
    }
    Ok(())
}

pub fn write_ybar<W: Write>(
    mut out: W,
    snapshots: &[SnapshotDiagnostics],
    grid: &Grid,
    spec: &ModelSpec,
) -> io::Result<()> {
    writeln!(out, "t,x,ybar,rho,r_of_ybar")?;
    for s in snapshots {
        for (j, (y, r)) in s.ybar.iter().zip(&s.rho.values).enumerate() {
            let growth = y.map(|y| spec.growth_rate.value(y));
            writeln!(out, "{},{},{},{:.16e},{}", s.t, grid.x_center(j), opt(*y), r, opt(growth))?;
        }
    }
    Ok(())
}

pub fn write_speeds<W: Write>(mut out: W, speeds: &[(f64, Result<SpeedFit, DiagnosticsError>)]) -> io::Result<()> {
    writeln!(out, "level,slope,residual")?;
    for (level, fit) in speeds {
        match fit {
            Ok(f) => writeln!(out, "{level},{:.16e},{:.16e}", f.slope, f.residual)?,
            Err(_) => writeln!(out, "{level},,")?,
        }
    }
    Ok(())
}

pub fn write_summary<W: Write>(mut out: W, snapshots: &[SnapshotDiagnostics]) -> io::Result<()> {
    writeln!(out, "t,cstar_bound,fitness_residual,edge_position")?;
    for s in snapshots {
        writeln!(
            out,
            "{},{},{},{}",
            s.t,
            opt(s.cstar_bound),
            opt(s.fitness_residual),
            opt(s.edge_position)
        )?;
    }
    Ok(())
}
