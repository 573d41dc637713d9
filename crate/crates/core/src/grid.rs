//! Uniform cell-centred grid and the discrete fields living on it.

use std::io::{self, Write};

use thiserror::Error;

use crate::model::{ModelError, RunConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("field is {got_x}x{got_y} but grid is {m_x}x{m_y}")]
    DimensionMismatch {
        got_x: usize,
        got_y: usize,
        m_x: usize,
        m_y: usize,
    },
    #[error("field has {0} values, expected {1}")]
    Length(usize, usize),
}

/// Cell `(j, k)` covers `(jΔx, (j+1)Δx) × (kΔy, (k+1)Δy)` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub m_x: usize,
    pub m_y: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(m_x: usize, m_y: usize, dx: f64, dy: f64) -> Self {
        Self { m_x, m_y, dx, dy }
    }

    pub fn from_config(config: &RunConfig) -> Result<Self, ModelError> {
        Ok(Self::new(config.m_x()?, config.m_y()?, config.dx, config.dy))
    }

    #[inline]
    pub fn x_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn y_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dy
    }

    pub fn x_max(&self) -> f64 {
        self.m_x as f64 * self.dx
    }

    pub fn y_max(&self) -> f64 {
        self.m_y as f64 * self.dy
    }

    pub fn len(&self) -> usize {
        self.m_x * self.m_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.m_y + k
    }

    fn check(&self, field: &DensityField) -> Result<(), GridError> {
        if field.m_x != self.m_x || field.m_y != self.m_y {
            return Err(GridError::DimensionMismatch {
                got_x: field.m_x,
                got_y: field.m_y,
                m_x: self.m_x,
                m_y: self.m_y,
            });
        }
        Ok(())
    }
}

/// Cell averages `N[j, k]`, stored x-major: `values[j * m_y + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    m_x: usize,
    m_y: usize,
    values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn zeros(grid: &Grid, time: f64) -> Self {
        Self {
            m_x: grid.m_x,
            m_y: grid.m_y,
            values: vec![0.0; grid.len()],
            time,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>, time: f64) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length(values.len(), grid.len()));
        }
        Ok(Self {
            m_x: grid.m_x,
            m_y: grid.m_y,
            values,
            time,
        })
    }

    pub fn from_fn(grid: &Grid, time: f64, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.m_x {
            for k in 0..grid.m_y {
                values.push(f(j, k));
            }
        }
        Self {
            m_x: grid.m_x,
            m_y: grid.m_y,
            values,
            time,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m_x, self.m_y)
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.m_y + k]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        self.values[j * self.m_y + k] = v;
    }

    /// Trait distribution at x-cell `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.m_y..(j + 1) * self.m_y]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.m_y)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Entrywise `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &DensityField, beta: f64) -> DensityField {
        assert_eq!(self.dims(), other.dims());
        DensityField {
            m_x: self.m_x,
            m_y: self.m_y,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            time: self.time,
        }
    }
}

/// Per-x-cell density `ρ[j] = Δy Σ_k N[j, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoProfile {
    pub values: Vec<f64>,
    pub time: f64,
}

impl RhoProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_distance(&self, other: &RhoProfile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn column_rho(column: &[f64], dy: f64) -> f64 {
    dy * column.iter().sum::<f64>()
}

pub fn compute_rho(field: &DensityField, grid: &Grid) -> Result<RhoProfile, GridError> {
    grid.check(field)?;
    Ok(RhoProfile {
        values: field.columns().map(|c| column_rho(c, grid.dy)).collect(),
        time: field.time,
    })
}

pub fn total_mass(field: &DensityField, grid: &Grid) -> Result<f64, GridError> {
    let rho = compute_rho(field, grid)?;
    Ok(grid.dx * rho.values.iter().sum::<f64>())
}

/// Writes a snapshot as `x,y,n` rows, x-major, with 17 significant digits.
pub fn write_snapshot<W: Write>(mut out: W, field: &DensityField, grid: &Grid) -> io::Result<()> {
    writeln!(out, "x,y,n")?;
    for j in 0..grid.m_x {
        let x = grid.x_center(j);
        for (k, n) in field.column(j).iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", x, grid.y_center(k), n)?;
        }
    }
    Ok(())
}
