//! Anderson mixing for the outer fixed-point iteration on column mobilities.

use std::collections::VecDeque;

pub(crate) struct Anderson {
    depth: usize,
    /// `(x_i, f_i)` with `f_i = Φ(x_i) − x_i`, oldest first.
    history: VecDeque<(Vec<f64>, Vec<f64>)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the small symmetric system `A γ = b` by Gaussian elimination with
/// partial pivoting; `None` if it is numerically singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            history: VecDeque::with_capacity(depth + 1),
        }
    }

    /// Next iterate given the current point and its fixed-point residual.
    pub fn step(&mut self, x: &[f64], f: &[f64]) -> Vec<f64> {
        self.history.push_back((x.to_vec(), f.to_vec()));
        if self.history.len() > self.depth + 1 {
            self.history.pop_front();
        }
        let plain: Vec<f64> = x.iter().zip(f).map(|(a, b)| a + b).collect();
        let m = self.history.len() - 1;
        if m == 0 {
            return plain;
        }
        let diffs: Vec<(Vec<f64>, Vec<f64>)> = (0..m)
            .map(|i| {
                let (x0, f0) = &self.history[i];
                let (x1, f1) = &self.history[i + 1];
                (
                    x1.iter().zip(x0).map(|(a, b)| a - b).collect(),
                    f1.iter().zip(f0).map(|(a, b)| a - b).collect(),
                )
            })
            .collect();
        let mut gram = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&diffs[i].1, &diffs[j].1);
                gram[i][j] = v;
                gram[j][i] = v;
            }
        }
        let trace: f64 = (0..m).map(|i| gram[i][i]).sum();
        for (i, row) in gram.iter_mut().enumerate() {
            row[i] += 1e-12 * trace;
        }
        let rhs: Vec<f64> = diffs.iter().map(|d| dot(&d.1, f)).collect();
        let Some(gamma) = solve_dense(gram, rhs) else {
            self.history.clear();
            return plain;
        };
        let mut next = plain;
        for (g, (dx, df)) in gamma.iter().zip(&diffs) {
            for ((n, a), b) in next.iter_mut().zip(dx).zip(df) {
                *n -= g * (a + b);
            }
        }
        if next.iter().all(|v| v.is_finite()) {
            next
        } else {
            self.history.clear();
            x.iter().zip(f).map(|(a, b)| a + b).collect()
        }
    }
}
