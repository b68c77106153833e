//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use boostforest::data::{Dataset, Task};
use boostforest::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting on a dense `n x n` system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, rest) = a.split_at_mut(row);
            for (t, p) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                *t -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Weighted ridge with an unpenalised intercept, solved on the augmented
/// design `[x, 1]`. Returns `(weights, intercept)`.
pub fn ridge_oracle(rows: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let d = rows[0].len();
    let p = d + 1;
    let mut a = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for ((r, &yi), &wi) in rows.iter().zip(y).zip(w) {
        let aug: Vec<f64> = r.iter().copied().chain(std::iter::once(1.0)).collect();
        for i in 0..p {
            rhs[i] += wi * aug[i] * yi;
            for j in 0..p {
                a[i][j] += wi * aug[i] * aug[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(d) {
        row[i] += lambda;
    }
    let sol = gauss_solve(a, rhs);
    (sol[..d].to_vec(), sol[d])
}

pub fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Per-sample loss written out independently of the library.
pub fn loss_oracle(task: Task, y: f64, f: &[f64]) -> f64 {
    match task {
        Task::Regression => (y - f[0]) * (y - f[0]),
        Task::Binary => {
            // −[y ln p + (1 − y) ln(1 − p)] with p = 1 / (1 + e^{−F}).
            let p = logistic(f[0]);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
        Task::Multiclass(_) => {
            let m = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = f.iter().map(|v| (v - m).exp()).sum();
            -(f[y as usize] - m - z.ln())
        }
    }
}

pub fn uniform_matrix<R: Rng>(n: usize, d: usize, rng: &mut R) -> Matrix {
    Matrix::new(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Friedman-style regression target on `[0,1]^5` plus uniform noise.
pub fn friedman<R: Rng>(n: usize, noise: f64, rng: &mut R) -> Dataset {
    let x = uniform_matrix(n, 5, rng);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let r = x.row(i);
            10.0 * (std::f64::consts::PI * r[0] * r[1]).sin()
                + 20.0 * (r[2] - 0.5).powi(2)
                + 10.0 * r[3]
                + 5.0 * r[4]
                + noise * (rng.random::<f64>() - 0.5)
        })
        .collect();
    Dataset::new(x, y, Task::Regression).unwrap()
}

/// Two-class data separated by a noisy linear boundary.
pub fn binary_blobs<R: Rng>(n: usize, d: usize, rng: &mut R) -> Dataset {
    let x = uniform_matrix(n, d, rng);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = x.row(i).iter().sum::<f64>() / d as f64 + 0.1 * (rng.random::<f64>() - 0.5);
            if s > 0.5 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Dataset::new(x, y, Task::Binary).unwrap()
}

/// Three classes by angle sector around the centre of the unit square.
pub fn three_sectors<R: Rng>(n: usize, rng: &mut R) -> Dataset {
    let x = uniform_matrix(n, 2, rng);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let r = x.row(i);
            let a = (r[1] - 0.5).atan2(r[0] - 0.5) + std::f64::consts::PI;
            ((a / (2.0 * std::f64::consts::PI / 3.0)) as usize).min(2) as f64
        })
        .collect();
    Dataset::new(x, y, Task::Multiclass(3)).unwrap()
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}
