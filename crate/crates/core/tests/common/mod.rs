//! Reference implementations used as test oracles. Deliberately naive and
//! independent of the library's numerics.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use som_core::codes::CodeMatrix;
use som_core::linalg::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_vecs(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

pub fn random_pm1(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect())
        .collect()
}

pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for t in 0..k {
                c[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    c
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Cyclic Jacobi rotations. Returns eigenvalues (unsorted) and the
/// eigenvector matrix (columns).
pub fn jacobi_eig(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Singular values, descending, as square roots of the eigenvalues of MᵀM
/// or MMᵀ (whichever is smaller).
pub fn singular_values(m: &[Vec<f64>]) -> Vec<f64> {
    let g = if m.len() <= m[0].len() {
        naive_matmul(m, &transpose(m))
    } else {
        naive_matmul(&transpose(m), m)
    };
    let (mut ev, _) = jacobi_eig(&g);
    ev.sort_by(|a, b| b.total_cmp(a));
    // eigenvalues at round-off level are zero; their square roots are not small
    let cut = 1e-12 * ev[0].abs().max(1e-300);
    ev.into_iter().map(|l| if l < cut { 0.0 } else { l.sqrt() }).collect()
}

pub fn nuclear_norm(m: &[Vec<f64>]) -> f64 {
    singular_values(m).iter().sum()
}

/// Gaussian elimination with partial pivoting, one right-hand side column at a time.
pub fn gauss_solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols = b[0].len();
    let mut aug: Vec<Vec<f64>> = (0..n).map(|i| [a[i].clone(), b[i].clone()].concat()).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| aug[i][k].abs().total_cmp(&aug[j][k].abs())).unwrap();
        aug.swap(k, p);
        for i in k + 1..n {
            let f = aug[i][k] / aug[k][k];
            for j in k..n + cols {
                aug[i][j] -= f * aug[k][j];
            }
        }
    }
    let mut x = vec![vec![0.0; cols]; n];
    for c in 0..cols {
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| aug[i][j] * x[j][c]).sum();
            x[i][c] = (aug[i][n + c] - s) / aug[i][i];
        }
    }
    x
}

pub fn codes_to_vecs(b: &CodeMatrix) -> Vec<Vec<f64>> {
    (0..b.bits()).map(|i| b.row(i).iter().map(|&v| v as f64).collect()).collect()
}

/// Block objective `‖A − B‖² + ‖B‖_* + λ₂‖B − S‖²` evaluated from scratch.
pub fn block_objective_oracle(a: &[Vec<f64>], b: &[Vec<f64>], s: &[Vec<f64>], lambda2: f64) -> f64 {
    let mut fit = 0.0;
    let mut st = 0.0;
    for i in 0..a.len() {
        for j in 0..a[0].len() {
            fit += (a[i][j] - b[i][j]).powi(2);
            st += (b[i][j] - s[i][j]).powi(2);
        }
    }
    fit + nuclear_norm(b) + lambda2 * st
}

/// Exhaustive minimum of the block objective over all ±1 matrices of the
/// shape of `a` (feasible up to about 2^16 candidates).
pub fn brute_force_block(a: &[Vec<f64>], s: &[Vec<f64>], lambda2: f64) -> (f64, Vec<Vec<f64>>) {
    let (m, n) = (a.len(), a[0].len());
    let total = m * n;
    assert!(total <= 16);
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << total) {
        let b: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..n).map(|j| if mask >> (i * n + j) & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect();
        let v = block_objective_oracle(a, &b, s, lambda2);
        if v < best.0 {
            best = (v, b);
        }
    }
    best
}

/// Rank-one class block: `code` replicated over `n` columns.
pub fn replicate(code: &[f64], n: usize) -> Vec<Vec<f64>> {
    code.iter().map(|&v| vec![v; n]).collect()
}

pub fn dense(rows: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_rows(rows).unwrap()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}
