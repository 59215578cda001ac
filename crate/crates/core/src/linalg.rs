//! Dense linear algebra used by the trainer and encoders.
//!
//! Everything here is deterministic and allocation-light: a row-major
//! [`DenseMatrix`], a Householder/QL symmetric eigensolver, a one-sided
//! Jacobi SVD, PSD square roots with an eigenvalue floor, and a ridge solve
//! that falls back to pivoted elimination when Cholesky fails.

use crate::error::{Result, SomError};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Row-major dense matrix of finite `f64` values.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SomError::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SomError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::new(r, c, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(SomError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * selfᵀ`.
    pub fn gram_rows(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(SomError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copies out the sub-matrix made of the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition of a symmetric matrix; eigenvalues sorted descending,
/// eigenvectors stored as the columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl SymEigResult {
    /// Rebuilds `V f(Λ) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v[(i, k)] * mapped[k] * v[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(SomError::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(SomError::NonFinite);
    }
    let scale = m.max_abs().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > 1e-10 * scale {
        return Err(SomError::NonSymmetric(worst));
    }
    Ok(())
}

/// Symmetric eigendecomposition via Householder tridiagonalization followed
/// by implicit QL iterations.
pub fn sym_eig(m: &DenseMatrix) -> Result<SymEigResult> {
    check_symmetric(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(SymEigResult {
            eigenvalues: Vec::new(),
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }
    // symmetrize to remove round-off asymmetry
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect())
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| v[i][order[j]]);
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1]);
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    const MAX_SWEEPS: usize = 64;
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(SomError::NonFinite);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Square root of a PSD matrix together with its (floored) inverse.
#[derive(Debug, Clone)]
pub struct PsdRoot {
    /// `V diag(max(sqrt(λ), floor)) Vᵀ`
    pub root: DenseMatrix,
    /// `V diag(1 / max(sqrt(λ), floor)) Vᵀ`
    pub inv_root: DenseMatrix,
    /// Eigenvalues of `root` after flooring, descending.
    pub root_eigenvalues: Vec<f64>,
}

/// Computes `M^{1/2}` and its inverse. Eigenvalues of `M` down to
/// `-1e-8 * trace(M)` are treated as round-off and clamped to zero;
/// eigenvalues of the root are floored at `floor` so the inverse exists.
pub fn psd_root(m: &DenseMatrix, floor: f64) -> Result<PsdRoot> {
    let eig = sym_eig(m)?;
    let tr = m.trace().abs();
    let tol = 1e-8 * tr;
    if let Some(&lowest) = eig.eigenvalues.last() {
        if lowest < -tol && lowest < -f64::EPSILON * m.max_abs() * m.rows() as f64 {
            return Err(SomError::IndefiniteMatrix(lowest));
        }
    }
    let floor = floor.max(0.0);
    let root_eigenvalues: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt().max(floor))
        .collect();
    let root = eig.reconstruct_with(|l| l.max(0.0).sqrt().max(floor));
    let inv_root = eig.reconstruct_with(|l| {
        let r = l.max(0.0).sqrt().max(floor);
        if r > 0.0 {
            1.0 / r
        } else {
            0.0
        }
    });
    if !inv_root.is_finite() {
        return Err(SomError::NonFinite);
    }
    Ok(PsdRoot {
        root,
        inv_root,
        root_eigenvalues,
    })
}

/// `M^{1/2}` with the eigenvalues of the root floored at `eps`.
pub fn psd_sqrt(m: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    psd_root(m, eps).map(|r| r.root)
}

/// Solves `(M + eps I) Z = rhs` for symmetric `M`. Cholesky is tried first;
/// pivoted Gaussian elimination is the fallback for indefinite systems.
pub fn ridge_solve(m: &DenseMatrix, rhs: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    let n = m.rows();
    if m.cols() != n {
        return Err(SomError::ShapeMismatch(format!(
            "system matrix is {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if rhs.rows() != n {
        return Err(SomError::DimensionMismatch(format!(
            "system is {n}x{n} but rhs has {} rows",
            rhs.rows()
        )));
    }
    if !m.is_finite() || !rhs.is_finite() {
        return Err(SomError::NonFinite);
    }
    let mut sys = m.clone();
    for i in 0..n {
        sys[(i, i)] += eps;
    }
    let z = match cholesky(&sys) {
        Some(l) => cholesky_solve(&l, rhs),
        None => lu_solve(&sys, rhs)?,
    };
    let resid = relative_residual(&sys, &z, rhs);
    if !z.is_finite() || !(resid <= 1e-8) {
        return Err(SomError::SingularSystem(resid));
    }
    Ok(z)
}

/// `‖S Z − R‖_F / (‖S‖_F ‖Z‖_F + ‖R‖_F)`: a backward-error measure.
fn relative_residual(sys: &DenseMatrix, z: &DenseMatrix, rhs: &DenseMatrix) -> f64 {
    let sz = match sys.matmul(z) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let num = sz.sub(rhs).map(|r| r.frobenius_norm()).unwrap_or(f64::INFINITY);
    let den = sys.frobenius_norm() * z.frobenius_norm() + rhs.frobenius_norm();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn cholesky(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &DenseMatrix, rhs: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut z = rhs.clone();
    for c in 0..rhs.cols() {
        for i in 0..n {
            let mut s = z[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * z[(k, c)];
            }
            z[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * z[(k, c)];
            }
            z[(i, c)] = s / l[(i, i)];
        }
    }
    z
}

fn lu_solve(a: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let mut lu = a.clone();
    let mut z = rhs.clone();
    let scale = a.max_abs();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&x, &y| lu[(x, k)].abs().total_cmp(&lu[(y, k)].abs()).then(y.cmp(&x)))
            .unwrap_or(k);
        if lu[(piv, k)].abs() <= f64::EPSILON * scale * n as f64 {
            return Err(SomError::SingularSystem(f64::INFINITY));
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            for j in 0..z.cols() {
                let t = z[(k, j)];
                z[(k, j)] = z[(piv, j)];
                z[(piv, j)] = t;
            }
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / lu[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..z.cols() {
                z[(i, j)] -= f * z[(k, j)];
            }
        }
    }
    for c in 0..z.cols() {
        for i in (0..n).rev() {
            let mut s = z[(i, c)];
            for k in (i + 1)..n {
                s -= lu[(i, k)] * z[(k, c)];
            }
            z[(i, c)] = s / lu[(i, i)];
        }
    }
    Ok(z)
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ` with
/// `k = min(rows, cols)` triplets sorted by descending singular value.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided Jacobi (Hestenes) SVD.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(SomError::NonFinite);
    }
    if m.rows() < m.cols() {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (rows, cols) = m.shape();
    // columns of the working matrix, stored contiguously
    let mut work: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    const MAX_SWEEPS: usize = 80;
    let tol = 1e-15;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let (a, b) = (&work[p], &work[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for k in 0..rows {
                        alpha += a[k] * a[k];
                        beta += b[k] * b[k];
                        gamma += a[k] * b[k];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut work, p, q, c, s);
                rotate_pair(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = work
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let mut u = DenseMatrix::zeros(rows, cols);
    let mut v = DenseMatrix::zeros(cols, cols);
    let mut singular_values = Vec::with_capacity(cols);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        singular_values.push(sigma);
        for i in 0..rows {
            u[(i, dst)] = if sigma > 0.0 { work[src][i] / sigma } else { 0.0 };
        }
        for i in 0..cols {
            v[(i, dst)] = vcols[src][i];
        }
    }
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let a = &mut lo[p];
    let b = &mut hi[0];
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Best rank-`r` approximation of `m` in Frobenius norm.
pub fn trunc_svd(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let max = m.rows().min(m.cols());
    if r == 0 || r > max {
        return Err(SomError::RankOutOfRange { rank: r, max });
    }
    let dec = svd(m)?;
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for k in 0..r {
        let s = dec.singular_values[k];
        if s == 0.0 {
            continue;
        }
        for i in 0..m.rows() {
            let us = dec.u[(i, k)] * s;
            if us == 0.0 {
                continue;
            }
            for j in 0..m.cols() {
                out[(i, j)] += us * dec.v[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Sum of singular values.
pub fn trace_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(svd(m)?.singular_values.iter().sum())
}

/// Numerical rank: singular values above `tol * σ_max * max(rows, cols)`.
pub fn numerical_rank(m: &DenseMatrix) -> Result<usize> {
    let s = svd(m)?.singular_values;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    let cut = top * f64::EPSILON * m.rows().max(m.cols()) as f64 * 16.0;
    Ok(s.iter().filter(|&&v| v > cut).count())
}
