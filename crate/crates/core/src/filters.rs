//! Ordinal filters: one linear maximum-margin separator per code bit.
//!
//! Each bit `i` solves
//!
//! ```text
//! min_w  mu * sum_j max(0, 1 - B_ij (w·x_j + b)) + lambda1 * (|w|^2 + b^2)
//! ```
//!
//! by dual coordinate descent on the equivalent `C = mu / (2 lambda1)`
//! hinge-loss SVM. The bias is handled as an extra constant feature, so it is
//! regularized together with `w`.

use crate::codes::CodeMatrix;
use crate::error::{Result, SomError};
use crate::features::FeatureMatrix;
use crate::linalg::DenseMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How the code matrix is initialized before the first filter round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Start from the prior ordinal matrix.
    Structure,
    /// Start from the signs of seeded Gaussian random projections.
    RandomProjection,
}

/// Optimization knobs shared by the trainer and the encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub mu: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Relative eigenvalue floor: eigenvalues of `B Bᵀ` are floored at
    /// `ridge_eps * trace(B Bᵀ)` before taking `L` and its inverse.
    pub ridge_eps: f64,
    pub seed: u64,
    pub use_bias: bool,
    pub warm_start: bool,
    pub init: InitMode,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda1: 1.0,
            lambda2: 0.1,
            svm_tol: 1e-4,
            svm_max_iter: 1000,
            inner_tol: 1e-3,
            inner_max_iter: 30,
            outer_tol: 1e-3,
            outer_max_iter: 10,
            ridge_eps: 1e-8,
            seed: 0,
            use_bias: true,
            warm_start: true,
            init: InitMode::Structure,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SomError::InvalidConfig(msg.to_string()));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if !(self.lambda1 > 0.0 && self.lambda1.is_finite()) {
            return bad("lambda1 must be positive");
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad("lambda2 must be non-negative");
        }
        if !(self.svm_tol > 0.0 && self.inner_tol > 0.0 && self.outer_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.ridge_eps > 0.0) {
            return bad("ridge_eps must be positive");
        }
        if self.svm_max_iter == 0 || self.inner_max_iter == 0 || self.outer_max_iter == 0 {
            return bad("iteration caps must be at least 1");
        }
        Ok(())
    }

    /// Box constraint of the equivalent `1/2 |w|^2 + C * hinge` problem.
    pub fn svm_c(&self) -> f64 {
        self.mu / (2.0 * self.lambda1)
    }
}

/// Per-bit training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitTrainMeta {
    pub passes: usize,
    /// `mu * sum(slack) + lambda1 * (|w|^2 + b^2)` at exit.
    pub objective: f64,
    pub duality_gap: f64,
    pub degenerate: bool,
}

/// `m` learned ordinal filters (`d × m`) plus per-bit biases.
#[derive(Debug, Clone)]
pub struct FilterBank {
    /// Row `i` is filter `w_i`.
    filters: DenseMatrix,
    biases: Vec<f64>,
    pub train_meta: Vec<BitTrainMeta>,
    /// Dual variables of the last solve, kept for warm starts.
    duals: Vec<Vec<f64>>,
}

impl PartialEq for FilterBank {
    fn eq(&self, other: &Self) -> bool {
        self.filters == other.filters && self.biases == other.biases
    }
}

impl FilterBank {
    /// Builds a bank from a `d × m` weight matrix and `m` biases.
    pub fn new(weights: &DenseMatrix, biases: Vec<f64>) -> Result<Self> {
        if biases.len() != weights.cols() {
            return Err(SomError::DimensionMismatch(format!(
                "{} biases for {} filters",
                biases.len(),
                weights.cols()
            )));
        }
        if !weights.is_finite() || biases.iter().any(|b| !b.is_finite()) {
            return Err(SomError::NonFinite);
        }
        Ok(Self {
            filters: weights.transpose(),
            biases,
            train_meta: Vec::new(),
            duals: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.filters.cols()
    }

    pub fn bits(&self) -> usize {
        self.filters.rows()
    }

    /// `W` as a `d × m` matrix.
    pub fn weights(&self) -> DenseMatrix {
        self.filters.transpose()
    }

    pub fn filter(&self, i: usize) -> &[f64] {
        self.filters.row(i)
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// `‖W‖_F² + ‖b‖²`.
    pub fn regularizer(&self) -> f64 {
        self.filters.frobenius_sq() + self.biases.iter().map(|b| b * b).sum::<f64>()
    }
}

/// `A = Wᵀ X + b 1ᵀ`, an `m × n` matrix of filter responses.
pub fn project(bank: &FilterBank, x: &FeatureMatrix) -> Result<DenseMatrix> {
    if bank.dim() != x.dim() {
        return Err(SomError::DimensionMismatch(format!(
            "filters expect dimension {}, features have {}",
            bank.dim(),
            x.dim()
        )));
    }
    let (m, n) = (bank.bits(), x.len());
    let mut a = DenseMatrix::zeros(m, n);
    for i in 0..m {
        let w = bank.filter(i);
        let b = bank.biases[i];
        for (j, out) in a.row_mut(i).iter_mut().enumerate() {
            *out = dot(w, x.frame(j)) + b;
        }
    }
    Ok(a)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct BitSolution {
    w: Vec<f64>,
    b: f64,
    alpha: Vec<f64>,
    meta: BitTrainMeta,
}

/// Trains one separator per row of `codes`, using that row as labels.
pub fn train_filter_bank(
    x: &FeatureMatrix,
    codes: &CodeMatrix,
    hp: &HyperParams,
    warm: Option<&FilterBank>,
) -> Result<FilterBank> {
    hp.validate()?;
    if codes.cols() != x.len() {
        return Err(SomError::DimensionMismatch(format!(
            "{} code columns for {} frames",
            codes.cols(),
            x.len()
        )));
    }
    if let Some(w) = warm {
        if w.dim() != x.dim() || w.bits() != codes.bits() {
            return Err(SomError::DimensionMismatch(format!(
                "warm start bank is {}x{}, expected {}x{}",
                w.dim(),
                w.bits(),
                x.dim(),
                codes.bits()
            )));
        }
    }
    let sq_norms: Vec<f64> = (0..x.len())
        .map(|j| {
            let f = x.frame(j);
            dot(f, f) + if hp.use_bias { 1.0 } else { 0.0 }
        })
        .collect();

    let solutions: Vec<BitSolution> = (0..codes.bits())
        .into_par_iter()
        .map(|i| {
            let labels = codes.row(i);
            let warm_bit = warm.map(|w| {
                (
                    w.filter(i).to_vec(),
                    w.biases[i],
                    w.duals.get(i).cloned().unwrap_or_default(),
                )
            });
            train_bit(x, &labels, &sq_norms, hp, i as u64, warm_bit)
        })
        .collect();

    let (m, d) = (codes.bits(), x.dim());
    let mut filters = DenseMatrix::zeros(m, d);
    let mut biases = Vec::with_capacity(m);
    let mut train_meta = Vec::with_capacity(m);
    let mut duals = Vec::with_capacity(m);
    for (i, s) in solutions.into_iter().enumerate() {
        filters.row_mut(i).copy_from_slice(&s.w);
        biases.push(s.b);
        train_meta.push(s.meta);
        duals.push(s.alpha);
    }
    if !filters.is_finite() || biases.iter().any(|b| !b.is_finite()) {
        return Err(SomError::NonFinite);
    }
    Ok(FilterBank {
        filters,
        biases,
        train_meta,
        duals,
    })
}

fn train_bit(
    x: &FeatureMatrix,
    labels: &[i8],
    sq_norms: &[f64],
    hp: &HyperParams,
    bit: u64,
    warm: Option<(Vec<f64>, f64, Vec<f64>)>,
) -> BitSolution {
    let n = labels.len();
    let d = x.dim();
    let first = labels.first().copied().unwrap_or(1);
    if labels.iter().all(|&y| y == first) {
        // constant labels: the separator is undefined
        let (w, b, alpha) = match warm {
            Some((w, b, alpha)) => (w, b, alpha),
            None => (vec![0.0; d], first as f64, Vec::new()),
        };
        let objective = bit_objective(x, labels, &w, b, hp);
        return BitSolution {
            w,
            b,
            alpha,
            meta: BitTrainMeta {
                passes: 0,
                objective,
                duality_gap: 0.0,
                degenerate: true,
            },
        };
    }

    let c = hp.svm_c();
    let use_bias = hp.use_bias;
    let mut alpha = match warm {
        Some((_, _, a)) if hp.warm_start && a.len() == n => {
            a.into_iter().map(|v| v.clamp(0.0, c)).collect()
        }
        _ => vec![0.0; n],
    };
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for j in 0..n {
        if alpha[j] != 0.0 {
            let s = alpha[j] * labels[j] as f64;
            w.iter_mut().zip(x.frame(j)).for_each(|(wk, xk)| *wk += s * xk);
            if use_bias {
                b += s;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rng.set_stream(bit);
    let mut order: Vec<usize> = (0..n).collect();
    let mut passes = 0;
    let mut gap = f64::INFINITY;
    let mut primal = f64::INFINITY;
    while passes < hp.svm_max_iter {
        passes += 1;
        order.shuffle(&mut rng);
        for &j in &order {
            let qjj = sq_norms[j];
            if qjj <= 0.0 {
                continue;
            }
            let y = labels[j] as f64;
            let xj = x.frame(j);
            let g = y * (dot(&w, xj) + b) - 1.0;
            let a = alpha[j];
            let pg = if a <= 0.0 {
                g.min(0.0)
            } else if a >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg.abs() <= 1e-14 {
                continue;
            }
            let a_new = (a - g / qjj).clamp(0.0, c);
            let delta = (a_new - a) * y;
            if delta != 0.0 {
                alpha[j] = a_new;
                w.iter_mut().zip(xj).for_each(|(wk, xk)| *wk += delta * xk);
                if use_bias {
                    b += delta;
                }
            }
        }
        // duality gap of 1/2|w|^2 + C * hinge
        let half_sq = 0.5 * (dot(&w, &w) + b * b);
        let hinge: f64 = (0..n)
            .map(|j| (1.0 - labels[j] as f64 * (dot(&w, x.frame(j)) + b)).max(0.0))
            .sum();
        primal = half_sq + c * hinge;
        let dual = alpha.iter().sum::<f64>() - half_sq;
        gap = primal - dual;
        if gap <= hp.svm_tol * primal.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    BitSolution {
        w,
        b,
        alpha,
        meta: BitTrainMeta {
            passes,
            // rescale to mu * hinge + lambda1 * |w|^2
            objective: 2.0 * hp.lambda1 * primal,
            duality_gap: 2.0 * hp.lambda1 * gap,
            degenerate: false,
        },
    }
}

/// `mu * sum_j max(0, 1 - y_j (w·x_j + b)) + lambda1 * (|w|^2 + b^2)`.
pub fn bit_objective(x: &FeatureMatrix, labels: &[i8], w: &[f64], b: f64, hp: &HyperParams) -> f64 {
    let hinge: f64 = labels
        .iter()
        .enumerate()
        .map(|(j, &y)| (1.0 - y as f64 * (dot(w, x.frame(j)) + b)).max(0.0))
        .sum();
    hp.mu * hinge + hp.lambda1 * (dot(w, w) + b * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> (FeatureMatrix, CodeMatrix) {
        let x = FeatureMatrix::from_frames(2, vec![2.0, 1.0, -2.0, -1.0]).unwrap();
        let b = CodeMatrix::from_rows(&[vec![1, -1]]).unwrap();
        (x, b)
    }

    #[test]
    fn separable_pair_gets_unit_margin() {
        let (x, b) = two_points();
        let hp = HyperParams {
            mu: 100.0,
            ..HyperParams::default()
        };
        let bank = train_filter_bank(&x, &b, &hp, None).unwrap();
        let a = project(&bank, &x).unwrap();
        assert!(a[(0, 0)] >= 1.0 - hp.svm_tol * 10.0, "{a:?}");
        assert!(-a[(0, 1)] >= 1.0 - hp.svm_tol * 10.0, "{a:?}");
    }

    #[test]
    fn constant_row_is_degenerate() {
        let (x, _) = two_points();
        let b = CodeMatrix::from_rows(&[vec![1, 1], vec![1, -1]]).unwrap();
        let hp = HyperParams::default();
        let bank = train_filter_bank(&x, &b, &hp, None).unwrap();
        assert!(bank.train_meta[0].degenerate);
        assert!(!bank.train_meta[1].degenerate);
        assert_eq!(bank.filter(0), &[0.0, 0.0]);
        assert_eq!(bank.biases()[0], 1.0);

        // a warm start keeps the previous filter for the degenerate bit
        let warm = FilterBank::new(
            &DenseMatrix::from_rows(&[vec![0.5, 3.0], vec![1.0, 1.0]]).unwrap(),
            vec![0.25, 0.0],
        )
        .unwrap();
        let bank = train_filter_bank(&x, &b, &hp, Some(&warm)).unwrap();
        assert_eq!(bank.filter(0), &[0.5, 1.0]);
        assert_eq!(bank.biases()[0], 0.25);
    }

    #[test]
    fn project_identity_and_mismatch() {
        let x = FeatureMatrix::from_frames(3, vec![3.0, 1.0, 2.0, -1.0, 0.0, 5.0]).unwrap();
        let bank = FilterBank::new(&DenseMatrix::identity(3), vec![0.0; 3]).unwrap();
        assert_eq!(project(&bank, &x).unwrap(), x.to_dense());
        let one = FilterBank::new(&DenseMatrix::new(3, 1, vec![1.0, 0.0, 0.0]).unwrap(), vec![0.0])
            .unwrap();
        assert_eq!(project(&one, &x).unwrap()[(0, 0)], 3.0);
        let wrong = FilterBank::new(&DenseMatrix::identity(2), vec![0.0; 2]).unwrap();
        assert!(matches!(
            project(&wrong, &x),
            Err(SomError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mismatched_codes_rejected() {
        let (x, _) = two_points();
        let b = CodeMatrix::from_rows(&[vec![1, -1, 1]]).unwrap();
        assert!(matches!(
            train_filter_bank(&x, &b, &HyperParams::default(), None),
            Err(SomError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn hyperparams_validation() {
        assert!(HyperParams::default().validate().is_ok());
        let bad = HyperParams {
            lambda1: 0.0,
            ..HyperParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = HyperParams {
            outer_max_iter: 0,
            ..HyperParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
