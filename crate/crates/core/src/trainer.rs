//! Alternating minimization: filter training followed by per-class
//! structured low-rank binarization, repeated until the codes settle.

use crate::codes::CodeMatrix;
use crate::error::{Result, SomError};
use crate::features::{class_indices, FeatureMatrix};
use crate::filters::{project, train_filter_bank, FilterBank, HyperParams, InitMode};
use crate::linalg::{numerical_rank, psd_root, ridge_solve, trace_norm, DenseMatrix};
use crate::structures::{OrdinalStructure, StructureFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Trace of the per-class binarization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveReport {
    pub iterations: usize,
    pub final_flip_fraction: f64,
    /// Flip fraction of each iteration, in `[0, 1]`.
    pub flip_trace: Vec<f64>,
    /// `‖A − B‖_F² + ‖B‖_* + λ₂‖B − S‖_F²` after each iteration.
    pub objective_trace: Vec<f64>,
}

/// `‖A − B‖_F² + ‖B‖_* + λ₂‖B − S‖_F²` for one class block.
pub fn block_objective(
    a: &DenseMatrix,
    b: &CodeMatrix,
    s: &DenseMatrix,
    lambda2: f64,
) -> Result<f64> {
    let bd = b.to_dense();
    let fit = a.sub(&bd)?.frobenius_sq();
    let structure = if lambda2 == 0.0 {
        0.0
    } else {
        lambda2 * bd.sub(s)?.frobenius_sq()
    };
    Ok(fit + trace_norm(&bd)? + structure)
}

/// Binarizes one class block. Each iteration forms `L = (B Bᵀ)^{1/2}`,
/// solves `((1 + λ₂) I + L⁻¹) B = A + λ₂ S` and takes signs, stopping once
/// fewer than `inner_tol` of the entries flip.
pub fn binarize_lowrank(
    a: &DenseMatrix,
    s: &DenseMatrix,
    hp: &HyperParams,
    b0: &CodeMatrix,
) -> Result<(CodeMatrix, InnerSolveReport)> {
    if a.shape() != s.shape() || a.shape() != (b0.bits(), b0.cols()) {
        return Err(SomError::ShapeMismatch(format!(
            "A is {:?}, S is {:?}, B0 is {:?}",
            a.shape(),
            s.shape(),
            (b0.bits(), b0.cols())
        )));
    }
    let m = a.rows();
    let rhs = if hp.lambda2 == 0.0 {
        a.clone()
    } else {
        a.add(&s.scale(hp.lambda2))?
    };
    let mut b = b0.clone();
    let mut report = InnerSolveReport {
        iterations: 0,
        final_flip_fraction: 0.0,
        flip_trace: Vec::new(),
        objective_trace: Vec::new(),
    };
    if a.cols() == 0 {
        return Ok((b, report));
    }
    for _ in 0..hp.inner_max_iter {
        let gram = b.to_dense().gram_rows();
        // floor on the eigenvalues of B Bᵀ, so the root is floored at its square root
        let floor = (hp.ridge_eps * gram.trace()).sqrt();
        let root = psd_root(&gram, floor)?;
        let mut sys = root.inv_root;
        for i in 0..m {
            sys[(i, i)] += 1.0 + hp.lambda2;
        }
        let relaxed = ridge_solve(&sys, &rhs, 0.0)?;
        let next = CodeMatrix::from_sign(&relaxed);
        let flips = next.flip_fraction(&b);
        b = next;
        report.iterations += 1;
        report.final_flip_fraction = flips;
        report.flip_trace.push(flips);
        report.objective_trace.push(block_objective(a, &b, s, hp.lambda2)?);
        if flips < hp.inner_tol {
            break;
        }
    }
    Ok((b, report))
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub flip_fraction: f64,
    /// Relaxed objective (filters, slacks, trace norms, structure, error term).
    pub objective: f64,
    pub class_ranks: Vec<usize>,
    pub inner_iterations: Vec<usize>,
    pub max_svm_passes: usize,
}

/// Learned filters plus the gallery codes they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub bank: FilterBank,
    pub gallery_codes: CodeMatrix,
    pub gallery_labels: Vec<usize>,
    pub hp: HyperParams,
    pub family: StructureFamily,
    pub converged: bool,
    pub diagnostics: Vec<OuterRecord>,
}

impl TrainedModel {
    pub fn bits(&self) -> usize {
        self.gallery_codes.bits()
    }

    pub fn num_classes(&self) -> usize {
        self.gallery_labels.iter().max().map_or(0, |&c| c + 1)
    }
}

/// Relaxed training objective:
/// `μ Σ ξ + λ₁(‖W‖_F² + ‖b‖²) + Σ_c ‖Bᶜ‖_* + λ₂‖B − S‖_F² + ‖E‖_F²`
/// with `E = WᵀX + b − B` and `ξ_ij = max(0, 1 − B_ij A_ij)`.
pub fn objective_eval(
    x: &FeatureMatrix,
    b: &CodeMatrix,
    s: &OrdinalStructure,
    bank: &FilterBank,
    hp: &HyperParams,
) -> Result<f64> {
    if b.cols() != x.len() || s.s.cols() != x.len() || b.bits() != s.s.bits() {
        return Err(SomError::ShapeMismatch(format!(
            "B is {}x{}, S is {}x{}, X has {} frames",
            b.bits(),
            b.cols(),
            s.s.bits(),
            s.s.cols(),
            x.len()
        )));
    }
    if bank.bits() != b.bits() {
        return Err(SomError::ShapeMismatch(format!(
            "{} filters for {} bits",
            bank.bits(),
            b.bits()
        )));
    }
    let a = project(bank, x)?;
    let (m, n) = (b.bits(), b.cols());
    let mut slack = 0.0;
    let mut err = 0.0;
    let mut structure = 0.0;
    for i in 0..m {
        for j in 0..n {
            let bij = b.get(i, j) as f64;
            let aij = a[(i, j)];
            slack += (1.0 - bij * aij).max(0.0);
            err += (aij - bij) * (aij - bij);
            let d = bij - s.s.get(i, j) as f64;
            structure += d * d;
        }
    }
    let classes = s.table.num_classes();
    let mut nuclear = 0.0;
    for idx in class_indices(&s.labels, classes) {
        if !idx.is_empty() {
            nuclear += trace_norm(&b.select_columns(&idx).to_dense())?;
        }
    }
    Ok(hp.mu * slack + hp.lambda1 * bank.regularizer() + nuclear + hp.lambda2 * structure + err)
}

fn initial_codes(x: &FeatureMatrix, s: &OrdinalStructure, hp: &HyperParams) -> CodeMatrix {
    match hp.init {
        InitMode::Structure => s.s.clone(),
        InitMode::RandomProjection => {
            let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x5eed_0f_b175);
            let g = DenseMatrix::from_fn(s.s.bits(), x.dim(), |_, _| rng.sample(StandardNormal));
            let mut out = CodeMatrix::new(s.s.bits(), x.len());
            for j in 0..x.len() {
                let f = x.frame(j);
                for i in 0..g.rows() {
                    let v: f64 = g.row(i).iter().zip(f).map(|(p, q)| p * q).sum();
                    out.set(i, j, crate::codes::sign(v));
                }
            }
            out
        }
    }
}

/// Learns ordinal filters and gallery codes for labeled frames `x` under the
/// prior structure `s`.
///
/// Each outer iteration trains the filters against the current codes,
/// projects the data, and re-binarizes every class block starting from the
/// signs of its projections.
pub fn train_som(x: &FeatureMatrix, s: &OrdinalStructure, hp: &HyperParams) -> Result<TrainedModel> {
    hp.validate()?;
    if s.labels.len() != x.len() || s.s.cols() != x.len() {
        return Err(SomError::ShapeMismatch(format!(
            "structure covers {} frames, features have {}",
            s.labels.len(),
            x.len()
        )));
    }
    if let Some(labels) = x.labels() {
        if labels != s.labels.as_slice() {
            return Err(SomError::ShapeMismatch(
                "feature labels differ from structure labels".into(),
            ));
        }
    }
    let classes = s.table.num_classes();
    let members = class_indices(&s.labels, classes);
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(SomError::EmptyClass(c));
    }
    let s_blocks: Vec<DenseMatrix> = members
        .iter()
        .map(|idx| s.s.select_columns(idx).to_dense())
        .collect();

    let mut codes = initial_codes(x, s, hp);
    let mut bank: Option<FilterBank> = None;
    let mut diagnostics = Vec::new();
    let mut converged = false;
    for _ in 0..hp.outer_max_iter {
        let warm = if hp.warm_start { bank.as_ref() } else { None };
        let next_bank = train_filter_bank(x, &codes, hp, warm)?;
        let a = project(&next_bank, x)?;

        let blocks: Vec<(CodeMatrix, InnerSolveReport)> = members
            .par_iter()
            .zip(s_blocks.par_iter())
            .map(|(idx, sc)| {
                let ac = a.select_columns(idx);
                let b0 = CodeMatrix::from_sign(&ac);
                binarize_lowrank(&ac, sc, hp, &b0)
            })
            .collect::<Result<_>>()?;

        let mut next = codes.clone();
        let mut class_ranks = Vec::with_capacity(classes);
        let mut inner_iterations = Vec::with_capacity(classes);
        for (idx, (bc, rep)) in members.iter().zip(&blocks) {
            next.scatter_columns(idx, bc);
            class_ranks.push(numerical_rank(&bc.to_dense())?);
            inner_iterations.push(rep.iterations);
        }
        let flip = next.flip_fraction(&codes);
        let objective = objective_eval(x, &next, s, &next_bank, hp)?;
        diagnostics.push(OuterRecord {
            flip_fraction: flip,
            objective,
            class_ranks,
            inner_iterations,
            max_svm_passes: next_bank.train_meta.iter().map(|m| m.passes).max().unwrap_or(0),
        });
        codes = next;
        bank = Some(next_bank);
        if flip < hp.outer_tol {
            converged = true;
            break;
        }
    }

    Ok(TrainedModel {
        bank: bank.expect("outer_max_iter >= 1"),
        gallery_codes: codes,
        gallery_labels: s.labels.clone(),
        hp: hp.clone(),
        family: s.family(),
        converged,
        diagnostics,
    })
}
