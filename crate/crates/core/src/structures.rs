//! Prior ordinal matrices: per-class code tables, their expansion to
//! per-frame targets, and the pairwise separability criterion `J(B)`.

use crate::codes::{sign, CodeMatrix};
use crate::error::{Result, SomError};
use crate::features::{class_indices, num_classes, FeatureMatrix};
use crate::linalg::{svd, sym_eig, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

/// Default number of rotation refinements for the ITQ-means family.
pub const DEFAULT_ITQ_ITERS: usize = 50;

/// The family a code table was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureFamily {
    TwoClass,
    Random,
    Hadamard,
    ItqMeans,
    LdaSpectral,
    LdaAppended,
}

impl StructureFamily {
    pub fn name(self) -> &'static str {
        match self {
            StructureFamily::TwoClass => "two-class",
            StructureFamily::Random => "random",
            StructureFamily::Hadamard => "hadamard",
            StructureFamily::ItqMeans => "itq-means",
            StructureFamily::LdaSpectral => "lda-spectral",
            StructureFamily::LdaAppended => "lda-appended",
        }
    }
}

impl fmt::Display for StructureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureFamily {
    type Err = SomError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "two-class" => StructureFamily::TwoClass,
            "random" => StructureFamily::Random,
            "hadamard" => StructureFamily::Hadamard,
            "itq-means" => StructureFamily::ItqMeans,
            "lda-spectral" => StructureFamily::LdaSpectral,
            "lda-appended" => StructureFamily::LdaAppended,
            other => {
                return Err(SomError::InvalidConfig(format!(
                    "unknown structure family `{other}` \
                     (expected two-class|random|hadamard|itq-means|lda-spectral)"
                )))
            }
        })
    }
}

/// One `{-1,+1}^m` code per class; column `c` of `codes` is class `c`'s code.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCodeTable {
    codes: CodeMatrix,
    family: StructureFamily,
}

impl ClassCodeTable {
    /// Wraps explicit class codes, checking that they are pairwise distinct.
    pub fn new(codes: CodeMatrix, family: StructureFamily) -> Result<Self> {
        if codes.bits() == 0 || codes.cols() == 0 {
            return Err(SomError::InvalidConfig(
                "code table needs at least one class and one bit".into(),
            ));
        }
        if codes.unique_count() != codes.cols() {
            return Err(SomError::InvalidConfig("class codes are not unique".into()));
        }
        Ok(Self { codes, family })
    }

    pub fn num_classes(&self) -> usize {
        self.codes.cols()
    }

    pub fn bits(&self) -> usize {
        self.codes.bits()
    }

    pub fn family(&self) -> StructureFamily {
        self.family
    }

    pub fn code(&self, class: usize) -> Vec<i8> {
        self.codes.column(class)
    }

    /// Codes as an `m × C` matrix.
    pub fn as_codes(&self) -> &CodeMatrix {
        &self.codes
    }
}

/// Prior target matrix `S` (`m × n`) with the labels and table it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalStructure {
    pub s: CodeMatrix,
    pub labels: Vec<usize>,
    pub table: ClassCodeTable,
}

impl OrdinalStructure {
    pub fn family(&self) -> StructureFamily {
        self.table.family()
    }
}

/// Complementary all-`+1` / all-`-1` codes for a two-class problem.
pub fn build_two_class(bits: usize) -> Result<ClassCodeTable> {
    if bits == 0 {
        return Err(SomError::InvalidConfig("code length must be at least 1".into()));
    }
    let codes = CodeMatrix::from_columns(&[vec![1; bits], vec![-1; bits]])?;
    ClassCodeTable::new(codes, StructureFamily::TwoClass)
}

fn check_capacity(classes: usize, bits: usize) -> Result<()> {
    if bits < 63 && (1u64 << bits) < classes as u64 {
        return Err(SomError::CapacityExceeded { classes, bits });
    }
    Ok(())
}

/// `C` distinct uniformly random codes; collisions are re-drawn.
pub fn build_random_unique(classes: usize, bits: usize, seed: u64) -> Result<ClassCodeTable> {
    if classes == 0 || bits == 0 {
        return Err(SomError::InvalidConfig(
            "need at least one class and one bit".into(),
        ));
    }
    check_capacity(classes, bits)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut cols = Vec::with_capacity(classes);
    while cols.len() < classes {
        let code: Vec<i8> = (0..bits)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        if seen.insert(code.clone()) {
            cols.push(code);
        }
    }
    ClassCodeTable::new(CodeMatrix::from_columns(&cols)?, StructureFamily::Random)
}

/// First `C` rows of the Sylvester Hadamard matrix of order `m`.
pub fn build_hadamard(classes: usize, bits: usize) -> Result<ClassCodeTable> {
    if bits == 0 || !bits.is_power_of_two() {
        return Err(SomError::SizeNotPowerOfTwo(bits));
    }
    if classes == 0 || classes > bits {
        return Err(SomError::CapacityExceeded { classes, bits });
    }
    // H[i][j] = (-1)^{popcount(i & j)}
    let cols: Vec<Vec<i8>> = (0..classes)
        .map(|i| {
            (0..bits)
                .map(|j| if (i & j).count_ones() % 2 == 0 { 1 } else { -1 })
                .collect()
        })
        .collect();
    ClassCodeTable::new(CodeMatrix::from_columns(&cols)?, StructureFamily::Hadamard)
}

/// Result of quantizing class means, with the per-iteration loss.
#[derive(Debug, Clone)]
pub struct ItqOutcome {
    pub table: ClassCodeTable,
    /// `‖V − B R‖_F` after each rotation update.
    pub loss_trace: Vec<f64>,
}

/// Class-mean codes from PCA followed by iterative-quantization rotations.
pub fn build_itq_means(
    x: &FeatureMatrix,
    labels: &[usize],
    bits: usize,
    iters: usize,
    seed: u64,
) -> Result<ClassCodeTable> {
    itq_means_with_trace(x, labels, bits, iters, seed).map(|o| o.table)
}

pub fn itq_means_with_trace(
    x: &FeatureMatrix,
    labels: &[usize],
    bits: usize,
    iters: usize,
    seed: u64,
) -> Result<ItqOutcome> {
    let classes = num_classes(labels);
    if classes < 2 {
        return Err(SomError::InvalidConfig(
            "itq-means needs at least two classes".into(),
        ));
    }
    check_capacity(classes, bits)?;
    let (mut cols, loss_trace) = itq_raw(x, labels, bits, iters, seed)?;
    repair_collisions(&mut cols);
    let table = ClassCodeTable::new(CodeMatrix::from_columns(&cols)?, StructureFamily::ItqMeans)?;
    Ok(ItqOutcome { table, loss_trace })
}

/// Unrepaired ITQ codes for each class (one `Vec<i8>` per class).
fn itq_raw(
    x: &FeatureMatrix,
    labels: &[usize],
    bits: usize,
    iters: usize,
    seed: u64,
) -> Result<(Vec<Vec<i8>>, Vec<f64>)> {
    if labels.len() != x.len() {
        return Err(SomError::ShapeMismatch(format!(
            "{} labels for {} frames",
            labels.len(),
            x.len()
        )));
    }
    let d = x.dim();
    if bits == 0 || bits > d {
        return Err(SomError::InvalidConfig(format!(
            "itq-means needs 1 <= bits <= feature dimension ({bits} > {d})"
        )));
    }
    let classes = num_classes(labels);
    let members = class_indices(labels, classes);
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(SomError::EmptyClass(c));
    }

    // class means, centered on their average
    let mut means = DenseMatrix::zeros(classes, d);
    for (c, idx) in members.iter().enumerate() {
        let row = means.row_mut(c);
        for &j in idx {
            for (r, v) in row.iter_mut().zip(x.frame(j)) {
                *r += v;
            }
        }
        let inv = 1.0 / idx.len() as f64;
        row.iter_mut().for_each(|r| *r *= inv);
    }
    let scale = means.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..d {
        let avg = (0..classes).map(|c| means[(c, k)]).sum::<f64>() / classes as f64;
        for c in 0..classes {
            means[(c, k)] -= avg;
        }
    }
    if means.max_abs() <= 1e-12 * scale {
        return Err(SomError::DegenerateMeans);
    }

    // PCA projections through the C × C Gram matrix: column k = u_k sqrt(λ_k)
    let gram = means.gram_rows();
    let eig = sym_eig(&gram)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let mut proj = DenseMatrix::zeros(classes, bits);
    for k in 0..bits.min(classes) {
        let l = eig.eigenvalues[k];
        if l > 1e-12 * top {
            let s = l.sqrt();
            for c in 0..classes {
                proj[(c, k)] = eig.eigenvectors[(c, k)] * s;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = DenseMatrix::from_fn(bits, bits, |_, _| rng.sample(StandardNormal));
    let mut rot = orthonormalize(&gauss);
    let mut loss_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let b = proj.matmul(&rot)?.map(|v| sign(v) as f64);
        // Procrustes: R = Ŝ Sᵀ where Bᵀ V = S Ω Ŝᵀ
        let m = b.transpose().matmul(&proj)?;
        let dec = svd(&m)?;
        let s = complete_basis(&dec.u, &dec.singular_values);
        let s_hat = complete_basis(&dec.v, &dec.singular_values);
        rot = s_hat.matmul(&s.transpose())?;
        loss_trace.push(b.sub(&proj.matmul(&rot)?)?.frobenius_norm());
    }
    let codes = proj.matmul(&rot)?;
    let cols = (0..classes)
        .map(|c| codes.row(c).iter().map(|&v| sign(v)).collect())
        .collect();
    Ok((cols, loss_trace))
}

/// Modified Gram–Schmidt on the columns of a square matrix; degenerate
/// columns are replaced by canonical basis vectors.
fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(a.cols());
    let mut candidates: Vec<Vec<f64>> = (0..a.cols()).map(|j| a.column(j)).collect();
    candidates.extend((0..n).map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()));
    for mut v in candidates {
        if basis.len() == a.cols() {
            break;
        }
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0.max(1e-300) && norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    DenseMatrix::from_fn(n, a.cols(), |i, j| basis[j][i])
}

/// Keeps singular vectors with non-negligible singular values and completes
/// them to a full orthonormal basis.
fn complete_basis(vectors: &DenseMatrix, sv: &[f64]) -> DenseMatrix {
    let top = sv.first().copied().unwrap_or(0.0);
    let keep = sv.iter().filter(|&&s| s > 1e-12 * top && s > 0.0).count();
    let n = vectors.rows();
    let kept = DenseMatrix::from_fn(n, n, |i, j| if j < keep { vectors[(i, j)] } else { 0.0 });
    orthonormalize(&kept)
}

/// Makes every code unique: a code equal to an earlier one is perturbed by
/// flipping bits, trying lower-index bits and fewer flips first.
fn repair_collisions(cols: &mut [Vec<i8>]) {
    for c in 1..cols.len() {
        let taken: HashSet<Vec<i8>> = cols[..c].iter().cloned().collect();
        if !taken.contains(&cols[c]) {
            continue;
        }
        let bits = cols[c].len();
        'search: for flips in 1..=bits {
            let mut combo: Vec<usize> = (0..flips).collect();
            loop {
                let mut cand = cols[c].clone();
                for &k in &combo {
                    cand[k] = -cand[k];
                }
                if !taken.contains(&cand) {
                    cols[c] = cand;
                    break 'search;
                }
                if !next_combination(&mut combo, bits) {
                    break;
                }
            }
        }
    }
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in (i + 1)..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Where the bits beyond the first `C` one-hot bits come from.
#[derive(Debug, Clone, Copy)]
pub enum AppendedBits<'a> {
    ItqMeans {
        features: &'a FeatureMatrix,
        iters: usize,
        seed: u64,
    },
    Random {
        seed: u64,
    },
}

/// One-hot (`+1` at the class's own bit, `-1` elsewhere) class codes; when
/// `bits > C` the remaining bits are appended from `extra`.
pub fn build_lda_spectral(
    labels: &[usize],
    bits: usize,
    extra: Option<AppendedBits<'_>>,
) -> Result<ClassCodeTable> {
    let classes = num_classes(labels);
    if classes == 0 {
        return Err(SomError::InvalidConfig("no labels".into()));
    }
    if bits < classes {
        return Err(SomError::TooFewBits { classes, bits });
    }
    let spare = bits - classes;
    let appended: Vec<Vec<i8>> = if spare == 0 {
        vec![Vec::new(); classes]
    } else {
        match extra {
            Some(AppendedBits::ItqMeans {
                features,
                iters,
                seed,
            }) => itq_raw(features, labels, spare, iters, seed)?.0,
            Some(AppendedBits::Random { seed }) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..classes)
                    .map(|_| {
                        (0..spare)
                            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
                            .collect()
                    })
                    .collect()
            }
            None => {
                return Err(SomError::InvalidConfig(format!(
                    "{bits} bits for {classes} classes needs a source for the appended bits"
                )))
            }
        }
    };
    let cols: Vec<Vec<i8>> = (0..classes)
        .map(|c| {
            let mut code: Vec<i8> = (0..classes).map(|k| if k == c { 1 } else { -1 }).collect();
            code.extend_from_slice(&appended[c]);
            code
        })
        .collect();
    let family = if spare == 0 {
        StructureFamily::LdaSpectral
    } else {
        StructureFamily::LdaAppended
    };
    ClassCodeTable::new(CodeMatrix::from_columns(&cols)?, family)
}

/// Replicates each class's code across that class's frames.
pub fn expand_to_samples(table: &ClassCodeTable, labels: &[usize]) -> Result<OrdinalStructure> {
    let classes = table.num_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(SomError::LabelOutOfRange {
            label: bad,
            classes,
        });
    }
    let s = table.as_codes().select_columns(labels);
    Ok(OrdinalStructure {
        s,
        labels: labels.to_vec(),
        table: table.clone(),
    })
}

/// Builder options shared by the data-driven families.
#[derive(Debug, Clone, Copy)]
pub struct StructureOptions {
    pub itq_iters: usize,
    pub seed: u64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self {
            itq_iters: DEFAULT_ITQ_ITERS,
            seed: 0,
        }
    }
}

/// Builds the code table for `family` and expands it over the frames of `x`.
pub fn build_structure(
    family: StructureFamily,
    x: &FeatureMatrix,
    bits: usize,
    opts: StructureOptions,
) -> Result<OrdinalStructure> {
    let labels = x.require_labels()?;
    let classes = num_classes(labels);
    let table = match family {
        StructureFamily::TwoClass => {
            if classes != 2 {
                return Err(SomError::InvalidConfig(format!(
                    "two-class structure needs exactly 2 classes, found {classes}"
                )));
            }
            build_two_class(bits)?
        }
        StructureFamily::Random => build_random_unique(classes, bits, opts.seed)?,
        StructureFamily::Hadamard => build_hadamard(classes, bits)?,
        StructureFamily::ItqMeans => build_itq_means(x, labels, bits, opts.itq_iters, opts.seed)?,
        StructureFamily::LdaSpectral | StructureFamily::LdaAppended => build_lda_spectral(
            labels,
            bits,
            Some(AppendedBits::ItqMeans {
                features: x,
                iters: opts.itq_iters,
                seed: opts.seed,
            }),
        )?,
    };
    expand_to_samples(&table, labels)
}

/// Mean inter-class Hamming distance minus mean intra-class Hamming distance,
/// over unordered frame pairs.
pub fn criterion_j(b: &CodeMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != b.cols() {
        return Err(SomError::ShapeMismatch(format!(
            "{} labels for {} codes",
            labels.len(),
            b.cols()
        )));
    }
    let n = b.cols();
    let (mut inter_sum, mut inter_cnt, mut intra_sum, mut intra_cnt) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = b.column_distance(i, b, j) as u64;
            if labels[i] == labels[j] {
                intra_sum += d;
                intra_cnt += 1;
            } else {
                inter_sum += d;
                inter_cnt += 1;
            }
        }
    }
    if inter_cnt == 0 {
        return Err(SomError::NoPairs("inter-class"));
    }
    if intra_cnt == 0 {
        return Err(SomError::NoPairs("intra-class"));
    }
    Ok(inter_sum as f64 / inter_cnt as f64 - intra_sum as f64 / intra_cnt as f64)
}
