//! Probe encoding and voting classification.
//!
//! Three encoders turn filter responses into codes: plain signs, the
//! self-correcting low-rank binarization (applied per clip, no structure
//! term), and a rank-constrained variant that signs a truncated SVD.

use crate::codes::{compression_ratio, CodeMatrix};
use crate::error::{Result, SomError};
use crate::features::FeatureMatrix;
use crate::filters::{project, FilterBank, HyperParams};
use crate::linalg::{trunc_svd, DenseMatrix};
use crate::trainer::{binarize_lowrank, TrainedModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "r")]
pub enum EncodeMode {
    Sign,
    SelfCorrect,
    RankConstrained(usize),
}

impl EncodeMode {
    /// Short name used in reports and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            EncodeMode::Sign => "sign",
            EncodeMode::SelfCorrect => "correct",
            EncodeMode::RankConstrained(_) => "rank",
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            EncodeMode::RankConstrained(r) => *r,
            _ => 0,
        }
    }

    /// Parses `sign`, `correct` or `rank` (the latter needs `r`).
    pub fn parse(name: &str, r: Option<usize>) -> Result<Self> {
        match (name, r) {
            ("sign", _) => Ok(EncodeMode::Sign),
            ("correct" | "self-correct", _) => Ok(EncodeMode::SelfCorrect),
            ("rank", Some(r)) => Ok(EncodeMode::RankConstrained(r)),
            ("rank", None) => Err(SomError::InvalidConfig("rank mode needs --r".into())),
            (other, _) => Err(SomError::InvalidConfig(format!(
                "unknown encode mode `{other}` (expected sign|correct|rank)"
            ))),
        }
    }
}

impl fmt::Display for EncodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodeMode::RankConstrained(r) => write!(f, "rank:{r}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for EncodeMode {
    type Err = SomError;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("rank", r)) => r
                .parse()
                .map(EncodeMode::RankConstrained)
                .map_err(|_| SomError::InvalidConfig(format!("bad rank in `{s}`"))),
            _ => EncodeMode::parse(s, None),
        }
    }
}

/// Codes for one clip with their redundancy statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEncoding {
    pub codes: CodeMatrix,
    pub mode: EncodeMode,
    pub unique_count: usize,
    pub compression_ratio: f64,
}

impl ProbeEncoding {
    fn new(codes: CodeMatrix, mode: EncodeMode) -> Self {
        Self {
            unique_count: codes.unique_count(),
            compression_ratio: compression_ratio(&codes),
            codes,
            mode,
        }
    }
}

pub fn encode_sign(bank: &FilterBank, xp: &FeatureMatrix) -> Result<ProbeEncoding> {
    let a = project(bank, xp)?;
    Ok(ProbeEncoding::new(CodeMatrix::from_sign(&a), EncodeMode::Sign))
}

/// Self-correcting codes for one clip: the low-rank binarization with the
/// structure weight forced to zero, started from the sign codes.
pub fn encode_self_correct(
    bank: &FilterBank,
    xp: &FeatureMatrix,
    hp: &HyperParams,
) -> Result<ProbeEncoding> {
    let a = project(bank, xp)?;
    let b0 = CodeMatrix::from_sign(&a);
    let hp0 = HyperParams {
        lambda2: 0.0,
        ..hp.clone()
    };
    let zeros = DenseMatrix::zeros(a.rows(), a.cols());
    let (codes, _) = binarize_lowrank(&a, &zeros, &hp0, &b0)?;
    Ok(ProbeEncoding::new(codes, EncodeMode::SelfCorrect))
}

/// Signs of the best rank-`r` approximation of the filter responses.
pub fn encode_rank_constrained(
    bank: &FilterBank,
    xp: &FeatureMatrix,
    r: usize,
) -> Result<ProbeEncoding> {
    let a = project(bank, xp)?;
    let max = a.rows().min(a.cols());
    if r == 0 || r > max {
        return Err(SomError::RankOutOfRange { rank: r, max });
    }
    // full rank: the truncation is the identity
    let codes = if r == max {
        CodeMatrix::from_sign(&a)
    } else {
        CodeMatrix::from_sign(&trunc_svd(&a, r)?)
    };
    Ok(ProbeEncoding::new(codes, EncodeMode::RankConstrained(r)))
}

/// Encodes one clip with the given mode.
pub fn encode(
    bank: &FilterBank,
    xp: &FeatureMatrix,
    mode: EncodeMode,
    hp: &HyperParams,
) -> Result<ProbeEncoding> {
    match mode {
        EncodeMode::Sign => encode_sign(bank, xp),
        EncodeMode::SelfCorrect => encode_self_correct(bank, xp, hp),
        EncodeMode::RankConstrained(r) => {
            // clips shorter than r are encoded at their full rank
            let max = bank.bits().min(xp.len());
            encode_rank_constrained(bank, xp, r.min(max).max(1))
                .map(|e| ProbeEncoding { mode, ..e })
        }
    }
}

/// Per-clip encodings of a whole probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSetEncoding {
    /// Codes for every frame, in the original frame order.
    pub codes: CodeMatrix,
    pub mode: EncodeMode,
    pub clips: Vec<ClipCodes>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipCodes {
    pub clip_id: u64,
    pub frames: Vec<usize>,
    pub unique_count: usize,
}

impl ClipSetEncoding {
    /// Unique codes over all frames divided by the frame count.
    pub fn pooled_compression(&self) -> f64 {
        compression_ratio(&self.codes)
    }

    /// Mean of the per-clip compression ratios.
    pub fn mean_clip_compression(&self) -> f64 {
        if self.clips.is_empty() {
            return 0.0;
        }
        self.clips
            .iter()
            .map(|c| c.unique_count as f64 / c.frames.len() as f64)
            .sum::<f64>()
            / self.clips.len() as f64
    }

    pub fn clip_codes(&self, clip: &ClipCodes) -> CodeMatrix {
        self.codes.select_columns(&clip.frames)
    }
}

/// Encodes every clip of `xp` independently (frames without clip ids form
/// one clip).
pub fn encode_clips(
    bank: &FilterBank,
    xp: &FeatureMatrix,
    mode: EncodeMode,
    hp: &HyperParams,
) -> Result<ClipSetEncoding> {
    let groups = xp.clips();
    let encoded: Vec<ProbeEncoding> = groups
        .par_iter()
        .map(|(_, idx)| encode(bank, &xp.select(idx), mode, hp))
        .collect::<Result<_>>()?;
    let mut codes = CodeMatrix::new(bank.bits(), xp.len());
    let mut clips = Vec::with_capacity(groups.len());
    for ((id, idx), enc) in groups.into_iter().zip(encoded) {
        codes.scatter_columns(&idx, &enc.codes);
        clips.push(ClipCodes {
            clip_id: id,
            unique_count: enc.unique_count,
            frames: idx,
        });
    }
    Ok(ClipSetEncoding { codes, mode, clips })
}

/// Whether each probe frame votes, or each distinct probe code votes once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VotingMode {
    #[default]
    PerFrame,
    PerUniqueCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub predicted_class: usize,
    pub per_class_votes: Vec<usize>,
    /// Number of voters (frames, or distinct codes in per-unique-code mode).
    pub total_frames: usize,
    pub tie_broken: bool,
}

/// Distinct `(code, class)` pairs of a trained model's gallery.
#[derive(Debug, Clone)]
pub struct Gallery {
    codes: CodeMatrix,
    classes: Vec<usize>,
    num_classes: usize,
}

impl Gallery {
    pub fn new(codes: &CodeMatrix, labels: &[usize]) -> Result<Self> {
        if codes.cols() != labels.len() {
            return Err(SomError::ShapeMismatch(format!(
                "{} gallery codes, {} labels",
                codes.cols(),
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        let mut keep: Vec<usize> = Vec::new();
        for j in 0..codes.cols() {
            if seen.insert((codes.column_words(j).to_vec(), labels[j])) {
                keep.push(j);
            }
        }
        keep.sort_by(|&a, &b| {
            labels[a]
                .cmp(&labels[b])
                .then_with(|| codes.column_words(a).cmp(codes.column_words(b)))
        });
        Ok(Self {
            codes: codes.select_columns(&keep),
            classes: keep.iter().map(|&j| labels[j]).collect(),
            num_classes: labels.iter().max().map_or(0, |&c| c + 1),
        })
    }

    pub fn from_model(model: &TrainedModel) -> Result<Self> {
        Self::new(&model.gallery_codes, &model.gallery_labels)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.codes.bits()
    }

    /// Nearest gallery class of probe column `j`: `(class, distance, tied)`,
    /// where `tied` reports that another class sits at the same distance.
    fn nearest(&self, probe: &CodeMatrix, j: usize) -> (usize, u32, bool) {
        let mut best_d = u32::MAX;
        let mut best_c = usize::MAX;
        let mut tied = false;
        for k in 0..self.classes.len() {
            let d = probe.column_distance(j, &self.codes, k);
            let c = self.classes[k];
            if d < best_d {
                best_d = d;
                best_c = c;
                tied = false;
            } else if d == best_d && c != best_c {
                tied = true;
                best_c = best_c.min(c);
            }
        }
        (best_c, best_d, tied)
    }

    /// Nearest-neighbor voting over the probe's codes.
    pub fn classify(&self, probe: &CodeMatrix, mode: VotingMode) -> Result<VoteResult> {
        if self.is_empty() {
            return Err(SomError::EmptyGallery);
        }
        if probe.cols() == 0 {
            return Err(SomError::EmptyProbe);
        }
        if probe.bits() != self.bits() {
            return Err(SomError::LengthMismatch(probe.bits(), self.bits()));
        }
        let voters: Vec<usize> = match mode {
            VotingMode::PerFrame => (0..probe.cols()).collect(),
            VotingMode::PerUniqueCode => {
                let mut seen = HashSet::new();
                (0..probe.cols())
                    .filter(|&j| seen.insert(probe.column_words(j)))
                    .collect()
            }
        };
        let mut votes = vec![0usize; self.num_classes];
        let mut dist = vec![0u64; self.num_classes];
        let mut tie_broken = false;
        for &j in &voters {
            let (c, d, tied) = self.nearest(probe, j);
            votes[c] += 1;
            dist[c] += d as u64;
            tie_broken |= tied;
        }
        let top = *votes.iter().max().unwrap_or(&0);
        let leaders: Vec<usize> = (0..votes.len()).filter(|&c| votes[c] == top).collect();
        if leaders.len() > 1 {
            tie_broken = true;
        }
        let predicted_class = leaders
            .iter()
            .copied()
            .min_by_key(|&c| (dist[c], c))
            .unwrap_or(0);
        Ok(VoteResult {
            predicted_class,
            per_class_votes: votes,
            total_frames: voters.len(),
            tie_broken,
        })
    }
}

/// Classifies one probe clip against a trained model (per-frame votes).
pub fn classify_voting(model: &TrainedModel, probe: &ProbeEncoding) -> Result<VoteResult> {
    Gallery::from_model(model)?.classify(&probe.codes, VotingMode::PerFrame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gallery(cols: &[Vec<i8>], labels: &[usize]) -> Gallery {
        Gallery::new(&CodeMatrix::from_columns(cols).unwrap(), labels).unwrap()
    }

    #[test]
    fn unanimous_exact_match() {
        let g = gallery(&[vec![1, 1, 1], vec![-1, -1, -1]], &[0, 1]);
        let probe = CodeMatrix::from_columns(&vec![vec![-1, -1, -1]; 4]).unwrap();
        let v = g.classify(&probe, VotingMode::PerFrame).unwrap();
        assert_eq!(v.predicted_class, 1);
        assert_eq!(v.per_class_votes, vec![0, 4]);
        assert!(!v.tie_broken);
    }

    #[test]
    fn majority_of_twenty_frames() {
        let codes: Vec<Vec<i8>> = (0..6)
            .map(|c| (0..6).map(|k| if k == c { 1 } else { -1 }).collect())
            .collect();
        let g = gallery(&codes, &[0, 1, 2, 3, 4, 5]);
        let mut frames = vec![codes[2].clone(); 12];
        frames.extend(vec![codes[5].clone(); 8]);
        let v = g
            .classify(&CodeMatrix::from_columns(&frames).unwrap(), VotingMode::PerFrame)
            .unwrap();
        assert_eq!(v.predicted_class, 2);
        assert_eq!(v.per_class_votes, vec![0, 0, 12, 0, 0, 8]);
        assert_eq!(v.total_frames, 20);
    }

    #[test]
    fn equidistant_frame_goes_to_smaller_class() {
        let g = gallery(&[vec![1, 1, -1], vec![1, -1, 1]], &[0, 1]);
        let probe = CodeMatrix::from_columns(&[vec![1, 1, 1]]).unwrap();
        let v = g.classify(&probe, VotingMode::PerFrame).unwrap();
        assert_eq!(v.predicted_class, 0);
        assert!(v.tie_broken);
        assert_eq!(v.total_frames, 1);
    }

    #[test]
    fn vote_tie_uses_distance_then_class() {
        let g = gallery(&[vec![1, 1, 1, 1], vec![-1, -1, -1, -1]], &[0, 1]);
        // one exact frame for class 1, one frame at distance 1 from class 0
        let probe = CodeMatrix::from_columns(&[vec![1, 1, 1, -1], vec![-1, -1, -1, -1]]).unwrap();
        let v = g.classify(&probe, VotingMode::PerFrame).unwrap();
        assert_eq!(v.per_class_votes, vec![1, 1]);
        assert_eq!(v.predicted_class, 1);
        assert!(v.tie_broken);
    }

    #[test]
    fn per_unique_code_counts_distinct_codes() {
        let g = gallery(&[vec![1, 1], vec![-1, -1]], &[0, 1]);
        let probe = CodeMatrix::from_columns(&[
            vec![1, 1],
            vec![1, 1],
            vec![1, 1],
            vec![-1, -1],
            vec![-1, 1],
        ])
        .unwrap();
        let v = g.classify(&probe, VotingMode::PerUniqueCode).unwrap();
        assert_eq!(v.total_frames, 3);
        assert_eq!(v.per_class_votes.iter().sum::<usize>(), 3);
        let v = g.classify(&probe, VotingMode::PerFrame).unwrap();
        assert_eq!(v.predicted_class, 0);
    }

    #[test]
    fn empty_inputs_rejected() {
        let g = gallery(&[vec![1, 1]], &[0]);
        assert_eq!(
            g.classify(&CodeMatrix::new(2, 0), VotingMode::PerFrame).unwrap_err(),
            SomError::EmptyProbe
        );
        let empty = Gallery::new(&CodeMatrix::new(2, 0), &[]).unwrap();
        assert_eq!(
            empty
                .classify(&CodeMatrix::ones(2, 1), VotingMode::PerFrame)
                .unwrap_err(),
            SomError::EmptyGallery
        );
        assert_eq!(
            g.classify(&CodeMatrix::ones(3, 1), VotingMode::PerFrame).unwrap_err(),
            SomError::LengthMismatch(3, 2)
        );
    }

    #[test]
    fn mode_names() {
        assert_eq!("sign".parse::<EncodeMode>().unwrap(), EncodeMode::Sign);
        assert_eq!("correct".parse::<EncodeMode>().unwrap(), EncodeMode::SelfCorrect);
        assert_eq!(
            "rank:3".parse::<EncodeMode>().unwrap(),
            EncodeMode::RankConstrained(3)
        );
        assert!(EncodeMode::parse("rank", None).is_err());
        assert_eq!(EncodeMode::RankConstrained(3).to_string(), "rank:3");
    }

    #[test]
    fn sign_encoder_basics() {
        let bank = FilterBank::new(&DenseMatrix::identity(2), vec![0.5, 0.5]).unwrap();
        let x = FeatureMatrix::from_frames(2, vec![1.0, 2.0, 0.1, 0.0]).unwrap();
        let e = encode_sign(&bank, &x).unwrap();
        assert_eq!(e.codes, CodeMatrix::ones(2, 2));
        assert_eq!(e.unique_count, 1);
        let single = FeatureMatrix::from_frames(2, vec![1.0, 2.0]).unwrap();
        assert_eq!(encode_sign(&bank, &single).unwrap().compression_ratio, 1.0);
    }

    #[test]
    fn rank_constrained_full_rank_equals_sign() {
        let bank = FilterBank::new(
            &DenseMatrix::from_rows(&[vec![1.0, -0.5, 0.2], vec![0.3, 1.0, -1.0]]).unwrap(),
            vec![0.0, 0.1, -0.1],
        )
        .unwrap();
        let x = FeatureMatrix::from_frames(2, vec![1.0, 2.0, -0.3, 0.4, 0.0, 0.0, 2.0, -1.0])
            .unwrap();
        let full = encode_rank_constrained(&bank, &x, 3).unwrap();
        assert_eq!(full.codes, encode_sign(&bank, &x).unwrap().codes);
        assert!(matches!(
            encode_rank_constrained(&bank, &x, 4),
            Err(SomError::RankOutOfRange { rank: 4, max: 3 })
        ));
    }
}
