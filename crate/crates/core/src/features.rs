use crate::error::{Result, SomError};
use crate::linalg::DenseMatrix;

/// A `d × n` matrix of per-frame feature vectors with optional class labels
/// and clip ids. Frames are stored contiguously (frame-major).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    frames: Vec<f64>,
    labels: Option<Vec<usize>>,
    clip_ids: Option<Vec<u64>>,
}

impl FeatureMatrix {
    /// Builds from frame-major data: frame `j` occupies `data[j*dim..(j+1)*dim]`.
    pub fn from_frames(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(SomError::ShapeMismatch(format!(
                "{} values do not split into frames of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SomError::NonFinite);
        }
        Ok(Self {
            dim,
            frames: data,
            labels: None,
            clip_ids: None,
        })
    }

    /// Builds from a `d × n` dense matrix whose columns are frames.
    pub fn from_dense(x: &DenseMatrix) -> Result<Self> {
        Self::from_frames(x.rows(), x.transpose().into_data())
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(SomError::ShapeMismatch(format!(
                "{} labels for {} frames",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_clip_ids(mut self, clip_ids: Vec<u64>) -> Result<Self> {
        if clip_ids.len() != self.len() {
            return Err(SomError::ShapeMismatch(format!(
                "{} clip ids for {} frames",
                clip_ids.len(),
                self.len()
            )));
        }
        self.clip_ids = Some(clip_ids);
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of frames `n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.frames.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    #[inline]
    pub fn frame(&self, j: usize) -> &[f64] {
        &self.frames[j * self.dim..(j + 1) * self.dim]
    }

    pub fn frames_data(&self) -> &[f64] {
        &self.frames
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn clip_ids(&self) -> Option<&[u64]> {
        self.clip_ids.as_deref()
    }

    /// Labels, or an error naming the missing field.
    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels()
            .ok_or_else(|| SomError::InvalidConfig("feature matrix carries no labels".into()))
    }

    /// `d × n` dense copy.
    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.len(), |i, j| self.frames[j * self.dim + i])
    }

    /// Sub-matrix of the given frames, carrying labels and clip ids along.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut frames = Vec::with_capacity(idx.len() * self.dim);
        for &j in idx {
            frames.extend_from_slice(self.frame(j));
        }
        Self {
            dim: self.dim,
            frames,
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&j| l[j]).collect()),
            clip_ids: self
                .clip_ids
                .as_ref()
                .map(|c| idx.iter().map(|&j| c[j]).collect()),
        }
    }

    /// Frame indices grouped by clip id, in order of first appearance.
    /// Without clip ids, all frames form a single clip with id 0.
    pub fn clips(&self) -> Vec<(u64, Vec<usize>)> {
        match &self.clip_ids {
            None => vec![(0, (0..self.len()).collect())],
            Some(ids) => group_indices(ids),
        }
    }
}

/// Groups positions by key, keeping the order in which keys first appear.
pub fn group_indices<K: Copy + Eq + std::hash::Hash>(keys: &[K]) -> Vec<(K, Vec<usize>)> {
    let mut order: Vec<(K, Vec<usize>)> = Vec::new();
    let mut slot = std::collections::HashMap::new();
    for (j, &k) in keys.iter().enumerate() {
        let s = *slot.entry(k).or_insert_with(|| {
            order.push((k, Vec::new()));
            order.len() - 1
        });
        order[s].1.push(j);
    }
    order
}

/// Number of classes implied by labels (`max + 1`).
pub fn num_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&m| m + 1)
}

/// Frame indices of each class `0..C`.
pub fn class_indices(labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); classes];
    for (j, &c) in labels.iter().enumerate() {
        if c < classes {
            out[c].push(j);
        }
    }
    out
}
