//! Synthetic "video" generator: each class owns a random `k`-dimensional
//! linear subspace, and each clip is a temporally coherent walk inside it.

use crate::error::{Result, SomError};
use crate::features::FeatureMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub subspace_dim: usize,
    pub frames_per_clip: usize,
    pub clips_per_class: usize,
    pub noise_sigma: f64,
    pub walk_step: f64,
    /// Norm of each class's anchor coefficient vector.
    pub anchor_norm: f64,
    /// Half-width of the coefficient box a walk is confined to.
    pub box_half_width: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            feature_dim: 64,
            subspace_dim: 3,
            frames_per_clip: 20,
            clips_per_class: 4,
            noise_sigma: 0.05,
            walk_step: 0.05,
            anchor_norm: 1.5,
            box_half_width: 0.75,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SomError::InvalidSpec(m));
        if self.num_classes == 0
            || self.feature_dim == 0
            || self.subspace_dim == 0
            || self.frames_per_clip == 0
            || self.clips_per_class == 0
        {
            return bad("all counts must be at least 1".into());
        }
        if self.subspace_dim >= self.feature_dim {
            return bad(format!(
                "subspace_dim {} must be below feature_dim {}",
                self.subspace_dim, self.feature_dim
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be a non-negative number".into());
        }
        if !(self.walk_step >= 0.0 && self.walk_step.is_finite()) {
            return bad("walk_step must be a non-negative number".into());
        }
        for (name, v) in [("anchor_norm", self.anchor_norm), ("box_half_width", self.box_half_width)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        Ok(())
    }
}

/// Generates labeled frames with clip ids, ordered class by class and clip
/// by clip. Clip ids are `class * clips_per_class + clip`.
///
/// Per class: an orthonormal `d × k` basis and an anchor in coefficient
/// space. Per clip: a start drawn uniformly from the box around the anchor,
/// then a Gaussian walk with step `walk_step`, clamped to the box. Each frame
/// is `basis · coeffs` plus isotropic Gaussian noise.
pub fn synth_videos(spec: &SyntheticSpec) -> Result<FeatureMatrix> {
    spec.validate()?;
    let (d, k) = (spec.feature_dim, spec.subspace_dim);
    let hw = spec.box_half_width;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| SomError::InvalidSpec(e.to_string()))?;

    let n = spec.num_classes * spec.clips_per_class * spec.frames_per_clip;
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut clip_ids = Vec::with_capacity(n);
    for class in 0..spec.num_classes {
        let basis = random_orthonormal(d, k, &mut rng);
        let mut anchor: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let norm = anchor.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        anchor.iter_mut().for_each(|v| *v *= spec.anchor_norm / norm);

        for clip in 0..spec.clips_per_class {
            let clip_id = (class * spec.clips_per_class + clip) as u64;
            let mut coeffs: Vec<f64> = anchor
                .iter()
                .map(|&a| a + rng.gen_range(-hw..=hw))
                .collect();
            for t in 0..spec.frames_per_clip {
                if t > 0 && spec.walk_step > 0.0 {
                    for (c, &a) in coeffs.iter_mut().zip(&anchor) {
                        let step: f64 = rng.sample(StandardNormal);
                        *c = (*c + spec.walk_step * step)
                            .clamp(a - hw, a + hw);
                    }
                }
                for row in &basis {
                    let mut v: f64 = row.iter().zip(&coeffs).map(|(b, c)| b * c).sum();
                    if spec.noise_sigma > 0.0 {
                        v += noise.sample(&mut rng);
                    }
                    data.push(v);
                }
                labels.push(class);
                clip_ids.push(clip_id);
            }
        }
    }
    FeatureMatrix::from_frames(d, data)?
        .with_labels(labels)?
        .with_clip_ids(clip_ids)
}

/// `d × k` matrix with orthonormal columns, returned row by row.
fn random_orthonormal(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
    }
    (0..d).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// Splits clips into gallery and probe halves per class. Each class's clips
/// are shuffled with `seed`; the first `max(1, clips / 2)` go to the gallery.
pub fn split_gallery_probe(x: &FeatureMatrix, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let labels = x.require_labels()?;
    let clips = x.clips();
    let classes = crate::features::num_classes(labels);
    let mut per_class: Vec<Vec<&Vec<usize>>> = vec![Vec::new(); classes];
    for (_, idx) in &clips {
        per_class[labels[idx[0]]].push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gallery = Vec::new();
    let mut probe = Vec::new();
    for (c, mut list) in per_class.into_iter().enumerate() {
        if list.len() < 2 {
            return Err(SomError::InvalidSpec(format!(
                "class {c} has {} clip(s); a gallery/probe split needs at least 2",
                list.len()
            )));
        }
        list.shuffle(&mut rng);
        let half = (list.len() / 2).max(1);
        for (i, idx) in list.into_iter().enumerate() {
            let dst = if i < half { &mut gallery } else { &mut probe };
            dst.extend_from_slice(idx);
        }
    }
    gallery.sort_unstable();
    probe.sort_unstable();
    Ok((x.select(&gallery), x.select(&probe)))
}
