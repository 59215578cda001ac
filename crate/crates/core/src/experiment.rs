//! Sweep runner: trains and evaluates one model per (trial, bits, λ₂) and
//! encodes the probe set under every requested mode.

use crate::codes::compression_ratio;
use crate::encoder::{encode_clips, EncodeMode, Gallery, VotingMode};
use crate::error::{Result, SomError};
use crate::features::FeatureMatrix;
use crate::filters::HyperParams;
use crate::io::load_features;
use crate::structures::{build_structure, StructureFamily, StructureOptions, DEFAULT_ITQ_ITERS};
use crate::synth::{split_gallery_probe, synth_videos, SyntheticSpec};
use crate::trainer::train_som;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Regenerated per trial with the trial seed.
    Synthetic(SyntheticSpec),
    /// Feature CSVs. Without a probe file the gallery file is split per
    /// trial seed, half the clips of each class on each side.
    Files {
        gallery: PathBuf,
        #[serde(default)]
        probe: Option<PathBuf>,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Sign,
    Correct,
    Rank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub structure: StructureFamily,
    pub itq_iters: usize,
    /// Base hyper-parameters; `lambda2` and `seed` are overridden per run.
    pub hp: HyperParams,
    pub bits: Vec<usize>,
    pub lambda2: Vec<f64>,
    pub modes: Vec<ModeName>,
    /// Ranks swept for the `rank` mode.
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub voting: VotingMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            structure: StructureFamily::ItqMeans,
            itq_iters: DEFAULT_ITQ_ITERS,
            hp: HyperParams::default(),
            bits: vec![32],
            lambda2: vec![0.1],
            modes: vec![ModeName::Sign, ModeName::Correct],
            ranks: vec![1, 2, 4, 8],
            trials: 10,
            base_seed: 0,
            voting: VotingMode::PerFrame,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SomError::InvalidConfig(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.bits.is_empty() || self.bits.contains(&0) {
            return bad("bits must be a non-empty list of positive counts");
        }
        if self.lambda2.is_empty() || self.lambda2.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("lambda2 must be a non-empty list of non-negative numbers");
        }
        if self.modes.is_empty() {
            return bad("modes must not be empty");
        }
        if self.modes.contains(&ModeName::Rank) && (self.ranks.is_empty() || self.ranks.contains(&0)) {
            return bad("rank mode needs a non-empty list of positive ranks");
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        self.hp.validate()
    }

    pub fn encode_modes(&self) -> Vec<EncodeMode> {
        let mut out = Vec::new();
        for m in &self.modes {
            match m {
                ModeName::Sign => out.push(EncodeMode::Sign),
                ModeName::Correct => out.push(EncodeMode::SelfCorrect),
                ModeName::Rank => out.extend(self.ranks.iter().map(|&r| EncodeMode::RankConstrained(r))),
            }
        }
        out
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|t| self.base_seed + t).collect()
    }
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bits: usize,
    pub lambda2: f64,
    pub mode: EncodeMode,
}

impl SweepPoint {
    fn mode_order(&self) -> (u8, usize) {
        match self.mode {
            EncodeMode::Sign => (0, 0),
            EncodeMode::SelfCorrect => (1, 0),
            EncodeMode::RankConstrained(r) => (2, r),
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.bits
            .cmp(&other.bits)
            .then(self.lambda2.total_cmp(&other.lambda2))
            .then(self.mode_order().cmp(&other.mode_order()))
    }

    /// `bits/lambda2/mode/r`, the `value` column of the sweep CSV.
    pub fn value(&self) -> String {
        format!("{}/{:?}/{}/{}", self.bits, self.lambda2, self.mode.name(), self.mode.rank())
    }

    pub fn parse_value(s: &str) -> Result<Self> {
        let bad = || SomError::InvalidConfig(format!("bad sweep value `{s}`"));
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let r: usize = parts[3].parse().map_err(|_| bad())?;
        Ok(Self {
            bits: parts[0].parse().map_err(|_| bad())?,
            lambda2: parts[1].parse().map_err(|_| bad())?,
            mode: EncodeMode::parse(parts[2], Some(r))?,
        })
    }
}

/// Outcome of one trial at one sweep point. Metrics are NaN when `error` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub point: SweepPoint,
    pub seed: u64,
    pub recognition_rate: f64,
    /// Pooled over all probe frames.
    pub compression_test: f64,
    /// Mean of the per-clip ratios.
    pub compression_test_clip: f64,
    pub compression_train: f64,
    pub converged: bool,
    pub train_secs: f64,
    pub encode_secs: f64,
    pub error: Option<String>,
}

pub const METRICS: [&str; 5] = [
    "recognition_rate",
    "compression_test",
    "compression_test_clip",
    "compression_train",
    "failures",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: SweepPoint,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub trials: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn summary_value(&self, point: &SweepPoint, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.point.cmp_key(point) == Ordering::Equal && r.metric == metric)
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

enum Data {
    Synthetic(SyntheticSpec),
    Split(FeatureMatrix),
    Fixed(FeatureMatrix, FeatureMatrix),
}

impl Data {
    fn trial(&self, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
        match self {
            Data::Synthetic(spec) => {
                let x = synth_videos(&SyntheticSpec { seed, ..spec.clone() })?;
                split_gallery_probe(&x, seed)
            }
            Data::Split(x) => split_gallery_probe(x, seed),
            Data::Fixed(g, p) => Ok((g.clone(), p.clone())),
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = match &config.dataset {
        DatasetSource::Synthetic(spec) => Data::Synthetic(spec.clone()),
        DatasetSource::Files { gallery, probe: None } => Data::Split(load_features(gallery)?),
        DatasetSource::Files { gallery, probe: Some(p) } => {
            Data::Fixed(load_features(gallery)?, load_features(p)?)
        }
    };
    let modes = config.encode_modes();
    let per_trial: Vec<Vec<TrialRow>> = config
        .trial_seeds()
        .into_par_iter()
        .map(|seed| run_trial(config, &data, &modes, seed))
        .collect();
    let mut trials: Vec<TrialRow> = per_trial.into_iter().flatten().collect();
    trials.sort_by(|a, b| a.point.cmp_key(&b.point).then(a.seed.cmp(&b.seed)));
    let summary = summarize(&trials);
    Ok(ExperimentReport { trials, summary })
}

fn failure_rows(points: impl Iterator<Item = SweepPoint>, seed: u64, err: &SomError) -> Vec<TrialRow> {
    points
        .map(|point| TrialRow {
            point,
            seed,
            recognition_rate: f64::NAN,
            compression_test: f64::NAN,
            compression_test_clip: f64::NAN,
            compression_train: f64::NAN,
            converged: false,
            train_secs: 0.0,
            encode_secs: 0.0,
            error: Some(err.to_string()),
        })
        .collect()
}

fn run_trial(config: &ExperimentConfig, data: &Data, modes: &[EncodeMode], seed: u64) -> Vec<TrialRow> {
    let all_points = || {
        config.bits.iter().flat_map(move |&bits| {
            config.lambda2.iter().flat_map(move |&lambda2| {
                modes.iter().map(move |&mode| SweepPoint { bits, lambda2, mode })
            })
        })
    };
    let (gallery, probe) = match data.trial(seed) {
        Ok(v) => v,
        Err(e) => return failure_rows(all_points(), seed, &e),
    };
    let mut rows = Vec::new();
    for &bits in &config.bits {
        for &lambda2 in &config.lambda2 {
            let points = modes.iter().map(|&mode| SweepPoint { bits, lambda2, mode });
            match run_point(config, &gallery, &probe, bits, lambda2, modes, seed) {
                Ok(mut r) => rows.append(&mut r),
                Err(e) => rows.extend(failure_rows(points, seed, &e)),
            }
        }
    }
    rows
}

fn run_point(
    config: &ExperimentConfig,
    gallery: &FeatureMatrix,
    probe: &FeatureMatrix,
    bits: usize,
    lambda2: f64,
    modes: &[EncodeMode],
    seed: u64,
) -> Result<Vec<TrialRow>> {
    let hp = HyperParams {
        lambda2,
        seed,
        ..config.hp.clone()
    };
    let t0 = Instant::now();
    let opts = StructureOptions {
        itq_iters: config.itq_iters,
        seed,
    };
    let s = build_structure(config.structure, gallery, bits, opts)?;
    let model = train_som(gallery, &s, &hp)?;
    let train_secs = t0.elapsed().as_secs_f64();
    let compression_train = compression_ratio(&model.gallery_codes);
    let index = Gallery::from_model(&model)?;
    let labels = probe.require_labels()?;

    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let t1 = Instant::now();
        let enc = encode_clips(&model.bank, probe, mode, &hp)?;
        let mut correct = 0usize;
        for clip in &enc.clips {
            let vote = index.classify(&enc.clip_codes(clip), config.voting)?;
            if vote.predicted_class == labels[clip.frames[0]] {
                correct += 1;
            }
        }
        rows.push(TrialRow {
            point: SweepPoint { bits, lambda2, mode },
            seed,
            recognition_rate: correct as f64 / enc.clips.len() as f64,
            compression_test: enc.pooled_compression(),
            compression_test_clip: enc.mean_clip_compression(),
            compression_train,
            converged: model.converged,
            train_secs,
            encode_secs: t1.elapsed().as_secs_f64(),
            error: None,
        });
    }
    Ok(rows)
}

/// Mean ± std per sweep point over the successful trials, plus the failure
/// count. Expects `trials` sorted by point.
pub fn summarize(trials: &[TrialRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < trials.len() {
        let point = trials[start].point;
        let mut end = start;
        while end < trials.len() && trials[end].point.cmp_key(&point) == Ordering::Equal {
            end += 1;
        }
        let group = &trials[start..end];
        let ok: Vec<&TrialRow> = group.iter().filter(|t| t.error.is_none()).collect();
        let pick = |f: fn(&TrialRow) -> f64| mean_std(&ok.iter().map(|t| f(t)).collect::<Vec<_>>());
        let stats = [
            pick(|t| t.recognition_rate),
            pick(|t| t.compression_test),
            pick(|t| t.compression_test_clip),
            pick(|t| t.compression_train),
            ((group.len() - ok.len()) as f64, 0.0),
        ];
        for (metric, (mean, std)) in METRICS.iter().zip(stats) {
            out.push(SummaryRow {
                point,
                metric: metric.to_string(),
                mean,
                std,
            });
        }
        start = end;
    }
    out
}

pub const CSV_HEADER: &str = "sweep_var,value,metric,mean,std";
pub const SWEEP_VAR: &str = "bits/lambda2/mode/r";

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(s, "{SWEEP_VAR},{},{},{:?},{:?}", r.point.value(), r.metric, r.mean, r.std).unwrap();
    }
    s
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(SomError::Parse {
                line: 1,
                msg: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| SomError::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 5 || f[0] != SWEEP_VAR {
            return Err(err(format!("expected 5 fields starting with `{SWEEP_VAR}`")));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad number `{v}`")));
        rows.push(SummaryRow {
            point: SweepPoint::parse_value(f[1]).map_err(|e| err(e.to_string()))?,
            metric: f[2].to_string(),
            mean: num(f[3])?,
            std: num(f[4])?,
        });
    }
    Ok(rows)
}
