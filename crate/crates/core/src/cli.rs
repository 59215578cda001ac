//! Command-line front end shared by the `som` binary and the tests.

use crate::encoder::{encode_clips, EncodeMode, Gallery, VoteResult, VotingMode};
use crate::error::{Result, SomError};
use crate::experiment::{run_experiment, summary_to_csv, ExperimentConfig};
use crate::features::group_indices;
use crate::filters::HyperParams;
use crate::io::{load_codes, load_features, load_model, save_codes, save_features, save_model, CodeSet};
use crate::structures::{build_structure, StructureFamily, StructureOptions};
use crate::synth::{split_gallery_probe, synth_videos, SyntheticSpec};
use crate::trainer::train_som;
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "som", about = "Structured ordinal binary codes for frame sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: all.csv, gallery.csv and probe.csv.
    Synth {
        /// JSON with SyntheticSpec fields; defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train filters and gallery codes on a labeled feature CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "itq-means")]
        structure: StructureFamily,
        #[arg(long, default_value_t = 32)]
        bits: usize,
        #[arg(long)]
        lambda2: Option<f64>,
        /// JSON with HyperParams fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode each clip of a feature CSV with a trained model.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Sign)]
        mode: ModeArg,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify each clip of a codes file by Hamming nearest-neighbor voting.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        codes: PathBuf,
        #[arg(long, value_enum, default_value_t = VotingArg::Frame)]
        voting: VotingArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a trial sweep and write the summary CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the full report (per-trial rows) as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Sign,
    Correct,
    Rank,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VotingArg {
    Frame,
    UniqueCode,
}

#[derive(Debug, Serialize)]
pub struct ClipDecision {
    pub clip_id: u64,
    pub label: Option<usize>,
    #[serde(flatten)]
    pub vote: VoteResult,
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub clips: Vec<ClipDecision>,
    /// Fraction of clips classified correctly, when labels are known.
    pub recognition_rate: Option<f64>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SomError::InvalidConfig(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| SomError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn execute(command: Command) -> Result<String> {
    match command {
        Command::Synth { spec, out } => {
            let spec: SyntheticSpec = match spec {
                Some(p) => read_json(&p)?,
                None => SyntheticSpec::default(),
            };
            let x = synth_videos(&spec)?;
            let (g, p) = split_gallery_probe(&x, spec.seed)?;
            fs::create_dir_all(&out)?;
            save_features(out.join("all.csv"), &x)?;
            save_features(out.join("gallery.csv"), &g)?;
            save_features(out.join("probe.csv"), &p)?;
            Ok(format!(
                "wrote {} frames ({} gallery, {} probe) to {}",
                x.len(),
                g.len(),
                p.len(),
                out.display()
            ))
        }
        Command::Train {
            features,
            structure,
            bits,
            lambda2,
            config,
            seed,
            out,
        } => {
            let mut hp: HyperParams = match config {
                Some(p) => read_json(&p)?,
                None => HyperParams::default(),
            };
            if let Some(l) = lambda2 {
                hp.lambda2 = l;
            }
            if let Some(s) = seed {
                hp.seed = s;
            }
            hp.validate()?;
            let x = load_features(&features)?;
            let opts = StructureOptions {
                seed: hp.seed,
                ..Default::default()
            };
            let s = build_structure(structure, &x, bits, opts)?;
            let model = train_som(&x, &s, &hp)?;
            save_model(&out, &model)?;
            Ok(format!(
                "trained {} bits on {} frames, {} classes, {} outer iterations, converged: {}",
                model.bits(),
                x.len(),
                model.num_classes(),
                model.diagnostics.len(),
                model.converged
            ))
        }
        Command::Encode {
            model,
            features,
            mode,
            r,
            out,
        } => {
            let model = load_model(&model)?;
            let x = load_features(&features)?;
            let mode = match mode {
                ModeArg::Sign => EncodeMode::Sign,
                ModeArg::Correct => EncodeMode::SelfCorrect,
                ModeArg::Rank => EncodeMode::parse("rank", r)?,
            };
            let enc = encode_clips(&model.bank, &x, mode, &model.hp)?;
            let clip_ids = x.clip_ids().map_or_else(|| vec![0; x.len()], <[u64]>::to_vec);
            let set = CodeSet::new(enc.codes.clone(), clip_ids, x.labels().map(<[usize]>::to_vec))?;
            save_codes(&out, &set)?;
            Ok(format!(
                "encoded {} frames in {} clips ({mode}); pooled compression {:.4}, mean per-clip {:.4}",
                x.len(),
                enc.clips.len(),
                enc.pooled_compression(),
                enc.mean_clip_compression()
            ))
        }
        Command::Classify {
            model,
            codes,
            voting,
            out,
        } => {
            let model = load_model(&model)?;
            let set = load_codes(&codes)?;
            let gallery = Gallery::from_model(&model)?;
            let voting = match voting {
                VotingArg::Frame => VotingMode::PerFrame,
                VotingArg::UniqueCode => VotingMode::PerUniqueCode,
            };
            let mut clips = Vec::new();
            for (clip_id, idx) in group_indices(&set.clip_ids) {
                let vote = gallery.classify(&set.codes.select_columns(&idx), voting)?;
                clips.push(ClipDecision {
                    clip_id,
                    label: set.labels.as_ref().map(|l| l[idx[0]]),
                    vote,
                });
            }
            let recognition_rate = set.labels.as_ref().map(|_| {
                let hits = clips
                    .iter()
                    .filter(|c| c.label == Some(c.vote.predicted_class))
                    .count();
                hits as f64 / clips.len().max(1) as f64
            });
            let report = ClassifyReport {
                clips,
                recognition_rate,
            };
            write_json(&out, &report)?;
            Ok(match recognition_rate {
                Some(r) => format!("{} clips, recognition rate {r:.4}", report.clips.len()),
                None => format!("{} clips classified", report.clips.len()),
            })
        }
        Command::Sweep { config, out, report } => {
            let config: ExperimentConfig = read_json(&config)?;
            let rep = run_experiment(&config)?;
            fs::write(&out, summary_to_csv(&rep.summary))?;
            if let Some(p) = report {
                write_json(&p, &rep)?;
            }
            let failed = rep.trials.iter().filter(|t| t.error.is_some()).count();
            Ok(format!(
                "{} trial rows ({failed} failed), {} summary rows written to {}",
                rep.trials.len(),
                rep.summary.len(),
                out.display()
            ))
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit
/// code: 0 on success, 2 on invalid input, 1 on any other failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}
