//! Full pipeline on synthetic clips: structure, training, per-clip encoding
//! and Hamming voting.

use som_core::encoder::{encode_clips, EncodeMode, Gallery, VotingMode};
use som_core::filters::HyperParams;
use som_core::structures::{build_structure, StructureFamily, StructureOptions};
use som_core::synth::{split_gallery_probe, synth_videos, SyntheticSpec};
use som_core::trainer::train_som;

fn main() -> som_core::error::Result<()> {
    let x = synth_videos(&SyntheticSpec::default())?;
    let (gallery, probe) = split_gallery_probe(&x, 1)?;
    let s = build_structure(StructureFamily::Hadamard, &gallery, 32, StructureOptions::default())?;
    let hp = HyperParams::default();
    let model = train_som(&gallery, &s, &hp)?;
    for (t, rec) in model.diagnostics.iter().enumerate() {
        println!(
            "outer {t}: flips {:.4} objective {:.2} inner iterations {:?}",
            rec.flip_fraction, rec.objective, rec.inner_iterations
        );
    }

    let index = Gallery::from_model(&model)?;
    let enc = encode_clips(&model.bank, &probe, EncodeMode::Sign, &hp)?;
    let labels = probe.labels().unwrap();
    let mut correct = 0;
    for clip in &enc.clips {
        let vote = index.classify(&enc.clip_codes(clip), VotingMode::PerFrame)?;
        let truth = labels[clip.frames[0]];
        correct += usize::from(vote.predicted_class == truth);
        println!(
            "clip {:>2}: class {truth} -> {} votes {:?}",
            clip.clip_id, vote.predicted_class, vote.per_class_votes
        );
    }
    println!("recognition rate {:.3}", correct as f64 / enc.clips.len() as f64);
    Ok(())
}
