//! Sign, self-correcting and rank-constrained probe codes side by side.

use som_core::encoder::{encode_clips, EncodeMode};
use som_core::filters::HyperParams;
use som_core::structures::{build_structure, StructureFamily, StructureOptions};
use som_core::synth::{split_gallery_probe, synth_videos, SyntheticSpec};
use som_core::trainer::train_som;

fn main() -> som_core::error::Result<()> {
    let spec = SyntheticSpec {
        walk_step: 0.2,
        ..SyntheticSpec::default()
    };
    let x = synth_videos(&spec)?;
    let (gallery, probe) = split_gallery_probe(&x, 5)?;
    let s = build_structure(StructureFamily::ItqMeans, &gallery, 32, StructureOptions::default())?;
    let hp = HyperParams::default();
    let model = train_som(&gallery, &s, &hp)?;

    let modes = [
        EncodeMode::Sign,
        EncodeMode::SelfCorrect,
        EncodeMode::RankConstrained(1),
        EncodeMode::RankConstrained(2),
        EncodeMode::RankConstrained(4),
    ];
    println!("{:<8} {:>8} {:>8}", "mode", "pooled", "per-clip");
    for mode in modes {
        let enc = encode_clips(&model.bank, &probe, mode, &hp)?;
        println!(
            "{:<8} {:>8.4} {:>8.4}",
            mode.to_string(),
            enc.pooled_compression(),
            enc.mean_clip_compression()
        );
    }
    Ok(())
}
