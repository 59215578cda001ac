//! Writes a features CSV, a model and a codes file to a temporary directory
//! and reads them back.

use som_core::encoder::{encode_clips, EncodeMode};
use som_core::filters::HyperParams;
use som_core::io::{
    load_codes, load_features, load_model, model_to_bytes, save_codes, save_features, save_model, CodeSet,
};
use som_core::structures::{build_structure, StructureFamily, StructureOptions};
use som_core::synth::{synth_videos, SyntheticSpec};
use som_core::trainer::train_som;

fn main() -> som_core::error::Result<()> {
    let dir = std::env::temp_dir().join(format!("som-files-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let spec = SyntheticSpec {
        num_classes: 4,
        clips_per_class: 2,
        frames_per_clip: 8,
        feature_dim: 16,
        ..SyntheticSpec::default()
    };
    let x = synth_videos(&spec)?;
    save_features(dir.join("x.csv"), &x)?;
    let x = load_features(dir.join("x.csv"))?;

    let s = build_structure(StructureFamily::Random, &x, 12, StructureOptions::default())?;
    let model = train_som(&x, &s, &HyperParams::default())?;
    save_model(dir.join("m.som"), &model)?;
    let back = load_model(dir.join("m.som"))?;
    println!("model bytes identical after reload: {}", model_to_bytes(&back)? == model_to_bytes(&model)?);

    let enc = encode_clips(&back.bank, &x, EncodeMode::SelfCorrect, &back.hp)?;
    let set = CodeSet::new(enc.codes, x.clip_ids().unwrap().to_vec(), x.labels().map(<[usize]>::to_vec))?;
    save_codes(dir.join("x.codes"), &set)?;
    println!("{}", std::fs::read_to_string(dir.join("x.codes"))?.lines().take(4).collect::<Vec<_>>().join("\n"));
    println!("codes equal after reload: {}", load_codes(dir.join("x.codes"))? == set);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
