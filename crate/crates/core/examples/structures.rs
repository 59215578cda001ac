//! The prior code tables for a small synthetic problem and their
//! separability `J`.

use som_core::structures::{build_structure, criterion_j, StructureFamily, StructureOptions};
use som_core::synth::{synth_videos, SyntheticSpec};

fn main() -> som_core::error::Result<()> {
    let spec = SyntheticSpec {
        num_classes: 6,
        clips_per_class: 2,
        frames_per_clip: 10,
        ..SyntheticSpec::default()
    };
    let x = synth_videos(&spec)?;
    let labels = x.labels().unwrap();
    for family in [
        StructureFamily::Random,
        StructureFamily::Hadamard,
        StructureFamily::ItqMeans,
        StructureFamily::LdaSpectral,
    ] {
        let s = build_structure(family, &x, 8, StructureOptions { seed: 3, ..Default::default() })?;
        println!("{:<13} J = {:.3} (max 8)", family.name(), criterion_j(&s.s, labels)?);
        for c in 0..s.table.num_classes() {
            let code: String = s.table.code(c).iter().map(|&v| if v > 0 { '+' } else { '-' }).collect();
            println!("    class {c}: {code}");
        }
    }
    Ok(())
}
