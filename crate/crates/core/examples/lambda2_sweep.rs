//! λ₂ sweep over 10 trials on a harder generator setting, where class
//! blocks do not collapse on their own. Prints the summary CSV.

use som_core::encoder::EncodeMode;
use som_core::experiment::{run_experiment, summary_to_csv, DatasetSource, ExperimentConfig, SweepPoint};
use som_core::synth::SyntheticSpec;

fn main() -> som_core::error::Result<()> {
    let config = ExperimentConfig {
        dataset: DatasetSource::Synthetic(SyntheticSpec {
            anchor_norm: 1.0,
            box_half_width: 1.0,
            ..SyntheticSpec::default()
        }),
        lambda2: vec![0.01, 0.1, 1.0, 10.0],
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config)?;
    for &lambda2 in &config.lambda2 {
        let point = SweepPoint { bits: 32, lambda2, mode: EncodeMode::Sign };
        let row = report.summary_value(&point, "compression_train").unwrap();
        println!("lambda2 {lambda2:<5} gallery compression {:.4} ± {:.4}", row.mean, row.std);
    }
    print!("{}", summary_to_csv(&report.summary));
    Ok(())
}
