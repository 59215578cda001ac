//! Trace norm of a random ±1 block and the variational bound built from
//! `L = (B Bᵀ)^{1/2}`, plus the low-rank binarization of a noisy block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use som_core::codes::CodeMatrix;
use som_core::filters::HyperParams;
use som_core::linalg::{psd_root, trace_norm, DenseMatrix};
use som_core::trainer::binarize_lowrank;

fn main() -> som_core::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let b = DenseMatrix::from_fn(8, 12, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    let gram = b.gram_rows();
    let root = psd_root(&gram, 1e-12 * gram.trace())?;
    let bound = 0.5 * (b.transpose().matmul(&root.inv_root)?.matmul(&b)?.trace() + root.root.trace());
    println!("trace norm {:.6}, variational value {:.6}", trace_norm(&b)?, bound);

    // a rank-one class block plus noise: the solver pulls codes toward one pattern
    let pattern: Vec<f64> = (0..8).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
    let a = DenseMatrix::from_fn(8, 12, |i, _| pattern[i] + rng.gen_range(-1.2..1.2));
    let b0 = CodeMatrix::from_sign(&a);
    let hp = HyperParams::default();
    let zeros = DenseMatrix::zeros(8, 12);
    let (b1, report) = binarize_lowrank(&a, &zeros, &hp, &b0)?;
    println!(
        "distinct codes: sign {} -> low-rank {} after {} iterations",
        b0.unique_count(),
        b1.unique_count(),
        report.iterations
    );
    println!("flip trace {:?}", report.flip_trace);
    Ok(())
}
