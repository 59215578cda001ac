use proptest::prelude::*;
use som_core::codes::{hamming, CodeMatrix};
use som_core::encoder::{encode_rank_constrained, encode_sign, Gallery, VotingMode};
use som_core::features::FeatureMatrix;
use som_core::filters::{FilterBank, HyperParams};
use som_core::io::{read_codes, read_features, write_codes, write_features, CodeSet};
use som_core::linalg::{psd_root, trace_norm, DenseMatrix};
use som_core::structures::criterion_j;
use som_core::trainer::binarize_lowrank;

fn pm1_vec(len: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), len)
}

fn code_matrix(max_bits: usize, max_cols: usize) -> impl Strategy<Value = CodeMatrix> {
    (1..=max_bits, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(pm1_vec(m), n).prop_map(|cols| CodeMatrix::from_columns(&cols).unwrap())
    })
}

fn dense(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-range..range, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamming_is_a_bounded_metric(len in 1usize..200, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..len).map(|_| if r.gen_bool(0.5) { 1i8 } else { -1 }).collect::<Vec<_>>();
        let (a, b, c) = (draw(), draw(), draw());
        let neg: Vec<i8> = a.iter().map(|v| -v).collect();
        prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
        prop_assert_eq!(hamming(&a, &neg).unwrap(), len);
        prop_assert_eq!(hamming(&a, &b).unwrap(), hamming(&b, &a).unwrap());
        prop_assert!(hamming(&a, &c).unwrap() <= hamming(&a, &b).unwrap() + hamming(&b, &c).unwrap());
        let packed = CodeMatrix::from_columns(&[a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(packed.column_distance(0, &packed, 1) as usize, hamming(&a, &b).unwrap());
    }

    #[test]
    fn packed_bytes_round_trip(codes in code_matrix(70, 6)) {
        let mut back = CodeMatrix::new(codes.bits(), codes.cols());
        for j in 0..codes.cols() {
            back.set_column_bytes(j, &codes.column_bytes(j)).unwrap();
        }
        prop_assert_eq!(back, codes);
    }

    #[test]
    fn criterion_never_exceeds_bits(codes in code_matrix(12, 10), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = codes.cols();
        prop_assume!(n >= 3);
        let mut labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..3)).collect();
        labels[0] = 0;
        labels[1] = 0;
        labels[2] = 1;
        let j = criterion_j(&codes, &labels).unwrap();
        prop_assert!(j <= codes.bits() as f64 + 1e-12);
    }

    #[test]
    fn binarization_stays_binary_and_bounded(a in dense(4, 6, 3.0), s in pm1_vec(4), lambda2 in 0.0f64..5.0) {
        let s_block = DenseMatrix::from_fn(4, 6, |i, _| s[i] as f64);
        let hp = HyperParams { lambda2, inner_max_iter: 7, ..HyperParams::default() };
        let (b, report) = binarize_lowrank(&a, &s_block, &hp, &CodeMatrix::from_sign(&a)).unwrap();
        prop_assert!(report.iterations >= 1 && report.iterations <= 7);
        prop_assert!(report.flip_trace.iter().all(|f| (0.0..=1.0).contains(f)));
        let dense_b = b.to_dense();
        prop_assert!(dense_b.data().iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn psd_root_squares_to_input(g in dense(5, 7, 2.0)) {
        let m = g.gram_rows();
        let root = psd_root(&m, 0.0).unwrap();
        let sq = root.root.matmul(&root.root).unwrap();
        let err = sq.sub(&m).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-6 * m.frobenius_norm().max(1e-12));
    }

    #[test]
    fn trace_norm_bounds(m in dense(5, 8, 2.0)) {
        let tn = trace_norm(&m).unwrap();
        let f = m.frobenius_norm();
        prop_assert!(tn + 1e-9 >= f);
        prop_assert!(tn <= 5f64.sqrt() * f + 1e-9);
    }

    #[test]
    fn full_rank_truncation_is_sign(w in dense(6, 5, 1.0), x in dense(6, 4, 2.0)) {
        let bank = FilterBank::new(&w, vec![0.1, -0.2, 0.0, 0.3, -0.1]).unwrap();
        let xf = FeatureMatrix::from_dense(&x).unwrap();
        let full = encode_rank_constrained(&bank, &xf, 4).unwrap();
        prop_assert_eq!(full.codes, encode_sign(&bank, &xf).unwrap().codes);
    }

    #[test]
    fn winner_has_most_votes(gallery in code_matrix(16, 8), probe_seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(probe_seed);
        let labels: Vec<usize> = (0..gallery.cols()).map(|j| j % 3).collect();
        let index = Gallery::new(&gallery, &labels).unwrap();
        let probe = CodeMatrix::from_columns(
            &(0..5).map(|_| (0..gallery.bits()).map(|_| if r.gen_bool(0.5) { 1i8 } else { -1 }).collect()).collect::<Vec<_>>(),
        ).unwrap();
        let vote = index.classify(&probe, VotingMode::PerFrame).unwrap();
        let best = *vote.per_class_votes.iter().max().unwrap();
        prop_assert_eq!(vote.per_class_votes[vote.predicted_class], best);
        prop_assert_eq!(vote.per_class_votes.iter().sum::<usize>(), 5);
    }

    #[test]
    fn features_csv_round_trips_bit_exactly(
        data in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 12),
        labels in prop::collection::vec(0usize..5, 4),
        clips in prop::collection::vec(0u64..1000, 4),
    ) {
        let x = FeatureMatrix::from_frames(3, data).unwrap().with_labels(labels).unwrap().with_clip_ids(clips).unwrap();
        let mut buf = Vec::new();
        write_features(&mut buf, &x).unwrap();
        let back = read_features(&buf[..]).unwrap();
        prop_assert_eq!(back.labels(), x.labels());
        prop_assert_eq!(back.clip_ids(), x.clip_ids());
        for (a, b) in back.frames_data().iter().zip(x.frames_data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn codes_file_round_trips(codes in code_matrix(40, 6), labeled in any::<bool>()) {
        let n = codes.cols();
        let labels = labeled.then(|| (0..n).map(|j| j * 7 % 5).collect());
        let set = CodeSet::new(codes, (0..n as u64).map(|j| j / 2).collect(), labels).unwrap();
        let mut buf = Vec::new();
        write_codes(&mut buf, &set).unwrap();
        let back = read_codes(&buf[..]).unwrap();
        let mut again = Vec::new();
        write_codes(&mut again, &back).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(again, buf);
    }
}
