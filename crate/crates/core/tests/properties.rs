use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmtss::dsp::{istft, stft, StftConfig};
use mmtss::fusion::{
    factorized_attention_forward, rule_attention_weight, softmax_rows, upsample_nearest, EmbeddingKind,
    EmbeddingSequence, FactorizedAttentionParams, RuleAttentionParams,
};
use mmtss::metrics::{bucket_report, si_sdr, AngleBucket, ScoreRecord};
use mmtss::room::{apply_rir, fft_convolve};
use mmtss::MultiChannelWaveform;

fn naive_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn si_sdr_ignores_estimate_scale(
        seed in any::<u64>(),
        gain in prop_oneof![1e-3f64..1e3, -1e3f64..-1e-3],
        noise in 0.01f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r: Vec<f64> = (0..2000).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let e: Vec<f64> = r.iter().map(|v| v + noise * rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let scaled: Vec<f64> = e.iter().map(|v| v * gain).collect();
        let a = si_sdr(&e, &r).unwrap();
        let b = si_sdr(&scaled, &r).unwrap();
        // a negative gain flips the projection sign, which squares away
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn softmax_rows_on_simplex(logits in matrix(5, 7), shift in -500.0f64..500.0) {
        let w = softmax_rows(&(logits.clone() + shift));
        for row in w.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|v| *v >= 0.0));
        }
        let base = softmax_rows(&logits);
        prop_assert!((&w - &base).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn attention_commutes_with_frame_permutation(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = FactorizedAttentionParams::random(&mut rng, 5, 4, 3, 2).unwrap();
        let a = Array2::from_shape_fn((6, 5), |(t, e)| ((t * 7 + e * 3) as f64 * 0.37).sin());
        let m = Array2::from_shape_fn((6, 4), |(t, d)| ((t * 5 + d) as f64 * 0.61).cos());
        let mut order: Vec<usize> = (0..6).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let out = factorized_attention_forward(a.view(), m.view(), &p).unwrap();
        let pa = a.select(Axis(0), &order);
        let pm = m.select(Axis(0), &order);
        let pout = factorized_attention_forward(pa.view(), pm.view(), &p).unwrap();
        let expect = out.fused.select(Axis(0), &order);
        prop_assert!((&pout.fused - &expect).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn rule_gate_range_and_monotone(ad in 0.0f64..180.0, step in 0.0f64..5.0) {
        let p = RuleAttentionParams::default();
        let a = rule_attention_weight(Some(ad), p);
        let b = rule_attention_weight(Some(ad + step), p);
        prop_assert!((0.0..1.0).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn rule_gate_continuous(ad in 0.0f64..180.0) {
        let p = RuleAttentionParams::default();
        let h = 1e-9;
        let a = rule_attention_weight(Some(ad), p);
        let b = rule_attention_weight(Some(ad + h), p);
        // slope is bounded by |w|/2 on the active side
        prop_assert!((a - b).abs() <= 0.5 * h + 1e-15);
    }

    #[test]
    fn fft_convolution_matches_direct(
        a in prop::collection::vec(-1.0f64..1.0, 1..200),
        b in prop::collection::vec(-1.0f64..1.0, 1..100),
    ) {
        let fast = fft_convolve(&a, &b);
        let slow = naive_convolve(&a, &b);
        prop_assert_eq!(fast.len(), slow.len());
        prop_assert!(fast.iter().zip(&slow).all(|(x, y)| (x - y).abs() < 1e-10));
    }

    #[test]
    fn apply_rir_is_per_channel_convolution(
        src in prop::collection::vec(-1.0f64..1.0, 10..120),
        r0 in prop::collection::vec(-1.0f64..1.0, 1..40),
        r1 in prop::collection::vec(-1.0f64..1.0, 1..40),
    ) {
        let w = MultiChannelWaveform::mono(src.clone(), 16000).unwrap();
        let out = apply_rir(&w, &[r0.clone(), r1.clone()]).unwrap();
        prop_assert_eq!(out.len(), src.len() + r0.len().max(r1.len()) - 1);
        for (ch, r) in [r0, r1].iter().enumerate() {
            let direct = naive_convolve(&src, r);
            for (n, v) in out.channel(ch).iter().enumerate() {
                let d = direct.get(n).copied().unwrap_or(0.0);
                prop_assert!((v - d).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stft_round_trip_interior(seed in any::<u64>(), extra in 0usize..700, channels in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = 2048 + extra;
        let x = Array2::from_shape_simple_fn((channels, len), || rand::Rng::random_range(&mut rng, -1.0..1.0));
        let w = MultiChannelWaveform::new(x.clone(), 16000).unwrap();
        let cfg = StftConfig::default();
        let y = istft(&stft(&w, &cfg).unwrap(), &cfg).unwrap();
        let end = y.len() - cfg.window_length;
        for c in 0..channels {
            for n in cfg.window_length..end {
                prop_assert!((y.samples()[[c, n]] - x[[c, n]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn upsampling_keeps_order_and_covers_all(k in 1usize..30, t in 1usize..200) {
        let v = Array2::from_shape_fn((k, 1), |(i, _)| i as f64);
        let up = upsample_nearest(&EmbeddingSequence::new(v, EmbeddingKind::Fused, 25.0).unwrap(), t).unwrap();
        let rows: Vec<f64> = up.values().column(0).to_vec();
        prop_assert_eq!(rows.len(), t);
        prop_assert!(rows.windows(2).all(|w| w[0] <= w[1]));
        if t >= k {
            for i in 0..k {
                prop_assert!(rows.contains(&(i as f64)));
            }
        }
    }

    #[test]
    fn bucket_means_match_brute_force(
        recs in prop::collection::vec((1usize..4, 0.0f64..180.0, -20.0f64..40.0), 1..40),
    ) {
        let records: Vec<ScoreRecord> = recs
            .iter()
            .enumerate()
            .map(|(i, &(spk, ad, s))| ScoreRecord {
                id: format!("r{i}"),
                si_sdr_db: s,
                sdr_db: s + 1.0,
                speaker_count: spk,
                angle_difference_deg: (spk > 1).then_some(ad),
                rtf: None,
            })
            .collect();
        let report = bucket_report(&records).unwrap();
        let mean = |it: Vec<f64>| it.iter().sum::<f64>() / it.len() as f64;
        let overall = mean(records.iter().map(|r| r.si_sdr_db).collect());
        prop_assert!((report.overall.mean_si_sdr_db - overall).abs() < 1e-9);
        prop_assert_eq!(report.overall.count, records.len());
        for b in &report.speakers {
            let spk: usize = b.label[..1].parse().unwrap();
            let xs: Vec<f64> = records.iter().filter(|r| r.speaker_count == spk).map(|r| r.si_sdr_db).collect();
            prop_assert_eq!(b.count, xs.len());
            prop_assert!((b.mean_si_sdr_db - mean(xs)).abs() < 1e-9);
        }
        for b in &report.angles {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.angle_difference_deg.is_some_and(|a| AngleBucket::of(a).label() == b.label))
                .map(|r| r.si_sdr_db)
                .collect();
            prop_assert_eq!(b.count, xs.len());
            prop_assert!((b.mean_si_sdr_db - mean(xs)).abs() < 1e-9);
        }
    }
}
