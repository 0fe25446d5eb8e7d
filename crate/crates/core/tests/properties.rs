use proptest::prelude::*;

use sleepstage::cohort::{classify_ahi, merge_stages, select_cohort, split_subjects, CohortCandidate, SleepThresholds};
use sleepstage::epoching::{build_epoch_grid, EpochedRr};
use sleepstage::eval_report::{accuracy, cohens_kappa, confusion_matrix, permutation_importance, EvalError};
use sleepstage::feature_registry::{fit_normalization, FeatureManifest, FeatureMatrix, Profile, Source};
use sleepstage::features_resp_cpc::{cpc_band_features, cpc_from_series};
use sleepstage::features_rr::{novel_f1, novel_f2, novel_f3, rr_freq_features};
use sleepstage::model_blstm::{forward, init_params, BlstmDims, Checkpoint, Sequence, TrainConfig};
use sleepstage::preprocess::{butterworth_lowpass, detect_r_peaks, remove_baseline_wavelet, rr_from_peaks};
use sleepstage::signal_io::{read_edf, read_hypnogram, write_edf, write_hypnogram, AnyHypnogram};
use sleepstage::synth_oracle::{generate_subject, SynthProfile};
use sleepstage::{Hypnogram, SignalTrace, SixStage, Stage};

const SIX: [SixStage; 6] = [
    SixStage::Wake,
    SixStage::S1,
    SixStage::S2,
    SixStage::S3,
    SixStage::S4,
    SixStage::Rem,
];
const FOUR: [Stage; 4] = [Stage::Wake, Stage::Light, Stage::Deep, Stage::Rem];

fn six_stages(max: usize) -> impl Strategy<Value = Vec<SixStage>> {
    prop::collection::vec(0..6usize, 1..max).prop_map(|v| v.into_iter().map(|i| SIX[i]).collect())
}

fn four_stages(len: usize) -> impl Strategy<Value = Vec<Stage>> {
    prop::collection::vec(0..4usize, len).prop_map(|v| v.into_iter().map(|i| FOUR[i]).collect())
}

fn header_number(bytes: &[u8], offset: usize) -> f64 {
    std::str::from_utf8(&bytes[offset..offset + 8])
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

/// Breathing-like signal: two tones, slow drift and a bounded wobble.
fn breathing(n: usize, rate: f64, p: (f64, f64, f64, f64)) -> Vec<f64> {
    let (f, amp, drift, offset) = p;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            amp * (2.0 * std::f64::consts::PI * f * t).sin()
                + 0.3 * amp * (2.0 * std::f64::consts::PI * 2.1 * f * t + 0.4).sin()
                + drift * (2.0 * std::f64::consts::PI * 0.004 * t).sin()
                + offset
        })
        .collect()
}

/// RR intervals on an irregular time axis covering a few minutes.
fn rr_series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec(0.6..1.2f64, 250..400).prop_map(|values| {
        let mut t = 0.0;
        let times = values
            .iter()
            .map(|v| {
                let at = t;
                t += v;
                at
            })
            .collect();
        (times, values)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edf_round_trip_within_one_step(
        records in 1..5usize,
        scale in 1e-2..1e4f64,
        offset in -1e3..1e3f64,
        seed in any::<u64>(),
    ) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..records * 100).map(|_| offset + scale * next()).collect();
        let b: Vec<f64> = (0..records * 10).map(|_| -offset + 0.1 * scale * next()).collect();
        let traces = vec![SignalTrace::new("ECG", 100.0, a), SignalTrace::new("THOR RES", 10.0, b)];
        let bytes = write_edf(&traces, 1.0).unwrap();
        let back = read_edf(&bytes).unwrap();
        prop_assert_eq!(back.len(), 2);
        let ns = 2;
        let base = 256 + ns * (16 + 80 + 8);
        for (k, (x, y)) in traces.iter().zip(&back).enumerate() {
            let (pmin, pmax) = (header_number(&bytes, base + 8 * k), header_number(&bytes, base + 8 * ns + 8 * k));
            let (dmin, dmax) = (header_number(&bytes, base + 16 * ns + 8 * k), header_number(&bytes, base + 24 * ns + 8 * k));
            let step = (pmax - pmin) / (dmax - dmin);
            prop_assert_eq!(x.samples.len(), y.samples.len());
            for (u, v) in x.samples.iter().zip(&y.samples) {
                prop_assert!((u - v).abs() <= step, "{} vs {} (step {})", u, v, step);
            }
        }
    }

    #[test]
    fn edf_parsing_is_total(bytes in prop::collection::vec(any::<u8>(), 0..2048)) {
        let _ = read_edf(&bytes);
    }

    #[test]
    fn edf_parsing_survives_mutations(
        edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..12),
        cut in any::<prop::sample::Index>(),
        truncate in any::<bool>(),
    ) {
        let traces = vec![
            SignalTrace::new("ECG", 100.0, (0..300).map(|i| (i as f64 * 0.1).sin()).collect()),
            SignalTrace::new("THOR RES", 10.0, (0..30).map(|i| i as f64).collect()),
        ];
        let mut bytes = write_edf(&traces, 1.0).unwrap();
        for (at, b) in &edits {
            let i = at.index(bytes.len());
            bytes[i] = *b;
        }
        if truncate {
            let n = cut.index(bytes.len());
            bytes.truncate(n);
        }
        let _ = read_edf(&bytes);
    }

    #[test]
    fn butterworth_is_linear(
        x in prop::collection::vec(-10.0..10.0f64, 200..600),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        shift in 0..200usize,
    ) {
        let y: Vec<f64> = x.iter().cycle().skip(shift).take(x.len()).map(|v| v * v - 3.0).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let f = |s: Vec<f64>| butterworth_lowpass(&SignalTrace::new("x", 25.0, s), 1.0).unwrap().samples;
        let (fx, fy, fc) = (f(x.clone()), f(y), f(combo));
        let scale = fc.iter().chain(&fx).fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..fc.len() {
            let lin = a * fx[i] + b * fy[i];
            prop_assert!((fc[i] - lin).abs() <= 1e-9 * scale, "sample {}: {} vs {}", i, fc[i], lin);
        }
    }

    #[test]
    fn baseline_removal_is_nearly_idempotent(
        f in 0.15..0.45f64,
        amp in 0.1..10.0f64,
        drift_ratio in 0.0..3.0f64,
        offset in -100.0..100.0f64,
        secs in 300..1800usize,
    ) {
        let signal = breathing(secs * 25, 25.0, (f, amp, drift_ratio * amp, offset));
        let trace = SignalTrace::new("THOR RES", 25.0, signal);
        let once = remove_baseline_wavelet(&trace).unwrap();
        let twice = remove_baseline_wavelet(&once).unwrap();
        let diff: Vec<f64> = once.samples.iter().zip(&twice.samples).map(|(a, b)| a - b).collect();
        prop_assert!(rms(&diff) <= 0.01 * rms(&once.samples), "{} vs {}", rms(&diff), rms(&once.samples));
    }

    #[test]
    fn accepted_rr_series_have_plausible_heart_rate(
        gaps in prop::collection::vec(20..500usize, 3..200),
        rate in prop::sample::select(vec![100.0, 128.0, 200.0, 256.0]),
    ) {
        let mut peaks = vec![10usize];
        for g in &gaps {
            peaks.push(peaks.last().unwrap() + g);
        }
        if let Ok(rr) = rr_from_peaks(&peaks, rate) {
            let usable: Vec<f64> = rr.usable().map(|(_, v)| v).collect();
            prop_assume!(!usable.is_empty());
            let hr = 60.0 / (usable.iter().sum::<f64>() / usable.len() as f64);
            prop_assert!((30.0..=200.0).contains(&hr), "heart rate {}", hr);
        }
    }

    #[test]
    fn stride_one_windows_partition_the_series(
        gaps in prop::collection::vec(40..300usize, 10..300),
        n_epochs in 1..12usize,
    ) {
        let mut peaks = vec![0usize];
        for g in &gaps {
            peaks.push(peaks.last().unwrap() + g);
        }
        let rr = rr_from_peaks(&peaks, 100.0).unwrap();
        let grid = build_epoch_grid(n_epochs as f64 * 30.0, 30.0).unwrap();
        let epoched = EpochedRr::new(&rr, &grid);
        let mut joined = Vec::new();
        for e in 0..grid.n_epochs {
            let w = grid.window(e, 1).unwrap();
            prop_assert_eq!(w.center, e);
            prop_assert_eq!(w.epochs(), e..e + 1);
            prop_assert_eq!(epoched.window_values(&w), epoched.epoch(e));
            joined.extend_from_slice(epoched.epoch(e));
        }
        let inside: Vec<f64> = rr.usable().filter(|&(t, _)| grid.epoch_of(t).is_some()).map(|(_, v)| v).collect();
        prop_assert_eq!(joined, inside);
    }

    #[test]
    fn novel_features_ignore_shifts_and_scale_linearly(
        epochs in prop::collection::vec(prop::collection::vec(0.4..1.6f64, 1..40), 3..12),
        mid_pick in any::<prop::sample::Index>(),
        c in -0.3..0.3f64,
        s in 0.1..10.0f64,
    ) {
        let mid = mid_pick.index(epochs.len());
        let shifted: Vec<Vec<f64>> = epochs.iter().map(|e| e.iter().map(|x| x + c).collect()).collect();
        let scaled: Vec<Vec<f64>> = epochs.iter().map(|e| e.iter().map(|x| x * s).collect()).collect();
        let eval = |v: &Vec<Vec<f64>>| {
            let refs: Vec<&[f64]> = v.iter().map(|e| e.as_slice()).collect();
            [novel_f1(&refs, mid).unwrap(), novel_f2(&refs, mid).unwrap(), novel_f3(&refs).unwrap()]
        };
        let base = eval(&epochs);
        let moved = eval(&shifted);
        let grown = eval(&scaled);
        for k in 0..3 {
            prop_assert!(close(base[k], moved[k], 1e-9, 1e-12), "f{} shift: {} vs {}", k + 1, base[k], moved[k]);
            prop_assert!(close(s * base[k], grown[k], 1e-9, 1e-12), "f{} scale: {} vs {}", k + 1, s * base[k], grown[k]);
        }
    }

    #[test]
    fn frequency_features_ignore_constant_offsets((times, values) in rr_series(), c in -0.3..0.5f64) {
        let base = rr_freq_features(&times, &values).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let moved = rr_freq_features(&times, &shifted).unwrap();
        for (k, (a, b)) in base.iter().zip(&moved).enumerate() {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!(close(*a, *b, 1e-7, 1e-12), "feature {}: {} vs {}", k, a, b),
                (None, None) => {}
                _ => prop_assert!(false, "feature {} availability changed", k),
            }
        }
    }

    #[test]
    fn cpc_is_scale_free_and_bounded(
        n in 256..1200usize,
        f in 0.15..0.35f64,
        phase in 0.0..6.0f64,
        noise_seed in any::<u64>(),
        sx in 1e-3..1e3f64,
        sy in 1e-3..1e3f64,
    ) {
        let mut state = noise_seed | 1;
        let mut noise = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let rate = 4.0;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / rate).sin() + 0.5 * noise())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / rate + phase).sin() + 0.5 * noise())
            .collect();
        let base = cpc_from_series(&x, &y, rate).unwrap();
        for &c in &base.coherence {
            prop_assert!((0.0..=1.0).contains(&c), "coherence {}", c);
        }
        let xs: Vec<f64> = x.iter().map(|v| v * sx).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * sy).collect();
        let scaled = cpc_from_series(&xs, &ys, rate).unwrap();
        let peak = base.cpc_index.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in base.cpc_index.iter().zip(&scaled.cpc_index) {
            prop_assert!((a - b).abs() <= 1e-9 * peak + 1e-15, "{} vs {}", a, b);
        }
        let bands = cpc_band_features(&base);
        let sums: f64 = bands[..3].iter().map(|v| v.unwrap()).sum();
        prop_assert!(sums <= base.total() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn normalization_inverts_on_observed_entries(
        n_epochs in 2..12usize,
        seed in any::<u64>(),
        missing_rate in 0.0..0.5f64,
    ) {
        let manifest = FeatureManifest::for_profile(Profile::Single);
        let k = manifest.len();
        let mut state = seed | 1;
        let mut unit = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let values: Vec<f64> = (0..n_epochs * k).map(|i| (i % k) as f64 + 100.0 * (unit() - 0.5)).collect();
        let missing: Vec<bool> = (0..n_epochs * k).map(|_| unit() < missing_rate).collect();
        let matrix = FeatureMatrix::from_parts(manifest, values.clone(), missing.clone(), vec![None; n_epochs]);
        let Ok(norm) = fit_normalization(&[&matrix]) else {
            return Ok(());
        };
        let z = norm.apply(&matrix).unwrap();
        prop_assert_eq!(z.missing_count(), 0);
        let back = norm.denormalize(&z).unwrap();
        for i in 0..values.len() {
            let j = i % k;
            if missing[i] || norm.constant[j] {
                prop_assert_eq!(z.values[i], 0.0);
            } else {
                prop_assert!(close(back.values[i], values[i], 1e-9, 1e-9), "{} vs {}", back.values[i], values[i]);
            }
        }
        // the input itself is untouched
        prop_assert_eq!(&matrix.values, &values);
        prop_assert_eq!(&matrix.missing, &missing);
    }

    #[test]
    fn ahi_classification_is_monotone(a in 0.0..120.0f64, b in 0.0..120.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(classify_ahi(lo).unwrap() <= classify_ahi(hi).unwrap());
    }

    #[test]
    fn merging_keeps_wake_and_rem_in_place(labels in six_stages(300)) {
        let merged = merge_stages(&Hypnogram::new(30.0, labels.clone()));
        prop_assert_eq!(merged.len(), labels.len());
        for (s, m) in labels.iter().zip(&merged.labels) {
            prop_assert_eq!(*s == SixStage::Wake, *m == Stage::Wake);
            prop_assert_eq!(*s == SixStage::Rem, *m == Stage::Rem);
        }
    }

    #[test]
    fn cohort_selection_is_a_fixed_point(
        subjects in prop::collection::vec((prop::option::of(0.0..40.0f64), prop::option::of(six_stages(120))), 1..20),
    ) {
        let candidates: Vec<CohortCandidate> = subjects
            .into_iter()
            .enumerate()
            .map(|(i, (ahi, labels))| CohortCandidate {
                subject_id: format!("s{i}"),
                ahi,
                hypnogram: labels.map(|l| Hypnogram::new(30.0, l)),
            })
            .collect();
        let thresholds = SleepThresholds::default();
        let first = select_cohort(&candidates, &thresholds);
        let kept: Vec<&String> = first.kept.iter().map(|(id, _)| id).collect();
        let ids: Vec<&String> = candidates.iter().map(|c| &c.subject_id).collect();
        prop_assert!(kept.iter().all(|id| ids.contains(id)));
        let again: Vec<CohortCandidate> = candidates.iter().filter(|c| kept.contains(&&c.subject_id)).cloned().collect();
        let second = select_cohort(&again, &thresholds);
        let kept_again: Vec<&String> = second.kept.iter().map(|(id, _)| id).collect();
        prop_assert_eq!(kept, kept_again);
    }

    #[test]
    fn split_is_a_deterministic_partition(n in 2..60usize, ratio in 0.05..0.95f64, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i:03}")).collect();
        let (train, test) = split_subjects(&ids, ratio, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        let mut all: Vec<&String> = train.iter().chain(&test).collect();
        all.sort();
        prop_assert_eq!(all, ids.iter().collect::<Vec<_>>());
        prop_assert_eq!(split_subjects(&ids, ratio, seed).unwrap(), (train, test));
    }

    #[test]
    fn kappa_matches_its_definition(pairs in (1..400usize).prop_flat_map(|n| (four_stages(n), four_stages(n)))) {
        let (pred, truth) = pairs;
        let cm = confusion_matrix(&pred, &truth).unwrap();
        let n = truth.len() as f64;
        prop_assert_eq!(cm.total() as usize, truth.len());
        let hits = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64;
        prop_assert!((accuracy(&cm).unwrap() - hits / n).abs() <= 1e-12);
        let po = (0..4).map(|i| cm.counts[i][i] as f64).sum::<f64>() / n;
        let pe = (0..4)
            .map(|i| {
                let row: u64 = cm.counts[i].iter().sum();
                let col: u64 = (0..4).map(|r| cm.counts[r][i]).sum();
                row as f64 * col as f64
            })
            .sum::<f64>()
            / (n * n);
        match cohens_kappa(&cm) {
            Ok(k) => prop_assert!((k - (po - pe) / (1.0 - pe)).abs() <= 1e-12),
            Err(_) => prop_assert!(pe >= 1.0 - 1e-12),
        }
    }

    #[test]
    fn hypnograms_round_trip_through_text(labels in six_stages(400)) {
        let h = Hypnogram::new(30.0, labels);
        let back = read_hypnogram(&write_hypnogram(&h), 30.0).unwrap();
        prop_assert_eq!(back, AnyHypnogram::Six(h));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn softmax_rows_sum_to_one(
        input in 1..6usize,
        hidden in 1..6usize,
        layers in 1..3usize,
        bidirectional in any::<bool>(),
        seed in any::<u64>(),
        features in prop::collection::vec(-1e3..1e3f64, 6..60),
    ) {
        let dims = BlstmDims { input, hidden, layers, classes: 4, bidirectional };
        let steps = features.len() / input;
        let params = init_params(seed, dims);
        let probs = forward(&params, &features[..steps * input]).unwrap();
        prop_assert_eq!(probs.len(), steps * 4);
        for row in probs.chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), hidden in 1..8usize) {
        let dims = BlstmDims { input: 3, hidden, layers: 2, classes: 4, bidirectional: true };
        let ck = Checkpoint::new("abc".into(), TrainConfig::default(), vec![1.0, 2.0, 0.5, 1.5], None, init_params(seed, dims));
        let mut bytes = Vec::new();
        ck.write(&mut bytes).unwrap();
        prop_assert_eq!(Checkpoint::read(bytes.as_slice(), "abc").unwrap(), ck);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn r_peaks_follow_a_shift(seed in 0..1000u64, k in 1..400usize) {
        let subject = generate_subject(seed, &SynthProfile::easy(), 20, "p").unwrap();
        let ecg = &subject.record.ecg;
        let base = detect_r_peaks(ecg).unwrap();
        let mut padded = vec![ecg.samples[0]; k];
        padded.extend_from_slice(&ecg.samples);
        let moved = detect_r_peaks(&ecg.with_samples(padded)).unwrap();
        // a beat cut by either end may or may not be found
        let margin = ecg.sample_rate_hz as usize;
        let interior = margin..ecg.samples.len() - margin;
        let expected: Vec<usize> = base.iter().filter(|p| interior.contains(p)).map(|p| p + k).collect();
        let found: Vec<usize> = moved.iter().filter(|&&p| p >= k && interior.contains(&(p - k))).copied().collect();
        prop_assert_eq!(found, expected);
    }

    #[test]
    fn synthetic_subjects_are_reproducible_and_sized(seed in any::<u64>(), n in 20..40usize) {
        let profile = SynthProfile::easy();
        let a = generate_subject(seed, &profile, n, "p").unwrap();
        let b = generate_subject(seed, &profile, n, "p").unwrap();
        prop_assert_eq!(&a.truth, &b.truth);
        prop_assert_eq!(&a.beat_times_s, &b.beat_times_s);
        prop_assert_eq!(&a.record.ecg.samples, &b.record.ecg.samples);
        prop_assert_eq!(&a.record.breath_chest.samples, &b.record.breath_chest.samples);
        prop_assert_eq!(a.truth.len(), n);
        let span = n as f64 * 30.0;
        let traces = [&a.record.ecg, &a.record.breath_chest, a.record.breath_abdomen.as_ref().unwrap()];
        let shortest = traces.iter().map(|t| t.duration_s()).fold(f64::INFINITY, f64::min);
        for t in traces {
            prop_assert!((t.duration_s() - span).abs() <= 30.0, "{} s for {} epochs", t.duration_s(), n);
        }
        prop_assert!(span <= shortest + 30.0);
    }
}

#[test]
fn manifest_groups_fill_152_columns() {
    for (profile, channels) in [(Profile::Single, 1), (Profile::TwoChannel, 2)] {
        let m = FeatureManifest::for_profile(profile);
        assert_eq!(m.len(), 152);
        let count = |s: Source| m.entries().iter().filter(|e| e.source == s).count();
        assert_eq!(count(Source::RrFreq), 21);
        assert_eq!(count(Source::BreathChest), 25);
        assert_eq!(count(Source::BreathAbdomen), 25 * (channels - 1));
        assert_eq!(count(Source::Cpc), 6);
        let rr_time =
            count(Source::RrHrv) + count(Source::RrStat) + count(Source::RrNonlinear) + count(Source::RrNovel);
        assert_eq!(rr_time, 152 - 21 - 25 * channels - 6);
        let mut names: Vec<&str> = m.names().collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 152);
    }
}

#[test]
fn importance_rejects_zero_repeats() {
    let dims = BlstmDims {
        input: 2,
        hidden: 2,
        layers: 1,
        classes: 4,
        bidirectional: true,
    };
    let seq = Sequence {
        features: vec![0.0; 6],
        labels: vec![Some(0), Some(1), Some(2)],
    };
    let names = vec!["a".to_string(), "b".to_string()];
    let r = permutation_importance(&init_params(1, dims), &[seq], &names, 0, 0);
    assert!(matches!(r, Err(EvalError::InvalidRepeats)));
}
