use std::collections::HashSet;

use frogscan::audio::{AudioClip, SampleWindow};
use frogscan::detector::{argmax, likelihood_ratio};
use frogscan::evaluation::{
    binary_metrics, kfold_budgeted_split, pick_operating_point, roc_one_vs_all,
    weighted_error_rate, LabeledSegment, ScoredEvent,
};
use frogscan::segmentation::{endpoint_frames, segment_audio, Segment, SegmenterConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATE: u32 = 44_100;

/// Quiet white noise with tone bursts at the given (start, length) seconds.
fn burst_signal(seed: u64, bursts: &[(f64, f64)], seconds: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * RATE as f64) as usize;
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * 1e-3).collect();
    for &(start, len) in bursts {
        let a = (start * RATE as f64) as usize;
        let b = (((start + len) * RATE as f64) as usize).min(n);
        for (i, v) in x[a..b].iter_mut().enumerate() {
            *v += 0.1 * (2.0 * std::f64::consts::PI * 2000.0 * i as f64 / RATE as f64).sin();
        }
    }
    x
}

fn segments_of(samples: Vec<f64>) -> Vec<Segment> {
    let clip = AudioClip::new(samples, RATE).unwrap();
    let window = SampleWindow {
        start: 0,
        end: clip.len(),
        label: "w".into(),
    };
    segment_audio(&clip, &window, &SegmenterConfig::default()).unwrap()
}

fn bursts() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.05f64..0.5, 0.1f64..0.4), 1..4).prop_map(|gaps| {
        let mut t = 0.2;
        gaps.into_iter()
            .map(|(gap, len)| {
                let start = t + gap;
                t = start + len + 0.3;
                (start, len)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn segments_ignore_overall_gain(seed in any::<u64>(), bursts in bursts(), exp in -3i32..4) {
        let x = burst_signal(seed, &bursts, 3.0);
        let gain = 2f64.powi(exp);
        let scaled: Vec<f64> = x.iter().map(|v| v * gain).collect();
        prop_assert_eq!(segments_of(x), segments_of(scaled));
    }
}

proptest! {
    #[test]
    fn endpoints_follow_a_level_shift(values in prop::collection::vec(-60i32..0, 1..200), level in -50i32..-5, shift in -40i32..40, k in 1usize..5) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let moved: Vec<f64> = values.iter().map(|&x| (x + shift) as f64).collect();
        prop_assert_eq!(
            endpoint_frames(&v, level as f64, k),
            endpoint_frames(&moved, (level + shift) as f64, k)
        );
    }

    #[test]
    fn endpoints_follow_a_time_shift(values in prop::collection::vec(-60i32..0, 1..200), pad in 0usize..50, k in 1usize..5) {
        let level = -30.0;
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let mut padded = vec![-80.0; pad];
        padded.extend(&v);
        let expected: Vec<(usize, usize)> =
            endpoint_frames(&v, level, k).into_iter().map(|(s, e)| (s + pad, e + pad)).collect();
        prop_assert_eq!(endpoint_frames(&padded, level, k), expected);
    }

    #[test]
    fn decisions_ignore_a_common_score_offset(scores in prop::collection::vec(-1e4f64..1e4, 2..12), offset in -1e4f64..1e4) {
        let moved: Vec<f64> = scores.iter().map(|s| s + offset).collect();
        prop_assert_eq!(argmax(&scores), argmax(&moved));
        for hyp in 0..scores.len() {
            let a = likelihood_ratio(&scores, hyp);
            let b = likelihood_ratio(&moved, hyp);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + scores.iter().fold(0.0f64, |m, s| m.max(s.abs()))));
        }
    }

    #[test]
    fn ratio_ignores_the_order_of_alternatives(scores in prop::collection::vec(-1e3f64..1e3, 3..10), rot in 1usize..9) {
        let hyp = scores[0];
        let mut others = scores[1..].to_vec();
        let r = rot % others.len();
        others.rotate_left(r);
        let mut reordered = vec![hyp];
        reordered.extend(others);
        prop_assert_eq!(likelihood_ratio(&scores, 0), likelihood_ratio(&reordered, 0));
    }

    #[test]
    fn roc_is_monotone_in_the_threshold(events in scored(), max_fpr in 0.0f64..1.0, extra in 0.0f64..0.5) {
        let curve = roc_one_vs_all(&events, 0).unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[0].threshold > w[1].threshold);
            prop_assert!(w[0].tpr <= w[1].tpr && w[0].fpr <= w[1].fpr);
        }
        let strict = pick_operating_point(&curve, max_fpr);
        let loose = pick_operating_point(&curve, (max_fpr + extra).min(1.0));
        prop_assert!(loose.threshold <= strict.threshold);
        prop_assert!(loose.tpr >= strict.tpr);
        prop_assert!(strict.fpr <= max_fpr);
    }

    #[test]
    fn auc_ignores_monotone_rescaling(events in scored()) {
        let warp = |x: f64| x * x * x + 7.0 * x - 3.0;
        let warped: Vec<ScoredEvent> = events.iter().map(|e| ScoredEvent { score: warp(e.score), ..*e }).collect();
        let a = roc_one_vs_all(&events, 0).unwrap();
        let b = roc_one_vs_all(&warped, 0).unwrap();
        prop_assert_eq!(a.auc, b.auc);
        let rates = |c: &frogscan::evaluation::RocCurve| c.points.iter().map(|p| (p.tpr, p.fpr)).collect::<Vec<_>>();
        prop_assert_eq!(rates(&a), rates(&b));
    }

    #[test]
    fn wer_ignores_duplicated_items(rows in confusion(), factors in prop::collection::vec(1usize..5, 6)) {
        let scaled: Vec<Vec<usize>> = rows
            .iter()
            .zip(&factors)
            .map(|(r, &f)| r.iter().map(|c| c * f).collect())
            .collect();
        let a = weighted_error_rate(&rows).unwrap();
        let b = weighted_error_rate(&scaled).unwrap();
        for (x, y) in a.per_species_error.iter().zip(&b.per_species_error) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((a.weighted_error_rate - b.weighted_error_rate).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_symmetric(bits in prop::collection::vec(prop::collection::vec((any::<bool>(), any::<bool>()), 5), 1..40)) {
        let predicted: Vec<Vec<bool>> = bits.iter().map(|r| r.iter().map(|b| b.0).collect()).collect();
        let truth: Vec<Vec<bool>> = bits.iter().map(|r| r.iter().map(|b| b.1).collect()).collect();
        let m = binary_metrics(&predicted, &truth).unwrap();
        let swapped = binary_metrics(&truth, &predicted).unwrap();
        prop_assert_eq!((m.tp, m.fp, m.tn, m.fn_), (swapped.tp, swapped.fn_, swapped.tn, swapped.fp));
        prop_assert_eq!(m.recall, swapped.precision);
        prop_assert_eq!(m.f1, swapped.f1);
        prop_assert_eq!(m.accuracy, swapped.accuracy);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-12,
            (a, b) => a.is_none() && b.is_none(),
        };
        prop_assert!(close(m.mcc, swapped.mcc));

        let flip = |v: &[Vec<bool>]| v.iter().map(|r| r.iter().map(|b| !b).collect()).collect::<Vec<Vec<bool>>>();
        let inverted = binary_metrics(&flip(&predicted), &flip(&truth)).unwrap();
        prop_assert_eq!((m.tp, m.fp), (inverted.tn, inverted.fn_));
        prop_assert_eq!(m.recall, inverted.specificity);
        prop_assert!(close(m.mcc, inverted.mcc));
        prop_assert_eq!(m.accuracy, inverted.accuracy);
    }

    #[test]
    fn folds_never_share_a_segment(
        durations in prop::collection::vec(prop::collection::vec(0.1f64..3.0, 4..30), 1..5),
        share in 0.05f64..0.5,
        folds in 1usize..8,
        seed in any::<u64>(),
    ) {
        let per_species: Vec<Vec<LabeledSegment>> = durations
            .iter()
            .enumerate()
            .map(|(s, ds)| {
                ds.iter()
                    .enumerate()
                    .map(|(i, &duration)| LabeledSegment { id: s * 1000 + i, duration })
                    .collect()
            })
            .collect();
        let smallest = durations.iter().map(|d| d.iter().sum::<f64>()).fold(f64::INFINITY, f64::min);
        let splits = kfold_budgeted_split(&per_species, smallest * share, folds, seed).unwrap();
        prop_assert_eq!(splits.len(), folds);
        for split in &splits {
            for (s, segs) in per_species.iter().enumerate() {
                let train: HashSet<usize> = split.training[s].iter().copied().collect();
                let valid: HashSet<usize> = split.validation[s].iter().copied().collect();
                prop_assert!(train.is_disjoint(&valid));
                prop_assert!(!train.is_empty() && !valid.is_empty());
                let all: HashSet<usize> = segs.iter().map(|g| g.id).collect();
                prop_assert_eq!(&train | &valid, all);
            }
        }
    }
}

/// Scores for class 0 with at least one positive and one negative.
fn scored() -> impl Strategy<Value = Vec<ScoredEvent>> {
    prop::collection::vec((-40i32..40, prop::option::of(0usize..3)), 2..60)
        .prop_map(|raw| {
            raw.into_iter()
                .map(|(score, true_class)| ScoredEvent {
                    score: score as f64 / 2.0,
                    true_class,
                    hyp_class: 0,
                })
                .collect::<Vec<_>>()
        })
        .prop_filter("both classes present", |ev| {
            ev.iter().any(|e| e.true_class == Some(0)) && ev.iter().any(|e| e.true_class != Some(0))
        })
}

fn confusion() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2usize..6).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0usize..20, n), n)
            .prop_filter("non-empty rows", |rows| {
                rows.iter().all(|r| r.iter().sum::<usize>() > 0)
            })
    })
}

#[test]
fn a_short_burst_is_found_at_every_gain() {
    let x = burst_signal(3, &[(1.0, 0.3)], 3.0);
    for exp in [-4, 0, 3] {
        let gain = 2f64.powi(exp);
        let segs = segments_of(x.iter().map(|v| v * gain).collect());
        assert_eq!(segs.len(), 1, "gain {gain}: {segs:?}");
    }
}
