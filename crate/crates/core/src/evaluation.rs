//! Cross-validation, error rates, ROC analysis and presence-absence metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{argmax, likelihood_ratio, DetectorError, SpeciesModelSet};
use crate::features::FeatureMatrix;
use crate::gmm::{em_fit, GmmError, GmmModel, TrainingConfig};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("species {species}: {total:.2} s of data does not exceed the {budget:.2} s budget")]
    InsufficientData {
        species: usize,
        total: f64,
        budget: f64,
    },
    #[error("confusion row {0} is empty")]
    EmptyRow(usize),
    #[error("class {0} has no positive or no negative examples")]
    DegenerateClass(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// One labelled call as seen by the splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSegment {
    pub id: usize,
    pub duration: f64,
}

/// Segment ids per species for one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub training: Vec<Vec<usize>>,
    pub validation: Vec<Vec<usize>>,
}

fn derive_seed(seed: u64, fold: usize, species: usize) -> u64 {
    // splitmix64 finaliser over the packed inputs
    let mut z = seed
        ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (species as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random per-fold split with a training-duration budget.
///
/// Each fold shuffles every species' segments independently and moves whole
/// segments into training until the budget is reached; the segment that
/// crosses the budget is the last one taken. At least one segment per
/// species is always left for validation.
pub fn kfold_budgeted_split(
    per_species: &[Vec<LabeledSegment>],
    budget: f64,
    folds: usize,
    seed: u64,
) -> Result<Vec<FoldSplit>, EvalError> {
    if folds == 0 {
        return Err(EvalError::InvalidArgument("folds must be >= 1".into()));
    }
    if !(budget > 0.0) {
        return Err(EvalError::InvalidArgument("budget must be positive".into()));
    }
    for (s, segs) in per_species.iter().enumerate() {
        let total: f64 = segs.iter().map(|x| x.duration).sum();
        if total <= budget {
            return Err(EvalError::InsufficientData {
                species: s,
                total,
                budget,
            });
        }
        if segs.len() < 2 {
            return Err(EvalError::InvalidArgument(format!(
                "species {s} needs at least two segments to split"
            )));
        }
    }
    Ok((0..folds)
        .map(|fold_id| {
            let mut training = Vec::with_capacity(per_species.len());
            let mut validation = Vec::with_capacity(per_species.len());
            for (s, segs) in per_species.iter().enumerate() {
                let mut order = segs.clone();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
                    seed, fold_id, s,
                )));
                let mut acc = 0.0;
                let mut train = Vec::new();
                let mut valid = Vec::new();
                let last = order.len() - 1;
                for (i, seg) in order.into_iter().enumerate() {
                    if acc < budget && i < last {
                        acc += seg.duration;
                        train.push(seg.id);
                    } else {
                        valid.push(seg.id);
                    }
                }
                training.push(train);
                validation.push(valid);
            }
            FoldSplit {
                fold_id,
                training,
                validation,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub per_species_error: Vec<f64>,
    pub weighted_error_rate: f64,
}

/// Unweighted mean of per-species error rates (rows are true species).
pub fn weighted_error_rate(confusion: &[Vec<usize>]) -> Result<WerReport, EvalError> {
    let per_species_error = confusion
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                return Err(EvalError::EmptyRow(s));
            }
            Ok(1.0 - row.get(s).copied().unwrap_or(0) as f64 / total as f64)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if per_species_error.is_empty() {
        return Err(EvalError::InvalidArgument("empty confusion matrix".into()));
    }
    let weighted_error_rate =
        per_species_error.iter().sum::<f64>() / per_species_error.len() as f64;
    Ok(WerReport {
        per_species_error,
        weighted_error_rate,
    })
}

/// A likelihood-ratio score under one species hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvent {
    pub score: f64,
    /// `None` for segments of no modelled species.
    pub true_class: Option<usize>,
    pub hyp_class: usize,
}

/// One score per hypothesis: `Λ_k` for every model `k`.
pub fn scored_events<T: Real>(
    per_model_scores: &[T],
    true_class: Option<usize>,
) -> Vec<ScoredEvent> {
    (0..per_model_scores.len())
        .map(|k| ScoredEvent {
            score: likelihood_ratio(per_model_scores, k).as_f64(),
            true_class,
            hyp_class: k,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class_index: usize,
    /// Sorted by threshold, descending.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

impl RocCurve {
    /// Curve from explicit points (sorted here); AUC by trapezoids.
    pub fn from_points(class_index: usize, mut points: Vec<RocPoint>) -> Self {
        points.sort_by(|a, b| b.threshold.total_cmp(&a.threshold));
        let auc = trapezoid_auc(&points);
        Self {
            class_index,
            points,
            auc,
            positives: 0,
            negatives: 0,
        }
    }
}

fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// One-vs-all ROC for `class_index` over the scores hypothesising that class.
/// Positives are events whose true class matches; everything else is a
/// negative. Each distinct score is a threshold, with acceptance at `score >=
/// threshold`.
pub fn roc_one_vs_all(scores: &[ScoredEvent], class_index: usize) -> Result<RocCurve, EvalError> {
    let mut relevant: Vec<(f64, bool)> = scores
        .iter()
        .filter(|e| e.hyp_class == class_index)
        .map(|e| (e.score, e.true_class == Some(class_index)))
        .collect();
    if relevant.iter().any(|(s, _)| !s.is_finite()) {
        return Err(EvalError::InvalidArgument("non-finite score".into()));
    }
    let positives = relevant.iter().filter(|(_, p)| *p).count();
    let negatives = relevant.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::DegenerateClass(class_index));
    }
    relevant.sort_by(|a, b| b.0.total_cmp(&a.0));
    let max = relevant[0].0;
    let min = relevant[relevant.len() - 1].0;
    let eps = 1e-6 * (1.0 + max.abs().max(min.abs()));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: max + eps,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < relevant.len() {
        let t = relevant[i].0;
        while i < relevant.len() && relevant[i].0 == t {
            if relevant[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            tpr: tp as f64 / p,
            fpr: fp as f64 / n,
        });
    }
    points.push(RocPoint {
        threshold: min - eps,
        tpr: 1.0,
        fpr: 1.0,
    });
    let auc = trapezoid_auc(&points);
    Ok(RocCurve {
        class_index,
        points,
        auc,
        positives,
        negatives,
    })
}

/// Highest-TPR point with `FPR <= max_fpr`; ties go to the largest threshold.
pub fn pick_operating_point(curve: &RocCurve, max_fpr: f64) -> RocPoint {
    let mut best: Option<RocPoint> = None;
    for &pt in curve.points.iter().filter(|p| p.fpr <= max_fpr) {
        best = match best {
            None => Some(pt),
            Some(b) if pt.tpr > b.tpr || (pt.tpr == b.tpr && pt.threshold > b.threshold) => {
                Some(pt)
            }
            keep => keep,
        };
    }
    best.or_else(|| curve.points.first().copied())
        .unwrap_or(RocPoint {
            threshold: f64::INFINITY,
            tpr: 0.0,
            fpr: 0.0,
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub mcc: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

impl BinaryMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (tpf, fpf, tnf, fnf) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
        let recall = ratio(tpf, tpf + fnf);
        let precision = ratio(tpf, tpf + fpf);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) => ratio(2.0 * p * r, p + r),
            _ => None,
        };
        let mcc_den = ((tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf)).sqrt();
        Self {
            tp,
            fp,
            tn,
            fn_,
            recall,
            precision,
            f1,
            mcc: ratio(tpf * tnf - fpf * fnf, mcc_den),
            specificity: ratio(tnf, tnf + fpf),
            accuracy: ratio(tpf + tnf, tpf + fpf + tnf + fnf),
        }
    }
}

/// Pools every (window, species) decision into one confusion table.
pub fn binary_metrics(
    predicted: &[Vec<bool>],
    truth: &[Vec<bool>],
) -> Result<BinaryMetrics, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch(predicted.len(), truth.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, t) in predicted.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(EvalError::LengthMismatch(p.len(), t.len()));
        }
        for (&pv, &tv) in p.iter().zip(t) {
            match (pv, tv) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
    }
    Ok(BinaryMetrics::from_counts(tp, fp, tn, fn_))
}

/// A labelled call with its features, as used by cross-validation.
#[derive(Debug, Clone)]
pub struct LabeledFeatures<T> {
    pub species: usize,
    pub duration: f64,
    pub features: FeatureMatrix<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub budget_seconds: f64,
    pub folds: usize,
    pub seed: u64,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_id: usize,
    pub confusion: Vec<Vec<usize>>,
    pub wer: WerReport,
    pub training_seconds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerSummary {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl WerSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Self {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            min: v.first().copied().unwrap_or(f64::NAN),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Validation score of one item under one hypothesis, tagged with its fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold_id: usize,
    pub item: usize,
    pub event: ScoredEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub species_codes: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub summary: WerSummary,
    pub scores: Vec<FoldScore>,
}

/// Trains one model per species from the stacked features of `items`.
pub fn train_species_models<T: Real>(
    codes: &[String],
    items: &[&LabeledFeatures<T>],
    training: &TrainingConfig,
    fingerprint: &str,
    seed: u64,
) -> Result<Vec<GmmModel<T>>, EvalError> {
    codes
        .iter()
        .enumerate()
        .map(|(s, code)| {
            let mine: Vec<&LabeledFeatures<T>> =
                items.iter().copied().filter(|i| i.species == s).collect();
            let data = FeatureMatrix::stack(mine.iter().map(|i| &i.features));
            let cfg = TrainingConfig {
                rng_seed: derive_seed(seed, usize::MAX, s),
                ..training.clone()
            };
            let mut model = em_fit(&data, &cfg)?;
            model.species_code = code.clone();
            model.feature_spec_fingerprint = fingerprint.to_string();
            model.training_seconds = mine.iter().map(|i| i.duration).sum();
            Ok(model)
        })
        .collect()
}

/// Repeated random-subsampling cross-validation with a training budget.
/// Folds run on the caller's rayon pool and are reported in fold order.
pub fn cross_validate<T: Real>(
    codes: &[String],
    items: &[LabeledFeatures<T>],
    cfg: &CvConfig,
    fingerprint: &str,
) -> Result<CvReport, EvalError> {
    let s = codes.len();
    if s < 2 {
        return Err(EvalError::InvalidArgument(
            "need at least two species".into(),
        ));
    }
    if let Some(bad) = items.iter().find(|i| i.species >= s) {
        return Err(EvalError::InvalidArgument(format!(
            "item labelled with unknown species {}",
            bad.species
        )));
    }
    let per_species: Vec<Vec<LabeledSegment>> = (0..s)
        .map(|sp| {
            items
                .iter()
                .enumerate()
                .filter(|(_, it)| it.species == sp)
                .map(|(id, it)| LabeledSegment {
                    id,
                    duration: it.duration,
                })
                .collect()
        })
        .collect();
    let splits = kfold_budgeted_split(&per_species, cfg.budget_seconds, cfg.folds, cfg.seed)?;

    let results: Vec<(FoldResult, Vec<FoldScore>)> = splits
        .par_iter()
        .map(|split| {
            let train: Vec<&LabeledFeatures<T>> = split
                .training
                .iter()
                .flatten()
                .map(|&id| &items[id])
                .collect();
            let seed = derive_seed(cfg.seed, split.fold_id, usize::MAX);
            let models = train_species_models(codes, &train, &cfg.training, fingerprint, seed)?;
            let training_seconds = models.iter().map(|m| m.training_seconds).collect();
            let set = SpeciesModelSet::new(models, vec![0.0; s])?;
            let mut confusion = vec![vec![0usize; s]; s];
            let mut scores = Vec::new();
            for &id in split.validation.iter().flatten() {
                let item = &items[id];
                let per_model = set.scores(&item.features)?;
                confusion[item.species][argmax(&per_model)] += 1;
                scores.extend(
                    scored_events(&per_model, Some(item.species))
                        .into_iter()
                        .map(|event| FoldScore {
                            fold_id: split.fold_id,
                            item: id,
                            event,
                        }),
                );
            }
            let wer = weighted_error_rate(&confusion)?;
            Ok((
                FoldResult {
                    fold_id: split.fold_id,
                    confusion,
                    wer,
                    training_seconds,
                },
                scores,
            ))
        })
        .collect::<Result<_, EvalError>>()?;

    let mut folds = Vec::with_capacity(results.len());
    let mut scores = Vec::new();
    for (f, sc) in results {
        folds.push(f);
        scores.extend(sc);
    }
    let wers: Vec<f64> = folds.iter().map(|f| f.wer.weighted_error_rate).collect();
    Ok(CvReport {
        species_codes: codes.to_vec(),
        folds,
        summary: WerSummary::of(&wers),
        scores,
    })
}

/// Per-class thresholds at the operating point with `FPR <= max_fpr`.
pub fn threshold_vector(
    scores: &[ScoredEvent],
    classes: usize,
    max_fpr: f64,
) -> Result<Vec<(RocCurve, RocPoint)>, EvalError> {
    if !(0.0..=1.0).contains(&max_fpr) {
        return Err(EvalError::InvalidArgument(format!(
            "max_fpr {max_fpr} outside [0, 1]"
        )));
    }
    (0..classes)
        .map(|k| {
            let curve = roc_one_vs_all(scores, k)?;
            let point = pick_operating_point(&curve, max_fpr);
            Ok((curve, point))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segs(durations: &[f64]) -> Vec<LabeledSegment> {
        durations
            .iter()
            .enumerate()
            .map(|(id, &duration)| LabeledSegment { id, duration })
            .collect()
    }

    #[test]
    fn budgeted_split_on_table_one_sized_species() {
        // 44.7 s of calls, about 1.5 s each
        let mut d = vec![1.5; 29];
        d.push(1.2);
        let species = vec![segs(&d)];
        let splits = kfold_budgeted_split(&species, 12.0, 10, 7).unwrap();
        assert_eq!(splits.len(), 10);
        for s in &splits {
            let train: f64 = s.training[0].iter().map(|&i| d[i]).sum();
            let valid: f64 = s.validation[0].iter().map(|&i| d[i]).sum();
            assert!((12.0..13.5).contains(&train), "train {train}");
            assert!((valid - (44.7 - train)).abs() < 1e-9);
            assert!(s.training[0].iter().all(|i| !s.validation[0].contains(i)));
        }
        assert_ne!(splits[0].training, splits[1].training);
    }

    #[test]
    fn split_is_deterministic_and_checks_budget() {
        let species = vec![segs(&[1.0; 20]), segs(&[2.0; 10])];
        assert_eq!(
            kfold_budgeted_split(&species, 5.0, 1, 3).unwrap(),
            kfold_budgeted_split(&species, 5.0, 1, 3).unwrap()
        );
        assert!(matches!(
            kfold_budgeted_split(&species, 20.0, 1, 3),
            Err(EvalError::InsufficientData { species: 0, .. })
        ));
    }

    #[test]
    fn wer_examples() {
        let identity = vec![vec![5, 0, 0], vec![0, 3, 0], vec![0, 0, 9]];
        assert_eq!(
            weighted_error_rate(&identity).unwrap().weighted_error_rate,
            0.0
        );
        let r = weighted_error_rate(&[vec![9, 1], vec![2, 8]]).unwrap();
        assert!((r.per_species_error[0] - 0.1).abs() < 1e-12);
        assert!((r.per_species_error[1] - 0.2).abs() < 1e-12);
        assert!((r.weighted_error_rate - 0.15).abs() < 1e-12);
        // errors {0, 0.02, 0.01}
        let r = weighted_error_rate(&[vec![100, 0, 0], vec![1, 48, 1], vec![0, 1, 99]]).unwrap();
        assert!((r.per_species_error[1] - 0.04).abs() < 1e-12);
        let r = weighted_error_rate(&[vec![100, 0, 0], vec![2, 98, 0], vec![0, 1, 99]]).unwrap();
        assert!((r.weighted_error_rate - 0.01).abs() < 1e-12);
        assert_eq!(
            weighted_error_rate(&[vec![1, 0], vec![0, 0]]),
            Err(EvalError::EmptyRow(1))
        );
    }

    fn ev(score: f64, true_class: Option<usize>, hyp: usize) -> ScoredEvent {
        ScoredEvent {
            score,
            true_class,
            hyp_class: hyp,
        }
    }

    #[test]
    fn perfect_separation_auc() {
        let scores = vec![
            ev(2.0, Some(0), 0),
            ev(3.0, Some(0), 0),
            ev(0.0, Some(1), 0),
            ev(1.0, None, 0),
        ];
        let c = roc_one_vs_all(&scores, 0).unwrap();
        assert_eq!(c.auc, 1.0);
        let p = pick_operating_point(&c, 0.05);
        assert_eq!((p.tpr, p.fpr, p.threshold), (1.0, 0.0, 2.0));
        for w in c.points.windows(2) {
            assert!(w[0].threshold > w[1].threshold);
            assert!(w[0].tpr <= w[1].tpr && w[0].fpr <= w[1].fpr);
        }
    }

    #[test]
    fn tied_scores_pass_through_corner() {
        let c = roc_one_vs_all(&[ev(1.0, Some(0), 0), ev(1.0, Some(1), 0)], 0).unwrap();
        assert!(c
            .points
            .iter()
            .any(|p| p.threshold == 1.0 && p.tpr == 1.0 && p.fpr == 1.0));
        assert!((c.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_classes_are_reported() {
        assert_eq!(
            roc_one_vs_all(&[ev(1.0, Some(0), 0)], 0).unwrap_err(),
            EvalError::DegenerateClass(0)
        );
        assert_eq!(
            roc_one_vs_all(&[ev(1.0, Some(1), 1), ev(2.0, Some(0), 1)], 0).unwrap_err(),
            EvalError::DegenerateClass(0)
        );
    }

    #[test]
    fn operating_point_hand_trace() {
        let pts = vec![
            RocPoint {
                threshold: 3.0,
                tpr: 0.6,
                fpr: 0.01,
            },
            RocPoint {
                threshold: 2.0,
                tpr: 0.8,
                fpr: 0.04,
            },
            RocPoint {
                threshold: 1.0,
                tpr: 0.9,
                fpr: 0.2,
            },
        ];
        let c = RocCurve::from_points(0, pts);
        assert_eq!(pick_operating_point(&c, 0.05).threshold, 2.0);
        assert_eq!(pick_operating_point(&c, 1.0).threshold, 1.0);
        assert_eq!(pick_operating_point(&c, 0.0).threshold, 3.0);
    }

    #[test]
    fn full_fpr_budget_reaches_full_recall() {
        let scores = vec![
            ev(0.0, Some(0), 0),
            ev(1.0, Some(2), 0),
            ev(2.0, Some(1), 0),
        ];
        let c = roc_one_vs_all(&scores, 0).unwrap();
        let p = pick_operating_point(&c, 1.0);
        assert_eq!((p.tpr, p.fpr), (1.0, 1.0));
        assert_eq!(p.threshold, 0.0);
    }

    #[test]
    fn table_three_counts() {
        let m = BinaryMetrics::from_counts(42, 0, 132, 6);
        assert_eq!(m.recall, Some(0.875));
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.specificity, Some(1.0));
        assert!((m.f1.unwrap() - 0.9333).abs() < 5e-4);
        assert!((m.mcc.unwrap() - 0.9149).abs() < 5e-4);
        assert!((m.accuracy.unwrap() - 0.9667).abs() < 5e-4);
    }

    #[test]
    fn metrics_edge_cases() {
        let truth = vec![vec![true, false, true], vec![false, false, true]];
        let m = binary_metrics(&truth, &truth).unwrap();
        assert_eq!(
            (m.recall, m.precision, m.accuracy, m.mcc),
            (Some(1.0), Some(1.0), Some(1.0), Some(1.0))
        );
        let none = vec![vec![false; 3]; 2];
        let m = binary_metrics(&none, &none).unwrap();
        assert_eq!(
            (m.precision, m.recall, m.mcc, m.f1),
            (None, None, None, None)
        );
        assert_eq!(m.accuracy, Some(1.0));
        assert!(matches!(
            binary_metrics(&none, &truth[..1]),
            Err(EvalError::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn wer_summary_statistics() {
        let s = WerSummary::of(&[0.02, 0.0, 0.01, 0.03]);
        assert!((s.mean - 0.015).abs() < 1e-12);
        assert!((s.median - 0.015).abs() < 1e-12);
        assert_eq!((s.min, s.max), (0.0, 0.03));
    }
}
