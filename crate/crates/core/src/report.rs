//! CSV reports. Floats are written with fixed precision so repeated runs
//! produce identical bytes.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DetectionEvent, PresenceVector};
use crate::evaluation::{CvReport, FoldScore, RocCurve, RocPoint, ScoredEvent};
use crate::scalar::Real;
use crate::segmentation::Segment;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

fn seconds(samples: usize, sample_rate: u32) -> String {
    format!("{:.4}", samples as f64 / sample_rate as f64)
}

fn real(v: f64) -> String {
    format!("{v:.6}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Format(e.to_string()))
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub fn segments_csv<'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a Segment)>,
    sample_rate: u32,
) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record([
        "file",
        "window_id",
        "start_sample",
        "end_sample",
        "start_s",
        "end_s",
    ])?;
    for (file, s) in rows {
        w.write_record([
            file.to_string(),
            s.window_id.to_string(),
            s.start.to_string(),
            s.end.to_string(),
            seconds(s.start, sample_rate),
            seconds(s.end, sample_rate),
        ])?;
    }
    finish(w)
}

pub fn detections_csv<'a, T: Real + 'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a DetectionEvent<T>)>,
    sample_rate: u32,
) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record([
        "file",
        "window_id",
        "start_s",
        "end_s",
        "species_code",
        "lambda_score",
        "accepted",
    ])?;
    for (file, e) in rows {
        let (window, start, end) = match &e.segment {
            Some(s) => (
                s.window_id.to_string(),
                seconds(s.start, sample_rate),
                seconds(s.end, sample_rate),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            file.to_string(),
            window,
            start,
            end,
            e.species_code.clone(),
            real(e.score.as_f64()),
            u8::from(e.accepted).to_string(),
        ])?;
    }
    finish(w)
}

/// One row per window: presence bits in species order, then the species
/// whose presence rests on a single accepted segment.
pub fn presence_csv<'a>(
    codes: &[String],
    rows: impl IntoIterator<Item = (&'a str, &'a PresenceVector)>,
    sample_rate: u32,
) -> Result<String, ReportError> {
    let mut w = writer();
    let mut header = vec![
        "file".to_string(),
        "window".into(),
        "start_s".into(),
        "end_s".into(),
    ];
    header.extend(codes.iter().cloned());
    header.push("single_detection".into());
    w.write_record(&header)?;
    for (file, p) in rows {
        let mut rec = vec![
            file.to_string(),
            p.window.label.clone(),
            seconds(p.window.start, sample_rate),
            seconds(p.window.end, sample_rate),
        ];
        rec.extend(p.bits.iter().map(|&b| u8::from(b).to_string()));
        let singles: Vec<&str> = p
            .single_detections()
            .into_iter()
            .map(|k| codes[k].as_str())
            .collect();
        rec.push(singles.join(";"));
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn roc_csv(codes: &[String], curves: &[RocCurve]) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record(["species_code", "threshold", "tpr", "fpr"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                codes[c.class_index].clone(),
                real(p.threshold),
                real(p.tpr),
                real(p.fpr),
            ])?;
        }
    }
    finish(w)
}

pub fn thresholds_csv(
    codes: &[String],
    chosen: &[(RocCurve, RocPoint)],
) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record(["species_code", "threshold", "tpr", "fpr", "auc"])?;
    for (c, p) in chosen {
        w.write_record([
            codes[c.class_index].clone(),
            real(p.threshold),
            real(p.tpr),
            real(p.fpr),
            real(c.auc),
        ])?;
    }
    finish(w)
}

/// Per-fold, per-species error rates followed by summary rows.
pub fn wer_csv(report: &CvReport) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record(["fold", "species_code", "error_rate"])?;
    for f in &report.folds {
        for (code, e) in report.species_codes.iter().zip(&f.wer.per_species_error) {
            w.write_record([f.fold_id.to_string(), code.clone(), real(*e)])?;
        }
        w.write_record([
            f.fold_id.to_string(),
            "WER".into(),
            real(f.wer.weighted_error_rate),
        ])?;
    }
    let s = &report.summary;
    for (name, v) in [
        ("mean", s.mean),
        ("median", s.median),
        ("min", s.min),
        ("max", s.max),
    ] {
        w.write_record([name.to_string(), "WER".into(), real(v)])?;
    }
    finish(w)
}

/// Per-fold confusion matrices: rows are true species, columns decisions.
pub fn confusion_csv(report: &CvReport) -> Result<String, ReportError> {
    let mut w = writer();
    let mut header = vec!["fold".to_string(), "true_code".into()];
    header.extend(report.species_codes.iter().cloned());
    w.write_record(&header)?;
    for f in &report.folds {
        for (code, row) in report.species_codes.iter().zip(&f.confusion) {
            let mut rec = vec![f.fold_id.to_string(), code.clone()];
            rec.extend(row.iter().map(usize::to_string));
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    fold: usize,
    item: usize,
    true_code: String,
    hyp_code: String,
    lambda: f64,
}

/// Validation scores for every hypothesis; `true_code` is empty for
/// segments of no modelled species.
pub fn scores_csv(codes: &[String], scores: &[FoldScore]) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record(["fold", "item", "true_code", "hyp_code", "lambda"])?;
    for s in scores {
        w.write_record([
            s.fold_id.to_string(),
            s.item.to_string(),
            s.event
                .true_class
                .map(|c| codes[c].clone())
                .unwrap_or_default(),
            codes[s.event.hyp_class].clone(),
            real(s.event.score),
        ])?;
    }
    finish(w)
}

/// Reads a scores CSV back, returning the species codes in first-seen
/// hypothesis order unless `codes` fixes the order.
pub fn read_scores_csv(
    reader: impl Read,
    codes: Option<&[String]>,
) -> Result<(Vec<String>, Vec<FoldScore>), ReportError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let rows: Vec<ScoreRow> = rdr.deserialize().collect::<Result<_, _>>()?;
    let mut order: Vec<String> = codes.map(<[String]>::to_vec).unwrap_or_default();
    if codes.is_none() {
        for r in &rows {
            if !order.contains(&r.hyp_code) {
                order.push(r.hyp_code.clone());
            }
        }
    }
    let index = |code: &str| {
        order
            .iter()
            .position(|c| c == code)
            .ok_or_else(|| ReportError::Format(format!("unknown species code {code:?}")))
    };
    let scores = rows
        .iter()
        .map(|r| {
            Ok(FoldScore {
                fold_id: r.fold,
                item: r.item,
                event: ScoredEvent {
                    score: r.lambda,
                    true_class: if r.true_code.is_empty() {
                        None
                    } else {
                        Some(index(&r.true_code)?)
                    },
                    hyp_class: index(&r.hyp_code)?,
                },
            })
        })
        .collect::<Result<_, ReportError>>()?;
    Ok((order, scores))
}
