use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use frogscan::audio::{read_wav, windows_from_cues, write_wav, AudioClip, CuePoint, WavFile};
use frogscan::config::{ConfigError, ToolConfig};
use frogscan::detector::{scan_window, DetectionEvent, PresenceVector, SpeciesModelSet};
use frogscan::evaluation::{
    cross_validate, threshold_vector, CvConfig, EvalError, LabeledFeatures,
};
use frogscan::features::{FeatureError, FeatureExtractor};
use frogscan::fixtures::{
    roster, synthesize_scene, NoiseKind, NoiseSpec, SceneScript, ScriptEvent,
};
use frogscan::gmm::{em_fit, GmmModel, TrainingConfig};
use frogscan::report::{self, ReportError};
use frogscan::segmentation::{segment_audio, Segment};
use frogscan::store::{load_model_store, save_model_store, StoreError};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Cli, CliError, Command, SynthCommand};

type Result<T> = std::result::Result<T, CliError>;

/// Training time below which identification is known to degrade.
const MIN_TRAINING_SECONDS: f64 = 12.0;

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn data<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_audio(path: &Path) -> Result<WavFile<f64>> {
    let mut wav =
        read_wav::<f64>(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    wav.clip = wav.clip.with_source_path(path.display().to_string());
    Ok(wav)
}

/// Joins CSV documents that share a header line.
fn concat_csv(header: &str, parts: &[String]) -> String {
    let mut out = String::from(header);
    for p in parts {
        out.extend(p.split_inclusive('\n').skip(1));
    }
    out
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ToolConfig::load(path)?,
        None => ToolConfig::default(),
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let ctx = Context { cli: &cli, config };
    match &cli.command {
        Command::Segment { audio, out } => ctx.segment(audio, out.as_deref()),
        Command::Train { labels, out } => ctx.train(labels, out.as_deref()),
        Command::Scan {
            audio,
            models,
            out_dir,
        } => ctx.scan(audio, models.as_deref(), out_dir.as_deref()),
        Command::Evaluate { labels, out_dir } => ctx.evaluate(labels, out_dir.as_deref()),
        Command::Roc {
            scores,
            max_fpr,
            out_dir,
        } => ctx.roc(scores, *max_fpr, out_dir.as_deref()),
        Command::Synth { what } => ctx.synth(what),
    }
}

struct Context<'a> {
    cli: &'a Cli,
    config: ToolConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelRow {
    file: PathBuf,
    species_code: String,
    start_s: f64,
    end_s: f64,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or_else(|| {
            let seed = rand::random::<u64>();
            eprintln!("seed: {seed}");
            seed
        })
    }

    fn out_dir(&self, arg: Option<&Path>) -> PathBuf {
        arg.map(Path::to_path_buf)
            .or_else(|| self.config.paths.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn windows(&self, wav: &WavFile<f64>) -> Vec<frogscan::audio::SampleWindow> {
        windows_from_cues(
            &wav.clip,
            &wav.cues,
            self.config.detection.default_window_seconds,
        )
    }

    fn segment(&self, audio: &[PathBuf], out: Option<&Path>) -> Result<()> {
        const HEADER: &str = "file,window_id,start_sample,end_sample,start_s,end_s\n";
        let results: Vec<Result<String>> = audio
            .par_iter()
            .map(|path| {
                let wav = load_audio(path)?;
                let mut segments: Vec<Segment> = Vec::new();
                for w in self.windows(&wav) {
                    segments.extend(
                        segment_audio(&wav.clip, &w, &self.config.segmenter)
                            .map_err(data(&path.display().to_string()))?,
                    );
                }
                let name = path.display().to_string();
                Ok(report::segments_csv(
                    segments.iter().map(|s| (name.as_str(), s)),
                    wav.clip.sample_rate(),
                )?)
            })
            .collect();
        let mut parts = Vec::new();
        let mut worst: Option<CliError> = None;
        for r in results {
            match r {
                Ok(p) => parts.push(p),
                Err(e) => {
                    eprintln!("error: {}", e_message(&e));
                    if worst.as_ref().is_none_or(|w| exit_rank(&e) > exit_rank(w)) {
                        worst = Some(e);
                    }
                }
            }
        }
        let text = concat_csv(HEADER, &parts);
        match out {
            Some(p) => write_text(p, &text)?,
            None => print!("{text}"),
        }
        match worst {
            Some(CliError::Io(_)) => Err(CliError::Io("some inputs could not be read".into())),
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Labelled features grouped in species order.
    fn labelled(&self, labels: &Path) -> Result<(Vec<String>, Vec<LabeledFeatures<f64>>)> {
        let text = read_text(labels)?;
        let rows: Vec<LabelRow> = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(data(&labels.display().to_string()))?;
        if rows.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no labelled segments",
                labels.display()
            )));
        }
        let mut codes = self.config.species.clone();
        if codes.is_empty() {
            for r in &rows {
                if !codes.contains(&r.species_code) {
                    codes.push(r.species_code.clone());
                }
            }
        }
        let base = labels.parent().unwrap_or(Path::new(""));
        let mut clips: HashMap<PathBuf, AudioClip<f64>> = HashMap::new();
        for r in &rows {
            let path = base.join(&r.file);
            if let Entry::Vacant(slot) = clips.entry(path) {
                let clip = load_audio(slot.key())?.clip;
                slot.insert(clip);
            }
        }
        let mut extractors: HashMap<u32, FeatureExtractor<f64>> = HashMap::new();
        let mut items = Vec::with_capacity(rows.len());
        for r in &rows {
            let species = codes
                .iter()
                .position(|c| *c == r.species_code)
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "species {} is not in the configured species list",
                        r.species_code
                    ))
                })?;
            let clip = &clips[&base.join(&r.file)];
            let rate = clip.sample_rate();
            if let Entry::Vacant(slot) = extractors.entry(rate) {
                slot.insert(
                    FeatureExtractor::new(&self.config.features, rate)
                        .map_err(data("feature settings"))?,
                );
            }
            let to_sample = |s: f64| ((s * rate as f64).round().max(0.0) as usize).min(clip.len());
            let seg = Segment {
                start: to_sample(r.start_s),
                end: to_sample(r.end_s),
                window_id: 0,
            };
            match extractors[&rate].extract_segment(clip, &seg) {
                Ok(features) => items.push(LabeledFeatures {
                    species,
                    duration: (seg.end - seg.start) as f64 / rate as f64,
                    features,
                }),
                Err(
                    e @ (FeatureError::SegmentTooShort { .. }
                    | FeatureError::SegmentOutOfRange { .. }),
                ) => {
                    warn!(
                        "{} {:.3}-{:.3} s skipped: {e}",
                        r.file.display(),
                        r.start_s,
                        r.end_s
                    )
                }
                Err(e) => return Err(CliError::Data(e.to_string())),
            }
        }
        Ok((codes, items))
    }

    fn train(&self, labels: &Path, out: Option<&Path>) -> Result<()> {
        let out = out
            .map(Path::to_path_buf)
            .or_else(|| self.config.paths.model_store.clone())
            .unwrap_or_else(|| PathBuf::from("models"));
        let seed = self.seed();
        let (codes, items) = self.labelled(labels)?;
        let fingerprint = self.config.features.fingerprint();
        let fitted: Vec<Option<GmmModel<f64>>> = codes
            .par_iter()
            .enumerate()
            .map(|(s, code)| {
                let mine: Vec<&LabeledFeatures<f64>> = items.iter().filter(|i| i.species == s).collect();
                let seconds: f64 = mine.iter().map(|i| i.duration).sum();
                if seconds < MIN_TRAINING_SECONDS {
                    warn!("species {code}: only {seconds:.1} s of training audio; at least {MIN_TRAINING_SECONDS} s is recommended");
                }
                let data = frogscan::features::FeatureMatrix::stack(mine.iter().map(|i| &i.features));
                let cfg = TrainingConfig {
                    rng_seed: seed.wrapping_add(s as u64),
                    ..self.config.training.clone()
                };
                match em_fit(&data, &cfg) {
                    Ok(mut m) => {
                        m.species_code = code.clone();
                        m.feature_spec_fingerprint = fingerprint.clone();
                        m.training_seconds = seconds;
                        Some(m)
                    }
                    Err(e) => {
                        warn!("species {code} skipped: {e}");
                        None
                    }
                }
            })
            .collect();
        let models: Vec<GmmModel<f64>> = fitted.into_iter().flatten().collect();
        if models.is_empty() {
            return Err(CliError::Data("no species could be trained".into()));
        }
        save_model_store(&out, &models, &self.config.features)?;
        println!(
            "trained {} of {} species into {}",
            models.len(),
            codes.len(),
            out.display()
        );
        Ok(())
    }

    fn thresholds(&self, n: usize) -> Result<Vec<f64>> {
        let t = match &self.cli.thresholds {
            Some(t) => t.clone(),
            None => self.config.thresholds_for(n),
        };
        if t.len() != n {
            return Err(CliError::Usage(format!(
                "{} thresholds given for {n} species",
                t.len()
            )));
        }
        Ok(t)
    }

    fn scan(&self, audio: &[PathBuf], models: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
        let store = models
            .map(Path::to_path_buf)
            .or_else(|| self.config.paths.model_store.clone())
            .ok_or_else(|| {
                CliError::Usage("no model store given (--models or paths.model_store)".into())
            })?;
        let (manifest, models) = load_model_store::<f64>(&store)?;
        let expected = self.config.features.fingerprint();
        if manifest.feature_spec_fingerprint != expected {
            return Err(CliError::Data(format!(
                "feature fingerprint mismatch: models were trained with {}, the configuration gives {expected}",
                manifest.feature_spec_fingerprint
            )));
        }
        if !self.config.species.is_empty() && self.config.species != manifest.species {
            return Err(CliError::Data(format!(
                "configured species {:?} differ from the model store's {:?}",
                self.config.species, manifest.species
            )));
        }
        let thresholds = self.thresholds(models.len())?;
        let set = SpeciesModelSet::new(models, thresholds).map_err(data("model store"))?;
        let codes = set.codes();

        type FileScan = (String, u32, Vec<PresenceVector>, Vec<DetectionEvent<f64>>);
        let results: Vec<Result<FileScan>> = audio
            .par_iter()
            .map(|path| {
                let wav = load_audio(path)?;
                let name = path.display().to_string();
                let rate = wav.clip.sample_rate();
                let ex =
                    FeatureExtractor::new(&manifest.feature_spec, rate).map_err(data(&name))?;
                let mut presence = Vec::new();
                let mut events = Vec::new();
                for w in self.windows(&wav) {
                    let scan = scan_window(&wav.clip, &w, &set, &self.config.segmenter, &ex)
                        .map_err(data(&name))?;
                    presence.push(scan.presence);
                    events.extend(scan.events);
                }
                Ok((name, rate, presence, events))
            })
            .collect();

        let mut presence_parts = Vec::new();
        let mut detection_parts = Vec::new();
        let (mut files, mut windows, mut accepted, mut rejected) = (0, 0, 0, 0);
        let mut failure: Option<CliError> = None;
        for r in results {
            match r {
                Ok((name, rate, presence, events)) => {
                    files += 1;
                    windows += presence.len();
                    accepted += events.iter().filter(|e| e.accepted).count();
                    rejected += events.iter().filter(|e| !e.accepted).count();
                    presence_parts.push(report::presence_csv(
                        &codes,
                        presence.iter().map(|p| (name.as_str(), p)),
                        rate,
                    )?);
                    detection_parts.push(report::detections_csv(
                        events.iter().map(|e| (name.as_str(), e)),
                        rate,
                    )?);
                }
                Err(e) => {
                    eprintln!("error: {}", e_message(&e));
                    if failure
                        .as_ref()
                        .is_none_or(|w| exit_rank(&e) > exit_rank(w))
                    {
                        failure = Some(e);
                    }
                }
            }
        }
        let dir = self.out_dir(out_dir);
        let presence_header = report::presence_csv(&codes, [], 1)?;
        let detection_header = report::detections_csv::<f64>([], 1)?;
        write_text(
            &dir.join("presence.csv"),
            &concat_csv(&presence_header, &presence_parts),
        )?;
        write_text(
            &dir.join("detections.csv"),
            &concat_csv(&detection_header, &detection_parts),
        )?;
        println!(
            "scanned {files} file(s), {windows} window(s): {} segment(s), {accepted} accepted, {rejected} rejected",
            accepted + rejected
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn evaluate(&self, labels: &Path, out_dir: Option<&Path>) -> Result<()> {
        let seed = self.seed();
        let (codes, items) = self.labelled(labels)?;
        let cfg = CvConfig {
            budget_seconds: self.config.evaluation.budget_seconds,
            folds: self.config.evaluation.folds,
            seed,
            training: self.config.training.clone(),
        };
        let report = cross_validate(&codes, &items, &cfg, &self.config.features.fingerprint())?;
        let dir = self.out_dir(out_dir);
        write_text(&dir.join("wer.csv"), &report::wer_csv(&report)?)?;
        write_text(&dir.join("confusion.csv"), &report::confusion_csv(&report)?)?;
        write_text(
            &dir.join("scores.csv"),
            &report::scores_csv(&codes, &report.scores)?,
        )?;
        let s = &report.summary;
        println!(
            "WER over {} folds: mean {:.4}, median {:.4}, min {:.4}, max {:.4}",
            report.folds.len(),
            s.mean,
            s.median,
            s.min,
            s.max
        );
        Ok(())
    }

    fn roc(&self, scores: &Path, max_fpr: Option<f64>, out_dir: Option<&Path>) -> Result<()> {
        let max_fpr = max_fpr.unwrap_or(self.config.detection.max_fpr);
        if !(0.0..=1.0).contains(&max_fpr) {
            return Err(CliError::Usage(format!(
                "--max-fpr {max_fpr} outside [0, 1]"
            )));
        }
        let text = read_text(scores)?;
        let fixed = (!self.config.species.is_empty()).then_some(self.config.species.as_slice());
        let (codes, scored) = report::read_scores_csv(text.as_bytes(), fixed)?;
        let events: Vec<_> = scored.iter().map(|s| s.event).collect();
        let chosen = threshold_vector(&events, codes.len(), max_fpr).map_err(|e| match e {
            EvalError::DegenerateClass(k) => CliError::Data(format!(
                "species {} has no positive or no negative validation scores",
                codes[k]
            )),
            other => other.into(),
        })?;
        let dir = self.out_dir(out_dir);
        let curves: Vec<_> = chosen.iter().map(|(c, _)| c.clone()).collect();
        write_text(&dir.join("roc.csv"), &report::roc_csv(&codes, &curves)?)?;
        write_text(
            &dir.join("thresholds.csv"),
            &report::thresholds_csv(&codes, &chosen)?,
        )?;
        let vector: Vec<String> = chosen
            .iter()
            .map(|(_, p)| format!("{:.6}", p.threshold))
            .collect();
        println!("species: {}", codes.join(","));
        println!(
            "suggested thresholds (max FPR {max_fpr}): {}",
            vector.join(",")
        );
        Ok(())
    }

    fn synth(&self, what: &SynthCommand) -> Result<()> {
        let seed = self.seed();
        match what {
            SynthCommand::Scene {
                script,
                out,
                truth,
                sample_rate,
            } => {
                let text = read_text(script)?;
                let script: SceneScript =
                    serde_json::from_str(&text).map_err(data(&script.display().to_string()))?;
                let (clip, events) =
                    synthesize_scene::<f64>(&script, *sample_rate, seed).map_err(data("scene"))?;
                if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)
                        .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
                }
                write_wav(out, &clip, &[]).map_err(|e| CliError::Io(e.to_string()))?;
                if let Some(truth) = truth {
                    let name = out
                        .file_name()
                        .map(PathBuf::from)
                        .unwrap_or_else(|| out.clone());
                    let rows = events.iter().map(|e| LabelRow {
                        file: name.clone(),
                        species_code: e.species.clone(),
                        start_s: e.start as f64 / *sample_rate as f64,
                        end_s: e.end as f64 / *sample_rate as f64,
                    });
                    write_text(truth, &labels_csv(rows)?)?;
                }
                info!("rendered {} event(s) into {}", events.len(), out.display());
                Ok(())
            }
            SynthCommand::Corpus {
                out_dir,
                species,
                seconds,
                snr_db,
                sample_rate,
            } => {
                fs::create_dir_all(out_dir)
                    .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
                let catalog = roster();
                let mut rows = Vec::new();
                for (i, code) in species.iter().enumerate() {
                    let sp = catalog
                        .iter()
                        .find(|s| &s.code == code)
                        .ok_or_else(|| CliError::Usage(format!("unknown species code {code}")))?;
                    let step = sp.call_duration() + 0.7;
                    let count = (seconds / sp.call_duration()).ceil().max(1.0) as usize;
                    let script = SceneScript {
                        duration: 0.5 + count as f64 * step,
                        events: (0..count)
                            .map(|k| ScriptEvent {
                                time: 0.5 + k as f64 * step,
                                species: code.clone(),
                                snr_db: *snr_db,
                            })
                            .collect(),
                        noise: NoiseSpec {
                            kind: NoiseKind::Pink,
                            level_db: -40.0,
                        },
                        species: vec![],
                    };
                    let (clip, events) =
                        synthesize_scene::<f64>(&script, *sample_rate, seed.wrapping_add(i as u64))
                            .map_err(data("corpus"))?;
                    let file = PathBuf::from(format!("{code}.wav"));
                    let cues: [CuePoint; 0] = [];
                    write_wav(out_dir.join(&file), &clip, &cues)
                        .map_err(|e| CliError::Io(e.to_string()))?;
                    rows.extend(events.iter().map(|e| LabelRow {
                        file: file.clone(),
                        species_code: code.clone(),
                        start_s: e.start as f64 / *sample_rate as f64,
                        end_s: e.end as f64 / *sample_rate as f64,
                    }));
                }
                write_text(&out_dir.join("labels.csv"), &labels_csv(rows.into_iter())?)?;
                println!("wrote {} species to {}", species.len(), out_dir.display());
                Ok(())
            }
        }
    }
}

fn labels_csv(rows: impl Iterator<Item = LabelRow>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Data(e.to_string()))
}

fn e_message(e: &CliError) -> &str {
    match e {
        CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) => m,
    }
}

fn exit_rank(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => 1,
        CliError::Io(_) => 2,
        CliError::Data(_) => 3,
    }
}
