use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ppgcell::aggregate::{evaluate as evaluate_verdicts, verdicts_by_face, EvaluationReport, VerdictRecord};
use ppgcell::cell::CELL_EXTENSION;
use ppgcell::classify::{load_model, predict_many, save_model, train as train_model};
use ppgcell::fingerprint::{finalize_fingerprint, ResidualAccumulator};
use ppgcell::ingest::{enumerate_windows, load_manifest, split_train_test, LandmarkSet};
use ppgcell::pipeline::{dump_dir_for, extract_video, try_extract_window, video_residual, DiskVideo, VideoSource};
use ppgcell::synth::{generate_dataset, SynthDatasetConfig};
use ppgcell::{CellMode, CellPrediction, DatasetManifest, Error, PipelineConfig, PpgCell, Result, VideoEntry, VideoVerdict};

use crate::{InputArgs, Split};

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e)),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
                _ => Ok(()),
            }
        }
    }
}

fn select(manifest: &DatasetManifest, split: Split, fraction: f64) -> Result<DatasetManifest> {
    match split {
        Split::All => Ok(manifest.clone()),
        Split::Train => Ok(split_train_test(manifest, fraction)?.0),
        Split::Test => Ok(split_train_test(manifest, fraction)?.1),
    }
}

#[derive(Debug, Default, Serialize)]
struct SkipRecord {
    video: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    face_id: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_start: Option<usize>,
    reason: String,
}

#[derive(Debug, Serialize)]
struct FailureRecord {
    video: String,
    kind: &'static str,
    message: String,
}

#[derive(Debug, Default)]
struct VideoOutcome {
    class_label: String,
    new_cells: usize,
    existing_cells: usize,
    skipped: Vec<SkipRecord>,
}

#[derive(Debug, Serialize)]
struct ExtractSummary {
    omega: usize,
    psd_enabled: bool,
    videos: usize,
    cells_total: usize,
    cells_new: usize,
    cells_existing: usize,
    cells_per_class: BTreeMap<String, usize>,
    skipped: Vec<SkipRecord>,
    failed: Vec<FailureRecord>,
}

fn existing_cell(path: &Path, omega: usize, mode: CellMode) -> bool {
    path.is_file()
        && PpgCell::read(path).is_ok_and(|c| c.omega == omega && (c.mode() == mode || mode == CellMode::RawOnly))
}

fn extract_one(video: &VideoEntry, cfg: &PipelineConfig, out: &Path, png: bool, dump: Option<&Path>) -> Result<VideoOutcome> {
    let src = DiskVideo::open(video)?;
    let mut outcome = VideoOutcome {
        class_label: video.class_label.clone(),
        ..VideoOutcome::default()
    };
    let windows = enumerate_windows(src.landmarks(), src.frame_count(), cfg.omega, cfg.min_confidence)?;
    if windows.is_empty() {
        outcome.skipped.push(SkipRecord {
            video: video.id.clone(),
            reason: format!("no run of {} uninterrupted face frames", cfg.omega),
            ..SkipRecord::default()
        });
        return Ok(outcome);
    }
    let dump_dir = dump_dir_for(dump, &video.id)?;
    let mode = cfg.cell_mode();
    for w in &windows {
        let path = out.join(PpgCell::file_name(&video.id, w.face_id, w.start, cfg.omega));
        if existing_cell(&path, cfg.omega, mode) {
            outcome.existing_cells += 1;
            continue;
        }
        match try_extract_window(&src, w, cfg, dump_dir.as_deref())? {
            Ok(signals) => {
                let cell = signals.cell(&video.id, Some(&video.class_label), mode)?;
                cell.write(&path)?;
                if png {
                    cell.write_png(&path.with_extension("png"))?;
                }
                outcome.new_cells += 1;
            }
            Err(reason) => outcome.skipped.push(SkipRecord {
                video: video.id.clone(),
                face_id: Some(w.face_id),
                window_start: Some(w.start),
                reason,
            }),
        }
    }
    Ok(outcome)
}

pub fn extract(cfg: &PipelineConfig, manifest: &Path, out: &Path, png: bool, dump: Option<&Path>) -> Result<()> {
    let manifest = load_manifest(manifest)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let results: Vec<(String, Result<VideoOutcome>)> = manifest
        .videos
        .par_iter()
        .map(|v| (v.id.clone(), extract_one(v, cfg, out, png, dump)))
        .collect();
    let mut summary = ExtractSummary {
        omega: cfg.omega,
        psd_enabled: cfg.psd_enabled,
        videos: manifest.videos.len(),
        cells_total: 0,
        cells_new: 0,
        cells_existing: 0,
        cells_per_class: manifest.classes.iter().map(|c| (c.clone(), 0)).collect(),
        skipped: Vec::new(),
        failed: Vec::new(),
    };
    for (id, r) in results {
        match r {
            Ok(o) => {
                summary.cells_new += o.new_cells;
                summary.cells_existing += o.existing_cells;
                *summary.cells_per_class.entry(o.class_label).or_default() += o.new_cells + o.existing_cells;
                summary.skipped.extend(o.skipped);
            }
            Err(e) => {
                warn!("{id}: {e}");
                summary.failed.push(FailureRecord {
                    video: id,
                    kind: e.kind(),
                    message: e.to_string(),
                });
            }
        }
    }
    summary.cells_total = summary.cells_new + summary.cells_existing;
    info!("{} new cells, {} already present", summary.cells_new, summary.cells_existing);
    write_json(&summary, Some(&out.join("summary.json")))?;
    write_json(&summary, None)
}

/// Every cell under `dir` for `omega`, sorted by file name, converted to
/// `mode` (PSD cells can serve raw-only requests).
fn read_cells(dir: &Path, omega: usize, mode: CellMode) -> Result<Vec<PpgCell>> {
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = listing
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == CELL_EXTENSION))
        .collect();
    paths.sort();
    let mut cells = Vec::with_capacity(paths.len());
    for p in paths {
        let cell = PpgCell::read(&p)?;
        if cell.omega != omega {
            continue;
        }
        match (cell.mode(), mode) {
            (a, b) if a == b => cells.push(cell),
            (CellMode::WithPsd, CellMode::RawOnly) => cells.push(cell.without_psd()),
            _ => {}
        }
    }
    Ok(cells)
}

fn cells_for(cells: Vec<PpgCell>, manifest: &DatasetManifest) -> Result<Vec<PpgCell>> {
    let mut out = Vec::new();
    for mut cell in cells {
        let Some(v) = manifest.video(&cell.meta.video_id) else {
            continue;
        };
        if let Some(label) = &cell.meta.class_label {
            if label != &v.class_label {
                return Err(Error::invalid(format!(
                    "cell of '{}' labeled '{label}' but the manifest says '{}'",
                    v.id, v.class_label
                )));
            }
        }
        cell.meta.class_label = Some(v.class_label.clone());
        out.push(cell);
    }
    Ok(out)
}

#[derive(Serialize)]
struct TrainSummary {
    model: PathBuf,
    classes: Vec<String>,
    cells: usize,
    videos: usize,
    epochs: usize,
    final_train_loss: f64,
    final_train_accuracy: f64,
    final_val_accuracy: Option<f64>,
}

pub fn train(cfg: &PipelineConfig, cells: &Path, manifest: &Path, out: &Path, history: Option<&Path>, split: Split) -> Result<()> {
    let manifest = load_manifest(manifest)?;
    let subset = select(&manifest, split, cfg.train_fraction)?;
    let cells = cells_for(read_cells(cells, cfg.omega, cfg.cell_mode())?, &subset)?;
    if cells.is_empty() {
        return Err(Error::invalid(format!("no ω={} cells for the selected videos", cfg.omega)));
    }
    let outcome = train_model(&cells, &manifest.classes, &cfg.classifier)?;
    save_model(&outcome.model, out)?;
    if let Some(h) = history {
        std::fs::write(h, outcome.history_csv()).map_err(|e| Error::io(h, e))?;
    }
    let last = outcome.history.last().copied().expect("history starts with epoch 0");
    let videos: BTreeSet<&str> = cells.iter().map(|c| c.meta.video_id.as_str()).collect();
    write_json(
        &TrainSummary {
            model: out.to_path_buf(),
            classes: manifest.classes.clone(),
            cells: cells.len(),
            videos: videos.len(),
            epochs: last.epoch,
            final_train_loss: last.train_loss,
            final_train_accuracy: last.train_acc,
            final_val_accuracy: last.val_acc,
        },
        None,
    )
}

fn extract_cells<S: VideoSource + ?Sized>(src: &S, label: Option<&str>, cfg: &PipelineConfig, dump: Option<&Path>) -> Result<Vec<PpgCell>> {
    let ex = extract_video(src, cfg, dump)?;
    for s in &ex.skipped {
        warn!("{}: window {} of face {} skipped: {}", ex.video_id, s.start, s.face_id, s.reason);
    }
    ex.cells(label, cfg.cell_mode())
}

fn manifest_cells(manifest: &DatasetManifest, cfg: &PipelineConfig, dump: Option<&Path>) -> Result<Vec<PpgCell>> {
    let per_video: Vec<Result<Vec<PpgCell>>> = manifest
        .videos
        .par_iter()
        .map(|v| extract_cells(&DiskVideo::open(v)?, Some(&v.class_label), cfg, dump))
        .collect();
    let mut cells = Vec::new();
    for r in per_video {
        cells.extend(r?);
    }
    Ok(cells)
}

#[derive(Serialize, Deserialize)]
struct PredictionFile {
    classes: Vec<String>,
    predictions: Vec<CellPrediction>,
}

fn records(verdicts: &[VideoVerdict]) -> Vec<VerdictRecord> {
    verdicts.iter().map(|v| v.to_record()).collect()
}

#[derive(Serialize)]
struct VerdictOutput {
    scheme: String,
    verdicts: Vec<VerdictSummary>,
}

#[derive(Serialize)]
struct VerdictSummary {
    class: String,
    #[serde(flatten)]
    detail: VerdictRecord,
}

fn verdict_output(cfg: &PipelineConfig, verdicts: &[VideoVerdict]) -> VerdictOutput {
    VerdictOutput {
        scheme: cfg.scheme.name().into(),
        verdicts: verdicts
            .iter()
            .zip(records(verdicts))
            .map(|(v, r)| VerdictSummary {
                class: v.class(cfg.scheme).to_string(),
                detail: r,
            })
            .collect(),
    }
}

pub fn predict(
    cfg: &PipelineConfig,
    model: &Path,
    input: &InputArgs,
    out: Option<&Path>,
    cell_predictions: Option<&Path>,
    dump: Option<&Path>,
) -> Result<()> {
    let model = load_model(model, None)?;
    let mut cells = if let Some(dir) = &input.source.cells {
        read_cells(dir, cfg.omega, cfg.cell_mode())?
    } else if let Some(m) = &input.source.manifest {
        let manifest = load_manifest(m)?;
        model.check_classes(&manifest.classes)?;
        manifest_cells(&select(&manifest, input.split, cfg.train_fraction)?, cfg, dump)?
    } else {
        let frames = input.source.frames.as_ref().expect("clap enforces one input");
        let entry = VideoEntry {
            id: input.id.clone(),
            class_label: String::new(),
            frames_path: frames.clone(),
            landmarks_path: input.landmarks.clone().expect("clap enforces --landmarks"),
            fps: input.fps.expect("clap enforces --fps"),
        };
        if !(entry.fps > 0.0) {
            return Err(Error::invalid("fps must be positive"));
        }
        extract_cells(&DiskVideo::open(&entry)?, None, cfg, dump)?
    };
    if let Some(id) = &input.video {
        cells.retain(|c| &c.meta.video_id == id);
    }
    if cells.is_empty() {
        return Err(Error::invalid(format!("no ω={} cells to predict", cfg.omega)));
    }
    let preds = predict_many(&model, &cells)?;
    if let Some(path) = cell_predictions {
        write_json(
            &PredictionFile {
                classes: model.classes.clone(),
                predictions: preds.clone(),
            },
            Some(path),
        )?;
    }
    let verdicts = verdicts_by_face(preds, &model.classes)?;
    write_json(&verdict_output(cfg, &verdicts), out)
}

pub fn aggregate(cfg: &PipelineConfig, predictions: &Path, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(predictions).map_err(|e| Error::io(predictions, e))?;
    let file: PredictionFile = serde_json::from_str(&text).map_err(|e| Error::parse(predictions, e.to_string()))?;
    let verdicts = verdicts_by_face(file.predictions, &file.classes)?;
    write_json(&verdict_output(cfg, &verdicts), out)
}

#[derive(Serialize)]
struct EvaluateOutput {
    report: EvaluationReport,
    macro_accuracy_by_scheme: BTreeMap<String, f64>,
    verdicts: Vec<VerdictRecord>,
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    cfg: &PipelineConfig,
    model: &Path,
    manifest: &Path,
    cells: Option<&Path>,
    split: Split,
    out: Option<&Path>,
    confusion: Option<&Path>,
    dump: Option<&Path>,
) -> Result<()> {
    let manifest = load_manifest(manifest)?;
    let model = load_model(model, Some(&manifest.classes))?;
    let subset = select(&manifest, split, cfg.train_fraction)?;
    let cells = match cells {
        Some(dir) => cells_for(read_cells(dir, cfg.omega, cfg.cell_mode())?, &subset)?,
        None => manifest_cells(&subset, cfg, dump)?,
    };
    let preds = predict_many(&model, &cells)?;
    let verdicts = verdicts_by_face(preds, &model.classes)?;
    let report = evaluate_verdicts(&verdicts, &subset, cfg.scheme)?;
    let mut by_scheme = BTreeMap::new();
    for s in ppgcell::Scheme::ALL {
        by_scheme.insert(s.name().to_string(), evaluate_verdicts(&verdicts, &subset, s)?.macro_accuracy);
    }
    if let Some(path) = confusion {
        std::fs::write(path, report.confusion_csv()).map_err(|e| Error::io(path, e))?;
    }
    write_json(
        &EvaluateOutput {
            report,
            macro_accuracy_by_scheme: by_scheme,
            verdicts: records(&verdicts),
        },
        out,
    )
}

#[derive(Serialize)]
struct FingerprintSummary {
    class: String,
    videos: usize,
    baseline_videos: usize,
    file: PathBuf,
    png: PathBuf,
}

fn class_residuals(manifest: &DatasetManifest, class: &str, cfg: &PipelineConfig) -> Result<ResidualAccumulator> {
    let videos: Vec<&VideoEntry> = manifest.videos.iter().filter(|v| v.class_label == class).collect();
    let residuals: Vec<Result<Option<_>>> = videos
        .par_iter()
        .map(|v| video_residual(&DiskVideo::open(v)?, cfg))
        .collect();
    let mut acc = ResidualAccumulator::new(class, cfg.raster_width, cfg.raster_height);
    for (v, r) in videos.iter().zip(residuals) {
        match r? {
            Some((original, denoised)) => acc.add(&original, &denoised, &v.id)?,
            None => warn!("{}: no usable window for a fingerprint stack", v.id),
        }
    }
    Ok(acc)
}

pub fn fingerprint(cfg: &PipelineConfig, manifest: &Path, out: &Path, classes: &[String], baseline: &str) -> Result<()> {
    let manifest = load_manifest(manifest)?;
    let baseline = (baseline != "none").then_some(baseline);
    if let Some(b) = baseline {
        if manifest.class_index(b).is_none() {
            return Err(Error::UnknownClass(b.to_string()));
        }
    }
    let targets: Vec<String> = if classes.is_empty() {
        manifest.classes.iter().filter(|c| Some(c.as_str()) != baseline).cloned().collect()
    } else {
        for c in classes {
            if manifest.class_index(c).is_none() {
                return Err(Error::UnknownClass(c.clone()));
            }
        }
        classes.to_vec()
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let base_acc = baseline.map(|b| class_residuals(&manifest, b, cfg)).transpose()?;
    let mut summaries = Vec::new();
    for class in &targets {
        let acc = class_residuals(&manifest, class, cfg)?;
        let base = base_acc.as_ref().filter(|b| b.class_label != *class);
        let fp = finalize_fingerprint(&acc, base, cfg.nlm)?;
        let file = out.join(format!("{class}.ppgf"));
        let png = out.join(format!("{class}.png"));
        fp.write(&file)?;
        fp.to_rgb8().save_png(&png)?;
        summaries.push(FingerprintSummary {
            class: class.clone(),
            videos: acc.count,
            baseline_videos: base.map_or(0, |b| b.count),
            file,
            png,
        });
    }
    write_json(&summaries, None)
}

#[derive(Serialize)]
struct SynthSummary {
    manifest: PathBuf,
    classes: Vec<String>,
    videos: usize,
    frames_per_video: usize,
}

pub fn synth(
    cfg: &PipelineConfig,
    seed: Option<u64>,
    out: &Path,
    synth_config: Option<&Path>,
    generators: Option<usize>,
    videos_per_class: Option<usize>,
    frames: Option<usize>,
) -> Result<()> {
    let mut sc = match synth_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SynthDatasetConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthDatasetConfig::standard(generators.unwrap_or(4), videos_per_class.unwrap_or(40), seed.unwrap_or(cfg.seed)),
    };
    if synth_config.is_some() {
        if generators.is_some() {
            return Err(Error::Config("--generators conflicts with --synth-config".into()));
        }
        if let Some(s) = seed {
            sc.video.seed = s;
        }
    }
    if let Some(n) = videos_per_class {
        sc.videos_per_class = n;
    }
    if let Some(f) = frames {
        sc.video.frames = f;
    }
    let ds = generate_dataset(&sc)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let entries: Vec<Result<VideoEntry>> = ds.videos.par_iter().map(|v| v.write(&out.join(&v.id))).collect();
    let mut manifest = ds.manifest();
    manifest.videos = entries.into_iter().collect::<Result<_>>()?;
    let path = out.join("manifest.json");
    manifest.save(&path)?;
    let check = load_manifest(&path)?;
    for v in &check.videos {
        LandmarkSet::load(&v.landmarks_path)?.validate_against(sc.video.frames, sc.video.width, sc.video.height)?;
    }
    write_json(
        &SynthSummary {
            manifest: path,
            classes: manifest.classes,
            videos: manifest.videos.len(),
            frames_per_video: sc.video.frames,
        },
        None,
    )
}
