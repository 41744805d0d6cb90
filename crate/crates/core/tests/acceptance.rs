//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails. Criterion numbers given on the command
//! line restrict the run to those criteria.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ppgcell::aggregate::{aggregate, evaluate, logit, verdicts_by_face, EvaluationReport};
use ppgcell::cell::{BlockRange, CellMeta};
use ppgcell::classify::{gradient_check, train, Architecture, TrainConfig};
use ppgcell::fingerprint::{correlation, finalize_fingerprint, Fingerprint, ResidualAccumulator};
use ppgcell::geometry::Point2;
use ppgcell::ingest::{enumerate_windows, split_train_test};
use ppgcell::pipeline::{extract_video, extract_window, video_residual, VideoExtraction};
use ppgcell::ppg::{chrom_ppg, periodogram, psd, resampled_to_periodogram_bin};
use ppgcell::raster::RgbImage;
use ppgcell::rectify::{build_roi, rectify_frame, triangulate, RoiPolygon, WindowWarp, MEAN_FACE_TEMPLATE};
use ppgcell::synth::{generate_dataset, SynthDataset, SynthDatasetConfig, SynthVideo};
use ppgcell::{CellMode, CellPrediction, ClassifierModel, DatasetManifest, PipelineConfig, PpgCell, Scheme, REAL_CLASS};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, format!("runtime {elapsed:.1?} over {limit:?}"))
}

// ---------------------------------------------------------------- shared data

const MAIN_SEED: u64 = 11;

struct Extracted {
    dataset: SynthDataset,
    by_id: HashMap<String, VideoExtraction>,
}

fn extract_all(videos: &[SynthVideo], cfg: &PipelineConfig) -> HashMap<String, VideoExtraction> {
    videos
        .par_iter()
        .map(|v| (v.id.clone(), extract_video(v, cfg, None).expect("extraction")))
        .collect()
}

fn labeled_cells(ds: &SynthDataset, by_id: &HashMap<String, VideoExtraction>, split: &DatasetManifest, mode: CellMode) -> Vec<PpgCell> {
    let mut cells = Vec::new();
    for v in &ds.videos {
        if split.video(&v.id).is_some() {
            cells.extend(by_id[&v.id].cells(Some(&v.class_label), mode).expect("cells"));
        }
    }
    cells
}

/// Trains on the 70% split and returns the test-split report for each scheme.
fn run_experiment(ds: &SynthDataset, by_id: &HashMap<String, VideoExtraction>, mode: CellMode) -> HashMap<Scheme, EvaluationReport> {
    let manifest = ds.manifest();
    let (train_m, test_m) = split_train_test(&manifest, 0.7).expect("split");
    let train_cells = labeled_cells(ds, by_id, &train_m, mode);
    let test_cells = labeled_cells(ds, by_id, &test_m, mode);
    let outcome = train(&train_cells, &manifest.classes, &TrainConfig::default()).expect("train");
    let preds = outcome.model.predict_all(&test_cells).expect("predict");
    let verdicts = verdicts_by_face(preds, &manifest.classes).expect("verdicts");
    Scheme::ALL
        .into_iter()
        .map(|s| (s, evaluate(&verdicts, &test_m, s).expect("evaluate")))
        .collect()
}

fn main_dataset() -> Extracted {
    let dataset = generate_dataset(&SynthDatasetConfig::standard(4, 40, MAIN_SEED)).expect("dataset");
    let by_id = extract_all(&dataset.videos, &PipelineConfig::default());
    Extracted { dataset, by_id }
}

// ---------------------------------------------------------------- criterion 1

fn psd_recovery() -> Outcome {
    let mut notes = Vec::new();
    let mut synth = SynthDatasetConfig::standard(0, 1, 21);
    synth.video.frames = 512;
    synth.video.heart_rate = 1.2;
    synth.video.heart_rate_spread = 0.0;
    let video = generate_dataset(&synth).map_err(|e| e.to_string())?.videos.remove(0);
    let cfg = PipelineConfig::default();
    for omega in [64usize, 128, 256, 512] {
        let window = enumerate_windows(video.landmarks(), video.frame_count(), omega, cfg.min_confidence).map_err(|e| e.to_string())?[0];
        let signals = extract_window(&video, &window, &cfg, None).map_err(|e| e.to_string())?;
        let mut mean_psd = vec![0.0; omega];
        for r in (0..signals.psd.rows).filter(|&r| signals.psd.valid[r]) {
            for (m, p) in mean_psd.iter_mut().zip(signals.psd.row(r)) {
                *m += p;
            }
        }
        let peak = (1..omega).max_by(|&a, &b| mean_psd[a].total_cmp(&mean_psd[b])).unwrap();
        let got = resampled_to_periodogram_bin(peak, omega);
        let want = 1.2 * omega as f64 / 30.0;
        ensure((got - want).abs() <= 1.0, format!("ω={omega}: peak at bin {got:.2}, expected {want:.2}"))?;
        for r in (0..signals.raw.rows).filter(|&r| signals.raw.valid[r]) {
            let row = signals.raw.row(r);
            let energy: f64 = row.iter().map(|v| v * v).sum();
            let total: f64 = periodogram(row, false).iter().sum();
            ensure((total - energy).abs() <= 1e-6 * energy.max(1e-300), format!("ω={omega} row {r}: Parseval {total} vs {energy}"))?;
        }
        notes.push(format!("ω={omega} bin {got:.2}/{want:.2}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [17usize, 64, 100, 511] {
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let energy: f64 = s.iter().map(|v| v * v).sum();
        let total: f64 = periodogram(&s, false).iter().sum();
        ensure((total - energy).abs() <= 1e-6 * energy, format!("Parseval n={n}"))?;
        ensure(psd(&s, false).len() == n, "resampled length")?;
    }
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------- criterion 2

fn direct_chrom(trace: &[[f64; 3]]) -> Vec<f64> {
    let n = trace.len() as f64;
    let mu: Vec<f64> = (0..3).map(|c| trace.iter().map(|p| p[c]).sum::<f64>() / n).collect();
    let x: Vec<f64> = trace.iter().map(|p| 3.0 * (p[0] / mu[0]) - 2.0 * (p[1] / mu[1])).collect();
    let y: Vec<f64> = trace.iter().map(|p| 1.5 * (p[0] / mu[0]) + (p[1] / mu[1]) - 1.5 * (p[2] / mu[2])).collect();
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n;
        (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt()
    };
    let alpha = sd(&x) / sd(&y);
    let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - alpha * b).collect();
    let m = s.iter().sum::<f64>() / n;
    s.iter().map(|v| v - m).collect()
}

fn chrom_correctness() -> Outcome {
    let mut checked = 0;
    for case in 0..40 {
        let n = 32 + case * 7;
        let (f1, f2) = (0.7 + 0.05 * case as f64, 2.9 - 0.03 * case as f64);
        let trace: Vec<[f64; 3]> = (0..n)
            .map(|t| {
                let t = t as f64 / 30.0;
                let p = (TAU * f1 * t).sin();
                let q = (TAU * f2 * t + 0.3).cos();
                [180.0 + 2.0 * p + 0.5 * q, 120.0 + 3.0 * p - 0.7 * q, 100.0 + 0.5 * p + 1.1 * q]
            })
            .collect();
        let got = chrom_ppg(&trace).ok_or("chrom returned None")?;
        let want = direct_chrom(&trace);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-9, format!("case {case}: max error {err:e}"))?;

        let scaled: Vec<[f64; 3]> = trace.iter().map(|p| p.map(|v| v * 4.0)).collect();
        ensure(chrom_ppg(&scaled).unwrap() == got, format!("case {case}: power-of-two scaling changed the output"))?;
        let per_channel: Vec<[f64; 3]> = trace.iter().map(|p| [p[0] * 0.5, p[1] * 8.0, p[2] * 0.25]).collect();
        ensure(chrom_ppg(&per_channel).unwrap() == got, format!("case {case}: per-channel scaling changed the output"))?;
        let odd: Vec<[f64; 3]> = trace.iter().map(|p| p.map(|v| v * 3.7)).collect();
        let err = chrom_ppg(&odd).unwrap().iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-12, format!("case {case}: scale 3.7 error {err:e}"))?;
        checked += 1;
    }
    let flat = vec![[120.0, 80.0, 60.0]; 64];
    ensure(chrom_ppg(&flat) == Some(vec![0.0; 64]), "flat trace must give zeros")?;
    let flat_ys: Vec<[f64; 3]> = (0..64).map(|t| {
        let k = 1.0 + 0.01 * (t as f64 * 0.3).sin();
        [100.0 * k, 100.0 * k, 100.0 * k]
    }).collect();
    let out = chrom_ppg(&flat_ys).ok_or("gray trace returned None")?;
    ensure(out.iter().all(|&v| v.abs() < 1e-9), "intensity-only trace must give zeros")?;
    Ok(format!("{checked} analytic traces"))
}

// ---------------------------------------------------------------- criterion 3

fn textured(w: usize, h: usize) -> RgbImage {
    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64, y as f64);
            img.put(
                x,
                y,
                [
                    (128.0 + 100.0 * (u * 0.21).sin() * (v * 0.13).cos()) as u8,
                    (128.0 + 90.0 * (u * 0.07 + v * 0.11).sin()) as u8,
                    ((x * 3 + y * 5) % 256) as u8,
                ],
            );
        }
    }
    img
}

fn oracle_bilinear(img: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let cx = x.clamp(0.0, (img.width - 1) as f64);
    let cy = y.clamp(0.0, (img.height - 1) as f64);
    let (x0, y0) = (cx.floor() as usize, cy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width - 1), (y0 + 1).min(img.height - 1));
    let (fx, fy) = (cx - x0 as f64, cy - y0 as f64);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let g = |xx: usize, yy: usize| img.get(xx, yy)[c] as f64;
        out[c] = g(x0, y0) * (1.0 - fx) * (1.0 - fy) + g(x1, y0) * fx * (1.0 - fy) + g(x0, y1) * (1.0 - fx) * fy + g(x1, y1) * fx * fy;
    }
    out
}

fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn warp_fidelity() -> Outcome {
    let frame = textured(160, 160);
    let pts: Vec<Point2> = MEAN_FACE_TEMPLATE.iter().map(|p| Point2::new(10.0 + p[0] * 120.0, p[1] * 120.0)).collect();
    let mesh = triangulate(&build_roi(&pts).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    let same = rectify_frame(&frame, &mesh, &mesh, 160, 160).map_err(|e| e.to_string())?;
    let mut identity_px = 0;
    for y in 0..160 {
        for x in 0..160 {
            if same.is_valid(x, y) {
                identity_px += 1;
                let (got, want) = (same.pixel(x, y), frame.get(x, y));
                for c in 0..3 {
                    ensure((got[c] as f64 - want[c] as f64).abs() <= 1.0, format!("identity warp off at ({x},{y})"))?;
                }
            }
        }
    }
    ensure(identity_px > 3000, format!("identity warp covered only {identity_px} pixels"))?;

    let doubled = mesh.with_vertices(mesh.vertices.iter().map(|p| Point2::new(p.x * 2.0, p.y * 2.0)).collect()).map_err(|e| e.to_string())?;
    let big = rectify_frame(&frame, &mesh, &doubled, 320, 320).map_err(|e| e.to_string())?;
    let mut scaled_px = 0;
    for y in 0..320 {
        for x in 0..320 {
            if big.is_valid(x, y) {
                scaled_px += 1;
                let want = oracle_bilinear(&frame, x as f64 / 2.0, y as f64 / 2.0);
                let got = big.pixel(x, y);
                for c in 0..3 {
                    ensure((got[c] as f64 - want[c]).abs() <= 2.0, format!("scaled warp off at ({x},{y})"))?;
                }
            }
        }
    }
    ensure(scaled_px > 4 * identity_px - 4 * 400, format!("scaled warp covered only {scaled_px} pixels"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut polygons = 0;
    while polygons < 100 {
        let n = rng.random_range(5..40);
        let cloud: Vec<Point2> = (0..n).map(|_| Point2::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect();
        let hull = convex_hull(cloud);
        if hull.len() < 3 {
            continue;
        }
        let mesh = triangulate(&RoiPolygon::from_points(hull.clone(), vec![])).map_err(|e| e.to_string())?;
        ensure(mesh.triangles.len() == hull.len() - 2, "convex polygon triangle count")?;
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangle(t);
            let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
            let sq = |p: Point2| p.x * p.x + p.y * p.y;
            let ux = (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d;
            let uy = (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d;
            let r = ((a.x - ux).powi(2) + (a.y - uy).powi(2)).sqrt();
            for (k, v) in mesh.vertices.iter().enumerate() {
                if mesh.triangles[t].contains(&k) {
                    continue;
                }
                let dist = ((v.x - ux).powi(2) + (v.y - uy).powi(2)).sqrt();
                ensure(dist >= r * (1.0 - 1e-9), format!("polygon {polygons}: vertex {k} inside circumcircle of triangle {t}"))?;
            }
        }
        polygons += 1;
    }
    Ok(format!("{identity_px} identity px, {scaled_px} scaled px, {polygons} polygons"))
}

// ---------------------------------------------------------------- criterion 4

fn cells(rows: &[&[f64]]) -> Vec<CellPrediction> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| CellPrediction {
            rho: r.to_vec(),
            meta: CellMeta {
                window_start: i * 64,
                ..CellMeta::default()
            },
        })
        .collect()
}

fn oracle_scores(preds: &[CellPrediction], scheme: Scheme) -> Vec<f64> {
    let k = preds[0].rho.len();
    let n = preds.len() as f64;
    (0..k)
        .map(|c| {
            let mut col: Vec<f64> = preds.iter().map(|p| p.rho[c]).collect();
            match scheme {
                Scheme::Majority => {
                    preds
                        .iter()
                        .filter(|p| {
                            let best = p.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            p.rho.iter().position(|&v| v == best) == Some(c)
                        })
                        .count() as f64
                        / n
                }
                Scheme::MeanAboveHalf if preds.iter().all(|p| p.rho.iter().all(|&v| v <= 0.5)) => col.iter().sum::<f64>() / n,
                Scheme::MeanAboveHalf => {
                    let above: Vec<f64> = col.into_iter().filter(|&v| v > 0.5).collect();
                    if above.is_empty() {
                        0.0
                    } else {
                        above.iter().sum::<f64>() / above.len() as f64
                    }
                }
                Scheme::Max => col.into_iter().fold(f64::NEG_INFINITY, f64::max),
                Scheme::TopTwoMean => {
                    col.sort_by(|a, b| b.total_cmp(a));
                    if col.len() == 1 {
                        col[0]
                    } else {
                        (col[0] + col[1]) / 2.0
                    }
                }
                Scheme::MeanLogOdds => col.iter().map(|&p| (p / (1.0 - p)).ln()).sum::<f64>() / n,
            }
        })
        .collect()
}

fn aggregation_schemes() -> Outcome {
    use Scheme::*;
    // (cells, expected winner per scheme in Scheme::ALL order)
    let hand: Vec<(Vec<CellPrediction>, [usize; 5])> = vec![
        // majority and mean log-odds disagree: one confident outlier
        (cells(&[&[0.55, 0.45], &[0.55, 0.45], &[0.01, 0.99]]), [0, 1, 1, 1, 1]),
        (cells(&[&[0.9, 0.1]]), [0, 0, 0, 0, 0]),
        (cells(&[&[0.2, 0.3, 0.5]]), [2, 2, 2, 2, 2]),
        (cells(&[&[0.6, 0.4], &[0.6, 0.4], &[0.3, 0.7]]), [0, 1, 1, 0, 1]),
        (cells(&[&[0.7, 0.2, 0.1], &[0.1, 0.8, 0.1], &[0.1, 0.1, 0.8], &[0.6, 0.3, 0.1]]), [0, 1, 1, 0, 1]),
        (cells(&[&[0.4, 0.35, 0.25], &[0.4, 0.35, 0.25], &[0.05, 0.9, 0.05]]), [0, 1, 1, 1, 1]),
        (cells(&[&[0.3, 0.3, 0.4], &[0.45, 0.1, 0.45]]), [0, 2, 0, 2, 2]),
        (cells(&[&[0.5, 0.5], &[0.5, 0.5]]), [0, 0, 0, 0, 0]),
        (
            cells(&[
                &[0.51, 0.245, 0.245],
                &[0.51, 0.245, 0.245],
                &[0.51, 0.245, 0.245],
                &[0.005, 0.99, 0.005],
                &[0.005, 0.99, 0.005],
            ]),
            [0, 1, 1, 1, 1],
        ),
    ];
    let hand_scores: Vec<(usize, Scheme, Vec<f64>)> = vec![
        (0, Majority, vec![2.0 / 3.0, 1.0 / 3.0]),
        (0, MeanAboveHalf, vec![0.55, 0.99]),
        (0, Max, vec![0.55, 0.99]),
        (0, TopTwoMean, vec![0.55, 0.72]),
        (0, MeanLogOdds, vec![(2.0 * logit(0.55) + logit(0.01)) / 3.0, (2.0 * logit(0.45) + logit(0.99)) / 3.0]),
        (3, MeanAboveHalf, vec![0.6, 0.7]),
        (3, TopTwoMean, vec![0.6, 0.55]),
        (4, Majority, vec![0.5, 0.25, 0.25]),
        (4, MeanAboveHalf, vec![0.65, 0.8, 0.8]),
        (6, MeanAboveHalf, vec![0.375, 0.2, 0.425]),
        (2, MeanAboveHalf, vec![0.2, 0.3, 0.5]),
        (8, MeanAboveHalf, vec![0.51, 0.99, 0.0]),
    ];
    let mut sets = 0;
    for (i, (preds, want)) in hand.iter().enumerate() {
        for (s, &w) in Scheme::ALL.iter().zip(want) {
            let got = aggregate(preds, *s).map_err(|e| e.to_string())?;
            ensure(got.class_index == w, format!("hand set {i} {s}: got {} want {w}", got.class_index))?;
        }
        sets += 1;
    }
    for (i, s, want) in hand_scores {
        let got = aggregate(&hand[i].0, s).map_err(|e| e.to_string())?.scores;
        ensure(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12), format!("hand set {i} {s}: scores {got:?} want {want:?}"))?;
    }
    let outlier = &hand[8].0;
    ensure(
        aggregate(outlier, Majority).unwrap().class_index != aggregate(outlier, MeanLogOdds).unwrap().class_index,
        "outlier case must split majority and log-odds",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for set in 0..30 {
        let k = rng.random_range(2..6);
        let n = rng.random_range(1..9);
        let preds: Vec<CellPrediction> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.02..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                CellPrediction {
                    rho: raw.iter().map(|v| v / sum).collect(),
                    meta: CellMeta::default(),
                }
            })
            .collect();
        for s in Scheme::ALL {
            let got = aggregate(&preds, s).map_err(|e| e.to_string())?;
            let want = oracle_scores(&preds, s);
            ensure(got.scores.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-9), format!("random set {set} {s}"))?;
            let best = want.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            ensure(want[got.class_index] == best, format!("random set {set} {s}: winner"))?;
        }
        if n == 1 {
            let pick = aggregate(&preds, Majority).unwrap().class_index;
            ensure(Scheme::ALL.iter().all(|&s| aggregate(&preds, s).unwrap().class_index == pick), format!("single-cell set {set} disagrees"))?;
        }
        sets += 1;
    }
    for k in 2..6 {
        let mut rho = vec![0.1 / (k - 1) as f64; k];
        rho[k - 1] = 0.9;
        let one = vec![CellPrediction { rho, meta: CellMeta::default() }];
        ensure(Scheme::ALL.iter().all(|&s| aggregate(&one, s).unwrap().class_index == k - 1), "single-cell degenerate case")?;
        sets += 1;
    }
    ensure(sets >= 20, "too few prediction sets")?;
    Ok(format!("{sets} prediction sets"))
}

// ---------------------------------------------------------------- criterion 5

fn trainer() -> Outcome {
    let mut synth = SynthDatasetConfig::standard(2, 6, 3);
    synth.video.frames = 128;
    let ds = generate_dataset(&synth).map_err(|e| e.to_string())?;
    let by_id = extract_all(&ds.videos, &PipelineConfig::default());
    let all = ds.manifest();
    let train_cells = labeled_cells(&ds, &by_id, &all, CellMode::WithPsd);
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let a = train(&train_cells, &ds.classes, &cfg).map_err(|e| e.to_string())?;
    let b = train(&train_cells, &ds.classes, &cfg).map_err(|e| e.to_string())?;
    let (ba, bb) = (a.model.to_bytes().map_err(|e| e.to_string())?, b.model.to_bytes().map_err(|e| e.to_string())?);
    ensure(ba == bb, "retraining produced different model bytes")?;

    let first = a.history[0].train_loss;
    let last = a.history.last().unwrap().train_loss;
    ensure(last <= 0.5 * first, format!("loss {first:.4} -> {last:.4}, less than 50% decrease"))?;

    let batch: Vec<(&PpgCell, usize)> = train_cells
        .iter()
        .step_by(3)
        .take(8)
        .map(|c| (c, ds.classes.iter().position(|k| Some(k) == c.meta.class_label.as_ref()).unwrap()))
        .collect();
    let mut worst: f64 = 0.0;
    for model in [&a.model, &ClassifierModel { weights: a.model.weights.iter().map(|w| w * 0.5).collect(), ..a.model.clone() }] {
        worst = worst.max(gradient_check(model, &batch, 300, 9).map_err(|e| e.to_string())?);
    }
    let linear = train(&train_cells, &ds.classes, &TrainConfig { hidden: None, epochs: 3, ..cfg.clone() }).map_err(|e| e.to_string())?;
    worst = worst.max(gradient_check(&linear.model, &batch, 300, 10).map_err(|e| e.to_string())?);
    ensure(worst < 1e-3, format!("gradient check error {worst:e}"))?;
    Ok(format!("loss {first:.3} -> {last:.3}, gradient error {worst:.1e}, {} cells", train_cells.len()))
}

// ---------------------------------------------------------------- criterion 6

fn end_to_end(main: &Extracted) -> Outcome {
    let reports = run_experiment(&main.dataset, &main.by_id, CellMode::WithPsd);
    let log_odds = reports[&Scheme::MeanLogOdds].macro_accuracy;
    let majority = reports[&Scheme::Majority].macro_accuracy;
    let summary = Scheme::ALL.iter().map(|s| format!("{s} {:.3}", reports[s].macro_accuracy)).collect::<Vec<_>>().join(", ");
    ensure(log_odds >= 0.9, format!("log-odds macro accuracy {log_odds:.3} < 0.9 ({summary})"))?;
    ensure(log_odds >= majority, format!("log-odds {log_odds:.3} below majority {majority:.3}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- criterion 7

fn real_accuracy(r: &EvaluationReport) -> f64 {
    let i = r.classes.iter().position(|c| c == REAL_CLASS).unwrap();
    r.per_class_accuracy[i].unwrap_or(0.0)
}

fn ablations(main: &Extracted) -> Outcome {
    let with = run_experiment(&main.dataset, &main.by_id, CellMode::WithPsd);
    let without = run_experiment(&main.dataset, &main.by_id, CellMode::RawOnly);
    let (real_with, real_without) = (real_accuracy(&with[&Scheme::MeanLogOdds]), real_accuracy(&without[&Scheme::MeanLogOdds]));
    ensure(real_without <= real_with, format!("real accuracy rose without PSD: {real_with:.3} -> {real_without:.3}"))?;

    let mut synth = SynthDatasetConfig::standard(4, 20, MAIN_SEED + 1);
    synth.video.frames = 600;
    let ds = generate_dataset(&synth).map_err(|e| e.to_string())?;
    let mut acc = Vec::new();
    for omega in [64usize, 512] {
        let cfg = PipelineConfig { omega, ..PipelineConfig::default() };
        let by_id = extract_all(&ds.videos, &cfg);
        acc.push(run_experiment(&ds, &by_id, CellMode::WithPsd)[&Scheme::MeanLogOdds].macro_accuracy);
    }
    ensure(acc[1] <= acc[0], format!("ω=512 accuracy {:.3} above ω=64 {:.3}", acc[1], acc[0]))?;
    Ok(format!(
        "real {real_with:.3} with PSD, {real_without:.3} without; macro ω=64 {:.3}, ω=512 {:.3}",
        acc[0], acc[1]
    ))
}

// ---------------------------------------------------------------- criterion 8

/// The injected static pattern of `video` in rectified raster coordinates.
fn rectified_pattern(video: &SynthVideo, cfg: &PipelineConfig) -> (Vec<f64>, Vec<bool>) {
    const GAIN: f64 = 16.0;
    let o = video.origin();
    let s = video.config.face_scale;
    let pts: Vec<Point2> = MEAN_FACE_TEMPLATE.iter().map(|p| Point2::new(o.x + p[0] * s, o.y + p[1] * s)).collect();
    let warp = WindowWarp::from_mean_shape(&pts, cfg.raster_width, cfg.raster_height).unwrap();
    let face = warp.rectify(&video.static_pattern_image(GAIN), &pts).unwrap();
    let values = face.data.iter().map(|&v| (v as f64 - 128.0) / GAIN).collect();
    let mask = face.valid.iter().flat_map(|&v| [v; 3]).collect();
    (values, mask)
}

fn fingerprints() -> Outcome {
    let mut synth = SynthDatasetConfig::standard(3, 50, MAIN_SEED + 2);
    synth.video.frames = 64;
    let ds = generate_dataset(&synth).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let residuals: Vec<_> = ds
        .videos
        .par_iter()
        .map(|v| video_residual(v, &cfg).expect("residual").expect("usable window"))
        .collect();
    let mut accs: HashMap<&str, ResidualAccumulator> = HashMap::new();
    for (v, (orig, den)) in ds.videos.iter().zip(&residuals) {
        accs.entry(&v.class_label)
            .or_insert_with(|| ResidualAccumulator::new(v.class_label.clone(), cfg.raster_width, cfg.raster_height))
            .add(orig, den, &v.id)
            .map_err(|e| e.to_string())?;
    }
    let generators: Vec<&String> = ds.classes.iter().filter(|c| *c != REAL_CLASS).collect();
    let mut prints: Vec<Fingerprint> = Vec::new();
    let mut patterns = Vec::new();
    for class in &generators {
        prints.push(finalize_fingerprint(&accs[class.as_str()], Some(&accs[REAL_CLASS]), cfg.nlm).map_err(|e| e.to_string())?);
        let video = ds.videos.iter().find(|v| &&v.class_label == class).unwrap();
        patterns.push(rectified_pattern(video, &cfg));
    }
    let mut self_corr = Vec::new();
    let mut worst_cross: f64 = 0.0;
    for (i, fp) in prints.iter().enumerate() {
        let values: Vec<f64> = fp.values.iter().map(|&v| v as f64).collect();
        for (j, (pattern, mask)) in patterns.iter().enumerate() {
            let r = correlation(&values, pattern, Some(mask));
            if i == j {
                self_corr.push(r);
            } else {
                worst_cross = worst_cross.max(r.abs());
            }
        }
    }
    let min_self = self_corr.iter().cloned().fold(f64::INFINITY, f64::min);
    let summary = format!("self {:?}, worst cross {worst_cross:.3}", self_corr.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>());
    ensure(min_self >= 0.8, format!("self-correlation below 0.8: {summary}"))?;
    ensure(worst_cross < 0.2, format!("cross-correlation too high: {summary}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- criterion 9

fn random_cell() -> impl Strategy<Value = PpgCell> {
    (1usize..9, 16usize..80, any::<bool>(), any::<u64>(), "[a-z0-9_]{1,12}", proptest::option::of("[a-z]{1,6}"))
        .prop_map(|(half, omega, has_psd, seed, video, label)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = if has_psd { half * 2 } else { half };
            let range = |rng: &mut ChaCha8Rng| {
                let a: f64 = rng.random_range(-1e3..1e3);
                BlockRange { min: a, max: a + rng.random_range(0.0..1e3) }
            };
            PpgCell {
                rows,
                omega,
                has_psd,
                values: (0..rows * omega).map(|_| rng.random::<f32>()).collect(),
                meta: CellMeta {
                    video_id: video,
                    face_id: rng.random_range(0..4),
                    window_start: rng.random_range(0..10_000),
                    class_label: label,
                    raw_range: range(&mut rng),
                    psd_range: has_psd.then(|| range(&mut rng)),
                },
            }
        })
}

fn random_model() -> impl Strategy<Value = ClassifierModel> {
    (1usize..5, 16usize..40, proptest::option::of(1usize..12), 2usize..6, any::<u64>()).prop_map(|(rows, omega, hidden, k, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let architecture = Architecture { rows, omega, hidden, classes: k };
        let weights = (0..architecture.param_count()).map(|_| rng.random_range(-2.0f32..2.0)).collect();
        ClassifierModel {
            classes: (0..k).map(|c| format!("class{c}")).collect(),
            architecture,
            weights,
            training: TrainConfig {
                learning_rate: rng.random_range(1e-4..1.0),
                l2: rng.random_range(0.0..1e-2),
                seed: rng.random(),
                ..TrainConfig::default()
            },
        }
    })
}

fn round_trips() -> Outcome {
    let config = ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    };
    let mut runner = TestRunner::new_with_rng(config.clone(), proptest::test_runner::TestRng::deterministic_rng(config.rng_algorithm));
    runner
        .run(&(random_cell(), any::<prop::sample::Index>()), |(cell, at)| {
            let bytes = cell.to_bytes().unwrap();
            let back = PpgCell::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &cell);
            prop_assert_eq!(back.to_bytes().unwrap(), bytes.clone());
            let mut bad = bytes.clone();
            let i = at.index(bad.len());
            bad[i] ^= 1 << (i % 8);
            prop_assert!(PpgCell::from_bytes(&bad).is_err());
            let mut bad_crc = bytes;
            let n = bad_crc.len();
            bad_crc[n - 2] = bad_crc[n - 2].wrapping_add(1);
            let checksum = matches!(PpgCell::from_bytes(&bad_crc), Err(ppgcell::Error::Checksum { .. }));
            prop_assert!(checksum);
            Ok(())
        })
        .map_err(|e| format!("cell: {e}"))?;
    let mut runner = TestRunner::new_with_rng(config.clone(), proptest::test_runner::TestRng::deterministic_rng(config.rng_algorithm));
    runner
        .run(&(random_model(), any::<prop::sample::Index>()), |(model, at)| {
            let bytes = model.to_bytes().unwrap();
            let back = ClassifierModel::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &model);
            prop_assert_eq!(back.to_bytes().unwrap(), bytes.clone());
            let mut bad = bytes.clone();
            let i = at.index(bad.len());
            bad[i] ^= 1 << (i % 8);
            prop_assert!(ClassifierModel::from_bytes(&bad).is_err());
            let mut bad_crc = bytes;
            let n = bad_crc.len();
            bad_crc[n - 1] ^= 0x80;
            let checksum = matches!(ClassifierModel::from_bytes(&bad_crc), Err(ppgcell::Error::Checksum { .. }));
            prop_assert!(checksum);
            Ok(())
        })
        .map_err(|e| format!("model: {e}"))?;
    Ok("1000 cells, 1000 models".into())
}

// ---------------------------------------------------------------- criterion 10

fn new_class(main: &Extracted) -> Outcome {
    let five = run_experiment(&main.dataset, &main.by_id, CellMode::WithPsd)[&Scheme::MeanLogOdds].macro_accuracy;
    let mut synth = SynthDatasetConfig::standard(5, 40, MAIN_SEED);
    let added = synth.classes.iter_mut().find(|c| c.name == "gen4").unwrap();
    added.fresh_identities = true;
    let ds = generate_dataset(&synth).map_err(|e| e.to_string())?;
    let fresh: Vec<SynthVideo> = ds.videos.iter().filter(|v| v.class_label == "gen4").cloned().collect();
    let shared_ids: Vec<u64> = main.dataset.videos.iter().map(|v| v.truth.identity).collect();
    ensure(fresh.iter().all(|v| !shared_ids.contains(&v.truth.identity)), "new class reuses an identity")?;
    let mut by_id = extract_all(&fresh, &PipelineConfig::default());
    for v in &ds.videos {
        if v.class_label != "gen4" {
            let old = main.dataset.videos.iter().find(|o| o.id == v.id).ok_or("video missing from the 5-class run")?;
            ensure(old.truth == v.truth, format!("{} differs between runs", v.id))?;
            by_id.insert(v.id.clone(), main.by_id[&v.id].clone());
        }
    }
    let six = run_experiment(&ds, &by_id, CellMode::WithPsd)[&Scheme::MeanLogOdds].macro_accuracy;
    ensure((six - five).abs() <= 0.03, format!("5-class {five:.3}, 6-class {six:.3}"))?;
    Ok(format!("5-class {five:.3}, 6-class {six:.3}"))
}

// ---------------------------------------------------------------- driver

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let mut failures = 0;
    let mut report = |n: usize, limit: Option<Duration>, f: &dyn Fn() -> Outcome| {
        if !run(n) {
            return;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = t.elapsed();
        let result = result.and_then(|msg| match limit {
            Some(l) => within(elapsed, l).map(|_| msg),
            None => Ok(msg),
        });
        match result {
            Ok(msg) => println!("criterion {n:>2}: PASS ({elapsed:.1?}) {msg}"),
            Err(msg) => {
                failures += 1;
                println!("criterion {n:>2}: FAIL ({elapsed:.1?}) {msg}");
            }
        }
    };
    report(1, Some(Duration::from_secs(10)), &psd_recovery);
    report(2, Some(Duration::from_secs(1)), &chrom_correctness);
    report(3, Some(Duration::from_secs(30)), &warp_fidelity);
    report(4, Some(Duration::from_secs(1)), &aggregation_schemes);
    report(5, Some(Duration::from_secs(120)), &trainer);
    report(9, Some(Duration::from_secs(30)), &round_trips);

    let main_data = std::sync::OnceLock::new();
    let load = || -> &Extracted { main_data.get_or_init(main_dataset) };
    if run(6) {
        let t0 = Instant::now();
        load();
        let prep = t0.elapsed();
        report(6, Some(Duration::from_secs(15 * 60) - prep), &|| end_to_end(load()).map(|m| format!("{m}; dataset rendered and extracted in {prep:.1?}")));
    }
    if run(7) {
        report(7, None, &|| ablations(load()));
    }
    if run(10) {
        report(10, None, &|| new_class(load()));
    }
    report(8, Some(Duration::from_secs(10 * 60)), &fingerprints);
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}
