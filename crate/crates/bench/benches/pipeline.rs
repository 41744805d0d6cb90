use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ppgcell::classify::{train, TrainConfig};
use ppgcell::fingerprint::{temporal_nlm_denoise, NlmParams};
use ppgcell::ingest::enumerate_windows;
use ppgcell::pipeline::{extract_window, fingerprint_stack};
use ppgcell::ppg::{chrom_ppg, psd};
use ppgcell::rectify::WindowWarp;
use ppgcell::synth::{generate_dataset, SynthDatasetConfig, SynthVideo};
use ppgcell::{CellMode, PipelineConfig};

fn video(frames: usize) -> SynthVideo {
    let mut cfg = SynthDatasetConfig::standard(1, 1, 7);
    cfg.video.frames = frames;
    generate_dataset(&cfg).unwrap().videos.remove(0)
}

fn warp(c: &mut Criterion) {
    let v = video(4);
    let frame = v.frame(0).unwrap();
    let points = &v.landmarks().records()[0].points;
    let cfg = PipelineConfig::default();
    let warp = WindowWarp::from_mean_shape(points, cfg.raster_width, cfg.raster_height).unwrap();
    c.bench_function("render_frame", |b| b.iter(|| v.frame(black_box(1)).unwrap()));
    c.bench_function("rectify_frame", |b| b.iter(|| warp.rectify(black_box(&frame), points).unwrap()));
}

fn signals(c: &mut Criterion) {
    let mut group = c.benchmark_group("psd");
    for omega in [64usize, 128, 256, 512] {
        let s: Vec<f64> = (0..omega).map(|t| (t as f64 * 0.25).sin() + 0.1 * (t as f64 * 1.7).cos()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(omega), &s, |b, s| b.iter(|| psd(black_box(s), false)));
    }
    group.finish();
    let trace: Vec<[f64; 3]> = (0..64)
        .map(|t| {
            let p = (t as f64 * 0.25).sin();
            [180.0 + 2.0 * p, 120.0 + 3.0 * p, 100.0 + 0.5 * p]
        })
        .collect();
    c.bench_function("chrom_64", |b| b.iter(|| chrom_ppg(black_box(&trace))));
}

fn window(c: &mut Criterion) {
    let v = video(64);
    let cfg = PipelineConfig::default();
    let w = enumerate_windows(v.landmarks(), v.frame_count(), cfg.omega, cfg.min_confidence).unwrap()[0];
    let mut group = c.benchmark_group("window");
    group.sample_size(10);
    group.bench_function("extract_omega_64", |b| b.iter(|| extract_window(&v, &w, &cfg, None).unwrap()));
    group.finish();
}

fn nlm(c: &mut Criterion) {
    let v = video(64);
    let cfg = PipelineConfig::default();
    let stack = fingerprint_stack(&v, &cfg, &cfg.nlm).unwrap().unwrap();
    let small = NlmParams { search: 7, ..cfg.nlm };
    let mut group = c.benchmark_group("nlm");
    group.sample_size(10);
    group.bench_function("search_7", |b| b.iter(|| temporal_nlm_denoise(black_box(&stack), &small).unwrap()));
    group.bench_function("search_21", |b| b.iter(|| temporal_nlm_denoise(black_box(&stack), &cfg.nlm).unwrap()));
    group.finish();
}

fn train_epoch(c: &mut Criterion) {
    let mut ds = SynthDatasetConfig::standard(1, 2, 9);
    ds.video.frames = 128;
    let ds = generate_dataset(&ds).unwrap();
    let cfg = PipelineConfig::default();
    let mut cells = Vec::new();
    for v in &ds.videos {
        for w in enumerate_windows(v.landmarks(), v.frame_count(), cfg.omega, cfg.min_confidence).unwrap() {
            let s = extract_window(v, &w, &cfg, None).unwrap();
            cells.push(s.cell(&v.id, Some(&v.class_label), CellMode::WithPsd).unwrap());
        }
    }
    let one_epoch = TrainConfig {
        epochs: 1,
        val_fraction: 0.0,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function(format!("epoch_{}_cells", cells.len()), |b| {
        b.iter(|| train(black_box(&cells), &ds.classes, &one_epoch).unwrap())
    });
    group.finish();
}

criterion_group!(benches, warp, signals, window, nlm, train_epoch);
criterion_main!(benches);
