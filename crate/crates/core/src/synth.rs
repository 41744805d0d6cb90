//! Synthetic labeled face videos with a known pulse and per-class injected
//! noise signatures.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, Point2};
use crate::ingest::{DatasetManifest, LandmarkRecord, LandmarkSet, VideoEntry, LANDMARK_COUNT};
use crate::raster::RgbImage;
use crate::rectify::MEAN_FACE_TEMPLATE;
use crate::REAL_CLASS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub fps: f64,
    /// Frames per video.
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Face template scale in pixels.
    pub face_scale: f64,
    /// Mean heart rate in Hz; each identity draws from ± `heart_rate_spread`.
    pub heart_rate: f64,
    pub heart_rate_spread: f64,
    /// Relative modulation of G by the pulse (R gets 0.3 of it).
    pub pulse_amplitude: f64,
    /// Per-pixel Gaussian sensor noise σ in intensity levels.
    pub sensor_noise: f64,
    /// Per-point landmark jitter σ in pixels.
    pub landmark_jitter: f64,
    /// Relative amplitude of the slow global illumination drift.
    pub illumination_drift: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            fps: 30.0,
            frames: 300,
            width: 160,
            height: 160,
            face_scale: 130.0,
            heart_rate: 1.2,
            heart_rate_spread: 0.2,
            pulse_amplitude: 0.01,
            sensor_noise: 2.0,
            landmark_jitter: 0.3,
            illumination_drift: 0.01,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let lo = self.heart_rate - self.heart_rate_spread;
        let hi = self.heart_rate + self.heart_rate_spread;
        if !(0.65..=4.0).contains(&lo) || !(0.65..=4.0).contains(&hi) || self.heart_rate_spread < 0.0 {
            return Err(Error::Config(format!("heart rate {} ± {} leaves [0.65, 4.0] Hz", self.heart_rate, self.heart_rate_spread)));
        }
        let amps = [self.pulse_amplitude, self.sensor_noise, self.landmark_jitter, self.illumination_drift];
        if amps.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("synthetic amplitudes must be non-negative".into()));
        }
        if !(self.fps > 0.0) || self.frames == 0 {
            return Err(Error::Config("fps and frame count must be positive".into()));
        }
        if self.width < 32 || self.height < 32 || !(self.face_scale > 0.0) {
            return Err(Error::Config("frame too small for a face".into()));
        }
        Ok(())
    }
}

/// Additive noise a synthetic "generator" leaves in every frame.
///
/// The static part is a band-limited spatial pattern fixed to the face; the
/// dynamic part is a smooth spatial field times a narrow-band temporal
/// process around `temporal_frequency`, projected on a class chroma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    pub pattern_seed: u64,
    /// Peak of the static pattern in intensity levels.
    pub amplitude: f64,
    /// Static pattern frequency in cycles per face scale.
    pub spatial_frequency: f64,
    /// Peak of the dynamic part in intensity levels.
    pub temporal_amplitude: f64,
    pub temporal_frequency: f64,
}

impl ClassSignature {
    /// Signature of the `k`-th generator class.
    pub fn generator(k: usize, seed: u64) -> Self {
        ClassSignature {
            pattern_seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64 + 1),
            amplitude: 3.0,
            spatial_frequency: 40.0,
            temporal_amplitude: 2.0,
            temporal_frequency: 2.6 + 1.6 * k as f64,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.pattern_seed);
        rng.set_stream(stream);
        rng
    }

    /// Static pattern sampled at face-relative pixel coordinates, RGB.
    pub fn static_pattern(&self, u: f64, v: f64, scale: f64, waves: &[PlaneWave]) -> [f64; 3] {
        let mut out = [0.0; 3];
        let k = self.spatial_frequency / scale;
        for w in waves {
            let s = (TAU * k * (w.dir.0 * u + w.dir.1 * v) + w.phase).cos();
            for c in 0..3 {
                out[c] += s * w.chroma[c];
            }
        }
        let norm = self.amplitude / (waves.len() as f64).sqrt();
        out.map(|x| x * norm)
    }

    pub fn plane_waves(&self) -> Vec<PlaneWave> {
        let mut rng = self.rng(1);
        (0..12)
            .map(|_| {
                let theta = rng.random_range(0.0..TAU);
                let mut chroma = [0.0; 3];
                for c in &mut chroma {
                    *c = rng.random_range(-1.0..1.0);
                }
                PlaneWave {
                    dir: (theta.cos(), theta.sin()),
                    phase: rng.random_range(0.0..TAU),
                    chroma,
                }
            })
            .collect()
    }

    /// Chroma direction of the dynamic part. Relative to a nominal skin
    /// tone its two chrominance projections `3r - 2g` and `1.5r + g - 1.5b`
    /// have opposite signs and comparable size, like a blood-volume pulse.
    pub fn chroma(&self) -> [f64; 3] {
        let mut rng = self.rng(2);
        loop {
            let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 0.2 {
                continue;
            }
            let d = v.map(|x| x / n);
            let (x, y) = chrominance(d);
            if x * y < 0.0 && x.abs().min(y.abs()) > 0.4 * x.abs().max(y.abs()) {
                return d;
            }
        }
    }

    /// Low-frequency spatial weighting of the dynamic part, in [0, 1].
    fn field(&self, u: f64, v: f64, scale: f64, params: &[f64; 4]) -> f64 {
        let a = (TAU * (params[0] * u / scale) + params[1]).cos();
        let b = (TAU * (params[2] * v / scale) + params[3]).cos();
        0.5 + 0.25 * (a + b)
    }

    fn field_params(&self) -> [f64; 4] {
        let mut rng = self.rng(3);
        [rng.random_range(0.5..1.5), rng.random_range(0.0..TAU), rng.random_range(0.5..1.5), rng.random_range(0.0..TAU)]
    }
}

/// Nominal skin tone used to reason about relative chroma.
pub const NOMINAL_SKIN: [f64; 3] = [195.0, 135.0, 110.0];

/// CHROM projections of an absolute RGB change on [`NOMINAL_SKIN`].
pub fn chrominance(c: [f64; 3]) -> (f64, f64) {
    let [r, g, b] = [c[0] / NOMINAL_SKIN[0], c[1] / NOMINAL_SKIN[1], c[2] / NOMINAL_SKIN[2]];
    (3.0 * r - 2.0 * g, 1.5 * r + g - 1.5 * b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub dir: (f64, f64),
    pub phase: f64,
    pub chroma: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    /// `None` for pristine videos.
    pub signature: Option<ClassSignature>,
    /// Draw identities no other class uses.
    #[serde(default)]
    pub fresh_identities: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthDatasetConfig {
    pub video: SynthConfig,
    pub classes: Vec<SynthClass>,
    pub videos_per_class: usize,
    pub split_seed: u64,
}

impl Default for SynthDatasetConfig {
    fn default() -> Self {
        SynthDatasetConfig::standard(4, 40, 0)
    }
}

impl SynthDatasetConfig {
    /// `generators` signature classes named `gen0..` plus "real".
    pub fn standard(generators: usize, videos_per_class: usize, seed: u64) -> Self {
        let mut classes: Vec<SynthClass> = (0..generators)
            .map(|k| SynthClass {
                name: format!("gen{k}"),
                signature: Some(ClassSignature::generator(k, seed)),
                fresh_identities: false,
            })
            .collect();
        classes.push(SynthClass {
            name: REAL_CLASS.into(),
            signature: None,
            fresh_identities: false,
        });
        SynthDatasetConfig {
            video: SynthConfig {
                seed,
                ..SynthConfig::default()
            },
            classes,
            videos_per_class,
            split_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.video.validate()?;
        if self.classes.is_empty() || self.videos_per_class == 0 {
            return Err(Error::Config("synthetic dataset needs classes and videos".into()));
        }
        let mut names: Vec<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate synthetic class name".into()));
        }
        for c in &self.classes {
            if let Some(s) = c.signature {
                if !(s.amplitude >= 0.0 && s.temporal_amplitude >= 0.0) {
                    return Err(Error::Config(format!("class '{}' has a negative amplitude", c.name)));
                }
            }
        }
        Ok(())
    }
}

/// Ground truth written next to each generated video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub video_id: String,
    pub class_label: String,
    pub identity: u64,
    pub fps: f64,
    pub heart_rate: f64,
    /// Pulse phase in radians per frame; the waveform is its sine.
    pub pulse_phase: Vec<f64>,
    pub signature: Option<ClassSignature>,
    /// Frequencies (Hz) of the dynamic signature components.
    pub signature_frequencies: Vec<f64>,
}

/// One fully specified synthetic video; frames render on demand.
#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub id: String,
    pub class_label: String,
    pub config: SynthConfig,
    pub truth: GroundTruth,
    landmarks: LandmarkSet,
    origin: Point2,
    /// Identity appearance plus the static signature, RGB.
    base: Vec<f32>,
    /// Pulse-bearing skin mask times 1, or 0.
    skin: Vec<f32>,
    /// Dynamic signature weight per pixel (already masked).
    field: Vec<f32>,
    chroma: [f64; 3],
    dynamic: Vec<(f64, f64)>,
    illum_phase: f64,
    noise_seed: u64,
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Landmark indices outlining the skin that carries the pulse: jaw, then
/// the brows back across.
fn skin_outline(points: &[Point2]) -> Vec<Point2> {
    let mut poly: Vec<Point2> = points[0..17].to_vec();
    poly.extend(points[17..27].iter().rev().map(|p| Point2::new(p.x, p.y - 6.0)));
    poly
}

fn fill(poly: &[Point2], mask: &mut [bool], width: usize, height: usize, value: bool) {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in poly {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let ys = (y0.floor().max(0.0) as usize)..=(y1.ceil().min(height as f64 - 1.0).max(0.0) as usize);
    for y in ys {
        for x in (x0.floor().max(0.0) as usize)..=(x1.ceil().min(width as f64 - 1.0).max(0.0) as usize) {
            if point_in_polygon(Point2::new(x as f64, y as f64), poly) {
                mask[y * width + x] = value;
            }
        }
    }
}

impl SynthVideo {
    pub fn new(config: &SynthConfig, class: &SynthClass, identity: u64, index: usize) -> Result<Self> {
        config.validate()?;
        let id = format!("{}_{index:03}", class.name);
        let (w, h) = (config.width, config.height);
        let mut id_rng = ChaCha8Rng::seed_from_u64(mix(config.seed, identity));
        let mut video_rng = ChaCha8Rng::seed_from_u64(mix(mix(config.seed, fnv1a(&class.name)), index as u64));

        let heart_rate = config.heart_rate + config.heart_rate_spread * id_rng.random_range(-1.0..=1.0);
        let origin = Point2::new(
            (w as f64 - config.face_scale * 0.9) / 2.0 - 0.08 * config.face_scale,
            (h as f64 - config.face_scale * 0.88) / 2.0 - 0.18 * config.face_scale,
        );
        let template: Vec<Point2> = MEAN_FACE_TEMPLATE
            .iter()
            .map(|p| Point2::new(origin.x + p[0] * config.face_scale, origin.y + p[1] * config.face_scale))
            .collect();

        // identity appearance
        let skin_tone = [
            id_rng.random_range(175.0..215.0),
            id_rng.random_range(120.0..150.0),
            id_rng.random_range(95.0..125.0),
        ];
        let background: [f64; 3] = std::array::from_fn(|_| id_rng.random_range(40.0..90.0));
        let light = (id_rng.random_range(-0.15..0.15), id_rng.random_range(-0.1..0.1));
        let texture: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    id_rng.random_range(1.0..4.0),
                    id_rng.random_range(1.0..4.0),
                    id_rng.random_range(0.0..TAU),
                    id_rng.random_range(1.0..4.0),
                )
            })
            .collect();

        let mut skin_mask = vec![false; w * h];
        fill(&skin_outline(&template), &mut skin_mask, w, h, true);
        let mut features = vec![false; w * h];
        fill(&template[36..42], &mut features, w, h, true);
        fill(&template[42..48], &mut features, w, h, true);
        let mut mouth = vec![false; w * h];
        fill(&template[48..60], &mut mouth, w, h, true);

        let waves = class.signature.map(|s| s.plane_waves()).unwrap_or_default();
        let field_params = class.signature.map(|s| s.field_params());
        let mut base = vec![0.0f32; w * h * 3];
        let mut skin = vec![0.0f32; w * h];
        let mut field = vec![0.0f32; w * h];
        let center = Point2::new(origin.x + 0.52 * config.face_scale, origin.y + 0.6 * config.face_scale);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (u, v) = ((x as f64 - center.x) / config.face_scale, (y as f64 - center.y) / config.face_scale);
                let mut px = background;
                if skin_mask[i] {
                    let shade = 1.0 + light.0 * u + light.1 * v - 0.25 * (u * u + v * v);
                    let tex: f64 = texture.iter().map(|t| t.3 * (TAU * (t.0 * u + t.1 * v) + t.2).sin()).sum();
                    px = skin_tone.map(|c| c * shade + tex);
                    if features[i] {
                        px = [60.0, 45.0, 40.0];
                    } else if mouth[i] {
                        px = [150.0, 70.0, 75.0];
                    } else {
                        skin[i] = 1.0;
                    }
                }
                if let Some(sig) = class.signature {
                    if skin_mask[i] {
                        let (fu, fv) = (x as f64 - origin.x, y as f64 - origin.y);
                        let p = sig.static_pattern(fu, fv, config.face_scale, &waves);
                        for c in 0..3 {
                            px[c] += p[c];
                        }
                        field[i] = sig.field(fu, fv, config.face_scale, field_params.as_ref().unwrap()) as f32;
                    }
                }
                for c in 0..3 {
                    base[i * 3 + c] = px[c] as f32;
                }
            }
        }

        let pulse_phase0 = video_rng.random_range(0.0..TAU);
        let pulse_phase: Vec<f64> = (0..config.frames)
            .map(|t| pulse_phase0 + TAU * heart_rate * t as f64 / config.fps)
            .collect();
        let dynamic: Vec<(f64, f64)> = match class.signature {
            Some(s) if s.temporal_amplitude > 0.0 => (0..3)
                .map(|k| {
                    let f = s.temporal_frequency * (1.0 + 0.06 * (k as f64 - 1.0)) + video_rng.random_range(-0.05..0.05);
                    (f, video_rng.random_range(0.0..TAU))
                })
                .collect(),
            _ => Vec::new(),
        };
        let illum_phase = video_rng.random_range(0.0..TAU);
        let noise_seed = video_rng.random();

        let jitter = Normal::new(0.0, config.landmark_jitter.max(1e-12)).expect("finite σ");
        let mut lm_rng = ChaCha8Rng::seed_from_u64(mix(noise_seed, 0x1a2b));
        let records = (0..config.frames)
            .map(|frame| LandmarkRecord {
                frame,
                face_id: 0,
                confidence: 1.0,
                points: template
                    .iter()
                    .map(|p| {
                        if config.landmark_jitter > 0.0 {
                            Point2::new(p.x + jitter.sample(&mut lm_rng), p.y + jitter.sample(&mut lm_rng))
                        } else {
                            *p
                        }
                    })
                    .collect(),
            })
            .collect();
        let landmarks = LandmarkSet::new(records)?;
        debug_assert_eq!(template.len(), LANDMARK_COUNT);

        Ok(SynthVideo {
            truth: GroundTruth {
                video_id: id.clone(),
                class_label: class.name.clone(),
                identity,
                fps: config.fps,
                heart_rate,
                pulse_phase,
                signature: class.signature,
                signature_frequencies: dynamic.iter().map(|d| d.0).collect(),
            },
            id,
            class_label: class.name.clone(),
            config: config.clone(),
            landmarks,
            origin,
            base,
            skin,
            field,
            chroma: class.signature.map(|s| s.chroma()).unwrap_or([0.0; 3]),
            dynamic,
            illum_phase,
            noise_seed,
        })
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    /// Top-left of the face template in frame pixels.
    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn frame_count(&self) -> usize {
        self.config.frames
    }

    /// Ground-truth pulse waveform value at frame `t`.
    pub fn pulse(&self, t: usize) -> f64 {
        self.truth.pulse_phase[t].sin()
    }

    fn dynamic_value(&self, t: usize) -> f64 {
        if self.dynamic.is_empty() {
            return 0.0;
        }
        let time = t as f64 / self.config.fps;
        let s: f64 = self.dynamic.iter().map(|(f, p)| (TAU * f * time + p).sin()).sum();
        s / (self.dynamic.len() as f64).sqrt()
    }

    /// Renders frame `t`. Noise comes from a per-frame stream, so frames can
    /// be rendered in any order with identical results.
    pub fn frame(&self, t: usize) -> Result<RgbImage> {
        if t >= self.config.frames {
            return Err(Error::invalid(format!("frame {t} beyond {} frames of {}", self.config.frames, self.id)));
        }
        let cfg = &self.config;
        let time = t as f64 / cfg.fps;
        let pulse = cfg.pulse_amplitude * self.pulse(t);
        let gain = [1.0 + 0.3 * pulse, 1.0 + pulse, 1.0];
        let illum = 1.0 + cfg.illumination_drift * (TAU * 0.05 * time + self.illum_phase).sin();
        let amp = self.truth.signature.map_or(0.0, |s| s.temporal_amplitude) * self.dynamic_value(t);
        let dyn_rgb = self.chroma.map(|c| c * amp);
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        rng.set_stream(t as u64 + 1);
        let noise = Normal::new(0.0, cfg.sensor_noise.max(1e-12)).expect("finite σ");
        let with_noise = cfg.sensor_noise > 0.0;
        let mut img = RgbImage::new(cfg.width, cfg.height);
        for i in 0..cfg.width * cfg.height {
            let s = self.skin[i] as f64;
            let f = self.field[i] as f64;
            for c in 0..3 {
                let mut v = self.base[i * 3 + c] as f64 * (1.0 + s * (gain[c] - 1.0)) + f * dyn_rgb[c];
                v *= illum;
                if with_noise {
                    v += noise.sample(&mut rng);
                }
                img.data[i * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
        Ok(img)
    }

    /// The static signature alone, `128 + gain·pattern`, over this video's
    /// skin; zero-signature videos give a flat image.
    pub fn static_pattern_image(&self, gain: f64) -> RgbImage {
        let cfg = &self.config;
        let mut img = RgbImage::filled(cfg.width, cfg.height, [128; 3]);
        let Some(sig) = self.truth.signature else {
            return img;
        };
        let waves = sig.plane_waves();
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                let i = y * cfg.width + x;
                if self.field[i] == 0.0 && self.skin[i] == 0.0 {
                    continue;
                }
                let p = sig.static_pattern(x as f64 - self.origin.x, y as f64 - self.origin.y, cfg.face_scale, &waves);
                img.put(x, y, p.map(|v| (128.0 + gain * v).round().clamp(0.0, 255.0) as u8));
            }
        }
        img
    }

    /// Writes `%06d.png` frames, `landmarks.jsonl` and `truth.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<VideoEntry> {
        let frames = dir.join("frames");
        std::fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
        for t in 0..self.config.frames {
            self.frame(t)?.save_png(&frames.join(format!("{t:06}.png")))?;
        }
        let lm = dir.join("landmarks.jsonl");
        self.landmarks.save(&lm)?;
        let truth = dir.join("truth.json");
        let text = serde_json::to_string_pretty(&self.truth).map_err(|e| Error::invalid(e.to_string()))?;
        std::fs::write(&truth, text).map_err(|e| Error::io(&truth, e))?;
        Ok(VideoEntry {
            id: self.id.clone(),
            class_label: self.class_label.clone(),
            frames_path: frames,
            landmarks_path: lm,
            fps: self.config.fps,
        })
    }
}

/// All videos of a synthetic dataset, in memory.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub classes: Vec<String>,
    pub split_seed: u64,
    pub videos: Vec<SynthVideo>,
}

/// Builds every video description (frames are rendered lazily).
pub fn generate_dataset(config: &SynthDatasetConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut videos = Vec::with_capacity(config.classes.len() * config.videos_per_class);
    for class in &config.classes {
        for j in 0..config.videos_per_class {
            let identity = if class.fresh_identities {
                mix(fnv1a(&class.name), j as u64) | (1 << 63)
            } else {
                j as u64
            };
            videos.push(SynthVideo::new(&config.video, class, identity, j)?);
        }
    }
    Ok(SynthDataset {
        classes: config.classes.iter().map(|c| c.name.clone()).collect(),
        split_seed: config.split_seed,
        videos,
    })
}

impl SynthDataset {
    /// Manifest describing these videos; paths are placeholders unless the
    /// dataset has been written.
    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            classes: self.classes.clone(),
            split_seed: self.split_seed,
            videos: self
                .videos
                .iter()
                .map(|v| VideoEntry {
                    id: v.id.clone(),
                    class_label: v.class_label.clone(),
                    frames_path: PathBuf::from(&v.id).join("frames"),
                    landmarks_path: PathBuf::from(&v.id).join("landmarks.jsonl"),
                    fps: v.config.fps,
                })
                .collect(),
        }
    }

    /// Writes every video under `dir/<id>/` and `dir/manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<DatasetManifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = self.manifest();
        manifest.videos = self.videos.iter().map(|v| v.write(&dir.join(&v.id))).collect::<Result<_>>()?;
        manifest.save(&dir.join("manifest.json"))?;
        Ok(manifest)
    }
}
