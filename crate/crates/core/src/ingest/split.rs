use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetManifest, VideoEntry};
use crate::error::{Error, Result};

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Per-class stratified split. Each class contributes `round(fraction * n)`
/// videos to the training half (clamped so both halves get at least one).
/// The result depends only on the set of videos and `split_seed`, not on
/// their order in the manifest.
pub fn split_train_test(
    manifest: &DatasetManifest,
    train_fraction: f64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} outside (0,1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in &manifest.classes {
        let mut videos: Vec<&VideoEntry> = manifest
            .videos
            .iter()
            .filter(|v| &v.class_label == class)
            .collect();
        if videos.is_empty() {
            continue;
        }
        if videos.len() < 2 {
            return Err(Error::invalid(format!(
                "class '{class}' has {} video(s); a split needs at least 2",
                videos.len()
            )));
        }
        videos.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(manifest.split_seed ^ fnv1a(class));
        videos.shuffle(&mut rng);
        let n = videos.len();
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let (a, b) = videos.split_at(n_train);
        train.extend(a.iter().map(|&v| v.clone()));
        test.extend(b.iter().map(|&v| v.clone()));
    }
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    let half = |videos| DatasetManifest {
        classes: manifest.classes.clone(),
        split_seed: manifest.split_seed,
        videos,
    };
    Ok((half(train), half(test)))
}
