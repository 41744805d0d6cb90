use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::network::prepare_input;
use super::{argmax, Architecture, ClassifierModel, Network};
use crate::cell::PpgCell;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 penalty on weight matrices (not biases).
    pub l2: f64,
    pub seed: u64,
    /// Fraction of each class's cells held out for the validation curve.
    pub val_fraction: f64,
    /// Weight examples by `N / (K n_c)` so every class contributes equally.
    pub balance_classes: bool,
    /// Epoch `e` uses `learning_rate / (1 + lr_decay * (e - 1))`.
    pub lr_decay: f64,
    /// Rescale each batch gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: Some(128),
            epochs: 50,
            learning_rate: 0.05,
            batch_size: 16,
            l2: 1e-4,
            seed: 0,
            val_fraction: 0.1,
            balance_classes: true,
            lr_decay: 0.05,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    /// Entry 0 is the untrained network; entry `e` follows epoch `e`.
    pub history: Vec<EpochStats>,
}

impl TrainOutcome {
    /// `epoch,train_loss,train_acc,val_loss,val_acc`
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for e in &self.history {
            s.push_str(&format!(
                "{},{:.6},{:.6},{},{}\n",
                e.epoch,
                e.train_loss,
                e.train_acc,
                opt(e.val_loss),
                opt(e.val_acc)
            ));
        }
        s
    }
}

struct Example {
    x: Vec<f64>,
    label: usize,
    weight: f64,
}

fn labeled(cells: &[PpgCell], classes: &[String]) -> Result<Vec<(usize, usize)>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let label = c
                .meta
                .class_label
                .as_deref()
                .ok_or_else(|| Error::invalid(format!("cell {i} from '{}' has no class label", c.meta.video_id)))?;
            let y = classes
                .iter()
                .position(|k| k == label)
                .ok_or_else(|| Error::UnknownClass(label.to_string()))?;
            Ok((i, y))
        })
        .collect()
}

fn evaluate(net: &Network, examples: &[&Example], l2: f64) -> (f64, f64) {
    let batch: Vec<(&[f64], usize, f64)> = examples.iter().map(|e| (e.x.as_slice(), e.label, e.weight)).collect();
    let loss = net.loss(&batch, l2);
    let correct = examples.iter().filter(|e| argmax(&net.forward(&e.x).probs) == e.label).count();
    (loss, correct as f64 / examples.len().max(1) as f64)
}

fn init_params(arch: &Architecture, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (d, k) = (arch.input_dim(), arch.classes);
    let mut params = vec![0.0; arch.param_count()];
    let mut fill = |slice: &mut [f64], fan_in: usize, gain: f64| {
        let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).unwrap();
        for v in slice {
            *v = normal.sample(rng);
        }
    };
    match arch.hidden {
        Some(h) => {
            fill(&mut params[..h * d], d, 2.0);
            fill(&mut params[h * d + h..h * d + h + k * h], h, 1.0);
        }
        None => fill(&mut params[..k * d], d, 1.0),
    }
    params
}

/// Mini-batch SGD on class-weighted cross-entropy. Single-threaded and
/// fully determined by the data order, `config.seed` and the config.
pub fn train(cells: &[PpgCell], classes: &[String], config: &TrainConfig) -> Result<TrainOutcome> {
    if classes.len() < 2 {
        return Err(Error::invalid(format!("training needs at least 2 classes, got {}", classes.len())));
    }
    if config.batch_size == 0 || config.learning_rate <= 0.0 {
        return Err(Error::Config("batch size and learning rate must be positive".into()));
    }
    if config.lr_decay < 0.0 || config.clip_norm.is_some_and(|c| !(c > 0.0)) {
        return Err(Error::Config("lr_decay must be non-negative and clip_norm positive".into()));
    }
    let first = cells.first().ok_or_else(|| Error::invalid("no training cells"))?;
    let (rows, omega) = (first.rows, first.omega);
    if let Some(c) = cells.iter().find(|c| c.rows != rows || c.omega != omega) {
        return Err(Error::Shape {
            expected: format!("{rows}x{omega} cells"),
            actual: format!("{}x{} cell from '{}'", c.rows, c.omega, c.meta.video_id),
        });
    }
    let labels = labeled(cells, classes)?;
    let k = classes.len();
    let mut counts = vec![0usize; k];
    for &(_, y) in &labels {
        counts[y] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("class '{}' has no training cells", classes[c])));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // per-class validation hold-out
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for class in 0..k {
        let mut members: Vec<usize> = labels.iter().filter(|l| l.1 == class).map(|l| l.0).collect();
        members.shuffle(&mut rng);
        let n_val = ((config.val_fraction * members.len() as f64).floor() as usize).min(members.len() - 1);
        val_idx.extend_from_slice(&members[..n_val]);
        train_idx.extend_from_slice(&members[n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();

    let mut train_counts = vec![0usize; k];
    for &i in &train_idx {
        train_counts[labels[i].1] += 1;
    }
    let n_train = train_idx.len() as f64;
    let class_weight: Vec<f64> = train_counts
        .iter()
        .map(|&n| if config.balance_classes { n_train / (k as f64 * n as f64) } else { 1.0 })
        .collect();
    let make = |i: usize| Example {
        x: prepare_input(&cells[i].values),
        label: labels[i].1,
        weight: class_weight[labels[i].1],
    };
    let train_set: Vec<Example> = train_idx.iter().map(|&i| make(i)).collect();
    let val_set: Vec<Example> = val_idx.iter().map(|&i| make(i)).collect();

    let arch = Architecture {
        rows,
        omega,
        hidden: config.hidden,
        classes: k,
    };
    let mut net = Network::new(arch.clone(), init_params(&arch, &mut rng));

    let stats = |net: &Network, epoch: usize| {
        let tr: Vec<&Example> = train_set.iter().collect();
        let (train_loss, train_acc) = evaluate(net, &tr, config.l2);
        let (val_loss, val_acc) = if val_set.is_empty() {
            (None, None)
        } else {
            let va: Vec<&Example> = val_set.iter().collect();
            let (l, a) = evaluate(net, &va, config.l2);
            (Some(l), Some(a))
        };
        EpochStats {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        }
    };

    let mut history = vec![stats(&net, 0)];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grad = vec![0.0; net.params.len()];
    for epoch in 1..=config.epochs {
        let lr = config.learning_rate / (1.0 + config.lr_decay * (epoch - 1) as f64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let total_w: f64 = chunk.iter().map(|&i| train_set[i].weight).sum();
            for &i in chunk {
                let e = &train_set[i];
                net.accumulate_grad(&e.x, e.label, e.weight / total_w, &mut grad);
            }
            for (off, len) in arch.weight_ranges() {
                for j in off..off + len {
                    grad[j] += config.l2 * net.params[j];
                }
            }
            let mut step = lr;
            if let Some(c) = config.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > c {
                    step *= c / norm;
                }
            }
            for (p, g) in net.params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
        let s = stats(&net, epoch);
        log::debug!(
            "epoch {epoch}: train loss {:.4} acc {:.3}",
            s.train_loss,
            s.train_acc
        );
        history.push(s);
    }

    Ok(TrainOutcome {
        model: ClassifierModel {
            classes: classes.to_vec(),
            architecture: arch,
            weights: net.params.iter().map(|&w| w as f32).collect(),
            training: config.clone(),
        },
        history,
    })
}

/// Largest relative error between the analytic gradient and central finite
/// differences (step `1e-4`) over `samples` randomly chosen parameters.
/// Relative error is `|a - n| / max(|a|, |n|, 1e-7)`.
pub fn gradient_check(
    model: &ClassifierModel,
    batch: &[(&PpgCell, usize)],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    const STEP: f64 = 1e-4;
    let l2 = model.training.l2;
    let net = model.network();
    for (cell, y) in batch {
        model.check_shape(cell)?;
        if *y >= model.classes.len() {
            return Err(Error::invalid(format!("label {y} out of range")));
        }
    }
    let inputs: Vec<Vec<f64>> = batch.iter().map(|(c, _)| prepare_input(&c.values)).collect();
    let examples: Vec<(&[f64], usize, f64)> = inputs.iter().zip(batch).map(|(x, (_, y))| (x.as_slice(), *y, 1.0)).collect();
    let (_, analytic) = net.loss_and_grad(&examples, l2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let i = rng.random_range(0..probe.params.len());
        let orig = probe.params[i];
        probe.params[i] = orig + STEP;
        let plus = probe.loss(&examples, l2);
        probe.params[i] = orig - STEP;
        let minus = probe.loss(&examples, l2);
        probe.params[i] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    Ok(worst)
}
