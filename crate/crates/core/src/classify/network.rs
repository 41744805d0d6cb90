use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub rows: usize,
    pub omega: usize,
    /// Width of the optional ReLU layer.
    pub hidden: Option<usize>,
    pub classes: usize,
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        self.rows * self.omega
    }

    pub fn param_count(&self) -> usize {
        let (d, k) = (self.input_dim(), self.classes);
        match self.hidden {
            Some(h) => h * d + h + k * h + k,
            None => k * d + k,
        }
    }

    /// `(offset, len)` of the weight matrices (not biases), which carry the
    /// L2 penalty.
    pub fn weight_ranges(&self) -> Vec<(usize, usize)> {
        let (d, k) = (self.input_dim(), self.classes);
        match self.hidden {
            Some(h) => vec![(0, h * d), (h * d + h, k * h)],
            None => vec![(0, k * d)],
        }
    }
}

/// Network with `f64` parameters laid out as `W1 (H×D), b1, W2 (K×H), b2`
/// or `W (K×D), b` without the hidden layer. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

/// Numerically stable softmax. The normalizer is summed in sorted order so
/// permuting the logits permutes the output bit-for-bit.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let mut sorted = exps.clone();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centered network input.
pub fn prepare_input(cell_values: &[f32]) -> Vec<f64> {
    cell_values.iter().map(|&v| v as f64 - 0.5).collect()
}

pub(crate) struct Forward {
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Network {
    pub fn new(arch: Architecture, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), arch.param_count(), "parameter count");
        Network { arch, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Network::new(arch, vec![0.0; n])
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Forward {
        let d = self.arch.input_dim();
        let k = self.arch.classes;
        let p = &self.params;
        match self.arch.hidden {
            Some(h) => {
                let (w1, rest) = p.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(k * h);
                let hidden: Vec<f64> = (0..h)
                    .map(|j| (b1[j] + dot(&w1[j * d..(j + 1) * d], x)).max(0.0))
                    .collect();
                let logits: Vec<f64> = (0..k).map(|c| b2[c] + dot(&w2[c * h..(c + 1) * h], &hidden)).collect();
                Forward {
                    hidden,
                    probs: softmax(&logits),
                }
            }
            None => {
                let (w, b) = p.split_at(k * d);
                let logits: Vec<f64> = (0..k).map(|c| b[c] + dot(&w[c * d..(c + 1) * d], x)).collect();
                Forward {
                    hidden: Vec::new(),
                    probs: softmax(&logits),
                }
            }
        }
    }

    pub fn predict(&self, cell_values: &[f32]) -> Vec<f64> {
        self.forward(&prepare_input(cell_values)).probs
    }

    /// Adds `scale * ∂CE/∂θ` for one example to `grad`; returns the example's
    /// cross-entropy.
    pub(crate) fn accumulate_grad(&self, x: &[f64], label: usize, scale: f64, grad: &mut [f64]) -> f64 {
        let d = self.arch.input_dim();
        let k = self.arch.classes;
        let f = self.forward(x);
        let ce = -f.probs[label].max(f64::MIN_POSITIVE).ln();
        let delta: Vec<f64> = (0..k)
            .map(|c| scale * (f.probs[c] - if c == label { 1.0 } else { 0.0 }))
            .collect();
        match self.arch.hidden {
            Some(h) => {
                let w2 = &self.params[h * d + h..h * d + h + k * h];
                let (g_w1, rest) = grad.split_at_mut(h * d);
                let (g_b1, rest) = rest.split_at_mut(h);
                let (g_w2, g_b2) = rest.split_at_mut(k * h);
                for c in 0..k {
                    g_b2[c] += delta[c];
                    for (g, &a) in g_w2[c * h..(c + 1) * h].iter_mut().zip(&f.hidden) {
                        *g += delta[c] * a;
                    }
                }
                for j in 0..h {
                    if f.hidden[j] <= 0.0 {
                        continue;
                    }
                    let dj: f64 = (0..k).map(|c| delta[c] * w2[c * h + j]).sum();
                    if dj == 0.0 {
                        continue;
                    }
                    g_b1[j] += dj;
                    for (g, &xv) in g_w1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += dj * xv;
                    }
                }
            }
            None => {
                let (g_w, g_b) = grad.split_at_mut(k * d);
                for c in 0..k {
                    g_b[c] += delta[c];
                    for (g, &xv) in g_w[c * d..(c + 1) * d].iter_mut().zip(x) {
                        *g += delta[c] * xv;
                    }
                }
            }
        }
        ce
    }

    /// `Σ wᵢ CEᵢ / Σ wᵢ + (λ/2)‖W‖²` and its gradient. An empty batch leaves
    /// only the penalty term.
    pub fn loss_and_grad(&self, batch: &[(&[f64], usize, f64)], l2: f64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let total_w: f64 = batch.iter().map(|b| b.2).sum();
        let mut loss = 0.0;
        if total_w > 0.0 {
            for &(x, y, w) in batch {
                loss += w / total_w * self.accumulate_grad(x, y, w / total_w, &mut grad);
            }
        }
        for (off, len) in self.arch.weight_ranges() {
            for i in off..off + len {
                loss += 0.5 * l2 * self.params[i] * self.params[i];
                grad[i] += l2 * self.params[i];
            }
        }
        (loss, grad)
    }

    pub fn loss(&self, batch: &[(&[f64], usize, f64)], l2: f64) -> f64 {
        let total_w: f64 = batch.iter().map(|b| b.2).sum();
        let mut loss = 0.0;
        if total_w > 0.0 {
            for &(x, y, w) in batch {
                let p = self.forward(x).probs[y];
                loss += w / total_w * -p.max(f64::MIN_POSITIVE).ln();
            }
        }
        for (off, len) in self.arch.weight_ranges() {
            loss += 0.5 * l2 * self.params[off..off + len].iter().map(|v| v * v).sum::<f64>();
        }
        loss
    }
}
