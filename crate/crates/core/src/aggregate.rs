//! Per-video verdicts from per-cell class probabilities, and evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{argmax, CellPrediction};
use crate::error::{Error, Result};
use crate::ingest::DatasetManifest;
use crate::REAL_CLASS;

/// Logits are taken of probabilities clipped to `[ε, 1-ε]`.
pub const LOGIT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Mode of the per-cell argmaxes.
    #[serde(rename = "majority")]
    Majority,
    /// Per class, mean of its probabilities over cells where it exceeds 0.5.
    /// When no probability in the video exceeds 0.5, the plain mean.
    #[serde(rename = "mean-thresh")]
    MeanAboveHalf,
    /// Per class, highest probability over cells.
    #[serde(rename = "max")]
    Max,
    /// Per class, mean of its two highest probabilities.
    #[serde(rename = "top2")]
    TopTwoMean,
    /// Per class, mean log-odds.
    #[serde(rename = "logodds")]
    MeanLogOdds,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Majority,
        Scheme::MeanAboveHalf,
        Scheme::Max,
        Scheme::TopTwoMean,
        Scheme::MeanLogOdds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Majority => "majority",
            Scheme::MeanAboveHalf => "mean-thresh",
            Scheme::Max => "max",
            Scheme::TopTwoMean => "top2",
            Scheme::MeanLogOdds => "logodds",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}' (expected majority|mean-thresh|max|top2|logodds)")))
    }
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(LOGIT_EPSILON, 1.0 - LOGIT_EPSILON);
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub class_index: usize,
    pub scores: Vec<f64>,
    /// More than one class shared the top score; the lowest index won.
    pub tie: bool,
}

fn pick(scores: &[f64]) -> (usize, bool) {
    let best = argmax(scores);
    let tie = scores.iter().filter(|&&s| s == scores[best]).count() > 1;
    (best, tie)
}

fn check(preds: &[CellPrediction]) -> Result<usize> {
    let first = preds.first().ok_or_else(|| Error::invalid("no cell predictions to aggregate"))?;
    let k = first.rho.len();
    if k == 0 || preds.iter().any(|p| p.rho.len() != k) {
        return Err(Error::Shape {
            expected: format!("{k} class probabilities per cell"),
            actual: "mixed lengths".into(),
        });
    }
    Ok(k)
}

/// Scores every class under one voting scheme.
pub fn aggregate(preds: &[CellPrediction], scheme: Scheme) -> Result<SchemeResult> {
    let k = check(preds)?;
    let n = preds.len() as f64;
    let column = |c: usize| preds.iter().map(move |p| p.rho[c]);
    let scores: Vec<f64> = match scheme {
        Scheme::Majority => {
            let mut votes = vec![0.0; k];
            for p in preds {
                votes[p.argmax()] += 1.0;
            }
            votes.into_iter().map(|v| v / n).collect()
        }
        Scheme::MeanAboveHalf => {
            if preds.iter().all(|p| p.rho.iter().all(|&r| r <= 0.5)) {
                (0..k).map(|c| column(c).sum::<f64>() / n).collect()
            } else {
                (0..k)
                    .map(|c| {
                        let (sum, count) = column(c).filter(|&r| r > 0.5).fold((0.0, 0usize), |(s, m), r| (s + r, m + 1));
                        if count == 0 {
                            0.0
                        } else {
                            sum / count as f64
                        }
                    })
                    .collect()
            }
        }
        Scheme::Max => (0..k).map(|c| column(c).fold(f64::NEG_INFINITY, f64::max)).collect(),
        Scheme::TopTwoMean => (0..k)
            .map(|c| {
                let (mut a, mut b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for r in column(c) {
                    if r > a {
                        b = a;
                        a = r;
                    } else if r > b {
                        b = r;
                    }
                }
                if preds.len() == 1 {
                    a
                } else {
                    (a + b) / 2.0
                }
            })
            .collect(),
        Scheme::MeanLogOdds => (0..k).map(|c| column(c).map(logit).sum::<f64>() / n).collect(),
    };
    let (class_index, tie) = pick(&scores);
    Ok(SchemeResult {
        scheme,
        class_index,
        scores,
        tie,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub window_start: usize,
    pub class: String,
    pub confidence: f64,
}

/// Verdict for one face of one video under every scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoVerdict {
    pub video_id: String,
    pub face_id: u32,
    pub classes: Vec<String>,
    pub cell_count: usize,
    pub results: Vec<SchemeResult>,
    pub timeline: Vec<TimelineEntry>,
}

impl VideoVerdict {
    pub fn result(&self, scheme: Scheme) -> &SchemeResult {
        self.results.iter().find(|r| r.scheme == scheme).expect("every scheme is computed")
    }

    pub fn class(&self, scheme: Scheme) -> &str {
        &self.classes[self.result(scheme).class_index]
    }

    pub fn to_record(&self) -> VerdictRecord {
        VerdictRecord {
            video: self.video_id.clone(),
            face_id: self.face_id,
            cell_count: self.cell_count,
            scheme_results: self
                .results
                .iter()
                .map(|r| {
                    (
                        r.scheme.name().to_string(),
                        SchemeRecord {
                            class: self.classes[r.class_index].clone(),
                            scores: self.classes.iter().cloned().zip(r.scores.iter().copied()).collect(),
                            tie: r.tie,
                        },
                    )
                })
                .collect(),
            timeline: self.timeline.clone(),
        }
    }
}

/// JSON form of a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub video: String,
    pub face_id: u32,
    pub cell_count: usize,
    pub scheme_results: BTreeMap<String, SchemeRecord>,
    pub timeline: Vec<TimelineEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRecord {
    pub class: String,
    pub scores: BTreeMap<String, f64>,
    pub tie: bool,
}

/// Verdict for the cells of a single (video, face), ordered by window start.
pub fn build_verdict(preds: &[CellPrediction], classes: &[String]) -> Result<VideoVerdict> {
    let k = check(preds)?;
    if k != classes.len() {
        return Err(Error::Shape {
            expected: format!("{} classes", classes.len()),
            actual: format!("{k} probabilities"),
        });
    }
    let first = &preds[0].meta;
    if preds.iter().any(|p| p.meta.video_id != first.video_id || p.meta.face_id != first.face_id) {
        return Err(Error::invalid("predictions from different videos or faces"));
    }
    let results = Scheme::ALL.into_iter().map(|s| aggregate(preds, s)).collect::<Result<Vec<_>>>()?;
    let mut ordered: Vec<&CellPrediction> = preds.iter().collect();
    ordered.sort_by_key(|p| p.meta.window_start);
    let timeline = ordered
        .iter()
        .map(|p| {
            let c = p.argmax();
            TimelineEntry {
                window_start: p.meta.window_start,
                class: classes[c].clone(),
                confidence: p.rho[c],
            }
        })
        .collect();
    Ok(VideoVerdict {
        video_id: first.video_id.clone(),
        face_id: first.face_id,
        classes: classes.to_vec(),
        cell_count: preds.len(),
        results,
        timeline,
    })
}

/// Groups predictions by (video, face) and builds one verdict per group,
/// sorted by video id then face id.
pub fn verdicts_by_face(preds: Vec<CellPrediction>, classes: &[String]) -> Result<Vec<VideoVerdict>> {
    let mut groups: BTreeMap<(String, u32), Vec<CellPrediction>> = BTreeMap::new();
    for p in preds {
        groups.entry((p.meta.video_id.clone(), p.meta.face_id)).or_default().push(p);
    }
    groups.values().map(|g| build_verdict(g, classes)).collect()
}

/// Per-video binary roll-up: `true` if any face is judged fake under `scheme`.
pub fn any_fake(verdicts: &[VideoVerdict], scheme: Scheme) -> BTreeMap<String, bool> {
    let mut out = BTreeMap::new();
    for v in verdicts {
        let fake = v.class(scheme) != REAL_CLASS;
        *out.entry(v.video_id.clone()).or_insert(false) |= fake;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scheme: Scheme,
    pub classes: Vec<String>,
    /// `counts[true][predicted]`
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized `counts`; rows without samples are zero.
    pub confusion: Vec<Vec<f64>>,
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Mean of the defined per-class accuracies.
    pub macro_accuracy: f64,
    pub overall_accuracy: f64,
    /// Fake-vs-real accuracy with all non-real classes merged, when a
    /// `real` class exists.
    pub binary_accuracy: Option<f64>,
    pub samples: usize,
}

impl EvaluationReport {
    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for c in &self.classes {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            s.push_str(&self.classes[i]);
            for v in row {
                s.push_str(&format!(",{v:.6}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Confusion matrix and accuracies of face-level verdicts against manifest labels.
pub fn evaluate(verdicts: &[VideoVerdict], manifest: &DatasetManifest, scheme: Scheme) -> Result<EvaluationReport> {
    let k = manifest.classes.len();
    let mut counts = vec![vec![0usize; k]; k];
    let real = manifest.class_index(REAL_CLASS);
    let (mut bin_ok, mut bin_n) = (0usize, 0usize);
    for v in verdicts {
        let entry = manifest.video(&v.video_id).ok_or_else(|| Error::invalid(format!("verdict for unknown video '{}'", v.video_id)))?;
        if v.classes != manifest.classes {
            return Err(Error::ClassMismatch {
                model: v.classes.clone(),
                manifest: manifest.classes.clone(),
            });
        }
        let t = manifest.class_index(&entry.class_label).ok_or_else(|| Error::UnknownClass(entry.class_label.clone()))?;
        let p = v.result(scheme).class_index;
        counts[t][p] += 1;
        if let Some(r) = real {
            bin_n += 1;
            if (t == r) == (p == r) {
                bin_ok += 1;
            }
        }
    }
    let samples = verdicts.len();
    let confusion: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| {
            let n: usize = row.iter().sum();
            row.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
        })
        .collect();
    let per_class_accuracy: Vec<Option<f64>> = (0..k)
        .map(|i| {
            let n: usize = counts[i].iter().sum();
            (n > 0).then(|| counts[i][i] as f64 / n as f64)
        })
        .collect();
    let defined: Vec<f64> = per_class_accuracy.iter().flatten().copied().collect();
    let macro_accuracy = if defined.is_empty() { 0.0 } else { defined.iter().sum::<f64>() / defined.len() as f64 };
    let correct: usize = (0..k).map(|i| counts[i][i]).sum();
    Ok(EvaluationReport {
        scheme,
        classes: manifest.classes.clone(),
        counts,
        confusion,
        per_class_accuracy,
        macro_accuracy,
        overall_accuracy: if samples == 0 { 0.0 } else { correct as f64 / samples as f64 },
        binary_accuracy: (real.is_some() && bin_n > 0).then(|| bin_ok as f64 / bin_n as f64),
        samples,
    })
}
