//! Confusion matrices, accuracy / precision / recall / F1, and point-to-image
//! label aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Target;
use crate::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<Target>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

pub fn confusion(
    classes: &[Target],
    truths: &[Target],
    predictions: &[Target],
) -> Result<ConfusionMatrix> {
    if truths.len() != predictions.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Data(
            "confusion matrix needs at least one sample".into(),
        ));
    }
    let index = |t: &Target| {
        classes
            .iter()
            .position(|c| c == t)
            .ok_or_else(|| Error::Data(format!("label '{t}' is not in the class list")))
    };
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (t, p) in truths.iter().zip(predictions) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalLevel {
    Point,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: Target,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub level: EvalLevel,
    pub samples: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn class(&self, t: Target) -> Option<&ClassScores> {
        self.per_class.iter().find(|c| c.class == t)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix, level: EvalLevel) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("metrics of an empty confusion matrix".into()));
    }
    let per_class: Vec<ClassScores> = cm
        .classes
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let tp = cm.counts[i][i];
            let precision = ratio(tp, cm.column_sum(i));
            let recall = ratio(tp, cm.row_sum(i));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScores {
                class,
                support: cm.row_sum(i),
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.f1).sum::<f64>() / per_class.len() as f64
    };
    Ok(MetricsReport {
        level,
        samples: total,
        accuracy: ratio(cm.trace(), total),
        macro_f1,
        per_class,
        confusion: cm.clone(),
    })
}

/// One point-level prediction feeding image aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointVote {
    pub image_id: String,
    pub predicted: Target,
    pub margin: f64,
}

/// Majority label per image; ties go to the larger summed margin, then to
/// the earlier class. Images come back sorted by id.
pub fn aggregate_image(votes: &[PointVote]) -> Result<BTreeMap<String, Target>> {
    let mut tallies: BTreeMap<&str, BTreeMap<Target, (usize, f64)>> = BTreeMap::new();
    for v in votes {
        let e = tallies
            .entry(v.image_id.as_str())
            .or_default()
            .entry(v.predicted)
            .or_insert((0, 0.0));
        e.0 += 1;
        e.1 += v.margin;
    }
    tallies
        .into_iter()
        .map(|(id, t)| {
            let best = t
                .iter()
                .max_by(|a, b| {
                    a.1 .0
                        .cmp(&b.1 .0)
                        .then(a.1 .1.total_cmp(&b.1 .1))
                        .then(b.0.cmp(a.0))
                })
                .map(|(c, _)| *c)
                .ok_or_else(|| Error::Data(format!("image '{id}' has no point predictions")))?;
            Ok((id.to_string(), best))
        })
        .collect()
}
