//! Classification metrics and reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{fit, HyperParams};
use crate::tabular::Dataset;
use crate::tune::stratified_kfold;

/// Binary confusion counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidDataset("no labels to compare".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == 1, p == 1) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when a metric had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Indexed by class label.
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
    pub macro_avg: AveragedMetrics,
    pub weighted_avg: AveragedMetrics,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let (precision, zp) = ratio(tp, tp + fp);
    let (recall, zr) = ratio(tp, tp + fn_);
    let (f1, zf) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: tp + fn_,
        zero_division: zp || zr || zf,
    }
}

pub fn report(cm: &ConfusionMatrix) -> ClassificationReport {
    let pos = class_metrics(cm.tp, cm.fp, cm.fn_);
    // class 0 viewed as positive: its true positives are the true negatives
    let neg = class_metrics(cm.tn, cm.fn_, cm.fp);
    let classes = [neg, pos];
    let total = cm.total() as f64;
    let avg = |w: [f64; 2]| AveragedMetrics {
        precision: w[0] * neg.precision + w[1] * pos.precision,
        recall: w[0] * neg.recall + w[1] * pos.recall,
        f1: w[0] * neg.f1 + w[1] * pos.f1,
    };
    ClassificationReport {
        classes,
        accuracy: cm.accuracy(),
        macro_avg: avg([0.5, 0.5]),
        weighted_avg: avg([neg.support as f64 / total, pos.support as f64 / total]),
        confusion: *cm,
    }
}

impl ClassificationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width table: class, precision, recall, f1, support.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>14} {:>10} {:>10} {:>10} {:>10}\n\n",
            "class", "precision", "recall", "f1", "support"
        );
        for (label, m) in self.classes.iter().enumerate() {
            out.push_str(&format!(
                "{:>14} {:>10.4} {:>10.4} {:>10.4} {:>10}\n",
                label, m.precision, m.recall, m.f1, m.support
            ));
        }
        let total = self.confusion.total();
        out.push('\n');
        out.push_str(&format!(
            "{:>14} {:>10} {:>10} {:>10.4} {:>10}\n",
            "accuracy", "", "", self.accuracy, total
        ));
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            out.push_str(&format!(
                "{:>14} {:>10.4} {:>10.4} {:>10.4} {:>10}\n",
                name, a.precision, a.recall, a.f1, total
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScores {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
}

pub fn cross_val_accuracy(
    params: &HyperParams,
    ds: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<CvScores> {
    use rayon::prelude::*;
    let splits = stratified_kfold(ds.y(), folds, seed)?;
    let fold_accuracies = splits
        .par_iter()
        .map(|(train_idx, val_idx)| {
            let model = fit(params, &ds.select(train_idx))?;
            let val = ds.select(val_idx);
            let pred = model.predict_dataset(&val)?;
            Ok(confusion(val.y(), &pred)?.accuracy())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(CvScores {
        fold_accuracies,
        mean,
    })
}
