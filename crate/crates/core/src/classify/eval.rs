use serde::{Deserialize, Serialize};

use super::{ClassifyError, TaxonLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when precision or recall had a zero denominator and was reported as 0.
    pub undefined: bool,
}

/// Share of events whose label matches at each inner rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAccuracy {
    pub genus: f64,
    pub family: f64,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Sorted union of true and predicted class keys.
    pub classes: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[t][p]`: events of true class `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
    pub supports: Vec<usize>,
    pub rank_accuracy: RankAccuracy,
}

impl EvalReport {
    /// Confusion matrix as CSV with a `truth` column and one column per class.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("truth");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            out.push_str(c);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn evaluate(predictions: &[TaxonLabel], truths: &[TaxonLabel]) -> Result<EvalReport, ClassifyError> {
    if predictions.len() != truths.len() {
        return Err(ClassifyError::LengthMismatch(predictions.len(), truths.len()));
    }
    if truths.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let pred_keys: Vec<String> = predictions.iter().map(TaxonLabel::key).collect();
    let true_keys: Vec<String> = truths.iter().map(TaxonLabel::key).collect();
    let mut classes: Vec<String> = pred_keys.iter().chain(&true_keys).cloned().collect();
    classes.sort();
    classes.dedup();
    let index = |k: &String| classes.binary_search(k).unwrap();

    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, t) in pred_keys.iter().zip(&true_keys) {
        confusion[index(t)][index(p)] += 1;
    }
    let supports: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let total = truths.len();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();

    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i];
            let predicted: usize = confusion.iter().map(|r| r[i]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, supports[i]);
            let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            ClassMetrics {
                class: classes[i].clone(),
                precision: p,
                recall: r,
                f1,
                support: supports[i],
                undefined: precision.is_none() || recall.is_none(),
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64;

    let share = |same: &dyn Fn(&TaxonLabel, &TaxonLabel) -> bool| {
        predictions.iter().zip(truths).filter(|(p, t)| same(p, t)).count() as f64 / total as f64
    };
    let rank_accuracy = RankAccuracy {
        genus: share(&|p, t| p.genus == t.genus),
        family: share(&|p, t| p.family == t.family),
        order: share(&|p, t| p.order == t.order),
    };

    Ok(EvalReport {
        total,
        accuracy: correct as f64 / total as f64,
        macro_f1,
        classes,
        per_class,
        confusion,
        supports,
        rank_accuracy,
    })
}
