use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, softmax, ClassifyError, FeatureVector, TaxonLabel};
use crate::acquisition::Modality;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    /// L2 weight `lambda` of the objective
    /// `lambda/2 |w|^2 + sum_i c_i hinge_i / sum_i c_i`.
    /// In the sum-of-hinge-losses convention this is `C = 1 / (lambda * n)`.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight each sample by the inverse of its class support.
    pub class_weighted: bool,
    /// Standardize features with training mean and deviation.
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 40,
            seed: 0,
            class_weighted: true,
            standardize: true,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ClassifyError::InvalidConfig("svm lambda must be positive"));
        }
        if self.epochs == 0 {
            return Err(ClassifyError::InvalidConfig("svm epochs must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// One-vs-rest linear SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub modality: Modality,
    /// Class keys in canonical (sorted) order.
    pub classes: Vec<String>,
    pub labels: Vec<TaxonLabel>,
    pub dimension: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub standardizer: Standardizer,
    pub config: SvmConfig,
    /// Objective of the returned iterate after each epoch, per class.
    pub objective_history: Vec<Vec<f64>>,
}

impl LinearSvmModel {
    pub fn check(&self, x: &FeatureVector) -> Result<(), ClassifyError> {
        if x.modality != self.modality {
            return Err(ClassifyError::ModalityMismatch {
                expected: self.modality,
                found: x.modality,
            });
        }
        if x.len() != self.dimension {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Per-class margins `w_k . z + b_k` of the standardized input.
    pub fn predict_scores(&self, x: &FeatureVector) -> Result<Vec<f64>, ClassifyError> {
        self.check(x)?;
        Ok(self.scores_raw(&x.values))
    }

    fn scores_raw(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardizer.transform(x);
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, &z) + b)
            .collect()
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Vec<f64>, ClassifyError> {
        Ok(softmax(&self.predict_scores(x)?))
    }

    pub fn predict_index(&self, x: &FeatureVector) -> Result<usize, ClassifyError> {
        Ok(argmax(&self.predict_scores(x)?))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<TaxonLabel, ClassifyError> {
        Ok(self.labels[self.predict_index(x)?].clone())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted regularized hinge objective of one binary problem. The bias is
/// the last weight and is regularized with the rest.
fn objective(w: &[f64], xs: &[Vec<f64>], ys: &[f64], cs: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * dot(w, w);
    let total_c: f64 = cs.iter().sum();
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .zip(cs)
        .map(|((x, y), c)| c * (1.0 - y * dot(w, x)).max(0.0))
        .sum();
    reg + loss / total_c
}

/// Pegasos on one binary problem with averaged iterates. Returns the best
/// averaged iterate seen at an epoch boundary and the per-epoch best-so-far
/// objective.
fn train_binary(
    xs: &[Vec<f64>],
    ys: &[f64],
    cs: &[f64],
    config: &SvmConfig,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let dim = xs[0].len();
    let lambda = config.lambda;
    let total_c: f64 = cs.iter().sum();
    // per-sample step weights so the stochastic gradient is unbiased for the
    // weighted mean loss
    let omega: Vec<f64> = cs.iter().map(|c| c * n as f64 / total_c).collect();
    let omega_max = omega.iter().copied().fold(0.0, f64::max);
    let radius = (omega_max / lambda).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; dim];
    let mut avg = vec![0.0; dim];
    let mut averaged = 0usize;
    let mut best = w.clone();
    let mut best_obj = objective(&w, xs, ys, cs, lambda);
    let mut history = Vec::with_capacity(config.epochs);
    let mut t = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = ys[i] * dot(&w, &xs[i]);
            let shrink = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if margin < 1.0 {
                let step = eta * omega[i] * ys[i];
                for (v, x) in w.iter_mut().zip(&xs[i]) {
                    *v += step * x;
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                for v in w.iter_mut() {
                    *v *= s;
                }
            }
            // average from the second epoch on; the first is burn-in
            if epoch > 0 || config.epochs == 1 {
                averaged += 1;
                let a = 1.0 / averaged as f64;
                for (m, v) in avg.iter_mut().zip(&w) {
                    *m += a * (v - *m);
                }
            }
        }
        let candidate = if averaged > 0 { &avg } else { &w };
        let obj = objective(candidate, xs, ys, cs, lambda);
        if obj < best_obj {
            best_obj = obj;
            best = candidate.clone();
        }
        history.push(best_obj);
    }
    (best, history)
}

/// Trains one-vs-rest linear SVMs by seeded Pegasos subgradient descent.
///
/// Classes are the distinct label keys in sorted order. With
/// `class_weighted`, a sample of class `k` carries weight `1 / n_k`, so the
/// loss term is the mean over classes of each class's mean hinge loss.
pub fn train_linear_svm(
    features: &[FeatureVector],
    labels: &[TaxonLabel],
    config: &SvmConfig,
) -> Result<LinearSvmModel, ClassifyError> {
    config.validate()?;
    if features.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch(features.len(), labels.len()));
    }
    let Some(first) = features.first() else {
        return Err(ClassifyError::Empty);
    };
    let dimension = first.len();
    for f in features {
        if f.modality != first.modality {
            return Err(ClassifyError::ModalityMismatch {
                expected: first.modality,
                found: f.modality,
            });
        }
        if f.len() != dimension {
            return Err(ClassifyError::DimensionMismatch {
                expected: dimension,
                found: f.len(),
            });
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::InvalidConfig("feature values must be finite"));
        }
    }

    let keys: Vec<String> = labels.iter().map(TaxonLabel::key).collect();
    let mut classes = keys.clone();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifyError::SingleClass(classes[0].clone()));
    }
    let class_labels: Vec<TaxonLabel> = classes
        .iter()
        .map(|c| labels[keys.iter().position(|k| k == c).unwrap()].clone())
        .collect();
    let targets: Vec<usize> = keys
        .iter()
        .map(|k| classes.binary_search(k).unwrap())
        .collect();
    let mut support = vec![0usize; classes.len()];
    for &y in &targets {
        support[y] += 1;
    }
    let cs: Vec<f64> = targets
        .iter()
        .map(|&y| if config.class_weighted { 1.0 / support[y] as f64 } else { 1.0 })
        .collect();

    let rows: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    let standardizer = if config.standardize {
        Standardizer::fit(&rows)
    } else {
        Standardizer::identity(dimension)
    };
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut z = standardizer.transform(r);
            z.push(1.0);
            z
        })
        .collect();

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut objective_history = Vec::with_capacity(classes.len());
    for k in 0..classes.len() {
        let ys: Vec<f64> = targets.iter().map(|&y| if y == k { 1.0 } else { -1.0 }).collect();
        let seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
        let (mut w, history) = train_binary(&xs, &ys, &cs, config, seed);
        biases.push(w.pop().unwrap());
        weights.push(w);
        objective_history.push(history);
    }

    Ok(LinearSvmModel {
        modality: first.modality,
        classes,
        labels: class_labels,
        dimension,
        weights,
        biases,
        standardizer,
        config: *config,
        objective_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn label(name: &str) -> TaxonLabel {
        TaxonLabel::new("O", "F", name, "sp")
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector::new(values, Modality::Wingbeat)
    }

    fn accuracy(model: &LinearSvmModel, xs: &[FeatureVector], ys: &[TaxonLabel]) -> f64 {
        let hits = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| model.predict(x).unwrap() == **y)
            .count();
        hits as f64 / xs.len() as f64
    }

    /// Two 2-D blobs whose closest points are at least 2 apart along x.
    fn blobs(seed: u64) -> (Vec<FeatureVector>, Vec<TaxonLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..100 {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let x = side * rng.random_range(1.0..3.0);
            let y = rng.random_range(-2.0..2.0);
            xs.push(fv(vec![x, y]));
            ys.push(label(if side > 0.0 { "A" } else { "B" }));
        }
        (xs, ys)
    }

    fn xor(seed: u64) -> (Vec<FeatureVector>, Vec<TaxonLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..200 {
            let (cx, cy) = [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)][i % 4];
            xs.push(fv(vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]));
            ys.push(label(if i % 4 < 2 { "A" } else { "B" }));
        }
        (xs, ys)
    }

    #[test]
    fn separable_blobs() {
        let (xs, ys) = blobs(1);
        let model = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        assert_eq!(accuracy(&model, &xs, &ys), 1.0);
        assert_eq!(model.classes, vec!["A sp", "B sp"]);
    }

    #[test]
    fn xor_is_not_linear() {
        let (xs, ys) = xor(2);
        let model = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        assert!(accuracy(&model, &xs, &ys) <= 0.75);
    }

    #[test]
    fn bitwise_deterministic() {
        let (xs, ys) = blobs(3);
        let cfg = SvmConfig { seed: 42, ..Default::default() };
        let a = train_linear_svm(&xs, &ys, &cfg).unwrap();
        let b = train_linear_svm(&xs, &ys, &cfg).unwrap();
        let bits = |m: &LinearSvmModel| -> Vec<u64> {
            m.weights.iter().flatten().chain(&m.biases).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn error_cases() {
        let (xs, ys) = blobs(4);
        let one = vec![label("A"); xs.len()];
        assert!(matches!(
            train_linear_svm(&xs, &one, &SvmConfig::default()),
            Err(ClassifyError::SingleClass(_))
        ));
        let mut bad = xs.clone();
        bad[3] = fv(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            train_linear_svm(&bad, &ys, &SvmConfig::default()),
            Err(ClassifyError::DimensionMismatch { .. })
        ));
        let model = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        assert!(matches!(
            model.predict_scores(&fv(vec![1.0])),
            Err(ClassifyError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(train_linear_svm(&[], &[], &SvmConfig::default()), Err(ClassifyError::Empty)));
    }

    fn hand_model(w: Vec<Vec<f64>>, b: Vec<f64>) -> LinearSvmModel {
        LinearSvmModel {
            modality: Modality::Wingbeat,
            classes: vec!["A sp".into(), "B sp".into()],
            labels: vec![label("A"), label("B")],
            dimension: 2,
            weights: w,
            biases: b,
            standardizer: Standardizer::identity(2),
            config: SvmConfig::default(),
            objective_history: vec![],
        }
    }

    #[test]
    fn zero_model_picks_first_class() {
        let m = hand_model(vec![vec![0.0; 2]; 2], vec![0.0; 2]);
        let x = fv(vec![3.0, -1.0]);
        assert_eq!(m.predict_scores(&x).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.predict(&x).unwrap(), label("A"));
        assert_eq!(m.predict_proba(&x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn hand_built_margins() {
        let m = hand_model(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, 0.0]);
        let x = fv(vec![2.0, 5.0]);
        assert_eq!(m.predict_scores(&x).unwrap(), vec![2.0, -2.0]);
        assert_eq!(m.predict_index(&x).unwrap(), 0);
        let doubled = hand_model(vec![vec![2.0, 0.0], vec![-2.0, 0.0]], vec![0.0, 0.0]);
        assert_eq!(doubled.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn history_is_monotone_and_matches_weights() {
        let (xs, ys) = xor(5);
        let cfg = SvmConfig::default();
        let model = train_linear_svm(&xs, &ys, &cfg).unwrap();
        // recompute the objective of the returned weights independently
        let n_a = ys.iter().filter(|y| y.genus == "A").count() as f64;
        let n_b = ys.len() as f64 - n_a;
        for (k, history) in model.objective_history.iter().enumerate() {
            assert!(history.windows(2).all(|w| w[1] <= w[0]));
            let w = &model.weights[k];
            let b = model.biases[k];
            let mut loss = 0.0;
            for (x, y) in xs.iter().zip(&ys) {
                let z = model.standardizer.transform(&x.values);
                let s = w[0] * z[0] + w[1] * z[1] + b;
                let sign = if model.classes[k].starts_with(&y.genus) { 1.0 } else { -1.0 };
                let weight = if y.genus == "A" { 1.0 / n_a } else { 1.0 / n_b };
                loss += weight * (1.0 - sign * s).max(0.0);
            }
            let obj = 0.5 * cfg.lambda * (w[0] * w[0] + w[1] * w[1] + b * b) + loss / 2.0;
            assert!((obj - history.last().unwrap()).abs() < 1e-9, "{obj} vs {history:?}");
            // never worse than the zero vector
            assert!(obj <= 1.0 + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn objective_non_increasing(seed in 0u64..1000, n in 10usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<FeatureVector> = (0..n)
                .map(|_| fv(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
                .collect();
            let ys: Vec<TaxonLabel> = (0..n)
                .map(|i| label(if i % 3 == 0 || rng.random_bool(0.3) { "A" } else { "B" }))
                .collect();
            let model = train_linear_svm(&xs, &ys, &SvmConfig { seed, epochs: 15, ..Default::default() }).unwrap();
            for h in &model.objective_history {
                prop_assert!(h.windows(2).all(|w| w[1] <= w[0]));
            }
        }

        #[test]
        fn duplicating_a_class_keeps_predictions(seed in 0u64..500) {
            let (xs, ys) = blobs(seed);
            let mut xs2 = xs.clone();
            let mut ys2 = ys.clone();
            for (x, y) in xs.iter().zip(&ys) {
                if y.genus == "A" {
                    xs2.push(x.clone());
                    ys2.push(y.clone());
                }
            }
            let cfg = SvmConfig { seed, ..Default::default() };
            let a = train_linear_svm(&xs, &ys, &cfg).unwrap();
            let b = train_linear_svm(&xs2, &ys2, &cfg).unwrap();
            // held-out grid away from the gap between the blobs
            for gx in [-4.0, -3.0, -2.0, -1.5, 1.5, 2.0, 3.0, 4.0] {
                for gy in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                    let p = fv(vec![gx, gy]);
                    prop_assert_eq!(a.predict(&p).unwrap(), b.predict(&p).unwrap());
                }
            }
        }
    }
}
