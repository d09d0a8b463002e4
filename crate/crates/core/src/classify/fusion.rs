use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize_image, featurize_wingbeat, FeatureVector, WingbeatFeatureConfig};
use super::svm::{LinearSvmModel, Standardizer};
use super::{argmax, softmax, ClassifyError, TaxonLabel};
use crate::acquisition::{DetectionEvent, Modality};

/// What the fusion head sees from each modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionInput {
    /// Class scores of the frozen per-modality SVMs.
    #[default]
    Scores,
    /// The raw feature vectors (image features averaged over frames).
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub input: FusionInput,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 penalty on both weight matrices.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            input: FusionInput::Scores,
            hidden: 16,
            epochs: 150,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(ClassifyError::InvalidConfig("fusion hidden, epochs and batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return Err(ClassifyError::InvalidConfig(
                "fusion needs learning_rate > 0, momentum in [0, 1), weight_decay >= 0",
            ));
        }
        Ok(())
    }
}

/// Single hidden layer (tanh) mapping the concatenated modality inputs to
/// logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionHead {
    /// `hidden x input`
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// `classes x hidden`
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

/// Gradients with the same layout as [`FusionHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct FusionGradients {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl FusionGradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.w1, &self.b1, &self.w2, &self.b2)
    }
}

fn flatten(w1: &[Vec<f64>], b1: &[f64], w2: &[Vec<f64>], b2: &[f64]) -> Vec<f64> {
    w1.iter()
        .flatten()
        .chain(b1)
        .chain(w2.iter().flatten())
        .chain(b2)
        .copied()
        .collect()
}

impl FusionHead {
    /// Glorot-uniform hidden weights; output layer and biases start at zero,
    /// so the untrained head predicts the uniform distribution.
    pub fn new(input: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (input + hidden) as f64).sqrt();
        let w1 = (0..hidden)
            .map(|_| (0..input).map(|_| rng.random_range(-a..a)).collect())
            .collect();
        Self {
            w1,
            b1: vec![0.0; hidden],
            w2: vec![vec![0.0; hidden]; classes],
            b2: vec![0.0; classes],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.len()
    }

    pub fn classes(&self) -> usize {
        self.w2.len()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(w, b)| (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b).tanh())
            .collect();
        let logits = self
            .w2
            .iter()
            .zip(&self.b2)
            .map(|(w, b)| w.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect();
        (h, logits)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.forward(x).1)
    }

    pub fn parameters(&self) -> Vec<f64> {
        flatten(&self.w1, &self.b1, &self.w2, &self.b2)
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for v in self
            .w1
            .iter_mut()
            .flatten()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut().flatten())
            .chain(self.b2.iter_mut())
        {
            *v = it.next().expect("parameter vector too short");
        }
    }

    /// Mean cross-entropy over the batch plus `weight_decay/2 (|W1|^2 + |W2|^2)`
    /// and its gradient.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], targets: &[usize], weight_decay: f64) -> (f64, FusionGradients) {
        let hidden = self.hidden_dim();
        let input = self.input_dim();
        let classes = self.classes();
        let mut g = FusionGradients {
            w1: vec![vec![0.0; input]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![vec![0.0; hidden]; classes],
            b2: vec![0.0; classes],
        };
        let n = xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(targets) {
            let (h, logits) = self.forward(x);
            let p = softmax(&logits);
            loss -= p[y].max(1e-300).ln() / n;
            let dlogits: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(k, pk)| (pk - if k == y { 1.0 } else { 0.0 }) / n)
                .collect();
            let mut dh = vec![0.0; hidden];
            for k in 0..classes {
                g.b2[k] += dlogits[k];
                for j in 0..hidden {
                    g.w2[k][j] += dlogits[k] * h[j];
                    dh[j] += dlogits[k] * self.w2[k][j];
                }
            }
            for j in 0..hidden {
                let da = dh[j] * (1.0 - h[j] * h[j]);
                g.b1[j] += da;
                for (gw, xi) in g.w1[j].iter_mut().zip(x) {
                    *gw += da * xi;
                }
            }
        }
        if weight_decay > 0.0 {
            for (w, gw) in self.w1.iter().flatten().zip(g.w1.iter_mut().flatten()) {
                loss += 0.5 * weight_decay * w * w;
                *gw += weight_decay * w;
            }
            for (w, gw) in self.w2.iter().flatten().zip(g.w2.iter_mut().flatten()) {
                loss += 0.5 * weight_decay * w * w;
                *gw += weight_decay * w;
            }
        }
        (loss, g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Fusion,
    Wingbeat,
    Image,
}

/// Which predictor serves each combination of available modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingTable {
    pub both: Route,
    pub wingbeat_only: Route,
    pub image_only: Route,
}

impl Default for RoutingTable {
    fn default() -> Self {
        Self {
            both: Route::Fusion,
            wingbeat_only: Route::Wingbeat,
            image_only: Route::Image,
        }
    }
}

/// Extracted features of one event; `image` holds one vector per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFeatures {
    pub event_id: String,
    pub wingbeat: Option<FeatureVector>,
    pub image: Option<Vec<FeatureVector>>,
}

impl EventFeatures {
    pub fn from_event(
        event: &DetectionEvent,
        config: &WingbeatFeatureConfig,
        image_dim: usize,
    ) -> Result<Self, ClassifyError> {
        let wingbeat = match &event.wingbeat {
            Some(w) => Some(featurize_wingbeat(w, config)?),
            None => None,
        };
        let image = match &event.frames {
            Some(frames) if !frames.is_empty() => Some(
                frames
                    .iter()
                    .map(|f| featurize_image(f, image_dim))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => None,
        };
        Ok(Self {
            event_id: event.event_id.clone(),
            wingbeat,
            image,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub class_index: usize,
    pub label: TaxonLabel,
    pub route: Route,
}

/// Late-fusion classifier with frozen per-modality extractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub classes: Vec<String>,
    pub labels: Vec<TaxonLabel>,
    pub wingbeat: LinearSvmModel,
    pub image: LinearSvmModel,
    pub features: WingbeatFeatureConfig,
    pub input_scaler: Standardizer,
    pub head: FusionHead,
    pub routing: RoutingTable,
    pub config: FusionConfig,
}

/// Mean of the image model's scores over an event's frames.
fn image_scores(model: &LinearSvmModel, frames: &[FeatureVector]) -> Result<Vec<f64>, ClassifyError> {
    let mut mean = vec![0.0; model.classes.len()];
    for f in frames {
        for (m, s) in mean.iter_mut().zip(model.predict_scores(f)?) {
            *m += s / frames.len() as f64;
        }
    }
    Ok(mean)
}

fn fusion_input(
    wingbeat: &LinearSvmModel,
    image: &LinearSvmModel,
    features: &EventFeatures,
    input: FusionInput,
) -> Result<Vec<f64>, ClassifyError> {
    let missing = |modality| ClassifyError::MissingModality {
        event_id: features.event_id.clone(),
        modality,
    };
    let w = features.wingbeat.as_ref().ok_or_else(|| missing(Modality::Wingbeat))?;
    let frames = features
        .image
        .as_ref()
        .filter(|f| !f.is_empty())
        .ok_or_else(|| missing(Modality::Image))?;
    match input {
        FusionInput::Scores => {
            let mut x = wingbeat.predict_scores(w)?;
            x.extend(image_scores(image, frames)?);
            Ok(x)
        }
        FusionInput::Features => {
            wingbeat.check(w)?;
            let mut mean = vec![0.0; image.dimension];
            for f in frames {
                image.check(f)?;
                for (m, v) in mean.iter_mut().zip(&f.values) {
                    *m += v / frames.len() as f64;
                }
            }
            let mut x = w.values.clone();
            x.extend(mean);
            Ok(x)
        }
    }
}

impl FusionModel {
    pub fn input_dim(&self) -> usize {
        self.head.input_dim()
    }

    fn route_scores(&self, route: Route, features: &EventFeatures) -> Result<Vec<f64>, ClassifyError> {
        match route {
            Route::Fusion => {
                let x = fusion_input(&self.wingbeat, &self.image, features, self.config.input)?;
                Ok(self.head.forward(&self.input_scaler.transform(&x)).1)
            }
            Route::Wingbeat => {
                let w = features.wingbeat.as_ref().ok_or(ClassifyError::MissingModality {
                    event_id: features.event_id.clone(),
                    modality: Modality::Wingbeat,
                })?;
                self.wingbeat.predict_scores(w)
            }
            Route::Image => {
                let frames = features.image.as_ref().ok_or(ClassifyError::MissingModality {
                    event_id: features.event_id.clone(),
                    modality: Modality::Image,
                })?;
                image_scores(&self.image, frames)
            }
        }
    }
}

/// Routes an event to the fusion head or a single-modality extractor.
pub fn predict_features(model: &FusionModel, features: &EventFeatures) -> Result<Prediction, ClassifyError> {
    let has_image = features.image.as_ref().is_some_and(|f| !f.is_empty());
    let route = match (features.wingbeat.is_some(), has_image) {
        (true, true) => model.routing.both,
        (true, false) => model.routing.wingbeat_only,
        (false, true) => model.routing.image_only,
        (false, false) => return Err(ClassifyError::NoModalities),
    };
    let probabilities = softmax(&model.route_scores(route, features)?);
    let class_index = argmax(&probabilities);
    Ok(Prediction {
        label: model.labels[class_index].clone(),
        probabilities,
        class_index,
        route,
    })
}

/// Featurizes the event with the model's own settings and predicts.
pub fn predict_any(model: &FusionModel, event: &DetectionEvent) -> Result<Prediction, ClassifyError> {
    if !event.has(Modality::Wingbeat) && !event.has(Modality::Image) {
        return Err(ClassifyError::NoModalities);
    }
    let features = EventFeatures::from_event(event, &model.features, model.image.dimension)?;
    predict_features(model, &features)
}

/// Trains the fusion head on pre-extracted features of labelled events.
pub fn train_fusion_features(
    samples: &[(EventFeatures, TaxonLabel)],
    wingbeat: &LinearSvmModel,
    image: &LinearSvmModel,
    features: &WingbeatFeatureConfig,
    config: &FusionConfig,
) -> Result<FusionModel, ClassifyError> {
    config.validate()?;
    if wingbeat.classes != image.classes {
        return Err(ClassifyError::ClassMismatch);
    }
    if samples.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let classes = wingbeat.classes.clone();
    let mut xs = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    for (f, label) in samples {
        xs.push(fusion_input(wingbeat, image, f, config.input)?);
        let key = label.key();
        targets.push(
            classes
                .binary_search(&key)
                .map_err(|_| ClassifyError::UnknownSpecies(key))?,
        );
    }
    let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let input_scaler = Standardizer::fit(&rows);
    let xs: Vec<Vec<f64>> = xs.iter().map(|x| input_scaler.transform(x)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head = FusionHead::new(xs[0].len(), config.hidden, classes.len(), &mut rng);
    let mut velocity = vec![0.0; head.parameters().len()];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let (_, grad) = head.loss_and_grad(&bx, &by, config.weight_decay);
            let mut params = head.parameters();
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(grad.flatten()) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
            head.set_parameters(&params);
        }
    }

    Ok(FusionModel {
        classes,
        labels: wingbeat.labels.clone(),
        wingbeat: wingbeat.clone(),
        image: image.clone(),
        features: features.clone(),
        input_scaler,
        head,
        routing: RoutingTable::default(),
        config: *config,
    })
}

/// Featurizes labelled events and trains the fusion head. Every event must
/// carry both modalities.
pub fn train_fusion(
    events: &[(DetectionEvent, TaxonLabel)],
    wingbeat: &LinearSvmModel,
    image: &LinearSvmModel,
    features: &WingbeatFeatureConfig,
    config: &FusionConfig,
) -> Result<FusionModel, ClassifyError> {
    let mut samples = Vec::with_capacity(events.len());
    for (event, label) in events {
        for modality in [Modality::Wingbeat, Modality::Image] {
            if !event.has(modality) {
                return Err(ClassifyError::MissingModality {
                    event_id: event.event_id.clone(),
                    modality,
                });
            }
        }
        samples.push((EventFeatures::from_event(event, features, image.dimension)?, label.clone()));
    }
    train_fusion_features(&samples, wingbeat, image, features, config)
}
