use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embeddings::{load_embeddings, Embeddings};
use super::{
    DatasetError, DatasetManifest, Model, ModelFile, ParseKind, RunConfig, Split, SplitSelection, SynthEvent,
    MODEL_FORMAT_VERSION,
};
use crate::acquisition::{Frame, Modality};
use crate::classify::{
    argmax, evaluate, featurize_image, featurize_wingbeat, predict_features, softmax, train_fusion_features,
    train_linear_svm, ClassifyError, EvalReport, EventFeatures, FeatureVector, FusionModel, LinearSvmModel,
    Route, TaxonLabel, TaxonomyTree,
};
use crate::dsp::wav::read_wav;
use crate::env::{apply_prior, species_prior, EnvSnapshot, SpeciesPriorTable};
use crate::Result;

/// Stratified train/test assignment: within every group a seeded shuffle
/// puts `round(test_fraction * n)` members into the test split.
pub fn stratified_split<T: Ord + Clone>(groups: &[T], test_fraction: f64, seed: u64) -> Vec<Split> {
    let mut members: BTreeMap<T, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.clone()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED);
    let mut out = vec![Split::Train; groups.len()];
    for idx in members.values_mut() {
        idx.shuffle(&mut rng);
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        for &i in idx.iter().take(n_test) {
            out[i] = Split::Test;
        }
    }
    out
}

/// An event's features with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledEvent {
    pub taxon: TaxonLabel,
    pub split: Split,
    pub env: Option<EnvSnapshot>,
    pub features: EventFeatures,
    /// Why a recorded wingbeat yielded no features, if it did not.
    pub wingbeat_error: Option<String>,
}

fn wingbeat_features(
    signal: Option<&crate::dsp::TimeSeries>,
    config: &RunConfig,
) -> (Option<FeatureVector>, Option<String>) {
    match signal.map(|s| featurize_wingbeat(s, &config.features)) {
        None => (None, None),
        Some(Ok(f)) => (Some(f), None),
        Some(Err(e)) => (None, Some(e.kind().to_string())),
    }
}

fn image_features(frames: &[Frame]) -> std::result::Result<Option<Vec<FeatureVector>>, ClassifyError> {
    if frames.is_empty() {
        return Ok(None);
    }
    frames
        .iter()
        .map(|f| featurize_image(f, f.descriptor.len()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Some)
}

/// Featurizes in-memory synthetic events.
///
/// A wingbeat that fails featurization (no detectable fundamental) is
/// treated as absent and the reason is kept in `wingbeat_error`.
pub fn featurize_synthetic(events: &[SynthEvent], config: &RunConfig) -> Result<Vec<LabelledEvent>> {
    events
        .par_iter()
        .map(|e| {
            let (wingbeat, wingbeat_error) = wingbeat_features(e.event.wingbeat.as_ref(), config);
            let image = image_features(e.event.frames.as_deref().unwrap_or(&[]))?;
            Ok(LabelledEvent {
                taxon: e.taxon.clone(),
                split: e.split,
                env: e.event.env.clone(),
                features: EventFeatures {
                    event_id: e.event.event_id.clone(),
                    wingbeat,
                    image,
                },
                wingbeat_error,
            })
        })
        .collect()
}

/// Reads WAVs and descriptor files referenced by a manifest and featurizes
/// every record, in manifest order.
pub fn featurize_manifest(manifest: &DatasetManifest, config: &RunConfig) -> Result<Vec<LabelledEvent>> {
    config.validate()?;
    let mut embeddings: BTreeMap<PathBuf, Embeddings> = BTreeMap::new();
    for r in &manifest.records {
        if let Some(reference) = &r.image_descriptor_ref {
            let path = manifest.resolve(reference);
            if let std::collections::btree_map::Entry::Vacant(slot) = embeddings.entry(path) {
                let loaded = load_embeddings(slot.key())?;
                slot.insert(loaded);
            }
        }
    }
    manifest
        .records
        .par_iter()
        .enumerate()
        .map(|(line, r)| {
            let signal = match &r.wav_path {
                Some(p) => Some(read_wav(manifest.resolve(p), r.trigger_time.unwrap_or(0.0))?),
                None => None,
            };
            let (wingbeat, wingbeat_error) = wingbeat_features(signal.as_ref(), config);
            let image = match &r.image_descriptor_ref {
                None => None,
                Some(reference) => {
                    let table = &embeddings[&manifest.resolve(reference)];
                    let vectors = table.get(&r.event_id).ok_or_else(|| DatasetError::Parse {
                        line: line + 1,
                        kind: ParseKind::InvalidRecord,
                        message: format!("{reference} has no descriptors for {}", r.event_id),
                    })?;
                    let frames: Vec<Frame> = vectors
                        .iter()
                        .map(|v| Frame {
                            timestamp: r.trigger_time.unwrap_or(0.0),
                            mean_brightness: 0.0,
                            descriptor: v.clone(),
                        })
                        .collect();
                    image_features(&frames)?
                }
            };
            Ok(LabelledEvent {
                taxon: r.taxon.clone(),
                split: r.split,
                env: r.env.clone(),
                features: EventFeatures {
                    event_id: r.event_id.clone(),
                    wingbeat,
                    image,
                },
                wingbeat_error,
            })
        })
        .collect()
}

/// Wide feature table: `event_id,split,label,w0..,i0..` where the image
/// columns hold the mean descriptor over the event's frames. Missing
/// modalities leave their cells empty.
pub fn write_feature_table<W: Write>(writer: W, data: &[LabelledEvent]) -> Result<()> {
    let w_dim = data
        .iter()
        .find_map(|e| e.features.wingbeat.as_ref().map(FeatureVector::len))
        .unwrap_or(0);
    let i_dim = data
        .iter()
        .find_map(|e| e.features.image.as_ref().and_then(|f| f.first()).map(FeatureVector::len))
        .unwrap_or(0);
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["event_id".to_string(), "split".into(), "label".into()];
    header.extend((0..w_dim).map(|i| format!("w{i}")));
    header.extend((0..i_dim).map(|i| format!("i{i}")));
    out.write_record(&header).map_err(DatasetError::from)?;
    for e in data {
        let split = match e.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        let mut row = vec![e.features.event_id.clone(), split.into(), e.taxon.key()];
        match &e.features.wingbeat {
            Some(f) => row.extend(f.values.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), w_dim)),
        }
        match &e.features.image {
            Some(frames) => {
                let mut mean = vec![0.0; i_dim];
                for f in frames {
                    for (m, v) in mean.iter_mut().zip(&f.values) {
                        *m += v / frames.len() as f64;
                    }
                }
                row.extend(mean.iter().map(|v| v.to_string()));
            }
            None => row.extend(std::iter::repeat_n(String::new(), i_dim)),
        }
        out.write_record(&row).map_err(DatasetError::from)?;
    }
    out.flush().map_err(DatasetError::io("<feature table>"))?;
    Ok(())
}

fn missing(data: &[&LabelledEvent], modality: Modality) -> ClassifyError {
    ClassifyError::MissingModality {
        event_id: data.first().map_or_else(String::new, |e| e.features.event_id.clone()),
        modality,
    }
}

fn train_wingbeat(train: &[&LabelledEvent], config: &RunConfig) -> Result<LinearSvmModel> {
    let (xs, ys): (Vec<FeatureVector>, Vec<TaxonLabel>) = train
        .iter()
        .filter_map(|e| e.features.wingbeat.clone().map(|f| (f, e.taxon.clone())))
        .unzip();
    if xs.is_empty() {
        return Err(missing(train, Modality::Wingbeat).into());
    }
    Ok(train_linear_svm(&xs, &ys, &config.svm)?)
}

/// Image classifier trained on every frame of every training event.
fn train_image(train: &[&LabelledEvent], config: &RunConfig) -> Result<LinearSvmModel> {
    let (xs, ys): (Vec<FeatureVector>, Vec<TaxonLabel>) = train
        .iter()
        .flat_map(|e| {
            e.features
                .image
                .iter()
                .flatten()
                .map(|f| (f.clone(), e.taxon.clone()))
        })
        .unzip();
    if xs.is_empty() {
        return Err(missing(train, Modality::Image).into());
    }
    Ok(train_linear_svm(&xs, &ys, &config.svm)?)
}

/// Trains a model of the requested kind on the training split.
///
/// `modality` selects a single extractor; `None` trains both extractors on
/// all of their available training data and the fusion head on the
/// training events that carry both modalities.
pub fn train_model(data: &[LabelledEvent], modality: Option<Modality>, config: &RunConfig) -> Result<ModelFile> {
    config.validate()?;
    let train: Vec<&LabelledEvent> = data.iter().filter(|e| e.split == Split::Train).collect();
    if train.is_empty() {
        return Err(ClassifyError::Empty.into());
    }
    let mut taxa: Vec<TaxonLabel> = train.iter().map(|e| e.taxon.clone()).collect();
    taxa.sort_by_key(TaxonLabel::key);
    taxa.dedup();
    let taxonomy = TaxonomyTree::new(taxa)?;
    let image_dim = train
        .iter()
        .find_map(|e| e.features.image.as_ref().and_then(|f| f.first()).map(FeatureVector::len))
        .unwrap_or(0);

    let model = match modality {
        Some(Modality::Wingbeat) => Model::Wingbeat(train_wingbeat(&train, config)?),
        Some(Modality::Image) => Model::Image(train_image(&train, config)?),
        None => {
            let complete: Vec<(EventFeatures, TaxonLabel)> = train
                .iter()
                .filter(|e| e.features.wingbeat.is_some() && e.features.image.is_some())
                .map(|e| (e.features.clone(), e.taxon.clone()))
                .collect();
            if complete.is_empty() {
                let lacking = if train.iter().any(|e| e.features.image.is_some()) {
                    Modality::Wingbeat
                } else {
                    Modality::Image
                };
                return Err(missing(&train, lacking).into());
            }
            let wingbeat = train_wingbeat(&train, config)?;
            let image = train_image(&train, config)?;
            Model::Fusion(train_fusion_features(&complete, &wingbeat, &image, &config.features, &config.fusion)?)
        }
    };
    Ok(ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        taxonomy,
        features: config.features.clone(),
        image_dim,
        model,
    })
}

fn image_mean_scores(model: &LinearSvmModel, frames: &[FeatureVector]) -> std::result::Result<Vec<f64>, ClassifyError> {
    let mut mean = vec![0.0; model.classes.len()];
    for f in frames {
        for (m, s) in mean.iter_mut().zip(model.predict_scores(f)?) {
            *m += s / frames.len() as f64;
        }
    }
    Ok(mean)
}

/// Probabilities and route for one event, or `None` when the model cannot
/// serve the event's modalities.
fn predict_one(model: &Model, f: &EventFeatures) -> std::result::Result<Option<(Vec<f64>, Route)>, ClassifyError> {
    match model {
        Model::Wingbeat(m) => match &f.wingbeat {
            Some(w) => Ok(Some((m.predict_proba(w)?, Route::Wingbeat))),
            None => Ok(None),
        },
        Model::Image(m) => match &f.image {
            Some(frames) => Ok(Some((softmax(&image_mean_scores(m, frames)?), Route::Image))),
            None => Ok(None),
        },
        Model::Fusion(m) => match predict_features(m, f) {
            Ok(p) => Ok(Some((p.probabilities, p.route))),
            Err(ClassifyError::NoModalities) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Accuracy of each predictor on the same events (those with both modalities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityComparison {
    pub events: usize,
    pub fused: f64,
    pub wingbeat_only: f64,
    pub image_only: f64,
}

pub fn compare_modalities(model: &FusionModel, data: &[&LabelledEvent]) -> Result<ModalityComparison> {
    let both: Vec<&&LabelledEvent> = data
        .iter()
        .filter(|e| e.features.wingbeat.is_some() && e.features.image.is_some())
        .collect();
    let hits = |strip: Option<Modality>| -> Result<f64> {
        let correct = both
            .par_iter()
            .map(|e| {
                let mut f = e.features.clone();
                match strip {
                    Some(Modality::Wingbeat) => f.image = None,
                    Some(Modality::Image) => f.wingbeat = None,
                    None => {}
                }
                Ok(usize::from(predict_features(model, &f)?.label == e.taxon))
            })
            .collect::<std::result::Result<Vec<usize>, ClassifyError>>()?
            .into_iter()
            .sum::<usize>();
        Ok(if both.is_empty() { 0.0 } else { correct as f64 / both.len() as f64 })
    };
    Ok(ModalityComparison {
        events: both.len(),
        fused: hits(None)?,
        wingbeat_only: hits(Some(Modality::Wingbeat))?,
        image_only: hits(Some(Modality::Image))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub model_kind: String,
    pub split: SplitSelection,
    pub evaluated: usize,
    /// Events the model could not serve (missing modality).
    pub skipped: usize,
    /// Events per prediction route.
    pub routes: BTreeMap<String, usize>,
    pub prior_applied: bool,
    pub report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ModalityComparison>,
}

fn route_name(r: Route) -> &'static str {
    match r {
        Route::Fusion => "fusion",
        Route::Wingbeat => "wingbeat",
        Route::Image => "image",
    }
}

/// Predicts every selected event and scores the predictions. With a prior
/// table, posteriors of events carrying an environment snapshot are
/// multiplied by the species prior before the argmax.
pub fn evaluate_model(
    model: &ModelFile,
    data: &[LabelledEvent],
    config: &RunConfig,
    priors: Option<&SpeciesPriorTable>,
) -> Result<Evaluation> {
    let split = config.evaluation.split;
    let selected: Vec<&LabelledEvent> = data.iter().filter(|e| split.includes(e.split)).collect();
    let classes = model.model.classes();
    let labels: Vec<TaxonLabel> = match &model.model {
        Model::Wingbeat(m) | Model::Image(m) => m.labels.clone(),
        Model::Fusion(m) => m.labels.clone(),
    };

    let outputs: Vec<Option<(usize, Route)>> = selected
        .par_iter()
        .map(|e| -> Result<Option<(usize, Route)>> {
            let Some((mut probs, route)) = predict_one(&model.model, &e.features)? else {
                return Ok(None);
            };
            if let (Some(table), Some(env)) = (priors, &e.env) {
                let prior = species_prior(env, table, config.prior.utc_offset_hours)?;
                let aligned = table.align(&prior, classes)?;
                let total: f64 = aligned.iter().sum();
                if total > 0.0 {
                    let aligned: Vec<f64> = aligned.iter().map(|p| p / total).collect();
                    probs = apply_prior(&probs, &aligned)?;
                }
            }
            Ok(Some((argmax(&probs), route)))
        })
        .collect::<Result<_>>()?;

    let mut predictions = Vec::new();
    let mut truths = Vec::new();
    let mut routes = BTreeMap::new();
    for (e, out) in selected.iter().zip(&outputs) {
        if let Some((k, route)) = out {
            predictions.push(labels[*k].clone());
            truths.push(e.taxon.clone());
            *routes.entry(route_name(*route).to_string()).or_insert(0) += 1;
        }
    }
    let report = evaluate(&predictions, &truths)?;
    let comparison = match &model.model {
        Model::Fusion(m) => Some(compare_modalities(m, &selected)?),
        _ => None,
    };
    Ok(Evaluation {
        model_kind: model.model.kind().to_string(),
        split,
        evaluated: predictions.len(),
        skipped: selected.len() - predictions.len(),
        routes,
        prior_applied: priors.is_some(),
        report,
        comparison,
    })
}
