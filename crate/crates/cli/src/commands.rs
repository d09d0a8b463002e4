use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use wingfuse_core::acquisition::{co_register, select_frames, simulate_transit, Appearance, Frame, TransitScenario};
use wingfuse_core::dataset::{
    evaluate_model, featurize_manifest, load_manifest, load_model, save_model, synth_dataset, train_model,
    write_feature_table, Evaluation, RunConfig, SplitSelection, SynthSpec,
};
use wingfuse_core::dsp::wav::{read_wav, write_wav};
use wingfuse_core::dsp::{stft_spectrogram, welch_psd, WelchConfig, Window};
use wingfuse_core::env::SpeciesPriorTable;
use wingfuse_core::Modality;

use crate::{Cli, Command, ModalityArg, SplitArg, WindowArg};

/// Machine-readable code for an error chain.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<wingfuse_core::Error>() {
            return err.kind();
        }
        if let Some(err) = cause.downcast_ref::<wingfuse_core::dataset::DatasetError>() {
            return err.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "IoError";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return "ParseError";
        }
    }
    "Error"
}

/// The error chain joined with `: `, skipping causes whose text the previous
/// link already contains.
pub fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn verbose() -> bool {
    std::env::var("WINGFUSE_VERBOSE").is_ok_and(|v| !v.is_empty() && v != "0")
}

macro_rules! progress {
    ($($arg:tt)*) => {
        if verbose() {
            eprintln!($($arg)*);
        }
    };
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn window(w: WindowArg) -> Window {
    match w {
        WindowArg::Hann => Window::Hann,
        WindowArg::Rect => Window::Rect,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { spec, out, seed } => synth(&config, spec.as_deref(), &out, seed),
        Command::Featurize { manifest, out } => featurize(&config, &manifest, &out),
        Command::Train {
            manifest,
            modality,
            model_out,
        } => train(&config, &manifest, modality, &model_out),
        Command::Evaluate {
            manifest,
            model,
            report,
            confusion,
            split,
        } => evaluate(&config, &manifest, &model, &report, confusion, split),
        Command::Simulate { scenarios, out } => simulate(&config, &scenarios, &out),
        Command::ExportPsd {
            wav,
            out,
            segment_len,
            overlap,
            window: w,
        } => export_psd(&wav, &out, segment_len, overlap, window(w)),
        Command::ExportSpectrogram {
            wav,
            out,
            segment_len,
            hop,
            window: w,
        } => export_spectrogram(&wav, &out, segment_len, hop, window(w)),
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

fn synth(config: &RunConfig, spec: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: SynthSpec = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    progress!("synthesizing {} events into {}", spec.total(), out.display());
    let manifest = synth_dataset(&spec, config, out)?;
    let summary = serde_json::json!({
        "events": manifest.records.len(),
        "supports": manifest.supports(),
        "manifest": out.join("manifest.jsonl"),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn featurize(config: &RunConfig, manifest: &Path, out: &Path) -> Result<()> {
    let m = load_manifest(manifest)?;
    progress!("featurizing {} records", m.records.len());
    let data = featurize_manifest(&m, config)?;
    let mut w = create(out)?;
    write_feature_table(&mut w, &data)?;
    w.flush()?;
    let failed = data.iter().filter(|e| e.wingbeat_error.is_some()).count();
    println!(
        "{}",
        serde_json::json!({ "records": data.len(), "wingbeat_failures": failed, "out": out })
    );
    Ok(())
}

fn train(config: &RunConfig, manifest: &Path, modality: ModalityArg, model_out: &Path) -> Result<()> {
    let m = load_manifest(manifest)?;
    let data = featurize_manifest(&m, config)?;
    let modality = match modality {
        ModalityArg::Wingbeat => Some(Modality::Wingbeat),
        ModalityArg::Image => Some(Modality::Image),
        ModalityArg::Fusion => None,
    };
    progress!("training on {} records", data.len());
    let model = train_model(&data, modality, config)?;
    if let Some(dir) = model_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_model(model_out, &model)?;
    println!(
        "{}",
        serde_json::json!({ "kind": model.model.kind(), "classes": model.model.classes(), "model": model_out })
    );
    Ok(())
}

#[derive(Serialize)]
struct Metadata {
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    generated_at: u64,
    tool: String,
    manifest: PathBuf,
    model: PathBuf,
}

#[derive(Serialize)]
struct ReportFile {
    metadata: Metadata,
    evaluation: Evaluation,
}

fn evaluate(
    config: &RunConfig,
    manifest: &Path,
    model_path: &Path,
    report: &Path,
    confusion: Option<PathBuf>,
    split: Option<SplitArg>,
) -> Result<()> {
    let mut config = config.clone();
    if let Some(s) = split {
        config.evaluation.split = match s {
            SplitArg::Train => SplitSelection::Train,
            SplitArg::Test => SplitSelection::Test,
            SplitArg::All => SplitSelection::All,
        };
    }
    let model = load_model(model_path)?;
    // featurize exactly as the model was trained
    config.features = model.features.clone();
    let m = load_manifest(manifest)?;
    let data = featurize_manifest(&m, &config)?;
    let priors = if config.prior.enabled {
        Some(SpeciesPriorTable::load_csv(m.resolve(&config.prior.table))?)
    } else {
        None
    };
    let evaluation = evaluate_model(&model, &data, &config, priors.as_ref())?;
    let confusion_csv = evaluation.report.confusion_csv();
    let accuracy = evaluation.report.accuracy;
    let file = ReportFile {
        metadata: Metadata {
            generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            tool: format!("wingfuse {}", env!("CARGO_PKG_VERSION")),
            manifest: manifest.to_path_buf(),
            model: model_path.to_path_buf(),
        },
        evaluation,
    };
    let mut w = create(report)?;
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    let confusion = confusion.unwrap_or_else(|| report.with_extension("confusion.csv"));
    std::fs::write(&confusion, confusion_csv).with_context(|| format!("writing {}", confusion.display()))?;
    println!(
        "{}",
        serde_json::json!({ "accuracy": accuracy, "report": report, "confusion": confusion })
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulatedEvent {
    scenario: usize,
    event_id: String,
    species_id: String,
    trigger_time: f64,
    /// Number of triggers the transit produced.
    triggers: usize,
    wav_path: String,
    frames: Vec<Frame>,
}

fn simulate(config: &RunConfig, scenarios: &Path, out: &Path) -> Result<()> {
    let file = File::open(scenarios).with_context(|| format!("opening {}", scenarios.display()))?;
    std::fs::create_dir_all(out.join("wav"))?;
    let mut events = create(&out.join("events.jsonl"))?;
    let mut written = 0usize;
    let mut silent = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let scenario: TransitScenario = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", scenarios.display(), i + 1))?;
        let appearance = Appearance::from_key(&scenario.species_id, config.simulation.descriptor_dim, 0.5);
        let transit = simulate_transit(
            &scenario,
            &config.geometry,
            &config.trigger,
            &config.simulation,
            wingfuse_core::dsp::NOMINAL_SAMPLE_RATE,
            &appearance,
        )?;
        let Some(&trigger) = transit.trigger_times.first() else {
            silent += 1;
            continue;
        };
        let frames = select_frames(
            &transit.frames,
            trigger,
            config.evaluation.frame_window_s,
            config.trigger.frames_to_select,
        )?;
        let event = co_register(
            trigger,
            Some(transit.photodiode),
            Some(frames),
            None,
            config.evaluation.coregistration_window_s,
        )?;
        let wav_path = format!("wav/{}.wav", event.event_id);
        if let Some(w) = &event.wingbeat {
            write_wav(out.join(&wav_path), w, 24)?;
        }
        let record = SimulatedEvent {
            scenario: i,
            event_id: event.event_id.clone(),
            species_id: scenario.species_id.clone(),
            trigger_time: trigger,
            triggers: transit.trigger_times.len(),
            wav_path,
            frames: event.frames.unwrap_or_default(),
        };
        serde_json::to_writer(&mut events, &record)?;
        events.write_all(b"\n")?;
        written += 1;
    }
    events.flush()?;
    println!(
        "{}",
        serde_json::json!({ "events": written, "untriggered": silent, "out": out.join("events.jsonl") })
    );
    Ok(())
}

fn export_psd(wav: &Path, out: &Path, segment_len: usize, overlap: f64, window: Window) -> Result<()> {
    let signal = read_wav(wav, 0.0)?;
    let config = WelchConfig {
        segment_len: segment_len.min(signal.len()),
        overlap_fraction: overlap,
        window,
        ..WelchConfig::default()
    };
    let psd = welch_psd(&signal, &config).map_err(wingfuse_core::Error::from)?;
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(["frequency_hz", "psd"])?;
    for (f, p) in psd.frequencies().iter().zip(psd.psd()) {
        w.write_record([f.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn export_spectrogram(wav: &Path, out: &Path, segment_len: usize, hop: usize, window: Window) -> Result<()> {
    let signal = read_wav(wav, 0.0)?;
    let spec = stft_spectrogram(&signal, segment_len, hop, window).map_err(wingfuse_core::Error::from)?;
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(["time_s", "frequency_hz", "power"])?;
    for (t, row) in spec.times.iter().zip(&spec.power) {
        for (f, p) in spec.frequencies.iter().zip(row) {
            w.write_record([t.to_string(), f.to_string(), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
