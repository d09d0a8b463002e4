use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wingfuse_core::dsp::wav::write_wav;
use wingfuse_core::dsp::{TimeSeries, NOMINAL_SAMPLE_RATE};

fn wingfuse(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wingfuse"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn tone(path: &Path, hz: f64, seconds: f64) {
    let fs = NOMINAL_SAMPLE_RATE;
    let n = (fs * seconds) as usize;
    let samples = (0..n)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * hz * i as f64 / fs).sin())
        .collect();
    write_wav(path, &TimeSeries::new(samples, fs, 0.0).unwrap(), 24).unwrap();
}

const APIS: &str = r#"{"order":"Hymenoptera","family":"Apidae","genus":"Apis","species":"mellifera"}"#;
const BOMBUS: &str = r#"{"order":"Hymenoptera","family":"Apidae","genus":"Bombus","species":"terrestris"}"#;

/// Two classes whose descriptors sit at (+5, 0, 0) and (-5, 0, 0).
fn image_only_fixture(dir: &Path) {
    let mut manifest = String::new();
    let mut csv = String::from("event_id,v0,v1,v2\n");
    for i in 0..12 {
        let (taxon, sign) = if i % 2 == 0 { (APIS, 1.0) } else { (BOMBUS, -1.0) };
        let split = if i < 8 { "train" } else { "test" };
        manifest.push_str(&format!(
            r#"{{"event_id":"e{i}","taxon":{taxon},"image_descriptor_ref":"desc.csv","split":"{split}"}}"#
        ));
        manifest.push('\n');
        for f in 0..2 {
            let jitter = 0.1 * (i * 2 + f) as f64 / 24.0;
            csv.push_str(&format!("e{i},{},{jitter},{}\n", 5.0 * sign, -jitter));
        }
    }
    std::fs::write(dir.join("manifest.jsonl"), manifest).unwrap();
    std::fs::write(dir.join("desc.csv"), csv).unwrap();
}

#[test]
fn perfect_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    image_only_fixture(dir.path());
    let out = wingfuse(
        &["train", "--manifest", "manifest.jsonl", "--modality", "image", "--model-out", "model.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = wingfuse(
        &[
            "evaluate", "--manifest", "manifest.jsonl", "--model", "model.json", "--report", "report.json",
            "--split", "all",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let eval = &report["evaluation"];
    assert_eq!(eval["evaluated"], 12);
    assert_eq!(eval["report"]["accuracy"], 1.0);
    assert_eq!(eval["report"]["macro_f1"], 1.0);
    assert!(report["metadata"]["generated_at"].is_u64());
    let confusion = std::fs::read_to_string(dir.path().join("report.confusion.csv")).unwrap();
    assert_eq!(
        confusion,
        "truth,Apis mellifera,Bombus terrestris\nApis mellifera,6,0\nBombus terrestris,0,6\n"
    );
}

#[test]
fn fusion_without_camera_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("wav")).unwrap();
    let mut manifest = String::new();
    for i in 0..4 {
        let (taxon, hz) = if i % 2 == 0 { (APIS, 230.0) } else { (BOMBUS, 160.0) };
        tone(&dir.path().join(format!("wav/e{i}.wav")), hz, 0.5);
        manifest.push_str(&format!(
            "{{\"event_id\":\"e{i}\",\"taxon\":{taxon},\"wav_path\":\"wav/e{i}.wav\",\"split\":\"train\"}}\n"
        ));
    }
    std::fs::write(dir.path().join("manifest.jsonl"), manifest).unwrap();
    let out = wingfuse(
        &["train", "--manifest", "manifest.jsonl", "--modality", "fusion", "--model-out", "model.json"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"], "MissingModality");
    assert!(!dir.path().join("model.json").exists());

    let out = wingfuse(
        &["train", "--manifest", "manifest.jsonl", "--modality", "wingbeat", "--model-out", "model.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_inputs_report_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = wingfuse(&["featurize", "--manifest", "absent.jsonl", "--out", "f.csv"], dir.path());
    assert!(!out.status.success());
    let err = stderr_json(&out);
    assert_eq!(err["error"], "IoError");
    assert!(err["message"].as_str().unwrap().contains("absent.jsonl"));

    std::fs::write(
        dir.path().join("manifest.jsonl"),
        format!("{{\"event_id\":\"a\",\"taxon\":{APIS},\"wav_path\":\"gone.wav\",\"split\":\"train\"}}\n"),
    )
    .unwrap();
    let out = wingfuse(&["featurize", "--manifest", "manifest.jsonl", "--out", "f.csv"], dir.path());
    assert_eq!(stderr_json(&out)["error"], "MissingFile");

    std::fs::write(dir.path().join("manifest.jsonl"), "{not json\n").unwrap();
    let out = wingfuse(&["featurize", "--manifest", "manifest.jsonl", "--out", "f.csv"], dir.path());
    assert_eq!(stderr_json(&out)["error"], "ParseError");

    std::fs::write(dir.path().join("bad.toml"), "[svm]\nlambda = -1.0\n").unwrap();
    let out = wingfuse(&["--config", "bad.toml", "default-config"], dir.path());
    assert_eq!(stderr_json(&out)["error"], "ConfigError");
}

#[test]
fn export_psd_peaks_at_tone() {
    let dir = tempfile::tempdir().unwrap();
    tone(&dir.path().join("tone.wav"), 440.0, 1.0);
    let out = wingfuse(&["export-psd", "--wav", "tone.wav", "--out", "psd.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("psd.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["frequency_hz", "psd"]);
    let rows: Vec<(f64, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8192 / 2 + 1);
    let peak = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let resolution = rows[1].0;
    assert!((peak - 440.0).abs() <= resolution, "peak at {peak} Hz");

    let out = wingfuse(
        &["export-spectrogram", "--wav", "tone.wav", "--out", "spec.csv", "--window", "rect"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("spec.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["time_s", "frequency_hz", "power"]);
    assert!(reader.records().count() > 0);
}

#[test]
fn simulate_writes_events() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios: String = (0..3)
        .map(|i| {
            format!(
                "{{\"species_id\":\"Apis mellifera\",\"entry_time\":{}.0,\"speed_mps\":1.0,\"wingbeat_hz\":230.0,\"body_shadow_depth\":0.3,\"rng_seed\":{i}}}\n",
                i + 1
            )
        })
        .collect();
    std::fs::write(dir.path().join("scenarios.jsonl"), scenarios).unwrap();
    let out = wingfuse(&["simulate", "--scenarios", "scenarios.jsonl", "--out", "sim"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let events = std::fs::read_to_string(dir.path().join("sim/events.jsonl")).unwrap();
    let events: Vec<Value> = events.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.len(), 3);
    for e in &events {
        assert_eq!(e["triggers"], 1);
        assert_eq!(e["frames"].as_array().unwrap().len(), 3);
        assert!(dir.path().join("sim").join(e["wav_path"].as_str().unwrap()).exists());
    }
}

#[test]
fn default_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = wingfuse(&["default-config"], dir.path());
    assert!(out.status.success());
    std::fs::write(dir.path().join("run.toml"), &out.stdout).unwrap();
    let again = wingfuse(&["--config", "run.toml", "default-config"], dir.path());
    assert!(again.status.success());
    assert_eq!(out.stdout, again.stdout);
}
