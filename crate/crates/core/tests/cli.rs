mod common;

use std::collections::HashSet;
use std::fs;

use apk_multimodal::apk::open_apk;
use apk_multimodal::axml::decode_axml;
use apk_multimodal::cli::{ConvertIndexLine, ExtractIndexLine, CONVERT_INDEX, EXTRACT_INDEX};
use apk_multimodal::dataset::{DatasetManifest, Split};
use apk_multimodal::image::read_png;
use apk_multimodal::text::{build_prompt, extract_evidence, EvidenceConfig, DEFAULT_MAX_INPUT_TOKENS, ENV_MODE};
use apk_multimodal::Label;
use common::*;

fn read_index<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Vec<T> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn convert_three_apks_all_specs() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("apks"), 1, 3000);
    fs::write(
        dir.path().join("apks/extra.apk"),
        apk_multimodal::fixtures::separable_apk(Label::Malware, 99, 5000),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run(apkmm()
        .args(["convert", "--spec", "all", "--jobs", "2", "--input"])
        .arg(dir.path().join("apks"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let pngs = files_with_ext(&out.join("images"), "png");
    assert_eq!(pngs.len(), 18);
    let index: Vec<ConvertIndexLine> = read_index(&out.join(CONVERT_INDEX));
    assert_eq!(index.len(), 18);
    assert!(index.iter().all(|l| l.status == "ok"));
    for line in &index {
        let spec = line.spec.unwrap();
        let decoded = read_png(line.image_path.as_ref().unwrap()).unwrap();
        assert_eq!((decoded.side, decoded.color_mode), (spec.side(), spec.color_mode));
    }
}

#[test]
fn convert_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("apks"), 2, 2000);
    let out = dir.path().join("out");
    let convert = || {
        let res = run(apkmm()
            .args(["convert", "--spec", "rgb-128,grayscale-256", "--input"])
            .arg(dir.path().join("apks"))
            .arg("--out")
            .arg(&out));
        assert_eq!(code(&res), 0);
        let mut files = vec![fs::read(out.join(CONVERT_INDEX)).unwrap()];
        files.extend(
            files_with_ext(&out.join("images"), "png")
                .iter()
                .map(|p| fs::read(p).unwrap()),
        );
        files
    };
    let first = convert();
    assert_eq!(first.len(), 1 + 8);
    assert_eq!(convert(), first);
}

#[test]
fn convert_continues_past_corrupt_apk() {
    let dir = tempfile::tempdir().unwrap();
    let apks = dir.path().join("apks");
    write_corpus(&apks, 1, 1000);
    fs::write(apks.join("broken.apk"), b"PK\x03\x04 definitely not a zip").unwrap();
    let out = dir.path().join("out");
    let res = run(apkmm()
        .args(["convert", "--spec", "grayscale-128", "--input"])
        .arg(&apks)
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 1);
    let index: Vec<ConvertIndexLine> = read_index(&out.join(CONVERT_INDEX));
    let errors: Vec<&ConvertIndexLine> = index.iter().filter(|l| l.status == "error").collect();
    assert_eq!(errors.len(), 1);
    assert!(errors[0].apk.ends_with("broken.apk"));
    assert!(errors[0].error.is_some());
    assert_eq!(files_with_ext(&out.join("images"), "png").len(), 2);
}

#[test]
fn convert_empty_input_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = dir.path().join("out");
    let res = run(apkmm()
        .args(["convert", "--input"])
        .arg(dir.path().join("empty"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 2);
    assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
    assert!(!out.join(CONVERT_INDEX).exists());
}

#[test]
fn extract_text_with_stub_annotator() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_corpus(&dir.path().join("apks"), 1, 2000);
    let labels = dir.path().join("labels.csv");
    write_labels(&labels, &samples);

    // Stub corpus keyed by the digest of the prompt each sample will be annotated with.
    let stubs = dir.path().join("stubs");
    fs::create_dir(&stubs).unwrap();
    let mut expected = Vec::new();
    for s in &samples {
        let archive = open_apk(&s.path).unwrap();
        let manifest = decode_axml(&archive.read_entry("AndroidManifest.xml").unwrap()).unwrap();
        let evidence = extract_evidence(&archive, &manifest, &EvidenceConfig::default());
        let prompt = build_prompt(&evidence, s.label, DEFAULT_MAX_INPUT_TOKENS);
        let text = format!("The APK {} looks like {}.", &s.sample_id[..8], s.label);
        fs::write(stubs.join(format!("{}.txt", prompt.digest())), &text).unwrap();
        expected.push((s.sample_id.clone(), text));
    }

    let out = dir.path().join("out");
    let res = run(apkmm()
        .args(["extract-text", "--input"])
        .arg(dir.path().join("apks"))
        .arg("--labels")
        .arg(&labels)
        .arg("--stub-dir")
        .arg(&stubs)
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let annotations = files_with_ext(&out.join("annotations"), "txt");
    assert_eq!(annotations.len(), 2);
    for (id, text) in expected {
        let path = out.join("annotations").join(format!("{id}_grayscale_128.txt"));
        assert_eq!(fs::read_to_string(path).unwrap().trim_end(), text);
    }
    let malware = samples.iter().find(|s| s.label == Label::Malware).unwrap();
    let evidence = fs::read_to_string(out.join("evidence").join(format!("{}.json", malware.sample_id))).unwrap();
    assert!(evidence.contains("android.permission.SEND_SMS"));
    assert!(evidence.contains("http://c2.evil.example/gate.php"));
    assert!(evidence.contains("10.0.13.37"));
}

#[test]
fn extract_text_stub_miss_marks_sample() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("apks"), 1, 1000);
    let stubs = dir.path().join("stubs");
    fs::create_dir(&stubs).unwrap();
    let out = dir.path().join("out");
    let res = run(apkmm()
        .args(["extract-text", "--input"])
        .arg(dir.path().join("apks"))
        .arg("--stub-dir")
        .arg(&stubs)
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 1);
    let index: Vec<ExtractIndexLine> = read_index(&out.join(EXTRACT_INDEX));
    assert_eq!(index.len(), 2);
    assert!(index
        .iter()
        .all(|l| l.status == "annotation-failed" && l.prompt_paths.len() == 2));
}

#[test]
fn extract_text_without_annotator() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_corpus(&dir.path().join("apks"), 1, 1000);
    let out = dir.path().join("out");
    let res = run(apkmm()
        .args(["extract-text", "--input"])
        .arg(dir.path().join("apks"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 0);
    assert!(files_with_ext(&out.join("annotations"), "txt").is_empty());
    let prompts = files_with_ext(&out.join("prompts"), "txt");
    assert_eq!(prompts.len(), 4);
    let benign_prompt =
        fs::read_to_string(out.join("prompts").join(format!("{}.benign.txt", samples[0].sample_id))).unwrap();
    assert!(benign_prompt.starts_with(apk_multimodal::text::BENIGN_PROMPT));
}

#[test]
fn live_mode_without_endpoint_fails_before_work() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("apks"), 1, 1000);
    let out = dir.path().join("out");
    let res = run(apkmm()
        .env(ENV_MODE, "live")
        .args(["extract-text", "--input"])
        .arg(dir.path().join("apks"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("ANNOTATOR_ENDPOINT"));
    assert!(!out.exists());
}

#[test]
fn evaluate_prints_macro_row() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.csv");
    fs::write(&preds, all_benign_predictions()).unwrap();
    let json = dir.path().join("report.json");
    let res = run(apkmm()
        .args(["evaluate", "--predictions"])
        .arg(&preds)
        .arg("--json")
        .arg(&json));
    assert_eq!(code(&res), 0);
    let stdout = String::from_utf8(res.stdout).unwrap();
    let row = stdout.lines().find(|l| l.starts_with("macro avg")).unwrap();
    assert_eq!(
        row["macro avg".len()..].split_whitespace().collect::<Vec<_>>(),
        ["0.25", "0.50", "0.33", "34"]
    );
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["accuracy"], 0.5);
}

#[test]
fn dataset_on_hundred_fixtures_splits_80_10_10() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_corpus(&dir.path().join("apks"), 50, 600);
    let out = dir.path().join("out");
    let res = run(apkmm()
        .args(["convert", "--spec", "grayscale-128", "--input"])
        .arg(dir.path().join("apks"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 0);
    let labels = dir.path().join("labels.csv");
    write_labels(&labels, &samples);
    let manifest_path = out.join("dataset.jsonl");
    let dataset = |seed: &str| {
        let res = run(apkmm()
            .args(["dataset", "--seed", seed, "--fractions", "0.8,0.1,0.1", "--images"])
            .arg(out.join("images"))
            .arg("--labels")
            .arg(&labels)
            .arg("--out")
            .arg(&manifest_path)
            .env("SOURCE_DATE_EPOCH", "1700000000"));
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        fs::read(&manifest_path).unwrap()
    };
    let first = dataset("17");
    assert_eq!(dataset("17"), first);
    let manifest = DatasetManifest::read(&manifest_path).unwrap();
    assert_eq!(manifest.records.len(), 100);
    assert_eq!(
        [Split::Train, Split::Val, Split::Test].map(|s| manifest.split_len(s)),
        [80, 10, 10]
    );
    let ids: HashSet<&str> = manifest.records.iter().map(|r| r.sample_id.as_str()).collect();
    assert_eq!(ids.len(), 100);
    assert_eq!(manifest.created_at, 1_700_000_000);
}

#[test]
fn dataset_rejects_unlabeled_image() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_corpus(&dir.path().join("apks"), 2, 500);
    let out = dir.path().join("out");
    run(apkmm()
        .args(["convert", "--spec", "grayscale-128", "--input"])
        .arg(dir.path().join("apks"))
        .arg("--out")
        .arg(&out));
    let labels = dir.path().join("labels.csv");
    write_labels(&labels, &samples[1..]);
    let res = run(apkmm()
        .args(["dataset", "--images"])
        .arg(out.join("images"))
        .arg("--labels")
        .arg(&labels)
        .arg("--out")
        .arg(out.join("d.jsonl")));
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("has no label"));
}
