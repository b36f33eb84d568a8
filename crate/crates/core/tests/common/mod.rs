#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apk_multimodal::fixtures::separable_apk;
use apk_multimodal::image::sha256_hex;
use apk_multimodal::text::{ENV_API_KEY, ENV_ENDPOINT, ENV_MODE, ENV_MODEL};
use apk_multimodal::Label;

/// The built binary with annotator variables cleared.
pub fn apkmm() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_apkmm"));
    for key in [ENV_MODE, ENV_ENDPOINT, ENV_MODEL, ENV_API_KEY] {
        cmd.env_remove(key);
    }
    cmd.env("RUST_LOG", "error");
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn apkmm");
    if std::env::var_os("APKMM_TEST_VERBOSE").is_some() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub struct Sample {
    pub path: PathBuf,
    pub sample_id: String,
    pub label: Label,
}

/// `per_label` benign and `per_label` malware APKs from the separable generator.
pub fn write_corpus(dir: &Path, per_label: usize, dex_len: usize) -> Vec<Sample> {
    fs::create_dir_all(dir).unwrap();
    let mut samples = Vec::new();
    for i in 0..per_label {
        for label in Label::ALL {
            let seed = (i as u64) * 2 + label.is_positive() as u64 + 1;
            let bytes = separable_apk(label, seed, dex_len);
            let path = dir.join(format!("{label}_{i:03}.apk"));
            fs::write(&path, &bytes).unwrap();
            samples.push(Sample {
                path,
                sample_id: sha256_hex(&bytes),
                label,
            });
        }
    }
    samples
}

pub fn write_labels(path: &Path, samples: &[Sample]) {
    let mut text = String::from("sample_id,label\n");
    for s in samples {
        text.push_str(&format!("{},{}\n", s.sample_id, s.label));
    }
    fs::write(path, text).unwrap();
}

/// `34` predictions, 17 per class, all predicted benign.
pub fn all_benign_predictions() -> String {
    let mut text = String::from("sample_id,true,pred,score\n");
    for i in 0..34 {
        let truth = if i % 2 == 0 { "benign" } else { "malware" };
        text.push_str(&format!("s{i:02},{truth},benign,0.25\n"));
    }
    text
}

pub fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == ext))
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}
