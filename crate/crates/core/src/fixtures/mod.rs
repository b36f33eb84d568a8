//! Synthetic APKs and reference-encoded manifests.
//!
//! Archives are written with the `zip` crate so the reader in [`crate::apk`]
//! is always checked against an independent writer. The same generators back
//! the runnable examples and the desk-scale end-to-end corpus.

mod axml_encoder;

use std::io::{Cursor, Write};

pub use axml_encoder::{encode_manifest, manifest_element, Attr, AttrValue, AxmlEncoder, Element, ANDROID_NS};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

use crate::label::Label;
use crate::rng::SplitMix64;

/// Builds an in-memory APK (ZIP) with deterministic timestamps.
#[derive(Debug, Default, Clone)]
pub struct ApkBuilder {
    entries: Vec<(String, Vec<u8>, bool)>,
}

impl ApkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a deflate-compressed entry.
    pub fn entry(mut self, name: &str, data: Vec<u8>) -> Self {
        self.entries.push((name.to_string(), data, true));
        self
    }

    /// Adds a stored (uncompressed) entry.
    pub fn stored_entry(mut self, name: &str, data: Vec<u8>) -> Self {
        self.entries.push((name.to_string(), data, false));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut writer = ZipWriter::new(Cursor::new(Vec::new()));
        for (name, data, deflate) in &self.entries {
            let method = if *deflate {
                CompressionMethod::Deflated
            } else {
                CompressionMethod::Stored
            };
            let options = SimpleFileOptions::default()
                .compression_method(method)
                .last_modified_time(DateTime::default());
            writer.start_file(name.as_str(), options).expect("zip start_file");
            writer.write_all(data).expect("zip write");
        }
        writer.finish().expect("zip finish").into_inner()
    }
}

pub const MALWARE_PERMISSIONS: &[&str] = &[
    "android.permission.INTERNET",
    "android.permission.SEND_SMS",
    "android.permission.READ_CONTACTS",
    "android.permission.RECEIVE_SMS",
];

pub const BENIGN_PERMISSIONS: &[&str] = &["android.permission.INTERNET", "android.permission.ACCESS_NETWORK_STATE"];

/// A small APK whose `classes.dex` intensity depends on the label:
/// benign bytes lie in `0..64` (dark), malware bytes in `192..=255` (bright).
///
/// Each APK also carries a reference-encoded manifest and a few planted strings
/// so text extraction has something to find.
pub fn separable_apk(label: Label, seed: u64, dex_len: usize) -> Vec<u8> {
    let mut rng = SplitMix64::new(seed);
    let (base, span) = match label {
        Label::Benign => (0u8, 64u64),
        Label::Malware => (192u8, 64u64),
    };
    let mut dex: Vec<u8> = (0..dex_len).map(|_| base + rng.next_below(span) as u8).collect();
    let planted: &[u8] = match label {
        Label::Benign => b"\0com/example/notes/MainActivity\0",
        Label::Malware => b"\0http://c2.evil.example/gate.php\0\x0110.0.13.37\0",
    };
    if dex.len() >= planted.len() * 4 {
        let at = dex.len() / 2;
        dex[at..at + planted.len()].copy_from_slice(planted);
    }
    let package = format!("com.synthetic.{}{}", label.as_str(), seed);
    let (permissions, components): (&[&str], Vec<(&str, String)>) = match label {
        Label::Benign => (
            BENIGN_PERMISSIONS,
            vec![("activity", format!("{package}.MainActivity"))],
        ),
        Label::Malware => (
            MALWARE_PERMISSIONS,
            vec![
                ("activity", format!("{package}.MainActivity")),
                ("receiver", format!("{package}.SmsReceiver")),
            ],
        ),
    };
    let components: Vec<(&str, &str)> = components.iter().map(|(k, n)| (*k, n.as_str())).collect();
    ApkBuilder::new()
        .entry(
            "AndroidManifest.xml",
            encode_manifest(&package, permissions, &components),
        )
        .entry("classes.dex", dex)
        .stored_entry("resources.arsc", format!("\0\0app_name={package}\0").into_bytes())
        .build()
}
