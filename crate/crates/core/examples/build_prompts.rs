// Extract text evidence from an APK and render both annotation prompts.
//
// `cargo run --example build_prompts [path/to/app.apk]`

use apk_multimodal::apk::{open_apk, ApkArchive};
use apk_multimodal::axml::decode_axml;
use apk_multimodal::fixtures::separable_apk;
use apk_multimodal::text::{build_prompt, extract_evidence, EvidenceConfig, DEFAULT_MAX_INPUT_TOKENS};
use apk_multimodal::Label;

pub fn run_example() -> anyhow::Result<()> {
    let archive = match std::env::args().nth(1) {
        Some(path) => open_apk(path)?,
        None => ApkArchive::from_bytes("synthetic.apk", separable_apk(Label::Malware, 11, 8192))?,
    };
    let manifest = decode_axml(&archive.read_entry("AndroidManifest.xml")?)?;
    let evidence = extract_evidence(&archive, &manifest, &EvidenceConfig::default());
    println!("urls: {:?}", evidence.urls);
    println!("ips: {:?}", evidence.ip_addresses);
    println!("dangerous: {:?}", evidence.dangerous_permission_hits);
    for label in Label::ALL {
        let prompt = build_prompt(&evidence, label, DEFAULT_MAX_INPUT_TOKENS);
        println!(
            "--- {label} prompt, sha256 {} ({} items dropped)",
            prompt.digest(),
            prompt.dropped_items
        );
        println!("{}", prompt.render());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
