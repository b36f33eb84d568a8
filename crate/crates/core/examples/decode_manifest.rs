// Decode a binary AndroidManifest.xml and list what it declares.
//
// `cargo run --example decode_manifest [path/to/app.apk]`

use apk_multimodal::apk::{open_apk, ApkArchive};
use apk_multimodal::axml::{decode_axml, extract_permissions};
use apk_multimodal::fixtures::{separable_apk, MALWARE_PERMISSIONS};
use apk_multimodal::Label;

pub fn run_example() -> anyhow::Result<()> {
    let archive = match std::env::args().nth(1) {
        Some(path) => open_apk(path)?,
        None => ApkArchive::from_bytes("synthetic.apk", separable_apk(Label::Malware, 3, 4096))?,
    };
    let model = decode_axml(&archive.read_entry("AndroidManifest.xml")?)?;
    println!("package: {}", model.package_name);
    for p in extract_permissions(&model) {
        println!("permission: {p}");
    }
    for c in &model.components {
        println!("{:?}: {}", c.kind, c.name);
    }
    println!("{}", model.raw_xml);
    if std::env::args().nth(1).is_none() {
        assert_eq!(model.permissions, MALWARE_PERMISSIONS);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
