// Render an APK's dex bytes as PNGs at every mode/resolution.
//
// `cargo run --example convert_apk [path/to/app.apk]` (a synthetic APK is used when no path is given)

use std::path::PathBuf;

use apk_multimodal::apk::CodeSource;
use apk_multimodal::fixtures::separable_apk;
use apk_multimodal::image::{convert_apk, read_png, ImageSpec};
use apk_multimodal::Label;

pub fn run_example() -> anyhow::Result<()> {
    let work = tempfile::tempdir()?;
    let apk = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = work.path().join("synthetic.apk");
            std::fs::write(&p, separable_apk(Label::Malware, 7, 20_000))?;
            p
        }
    };
    let (sample_id, written) = convert_apk(&apk, &ImageSpec::matrix(), CodeSource::DexOnly, work.path())?;
    println!("sample {sample_id}");
    for (spec, path) in written {
        let png = read_png(&path)?;
        println!("  {spec:<14} {}x{} {:?}", png.side, png.side, path.file_name().unwrap());
        assert_eq!(png.side, spec.side());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
