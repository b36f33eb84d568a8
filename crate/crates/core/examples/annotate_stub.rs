// Annotate a prompt from a stub corpus keyed by the prompt's SHA-256.
//
// Live annotation uses the same trait; set ANNOTATOR_MODE=live and ANNOTATOR_ENDPOINT
// and build the annotator with `AnnotatorConfig::from_env()?.build()?`.

use apk_multimodal::text::{build_prompt, Annotator, StubAnnotator, TextEvidence};
use apk_multimodal::Label;

pub fn run_example() -> anyhow::Result<()> {
    let corpus = tempfile::tempdir()?;
    let evidence = TextEvidence {
        permissions: vec!["android.permission.SEND_SMS".into()],
        dangerous_permission_hits: vec!["android.permission.SEND_SMS".into()],
        urls: vec!["http://c2.evil.example/gate.php".into()],
        ..Default::default()
    };
    let prompt = build_prompt(&evidence, Label::Malware, 3500);
    let stub = StubAnnotator::new(corpus.path());
    std::fs::write(
        stub.path_for(&prompt),
        "The app requests SEND_SMS and contacts a hard-coded gate URL.\n",
    )?;
    let annotation = stub.annotate(&prompt)?;
    println!(
        "{:?} / {}: {}",
        annotation.provenance, annotation.model_id, annotation.text
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
