// Stratified 80/10/10 split of a labeled manifest, and its JSON Lines form.

use apk_multimodal::dataset::{assign_splits, DatasetManifest, DatasetRecord, Split, SplitCounts, SplitFractions};
use apk_multimodal::image::{sha256_hex, ImageSpec};
use apk_multimodal::Label;

pub fn run_example() -> anyhow::Result<()> {
    let spec: ImageSpec = "rgb-256".parse()?;
    let records = (0..20u8)
        .map(|i| {
            let id = sha256_hex(&[i]);
            DatasetRecord {
                image_path: format!("images/{id}_rgb_256.png").into(),
                sample_id: id,
                text_path: None,
                label: if i < 12 { Label::Benign } else { Label::Malware },
                family: (i >= 12).then(|| "Smsmalware".to_string()),
                split: Split::Train,
                image_spec: spec,
            }
        })
        .collect();
    let manifest = DatasetManifest {
        records,
        seed: 0,
        split_fractions: SplitFractions::default(),
        created_at: 0,
        counts: SplitCounts::new(),
    };
    let manifest = assign_splits(manifest, 42, SplitFractions::default())?;
    for (label, per_split) in &manifest.counts {
        println!("{label}: {per_split:?}");
    }
    let text = manifest.to_jsonl()?;
    for line in text.lines().take(3) {
        println!("{line}");
    }
    assert_eq!(DatasetManifest::from_jsonl(text.as_bytes())?.to_jsonl()?, text);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
