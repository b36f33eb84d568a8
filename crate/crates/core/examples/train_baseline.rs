// Train the logistic-regression baseline on dark vs bright synthetic images and score a holdout.

use apk_multimodal::baseline::{featurize, train, TrainConfig, DEFAULT_POOL_SIDE};
use apk_multimodal::image::{bytes_to_image, ImageSpec};
use apk_multimodal::metrics::{report, PredictionRecord};
use apk_multimodal::rng::SplitMix64;
use apk_multimodal::Label;

fn corpus(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let spec: ImageSpec = "grayscale-128".parse().unwrap();
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Benign } else { Label::Malware };
            let base = if label == Label::Benign { 0 } else { 192 };
            let len = 1000 + rng.next_below(8000) as usize;
            let bytes: Vec<u8> = (0..len).map(|_| base + rng.next_below(64) as u8).collect();
            (
                featurize(&bytes_to_image(&bytes, spec).unwrap(), DEFAULT_POOL_SIDE),
                label,
            )
        })
        .unzip()
}

pub fn run_example() -> anyhow::Result<()> {
    let (train_x, train_y) = corpus(160, 1);
    let (val_x, val_y) = corpus(20, 2);
    let (test_x, test_y) = corpus(20, 3);
    let (model, history) = train(
        &train_x,
        &train_y,
        Some((&val_x, &val_y)),
        DEFAULT_POOL_SIDE,
        &TrainConfig::default(),
    )?;
    println!("epochs run {}, best {}", history.val_loss.len(), history.best_epoch);
    let predictions = test_x
        .iter()
        .zip(&test_y)
        .enumerate()
        .map(|(i, (x, &y))| {
            let (label, score) = model.predict(x)?;
            Ok(PredictionRecord::new(format!("t{i}"), y, label, Some(score)))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let r = report(&predictions)?;
    print!("{}", r.to_table());
    assert!(r.accuracy >= 0.95);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
