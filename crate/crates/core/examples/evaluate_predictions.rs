// Score a predictions file: the all-benign predictor over 17 benign and 17 malware samples.
//
// `cargo run --example evaluate_predictions [predictions.csv]`

use apk_multimodal::metrics::{read_predictions, read_predictions_file, report};

pub fn run_example() -> anyhow::Result<()> {
    let predictions = match std::env::args().nth(1) {
        Some(path) => read_predictions_file(path.as_ref())?,
        None => {
            let mut csv = String::from("sample_id,true,pred,score\n");
            for i in 0..34 {
                let truth = if i < 17 { "benign" } else { "malware" };
                csv.push_str(&format!("s{i},{truth},benign,{}\n", 0.1 + 0.01 * i as f64));
            }
            read_predictions(csv.as_bytes())?
        }
    };
    let r = report(&predictions)?;
    print!("{}", r.to_table());
    println!("{}", r.to_json());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
