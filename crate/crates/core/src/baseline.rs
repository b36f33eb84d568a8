//! Logistic regression over average-pooled image intensities.
//!
//! Weights and bias start at zero. Training is mini-batch SGD on the mean
//! logistic loss plus `l2/2 * |w|^2` (bias unregularized), with early stopping
//! on validation loss.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ByteImage, DecodedImage};
use crate::label::Label;
use crate::rng::{shuffle, SplitMix64};

pub const DEFAULT_POOL_SIDE: usize = 16;
pub const MODEL_FORMAT: &str = "apkmm-linear-model v1";

/// Scores are kept strictly inside (0, 1).
const SCORE_EPS: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training set needs both labels, found only {0}")]
    SingleClassTrainingSet(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("feature length {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("optimizer {0} is reserved and not implemented by the baseline")]
    UnsupportedOptimizer(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        }
    }
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Upper bound; early stopping may end sooner.
    pub epochs: usize,
    pub l2: f64,
    /// Seeds the per-epoch shuffle of the training set.
    pub seed: u64,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 20,
            l2: 1e-4,
            seed: 0,
            batch_size: 32,
            patience: 5,
            optimizer: Optimizer::Sgd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Pooling used to build the features this model expects.
    pub pool_side: usize,
    pub train_config: TrainConfig,
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch whose parameters were returned; 0 means the initialization.
    pub best_epoch: usize,
}

fn pool_range(cell: usize, side: usize, pool: usize) -> (usize, usize) {
    let start = cell * side / pool;
    let end = ((cell + 1) * side / pool).max(start + 1).min(side);
    (start.min(side - 1), end)
}

/// Average-pools a square image into `pool_side`², RGB reduced by channel mean,
/// scaled to [0, 1]. Cell `i` covers rows `floor(i*side/pool)..floor((i+1)*side/pool)`.
pub fn featurize_pixels(pixels: &[u8], side: usize, channels: usize, pool_side: usize) -> Vec<f64> {
    assert!(side > 0 && pool_side > 0 && channels > 0);
    assert_eq!(pixels.len(), side * side * channels);
    let mut out = Vec::with_capacity(pool_side * pool_side);
    for cy in 0..pool_side {
        let (y0, y1) = pool_range(cy, side, pool_side);
        for cx in 0..pool_side {
            let (x0, x1) = pool_range(cx, side, pool_side);
            let mut sum = 0u64;
            for y in y0..y1 {
                let row = &pixels[(y * side + x0) * channels..(y * side + x1) * channels];
                sum += row.iter().map(|&b| b as u64).sum::<u64>();
            }
            let n = ((y1 - y0) * (x1 - x0) * channels) as f64;
            out.push(sum as f64 / (n * 255.0));
        }
    }
    out
}

pub fn featurize(image: &ByteImage, pool_side: usize) -> Vec<f64> {
    featurize_pixels(&image.pixels, image.side(), image.channels(), pool_side)
}

pub fn featurize_decoded(image: &DecodedImage, pool_side: usize) -> Vec<f64> {
    featurize_pixels(&image.pixels, image.side, image.color_mode.channels(), pool_side)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn target(label: Label) -> f64 {
    if label.is_positive() {
        1.0
    } else {
        0.0
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Mean logistic loss plus `l2/2 * |w|^2`.
pub fn loss(weights: &[f64], bias: f64, xs: &[&[f64]], ys: &[Label], l2: f64) -> f64 {
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = dot(weights, x) + bias;
            softplus(z) - target(y) * z
        })
        .sum::<f64>()
        / xs.len().max(1) as f64;
    data + 0.5 * l2 * dot(weights, weights)
}

/// Loss and its analytic gradient `(dL/dw, dL/db)`.
pub fn loss_and_gradient(weights: &[f64], bias: f64, xs: &[&[f64]], ys: &[Label], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = xs.len().max(1) as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    let mut data = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z = dot(weights, x) + bias;
        data += softplus(z) - target(y) * z;
        let r = sigmoid(z) - target(y);
        for (g, xi) in gw.iter_mut().zip(x.iter()) {
            *g += r * xi;
        }
        gb += r;
    }
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (data / n + 0.5 * l2 * dot(weights, weights), gw, gb / n)
}

fn check_dims(xs: &[Vec<f64>], d: usize) -> Result<(), BaselineError> {
    match xs.iter().find(|x| x.len() != d) {
        Some(x) => Err(BaselineError::DimensionMismatch {
            expected: d,
            found: x.len(),
        }),
        None => Ok(()),
    }
}

/// Trains on `(train_x, train_y)`; early stopping watches `val` when it is non-empty
/// and the training loss otherwise. Returns the parameters with the lowest monitored loss.
pub fn train(
    train_x: &[Vec<f64>],
    train_y: &[Label],
    val: Option<(&[Vec<f64>], &[Label])>,
    pool_side: usize,
    config: &TrainConfig,
) -> Result<(LinearModel, TrainHistory), BaselineError> {
    if config.optimizer != Optimizer::Sgd {
        return Err(BaselineError::UnsupportedOptimizer(config.optimizer.as_str().into()));
    }
    if config.batch_size == 0 || !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(BaselineError::InvalidConfig(
            "batch_size must be positive and learning_rate finite and positive".into(),
        ));
    }
    if !(config.l2.is_finite() && config.l2 >= 0.0) {
        return Err(BaselineError::InvalidConfig(
            "l2 must be finite and non-negative".into(),
        ));
    }
    assert_eq!(train_x.len(), train_y.len(), "features and labels differ in length");
    let first = train_y.first().ok_or(BaselineError::EmptyTrainingSet)?;
    if train_y.iter().all(|y| y == first) {
        return Err(BaselineError::SingleClassTrainingSet(first.to_string()));
    }
    let d = train_x[0].len();
    check_dims(train_x, d)?;
    let val = val.filter(|(vx, _)| !vx.is_empty());
    if let Some((vx, vy)) = val {
        assert_eq!(vx.len(), vy.len(), "validation features and labels differ in length");
        check_dims(vx, d)?;
    }

    let train_refs: Vec<&[f64]> = train_x.iter().map(Vec::as_slice).collect();
    let val_refs: Option<(Vec<&[f64]>, &[Label])> = val.map(|(vx, vy)| (vx.iter().map(Vec::as_slice).collect(), vy));
    let monitor = |w: &[f64], b: f64| match &val_refs {
        Some((vx, vy)) => loss(w, b, vx, vy, 0.0),
        None => loss(w, b, &train_refs, train_y, config.l2),
    };

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut best = (monitor(&weights, bias), weights.clone(), bias, 0usize);
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
    };
    let mut rng = SplitMix64::new(config.seed);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        shuffle(&mut order, &mut rng);
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train_refs[i]).collect();
            let ys: Vec<Label> = batch.iter().map(|&i| train_y[i]).collect();
            let (l, gw, gb) = loss_and_gradient(&weights, bias, &xs, &ys, config.l2);
            if !l.is_finite() {
                return Err(BaselineError::NonFiniteLoss { epoch });
            }
            for (w, g) in weights.iter_mut().zip(&gw) {
                *w -= config.learning_rate * g;
            }
            bias -= config.learning_rate * gb;
        }
        let train_loss = loss(&weights, bias, &train_refs, train_y, config.l2);
        let monitored = monitor(&weights, bias);
        if !train_loss.is_finite() || !monitored.is_finite() {
            return Err(BaselineError::NonFiniteLoss { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(monitored);
        if monitored < best.0 {
            best = (monitored, weights.clone(), bias, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    history.best_epoch = best.3;
    let model = LinearModel {
        weights: best.1,
        bias: best.2,
        pool_side,
        train_config: config.clone(),
    };
    Ok((model, history))
}

impl LinearModel {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// `sigmoid(w.x + b)`, clamped into (0, 1). Malware iff score >= 0.5.
    pub fn predict(&self, features: &[f64]) -> Result<(Label, f64), BaselineError> {
        if features.len() != self.weights.len() {
            return Err(BaselineError::DimensionMismatch {
                expected: self.weights.len(),
                found: features.len(),
            });
        }
        let score = sigmoid(dot(&self.weights, features) + self.bias).clamp(SCORE_EPS, 1.0 - SCORE_EPS);
        let label = if score >= 0.5 { Label::Malware } else { Label::Benign };
        Ok((label, score))
    }

    /// Line-oriented text: format line, `key value` pairs, then `weights` and one weight per line.
    /// Floats use Rust's shortest round-trip form, so reading back is exact.
    pub fn to_text(&self) -> String {
        let c = &self.train_config;
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_FORMAT}");
        let _ = writeln!(out, "dimension {}", self.weights.len());
        let _ = writeln!(out, "pool_side {}", self.pool_side);
        let _ = writeln!(out, "bias {:?}", self.bias);
        let _ = writeln!(out, "learning_rate {:?}", c.learning_rate);
        let _ = writeln!(out, "epochs {}", c.epochs);
        let _ = writeln!(out, "l2 {:?}", c.l2);
        let _ = writeln!(out, "seed {}", c.seed);
        let _ = writeln!(out, "batch_size {}", c.batch_size);
        let _ = writeln!(out, "patience {}", c.patience);
        let _ = writeln!(out, "optimizer {}", c.optimizer.as_str());
        let _ = writeln!(out, "weights");
        for w in &self.weights {
            let _ = writeln!(out, "{w:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BaselineError> {
        let err = |line: usize, reason: String| BaselineError::ModelFormat { line, reason };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, MODEL_FORMAT)) => {}
            other => {
                return Err(err(
                    1,
                    format!("expected {MODEL_FORMAT:?}, got {:?}", other.map(|o| o.1)),
                ))
            }
        }
        let mut fields = std::collections::HashMap::new();
        let mut weights_at = None;
        for (no, line) in lines.by_ref() {
            if line == "weights" {
                weights_at = Some(no);
                break;
            }
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| err(no, format!("expected `key value`, got {line:?}")))?;
            fields.insert(k.to_string(), (no, v.trim().to_string()));
        }
        let weights_at = weights_at.ok_or_else(|| err(0, "missing `weights` section".into()))?;
        fn field<T: FromStr>(
            fields: &std::collections::HashMap<String, (usize, String)>,
            key: &str,
        ) -> Result<T, BaselineError>
        where
            T::Err: std::fmt::Display,
        {
            let (no, v) = fields.get(key).ok_or_else(|| BaselineError::ModelFormat {
                line: 0,
                reason: format!("missing {key}"),
            })?;
            v.parse().map_err(|e: T::Err| BaselineError::ModelFormat {
                line: *no,
                reason: format!("{key}: {e}"),
            })
        }
        let dimension: usize = field(&fields, "dimension")?;
        let mut weights = Vec::with_capacity(dimension);
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            weights.push(line.parse::<f64>().map_err(|e| err(no, e.to_string()))?);
        }
        if weights.len() != dimension {
            return Err(err(
                weights_at,
                format!("dimension {dimension} but {} weights", weights.len()),
            ));
        }
        let model = LinearModel {
            weights,
            bias: field(&fields, "bias")?,
            pool_side: field(&fields, "pool_side")?,
            train_config: TrainConfig {
                learning_rate: field(&fields, "learning_rate")?,
                epochs: field(&fields, "epochs")?,
                l2: field(&fields, "l2")?,
                seed: field(&fields, "seed")?,
                batch_size: field(&fields, "batch_size")?,
                patience: field(&fields, "patience")?,
                optimizer: field(&fields, "optimizer")?,
            },
        };
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(err(0, "non-finite parameter".into()));
        }
        if model.pool_side * model.pool_side != dimension {
            return Err(err(
                0,
                format!("pool_side {} does not give dimension {dimension}", model.pool_side),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Relative error `|a - n| / (|a| + |n|)` between the analytic gradient and central
/// differences with step `h`, over all weights and the bias.
pub fn gradient_check(weights: &[f64], bias: f64, xs: &[&[f64]], ys: &[Label], l2: f64, h: f64) -> f64 {
    let (_, gw, gb) = loss_and_gradient(weights, bias, xs, ys, l2);
    let mut analytic = gw;
    analytic.push(gb);
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut w = weights.to_vec();
    for i in 0..weights.len() {
        let orig = w[i];
        w[i] = orig + h;
        let up = loss(&w, bias, xs, ys, l2);
        w[i] = orig - h;
        let down = loss(&w, bias, xs, ys, l2);
        w[i] = orig;
        numeric.push((up - down) / (2.0 * h));
    }
    numeric.push((loss(&w, bias + h, xs, ys, l2) - loss(&w, bias - h, xs, ys, l2)) / (2.0 * h));
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let denom = norm(&analytic) + norm(&numeric);
    if denom == 0.0 {
        0.0
    } else {
        norm(&diff) / denom
    }
}
