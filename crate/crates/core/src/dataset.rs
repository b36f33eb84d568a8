//! Labeled dataset manifests and the stratified train/val/test split.
//!
//! A manifest file is JSON Lines: one header object followed by one record per
//! sample, sorted by `sample_id`.
//!
//! ```text
//! {"format":"apkmm-dataset","version":1,"seed":7,"split_fractions":{"train":0.8,"val":0.1,"test":0.1},"created_at":1700000000,"counts":{...}}
//! {"sample_id":"0a1b…","image_path":"out/images/0a1b…_grayscale_128.png","text_path":null,"label":"benign","family":null,"split":"train","image_spec":"grayscale-128"}
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{read_png, ImageError, ImageSpec};
use crate::label::Label;
use crate::rng::{shuffle, SplitMix64};

pub const MANIFEST_FORMAT: &str = "apkmm-dataset";
pub const MANIFEST_VERSION: u32 = 1;

const FRACTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("image for sample {0} has no label")]
    UnlabeledSample(String),
    #[error("sample {0} appears more than once")]
    DuplicateSampleId(String),
    #[error("labeled sample {0} has no image")]
    MissingImage(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("{path}: expected {expected}, found {found}")]
    ImageSpecMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: ImageError },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("manifest inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DatasetError> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let parts = self.as_array();
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(DatasetError::InvalidFractions(format!(
                "{parts:?} must be finite and non-negative"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > FRACTION_TOLERANCE {
            return Err(DatasetError::InvalidFractions(format!("{parts:?} sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    /// Per-split sample counts for `n` items by largest-remainder rounding.
    /// Remainder ties go to the earlier split.
    pub fn quotas(&self, n: usize) -> [usize; 3] {
        let targets = self.as_array().map(|f| f * n as f64);
        // The epsilon keeps 0.8 * 10 = 7.999... from flooring to 7.
        let mut counts = targets.map(|t| (t + FRACTION_TOLERANCE).floor() as usize);
        let mut assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = targets[a] - counts[a] as f64;
            let rb = targets[b] - counts[b] as f64;
            rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let mut k = 0;
        while assigned < n {
            counts[order[k % 3]] += 1;
            assigned += 1;
            k += 1;
        }
        while assigned > n {
            let i = (0..3).rev().find(|&i| counts[i] > 0).expect("assigned > 0");
            counts[i] -= 1;
            assigned -= 1;
        }
        counts
    }
}

impl FromStr for SplitFractions {
    type Err = DatasetError;

    /// `"0.8,0.1,0.1"`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DatasetError::InvalidFractions(format!("{s:?}: {e}")))?;
        match parts[..] {
            [train, val, test] => Self::new(train, val, test),
            _ => Err(DatasetError::InvalidFractions(format!("{s:?}: expected three values"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    /// SHA-256 of the source APK.
    pub sample_id: String,
    pub image_path: PathBuf,
    pub text_path: Option<PathBuf>,
    pub label: Label,
    pub family: Option<String>,
    pub split: Split,
    pub image_spec: ImageSpec,
}

/// Tallies per label, then per split.
pub type SplitCounts = BTreeMap<Label, BTreeMap<Split, usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<DatasetRecord>,
    pub seed: u64,
    pub split_fractions: SplitFractions,
    /// Unix seconds.
    pub created_at: u64,
    pub counts: SplitCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestHeader {
    format: String,
    version: u32,
    seed: u64,
    split_fractions: SplitFractions,
    created_at: u64,
    counts: SplitCounts,
}

pub fn count_splits(records: &[DatasetRecord]) -> SplitCounts {
    let mut counts: SplitCounts = Label::ALL
        .iter()
        .map(|&l| (l, Split::ALL.iter().map(|&s| (s, 0)).collect()))
        .collect();
    for r in records {
        *counts.entry(r.label).or_default().entry(r.split).or_default() += 1;
    }
    counts
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Header line plus one line per record, sorted by `sample_id`, LF-terminated.
    pub fn to_jsonl(&self) -> Result<String, DatasetError> {
        let header = ManifestHeader {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            seed: self.seed,
            split_fractions: self.split_fractions,
            created_at: self.created_at,
            counts: self.counts.clone(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        let mut records: Vec<&DatasetRecord> = self.records.iter().collect();
        records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        for r in records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses and checks the header against the records.
    pub fn from_jsonl(reader: impl Read) -> Result<Self, DatasetError> {
        let mut lines = BufReader::new(reader).lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (line, header) = lines.next().ok_or(DatasetError::EmptyManifest)?;
        let header: ManifestHeader = serde_json::from_str(&header?).map_err(|e| DatasetError::Parse {
            line,
            reason: e.to_string(),
        })?;
        if header.format != MANIFEST_FORMAT || header.version != MANIFEST_VERSION {
            return Err(DatasetError::Parse {
                line,
                reason: format!("unsupported manifest {} v{}", header.format, header.version),
            });
        }
        header.split_fractions.validate()?;
        let mut records = Vec::new();
        for (line, text) in lines {
            let record: DatasetRecord = serde_json::from_str(&text?).map_err(|e| DatasetError::Parse {
                line,
                reason: e.to_string(),
            })?;
            records.push(record);
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.sample_id.as_str()) {
                return Err(DatasetError::DuplicateSampleId(r.sample_id.clone()));
            }
        }
        if count_splits(&records) != header.counts {
            return Err(DatasetError::Inconsistent(
                "header counts do not match the records".into(),
            ));
        }
        Ok(Self {
            records,
            seed: header.seed,
            split_fractions: header.split_fractions,
            created_at: header.created_at,
            counts: header.counts,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        Self::from_jsonl(fs::File::open(path)?)
    }
}

/// `SOURCE_DATE_EPOCH` if set, else the current time, in Unix seconds.
pub fn timestamp_now() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

/// Stratified assignment. Within each label (benign first), records are sorted by
/// `sample_id`, shuffled with one SplitMix64 stream seeded by `seed`, and cut into
/// train/val/test at the largest-remainder quotas.
pub fn assign_splits(
    mut manifest: DatasetManifest,
    seed: u64,
    fractions: SplitFractions,
) -> Result<DatasetManifest, DatasetError> {
    fractions.validate()?;
    if manifest.records.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    manifest.records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let mut rng = SplitMix64::new(seed);
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..manifest.records.len())
            .filter(|&i| manifest.records[i].label == label)
            .collect();
        shuffle(&mut idx, &mut rng);
        let [train, val, _] = fractions.quotas(idx.len());
        for (pos, &i) in idx.iter().enumerate() {
            manifest.records[i].split = if pos < train {
                Split::Train
            } else if pos < train + val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    manifest.seed = seed;
    manifest.split_fractions = fractions;
    manifest.counts = count_splits(&manifest.records);
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    pub label: Label,
    pub family: Option<String>,
}

/// Reads `sample_id,label[,family]` rows. A leading `sample_id,...` header is skipped.
pub fn read_labels(reader: impl Read) -> Result<BTreeMap<String, LabelEntry>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(i + 1, |p| p.line() as usize);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && row.get(0).is_some_and(|f| f.eq_ignore_ascii_case("sample_id")) {
            continue;
        }
        let (Some(id), Some(label)) = (row.get(0), row.get(1)) else {
            return Err(DatasetError::Parse {
                line,
                reason: "expected sample_id,label".into(),
            });
        };
        let label: Label = label
            .parse()
            .map_err(|e: crate::label::ParseLabelError| DatasetError::Parse {
                line,
                reason: e.to_string(),
            })?;
        let family = row.get(2).filter(|f| !f.is_empty()).map(str::to_string);
        if out.insert(id.to_string(), LabelEntry { label, family }).is_some() {
            return Err(DatasetError::DuplicateSampleId(id.to_string()));
        }
    }
    Ok(out)
}

pub fn read_labels_file(path: &Path) -> Result<BTreeMap<String, LabelEntry>, DatasetError> {
    read_labels(fs::File::open(path)?)
}

/// Images named `<sample_id>_<mode>_<res>.png` for `spec`, keyed by sample id.
pub fn scan_images(image_dir: &Path, spec: &ImageSpec) -> Result<BTreeMap<String, PathBuf>, DatasetError> {
    let suffix = format!("_{}.png", spec.file_tag());
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(image_dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(id) = name.strip_suffix(&suffix) {
            if !id.is_empty() && path.is_file() {
                out.insert(id.to_string(), path);
            }
        }
    }
    Ok(out)
}

fn check_image(path: &Path, spec: &ImageSpec) -> Result<(), DatasetError> {
    let decoded = read_png(path).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    if decoded.side != spec.side() || decoded.color_mode != spec.color_mode {
        return Err(DatasetError::ImageSpecMismatch {
            path: path.to_path_buf(),
            expected: spec.to_string(),
            found: format!("{}-{}", decoded.color_mode.as_str(), decoded.side),
        });
    }
    Ok(())
}

fn annotation_for(text_dir: &Path, image_path: &Path) -> Option<PathBuf> {
    let stem = image_path.file_stem()?;
    let candidate = text_dir.join(stem).with_extension("txt");
    let meta = fs::metadata(&candidate).ok()?;
    (meta.is_file() && meta.len() > 0).then_some(candidate)
}

/// Pairs every `spec` image in `image_dir` with its label and, when present and
/// non-empty, the annotation `<image stem>.txt` in `text_dir`, then assigns splits.
pub fn build_manifest(
    image_dir: &Path,
    text_dir: Option<&Path>,
    labels: &BTreeMap<String, LabelEntry>,
    spec: ImageSpec,
    seed: u64,
    fractions: SplitFractions,
) -> Result<DatasetManifest, DatasetError> {
    fractions.validate()?;
    let images = scan_images(image_dir, &spec)?;
    if let Some(id) = images.keys().find(|id| !labels.contains_key(*id)) {
        return Err(DatasetError::UnlabeledSample(id.clone()));
    }
    if let Some(id) = labels.keys().find(|id| !images.contains_key(*id)) {
        return Err(DatasetError::MissingImage(id.clone()));
    }
    let entries: Vec<(&String, &PathBuf)> = images.iter().collect();
    entries.par_iter().try_for_each(|(_, path)| check_image(path, &spec))?;
    let texts: HashMap<&str, Option<PathBuf>> = entries
        .par_iter()
        .map(|(id, path)| (id.as_str(), text_dir.and_then(|d| annotation_for(d, path))))
        .collect();

    let records = entries
        .iter()
        .map(|(id, path)| {
            let entry = &labels[*id];
            DatasetRecord {
                sample_id: (*id).clone(),
                image_path: (*path).clone(),
                text_path: texts[id.as_str()].clone(),
                label: entry.label,
                family: entry.family.clone(),
                split: Split::Train,
                image_spec: spec,
            }
        })
        .collect();
    let manifest = DatasetManifest {
        records,
        seed,
        split_fractions: fractions,
        created_at: timestamp_now(),
        counts: SplitCounts::new(),
    };
    assign_splits(manifest, seed, fractions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{bytes_to_image, image_file_name, write_png, ColorMode, Resolution};
    use proptest::prelude::*;

    fn id(i: usize) -> String {
        format!("{:064x}", i * 7919)
    }

    fn synthetic(benign: usize, malware: usize) -> DatasetManifest {
        let spec = ImageSpec::new(ColorMode::Grayscale, Resolution::R128);
        let records = (0..benign + malware)
            .map(|i| DatasetRecord {
                sample_id: id(i),
                image_path: PathBuf::from(format!("{}.png", id(i))),
                text_path: None,
                label: if i < benign { Label::Benign } else { Label::Malware },
                family: None,
                split: Split::Train,
                image_spec: spec,
            })
            .collect();
        DatasetManifest {
            records,
            seed: 0,
            split_fractions: SplitFractions::default(),
            created_at: 0,
            counts: SplitCounts::new(),
        }
    }

    fn per_label(m: &DatasetManifest, label: Label) -> [usize; 3] {
        Split::ALL.map(|s| m.counts[&label][&s])
    }

    #[test]
    fn quotas_by_largest_remainder() {
        let f = SplitFractions::default();
        assert_eq!(f.quotas(100), [80, 10, 10]);
        assert_eq!(f.quotas(50), [40, 5, 5]);
        assert_eq!(f.quotas(10), [8, 1, 1]);
        assert_eq!(f.quotas(17), [13, 2, 2]);
        assert_eq!(f.quotas(1), [1, 0, 0]);
        assert_eq!(f.quotas(0), [0, 0, 0]);
        assert_eq!(SplitFractions::new(0.7, 0.2, 0.1).unwrap().quotas(10), [7, 2, 1]);
        assert_eq!(
            SplitFractions::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap().quotas(4),
            [2, 1, 1]
        );
    }

    #[test]
    fn fractions_validation() {
        assert!(SplitFractions::new(0.8, 0.1, 0.2).is_err());
        assert!(SplitFractions::new(1.1, -0.1, 0.0).is_err());
        assert!("0.8,0.1".parse::<SplitFractions>().is_err());
        assert_eq!(
            "0.8, 0.1, 0.1".parse::<SplitFractions>().unwrap(),
            SplitFractions::default()
        );
    }

    #[test]
    fn balanced_hundred_is_40_5_5_per_label() {
        let m = assign_splits(synthetic(50, 50), 42, SplitFractions::default()).unwrap();
        assert_eq!(per_label(&m, Label::Benign), [40, 5, 5]);
        assert_eq!(per_label(&m, Label::Malware), [40, 5, 5]);
        assert_eq!(
            [
                m.split_len(Split::Train),
                m.split_len(Split::Val),
                m.split_len(Split::Test)
            ],
            [80, 10, 10]
        );
    }

    #[test]
    fn single_label_ten_is_8_1_1() {
        let m = assign_splits(synthetic(10, 0), 1, SplitFractions::default()).unwrap();
        assert_eq!(per_label(&m, Label::Benign), [8, 1, 1]);
        assert_eq!(per_label(&m, Label::Malware), [0, 0, 0]);
    }

    #[test]
    fn empty_manifest_is_rejected() {
        assert!(matches!(
            assign_splits(synthetic(0, 0), 1, SplitFractions::default()),
            Err(DatasetError::EmptyManifest)
        ));
    }

    #[test]
    fn seed_controls_assignment() {
        let splits = |seed| -> Vec<Split> {
            assign_splits(synthetic(50, 50), seed, SplitFractions::default())
                .unwrap()
                .records
                .iter()
                .map(|r| r.split)
                .collect()
        };
        assert_eq!(splits(9), splits(9));
        let distinct: HashSet<Vec<Split>> = (0..100).map(splits).collect();
        assert!(distinct.len() > 90);
    }

    #[test]
    fn assignment_ignores_input_order() {
        let mut shuffled = synthetic(30, 20);
        shuffled.records.reverse();
        let a = assign_splits(synthetic(30, 20), 5, SplitFractions::default()).unwrap();
        let b = assign_splits(shuffled, 5, SplitFractions::default()).unwrap();
        assert_eq!(a.records, b.records);
    }

    /// Hand-rolled replay of the split procedure for one seed.
    #[test]
    fn matches_manual_replay() {
        let m = assign_splits(synthetic(6, 4), 77, SplitFractions::default()).unwrap();
        let mut rng = SplitMix64::new(77);
        let mut benign: Vec<String> = (0..6).map(id).collect();
        let mut malware: Vec<String> = (6..10).map(id).collect();
        benign.sort();
        malware.sort();
        for (group, quotas) in [(&mut benign, [5usize, 1, 0]), (&mut malware, [3, 1, 0])] {
            for i in (1..group.len()).rev() {
                let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
                group.swap(i, j);
            }
            for (pos, sid) in group.iter().enumerate() {
                let want = if pos < quotas[0] {
                    Split::Train
                } else if pos < quotas[0] + quotas[1] {
                    Split::Val
                } else {
                    Split::Test
                };
                let got = m.records.iter().find(|r| &r.sample_id == sid).unwrap().split;
                assert_eq!(got, want, "{sid}");
            }
        }
    }

    #[test]
    fn jsonl_roundtrip_is_fixed_point() {
        let mut m = assign_splits(synthetic(7, 5), 3, SplitFractions::default()).unwrap();
        m.records[0].text_path = Some(PathBuf::from("t/a.txt"));
        m.records[1].family = Some("Smsmalware".into());
        let once = m.to_jsonl().unwrap();
        let parsed = DatasetManifest::from_jsonl(once.as_bytes()).unwrap();
        assert_eq!(parsed, m);
        assert_eq!(parsed.to_jsonl().unwrap(), once);
        assert!(once
            .lines()
            .next()
            .unwrap()
            .starts_with(r#"{"format":"apkmm-dataset","version":1"#));
    }

    #[test]
    fn tampered_counts_are_rejected() {
        let m = assign_splits(synthetic(7, 5), 3, SplitFractions::default()).unwrap();
        let text = m.to_jsonl().unwrap();
        let dropped: String = text
            .lines()
            .take(text.lines().count() - 1)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            DatasetManifest::from_jsonl(dropped.as_bytes()),
            Err(DatasetError::Inconsistent(_))
        ));
    }

    #[test]
    fn labels_csv_forms() {
        let csv = "sample_id,label,family\nabc,malware,Banking\n\ndef, benign\n";
        let labels = read_labels(csv.as_bytes()).unwrap();
        assert_eq!(labels["abc"].label, Label::Malware);
        assert_eq!(labels["abc"].family.as_deref(), Some("Banking"));
        assert_eq!(
            labels["def"],
            LabelEntry {
                label: Label::Benign,
                family: None
            }
        );
        assert!(matches!(
            read_labels("a,benign\na,malware\n".as_bytes()),
            Err(DatasetError::DuplicateSampleId(_))
        ));
        assert!(matches!(
            read_labels("a,bogus\n".as_bytes()),
            Err(DatasetError::Parse { .. })
        ));
    }

    fn write_corpus(dir: &Path, n: usize, spec: ImageSpec) -> BTreeMap<String, LabelEntry> {
        let images = dir.join("images");
        let texts = dir.join("texts");
        fs::create_dir_all(&images).unwrap();
        fs::create_dir_all(&texts).unwrap();
        let mut labels = BTreeMap::new();
        for i in 0..n {
            let sid = id(i);
            let image = bytes_to_image(&[i as u8; 300], spec).unwrap();
            let name = image_file_name(&sid, &spec);
            write_png(&image, &images.join(&name)).unwrap();
            fs::write(texts.join(name.replace(".png", ".txt")), format!("summary {i}")).unwrap();
            let label = if i % 2 == 0 { Label::Benign } else { Label::Malware };
            labels.insert(sid, LabelEntry { label, family: None });
        }
        labels
    }

    #[test]
    fn build_pairs_34_images_and_texts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ImageSpec::new(ColorMode::Grayscale, Resolution::R128);
        let labels = write_corpus(dir.path(), 34, spec);
        let build = || {
            build_manifest(
                &dir.path().join("images"),
                Some(&dir.path().join("texts")),
                &labels,
                spec,
                11,
                SplitFractions::default(),
            )
            .unwrap()
        };
        let m = build();
        assert_eq!(m.records.len(), 34);
        assert!(m.records.iter().all(|r| r.text_path.is_some()));
        let mut again = build();
        again.created_at = m.created_at;
        assert_eq!(again.to_jsonl().unwrap(), m.to_jsonl().unwrap());
    }

    #[test]
    fn build_errors() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ImageSpec::new(ColorMode::Grayscale, Resolution::R128);
        let mut labels = write_corpus(dir.path(), 4, spec);
        let images = dir.path().join("images");
        let first = labels.keys().next().unwrap().clone();

        let removed = labels.remove(&first).unwrap();
        let err = build_manifest(&images, None, &labels, spec, 0, SplitFractions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::UnlabeledSample(ref s) if *s == first));
        labels.insert(first.clone(), removed);

        labels.insert(
            "f".repeat(64),
            LabelEntry {
                label: Label::Benign,
                family: None,
            },
        );
        let err = build_manifest(&images, None, &labels, spec, 0, SplitFractions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::MissingImage(_)));
        labels.remove(&"f".repeat(64));

        let wrong = ImageSpec::new(ColorMode::Rgb, Resolution::R128);
        let bad = bytes_to_image(&[1; 10], wrong).unwrap();
        write_png(&bad, &images.join(image_file_name(&first, &spec))).unwrap();
        let err = build_manifest(&images, None, &labels, spec, 0, SplitFractions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::ImageSpecMismatch { .. }));
    }

    #[test]
    fn empty_annotation_is_absent() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ImageSpec::new(ColorMode::Grayscale, Resolution::R128);
        let labels = write_corpus(dir.path(), 2, spec);
        let first = labels.keys().next().unwrap();
        let text = dir.path().join("texts").join(format!("{first}_grayscale_128.txt"));
        fs::write(&text, "").unwrap();
        let m = build_manifest(
            &dir.path().join("images"),
            Some(&dir.path().join("texts")),
            &labels,
            spec,
            0,
            SplitFractions::default(),
        )
        .unwrap();
        let rec = m.records.iter().find(|r| &r.sample_id == first).unwrap();
        assert_eq!(rec.text_path, None);
    }

    proptest! {
        #[test]
        fn stratified_without_leakage(benign in 0usize..60, malware in 0usize..60, seed in any::<u64>(),
                                      a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!(benign + malware > 0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let fractions = SplitFractions::new(lo, hi - lo, 1.0 - hi).unwrap();
            let m = assign_splits(synthetic(benign, malware), seed, fractions).unwrap();
            let ids: HashSet<&str> = m.records.iter().map(|r| r.sample_id.as_str()).collect();
            prop_assert_eq!(ids.len(), benign + malware);
            for (label, n) in [(Label::Benign, benign), (Label::Malware, malware)] {
                let got = per_label(&m, label);
                prop_assert_eq!(got.iter().sum::<usize>(), n);
                for (g, f) in got.iter().zip(fractions.as_array()) {
                    prop_assert!((*g as f64 - f * n as f64).abs() <= 1.0 + 1e-9);
                }
            }
            prop_assert_eq!(m.counts.clone(), count_splits(&m.records));
        }
    }
}
