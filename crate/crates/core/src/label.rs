use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Binary class of an APK. `Malware` is the positive class everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malware,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Malware];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malware => "malware",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Malware
    }

    pub fn other(self) -> Label {
        match self {
            Label::Benign => Label::Malware,
            Label::Malware => Label::Benign,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognised label {0:?} (expected benign/malware or 0/1)")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" | "benignware" | "0" => Ok(Label::Benign),
            "malware" | "malicious" | "1" => Ok(Label::Malware),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names_and_digits() {
        assert_eq!("Benign".parse::<Label>().unwrap(), Label::Benign);
        assert_eq!(" malware ".parse::<Label>().unwrap(), Label::Malware);
        assert_eq!("1".parse::<Label>().unwrap(), Label::Malware);
        assert!("maybe".parse::<Label>().is_err());
    }
}
