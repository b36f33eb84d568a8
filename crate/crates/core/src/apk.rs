//! Read-only view of an APK as a ZIP archive.
//!
//! Only the central directory is parsed when an archive is opened; entry
//! payloads are inflated on demand by [`ApkArchive::read_entry`].

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use flate2::read::DeflateDecoder;
use log::warn;
use thiserror::Error;

const EOCD_SIGNATURE: u32 = 0x0605_4b50;
const CDFH_SIGNATURE: u32 = 0x0201_4b50;
const LFH_SIGNATURE: u32 = 0x0403_4b50;
const EOCD_LEN: usize = 22;
const CDFH_LEN: usize = 46;
const LFH_LEN: usize = 30;
const MAX_COMMENT_LEN: usize = u16::MAX as usize;

#[derive(Debug, Error)]
pub enum ApkError {
    #[error("not a zip archive: no end-of-central-directory record")]
    NotAZip,
    #[error("truncated archive: {0}")]
    TruncatedArchive(String),
    #[error("entry not found: {0}")]
    EntryNotFound(String),
    #[error("checksum mismatch in {name}: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { name: String, stored: u32, computed: u32 },
    #[error("size mismatch in {name}: expected {expected} bytes, got {actual}")]
    SizeMismatch { name: String, expected: u64, actual: u64 },
    #[error("unsupported compression method {method} for {name}")]
    UnsupportedCompressionMethod { name: String, method: u16 },
    #[error("zip64 archives are not supported ({0})")]
    Zip64Unsupported(String),
    #[error("no classes*.dex entry in archive")]
    NoDexFound,
    #[error("corrupt deflate stream in {name}: {source}")]
    Inflate { name: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the bytes handed to the image encoder come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeSource {
    /// All `classes*.dex` entries, concatenated in numeric order.
    #[default]
    DexOnly,
    /// The APK file exactly as stored on disk.
    WholeFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionMethod {
    Stored,
    Deflate,
    Other(u16),
}

impl From<u16> for CompressionMethod {
    fn from(v: u16) -> Self {
        match v {
            0 => CompressionMethod::Stored,
            8 => CompressionMethod::Deflate,
            other => CompressionMethod::Other(other),
        }
    }
}

/// Central-directory metadata for one entry. Payload is read through the archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApkEntry {
    pub name: String,
    pub compressed_size: u64,
    pub uncompressed_size: u64,
    pub crc32: u32,
    pub method: CompressionMethod,
    local_header_offset: u64,
}

#[derive(Debug, Clone)]
pub struct ApkArchive {
    source_path: PathBuf,
    bytes: Arc<[u8]>,
    entries: Vec<ApkEntry>,
    index: HashMap<String, usize>,
    duplicates: Vec<String>,
}

fn u16_at(buf: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([buf[at], buf[at + 1]])
}

fn u32_at(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

fn truncated(what: impl Into<String>) -> ApkError {
    ApkError::TruncatedArchive(what.into())
}

/// Reads the file and parses its central directory.
pub fn open_apk(path: impl AsRef<Path>) -> Result<ApkArchive, ApkError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    ApkArchive::from_bytes(path, bytes)
}

impl ApkArchive {
    pub fn from_bytes(source_path: impl Into<PathBuf>, bytes: Vec<u8>) -> Result<Self, ApkError> {
        let bytes: Arc<[u8]> = bytes.into();
        let eocd = find_eocd(&bytes).ok_or(ApkError::NotAZip)?;

        let total_entries = u16_at(&bytes, eocd + 10) as usize;
        let cd_size = u32_at(&bytes, eocd + 12) as u64;
        let cd_offset = u32_at(&bytes, eocd + 16) as u64;
        if cd_offset == 0xFFFF_FFFF || cd_size == 0xFFFF_FFFF || total_entries == 0xFFFF {
            return Err(ApkError::Zip64Unsupported("end of central directory".into()));
        }
        if cd_offset + cd_size > eocd as u64 {
            return Err(truncated(format!(
                "central directory [{cd_offset}, {}) runs past its end record at {eocd}",
                cd_offset + cd_size
            )));
        }

        let mut entries: Vec<ApkEntry> = Vec::with_capacity(total_entries);
        let mut index: HashMap<String, usize> = HashMap::with_capacity(total_entries);
        let mut duplicates = Vec::new();
        let cd_end = (cd_offset + cd_size) as usize;
        let mut pos = cd_offset as usize;
        for i in 0..total_entries {
            if pos + CDFH_LEN > cd_end {
                return Err(truncated(format!("central directory header {i}")));
            }
            if u32_at(&bytes, pos) != CDFH_SIGNATURE {
                return Err(truncated(format!("bad central directory signature at {pos}")));
            }
            let method = u16_at(&bytes, pos + 10);
            let crc32 = u32_at(&bytes, pos + 16);
            let compressed_size = u32_at(&bytes, pos + 20) as u64;
            let uncompressed_size = u32_at(&bytes, pos + 24) as u64;
            let name_len = u16_at(&bytes, pos + 28) as usize;
            let extra_len = u16_at(&bytes, pos + 30) as usize;
            let comment_len = u16_at(&bytes, pos + 32) as usize;
            let local_header_offset = u32_at(&bytes, pos + 42) as u64;
            let name_start = pos + CDFH_LEN;
            let next = name_start + name_len + extra_len + comment_len;
            if next > cd_end {
                return Err(truncated(format!("central directory record {i}")));
            }
            let name = String::from_utf8_lossy(&bytes[name_start..name_start + name_len]).into_owned();
            if compressed_size == 0xFFFF_FFFF || uncompressed_size == 0xFFFF_FFFF || local_header_offset == 0xFFFF_FFFF
            {
                return Err(ApkError::Zip64Unsupported(name));
            }
            let entry = ApkEntry {
                name: name.clone(),
                compressed_size,
                uncompressed_size,
                crc32,
                method: method.into(),
                local_header_offset,
            };
            // Later central-directory records shadow earlier ones, as on-device.
            if let Some(&slot) = index.get(&name) {
                warn!("duplicate zip entry {name:?}; keeping the last occurrence");
                duplicates.push(name);
                entries[slot] = entry;
            } else {
                index.insert(name, entries.len());
                entries.push(entry);
            }
            pos = next;
        }

        Ok(Self {
            source_path: source_path.into(),
            bytes,
            entries,
            index,
            duplicates,
        })
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    /// Entries in central-directory order (first occurrence position for duplicates).
    pub fn entries(&self) -> &[ApkEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&ApkEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    /// Names that appeared more than once in the central directory.
    pub fn duplicate_names(&self) -> &[String] {
        &self.duplicates
    }

    /// Size of the APK file on disk.
    pub fn total_size(&self) -> u64 {
        self.bytes.len() as u64
    }

    pub fn raw_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Decompresses one entry and verifies its size and CRC-32.
    pub fn read_entry(&self, name: &str) -> Result<Vec<u8>, ApkError> {
        let entry = self
            .entry(name)
            .ok_or_else(|| ApkError::EntryNotFound(name.to_string()))?;
        let payload = self.payload(entry)?;
        let data = match entry.method {
            CompressionMethod::Stored => payload.to_vec(),
            CompressionMethod::Deflate => {
                let mut out = Vec::with_capacity(entry.uncompressed_size.min(1 << 26) as usize);
                // One byte of slack so oversized streams are detected, not silently cut.
                DeflateDecoder::new(payload)
                    .take(entry.uncompressed_size + 1)
                    .read_to_end(&mut out)
                    .map_err(|source| ApkError::Inflate {
                        name: entry.name.clone(),
                        source,
                    })?;
                out
            }
            CompressionMethod::Other(method) => {
                return Err(ApkError::UnsupportedCompressionMethod {
                    name: entry.name.clone(),
                    method,
                })
            }
        };
        if data.len() as u64 != entry.uncompressed_size {
            return Err(ApkError::SizeMismatch {
                name: entry.name.clone(),
                expected: entry.uncompressed_size,
                actual: data.len() as u64,
            });
        }
        let computed = crc32fast::hash(&data);
        if computed != entry.crc32 {
            return Err(ApkError::ChecksumMismatch {
                name: entry.name.clone(),
                stored: entry.crc32,
                computed,
            });
        }
        Ok(data)
    }

    /// The compressed payload slice, bounds-checked against the file.
    fn payload(&self, entry: &ApkEntry) -> Result<&[u8], ApkError> {
        let bytes = &self.bytes[..];
        let lfh = entry.local_header_offset as usize;
        if lfh.checked_add(LFH_LEN).is_none_or(|end| end > bytes.len()) {
            return Err(truncated(format!("local header of {}", entry.name)));
        }
        if u32_at(bytes, lfh) != LFH_SIGNATURE {
            return Err(truncated(format!("bad local header signature for {}", entry.name)));
        }
        let name_len = u16_at(bytes, lfh + 26) as usize;
        let extra_len = u16_at(bytes, lfh + 28) as usize;
        let start = lfh + LFH_LEN + name_len + extra_len;
        let end = start as u64 + entry.compressed_size;
        if end > bytes.len() as u64 {
            return Err(truncated(format!(
                "payload of {} ends at {end}, file is {} bytes",
                entry.name,
                bytes.len()
            )));
        }
        Ok(&bytes[start..end as usize])
    }

    /// Names of root-level `classes*.dex` entries in loading order:
    /// `classes.dex`, `classes2.dex`, `classes3.dex`, ...
    pub fn dex_entry_names(&self) -> Vec<&str> {
        let mut dex: Vec<(u32, &str)> = self
            .entries
            .iter()
            .filter_map(|e| dex_ordinal(&e.name).map(|n| (n, e.name.as_str())))
            .collect();
        dex.sort();
        dex.into_iter().map(|(_, name)| name).collect()
    }

    pub fn collect_code_bytes(&self, source: CodeSource) -> Result<Vec<u8>, ApkError> {
        match source {
            CodeSource::WholeFile => Ok(self.bytes.to_vec()),
            CodeSource::DexOnly => {
                let names = self.dex_entry_names();
                if names.is_empty() {
                    return Err(ApkError::NoDexFound);
                }
                let mut out = Vec::new();
                for name in names {
                    out.extend_from_slice(&self.read_entry(name)?);
                }
                Ok(out)
            }
        }
    }
}

/// `classes.dex` -> 1, `classesN.dex` -> N; anything else -> None.
fn dex_ordinal(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if digits.is_empty() {
        return Some(1);
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Scans backwards for the end-of-central-directory record.
fn find_eocd(bytes: &[u8]) -> Option<usize> {
    if bytes.len() < EOCD_LEN {
        return None;
    }
    let last = bytes.len() - EOCD_LEN;
    let first = last.saturating_sub(MAX_COMMENT_LEN);
    (first..=last).rev().find(|&pos| {
        u32_at(bytes, pos) == EOCD_SIGNATURE && pos + EOCD_LEN + u16_at(bytes, pos + 20) as usize <= bytes.len()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::ApkBuilder;

    fn archive(builder: ApkBuilder) -> ApkArchive {
        ApkArchive::from_bytes("fixture.apk", builder.build()).unwrap()
    }

    #[test]
    fn empty_input_is_not_a_zip() {
        assert!(matches!(
            ApkArchive::from_bytes("x", Vec::new()),
            Err(ApkError::NotAZip)
        ));
        assert!(matches!(
            ApkArchive::from_bytes("x", b"PK\x03\x04 definitely not".to_vec()),
            Err(ApkError::NotAZip)
        ));
    }

    #[test]
    fn eocd_only_archive_has_no_entries() {
        let mut eocd = vec![0u8; EOCD_LEN];
        eocd[..4].copy_from_slice(&EOCD_SIGNATURE.to_le_bytes());
        let a = ApkArchive::from_bytes("empty.zip", eocd).unwrap();
        assert!(a.entries().is_empty());
        assert_eq!(a.total_size(), 22);
    }

    #[test]
    fn missing_entry() {
        let a = archive(ApkBuilder::new().entry("a.txt", b"hello".to_vec()));
        assert!(matches!(a.read_entry("missing.bin"), Err(ApkError::EntryNotFound(_))));
    }

    #[test]
    fn stored_and_deflated_entries_roundtrip() {
        let payload: Vec<u8> = (0..5000u32).map(|i| (i % 7) as u8).collect();
        let a = archive(
            ApkBuilder::new()
                .entry("deflated.bin", payload.clone())
                .stored_entry("stored.bin", payload.clone()),
        );
        assert_eq!(a.read_entry("deflated.bin").unwrap(), payload);
        assert_eq!(a.read_entry("stored.bin").unwrap(), payload);
        assert_eq!(a.entry("deflated.bin").unwrap().method, CompressionMethod::Deflate);
        // idempotent
        assert_eq!(
            a.read_entry("deflated.bin").unwrap(),
            a.read_entry("deflated.bin").unwrap()
        );
    }

    #[test]
    fn corrupted_stored_payload_fails_checksum() {
        let bytes = ApkBuilder::new()
            .stored_entry("data.bin", b"0123456789abcdef".to_vec())
            .build();
        let mut corrupted = bytes.clone();
        let at = corrupted.windows(16).position(|w| w == b"0123456789abcdef").unwrap();
        corrupted[at + 3] ^= 0xFF;
        let a = ApkArchive::from_bytes("c.apk", corrupted).unwrap();
        assert!(matches!(
            a.read_entry("data.bin"),
            Err(ApkError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn truncated_central_directory() {
        let bytes = ApkBuilder::new().entry("a", vec![1, 2, 3]).build();
        // Drop bytes from the middle so the EOCD survives but its offsets overrun.
        let eocd = find_eocd(&bytes).unwrap();
        let mut cut = bytes[..10].to_vec();
        cut.extend_from_slice(&bytes[eocd..]);
        assert!(matches!(
            ApkArchive::from_bytes("t", cut),
            Err(ApkError::TruncatedArchive(_))
        ));
    }

    #[test]
    fn unsupported_method_is_an_error() {
        let mut bytes = ApkBuilder::new().stored_entry("a", vec![1, 2, 3]).build();
        // Patch the method field in the central directory record to bzip2 (12).
        let cd = bytes
            .windows(4)
            .position(|w| w == CDFH_SIGNATURE.to_le_bytes())
            .unwrap();
        bytes[cd + 10] = 12;
        let a = ApkArchive::from_bytes("m", bytes).unwrap();
        assert!(matches!(
            a.read_entry("a"),
            Err(ApkError::UnsupportedCompressionMethod { method: 12, .. })
        ));
    }

    #[test]
    fn dex_concatenation_uses_numeric_order() {
        let first = vec![0xAAu8; 100];
        let second = vec![0xBBu8; 50];
        let tenth = vec![0xCCu8; 10];
        let a = archive(
            ApkBuilder::new()
                .entry("classes10.dex", tenth.clone())
                .entry("classes2.dex", second.clone())
                .entry("AndroidManifest.xml", b"<manifest/>".to_vec())
                .entry("classes.dex", first.clone())
                .entry("lib/classes3.dex", vec![0; 4]),
        );
        assert_eq!(
            a.dex_entry_names(),
            vec!["classes.dex", "classes2.dex", "classes10.dex"]
        );
        let code = a.collect_code_bytes(CodeSource::DexOnly).unwrap();
        let expected: Vec<u8> = [first, second, tenth].concat();
        assert_eq!(code, expected);
    }

    #[test]
    fn whole_file_mode_is_identity() {
        let bytes = ApkBuilder::new().entry("classes.dex", vec![7; 33]).build();
        let a = ApkArchive::from_bytes("w", bytes.clone()).unwrap();
        assert_eq!(a.collect_code_bytes(CodeSource::WholeFile).unwrap(), bytes);
    }

    #[test]
    fn no_dex_in_dex_mode() {
        let a = archive(ApkBuilder::new().entry("res/x.xml", vec![1]));
        assert!(matches!(
            a.collect_code_bytes(CodeSource::DexOnly),
            Err(ApkError::NoDexFound)
        ));
    }

    #[test]
    fn duplicate_names_keep_last_occurrence() {
        let mut bytes = ApkBuilder::new()
            .entry("classes.dex", vec![1; 10])
            .entry("classes.xex", vec![2; 20])
            .build();
        // Rename the second entry in both its local and central headers.
        let mut n = 0;
        for i in 0..bytes.len() - 11 {
            if &bytes[i..i + 11] == b"classes.xex" {
                bytes[i..i + 11].copy_from_slice(b"classes.dex");
                n += 1;
            }
        }
        assert_eq!(n, 2);
        let a = ApkArchive::from_bytes("dup.apk", bytes).unwrap();
        assert_eq!(a.entries().len(), 1);
        assert_eq!(a.duplicate_names(), &["classes.dex".to_string()]);
        assert_eq!(a.read_entry("classes.dex").unwrap(), vec![2; 20]);
    }

    #[test]
    fn dex_ordinals() {
        assert_eq!(dex_ordinal("classes.dex"), Some(1));
        assert_eq!(dex_ordinal("classes2.dex"), Some(2));
        assert_eq!(dex_ordinal("classesX.dex"), None);
        assert_eq!(dex_ordinal("lib/classes.dex"), None);
    }
}
