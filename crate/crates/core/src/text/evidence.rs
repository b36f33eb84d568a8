use std::collections::{BTreeMap, HashSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::apk::ApkArchive;
use crate::axml::ManifestModel;

/// Permissions flagged as dangerous by default, matched on the name after the last `.`.
pub const DEFAULT_DANGEROUS_PERMISSIONS: &[&str] = &[
    "SEND_SMS",
    "READ_CONTACTS",
    "RECEIVE_SMS",
    "READ_SMS",
    "CALL_PHONE",
    "RECORD_AUDIO",
    "ACCESS_FINE_LOCATION",
    "WRITE_CONTACTS",
    "READ_PHONE_STATE",
    "SYSTEM_ALERT_WINDOW",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    /// Shortest printable run kept as a string.
    pub min_string_len: usize,
    pub dangerous_permissions: Vec<String>,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            min_string_len: 4,
            dangerous_permissions: DEFAULT_DANGEROUS_PERMISSIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEvidence {
    pub permissions: Vec<String>,
    pub printable_strings: Vec<String>,
    pub urls: Vec<String>,
    pub ip_addresses: Vec<String>,
    pub dangerous_permission_hits: Vec<String>,
    /// Printable runs found per entry, before de-duplication.
    pub source_entry_counts: BTreeMap<String, usize>,
}

fn printable(b: u8) -> bool {
    b == b'\t' || (0x20..=0x7E).contains(&b)
}

/// Maximal runs of printable ASCII (space..tilde and tab) at least `min_len` long.
pub fn printable_runs(bytes: &[u8], min_len: usize) -> Vec<String> {
    bytes
        .split(|&b| !printable(b))
        .filter(|run| run.len() >= min_len.max(1))
        .map(|run| String::from_utf8_lossy(run).into_owned())
        .collect()
}

fn url_stop(c: char) -> bool {
    c.is_whitespace() || matches!(c, '"' | '\'' | '<' | '>' | '`' | '{' | '}' | '|' | '\\' | '^')
}

/// Every `http://` / `https://` occurrence, extended to the next whitespace or quote.
pub fn find_urls(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let lower = s.to_ascii_lowercase();
    let mut from = 0;
    while let Some(rel) = lower[from..].find("http") {
        let start = from + rel;
        let rest = &lower[start..];
        let scheme_len = if rest.starts_with("https://") {
            8
        } else if rest.starts_with("http://") {
            7
        } else {
            from = start + 4;
            continue;
        };
        let end = s[start..]
            .char_indices()
            .find(|&(_, c)| url_stop(c))
            .map_or(s.len(), |(i, _)| start + i);
        if end > start + scheme_len {
            out.push(s[start..end].to_string());
        }
        from = end.max(start + scheme_len);
    }
    out
}

/// Dotted quads with 1-3 digit octets in 0..=255, not embedded in a longer digit/dot run.
pub fn find_ipv4(s: &str) -> Vec<String> {
    s.split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .filter(|tok| {
            let parts: Vec<&str> = tok.split('.').collect();
            parts.len() == 4
                && parts
                    .iter()
                    .all(|p| (1..=3).contains(&p.len()) && p.parse::<u16>().is_ok_and(|v| v <= 255))
        })
        .map(str::to_string)
        .collect()
}

fn is_string_source(name: &str) -> bool {
    name == "resources.arsc" || name.starts_with("res/") || name.starts_with("assets/")
}

fn push_unique(out: &mut Vec<String>, seen: &mut HashSet<String>, s: String) {
    if seen.insert(s.clone()) {
        out.push(s);
    }
}

/// Strings, URLs and IPs from the dex and resource entries, plus permissions from the manifest.
pub fn extract_evidence(archive: &ApkArchive, manifest: &ManifestModel, config: &EvidenceConfig) -> TextEvidence {
    let mut sources: Vec<&str> = archive.dex_entry_names();
    sources.extend(
        archive
            .entries()
            .iter()
            .map(|e| e.name.as_str())
            .filter(|n| is_string_source(n)),
    );

    let mut evidence = TextEvidence {
        permissions: manifest.permissions.clone(),
        ..Default::default()
    };
    let (mut seen_strings, mut seen_urls, mut seen_ips) = (HashSet::new(), HashSet::new(), HashSet::new());
    for name in sources {
        let data = match archive.read_entry(name) {
            Ok(d) => d,
            Err(e) => {
                warn!("{}: skipping {name}: {e}", archive.source_path().display());
                continue;
            }
        };
        let runs = printable_runs(&data, config.min_string_len);
        evidence.source_entry_counts.insert(name.to_string(), runs.len());
        for run in runs {
            for url in find_urls(&run) {
                push_unique(&mut evidence.urls, &mut seen_urls, url);
            }
            for ip in find_ipv4(&run) {
                push_unique(&mut evidence.ip_addresses, &mut seen_ips, ip);
            }
            push_unique(&mut evidence.printable_strings, &mut seen_strings, run);
        }
    }

    evidence.dangerous_permission_hits = evidence
        .permissions
        .iter()
        .filter(|p| {
            let short = p.rsplit('.').next().unwrap_or(p);
            config.dangerous_permissions.iter().any(|d| d == *p || d == short)
        })
        .cloned()
        .collect();
    evidence
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axml::decode_axml;
    use crate::fixtures::{encode_manifest, ApkBuilder};

    #[test]
    fn runs_respect_min_len() {
        let data = b"\x00abc\x01abcd\xffhello world\x00";
        assert_eq!(printable_runs(data, 4), vec!["abcd", "hello world"]);
        assert!(printable_runs(&[0u8, 1, 2, 200, 255], 4).is_empty());
    }

    #[test]
    fn url_scan() {
        assert_eq!(
            find_urls("GET http://evil.example/c2 and HTTPS://x.y/z\"q"),
            vec!["http://evil.example/c2", "HTTPS://x.y/z"]
        );
        assert!(find_urls("httpd http:// none").is_empty());
    }

    #[test]
    fn ipv4_scan() {
        assert_eq!(
            find_ipv4("at 10.0.0.1:8080 or 192.168.1.255"),
            vec!["10.0.0.1", "192.168.1.255"]
        );
        assert!(find_ipv4("256.1.1.1 1.2.3 1.2.3.4.5 1..2.3 0001.2.3.4").is_empty());
    }

    #[test]
    fn evidence_from_planted_fixture() {
        let mut dex = vec![0u8; 64];
        dex.extend_from_slice(b"http://evil.example/c2");
        dex.push(0);
        dex.extend_from_slice(b"connect 185.10.20.30");
        dex.extend([0xFF; 8]);
        let manifest = encode_manifest(
            "m.x",
            &["android.permission.INTERNET", "android.permission.SEND_SMS"],
            &[],
        );
        let bytes = ApkBuilder::new()
            .entry("AndroidManifest.xml", manifest.clone())
            .entry("classes.dex", dex)
            .entry("res/raw/cfg.txt", b"server=backup.example".to_vec())
            .entry("lib/arm64/libx.so", b"not scanned string".to_vec())
            .build();
        let archive = ApkArchive::from_bytes("f.apk", bytes).unwrap();
        let model = decode_axml(&manifest).unwrap();
        let ev = extract_evidence(&archive, &model, &EvidenceConfig::default());
        assert_eq!(ev.urls, vec!["http://evil.example/c2"]);
        assert_eq!(ev.ip_addresses, vec!["185.10.20.30"]);
        assert_eq!(ev.dangerous_permission_hits, vec!["android.permission.SEND_SMS"]);
        assert!(ev.printable_strings.contains(&"server=backup.example".to_string()));
        assert!(!ev.printable_strings.iter().any(|s| s.contains("not scanned")));
        assert_eq!(ev.source_entry_counts["classes.dex"], 2);
        for url in &ev.urls {
            assert!(ev.printable_strings.iter().any(|s| s.contains(url.as_str())));
        }
    }

    #[test]
    fn binary_only_dex_has_no_strings() {
        let bytes = ApkBuilder::new()
            .entry("classes.dex", [0xFE, 0x00, 0x81, 0x02].repeat(100))
            .build();
        let archive = ApkArchive::from_bytes("b.apk", bytes).unwrap();
        let model = decode_axml(br#"<manifest package="p"/>"#).unwrap();
        let ev = extract_evidence(&archive, &model, &EvidenceConfig::default());
        assert!(ev.printable_strings.is_empty());
        assert!(ev.dangerous_permission_hits.is_empty());
    }
}
