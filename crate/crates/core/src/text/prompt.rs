use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::evidence::TextEvidence;
use crate::label::Label;

pub const BENIGN_PROMPT: &str = "Examine the provided text extracts from the APK file. In a single paragraph, identify and summarize the key features that indicate the APK is benignware. Focus on necessary permissions, strings related to app functionality, and the absence of malicious indicators. Provide a concise and informative summary, prioritizing the most important and relevant features.";

pub const MALWARE_PROMPT: &str = "Examine the provided text extracts from the APK file. In a single paragraph, identify and summarize the key features that indicate the APK is malware. Focus on dangerous permissions (e.g., 'SEND_SMS', 'READ_CONTACTS'), suspicious strings (URLs, IP addresses, C&C related terms), and indications of malicious behavior (data theft, device manipulation).";

/// Separates the instruction from the evidence in a rendered prompt.
pub const EVIDENCE_DELIMITER: &str = "### APK text extracts";

pub const DEFAULT_MAX_INPUT_TOKENS: usize = 3500;

pub fn template_for(hypothesis: Label) -> &'static str {
    match hypothesis {
        Label::Benign => BENIGN_PROMPT,
        Label::Malware => MALWARE_PROMPT,
    }
}

pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
}

/// Counts whitespace-separated tokens; used when no model tokenizer is attached.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokens;

impl TokenCounter for WhitespaceTokens {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub label_hypothesis: Label,
    pub template_text: String,
    pub evidence_digest: String,
    pub max_input_tokens: usize,
    /// Evidence items left out to stay within the token bound.
    pub dropped_items: usize,
}

impl PromptInstance {
    pub fn render(&self) -> String {
        compose(&self.template_text, &self.evidence_digest)
    }

    /// SHA-256 of the rendered prompt; keys the stub corpus.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }
}

fn compose(template: &str, digest: &str) -> String {
    let body = if digest.is_empty() { "(none)" } else { digest };
    format!("{template}\n\n{EVIDENCE_DELIMITER}\n{body}\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Dangerous,
    Urls,
    Ips,
    Permissions,
    Strings,
}

impl Section {
    fn heading(self) -> &'static str {
        match self {
            Section::Dangerous => "Dangerous permissions:",
            Section::Urls => "URLs:",
            Section::Ips => "IP addresses:",
            Section::Permissions => "Permissions:",
            Section::Strings => "Strings:",
        }
    }
}

/// Evidence items in retention priority order: dangerous hits, URLs/IPs,
/// remaining permissions, then other strings.
fn prioritized_items(ev: &TextEvidence) -> Vec<(Section, &str)> {
    let mut items: Vec<(Section, &str)> = Vec::new();
    items.extend(
        ev.dangerous_permission_hits
            .iter()
            .map(|s| (Section::Dangerous, s.as_str())),
    );
    items.extend(ev.urls.iter().map(|s| (Section::Urls, s.as_str())));
    items.extend(ev.ip_addresses.iter().map(|s| (Section::Ips, s.as_str())));
    items.extend(
        ev.permissions
            .iter()
            .filter(|p| !ev.dangerous_permission_hits.contains(p))
            .map(|s| (Section::Permissions, s.as_str())),
    );
    items.extend(
        ev.printable_strings
            .iter()
            .filter(|s| !ev.urls.contains(s) && !ev.ip_addresses.contains(s))
            .map(|s| (Section::Strings, s.as_str())),
    );
    items
}

fn render_digest(items: &[(Section, &str)]) -> String {
    let mut lines = Vec::new();
    let mut current = None;
    for (section, item) in items {
        if current != Some(*section) {
            lines.push(section.heading().to_string());
            current = Some(*section);
        }
        lines.push(format!("- {item}"));
    }
    lines.join("\n")
}

pub fn build_prompt(evidence: &TextEvidence, hypothesis: Label, max_input_tokens: usize) -> PromptInstance {
    build_prompt_with(evidence, hypothesis, max_input_tokens, &WhitespaceTokens)
}

/// Keeps the longest priority-ordered prefix of the evidence whose rendered prompt
/// fits `max_input_tokens`. The template itself is never cut.
pub fn build_prompt_with(
    evidence: &TextEvidence,
    hypothesis: Label,
    max_input_tokens: usize,
    counter: &dyn TokenCounter,
) -> PromptInstance {
    let template = template_for(hypothesis);
    let items = prioritized_items(evidence);
    let fits = |k: usize| counter.count(&compose(template, &render_digest(&items[..k]))) <= max_input_tokens;

    // Largest k in [0, len] with fits(k); token counts grow with k.
    let keep = if fits(items.len()) {
        items.len()
    } else {
        let (mut lo, mut hi) = (0usize, items.len());
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    };

    PromptInstance {
        label_hypothesis: hypothesis,
        template_text: template.to_string(),
        evidence_digest: render_digest(&items[..keep]),
        max_input_tokens,
        dropped_items: items.len() - keep,
    }
}
