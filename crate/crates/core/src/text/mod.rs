//! Text evidence from an APK, the two annotation prompts, and annotators.

mod annotate;
mod evidence;
mod prompt;

pub use annotate::{
    AnnotateError, Annotation, Annotator, AnnotatorConfig, AnnotatorMode, GenerationParams, LiveAnnotator, Provenance,
    StubAnnotator, DEFAULT_MODEL, ENV_API_KEY, ENV_ENDPOINT, ENV_MODE, ENV_MODEL,
};
pub use evidence::{
    extract_evidence, find_ipv4, find_urls, printable_runs, EvidenceConfig, TextEvidence, DEFAULT_DANGEROUS_PERMISSIONS,
};
pub use prompt::{
    build_prompt, build_prompt_with, template_for, PromptInstance, TokenCounter, WhitespaceTokens, BENIGN_PROMPT,
    DEFAULT_MAX_INPUT_TOKENS, EVIDENCE_DELIMITER, MALWARE_PROMPT,
};
