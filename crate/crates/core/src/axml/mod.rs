//! Decoder for Android binary XML (`AndroidManifest.xml` inside an APK).
//!
//! The document is a `0x0003` chunk whose body is tiled by child chunks:
//! a string pool, an optional resource map, and the namespace/element event
//! stream. Unknown chunk types are skipped by size. Plain-text XML is accepted
//! as a fallback so unpacked manifests go through the same model.

mod stringpool;
mod xml;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stringpool::{StringEncoding, StringPool};
pub use xml::{XmlElement, XmlNode};

use xml::{normalize_value, sanitize_ncname};

pub const RES_STRING_POOL: u16 = 0x0001;
pub const RES_XML: u16 = 0x0003;
pub const RES_XML_START_NAMESPACE: u16 = 0x0100;
pub const RES_XML_END_NAMESPACE: u16 = 0x0101;
pub const RES_XML_START_ELEMENT: u16 = 0x0102;
pub const RES_XML_END_ELEMENT: u16 = 0x0103;
pub const RES_XML_CDATA: u16 = 0x0104;
pub const RES_XML_RESOURCE_MAP: u16 = 0x0180;

const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";
const NO_INDEX: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum AxmlError {
    #[error("not an Android binary XML or text XML document")]
    NotAxml,
    #[error("truncated chunk at offset {offset}: {reason}")]
    TruncatedChunk { offset: usize, reason: String },
    #[error("string index {index} out of range (pool holds {count})")]
    StringIndexOutOfRange { index: u32, count: usize },
    #[error("string {0} lies outside the string pool")]
    MalformedString(u32),
    #[error("malformed attribute in element at offset {offset}: {reason}")]
    MalformedAttribute { offset: usize, reason: String },
    #[error("element events reference strings but no string pool precedes them")]
    MissingStringPool,
    #[error("document contains no element")]
    NoRootElement,
    #[error(transparent)]
    TextXml(#[from] xml::TextXmlError),
}

/// Header of one chunk. `offset` is relative to the start of the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxmlChunk {
    pub chunk_type: u16,
    pub header_size: u16,
    pub chunk_size: u32,
    pub offset: usize,
}

impl AxmlChunk {
    pub fn payload(&self) -> std::ops::Range<usize> {
        self.offset + self.header_size as usize..self.offset + self.chunk_size as usize
    }

    fn end(&self) -> usize {
        self.offset + self.chunk_size as usize
    }
}

pub(crate) fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

pub(crate) fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn read_chunk_header(data: &[u8], offset: usize, limit: usize) -> Result<AxmlChunk, AxmlError> {
    if offset + 8 > limit {
        return Err(AxmlError::TruncatedChunk {
            offset,
            reason: format!("{} bytes left, chunk header needs 8", limit - offset),
        });
    }
    let chunk = AxmlChunk {
        chunk_type: le_u16(data, offset),
        header_size: le_u16(data, offset + 2),
        chunk_size: le_u32(data, offset + 4),
        offset,
    };
    if chunk.header_size < 8 || chunk.header_size as u32 > chunk.chunk_size {
        return Err(AxmlError::TruncatedChunk {
            offset,
            reason: format!(
                "header size {} inconsistent with chunk size {}",
                chunk.header_size, chunk.chunk_size
            ),
        });
    }
    if offset as u64 + chunk.chunk_size as u64 > limit as u64 {
        return Err(AxmlError::TruncatedChunk {
            offset,
            reason: format!("chunk of {} bytes overruns its container", chunk.chunk_size),
        });
    }
    Ok(chunk)
}

/// Splits a binary XML document into its outer chunk and the chunks that tile its body.
pub fn document_chunks(data: &[u8]) -> Result<(AxmlChunk, Vec<AxmlChunk>), AxmlError> {
    if data.len() < 2 || le_u16(data, 0) != RES_XML {
        return Err(AxmlError::NotAxml);
    }
    let doc = read_chunk_header(data, 0, data.len())?;
    let mut chunks = Vec::new();
    let mut pos = doc.header_size as usize;
    while pos < doc.end() {
        let chunk = read_chunk_header(data, pos, doc.end())?;
        pos = chunk.end();
        chunks.push(chunk);
    }
    Ok((doc, chunks))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Activity,
    Service,
    Receiver,
    Provider,
}

impl ComponentKind {
    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "activity" => Some(Self::Activity),
            "service" => Some(Self::Service),
            "receiver" => Some(Self::Receiver),
            "provider" => Some(Self::Provider),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub kind: ComponentKind,
    pub name: String,
}

/// Structured view of a decoded manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestModel {
    pub package_name: String,
    pub permissions: Vec<String>,
    pub components: Vec<Component>,
    pub intent_actions: Vec<String>,
    pub raw_xml: String,
    pub document: XmlElement,
}

impl ManifestModel {
    pub fn from_document(document: XmlElement) -> Self {
        let package_name = document.attr("package").unwrap_or_default().to_string();
        let permissions = permissions_of(&document);
        let mut components = Vec::new();
        let mut intent_actions = Vec::new();
        for el in document.descendants() {
            let name = el.attr("android:name");
            if let (Some(kind), Some(name)) = (ComponentKind::from_tag(&el.name), name) {
                components.push(Component {
                    kind,
                    name: name.to_string(),
                });
            }
            if el.name == "action" {
                if let Some(name) = name {
                    intent_actions.push(name.to_string());
                }
            }
        }
        let raw_xml = document.to_xml();
        Self {
            package_name,
            permissions,
            components,
            intent_actions,
            raw_xml,
            document,
        }
    }
}

fn permissions_of(document: &XmlElement) -> Vec<String> {
    let mut seen = HashSet::new();
    document
        .descendants()
        .into_iter()
        .filter(|e| e.name == "uses-permission")
        .filter_map(|e| e.attr("android:name"))
        .filter(|p| seen.insert(p.to_string()))
        .map(str::to_string)
        .collect()
}

/// `android:name` of every `uses-permission`, document order, first occurrence kept.
pub fn extract_permissions(model: &ManifestModel) -> Vec<String> {
    permissions_of(&model.document)
}

/// Decodes binary XML (or plain-text XML) into a [`ManifestModel`].
pub fn decode_axml(data: &[u8]) -> Result<ManifestModel, AxmlError> {
    decode_document(data).map(ManifestModel::from_document)
}

/// Decodes to the element tree only.
pub fn decode_document(data: &[u8]) -> Result<XmlElement, AxmlError> {
    if data.len() >= 2 && le_u16(data, 0) == RES_XML {
        return decode_binary(data);
    }
    let text = data.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(data);
    if text.first() == Some(&b'<') {
        let text = String::from_utf8_lossy(text);
        return Ok(xml::parse_text_xml(&text)?);
    }
    Err(AxmlError::NotAxml)
}

struct OpenElement {
    element: XmlElement,
}

#[derive(Default)]
struct TreeBuilder {
    /// Namespace mappings from start-namespace chunks currently in effect.
    scope: Vec<(String, String)>,
    /// Declarations waiting for the next start element.
    pending: Vec<(String, String)>,
    stack: Vec<OpenElement>,
    root: Option<XmlElement>,
}

impl TreeBuilder {
    fn start_namespace(&mut self, prefix: Option<&str>, uri: Option<&str>) {
        let prefix = sanitize_ncname(prefix.unwrap_or("ns"));
        let uri = normalize_value(uri.unwrap_or_default());
        self.scope.push((prefix.clone(), uri.clone()));
        self.pending.push((prefix, uri));
    }

    fn end_namespace(&mut self) {
        self.scope.pop();
    }

    fn declared_in_stack(&self, prefix: &str) -> Option<&str> {
        self.stack.iter().rev().find_map(|open| {
            open.element
                .namespaces
                .iter()
                .find(|(p, _)| p == prefix)
                .map(|(_, u)| u.as_str())
        })
    }

    /// Chooses a prefix for `uri` that is (or becomes) declared on `el` or an ancestor.
    fn prefix_for(&self, el: &mut XmlElement, uri: &str) -> String {
        let uri = normalize_value(uri);
        if let Some((p, _)) = el.namespaces.iter().find(|(_, u)| *u == uri) {
            return p.clone();
        }
        let base = self
            .scope
            .iter()
            .rev()
            .find(|(_, u)| *u == uri)
            .map(|(p, _)| p.clone())
            .unwrap_or_else(|| {
                if uri == ANDROID_NS {
                    "android".into()
                } else {
                    "ns".into()
                }
            });
        let mut prefix = base.clone();
        let mut n = 0;
        loop {
            let on_self = el
                .namespaces
                .iter()
                .find(|(p, _)| *p == prefix)
                .map(|(_, u)| u.as_str());
            match on_self.or_else(|| self.declared_in_stack(&prefix)) {
                Some(u) if u == uri => return prefix,
                None => {
                    el.namespaces.push((prefix.clone(), uri));
                    return prefix;
                }
                Some(_) => {
                    n += 1;
                    prefix = format!("{base}{n}");
                }
            }
        }
    }

    fn attach_pending(&mut self, el: &mut XmlElement) {
        for (p, u) in std::mem::take(&mut self.pending) {
            if !el.namespaces.iter().any(|(q, _)| *q == p) {
                el.namespaces.push((p, u));
            }
        }
    }

    fn start_element(&mut self, el: XmlElement) {
        self.stack.push(OpenElement { element: el });
    }

    fn end_element(&mut self) {
        let Some(open) = self.stack.pop() else { return };
        let el = open.element;
        match self.stack.last_mut() {
            Some(parent) => parent.element.children.push(XmlNode::Element(el)),
            None => {
                if self.root.is_none() {
                    self.root = Some(el);
                }
            }
        }
    }

    fn text(&mut self, text: String) {
        if text.trim().is_empty() {
            return;
        }
        let Some(open) = self.stack.last_mut() else { return };
        let children = &mut open.element.children;
        if let Some(XmlNode::Text(prev)) = children.last_mut() {
            prev.push_str(&text);
        } else {
            children.push(XmlNode::Text(text));
        }
    }

    fn finish(mut self) -> Result<XmlElement, AxmlError> {
        while !self.stack.is_empty() {
            self.end_element();
        }
        self.root.ok_or(AxmlError::NoRootElement)
    }
}

fn decode_binary(data: &[u8]) -> Result<XmlElement, AxmlError> {
    let (_, chunks) = document_chunks(data)?;
    let mut pool: Option<StringPool> = None;
    let mut resource_ids: Vec<u32> = Vec::new();
    let mut tree = TreeBuilder::default();

    for chunk in chunks {
        let bytes = &data[chunk.offset..chunk.end()];
        match chunk.chunk_type {
            RES_STRING_POOL => {
                if pool.is_none() {
                    pool = Some(StringPool::parse(bytes, chunk.offset)?);
                }
            }
            RES_XML_RESOURCE_MAP => {
                resource_ids = data[chunk.payload()]
                    .chunks_exact(4)
                    .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect();
            }
            RES_XML_START_NAMESPACE | RES_XML_END_NAMESPACE => {
                let body = node_body(bytes, &chunk, 8)?;
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                if chunk.chunk_type == RES_XML_START_NAMESPACE {
                    let prefix = pool.get_opt(le_u32(body, 0))?;
                    let uri = pool.get_opt(le_u32(body, 4))?;
                    tree.start_namespace(prefix, uri);
                } else {
                    tree.end_namespace();
                }
            }
            RES_XML_START_ELEMENT => {
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                let el = start_element(bytes, &chunk, pool, &resource_ids, &mut tree)?;
                tree.start_element(el);
            }
            RES_XML_END_ELEMENT => {
                node_body(bytes, &chunk, 8)?;
                tree.end_element();
            }
            RES_XML_CDATA => {
                let body = node_body(bytes, &chunk, 4)?;
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                if let Some(text) = pool.get_opt(le_u32(body, 0))? {
                    tree.text(normalize_value(text));
                }
            }
            _ => {}
        }
    }
    tree.finish()
}

/// Body of an XML node chunk (after its 16-byte header), at least `min` bytes long.
fn node_body<'a>(bytes: &'a [u8], chunk: &AxmlChunk, min: usize) -> Result<&'a [u8], AxmlError> {
    let start = chunk.header_size as usize;
    if start < 16 || bytes.len() < start + min {
        return Err(AxmlError::TruncatedChunk {
            offset: chunk.offset,
            reason: format!("node chunk {:#06x} too short", chunk.chunk_type),
        });
    }
    Ok(&bytes[start..])
}

/// Android framework attribute names, for obfuscated pools that blank them.
fn framework_attr_name(id: u32) -> Option<&'static str> {
    Some(match id {
        0x0101_0001 => "label",
        0x0101_0002 => "icon",
        0x0101_0003 => "name",
        0x0101_000f => "debuggable",
        0x0101_0010 => "exported",
        0x0101_020c => "minSdkVersion",
        0x0101_021b => "versionCode",
        0x0101_021c => "versionName",
        0x0101_0270 => "targetSdkVersion",
        _ => return None,
    })
}

fn start_element(
    bytes: &[u8],
    chunk: &AxmlChunk,
    pool: &StringPool,
    resource_ids: &[u32],
    tree: &mut TreeBuilder,
) -> Result<XmlElement, AxmlError> {
    let body = node_body(bytes, chunk, 20)?;
    let name = pool.get(le_u32(body, 4))?;
    let attr_start = le_u16(body, 8) as usize;
    let attr_size = le_u16(body, 10) as usize;
    let attr_count = le_u16(body, 12) as usize;
    let malformed = |reason: String| AxmlError::MalformedAttribute {
        offset: chunk.offset,
        reason,
    };
    if attr_count > 0 && attr_size < 20 {
        return Err(malformed(format!("attribute size {attr_size} < 20")));
    }
    if attr_start + attr_size * attr_count > body.len() {
        return Err(malformed(format!(
            "{attr_count} attributes of {attr_size} bytes at {attr_start} overrun the chunk"
        )));
    }

    let mut el = XmlElement::new(sanitize_ncname(name));
    tree.attach_pending(&mut el);
    for i in 0..attr_count {
        let a = &body[attr_start + i * attr_size..];
        let ns_idx = le_u32(a, 0);
        let name_idx = le_u32(a, 4);
        let raw_idx = le_u32(a, 8);
        let data_type = a[15];
        let data = le_u32(a, 16);

        let mut local = pool.get(name_idx)?.to_string();
        if local.is_empty() {
            if let Some(known) = resource_ids
                .get(name_idx as usize)
                .and_then(|&id| framework_attr_name(id))
            {
                local = known.to_string();
            }
        }
        let local = sanitize_ncname(&local);
        let qualified = match pool.get_opt(ns_idx)? {
            Some(uri) => format!("{}:{local}", tree.prefix_for(&mut el, uri)),
            None => local,
        };
        let value = render_typed_value(pool, raw_idx, data_type, data)?;
        if !el.attributes.iter().any(|(k, _)| *k == qualified) {
            el.attributes.push((qualified, normalize_value(&value)));
        }
    }
    Ok(el)
}

/// Renders a `Res_value`. Types outside string/bool/int/flags/reference become hex literals.
fn render_typed_value(pool: &StringPool, raw_idx: u32, data_type: u8, data: u32) -> Result<String, AxmlError> {
    Ok(match data_type {
        0x03 => {
            let idx = if raw_idx != NO_INDEX { raw_idx } else { data };
            pool.get(idx)?.to_string()
        }
        0x01 => format!("@0x{data:08x}"),
        0x10 => (data as i32).to_string(),
        0x11 => format!("0x{data:08x}"),
        0x12 => (data != 0).to_string(),
        _ => format!("0x{data:08x}"),
    })
}
