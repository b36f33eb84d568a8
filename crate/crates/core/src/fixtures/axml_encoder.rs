//! Minimal binary-XML writer used to produce golden manifests.
//!
//! The output follows the layout `aapt2` emits: one `0x0003` document chunk
//! holding a string pool, a resource map, the namespace start, the element
//! stream and the namespace end.

use std::collections::HashMap;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

const RES_STRING_POOL: u16 = 0x0001;
const RES_XML: u16 = 0x0003;
const RES_XML_START_NAMESPACE: u16 = 0x0100;
const RES_XML_END_NAMESPACE: u16 = 0x0101;
const RES_XML_START_ELEMENT: u16 = 0x0102;
const RES_XML_END_ELEMENT: u16 = 0x0103;
const RES_XML_CDATA: u16 = 0x0104;
const RES_XML_RESOURCE_MAP: u16 = 0x0180;
const NO_INDEX: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    String(String),
    Bool(bool),
    Int(i32),
    Flags(u32),
    Reference(u32),
    /// Arbitrary typed value, e.g. a float (0x04) or a color (0x1c).
    Typed {
        data_type: u8,
        data: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attr {
    /// Namespace URI; `None` for unqualified attributes such as `package`.
    pub namespace: Option<String>,
    pub name: String,
    pub value: AttrValue,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<Attr>,
    pub children: Vec<Element>,
    pub text: Option<String>,
}

impl Element {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn attr(mut self, name: &str, value: AttrValue) -> Self {
        self.attrs.push(Attr {
            namespace: None,
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn android_attr(mut self, name: &str, value: AttrValue) -> Self {
        self.attrs.push(Attr {
            namespace: Some(ANDROID_NS.to_string()),
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn android_name(self, name: &str) -> Self {
        self.android_attr("name", AttrValue::String(name.to_string()))
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn text(mut self, text: &str) -> Self {
        self.text = Some(text.to_string());
        self
    }
}

/// Resource ids of the framework attributes the fixtures use.
fn framework_attr_id(name: &str) -> u32 {
    match name {
        "name" => 0x0101_0003,
        "label" => 0x0101_0001,
        "icon" => 0x0101_0002,
        "exported" => 0x0101_0010,
        "versionCode" => 0x0101_021b,
        "versionName" => 0x0101_021c,
        "minSdkVersion" => 0x0101_020c,
        "targetSdkVersion" => 0x0101_0270,
        "debuggable" => 0x0101_000f,
        _ => 0,
    }
}

#[derive(Debug, Clone)]
pub struct AxmlEncoder {
    utf8: bool,
    extra_chunks: Vec<Vec<u8>>,
}

impl Default for AxmlEncoder {
    fn default() -> Self {
        Self::new()
    }
}

struct StringTable {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl StringTable {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

impl AxmlEncoder {
    /// UTF-16 string pool, no extra chunks.
    pub fn new() -> Self {
        Self {
            utf8: false,
            extra_chunks: Vec::new(),
        }
    }

    pub fn utf8(mut self, utf8: bool) -> Self {
        self.utf8 = utf8;
        self
    }

    /// Inserts a raw chunk after the resource map (used to exercise unknown-chunk skipping).
    pub fn extra_chunk(mut self, chunk: Vec<u8>) -> Self {
        self.extra_chunks.push(chunk);
        self
    }

    pub fn encode(&self, root: &Element) -> Vec<u8> {
        let mut table = StringTable {
            strings: Vec::new(),
            index: HashMap::new(),
        };
        // Framework attribute names first so the resource map lines up with them.
        let mut res_ids = Vec::new();
        collect_android_attr_names(root, &mut |name| {
            if !table.index.contains_key(name) {
                table.intern(name);
                res_ids.push(framework_attr_id(name));
            }
        });
        let uses_android = !res_ids.is_empty() || uses_android_ns(root);
        let prefix_idx = uses_android.then(|| (table.intern("android"), table.intern(ANDROID_NS)));

        let mut body = Vec::new();
        if let Some((prefix, uri)) = prefix_idx {
            body.extend(namespace_chunk(RES_XML_START_NAMESPACE, prefix, uri));
        }
        self.encode_element(root, &mut table, &mut body);
        if let Some((prefix, uri)) = prefix_idx {
            body.extend(namespace_chunk(RES_XML_END_NAMESPACE, prefix, uri));
        }

        let mut inner = self.string_pool(&table.strings);
        if !res_ids.is_empty() {
            inner.extend(resource_map(&res_ids));
        }
        for chunk in &self.extra_chunks {
            inner.extend_from_slice(chunk);
        }
        inner.extend(body);

        let mut out = Vec::with_capacity(inner.len() + 8);
        put_header(&mut out, RES_XML, 8, (inner.len() + 8) as u32);
        out.extend(inner);
        out
    }

    fn encode_element(&self, el: &Element, table: &mut StringTable, out: &mut Vec<u8>) {
        let name = table.intern(&el.name);
        let mut attrs = Vec::with_capacity(el.attrs.len() * 20);
        for a in &el.attrs {
            let ns = a.namespace.as_deref().map_or(NO_INDEX, |uri| table.intern(uri));
            let attr_name = table.intern(&a.name);
            let (raw, data_type, data) = match &a.value {
                AttrValue::String(s) => {
                    let i = table.intern(s);
                    (i, 0x03u8, i)
                }
                AttrValue::Bool(b) => (NO_INDEX, 0x12, if *b { 0xFFFF_FFFF } else { 0 }),
                AttrValue::Int(v) => (NO_INDEX, 0x10, *v as u32),
                AttrValue::Flags(v) => (NO_INDEX, 0x11, *v),
                AttrValue::Reference(id) => (NO_INDEX, 0x01, *id),
                AttrValue::Typed { data_type, data } => (NO_INDEX, *data_type, *data),
            };
            attrs.extend(ns.to_le_bytes());
            attrs.extend(attr_name.to_le_bytes());
            attrs.extend(raw.to_le_bytes());
            attrs.extend(8u16.to_le_bytes());
            attrs.push(0);
            attrs.push(data_type);
            attrs.extend(data.to_le_bytes());
        }

        let size = 16 + 20 + attrs.len();
        put_header(out, RES_XML_START_ELEMENT, 16, size as u32);
        put_node_header(out);
        out.extend(NO_INDEX.to_le_bytes()); // element namespace
        out.extend(name.to_le_bytes());
        out.extend(20u16.to_le_bytes()); // attributeStart
        out.extend(20u16.to_le_bytes()); // attributeSize
        out.extend((el.attrs.len() as u16).to_le_bytes());
        out.extend([0u8; 6]); // id/class/style indices
        out.extend(attrs);

        if let Some(text) = &el.text {
            let idx = table.intern(text);
            put_header(out, RES_XML_CDATA, 16, 28);
            put_node_header(out);
            out.extend(idx.to_le_bytes());
            out.extend(8u16.to_le_bytes());
            out.push(0);
            out.push(0x03);
            out.extend(idx.to_le_bytes());
        }
        for child in &el.children {
            self.encode_element(child, table, out);
        }

        put_header(out, RES_XML_END_ELEMENT, 16, 24);
        put_node_header(out);
        out.extend(NO_INDEX.to_le_bytes());
        out.extend(name.to_le_bytes());
    }

    fn string_pool(&self, strings: &[String]) -> Vec<u8> {
        let mut data = Vec::new();
        let mut offsets = Vec::with_capacity(strings.len());
        for s in strings {
            offsets.push(data.len() as u32);
            if self.utf8 {
                put_utf8_len(&mut data, s.encode_utf16().count());
                put_utf8_len(&mut data, s.len());
                data.extend(s.as_bytes());
                data.push(0);
            } else {
                let units: Vec<u16> = s.encode_utf16().collect();
                put_utf16_len(&mut data, units.len());
                for u in units {
                    data.extend(u.to_le_bytes());
                }
                data.extend([0, 0]);
            }
        }
        while data.len() % 4 != 0 {
            data.push(0);
        }
        let strings_start = 28 + 4 * strings.len();
        let mut out = Vec::new();
        put_header(&mut out, RES_STRING_POOL, 28, (strings_start + data.len()) as u32);
        out.extend((strings.len() as u32).to_le_bytes());
        out.extend(0u32.to_le_bytes()); // style count
        out.extend((if self.utf8 { 0x100u32 } else { 0 }).to_le_bytes());
        out.extend((strings_start as u32).to_le_bytes());
        out.extend(0u32.to_le_bytes()); // styles start
        for o in offsets {
            out.extend(o.to_le_bytes());
        }
        out.extend(data);
        out
    }
}

fn collect_android_attr_names<'a>(el: &'a Element, f: &mut impl FnMut(&'a str)) {
    for a in &el.attrs {
        if a.namespace.as_deref() == Some(ANDROID_NS) {
            f(&a.name);
        }
    }
    for c in &el.children {
        collect_android_attr_names(c, f);
    }
}

fn uses_android_ns(el: &Element) -> bool {
    el.attrs.iter().any(|a| a.namespace.as_deref() == Some(ANDROID_NS)) || el.children.iter().any(uses_android_ns)
}

fn put_header(out: &mut Vec<u8>, chunk_type: u16, header_size: u16, size: u32) {
    out.extend(chunk_type.to_le_bytes());
    out.extend(header_size.to_le_bytes());
    out.extend(size.to_le_bytes());
}

/// Line number (always 1) and comment index (none).
fn put_node_header(out: &mut Vec<u8>) {
    out.extend(1u32.to_le_bytes());
    out.extend(NO_INDEX.to_le_bytes());
}

fn namespace_chunk(chunk_type: u16, prefix: u32, uri: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(24);
    put_header(&mut out, chunk_type, 16, 24);
    put_node_header(&mut out);
    out.extend(prefix.to_le_bytes());
    out.extend(uri.to_le_bytes());
    out
}

fn resource_map(ids: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + ids.len() * 4);
    put_header(&mut out, RES_XML_RESOURCE_MAP, 8, (8 + ids.len() * 4) as u32);
    for id in ids {
        out.extend(id.to_le_bytes());
    }
    out
}

fn put_utf8_len(out: &mut Vec<u8>, len: usize) {
    if len > 0x7F {
        out.push(0x80 | ((len >> 8) & 0x7F) as u8);
        out.push((len & 0xFF) as u8);
    } else {
        out.push(len as u8);
    }
}

fn put_utf16_len(out: &mut Vec<u8>, len: usize) {
    if len > 0x7FFF {
        out.extend((0x8000 | ((len >> 16) & 0x7FFF) as u16).to_le_bytes());
        out.extend(((len & 0xFFFF) as u16).to_le_bytes());
    } else {
        out.extend((len as u16).to_le_bytes());
    }
}

/// A manifest with the given package, permissions (in order) and application components.
pub fn manifest_element(package: &str, permissions: &[&str], components: &[(&str, &str)]) -> Element {
    let mut root = Element::new("manifest")
        .android_attr("versionCode", AttrValue::Int(1))
        .android_attr("versionName", AttrValue::String("1.0".into()))
        .attr("package", AttrValue::String(package.into()))
        .child(
            Element::new("uses-sdk")
                .android_attr("minSdkVersion", AttrValue::Int(21))
                .android_attr("targetSdkVersion", AttrValue::Int(33)),
        );
    for p in permissions {
        root = root.child(Element::new("uses-permission").android_name(p));
    }
    let mut app = Element::new("application")
        .android_attr("label", AttrValue::Reference(0x7f0b_0001))
        .android_attr("debuggable", AttrValue::Bool(false));
    for (kind, name) in components {
        app = app.child(Element::new(kind).android_name(name));
    }
    root.child(app)
}

/// Encodes [`manifest_element`] with a UTF-16 string pool.
pub fn encode_manifest(package: &str, permissions: &[&str], components: &[(&str, &str)]) -> Vec<u8> {
    AxmlEncoder::new().encode(&manifest_element(package, permissions, components))
}
