//! Element tree shared by the binary and plain-text decode paths, and its
//! textual rendering (UTF-8, LF line endings, two-space indent).

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XmlNode {
    Element(XmlElement),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct XmlElement {
    pub name: String,
    /// `xmlns:prefix="uri"` declarations made on this element.
    pub namespaces: Vec<(String, String)>,
    /// Qualified attribute names (`android:name`) with rendered values.
    pub attributes: Vec<(String, String)>,
    pub children: Vec<XmlNode>,
}

impl XmlElement {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &XmlElement> {
        self.children.iter().filter_map(|c| match c {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        })
    }

    /// Pre-order walk over this element and all descendants.
    pub fn descendants(&self) -> Vec<&XmlElement> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            out.push(e);
            let mut kids: Vec<&XmlElement> = e.child_elements().collect();
            kids.reverse();
            stack.extend(kids);
        }
        out
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
        write_element(&mut out, self, 0, true);
        out
    }
}

fn write_element(out: &mut String, el: &XmlElement, depth: usize, pretty: bool) {
    if pretty {
        out.push_str(&"  ".repeat(depth));
    }
    out.push('<');
    out.push_str(&el.name);
    for (prefix, uri) in &el.namespaces {
        let _ = write!(out, " xmlns:{prefix}=\"{}\"", escape_attr(uri));
    }
    for (k, v) in &el.attributes {
        let _ = write!(out, " {k}=\"{}\"", escape_attr(v));
    }
    if el.children.is_empty() {
        out.push_str("/>");
        if pretty {
            out.push('\n');
        }
        return;
    }
    out.push('>');
    // Elements holding text are written inline so no whitespace is invented.
    let inline = !pretty || el.children.iter().any(|c| matches!(c, XmlNode::Text(_)));
    if !inline {
        out.push('\n');
    }
    for child in &el.children {
        match child {
            XmlNode::Element(e) => write_element(out, e, depth + 1, !inline),
            XmlNode::Text(t) => out.push_str(&escape_text(t)),
        }
    }
    if !inline {
        out.push_str(&"  ".repeat(depth));
    }
    out.push_str("</");
    out.push_str(&el.name);
    out.push('>');
    if pretty {
        out.push('\n');
    }
}

/// Characters XML 1.0 cannot carry at all become U+FFFD.
fn legal_char(c: char) -> char {
    match c {
        '\t' | '\n' | '\r' => c,
        c if (c as u32) < 0x20 => '\u{FFFD}',
        '\u{FFFE}' | '\u{FFFF}' => '\u{FFFD}',
        c => c,
    }
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars().map(legal_char) {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars().map(legal_char) {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// Values as the text-XML parser will read them back.
pub(crate) fn normalize_value(s: &str) -> String {
    s.chars().map(legal_char).collect()
}

/// Coerces an arbitrary decoded string into an XML NCName (no colon).
pub(crate) fn sanitize_ncname(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for (i, c) in raw.chars().enumerate() {
        let ok = if i == 0 {
            c.is_alphabetic() || c == '_'
        } else {
            c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
        };
        out.push(if ok { c } else { '_' });
    }
    if out.is_empty() {
        out.push('_');
    }
    if out.to_ascii_lowercase().starts_with("xml") {
        out.insert(0, '_');
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("malformed text XML: {0}")]
pub struct TextXmlError(pub String);

/// Builds the element tree from plain-text XML.
pub(crate) fn parse_text_xml(text: &str) -> Result<XmlElement, TextXmlError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| TextXmlError(e.to_string()))?;
    Ok(convert(doc.root_element()))
}

fn convert(node: roxmltree::Node<'_, '_>) -> XmlElement {
    let parent_ns: Vec<(Option<&str>, &str)> = node
        .parent_element()
        .map(|p| p.namespaces().map(|n| (n.name(), n.uri())).collect())
        .unwrap_or_default();
    let namespaces = node
        .namespaces()
        .filter(|n| n.name().is_some() && !parent_ns.contains(&(n.name(), n.uri())))
        .filter(|n| n.name() != Some("xml"))
        .map(|n| (n.name().unwrap_or_default().to_string(), n.uri().to_string()))
        .collect();
    let attributes = node
        .attributes()
        .map(|a| {
            let name = match a.namespace().and_then(|uri| node.lookup_prefix(uri)) {
                Some(prefix) => format!("{prefix}:{}", a.name()),
                None => a.name().to_string(),
            };
            (name, a.value().to_string())
        })
        .collect();
    let children = node
        .children()
        .filter_map(|c| {
            if c.is_element() {
                Some(XmlNode::Element(convert(c)))
            } else if c.is_text() {
                let t = c.text().unwrap_or_default();
                (!t.trim().is_empty()).then(|| XmlNode::Text(t.to_string()))
            } else {
                None
            }
        })
        .collect();
    XmlElement {
        name: qualified_tag(node),
        namespaces,
        attributes,
        children,
    }
}

fn qualified_tag(node: roxmltree::Node<'_, '_>) -> String {
    let tag = node.tag_name();
    match tag.namespace().and_then(|uri| node.lookup_prefix(uri)) {
        Some(prefix) => format!("{prefix}:{}", tag.name()),
        None => tag.name().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_with_indent_and_self_closing() {
        let mut root = XmlElement::new("manifest");
        root.namespaces.push(("android".into(), "urn:a".into()));
        root.attributes.push(("package".into(), "a.b".into()));
        let mut perm = XmlElement::new("uses-permission");
        perm.attributes.push(("android:name".into(), "P&\"Q\"".into()));
        root.children.push(XmlNode::Element(perm));
        assert_eq!(
            root.to_xml(),
            "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n\
             <manifest xmlns:android=\"urn:a\" package=\"a.b\">\n  \
             <uses-permission android:name=\"P&amp;&quot;Q&quot;\"/>\n\
             </manifest>\n"
        );
    }

    #[test]
    fn text_children_render_inline() {
        let mut root = XmlElement::new("a");
        let mut b = XmlElement::new("b");
        b.children.push(XmlNode::Text("x < y".into()));
        root.children.push(XmlNode::Element(b));
        assert_eq!(
            root.to_xml(),
            "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<a>\n  <b>x &lt; y</b>\n</a>\n"
        );
    }

    #[test]
    fn text_roundtrip_through_parser() {
        let src = r#"<manifest xmlns:android="urn:x" package="p"><uses-permission android:name="A"/><application><activity android:name=".Main">hi</activity></application></manifest>"#;
        let tree = parse_text_xml(src).unwrap();
        let again = parse_text_xml(&tree.to_xml()).unwrap();
        assert_eq!(tree, again);
        assert_eq!(tree.child_elements().next().unwrap().attr("android:name"), Some("A"));
    }

    #[test]
    fn sanitizes_names() {
        assert_eq!(sanitize_ncname(""), "_");
        assert_eq!(sanitize_ncname("1abc"), "_abc");
        assert_eq!(sanitize_ncname("a:b c"), "a_b_c");
        assert_eq!(sanitize_ncname("xmlns"), "_xmlns");
        assert_eq!(sanitize_ncname("uses-permission"), "uses-permission");
    }
}
