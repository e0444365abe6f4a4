//! Plain-text extraction from wikitext.
//!
//! This is a simplified grammar, not a MediaWiki parser: enough to recover
//! the running prose of an article for bag-of-words features.

use std::sync::LazyLock;

use regex::{Captures, Regex};

static COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());
static REF_BLOCK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<ref(?:\s[^>]*)?>.*?</ref\s*>").unwrap());
static REF_EMPTY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<ref\b[^>]*/>").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z][A-Za-z0-9]*\b[^<>]*>").unwrap());
static WIKILINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\[([^\[\]]*)\]\]").unwrap());
static EXTERNAL_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[(?:[a-zA-Z][a-zA-Z0-9+.\-]*:)?//[^\s\[\]]+(?:[ \t]+([^\[\]]*))?\]").unwrap());
static EMPHASIS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"'{2,}").unwrap());
static HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(={2,6})[ \t]*([^=\n]+?)[ \t]*={2,6}").unwrap());
static TAIL_SECTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)={2,6}[ \t]*(?:external links|references)[ \t]*={2,6}").unwrap());

const DROPPED_NAMESPACES: [&str; 4] = ["file:", "image:", "category:", "media:"];

/// Strips wikitext markup, keeping the readable text.
///
/// Templates are removed, links are replaced by their labels, tags and
/// `<ref>` bodies are removed, emphasis quotes and heading markers are
/// dropped, and everything from an "External links" or "References"
/// heading onward is cut. Unmatched openers are left as literal text.
///
/// Rewrites are applied until the text stops changing, so the function is
/// idempotent.
pub fn strip_wikitext(wikitext: &str) -> String {
    let mut text = wikitext.trim().to_string();
    loop {
        let next = strip_pass(&text);
        let next = next.trim();
        if next == text {
            return text;
        }
        text = next.to_string();
    }
}

fn strip_pass(text: &str) -> String {
    let text = COMMENT.replace_all(text, "");
    let text = REF_EMPTY.replace_all(&text, "");
    let text = REF_BLOCK.replace_all(&text, "");
    let mut text = remove_templates(&text);
    if let Some(m) = TAIL_SECTION.find(&text) {
        text.truncate(m.start());
    }
    let text = WIKILINK.replace_all(&text, |caps: &Captures| link_label(&caps[1]).to_string());
    let text = EXTERNAL_LINK.replace_all(&text, |caps: &Captures| {
        caps.get(1).map_or("", |m| m.as_str().trim()).to_string()
    });
    let text = TAG.replace_all(&text, "");
    let text = EMPHASIS.replace_all(&text, "");
    let text = HEADING.replace_all(&text, "$2");
    text.into_owned()
}

fn link_label(inner: &str) -> &str {
    let target = inner.split('|').next().unwrap_or("").trim_start_matches(':');
    let lower = target.trim().to_ascii_lowercase();
    if DROPPED_NAMESPACES.iter().any(|ns| lower.starts_with(ns)) && !inner.starts_with(':') {
        return "";
    }
    inner.rsplit('|').next().unwrap_or(inner).trim()
}

/// Removes balanced `{{ ... }}` spans, including nested ones. An opener
/// with no matching closer is kept verbatim.
fn remove_templates(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut copied = 0;
    while i + 1 < bytes.len() {
        if bytes[i] == b'{' && bytes[i + 1] == b'{' {
            if let Some(end) = matching_close(bytes, i) {
                out.push_str(&text[copied..i]);
                i = end;
                copied = end;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&text[copied..]);
    out
}

/// Byte offset just past the `}}` matching the `{{` at `start`.
fn matching_close(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = start;
    while i + 1 < bytes.len() {
        match (bytes[i], bytes[i + 1]) {
            (b'{', b'{') => {
                depth += 1;
                i += 2;
            }
            (b'}', b'}') => {
                depth -= 1;
                i += 2;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => i += 1,
        }
    }
    None
}
