use std::io::Read;

use crate::{Error, Result};

/// A query as read from a topic file (title field only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub id: String,
    pub title: String,
}

/// Reads either `id TAB title` lines or TREC `<top>` blocks, taking the
/// `<num>` and `<title>` fields.
pub fn parse_topics<R: Read>(mut reader: R) -> Result<Vec<Topic>> {
    let mut s = String::new();
    reader.read_to_string(&mut s)?;
    if s.trim_start().starts_with('<') {
        parse_trec_topics(&s)
    } else {
        let mut out = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (id, title) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(i + 1, "expected `query_id<TAB>title`"))?;
            out.push(Topic {
                id: id.trim().to_string(),
                title: title.trim().to_string(),
            });
        }
        Ok(out)
    }
}

fn field<'a>(block: &'a str, tag: &str) -> Option<&'a str> {
    let lower = block.to_ascii_lowercase();
    let start = lower.find(tag)? + tag.len();
    let rest = &block[start..];
    let end = rest.find('<').unwrap_or(rest.len());
    Some(rest[..end].trim())
}

fn parse_trec_topics(s: &str) -> Result<Vec<Topic>> {
    let lower = s.to_ascii_lowercase();
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(rel) = lower[pos..].find("<top>") {
        let start = pos + rel;
        let end = lower[start..]
            .find("</top>")
            .map(|e| start + e)
            .ok_or_else(|| Error::Parse { offset: start, message: "unclosed <top>".into() })?;
        let block = &s[start + 5..end];
        let num = field(block, "<num>").ok_or_else(|| Error::Parse {
            offset: start,
            message: "<top> without <num>".into(),
        })?;
        let id = num
            .trim_start_matches(|c: char| !c.is_ascii_digit() && c != '\n')
            .trim();
        let id = if id.is_empty() { num.trim_start_matches("Number:").trim() } else { id };
        let title = field(block, "<title>").unwrap_or("");
        let title = title.trim_start_matches("Topic:").trim();
        out.push(Topic {
            id: id.to_string(),
            title: title.split_whitespace().collect::<Vec<_>>().join(" "),
        });
        pos = end + 6;
    }
    Ok(out)
}
