use std::io::{BufRead, Read, Write};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDoc {
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Trec,
    Tsv,
}

impl CorpusFormat {
    /// Guesses from content: anything whose first non-blank character is `<`
    /// is SGML.
    pub fn sniff(bytes: &[u8]) -> Self {
        match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'<') => CorpusFormat::Trec,
            _ => CorpusFormat::Tsv,
        }
    }
}

pub fn read_corpus<R: Read>(mut reader: R, format: Option<CorpusFormat>) -> Result<Vec<ParsedDoc>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    match format.unwrap_or_else(|| CorpusFormat::sniff(&bytes)) {
        CorpusFormat::Trec => parse_trec_corpus(&bytes),
        CorpusFormat::Tsv => parse_tsv_corpus(&bytes[..]),
    }
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from > hay.len() {
        return None;
    }
    hay[from..]
        .windows(needle.len())
        .position(|w| w.eq_ignore_ascii_case(needle))
        .map(|p| p + from)
}

/// Parses `<DOC>...</DOC>` blocks. Only `<DOCNO>` and `<TEXT>` are read;
/// multiple `<TEXT>` sections are joined with a single space.
pub fn parse_trec_corpus(bytes: &[u8]) -> Result<Vec<ParsedDoc>> {
    let mut docs = Vec::new();
    let mut pos = 0;
    while let Some(start) = find(bytes, b"<DOC>", pos) {
        let body_start = start + 5;
        let end = find(bytes, b"</DOC>", body_start).ok_or_else(|| Error::Parse {
            offset: start,
            message: "unclosed <DOC>".into(),
        })?;
        let body = &bytes[body_start..end];
        let doc_id = match tag_contents(body, b"<DOCNO>", b"</DOCNO>").next() {
            Some(id) => String::from_utf8_lossy(id).trim().to_string(),
            None => {
                return Err(Error::Parse {
                    offset: start,
                    message: "<DOC> block without <DOCNO>".into(),
                })
            }
        };
        if doc_id.is_empty() {
            return Err(Error::Parse {
                offset: start,
                message: "empty <DOCNO>".into(),
            });
        }
        let text = tag_contents(body, b"<TEXT>", b"</TEXT>")
            .map(|t| String::from_utf8_lossy(t).trim().to_string())
            .collect::<Vec<_>>()
            .join(" ");
        docs.push(ParsedDoc { doc_id, text });
        pos = end + 6;
    }
    Ok(docs)
}

fn tag_contents<'a>(body: &'a [u8], open: &'a [u8], close: &'a [u8]) -> impl Iterator<Item = &'a [u8]> + 'a {
    let mut pos = 0;
    std::iter::from_fn(move || {
        let s = find(body, open, pos)? + open.len();
        let e = find(body, close, s).unwrap_or(body.len());
        pos = (e + close.len()).min(body.len() + 1);
        Some(&body[s..e])
    })
}

/// `doc_id TAB text` per line; blank lines are skipped.
pub fn parse_tsv_corpus<R: BufRead>(reader: R) -> Result<Vec<ParsedDoc>> {
    let mut docs = Vec::new();
    for (i, line) in reader.split(b'\n').enumerate() {
        let line = line?;
        let line = String::from_utf8(line).map_err(|_| super::invalid_utf8(i + 1))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').unwrap_or((line, ""));
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::format(i + 1, "empty document id"));
        }
        docs.push(ParsedDoc {
            doc_id: id.to_string(),
            text: text.to_string(),
        });
    }
    Ok(docs)
}

pub fn write_tsv_corpus<W: Write>(mut w: W, docs: &[ParsedDoc]) -> Result<()> {
    for d in docs {
        let text: String = d.text.chars().map(|c| if c == '\t' || c == '\n' { ' ' } else { c }).collect();
        writeln!(w, "{}\t{}", d.doc_id, text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_block() {
        let docs = parse_trec_corpus(b"<DOC><DOCNO> d1 </DOCNO><TEXT>hello</TEXT></DOC>").unwrap();
        assert_eq!(docs, vec![ParsedDoc { doc_id: "d1".into(), text: "hello".into() }]);
    }

    #[test]
    fn empty_stream() {
        assert!(parse_trec_corpus(b"").unwrap().is_empty());
    }

    #[test]
    fn two_text_sections() {
        let src = b"<DOC>\n<DOCNO>x</DOCNO>\n<HEAD>ignored</HEAD><TEXT>a</TEXT>\n<TEXT>\nb\n</TEXT>\n</DOC>";
        let docs = parse_trec_corpus(src).unwrap();
        assert_eq!(docs[0].text, "a b");
    }

    #[test]
    fn missing_docno_names_offset() {
        let src = b"<DOC><DOCNO>a</DOCNO></DOC>\n<DOC><TEXT>x</TEXT></DOC>";
        match parse_trec_corpus(src) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 28),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unclosed_doc() {
        assert!(matches!(
            parse_trec_corpus(b"<DOC><DOCNO>a</DOCNO>"),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn tsv_round_trip_preserves_ids() {
        let docs = parse_tsv_corpus("d1\thello world\r\n\nd2\t\nd3\tx\ty\n".as_bytes()).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[2].text, "x\ty");
        let mut buf = Vec::new();
        write_tsv_corpus(&mut buf, &docs).unwrap();
        let again = parse_tsv_corpus(&buf[..]).unwrap();
        let ids = |d: &[ParsedDoc]| d.iter().map(|d| d.doc_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&docs), ids(&again));
    }

    #[test]
    fn sniffing() {
        assert_eq!(CorpusFormat::sniff(b"  <DOC>"), CorpusFormat::Trec);
        assert_eq!(CorpusFormat::sniff(b"d1\tx"), CorpusFormat::Tsv);
    }
}
