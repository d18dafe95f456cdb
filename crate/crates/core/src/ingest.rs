//! Line-oriented N-Triples parsing and dataset statistics.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::term::{Dictionary, EncodedTriple, Term, TermId};

/// Standard rdf:type IRI; overridable per load for nonstandard datasets.
pub const RDF_TYPE_IRI: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Outcome of one parse: encoded triples plus the term dictionary.
/// Duplicate triples are kept; per-subject record construction
/// deduplicates later.
#[derive(Debug, Default)]
pub struct ParsedDataset {
    pub triples: Vec<EncodedTriple>,
    pub dict: Dictionary,
    /// Malformed lines skipped in non-strict mode.
    pub skipped_lines: u64,
}

/// Counts used by the cost model and the reordering planner.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetStats {
    /// |D|: number of triples in the parsed sequence.
    pub total_triples: u64,
    /// |S|: number of distinct subject nodes.
    pub distinct_subjects: u64,
    /// card(p): triples per predicate.
    pub property_card: BTreeMap<TermId, u64>,
    /// Exact subject counts per rdf:type class object.
    pub class_card: BTreeMap<TermId, u64>,
}

/// Parses N-Triples from a reader. With `strict`, the first malformed
/// line aborts the load naming its line number; otherwise malformed
/// lines are counted and skipped.
pub fn parse_ntriples<R: BufRead>(reader: R, strict: bool) -> Result<ParsedDataset> {
    let mut out = ParsedDataset::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        match parse_line(&line) {
            Ok(Some((s, p, o))) => {
                let s = out.dict.encode(s);
                let p = out.dict.encode(p);
                let o = out.dict.encode(o);
                out.triples.push(EncodedTriple { s, p, o });
            }
            Ok(None) => {}
            Err(message) => {
                if strict {
                    return Err(Error::Parse {
                        line: line_no,
                        message,
                    });
                }
                out.skipped_lines += 1;
            }
        }
    }
    Ok(out)
}

/// Convenience wrapper over [`parse_ntriples`] for in-memory text.
pub fn parse_ntriples_str(text: &str, strict: bool) -> Result<ParsedDataset> {
    parse_ntriples(text.as_bytes(), strict)
}

/// Single-pass stats collection. `type_prop` is the dictionary id of the
/// configured rdf:type IRI, when present in the dataset; class counts
/// are per distinct subject.
pub fn collect_stats(triples: &[EncodedTriple], type_prop: Option<TermId>) -> DatasetStats {
    let mut stats = DatasetStats {
        total_triples: triples.len() as u64,
        ..Default::default()
    };
    let mut subjects = HashSet::new();
    let mut class_subjects: HashSet<(TermId, TermId)> = HashSet::new();
    for t in triples {
        subjects.insert(t.s);
        *stats.property_card.entry(t.p).or_insert(0) += 1;
        if Some(t.p) == type_prop && class_subjects.insert((t.o, t.s)) {
            *stats.class_card.entry(t.o).or_insert(0) += 1;
        }
    }
    stats.distinct_subjects = subjects.len() as u64;
    stats
}

/// Parses one line. `Ok(None)` for blank and comment lines; `Err` with a
/// description for malformed ones.
fn parse_line(line: &str) -> std::result::Result<Option<(Term, Term, Term)>, String> {
    let mut scan = Scanner::new(line);
    scan.skip_ws();
    if scan.at_end() || scan.peek() == Some(b'#') {
        return Ok(None);
    }
    let subject = match scan.peek() {
        Some(b'<') => scan.iri()?,
        Some(b'_') => scan.blank_node()?,
        _ => return Err("subject must be an IRI or blank node".into()),
    };
    scan.require_ws()?;
    let predicate = match scan.peek() {
        Some(b'<') => scan.iri()?,
        _ => return Err("predicate must be an IRI".into()),
    };
    scan.require_ws()?;
    let object = match scan.peek() {
        Some(b'<') => scan.iri()?,
        Some(b'_') => scan.blank_node()?,
        Some(b'"') => scan.literal()?,
        _ => return Err("object must be an IRI, blank node or literal".into()),
    };
    scan.skip_ws();
    if scan.take() != Some(b'.') {
        return Err("expected terminating '.'".into());
    }
    scan.skip_ws();
    match scan.peek() {
        None | Some(b'#') => Ok(Some((subject, predicate, object))),
        Some(_) => Err("trailing content after '.'".into()),
    }
}

struct Scanner<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(input: &'a str) -> Self {
        Scanner {
            input,
            bytes: input.as_bytes(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn take(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        Some(b)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn require_ws(&mut self) -> std::result::Result<(), String> {
        if !matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            return Err("expected whitespace between terms".into());
        }
        self.skip_ws();
        Ok(())
    }

    fn iri(&mut self) -> std::result::Result<Term, String> {
        debug_assert_eq!(self.peek(), Some(b'<'));
        self.pos += 1;
        let start = self.pos;
        loop {
            match self.take() {
                Some(b'>') => return Ok(Term::Iri(self.input[start..self.pos - 1].into())),
                Some(b' ') | Some(b'\t') => return Err("whitespace inside IRI".into()),
                Some(_) => {}
                None => return Err("unterminated IRI".into()),
            }
        }
    }

    fn blank_node(&mut self) -> std::result::Result<Term, String> {
        debug_assert_eq!(self.peek(), Some(b'_'));
        self.pos += 1;
        if self.take() != Some(b':') {
            return Err("blank node must start with '_:'".into());
        }
        let start = self.pos;
        while let Some(b) = self.peek() {
            let label_byte = b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || b >= 0x80;
            // '.' is allowed inside a label but not at its end, so only
            // consume it when another label byte follows.
            let inner_dot = b == b'.'
                && self
                    .bytes
                    .get(self.pos + 1)
                    .is_some_and(|&n| n.is_ascii_alphanumeric() || n == b'_' || n == b'-' || n == b'.' || n >= 0x80);
            if label_byte || inner_dot {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err("empty blank node label".into());
        }
        Ok(Term::BlankNode(self.input[start..self.pos].into()))
    }

    fn literal(&mut self) -> std::result::Result<Term, String> {
        debug_assert_eq!(self.peek(), Some(b'"'));
        let start = self.pos;
        self.pos += 1;
        loop {
            match self.take() {
                Some(b'"') => break,
                Some(b'\\') => self.escape()?,
                Some(_) => {}
                None => return Err("unterminated literal".into()),
            }
        }
        match self.peek() {
            Some(b'@') => {
                self.pos += 1;
                let tag_start = self.pos;
                while self
                    .peek()
                    .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'-')
                {
                    self.pos += 1;
                }
                if self.pos == tag_start
                    || !self.bytes[tag_start].is_ascii_alphabetic()
                {
                    return Err("invalid language tag".into());
                }
            }
            Some(b'^') => {
                self.pos += 1;
                if self.take() != Some(b'^') {
                    return Err("invalid datatype suffix, expected '^^'".into());
                }
                if self.peek() != Some(b'<') {
                    return Err("datatype must be an IRI".into());
                }
                self.iri()?;
            }
            _ => {}
        }
        Ok(Term::Literal(self.input[start..self.pos].into()))
    }

    fn escape(&mut self) -> std::result::Result<(), String> {
        match self.take() {
            Some(b't' | b'b' | b'n' | b'r' | b'f' | b'"' | b'\'' | b'\\') => Ok(()),
            Some(b'u') => self.hex_digits(4),
            Some(b'U') => self.hex_digits(8),
            _ => Err("invalid escape sequence in literal".into()),
        }
    }

    fn hex_digits(&mut self, count: usize) -> std::result::Result<(), String> {
        for _ in 0..count {
            match self.take() {
                Some(b) if b.is_ascii_hexdigit() => {}
                _ => return Err("invalid unicode escape in literal".into()),
            }
        }
        Ok(())
    }
}
