//! Parser for the supported SPARQL subset:
//! `SELECT (?v ... | *) WHERE { <triple patterns> }` with IRIs,
//! literals and variables. Conjunctive patterns only; the predicate of
//! every pattern must be bound.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::term::Term;

/// A subject, predicate or object position: a named variable or a
/// constant term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodePattern {
    Var(String),
    Const(Term),
}

impl NodePattern {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            NodePattern::Var(name) => Some(name),
            NodePattern::Const(_) => None,
        }
    }

    pub fn is_bound(&self) -> bool {
        matches!(self, NodePattern::Const(_))
    }
}

impl std::fmt::Display for NodePattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodePattern::Var(name) => write!(f, "?{name}"),
            NodePattern::Const(term) => write!(f, "{term}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub s: NodePattern,
    pub p: NodePattern,
    pub o: NodePattern,
}

impl TriplePattern {
    /// Variable names appearing in any position.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        [&self.s, &self.p, &self.o].into_iter().filter_map(|n| n.as_var())
    }

    /// True when the two patterns share at least one variable.
    pub fn joins_with(&self, other: &TriplePattern) -> bool {
        self.variables()
            .any(|v| other.variables().any(|w| w == v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    Star,
    Vars(Vec<String>),
}

/// A parsed basic graph pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bgp {
    pub patterns: Vec<TriplePattern>,
    pub projection: Projection,
}

impl Bgp {
    /// Projection header: the selected variables, or for `*` every
    /// variable in first-appearance order.
    pub fn header(&self) -> Vec<String> {
        match &self.projection {
            Projection::Vars(vars) => vars.clone(),
            Projection::Star => {
                let mut seen = HashSet::new();
                let mut out = Vec::new();
                for pattern in &self.patterns {
                    for v in pattern.variables() {
                        if seen.insert(v.to_owned()) {
                            out.push(v.to_owned());
                        }
                    }
                }
                out
            }
        }
    }
}

pub fn parse_query(text: &str) -> Result<Bgp> {
    Parser::new(text).parse()
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Keyword(String),
    Var(String),
    Term(Term),
    Star,
    OpenBrace,
    CloseBrace,
    Dot,
}

struct Parser<'a> {
    bytes: &'a [u8],
    text: &'a str,
    pos: usize,
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "OPTIONAL", "FILTER", "UNION", "GRAPH", "MINUS", "BIND", "VALUES", "SERVICE",
    "ORDER", "GROUP", "LIMIT", "OFFSET", "DISTINCT", "REDUCED", "PREFIX", "BASE",
];

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            bytes: text.as_bytes(),
            text,
            pos: 0,
        }
    }

    fn parse(&mut self) -> Result<Bgp> {
        self.expect_keyword("SELECT")?;
        let projection = self.projection()?;
        self.expect_keyword("WHERE")?;
        match self.next_token()? {
            Some(Token::OpenBrace) => {}
            _ => return Err(self.syntax("expected '{'")),
        }
        let patterns = self.patterns()?;
        if patterns.is_empty() {
            return Err(self.syntax("empty graph pattern"));
        }
        if let Some(_tok) = self.next_token()? {
            return Err(self.syntax("unexpected content after '}'"));
        }
        let bgp = Bgp {
            patterns,
            projection,
        };
        if let Projection::Vars(vars) = &bgp.projection {
            let bound: HashSet<&str> = bgp
                .patterns
                .iter()
                .flat_map(|p| p.variables())
                .collect();
            for v in vars {
                if !bound.contains(v.as_str()) {
                    return Err(self.syntax(format!(
                        "projection variable ?{v} does not occur in the pattern"
                    )));
                }
            }
        }
        Ok(bgp)
    }

    fn projection(&mut self) -> Result<Projection> {
        let mut vars = Vec::new();
        loop {
            let checkpoint = self.pos;
            match self.next_token()? {
                Some(Token::Star) if vars.is_empty() => return Ok(Projection::Star),
                Some(Token::Var(name)) => {
                    if !vars.contains(&name) {
                        vars.push(name);
                    }
                }
                Some(Token::Keyword(k)) if k.eq_ignore_ascii_case("WHERE") => {
                    if vars.is_empty() {
                        return Err(self.syntax("SELECT needs variables or '*'"));
                    }
                    self.pos = checkpoint;
                    return Ok(Projection::Vars(vars));
                }
                _ => return Err(self.syntax("expected variable, '*' or WHERE")),
            }
        }
    }

    fn patterns(&mut self) -> Result<Vec<TriplePattern>> {
        let mut patterns = Vec::new();
        loop {
            match self.next_token()? {
                Some(Token::CloseBrace) => return Ok(patterns),
                Some(first) => {
                    let s = self.node(first)?;
                    let p_tok = self
                        .next_token()?
                        .ok_or_else(|| self.syntax("pattern ended before predicate"))?;
                    let p = self.node(p_tok)?;
                    if !p.is_bound() {
                        return Err(Error::Unsupported(
                            "variable predicates are not supported".into(),
                        ));
                    }
                    let o_tok = self
                        .next_token()?
                        .ok_or_else(|| self.syntax("pattern ended before object"))?;
                    let o = self.node(o_tok)?;
                    patterns.push(TriplePattern { s, p, o });
                    // '.' separates patterns; optional before '}'.
                    match self.next_token()? {
                        Some(Token::Dot) => {}
                        Some(Token::CloseBrace) => return Ok(patterns),
                        _ => return Err(self.syntax("expected '.' or '}' after pattern")),
                    }
                }
                None => return Err(self.syntax("unterminated graph pattern")),
            }
        }
    }

    fn node(&self, token: Token) -> Result<NodePattern> {
        match token {
            Token::Var(name) => Ok(NodePattern::Var(name)),
            Token::Term(term) => Ok(NodePattern::Const(term)),
            Token::Keyword(k) => Err(self.syntax(format!("unexpected keyword '{k}'"))),
            _ => Err(self.syntax("expected a term or variable")),
        }
    }

    fn expect_keyword(&mut self, expected: &str) -> Result<()> {
        match self.next_token()? {
            Some(Token::Keyword(k)) if k.eq_ignore_ascii_case(expected) => Ok(()),
            _ => Err(self.syntax(format!("expected {expected}"))),
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>> {
        self.skip_ws();
        let Some(&b) = self.bytes.get(self.pos) else {
            return Ok(None);
        };
        match b {
            b'{' => {
                self.pos += 1;
                Ok(Some(Token::OpenBrace))
            }
            b'}' => {
                self.pos += 1;
                Ok(Some(Token::CloseBrace))
            }
            b'.' => {
                self.pos += 1;
                Ok(Some(Token::Dot))
            }
            b'*' => {
                self.pos += 1;
                Ok(Some(Token::Star))
            }
            b'?' | b'$' => {
                self.pos += 1;
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Err(self.syntax("empty variable name"));
                }
                Ok(Some(Token::Var(self.text[start..self.pos].into())))
            }
            b'<' => {
                self.pos += 1;
                let start = self.pos;
                loop {
                    match self.peek() {
                        Some(b'>') => {
                            let iri = self.text[start..self.pos].to_owned();
                            self.pos += 1;
                            return Ok(Some(Token::Term(Term::Iri(iri))));
                        }
                        Some(b' ') | Some(b'\t') | Some(b'\n') | None => {
                            return Err(self.syntax("unterminated IRI"))
                        }
                        Some(_) => self.pos += 1,
                    }
                }
            }
            b'"' => {
                let start = self.pos;
                self.pos += 1;
                loop {
                    match self.peek() {
                        Some(b'"') => {
                            self.pos += 1;
                            break;
                        }
                        Some(b'\\') => {
                            self.pos += 2;
                        }
                        Some(_) => self.pos += 1,
                        None => return Err(self.syntax("unterminated literal")),
                    }
                }
                match self.peek() {
                    Some(b'@') => {
                        self.pos += 1;
                        while self
                            .peek()
                            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'-')
                        {
                            self.pos += 1;
                        }
                    }
                    Some(b'^') => {
                        self.pos += 1;
                        if self.peek() != Some(b'^') {
                            return Err(self.syntax("expected '^^' before datatype"));
                        }
                        self.pos += 1;
                        if self.peek() != Some(b'<') {
                            return Err(self.syntax("datatype must be an IRI"));
                        }
                        self.pos += 1;
                        while self.peek().is_some_and(|c| c != b'>') {
                            self.pos += 1;
                        }
                        if self.peek().is_none() {
                            return Err(self.syntax("unterminated datatype IRI"));
                        }
                        self.pos += 1;
                    }
                    _ => {}
                }
                Ok(Some(Token::Term(Term::Literal(
                    self.text[start..self.pos].to_owned(),
                ))))
            }
            b'_' => {
                self.pos += 1;
                if self.peek() != Some(b':') {
                    return Err(self.syntax("expected ':' after '_'"));
                }
                self.pos += 1;
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-')
                {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Err(self.syntax("empty blank node label"));
                }
                Ok(Some(Token::Term(Term::BlankNode(
                    self.text[start..self.pos].to_owned(),
                ))))
            }
            _ if b.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                let word = &self.text[start..self.pos];
                for k in UNSUPPORTED_KEYWORDS {
                    if word.eq_ignore_ascii_case(k) {
                        return Err(Error::Unsupported(format!("{k} is not supported")));
                    }
                }
                Ok(Some(Token::Keyword(word.to_owned())))
            }
            _ => Err(self.syntax(format!("unexpected character '{}'", b as char))),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self
            .peek()
            .is_some_and(|b| b == b' ' || b == b'\t' || b == b'\n' || b == b'\r')
        {
            self.pos += 1;
        }
    }

    fn syntax(&self, message: impl Into<String>) -> Error {
        let mut line = 1u32;
        let mut col = 1u32;
        for b in &self.bytes[..self.pos.min(self.bytes.len())] {
            if *b == b'\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        Error::QuerySyntax {
            line,
            col,
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pattern_single_projection() {
        let bgp = parse_query("SELECT ?x WHERE { ?x <p1> <o1> . }").unwrap();
        assert_eq!(bgp.patterns.len(), 1);
        assert_eq!(bgp.header(), vec!["x"]);
    }

    #[test]
    fn five_pattern_three_variable_query() {
        let q = "\
SELECT ?X ?Y ?Z WHERE {
  ?X <http://ex/type> <http://ex/Student> .
  ?Y <http://ex/type> <http://ex/Dpt> .
  ?X <http://ex/memberOf> ?Y .
  ?Y <http://ex/subOrgOf> <http://ex/Univ0> .
  ?X <http://ex/email> ?Z
}";
        let bgp = parse_query(q).unwrap();
        assert_eq!(bgp.patterns.len(), 5);
        let vars: HashSet<String> = bgp
            .patterns
            .iter()
            .flat_map(|p| p.variables().map(str::to_owned))
            .collect();
        assert_eq!(vars.len(), 3);
    }

    #[test]
    fn unbound_predicate_is_unsupported() {
        let err = parse_query("SELECT * WHERE { ?x ?p ?o }").unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn optional_filter_union_rejected_by_name() {
        for feature in ["OPTIONAL", "FILTER", "UNION"] {
            let q = format!("SELECT * WHERE {{ ?x <p> ?y . {feature} {{ ?x <q> ?z }} }}");
            match parse_query(&q) {
                Err(Error::Unsupported(msg)) => assert!(msg.contains(feature)),
                other => panic!("expected unsupported error, got {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_query("SELECT ?x WHERE { ?x <p> }").unwrap_err();
        match err {
            Error::QuerySyntax { line, col, .. } => {
                assert_eq!(line, 1);
                assert!(col > 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn star_projects_all_variables_in_first_appearance_order() {
        let bgp =
            parse_query("SELECT * WHERE { ?b <p> ?a . ?a <q> \"lit\"@en . }").unwrap();
        assert_eq!(bgp.header(), vec!["b", "a"]);
    }

    #[test]
    fn projection_variable_must_occur() {
        let err = parse_query("SELECT ?missing WHERE { ?x <p> ?y }").unwrap_err();
        assert!(matches!(err, Error::QuerySyntax { .. }));
    }

    #[test]
    fn literal_forms_parse() {
        let q = "SELECT ?x WHERE { ?x <p> \"v\" . ?x <q> \"w\"@en . ?x <r> \"1\"^^<http://e/int> }";
        let bgp = parse_query(q).unwrap();
        assert_eq!(bgp.patterns.len(), 3);
        assert_eq!(
            bgp.patterns[2].o,
            NodePattern::Const(Term::Literal("\"1\"^^<http://e/int>".into()))
        );
    }

    #[test]
    fn trailing_dot_optional_before_brace() {
        assert!(parse_query("SELECT ?x WHERE { ?x <p> <o> }").is_ok());
        assert!(parse_query("SELECT ?x WHERE { ?x <p> <o> . }").is_ok());
    }
}
