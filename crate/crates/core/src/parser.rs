//! Merciful HTML parsing.
//!
//! [`tokenize`] never fails: anything that does not form a complete tag,
//! comment or doctype comes out as text. [`parse`] feeds the tokens through a
//! small tree builder that consults a [`Dtd`] to close elements whose end tags
//! were omitted.

use std::sync::Arc;

use crate::dtd::{Dtd, ElementRule};
use crate::tree::{NodeContent, TagData, TagTree, RAW_TEXT_ELEMENTS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    StartTag { name: String, attributes: Vec<(String, Option<String>)>, self_closing: bool },
    EndTag { name: String },
    Text(String),
    Comment(String),
    Doctype(String),
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')
}

/// Streaming tokenizer over already-decoded text.
pub struct Tokenizer<'a> {
    input: &'a str,
    pos: usize,
    /// One past the last `>` in the input; tags cannot complete beyond it.
    tag_limit: usize,
    /// Set after `<script>`/`<style>`: everything up to the matching end tag is text.
    raw_until: Option<&'static str>,
}

impl<'a> Tokenizer<'a> {
    pub fn new(input: &'a str) -> Self {
        let tag_limit = input.bytes().rposition(|b| b == b'>').map_or(0, |p| p + 1);
        Tokenizer { input, pos: 0, tag_limit, raw_until: None }
    }

    fn bytes(&self) -> &'a [u8] {
        self.input.as_bytes()
    }

    /// Text up to (not including) the next `<` at or after `from`.
    fn text_until_markup(&mut self, from: usize) -> Token {
        let end = self.bytes()[from..].iter().position(|&b| b == b'<').map_or(self.input.len(), |p| from + p);
        let text = &self.input[self.pos..end];
        self.pos = end;
        Token::Text(text.to_string())
    }

    fn raw_text(&mut self, element: &str) -> Option<Token> {
        let bytes = self.bytes();
        let mut i = self.pos;
        let end = loop {
            match bytes[i..].windows(2).position(|w| w == b"</") {
                None => break bytes.len(),
                Some(p) => {
                    let at = i + p;
                    let name_end = at + 2 + element.len();
                    let name_matches =
                        bytes.get(at + 2..name_end).is_some_and(|n| n.eq_ignore_ascii_case(element.as_bytes()));
                    let terminated = bytes.get(name_end).is_none_or(|&b| is_space(b) || b == b'/' || b == b'>');
                    if name_matches && terminated {
                        break at;
                    }
                    i = at + 2;
                }
            }
        };
        if end == self.pos {
            return None;
        }
        let text = self.input[self.pos..end].to_string();
        self.pos = end;
        Some(Token::Text(text))
    }

    /// Tries to read markup starting at the `<` under the cursor. Returns the token
    /// and the position after it, or `None` if the construct is incomplete.
    fn markup(&self) -> Option<(Token, usize)> {
        let bytes = self.bytes();
        let start = self.pos;
        let rest = &bytes[start..];
        if rest.starts_with(b"<!--") {
            let body = start + 4;
            return Some(match find(&bytes[body..], b"-->") {
                Some(p) => (Token::Comment(self.input[body..body + p].to_string()), body + p + 3),
                None => (Token::Comment(self.input[body..].to_string()), bytes.len()),
            });
        }
        if start >= self.tag_limit {
            return None;
        }
        if rest.len() >= 9 && rest[..9].eq_ignore_ascii_case(b"<!doctype") {
            let close = rest.iter().position(|&b| b == b'>')?;
            return Some((Token::Doctype(self.input[start + 2..start + close].to_string()), start + close + 1));
        }
        if rest.len() >= 3 && rest[1] == b'/' && rest[2].is_ascii_alphabetic() {
            let name_start = start + 2;
            let name_end = scan(bytes, name_start, |b| !is_space(b) && b != b'/' && b != b'>');
            let close = bytes[name_end..].iter().position(|&b| b == b'>')?;
            let name = self.input[name_start..name_end].to_ascii_lowercase();
            return Some((Token::EndTag { name }, name_end + close + 1));
        }
        if rest.len() >= 2 && rest[1].is_ascii_alphabetic() {
            return self.start_tag(start + 1);
        }
        None
    }

    fn start_tag(&self, name_start: usize) -> Option<(Token, usize)> {
        let bytes = self.bytes();
        let name_end = scan(bytes, name_start, |b| !is_space(b) && b != b'/' && b != b'>');
        let name = self.input[name_start..name_end].to_ascii_lowercase();
        let mut tag = TagData::from_parts(name, Vec::new());
        let mut self_closing = false;
        let mut i = name_end;
        loop {
            i = scan(bytes, i, is_space);
            match *bytes.get(i)? {
                b'>' => {
                    i += 1;
                    break;
                }
                b'/' => {
                    if bytes.get(i + 1) == Some(&b'>') {
                        self_closing = true;
                        i += 2;
                        break;
                    }
                    i += 1;
                    continue;
                }
                _ => {}
            }
            let attr_start = i;
            if bytes[i] == b'=' {
                i += 1;
            }
            i = scan(bytes, i, |b| !is_space(b) && b != b'/' && b != b'>' && b != b'=');
            let attr_name = self.input[attr_start..i].to_ascii_lowercase();
            let after_name = scan(bytes, i, is_space);
            let mut value = None;
            if bytes.get(after_name) == Some(&b'=') {
                i = scan(bytes, after_name + 1, is_space);
                let quote = *bytes.get(i)?;
                if quote == b'"' || quote == b'\'' {
                    let close = bytes[i + 1..].iter().position(|&b| b == quote)?;
                    value = Some(self.input[i + 1..i + 1 + close].to_string());
                    i += close + 2;
                } else {
                    let end = scan(bytes, i, |b| !is_space(b) && b != b'>');
                    value = Some(self.input[i..end].to_string());
                    i = end;
                }
            }
            tag.set_attrib_opt(&attr_name, value);
        }
        let (name, attributes) = tag.into_parts();
        Some((Token::StartTag { name, attributes, self_closing }, i))
    }
}

fn scan(bytes: &[u8], mut i: usize, keep: impl Fn(u8) -> bool) -> usize {
    while i < bytes.len() && keep(bytes[i]) {
        i += 1;
    }
    i
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

impl Iterator for Tokenizer<'_> {
    type Item = Token;

    fn next(&mut self) -> Option<Token> {
        if let Some(element) = self.raw_until.take() {
            if let Some(text) = self.raw_text(element) {
                return Some(text);
            }
        }
        if self.pos >= self.input.len() {
            return None;
        }
        if self.bytes()[self.pos] != b'<' {
            return Some(self.text_until_markup(self.pos));
        }
        match self.markup() {
            Some((token, end)) => {
                self.pos = end;
                if let Token::StartTag { name, self_closing: false, .. } = &token {
                    self.raw_until = RAW_TEXT_ELEMENTS.iter().copied().find(|e| e == name);
                }
                Some(token)
            }
            None => Some(self.text_until_markup(self.pos + 1)),
        }
    }
}

/// Splits text into tokens. Total: every input produces a token sequence.
pub fn tokenize(input: &str) -> Vec<Token> {
    Tokenizer::new(input).collect()
}

/// Parses text into a tag tree under `dtd`. Never fails.
///
/// Recovery:
/// - a start tag closes any open element that lists it in `CLOSES(...)`, looking
///   outward through elements whose end tags are optional or that are inline;
/// - an end tag with no matching open element is dropped;
/// - an end tag for a non-innermost element closes the elements in between only
///   if each of them has an optional end tag or is inline, and is dropped
///   otherwise;
/// - void elements and `<x/>` never take children;
/// - end of input closes everything.
pub fn parse(dtd: &Arc<Dtd>, input: &str) -> TagTree {
    let mut tree = TagTree::new(Arc::clone(dtd));
    let mut open: Vec<(u32, String)> = vec![(tree.root_index(), String::new())];

    for token in Tokenizer::new(input) {
        let parent = open.last().expect("root stays open").0;
        match token {
            Token::Text(text) => tree.push_text(parent, &text),
            Token::Comment(text) => {
                tree.push_child(parent, NodeContent::Comment(text));
            }
            Token::Doctype(_) => {}
            Token::StartTag { name, attributes, self_closing } => {
                close_implied(dtd, &mut open, &name);
                let parent = open.last().expect("root stays open").0;
                let keeps_open = !self_closing && !dtd.lookup(&name).void;
                let tag = TagData::from_parts(name, attributes);
                let name = tag.name().to_string();
                let index = tree.push_child(parent, NodeContent::Element(tag));
                if keeps_open {
                    open.push((index, name));
                }
            }
            Token::EndTag { name } => {
                let Some(pos) = open.iter().skip(1).rposition(|(_, n)| *n == name).map(|p| p + 1) else {
                    continue;
                };
                if open[pos + 1..].iter().all(|(_, n)| passable(dtd.lookup(n))) {
                    open.truncate(pos);
                }
            }
        }
    }
    tree
}

fn close_implied(dtd: &Dtd, open: &mut Vec<(u32, String)>, incoming: &str) {
    loop {
        let mut target = None;
        for k in (1..open.len()).rev() {
            let rule = dtd.lookup(&open[k].1);
            if rule.closes_on(incoming) {
                target = Some(k);
                break;
            }
            if !passable(rule) {
                break;
            }
        }
        match target {
            Some(k) => open.truncate(k),
            None => return,
        }
    }
}

fn passable(rule: &ElementRule) -> bool {
    rule.end_optional || rule.inline
}

/// A parser bound to one DTD.
#[derive(Debug, Clone)]
pub struct Parser {
    dtd: Arc<Dtd>,
}

impl Parser {
    pub fn new(dtd: Arc<Dtd>) -> Self {
        Parser { dtd }
    }

    pub fn dtd(&self) -> &Arc<Dtd> {
        &self.dtd
    }

    pub fn parse(&self, input: &str) -> TagTree {
        parse(&self.dtd, input)
    }

    /// Parses with a different DTD for this call only.
    pub fn parse_with(&self, dtd: &Arc<Dtd>, input: &str) -> TagTree {
        parse(dtd, input)
    }
}

impl Default for Parser {
    fn default() -> Self {
        Parser::new(Dtd::frameset())
    }
}
