//! Script syntax: commands made of words, words made of literal text,
//! variable references and bracketed command substitutions.

use std::fmt;
use std::sync::Arc;

/// Command substitutions nested deeper than this are rejected.
const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    Lit(String),
    /// `$name` or `$name(index)`; the index is itself substituted.
    Var {
        name: String,
        index: Option<Vec<Part>>,
    },
    Cmd(Arc<Script>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Word {
    /// `{...}`: no substitution.
    Braced(String),
    /// Bare or double-quoted word.
    Subst(Vec<Part>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordNode {
    pub word: Word,
    /// The word as written, without its enclosing braces or quotes.
    pub source: String,
}

impl WordNode {
    /// The literal text of a word that needs no substitution.
    pub fn literal(&self) -> Option<&str> {
        match &self.word {
            Word::Braced(s) => Some(s),
            Word::Subst(parts) => match parts.as_slice() {
                [] => Some(""),
                [Part::Lit(s)] => Some(s),
                _ => None,
            },
        }
    }

    /// True for a bare `|`, which marks a pipe segment.
    pub fn is_pipe_marker(&self) -> bool {
        matches!(&self.word, Word::Subst(parts) if matches!(parts.as_slice(), [Part::Lit(s)] if s == "|"))
            && self.source == "|"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub words: Vec<WordNode>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub commands: Vec<Command>,
}

pub fn parse_script(source: &str) -> Result<Script, ParseError> {
    let mut cursor = Cursor::new(source, 1);
    cursor.script(false)
}

/// Accumulates literal text between substitutions.
#[derive(Default)]
struct Parts {
    parts: Vec<Part>,
    lit: String,
}

impl Parts {
    fn push(&mut self, part: Part) {
        self.flush();
        self.parts.push(part);
    }

    fn flush(&mut self) {
        if !self.lit.is_empty() {
            self.parts.push(Part::Lit(std::mem::take(&mut self.lit)));
        }
    }

    fn finish(mut self) -> Vec<Part> {
        self.flush();
        self.parts
    }
}

pub(crate) struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_pos: usize,
    nesting: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str, first_line: usize) -> Self {
        Cursor { src, pos: 0, line: first_line, line_pos: 0, nesting: 0 }
    }

    pub(crate) fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + offset).copied()
    }

    pub(crate) fn bump(&mut self, n: usize) {
        self.pos += n;
    }

    pub(crate) fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    /// Line number of the current position.
    pub(crate) fn line(&mut self) -> usize {
        let upto = self.pos.min(self.src.len());
        if upto > self.line_pos {
            self.line += self.src.as_bytes()[self.line_pos..upto].iter().filter(|&&b| b == b'\n').count();
            self.line_pos = upto;
        }
        self.line
    }

    pub(crate) fn error(&mut self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line(), message: message.into() }
    }

    fn error_at(line: usize, message: impl Into<String>) -> ParseError {
        ParseError { line, message: message.into() }
    }

    /// Skips spaces, tabs and backslash-newline continuations.
    fn skip_blanks(&mut self) {
        loop {
            match self.peek() {
                Some(b' ' | b'\t' | b'\r') => self.pos += 1,
                Some(b'\\') if self.peek_at(1) == Some(b'\n') => self.pos += 2,
                _ => return,
            }
        }
    }

    pub(crate) fn skip_whitespace(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn script(&mut self, nested: bool) -> Result<Script, ParseError> {
        let start_line = self.line();
        let mut commands = Vec::new();
        loop {
            loop {
                self.skip_blanks();
                match self.peek() {
                    Some(b'\n' | b';') => self.pos += 1,
                    _ => break,
                }
            }
            match self.peek() {
                None if nested => return Err(Self::error_at(start_line, "missing close-bracket")),
                None => break,
                Some(b']') if nested => {
                    self.pos += 1;
                    break;
                }
                Some(b'#') => {
                    self.skip_comment();
                    continue;
                }
                _ => {}
            }
            let line = self.line();
            let words = self.command(nested)?;
            if !words.is_empty() {
                commands.push(Command { words, line });
            }
        }
        Ok(Script { commands })
    }

    fn skip_comment(&mut self) {
        while let Some(b) = self.peek() {
            match b {
                b'\\' => self.pos += 2,
                b'\n' => return,
                _ => self.pos += 1,
            }
        }
        self.pos = self.pos.min(self.src.len());
    }

    fn command(&mut self, nested: bool) -> Result<Vec<WordNode>, ParseError> {
        let mut words = Vec::new();
        loop {
            self.skip_blanks();
            match self.peek() {
                None | Some(b'\n' | b';') => break,
                Some(b']') if nested => break,
                _ => words.push(self.word(nested)?),
            }
        }
        Ok(words)
    }

    fn at_word_end(&self, nested: bool) -> bool {
        match self.peek() {
            None | Some(b' ' | b'\t' | b'\r' | b'\n' | b';') => true,
            Some(b']') => nested,
            Some(b'\\') => self.peek_at(1) == Some(b'\n'),
            _ => false,
        }
    }

    fn word(&mut self, nested: bool) -> Result<WordNode, ParseError> {
        match self.peek() {
            Some(b'{') => {
                let text = self.braced()?;
                if !self.at_word_end(nested) {
                    return Err(self.error("extra characters after close-brace"));
                }
                Ok(WordNode { source: text.clone(), word: Word::Braced(text) })
            }
            Some(b'"') => {
                let start = self.pos + 1;
                let parts = self.quoted()?;
                let source = self.src[start..self.pos - 1].to_string();
                if !self.at_word_end(nested) {
                    return Err(self.error("extra characters after close-quote"));
                }
                Ok(WordNode { word: Word::Subst(parts), source })
            }
            _ => {
                let start = self.pos;
                let parts = self.bare(nested)?;
                Ok(WordNode { word: Word::Subst(parts), source: self.src[start..self.pos].to_string() })
            }
        }
    }

    fn bare(&mut self, nested: bool) -> Result<Vec<Part>, ParseError> {
        let mut parts = Parts::default();
        while !self.at_word_end(nested) {
            match self.peek() {
                Some(b'$') => self.dollar(&mut parts)?,
                Some(b'[') => {
                    let cmd = self.bracket()?;
                    parts.push(cmd);
                    // `[cmd]{body}`: a brace right after a substitution starts a new word.
                    if self.peek() == Some(b'{') {
                        break;
                    }
                }
                Some(b'\\') => self.escape(&mut parts.lit),
                _ => self.literal_char(&mut parts.lit),
            }
        }
        Ok(parts.finish())
    }

    fn literal_char(&mut self, out: &mut String) {
        let ch = self.rest().chars().next().expect("not at end");
        out.push(ch);
        self.pos += ch.len_utf8();
    }

    /// Parses `{...}` at the cursor and returns the inner text.
    pub(crate) fn braced(&mut self) -> Result<String, ParseError> {
        let open_line = self.line();
        self.pos += 1;
        let start = self.pos;
        let mut depth = 1usize;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() {
            match bytes[self.pos] {
                b'\\' => self.pos += 1,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let inner = self.src[start..self.pos].to_string();
                        self.pos += 1;
                        return Ok(inner);
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        self.pos = bytes.len();
        Err(Self::error_at(open_line, "missing close-brace"))
    }

    /// Parses `"..."` at the cursor, returning the substituted parts.
    pub(crate) fn quoted(&mut self) -> Result<Vec<Part>, ParseError> {
        let open_line = self.line();
        self.pos += 1;
        let mut parts = Parts::default();
        loop {
            match self.peek() {
                None => return Err(Self::error_at(open_line, "missing \"")),
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(parts.finish());
                }
                Some(b'$') => self.dollar(&mut parts)?,
                Some(b'[') => {
                    let cmd = self.bracket()?;
                    parts.push(cmd);
                }
                Some(b'\\') => self.escape(&mut parts.lit),
                _ => self.literal_char(&mut parts.lit),
            }
        }
    }

    /// Parses `[...]` at the cursor.
    pub(crate) fn bracket(&mut self) -> Result<Part, ParseError> {
        if self.nesting >= MAX_NESTING {
            return Err(self.error("command substitutions nested too deeply"));
        }
        self.pos += 1;
        self.nesting += 1;
        let script = self.script(true);
        self.nesting -= 1;
        Ok(Part::Cmd(Arc::new(script?)))
    }

    /// Parses a `$` reference at the cursor. A `$` not followed by a name is literal.
    fn dollar(&mut self, parts: &mut Parts) -> Result<(), ParseError> {
        match self.variable()? {
            Some(part) => parts.push(part),
            None => parts.lit.push('$'),
        }
        Ok(())
    }

    /// Parses `$name`, `${name}` or `$name(index)`; `None` (with the `$`
    /// consumed) when no name follows.
    pub(crate) fn variable(&mut self) -> Result<Option<Part>, ParseError> {
        self.pos += 1;
        if self.peek() == Some(b'{') {
            let line = self.line();
            let rest = &self.src[self.pos + 1..];
            let Some(end) = rest.find('}') else {
                return Err(Self::error_at(line, "missing close-brace for variable name"));
            };
            let name = rest[..end].to_string();
            self.pos += end + 2;
            return Ok(Some(Part::Var { name, index: None }));
        }
        let start = self.pos;
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_alphanumeric() || b == b'_' => self.pos += 1,
                Some(b':') if self.peek_at(1) == Some(b':') => self.pos += 2,
                _ => break,
            }
        }
        if self.pos == start {
            return Ok(None);
        }
        let name = self.src[start..self.pos].to_string();
        if self.peek() != Some(b'(') {
            return Ok(Some(Part::Var { name, index: None }));
        }
        let open_line = self.line();
        self.pos += 1;
        let mut index = Parts::default();
        loop {
            match self.peek() {
                None => return Err(Self::error_at(open_line, "missing )")),
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                Some(b'$') => self.dollar(&mut index)?,
                Some(b'[') => {
                    let cmd = self.bracket()?;
                    index.push(cmd);
                }
                Some(b'\\') => self.escape(&mut index.lit),
                _ => self.literal_char(&mut index.lit),
            }
        }
        Ok(Some(Part::Var { name, index: Some(index.finish()) }))
    }

    /// Decodes a backslash sequence at the cursor into `out`.
    fn escape(&mut self, out: &mut String) {
        self.pos += 1;
        let Some(ch) = self.rest().chars().next() else {
            out.push('\\');
            return;
        };
        self.pos += ch.len_utf8();
        match ch {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            'a' => out.push('\x07'),
            'b' => out.push('\x08'),
            'f' => out.push('\x0c'),
            'v' => out.push('\x0b'),
            '\n' => {
                while matches!(self.peek(), Some(b' ' | b'\t')) {
                    self.pos += 1;
                }
                out.push(' ');
            }
            'x' | 'u' => {
                let max = if ch == 'x' { 2 } else { 4 };
                let digits: String = self.rest().chars().take(max).take_while(char::is_ascii_hexdigit).collect();
                match u32::from_str_radix(&digits, 16).ok().and_then(char::from_u32) {
                    Some(decoded) => {
                        self.pos += digits.len();
                        out.push(decoded);
                    }
                    None => out.push(ch),
                }
            }
            other => out.push(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(src: &str) -> Vec<Vec<String>> {
        parse_script(src).unwrap().commands.iter().map(|c| c.words.iter().map(|w| w.source.clone()).collect()).collect()
    }

    #[test]
    fn separators_and_comments() {
        assert_eq!(
            words("set a 1; set b 2\n# note\nputs $a"),
            [vec!["set", "a", "1"], vec!["set", "b", "2"], vec!["puts", "$a"]]
        );
        assert_eq!(words("set a 1 ;# trailing"), [vec!["set", "a", "1"]]);
    }

    #[test]
    fn braces_keep_text_literal() {
        let script = parse_script("set a {b $c [d]}").unwrap();
        assert_eq!(script.commands[0].words[2].word, Word::Braced("b $c [d]".into()));
    }

    #[test]
    fn nested_command_substitution() {
        let script = parse_script(r#"set s_ [ws::getpage "http://x/"]"#).unwrap();
        let Word::Subst(parts) = &script.commands[0].words[2].word else { panic!() };
        let [Part::Cmd(inner)] = parts.as_slice() else { panic!("{parts:?}") };
        assert_eq!(inner.commands[0].words.len(), 2);
        assert_eq!(inner.commands[0].words[1].source, "http://x/");
    }

    #[test]
    fn array_reference_with_substituted_index() {
        let script = parse_script("lappend url_list([expr 1+$i_]) $link_").unwrap();
        let Word::Subst(parts) = &script.commands[0].words[1].word else { panic!() };
        assert_eq!(parts.len(), 3, "{parts:?}");
        let script = parse_script("puts $seen($x)").unwrap();
        let Word::Subst(parts) = &script.commands[0].words[1].word else { panic!() };
        assert!(matches!(&parts[0], Part::Var { name, index: Some(_) } if name == "seen"));
    }

    #[test]
    fn brace_right_after_substitution_splits_word() {
        assert_eq!(words("if [catch {x}]{\n continue\n}"), [vec!["if", "[catch {x}]", "\n continue\n"]]);
    }

    #[test]
    fn escapes_in_quotes() {
        let script = parse_script(r#"puts "a\tb\"c\x41""#).unwrap();
        let Word::Subst(parts) = &script.commands[0].words[1].word else { panic!() };
        assert_eq!(parts, &[Part::Lit("a\tb\"cA".into())]);
    }

    #[test]
    fn lone_dollar_is_literal() {
        let script = parse_script("puts $").unwrap();
        assert_eq!(script.commands[0].words[1].literal(), Some("$"));
    }

    #[test]
    fn unbalanced_input_reports_line() {
        assert_eq!(parse_script("set a 1\nset b {oops").unwrap_err().to_string(), "line 2: missing close-brace");
        assert_eq!(parse_script("\n\nputs [x").unwrap_err().to_string(), "line 3: missing close-bracket");
        assert_eq!(parse_script("puts \"abc").unwrap_err().line, 1);
        assert!(parse_script("set a {x}y").unwrap_err().message.contains("close-brace"));
    }

    #[test]
    fn pipe_marker_only_when_bare() {
        let script = parse_script("| list a; {|} x").unwrap();
        assert!(script.commands[0].words[0].is_pipe_marker());
        assert!(!script.commands[1].words[0].is_pipe_marker());
    }

    #[test]
    fn line_numbers_per_command() {
        let script = parse_script("a\n\nb {\n}\nc").unwrap();
        let lines: Vec<_> = script.commands.iter().map(|c| c.line).collect();
        assert_eq!(lines, [1, 3, 5]);
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("{}x{}", "[".repeat(5000), "]".repeat(5000));
        assert!(parse_script(&src).unwrap_err().message.contains("nested"));
    }
}
