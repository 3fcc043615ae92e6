//! Simplified document-type definitions.
//!
//! A [`Dtd`] carries just the element facts the parser needs for recovery:
//! which elements are void, which may omit their end tag, and which start
//! tags implicitly close an open element. The text format is line based:
//!
//! ```text
//! # comment
//! br VOID
//! li END_OPTIONAL CLOSES(li)
//! b INLINE
//! DEFAULT
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::{Arc, LazyLock};

use thiserror::Error;

const FRAMESET_SOURCE: &str = include_str!("../dtd/frameset.dtd");

static FRAMESET: LazyLock<Arc<Dtd>> =
    LazyLock::new(|| Arc::new(Dtd::load_named("frameset", FRAMESET_SOURCE).expect("bundled frameset DTD is valid")));

/// Names accepted by [`Dtd::builtin`].
pub const BUILTIN_NAMES: &[&str] = &["frameset"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtdError {
    #[error("empty DTD: no declarations found")]
    Empty,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unknown builtin DTD `{name}` (available: {})", BUILTIN_NAMES.join(", "))]
    UnknownBuiltin { name: String },
}

/// Recovery facts for one element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementRule {
    pub name: String,
    /// Never has content and never takes an end tag.
    pub void: bool,
    /// The end tag may be omitted; the parser closes it implicitly.
    pub end_optional: bool,
    /// Start tags that implicitly close this element while it is open.
    pub auto_close_on: BTreeSet<String>,
    /// Text-level markup (`b`, `font`, ...). Recovery may close it early
    /// when an enclosing element ends or is implicitly closed.
    pub inline: bool,
    /// Accepts arbitrary children.
    pub flow_container: bool,
}

impl ElementRule {
    /// A container that requires an explicit end tag and is never auto-closed.
    pub fn container(name: impl Into<String>) -> Self {
        ElementRule {
            name: name.into(),
            void: false,
            end_optional: false,
            auto_close_on: BTreeSet::new(),
            inline: false,
            flow_container: true,
        }
    }

    pub fn closes_on(&self, start_tag: &str) -> bool {
        self.auto_close_on.contains(start_tag)
    }

    /// Checks the rule invariants, returning a description of the first violation.
    pub fn check(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("element name is empty".into());
        }
        if self.name.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(format!("element name `{}` is not lowercase", self.name));
        }
        if self.void && !self.end_optional {
            return Err(format!("VOID element `{}` must have an optional end tag", self.name));
        }
        if self.void && self.inline {
            return Err(format!("VOID element `{}` cannot be INLINE", self.name));
        }
        if self.void && !self.auto_close_on.is_empty() {
            return Err("VOID element cannot declare CLOSES".into());
        }
        Ok(())
    }
}

/// A named set of element rules plus the rule applied to unknown elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dtd {
    name: String,
    rules: BTreeMap<String, ElementRule>,
    default_rule: ElementRule,
}

impl Dtd {
    /// Parses DTD source text under the name `custom`.
    pub fn load(source: &str) -> Result<Dtd, DtdError> {
        Dtd::load_named("custom", source)
    }

    pub fn load_named(name: &str, source: &str) -> Result<Dtd, DtdError> {
        let mut rules = BTreeMap::new();
        let mut default_rule = ElementRule::container("#default");
        let mut declarations = 0usize;

        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.split('#').next().unwrap_or("");
            let mut tokens = text.split_whitespace();
            let Some(head) = tokens.next() else { continue };
            let err = |message: String| DtdError::Line { line, message };
            declarations += 1;

            if head == "DEFAULT" {
                let mut rule = ElementRule::container("#default");
                for tok in tokens {
                    match tok.to_ascii_uppercase().as_str() {
                        "END_OPTIONAL" => rule.end_optional = true,
                        _ => return Err(err(format!("DEFAULT accepts only END_OPTIONAL, found `{tok}`"))),
                    }
                }
                default_rule = rule;
                continue;
            }

            let element = head.to_ascii_lowercase();
            if !element.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b':')) {
                return Err(err(format!("invalid element name `{head}`")));
            }
            let mut rule = ElementRule::container(element.clone());
            for tok in tokens {
                let upper = tok.to_ascii_uppercase();
                if upper == "VOID" {
                    rule.void = true;
                    rule.end_optional = true;
                    rule.flow_container = false;
                } else if upper == "END_OPTIONAL" {
                    rule.end_optional = true;
                } else if upper == "INLINE" {
                    rule.inline = true;
                } else if upper.starts_with("CLOSES(") && upper.ends_with(')') {
                    let inner = &tok["CLOSES(".len()..tok.len() - 1];
                    for closer in inner.split(',') {
                        let closer = closer.trim();
                        if closer.is_empty() {
                            return Err(err("empty name in CLOSES(...)".into()));
                        }
                        rule.auto_close_on.insert(closer.to_ascii_lowercase());
                    }
                } else {
                    return Err(err(format!("unrecognized token `{tok}`")));
                }
            }
            rule.check().map_err(err)?;
            rules.insert(element, rule);
        }

        if declarations == 0 {
            return Err(DtdError::Empty);
        }
        Ok(Dtd { name: name.to_string(), rules, default_rule })
    }

    /// Returns a bundled DTD by name. `frameset.dtd` is accepted as an alias for `frameset`.
    pub fn builtin(name: &str) -> Result<Arc<Dtd>, DtdError> {
        let key = name.strip_suffix(".dtd").unwrap_or(name).to_ascii_lowercase();
        match key.as_str() {
            "frameset" => Ok(Dtd::frameset()),
            _ => Err(DtdError::UnknownBuiltin { name: name.to_string() }),
        }
    }

    /// The bundled HTML 4 frameset DTD, shared.
    pub fn frameset() -> Arc<Dtd> {
        Arc::clone(&FRAMESET)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Case-insensitive and total: unknown names get the default rule.
    pub fn lookup(&self, element: &str) -> &ElementRule {
        if let Some(rule) = self.rules.get(element) {
            return rule;
        }
        if element.bytes().any(|b| b.is_ascii_uppercase()) {
            if let Some(rule) = self.rules.get(&element.to_ascii_lowercase()) {
                return rule;
            }
        }
        &self.default_rule
    }

    pub fn default_rule(&self) -> &ElementRule {
        &self.default_rule
    }

    pub fn rules(&self) -> impl Iterator<Item = &ElementRule> {
        self.rules.values()
    }

    pub fn is_void(&self, element: &str) -> bool {
        self.lookup(element).void
    }

    /// Serializes back to the line format; `load` of the output yields an equal rule set.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if self.default_rule.end_optional {
            out.push_str("DEFAULT END_OPTIONAL\n");
        } else {
            out.push_str("DEFAULT\n");
        }
        for rule in self.rules.values() {
            out.push_str(&rule.name);
            if rule.void {
                out.push_str(" VOID");
            } else if rule.end_optional {
                out.push_str(" END_OPTIONAL");
            }
            if rule.inline {
                out.push_str(" INLINE");
            }
            if !rule.auto_close_on.is_empty() {
                let names: Vec<&str> = rule.auto_close_on.iter().map(String::as_str).collect();
                let _ = write!(out, " CLOSES({})", names.join(","));
            }
            out.push('\n');
        }
        out
    }

    /// Rule-by-rule equality, ignoring the DTD name.
    pub fn same_rules(&self, other: &Dtd) -> bool {
        self.rules == other.rules && self.default_rule == other.default_rule
    }
}
