//! `expr`: integer arithmetic, comparisons and logic over substituted operands.

use std::cmp::Ordering;

use super::syntax::{Cursor, Part};
use super::{Flow, Interp};

#[derive(Debug, Clone, PartialEq)]
enum Val {
    Int(i64),
    Str(String),
}

impl Val {
    fn from_text(s: String) -> Val {
        match parse_int(&s) {
            Some(n) => Val::Int(n),
            None => Val::Str(s),
        }
    }

    fn into_text(self) -> String {
        match self {
            Val::Int(n) => n.to_string(),
            Val::Str(s) => s,
        }
    }

    fn text(&self) -> String {
        self.clone().into_text()
    }

    fn int(&self, op: &str) -> Result<i64, Flow> {
        match self {
            Val::Int(n) => Ok(*n),
            Val::Str(s) => Err(Flow::error(format!("can't use non-numeric string \"{s}\" as operand of \"{op}\""))),
        }
    }

    fn truth(&self) -> Result<bool, Flow> {
        match self {
            Val::Int(n) => Ok(*n != 0),
            Val::Str(s) => parse_bool(s).ok_or_else(|| Flow::error(format!("expected boolean value but got \"{s}\""))),
        }
    }
}

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let t = s.trim();
    let (neg, digits) = match t.as_bytes().first()? {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let magnitude: i128 = digits.parse().ok()?;
    i64::try_from(if neg { -magnitude } else { magnitude }).ok()
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    if let Some(n) = parse_int(s) {
        return Some(n != 0);
    }
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" => Some(true),
        "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Or,
    And,
    StrEq,
    StrNe,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl Op {
    fn precedence(self) -> u8 {
        match self {
            Op::Or => 2,
            Op::And => 3,
            Op::StrEq | Op::StrNe => 5,
            Op::Eq | Op::Ne => 6,
            Op::Lt | Op::Gt | Op::Le | Op::Ge => 7,
            Op::Add | Op::Sub => 9,
            Op::Mul | Op::Div | Op::Mod => 10,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Op::Or => "||",
            Op::And => "&&",
            Op::StrEq => "eq",
            Op::StrNe => "ne",
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Ge => ">=",
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Mod => "%",
        }
    }
}

#[derive(Debug)]
enum Node {
    Const(Val),
    Parts(Vec<Part>),
    Neg(Box<Node>),
    Not(Box<Node>),
    BitNot(Box<Node>),
    Binary(Op, Box<Node>, Box<Node>),
    Ternary(Box<Node>, Box<Node>, Box<Node>),
}

struct ExprParser<'a> {
    cur: Cursor<'a>,
    text: &'a str,
}

fn syntax_error(text: &str, why: &str) -> Flow {
    Flow::error(format!("syntax error in expression \"{text}\": {why}"))
}

impl<'a> ExprParser<'a> {
    fn peek(&mut self) -> Option<u8> {
        self.cur.skip_whitespace();
        self.cur.peek()
    }

    fn starts_with(&mut self, s: &str) -> bool {
        self.cur.skip_whitespace();
        self.cur.rest().starts_with(s)
    }

    fn binary_op(&mut self) -> Option<(Op, usize)> {
        self.cur.skip_whitespace();
        let rest = self.cur.rest();
        let word_op = |w: &str| {
            rest.starts_with(w) && !rest[w.len()..].starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
        };
        let op = if rest.starts_with("||") {
            (Op::Or, 2)
        } else if rest.starts_with("&&") {
            (Op::And, 2)
        } else if rest.starts_with("==") {
            (Op::Eq, 2)
        } else if rest.starts_with("!=") {
            (Op::Ne, 2)
        } else if rest.starts_with("<=") {
            (Op::Le, 2)
        } else if rest.starts_with(">=") {
            (Op::Ge, 2)
        } else if word_op("eq") {
            (Op::StrEq, 2)
        } else if word_op("ne") {
            (Op::StrNe, 2)
        } else {
            let op = match rest.as_bytes().first()? {
                b'<' => Op::Lt,
                b'>' => Op::Gt,
                b'+' => Op::Add,
                b'-' => Op::Sub,
                b'*' => Op::Mul,
                b'/' => Op::Div,
                b'%' => Op::Mod,
                _ => return None,
            };
            (op, 1)
        };
        Some(op)
    }

    fn expression(&mut self) -> Result<Node, Flow> {
        let cond = self.binary(0)?;
        if self.peek() != Some(b'?') {
            return Ok(cond);
        }
        self.cur.bump(1);
        let yes = self.expression()?;
        if self.peek() != Some(b':') {
            return Err(syntax_error(self.text, "missing \":\" in ternary"));
        }
        self.cur.bump(1);
        let no = self.expression()?;
        Ok(Node::Ternary(Box::new(cond), Box::new(yes), Box::new(no)))
    }

    fn binary(&mut self, min_prec: u8) -> Result<Node, Flow> {
        let mut lhs = self.unary()?;
        while let Some((op, len)) = self.binary_op() {
            if op.precedence() <= min_prec {
                break;
            }
            self.cur.bump(len);
            let rhs = self.binary(op.precedence())?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, Flow> {
        match self.peek() {
            Some(b'-') => {
                self.cur.bump(1);
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.cur.bump(1);
                self.unary()
            }
            Some(b'!') if !self.starts_with("!=") => {
                self.cur.bump(1);
                Ok(Node::Not(Box::new(self.unary()?)))
            }
            Some(b'~') => {
                self.cur.bump(1);
                Ok(Node::BitNot(Box::new(self.unary()?)))
            }
            _ => self.operand(),
        }
    }

    fn operand(&mut self) -> Result<Node, Flow> {
        let to_flow = |e: super::syntax::ParseError| Flow::error(e.message);
        match self.peek() {
            None => Err(syntax_error(self.text, "premature end of expression")),
            Some(b'(') => {
                self.cur.bump(1);
                let inner = self.expression()?;
                if self.peek() != Some(b')') {
                    return Err(syntax_error(self.text, "missing close parenthesis"));
                }
                self.cur.bump(1);
                Ok(inner)
            }
            Some(b'$') => match self.cur.variable().map_err(to_flow)? {
                Some(part) => Ok(Node::Parts(vec![part])),
                None => Err(syntax_error(self.text, "lone \"$\"")),
            },
            Some(b'[') => Ok(Node::Parts(vec![self.cur.bracket().map_err(to_flow)?])),
            Some(b'"') => Ok(Node::Parts(self.cur.quoted().map_err(to_flow)?)),
            Some(b'{') => Ok(Node::Const(Val::Str(self.cur.braced().map_err(to_flow)?))),
            Some(b) if b.is_ascii_digit() => {
                let rest = self.cur.rest();
                let len = rest.bytes().take_while(u8::is_ascii_digit).count();
                let digits = &rest[..len];
                let n = digits
                    .parse::<i64>()
                    .map_err(|_| Flow::error(format!("integer value too large to represent: {digits}")))?;
                self.cur.bump(len);
                Ok(Node::Const(Val::Int(n)))
            }
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                let rest = self.cur.rest();
                let len = rest.bytes().take_while(|b| b.is_ascii_alphanumeric() || *b == b'_').count();
                let word = rest[..len].to_string();
                self.cur.bump(len);
                Ok(Node::Const(Val::Str(word)))
            }
            Some(_) => {
                let ch = self.cur.rest().chars().next().unwrap_or(' ');
                Err(syntax_error(self.text, &format!("unexpected character \"{ch}\"")))
            }
        }
    }
}

fn floor_div(a: i64, b: i64) -> Option<i64> {
    let q = a.checked_div(b)?;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q.checked_sub(1)
    } else {
        Some(q)
    }
}

fn floor_mod(a: i64, b: i64) -> Option<i64> {
    let r = a.checked_rem(b)?;
    if r != 0 && ((r < 0) != (b < 0)) {
        Some(r + b)
    } else {
        Some(r)
    }
}

fn overflow() -> Flow {
    Flow::error("integer overflow")
}

fn bool_val(b: bool) -> Val {
    Val::Int(b as i64)
}

fn compare(a: &Val, b: &Val) -> Ordering {
    match (a, b) {
        (Val::Int(x), Val::Int(y)) => x.cmp(y),
        _ => a.text().cmp(&b.text()),
    }
}

/// Numeric equality for numbers; ASCII case-insensitive equality for other text.
fn loose_eq(a: &Val, b: &Val) -> bool {
    match (a, b) {
        (Val::Int(x), Val::Int(y)) => x == y,
        _ => a.text().eq_ignore_ascii_case(&b.text()),
    }
}

impl Interp {
    fn eval_node(&mut self, node: &Node) -> Result<Val, Flow> {
        Ok(match node {
            Node::Const(v) => v.clone(),
            Node::Parts(parts) => Val::from_text(self.subst_parts(parts)?),
            Node::Neg(inner) => Val::Int(self.eval_node(inner)?.int("-")?.checked_neg().ok_or_else(overflow)?),
            Node::BitNot(inner) => Val::Int(!self.eval_node(inner)?.int("~")?),
            Node::Not(inner) => bool_val(!self.eval_node(inner)?.truth()?),
            Node::Ternary(c, yes, no) => {
                if self.eval_node(c)?.truth()? {
                    self.eval_node(yes)?
                } else {
                    self.eval_node(no)?
                }
            }
            Node::Binary(Op::And, a, b) => bool_val(self.eval_node(a)?.truth()? && self.eval_node(b)?.truth()?),
            Node::Binary(Op::Or, a, b) => bool_val(self.eval_node(a)?.truth()? || self.eval_node(b)?.truth()?),
            Node::Binary(op, a, b) => {
                let a = self.eval_node(a)?;
                let b = self.eval_node(b)?;
                match op {
                    Op::StrEq => bool_val(a.text() == b.text()),
                    Op::StrNe => bool_val(a.text() != b.text()),
                    Op::Eq => bool_val(loose_eq(&a, &b)),
                    Op::Ne => bool_val(!loose_eq(&a, &b)),
                    Op::Lt => bool_val(compare(&a, &b) == Ordering::Less),
                    Op::Gt => bool_val(compare(&a, &b) == Ordering::Greater),
                    Op::Le => bool_val(compare(&a, &b) != Ordering::Greater),
                    Op::Ge => bool_val(compare(&a, &b) != Ordering::Less),
                    arith => {
                        let (x, y) = (a.int(arith.symbol())?, b.int(arith.symbol())?);
                        if matches!(arith, Op::Div | Op::Mod) && y == 0 {
                            return Err(Flow::error("divide by zero"));
                        }
                        let r = match arith {
                            Op::Add => x.checked_add(y),
                            Op::Sub => x.checked_sub(y),
                            Op::Mul => x.checked_mul(y),
                            Op::Div => floor_div(x, y),
                            _ => floor_mod(x, y),
                        };
                        Val::Int(r.ok_or_else(overflow)?)
                    }
                }
            }
        })
    }

    /// Evaluates an expression, performing its own `$` and `[]` substitution.
    pub(crate) fn eval_expr(&mut self, text: &str) -> Result<String, Flow> {
        let mut parser = ExprParser { cur: Cursor::new(text, 1), text };
        let node = parser.expression()?;
        if parser.peek().is_some() {
            let rest = parser.cur.rest().to_string();
            return Err(syntax_error(text, &format!("extra tokens at \"{rest}\"")));
        }
        Ok(self.eval_node(&node)?.into_text())
    }

    /// Evaluates a condition to a boolean.
    pub(crate) fn eval_condition(&mut self, text: &str) -> Result<bool, Flow> {
        let value = self.eval_expr(text)?;
        parse_bool(&value).ok_or_else(|| Flow::error(format!("expected boolean value but got \"{value}\"")))
    }
}

#[cfg(test)]
mod tests {
    use crate::interp::Interp;

    fn expr(src: &str) -> Result<String, String> {
        let mut interp = Interp::new();
        interp.eval("set i_ 2; set s abc").unwrap();
        interp.eval_expr(src).map_err(|f| f.into_error().message)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(expr("1+$i_").unwrap(), "3");
        assert_eq!(expr("2 + 3 * 4").unwrap(), "14");
        assert_eq!(expr("(2 + 3) * 4").unwrap(), "20");
        assert_eq!(expr("-7 / 2").unwrap(), "-4");
        assert_eq!(expr("-7 % 2").unwrap(), "1");
        assert_eq!(expr("1 < 2 && 3 >= 3").unwrap(), "1");
        assert_eq!(expr("!0").unwrap(), "1");
        assert_eq!(expr("~0").unwrap(), "-1");
        assert_eq!(expr("1 ? 5 : 6").unwrap(), "5");
    }

    #[test]
    fn string_comparisons() {
        assert_eq!(expr("\"a\" == \"A\"").unwrap(), "1");
        assert_eq!(expr("\"a\" eq \"A\"").unwrap(), "0");
        assert_eq!(expr("$s != \"abd\"").unwrap(), "1");
        assert_eq!(expr("{x y} == \"x y\"").unwrap(), "1");
        assert_eq!(expr("10 == 010").unwrap(), "1");
        assert_eq!(expr("\"b\" > \"a\"").unwrap(), "1");
    }

    #[test]
    fn command_substitution_and_short_circuit() {
        assert_eq!(expr("[set s] == \"abc\"").unwrap(), "1");
        assert_eq!(expr("0 && [error boom]").unwrap(), "0");
        assert_eq!(expr("1 || [error boom]").unwrap(), "1");
        assert_eq!(expr("1 && [error boom]").unwrap_err(), "boom");
    }

    #[test]
    fn errors() {
        assert_eq!(expr("9223372036854775807 + 1").unwrap_err(), "integer overflow");
        assert!(expr("99999999999999999999").unwrap_err().contains("too large"));
        assert_eq!(expr("1 / 0").unwrap_err(), "divide by zero");
        assert!(expr("$s + 1").unwrap_err().contains("non-numeric"));
        assert!(expr("1 +").unwrap_err().contains("premature end"));
        assert!(expr("1 2").unwrap_err().contains("extra tokens"));
        assert!(expr("$nope").unwrap_err().contains("no such variable"));
    }
}
