//! Tcl-style lists: whitespace-separated elements grouped with braces or quotes.

/// Splits a value into list elements.
pub fn split(value: &str) -> Result<Vec<String>, String> {
    let bytes = value.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() {
            return Ok(out);
        }
        match bytes[i] {
            b'{' => {
                let start = i + 1;
                let mut depth = 1;
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err("unmatched open brace in list".into()),
                        Some(b'\\') => i += 1,
                        Some(b'{') => depth += 1,
                        Some(b'}') => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    i += 1;
                }
                out.push(value[start..i].to_string());
                i += 1;
                if i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    return Err("list element in braces followed by non-space character".into());
                }
            }
            b'"' => {
                i += 1;
                let mut elem = String::new();
                loop {
                    match bytes.get(i) {
                        None => return Err("unmatched open quote in list".into()),
                        Some(b'"') => break,
                        Some(b'\\') => i = unescape(value, i, &mut elem),
                        Some(_) => i = push_char(value, i, &mut elem),
                    }
                }
                out.push(elem);
                i += 1;
                if i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    return Err("list element in quotes followed by non-space character".into());
                }
            }
            _ => {
                let mut elem = String::new();
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    if bytes[i] == b'\\' {
                        i = unescape(value, i, &mut elem);
                    } else {
                        i = push_char(value, i, &mut elem);
                    }
                }
                out.push(elem);
            }
        }
    }
}

fn push_char(value: &str, i: usize, out: &mut String) -> usize {
    let ch = value[i..].chars().next().expect("in bounds");
    out.push(ch);
    i + ch.len_utf8()
}

/// Decodes the backslash sequence starting at `i`; returns the index after it.
fn unescape(value: &str, i: usize, out: &mut String) -> usize {
    let Some(ch) = value[i + 1..].chars().next() else {
        out.push('\\');
        return i + 1;
    };
    out.push(match ch {
        'n' => '\n',
        't' => '\t',
        'r' => '\r',
        other => other,
    });
    i + 1 + ch.len_utf8()
}

/// Quotes one element so that [`split`] recovers it unchanged.
pub fn quote(elem: &str) -> String {
    if elem.is_empty() {
        return "{}".to_string();
    }
    let special = |c: char| c.is_ascii_whitespace() || "{}[]$\\\";".contains(c);
    if !elem.contains(special) && !elem.starts_with('#') {
        return elem.to_string();
    }
    if braces_balanced(elem) {
        return format!("{{{elem}}}");
    }
    let mut out = String::with_capacity(elem.len() + 8);
    for (i, c) in elem.chars().enumerate() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '#' if i == 0 => out.push_str("\\#"),
            c if special(c) => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out
}

/// True when `{elem}` would be read back as exactly `elem`.
fn braces_balanced(elem: &str) -> bool {
    let bytes = elem.as_bytes();
    let mut depth = 0i64;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                if i + 1 == bytes.len() {
                    return false;
                }
                i += 1;
            }
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
        i += 1;
    }
    depth == 0
}

/// Formats elements as a list value.
pub fn join<S: AsRef<str>>(items: &[S]) -> String {
    items.iter().map(|s| quote(s.as_ref())).collect::<Vec<_>>().join(" ")
}
