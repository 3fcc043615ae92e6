//! Core language commands.

use std::collections::HashMap;
use std::io::Write;
use std::time::Duration;

use super::expr::parse_int;
use super::syntax::{Word, WordNode};
use super::{list, usage, Builtin, CmdResult, Flow, Interp};

pub(super) fn register(table: &mut HashMap<&'static str, Builtin>) {
    let commands: &[(&'static str, Builtin)] = &[
        ("set", set),
        ("puts", puts),
        ("list", list_cmd),
        ("lappend", lappend),
        ("llength", llength),
        ("lindex", lindex),
        ("foreach", foreach),
        ("incr", incr),
        ("proc", proc_cmd),
        ("return", return_cmd),
        ("catch", catch),
        ("error", error),
        ("break", |_, w| if w.len() == 1 { Err(Flow::Break) } else { Err(usage("break")) }),
        ("continue", |_, w| if w.len() == 1 { Err(Flow::Continue) } else { Err(usage("continue")) }),
        ("switch", switch),
        ("after", after),
        ("source", source),
        ("expr", expr),
        ("scan", scan),
        ("regexp", regexp),
        ("info", info),
    ];
    table.extend(commands.iter().copied());
}

fn set(interp: &mut Interp, w: &[String]) -> CmdResult {
    match w.len() {
        2 => interp.read_var(&w[1]),
        3 => interp.write_var(&w[1], w[2].clone()),
        _ => Err(usage("set varName ?newValue?")),
    }
}

fn puts(interp: &mut Interp, w: &[String]) -> CmdResult {
    let mut args = &w[1..];
    let newline = match args.first().map(String::as_str) {
        Some("-nonewline") if args.len() > 1 => {
            args = &args[1..];
            false
        }
        _ => true,
    };
    let (channel, text) = match args {
        [text] => ("stdout", text),
        [channel, text] => (channel.as_str(), text),
        _ => return Err(usage("puts ?-nonewline? ?channelId? string")),
    };
    let line = if newline { format!("{text}\n") } else { text.clone() };
    match channel {
        "stdout" => interp.write_out(&line)?,
        "stderr" => {
            let mut err = std::io::stderr();
            let _ = err.write_all(line.as_bytes());
        }
        other => return Err(Flow::error(format!("can not find channel named \"{other}\""))),
    }
    Ok(String::new())
}

fn list_cmd(_: &mut Interp, w: &[String]) -> CmdResult {
    Ok(list::join(&w[1..]))
}

pub(super) fn split_list(value: &str) -> Result<Vec<String>, Flow> {
    list::split(value).map_err(Flow::error)
}

fn lappend(interp: &mut Interp, w: &[String]) -> CmdResult {
    if w.len() < 2 {
        return Err(usage("lappend varName ?value value ...?"));
    }
    let mut current = if interp.var_exists(&w[1]) { interp.read_var(&w[1])? } else { String::new() };
    for item in &w[2..] {
        if !current.trim().is_empty() {
            current.push(' ');
        }
        current.push_str(&list::quote(item));
    }
    interp.write_var(&w[1], current)
}

fn llength(_: &mut Interp, w: &[String]) -> CmdResult {
    match w {
        [_, value] => Ok(split_list(value)?.len().to_string()),
        _ => Err(usage("llength list")),
    }
}

fn lindex(_: &mut Interp, w: &[String]) -> CmdResult {
    let [_, value, index] = w else { return Err(usage("lindex list index")) };
    let items = split_list(value)?;
    let i = if index == "end" {
        items.len().checked_sub(1)
    } else if let Some(rest) = index.strip_prefix("end-") {
        parse_int(rest).and_then(|n| usize::try_from(n).ok()).and_then(|n| items.len().checked_sub(n + 1))
    } else {
        let n = parse_int(index).ok_or_else(|| Flow::error(format!("bad index \"{index}\"")))?;
        usize::try_from(n).ok()
    };
    Ok(i.and_then(|i| items.get(i).cloned()).unwrap_or_default())
}

/// Runs a loop body; `Ok(false)` means the loop should stop.
fn loop_body(interp: &mut Interp, body: &str) -> Result<bool, Flow> {
    match interp.eval_source(body) {
        Ok(_) | Err(Flow::Continue) => Ok(true),
        Err(Flow::Break) => Ok(false),
        Err(other) => Err(other),
    }
}

fn foreach(interp: &mut Interp, w: &[String]) -> CmdResult {
    if w.len() < 4 || !w.len().is_multiple_of(2) {
        return Err(usage("foreach varList list ?varList list ...? command"));
    }
    let body = &w[w.len() - 1];
    let mut groups = Vec::new();
    for pair in w[1..w.len() - 1].chunks(2) {
        let vars = split_list(&pair[0])?;
        if vars.is_empty() {
            return Err(Flow::error("foreach varlist is empty"));
        }
        groups.push((vars, split_list(&pair[1])?));
    }
    let rounds = groups.iter().map(|(vars, items)| items.len().div_ceil(vars.len())).max().unwrap_or(0);
    for round in 0..rounds {
        for (vars, items) in &groups {
            for (j, var) in vars.iter().enumerate() {
                let value = items.get(round * vars.len() + j).cloned().unwrap_or_default();
                interp.write_var(var, value)?;
            }
        }
        if !loop_body(interp, body)? {
            break;
        }
    }
    Ok(String::new())
}

/// The text of a condition word. Unbraced conditions are re-read from their
/// source so that `while [cmd]` re-runs `cmd` on every iteration.
fn condition_text(word: &WordNode) -> &str {
    match &word.word {
        Word::Braced(text) => text,
        Word::Subst(_) => &word.source,
    }
}

pub(super) fn if_form(interp: &mut Interp, words: &[WordNode]) -> CmdResult {
    const FORM: &str = "if expr1 ?then? body1 elseif expr2 ?then? body2 elseif ... ?else? ?bodyN?";
    let mut i = 1;
    loop {
        let cond = words.get(i).ok_or_else(|| usage(FORM))?;
        i += 1;
        if words.get(i).and_then(WordNode::literal) == Some("then") {
            i += 1;
        }
        let body = words.get(i).ok_or_else(|| usage(FORM))?;
        i += 1;
        if interp.eval_condition(condition_text(cond))? {
            let body = interp.subst_word(body)?;
            return interp.eval_source(&body);
        }
        let Some(next) = words.get(i) else { return Ok(String::new()) };
        match interp.subst_word(next)?.as_str() {
            "elseif" => i += 1,
            "else" => {
                let body = words.get(i + 1).ok_or_else(|| usage(FORM))?;
                if words.len() > i + 2 {
                    return Err(usage(FORM));
                }
                let body = interp.subst_word(body)?;
                return interp.eval_source(&body);
            }
            _ => {
                if words.len() > i + 1 {
                    return Err(usage(FORM));
                }
                let body = interp.subst_word(next)?;
                return interp.eval_source(&body);
            }
        }
    }
}

pub(super) fn while_form(interp: &mut Interp, words: &[WordNode]) -> CmdResult {
    let [_, cond, body] = words else { return Err(usage("while test command")) };
    let body = interp.subst_word(body)?;
    while interp.eval_condition(condition_text(cond))? {
        if !loop_body(interp, &body)? {
            break;
        }
        interp.check_cancel()?;
    }
    Ok(String::new())
}

pub(super) fn for_form(interp: &mut Interp, words: &[WordNode]) -> CmdResult {
    let [_, start, cond, next, body] = words else { return Err(usage("for start test next command")) };
    let start = interp.subst_word(start)?;
    let next = interp.subst_word(next)?;
    let body = interp.subst_word(body)?;
    interp.eval_source(&start)?;
    while interp.eval_condition(condition_text(cond))? {
        if !loop_body(interp, &body)? {
            break;
        }
        interp.eval_source(&next)?;
        interp.check_cancel()?;
    }
    Ok(String::new())
}

fn incr(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (name, amount) = match w {
        [_, name] => (name, 1),
        [_, name, amount] => {
            (name, parse_int(amount).ok_or_else(|| Flow::error(format!("expected integer but got \"{amount}\"")))?)
        }
        _ => return Err(usage("incr varName ?increment?")),
    };
    let current = if interp.var_exists(name) {
        let v = interp.read_var(name)?;
        parse_int(&v).ok_or_else(|| Flow::error(format!("expected integer but got \"{v}\"")))?
    } else {
        0
    };
    let value = current.checked_add(amount).ok_or_else(|| Flow::error("integer overflow"))?;
    interp.write_var(name, value.to_string())
}

fn proc_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, name, params, body] = w else { return Err(usage("proc name args body")) };
    let mut parsed = Vec::new();
    for param in split_list(params)? {
        let mut parts = split_list(&param)?.into_iter();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(p), default, None) => parsed.push((p, default)),
            _ => return Err(Flow::error(format!("procedure \"{name}\" has argument with bad format \"{param}\""))),
        }
    }
    interp.define_proc(name, parsed, body.clone());
    Ok(String::new())
}

fn return_cmd(_: &mut Interp, w: &[String]) -> CmdResult {
    match w {
        [_] => Err(Flow::Return(String::new())),
        [_, value] => Err(Flow::Return(value.clone())),
        _ => Err(usage("return ?value?")),
    }
}

fn catch(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (script, var) = match w {
        [_, script] => (script, None),
        [_, script, var] => (script, Some(var)),
        _ => return Err(usage("catch script ?resultVarName?")),
    };
    let (code, value) = match interp.eval_source(script) {
        Ok(v) => (0, v),
        Err(Flow::Error(e)) => (1, e.message),
        Err(Flow::Return(v)) => (2, v),
        Err(Flow::Break) => (3, String::new()),
        Err(Flow::Continue) => (4, String::new()),
    };
    if let Some(var) = var {
        interp.write_var(var, value)?;
    }
    Ok(code.to_string())
}

fn error(_: &mut Interp, w: &[String]) -> CmdResult {
    match w {
        [_, message, ..] if w.len() <= 4 => Err(Flow::error(message.clone())),
        _ => Err(usage("error message ?errorInfo? ?errorCode?")),
    }
}

fn switch(interp: &mut Interp, w: &[String]) -> CmdResult {
    const FORM: &str = "switch ?-exact? ?--? string pattern body ... ?default body?";
    let mut i = 1;
    while let Some(opt) = w.get(i) {
        match opt.as_str() {
            "-exact" => i += 1,
            "--" => {
                i += 1;
                break;
            }
            s if s.starts_with('-') && w.len() - i > 2 => {
                return Err(Flow::error(format!("bad option \"{s}\": must be -exact or --")));
            }
            _ => break,
        }
    }
    let value = w.get(i).ok_or_else(|| usage(FORM))?;
    let arms: Vec<String> = match &w[i + 1..] {
        [single] => split_list(single)?,
        [] => return Err(usage(FORM)),
        many => many.to_vec(),
    };
    if !arms.len().is_multiple_of(2) {
        return Err(Flow::error("extra switch pattern with no body"));
    }
    let pairs: Vec<(&String, &String)> = arms.chunks(2).map(|c| (&c[0], &c[1])).collect();
    let last = pairs.len().saturating_sub(1);
    let hit = pairs
        .iter()
        .position(|(pat, _)| *pat == value)
        .or_else(|| pairs.last().filter(|(pat, _)| pat.as_str() == "default").map(|_| last));
    let Some(start) = hit else { return Ok(String::new()) };
    match pairs[start..].iter().find(|(_, body)| body.as_str() != "-") {
        Some((_, body)) => interp.eval_source(body),
        None => Err(Flow::error("no body specified for pattern")),
    }
}

fn after(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, ms] = w else { return Err(usage("after milliseconds")) };
    let ms = parse_int(ms)
        .and_then(|n| u64::try_from(n).ok())
        .ok_or_else(|| Flow::error(format!("expected non-negative integer but got \"{ms}\"")))?;
    if !interp.cancel_token().sleep(Duration::from_millis(ms)) {
        return Err(Flow::error("task cancelled"));
    }
    Ok(String::new())
}

fn source(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, path] = w else { return Err(usage("source fileName")) };
    let text = std::fs::read_to_string(path).map_err(|e| Flow::error(format!("couldn't read file \"{path}\": {e}")))?;
    match interp.eval_source(&text) {
        Err(Flow::Return(value)) => Ok(value),
        other => other,
    }
}

fn expr(interp: &mut Interp, w: &[String]) -> CmdResult {
    if w.len() < 2 {
        return Err(usage("expr arg ?arg ...?"));
    }
    interp.eval_expr(&w[1..].join(" "))
}

fn scan(interp: &mut Interp, w: &[String]) -> CmdResult {
    if w.len() < 3 {
        return Err(usage("scan string format ?varName ...?"));
    }
    let input = w[1].as_str();
    let format = w[2].as_str();
    let vars = &w[3..];
    let mut values: Vec<String> = Vec::new();
    let mut pos = 0;
    let mut fmt = format.chars().peekable();
    let skip_ws = |pos: &mut usize| {
        while input[*pos..].starts_with(|c: char| c.is_whitespace()) {
            *pos += input[*pos..].chars().next().map_or(1, char::len_utf8);
        }
    };
    let mut exhausted = false;
    while let Some(c) = fmt.next() {
        if c.is_whitespace() {
            skip_ws(&mut pos);
            continue;
        }
        if c != '%' || fmt.peek() == Some(&'%') {
            if c == '%' {
                fmt.next();
            }
            if input[pos..].starts_with(c) {
                pos += c.len_utf8();
                continue;
            }
            break;
        }
        let conv = fmt.next().ok_or_else(|| Flow::error("bad scan conversion character \"\""))?;
        skip_ws(&mut pos);
        if pos >= input.len() {
            exhausted = true;
            break;
        }
        match conv {
            's' => {
                let len = input[pos..].find(char::is_whitespace).unwrap_or(input.len() - pos);
                values.push(input[pos..pos + len].to_string());
                pos += len;
            }
            'd' => {
                let rest = &input[pos..];
                let sign = usize::from(rest.starts_with(['-', '+']));
                let digits = rest[sign..].bytes().take_while(u8::is_ascii_digit).count();
                if digits == 0 {
                    break;
                }
                let n = parse_int(&rest[..sign + digits])
                    .ok_or_else(|| Flow::error("integer value too large to represent"))?;
                values.push(n.to_string());
                pos += sign + digits;
            }
            other => return Err(Flow::error(format!("bad scan conversion character \"{other}\""))),
        }
    }
    if vars.is_empty() {
        return Ok(list::join(&values));
    }
    if values.len() > vars.len() {
        return Err(Flow::error("different numbers of variable names and field specifiers"));
    }
    for (var, value) in vars.iter().zip(&values) {
        interp.write_var(var, value.clone())?;
    }
    if values.is_empty() && exhausted {
        return Ok("-1".into());
    }
    Ok(values.len().to_string())
}

fn regexp(interp: &mut Interp, w: &[String]) -> CmdResult {
    const FORM: &str = "regexp ?-nocase? ?--? exp string ?matchVar? ?subMatchVar ...?";
    let mut i = 1;
    let mut nocase = false;
    while let Some(opt) = w.get(i) {
        match opt.as_str() {
            "-nocase" => nocase = true,
            "--" => {
                i += 1;
                break;
            }
            _ => break,
        }
        i += 1;
    }
    let (Some(pattern), Some(text)) = (w.get(i), w.get(i + 1)) else { return Err(usage(FORM)) };
    let re = interp.regex(pattern, nocase)?;
    let vars = &w[i + 2..];
    let Some(caps) = re.captures(text) else { return Ok("0".into()) };
    for (n, var) in vars.iter().enumerate() {
        let value = caps.get(n).map_or("", |m| m.as_str()).to_string();
        interp.write_var(var, value)?;
    }
    Ok("1".into())
}

fn info(interp: &mut Interp, w: &[String]) -> CmdResult {
    match w {
        [_, sub, name] if sub == "exists" => Ok(if interp.var_exists(name) { "1" } else { "0" }.into()),
        [_, sub, ..] if sub != "exists" => {
            Err(Flow::error(format!("unknown or ambiguous subcommand \"{sub}\": must be exists")))
        }
        _ => Err(usage("info exists varName")),
    }
}
