//! A small Tcl-style interpreter hosting the `ws::*` commands.
//!
//! Everything is a string. Lists use Tcl quoting (see [`list`]). Commands
//! are looked up among user procs first, so scripts may redefine builtins
//! such as `ws::validate_link` or `ws::timeout`.

mod builtins;
mod expr;
pub mod list;
pub mod syntax;
mod ws;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::net::HttpClient;
use crate::tasks::{CancelToken, TaskRegistry};
use syntax::{parse_script, Command, Part, Script, Word, WordNode};

pub use syntax::ParseError;

/// Nested evaluations (proc calls, substitutions, bodies) deeper than this fail.
const MAX_DEPTH: usize = 1000;
const SCRIPT_CACHE_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ScriptError {
    pub message: String,
    /// Line of the innermost command that raised, relative to its own script text.
    pub line: Option<usize>,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl ScriptError {
    pub fn new(message: impl Into<String>) -> Self {
        ScriptError { message: message.into(), line: None }
    }
}

impl From<ParseError> for ScriptError {
    fn from(e: ParseError) -> Self {
        ScriptError { message: e.message, line: Some(e.line) }
    }
}

/// Non-local control flow out of a command.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Flow {
    Error(ScriptError),
    Return(String),
    Break,
    Continue,
}

impl Flow {
    pub(crate) fn error(message: impl Into<String>) -> Flow {
        Flow::Error(ScriptError::new(message))
    }

    /// Turns stray control flow into the error Tcl reports for it.
    pub(crate) fn into_error(self) -> ScriptError {
        match self {
            Flow::Error(e) => e,
            Flow::Return(_) => ScriptError::new("invoked \"return\" outside of a proc"),
            Flow::Break => ScriptError::new("invoked \"break\" outside of a loop"),
            Flow::Continue => ScriptError::new("invoked \"continue\" outside of a loop"),
        }
    }
}

impl From<ScriptError> for Flow {
    fn from(e: ScriptError) -> Self {
        Flow::Error(e)
    }
}

impl From<ParseError> for Flow {
    fn from(e: ParseError) -> Self {
        Flow::Error(e.into())
    }
}

pub(crate) type CmdResult = Result<String, Flow>;
type Builtin = fn(&mut Interp, &[String]) -> CmdResult;

/// Where `puts` writes.
pub type Sink = Arc<Mutex<Box<dyn Write + Send>>>;

pub fn stdout_sink() -> Sink {
    Arc::new(Mutex::new(Box::new(io::stdout())))
}

/// An in-memory output sink for capturing `puts`.
#[derive(Debug, Clone, Default)]
pub struct OutputBuffer(Arc<Mutex<Vec<u8>>>);

impl OutputBuffer {
    pub fn new() -> Self {
        OutputBuffer::default()
    }

    pub fn sink(&self) -> Sink {
        Arc::new(Mutex::new(Box::new(self.clone())))
    }

    pub fn contents(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().expect("buffer lock")).into_owned()
    }

    pub fn clear(&self) {
        self.0.lock().expect("buffer lock").clear();
    }
}

impl Write for OutputBuffer {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().expect("buffer lock").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Var {
    Scalar(String),
    Array(BTreeMap<String, String>),
}

#[derive(Debug, Clone, Default)]
struct Frame {
    vars: HashMap<String, Var>,
}

#[derive(Debug)]
pub(crate) struct Proc {
    params: Vec<(String, Option<String>)>,
    body: String,
}

/// Splits `name(key)` into its array name and key.
fn split_var_name(name: &str) -> (&str, Option<&str>) {
    if let Some(open) = name.find('(') {
        if open > 0 && name.ends_with(')') {
            return (&name[..open], Some(&name[open + 1..name.len() - 1]));
        }
    }
    (name, None)
}

fn display_name(name: &str, key: Option<&str>) -> String {
    match key {
        Some(k) => format!("{name}({k})"),
        None => name.to_string(),
    }
}

/// What a child interpreter inherits: globals and procs as of spawn time.
pub(crate) struct Seed {
    globals: Frame,
    procs: HashMap<String, Arc<Proc>>,
    out: Sink,
    tasks: Arc<TaskRegistry>,
    client: HttpClient,
}

pub struct Interp {
    frames: Vec<Frame>,
    procs: HashMap<String, Arc<Proc>>,
    builtins: HashMap<&'static str, Builtin>,
    out: Sink,
    cancel: CancelToken,
    tasks: Arc<TaskRegistry>,
    client: HttpClient,
    handles: ws::Handles,
    cache: HashMap<String, Arc<Script>>,
    regex_cache: HashMap<(String, bool), regex::Regex>,
    depth: usize,
}

impl fmt::Debug for Interp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Interp").field("frames", &self.frames.len()).field("procs", &self.procs.len()).finish()
    }
}

impl Default for Interp {
    fn default() -> Self {
        Interp::new()
    }
}

impl Interp {
    /// An interpreter writing to standard output with a fresh task registry.
    pub fn new() -> Self {
        let mut builtins = HashMap::new();
        builtins::register(&mut builtins);
        ws::register(&mut builtins);
        Interp {
            frames: vec![Frame::default()],
            procs: HashMap::new(),
            builtins,
            out: stdout_sink(),
            cancel: CancelToken::new(),
            tasks: Arc::new(TaskRegistry::new()),
            client: HttpClient::new(),
            handles: ws::Handles::default(),
            cache: HashMap::new(),
            regex_cache: HashMap::new(),
            depth: 0,
        }
    }

    pub fn with_output(mut self, sink: Sink) -> Self {
        self.out = sink;
        self
    }

    pub fn with_client(mut self, client: HttpClient) -> Self {
        self.client = client;
        self
    }

    pub fn with_tasks(mut self, tasks: Arc<TaskRegistry>) -> Self {
        self.tasks = tasks;
        self
    }

    /// Commands check `cancel` before running and abort once it is raised.
    pub fn with_cancel(mut self, cancel: CancelToken) -> Self {
        self.cancel = cancel;
        self
    }

    pub fn tasks(&self) -> &Arc<TaskRegistry> {
        &self.tasks
    }

    pub fn client(&self) -> &HttpClient {
        &self.client
    }

    pub(crate) fn seed(&self) -> Seed {
        Seed {
            globals: self.frames[0].clone(),
            procs: self.procs.clone(),
            out: Arc::clone(&self.out),
            tasks: Arc::clone(&self.tasks),
            client: self.client.clone(),
        }
    }

    pub(crate) fn from_seed(seed: Seed, cancel: CancelToken) -> Interp {
        let mut interp =
            Interp::new().with_output(seed.out).with_tasks(seed.tasks).with_client(seed.client).with_cancel(cancel);
        interp.frames[0] = seed.globals;
        interp.procs = seed.procs;
        interp
    }

    /// Binds script arguments to `argv` (a list) and `argc`.
    pub fn set_argv<S: AsRef<str>>(&mut self, args: &[S]) {
        let argv: Vec<&str> = args.iter().map(AsRef::as_ref).collect();
        self.set_global("argv", &list::join(&argv));
        self.set_global("argc", &argv.len().to_string());
    }

    pub fn set_global(&mut self, name: &str, value: &str) {
        let (base, key) = split_var_name(name);
        let frame = &mut self.frames[0];
        match key {
            None => {
                frame.vars.insert(base.to_string(), Var::Scalar(value.to_string()));
            }
            Some(key) => {
                let entry = frame.vars.entry(base.to_string()).or_insert_with(|| Var::Array(BTreeMap::new()));
                if let Var::Array(map) = entry {
                    map.insert(key.to_string(), value.to_string());
                }
            }
        }
    }

    pub fn get_global(&self, name: &str) -> Option<String> {
        let (base, key) = split_var_name(name);
        match (self.frames[0].vars.get(base)?, key) {
            (Var::Scalar(v), None) => Some(v.clone()),
            (Var::Array(map), Some(k)) => map.get(k).cloned(),
            _ => None,
        }
    }

    /// Evaluates a script and returns the result of its last command.
    pub fn eval(&mut self, source: &str) -> Result<String, ScriptError> {
        match self.eval_source(source) {
            Ok(v) | Err(Flow::Return(v)) => Ok(v),
            Err(other) => Err(other.into_error()),
        }
    }

    /// Evaluates a pipe chain: `;`- or newline-separated segments, each starting with `|`.
    pub fn pipe_eval(&mut self, source: &str) -> Result<String, ScriptError> {
        let script = self.parse_cached(source).map_err(ScriptError::from)?;
        if let Some(cmd) = script.commands.iter().find(|c| !c.words[0].is_pipe_marker()) {
            return Err(ScriptError { message: "pipe segment must begin with |".into(), line: Some(cmd.line) });
        }
        self.eval(source)
    }

    fn parse_cached(&mut self, source: &str) -> Result<Arc<Script>, ParseError> {
        if let Some(script) = self.cache.get(source) {
            return Ok(Arc::clone(script));
        }
        let script = Arc::new(parse_script(source)?);
        if self.cache.len() >= SCRIPT_CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(source.to_string(), Arc::clone(&script));
        Ok(script)
    }

    pub(crate) fn eval_source(&mut self, source: &str) -> CmdResult {
        let script = self.parse_cached(source)?;
        self.eval_script(&script)
    }

    fn enter(&mut self) -> Result<(), Flow> {
        if self.depth >= MAX_DEPTH {
            return Err(Flow::error("too many nested evaluations (infinite loop?)"));
        }
        self.depth += 1;
        Ok(())
    }

    fn eval_script(&mut self, script: &Script) -> CmdResult {
        stacker::maybe_grow(128 * 1024, 4 * 1024 * 1024, || self.eval_script_inner(script))
    }

    fn eval_script_inner(&mut self, script: &Script) -> CmdResult {
        self.enter()?;
        let result = self.run_commands(&script.commands);
        self.depth -= 1;
        result
    }

    fn run_commands(&mut self, commands: &[Command]) -> CmdResult {
        let mut result = String::new();
        let mut i = 0;
        while i < commands.len() {
            if commands[i].words[0].is_pipe_marker() {
                let end =
                    commands[i..].iter().position(|c| !c.words[0].is_pipe_marker()).map_or(commands.len(), |n| i + n);
                result = self.run_pipe(&commands[i..end])?;
                i = end;
            } else {
                result = self.eval_command(&commands[i])?;
                i += 1;
            }
        }
        Ok(result)
    }

    /// Runs a pipe chain: each segment's result becomes the next segment's last word.
    fn run_pipe(&mut self, segments: &[Command]) -> CmdResult {
        let mut carried: Option<String> = None;
        for segment in segments {
            self.check_cancel()?;
            let mut words = self.subst_words(&segment.words[1..]).map_err(|f| with_line(f, segment.line))?;
            words.extend(carried.take());
            if words.is_empty() {
                return Err(with_line(Flow::error("empty pipe segment"), segment.line));
            }
            carried = Some(self.invoke(&words).map_err(|f| with_line(f, segment.line))?);
        }
        Ok(carried.unwrap_or_default())
    }

    fn check_cancel(&self) -> Result<(), Flow> {
        if self.cancel.is_cancelled() {
            return Err(Flow::error("task cancelled"));
        }
        Ok(())
    }

    pub(crate) fn cancel_token(&self) -> &CancelToken {
        &self.cancel
    }

    fn eval_command(&mut self, cmd: &Command) -> CmdResult {
        self.check_cancel()?;
        let result = match cmd.words[0].literal() {
            Some(name @ ("if" | "while" | "for")) if !self.procs.contains_key(name) => {
                self.enter()?;
                let r = match name {
                    "if" => builtins::if_form(self, &cmd.words),
                    "while" => builtins::while_form(self, &cmd.words),
                    _ => builtins::for_form(self, &cmd.words),
                };
                self.depth -= 1;
                r
            }
            _ => {
                let words = self.subst_words(&cmd.words);
                match words {
                    Ok(words) => self.invoke(&words),
                    Err(e) => Err(e),
                }
            }
        };
        result.map_err(|f| with_line(f, cmd.line))
    }

    pub(crate) fn subst_words(&mut self, words: &[WordNode]) -> Result<Vec<String>, Flow> {
        words.iter().map(|w| self.subst_word(w)).collect()
    }

    pub(crate) fn subst_word(&mut self, word: &WordNode) -> CmdResult {
        match &word.word {
            Word::Braced(text) => Ok(text.clone()),
            Word::Subst(parts) => self.subst_parts(parts),
        }
    }

    pub(crate) fn subst_parts(&mut self, parts: &[Part]) -> CmdResult {
        if let [Part::Lit(s)] = parts {
            return Ok(s.clone());
        }
        let mut out = String::new();
        for part in parts {
            match part {
                Part::Lit(s) => out.push_str(s),
                Part::Var { name, index } => {
                    let key = match index {
                        Some(parts) => Some(self.subst_parts(parts)?),
                        None => None,
                    };
                    out.push_str(&self.get_var(name, key.as_deref())?);
                }
                Part::Cmd(script) => {
                    let script = Arc::clone(script);
                    out.push_str(&self.eval_script(&script)?);
                }
            }
        }
        Ok(out)
    }

    /// Calls the command named by `words[0]`.
    pub(crate) fn invoke(&mut self, words: &[String]) -> CmdResult {
        let name = words[0].as_str();
        if let Some(proc) = self.procs.get(name).cloned() {
            return self.call_proc(name, &proc, &words[1..]);
        }
        match self.builtins.get(name).copied() {
            Some(f) => {
                self.enter()?;
                let r = f(self, words);
                self.depth -= 1;
                r
            }
            None => Err(Flow::error(format!("invalid command name \"{name}\""))),
        }
    }

    fn call_proc(&mut self, name: &str, proc: &Proc, args: &[String]) -> CmdResult {
        let mut frame = Frame::default();
        let mut rest = args.iter();
        for (i, (param, default)) in proc.params.iter().enumerate() {
            if param == "args" && i + 1 == proc.params.len() {
                let remaining: Vec<&String> = rest.by_ref().collect();
                frame.vars.insert("args".into(), Var::Scalar(list::join(&remaining)));
                break;
            }
            let value = match (rest.next(), default) {
                (Some(v), _) => v.clone(),
                (None, Some(d)) => d.clone(),
                (None, None) => return Err(proc_usage(name, proc)),
            };
            frame.vars.insert(param.clone(), Var::Scalar(value));
        }
        if rest.next().is_some() {
            return Err(proc_usage(name, proc));
        }
        self.enter()?;
        self.frames.push(frame);
        let result = self.eval_source(&proc.body);
        self.frames.pop();
        self.depth -= 1;
        match result {
            Ok(v) | Err(Flow::Return(v)) => Ok(v),
            Err(Flow::Error(e)) => Err(Flow::Error(e)),
            Err(other) => Err(Flow::Error(other.into_error())),
        }
    }

    pub(crate) fn define_proc(&mut self, name: &str, params: Vec<(String, Option<String>)>, body: String) {
        self.procs.insert(name.to_string(), Arc::new(Proc { params, body }));
    }

    fn lookup(&self, name: &str) -> Option<&Var> {
        let local = self.frames.last().expect("global frame").vars.get(name);
        local.or_else(|| self.frames[0].vars.get(name))
    }

    pub(crate) fn get_var(&self, name: &str, key: Option<&str>) -> CmdResult {
        let shown = display_name(name, key);
        match (self.lookup(name), key) {
            (None, _) => Err(Flow::error(format!("can't read \"{shown}\": no such variable"))),
            (Some(Var::Scalar(v)), None) => Ok(v.clone()),
            (Some(Var::Scalar(_)), Some(_)) => {
                Err(Flow::error(format!("can't read \"{shown}\": variable isn't array")))
            }
            (Some(Var::Array(_)), None) => Err(Flow::error(format!("can't read \"{shown}\": variable is array"))),
            (Some(Var::Array(map)), Some(k)) => map
                .get(k)
                .cloned()
                .ok_or_else(|| Flow::error(format!("can't read \"{shown}\": no such element in array"))),
        }
    }

    /// Reads a variable given as `name` or `name(key)`.
    pub(crate) fn read_var(&self, full: &str) -> CmdResult {
        let (name, key) = split_var_name(full);
        self.get_var(name, key)
    }

    pub(crate) fn var_exists(&self, full: &str) -> bool {
        self.read_var(full).is_ok()
    }

    /// Writes a variable given as `name` or `name(key)` in the current frame.
    pub(crate) fn write_var(&mut self, full: &str, value: String) -> CmdResult {
        let (name, key) = split_var_name(full);
        let frame = self.frames.last_mut().expect("global frame");
        match key {
            None => match frame.vars.get_mut(name) {
                Some(Var::Array(_)) => return Err(Flow::error(format!("can't set \"{full}\": variable is array"))),
                Some(Var::Scalar(v)) => *v = value.clone(),
                None => {
                    frame.vars.insert(name.to_string(), Var::Scalar(value.clone()));
                }
            },
            Some(k) => {
                let entry = frame.vars.entry(name.to_string()).or_insert_with(|| Var::Array(BTreeMap::new()));
                match entry {
                    Var::Array(map) => {
                        map.insert(k.to_string(), value.clone());
                    }
                    Var::Scalar(_) => return Err(Flow::error(format!("can't set \"{full}\": variable isn't array"))),
                }
            }
        }
        Ok(value)
    }

    pub(crate) fn write_out(&self, text: &str) -> Result<(), Flow> {
        let mut out = self.out.lock().map_err(|_| Flow::error("output sink poisoned"))?;
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Flow::error(format!("error writing output: {e}")))
    }

    pub(crate) fn regex(&mut self, pattern: &str, nocase: bool) -> Result<regex::Regex, Flow> {
        let key = (pattern.to_string(), nocase);
        if let Some(re) = self.regex_cache.get(&key) {
            return Ok(re.clone());
        }
        let re = regex::RegexBuilder::new(pattern)
            .case_insensitive(nocase)
            .build()
            .map_err(|e| Flow::error(format!("couldn't compile regular expression pattern: {e}")))?;
        if self.regex_cache.len() >= SCRIPT_CACHE_LIMIT {
            self.regex_cache.clear();
        }
        self.regex_cache.insert(key, re.clone());
        Ok(re)
    }
}

fn proc_usage(name: &str, proc: &Proc) -> Flow {
    let mut usage = name.to_string();
    for (param, default) in &proc.params {
        match (param.as_str(), default) {
            ("args", _) => usage.push_str(" ?arg ...?"),
            (p, Some(_)) => usage.push_str(&format!(" ?{p}?")),
            (p, None) => usage.push_str(&format!(" {p}")),
        }
    }
    Flow::error(format!("wrong # args: should be \"{usage}\""))
}

fn with_line(flow: Flow, line: usize) -> Flow {
    match flow {
        Flow::Error(mut e) => {
            e.line.get_or_insert(line);
            Flow::Error(e)
        }
        other => other,
    }
}

pub(crate) fn usage(form: &str) -> Flow {
    Flow::error(format!("wrong # args: should be \"{form}\""))
}
