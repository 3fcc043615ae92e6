//! A deterministic HTTP server for tests and demos.
//!
//! Files under the document root are served with status 200. Paths listed in
//! an override table answer as scripted instead: fixed statuses, redirects,
//! delayed responses, or an echo of the request. Every request is logged in
//! arrival order.
//!
//! Override table format, one entry per line (`#` starts a comment):
//!
//! ```text
//! /missing        404
//! /redirect-301   301  /hello.html
//! /slow           200  5000
//! /echo-form      200  ECHO
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use thiserror::Error;
use tiny_http::{Header, Response, Server};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("document root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("cannot bind fixture server on port {port}: {reason}")]
    Bind { port: u16, reason: String },
    #[error("override table line {line}: {message}")]
    Override { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Serve the file at the path (if any) with the scripted status.
    Plain,
    Location(String),
    /// Wait this long before answering; a `ms=` query parameter overrides it.
    Delay(u64),
    /// Answer with the request body, or the query string for bodiless requests.
    Echo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scripted {
    pub status: u16,
    pub action: Action,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides(BTreeMap<String, Scripted>);

impl Overrides {
    pub fn new() -> Self {
        Overrides(BTreeMap::new())
    }

    /// `/slow` (delay from `ms=`, default 1000) and `/echo-form`.
    pub fn builtin() -> Self {
        let mut o = Overrides::new();
        o.insert("/slow", 200, Action::Delay(1000));
        o.insert("/echo-form", 200, Action::Echo);
        o
    }

    pub fn insert(&mut self, path: &str, status: u16, action: Action) {
        self.0.insert(path.to_string(), Scripted { status, action });
    }

    pub fn get(&self, path: &str) -> Option<&Scripted> {
        self.0.get(path)
    }

    /// Adds the entries of `other`, replacing any with the same path.
    pub fn extend(&mut self, other: Overrides) {
        self.0.extend(other.0);
    }

    pub fn parse(table: &str) -> Result<Overrides, FixtureError> {
        let mut out = Overrides::new();
        for (idx, raw) in table.lines().enumerate() {
            let line = idx + 1;
            let text = raw.split('#').next().unwrap_or("");
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |message: String| FixtureError::Override { line, message };
            if fields.len() < 2 || fields.len() > 3 {
                return Err(err("expected PATH STATUS [LOCATION|DELAY_MS|ECHO]".into()));
            }
            let path = fields[0];
            if !path.starts_with('/') {
                return Err(err(format!("path `{path}` must start with /")));
            }
            let status: u16 = fields[1]
                .parse()
                .ok()
                .filter(|s| (100..=599).contains(s))
                .ok_or_else(|| err(format!("bad status `{}`", fields[1])))?;
            let action = match fields.get(2) {
                None => Action::Plain,
                Some(&"ECHO") => Action::Echo,
                Some(arg) if (300..400).contains(&status) => Action::Location(arg.to_string()),
                Some(arg) => Action::Delay(arg.parse().map_err(|_| err(format!("bad delay `{arg}`")))?),
            };
            if (300..400).contains(&status) && !matches!(action, Action::Location(_)) {
                return Err(err(format!("redirect status {status} needs a LOCATION")));
            }
            out.insert(path, status, action);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedRequest {
    pub method: String,
    /// Path plus query, exactly as requested.
    pub target: String,
}

struct Shared {
    root: PathBuf,
    overrides: RwLock<Overrides>,
    log: Mutex<Vec<LoggedRequest>>,
}

/// Running server; stops when dropped.
pub struct FixtureServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    server: Arc<Server>,
    accept: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// Serves `root` on 127.0.0.1:`port` (0 picks a free port). The builtin
    /// overrides are active unless `overrides` replaces them.
    pub fn start(root: impl Into<PathBuf>, port: u16, overrides: Overrides) -> Result<FixtureServer, FixtureError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(FixtureError::MissingRoot(root));
        }
        let server =
            Server::http(("127.0.0.1", port)).map_err(|e| FixtureError::Bind { port, reason: e.to_string() })?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| FixtureError::Bind { port, reason: "not an IP listener".into() })?;
        let mut table = Overrides::builtin();
        table.extend(overrides);
        let shared = Arc::new(Shared { root, overrides: RwLock::new(table), log: Mutex::new(Vec::new()) });
        let server = Arc::new(server);
        let accept = {
            let server = Arc::clone(&server);
            let shared = Arc::clone(&shared);
            thread::Builder::new().name("fixture-accept".into()).spawn(move || {
                while let Ok(request) = server.recv() {
                    shared.log.lock().expect("log lock").push(LoggedRequest {
                        method: request.method().as_str().to_string(),
                        target: request.url().to_string(),
                    });
                    let shared = Arc::clone(&shared);
                    thread::spawn(move || respond(&shared, request));
                }
            })?
        };
        Ok(FixtureServer { addr, shared, server, accept: Some(accept) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://127.0.0.1:PORT`
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url())
    }

    pub fn root(&self) -> &Path {
        &self.shared.root
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.shared.log.lock().expect("log lock").clone()
    }

    /// Number of logged requests whose target equals `target`.
    pub fn hits(&self, target: &str) -> usize {
        self.shared.log.lock().expect("log lock").iter().filter(|r| r.target == target).count()
    }

    pub fn clear_log(&self) {
        self.shared.log.lock().expect("log lock").clear();
    }

    pub fn set_override(&self, path: &str, status: u16, action: Action) {
        self.shared.overrides.write().expect("overrides lock").insert(path, status, action);
    }

    /// Blocks until the server stops (it only stops when dropped elsewhere).
    pub fn wait(mut self) {
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("html" | "htm") | None => "text/html; charset=utf-8",
        Some("txt" | "ws" | "dtd") => "text/plain; charset=utf-8",
        Some("css") => "text/css",
        Some("js") => "application/javascript",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some(_) => "application/octet-stream",
    }
}

/// Maps a request path to a file under root, refusing to escape it.
fn local_file(root: &Path, path: &str) -> Option<PathBuf> {
    let relative = Path::new(path.trim_start_matches('/'));
    if relative.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut file = root.join(relative);
    if path.ends_with('/') || file.is_dir() {
        file.push("index.html");
    }
    file.is_file().then_some(file)
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        301 => "Moved Permanently",
        302 => "Found",
        303 => "See Other",
        307 => "Temporary Redirect",
        308 => "Permanent Redirect",
        400 => "Bad Request",
        403 => "Forbidden",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}

fn header(name: &str, value: &str) -> Header {
    Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("valid header")
}

fn respond(shared: &Shared, mut request: tiny_http::Request) {
    let target = request.url().to_string();
    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p.to_string(), q.to_string()),
        None => (target.clone(), String::new()),
    };
    let scripted = shared.overrides.read().expect("overrides lock").get(&path).cloned();

    let plain = |status: u16| {
        Response::from_string(format!("{status} {}\n", reason(status)))
            .with_status_code(status)
            .with_header(header("Content-Type", "text/plain; charset=utf-8"))
    };
    let serve_file = |status: u16| match local_file(&shared.root, &path) {
        Some(file) => match fs::read(&file) {
            Ok(bytes) => Response::from_data(bytes)
                .with_status_code(status)
                .with_header(header("Content-Type", content_type(&file))),
            Err(_) => plain(500),
        },
        None if status == 200 => plain(404),
        None => plain(status),
    };

    let response = match scripted {
        None => serve_file(200),
        Some(Scripted { status, action: Action::Plain }) => serve_file(status),
        Some(Scripted { status, action: Action::Location(location) }) => {
            Response::from_string("").with_status_code(status).with_header(header("Location", &location))
        }
        Some(Scripted { status, action: Action::Delay(default_ms) }) => {
            let ms = query
                .split('&')
                .find_map(|kv| kv.strip_prefix("ms="))
                .and_then(|v| v.parse().ok())
                .unwrap_or(default_ms);
            thread::sleep(Duration::from_millis(ms));
            match local_file(&shared.root, &path) {
                Some(_) => serve_file(status),
                None => Response::from_string(format!("slept {ms} ms\n"))
                    .with_status_code(status)
                    .with_header(header("Content-Type", "text/plain; charset=utf-8")),
            }
        }
        Some(Scripted { status, action: Action::Echo }) => {
            let mut body = String::new();
            let _ = request.as_reader().read_to_string(&mut body);
            if body.is_empty() && request.method() == &tiny_http::Method::Get {
                body = query;
            }
            Response::from_string(body)
                .with_status_code(status)
                .with_header(header("Content-Type", "text/plain; charset=utf-8"))
        }
    };
    let _ = request.respond(response);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_table_parsing() {
        let table = "# comment\n/missing 404\n/r 301 /hello.html\n\n/slow 200 5000\n/echo 200 ECHO\n";
        let o = Overrides::parse(table).unwrap();
        assert_eq!(o.get("/missing"), Some(&Scripted { status: 404, action: Action::Plain }));
        assert_eq!(o.get("/r").unwrap().action, Action::Location("/hello.html".into()));
        assert_eq!(o.get("/slow").unwrap().action, Action::Delay(5000));
        assert_eq!(o.get("/echo").unwrap().action, Action::Echo);
    }

    #[test]
    fn override_table_errors() {
        for (table, line) in [("/x", 1), ("/ok 200\nx 200", 2), ("/x abc", 1), ("/x 301", 1), ("/x 200 soon", 1)] {
            match Overrides::parse(table) {
                Err(FixtureError::Override { line: l, .. }) => assert_eq!(l, line, "{table}"),
                other => panic!("{table}: {other:?}"),
            }
        }
    }

    #[test]
    fn local_paths_stay_under_root() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.html"), "a").unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/index.html"), "i").unwrap();
        assert!(local_file(dir.path(), "/a.html").is_some());
        assert_eq!(local_file(dir.path(), "/sub/").unwrap(), dir.path().join("sub/index.html"));
        assert_eq!(local_file(dir.path(), "/sub").unwrap(), dir.path().join("sub/index.html"));
        assert!(local_file(dir.path(), "/../etc/passwd").is_none());
        assert!(local_file(dir.path(), "/nope.html").is_none());
    }
}
