//! `wsh`: run webshell scripts, or the bundled applications directly.

use std::io::{self, BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use webshell::apps::{self, GrepOptions};
use webshell::fixture::{FixtureServer, Overrides};
use webshell::interp::syntax::parse_script;
use webshell::{HttpClient, Interp, TaskRegistry};

#[derive(Parser)]
#[command(name = "wsh", version, about = "Scriptable web retrieval and HTML tag-tree manipulation")]
#[command(args_conflicts_with_subcommands = true, allow_external_subcommands = true)]
#[command(
    after_help = "With no command, reads script commands from standard input.\n`wsh FILE [ARGS...]` runs a script with ARGS bound to `argv`."
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Search pages reachable from a URL for a pattern.
    Webgrep {
        #[arg(long)]
        url: String,
        /// Pages fewer than this many links from the start are searched.
        #[arg(long)]
        depth: usize,
        /// Regular expression, matched case-insensitively.
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        parallel: bool,
        /// Follow hrefs as written instead of resolving them against the page.
        #[arg(long)]
        raw_hrefs: bool,
        /// Per-page timeout in milliseconds.
        #[arg(long, default_value_t = 10_000)]
        timeout: u64,
    },
    /// Check every link on a page and strike out the broken ones.
    Linkcheck {
        #[arg(long)]
        url: String,
        /// Write the annotated page here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mirror a site to a directory, rewriting links to the local copies.
    Webcopy {
        #[arg(long)]
        url: String,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a directory over HTTP with the test overrides.
    ServeFixtures {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Extra override table (`/path STATUS [TARGET|DELAY_MS|ECHO]` per line).
        #[arg(long)]
        overrides: Option<PathBuf>,
    },
    #[command(external_subcommand)]
    Script(Vec<String>),
}

const OK: u8 = 0;
const FAILURE: u8 = 1;

fn client() -> HttpClient {
    match std::env::var("WEBSHELL_TIMEOUT_MS").ok().and_then(|v| v.parse::<u64>().ok()) {
        Some(ms) => HttpClient::with_timeout(Duration::from_millis(ms)),
        None => HttpClient::new(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        None => repl(),
        Some(Command::Script(args)) => run_script(&args),
        Some(Command::Webgrep { url, depth, pattern, parallel, raw_hrefs, timeout }) => {
            let opts = GrepOptions { timeout: Duration::from_millis(timeout), parallel, raw_hrefs };
            webgrep(&url, depth, &pattern, &opts)
        }
        Some(Command::Linkcheck { url, out }) => linkcheck(&url, out),
        Some(Command::Webcopy { url, depth, out }) => webcopy(&url, depth, &out),
        Some(Command::ServeFixtures { root, port, overrides }) => serve(root, port, overrides),
    };
    ExitCode::from(code)
}

fn fail(msg: impl std::fmt::Display) -> u8 {
    eprintln!("wsh: {msg}");
    FAILURE
}

fn run_script(args: &[String]) -> u8 {
    let (path, rest) = args.split_first().expect("clap passes the script name");
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => return fail(format!("cannot read {path}: {e}")),
    };
    let mut interp = Interp::new().with_client(client());
    interp.set_argv(rest);
    interp.set_global("argv0", path);
    let result = interp.eval(&source);
    let _ = io::stdout().flush();
    match result {
        Ok(_) => OK,
        Err(e) => fail(format!("{path}: {e}")),
    }
}

fn repl() -> u8 {
    let mut interp = Interp::new().with_client(client());
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut pending = String::new();
    let mut status = OK;
    loop {
        if interactive {
            print!("{}", if pending.is_empty() { "% " } else { "> " });
            let _ = io::stdout().flush();
        }
        let mut line = String::new();
        match stdin.lock().read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => pending.push_str(&line),
            Err(e) => return fail(e),
        }
        if let Err(e) = parse_script(&pending) {
            if e.message.starts_with("missing") {
                continue;
            }
        }
        match interp.eval(&pending) {
            Ok(out) if !out.is_empty() => println!("{out}"),
            Ok(_) => {}
            Err(e) => {
                eprintln!("error: {e}");
                status = FAILURE;
            }
        }
        pending.clear();
    }
    if !pending.trim().is_empty() {
        if let Err(e) = interp.eval(&pending) {
            eprintln!("error: {e}");
            status = FAILURE;
        }
    }
    let _ = io::stdout().flush();
    if interactive {
        OK
    } else {
        status
    }
}

fn webgrep(url: &str, depth: usize, pattern: &str, opts: &GrepOptions) -> u8 {
    let tasks = Arc::new(TaskRegistry::default());
    let result = match apps::webgrep(&client(), &tasks, url, depth, pattern, opts) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let mut out = io::stdout().lock();
    for m in &result.matches {
        let _ = writeln!(out, "{m}");
    }
    let _ = writeln!(
        out,
        "# {} matching, {} fetched, {} failed",
        result.matches.len(),
        result.visited,
        result.failed.len()
    );
    let _ = out.flush();
    if result.failed.iter().any(|f| f == url) {
        return fail(format!("cannot fetch start URL {url}"));
    }
    OK
}

fn linkcheck(url: &str, out: Option<PathBuf>) -> u8 {
    let tasks = TaskRegistry::default();
    let report = match apps::annotate_links(&client(), &tasks, url) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let mut stdout = io::stdout().lock();
    for line in report.lines() {
        let _ = writeln!(stdout, "{line}");
    }
    let _ = stdout.flush();
    if let Some(path) = out {
        if let Err(e) = std::fs::write(&path, &report.annotated_html) {
            return fail(format!("cannot write {}: {e}", path.display()));
        }
    }
    OK
}

fn webcopy(url: &str, depth: usize, out: &std::path::Path) -> u8 {
    let report = match apps::webcopy(&client(), url, depth, out) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let mut stdout = io::stdout().lock();
    for (source, file) in &report.written {
        let _ = writeln!(stdout, "{source} -> {}", file.display());
    }
    let _ = writeln!(stdout, "# {} written, {} failed", report.written.len(), report.failed.len());
    let _ = stdout.flush();
    if depth > 0 && report.written.is_empty() {
        return fail(format!("cannot fetch start URL {url}"));
    }
    OK
}

fn serve(root: PathBuf, port: u16, overrides: Option<PathBuf>) -> u8 {
    let table = match overrides {
        None => Overrides::new(),
        Some(path) => match std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| Overrides::parse(&t).map_err(|e| e.to_string()))
        {
            Ok(t) => t,
            Err(e) => return fail(format!("{}: {e}", path.display())),
        },
    };
    match FixtureServer::start(root, port, table) {
        Ok(server) => {
            println!("serving {} at {}", server.root().display(), server.base_url());
            let _ = io::stdout().flush();
            server.wait();
            OK
        }
        Err(e) => fail(e),
    }
}
