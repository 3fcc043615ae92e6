//! The three applications: WebGrep, link annotation and WebCopy.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::time::{Duration, Instant};

use regex::RegexBuilder;
use thiserror::Error;
use url::Url;

use crate::dtd::Dtd;
use crate::iterate::{Filter, Order, TreeIterator};
use crate::net::{resolve_url, HttpClient, NetError};
use crate::parser::parse;
use crate::tasks::{TaskError, TaskId, TaskRegistry, TaskStatus, Work};
use crate::tree::{DetachedTree, NodeContent, NodeId, TagTree, TreeError};

/// Per-page fetch timeout used by WebGrep unless overridden.
pub const DEFAULT_GREP_TIMEOUT: Duration = Duration::from_millis(10_000);
/// Concurrent fetches per level in parallel mode.
pub const PARALLEL_FAN_OUT: usize = 8;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("invalid start URL `{0}`")]
    StartUrl(String),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct GrepOptions {
    pub timeout: Duration,
    /// Fetch each level with up to [`PARALLEL_FAN_OUT`] concurrent tasks.
    pub parallel: bool,
    /// Follow hrefs exactly as written instead of resolving them.
    pub raw_hrefs: bool,
}

impl Default for GrepOptions {
    fn default() -> Self {
        GrepOptions { timeout: DEFAULT_GREP_TIMEOUT, parallel: false, raw_hrefs: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GrepResult {
    /// Matching pages in crawl order.
    pub matches: Vec<String>,
    /// Pages fetched successfully.
    pub visited: usize,
    /// Pages that errored or timed out.
    pub failed: Vec<String>,
}

/// A fetched page: the URL it ended up at (after redirects) and its body.
struct Page {
    final_url: String,
    body: String,
}

fn fetch_work(client: &HttpClient, url: &str) -> Work {
    let client = client.clone();
    let url = url.to_string();
    Box::new(move |_| client.get(&url, None, &[]).map(|r| format!("{}\n{}", r.url, r.body)).map_err(|e| e.to_string()))
}

fn unpack(result: String) -> Page {
    let (final_url, body) = result.split_once('\n').unwrap_or((&result, ""));
    Page { final_url: final_url.to_string(), body: body.to_string() }
}

/// Waits for a task until `deadline`, then destroys it.
fn settle(tasks: &TaskRegistry, id: TaskId, deadline: Instant) -> Result<Page, String> {
    let left = deadline.saturating_duration_since(Instant::now());
    let outcome = match tasks.wait(id, Some(left)) {
        Ok(TaskStatus::Done) => tasks.result(id).map(unpack).map_err(|e| e.to_string()),
        Ok(TaskStatus::Fail) => Err(tasks.failure(id).unwrap_or_default()),
        Ok(_) => Err("timeout".to_string()),
        Err(e) => Err(e.to_string()),
    };
    let _ = tasks.destroy(id);
    outcome
}

/// Fetches one URL as a task bounded by `timeout`.
fn fetch_with_timeout(client: &HttpClient, tasks: &TaskRegistry, url: &str, timeout: Duration) -> Result<Page, String> {
    let deadline = Instant::now() + timeout;
    let id = tasks.spawn(fetch_work(client, url)).map_err(|e| e.to_string())?;
    settle(tasks, id, deadline)
}

/// Fetches a level's URLs, results in input order.
fn fetch_level(
    client: &HttpClient,
    tasks: &TaskRegistry,
    urls: &[String],
    opts: &GrepOptions,
) -> Vec<Result<Page, String>> {
    if !opts.parallel {
        return urls.iter().map(|u| fetch_with_timeout(client, tasks, u, opts.timeout)).collect();
    }
    let mut out = Vec::with_capacity(urls.len());
    for chunk in urls.chunks(PARALLEL_FAN_OUT) {
        let deadline = Instant::now() + opts.timeout;
        let spawned: Vec<_> = chunk.iter().map(|u| tasks.spawn(fetch_work(client, u))).collect();
        for id in spawned {
            out.push(match id {
                Ok(id) => settle(tasks, id, deadline),
                Err(e) => Err(e.to_string()),
            });
        }
    }
    out
}

/// Href values of the `a` elements of a tree, in document order. Anchors
/// without an href yield `None`.
pub fn anchor_hrefs(tree: &TagTree) -> Vec<(NodeId, Option<String>)> {
    let it = TreeIterator::new(tree, tree.root(), Order::Dfs, Filter::Tag).expect("root is valid");
    it.filter_map(|n| {
        let tag = tree.tag(n).ok().flatten()?;
        (tag.name() == "a").then(|| (n, tag.attrib("href").map(str::to_string)))
    })
    .collect()
}

/// Searches for `pattern` (case-insensitively) in pages fewer than `depth`
/// links away from `start`, crawling level by level. Each URL is fetched at
/// most once.
pub fn webgrep(
    client: &HttpClient,
    tasks: &TaskRegistry,
    start: &str,
    depth: usize,
    pattern: &str,
    opts: &GrepOptions,
) -> Result<GrepResult, AppError> {
    let re = RegexBuilder::new(pattern).case_insensitive(true).build()?;
    let dtd = Dtd::frameset();
    let mut result = GrepResult::default();
    let mut seen: HashSet<String> = HashSet::from([start.to_string()]);
    let mut level = vec![start.to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        let pages = fetch_level(client, tasks, &level, opts);
        for (url, page) in level.iter().zip(pages) {
            let Ok(page) = page else {
                result.failed.push(url.clone());
                continue;
            };
            result.visited += 1;
            let tree = parse(&dtd, &page.body);
            for (_, href) in anchor_hrefs(&tree) {
                let link = if opts.raw_hrefs {
                    href.unwrap_or_default()
                } else {
                    match href.and_then(|h| resolve_url(&page.final_url, &h)) {
                        Some(link) => link,
                        None => continue,
                    }
                };
                if seen.insert(link.clone()) {
                    next.push(link);
                }
            }
            if re.is_match(&page.body) {
                result.matches.push(url.clone());
            }
        }
        level = next;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Broken,
    /// The href does not resolve to an http(s) URL.
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "VALID",
            Verdict::Broken => "BROKEN",
            Verdict::Skipped => "SKIPPED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkEntry {
    pub href: String,
    pub resolved: Option<String>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub page_url: String,
    /// One entry per anchor with an href, in document order.
    pub links: Vec<LinkEntry>,
    pub annotated_html: String,
}

impl ValidationReport {
    /// Lines of the form `VERDICT <resolved-url or -> <href>`.
    pub fn lines(&self) -> Vec<String> {
        self.links
            .iter()
            .map(|l| format!("{} {} {}", l.verdict, l.resolved.as_deref().unwrap_or("-"), l.href))
            .collect()
    }

    pub fn broken(&self) -> usize {
        self.links.iter().filter(|l| l.verdict == Verdict::Broken).count()
    }
}

/// Wraps `node` in a new `strike` element at its current position.
pub fn strike_out(tree: &mut TagTree, node: NodeId) -> Result<NodeId, TreeError> {
    let parent = tree.parent(node)?.ok_or(TreeError::DetachRoot)?;
    let index = tree.index_in_parent(node)?.expect("has parent");
    let strike = DetachedTree::new(NodeContent::element("strike")?)?;
    let strike = tree.paste(parent, index, strike)?;
    tree.move_node(node, strike, 0)?;
    Ok(strike)
}

/// Validates every anchor of a page (one task per distinct URL) and strikes
/// out the broken ones.
pub fn annotate_links(client: &HttpClient, tasks: &TaskRegistry, page_url: &str) -> Result<ValidationReport, AppError> {
    let page = client.get(page_url, None, &[])?;
    let mut tree = parse(&Dtd::frameset(), &page.body);
    let anchors: Vec<(NodeId, String, Option<String>)> = anchor_hrefs(&tree)
        .into_iter()
        .filter_map(|(n, href)| href.map(|h| (n, h)))
        .map(|(n, h)| {
            let resolved = resolve_url(&page.url, &h);
            (n, h, resolved)
        })
        .collect();

    let mut pending: BTreeMap<String, Option<TaskId>> = BTreeMap::new();
    for (_, _, resolved) in &anchors {
        if let Some(url) = resolved {
            if !pending.contains_key(url) {
                let client = client.clone();
                let target = url.clone();
                let work: Work = Box::new(move |_| Ok(if client.validate_link(&target) { "1" } else { "0" }.into()));
                pending.insert(url.clone(), tasks.spawn(work).ok());
            }
        }
    }
    let mut valid: HashMap<String, bool> = HashMap::new();
    for (url, id) in pending {
        let ok = match id {
            Some(id) => {
                let ok = tasks.wait(id, None).ok() == Some(TaskStatus::Done)
                    && tasks.result(id).ok().as_deref() == Some("1");
                let _ = tasks.destroy(id);
                ok
            }
            None => client.validate_link(&url),
        };
        valid.insert(url, ok);
    }

    let mut links = Vec::with_capacity(anchors.len());
    for (node, href, resolved) in anchors {
        let verdict = match &resolved {
            None => Verdict::Skipped,
            Some(url) if valid[url] => Verdict::Valid,
            Some(_) => Verdict::Broken,
        };
        if verdict == Verdict::Broken {
            strike_out(&mut tree, node)?;
        }
        links.push(LinkEntry { href, resolved, verdict });
    }
    Ok(ValidationReport { page_url: page_url.to_string(), links, annotated_html: tree.to_html() })
}

#[derive(Debug, Clone, Default)]
pub struct CopyReport {
    /// Saved pages: source URL and the file written.
    pub written: Vec<(String, PathBuf)>,
    pub failed: Vec<String>,
}

fn fnv1a(bytes: &[u8]) -> u32 {
    let mut hash: u32 = 0x811c_9dc5;
    for &b in bytes {
        hash ^= u32::from(b);
        hash = hash.wrapping_mul(0x0100_0193);
    }
    hash
}

/// Local file path (relative to the output directory) for a page URL.
/// `/a/b.html` maps to `a/b.html`, a trailing `/` to `index.html`, and a
/// query string is hashed into the file name.
pub fn local_path(url: &Url) -> PathBuf {
    let mut segments: Vec<String> = url
        .path_segments()
        .map(|s| {
            s.map(|seg| percent_encoding::percent_decode_str(seg).decode_utf8_lossy().into_owned())
                .filter(|seg| !seg.is_empty() && seg != "." && seg != "..")
                .collect()
        })
        .unwrap_or_default();
    if url.path().ends_with('/') || segments.is_empty() {
        segments.push("index.html".to_string());
    }
    if let Some(query) = url.query() {
        let last = segments.pop().expect("non-empty");
        let tag = format!("{:08x}", fnv1a(query.as_bytes()));
        let renamed = match last.rsplit_once('.') {
            Some((stem, ext)) if !stem.is_empty() => format!("{stem}_{tag}.{ext}"),
            _ => format!("{last}_{tag}"),
        };
        segments.push(renamed);
    }
    segments.iter().collect()
}

/// Path of `to` relative to the directory containing `from`.
fn relative_path(from: &Path, to: &Path) -> String {
    let from_dir: Vec<Component> = from.parent().map(|p| p.components().collect()).unwrap_or_default();
    let to_parts: Vec<Component> = to.components().collect();
    let common = from_dir.iter().zip(&to_parts).take_while(|(a, b)| a == b).count();
    let mut parts: Vec<String> = vec!["..".to_string(); from_dir.len() - common];
    parts.extend(to_parts[common..].iter().map(|c| c.as_os_str().to_string_lossy().into_owned()));
    parts.join("/")
}

fn same_site(a: &Url, b: &Url) -> bool {
    a.scheme() == b.scheme() && a.host_str() == b.host_str() && a.port_or_known_default() == b.port_or_known_default()
}

/// Mirrors same-host pages fewer than `depth` links away from `start` into
/// `out_dir`. Links to saved pages become relative local paths; other
/// relative links become absolute URLs so nothing in the mirror dangles.
pub fn webcopy(client: &HttpClient, start: &str, depth: usize, out_dir: &Path) -> Result<CopyReport, AppError> {
    let start_url = Url::parse(start).map_err(|_| AppError::StartUrl(start.to_string()))?;
    let dtd = Dtd::frameset();
    let mut report = CopyReport::default();
    let mut pages: Vec<(String, Page)> = Vec::new();
    let mut seen: HashSet<String> = HashSet::from([start.to_string()]);
    let mut level = vec![start.to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for url in &level {
            let page = match client.get(url, None, &[]) {
                Ok(resp) => Page { final_url: resp.url, body: resp.body },
                Err(_) => {
                    report.failed.push(url.clone());
                    continue;
                }
            };
            let tree = parse(&dtd, &page.body);
            for (_, href) in anchor_hrefs(&tree) {
                let Some(link) = href.and_then(|h| resolve_url(&page.final_url, &h)) else { continue };
                let on_site = Url::parse(&link).is_ok_and(|u| same_site(&u, &start_url));
                if on_site && seen.insert(link.clone()) {
                    next.push(link);
                }
            }
            pages.push((url.clone(), page));
        }
        level = next;
    }

    let saved: HashMap<String, PathBuf> =
        pages.iter().filter_map(|(url, _)| Url::parse(url).ok().map(|u| (url.clone(), local_path(&u)))).collect();
    let local_files: HashSet<&PathBuf> = saved.values().collect();
    let mut taken: HashSet<&PathBuf> = HashSet::new();
    for (url, page) in &pages {
        let here = &saved[url];
        // `/` and `/index.html` land on the same file; the first one wins.
        if !taken.insert(here) {
            continue;
        }
        let mut tree = parse(&dtd, &page.body);
        let mut rewrites = 0;
        for (node, href) in anchor_hrefs(&tree) {
            let Some(href) = href else { continue };
            let Some(target) = resolve_url(&page.final_url, &href) else { continue };
            let local = Url::parse(&target)
                .ok()
                .filter(|u| same_site(u, &start_url))
                .map(|u| local_path(&u))
                .filter(|p| local_files.contains(p));
            let rewritten = match local {
                Some(local) => {
                    let fragment = href.split_once('#').map(|(_, f)| format!("#{f}")).unwrap_or_default();
                    format!("{}{fragment}", relative_path(here, &local))
                }
                // Not mirrored: point at the live page instead of a missing file.
                None if target != href => target,
                None => continue,
            };
            if let Some(tag) = tree.tag_mut(node)? {
                tag.set_attrib("href", rewritten);
                rewrites += 1;
            }
        }
        let html = if rewrites > 0 { tree.to_html() } else { page.body.clone() };
        let path = out_dir.join(here);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|source| AppError::Write { path: dir.to_path_buf(), source })?;
        }
        fs::write(&path, html).map_err(|source| AppError::Write { path: path.clone(), source })?;
        report.written.push((url.clone(), path));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn url(s: &str) -> Url {
        Url::parse(s).unwrap()
    }

    #[test]
    fn local_path_mapping() {
        assert_eq!(local_path(&url("http://h/a/b.html")), PathBuf::from("a/b.html"));
        assert_eq!(local_path(&url("http://h/")), PathBuf::from("index.html"));
        assert_eq!(local_path(&url("http://h/docs/")), PathBuf::from("docs/index.html"));
        let q1 = local_path(&url("http://h/bin/query?p=1"));
        let q2 = local_path(&url("http://h/bin/query?p=2"));
        assert_ne!(q1, q2);
        assert!(q1.starts_with("bin"));
        assert!(local_path(&url("http://h/x.html?a=1")).to_string_lossy().ends_with(".html"));
        assert_eq!(local_path(&url("http://h/a%20b.html")), PathBuf::from("a b.html"));
    }

    #[test]
    fn relative_paths() {
        assert_eq!(relative_path(Path::new("index.html"), Path::new("a/b.html")), "a/b.html");
        assert_eq!(relative_path(Path::new("a/b.html"), Path::new("index.html")), "../index.html");
        assert_eq!(relative_path(Path::new("a/b.html"), Path::new("a/c.html")), "c.html");
        assert_eq!(relative_path(Path::new("a/x/b.html"), Path::new("a/y/c.html")), "../y/c.html");
    }

    #[test]
    fn strike_wraps_in_place() {
        let mut tree = parse(&Dtd::frameset(), r#"<p>x<a href="d">dead</a>y</p>"#);
        let (a, _) = anchor_hrefs(&tree)[0].clone();
        strike_out(&mut tree, a).unwrap();
        assert_eq!(tree.to_html(), r#"<p>x<strike><a href="d">dead</a></strike>y</p>"#);
        tree.audit().unwrap();
    }

    #[test]
    fn anchors_in_document_order() {
        let tree = parse(&Dtd::frameset(), r#"<A HREF="1">x</A><div><a name=n>y</a><a href=2>z</a></div>"#);
        let hrefs: Vec<_> = anchor_hrefs(&tree).into_iter().map(|(_, h)| h).collect();
        assert_eq!(hrefs, [Some("1".into()), None, Some("2".into())]);
    }

    #[test]
    fn bad_pattern_is_an_error() {
        let err =
            webgrep(&HttpClient::new(), &TaskRegistry::new(), "http://127.0.0.1:1/", 1, "(", &GrepOptions::default());
        assert!(matches!(err, Err(AppError::Pattern(_))));
    }

    #[test]
    fn depth_zero_fetches_nothing() {
        let r =
            webgrep(&HttpClient::new(), &TaskRegistry::new(), "http://127.0.0.1:1/", 0, "x", &GrepOptions::default())
                .unwrap();
        assert_eq!(r, GrepResult::default());
    }
}
