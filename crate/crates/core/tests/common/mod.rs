#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webshell::fixture::{Action, FixtureServer, Overrides};
use webshell::{parse, DetachedTree, Dtd, Filter, NodeId, TagTree};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Fixture server over `tests/fixtures/basic` with its override table.
pub fn basic_server() -> FixtureServer {
    let dir = fixtures_dir();
    let table = fs::read_to_string(dir.join("basic.overrides")).unwrap();
    FixtureServer::start(dir.join("basic"), 0, Overrides::parse(&table).unwrap()).unwrap()
}

pub fn read_fixture(path: &str) -> String {
    fs::read_to_string(fixtures_dir().join(path)).unwrap()
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

/// `(file name, contents)` for every corpus page, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut pages: Vec<(String, String)> = fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "html"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    pages.sort();
    pages
}

pub fn corpus_trees() -> Vec<(String, TagTree)> {
    let dtd = Dtd::frameset();
    corpus().into_iter().map(|(name, html)| (name, parse(&dtd, &html))).collect()
}

/// Preorder by plain recursion.
pub fn dfs_oracle(tree: &TagTree, node: NodeId, filter: Filter, out: &mut Vec<NodeId>) {
    if filter.accepts(tree.content(node).unwrap()) {
        out.push(node);
    }
    for child in tree.children(node).unwrap() {
        dfs_oracle(tree, child, filter, out);
    }
}

/// Level order with an explicit queue.
pub fn bfs_oracle(tree: &TagTree, node: NodeId, filter: Filter) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([node]);
    while let Some(n) = queue.pop_front() {
        if filter.accepts(tree.content(n).unwrap()) {
            out.push(n);
        }
        queue.extend(tree.children(n).unwrap());
    }
    out
}

pub fn all_nodes(tree: &TagTree) -> Vec<NodeId> {
    let mut out = Vec::new();
    dfs_oracle(tree, tree.root(), Filter::Any, &mut out);
    out
}

/// Copies are skipped once the tree and its fragments hold this many nodes.
pub const SURGERY_NODE_CAP: usize = 5_000;

/// Outcome counts from [`random_surgery`].
#[derive(Debug, Default)]
pub struct SurgeryStats {
    pub cuts: usize,
    pub copies: usize,
    pub pastes: usize,
    pub moves: usize,
    pub restores: usize,
}

/// Applies `ops` random valid cut/copy/paste/move operations to `tree`,
/// checking node conservation and the full audit after each one. Some cuts are
/// pasted straight back and must restore the previous dump exactly.
pub fn random_surgery(tree: &mut TagTree, ops: usize, rng: &mut ChaCha8Rng) -> Result<SurgeryStats, String> {
    let mut pool: Vec<DetachedTree> = Vec::new();
    let mut stats = SurgeryStats::default();
    for step in 0..ops {
        let before = tree.len();
        let pooled: usize = pool.iter().map(DetachedTree::len).sum();
        let nodes = all_nodes(tree);
        let non_root: Vec<NodeId> = nodes.iter().copied().filter(|&n| n != tree.root()).collect();
        let elements: Vec<NodeId> = nodes.iter().copied().filter(|&n| tree.content(n).unwrap().is_element()).collect();
        let ctx = |what: &str| format!("step {step} ({what})");
        let mut expected_total = before + pooled;
        match rng.gen_range(0..5) {
            0 if !non_root.is_empty() => {
                let node = non_root[rng.gen_range(0..non_root.len())];
                pool.push(tree.cut(node).map_err(|e| format!("{}: {e}", ctx("cut")))?);
                stats.cuts += 1;
            }
            1 if before + pooled < SURGERY_NODE_CAP => {
                let node = nodes[rng.gen_range(0..nodes.len())];
                let frag = tree.copy(node).map_err(|e| format!("{}: {e}", ctx("copy")))?;
                expected_total += frag.len();
                pool.push(frag);
                stats.copies += 1;
            }
            2 if !pool.is_empty() => {
                let frag = pool.swap_remove(rng.gen_range(0..pool.len()));
                let parent = elements[rng.gen_range(0..elements.len())];
                let index = rng.gen_range(0..=tree.child_count(parent).unwrap());
                tree.paste(parent, index, frag).map_err(|e| format!("{}: {e}", ctx("paste")))?;
                stats.pastes += 1;
            }
            3 if !non_root.is_empty() => {
                let node = non_root[rng.gen_range(0..non_root.len())];
                let targets: Vec<NodeId> =
                    elements.iter().copied().filter(|&p| !tree.is_within(p, node).unwrap()).collect();
                let parent = targets[rng.gen_range(0..targets.len())];
                let index = rng.gen_range(0..=tree.child_count(parent).unwrap());
                tree.move_node(node, parent, index).map_err(|e| format!("{}: {e}", ctx("move")))?;
                if tree.len() != before {
                    return Err(format!("{}: node count changed", ctx("move")));
                }
                stats.moves += 1;
            }
            _ if !non_root.is_empty() => {
                let node = non_root[rng.gen_range(0..non_root.len())];
                let parent = tree.parent(node).unwrap().unwrap();
                let index = tree.index_in_parent(node).unwrap().unwrap();
                let dump = tree.to_html();
                let frag = tree.cut(node).map_err(|e| format!("{}: {e}", ctx("cut for restore")))?;
                tree.paste(parent, index, frag).map_err(|e| format!("{}: {e}", ctx("paste back")))?;
                if tree.to_html() != dump {
                    return Err(format!("{}: paste-back changed the dump", ctx("restore")));
                }
                stats.restores += 1;
            }
            _ => continue,
        }
        let now: usize = tree.len() + pool.iter().map(DetachedTree::len).sum::<usize>();
        if now != expected_total {
            return Err(format!("{}: {now} nodes, expected {expected_total}", ctx("conservation")));
        }
        tree.audit().map_err(|e| format!("{}: audit failed: {e}", ctx("audit")))?;
        for frag in &pool {
            frag.tree().audit().map_err(|e| format!("{}: fragment audit failed: {e}", ctx("audit")))?;
        }
    }
    Ok(stats)
}

/// A crawl graph served from a temp directory. Every href is absolute.
pub struct Graph {
    pub server: FixtureServer,
    pub dir: tempfile::TempDir,
    pub start: String,
    /// Outgoing hrefs per served path, in document order.
    pub links: BTreeMap<String, Vec<String>>,
    /// Paths whose fetch fails or times out.
    pub failing: BTreeSet<String>,
}

impl Graph {
    pub fn url(&self, path: &str) -> String {
        self.server.url(path)
    }
}

/// Slow page delay in the crawl graph.
pub const SLOW_MS: u64 = 12_000;

/// Twenty URLs: eighteen ordinary pages, `/missing.html` (404) and
/// `/slow.html` (answers after [`SLOW_MS`]). Pages link with cycles and
/// duplicates; roughly a third mention the pattern `cnrg` in varying case.
pub fn crawl_graph(seed: u64) -> Graph {
    let dir = tempfile::tempdir().unwrap();
    let mut overrides = Overrides::new();
    overrides.insert("/slow.html", 200, Action::Delay(SLOW_MS));
    let server = FixtureServer::start(dir.path(), 0, overrides).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pages: Vec<String> = (0..18).map(|i| format!("/p{i:02}.html")).collect();
    let mut targets = pages.clone();
    targets.push("/missing.html".into());
    targets.push("/slow.html".into());
    let mut links = BTreeMap::new();
    let words = ["CNRG", "cnrg", "Cnrg"];
    for (i, path) in pages.iter().chain(std::iter::once(&"/slow.html".to_string())).enumerate() {
        let mut out: Vec<String> = Vec::new();
        // A chain guarantees reachability; the rest is random.
        if i + 1 < pages.len() && i % 3 != 2 {
            out.push(pages[i + 1].clone());
        }
        for _ in 0..rng.gen_range(1..4) {
            out.push(targets[rng.gen_range(0..targets.len())].clone());
        }
        if rng.gen_bool(0.3) {
            let dup = out[0].clone();
            out.push(dup);
        }
        if i == 1 {
            out.push("/missing.html".into());
            out.push("/slow.html".into());
        }
        if i == 2 {
            out.push("/p00.html".into());
        }
        let mentions = path == "/slow.html" || rng.gen_bool(0.35);
        let mut body = format!("<html><head><title>page {path}</title></head><body>\n<h1>Page {i}</h1>\n");
        if mentions {
            body.push_str(&format!("<p>Research by the {} group.\n", words[rng.gen_range(0..words.len())]));
        } else {
            body.push_str("<p>Nothing to see here.\n");
        }
        body.push_str("<ul>\n");
        for (k, link) in out.iter().enumerate() {
            body.push_str(&format!("<li><A HREF=\"{}\">link {k}</A>\n", server.url(link)));
        }
        body.push_str("</ul>\n<a name=\"bottom\">end</a>\n</body></html>\n");
        fs::write(dir.path().join(&path[1..]), body).unwrap();
        links.insert(path.clone(), out);
    }
    let failing = BTreeSet::from(["/missing.html".to_string(), "/slow.html".to_string()]);
    let start = server.url("/p00.html");
    Graph { server, dir, start, links, failing }
}

/// Level-by-level crawl over the files on disk, the way `webgrep.ws`
/// walks the web: pages fewer than `depth` links away, each fetched once.
pub fn grep_oracle(graph: &Graph, depth: usize, pattern: &str) -> Vec<String> {
    let re = regex::RegexBuilder::new(pattern).case_insensitive(true).build().unwrap();
    let href = regex::Regex::new(r#"(?i)href="([^"]*)""#).unwrap();
    let base = graph.server.base_url();
    let mut matches = Vec::new();
    let mut seen = BTreeSet::from([graph.start.clone()]);
    let mut level = vec![graph.start.clone()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for url in &level {
            let path = url.strip_prefix(&base).unwrap();
            if graph.failing.contains(path) {
                continue;
            }
            let body = fs::read_to_string(graph.dir.path().join(&path[1..])).unwrap();
            for cap in href.captures_iter(&body) {
                if seen.insert(cap[1].to_string()) {
                    next.push(cap[1].to_string());
                }
            }
            if re.is_match(&body) {
                matches.push(url.clone());
            }
        }
        level = next;
    }
    matches
}

/// Path of the built `wsh` binary.
pub fn wsh() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_wsh"))
}

pub fn scripts_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scripts")
}

/// A bundled script with its example hosts pointed at `base`.
pub fn redirected_script(name: &str, base: &str) -> String {
    fs::read_to_string(scripts_dir().join(name))
        .unwrap()
        .replace("http://www.cs.cornell.edu", base)
        .replace("http://ink.yahoo.com", base)
}
