mod common;

use std::fs;
use std::time::Duration;

use common::*;
use webshell::apps::{annotate_links, webcopy, webgrep, GrepOptions, Verdict};
use webshell::fixture::{FixtureServer, Overrides};
use webshell::{HttpClient, TaskRegistry};

fn quick() -> GrepOptions {
    GrepOptions { timeout: Duration::from_millis(300), ..GrepOptions::default() }
}

#[test]
fn webgrep_depth_bounds() {
    let graph = crawl_graph(3);
    let client = HttpClient::new();
    let tasks = TaskRegistry::default();
    for depth in 0..4 {
        let got = webgrep(&client, &tasks, &graph.start, depth, "cnrg", &quick()).unwrap();
        assert_eq!(got.matches, grep_oracle(&graph, depth, "cnrg"), "depth {depth}");
    }
    let none = webgrep(&client, &tasks, &graph.start, 0, "cnrg", &quick()).unwrap();
    assert_eq!(none.visited, 0);
    assert_eq!(tasks.live_count(), 0);
}

#[test]
fn parallel_webgrep_finds_the_same_pages() {
    let graph = crawl_graph(5);
    let client = HttpClient::new();
    let tasks = TaskRegistry::default();
    let serial = webgrep(&client, &tasks, &graph.start, 4, "CNRG", &quick()).unwrap();
    graph.server.clear_log();
    let opts = GrepOptions { parallel: true, ..quick() };
    let parallel = webgrep(&client, &tasks, &graph.start, 4, "CNRG", &opts).unwrap();
    assert_eq!(parallel.matches, serial.matches);
    assert_eq!(parallel.failed.len(), serial.failed.len());
    let log = graph.server.requests();
    let mut targets: Vec<&str> = log.iter().map(|r| r.target.as_str()).collect();
    let total = targets.len();
    targets.sort();
    targets.dedup();
    assert_eq!(targets.len(), total, "a URL was fetched twice");
}

#[test]
fn webgrep_rejects_bad_patterns() {
    let err =
        webgrep(&HttpClient::new(), &TaskRegistry::default(), "http://127.0.0.1:1/", 1, "(", &quick()).unwrap_err();
    assert!(err.to_string().starts_with("invalid pattern"), "{err}");
}

#[test]
fn raw_hrefs_follow_links_as_written() {
    let site = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(site.path(), 0, Overrides::new()).unwrap();
    fs::write(site.path().join("a.html"), "<a href=\"b.html\">b</a> cnrg").unwrap();
    fs::write(site.path().join("b.html"), "cnrg").unwrap();
    let client = HttpClient::new();
    let tasks = TaskRegistry::default();
    let start = server.url("/a.html");
    let resolved = webgrep(&client, &tasks, &start, 2, "cnrg", &quick()).unwrap();
    assert_eq!(resolved.matches, [start.clone(), server.url("/b.html")]);
    let raw = webgrep(&client, &tasks, &start, 2, "cnrg", &GrepOptions { raw_hrefs: true, ..quick() }).unwrap();
    assert_eq!(raw.matches, [start]);
    assert_eq!(raw.failed, ["b.html"]);
}

#[test]
fn link_report_lines() {
    let server = basic_server();
    let report = annotate_links(&HttpClient::new(), &TaskRegistry::default(), &server.url("/cnrg/")).unwrap();
    let lines = report.lines();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("BROKEN ") && lines[0].ends_with("/cnrg/people.html people.html"), "{lines:?}");
    assert!(lines[2].starts_with("BROKEN http://www.cs.cornell.edu/ "), "{lines:?}");
    assert!(report.links.iter().all(|l| l.verdict == Verdict::Broken));
    assert_eq!(report.annotated_html.matches("<strike>").count(), 3);
}

#[test]
fn webcopy_respects_depth_and_site() {
    let server = basic_server();
    let out = tempfile::tempdir().unwrap();
    let report = webcopy(&HttpClient::new(), &server.url("/cnrg/"), 1, out.path()).unwrap();
    assert_eq!(report.written.len(), 1);
    let saved = fs::read_to_string(out.path().join("cnrg/index.html")).unwrap();
    // people.html was not mirrored, so its link now points at the live page.
    assert!(saved.contains(&format!("href=\"{}\"", server.url("/cnrg/people.html"))), "{saved}");
    assert!(saved.contains("href=\"http://www.cs.cornell.edu/\""));
    let empty = webcopy(&HttpClient::new(), &server.url("/cnrg/"), 0, out.path()).unwrap();
    assert!(empty.written.is_empty());
}
