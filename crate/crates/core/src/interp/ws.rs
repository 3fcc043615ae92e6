//! The `ws::*` commands: retrieval, parsing, tree access and surgery,
//! iterators, tasks and the applications.
//!
//! Objects live in the interpreter and are named by handles: `tree3` is a
//! parsed document (and its `#root` node), `tree3.17` a node inside it,
//! `frag4` a detached fragment. Node content travels as a list:
//! `tag a {{href x.html} checked}`, `text {...}` or `comment {...}`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use super::builtins::split_list;
use super::expr::parse_int;
use super::{list, usage, Builtin, CmdResult, Flow, Interp};
use crate::apps::{self, GrepOptions};
use crate::dtd::Dtd;
use crate::iterate::{Filter, Order, TreeIterator};
use crate::net::{HttpResponse, Method, QueryParams};
use crate::parser::Parser;
use crate::tasks::{with_timeout, TaskError, TaskId, Work, DEFAULT_TIMESLOT};
use crate::tree::{DetachedTree, Direction, NodeContent, NodeId, TagData, TagTree};

enum Doc {
    Tree(TagTree),
    Frag(DetachedTree),
}

impl Doc {
    fn tree(&self) -> &TagTree {
        match self {
            Doc::Tree(t) => t,
            Doc::Frag(f) => f.tree(),
        }
    }

    fn tree_mut(&mut self) -> &mut TagTree {
        match self {
            Doc::Tree(t) => t,
            Doc::Frag(f) => f.tree_mut(),
        }
    }

    fn prefix(&self) -> &'static str {
        match self {
            Doc::Tree(_) => "tree",
            Doc::Frag(_) => "frag",
        }
    }
}

struct Cursor {
    doc: u64,
    prefix: &'static str,
    root: NodeId,
    it: TreeIterator,
}

struct Conn {
    url: String,
    response: Option<HttpResponse>,
}

#[derive(Default)]
pub(super) struct Handles {
    next: u64,
    docs: HashMap<u64, Doc>,
    parsers: HashMap<u64, Parser>,
    iterators: HashMap<u64, Cursor>,
    urls: HashMap<u64, String>,
    streams: HashMap<u64, String>,
    conns: HashMap<u64, Conn>,
}

impl Handles {
    fn fresh(&mut self) -> u64 {
        self.next += 1;
        self.next
    }

    fn add_doc(&mut self, doc: Doc) -> String {
        let id = self.fresh();
        let name = format!("{}{id}", doc.prefix());
        self.docs.insert(id, doc);
        name
    }
}

pub(super) fn register(table: &mut HashMap<&'static str, Builtin>) {
    let commands: &[(&'static str, Builtin)] = &[
        ("ws::url", url_cmd),
        ("ws::stream", stream_cmd),
        ("ws::urlconn", urlconn_cmd),
        ("ws::getpage", getpage),
        ("ws::postpage", postpage),
        ("ws::validate_link", validate_link),
        ("ws::timeout", timeout_cmd),
        ("ws::thread", thread_cmd),
        ("ws::parser", parser_cmd),
        ("ws::parse", parse_cmd),
        ("ws::dump", dump_cmd),
        ("ws::iterator", iterator_cmd),
        ("ws::iterate", iterator_cmd),
        ("ws::node", node_cmd),
        ("ws::tag", tag_cmd),
        ("ws::parent", parent_cmd),
        ("ws::child", child_cmd),
        ("ws::sibling", sibling_cmd),
        ("ws::cut", cut_cmd),
        ("ws::copy", copy_cmd),
        ("ws::paste", paste_cmd),
        ("ws::move", move_cmd),
        ("ws::webgrep", webgrep_cmd),
        ("ws::linkcheck", linkcheck_cmd),
        ("ws::webcopy", webcopy_cmd),
    ];
    table.extend(commands.iter().copied());
}

fn fail(e: impl std::fmt::Display) -> Flow {
    Flow::error(e.to_string())
}

fn bool_result(b: bool) -> CmdResult {
    Ok(if b { "1" } else { "0" }.to_string())
}

fn handle_number(s: &str, prefix: &str) -> Option<u64> {
    s.strip_prefix(prefix)?.parse().ok()
}

fn millis(s: &str) -> Result<Duration, Flow> {
    parse_int(s)
        .and_then(|n| u64::try_from(n).ok())
        .map(Duration::from_millis)
        .ok_or_else(|| Flow::error(format!("expected milliseconds but got \"{s}\"")))
}

fn is_node_handle(s: &str) -> bool {
    let doc = s
        .split_once('.')
        .map_or(s, |(d, i)| if i.bytes().all(|b| b.is_ascii_digit()) && !i.is_empty() { d } else { "" });
    handle_number(doc, "tree").or_else(|| handle_number(doc, "frag")).is_some()
}

/// Formats node content as a list value.
pub(crate) fn content_value(content: &NodeContent) -> String {
    match content {
        NodeContent::Text(t) => list::join(&["text", t]),
        NodeContent::Comment(c) => list::join(&["comment", c]),
        NodeContent::Element(tag) => list::join(&["tag", tag.name(), &attrs_value(tag)]),
    }
}

fn attrs_value(tag: &TagData) -> String {
    let attrs: Vec<String> = tag
        .attributes()
        .iter()
        .map(|(name, value)| match value {
            Some(v) => list::join(&[name, v]),
            None => list::join(&[name]),
        })
        .collect();
    list::join(&attrs)
}

/// Parses a content list value back into node content.
pub(crate) fn parse_content(value: &str) -> Result<NodeContent, Flow> {
    let items = split_list(value)?;
    let bad = || Flow::error(format!("malformed node content \"{value}\": expected text, comment or tag form"));
    match items.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["text", t] => Ok(NodeContent::text(*t)),
        ["comment", c] => Ok(NodeContent::comment(*c)),
        ["tag", name] => Ok(NodeContent::Element(TagData::new(name).map_err(fail)?)),
        ["tag", name, attrs] => Ok(NodeContent::Element(parse_tag(name, attrs)?)),
        _ => Err(bad()),
    }
}

fn parse_tag(name: &str, attrs: &str) -> Result<TagData, Flow> {
    let mut tag = TagData::new(name).map_err(fail)?;
    for attr in split_list(attrs)? {
        match split_list(&attr)?.as_slice() {
            [name] => tag.set_attrib_opt(name, None),
            [name, value] => tag.set_attrib(name, value.clone()),
            _ => return Err(Flow::error(format!("malformed attribute \"{attr}\""))),
        }
    }
    Ok(tag)
}

impl Interp {
    fn node_ref(&self, handle: &str) -> Result<(u64, NodeId), Flow> {
        let unknown = || Flow::error(format!("unknown node handle \"{handle}\""));
        let (doc_part, index) = match handle.split_once('.') {
            Some((d, i)) => (d, Some(i)),
            None => (handle, None),
        };
        let (id, prefix) = match (handle_number(doc_part, "tree"), handle_number(doc_part, "frag")) {
            (Some(id), _) => (id, "tree"),
            (_, Some(id)) => (id, "frag"),
            _ => return Err(unknown()),
        };
        let doc = self.handles.docs.get(&id).filter(|d| d.prefix() == prefix).ok_or_else(unknown)?;
        let node = match index {
            None => doc.tree().root(),
            Some(i) => {
                let i: u32 = i.parse().map_err(|_| unknown())?;
                doc.tree().node_at(i).map_err(|_| Flow::error(format!("node \"{handle}\" no longer exists")))?
            }
        };
        Ok((id, node))
    }

    fn doc(&self, id: u64) -> &Doc {
        &self.handles.docs[&id]
    }

    fn doc_mut(&mut self, id: u64) -> &mut Doc {
        self.handles.docs.get_mut(&id).expect("checked by node_ref")
    }

    fn node_name(&self, doc: u64, node: NodeId) -> String {
        let d = self.doc(doc);
        format_node(d.prefix(), doc, node, d.tree().root())
    }

    fn content_of(&self, handle: &str) -> Result<NodeContent, Flow> {
        let (doc, node) = self.node_ref(handle)?;
        self.doc(doc).tree().content(node).cloned().map_err(fail)
    }

    fn client_response(&mut self, conn: u64) -> Result<&HttpResponse, Flow> {
        let client = self.client.clone();
        let entry = self.handles.conns.get_mut(&conn).expect("checked");
        if entry.response.is_none() {
            entry.response = Some(client.send_once(Method::Get, &entry.url, &[], None).map_err(fail)?);
        }
        Ok(entry.response.as_ref().expect("just set"))
    }

    /// A URL argument: either a `urlN` handle or literal text.
    fn url_arg(&self, arg: &str) -> String {
        handle_number(arg, "url").and_then(|id| self.handles.urls.get(&id).cloned()).unwrap_or_else(|| arg.to_string())
    }

    /// Work that evaluates `script` in a child interpreter seeded from this one.
    fn script_work(&self, script: String) -> Work {
        let seed = self.seed();
        Box::new(move |cancel| {
            let mut child = Interp::from_seed(seed, cancel.clone());
            child.eval(&script).map_err(|e| e.message)
        })
    }
}

fn format_node(prefix: &str, doc: u64, node: NodeId, root: NodeId) -> String {
    if node == root {
        format!("{prefix}{doc}")
    } else {
        format!("{prefix}{doc}.{}", node.index())
    }
}

fn url_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, sub, url] = w else { return Err(usage("ws::url new urlname")) };
    if sub != "new" {
        return Err(usage("ws::url new urlname"));
    }
    let parsed = url::Url::parse(url).map_err(|e| Flow::error(format!("invalid URL \"{url}\": {e}")))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(Flow::error(format!("invalid URL \"{url}\": only http and https are supported")));
    }
    let id = interp.handles.fresh();
    interp.handles.urls.insert(id, url.clone());
    Ok(format!("url{id}"))
}

fn stream_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    match w {
        [_, sub, kind, url] if sub == "in" && kind == "url" => {
            let url = interp.url_arg(url);
            let body = interp.client.get_page(&url, None, &[]).map_err(fail)?;
            let id = interp.handles.fresh();
            interp.handles.streams.insert(id, body);
            Ok(format!("stream{id}"))
        }
        [_, sub, stream] if sub == "read" => {
            let id = handle_number(stream, "stream")
                .filter(|id| interp.handles.streams.contains_key(id))
                .ok_or_else(|| Flow::error(format!("unknown stream \"{stream}\"")))?;
            Ok(std::mem::take(interp.handles.streams.get_mut(&id).expect("checked")))
        }
        _ => Err(usage("ws::stream in url url | ws::stream read stream")),
    }
}

fn urlconn_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    match w {
        [_, sub, url] if sub == "new" => {
            let url = interp.url_arg(url);
            let id = interp.handles.fresh();
            interp.handles.conns.insert(id, Conn { url, response: None });
            Ok(format!("conn{id}"))
        }
        [_, sub, field, key, conn] if sub == "get" && field.eq_ignore_ascii_case("headerfield") => {
            let id = handle_number(conn, "conn")
                .filter(|id| interp.handles.conns.contains_key(id))
                .ok_or_else(|| Flow::error(format!("unknown connection \"{conn}\"")))?;
            let resp = interp.client_response(id)?;
            match parse_int(key) {
                Some(0) => Ok(resp.status_line()),
                Some(n) => Err(Flow::error(format!("header field {n} is not addressable by index; use its name"))),
                None => Ok(resp.header(key).unwrap_or("").to_string()),
            }
        }
        _ => Err(usage("ws::urlconn new url | ws::urlconn get HeaderField index-or-name conn")),
    }
}

fn pairs(value: &str, what: &str) -> Result<Vec<(String, String)>, Flow> {
    let items = split_list(value)?;
    if !items.len().is_multiple_of(2) {
        return Err(Flow::error(format!("{what} list must have an even number of elements")));
    }
    Ok(items.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect())
}

type Headers = Vec<(String, String)>;

fn request_args(w: &[String], form: &str) -> Result<(String, QueryParams, Headers), Flow> {
    if !(2..=4).contains(&w.len()) {
        return Err(usage(form));
    }
    let params = match w.get(2) {
        Some(p) => pairs(p, "query parameter")?.into_iter().collect(),
        None => QueryParams::new(),
    };
    let headers = match w.get(3) {
        Some(h) => pairs(h, "header")?,
        None => Vec::new(),
    };
    Ok((w[1].clone(), params, headers))
}

fn getpage(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (url, params, headers) = request_args(w, "ws::getpage url ?queryParams? ?headers?")?;
    let params = (!params.is_empty()).then_some(&params);
    interp.client.get_page(&url, params, &headers).map_err(fail)
}

fn postpage(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (url, form, headers) = request_args(w, "ws::postpage url ?formData? ?headers?")?;
    interp.client.post_page(&url, &form, &headers).map_err(fail)
}

fn validate_link(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, url] = w else { return Err(usage("ws::validate_link urlname")) };
    let url = interp.url_arg(url);
    bool_result(interp.client.validate_link(&url))
}

fn timeout_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (script, timeout, timeslot) = match w {
        [_, s, t] => (s, millis(t)?, DEFAULT_TIMESLOT),
        [_, s, t, slot] => (s, millis(t)?, millis(slot)?),
        _ => return Err(usage("ws::timeout script timeout ?timeslot?")),
    };
    if timeout.is_zero() || timeslot.is_zero() {
        return Err(Flow::error("timeout and timeslot must be positive"));
    }
    let work = interp.script_work(script.clone());
    let tasks = Arc::clone(&interp.tasks);
    with_timeout(&tasks, work, timeout, timeslot).map_err(fail)
}

fn thread_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    const FORM: &str = "ws::thread new | exec thread script | status thread | result thread | destroy thread";
    let task = |s: &String| s.parse::<TaskId>().map_err(fail);
    let tasks = Arc::clone(&interp.tasks);
    match w {
        [_, sub] if sub == "new" => Ok(tasks.create().to_string()),
        [_, sub, t, script] if sub == "exec" => {
            let id = task(t)?;
            let work = interp.script_work(script.clone());
            tasks.exec(id, work).map_err(fail)?;
            Ok(String::new())
        }
        [_, sub, t] => {
            let id = task(t)?;
            match sub.as_str() {
                "status" => Ok(tasks.status(id).map_err(fail)?.symbol().to_string()),
                "result" => tasks.result(id).map_err(fail),
                "destroy" => tasks.destroy(id).map(|_| String::new()).map_err(fail),
                _ => Err(usage(FORM)),
            }
        }
        _ => Err(usage(FORM)),
    }
}

/// A DTD named as a builtin (`frameset`, `frameset.dtd`) or a file path.
fn resolve_dtd(name: &str) -> Result<Arc<Dtd>, Flow> {
    match Dtd::builtin(name) {
        Ok(dtd) => Ok(dtd),
        Err(builtin_err) => {
            let path = Path::new(name);
            if !path.is_file() {
                return Err(fail(builtin_err));
            }
            let source = std::fs::read_to_string(path).map_err(|e| Flow::error(format!("cannot read {name}: {e}")))?;
            let stem = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            Dtd::load_named(&stem, &source).map(Arc::new).map_err(|e| Flow::error(format!("{name}: {e}")))
        }
    }
}

fn parser_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let dtd = match w {
        [_, kind] if kind == "dtd" => Dtd::frameset(),
        [_, kind, name] if kind == "dtd" => resolve_dtd(name)?,
        _ => return Err(usage("ws::parser dtd ?dtdName?")),
    };
    let id = interp.handles.fresh();
    interp.handles.parsers.insert(id, Parser::new(dtd));
    Ok(format!("parser{id}"))
}

fn parse_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (parser, dtd, text) = match w {
        [_, p, text] => (p, None, text),
        [_, p, dtd, text] => (p, Some(resolve_dtd(dtd)?), text),
        _ => return Err(usage("ws::parse parser ?dtd? string")),
    };
    let parser = handle_number(parser, "parser")
        .and_then(|id| interp.handles.parsers.get(&id))
        .ok_or_else(|| Flow::error(format!("unknown parser \"{parser}\"")))?;
    let tree = match dtd {
        Some(dtd) => parser.parse_with(&dtd, text),
        None => parser.parse(text),
    };
    Ok(interp.handles.add_doc(Doc::Tree(tree)))
}

fn dump_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (depth, node) = match w {
        [_, mode, node] if mode == "string" => (None, node),
        [_, mode, depth, node] if mode == "string" => {
            let d = parse_int(depth)
                .and_then(|d| usize::try_from(d).ok())
                .ok_or_else(|| Flow::error(format!("expected non-negative depth but got \"{depth}\"")))?;
            (Some(d), node)
        }
        _ => return Err(usage("ws::dump string ?depth? node")),
    };
    let (doc, node) = interp.node_ref(node)?;
    interp.doc(doc).tree().dump(node, depth).map_err(fail)
}

fn iterator_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    const FORM: &str = "ws::iterator tree dfs|bfs text|comment|tag|any node | more iterator | next iterator";
    match w {
        [_, kind, order, filter, node] if kind == "tree" => {
            let order: Order = order.parse().map_err(fail)?;
            let filter: Filter = filter.parse().map_err(fail)?;
            let (doc, node) = interp.node_ref(node)?;
            let d = interp.doc(doc);
            let it = TreeIterator::new(d.tree(), node, order, filter).map_err(fail)?;
            let cursor = Cursor { doc, prefix: d.prefix(), root: d.tree().root(), it };
            let id = interp.handles.fresh();
            interp.handles.iterators.insert(id, cursor);
            Ok(format!("it{id}"))
        }
        [_, sub, it] if sub == "more" || sub == "next" => {
            let cursor = handle_number(it, "it")
                .and_then(|id| interp.handles.iterators.get_mut(&id))
                .ok_or_else(|| Flow::error(format!("unknown iterator \"{it}\"")))?;
            if sub == "more" {
                return bool_result(cursor.it.has_more());
            }
            let node = cursor.it.next_node().map_err(fail)?;
            Ok(format_node(cursor.prefix, cursor.doc, node, cursor.root))
        }
        _ => Err(usage(FORM)),
    }
}

fn node_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    const FORM: &str = "ws::node get content|type node | set content node value | new text|comment|tag ...";
    match w {
        [_, sub, what, node] if sub == "get" && what == "content" => Ok(content_value(&interp.content_of(node)?)),
        [_, sub, what, node] if sub == "get" && what == "type" => Ok(interp.content_of(node)?.kind().to_string()),
        [_, sub, what, node, value] if sub == "set" && what == "content" => {
            let content = parse_content(value)?;
            let (doc, node) = interp.node_ref(node)?;
            interp.doc_mut(doc).tree_mut().set_content(node, content).map_err(fail)?;
            Ok(String::new())
        }
        [_, sub, rest @ ..] if sub == "new" => {
            let content = match rest {
                [kind, text] if kind == "text" => NodeContent::text(text.as_str()),
                [kind, text] if kind == "comment" => NodeContent::comment(text.as_str()),
                [kind, name] if kind == "tag" => NodeContent::Element(TagData::new(name).map_err(fail)?),
                [kind, name, attrs] if kind == "tag" => NodeContent::Element(parse_tag(name, attrs)?),
                [value] => parse_content(value)?,
                _ => return Err(usage(FORM)),
            };
            let frag = DetachedTree::new(content).map_err(fail)?;
            Ok(interp.handles.add_doc(Doc::Frag(frag)))
        }
        _ => Err(usage(FORM)),
    }
}

enum TagRef {
    Node(u64, NodeId),
    Value(TagData),
}

fn tag_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    const FORM: &str = "ws::tag get name|attrib|attribs | has attrib | set name|attrib | remove attrib tag ?args?";
    let (op, field, target, args) = match w {
        [_, op, field, target, args @ ..] => (op.as_str(), field.as_str(), target, args),
        _ => return Err(usage(FORM)),
    };
    let tag_ref = if is_node_handle(target) {
        let (doc, node) = interp.node_ref(target)?;
        if !interp.doc(doc).tree().content(node).map_err(fail)?.is_element() {
            return Err(Flow::error(format!("node \"{target}\" is not a tag")));
        }
        TagRef::Node(doc, node)
    } else {
        match parse_content(target)? {
            NodeContent::Element(tag) => TagRef::Value(tag),
            _ => return Err(Flow::error(format!("\"{target}\" is not tag content"))),
        }
    };
    let read = |interp: &Interp, f: &dyn Fn(&TagData) -> String| -> String {
        match &tag_ref {
            TagRef::Node(doc, node) => f(interp.doc(*doc).tree().tag(*node).ok().flatten().expect("checked element")),
            TagRef::Value(tag) => f(tag),
        }
    };
    match (op, field, args) {
        ("get", "name", []) => return Ok(read(interp, &|t| t.name().to_string())),
        ("get", "attrib", [name]) => return Ok(read(interp, &|t| t.attrib(name).unwrap_or("").to_string())),
        ("get", "attribs", []) => return Ok(read(interp, &attrs_value)),
        ("has", "attrib", [name]) => {
            return bool_result(read(interp, &|t| if t.has_attrib(name) { "1" } else { "0" }.into()) == "1")
        }
        _ => {}
    }
    let edit = |tag: &mut TagData| -> Result<(), Flow> {
        match (op, field, args) {
            ("set", "name", [name]) => tag.set_name(name).map_err(fail),
            ("set", "attrib", [name, value]) => {
                tag.set_attrib(name, value.clone());
                Ok(())
            }
            ("remove", "attrib", [name]) => {
                tag.remove_attrib(name);
                Ok(())
            }
            _ => Err(usage(FORM)),
        }
    };
    match tag_ref {
        TagRef::Node(doc, node) => {
            let tree = interp.doc_mut(doc).tree_mut();
            edit(tree.tag_mut(node).map_err(fail)?.expect("checked element"))?;
            Ok(content_value(tree.content(node).map_err(fail)?))
        }
        TagRef::Value(mut tag) => {
            edit(&mut tag)?;
            Ok(content_value(&NodeContent::Element(tag)))
        }
    }
}

fn parent_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, node] = w else { return Err(usage("ws::parent node")) };
    let (doc, node) = interp.node_ref(node)?;
    let parent = interp.doc(doc).tree().parent(node).map_err(fail)?;
    Ok(parent.map(|p| interp.node_name(doc, p)).unwrap_or_default())
}

fn child_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (node, index) = match w {
        [_, node] => (node, None),
        [_, node, index] => (node, Some(index)),
        _ => return Err(usage("ws::child node ?index?")),
    };
    let (doc, node) = interp.node_ref(node)?;
    let children = interp.doc(doc).tree().children(node).map_err(fail)?;
    let names: Vec<String> = children.iter().map(|&c| interp.node_name(doc, c)).collect();
    match index {
        None => Ok(list::join(&names)),
        Some(i) => {
            let i = if i == "end" {
                names.len().checked_sub(1)
            } else {
                parse_int(i).and_then(|n| usize::try_from(n).ok())
            };
            i.and_then(|i| names.get(i).cloned())
                .ok_or_else(|| Flow::error(format!("child index out of range (node has {} children)", names.len())))
        }
    }
}

fn sibling_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, a, b] = w else { return Err(usage("ws::sibling node prev|next")) };
    let (node, dir) = match a.parse::<Direction>() {
        Ok(dir) => (b, dir),
        Err(_) => (
            a,
            b.parse::<Direction>().map_err(|_| Flow::error(format!("bad direction \"{b}\": must be prev or next")))?,
        ),
    };
    let (doc, node) = interp.node_ref(node)?;
    let sib = interp.doc(doc).tree().sibling(node, dir).map_err(fail)?;
    Ok(sib.map(|s| interp.node_name(doc, s)).unwrap_or_default())
}

fn cut_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, node] = w else { return Err(usage("ws::cut node")) };
    let (doc, node) = interp.node_ref(node)?;
    let frag = interp.doc_mut(doc).tree_mut().cut(node).map_err(fail)?;
    Ok(interp.handles.add_doc(Doc::Frag(frag)))
}

fn copy_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, node] = w else { return Err(usage("ws::copy node")) };
    let (doc, node) = interp.node_ref(node)?;
    let frag = interp.doc(doc).tree().copy(node).map_err(fail)?;
    Ok(interp.handles.add_doc(Doc::Frag(frag)))
}

fn position(tree: &TagTree, parent: NodeId, index: &str) -> Result<usize, Flow> {
    if index == "end" {
        return tree.child_count(parent).map_err(fail);
    }
    parse_int(index)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Flow::error(format!("bad position \"{index}\": must be a non-negative integer or end")))
}

fn paste_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, frag, parent, index] = w else { return Err(usage("ws::paste fragment parent index")) };
    let frag_id = handle_number(frag, "frag")
        .filter(|id| matches!(interp.handles.docs.get(id), Some(Doc::Frag(_))))
        .ok_or_else(|| Flow::error(format!("unknown fragment \"{frag}\"")))?;
    let (doc, parent) = interp.node_ref(parent)?;
    if doc == frag_id {
        return Err(Flow::error("cannot paste a fragment into itself"));
    }
    let tree = interp.doc(doc).tree();
    let index = position(tree, parent, index)?;
    tree.check_paste(parent, index).map_err(fail)?;
    let Some(Doc::Frag(fragment)) = interp.handles.docs.remove(&frag_id) else { unreachable!("checked above") };
    let top = interp.doc_mut(doc).tree_mut().paste(parent, index, fragment).map_err(fail)?;
    Ok(interp.node_name(doc, top))
}

fn move_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, node, parent, index] = w else { return Err(usage("ws::move node parent index")) };
    let (doc, node) = interp.node_ref(node)?;
    let (parent_doc, parent) = interp.node_ref(parent)?;
    if doc != parent_doc {
        return Err(Flow::error("cannot move a node into a different tree; use ws::cut and ws::paste"));
    }
    let index = position(interp.doc(doc).tree(), parent, index)?;
    interp.doc_mut(doc).tree_mut().move_node(node, parent, index).map_err(fail)?;
    Ok(String::new())
}

fn webgrep_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    const FORM: &str = "ws::webgrep url depth pattern ?-parallel? ?-raw? ?-timeout ms?";
    let [_, url, depth, pattern, opts @ ..] = w else { return Err(usage(FORM)) };
    let depth = parse_int(depth)
        .and_then(|d| usize::try_from(d).ok())
        .ok_or_else(|| Flow::error(format!("expected non-negative depth but got \"{depth}\"")))?;
    let mut options = GrepOptions::default();
    let mut rest = opts.iter();
    while let Some(opt) = rest.next() {
        match opt.as_str() {
            "-parallel" => options.parallel = true,
            "-raw" => options.raw_hrefs = true,
            "-timeout" => options.timeout = millis(rest.next().ok_or_else(|| usage(FORM))?)?,
            _ => return Err(usage(FORM)),
        }
    }
    let result = apps::webgrep(&interp.client, &interp.tasks, url, depth, pattern, &options).map_err(fail)?;
    Ok(list::join(&result.matches))
}

fn linkcheck_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let (url, html_var) = match w {
        [_, url] => (url, None),
        [_, url, var] => (url, Some(var)),
        _ => return Err(usage("ws::linkcheck url ?htmlVarName?")),
    };
    let report = apps::annotate_links(&interp.client, &interp.tasks, url).map_err(fail)?;
    if let Some(var) = html_var {
        interp.write_var(var, report.annotated_html.clone())?;
    }
    let entries: Vec<String> = report
        .links
        .iter()
        .map(|l| list::join(&[l.verdict.to_string(), l.resolved.clone().unwrap_or_default(), l.href.clone()]))
        .collect();
    Ok(list::join(&entries))
}

fn webcopy_cmd(interp: &mut Interp, w: &[String]) -> CmdResult {
    let [_, url, depth, dir] = w else { return Err(usage("ws::webcopy url depth directory")) };
    let depth = parse_int(depth)
        .and_then(|d| usize::try_from(d).ok())
        .ok_or_else(|| Flow::error(format!("expected non-negative depth but got \"{depth}\"")))?;
    let report = apps::webcopy(&interp.client, url, depth, &PathBuf::from(dir)).map_err(fail)?;
    Ok(report.written.len().to_string())
}

impl From<TaskError> for Flow {
    fn from(e: TaskError) -> Self {
        fail(e)
    }
}
