//! Tag trees: an arena of text, comment and element nodes.
//!
//! Every document tree has a synthetic `#root` element so that documents with
//! several top-level nodes still form one tree. Node handles ([`NodeId`]) carry
//! the identity of their owning tree, and slots are never reused, so a handle to
//! a node that was cut out (or that belongs to another tree) is reported as an
//! error instead of silently aliasing a different node.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::dtd::Dtd;

/// Name of the synthetic element at the top of every parsed document.
pub const ROOT_NAME: &str = "#root";

/// Elements whose content is raw text up to the matching end tag.
pub const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

static NEXT_TREE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("stale or foreign node handle")]
    InvalidNode,
    #[error("empty tag name")]
    EmptyTagName,
    #[error("node has children; only an element may be an internal node")]
    InternalNodeNotElement,
    #[error("cannot detach the root node")]
    DetachRoot,
    #[error("parent is not an element")]
    ParentNotElement,
    #[error("cannot move a node into its own subtree")]
    Cycle,
    #[error("child index {index} out of range (parent has {len} children)")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, TreeError>;

/// Handle to a node, valid only within the tree that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    tree: u64,
    index: u32,
}

impl NodeId {
    /// Arena slot of the node; stable for the node's lifetime in its tree.
    pub fn index(self) -> u32 {
        self.index
    }
}

/// Element name plus ordered attributes. Attribute names are unique and lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagData {
    name: String,
    attributes: Vec<(String, Option<String>)>,
}

impl TagData {
    pub fn new(name: &str) -> Result<TagData> {
        if name.is_empty() {
            return Err(TreeError::EmptyTagName);
        }
        Ok(TagData { name: name.to_ascii_lowercase(), attributes: Vec::new() })
    }

    pub(crate) fn from_parts(name: String, attributes: Vec<(String, Option<String>)>) -> TagData {
        TagData { name, attributes }
    }

    pub(crate) fn into_parts(self) -> (String, Vec<(String, Option<String>)>) {
        (self.name, self.attributes)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: &str) -> Result<()> {
        if name.is_empty() {
            return Err(TreeError::EmptyTagName);
        }
        self.name = name.to_ascii_lowercase();
        Ok(())
    }

    pub fn attributes(&self) -> &[(String, Option<String>)] {
        &self.attributes
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|(n, _)| n.eq_ignore_ascii_case(name))
    }

    pub fn has_attrib(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    /// Value of an attribute; a valueless attribute (`<input checked>`) reads as `""`.
    /// `None` means the attribute is absent.
    pub fn attrib(&self, name: &str) -> Option<&str> {
        self.position(name).map(|i| self.attributes[i].1.as_deref().unwrap_or(""))
    }

    /// Sets an attribute, keeping its original position if it already exists.
    pub fn set_attrib(&mut self, name: &str, value: impl Into<String>) {
        self.set_attrib_opt(name, Some(value.into()));
    }

    /// Sets an attribute that may be valueless.
    pub fn set_attrib_opt(&mut self, name: &str, value: Option<String>) {
        match self.position(name) {
            Some(i) => self.attributes[i].1 = value,
            None => self.attributes.push((name.to_ascii_lowercase(), value)),
        }
    }

    pub fn remove_attrib(&mut self, name: &str) -> bool {
        match self.position(name) {
            Some(i) => {
                self.attributes.remove(i);
                true
            }
            None => false,
        }
    }

    fn write_start_tag(&self, out: &mut String) {
        out.push('<');
        out.push_str(&self.name);
        for (name, value) in &self.attributes {
            out.push(' ');
            out.push_str(name);
            if let Some(value) = value {
                out.push_str("=\"");
                out.push_str(&value.replace('"', "&quot;"));
                out.push('"');
            }
        }
        out.push('>');
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeContent {
    Text(String),
    Comment(String),
    Element(TagData),
}

impl NodeContent {
    pub fn text(value: impl Into<String>) -> Self {
        NodeContent::Text(value.into())
    }

    pub fn comment(value: impl Into<String>) -> Self {
        NodeContent::Comment(value.into())
    }

    pub fn element(name: &str) -> Result<Self> {
        TagData::new(name).map(NodeContent::Element)
    }

    pub fn as_element(&self) -> Option<&TagData> {
        match self {
            NodeContent::Element(tag) => Some(tag),
            _ => None,
        }
    }

    pub fn is_element(&self) -> bool {
        matches!(self, NodeContent::Element(_))
    }

    /// `text`, `comment` or `tag`.
    pub fn kind(&self) -> &'static str {
        match self {
            NodeContent::Text(_) => "text",
            NodeContent::Comment(_) => "comment",
            NodeContent::Element(_) => "tag",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            NodeContent::Element(tag) if tag.name.is_empty() => Err(TreeError::EmptyTagName),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Prev,
    Next,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "prev" | "previous" | "left" => Ok(Direction::Prev),
            "next" | "right" => Ok(Direction::Next),
            _ => Err(format!("bad sibling direction `{s}`: must be prev or next")),
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    content: NodeContent,
    parent: Option<u32>,
    children: Vec<u32>,
}

/// A document tree. Single writer, any number of readers between writes.
#[derive(Debug)]
pub struct TagTree {
    id: u64,
    slots: Vec<Option<Slot>>,
    root: u32,
    live: usize,
    dtd: Arc<Dtd>,
}

impl TagTree {
    /// An empty document: just the `#root` element.
    pub fn new(dtd: Arc<Dtd>) -> TagTree {
        let root = NodeContent::Element(TagData { name: ROOT_NAME.to_string(), attributes: Vec::new() });
        TagTree::with_top(root, dtd)
    }

    fn with_top(content: NodeContent, dtd: Arc<Dtd>) -> TagTree {
        TagTree {
            id: NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed),
            slots: vec![Some(Slot { content, parent: None, children: Vec::new() })],
            root: 0,
            live: 1,
            dtd,
        }
    }

    pub fn dtd(&self) -> &Arc<Dtd> {
        &self.dtd
    }

    pub fn root(&self) -> NodeId {
        self.id_of(self.root)
    }

    /// Number of live nodes.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    fn id_of(&self, index: u32) -> NodeId {
        NodeId { tree: self.id, index }
    }

    fn slot(&self, node: NodeId) -> Result<&Slot> {
        if node.tree != self.id {
            return Err(TreeError::InvalidNode);
        }
        self.slots.get(node.index as usize).and_then(Option::as_ref).ok_or(TreeError::InvalidNode)
    }

    fn slot_mut(&mut self, node: NodeId) -> Result<&mut Slot> {
        if node.tree != self.id {
            return Err(TreeError::InvalidNode);
        }
        self.slots.get_mut(node.index as usize).and_then(Option::as_mut).ok_or(TreeError::InvalidNode)
    }

    fn at(&self, index: u32) -> &Slot {
        self.slots[index as usize].as_ref().expect("live slot")
    }

    fn at_mut(&mut self, index: u32) -> &mut Slot {
        self.slots[index as usize].as_mut().expect("live slot")
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.slot(node).is_ok()
    }

    /// Rebuilds a handle from an arena slot number, if that slot is live.
    pub fn node_at(&self, index: u32) -> Result<NodeId> {
        let id = self.id_of(index);
        self.slot(id).map(|_| id)
    }

    pub fn content(&self, node: NodeId) -> Result<&NodeContent> {
        self.slot(node).map(|s| &s.content)
    }

    pub fn tag(&self, node: NodeId) -> Result<Option<&TagData>> {
        self.content(node).map(NodeContent::as_element)
    }

    /// Mutable access to an element's tag data; `None` for text and comments.
    pub fn tag_mut(&mut self, node: NodeId) -> Result<Option<&mut TagData>> {
        Ok(match &mut self.slot_mut(node)?.content {
            NodeContent::Element(tag) => Some(tag),
            _ => None,
        })
    }

    /// Replaces a node's content. A node with children must stay an element.
    pub fn set_content(&mut self, node: NodeId, content: NodeContent) -> Result<()> {
        content.validate()?;
        let slot = self.slot_mut(node)?;
        if !slot.children.is_empty() && !content.is_element() {
            return Err(TreeError::InternalNodeNotElement);
        }
        slot.content = content;
        Ok(())
    }

    pub fn parent(&self, node: NodeId) -> Result<Option<NodeId>> {
        Ok(self.slot(node)?.parent.map(|p| self.id_of(p)))
    }

    pub fn children(&self, node: NodeId) -> Result<Vec<NodeId>> {
        Ok(self.slot(node)?.children.iter().map(|&c| self.id_of(c)).collect())
    }

    pub fn child_count(&self, node: NodeId) -> Result<usize> {
        Ok(self.slot(node)?.children.len())
    }

    pub fn sibling(&self, node: NodeId, direction: Direction) -> Result<Option<NodeId>> {
        let Some(parent) = self.slot(node)?.parent else { return Ok(None) };
        let siblings = &self.at(parent).children;
        let pos = siblings.iter().position(|&c| c == node.index).expect("child listed in parent");
        let other = match direction {
            Direction::Prev => pos.checked_sub(1).map(|p| siblings[p]),
            Direction::Next => siblings.get(pos + 1).copied(),
        };
        Ok(other.map(|i| self.id_of(i)))
    }

    /// Position of the node among its parent's children.
    pub fn index_in_parent(&self, node: NodeId) -> Result<Option<usize>> {
        let Some(parent) = self.slot(node)?.parent else { return Ok(None) };
        Ok(self.at(parent).children.iter().position(|&c| c == node.index))
    }

    fn alloc(&mut self, content: NodeContent, parent: Option<u32>) -> u32 {
        let index = self.slots.len() as u32;
        self.slots.push(Some(Slot { content, parent, children: Vec::new() }));
        self.live += 1;
        index
    }

    /// Appends a new node as the last child of `parent`.
    pub fn append(&mut self, parent: NodeId, content: NodeContent) -> Result<NodeId> {
        let len = self.child_count(parent)?;
        let frag = DetachedTree::new(content)?;
        self.paste(parent, len, frag)
    }

    /// Parser fast path: no validation, parent is known live and an element.
    pub(crate) fn push_child(&mut self, parent: u32, content: NodeContent) -> u32 {
        let index = self.alloc(content, Some(parent));
        self.at_mut(parent).children.push(index);
        index
    }

    /// Parser fast path: appends text to the last child when it is a text node.
    pub(crate) fn push_text(&mut self, parent: u32, text: &str) {
        if let Some(&last) = self.at(parent).children.last() {
            if let NodeContent::Text(existing) = &mut self.at_mut(last).content {
                existing.push_str(text);
                return;
            }
        }
        self.push_child(parent, NodeContent::Text(text.to_string()));
    }

    pub(crate) fn root_index(&self) -> u32 {
        self.root
    }

    /// Preorder slot numbers of the subtree at `top`.
    fn preorder(&self, top: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![top];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(self.at(i).children.iter().rev());
        }
        out
    }

    pub fn subtree_len(&self, node: NodeId) -> Result<usize> {
        self.slot(node)?;
        Ok(self.preorder(node.index).len())
    }

    /// Longest node distance from `node` down to a leaf.
    pub fn height(&self, node: NodeId) -> Result<usize> {
        self.slot(node)?;
        let mut best = 0;
        let mut stack = vec![(node.index, 0usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            stack.extend(self.at(i).children.iter().map(|&c| (c, d + 1)));
        }
        Ok(best)
    }

    /// True when `node` is `ancestor` or lies below it.
    pub fn is_within(&self, node: NodeId, ancestor: NodeId) -> Result<bool> {
        self.slot(ancestor)?;
        let mut cur = Some(self.slot(node)?);
        let mut idx = node.index;
        while let Some(slot) = cur {
            if idx == ancestor.index {
                return Ok(true);
            }
            match slot.parent {
                Some(p) => {
                    idx = p;
                    cur = Some(self.at(p));
                }
                None => cur = None,
            }
        }
        Ok(false)
    }

    /// Copies the subtree at `top` (in this tree) into a fresh tree.
    fn clone_subtree(&self, top: u32) -> TagTree {
        let mut out = TagTree::with_top(self.at(top).content.clone(), Arc::clone(&self.dtd));
        let mut stack = vec![(top, 0u32)];
        while let Some((src, dst)) = stack.pop() {
            for &child in &self.at(src).children {
                let copied = out.push_child(dst, self.at(child).content.clone());
                stack.push((child, copied));
            }
        }
        out
    }

    /// Detaches the subtree at `node`. Handles into the subtree become stale.
    pub fn cut(&mut self, node: NodeId) -> Result<DetachedTree> {
        let parent = self.slot(node)?.parent.ok_or(TreeError::DetachRoot)?;
        let fragment = self.clone_subtree(node.index);
        for i in self.preorder(node.index) {
            self.slots[i as usize] = None;
            self.live -= 1;
        }
        self.at_mut(parent).children.retain(|&c| c != node.index);
        Ok(DetachedTree { tree: fragment })
    }

    /// Deep, independent copy of the subtree at `node`.
    pub fn copy(&self, node: NodeId) -> Result<DetachedTree> {
        self.slot(node)?;
        Ok(DetachedTree { tree: self.clone_subtree(node.index) })
    }

    /// Checks the preconditions of [`paste`](Self::paste) without consuming anything.
    pub fn check_paste(&self, parent: NodeId, index: usize) -> Result<()> {
        let slot = self.slot(parent)?;
        if !slot.content.is_element() {
            return Err(TreeError::ParentNotElement);
        }
        if index > slot.children.len() {
            return Err(TreeError::IndexOutOfRange { index, len: slot.children.len() });
        }
        Ok(())
    }

    /// Splices a fragment in as child number `index` of `parent`
    /// (`index == child_count` appends). Returns the handle of the fragment's top node.
    pub fn paste(&mut self, parent: NodeId, index: usize, fragment: DetachedTree) -> Result<NodeId> {
        self.check_paste(parent, index)?;
        let src = fragment.tree;
        let top = self.alloc(src.at(src.root).content.clone(), Some(parent.index));
        let mut stack = vec![(src.root, top)];
        while let Some((from, to)) = stack.pop() {
            for &child in &src.at(from).children {
                let copied = self.push_child(to, src.at(child).content.clone());
                stack.push((child, copied));
            }
        }
        self.at_mut(parent.index).children.insert(index, top);
        Ok(self.id_of(top))
    }

    /// Re-parents `node` so that it lands before the child currently at `index`
    /// of `new_parent` (or last, when `index` equals the child count). Handles stay valid.
    pub fn move_node(&mut self, node: NodeId, new_parent: NodeId, index: usize) -> Result<()> {
        let old_parent = self.slot(node)?.parent.ok_or(TreeError::DetachRoot)?;
        self.check_paste(new_parent, index)?;
        if self.is_within(new_parent, node)? {
            return Err(TreeError::Cycle);
        }
        let old_pos = self.at(old_parent).children.iter().position(|&c| c == node.index).expect("listed");
        let mut index = index;
        if old_parent == new_parent.index && old_pos < index {
            index -= 1;
        }
        self.at_mut(old_parent).children.remove(old_pos);
        self.at_mut(new_parent.index).children.insert(index, node.index);
        self.at_mut(node.index).parent = Some(new_parent.index);
        Ok(())
    }

    /// Serializes the subtree at `node` as HTML. `depth` limits output to nodes at
    /// most that many edges below `node`; truncated elements keep their tags.
    pub fn dump(&self, node: NodeId, depth: Option<usize>) -> Result<String> {
        self.slot(node)?;
        enum Step {
            Open(u32, usize, bool),
            Close(u32),
        }
        let raw_parent = self.at(node.index).parent.is_some_and(|p| self.is_raw_text_element(p));
        let mut out = String::new();
        let mut stack = vec![Step::Open(node.index, 0, raw_parent)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Open(i, dist, raw) => {
                    let slot = self.at(i);
                    match &slot.content {
                        NodeContent::Text(t) if raw => out.push_str(t),
                        NodeContent::Text(t) => write_text(&mut out, t),
                        NodeContent::Comment(c) => {
                            out.push_str("<!--");
                            out.push_str(c);
                            out.push_str("-->");
                        }
                        NodeContent::Element(tag) => {
                            let is_root = tag.name == ROOT_NAME;
                            if !is_root {
                                tag.write_start_tag(&mut out);
                            }
                            let void = self.dtd.is_void(&tag.name) && slot.children.is_empty();
                            if !is_root && !void {
                                stack.push(Step::Close(i));
                            }
                            if depth.is_none_or(|d| dist < d) {
                                let raw = RAW_TEXT_ELEMENTS.contains(&tag.name.as_str());
                                for &c in slot.children.iter().rev() {
                                    stack.push(Step::Open(c, dist + 1, raw));
                                }
                            }
                        }
                    }
                }
                Step::Close(i) => {
                    if let NodeContent::Element(tag) = &self.at(i).content {
                        out.push_str("</");
                        out.push_str(&tag.name);
                        out.push('>');
                    }
                }
            }
        }
        Ok(out)
    }

    fn is_raw_text_element(&self, index: u32) -> bool {
        matches!(&self.at(index).content, NodeContent::Element(t) if RAW_TEXT_ELEMENTS.contains(&t.name.as_str()))
    }

    /// Whole-document serialization.
    pub fn to_html(&self) -> String {
        self.dump(self.root(), None).expect("root is live")
    }

    /// Verifies the structural invariants: one parent per node, no cycles,
    /// every live node reachable from the top, internal nodes are elements,
    /// tag names non-empty, attribute names unique.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let top = self.slots.get(self.root as usize).and_then(Option::as_ref).ok_or("top node missing")?;
        if top.parent.is_some() {
            return Err("top node has a parent".into());
        }
        let mut seen = vec![false; self.slots.len()];
        let mut stack = vec![self.root];
        let mut reached = 0usize;
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i as usize], true) {
                return Err(format!("node {i} reached twice (shared child or cycle)"));
            }
            reached += 1;
            let slot = self.slots[i as usize].as_ref().ok_or_else(|| format!("dangling child link to {i}"))?;
            if let NodeContent::Element(tag) = &slot.content {
                if tag.name.is_empty() {
                    return Err(format!("node {i} has an empty tag name"));
                }
                for (k, (name, _)) in tag.attributes.iter().enumerate() {
                    if tag.attributes[..k].iter().any(|(n, _)| n == name) {
                        return Err(format!("node {i} repeats attribute `{name}`"));
                    }
                }
            } else if !slot.children.is_empty() {
                return Err(format!("non-element node {i} has children"));
            }
            for &c in &slot.children {
                let child = self.slots.get(c as usize).and_then(Option::as_ref);
                match child {
                    Some(child) if child.parent == Some(i) => stack.push(c),
                    Some(_) => return Err(format!("node {c} does not point back to parent {i}")),
                    None => return Err(format!("node {i} links to dead slot {c}")),
                }
            }
        }
        if reached != self.live {
            return Err(format!("{} live nodes but only {reached} reachable", self.live));
        }
        let live = self.slots.iter().filter(|s| s.is_some()).count();
        if live != self.live {
            return Err(format!("live count {} disagrees with arena ({live})", self.live));
        }
        Ok(())
    }
}

/// Writes text verbatim except for a `<` that would start markup when re-read,
/// which becomes `&lt;`. Text only contains such a `<` when a tag at the end of
/// the input was incomplete, or when it was set programmatically.
fn write_text(out: &mut String, text: &str) {
    let bytes = text.as_bytes();
    let mut last = 0;
    for (i, _) in text.match_indices('<') {
        let rest = &bytes[i + 1..];
        let starts_markup = rest.first().is_some_and(u8::is_ascii_alphabetic)
            || (rest.first() == Some(&b'/') && rest.get(1).is_some_and(u8::is_ascii_alphabetic))
            || rest.starts_with(b"!--")
            || (rest.len() >= 8 && rest[..8].eq_ignore_ascii_case(b"!doctype"));
        if starts_markup {
            out.push_str(&text[last..i]);
            out.push_str("&lt;");
            last = i + 1;
        }
    }
    out.push_str(&text[last..]);
}

impl Clone for TagTree {
    /// A deep copy with a fresh identity; handles from the original do not apply.
    fn clone(&self) -> Self {
        let mut copy = self.clone_subtree(self.root);
        copy.dtd = Arc::clone(&self.dtd);
        copy
    }
}

impl fmt::Display for TagTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_html())
    }
}

/// A subtree owned by no document, produced by `cut`, `copy` or [`DetachedTree::new`].
#[derive(Debug, Clone)]
pub struct DetachedTree {
    tree: TagTree,
}

impl DetachedTree {
    /// A single-node fragment. Serializes with the bundled frameset DTD.
    pub fn new(content: NodeContent) -> Result<DetachedTree> {
        content.validate()?;
        Ok(DetachedTree { tree: TagTree::with_top(content, Dtd::frameset()) })
    }

    /// Read and edit access. The fragment's top node is `tree().root()`.
    pub fn tree(&self) -> &TagTree {
        &self.tree
    }

    pub fn tree_mut(&mut self) -> &mut TagTree {
        &mut self.tree
    }

    pub fn top(&self) -> NodeId {
        self.tree.root()
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn to_html(&self) -> String {
        self.tree.dump(self.top(), None).expect("top is live")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn doc(html: &str) -> TagTree {
        parse(&Dtd::frameset(), html)
    }

    fn first_element(tree: &TagTree, name: &str) -> NodeId {
        let mut stack = vec![tree.root()];
        while let Some(n) = stack.pop() {
            if tree.tag(n).unwrap().is_some_and(|t| t.name() == name) {
                return n;
            }
            stack.extend(tree.children(n).unwrap().into_iter().rev());
        }
        panic!("no <{name}>");
    }

    #[test]
    fn node_create_variants() {
        let t = DetachedTree::new(NodeContent::text("hi")).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.to_html(), "hi");
        let b = DetachedTree::new(NodeContent::element("b").unwrap()).unwrap();
        assert_eq!(b.to_html(), "<b></b>");
        assert_eq!(NodeContent::element("").unwrap_err().to_string(), "empty tag name");
        let bogus = NodeContent::Element(TagData { name: String::new(), attributes: vec![] });
        assert_eq!(DetachedTree::new(bogus).unwrap_err(), TreeError::EmptyTagName);
    }

    #[test]
    fn node_get_and_set() {
        let mut tree = doc("<a href=x>t</a>");
        let a = first_element(&tree, "a");
        let mut expected = TagData::new("a").unwrap();
        expected.set_attrib("href", "x");
        assert_eq!(tree.content(a).unwrap(), &NodeContent::Element(expected));

        let text = tree.children(a).unwrap()[0];
        tree.set_content(text, NodeContent::text("y")).unwrap();
        assert_eq!(tree.content(text).unwrap(), &NodeContent::text("y"));

        let mut tree = doc("<b>one<i>two</i></b>");
        let b = first_element(&tree, "b");
        assert_eq!(tree.child_count(b).unwrap(), 2);
        assert_eq!(tree.set_content(b, NodeContent::text("y")), Err(TreeError::InternalNodeNotElement));
        tree.set_content(b, NodeContent::element("strong").unwrap()).unwrap();
        assert_eq!(tree.to_html(), "<strong>one<i>two</i></strong>");
    }

    #[test]
    fn tag_attributes() {
        let mut tag = TagData::new("A").unwrap();
        assert_eq!(tag.name(), "a");
        tag.set_attrib("HREF", "x.html");
        assert_eq!(tag.attrib("href"), Some("x.html"));
        assert_eq!(tag.attrib("HREF"), Some("x.html"));
        assert_eq!(tag.attrib("title"), None);

        tag.set_attrib("title", "a \"quoted\" <value> & more");
        tag.set_attrib("href", "y.html");
        assert_eq!(tag.attrib("title"), Some("a \"quoted\" <value> & more"));
        let names: Vec<_> = tag.attributes().iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["href", "title"]);

        assert!(tag.remove_attrib("Title"));
        assert!(!tag.remove_attrib("title"));
        assert_eq!(tag.set_name(""), Err(TreeError::EmptyTagName));
    }

    #[test]
    fn navigation() {
        let tree = doc("<ul><li>a<li>b</ul>");
        let root = tree.root();
        assert_eq!(tree.parent(root).unwrap(), None);
        let ul = first_element(&tree, "ul");
        let items = tree.children(ul).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(tree.sibling(items[0], Direction::Next).unwrap(), Some(items[1]));
        assert_eq!(tree.sibling(items[1], Direction::Prev).unwrap(), Some(items[0]));
        assert_eq!(tree.sibling(items[1], Direction::Next).unwrap(), None);
        assert_eq!(tree.sibling(root, Direction::Next).unwrap(), None);
        let text = tree.children(items[0]).unwrap()[0];
        assert!(tree.children(text).unwrap().is_empty());
        assert_eq!(tree.parent(text).unwrap(), Some(items[0]));
    }

    #[test]
    fn cut_paste_inverse() {
        let mut tree = doc("<div><p>one</p><p>two</p><p>three</p></div>");
        let before = tree.to_html();
        let count = tree.len();
        let div = first_element(&tree, "div");
        let second = tree.children(div).unwrap()[1];
        let frag = tree.cut(second).unwrap();
        assert_eq!(tree.len() + frag.len(), count);
        assert_eq!(tree.to_html(), "<div><p>one</p><p>three</p></div>");
        assert_eq!(tree.content(second), Err(TreeError::InvalidNode));
        tree.paste(div, 1, frag).unwrap();
        assert_eq!(tree.to_html(), before);
        assert_eq!(tree.len(), count);
        tree.audit().unwrap();
    }

    #[test]
    fn copy_is_independent() {
        let tree = doc("<p>hello</p>");
        let before = tree.to_html();
        let p = first_element(&tree, "p");
        let mut frag = tree.copy(p).unwrap();
        let top = frag.top();
        let text = frag.tree().children(top).unwrap()[0];
        frag.tree_mut().set_content(text, NodeContent::text("changed")).unwrap();
        assert_eq!(frag.to_html(), "<p>changed</p>");
        assert_eq!(tree.to_html(), before);
    }

    #[test]
    fn move_reorders_items() {
        let mut tree = doc("<ul><li>a<li>b</ul>");
        let ul = first_element(&tree, "ul");
        let first = tree.children(ul).unwrap()[0];
        let count = tree.len();
        tree.move_node(first, ul, 2).unwrap();
        assert_eq!(tree.to_html(), "<ul><li>b</li><li>a</li></ul>");
        assert_eq!(tree.len(), count);
        // Handles survive a move.
        assert_eq!(tree.children(ul).unwrap()[1], first);
        tree.audit().unwrap();
    }

    #[test]
    fn surgery_errors() {
        let mut tree = doc("<div><span>x</span></div>text");
        let root = tree.root();
        let div = first_element(&tree, "div");
        let span = first_element(&tree, "span");
        let text = tree.children(root).unwrap()[1];

        assert_eq!(tree.cut(root).unwrap_err(), TreeError::DetachRoot);
        assert_eq!(tree.move_node(root, div, 0).unwrap_err(), TreeError::DetachRoot);
        assert_eq!(tree.move_node(div, span, 0).unwrap_err(), TreeError::Cycle);
        assert_eq!(tree.move_node(div, div, 0).unwrap_err(), TreeError::Cycle);
        let frag = DetachedTree::new(NodeContent::text("t")).unwrap();
        assert_eq!(tree.check_paste(text, 0).unwrap_err(), TreeError::ParentNotElement);
        assert_eq!(tree.paste(div, 5, frag).unwrap_err(), TreeError::IndexOutOfRange { index: 5, len: 1 });
        let other = doc("<b>x</b>");
        assert_eq!(tree.content(other.root()).unwrap_err(), TreeError::InvalidNode);
        tree.audit().unwrap();
    }

    #[test]
    fn dump_rules() {
        assert_eq!(doc("<p>hi").to_html(), "<p>hi</p>");
        assert_eq!(doc("<br>").to_html(), "<br>");
        assert_eq!(doc("<!-- c -->x").to_html(), "<!-- c -->x");
        let tree = doc(r#"<a title='say "hi"' checked>t</a>"#);
        assert_eq!(tree.to_html(), r#"<a title="say &quot;hi&quot;" checked>t</a>"#);

        let tree = doc("<div><p>deep <b>bold</b></p></div>");
        let div = first_element(&tree, "div");
        assert_eq!(tree.dump(div, Some(0)).unwrap(), "<div></div>");
        assert_eq!(tree.dump(div, Some(1)).unwrap(), "<div><p></p></div>");
        assert_eq!(tree.dump(div, Some(2)).unwrap(), "<div><p>deep <b></b></p></div>");
        let h = tree.height(tree.root()).unwrap();
        assert_eq!(tree.dump(tree.root(), Some(h)).unwrap(), tree.to_html());
    }

    #[test]
    fn append_and_clone() {
        let mut tree = TagTree::new(Dtd::frameset());
        let root = tree.root();
        let p = tree.append(root, NodeContent::element("p").unwrap()).unwrap();
        tree.append(p, NodeContent::text("x")).unwrap();
        tree.append(root, NodeContent::element("br").unwrap()).unwrap();
        assert_eq!(tree.to_html(), "<p>x</p><br>");
        let copy = tree.clone();
        assert_eq!(copy.to_html(), tree.to_html());
        assert!(!copy.contains(p));
        copy.audit().unwrap();
    }
}
