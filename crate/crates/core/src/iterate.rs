//! Structural iterators: snapshot cursors over a subtree in DFS (preorder) or
//! BFS (level) order, filtered by node type.

use std::collections::VecDeque;
use std::str::FromStr;

use thiserror::Error;

use crate::tree::{NodeContent, NodeId, TagTree, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IterError {
    #[error("unknown traversal order `{0}` (expected dfs or bfs)")]
    UnknownOrder(String),
    #[error("unknown node filter `{0}` (expected text, comment, tag or any)")]
    UnknownFilter(String),
    #[error("iterator exhausted")]
    Exhausted,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Dfs,
    Bfs,
}

impl FromStr for Order {
    type Err = IterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dfs" => Ok(Order::Dfs),
            "bfs" => Ok(Order::Bfs),
            _ => Err(IterError::UnknownOrder(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    Text,
    Comment,
    Tag,
    Any,
}

impl Filter {
    pub fn accepts(self, content: &NodeContent) -> bool {
        matches!(
            (self, content),
            (Filter::Any, _)
                | (Filter::Text, NodeContent::Text(_))
                | (Filter::Comment, NodeContent::Comment(_))
                | (Filter::Tag, NodeContent::Element(_))
        )
    }
}

impl FromStr for Filter {
    type Err = IterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Filter::Text),
            "comment" => Ok(Filter::Comment),
            "tag" => Ok(Filter::Tag),
            "any" | "all" => Ok(Filter::Any),
            _ => Err(IterError::UnknownFilter(s.to_string())),
        }
    }
}

/// The node sequence is captured when the iterator is created; later edits to
/// the tree do not change what it yields.
#[derive(Debug, Clone)]
pub struct TreeIterator {
    snapshot: Vec<NodeId>,
    cursor: usize,
    order: Order,
    filter: Filter,
}

impl TreeIterator {
    pub fn new(tree: &TagTree, root: NodeId, order: Order, filter: Filter) -> Result<Self, IterError> {
        tree.content(root)?;
        let mut snapshot = Vec::new();
        let mut keep = |node: NodeId| -> Result<(), TreeError> {
            if filter.accepts(tree.content(node)?) {
                snapshot.push(node);
            }
            Ok(())
        };
        match order {
            Order::Dfs => {
                let mut stack = vec![root];
                while let Some(node) = stack.pop() {
                    keep(node)?;
                    stack.extend(tree.children(node)?.into_iter().rev());
                }
            }
            Order::Bfs => {
                let mut queue = VecDeque::from([root]);
                while let Some(node) = queue.pop_front() {
                    keep(node)?;
                    queue.extend(tree.children(node)?);
                }
            }
        }
        Ok(TreeIterator { snapshot, cursor: 0, order, filter })
    }

    pub fn has_more(&self) -> bool {
        self.cursor < self.snapshot.len()
    }

    pub fn next_node(&mut self) -> Result<NodeId, IterError> {
        let node = *self.snapshot.get(self.cursor).ok_or(IterError::Exhausted)?;
        self.cursor += 1;
        Ok(node)
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn filter(&self) -> Filter {
        self.filter
    }

    pub fn len(&self) -> usize {
        self.snapshot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.snapshot.len() - self.cursor
    }
}

impl Iterator for TreeIterator {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        self.next_node().ok()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining(), Some(self.remaining()))
    }
}

impl ExactSizeIterator for TreeIterator {}
