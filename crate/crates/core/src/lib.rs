//! `webshell`: lenient HTML tag trees, web retrieval, and a small Tcl-style
//! command language for scripting both.

pub mod apps;
pub mod dtd;
pub mod fixture;
pub mod interp;
pub mod iterate;
pub mod net;
pub mod parser;
pub mod tasks;
pub mod tree;

pub use apps::{
    annotate_links, webcopy, webgrep, AppError, CopyReport, GrepOptions, GrepResult, ValidationReport, Verdict,
};
pub use dtd::{Dtd, DtdError, ElementRule};
pub use interp::{Interp, OutputBuffer, ScriptError};
pub use iterate::{Filter, IterError, Order, TreeIterator};
pub use net::{HttpClient, HttpResponse, Method, NetError, QueryParams};
pub use parser::{parse, tokenize, Parser, Token};
pub use tasks::{with_timeout, CancelToken, TaskError, TaskId, TaskRegistry, TaskStatus};
pub use tree::{DetachedTree, Direction, NodeContent, NodeId, TagData, TagTree, TreeError};
