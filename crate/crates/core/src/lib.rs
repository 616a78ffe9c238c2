//! A non-blocking, unbounded, directed graph.
//!
//! Vertices live in a lock-free sorted list; each vertex owns a lock-free
//! sorted list of outgoing edges. Vertex and edge updates are lock-free,
//! lookups are wait-free for a finite key set, and [`ThreadHandle::get_path`]
//! answers reachability queries with an obstruction-free double collect of
//! breadth-first traversals.
//!
//! ```
//! use nbgraph::{EdgeOutcome, Graph};
//!
//! let graph = Graph::new(4);
//! let h = graph.register().unwrap();
//! h.add_vertex(1).unwrap();
//! h.add_vertex(2).unwrap();
//! h.add_vertex(3).unwrap();
//! assert_eq!(h.add_edge(1, 2).unwrap(), EdgeOutcome::EdgeAdded);
//! assert_eq!(h.add_edge(2, 3).unwrap(), EdgeOutcome::EdgeAdded);
//! assert_eq!(h.get_path(1, 3).unwrap(), Some(vec![1, 2, 3]));
//! ```

pub mod atomics;
pub mod bench;
pub mod checker;
mod edge;
pub mod engine;
mod error;
mod graph;
pub mod history;
mod node;
pub mod oracle;
pub mod reach;
pub mod reclaim;
mod vertex;

/// Vertex key. `i64::MIN` and `i64::MAX` are reserved for sentinels.
pub type Key = i64;

pub use edge::EdgeOutcome;
pub use error::GraphError;
pub use graph::{AuditReport, Graph, GraphConfig, ThreadHandle, VertexAudit};
pub use node::{KEY_MAX, KEY_MIN};
pub use reach::{BoundedPath, ScanStats};
pub use reclaim::{ReclaimSnapshot, Reclamation};
