//! Graph data model, shortest-path hop decomposition, refinement kernels,
//! the modal-logic compiler and the synthetic dataset generators.

pub mod error;
pub mod fixtures;
pub mod graph;
pub mod hops;
pub mod io;
pub mod kernels;
pub mod logic;
pub mod molecules;
pub mod prox;

pub use error::{Error, Result};
pub use graph::{Dataset, Edge, Graph, GraphLabel, Split, Task};
pub use hops::{Distance, HopAdjacency, HopIndex};
