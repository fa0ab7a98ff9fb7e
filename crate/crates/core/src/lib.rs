//! Outer automorphisms of free groups through topological representatives on
//! marked graphs: train tracks, Nielsen paths, laminations and growth.

pub mod automorphism;
pub mod error;
pub mod filtration;
pub mod fixtures;
pub mod free_factor;
pub mod graph;
pub mod growth;
pub mod lamination;
pub mod map;
pub mod matrix;
pub mod moves;
pub mod nielsen;
pub mod stallings;
pub mod train_track;
pub mod word;

pub use automorphism::Automorphism;
pub use error::{Error, Result};
pub use graph::{Circuit, Graph, MarkedGraph, Path};
pub use map::{TopRep, Turn};
pub use word::{Alphabet, DirEdge, Word};
