//! Live streaming over superposed random Hamiltonian cycles.
//!
//! Peers are organised into `M` layers, each a directed Hamiltonian cycle
//! maintained under churn by edge insertion and splicing ([`overlay`]).
//! Chunks are pushed along the layers with a cyclic scheduling vector and a
//! latest-chunk rule ([`dissemination`]). The subgraph that carries a single
//! chunk color is a flow graph; [`flowgraph`] extracts those graphs, builds
//! equivalently distributed random ones node by node, and measures their
//! depth, expansion and diameter. [`stats`] wraps everything in seeded Monte
//! Carlo experiments.

pub mod dissemination;
pub mod error;
pub mod flowgraph;
pub mod overlay;
pub mod rng;
pub mod stats;

pub use dissemination::{ChunkId, DeliveryLog, PhasePolicy, Simulation, StreamConfig};
pub use error::{Error, Result};
pub use flowgraph::{FgcTrace, FlowGraph};
pub use overlay::{Overlay, PeerId};
pub use stats::ExperimentReport;
