//! Sliced tensor-network contraction driven by a task dependency graph.
//!
//! Networks are built from qudit or bosonic circuits, contracted along a
//! binary contraction tree, optionally sliced, compiled into transpose /
//! matmul / reduce / delete tasks with work shared across slices, and
//! executed on a thread pool.

pub mod circuits;
pub mod executor;
pub mod fixtures;
pub mod network;
pub mod pathtree;
pub mod scalar;
pub mod taskgraph;
pub mod tensor;

pub use circuits::{BasisState, Circuit, CircuitError, Gate, GbsConfig};
pub use executor::{run, simulate_peak_memory, ExecConfig, ExecError, ExecReport, MemoryProfile};
pub use network::{AmplitudeClosure, NetworkError, TensorNetwork};
pub use pathtree::{
    build_tree, cost_report, greedy_path, greedy_shared_slices, slice_tree, ContractionPath,
    ContractionTree, CostReport, NodeRef, PathError, SliceSet,
};
pub use scalar::{Precision, Scalar};
pub use taskgraph::{Dedup, Task, TaskError, TaskGraph, TaskKind};
pub use tensor::{Index, Tensor, TensorError};
