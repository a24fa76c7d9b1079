//! Cascade simulation, live-edge and reverse-reachable sampling, IC/SIR
//! coupling, and IMM seed selection for the IC, SIR and time-bounded SIR
//! (TSIR) diffusion models.

pub mod coupling;
pub mod error;
pub mod exact;
pub mod generate;
pub mod graph;
pub mod imm;
pub mod io;
pub mod live;
pub mod prob;
pub mod sim;
pub mod rr;
pub mod stream;

pub use error::{Error, Result};
pub use graph::{DiffusionParams, DirectedGraph, EdgeId, Instance, Model, NodeId};
