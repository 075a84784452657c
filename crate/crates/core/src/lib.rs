//! Decentralized orchestration of service workflows: a dataflow language
//! compiler, a QoS-driven partitioner, a peer-to-peer engine runtime and a
//! network simulator for comparing centralized and distributed execution.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dsl;
pub mod engine;
pub mod graph;
pub mod harness;
pub mod partitioner;
pub mod qos;
