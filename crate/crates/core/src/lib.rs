//! Topology-aware reinforcement learning for energy-storage dispatch in
//! radial distribution networks.
//!
//! The crate couples a branch-flow power-flow simulator with a TD3 trainer
//! whose actor/critic networks encode the grid through message passing
//! (GCN, TAGConv or GATv2) or a flat MLP baseline, and benchmarks trained
//! policies against a perfect-foresight horizon dispatch oracle, including
//! topology-reconfiguration and cross-network transfer evaluation.

pub mod config;
pub mod encoders;
pub mod env;
pub mod eval;
pub mod net;
pub mod oracle;
pub mod powerflow;
pub mod profiles;
pub mod report;
pub mod td3;
pub mod tensor;
pub mod validate;
