//! Event-driven, single-spike spiking-network classification with neuronal
//! competition groups and supervised STDP.
//!
//! The crate provides:
//! - dataset loading (IDX images, NCGF feature files) and first-spike
//!   latency encoding ([`data`]);
//! - an event-driven forward pass over a fully-connected single-spike
//!   integrate-and-fire layer with configurable lateral inhibition
//!   ([`engine`]);
//! - R-STDP, SSTDP, and S2-STDP learning rules ([`plasticity`]);
//! - two-compartment threshold competition regulation ([`regulation`]);
//! - the training loop, K-fold evaluation, and gridsearch ([`training`]);
//! - experiment configs, report bundles, and the operations behind the CLI
//!   ([`config`], [`report`]).

pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod plasticity;
pub mod regulation;
pub mod report;
pub mod rng;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
