//! Skill-based issue recommendation.
//!
//! Mines issues and merged pull requests, labels closed issues with the API
//! domains their fixes touched, learns issue text to label mappings with
//! TF-IDF features and per-label random forests, and serves open issues
//! filtered by the domains a contributor knows.

pub mod api;
pub mod dataset;
pub mod evaluation;
pub mod forest;
pub mod links;
pub mod miner;
pub mod rng;
pub mod service;
pub mod synth;
pub mod text;
