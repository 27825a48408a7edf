//! Contextual user-simulation engine for offline recommender-system
//! evaluation: LLM-driven (or scripted) user agents grounded in simulated
//! daily life, a page-by-page recommender environment, thought-synthesis
//! corpus export, and the evaluation protocols built on top.

pub mod agent;
pub mod backend;
pub mod domain;
pub mod env;
pub mod evalx;
pub mod ingest;
pub mod io;
pub mod lifesim;
pub mod memory;
pub mod persona;
pub mod prompts;
pub mod runner;
pub mod seeds;
pub mod thoughts;
