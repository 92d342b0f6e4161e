//! Experiment harness: prompt construction, provider access, cassettes,
//! generation runs, evaluation, statistics and reports.

pub mod cassette;
pub mod cli;
pub mod compare;
pub mod config;
pub mod dpe;
pub mod evaluate;
pub mod pipeline;
pub mod prompt;
pub mod provider;
pub mod report;
pub mod retrieval;
