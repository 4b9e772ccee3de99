pub mod cli;
pub mod data;
pub mod decision_space;
pub mod error;
pub mod fairness;
pub mod importance;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod robustness;
pub mod runner;
pub mod stats;
