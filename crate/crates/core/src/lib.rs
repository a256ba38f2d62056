pub mod cli;
pub mod config;
pub mod diff;
pub mod engine;
pub mod llm;
pub mod operators;
pub mod population;
pub mod problems;
pub mod report;
pub mod sandbox;
pub mod scripted;
pub mod selection;
