pub mod aspect;
pub mod backend;
pub mod plan;
pub mod text;
pub mod investigator;
pub mod prompts;
pub mod reranker;
pub mod orchestrator;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod annotation;
