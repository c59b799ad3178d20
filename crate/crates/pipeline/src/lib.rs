//! Networked stages of the pipeline (feed ingest, chat-completion
//! generation, embedding similarity) and the `ewra` command line.

pub mod cli;
pub mod config;
pub mod embed;
pub mod fetch;
pub mod generate;
pub mod http;
pub mod llm;
pub mod report;
pub mod summary;
