//! Configuration layer of the `viscotherm` command-line tool.

pub mod config;
