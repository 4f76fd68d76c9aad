//! Library half of the command-line front end: file formats, config-file
//! handling, and the subcommand implementations. The `dgan` binary is a thin
//! argument-parsing wrapper over [`commands`].

pub mod commands;
pub mod config;
pub mod formats;
