// `Stop` is large but only built on the cold path that ends a run.
#![allow(clippy::result_large_err)]

pub mod cli;
pub mod corpus;
pub mod detector;
pub mod explorer;
pub mod gen;
pub mod names;
pub mod report;
pub mod runtime;
pub mod syntax;
