//! File formats, the HTTP backend and the `ddsd` command line on top of
//! `ddsd-core`.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod det;
pub mod manifest;
pub mod pipeline;
pub mod remote;
pub mod scores;
