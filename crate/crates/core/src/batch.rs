//! Many independent episodes at once. Each episode owns all of its state, so
//! the batch is embarrassingly parallel; results keep the input order.

use crate::error::Result;
use crate::identifier::Identifier;
use crate::par::*;
use crate::simkit::config::SimConfig;
use crate::simkit::episode::{run_episode, EpisodeResult};

/// Runs every config, on the rayon pool when the `parallel` feature is on.
pub fn run_batch(configs: &[SimConfig], ident: Option<&Identifier>) -> Vec<Result<EpisodeResult>> {
    (0..configs.len())
        .into_par_iter()
        .map(|i| run_episode(&configs[i], ident))
        .collect()
}

/// Same as [`run_batch`] but always on the calling thread.
pub fn run_batch_sequential(configs: &[SimConfig], ident: Option<&Identifier>) -> Vec<Result<EpisodeResult>> {
    configs.iter().map(|c| run_episode(c, ident)).collect()
}
