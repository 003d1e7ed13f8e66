#![allow(dead_code)]

use mmaflc::identifier::{train_offline, Identifier, IdentifierMode, NeuralNet, TrainingSet};
use mmaflc::plant::nominal_parking_plant;
use mmaflc::simkit::{ControllerKind, SimConfig};

pub const TRAIN_SEED: u64 = 7;
pub const TRAIN_ALPHA: f64 = 0.003;
pub const TRAIN_EPOCHS: usize = 20_000;
pub const TRAIN_GRID: usize = 11;
pub const TRAIN_X1: [f64; 2] = [-2.0, 2.0];
pub const TRAIN_X2: [f64; 2] = [-1.0, 1.0];

/// Training set sampled from the nominal plant on the canonical grid.
pub fn canonical_training_set() -> TrainingSet {
    let plant = nominal_parking_plant(1.0).unwrap();
    TrainingSet::from_plant_grid(&plant, TRAIN_X1, TRAIN_X2, TRAIN_GRID, TRAIN_ALPHA).unwrap()
}

/// The identifier every canonical experiment uses.
pub fn canonical_identifier() -> Identifier {
    let training = train_offline(&NeuralNet::random(3, TRAIN_SEED), &canonical_training_set(), TRAIN_EPOCHS).unwrap();
    Identifier::new(training.net, IdentifierMode::Lumped)
}

pub fn canonical(kind: ControllerKind, friction: f64) -> SimConfig {
    SimConfig {
        controller_kind: kind,
        friction_coeff: friction,
        ..SimConfig::default()
    }
}
