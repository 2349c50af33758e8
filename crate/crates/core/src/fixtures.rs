//! Deterministic reference network and evaluation data shipped in
//! `fixtures/`. Everything here is generated from a fixed seed, so the files
//! can always be rebuilt and checked against the generator.

use std::path::Path;

use crate::compressor::{ContainerFile, Tensor};
use crate::error::Result;
use crate::policy::{unit_hash, Activation, Dense, TinyMlp};

pub const SEED: u64 = 0x7EDA;
pub const INPUT_DIM: usize = 8;
pub const HIDDEN_DIM: usize = 32;
pub const CHUNK_SIZE: usize = 25;
pub const ACTION_DIM: usize = 2;
pub const TRIALS: usize = 25;
/// Half-width of the uniform noise separating ground truth from the float
/// network's output.
pub const TRUTH_NOISE: f64 = 0.05;

pub const MODEL_FILE: &str = "reference_mlp.tdac";
pub const INPUTS_FILE: &str = "inputs.json";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const GOLDEN_FILE: &str = "golden_output.json";

fn symmetric(stream: u64, i: usize) -> f64 {
    unit_hash(SEED, stream, i as u64) * 2.0 - 1.0
}

fn dense(stream: u64, input: usize, output: usize, activation: Activation) -> Dense {
    let bound = 1.0 / (input as f64).sqrt();
    let weight = (0..input * output)
        .map(|i| (symmetric(stream, i) * bound) as f32)
        .collect();
    let bias = (0..output)
        .map(|i| (symmetric(stream + 1, i) * 0.1) as f32)
        .collect();
    Dense::new(
        Tensor::new([1, 1, output, input], weight).expect("sized"),
        Tensor::new([1, 1, 1, output], bias).expect("sized"),
        activation,
    )
    .expect("consistent shapes")
}

/// `8 -> 32 (tanh) -> 50 (identity)`; the 50 outputs are 25 actions of
/// dimension 2.
pub fn reference_mlp() -> TinyMlp {
    TinyMlp::new(vec![
        dense(10, INPUT_DIM, HIDDEN_DIM, Activation::Tanh),
        dense(
            20,
            HIDDEN_DIM,
            CHUNK_SIZE * ACTION_DIM,
            Activation::Identity,
        ),
    ])
    .expect("consistent layers")
}

/// 25 inputs in `[-1, 1)`, rounded to f32 so they feed the network exactly.
pub fn reference_inputs() -> Vec<Vec<f64>> {
    (0..TRIALS)
        .map(|t| {
            (0..INPUT_DIM)
                .map(|i| symmetric(30, t * INPUT_DIM + i) as f32 as f64)
                .collect()
        })
        .collect()
}

pub fn forward_all(net: &TinyMlp, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    inputs
        .iter()
        .map(|x| {
            let t = Tensor::row(x.iter().map(|&v| v as f32).collect())?;
            Ok(net.forward(&t)?.data().iter().map(|&v| v as f64).collect())
        })
        .collect()
}

/// Float-network output plus bounded noise.
pub fn reference_ground_truth() -> Result<Vec<Vec<f64>>> {
    let out = forward_all(&reference_mlp(), &reference_inputs())?;
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(t, row)| {
            row.into_iter()
                .enumerate()
                .map(|(i, v)| v + TRUTH_NOISE * symmetric(40, t * 1000 + i))
                .collect()
        })
        .collect())
}

/// Writes the model, inputs and ground truth into `dir`.
pub fn write_fixture_files(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    ContainerFile::Model(reference_mlp().to_named()).write(&dir.join(MODEL_FILE))?;
    std::fs::write(
        dir.join(INPUTS_FILE),
        serde_json::to_string_pretty(&reference_inputs())?,
    )?;
    std::fs::write(
        dir.join(TRUTH_FILE),
        serde_json::to_string_pretty(&reference_ground_truth()?)?,
    )?;
    Ok(())
}
