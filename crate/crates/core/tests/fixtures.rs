//! The committed fixture files must match their generator, and the network's
//! forward pass must match a plain f64 loop over the stored weights.

use std::path::{Path, PathBuf};

use teda_core::compressor::{ContainerFile, Tensor};
use teda_core::fixtures::{self, GOLDEN_FILE, INPUTS_FILE, MODEL_FILE, TRUTH_FILE};
use teda_core::policy::TinyMlp;

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Straight nested loops in f64 over the raw tensors in the model file.
#[allow(clippy::needless_range_loop)]
fn scalar_forward(model: &ContainerFile, input: &[f64]) -> Vec<f64> {
    let get = |name: String| {
        model
            .tensors()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.to_float())
            .unwrap()
    };
    let mut x = input.to_vec();
    let mut layer = 0;
    while model
        .tensors()
        .iter()
        .any(|(n, _)| *n == format!("layer{layer}.weight"))
    {
        let w = get(format!("layer{layer}.weight"));
        let b = get(format!("layer{layer}.bias"));
        let act = get(format!("layer{layer}.activation")).data()[0];
        let [_, _, out, inp] = w.shape();
        let mut y = vec![0.0f64; out];
        for o in 0..out {
            let mut z = b.data()[o] as f64;
            for i in 0..inp {
                z += w.data()[o * inp + i] as f64 * x[i];
            }
            y[o] = match act as i32 {
                0 => z,
                1 => z.max(0.0),
                2 => z.tanh(),
                other => panic!("activation {other}"),
            };
        }
        x = y;
        layer += 1;
    }
    x
}

fn inputs() -> Vec<Vec<f64>> {
    serde_json::from_str(&std::fs::read_to_string(dir().join(INPUTS_FILE)).unwrap()).unwrap()
}

#[test]
fn committed_files_match_generator() {
    let model = ContainerFile::read(&dir().join(MODEL_FILE)).unwrap();
    assert_eq!(
        model,
        ContainerFile::Model(fixtures::reference_mlp().to_named())
    );
    assert_eq!(inputs(), fixtures::reference_inputs());
    let truth: Vec<Vec<f64>> =
        serde_json::from_str(&std::fs::read_to_string(dir().join(TRUTH_FILE)).unwrap()).unwrap();
    assert_eq!(truth, fixtures::reference_ground_truth().unwrap());
}

#[test]
fn forward_matches_frozen_scalar_output() {
    let golden: Vec<Vec<f64>> =
        serde_json::from_str(&std::fs::read_to_string(dir().join(GOLDEN_FILE)).unwrap()).unwrap();
    let model = ContainerFile::read(&dir().join(MODEL_FILE)).unwrap();
    let ContainerFile::Model(named) = &model else {
        panic!("model file")
    };
    let net = TinyMlp::from_named(named).unwrap();
    let inputs = inputs();
    assert_eq!(golden.len(), 3);
    for (x, want) in inputs.iter().zip(&golden) {
        // the oracle still reproduces what was frozen
        assert_eq!(&scalar_forward(&model, x), want);
        let got = net
            .forward(&Tensor::row(x.iter().map(|&v| v as f32).collect()).unwrap())
            .unwrap();
        assert_eq!(got.len(), 50);
        for (g, w) in got.data().iter().zip(want) {
            assert!((*g as f64 - w).abs() < 1e-5, "{g} vs {w}");
        }
    }
}

/// Rewrites the golden output from the scalar oracle:
/// `cargo test --test fixtures -- --ignored`.
#[test]
#[ignore]
fn regenerate_golden_output() {
    let model = ContainerFile::read(&dir().join(MODEL_FILE)).unwrap();
    let golden: Vec<Vec<f64>> = inputs()
        .iter()
        .take(3)
        .map(|x| scalar_forward(&model, x))
        .collect();
    std::fs::write(
        dir().join(GOLDEN_FILE),
        serde_json::to_string_pretty(&golden).unwrap(),
    )
    .unwrap();
}
