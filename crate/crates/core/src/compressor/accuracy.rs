use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy of a compressed model relative to its float original:
/// `ratio = e0 / e1` where `e0`, `e1` are the MSEs of the float and
/// quantized predictions against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub e0: f64,
    pub e1: f64,
    pub ratio: f64,
    pub trials: usize,
}

fn mse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        for (a, b) in p.iter().zip(t) {
            sum += (a - b) * (a - b);
            n += 1;
        }
    }
    sum / n as f64
}

/// One entry per trial; every trial must have the same length across the
/// three inputs.
pub fn accuracy_ratio(
    ground_truth: &[Vec<f64>],
    float_preds: &[Vec<f64>],
    quant_preds: &[Vec<f64>],
) -> Result<AccuracyReport> {
    let trials = ground_truth.len();
    if trials == 0 {
        return Err(Error::Shape(
            "accuracy_ratio needs at least one trial".into(),
        ));
    }
    if float_preds.len() != trials || quant_preds.len() != trials {
        return Err(Error::Shape(format!(
            "trial counts differ: truth {trials}, float {}, quantized {}",
            float_preds.len(),
            quant_preds.len()
        )));
    }
    for (i, gt) in ground_truth.iter().enumerate() {
        if gt.is_empty() || float_preds[i].len() != gt.len() || quant_preds[i].len() != gt.len() {
            return Err(Error::Shape(format!("trial {i} has mismatched lengths")));
        }
    }
    let e0 = mse(float_preds, ground_truth);
    let e1 = mse(quant_preds, ground_truth);
    let ratio = if e1 > 0.0 {
        e0 / e1
    } else if e0 == 0.0 {
        // both exact
        1.0
    } else {
        return Err(Error::UndefinedRatio { e0 });
    };
    Ok(AccuracyReport {
        e0,
        e1,
        ratio,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_predictions() {
        let gt = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
        let p = vec![vec![0.1, 1.2], vec![1.9, 3.3]];
        assert_eq!(accuracy_ratio(&gt, &p, &p).unwrap().ratio, 1.0);
    }

    #[test]
    fn single_trial_arithmetic() {
        let r = accuracy_ratio(&[vec![0.0]], &[vec![0.1]], &[vec![0.2]]).unwrap();
        assert!((r.e0 - 0.01).abs() < 1e-15);
        assert!((r.e1 - 0.04).abs() < 1e-15);
        assert!((r.ratio - 0.25).abs() < 1e-12);
        assert_eq!(r.trials, 1);
    }

    #[test]
    fn undefined_when_quantized_is_exact() {
        let err = accuracy_ratio(&[vec![0.0]], &[vec![0.1]], &[vec![0.0]]).unwrap_err();
        assert!(matches!(err, Error::UndefinedRatio { .. }));
    }

    #[test]
    fn shape_errors() {
        assert!(accuracy_ratio(&[], &[], &[]).is_err());
        assert!(accuracy_ratio(&[vec![0.0]], &[vec![0.0, 1.0]], &[vec![0.0]]).is_err());
        assert!(accuracy_ratio(&[vec![0.0]], &[], &[vec![0.0]]).is_err());
    }
}
