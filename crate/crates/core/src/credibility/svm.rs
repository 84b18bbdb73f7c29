use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;
use crate::error::{Error, Result};

/// Minimum number of examples of each class needed to train a classifier.
pub const MIN_CLASS_EXAMPLES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    /// L2 regularisation strength.
    pub lambda: f64,
    pub epochs: usize,
    /// Step size at epoch `t` is `learning_rate / sqrt(t)`.
    pub learning_rate: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 300,
            learning_rate: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn predict(&self, x: &SparseVector) -> bool {
        self.decision(x) > 0.0
    }
}

pub(crate) fn check_labels(y: &[bool]) -> Result<()> {
    let positives = y.iter().filter(|&&v| v).count();
    let negatives = y.len() - positives;
    if positives < MIN_CLASS_EXAMPLES || negatives < MIN_CLASS_EXAMPLES {
        return Err(Error::DegenerateLabels {
            min: MIN_CLASS_EXAMPLES,
            positives,
            negatives,
        });
    }
    Ok(())
}

/// Linear SVM by full-batch subgradient descent on
/// `λ/2·‖w‖² + mean(max(0, 1 − y·(w·x + b)))`, with the bias left
/// unregularised. Returns the iterate with the lowest objective seen.
///
/// Using the mean loss over the whole batch makes the result independent of
/// example order and of uniform duplication of the training set.
pub fn train_svm(x: &[SparseVector], dim: usize, y: &[bool], cfg: &SvmConfig) -> Result<LinearSvm> {
    assert_eq!(x.len(), y.len(), "one label per example");
    check_labels(y)?;
    let n = x.len() as f64;
    let sign: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut best = LinearSvm {
        weights: w.clone(),
        bias: b,
    };
    let mut best_objective = f64::INFINITY;
    let mut grad = vec![0.0; dim];

    for epoch in 0..=cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (xi, &yi) in x.iter().zip(&sign) {
            let margin = yi * (xi.dot(&w) + b);
            if margin < 1.0 {
                loss += 1.0 - margin;
                for (j, v) in xi.iter() {
                    grad[j as usize] -= yi * v;
                }
                grad_b -= yi;
            }
        }
        let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() * cfg.lambda / 2.0;
        let objective = reg + loss / n;
        if objective < best_objective {
            best_objective = objective;
            best.weights.copy_from_slice(&w);
            best.bias = b;
        }
        if epoch == cfg.epochs {
            break;
        }
        let eta = cfg.learning_rate / ((epoch + 1) as f64).sqrt();
        for (wj, gj) in w.iter_mut().zip(&grad) {
            *wj -= eta * (cfg.lambda * *wj + gj / n);
        }
        b -= eta * grad_b / n;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[[f64; 2]]) -> Vec<SparseVector> {
        rows.iter().map(|r| SparseVector::from_dense(r)).collect()
    }

    fn separable() -> (Vec<SparseVector>, Vec<bool>) {
        let pos = [[2.0, 1.5], [1.5, 2.5], [3.0, 2.0], [2.5, 3.0], [1.8, 1.9]];
        let neg = [
            [-1.0, -0.5],
            [-2.0, -1.5],
            [-0.5, -2.0],
            [-1.5, -1.0],
            [-0.8, -0.9],
        ];
        let mut rows = pos.to_vec();
        rows.extend(neg);
        let y = (0..10).map(|i| i < 5).collect();
        (dense(&rows), y)
    }

    #[test]
    fn fits_separable_toy_set() {
        let (x, y) = separable();
        let m = train_svm(&x, 2, &y, &SvmConfig::default()).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(m.predict(xi), yi);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let (x, _) = separable();
        let y = vec![true; 10];
        assert!(matches!(
            train_svm(&x, 2, &y, &SvmConfig::default()),
            Err(Error::DegenerateLabels { .. })
        ));
    }

    #[test]
    fn duplicating_the_data_changes_nothing() {
        let (x, y) = separable();
        let cfg = SvmConfig::default();
        let once = train_svm(&x, 2, &y, &cfg).unwrap();
        let mut x2 = Vec::new();
        let mut y2 = Vec::new();
        for (xi, &yi) in x.iter().zip(&y) {
            x2.extend([xi.clone(), xi.clone()]);
            y2.extend([yi, yi]);
        }
        let twice = train_svm(&x2, 2, &y2, &cfg).unwrap();
        for probe in dense(&[[0.3, -0.2], [1.0, 1.0], [-3.0, 0.5], [0.0, 0.0]]) {
            assert!((once.decision(&probe) - twice.decision(&probe)).abs() < 1e-6);
        }
    }

    #[test]
    fn example_order_is_irrelevant() {
        let (mut x, mut y) = separable();
        let cfg = SvmConfig::default();
        let a = train_svm(&x, 2, &y, &cfg).unwrap();
        x.reverse();
        y.reverse();
        let b = train_svm(&x, 2, &y, &cfg).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-9);
        }
    }
}
