//! Gradient-boosted regression trees predicting next-window UE delay.
//!
//! Squared-error boosting: every round fits an exact-split regression tree
//! to the current residuals and adds it with shrinkage `learning_rate`. A
//! round whose tree would raise the training SSE is discarded, so the
//! training error is non-increasing round over round.

mod model_text;
mod tree;

use std::fs;
use std::path::Path;

pub use model_text::{from_text, to_text};
pub use tree::{Row, TreeNode};
use tree::TreeBuilder;

use crate::error::{Error, Result};
use crate::telemetry::{FeatureVector, History};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            n_rounds: 100,
            max_depth: 4,
            min_samples_leaf: 5,
            learning_rate: 0.1,
        }
    }
}

impl FitParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::Config("rounds, depth and leaf size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!("learning rate {} outside (0, 1]", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<TreeNode>,
}

impl BoostedEnsemble {
    /// `base_score + learning_rate * Σ tree(x)`.
    pub fn predict_row(&self, x: &Row) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn predict(&self, features: &FeatureVector) -> f64 {
        self.predict_row(&features.to_array())
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, to_text(self)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        from_text(&text)
    }
}

pub fn predict(model: &BoostedEnsemble, features: &FeatureVector) -> f64 {
    model.predict(features)
}

/// Training trajectory alongside the fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// SSE of the base score, then after every round (accepted or not).
    pub training_sse: Vec<f64>,
    pub rejected_rounds: usize,
}

fn sse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (t - p) * (t - p)).sum()
}

pub fn fit(train: &History, params: &FitParams) -> Result<BoostedEnsemble> {
    fit_rows_traced(&rows_of(train), &train.labels(), params).map(|(m, _)| m)
}

pub fn fit_traced(train: &History, params: &FitParams) -> Result<(BoostedEnsemble, FitReport)> {
    fit_rows_traced(&rows_of(train), &train.labels(), params)
}

pub fn rows_of(history: &History) -> Vec<Row> {
    history.records().iter().map(|r| r.features.to_array()).collect()
}

pub fn fit_rows_traced(x: &[Row], y: &[f64], params: &FitParams) -> Result<(BoostedEnsemble, FitReport)> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::Model("feature and label counts differ".into()));
    }
    if y.len() < 2 {
        return Err(Error::Model(format!("need at least 2 training records, got {}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Model("training data contains non-finite values".into()));
    }
    // exact for constant labels, where the float mean could drift by an ulp
    let base_score = if y.iter().all(|v| *v == y[0]) {
        y[0]
    } else {
        y.iter().sum::<f64>() / y.len() as f64
    };
    let mut pred = vec![base_score; y.len()];
    let mut current = sse(&pred, y);
    let mut report = FitReport {
        training_sse: vec![current],
        rejected_rounds: 0,
    };
    let sorted = TreeBuilder::presort(x);
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut residual = vec![0.0; y.len()];
    for _ in 0..params.n_rounds {
        for ((r, t), p) in residual.iter_mut().zip(y).zip(&pred) {
            *r = t - p;
        }
        let builder = TreeBuilder {
            x,
            target: &residual,
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
        };
        let tree = builder.build(sorted.clone());
        let candidate: Vec<f64> = pred
            .iter()
            .zip(x)
            .map(|(p, row)| p + params.learning_rate * tree.predict(row))
            .collect();
        let next = sse(&candidate, y);
        if next <= current {
            pred = candidate;
            current = next;
            trees.push(tree);
        } else {
            report.rejected_rounds += 1;
        }
        report.training_sse.push(current);
    }
    Ok((
        BoostedEnsemble {
            base_score,
            learning_rate: params.learning_rate,
            trees,
        },
        report,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub rmse: f64,
    pub mae: f64,
    /// Absent for a single record or constant test labels.
    pub r2: Option<f64>,
}

pub fn evaluate(model: &BoostedEnsemble, test: &History) -> Result<Evaluation> {
    let preds: Vec<f64> = test.records().iter().map(|r| model.predict(&r.features)).collect();
    evaluate_predictions(&preds, &test.labels())
}

pub fn evaluate_predictions(pred: &[f64], y: &[f64]) -> Result<Evaluation> {
    if y.is_empty() {
        return Err(Error::Model("empty test set".into()));
    }
    let n = y.len() as f64;
    let sse = sse(pred, y);
    let mae = pred.iter().zip(y).map(|(p, t)| (t - p).abs()).sum::<f64>() / n;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = (y.len() > 1 && sst > 0.0).then(|| 1.0 - sse / sst);
    Ok(Evaluation {
        rmse: (sse / n).sqrt(),
        mae,
        r2,
    })
}
