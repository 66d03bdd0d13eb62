//! Regressors for the learned cost model.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A trained function from feature vectors to predicted cost.
pub trait Regressor: Send + Sync {
    fn feature_dim(&self) -> usize;
    fn predict(&self, features: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct TrainingLog {
    pub epochs: usize,
    pub initial_mse: f64,
    pub final_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Linear model over z-score normalized features.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct LinearRegressor {
    pub feature_names: Vec<String>,
    /// Weights in normalized feature space. Empty until trained.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub normalization: Normalization,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub training: Option<TrainingLog>,
}

impl LinearRegressor {
    pub fn untrained(feature_names: Vec<String>) -> Self {
        LinearRegressor {
            feature_names,
            weights: Vec::new(),
            bias: 0.0,
            normalization: Normalization {
                mean: Vec::new(),
                std: Vec::new(),
            },
            training: None,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.check_trained().is_ok()
    }

    fn check_trained(&self) -> Result<()> {
        let n = self.feature_names.len();
        if self.weights.len() != n || self.normalization.mean.len() != n || self.normalization.std.len() != n {
            return Err(Error::Untrained);
        }
        Ok(())
    }

    /// Weights and bias expressed over raw (unnormalized) features.
    pub fn raw_coefficients(&self) -> Result<(Vec<f64>, f64)> {
        self.check_trained()?;
        let Normalization { mean, std } = &self.normalization;
        let raw: Vec<f64> = self.weights.iter().zip(std).map(|(w, s)| w / s).collect();
        let bias = self.bias - raw.iter().zip(mean).map(|(w, m)| w * m).sum::<f64>();
        Ok((raw, bias))
    }

    fn predict_normalized(&self, z: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }
}

impl Regressor for LinearRegressor {
    fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        self.check_trained()?;
        if features.len() != self.weights.len() {
            return Err(Error::Evaluation(format!(
                "expected {} features, got {}",
                self.weights.len(),
                features.len()
            )));
        }
        let Normalization { mean, std } = &self.normalization;
        let z: Vec<f64> = features
            .iter()
            .zip(mean.iter().zip(std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        Ok(self.predict_normalized(&z))
    }
}

fn mse(model: &LinearRegressor, z: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    z.iter()
        .zip(y)
        .map(|(x, t)| {
            let e = model.predict_normalized(x) - t;
            e * e
        })
        .sum::<f64>()
        / n
}

/// Fits a linear model by full-batch gradient descent on mean squared
/// error. Weights start at zero and the bias at zero.
pub fn train(feature_names: Vec<String>, samples: &[(Vec<f64>, f64)], config: TrainConfig) -> Result<LinearRegressor> {
    let dim = feature_names.len();
    if samples.len() < dim + 1 {
        return Err(Error::Training(format!(
            "need at least {} samples for {} features, got {}",
            dim + 1,
            dim,
            samples.len()
        )));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Training("learning rate must be positive".into()));
    }
    for (i, (x, t)) in samples.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::Training(format!(
                "sample {i} has {} features, expected {dim}",
                x.len()
            )));
        }
        if !(*t > 0.0 && t.is_finite()) {
            return Err(Error::Training(format!("sample {i} has non-positive target {t}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!("sample {i} has a non-finite feature")));
        }
    }

    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for (x, _) in samples {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; dim];
    for (x, _) in samples {
        for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in std.iter_mut() {
        *s = libm::sqrt(*s);
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let z: Vec<Vec<f64>> = samples
        .iter()
        .map(|(x, _)| {
            x.iter()
                .zip(mean.iter().zip(&std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let y: Vec<f64> = samples.iter().map(|(_, t)| *t).collect();

    let mut model = LinearRegressor {
        feature_names,
        weights: vec![0.0; dim],
        bias: 0.0,
        normalization: Normalization { mean, std },
        training: None,
    };
    let initial_mse = mse(&model, &z, &y);
    let mut grad = vec![0.0; dim];
    for epoch in 0..config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, t) in z.iter().zip(&y) {
            let e = model.predict_normalized(x) - t;
            grad_b += 2.0 * e / n;
            for (g, v) in grad.iter_mut().zip(x) {
                *g += 2.0 * e * v / n;
            }
        }
        model.bias -= config.learning_rate * grad_b;
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        let loss = mse(&model, &z, &y);
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "loss diverged at epoch {epoch}; try a smaller learning rate than {}",
                config.learning_rate
            )));
        }
    }
    let final_mse = mse(&model, &z, &y);
    model.training = Some(TrainingLog {
        epochs: config.epochs,
        initial_mse,
        final_mse,
    });
    Ok(model)
}
