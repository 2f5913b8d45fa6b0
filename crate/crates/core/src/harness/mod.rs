//! Epicenter-retrieval experiment: design matrices from dataset records,
//! model fitting and mean-squared-error evaluation.

pub mod features;
pub mod regress;

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};

pub use features::{features, FeatureVector};
pub use regress::{fit, predict, ModelKind, Regressor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// All traces of a record flattened into one row.
    Raw,
    /// Per-trace summary statistics.
    Features,
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(InputMode::Raw),
            "features" => Ok(InputMode::Features),
            other => Err(Error::config("input_mode", format!("expected raw or features, got `{other}`"))),
        }
    }
}

pub fn design_matrix(records: &[DatasetRecord], mode: InputMode) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| match mode {
            InputMode::Raw => r.seismograms.iter().flat_map(|s| s.samples.iter().copied()).collect(),
            InputMode::Features => features(r).values,
        })
        .collect();
    let width = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Dimension {
            expected: width,
            actual: rows[bad].len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

pub fn targets(records: &[DatasetRecord]) -> Result<DMatrix<f64>> {
    let dim = records.first().map_or(0, |r| r.epicenter.len());
    if records.iter().any(|r| r.epicenter.len() != dim) {
        return Err(Error::Model("records disagree on epicenter dimensionality".into()));
    }
    Ok(DMatrix::from_fn(records.len(), dim, |i, j| records[i].epicenter[j]))
}

pub fn train(kind: ModelKind, records: &[DatasetRecord], mode: InputMode) -> Result<Regressor> {
    fit(kind, &design_matrix(records, mode)?, &targets(records)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub index: u64,
    pub target: Vec<f64>,
    pub prediction: Vec<f64>,
    pub residual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub input_mode: InputMode,
    pub test_records: usize,
    pub per_coordinate_mse: Vec<f64>,
    pub total_mse: f64,
    /// Unregularized ridge fell back to the minimum-norm solution.
    pub rank_deficient: bool,
    pub residuals: Vec<Residual>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// `index,target_0..,prediction_0..,residual_0..` with shortest
    /// round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.per_coordinate_mse.len();
        let mut header = vec!["index".to_string()];
        for prefix in ["target", "prediction", "residual"] {
            header.extend((0..dim).map(|j| format!("{prefix}_{j}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for r in &self.residuals {
            let mut row = vec![r.index.to_string()];
            for vals in [&r.target, &r.prediction, &r.residual] {
                row.extend(vals.iter().map(|v| format!("{v:?}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Per-coordinate mean squared error of `model` on `records`.
pub fn evaluate(model: &Regressor, records: &[DatasetRecord], mode: InputMode) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Model("empty test set".into()));
    }
    let x = design_matrix(records, mode)?;
    let y = targets(records)?;
    let p = predict(model, &x)?;
    if p.ncols() != y.ncols() {
        return Err(Error::Dimension {
            expected: p.ncols(),
            actual: y.ncols(),
        });
    }
    let n = records.len() as f64;
    let per_coordinate_mse: Vec<f64> = (0..y.ncols())
        .map(|j| (0..y.nrows()).map(|i| (p[(i, j)] - y[(i, j)]).powi(2)).sum::<f64>() / n)
        .collect();
    let total_mse = per_coordinate_mse.iter().sum::<f64>() / per_coordinate_mse.len().max(1) as f64;
    let residuals = records
        .iter()
        .enumerate()
        .map(|(i, r)| Residual {
            index: r.index,
            target: y.row(i).iter().copied().collect(),
            prediction: p.row(i).iter().copied().collect(),
            residual: (0..y.ncols()).map(|j| p[(i, j)] - y[(i, j)]).collect(),
        })
        .collect();
    Ok(EvalReport {
        model: model.kind(),
        input_mode: mode,
        test_records: records.len(),
        per_coordinate_mse,
        total_mse,
        rank_deficient: model.rank_deficient(),
        residuals,
    })
}
