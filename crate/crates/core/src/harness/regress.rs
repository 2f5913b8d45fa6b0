//! Constant-mean baseline, ridge regression and k-nearest-neighbour
//! regressors over dense design matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to column standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelKind {
    Baseline,
    Ridge { lambda: f64 },
    Knn { k: usize },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Ridge { .. } => "ridge",
            ModelKind::Knn { .. } => "knn",
        }
    }
}

/// Per-column centering and scaling.
#[derive(Clone, Debug, PartialEq)]
struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            std.push(var.sqrt().max(STD_FLOOR));
        }
        Standardizer { mean, std }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.std[j])
    }
}

#[derive(Clone, Debug)]
enum Fitted {
    Baseline {
        mean: Vec<f64>,
    },
    Ridge {
        scaler: Standardizer,
        /// Weights on standardized inputs, shape (features, targets).
        weights: DMatrix<f64>,
        y_mean: Vec<f64>,
    },
    Knn {
        scaler: Standardizer,
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        k: usize,
    },
}

/// A fitted regressor. Only obtainable through [`fit`].
#[derive(Clone, Debug)]
pub struct Regressor {
    kind: ModelKind,
    fitted: Fitted,
    n_features: usize,
    n_targets: usize,
    rank_deficient: bool,
}

impl Regressor {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    /// Set when unregularized ridge hit a singular system and returned the
    /// minimum-norm least-squares solution.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    /// Ridge weights mapped back to the original input units, shape
    /// (features, targets), plus the intercept.
    pub fn linear_coefficients(&self) -> Option<(DMatrix<f64>, Vec<f64>)> {
        let Fitted::Ridge {
            scaler,
            weights,
            y_mean,
        } = &self.fitted
        else {
            return None;
        };
        let w = DMatrix::from_fn(weights.nrows(), weights.ncols(), |i, j| weights[(i, j)] / scaler.std[i]);
        let intercept = (0..w.ncols())
            .map(|j| y_mean[j] - (0..w.nrows()).map(|i| scaler.mean[i] * w[(i, j)]).sum::<f64>())
            .collect();
        Some((w, intercept))
    }
}

pub fn fit(kind: ModelKind, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Regressor> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Model("empty training set".into()));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            actual: y.nrows(),
        });
    }
    let y_mean: Vec<f64> = y.column_iter().map(|c| c.iter().sum::<f64>() / y.nrows() as f64).collect();
    let mut rank_deficient = false;
    let fitted = match kind {
        ModelKind::Baseline => Fitted::Baseline { mean: y_mean },
        ModelKind::Ridge { lambda } => {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::Model(format!("ridge lambda must be >= 0, got {lambda}")));
            }
            let scaler = Standardizer::fit(x);
            let xs = scaler.apply(x);
            let yc = DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] - y_mean[j]);
            let (weights, deficient) = ridge_solve(xs, &yc, lambda);
            rank_deficient = deficient;
            Fitted::Ridge {
                scaler,
                weights,
                y_mean,
            }
        }
        ModelKind::Knn { k } => {
            if k == 0 {
                return Err(Error::Model("knn needs k >= 1".into()));
            }
            let scaler = Standardizer::fit(x);
            Fitted::Knn {
                x: scaler.apply(x),
                scaler,
                y: y.clone(),
                k,
            }
        }
    };
    Ok(Regressor {
        kind,
        fitted,
        n_features: x.ncols(),
        n_targets: y.ncols(),
        rank_deficient,
    })
}

/// Solves `(X'X + lambda I) W = X'Y` through the thin SVD of `X`:
/// `W = V diag(s / (s^2 + lambda)) U' Y`. With `lambda = 0`, singular values
/// below the rank tolerance are dropped, giving the minimum-norm solution.
fn ridge_solve(x: DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> (DMatrix<f64>, bool) {
    let (n, p) = x.shape();
    let svd = x.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let tol = s_max * (n.max(p) as f64) * f64::EPSILON;
    let mut rank = 0;
    let shrink: Vec<f64> = s
        .iter()
        .map(|&si| {
            if si > tol {
                rank += 1;
            }
            if lambda > 0.0 {
                si / (si * si + lambda)
            } else if si > tol {
                1.0 / si
            } else {
                0.0
            }
        })
        .collect();
    let mut uty = u.transpose() * y;
    for (i, f) in shrink.iter().enumerate() {
        uty.row_mut(i).scale_mut(*f);
    }
    let w = v_t.transpose() * uty;
    (w, lambda == 0.0 && rank < p)
}

pub fn predict(r: &Regressor, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != r.n_features {
        return Err(Error::Dimension {
            expected: r.n_features,
            actual: x.ncols(),
        });
    }
    let m = x.nrows();
    Ok(match &r.fitted {
        Fitted::Baseline { mean } => DMatrix::from_fn(m, mean.len(), |_, j| mean[j]),
        Fitted::Ridge {
            scaler,
            weights,
            y_mean,
        } => {
            let mut out = scaler.apply(x) * weights;
            for (j, mut col) in out.column_iter_mut().enumerate() {
                col.add_scalar_mut(y_mean[j]);
            }
            out
        }
        Fitted::Knn { scaler, x: train, y, k } => {
            let q = scaler.apply(x);
            let k = (*k).min(train.nrows());
            let mut out = DMatrix::zeros(m, y.ncols());
            let mut dist: Vec<(f64, usize)> = Vec::with_capacity(train.nrows());
            for i in 0..m {
                dist.clear();
                for t in 0..train.nrows() {
                    let d: f64 = (0..train.ncols())
                        .map(|j| {
                            let e = q[(i, j)] - train[(t, j)];
                            e * e
                        })
                        .sum();
                    dist.push((d, t));
                }
                // ties go to the lower training index
                dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(_, t) in &dist[..k] {
                    for j in 0..y.ncols() {
                        out[(i, j)] += y[(t, j)];
                    }
                }
                for j in 0..y.ncols() {
                    out[(i, j)] /= k as f64;
                }
            }
            out
        }
    })
}
