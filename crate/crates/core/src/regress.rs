//! Linear model training and evaluation.
//!
//! Both solvers standardize features internally and embed the fitted
//! [`Scaler`] in the model, so [`LinearModel::predict`] always takes raw
//! physical units. [`fit_ols`] solves the ridge normal equations
//! `(Z'Z + lambda*I')beta = Z'y` on the standardized design matrix with a
//! trailing ones column, where `I'` is the identity with a zero at the bias
//! position (the bias is never penalized). [`fit_sgd`] runs seeded mini-batch
//! gradient descent on the mean squared error with the matching `lambda/n`
//! weight penalty, so for any `lambda` the two solvers target the same
//! minimizer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::datapipe::{self, Dataset, DatapipeError, FeatureRole, Scaler};
use crate::record::Record;

#[derive(Debug, Error)]
pub enum RegressError {
    #[error(transparent)]
    Data(#[from] DatapipeError),
    #[error("SingularSystem: normal equations are singular (collinear features); ridge lambda > 0 would regularize")]
    SingularSystem,
    #[error("TooFewRows: need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("Diverged: non-finite parameters at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("DimensionMismatch: model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("NonFiniteInput: feature {index} is not finite")]
    NonFiniteInput { index: usize },
    #[error("EmptyDataset: nothing to evaluate")]
    EmptyDataset,
    #[error("BadConfig: {0}")]
    BadConfig(String),
    #[error("FoldFailed: fold {fold}: {source}")]
    FoldFailed {
        fold: usize,
        source: Box<RegressError>,
    },
}

// --- Model ---

/// A fitted affine model over standardized features.
///
/// Prediction takes raw units: `b + sum_j w_j * (x_j - mu_j) / sigma_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
    scaler: Scaler,
    features: Vec<FeatureRole>,
}

impl LinearModel {
    pub fn new(
        weights: Vec<f64>,
        bias: f64,
        scaler: Scaler,
        features: Vec<FeatureRole>,
    ) -> Result<Self, RegressError> {
        if weights.len() != features.len() || scaler.n_features() != features.len() {
            return Err(RegressError::DimensionMismatch {
                expected: features.len(),
                got: weights.len().max(scaler.n_features()),
            });
        }
        if features.is_empty() {
            return Err(RegressError::Data(DatapipeError::EmptyFeatureSet));
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(RegressError::Data(DatapipeError::NonFiniteValue(
                "model parameters must be finite".to_string(),
            )));
        }
        Ok(Self {
            weights,
            bias,
            scaler,
            features,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn features(&self) -> &[FeatureRole] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Predicts from a raw-unit feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressError> {
        if x.len() != self.weights.len() {
            return Err(RegressError::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        let mut acc = self.bias;
        for (j, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(RegressError::NonFiniteInput { index: j });
            }
            acc += self.weights[j] * (v - self.scaler.means()[j]) / self.scaler.stds()[j];
        }
        Ok(acc)
    }
}

// --- Training configuration ---

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Ols,
    Sgd,
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Solver::Ols => "ols",
            Solver::Sgd => "sgd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub solver: Solver,
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Ols,
            lambda: 0.0,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 200,
            seed: 42,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), RegressError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(RegressError::BadConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RegressError::BadConfig(format!(
                "learning rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(RegressError::BadConfig("batch size must be >= 1".to_string()));
        }
        if self.epochs == 0 {
            return Err(RegressError::BadConfig("epochs must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Fits with the solver selected in the config.
pub fn fit(ds: &Dataset, cfg: &TrainConfig) -> Result<LinearModel, RegressError> {
    match cfg.solver {
        Solver::Ols => fit_ols(ds, cfg.lambda),
        Solver::Sgd => fit_sgd(ds, cfg),
    }
}

// --- OLS ---

/// Solves the ridge normal equations exactly on standardized features.
pub fn fit_ols(ds: &Dataset, lambda: f64) -> Result<LinearModel, RegressError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(RegressError::BadConfig(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let d = ds.n_features();
    let n = ds.n_rows();
    if n < d + 1 {
        return Err(RegressError::TooFewRows { needed: d + 1, got: n });
    }
    let scaler = datapipe::fit_scaler(ds)?;
    let z = datapipe::transform(&scaler, ds)?;

    // G = Z'Z and rhs = Z'y over the augmented design [z | 1],
    // bias coordinate last and never penalized.
    let m = d + 1;
    let mut g = vec![vec![0.0f64; m]; m];
    let mut rhs = vec![0.0f64; m];
    for i in 0..n {
        let row = z.row(i);
        let y = z.y()[i];
        for j in 0..d {
            for k in j..d {
                g[j][k] += row[j] * row[k];
            }
            g[j][d] += row[j];
            rhs[j] += row[j] * y;
        }
        g[d][d] += 1.0;
        rhs[d] += y;
    }
    for j in 0..m {
        for k in 0..j {
            g[j][k] = g[k][j];
        }
    }
    for j in 0..d {
        g[j][j] += lambda;
    }

    let beta = solve_linear(g, rhs).ok_or(RegressError::SingularSystem)?;
    let (weights, bias) = beta.split_at(d);
    LinearModel::new(
        weights.to_vec(),
        bias[0],
        scaler,
        ds.features().to_vec(),
    )
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    let tol = scale * 1e-12;

    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= tol {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..m {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; m];
    for col in (0..m).rev() {
        let mut acc = b[col];
        for k in col + 1..m {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

// --- SGD ---

/// Seeded mini-batch gradient descent on the mean squared error.
///
/// Parameters start at zero; each epoch reshuffles the row order from the
/// carried seeded stream, so a given `(data, config)` pair always produces
/// bit-identical parameters.
pub fn fit_sgd(ds: &Dataset, cfg: &TrainConfig) -> Result<LinearModel, RegressError> {
    cfg.validate()?;
    let d = ds.n_features();
    let n = ds.n_rows();
    if n < d + 1 {
        return Err(RegressError::TooFewRows { needed: d + 1, got: n });
    }
    let scaler = datapipe::fit_scaler(ds)?;
    let z = datapipe::transform(&scaler, ds)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let ridge = 2.0 * cfg.lambda / n as f64;
    let mut gw = vec![0.0f64; d];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            gw.fill(0.0);
            let mut gb = 0.0f64;
            for &i in batch {
                let row = z.row(i);
                let mut err = b - z.y()[i];
                for j in 0..d {
                    err += w[j] * row[j];
                }
                for j in 0..d {
                    gw[j] += err * row[j];
                }
                gb += err;
            }
            let inv = 2.0 / batch.len() as f64;
            for j in 0..d {
                w[j] -= cfg.learning_rate * (inv * gw[j] + ridge * w[j]);
            }
            b -= cfg.learning_rate * inv * gb;
            if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(RegressError::Diverged { epoch });
            }
        }
    }
    LinearModel::new(w, b, scaler, ds.features().to_vec())
}

// --- Evaluation ---

/// Regression quality on one dataset.
///
/// `accuracy_pct` is the share of predictions whose absolute residual is
/// within the caller-supplied tolerance `tau`, as a percentage. When the
/// target is constant (`SST = 0`), `r2` is 1.0 for a perfect fit and
/// `-inf` otherwise, with `degenerate_target` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    pub accuracy_pct: f64,
    pub tau: f64,
    pub n: usize,
    pub degenerate_target: bool,
}

impl Metrics {
    pub fn to_record(&self) -> Record {
        let mut rec = Record::new("metrics")
            .field("mse", self.mse)
            .field("rmse", self.rmse)
            .field("r2", self.r2)
            .field("accuracy_pct", self.accuracy_pct)
            .field("tau", self.tau)
            .field("n", self.n);
        if self.degenerate_target {
            rec = rec.field("degenerate_target", 1);
        }
        rec
    }
}

/// Computes mse, rmse, r2, and tolerance accuracy of a model on a dataset.
pub fn evaluate(model: &LinearModel, ds: &Dataset, tau: f64) -> Result<Metrics, RegressError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(RegressError::BadConfig(format!(
            "tau must be finite and > 0, got {tau}"
        )));
    }
    if ds.n_features() != model.n_features() {
        return Err(RegressError::DimensionMismatch {
            expected: model.n_features(),
            got: ds.n_features(),
        });
    }
    let n = ds.n_rows();
    if n == 0 {
        return Err(RegressError::EmptyDataset);
    }

    let y_mean = ds.y().iter().sum::<f64>() / n as f64;
    let mut sse = 0.0f64;
    let mut sst = 0.0f64;
    let mut within = 0usize;
    for i in 0..n {
        let pred = model.predict(ds.row(i))?;
        let err = pred - ds.y()[i];
        sse += err * err;
        sst += (ds.y()[i] - y_mean) * (ds.y()[i] - y_mean);
        if err.abs() <= tau {
            within += 1;
        }
    }
    let mse = sse / n as f64;
    let degenerate = sst == 0.0;
    let r2 = if degenerate {
        if sse == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - sse / sst
    };
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        r2,
        accuracy_pct: 100.0 * within as f64 / n as f64,
        tau,
        n,
        degenerate_target: degenerate,
    })
}

// --- Cross-validation ---

/// Per-fold metrics plus mean/sample-std aggregates over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CVReport {
    pub k: usize,
    pub folds: Vec<Metrics>,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub r2_mean: f64,
    pub r2_std: f64,
}

impl CVReport {
    pub fn summary_record(&self) -> Record {
        Record::new("cv_summary")
            .field("k", self.k)
            .field("mse_mean", self.mse_mean)
            .field("mse_std", self.mse_std)
            .field("r2_mean", self.r2_mean)
            .field("r2_std", self.r2_std)
    }

    pub fn fold_records(&self) -> Vec<Record> {
        self.folds
            .iter()
            .enumerate()
            .map(|(i, m)| {
                Record::new("cv_fold")
                    .field("fold", i)
                    .field("mse", m.mse)
                    .field("r2", m.r2)
                    .field("accuracy_pct", m.accuracy_pct)
                    .field("n", m.n)
            })
            .collect()
    }
}

/// Seeded k-fold cross-validation: one shuffle, k contiguous folds whose
/// sizes differ by at most one, each fold scored by a model fitted on the
/// remaining rows.
pub fn cross_validate(
    ds: &Dataset,
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
    tau: f64,
) -> Result<CVReport, RegressError> {
    if k < 2 {
        return Err(RegressError::BadConfig(format!("k must be >= 2, got {k}")));
    }
    let n = ds.n_rows();
    if n < k {
        return Err(RegressError::TooFewRows { needed: k, got: n });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let test_idx = &indices[start..start + size];
        let train_idx: Vec<usize> = indices[..start]
            .iter()
            .chain(indices[start + size..].iter())
            .copied()
            .collect();
        start += size;

        let wrap = |source: RegressError| RegressError::FoldFailed {
            fold,
            source: Box::new(source),
        };
        let train = ds.subset_rows(&train_idx).map_err(|e| wrap(e.into()))?;
        let test = ds.subset_rows(test_idx).map_err(|e| wrap(e.into()))?;
        let model = fit(&train, cfg).map_err(wrap)?;
        folds.push(evaluate(&model, &test, tau).map_err(wrap)?);
    }

    let (mse_mean, mse_std, _) =
        datapipe::mean_and_std(folds.iter().map(|m| m.mse));
    let (r2_mean, r2_std, _) = datapipe::mean_and_std(folds.iter().map(|m| m.r2));
    Ok(CVReport {
        k,
        folds,
        mse_mean,
        mse_std,
        r2_mean,
        r2_std,
    })
}

// --- Tests ---
