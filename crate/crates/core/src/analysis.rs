//! Feature-combination sweeps, sensitivity indices, and raw coefficients.
//!
//! The sweep draws one split and reuses it for every combination, so
//! combinations compete on identical rows. Sensitivity comes in two exact
//! (for affine models) flavors: SRC is the normalized magnitude of the
//! standardized weights, OAT probes the model one feature at a time at
//! plus/minus one standard deviation around the data mean.

use thiserror::Error;

use crate::datapipe::{self, Dataset, DatapipeError, FeatureRole, SplitSpec};
use crate::record::Record;
use crate::regress::{self, LinearModel, Metrics, RegressError, TrainConfig};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Data(#[from] DatapipeError),
    #[error("FeatureMismatch: model has [{model}], dataset has [{data}]")]
    FeatureMismatch { model: String, data: String },
    #[error("DegenerateModel: all weights are zero, sensitivity is undefined")]
    DegenerateModel,
    #[error("NoCombos: at least one feature combination is required")]
    NoCombos,
    #[error("ComboFailed: combo '{combo}': {source}")]
    ComboFailed {
        combo: String,
        source: Box<AnalysisError>,
    },
}

/// `"co+temperature"`-style label for a feature combination.
pub fn combo_label(features: &[FeatureRole]) -> String {
    features
        .iter()
        .map(|r| r.name())
        .collect::<Vec<_>>()
        .join("+")
}

/// The four standard combinations swept by default.
pub fn default_combos() -> Vec<Vec<FeatureRole>> {
    vec![
        vec![FeatureRole::Temperature, FeatureRole::Pressure],
        vec![FeatureRole::Temperature, FeatureRole::Co],
        vec![FeatureRole::Pressure, FeatureRole::Co],
        vec![FeatureRole::Temperature, FeatureRole::Pressure, FeatureRole::Co],
    ]
}

// --- Feature sweep ---

/// One swept combination with its train and test metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub features: Vec<FeatureRole>,
    pub train: Metrics,
    pub test: Metrics,
}

/// All swept combinations plus a ranking (indices into `entries`, best
/// first, by test accuracy with test r2 as the tiebreak).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    pub ranking: Vec<usize>,
}

impl SweepReport {
    pub fn best(&self) -> &SweepEntry {
        &self.entries[self.ranking[0]]
    }

    /// Rank of each entry, aligned with `entries` (1 = best).
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.entries.len()];
        for (place, &idx) in self.ranking.iter().enumerate() {
            ranks[idx] = place + 1;
        }
        ranks
    }

    pub fn records(&self) -> Vec<Record> {
        let ranks = self.ranks();
        let mut out: Vec<Record> = self
            .entries
            .iter()
            .zip(&ranks)
            .map(|(e, rank)| {
                Record::new("sweep")
                    .field("combo", combo_label(&e.features))
                    .field("rank", rank)
                    .field("accuracy_pct", e.test.accuracy_pct)
                    .field("r2", e.test.r2)
                    .field("mse", e.test.mse)
                    .field("train_r2", e.train.r2)
                    .field("n_test", e.test.n)
            })
            .collect();
        let order = self
            .ranking
            .iter()
            .map(|&i| combo_label(&self.entries[i].features))
            .collect::<Vec<_>>()
            .join(";");
        out.push(Record::new("sweep_ranking").field("order", order));
        out
    }
}

/// Trains and scores every combination on one shared split of `ds`.
pub fn feature_sweep(
    ds: &Dataset,
    combos: &[Vec<FeatureRole>],
    cfg: &TrainConfig,
    split: &SplitSpec,
    tau: f64,
) -> Result<SweepReport, AnalysisError> {
    if combos.is_empty() {
        return Err(AnalysisError::NoCombos);
    }
    let (train_idx, test_idx) = datapipe::split_indices(ds.n_rows(), split)?;

    let mut entries = Vec::with_capacity(combos.len());
    for combo in combos {
        let run = || -> Result<SweepEntry, AnalysisError> {
            let projected = ds.select_features(combo)?;
            let train = projected.subset_rows(&train_idx)?;
            let test = projected.subset_rows(&test_idx)?;
            let model = regress::fit(&train, cfg)?;
            Ok(SweepEntry {
                features: combo.clone(),
                train: regress::evaluate(&model, &train, tau)?,
                test: regress::evaluate(&model, &test, tau)?,
            })
        };
        entries.push(run().map_err(|source| AnalysisError::ComboFailed {
            combo: combo_label(combo),
            source: Box::new(source),
        })?);
    }

    let mut ranking: Vec<usize> = (0..entries.len()).collect();
    ranking.sort_by(|&a, &b| {
        let ea = &entries[a].test;
        let eb = &entries[b].test;
        eb.accuracy_pct
            .total_cmp(&ea.accuracy_pct)
            .then(eb.r2.total_cmp(&ea.r2))
            .then(a.cmp(&b))
    });
    Ok(SweepReport { entries, ranking })
}

// --- Sensitivity ---

/// Normalized SRC and OAT indices, aligned with `features`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub features: Vec<FeatureRole>,
    pub src: Vec<f64>,
    pub oat: Vec<f64>,
}

impl SensitivityReport {
    fn order_of(&self, values: &[f64]) -> Vec<FeatureRole> {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        idx.into_iter().map(|i| self.features[i]).collect()
    }

    /// Features ordered by descending SRC.
    pub fn src_order(&self) -> Vec<FeatureRole> {
        self.order_of(&self.src)
    }

    /// Features ordered by descending OAT.
    pub fn oat_order(&self) -> Vec<FeatureRole> {
        self.order_of(&self.oat)
    }

    pub fn records(&self) -> Vec<Record> {
        let join = |roles: Vec<FeatureRole>| {
            roles
                .iter()
                .map(|r| r.name())
                .collect::<Vec<_>>()
                .join(">")
        };
        let mut out: Vec<Record> = self
            .features
            .iter()
            .enumerate()
            .map(|(j, role)| {
                Record::new("sensitivity")
                    .field("feature", role)
                    .field("src", self.src[j])
                    .field("oat", self.oat[j])
            })
            .collect();
        out.push(
            Record::new("ordering")
                .field("src", join(self.src_order()))
                .field("oat", join(self.oat_order())),
        );
        out
    }
}

fn sensitivity_at(
    model: &LinearModel,
    means: &[f64],
    stds: &[f64],
) -> Result<SensitivityReport, AnalysisError> {
    let d = model.n_features();
    let src_raw: Vec<f64> = model.weights().iter().map(|w| w.abs()).collect();
    let src_max = src_raw.iter().fold(0.0f64, |a, &b| a.max(b));
    if src_max == 0.0 {
        return Err(AnalysisError::DegenerateModel);
    }

    let mut oat_raw = Vec::with_capacity(d);
    let mut probe = means.to_vec();
    for j in 0..d {
        probe[j] = means[j] + stds[j];
        let up = model.predict(&probe)?;
        probe[j] = means[j] - stds[j];
        let down = model.predict(&probe)?;
        probe[j] = means[j];
        oat_raw.push((up - down).abs() / 2.0);
    }
    let oat_max = oat_raw.iter().fold(0.0f64, |a, &b| a.max(b));
    if oat_max == 0.0 {
        return Err(AnalysisError::DegenerateModel);
    }

    Ok(SensitivityReport {
        features: model.features().to_vec(),
        src: src_raw.iter().map(|v| v / src_max).collect(),
        oat: oat_raw.iter().map(|v| v / oat_max).collect(),
    })
}

/// Sensitivity of a model around the sample statistics of `ds`.
///
/// For an affine model probed at the statistics it was trained on, the OAT
/// index reduces to `|w_j|` and both indices agree exactly.
pub fn sensitivity(model: &LinearModel, ds: &Dataset) -> Result<SensitivityReport, AnalysisError> {
    if model.features() != ds.features() {
        return Err(AnalysisError::FeatureMismatch {
            model: combo_label(model.features()),
            data: combo_label(ds.features()),
        });
    }
    let scaler = datapipe::fit_scaler(ds)?;
    sensitivity_at(model, scaler.means(), scaler.stds())
}

/// Sensitivity probed at the model's own embedded scaler statistics, for
/// when no dataset is at hand.
pub fn sensitivity_from_scaler(model: &LinearModel) -> Result<SensitivityReport, AnalysisError> {
    sensitivity_at(model, model.scaler().means(), model.scaler().stds())
}

// --- Raw coefficients ---

/// The model rewritten in raw physical units:
/// `prediction = intercept + sum_j slopes_j * x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCoefficients {
    pub features: Vec<FeatureRole>,
    pub slopes: Vec<f64>,
    pub intercept: f64,
}

impl RawCoefficients {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + x.iter()
                .zip(&self.slopes)
                .map(|(v, s)| v * s)
                .sum::<f64>()
    }

    pub fn to_record(&self) -> Record {
        let mut rec = Record::new("raw_coefficients");
        for (role, slope) in self.features.iter().zip(&self.slopes) {
            rec = rec.field(format!("slope_{role}"), *slope);
        }
        rec.field("intercept", self.intercept)
    }
}

/// Folds the embedded scaler back into per-unit slopes and an intercept.
pub fn raw_coefficients(model: &LinearModel) -> RawCoefficients {
    let scaler = model.scaler();
    let slopes: Vec<f64> = model
        .weights()
        .iter()
        .zip(scaler.stds())
        .map(|(w, s)| w / s)
        .collect();
    let intercept = model.bias()
        - slopes
            .iter()
            .zip(scaler.means())
            .map(|(s, m)| s * m)
            .sum::<f64>();
    RawCoefficients {
        features: model.features().to_vec(),
        slopes,
        intercept,
    }
}

// --- Tests ---

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::Scaler;
    use crate::regress::fit_ols;
    use crate::testutil::{planted, PlantedSpec};

    fn unit_stats_dataset(roles: Vec<FeatureRole>) -> Dataset {
        // every column is [-1, 0, 1]: mean 0, sample std exactly 1
        let d = roles.len();
        let mut x = Vec::new();
        for v in [-1.0f64, 0.0, 1.0] {
            x.extend(std::iter::repeat(v).take(d));
        }
        Dataset::new(x, vec![0.0, 1.0, 2.0], roles).unwrap()
    }

    fn model_with_weights(weights: Vec<f64>, roles: Vec<FeatureRole>) -> LinearModel {
        let d = weights.len();
        LinearModel::new(
            weights,
            5.0,
            Scaler::new(vec![0.0; d], vec![1.0; d]).unwrap(),
            roles,
        )
        .unwrap()
    }

    // --- default combos ---

    #[test]
    fn default_combos_are_the_four_standard_sets() {
        let combos = default_combos();
        assert_eq!(combos.len(), 4);
        assert_eq!(combo_label(&combos[0]), "temperature+pressure");
        assert_eq!(combo_label(&combos[1]), "temperature+co");
        assert_eq!(combo_label(&combos[2]), "pressure+co");
        assert_eq!(combo_label(&combos[3]), "temperature+pressure+co");
    }

    // --- feature sweep ---

    #[test]
    fn sweep_ranks_full_combo_first_on_three_feature_data() {
        let ds = planted(&PlantedSpec {
            n: 600,
            noise: 0.1,
            seed: 17,
            ..PlantedSpec::default()
        });
        let report = feature_sweep(
            &ds,
            &default_combos(),
            &TrainConfig::default(),
            &SplitSpec::default(),
            0.5,
        )
        .unwrap();
        assert_eq!(
            combo_label(&report.best().features),
            "temperature+pressure+co"
        );
        // every pair leaves one strong feature unexplained
        for &idx in &report.ranking[1..] {
            assert!(report.entries[idx].test.accuracy_pct < report.best().test.accuracy_pct);
        }
    }

    #[test]
    fn sweep_nesting_superset_training_fit_is_no_worse() {
        let ds = planted(&PlantedSpec {
            n: 400,
            noise: 0.5,
            seed: 23,
            ..PlantedSpec::default()
        });
        let report = feature_sweep(
            &ds,
            &default_combos(),
            &TrainConfig::default(),
            &SplitSpec::default(),
            1.0,
        )
        .unwrap();
        let full_r2 = report.entries[3].train.r2;
        for entry in &report.entries[..3] {
            assert!(full_r2 >= entry.train.r2 - 1e-9);
        }
    }

    #[test]
    fn sweep_uses_one_shared_split() {
        let ds = planted(&PlantedSpec {
            n: 97,
            ..PlantedSpec::default()
        });
        let report = feature_sweep(
            &ds,
            &default_combos(),
            &TrainConfig::default(),
            &SplitSpec::default(),
            1.0,
        )
        .unwrap();
        for entry in &report.entries {
            assert_eq!(entry.test.n, report.entries[0].test.n);
            assert_eq!(entry.train.n, report.entries[0].train.n);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let ds = planted(&PlantedSpec::default());
        let run = || {
            feature_sweep(
                &ds,
                &default_combos(),
                &TrainConfig::default(),
                &SplitSpec::default(),
                1.0,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sweep_single_combo_and_empty_combos() {
        let ds = planted(&PlantedSpec::default());
        let report = feature_sweep(
            &ds,
            &[vec![FeatureRole::Co]],
            &TrainConfig::default(),
            &SplitSpec::default(),
            1.0,
        )
        .unwrap();
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.ranking, [0]);
        assert!(matches!(
            feature_sweep(&ds, &[], &TrainConfig::default(), &SplitSpec::default(), 1.0),
            Err(AnalysisError::NoCombos)
        ));
    }

    #[test]
    fn sweep_tags_failures_with_the_combo() {
        let ds = planted(&PlantedSpec::default());
        let narrow = ds.select_features(&[FeatureRole::Co]).unwrap();
        let err = feature_sweep(
            &narrow,
            &default_combos(),
            &TrainConfig::default(),
            &SplitSpec::default(),
            1.0,
        )
        .unwrap_err();
        match err {
            AnalysisError::ComboFailed { combo, .. } => {
                assert_eq!(combo, "temperature+pressure");
            }
            other => panic!("expected ComboFailed, got {other}"),
        }
    }

    // --- sensitivity ---

    #[test]
    fn sensitivity_known_weights_give_known_ordering() {
        let roles = vec![FeatureRole::Co, FeatureRole::Pressure, FeatureRole::Temperature];
        let model = model_with_weights(vec![0.85, 0.65, 0.45], roles.clone());
        let ds = unit_stats_dataset(roles.clone());
        let report = sensitivity(&model, &ds).unwrap();
        assert_eq!(report.src_order(), roles);
        assert_eq!(report.oat_order(), roles);
        assert!((report.src[0] - 1.0).abs() < 1e-12);
        assert!((report.src[1] - 0.65 / 0.85).abs() < 1e-12);
        assert!((report.src[2] - 0.45 / 0.85).abs() < 1e-12);
        for (s, o) in report.src.iter().zip(&report.oat) {
            assert!((s - o).abs() < 1e-12);
        }
    }

    #[test]
    fn sensitivity_equal_weights_all_one() {
        let roles = vec![FeatureRole::Co, FeatureRole::Temperature];
        let model = model_with_weights(vec![0.3, -0.3], roles.clone());
        let report = sensitivity_from_scaler(&model).unwrap();
        assert_eq!(report.src, [1.0, 1.0]);
        assert_eq!(report.oat, [1.0, 1.0]);
    }

    #[test]
    fn sensitivity_zero_model_is_degenerate() {
        let roles = vec![FeatureRole::Co];
        let model = model_with_weights(vec![0.0], roles);
        assert!(matches!(
            sensitivity_from_scaler(&model),
            Err(AnalysisError::DegenerateModel)
        ));
    }

    #[test]
    fn sensitivity_feature_mismatch() {
        let model = model_with_weights(vec![1.0], vec![FeatureRole::Co]);
        let ds = unit_stats_dataset(vec![FeatureRole::Temperature]);
        assert!(matches!(
            sensitivity(&model, &ds),
            Err(AnalysisError::FeatureMismatch { .. })
        ));
    }

    #[test]
    fn oat_ordering_matches_src_ordering_on_fitted_models() {
        for seed in 0..25u64 {
            let spec = PlantedSpec {
                n: 80,
                seed,
                noise: 0.05,
                slopes: [
                    1.0 + seed as f64 * 0.37,
                    0.2 + (seed % 7) as f64,
                    -0.5 - (seed % 3) as f64,
                ],
                ..PlantedSpec::default()
            };
            let ds = planted(&spec);
            let model = fit_ols(&ds, 0.0).unwrap();
            let report = sensitivity(&model, &ds).unwrap();
            assert_eq!(
                report.src_order(),
                report.oat_order(),
                "seed {seed} disagreed"
            );
            assert_eq!(report.src_order()[0], report.oat_order()[0]);
        }
    }

    #[test]
    fn src_ordering_survives_unit_rescaling() {
        let spec = PlantedSpec {
            n: 120,
            noise: 0.0,
            seed: 31,
            ..PlantedSpec::default()
        };
        let ds = planted(&spec);
        let base = sensitivity(&fit_ols(&ds, 0.0).unwrap(), &ds).unwrap();

        // re-express co in different units (x1000)
        let mut x = Vec::with_capacity(ds.n_rows() * 3);
        for i in 0..ds.n_rows() {
            let row = ds.row(i);
            x.extend_from_slice(&[row[0] * 1000.0, row[1], row[2]]);
        }
        let scaled = Dataset::new(x, ds.y().to_vec(), ds.features().to_vec()).unwrap();
        let rescaled = sensitivity(&fit_ols(&scaled, 0.0).unwrap(), &scaled).unwrap();
        assert_eq!(base.src_order(), rescaled.src_order());
        for (a, b) in base.src.iter().zip(&rescaled.src) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    // --- raw coefficients ---

    #[test]
    fn raw_coefficients_recover_exact_line() {
        let ds = Dataset::new(
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![FeatureRole::Co],
        )
        .unwrap();
        let raw = raw_coefficients(&fit_ols(&ds, 0.0).unwrap());
        assert!((raw.slopes[0] - 2.0).abs() < 1e-9);
        assert!(raw.intercept.abs() < 1e-9);
    }

    #[test]
    fn raw_coefficients_reproduce_model_predictions() {
        let ds = planted(&PlantedSpec {
            n: 150,
            seed: 77,
            ..PlantedSpec::default()
        });
        let model = fit_ols(&ds, 0.0).unwrap();
        let raw = raw_coefficients(&model);
        for i in (0..ds.n_rows()).step_by(13) {
            let x = ds.row(i);
            let a = model.predict(x).unwrap();
            let b = raw.predict(x);
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn identity_scaler_means_raw_equals_standardized() {
        let model = model_with_weights(vec![2.0, -1.0], vec![FeatureRole::Co, FeatureRole::Pressure]);
        let raw = raw_coefficients(&model);
        assert_eq!(raw.slopes, model.weights());
        assert_eq!(raw.intercept, model.bias());
    }
}
