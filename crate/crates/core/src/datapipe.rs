//! CSV ingestion, imputation, standardization, and dataset splitting.
//!
//! Raw air-quality exports name their columns freely, so everything enters
//! through a [`ColumnMapping`] that binds source columns to the four
//! canonical roles: `co`, `temperature`, `pressure`, and the `ozone` target.
//! Tables keep cells as `Option<f64>` until [`impute`] resolves them; from
//! [`to_dataset`] on, data is dense and finite.
//!
//! All randomness (the shuffled split) is driven by a caller-supplied seed
//! and is reproducible bit-for-bit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::record::Record;

/// Relative threshold under which a sample standard deviation counts as zero.
///
/// A constant column accumulates rounding dust of order 1e-17 through the
/// mean, which must still be rejected as zero variance rather than divided by.
const ZERO_VARIANCE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DatapipeError {
    #[error("FileNotFound: {0}")]
    FileNotFound(String),
    #[error("Io: {0}")]
    Io(String),
    #[error("HeaderMissing: {0} has no usable header row")]
    HeaderMissing(String),
    #[error("MalformedCsv: {0}")]
    MalformedCsv(String),
    #[error("EmptyMapping: no column roles mapped")]
    EmptyMapping,
    #[error("MalformedMapping: {0}")]
    MalformedMapping(String),
    #[error("MappedColumnAbsent: column '{0}' not found in header")]
    MappedColumnAbsent(String),
    #[error("MalformedTable: {0}")]
    MalformedTable(String),
    #[error("EmptyTable: table has no rows")]
    EmptyTable,
    #[error("AllRowsDropped: imputation removed every row")]
    AllRowsDropped,
    #[error("EmptyColumn: column '{0}' has no observed values")]
    EmptyColumn(String),
    #[error("MissingValuesPresent: column '{column}' row {row}")]
    MissingValuesPresent { column: String, row: usize },
    #[error("UnknownFeature: {0}")]
    UnknownFeature(String),
    #[error("DuplicateFeature: {0}")]
    DuplicateFeature(FeatureRole),
    #[error("EmptyFeatureSet: at least one feature is required")]
    EmptyFeatureSet,
    #[error("NonFiniteValue: {0}")]
    NonFiniteValue(String),
    #[error("TooFewRows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("ZeroVariance: feature '{0}' is constant")]
    ZeroVariance(FeatureRole),
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("BadSplitFraction: {0} is outside (0, 1)")]
    BadSplitFraction(f64),
    #[error("DegenerateSplit: both partitions must be non-empty")]
    DegenerateSplit,
}

// --- Roles and mapping ---

/// Canonical column roles, in canonical order.
///
/// The discriminants double as the on-disk role codes of the artifact
/// format, so they must not be reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FeatureRole {
    Co = 0,
    Temperature = 1,
    Pressure = 2,
    Ozone = 3,
}

impl FeatureRole {
    pub const ALL: [FeatureRole; 4] = [
        FeatureRole::Co,
        FeatureRole::Temperature,
        FeatureRole::Pressure,
        FeatureRole::Ozone,
    ];

    /// The three roles usable as model inputs, in canonical order.
    pub const PREDICTORS: [FeatureRole; 3] = [
        FeatureRole::Co,
        FeatureRole::Temperature,
        FeatureRole::Pressure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureRole::Co => "co",
            FeatureRole::Temperature => "temperature",
            FeatureRole::Pressure => "pressure",
            FeatureRole::Ozone => "ozone",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<FeatureRole> {
        FeatureRole::ALL.get(code as usize).copied()
    }

    pub fn is_predictor(self) -> bool {
        self != FeatureRole::Ozone
    }
}

impl fmt::Display for FeatureRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureRole {
    type Err = DatapipeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureRole::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| DatapipeError::UnknownFeature(s.to_string()))
    }
}

/// Binds source CSV columns to canonical roles, with optional unit notes.
#[derive(Debug, Clone, Default)]
pub struct ColumnMapping {
    sources: BTreeMap<FeatureRole, String>,
    units: BTreeMap<FeatureRole, String>,
}

impl ColumnMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn map(mut self, role: FeatureRole, source: impl Into<String>) -> Self {
        self.sources.insert(role, source.into());
        self
    }

    pub fn with_unit(mut self, role: FeatureRole, unit: impl Into<String>) -> Self {
        self.units.insert(role, unit.into());
        self
    }

    /// Parses comma-separated `role=column` pairs, e.g. `"co=co_mg_m3,ozone=o3"`.
    pub fn parse(spec: &str) -> Result<Self, DatapipeError> {
        let mut mapping = ColumnMapping::new();
        for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (role, source) = pair.split_once('=').ok_or_else(|| {
                DatapipeError::MalformedMapping(format!("'{pair}' is not role=column"))
            })?;
            let role: FeatureRole = role.trim().parse()?;
            let source = source.trim();
            if source.is_empty() {
                return Err(DatapipeError::MalformedMapping(format!(
                    "empty column name for role '{role}'"
                )));
            }
            if mapping.sources.insert(role, source.to_string()).is_some() {
                return Err(DatapipeError::MalformedMapping(format!(
                    "role '{role}' mapped twice"
                )));
            }
        }
        Ok(mapping)
    }

    pub fn source_for(&self, role: FeatureRole) -> Option<&str> {
        self.sources.get(&role).map(String::as_str)
    }

    pub fn unit_for(&self, role: FeatureRole) -> Option<&str> {
        self.units.get(&role).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Mapped roles in canonical order.
    pub fn roles(&self) -> impl Iterator<Item = FeatureRole> + '_ {
        self.sources.keys().copied()
    }
}

// --- Raw tables ---

/// A rectangular table of optionally-missing readings, one named column each.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    column_names: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl RawTable {
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, DatapipeError> {
        for (i, name) in column_names.iter().enumerate() {
            if column_names[..i].contains(name) {
                return Err(DatapipeError::MalformedTable(format!(
                    "duplicate column '{name}'"
                )));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != column_names.len() {
                return Err(DatapipeError::MalformedTable(format!(
                    "row {i} has {} cells, expected {}",
                    row.len(),
                    column_names.len()
                )));
            }
        }
        Ok(Self { column_names, rows })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(Option::is_some))
    }
}

/// Reads a CSV file and returns the mapped columns renamed to their canonical
/// roles, in canonical role order.
///
/// Dialect: comma separator, first row is the header, `.` decimal point.
/// Cells are trimmed; anything that does not parse as a finite number
/// (empty, `NA`, text, `inf`) becomes MISSING.
pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<RawTable, DatapipeError> {
    let path = path.as_ref();
    if mapping.is_empty() {
        return Err(DatapipeError::EmptyMapping);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                DatapipeError::FileNotFound(path.display().to_string())
            }
            csv::ErrorKind::Io(io) => DatapipeError::Io(io.to_string()),
            _ => DatapipeError::MalformedCsv(e.to_string()),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DatapipeError::MalformedCsv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.iter().all(String::is_empty) {
        return Err(DatapipeError::HeaderMissing(path.display().to_string()));
    }

    let mut source_indices = Vec::new();
    let mut names = Vec::new();
    for role in mapping.roles() {
        let source = mapping.source_for(role).unwrap();
        let idx = headers
            .iter()
            .position(|h| h == source)
            .ok_or_else(|| DatapipeError::MappedColumnAbsent(source.to_string()))?;
        source_indices.push(idx);
        names.push(role.name().to_string());
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatapipeError::MalformedCsv(e.to_string()))?;
        let row = source_indices
            .iter()
            .map(|&idx| parse_cell(record.get(idx).unwrap_or("")))
            .collect();
        rows.push(row);
    }
    RawTable::new(names, rows)
}

fn parse_cell(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

// --- Imputation ---

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputePolicy {
    /// Remove every row that still contains a MISSING cell.
    DropRows,
    /// Fill MISSING cells with the column mean of observed values.
    MeanImpute,
    /// Fill MISSING cells with the most recent observed value above them;
    /// rows with no prior observation are dropped.
    ForwardFill,
}

impl fmt::Display for ImputePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImputePolicy::DropRows => "drop_rows",
            ImputePolicy::MeanImpute => "mean_impute",
            ImputePolicy::ForwardFill => "forward_fill",
        })
    }
}

/// What an [`impute`] pass did: rows removed and cells filled per column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImputeReport {
    pub policy: ImputePolicy,
    pub rows_dropped: usize,
    pub cells_filled: BTreeMap<String, usize>,
}

impl ImputeReport {
    pub fn total_filled(&self) -> usize {
        self.cells_filled.values().sum()
    }

    pub fn to_record(&self) -> Record {
        let mut rec = Record::new("impute_report")
            .field("policy", self.policy)
            .field("rows_dropped", self.rows_dropped);
        for (column, filled) in &self.cells_filled {
            rec = rec.field(format!("filled_{column}"), filled);
        }
        rec
    }
}

/// Picks the default policy for a table: mean imputation while every feature
/// column's missing rate stays under 5%, otherwise row dropping.
pub fn choose_policy(tbl: &RawTable) -> ImputePolicy {
    let n = tbl.n_rows();
    if n == 0 {
        return ImputePolicy::MeanImpute;
    }
    let target = FeatureRole::Ozone.name();
    for (j, name) in tbl.column_names().iter().enumerate() {
        if name == target {
            continue;
        }
        let missing = tbl.rows().iter().filter(|r| r[j].is_none()).count();
        if (missing as f64) / (n as f64) >= 0.05 {
            return ImputePolicy::DropRows;
        }
    }
    ImputePolicy::MeanImpute
}

/// Resolves every MISSING cell, returning a complete table and a report.
///
/// Rows with a MISSING `ozone` target are always dropped first, whatever the
/// policy; no imputation invents target values. The output never contains
/// MISSING, which makes the operation idempotent.
pub fn impute(tbl: &RawTable, policy: ImputePolicy) -> Result<(RawTable, ImputeReport), DatapipeError> {
    if tbl.n_rows() == 0 {
        return Err(DatapipeError::EmptyTable);
    }
    let names = tbl.column_names().to_vec();
    let target_idx = tbl.column_index(FeatureRole::Ozone.name());

    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(tbl.n_rows());
    let mut rows_dropped = 0;
    for row in tbl.rows() {
        match target_idx {
            Some(t) if row[t].is_none() => rows_dropped += 1,
            _ => rows.push(row.clone()),
        }
    }

    let mut cells_filled: BTreeMap<String, usize> =
        names.iter().map(|n| (n.clone(), 0)).collect();

    match policy {
        ImputePolicy::DropRows => {
            let before = rows.len();
            rows.retain(|r| r.iter().all(Option::is_some));
            rows_dropped += before - rows.len();
        }
        ImputePolicy::MeanImpute => {
            for (j, name) in names.iter().enumerate() {
                let missing = rows.iter().filter(|r| r[j].is_none()).count();
                if missing == 0 {
                    continue;
                }
                let observed: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
                if observed.is_empty() {
                    return Err(DatapipeError::EmptyColumn(name.clone()));
                }
                let mean = observed.iter().sum::<f64>() / observed.len() as f64;
                for row in rows.iter_mut() {
                    if row[j].is_none() {
                        row[j] = Some(mean);
                    }
                }
                *cells_filled.get_mut(name).unwrap() = missing;
            }
        }
        ImputePolicy::ForwardFill => {
            for (j, name) in names.iter().enumerate() {
                let mut last = None;
                let mut filled = 0;
                for row in rows.iter_mut() {
                    match row[j] {
                        Some(v) => last = Some(v),
                        None => {
                            if last.is_some() {
                                row[j] = last;
                                filled += 1;
                            }
                        }
                    }
                }
                *cells_filled.get_mut(name).unwrap() = filled;
            }
            let before = rows.len();
            rows.retain(|r| r.iter().all(Option::is_some));
            rows_dropped += before - rows.len();
        }
    }

    if rows.is_empty() {
        return Err(DatapipeError::AllRowsDropped);
    }
    let report = ImputeReport {
        policy,
        rows_dropped,
        cells_filled,
    };
    Ok((RawTable::new(names, rows)?, report))
}

// --- Dense datasets ---

/// A complete, finite design matrix with its target vector.
///
/// Rows are stored row-major; `features` names each column in order and
/// never contains the target role.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    features: Vec<FeatureRole>,
}

impl Dataset {
    pub fn new(
        x: Vec<f64>,
        y: Vec<f64>,
        features: Vec<FeatureRole>,
    ) -> Result<Self, DatapipeError> {
        if features.is_empty() {
            return Err(DatapipeError::EmptyFeatureSet);
        }
        if features.len() > FeatureRole::PREDICTORS.len() {
            return Err(DatapipeError::DimensionMismatch {
                expected: FeatureRole::PREDICTORS.len(),
                got: features.len(),
            });
        }
        for (i, role) in features.iter().enumerate() {
            if !role.is_predictor() {
                return Err(DatapipeError::UnknownFeature(format!(
                    "'{role}' cannot be used as a feature"
                )));
            }
            if features[..i].contains(role) {
                return Err(DatapipeError::DuplicateFeature(*role));
            }
        }
        if y.is_empty() {
            return Err(DatapipeError::EmptyTable);
        }
        if x.len() != y.len() * features.len() {
            return Err(DatapipeError::DimensionMismatch {
                expected: y.len() * features.len(),
                got: x.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(DatapipeError::NonFiniteValue(
                "dataset cells must be finite".to_string(),
            ));
        }
        Ok(Self { x, y, features })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.x[i * d..(i + 1) * d]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn features(&self) -> &[FeatureRole] {
        &self.features
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        let d = self.n_features();
        self.x.iter().copied().skip(j).step_by(d)
    }

    /// Projects onto an ordered subset of this dataset's features.
    pub fn select_features(&self, roles: &[FeatureRole]) -> Result<Dataset, DatapipeError> {
        if roles.is_empty() {
            return Err(DatapipeError::EmptyFeatureSet);
        }
        let mut indices = Vec::with_capacity(roles.len());
        for role in roles {
            let idx = self
                .features
                .iter()
                .position(|f| f == role)
                .ok_or_else(|| DatapipeError::UnknownFeature(role.name().to_string()))?;
            indices.push(idx);
        }
        let mut x = Vec::with_capacity(self.n_rows() * roles.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            x.extend(indices.iter().map(|&j| row[j]));
        }
        Dataset::new(x, self.y.clone(), roles.to_vec())
    }

    /// Extracts the given rows, in the given order.
    pub fn subset_rows(&self, indices: &[usize]) -> Result<Dataset, DatapipeError> {
        if indices.is_empty() {
            return Err(DatapipeError::EmptyTable);
        }
        let d = self.n_features();
        let mut x = Vec::with_capacity(indices.len() * d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows() {
                return Err(DatapipeError::DimensionMismatch {
                    expected: self.n_rows(),
                    got: i,
                });
            }
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset::new(x, y, self.features.clone())
    }
}

/// Builds a dense dataset from a complete table: the requested feature
/// columns in the requested order, plus the `ozone` target.
pub fn to_dataset(tbl: &RawTable, feature_set: &[FeatureRole]) -> Result<Dataset, DatapipeError> {
    if feature_set.is_empty() {
        return Err(DatapipeError::EmptyFeatureSet);
    }
    if tbl.n_rows() == 0 {
        return Err(DatapipeError::EmptyTable);
    }
    let target = FeatureRole::Ozone.name();
    let target_idx = tbl
        .column_index(target)
        .ok_or_else(|| DatapipeError::UnknownFeature(target.to_string()))?;

    let mut column_indices = Vec::with_capacity(feature_set.len());
    for role in feature_set {
        if !role.is_predictor() {
            return Err(DatapipeError::UnknownFeature(format!(
                "'{role}' cannot be used as a feature"
            )));
        }
        let idx = tbl
            .column_index(role.name())
            .ok_or_else(|| DatapipeError::UnknownFeature(role.name().to_string()))?;
        column_indices.push(idx);
    }

    let require = |cell: Option<f64>, column: usize, row: usize| {
        cell.ok_or_else(|| DatapipeError::MissingValuesPresent {
            column: tbl.column_names()[column].clone(),
            row,
        })
    };

    let mut x = Vec::with_capacity(tbl.n_rows() * feature_set.len());
    let mut y = Vec::with_capacity(tbl.n_rows());
    for (i, row) in tbl.rows().iter().enumerate() {
        for &j in &column_indices {
            x.push(require(row[j], j, i)?);
        }
        y.push(require(row[target_idx], target_idx, i)?);
    }
    Dataset::new(x, y, feature_set.to_vec())
}

// --- Standardization ---

/// Scale parameters for the target column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-feature z-score parameters, with optional target statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
    target: Option<TargetStats>,
}

impl Scaler {
    pub fn new(means: Vec<f64>, stds: Vec<f64>) -> Result<Self, DatapipeError> {
        if means.len() != stds.len() {
            return Err(DatapipeError::DimensionMismatch {
                expected: means.len(),
                got: stds.len(),
            });
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(DatapipeError::NonFiniteValue("scaler means".to_string()));
        }
        if stds.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(DatapipeError::NonFiniteValue(
                "scaler stds must be finite and positive".to_string(),
            ));
        }
        Ok(Self {
            means,
            stds,
            target: None,
        })
    }

    pub fn with_target(mut self, target: TargetStats) -> Self {
        self.target = Some(target);
        self
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn target(&self) -> Option<TargetStats> {
        self.target
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }
}

/// Sample mean and sample (n-1) standard deviation.
pub(crate) fn mean_and_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    (mean, std, n)
}

/// Fits per-feature z-score parameters on a dataset of at least two rows.
pub fn fit_scaler(ds: &Dataset) -> Result<Scaler, DatapipeError> {
    if ds.n_rows() < 2 {
        return Err(DatapipeError::TooFewRows {
            needed: 2,
            got: ds.n_rows(),
        });
    }
    let mut means = Vec::with_capacity(ds.n_features());
    let mut stds = Vec::with_capacity(ds.n_features());
    for (j, role) in ds.features().iter().enumerate() {
        let (mean, std, _) = mean_and_std(ds.column(j));
        if std <= ZERO_VARIANCE_TOL * mean.abs().max(1.0) {
            return Err(DatapipeError::ZeroVariance(*role));
        }
        means.push(mean);
        stds.push(std);
    }
    let (y_mean, y_std, _) = mean_and_std(ds.y().iter().copied());
    let scaler = Scaler::new(means, stds)?;
    if y_std > ZERO_VARIANCE_TOL * y_mean.abs().max(1.0) {
        Ok(scaler.with_target(TargetStats {
            mean: y_mean,
            std: y_std,
        }))
    } else {
        Ok(scaler)
    }
}

/// Applies z-score standardization to the features; the target is untouched.
pub fn transform(scaler: &Scaler, ds: &Dataset) -> Result<Dataset, DatapipeError> {
    if scaler.n_features() != ds.n_features() {
        return Err(DatapipeError::DimensionMismatch {
            expected: scaler.n_features(),
            got: ds.n_features(),
        });
    }
    let d = ds.n_features();
    let mut x = Vec::with_capacity(ds.n_rows() * d);
    for i in 0..ds.n_rows() {
        for (j, v) in ds.row(i).iter().enumerate() {
            x.push((v - scaler.means()[j]) / scaler.stds()[j]);
        }
    }
    Dataset::new(x, ds.y().to_vec(), ds.features().to_vec())
}

// --- Splitting ---

/// How to cut one dataset into a train and a test partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
            shuffle: true,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Self {
        Self {
            train_fraction,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_shuffle(mut self, shuffle: bool) -> Self {
        self.shuffle = shuffle;
        self
    }
}

/// Row indices of the train and test partitions for `n` rows.
///
/// The permutation is a pure function of the seed; with shuffling disabled
/// the original order is kept and the first block becomes the train set.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DatapipeError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DatapipeError::BadSplitFraction(spec.train_fraction));
    }
    if n < 2 {
        return Err(DatapipeError::DegenerateSplit);
    }
    let mut indices: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        indices.shuffle(&mut rng);
    }
    let train_n = ((n as f64 * spec.train_fraction).floor() as usize)
        .max(1)
        .min(n - 1);
    let test = indices.split_off(train_n);
    Ok((indices, test))
}

/// Splits a dataset into non-empty train and test partitions.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DatapipeError> {
    let (train_idx, test_idx) = split_indices(ds.n_rows(), spec)?;
    Ok((ds.subset_rows(&train_idx)?, ds.subset_rows(&test_idx)?))
}

// --- Tests ---
