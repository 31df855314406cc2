//! Ozone prediction for microcontroller-class deployments.
//!
//! The crate covers the full path from raw air-quality CSVs to a model small
//! enough to run on a hobby board: column mapping and imputation
//! ([`datapipe`]), linear model training and evaluation ([`regress`]),
//! feature sweeps and sensitivity indices ([`analysis`]), int8 quantization
//! and the `.toz` artifact format ([`modelpack`]), allocation-free inference
//! kernels ([`inferkernel`]), and a deterministic sensor-to-LCD device loop
//! simulator ([`simdevice`]).
//!
//! Everything seeded is reproducible: the same seeds produce bit-identical
//! splits, training runs, trajectories, and rendered output.

pub mod analysis;
pub mod datapipe;
#[cfg(test)]
pub(crate) mod testutil;
pub mod inferkernel;
pub mod modelpack;
pub mod record;
pub mod regress;
pub mod simdevice;

pub use datapipe::{ColumnMapping, Dataset, FeatureRole, ImputePolicy, RawTable, Scaler, SplitSpec};
pub use modelpack::{PackedModel, QuantizedModel};
pub use regress::{LinearModel, Metrics, Solver, TrainConfig};
