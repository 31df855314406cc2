//! `tinyoz`: train, analyze, pack and simulate small ozone models.
//!
//! Output is line-oriented `name key=value ...` records unless `--pretty`
//! is given. Exit codes: 0 on success, 1 when the pipeline fails (missing
//! file, singular system, corrupt artifact, ...), 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tinyoz_core::analysis::{self, combo_label, default_combos, raw_coefficients};
use tinyoz_core::datapipe::{
    self, choose_policy, impute, load_csv, to_dataset, ImputePolicy, ImputeReport,
};
use tinyoz_core::modelpack::{self, quantize, PackedModel};
use tinyoz_core::record::Record;
use tinyoz_core::regress::{cross_validate, evaluate, fit, LinearModel, Metrics};
use tinyoz_core::simdevice::{
    run_loop, ChannelProcess, Mq7Params, PlantedRelation, SensorNoise, SimConfig,
};
use tinyoz_core::{ColumnMapping, Dataset, FeatureRole, Solver, SplitSpec, TrainConfig};

mod pretty;

#[derive(Parser)]
#[command(
    name = "tinyoz",
    version,
    about = "Train, analyze, pack and simulate tiny ozone prediction models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on CSV data, score it, and optionally pack an artifact
    Train(TrainArgs),
    /// Compare feature combinations on one shared train/test split
    Sweep(SweepArgs),
    /// Rank features by standardized coefficients and probe deflections
    Sensitivity(SensitivityArgs),
    /// Run a packed model through the simulated sensor loop
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ImputeChoice {
    /// Mean imputation, or row dropping when any feature is >=5% missing
    Auto,
    /// Drop rows with missing cells
    Drop,
    /// Fill feature gaps with the column mean
    Mean,
    /// Carry the previous observed value forward
    Ffill,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Ols,
    Sgd,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    /// role=column pairs, e.g. co=co_mg_m3,temperature=temp_c,ozone=o3_ug_m3
    #[arg(long, value_parser = parse_mapping)]
    map: ColumnMapping,
    /// Missing-cell policy
    #[arg(long, value_enum, default_value_t = ImputeChoice::Auto)]
    impute: ImputeChoice,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Features to train on
    #[arg(long, value_delimiter = ',', value_parser = parse_role,
          default_values_t = FeatureRole::PREDICTORS)]
    features: Vec<FeatureRole>,
    #[arg(long, value_enum, default_value_t = SolverChoice::Ols)]
    solver: SolverChoice,
    /// Ridge penalty
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// SGD learning rate
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// SGD mini-batch size
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// SGD epochs
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Seed for the split and for SGD shuffling
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Train fraction of the shuffled split
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Accuracy tolerance in target units
    #[arg(long, default_value_t = 10.0)]
    tol: f64,
    /// Also run k-fold cross-validation on the full dataset
    #[arg(long, value_name = "K")]
    cv: Option<usize>,
    /// Write a packed model artifact here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pack int8 weights instead of float32
    #[arg(long)]
    quantize: bool,
    /// Human-readable output
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Combinations as plus-joined features, comma-separated,
    /// e.g. temperature+pressure,co (default: the four standard ones)
    #[arg(long, value_parser = parse_combos)]
    combos: Option<ComboList>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 10.0)]
    tol: f64,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Analyze a packed artifact instead of fitting on data
    #[arg(long, conflicts_with_all = ["data", "map"])]
    model: Option<PathBuf>,
    /// CSV file to fit on
    #[arg(long, requires = "map")]
    data: Option<PathBuf>,
    /// role=column pairs (see train)
    #[arg(long, value_parser = parse_mapping, requires = "data")]
    map: Option<ColumnMapping>,
    #[arg(long, value_enum, default_value_t = ImputeChoice::Auto)]
    impute: ImputeChoice,
    #[arg(long, value_delimiter = ',', value_parser = parse_role,
          default_values_t = FeatureRole::PREDICTORS)]
    features: Vec<FeatureRole>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Packed model artifact to run
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CO channel as initial,mean,reversion,noise
    #[arg(long, value_parser = parse_channel)]
    co: Option<ChannelProcess>,
    /// Temperature channel as initial,mean,reversion,noise
    #[arg(long, value_parser = parse_channel)]
    temperature: Option<ChannelProcess>,
    /// Pressure channel as initial,mean,reversion,noise
    #[arg(long, value_parser = parse_channel)]
    pressure: Option<ChannelProcess>,
    /// Ozone relation as co_slope,temp_slope,pressure_slope,intercept,noise
    #[arg(long, value_parser = parse_relation)]
    relation: Option<PlantedRelation>,
    /// Sensor noise as co_ppm,temp_c,pressure_hpa
    #[arg(long, value_parser = parse_sensor_noise)]
    sensor_noise: Option<SensorNoise>,
    /// Sensor curve as a,b,r0,rl,adc_bits
    #[arg(long, value_parser = parse_mq7)]
    mq7: Option<Mq7Params>,
    /// Print only the run summary
    #[arg(long)]
    summary_only: bool,
    #[arg(long)]
    pretty: bool,
}

// --- Argument parsing helpers ---

fn parse_role(s: &str) -> Result<FeatureRole, String> {
    let role: FeatureRole = s.parse().map_err(|e| format!("{e}"))?;
    if !role.is_predictor() {
        return Err(format!("UnknownFeature: '{s}' cannot be used as a feature"));
    }
    Ok(role)
}

fn parse_mapping(s: &str) -> Result<ColumnMapping, String> {
    ColumnMapping::parse(s).map_err(|e| format!("{e}"))
}

#[derive(Clone)]
struct ComboList(Vec<Vec<FeatureRole>>);

fn parse_combos(s: &str) -> Result<ComboList, String> {
    let mut combos = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let mut combo = Vec::new();
        for name in part.split('+').map(str::trim) {
            let role = parse_role(name)?;
            if combo.contains(&role) {
                return Err(format!("DuplicateFeature: '{role}' repeats in '{part}'"));
            }
            combo.push(role);
        }
        combos.push(combo);
    }
    if combos.is_empty() {
        return Err("NoCombos: at least one combination is required".to_string());
    }
    Ok(ComboList(combos))
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!(
            "expected {N} comma-separated values for {what}, got {}",
            parts.len()
        ));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| format!("'{part}' is not a number"))?;
    }
    Ok(out)
}

fn parse_channel(s: &str) -> Result<ChannelProcess, String> {
    let [initial, mean, reversion, noise] = parse_floats(s, "a channel")?;
    Ok(ChannelProcess {
        initial,
        mean,
        reversion,
        noise,
    })
}

fn parse_relation(s: &str) -> Result<PlantedRelation, String> {
    let [co_slope, temp_slope, pressure_slope, intercept, noise] =
        parse_floats(s, "the relation")?;
    Ok(PlantedRelation {
        co_slope,
        temp_slope,
        pressure_slope,
        intercept,
        noise,
    })
}

fn parse_sensor_noise(s: &str) -> Result<SensorNoise, String> {
    let [co_ppm, temp_c, pressure_hpa] = parse_floats(s, "sensor noise")?;
    Ok(SensorNoise {
        co_ppm,
        temp_c,
        pressure_hpa,
    })
}

fn parse_mq7(s: &str) -> Result<Mq7Params, String> {
    let [a, b, r0, rl, bits] = parse_floats(s, "the sensor curve")?;
    if bits.fract() != 0.0 || !(0.0..=64.0).contains(&bits) {
        return Err(format!("'{bits}' is not a valid bit count"));
    }
    Ok(Mq7Params {
        a,
        b,
        r0,
        rl,
        adc_bits: bits as u32,
    })
}

// --- Error plumbing ---

enum CliError {
    Usage(String),
    Pipeline(String),
}

macro_rules! pipeline_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Pipeline(e.to_string())
            }
        }
    )*};
}

pipeline_from!(
    tinyoz_core::datapipe::DatapipeError,
    tinyoz_core::regress::RegressError,
    tinyoz_core::analysis::AnalysisError,
    tinyoz_core::modelpack::PackError,
    tinyoz_core::simdevice::SimError
);

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Pipeline(format!("Io: {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Pipeline(format!("Io: {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => run_train(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Sensitivity(args) => run_sensitivity(args),
        Command::Simulate(args) => run_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Pipeline(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

// --- Shared loading ---

fn check_features(features: &[FeatureRole]) -> Result<(), CliError> {
    for (i, role) in features.iter().enumerate() {
        if features[..i].contains(role) {
            return Err(CliError::Usage(format!(
                "DuplicateFeature: '{role}' is listed twice"
            )));
        }
    }
    Ok(())
}

fn check_mapping(mapping: &ColumnMapping, features: &[FeatureRole]) -> Result<(), CliError> {
    if mapping.source_for(FeatureRole::Ozone).is_none() {
        return Err(CliError::Usage(
            "the --map must bind a column to 'ozone'".to_string(),
        ));
    }
    for role in features {
        if mapping.source_for(*role).is_none() {
            return Err(CliError::Usage(format!(
                "feature '{role}' has no column in --map"
            )));
        }
    }
    Ok(())
}

fn load_dataset(
    path: &Path,
    mapping: &ColumnMapping,
    choice: ImputeChoice,
    features: &[FeatureRole],
) -> Result<(Dataset, ImputeReport), CliError> {
    let table = load_csv(path, mapping)?;
    let policy = match choice {
        ImputeChoice::Auto => choose_policy(&table),
        ImputeChoice::Drop => ImputePolicy::DropRows,
        ImputeChoice::Mean => ImputePolicy::MeanImpute,
        ImputeChoice::Ffill => ImputePolicy::ForwardFill,
    };
    let (table, report) = impute(&table, policy)?;
    let ds = to_dataset(&table, features)?;
    Ok((ds, report))
}

fn emit(records: &[Record]) {
    for rec in records {
        println!("{}", rec.to_line());
    }
}

// --- train ---

fn train_config(args: &TrainArgs) -> TrainConfig {
    TrainConfig {
        solver: match args.solver {
            SolverChoice::Ols => Solver::Ols,
            SolverChoice::Sgd => Solver::Sgd,
        },
        lambda: args.lambda,
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
    }
}

fn model_record(cfg: &TrainConfig, features: &[FeatureRole]) -> Record {
    let mut rec = Record::new("model")
        .field("solver", cfg.solver)
        .field("lambda", cfg.lambda)
        .field("features", combo_label(features))
        .field("seed", cfg.seed);
    if cfg.solver == Solver::Sgd {
        rec = rec
            .field("lr", cfg.learning_rate)
            .field("batch", cfg.batch_size)
            .field("epochs", cfg.epochs);
    }
    rec
}

fn weights_record(model: &LinearModel) -> Record {
    let mut rec = Record::new("weights");
    for (role, w) in model.features().iter().zip(model.weights()) {
        rec = rec.field(role.name(), *w);
    }
    rec.field("bias", model.bias())
}

fn metrics_record(metrics: &Metrics, split_name: &str) -> Record {
    metrics.to_record().field("split", split_name)
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    check_features(&args.features)?;
    check_mapping(&args.data.map, &args.features)?;
    let (ds, report) =
        load_dataset(&args.data.data, &args.data.map, args.data.impute, &args.features)?;

    let spec = SplitSpec::new(args.split).with_seed(args.seed);
    let (train, test) = datapipe::split(&ds, &spec)?;
    let cfg = train_config(&args);
    let model = fit(&train, &cfg)?;
    let train_metrics = evaluate(&model, &train, args.tol)?;
    let test_metrics = evaluate(&model, &test, args.tol)?;
    let coefficients = raw_coefficients(&model);
    let cv = args
        .cv
        .map(|k| cross_validate(&ds, k, &cfg, args.seed, args.tol))
        .transpose()?;

    let artifact = args
        .out
        .as_ref()
        .map(|path| {
            let packed = if args.quantize {
                PackedModel::Quantized(quantize(&model))
            } else {
                PackedModel::Float(model.clone())
            };
            let bytes = packed.to_bytes();
            write_file(path, &bytes)?;
            Ok::<_, CliError>((path.clone(), bytes.len(), packed))
        })
        .transpose()?;

    if args.pretty {
        pretty::train(
            &report,
            &cfg,
            &model,
            &coefficients,
            &train_metrics,
            &test_metrics,
            cv.as_ref(),
            artifact.as_ref().map(|(p, n, m)| (p.as_path(), *n, m.scheme_name())),
        );
        return Ok(());
    }

    let mut records = vec![
        report.to_record(),
        model_record(&cfg, model.features()),
        weights_record(&model),
        coefficients.to_record(),
        metrics_record(&train_metrics, "train"),
        metrics_record(&test_metrics, "test"),
    ];
    if let Some(cv) = &cv {
        records.push(cv.summary_record());
        records.extend(cv.fold_records());
    }
    if let Some((path, bytes, packed)) = &artifact {
        records.push(
            Record::new("artifact")
                .field("path", path.display())
                .field("bytes", bytes)
                .field("scheme", packed.scheme_name()),
        );
    }
    emit(&records);
    Ok(())
}

// --- sweep ---

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let combos = args
        .combos
        .map(|c| c.0)
        .unwrap_or_else(default_combos);
    let mut needed: Vec<FeatureRole> = Vec::new();
    for combo in &combos {
        for role in combo {
            if !needed.contains(role) {
                needed.push(*role);
            }
        }
    }
    needed.sort();
    check_mapping(&args.data.map, &needed)?;
    let (ds, report) = load_dataset(&args.data.data, &args.data.map, args.data.impute, &needed)?;

    let cfg = TrainConfig {
        lambda: args.lambda,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let spec = SplitSpec::new(args.split).with_seed(args.seed);
    let sweep = analysis::feature_sweep(&ds, &combos, &cfg, &spec, args.tol)?;

    if args.pretty {
        pretty::sweep(&report, &sweep);
    } else {
        let mut records = vec![report.to_record()];
        records.extend(sweep.records());
        emit(&records);
    }
    Ok(())
}

// --- sensitivity ---

fn run_sensitivity(args: SensitivityArgs) -> Result<(), CliError> {
    check_features(&args.features)?;
    let (model, source, report) = if let Some(path) = &args.model {
        let bytes = read_file(path)?;
        let model = match modelpack::deserialize(&bytes)? {
            PackedModel::Float(m) => m,
            PackedModel::Quantized(q) => q.dequantize(),
        };
        let report = analysis::sensitivity_from_scaler(&model)?;
        (model, format!("artifact:{}", path.display()), report)
    } else if let (Some(data), Some(map)) = (&args.data, &args.map) {
        check_mapping(map, &args.features)?;
        let (ds, _) = load_dataset(data, map, args.impute, &args.features)?;
        let cfg = TrainConfig {
            lambda: args.lambda,
            seed: args.seed,
            ..TrainConfig::default()
        };
        let model = fit(&ds, &cfg)?;
        let report = analysis::sensitivity(&model, &ds)?;
        (model, format!("fit:{}", data.display()), report)
    } else {
        return Err(CliError::Usage(
            "either --model <artifact> or --data <csv> with --map is required".to_string(),
        ));
    };

    if args.pretty {
        pretty::sensitivity(&model, &source, &report);
    } else {
        let mut records = vec![Record::new("model")
            .field("source", source)
            .field("features", combo_label(model.features()))];
        records.extend(report.records());
        emit(&records);
    }
    Ok(())
}

// --- simulate ---

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let artifact = read_file(&args.model)?;
    let defaults = SimConfig::default();
    let cfg = SimConfig {
        seed: args.seed,
        steps: args.steps,
        dt: args.dt,
        co: args.co.unwrap_or(defaults.co),
        temperature: args.temperature.unwrap_or(defaults.temperature),
        pressure: args.pressure.unwrap_or(defaults.pressure),
        relation: args.relation.unwrap_or(defaults.relation),
        sensor_noise: args.sensor_noise.unwrap_or(defaults.sensor_noise),
        mq7: args.mq7.unwrap_or(defaults.mq7),
    };
    let run = run_loop(&cfg, &artifact)?;

    if args.pretty {
        pretty::simulate(&run, args.summary_only);
        return Ok(());
    }
    if !args.summary_only {
        for step in &run.records {
            println!("{}", step.to_record().to_line());
        }
    }
    println!("{}", run.summary.to_record().to_line());
    Ok(())
}
