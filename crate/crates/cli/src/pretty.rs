//! Human-readable output for `--pretty` runs.

use std::path::Path;

use tinyoz_core::analysis::{combo_label, RawCoefficients, SensitivityReport, SweepReport};
use tinyoz_core::datapipe::ImputeReport;
use tinyoz_core::regress::{CVReport, LinearModel, Metrics};
use tinyoz_core::simdevice::SimRun;
use tinyoz_core::TrainConfig;

fn impute_line(report: &ImputeReport) {
    println!(
        "Imputation: {} ({} rows dropped, {} cells filled)",
        report.policy,
        report.rows_dropped,
        report.total_filled()
    );
}

fn metrics_line(label: &str, m: &Metrics) {
    println!(
        "{label:<6} mse {:.4}  rmse {:.4}  r2 {:.4}  within +/-{}: {:.1}% of {}",
        m.mse, m.rmse, m.r2, m.tau, m.accuracy_pct, m.n
    );
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    report: &ImputeReport,
    cfg: &TrainConfig,
    model: &LinearModel,
    coefficients: &RawCoefficients,
    train: &Metrics,
    test: &Metrics,
    cv: Option<&CVReport>,
    artifact: Option<(&Path, usize, &str)>,
) {
    impute_line(report);
    println!(
        "Model: {} (lambda {}), features {}",
        cfg.solver,
        cfg.lambda,
        combo_label(model.features())
    );
    print!("  standardized weights:");
    for (role, w) in model.features().iter().zip(model.weights()) {
        print!(" {role} {w:.4}");
    }
    println!("  bias {:.4}", model.bias());
    print!("  raw slopes:");
    for (role, s) in coefficients.features.iter().zip(&coefficients.slopes) {
        print!(" {role} {s:.6}");
    }
    println!("  intercept {:.4}", coefficients.intercept);
    metrics_line("Train", train);
    metrics_line("Test", test);
    if let Some(cv) = cv {
        println!(
            "CV ({} folds): mse {:.4} +/- {:.4}, r2 {:.4} +/- {:.4}",
            cv.k, cv.mse_mean, cv.mse_std, cv.r2_mean, cv.r2_std
        );
    }
    if let Some((path, bytes, scheme)) = artifact {
        println!("Artifact: {} ({bytes} bytes, {scheme})", path.display());
    }
}

pub fn sweep(report: &ImputeReport, sweep: &SweepReport) {
    impute_line(report);
    println!(
        "{:<4} {:<28} {:>10} {:>8} {:>10} {:>8}",
        "rank", "combo", "test acc%", "test r2", "test mse", "train r2"
    );
    for &idx in &sweep.ranking {
        let entry = &sweep.entries[idx];
        let place = sweep.ranks()[idx];
        println!(
            "{place:<4} {:<28} {:>10.1} {:>8.4} {:>10.4} {:>8.4}",
            combo_label(&entry.features),
            entry.test.accuracy_pct,
            entry.test.r2,
            entry.test.mse,
            entry.train.r2
        );
    }
    println!("Best: {}", combo_label(&sweep.best().features));
}

pub fn sensitivity(model: &LinearModel, source: &str, report: &SensitivityReport) {
    println!("Model: {source}, features {}", combo_label(model.features()));
    println!("{:<14} {:>8} {:>8}", "feature", "src", "oat");
    for (j, role) in report.features.iter().enumerate() {
        println!("{:<14} {:>8.4} {:>8.4}", role.name(), report.src[j], report.oat[j]);
    }
    let join = |roles: Vec<_>| {
        roles
            .into_iter()
            .map(|r: tinyoz_core::FeatureRole| r.name().to_string())
            .collect::<Vec<_>>()
            .join(" > ")
    };
    println!("SRC order: {}", join(report.src_order()));
    println!("OAT order: {}", join(report.oat_order()));
}

pub fn simulate(run: &SimRun, summary_only: bool) {
    if !summary_only {
        for step in &run.records {
            let t = step.frame.t;
            match &step.display {
                Some(d) => println!("t={t:<5} adc={:<5} |{}|{}|", step.frame.adc_co, d.line1(), d.line2()),
                None => println!("t={t:<5} adc={:<5} saturated", step.frame.adc_co),
            }
        }
    }
    let s = &run.summary;
    print!(
        "Ran {} steps: {} scored, {} saturated",
        s.steps, s.used, s.saturated
    );
    match (s.mse, s.r2) {
        (Some(mse), Some(r2)) => println!("; mse {mse:.4}, r2 {r2:.4}"),
        _ => println!(),
    }
}
