//! One function per CLI subcommand. Each returns the text it would print and
//! writes any requested files.

use std::path::Path;

use qkdlink_core::bb84::DistillationModel;
use qkdlink_core::experiments::{compute_soax, run_back_to_back, SoaxReport, SweepRow};
use qkdlink_core::montecarlo::{RunConfig, RunPhysics, RunTruth, TagStream};
use qkdlink_core::system::{LinkConfig, SystemModel};
use qkdlink_core::tagproc::{analyze, Analysis};
use qkdlink_core::units::PowerLevel;

use crate::config::{ExperimentConfig, Mode};
use crate::{calibrate, io, parallel, plot, write_file, AppError, Calibrated};

pub struct CalibrateOutput {
    pub calibrated: Calibrated,
    pub report: String,
}

/// Fits the model and writes the report. The first anchor that does not
/// close becomes the error.
pub fn calibrate_cmd(config: &ExperimentConfig, out: Option<&Path>) -> Result<CalibrateOutput, AppError> {
    let calibrated = calibrate(config)?;
    let ideal = run_back_to_back(&calibrated.model, DistillationModel::IdealAsymptotic)?;
    let fixed = run_back_to_back(&calibrated.model, DistillationModel::reported_fraction())?;
    let report = io::calibration_report(&calibrated.set, &calibrated.residuals, &ideal, &fixed);
    if let Some(path) = out {
        write_file(path, &report)?;
    }
    if let Some(r) = calibrated.first_failed_anchor() {
        return Err(AppError::Closure {
            anchor: r.anchor,
            target: r.target,
            achieved: r.achieved,
            tolerance: r.tolerance,
        });
    }
    Ok(CalibrateOutput { calibrated, report })
}

pub fn sweep_rows(model: &SystemModel, config: &ExperimentConfig, mode: Mode) -> Result<Vec<SweepRow>, AppError> {
    Ok(parallel::coexistence_sweep(model, &config.rop_grid(), mode.into())?)
}

/// Returns the CSV text; writes it and the optional SVG plot.
pub fn sweep_cmd(
    config: &ExperimentConfig,
    mode: Mode,
    out: Option<&Path>,
    plot_path: Option<&Path>,
) -> Result<String, AppError> {
    let cal = calibrate(config)?;
    let rows = sweep_rows(&cal.model, config, mode)?;
    let csv = io::sweep_csv(&rows);
    if let Some(path) = out {
        write_file(path, &csv)?;
    }
    if let Some(path) = plot_path {
        let svg = plot::sweep_svg(&[&rows], config.protocol.qber_threshold, config.sweep.ber_target);
        write_file(path, &svg)?;
    }
    Ok(csv)
}

/// Monte Carlo run matching the calibrated analytic model at the operating
/// point in `[montecarlo]`.
pub fn run_config_for(
    cal: &Calibrated,
    seed: Option<u64>,
    symbols: Option<u64>,
) -> Result<RunConfig, AppError> {
    let mc = &cal.config.montecarlo;
    let link: LinkConfig = mc.mode.into();
    let eval = cal
        .model
        .evaluate(link, mc.classical_rop_dbm.map(PowerLevel::from_dbm))?;
    let physics = RunPhysics::from_evaluation(&cal.model, &eval);
    Ok(cal.config.run_config(physics, seed, symbols))
}

pub struct SimulateOutput {
    pub run: RunConfig,
    pub stream: TagStream,
    pub truth: RunTruth,
    pub summary: String,
}

pub fn simulate_cmd(
    config: &ExperimentConfig,
    seed: Option<u64>,
    symbols: Option<u64>,
    out: Option<&Path>,
) -> Result<SimulateOutput, AppError> {
    let cal = calibrate(config)?;
    let run = run_config_for(&cal, seed, symbols)?;
    let (stream, truth) = parallel::simulate_quantum_run(&run)?;
    if let Some(path) = out {
        io::write_tag_stream(path, &stream)?;
    }
    let counts = truth.counts();
    let names = ["signal", "dark", "raman", "leakage"];
    let mut summary = format!(
        "{} symbols ({:.4} s), seed {}, frame offset {}, {} tags written\n",
        run.n_symbols,
        run.duration_s(),
        run.seed,
        truth.frame_offset,
        stream.len()
    );
    for (name, (generated, kept)) in names.iter().zip(counts) {
        summary.push_str(&format!("  {name:<8} {generated:>10} generated, {kept:>10} after dead time\n"));
    }
    Ok(SimulateOutput {
        run,
        stream,
        truth,
        summary,
    })
}

/// Runs the tag-processing chain on a tag file. The run length in symbols
/// defaults to `montecarlo.symbols`.
pub fn analyze_cmd(
    config: &ExperimentConfig,
    tags: &Path,
    symbols: Option<u64>,
    csv_out: Option<&Path>,
) -> Result<(Analysis, String), AppError> {
    let stream = io::read_tag_stream(tags)?;
    let n = symbols.unwrap_or(config.montecarlo.symbols);
    let duration = n as f64 * stream.symbol_period_ps as f64 * 1e-12;
    let analysis = analyze(&stream, &config.analysis_params(duration))?;
    if let Some(path) = csv_out {
        write_file(path, &io::estimation_csv(&analysis))?;
    }
    let summary = io::estimation_summary(&analysis);
    Ok((analysis, summary))
}

pub fn soax_cmd(
    config: &ExperimentConfig,
    out: Option<&Path>,
    csv_out: Option<&Path>,
) -> Result<(SoaxReport, String), AppError> {
    let cal = calibrate(config)?;
    let rows = sweep_rows(&cal.model, config, Mode::Fiber)?;
    let distillation = config.distillation();
    let report = compute_soax(
        &rows,
        config.protocol.qber_threshold,
        config.sweep.ber_target,
        distillation,
    )?;
    let summary = io::soax_summary(&report, distillation);
    if let Some(path) = out {
        write_file(path, &summary)?;
    }
    if let Some(path) = csv_out {
        write_file(path, &io::soax_csv(&report))?;
    }
    Ok((report, summary))
}
