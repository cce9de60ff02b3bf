//! Offline subcommands: replay, workspace analysis and the FK benchmark.

use std::path::Path;

use cdpr_core::bench::{fk_bench, FkBenchReport};
use cdpr_core::config::Config;
use cdpr_core::kinematics::CdprGeometry;
use cdpr_core::sim::record::{replay, ReplayOutcome, TrajectoryRecord};
use cdpr_core::statics::TensionVector;
use cdpr_core::workspace::{analyze_workspace, write_sample_dump, SamplerSpec, WorkspaceReport};
use cdpr_core::Result;

/// Replays `path`, writing the regenerated file to `output` when given.
pub fn replay_file(path: &Path, seed: Option<u64>, output: Option<&Path>) -> Result<ReplayOutcome> {
    let original_text = std::fs::read_to_string(path)?;
    let original = TrajectoryRecord::parse(&original_text)?;
    let mut outcome = replay(&original, seed)?;
    let text = outcome.record.to_text();
    // Byte comparison against the file as written, not the parsed copy.
    outcome.identical = outcome.identical && text == original_text;
    if let Some(out) = output {
        std::fs::write(out, text)?;
    }
    Ok(outcome)
}

/// Set-point tensions used for the passive-orientation model.
pub fn setpoint_tensions(config: &Config, g: &CdprGeometry) -> Result<TensionVector> {
    match config.statics.setpoint_tensions {
        Some(f) => Ok(TensionVector::from_array(f)),
        None => cdpr_core::statics::gravity_compensation(g, &g.center_pose(), &config.inertia(), config.statics.f_min),
    }
}

pub fn workspace_report(
    config: &Config,
    g: &CdprGeometry,
    spec: &SamplerSpec,
    threshold_deg: f64,
    dump: Option<&Path>,
) -> Result<WorkspaceReport> {
    let f = setpoint_tensions(config, g)?;
    let (report, samples) = analyze_workspace(g, &f, &config.inertia(), spec, threshold_deg.to_radians())?;
    if let Some(p) = dump {
        let file = std::io::BufWriter::new(std::fs::File::create(p)?);
        write_sample_dump(file, &samples)?;
    }
    Ok(report)
}

pub fn fk_bench_report(
    config: &Config,
    g: &CdprGeometry,
    trials: usize,
    noise: f64,
    seed: u64,
) -> Result<FkBenchReport> {
    fk_bench(g, &config.fk_config(), trials, noise, seed)
}
