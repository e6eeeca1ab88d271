use flowcap::analyzer::{analyze, write_fitted_lines_csv, write_labeled_samples_csv};
use flowcap::samples::read_samples_csv;
use flowcap::AnalyzerConfig;

use crate::config::{self, OutDir};
use crate::error::CliError;
use crate::AnalyzeArgs;

/// Points on the fitted-lines grid.
const LINE_POINTS: usize = 101;

pub fn run(args: &AnalyzeArgs) -> Result<(), CliError> {
    let map = config::load(args.config.as_deref(), &args.overrides)?;
    let config = AnalyzerConfig::from_kv(&map.with_prefix("analyzer."))?;
    let samples = read_samples_csv(&args.samples)
        .map_err(|e| CliError::config(format!("{}: {e}", args.samples.display())))?;
    let report = analyze(&samples, &config)?;

    let out = OutDir::create(&args.out)?;
    std::fs::write(out.file("report.json"), report.to_json())?;
    write_labeled_samples_csv(&samples, &report, out.file("labeled_samples.csv"))?;
    let max_flows = samples.iter().map(|s| s.active_flows).max().unwrap_or(0) as f64;
    write_fitted_lines_csv(
        &report,
        max_flows * 1.1,
        LINE_POINTS,
        out.file("fitted_lines.csv"),
    )?;

    let counts = report.state_counts;
    let tally = format!(
        "working {}, moderate {}, overloaded {}",
        counts.working, counts.moderate, counts.overloaded
    );
    match report.knee {
        Some(knee) => println!(
            "knee at {:.1} flows, {:.2}% utilization (working slope {:.6} %/flow; {tally})",
            knee.flows, knee.utilization, report.working_line.slope
        ),
        None => println!(
            "working area not exceeded (working slope {:.6} %/flow; {tally})",
            report.working_line.slope
        ),
    }
    Ok(())
}
