use std::io::Write;

use flowcap::samples::write_samples_csv;
use flowcap::sim::load_sweep;
use flowcap::SimulationConfig;

use crate::config::{self, OutDir};
use crate::error::{write_error, CliError};
use crate::SweepArgs;

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let mut map = config::load(args.config.as_deref(), &args.overrides)?;
    // The model still needs some rate to validate; each point replaces it.
    if !map.contains("model.lambda") {
        map.insert("model.lambda", "0");
    }
    let config = SimulationConfig::from_kv(&map)?;
    if args.lambdas.is_empty() {
        return Err(CliError::config("--lambdas: at least one rate is required"));
    }
    let out = OutDir::create(&args.out)?;
    let points = load_sweep(&config, &args.lambdas)?;

    let samples: Vec<_> = points
        .iter()
        .enumerate()
        .map(|(i, p)| p.to_link_sample(i))
        .collect();
    let sweep_path = out.file("sweep.csv");
    write_samples_csv(&samples, &sweep_path).map_err(|e| write_error(&sweep_path, e))?;

    let mut detail = std::io::BufWriter::new(std::fs::File::create(out.file("sweep_points.csv"))?);
    writeln!(
        detail,
        "lambda,offered_load_percent,mean_utilization_percent,mean_active_flows"
    )?;
    for p in &points {
        writeln!(
            detail,
            "{:?},{:?},{:?},{:?}",
            p.lambda, p.offered_load_percent, p.mean_utilization, p.mean_active_flows
        )?;
    }
    detail.flush()?;

    for p in &points {
        println!(
            "lambda {:>10.4}  offered {:>7.2}%  utilization {:>7.3}%  active flows {:>10.2}",
            p.lambda, p.offered_load_percent, p.mean_utilization, p.mean_active_flows
        );
    }
    Ok(())
}
