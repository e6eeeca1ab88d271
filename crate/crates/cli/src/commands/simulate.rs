use flowcap::samples::write_samples_csv;
use flowcap::sim::simulate;
use flowcap::stats::Estimate;
use flowcap::{SimulationConfig, SimulationMode, TheoreticalMoments};
use serde_json::{json, Value};

use crate::config::{self, OutDir};
use crate::error::{write_error, CliError};
use crate::SimulateArgs;

const MOMENT_NAMES: [&str; 3] = ["mean_rate", "rate_variance", "mean_active_flows"];

/// Theoretical values for the requested moments only, so that an undefined
/// moment fails the run only when it was asked for.
fn requested_theory(
    config: &SimulationConfig,
    names: &[String],
) -> Result<[Option<f64>; 3], CliError> {
    for name in names {
        if !MOMENT_NAMES.contains(&name.as_str()) {
            return Err(CliError::config(format!(
                "--moments: unknown moment {name:?}, expected one of {}",
                MOMENT_NAMES.join(", ")
            )));
        }
    }
    let wanted = |name: &str| names.iter().any(|n| n == name);
    let mut theory = [None; 3];
    match config.mode {
        SimulationMode::Unconstrained => {
            let model = &config.model;
            for (i, name) in MOMENT_NAMES.iter().enumerate() {
                if wanted(name) {
                    theory[i] = Some(match i {
                        0 => model.mean_rate()?,
                        1 => model.rate_variance()?,
                        _ => model.mean_active_flows()?,
                    });
                }
            }
        }
        SimulationMode::ProcessorSharing => {
            let TheoreticalMoments {
                mean_rate,
                rate_variance,
                mean_active_flows,
            } = config.reference_moments()?;
            for (i, value) in [mean_rate, rate_variance, mean_active_flows]
                .into_iter()
                .enumerate()
            {
                if wanted(MOMENT_NAMES[i]) {
                    theory[i] = Some(value);
                }
            }
        }
    }
    Ok(theory)
}

fn moment_entry(theory: Option<f64>, empirical: &Estimate) -> Value {
    let relative_error = theory.map(|t| {
        if t == 0.0 {
            empirical.value.abs()
        } else {
            (empirical.value - t) / t
        }
    });
    json!({
        "theoretical": theory,
        "empirical": empirical.value,
        "ci95": empirical.ci.map(|(lo, hi)| vec![lo, hi]),
        "ci_contains_theoretical": theory.map(|t| empirical.contains(t)),
        "relative_error": relative_error,
    })
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let map = config::load(args.config.as_deref(), &args.overrides)?;
    let config = SimulationConfig::from_kv(&map)?;
    if config.sample_interval.fract() != 0.0 {
        return Err(CliError::config(format!(
            "invalid sim.sample_interval: samples CSV needs whole-second timestamps, got {}",
            config.sample_interval
        )));
    }
    let theory = requested_theory(&config, &args.moments)?;
    let out = OutDir::create(&args.out)?;

    let result = simulate(&config)?;

    let samples_path = out.file("samples.csv");
    write_samples_csv(&result.samples, &samples_path).map_err(|e| write_error(&samples_path, e))?;

    let metadata = format!(
        "# flowcap simulate; rerun with `flowcap simulate --config metadata.txt`\n{}",
        config.to_kv()
    );
    std::fs::write(out.file("metadata.txt"), metadata)?;

    let empirical = [
        &result.empirical_mean_rate,
        &result.empirical_rate_variance,
        &result.empirical_mean_active,
    ];
    let mut moments = serde_json::Map::new();
    for i in 0..3 {
        moments.insert(
            MOMENT_NAMES[i].to_string(),
            moment_entry(theory[i], empirical[i]),
        );
    }
    let steady = result.steady_samples(config.warmup).len();
    let report = json!({
        "mode": config.mode.as_str(),
        "theory": match config.mode {
            SimulationMode::Unconstrained => "m_g_infinity",
            SimulationMode::ProcessorSharing => "underload_limit",
        },
        "seed": config.seed,
        "samples": result.samples.len(),
        "steady_samples": steady,
        "completed_flows": result.completed_flows.len(),
        "moments": moments,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("json values serialize");
    text.push('\n');
    std::fs::write(out.file("moments.json"), text)?;

    println!(
        "simulated {} samples ({} after warmup), {} completed flows; mean rate {:.6e} bit/s, mean active {:.3}",
        result.samples.len(),
        steady,
        result.completed_flows.len(),
        result.empirical_mean_rate.value,
        result.empirical_mean_active.value
    );
    Ok(())
}
