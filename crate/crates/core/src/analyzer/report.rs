use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{NetworkState, WorkingAreaReport};
use crate::samples::{format_utilization, LinkSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StateCounts {
    pub working: usize,
    pub moderate: usize,
    pub overloaded: usize,
}

impl StateCounts {
    pub fn tally(labels: &[NetworkState]) -> Self {
        let mut counts = StateCounts::default();
        for label in labels {
            match label {
                NetworkState::Working => counts.working += 1,
                NetworkState::Moderate => counts.moderate += 1,
                NetworkState::Overloaded => counts.overloaded += 1,
            }
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.working + self.moderate + self.overloaded
    }
}

/// Serialized form of a [`WorkingAreaReport`]. Absent values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportJson {
    pub working_slope: f64,
    pub saturation_intercept: Option<f64>,
    pub saturation_slope: Option<f64>,
    pub knee_flows: Option<f64>,
    pub knee_utilization_percent: Option<f64>,
    pub state_counts: StateCounts,
    pub flags: Vec<&'static str>,
}

impl From<&WorkingAreaReport> for ReportJson {
    fn from(report: &WorkingAreaReport) -> Self {
        ReportJson {
            working_slope: report.working_line.slope,
            saturation_intercept: report.saturation_line.map(|l| l.intercept),
            saturation_slope: report.saturation_line.map(|l| l.slope),
            knee_flows: report.knee.map(|k| k.flows),
            knee_utilization_percent: report.knee.map(|k| k.utilization),
            state_counts: report.state_counts,
            flags: report.flags.iter().map(|f| f.as_str()).collect(),
        }
    }
}

impl WorkingAreaReport {
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&ReportJson::from(self)).expect("plain data serializes");
        text.push('\n');
        text
    }
}

/// `timestamp,utilization_percent,active_flows,state`, one row per sample.
pub fn write_labeled_samples_csv(
    samples: &[LinkSample],
    report: &WorkingAreaReport,
    path: impl AsRef<Path>,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "timestamp,utilization_percent,active_flows,state")?;
    for (s, label) in samples.iter().zip(&report.state_labels) {
        writeln!(
            out,
            "{},{},{},{}",
            s.timestamp,
            format_utilization(s.utilization),
            s.active_flows,
            label
        )?;
    }
    out.flush()
}

/// `n,u_working,u_saturation` on an even grid of `points` flow counts from 0
/// to `max_flows`. The saturation column is empty when there is no
/// saturation line.
pub fn write_fitted_lines_csv(
    report: &WorkingAreaReport,
    max_flows: f64,
    points: usize,
    path: impl AsRef<Path>,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "n,u_working,u_saturation")?;
    let steps = points.max(2) - 1;
    for i in 0..=steps {
        let n = max_flows * i as f64 / steps as f64;
        let working = report.working_line.at(n);
        match report.saturation_line {
            Some(line) => writeln!(out, "{n},{working},{}", line.at(n))?,
            None => writeln!(out, "{n},{working},")?,
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::super::{analyze, AnalyzerConfig};
    use super::*;

    fn report() -> (Vec<LinkSample>, WorkingAreaReport) {
        let mut samples: Vec<LinkSample> = (1..=20)
            .map(|i| LinkSample::new(i as f64, 0.018 * (i * 100) as f64, i * 100))
            .collect();
        samples.extend((0..=30).map(|i| LinkSample::new(100.0 + i as f64, 45.0, 2050 + i * 100)));
        let report = analyze(&samples, &AnalyzerConfig::default()).unwrap();
        (samples, report)
    }

    #[test]
    fn json_keys() {
        let (_, report) = report();
        let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        let obj = value.as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        for key in [
            "working_slope",
            "saturation_intercept",
            "saturation_slope",
            "knee_flows",
            "knee_utilization_percent",
            "state_counts",
            "flags",
        ] {
            assert!(keys.contains(&key), "{key}");
        }
        assert_eq!(value["saturation_intercept"], 45.0);
        assert_eq!(value["state_counts"]["overloaded"], 26);
        assert!(value["flags"].as_array().unwrap().is_empty());
    }

    #[test]
    fn json_nulls_when_not_exceeded() {
        let samples: Vec<LinkSample> = (1..=10)
            .map(|i| LinkSample::new(0.0, i as f64, i * 50))
            .collect();
        let report = analyze(&samples, &AnalyzerConfig::default()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(value["knee_flows"].is_null());
        assert!(value["saturation_slope"].is_null());
        assert_eq!(value["flags"][0], "working_area_not_exceeded");
    }

    #[test]
    fn plot_exports() {
        let (samples, report) = report();
        let dir = tempfile::tempdir().unwrap();
        let labeled = dir.path().join("labeled.csv");
        let lines = dir.path().join("lines.csv");
        write_labeled_samples_csv(&samples, &report, &labeled).unwrap();
        write_fitted_lines_csv(&report, 5000.0, 11, &lines).unwrap();

        let labeled = std::fs::read_to_string(labeled).unwrap();
        assert_eq!(labeled.lines().count(), samples.len() + 1);
        assert_eq!(labeled.lines().nth(1), Some("1,1.8,100,working"));
        assert!(labeled.lines().last().unwrap().ends_with(",overloaded"));

        let lines = std::fs::read_to_string(lines).unwrap();
        let rows: Vec<&str> = lines.lines().collect();
        assert_eq!(rows[0], "n,u_working,u_saturation");
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[1], "0,0,45");
        assert!(rows[11].starts_with("5000,"));
    }
}
