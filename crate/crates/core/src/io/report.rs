//! Per-trial CSV and JSON summary for Monte Carlo runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::guidance::CLINICAL_THRESHOLD_MM;
use crate::registration::LandmarkId;

/// Landmark RMSE reported for the handheld system in its expert user study.
pub const REFERENCE_RMSE_MEAN_MM: f64 = 2.54;
pub const REFERENCE_RMSE_SD_MM: f64 = 0.46;

pub const TRIALS_CSV: &str = "trials.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// One end-to-end simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed(TrialMetrics),
    /// Acquisition or registration was rejected; the reason is recorded.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub rmse_mm: f64,
    /// TRE at the planned entry point.
    pub tre_mm: f64,
    /// TRE at the catheter target.
    pub target_tre_mm: f64,
    pub scale: f64,
    /// Residuals in acquisition order.
    pub residuals_mm: [f64; 7],
}

impl TrialRecord {
    pub fn metrics(&self) -> Option<&TrialMetrics> {
        match &self.outcome {
            TrialOutcome::Completed(m) => Some(m),
            TrialOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Stats {
    /// Sample statistics (SD with n − 1); percentiles interpolate linearly.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pct = |q: f64| {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Some(Self {
            mean,
            sd,
            min: sorted[0],
            p05: pct(0.05),
            p50: pct(0.5),
            p95: pct(0.95),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBand {
    pub mean_mm: f64,
    pub sd_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    pub rmse_mm: Option<Stats>,
    pub tre_mm: Option<Stats>,
    pub target_tre_mm: Option<Stats>,
    pub scale: Option<Stats>,
    pub tre_threshold_mm: f64,
    /// Trials with entry TRE under the threshold, over all trials (failed
    /// trials count as not under).
    pub fraction_tre_under_threshold: f64,
    pub reference_rmse: ReferenceBand,
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let ok: Vec<&TrialMetrics> = records.iter().filter_map(TrialRecord::metrics).collect();
    let col = |f: fn(&TrialMetrics) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<f64>>();
    let under = ok.iter().filter(|m| m.tre_mm < CLINICAL_THRESHOLD_MM).count();
    Summary {
        trials: records.len(),
        completed: ok.len(),
        failed: records.len() - ok.len(),
        rmse_mm: Stats::from_values(&col(|m| m.rmse_mm)),
        tre_mm: Stats::from_values(&col(|m| m.tre_mm)),
        target_tre_mm: Stats::from_values(&col(|m| m.target_tre_mm)),
        scale: Stats::from_values(&col(|m| m.scale)),
        tre_threshold_mm: CLINICAL_THRESHOLD_MM,
        fraction_tre_under_threshold: if records.is_empty() { 0.0 } else { under as f64 / records.len() as f64 },
        reference_rmse: ReferenceBand { mean_mm: REFERENCE_RMSE_MEAN_MM, sd_mm: REFERENCE_RMSE_SD_MM },
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["trial", "seed", "status", "rmse_mm", "tre_mm", "target_tre_mm", "scale"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(LandmarkId::ALL.iter().map(|id| format!("residual_{}_mm", id.key())));
    h
}

/// CSV text. Floats use the shortest representation that parses back to the
/// same value, so summaries recomputed from the CSV are exact.
pub fn trials_to_csv(records: &[TrialRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header()).expect("in-memory write");
    for r in records {
        let mut row = vec![r.trial.to_string(), r.seed.to_string()];
        match &r.outcome {
            TrialOutcome::Completed(m) => {
                row.push("ok".into());
                row.extend([m.rmse_mm, m.tre_mm, m.target_tre_mm, m.scale].iter().map(|v| v.to_string()));
                row.extend(m.residuals_mm.iter().map(|v| v.to_string()));
            }
            TrialOutcome::Failed(reason) => {
                row.push(format!("failed: {reason}"));
                row.extend(std::iter::repeat_n(String::new(), 11));
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn summary_to_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes") + "\n"
}

/// Output paths written by [`write_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

pub fn write_report(records: &[TrialRecord], dir: &Path) -> Result<(Summary, ReportFiles), IoError> {
    if records.is_empty() {
        return Err(IoError::Invalid("no trials to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let csv = dir.join(TRIALS_CSV);
    let summary_path = dir.join(SUMMARY_JSON);
    std::fs::write(&csv, trials_to_csv(records)).map_err(|e| IoError::io(&csv, e))?;
    let summary = summarize(records);
    std::fs::write(&summary_path, summary_to_json(&summary)).map_err(|e| IoError::io(&summary_path, e))?;
    Ok((summary, ReportFiles { csv, summary: summary_path }))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_trials_csv(&text).map_err(|m| IoError::Invalid(format!("{}: {m}", path.display())))
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRecord>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let h: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if h != header() {
        return Err("unexpected CSV header".into());
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| field(i).parse::<f64>().map_err(|e| format!("row {}: column {}: {e}", line + 1, h[i]));
        let trial = field(0).parse().map_err(|e| format!("row {}: trial: {e}", line + 1))?;
        let seed = field(1).parse().map_err(|e| format!("row {}: seed: {e}", line + 1))?;
        let outcome = if field(2) == "ok" {
            let mut residuals_mm = [0.0; 7];
            for (k, slot) in residuals_mm.iter_mut().enumerate() {
                *slot = num(7 + k)?;
            }
            TrialOutcome::Completed(TrialMetrics {
                rmse_mm: num(3)?,
                tre_mm: num(4)?,
                target_tre_mm: num(5)?,
                scale: num(6)?,
                residuals_mm,
            })
        } else {
            TrialOutcome::Failed(field(2).trim_start_matches("failed: ").to_string())
        };
        out.push(TrialRecord { trial, seed, outcome });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64, rmse: f64, tre: f64) -> TrialRecord {
        TrialRecord {
            trial: i,
            seed: 100 + i,
            outcome: TrialOutcome::Completed(TrialMetrics {
                rmse_mm: rmse,
                tre_mm: tre,
                target_tre_mm: tre * 0.5,
                scale: 1.0 + 0.001 * i as f64,
                residuals_mm: [rmse; 7],
            }),
        }
    }

    #[test]
    fn three_trials_three_rows() {
        let recs = vec![rec(0, 2.0, 3.0), rec(1, 2.5, 6.0), rec(2, 0.1 + 0.2, 4.0)];
        let csv = trials_to_csv(&recs);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(parse_trials_csv(&csv).unwrap(), recs);
    }

    #[test]
    fn summary_matches_column_mean() {
        let recs = vec![rec(0, 2.0, 3.0), rec(1, 2.5, 6.0), rec(2, 0.1 + 0.2, 4.0)];
        let s = summarize(&recs);
        let mean = (2.0 + 2.5 + (0.1 + 0.2)) / 3.0;
        assert!((s.rmse_mm.as_ref().unwrap().mean - mean).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&s.fraction_tre_under_threshold));
        assert!((s.fraction_tre_under_threshold - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn failed_trials_count_against_fraction() {
        let recs = vec![rec(0, 2.0, 3.0), TrialRecord { trial: 1, seed: 7, outcome: TrialOutcome::Failed("x".into()) }];
        let s = summarize(&recs);
        assert_eq!(s.failed, 1);
        assert_eq!(s.fraction_tre_under_threshold, 0.5);
        let back = parse_trials_csv(&trials_to_csv(&recs)).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn percentiles_interpolate() {
        let s = Stats::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.p50, 3.0);
        assert!((s.p05 - 1.2).abs() < 1e-12);
        assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-12);
    }
}
