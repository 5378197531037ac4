use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::models::TrainStepReport;

use super::{Result, TrainerError};

pub const METRICS_HEADER: &str = "epoch,step,metric,value";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub epoch: u64,
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

/// Append-only metrics CSV, flushed after every step.
pub struct MetricLog {
    path: PathBuf,
    out: BufWriter<File>,
    rows: Vec<MetricRow>,
}

impl MetricLog {
    /// Starts a fresh log, replacing any existing file.
    pub fn create(path: &Path) -> Result<Self> {
        Self::with_rows(path, Vec::new())
    }

    /// Reopens an existing log keeping only rows with `epoch ≤ keep_through`.
    pub fn resume(path: &Path, keep_through: u64) -> Result<Self> {
        let rows = if path.exists() { read_metric_log(path)? } else { Vec::new() };
        Self::with_rows(path, rows.into_iter().filter(|r| r.epoch <= keep_through).collect())
    }

    fn with_rows(path: &Path, rows: Vec<MetricRow>) -> Result<Self> {
        let file = File::create(path).map_err(|e| TrainerError::io(path, e))?;
        let mut log = MetricLog { path: path.to_path_buf(), out: BufWriter::new(file), rows: Vec::new() };
        writeln!(log.out, "{METRICS_HEADER}").map_err(|e| TrainerError::io(path, e))?;
        for r in rows {
            log.write_row(r)?;
        }
        log.flush()?;
        Ok(log)
    }

    fn write_row(&mut self, row: MetricRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if (row.epoch, row.step) < (last.epoch, last.step) {
                return Err(TrainerError::Argument(format!(
                    "metric rows out of order: ({}, {}) after ({}, {})",
                    row.epoch, row.step, last.epoch, last.step
                )));
            }
        }
        writeln!(self.out, "{},{},{},{:?}", row.epoch, row.step, row.metric, row.value)
            .map_err(|e| TrainerError::io(&self.path, e))?;
        self.rows.push(row);
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| TrainerError::io(&self.path, e))
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Appends one row per named metric. A non-finite value aborts before anything is written.
pub fn log_metrics(log: &mut MetricLog, epoch: u64, step: u64, report: &TrainStepReport) -> Result<()> {
    if let Some((name, value)) = report.metrics.iter().find(|(_, v)| !v.is_finite()) {
        return Err(TrainerError::NonFinite { epoch, step, metric: name.clone(), value: *value });
    }
    for (name, value) in &report.metrics {
        log.write_row(MetricRow { epoch, step, metric: name.clone(), value: *value })?;
    }
    log.flush()
}

pub fn read_metric_log(path: &Path) -> Result<Vec<MetricRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| TrainerError::io(path, e))?;
    parse_metric_log(&text).map_err(|m| TrainerError::Argument(format!("{}: {m}", path.display())))
}

pub fn parse_metric_log(text: &str) -> std::result::Result<Vec<MetricRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(METRICS_HEADER) => {}
        other => return Err(format!("expected header '{METRICS_HEADER}', found {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || format!("line {}: malformed row '{line}'", i + 2);
            let f: Vec<&str> = line.split(',').collect();
            let [epoch, step, metric, value] = f[..] else { return Err(bad()) };
            Ok(MetricRow {
                epoch: epoch.parse().map_err(|_| bad())?,
                step: step.parse().map_err(|_| bad())?,
                metric: metric.to_string(),
                value: value.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(pairs: &[(&str, f64)]) -> TrainStepReport {
        TrainStepReport { metrics: pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect(), updates: 1 }
    }

    #[test]
    fn rows_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let mut log = MetricLog::create(&path).unwrap();
        log_metrics(&mut log, 1, 2, &report(&[("recon", 0.5)])).unwrap();
        log_metrics(&mut log, 1, 3, &report(&[("recon", 0.1 + 0.2), ("kl", 1e-300)])).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().nth(1), Some("1,2,recon,0.5"));
        assert_eq!(read_metric_log(&path).unwrap(), log.rows());
        assert_eq!(log.rows()[1].value, 0.1 + 0.2);
        assert_eq!(log.rows()[2].metric, "kl");
    }

    #[test]
    fn non_finite_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = MetricLog::create(&dir.path().join("m.csv")).unwrap();
        let err = log_metrics(&mut log, 2, 9, &report(&[("ok", 1.0), ("g_loss", f64::NAN)])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epoch 2") && msg.contains("step 9") && msg.contains("g_loss"), "{msg}");
        assert!(log.rows().is_empty());
    }

    #[test]
    fn resume_truncates_later_epochs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut log = MetricLog::create(&path).unwrap();
        for (e, s) in [(1, 1), (1, 2), (2, 3), (3, 4)] {
            log_metrics(&mut log, e, s, &report(&[("loss", s as f64)])).unwrap();
        }
        drop(log);
        let log = MetricLog::resume(&path, 2).unwrap();
        assert_eq!(log.rows().len(), 3);
        assert_eq!(read_metric_log(&path).unwrap().len(), 3);
    }
}
