use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::config::LabelingParadigm;

use super::{DataError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub subject_id: String,
    pub channel_paths: Vec<PathBuf>,
    pub label: Option<usize>,
    /// CSV line the record came from.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    pub paradigm: LabelingParadigm,
    pub channels: usize,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn channel_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("Channel_")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

/// Parses manifest CSV text. The channel count is the number of
/// `Channel_k` columns, which must be numbered contiguously from 0.
pub fn parse_manifest(csv_text: &str, paradigm: LabelingParadigm, num_classes: usize) -> Result<Manifest> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| DataError::manifest(1, format!("unreadable header: {e}")))?.clone();

    let mut subject_col = None;
    let mut label_col = None;
    let mut channel_cols = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        let name = name.trim();
        if name == "SubjectID" {
            if subject_col.replace(i).is_some() {
                return Err(DataError::manifest(1, "duplicate column 'SubjectID'"));
            }
        } else if name == "Label" {
            if label_col.replace(i).is_some() {
                return Err(DataError::manifest(1, "duplicate column 'Label'"));
            }
        } else if let Some(k) = channel_index(name) {
            if channel_cols.iter().any(|&(c, _)| c == k) {
                return Err(DataError::manifest(1, format!("duplicate column '{name}'")));
            }
            channel_cols.push((k, i));
        } else {
            return Err(DataError::manifest(1, format!("unexpected column '{name}'")));
        }
    }
    let subject_col = subject_col.ok_or_else(|| DataError::manifest(1, "missing column 'SubjectID'"))?;
    channel_cols.sort_unstable();
    if channel_cols.is_empty() {
        return Err(DataError::manifest(1, "missing column 'Channel_0'"));
    }
    if let Some(gap) = (0..channel_cols.len()).find(|&k| channel_cols[k].0 != k) {
        return Err(DataError::manifest(1, format!("missing column 'Channel_{gap}'")));
    }
    match (paradigm, label_col) {
        (LabelingParadigm::Unlabeled, Some(_)) => {
            return Err(DataError::manifest(1, "Label column forbidden under the unlabeled paradigm"))
        }
        (LabelingParadigm::Labeled, None) => return Err(DataError::manifest(1, "missing column 'Label'")),
        _ => {}
    }
    if paradigm == LabelingParadigm::Labeled && num_classes < 2 {
        return Err(DataError::Argument(format!("labeled paradigm needs num_classes ≥ 2, got {num_classes}")));
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (n, result) in reader.records().enumerate() {
        let fallback_row = n + 2;
        let record = result.map_err(|e| {
            let row = e.position().map_or(fallback_row, |p| p.line() as usize);
            DataError::manifest(row, e.to_string())
        })?;
        let row = record.position().map_or(fallback_row, |p| p.line() as usize);
        let subject_id = record[subject_col].trim().to_string();
        if subject_id.is_empty() {
            return Err(DataError::manifest(row, "empty SubjectID"));
        }
        if !seen.insert(subject_id.clone()) {
            return Err(DataError::manifest(row, format!("duplicate subject '{subject_id}'")));
        }
        let mut channel_paths = Vec::with_capacity(channel_cols.len());
        for &(k, col) in &channel_cols {
            let path = record[col].trim();
            if path.is_empty() {
                return Err(DataError::manifest(row, format!("empty Channel_{k} path")));
            }
            channel_paths.push(PathBuf::from(path));
        }
        let label = match label_col {
            None => None,
            Some(col) => {
                let text = record[col].trim();
                let label: usize = text
                    .parse()
                    .map_err(|_| DataError::manifest(row, format!("label '{text}' is not a non-negative integer")))?;
                if label >= num_classes {
                    return Err(DataError::manifest(
                        row,
                        format!("label {label} out of range [0, {num_classes})"),
                    ));
                }
                Some(label)
            }
        };
        records.push(SampleRecord { subject_id, channel_paths, label, row });
    }
    Ok(Manifest { records, paradigm, channels: channel_cols.len() })
}

pub fn read_manifest(path: &Path, paradigm: LabelingParadigm, num_classes: usize) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_manifest(&text, paradigm, num_classes)
}

/// Reads a manifest whose paradigm is taken from its header: a `Label`
/// column makes it labeled, with labels only required to be non-negative.
pub fn read_manifest_auto(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let labeled = text.lines().next().is_some_and(|h| h.split(',').any(|c| c.trim() == "Label"));
    let paradigm = if labeled { LabelingParadigm::Labeled } else { LabelingParadigm::Unlabeled };
    parse_manifest(&text, paradigm, usize::MAX)
}

/// Serializes a manifest with the column layout [`parse_manifest`] expects.
pub fn manifest_to_csv(manifest: &Manifest) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["SubjectID".to_string()];
    header.extend((0..manifest.channels).map(|k| format!("Channel_{k}")));
    if manifest.paradigm == LabelingParadigm::Labeled {
        header.push("Label".into());
    }
    w.write_record(&header).expect("in-memory write");
    for r in &manifest.records {
        let mut row = vec![r.subject_id.clone()];
        row.extend(r.channel_paths.iter().map(|p| p.display().to_string()));
        if let Some(l) = r.label {
            row.push(l.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    std::fs::write(path, manifest_to_csv(manifest)).map_err(|e| DataError::io(path, e))
}
