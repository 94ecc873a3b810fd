//! Plain-text record files and record segmentation.
//!
//! Records use one CSV dialect (`csv_v1`):
//!
//! ```text
//! # fs=500 leads=I,II,V1 units=mV
//! 0.012,0.034,-0.101
//! 0.013,0.036,-0.099
//! ```
//!
//! The header line carries the sample rate and the lead names; further
//! `key=value` tokens (`units`, `kind`, `id`, ...) are kept as tags. Each
//! following line is one sample across all leads. Blank lines and later
//! `#` lines are ignored.
//!
//! Trajectories are written as `step,c1,…,cm` rows under a
//! `# trajectory m=… tau=… fs=… label=…` header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingParams, TimeSeries, Trajectory};
use crate::vcgprep::MultiLeadRecord;
use crate::{Error, Result};

/// Header metadata of a record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub sample_rate_hz: f64,
    pub leads: Vec<String>,
    pub units: String,
    pub tags: BTreeMap<String, String>,
}

impl RecordMeta {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn parse_header(line: &str, path: &Path) -> Result<RecordMeta> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::MissingHeader(path.to_path_buf()))?;
    let mut fs_hz = None;
    let mut leads = None;
    let mut units = "mV".to_string();
    let mut tags = BTreeMap::new();
    for token in body.split_whitespace() {
        let Some((key, value)) = token.split_once('=') else {
            continue;
        };
        match key {
            "fs" => {
                let v: f64 = value.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("bad sample rate {value:?}"),
                })?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: 1,
                        message: format!("sample rate must be positive, got {v}"),
                    });
                }
                fs_hz = Some(v);
            }
            "leads" => leads = Some(value.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>()),
            "units" => units = value.to_string(),
            _ => {
                tags.insert(key.to_string(), value.to_string());
            }
        }
    }
    match (fs_hz, leads) {
        (Some(sample_rate_hz), Some(leads)) if leads.iter().all(|l| !l.is_empty()) => Ok(RecordMeta {
            sample_rate_hz,
            leads,
            units,
            tags,
        }),
        _ => Err(Error::MissingHeader(path.to_path_buf())),
    }
}

fn parse_row(line: &str, lineno: usize, expected: usize, path: &Path) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(Error::RaggedRows {
            path: path.to_path_buf(),
            line: lineno,
            expected,
            found: fields.len(),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("cannot parse {f:?} as a finite number"),
            })
        })
        .collect()
}

/// Parses `csv_v1` text; `path` is only used in error messages.
pub fn parse_record(text: &str, path: &Path) -> Result<(MultiLeadRecord, RecordMeta)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| Error::MissingHeader(path.to_path_buf()))?;
    let meta = parse_header(header.1, path)?;
    let width = meta.leads.len();
    let mut columns = vec![Vec::new(); width];
    for (lineno, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for (col, v) in columns.iter_mut().zip(parse_row(line, lineno, width, path)?) {
            col.push(v);
        }
    }
    let names: Vec<&str> = meta.leads.iter().map(String::as_str).collect();
    let record = MultiLeadRecord::from_columns(&names, columns, meta.sample_rate_hz).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: header.0,
        message: e.to_string(),
    })?;
    Ok((record, meta))
}

pub fn read_record(path: &Path) -> Result<MultiLeadRecord> {
    Ok(read_record_with_meta(path)?.0)
}

pub fn read_record_with_meta(path: &Path) -> Result<(MultiLeadRecord, RecordMeta)> {
    parse_record(&read_text(path)?, path)
}

/// Renders a record as `csv_v1` text. `tags` are appended to the header.
pub fn format_record(record: &MultiLeadRecord, tags: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(record.len() * record.lead_count() * 12);
    let _ = write!(out, "# fs={} leads={} units=mV", record.sample_rate_hz(), record.names().join(","));
    for (k, v) in tags {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    for t in 0..record.len() {
        for (j, lead) in record.leads().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", lead.samples()[t]);
        }
        out.push('\n');
    }
    out
}

pub fn write_record(record: &MultiLeadRecord, path: &Path) -> Result<()> {
    write_record_tagged(record, path, &[])
}

pub fn write_record_tagged(record: &MultiLeadRecord, path: &Path, tags: &[(&str, &str)]) -> Result<()> {
    fs::write(path, format_record(record, tags))?;
    Ok(())
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let params = traj.params();
    let label = if traj.source_label().is_empty() { "-" } else { traj.source_label() };
    let mut out = format!(
        "# trajectory m={} tau={} fs={} label={}\nstep",
        params.m,
        params.tau,
        traj.sample_rate_hz(),
        label.replace(char::is_whitespace, "_")
    );
    for j in 1..=params.m {
        let _ = write!(out, ",c{j}");
    }
    out.push('\n');
    for (p, state) in traj.states().iter().enumerate() {
        let _ = write!(out, "{p}");
        for v in state {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = read_text(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| Error::MissingHeader(path.to_path_buf()))?;
    let body = header
        .strip_prefix("# trajectory")
        .ok_or_else(|| Error::MissingHeader(path.to_path_buf()))?;
    let mut m = None;
    let mut tau = None;
    let mut fs_hz = None;
    let mut label = String::new();
    for token in body.split_whitespace() {
        match token.split_once('=') {
            Some(("m", v)) => m = v.parse::<usize>().ok(),
            Some(("tau", v)) => tau = v.parse::<usize>().ok(),
            Some(("fs", v)) => fs_hz = v.parse::<f64>().ok(),
            Some(("label", v)) => label = v.to_string(),
            _ => {}
        }
    }
    let (Some(m), Some(tau), Some(fs_hz)) = (m, tau, fs_hz) else {
        return Err(parse_err(1, "trajectory header needs m, tau and fs".into()));
    };
    let params = EmbeddingParams::new(m, tau).map_err(|e| parse_err(1, e.to_string()))?;
    let mut states = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() || line.starts_with('#') || line.starts_with("step") {
            continue;
        }
        let mut row = parse_row(line, lineno, m + 1, path)?;
        row.remove(0);
        states.push(row);
    }
    Trajectory::new(states, params, label, fs_hz)
}

/// A window of a parent record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_sample: usize,
    pub length: usize,
    pub parent_id: String,
}

/// All full windows of `window_s` seconds, `hop_s` seconds apart. A
/// trailing partial window is dropped.
pub fn segment_record(
    record: &MultiLeadRecord,
    record_id: &str,
    window_s: f64,
    hop_s: f64,
) -> Result<Vec<Segment>> {
    if !(window_s > 0.0 && hop_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window and hop must be positive, got {window_s} and {hop_s}"
        )));
    }
    let fs_hz = record.sample_rate_hz();
    let window = (window_s * fs_hz).round() as usize;
    let hop = ((hop_s * fs_hz).round() as usize).max(1);
    if window > record.len() {
        return Err(Error::WindowLargerThanRecord {
            window,
            len: record.len(),
        });
    }
    if window < 2 {
        return Err(Error::InvalidParameter(format!("window of {window} samples is too short")));
    }
    Ok((0..=record.len() - window)
        .step_by(hop)
        .map(|start_sample| Segment {
            start_sample,
            length: window,
            parent_id: record_id.to_string(),
        })
        .collect())
}

pub fn extract_segment(record: &MultiLeadRecord, segment: &Segment) -> Result<MultiLeadRecord> {
    record.slice(segment.start_sample, segment.length)
}

/// Reads one lead of a record file (the only lead when `lead` is `None`).
pub fn read_lead(path: &Path, lead: Option<&str>) -> Result<TimeSeries> {
    let record = read_record(path)?;
    match lead {
        Some(name) => record.lead(name).cloned().ok_or_else(|| Error::MissingLead(name.to_string())),
        None if record.lead_count() == 1 => Ok(record.leads()[0].clone()),
        None => Err(Error::InvalidParameter(format!(
            "{} has {} leads; pick one of {:?}",
            path.display(),
            record.lead_count(),
            record.names()
        ))),
    }
}
