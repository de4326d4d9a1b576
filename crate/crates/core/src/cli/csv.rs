//! CSV artifacts: comma separated, `.` decimals, `#` comment lines, one
//! header row. Every file starts with the run digest and seed and carries
//! one `# generated=` line, the only line that differs between reruns.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use super::CliError;
use crate::levy::{Jump, SamplePath, Step};

/// Prefix of the timestamp comment line.
pub const TIMESTAMP_PREFIX: &str = "# generated=";

pub(crate) fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Drops the timestamp line, for byte comparisons between runs.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

/// Accumulates one CSV file in memory.
#[derive(Debug)]
pub struct CsvDoc {
    text: String,
    columns: usize,
}

impl CsvDoc {
    pub fn new(kind: &str, digest: &str, seed: u64, meta: &[(&str, String)], header: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# levysel {} {kind}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "# digest={digest}");
        let _ = writeln!(text, "# seed={seed}");
        for (k, v) in meta {
            let _ = writeln!(text, "# {k}={v}");
        }
        let _ = writeln!(text, "{TIMESTAMP_PREFIX}{}", unix_seconds());
        text.push_str(&header.join(","));
        text.push('\n');
        CsvDoc {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns);
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }
}

pub fn path_doc(path: &SamplePath, digest: &str, seed: u64) -> CsvDoc {
    let meta = [
        ("horizon", path.horizon().to_string()),
        ("steps_per_unit", path.step().steps_per_unit().to_string()),
    ];
    let mut doc = CsvDoc::new("path", digest, seed, &meta, &["t", "y"]);
    for (i, y) in path.values().iter().enumerate() {
        doc.row(&[path.time(i).to_string(), y.to_string()]);
    }
    doc
}

pub fn jumps_doc(jumps: &[Jump], digest: &str, seed: u64) -> CsvDoc {
    let mut doc = CsvDoc::new("jumps", digest, seed, &[], &["time", "size", "source_index"]);
    for j in jumps {
        doc.row(&[j.time.to_string(), j.size.to_string(), j.source.to_string()]);
    }
    doc
}

fn schema(file: &Path, row: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{} row {row}: {msg}", file.display()))
}

/// Reads a `t,y` path CSV. Rows are numbered as lines of the file.
pub fn read_path_csv(file: &Path) -> Result<SamplePath, CliError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", file.display())))?;
    let mut horizon: Option<usize> = None;
    let mut per_unit: Option<usize> = None;
    let mut header_seen = false;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut last_row = 0;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                let parse = |v: &str| v.parse::<usize>().map_err(|e| schema(file, row, format!("{k}: {e}")));
                match k {
                    "horizon" => horizon = Some(parse(v)?),
                    "steps_per_unit" => per_unit = Some(parse(v)?),
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line.trim() != "t,y" {
                return Err(schema(file, row, format!("expected header `t,y`, got `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(schema(file, row, format!("expected 2 fields, got {}", fields.len())));
        }
        let mut nums = [0.0; 2];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f
                .trim()
                .parse::<f64>()
                .map_err(|e| schema(file, row, format!("cannot parse `{f}`: {e}")))?;
            if !slot.is_finite() {
                return Err(schema(file, row, format!("non-finite value `{f}`")));
            }
        }
        times.push(nums[0]);
        values.push(nums[1]);
        last_row = row;
    }
    if !header_seen {
        return Err(schema(file, 1, "empty file, expected header `t,y`"));
    }
    if !text.ends_with('\n') {
        return Err(schema(file, text.lines().count(), "last row is not terminated (truncated file?)"));
    }
    if times.len() < 2 {
        return Err(schema(file, last_row.max(1), format!("path has {} data rows, need at least 2", times.len())));
    }
    let per_unit = match per_unit {
        Some(k) => k,
        None => {
            let dt = times[1] - times[0];
            if dt <= 0.0 {
                return Err(schema(file, last_row, "times must increase"));
            }
            (1.0 / dt).round() as usize
        }
    };
    let step = Step::per_unit(per_unit).map_err(|e| schema(file, 1, e))?;
    let horizon = match horizon {
        Some(n) => n,
        None => {
            let t_end = *times.last().expect("checked non-empty");
            let n = t_end.round();
            if (t_end - n).abs() > 1e-9 || n < 1.0 {
                return Err(schema(file, last_row, format!("path ends at t = {t_end}, not a positive integer")));
            }
            n as usize
        }
    };
    let expected = horizon * per_unit + 1;
    if times.len() != expected {
        return Err(schema(
            file,
            last_row,
            format!("expected {expected} data rows for horizon {horizon}, found {} (truncated?)", times.len()),
        ));
    }
    let delta = step.delta();
    if let Some(i) = times
        .iter()
        .enumerate()
        .position(|(i, t)| (t - i as f64 * delta).abs() > 1e-9 * (1.0 + i as f64 * delta))
    {
        // data row i is line last_row - (len - 1 - i) when there are no
        // interleaved comments, which holds for files written here
        let row = last_row + i + 1 - times.len();
        return Err(schema(file, row, format!("t = {} is off the grid iΔ", times[i])));
    }
    SamplePath::from_values(horizon, step, values).map_err(|e| schema(file, last_row, e))
}
