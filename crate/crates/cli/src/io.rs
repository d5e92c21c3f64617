//! CSV and JSON artifacts. Floats are written with 17 significant digits.

use crate::CliError;
use nlhawkes::model::History;
use nlhawkes::simulate::EventSequence;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const EVENTS_CSV: &str = "events.csv";
pub const COMPENSATOR_CSV: &str = "compensator.csv";
pub const COUNTS_CSV: &str = "counts.csv";
pub const FCLT_CSV: &str = "fclt.csv";
pub const LIL_CSV: &str = "lil.csv";
pub const STATS_JSON: &str = "stats.json";
pub const REPORT_JSON: &str = "report.json";
pub const LIL_REPORT_JSON: &str = "lil_report.json";
pub const VERIFY_JSON: &str = "verify.json";

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, CliError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(header).map_err(|e| io_err(&path, e))?;
        Ok(CsvOut { writer, path })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| io_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
    text.push('\n');
    let mut file = File::create(&path).map_err(|e| io_err(&path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))
}

/// Reads `events.csv` back into one sequence per replication. Rows with
/// non-positive times form the history of their replication.
pub fn read_events(path: &Path, replications: usize, horizon: f64) -> Result<Vec<EventSequence>, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = reader.headers().map_err(|e| io_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["replication", "time"] {
        return Err(bad("expected header replication,time".into()));
    }
    let mut per_rep: Vec<Vec<f64>> = vec![Vec::new(); replications];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let parse_err = |field: &str| bad(format!("row {}: cannot parse {field}", line + 2));
        let r: usize = record[0].parse().map_err(|_| parse_err("replication"))?;
        let t: f64 = record[1].parse().map_err(|_| parse_err("time"))?;
        if r >= replications {
            return Err(bad(format!("replication {r} exceeds the configured {replications} replications")));
        }
        per_rep[r].push(t);
    }
    per_rep
        .into_iter()
        .enumerate()
        .map(|(r, times)| {
            let split = times.partition_point(|&t| t <= 0.0);
            let history = History::new(times[..split].to_vec()).map_err(|e| bad(format!("replication {r}: {e}")))?;
            EventSequence::new(history, times[split..].to_vec(), horizon)
                .map_err(|e| bad(format!("replication {r}: {e}")))
        })
        .collect()
}
