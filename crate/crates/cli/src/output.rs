//! Result tables and trace files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use pins::estimator::{PartitionEstimate, RunResult};

use crate::config::Format;
use crate::error::CliError;

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 11] = [
    "T_K",
    "M",
    "K",
    "S",
    "L",
    "n_runs",
    "Q_mean",
    "Q_sigma",
    "logZ_mean",
    "iterations_mean",
    "wall_s",
];

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(rename = "T_K")]
    pub t_k: f64,
    #[serde(rename = "M")]
    pub beads: usize,
    #[serde(rename = "K")]
    pub live_points: usize,
    #[serde(rename = "S")]
    pub walk_steps: usize,
    #[serde(rename = "L")]
    pub box_l: f64,
    pub n_runs: usize,
    #[serde(rename = "Q_mean")]
    pub q_mean: f64,
    /// NaN when there is a single run.
    #[serde(rename = "Q_sigma")]
    pub q_sigma: f64,
    #[serde(rename = "logZ_mean")]
    pub log_z_mean: f64,
    pub iterations_mean: f64,
    pub wall_s: Option<f64>,
}

impl Row {
    pub fn from_estimate(t_k: f64, est: &PartitionEstimate, wall_s: Option<f64>) -> Self {
        Self {
            t_k,
            beads: est.beads,
            live_points: est.params_echo.live_points,
            walk_steps: est.params_echo.walk_steps,
            box_l: est.params_echo.box_length,
            n_runs: est.n_runs,
            q_mean: est.q_mean,
            q_sigma: est.q_sigma_of_mean,
            log_z_mean: est.log_evidence_mean,
            iterations_mean: est.iterations_mean,
            wall_s,
        }
    }
}

/// JSON form of a row: the CSV columns plus the per-run values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRow {
    #[serde(flatten)]
    pub row: JsonColumns,
    #[serde(rename = "Q_runs")]
    pub q_runs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub n_ssw: u32,
}

/// Same fields as [`Row`] with the possibly-NaN sigma as an option, since
/// JSON has no NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonColumns {
    #[serde(rename = "T_K")]
    pub t_k: f64,
    #[serde(rename = "M")]
    pub beads: usize,
    #[serde(rename = "K")]
    pub live_points: usize,
    #[serde(rename = "S")]
    pub walk_steps: usize,
    #[serde(rename = "L")]
    pub box_l: f64,
    pub n_runs: usize,
    #[serde(rename = "Q_mean")]
    pub q_mean: f64,
    #[serde(rename = "Q_sigma")]
    pub q_sigma: Option<f64>,
    #[serde(rename = "logZ_mean")]
    pub log_z_mean: f64,
    pub iterations_mean: f64,
    pub wall_s: Option<f64>,
}

impl JsonColumns {
    pub fn from_row(r: &Row) -> Self {
        Self {
            t_k: r.t_k,
            beads: r.beads,
            live_points: r.live_points,
            walk_steps: r.walk_steps,
            box_l: r.box_l,
            n_runs: r.n_runs,
            q_mean: r.q_mean,
            q_sigma: (!r.q_sigma.is_nan()).then_some(r.q_sigma),
            log_z_mean: r.log_z_mean,
            iterations_mean: r.iterations_mean,
            wall_s: r.wall_s,
        }
    }

    pub fn to_row(&self) -> Row {
        Row {
            t_k: self.t_k,
            beads: self.beads,
            live_points: self.live_points,
            walk_steps: self.walk_steps,
            box_l: self.box_l,
            n_runs: self.n_runs,
            q_mean: self.q_mean,
            q_sigma: self.q_sigma.unwrap_or(f64::NAN),
            log_z_mean: self.log_z_mean,
            iterations_mean: self.iterations_mean,
            wall_s: self.wall_s,
        }
    }
}

/// Destination of result rows. CSV rows are flushed as soon as they are
/// written; JSON is written as one array by [`ResultSink::finish`].
pub enum ResultSink {
    Csv(csv::Writer<Box<dyn Write>>),
    Json { out: Box<dyn Write>, rows: Vec<JsonRow> },
}

fn open_target(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(format!("cannot create {}", p.display()), e))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(io::stdout()),
    })
}

impl ResultSink {
    pub fn open(path: Option<&Path>, format: Format) -> Result<Self, CliError> {
        let out = open_target(path)?;
        Ok(match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
                w.write_record(CSV_HEADER).map_err(csv_err)?;
                w.flush().map_err(|e| CliError::io("write results", e))?;
                Self::Csv(w)
            }
            Format::Json => Self::Json { out, rows: Vec::new() },
        })
    }

    pub fn push(&mut self, row: &Row, est: &PartitionEstimate) -> Result<(), CliError> {
        match self {
            Self::Csv(w) => {
                w.serialize(row).map_err(csv_err)?;
                w.flush().map_err(|e| CliError::io("write results", e))
            }
            Self::Json { rows, .. } => {
                rows.push(JsonRow {
                    row: JsonColumns::from_row(row),
                    q_runs: est.run_values.clone(),
                    seeds: est.params_echo.seeds.clone(),
                    n_ssw: est.n_ssw,
                });
                Ok(())
            }
        }
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self {
            Self::Csv(mut w) => w.flush().map_err(|e| CliError::io("write results", e)),
            Self::Json { mut out, rows } => {
                serde_json::to_writer_pretty(&mut out, &rows).map_err(|e| CliError::Other(e.to_string()))?;
                writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io("write results", e))
            }
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Other(format!("CSV output: {e}"))
}

/// Reads a result table written by [`ResultSink`]; `.json` files are read
/// as JSON, anything else as CSV.
pub fn read_results(path: &Path) -> Result<Vec<Row>, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let rows: Vec<JsonRow> =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(rows.iter().map(|r| r.row.to_row()).collect())
    } else {
        read_csv(path)
    }
}

fn read_csv(path: &Path) -> Result<Vec<Row>, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(CliError::Config(format!("{} does not have the result-table header", path.display())));
    }
    rdr.deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Path of the trace file belonging to a result file.
pub fn trace_path(results: Option<&Path>) -> PathBuf {
    match results {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".traces.jsonl.gz");
            PathBuf::from(s)
        }
        None => PathBuf::from("traces.jsonl.gz"),
    }
}

#[derive(Serialize)]
struct TraceRecord {
    #[serde(rename = "T_K")]
    t_k: f64,
    #[serde(rename = "M")]
    beads: usize,
    #[serde(rename = "L")]
    box_l: f64,
    run: usize,
    seed: u64,
    iteration: usize,
    threshold: f64,
    #[serde(rename = "log_X")]
    log_x: f64,
    #[serde(rename = "logZ")]
    log_z: f64,
    acceptance: Option<f64>,
}

/// Gzip-compressed JSON lines, one record per nested-sampling iteration.
pub struct TraceWriter {
    enc: GzEncoder<BufWriter<File>>,
    path: PathBuf,
}

impl TraceWriter {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        let f = File::create(&path).map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))?;
        Ok(Self { enc: GzEncoder::new(BufWriter::new(f), Compression::default()), path })
    }

    pub fn write_runs(&mut self, t_k: f64, box_l: f64, runs: &[RunResult]) -> Result<(), CliError> {
        for (r, run) in runs.iter().enumerate() {
            let t = &run.trace;
            for i in 0..t.thresholds.len() {
                let rec = TraceRecord {
                    t_k,
                    beads: run.beads,
                    box_l,
                    run: r,
                    seed: run.seed,
                    iteration: i + 1,
                    threshold: t.thresholds[i],
                    log_x: t.log_prior_masses[i],
                    log_z: t.log_evidence_history[i],
                    acceptance: t.acceptance_history.get(i).copied(),
                };
                serde_json::to_writer(&mut self.enc, &rec).map_err(|e| CliError::Other(e.to_string()))?;
                self.enc
                    .write_all(b"\n")
                    .map_err(|e| CliError::io(format!("write {}", self.path.display()), e))?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), CliError> {
        let path = self.path;
        self.enc
            .finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| CliError::io(format!("write {}", path.display()), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> Row {
        Row {
            t_k: 1000.0,
            beads: 9,
            live_points: 1000,
            walk_steps: 800,
            box_l: 12.0,
            n_runs: 1,
            q_mean: 141.63594259793,
            q_sigma: f64::NAN,
            log_z_mean: -123.25,
            iterations_mean: 51234.0,
            wall_s: None,
        }
    }

    #[test]
    fn json_columns_round_trip() {
        let r = row();
        let j = JsonColumns::from_row(&r);
        assert_eq!(j.q_sigma, None);
        let text = serde_json::to_string(&j).unwrap();
        let back: JsonColumns = serde_json::from_str(&text).unwrap();
        let r2 = back.to_row();
        assert!(r2.q_sigma.is_nan());
        assert_eq!(r2.q_mean, r.q_mean);
        assert_eq!(r2.t_k, r.t_k);
    }

    #[test]
    fn trace_path_appends_suffix() {
        assert_eq!(trace_path(Some(Path::new("a/b.csv"))), PathBuf::from("a/b.csv.traces.jsonl.gz"));
        assert_eq!(trace_path(None), PathBuf::from("traces.jsonl.gz"));
    }
}
