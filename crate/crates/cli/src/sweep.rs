//! Temperature sweeps and parameter scans.

use std::time::Instant;

use pins::estimator::{ring_polymer_for, run_ensemble};

use crate::config::{Beads, RunConfig};
use crate::error::CliError;
use crate::output::{ResultSink, Row, TraceWriter};

/// Which run parameter a scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanKind {
    BoxLength,
    Beads,
}

/// Runs every temperature of `cfg` and writes one row per temperature.
/// Rows already produced are flushed before an error is returned.
pub fn run_sweep(
    cfg: &RunConfig,
    sink: &mut ResultSink,
    traces: Option<&mut TraceWriter>,
) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::new();
    let res = sweep_into(cfg, sink, traces, &mut rows);
    res.map(|_| rows)
}

fn sweep_into(
    cfg: &RunConfig,
    sink: &mut ResultSink,
    mut traces: Option<&mut TraceWriter>,
    rows: &mut Vec<Row>,
) -> Result<(), CliError> {
    let frame = cfg.frame()?;
    let pot = cfg.potential(&frame)?;
    let e0 = cfg.zero_point(&frame)?;
    let ns = cfg.ns_params();
    let keep = traces.is_some();
    for (ti, &t) in cfg.run.temperatures_k.iter().enumerate() {
        let start = Instant::now();
        let sys = ring_polymer_for(&frame, &pot, t, cfg.beads_for(ti))?;
        let (est, runs) = run_ensemble(&sys, e0, &ns, cfg.run.n_runs, ti, cfg.ssw.n_ssw, keep)?;
        let wall = cfg.output.wall_time.then(|| start.elapsed().as_secs_f64());
        let row = Row::from_estimate(t, &est, wall);
        sink.push(&row, &est)?;
        if let Some(tw) = traces.as_deref_mut() {
            tw.write_runs(t, ns.box_length, &runs)?;
        }
        rows.push(row);
    }
    Ok(())
}

/// Repeats [`run_sweep`] for each value of the scanned parameter.
pub fn run_scan(
    cfg: &RunConfig,
    kind: ScanKind,
    values: &[f64],
    sink: &mut ResultSink,
    mut traces: Option<&mut TraceWriter>,
) -> Result<Vec<Row>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let mut variants = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        match kind {
            ScanKind::BoxLength => c.run.box_l = v,
            ScanKind::Beads => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(CliError::Config(format!("bead count {v} is not a positive integer")));
                }
                c.run.beads = Beads::One(v as usize);
            }
        }
        c.validate()?;
        variants.push(c);
    }
    let mut rows = Vec::new();
    for c in &variants {
        rows.extend(run_sweep(c, sink, traces.as_deref_mut())?);
    }
    Ok(rows)
}
