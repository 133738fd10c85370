//! Tabular and image outputs. Every CSV starts with a header row; column
//! names are part of the public interface.

use std::io::{self, Write};

use crate::calibration::SweepResult;
use crate::metrics::{FdPoint, Outflow, SpeedTable};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `window_start,density,speed,flow`
pub fn write_fd<W: Write>(w: W, points: &[FdPoint]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["window_start", "density", "speed", "flow"])?;
    for p in points {
        out.write_record([
            p.window_start.to_string(),
            p.density.to_string(),
            p.speed.to_string(),
            p.flow.to_string(),
        ])?;
    }
    out.flush()
}

/// One row of a fundamental-diagram campaign summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSummaryRow {
    pub target_density: f64,
    pub dyad_fraction: f64,
    pub replica: u32,
    pub density: f64,
    pub speed: f64,
    pub flow: f64,
}

/// `target_density,dyad_fraction,replica,density,speed,flow`
pub fn write_fd_summary<W: Write>(w: W, rows: &[FdSummaryRow]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "target_density",
        "dyad_fraction",
        "replica",
        "density",
        "speed",
        "flow",
    ])?;
    for r in rows {
        out.write_record([
            r.target_density.to_string(),
            r.dyad_fraction.to_string(),
            r.replica.to_string(),
            r.density.to_string(),
            r.speed.to_string(),
            r.flow.to_string(),
        ])?;
    }
    out.flush()
}

/// `class,speed`; the speed cell is empty for classes without samples.
pub fn write_speeds<W: Write>(w: W, table: &SpeedTable) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["class", "speed"])?;
    for (class, v) in table.rows() {
        out.write_record([class.to_string(), opt(v)])?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRow {
    pub width: f64,
    pub dyad_fraction: f64,
    pub replica: u32,
    pub outflow: Outflow,
}

/// `width,dyad_fraction,replica,crossings,duration,flow,specific_flow`
pub fn write_flow<W: Write>(w: W, rows: &[FlowRow]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "width",
        "dyad_fraction",
        "replica",
        "crossings",
        "duration",
        "flow",
        "specific_flow",
    ])?;
    for r in rows {
        out.write_record([
            r.width.to_string(),
            r.dyad_fraction.to_string(),
            r.replica.to_string(),
            r.outflow.crossings.to_string(),
            r.outflow.duration.to_string(),
            r.outflow.j.to_string(),
            r.outflow.specific.to_string(),
        ])?;
    }
    out.flush()
}

/// `rank,index,delta,kappa_c,speed_single,speed_dyad,speed_population,histogram_distance,objective,failure`,
/// in lattice order.
pub fn write_sweep<W: Write>(w: W, result: &SweepResult) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "rank",
        "index",
        "delta",
        "kappa_c",
        "speed_single",
        "speed_dyad",
        "speed_population",
        "histogram_distance",
        "objective",
        "failure",
    ])?;
    for p in &result.points {
        out.write_record([
            (result.rank_of(p.index) + 1).to_string(),
            p.index.to_string(),
            p.delta.to_string(),
            p.kappa_c.to_string(),
            opt(p.speeds.single),
            opt(p.speeds.dyad),
            opt(p.speeds.population),
            opt(p.histogram_distance),
            p.objective.to_string(),
            p.failure.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()
}

/// Row-major matrix without header names other than the column indices:
/// the first row is `y,0,1,...` and each following row starts with its `y`.
pub fn write_matrix<W: Write>(w: W, width: usize, values: &[f64]) -> io::Result<()> {
    assert!(width > 0 && values.len() % width == 0, "matrix shape");
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("y".to_string())
        .chain((0..width).map(|x| x.to_string()))
        .collect();
    out.write_record(&header)?;
    for (y, row) in values.chunks(width).enumerate() {
        let rec: Vec<String> = std::iter::once(y.to_string())
            .chain(row.iter().map(|v| v.to_string()))
            .collect();
        out.write_record(&rec)?;
    }
    out.flush()
}

/// Binary greymap (P5) of a row-major matrix, `y = 0` at the top. Values
/// are scaled linearly so that `max` maps to 255; anything above clips.
pub fn write_pgm<W: Write>(mut w: W, width: usize, values: &[f64], max: f64) -> io::Result<()> {
    assert!(width > 0 && values.len() % width == 0, "matrix shape");
    let height = values.len() / width;
    write!(w, "P5\n{width} {height}\n255\n")?;
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()
}
