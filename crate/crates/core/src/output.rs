//! CSV, plot-data and text summaries of a trajectory log.
//!
//! Floats are written with 17 significant digits so that parsing them back
//! reproduces the stored `f64` exactly. Lines end in LF.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::analysis::{
    convergence_time, v1_rate, FtissConstants, RigidityDiagnostics, SampleMetrics,
};
use crate::geometry::Vec3;
use crate::sim::{Sample, TrajectoryLog};

/// `{:.16e}` keeps 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        for c in ["x", "y", "z"] {
            cols.push(format!("p_{i}_{c}"));
        }
    }
    cols.extend((1..=m).map(|k| format!("ze_{k}")));
    cols.extend(["V1", "V", "gate", "bound"].map(String::from));
    cols.join(",")
}

pub fn write_csv<W: Write>(log: &TrajectoryLog, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", csv_header(log.n, log.m))?;
    let mut line = String::new();
    for s in &log.samples {
        line.clear();
        line.push_str(&num(s.t));
        for p in &s.p {
            for c in p.iter() {
                line.push(',');
                line.push_str(&num(*c));
            }
        }
        for z in s.metrics.z_e.iter() {
            line.push(',');
            line.push_str(&num(*z));
        }
        let m = &s.metrics;
        let _ = write!(
            line,
            ",{},{},{},{}",
            num(m.v1),
            num(m.v),
            u8::from(m.gate),
            num(m.bound)
        );
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn emit_csv(log: &TrajectoryLog, path: impl AsRef<Path>) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    write_csv(log, &mut w)?;
    w.flush()
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

/// Reads a trajectory CSV back. Estimates are not part of the CSV and come
/// back empty.
pub fn parse_csv(text: &str) -> io::Result<TrajectoryLog> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| invalid("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols.iter().filter(|c| c.starts_with("p_")).count() / 3;
    let m = cols.iter().filter(|c| c.starts_with("ze_")).count();
    if header != csv_header(n, m) {
        return Err(invalid(format!("unexpected header: {header}")));
    }
    let width = 1 + 3 * n + m + 4;
    let mut samples = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(invalid(format!(
                "row {}: expected {width} fields, got {}",
                row + 2,
                fields.len()
            )));
        }
        let vals = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("row {}: {e}", row + 2)))?;
        let p = (0..n)
            .map(|i| Vec3::new(vals[1 + 3 * i], vals[2 + 3 * i], vals[3 + 3 * i]))
            .collect();
        let base = 1 + 3 * n;
        samples.push(Sample {
            t: vals[0],
            p,
            est: Vec::new(),
            metrics: SampleMetrics {
                z_e: DVector::from_column_slice(&vals[base..base + m]),
                v1: vals[base + m],
                v: vals[base + m + 1],
                gate: vals[base + m + 2] != 0.0,
                bound: vals[base + m + 3],
            },
        });
    }
    Ok(TrajectoryLog { n, m, samples })
}

/// Writes `positions.csv` (agent trajectories) and `errors.csv` (elevation
/// errors and their norm) into `dir`.
pub fn emit_plot_data(log: &TrajectoryLog, dir: impl AsRef<Path>) -> io::Result<()> {
    let dir = dir.as_ref();
    let mut pos = String::from("t");
    for i in 1..=log.n {
        for c in ["x", "y", "z"] {
            let _ = write!(pos, ",p_{i}_{c}");
        }
    }
    pos.push('\n');
    let mut err = String::from("t");
    for k in 1..=log.m {
        let _ = write!(err, ",ze_{k}");
    }
    err.push_str(",ze_norm\n");
    for s in &log.samples {
        pos.push_str(&num(s.t));
        for c in s.p.iter().flat_map(|p| p.iter()) {
            pos.push(',');
            pos.push_str(&num(*c));
        }
        pos.push('\n');
        err.push_str(&num(s.t));
        for z in s.metrics.z_e.iter() {
            err.push(',');
            err.push_str(&num(*z));
        }
        err.push(',');
        err.push_str(&num(s.metrics.z_e.norm()));
        err.push('\n');
    }
    std::fs::write(dir.join("positions.csv"), pos)?;
    std::fs::write(dir.join("errors.csv"), err)
}

/// Plain-text run summary.
pub fn emit_summary(
    log: &TrajectoryLog,
    name: &str,
    rigidity: &RigidityDiagnostics,
    estimates: &[(usize, Vec3, Vec3)],
) -> String {
    let mut out = String::new();
    let first = &log.samples[0];
    let last = log.last();
    let _ = writeln!(out, "scenario: {name}");
    let _ = writeln!(
        out,
        "agents: {}  edges: {}  samples: {}",
        log.n,
        log.m,
        log.samples.len()
    );
    let r = &rigidity.rank;
    let _ = writeln!(
        out,
        "rigidity at desired shape: rank {}/{} ({}), shape {:?}",
        r.rank,
        r.required,
        if r.rigid { "rigid" } else { "NOT rigid" },
        rigidity.shape_source
    );
    match &rigidity.constants {
        Some(c) => write_constants(&mut out, c),
        None => {
            let _ = writeln!(out, "constants at desired shape: no positive eigenvalue");
        }
    }
    let _ = writeln!(
        out,
        "|z_e|: {:.6e} at t = {} -> {:.6e} at t = {}",
        first.metrics.z_e.norm(),
        first.t,
        last.metrics.z_e.norm(),
        last.t
    );
    let _ = writeln!(out, "V: {:.6e} -> {:.6e}", first.metrics.v, last.metrics.v);
    let rise = log
        .samples
        .windows(2)
        .map(|w| w[1].metrics.v - w[0].metrics.v)
        .fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(out, "largest V increase between samples: {rise:.3e}");
    for eps in [1e-1, 1e-2, 1e-3] {
        match convergence_time(log, eps) {
            Some(t) => {
                let _ = writeln!(out, "|z_e| < {eps:e} from t = {t}");
            }
            None => {
                let _ = writeln!(out, "|z_e| < {eps:e}: not reached");
            }
        }
    }
    let gated = log.samples.iter().filter(|s| s.metrics.gate).count();
    let rates = v1_rate(log);
    let worst = log
        .samples
        .iter()
        .zip(&rates)
        .filter(|(s, _)| s.metrics.gate && s.metrics.z_e.norm() > 1e-6)
        .map(|(s, r)| r - s.metrics.bound)
        .reduce(f64::max);
    let _ = match worst {
        Some(w) => writeln!(
            out,
            "decay gate open at {gated} samples; worst dV1/dt - bound: {w:.3e}"
        ),
        None => writeln!(
            out,
            "decay gate open at {gated} samples; worst dV1/dt - bound: n/a"
        ),
    };
    for (i, est, target) in estimates {
        let _ = writeln!(
            out,
            "follower {}: estimate [{:.6}, {:.6}, {:.6}] target [{:.6}, {:.6}, {:.6}] error {:.3e}",
            i + 1,
            est.x,
            est.y,
            est.z,
            target.x,
            target.y,
            target.z,
            (est - target).norm()
        );
    }
    out
}

fn write_constants(out: &mut String, c: &FtissConstants) {
    let _ = writeln!(
        out,
        "constants at desired shape: lambda+ = {:.6e}, |HM| = {:.6}, gate_coeff = {:.6e}, decay_coeff = {:.6e}",
        c.lambda_plus, c.hm_norm, c.gate_coeff, c.decay_coeff
    );
}
