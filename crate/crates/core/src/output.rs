//! Trajectory and point-cloud CSV files and the run summary document.
//!
//! Numbers are written in Rust's shortest round-trip decimal form, so every
//! value re-parses to the identical `f64` and repeated runs produce identical
//! bytes.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::controller::{ControlLaw, Mode};
use crate::geometry::VecN;
use crate::params::ValidatedParams;
use crate::sim::{HybridTrajectory, SimConfig, SimError, TerminalReason};
use crate::verify::lyapunov;
use crate::verify::sampling::{PointCloud, SetLabel};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn schema(line: usize, msg: impl Into<String>) -> OutputError {
    OutputError::Schema { line, msg: msg.into() }
}

pub fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string(), "j".into(), "m".into()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.push("dist_c".into());
    cols.push("V".into());
    cols.extend((1..=n).map(|i| format!("u_{i}")));
    cols.join(",")
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &HybridTrajectory, law: &ControlLaw) -> io::Result<()> {
    let n = law.dim();
    let c = law.params().center();
    writeln!(w, "{}", trajectory_header(n))?;
    let mut line = String::new();
    for (t, j, m, x) in traj.samples() {
        // κ is undefined only at x = c, which a safe trajectory never visits
        let u = law.kappa(x, m).map(|u| u.as_slice().to_vec()).unwrap_or_else(|_| vec![f64::NAN; n]);
        line.clear();
        line.push_str(&format!("{t},{j},{}", m.as_i8()));
        for xi in x.as_slice() {
            line.push_str(&format!(",{xi}"));
        }
        line.push_str(&format!(",{},{}", x.dist(c), lyapunov(law, x, m)));
        for ui in &u {
            line.push_str(&format!(",{ui}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// One parsed row of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub j: usize,
    pub m: Mode,
    pub x: Vec<f64>,
    pub dist_c: f64,
    pub v: f64,
    pub u: Vec<f64>,
}

fn parse_f64(line: usize, field: &str) -> Result<f64, OutputError> {
    field.trim().parse().map_err(|_| schema(line, format!("not a number: {field:?}")))
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>, OutputError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema(1, "missing header"))?;
    let ncols = header.split(',').count();
    if ncols < 7 || (ncols - 5) % 2 != 0 {
        return Err(schema(1, format!("unexpected column count {ncols}")));
    }
    let n = (ncols - 5) / 2;
    if header != trajectory_header(n) {
        return Err(schema(1, format!("header does not match {}", trajectory_header(n))));
    }
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != ncols {
            return Err(schema(line, format!("expected {ncols} fields, got {}", f.len())));
        }
        let j = f[1].parse().map_err(|_| schema(line, format!("bad jump count {:?}", f[1])))?;
        let m = f[2]
            .parse::<i8>()
            .ok()
            .and_then(Mode::from_i8)
            .ok_or_else(|| schema(line, format!("bad mode {:?}", f[2])))?;
        let nums = |r: std::ops::Range<usize>| f[r].iter().map(|s| parse_f64(line, s)).collect::<Result<Vec<_>, _>>();
        rows.push(TrajectoryRow {
            t: parse_f64(line, f[0])?,
            j,
            m,
            x: nums(3..3 + n)?,
            dist_c: parse_f64(line, f[3 + n])?,
            v: parse_f64(line, f[4 + n])?,
            u: nums(5 + n..ncols)?,
        });
    }
    Ok(rows)
}

pub fn point_cloud_header(n: usize) -> String {
    let mut cols: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    cols.push("set_label".into());
    cols.join(",")
}

pub fn write_point_cloud_csv<W: Write>(mut w: W, n: usize, cloud: &PointCloud) -> io::Result<()> {
    writeln!(w, "{}", point_cloud_header(n))?;
    for x in &cloud.points {
        let coords: Vec<String> = x.as_slice().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", coords.join(","), cloud.label)?;
    }
    Ok(())
}

pub fn parse_point_cloud_csv(text: &str) -> Result<Vec<(Vec<f64>, SetLabel)>, OutputError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema(1, "missing header"))?;
    let ncols = header.split(',').count();
    if ncols < 3 || header != point_cloud_header(ncols - 1) {
        return Err(schema(1, "header must be x_1..x_n,set_label"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let line = i + 2;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != ncols {
                return Err(schema(line, format!("expected {ncols} fields, got {}", f.len())));
            }
            let x = f[..ncols - 1].iter().map(|s| parse_f64(line, s)).collect::<Result<Vec<_>, _>>()?;
            let label = f[ncols - 1].parse().map_err(|e: String| schema(line, e))?;
            Ok((x, label))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub index: usize,
    pub x0: VecN,
    pub m0: Mode,
    pub jumps: Option<usize>,
    pub min_dist: Option<f64>,
    pub t_converge: Option<f64>,
    pub ambiguity_count: Option<usize>,
    pub terminal_reason: Option<TerminalReason>,
    pub trajectory_csv: Option<String>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn new(
        index: usize,
        x0: &VecN,
        m0: Mode,
        result: &Result<HybridTrajectory, SimError>,
        law: &ControlLaw,
        trajectory_csv: Option<String>,
    ) -> Self {
        let mut s = RunSummary {
            index,
            x0: x0.clone(),
            m0,
            jumps: None,
            min_dist: None,
            t_converge: None,
            ambiguity_count: None,
            terminal_reason: None,
            trajectory_csv,
            error: None,
        };
        match result {
            Ok(traj) => {
                s.jumps = Some(traj.jump_count());
                s.min_dist = Some(traj.min_dist_to(law.params().center()));
                s.t_converge = traj.t_converge();
                s.ambiguity_count = Some(traj.ambiguity_count());
                s.terminal_reason = traj.terminal_reason();
            }
            Err(e) => s.error = Some(e.to_string()),
        }
        s
    }

    pub fn converged(&self) -> bool {
        self.terminal_reason == Some(TerminalReason::GoalReached)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary<'a> {
    pub params: &'a ValidatedParams,
    pub sim: SimConfig,
    pub seed: u64,
    pub runs: Vec<RunSummary>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, RawParams};
    use crate::sim::simulate;
    use crate::verify::sampling::sample_set;

    fn law() -> ControlLaw {
        ControlLaw::new(validate(RawParams::reference_3d()).unwrap())
    }

    #[test]
    fn header_layout() {
        assert_eq!(trajectory_header(2), "t,j,m,x_1,x_2,dist_c,V,u_1,u_2");
        assert_eq!(point_cloud_header(3), "x_1,x_2,x_3,set_label");
    }

    #[test]
    fn trajectory_csv_reparses_exactly() {
        let law = law();
        let c = law.params().center();
        let x0 = c.scale(3.0 / c.norm());
        let cfg = SimConfig { h: 0.01, ..SimConfig::default() };
        let traj = simulate(&law, &x0, Mode::Stabilize, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj, &law).unwrap();
        let rows = parse_trajectory_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        let samples: Vec<_> = traj.samples().collect();
        assert_eq!(rows.len(), samples.len());
        for (row, (t, j, m, x)) in rows.iter().zip(samples) {
            assert_eq!((row.t, row.j, row.m), (t, j, m));
            assert_eq!(row.x.as_slice(), x.as_slice());
            assert_eq!(row.dist_c, x.dist(c));
        }
        assert_eq!(rows.last().unwrap().j, 2);
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(parse_trajectory_csv("").is_err());
        assert!(parse_trajectory_csv("t,j,m,x_1,x_2,dist_c,V,u_1,u_2\n0,0,0,1,2,3,4,5\n").is_err());
        assert!(parse_trajectory_csv("t,j,m,x_1,x_2,dist_c,V,u_1,u_2\n0,0,5,1,2,3,4,5,6\n").is_err());
        assert!(parse_trajectory_csv("t,j,m,y_1,x_2,dist_c,V,u_1,u_2\n").is_err());
        assert!(parse_point_cloud_csv("x_1,x_2,set_label\n1,2,F7\n").is_err());
    }

    #[test]
    fn point_cloud_round_trip() {
        let law = law();
        let cloud = sample_set(&law, SetLabel::Obstacle, 50, 1_000_000, 2);
        let mut buf = Vec::new();
        write_point_cloud_csv(&mut buf, 3, &cloud).unwrap();
        let rows = parse_point_cloud_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows.len(), 50);
        for ((x, label), p) in rows.iter().zip(&cloud.points) {
            assert_eq!(*label, SetLabel::Obstacle);
            assert_eq!(x.as_slice(), p.as_slice());
        }
    }

    #[test]
    fn summary_of_failed_run() {
        let law = law();
        let c = law.params().center().clone();
        let r = simulate(&law, &c, Mode::Stabilize, &SimConfig::default());
        let s = RunSummary::new(0, &c, Mode::Stabilize, &r, &law, None);
        assert!(s.error.as_deref().unwrap().contains("inside the obstacle"));
        assert!(!s.converged());
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["m0"], 0);
        assert!(json["jumps"].is_null());
    }
}
