//! One flat record per control tick, written as CSV or JSON lines.
//!
//! Column order is the field order of [`TelemetryRecord`] and is part of the
//! file format; [`COLUMNS`] lists it for readers.

use std::io::{BufRead, Read, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuation::ControlInput;
use crate::dynamics::{FishState, StepDerived};
use crate::error::{Error, Result};

pub const COLUMNS: [&str; 37] = [
    "t",
    "x",
    "y",
    "z",
    "qw",
    "qx",
    "qy",
    "qz",
    "u",
    "v",
    "w",
    "p",
    "q",
    "r",
    "roll",
    "pitch",
    "yaw",
    "theta_m",
    "omega_m",
    "u_a",
    "u_s",
    "u_r",
    "u_p",
    "v_tail",
    "a_tail",
    "u_t",
    "thrust",
    "fin_left",
    "fin_right",
    "fx",
    "fy",
    "fz",
    "mx",
    "my",
    "mz",
    "breach",
    "floor_contact",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryRecord {
    pub t: f64,
    /// World position, z down (m).
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    /// Body-frame velocity (m/s).
    pub u: f64,
    pub v: f64,
    pub w: f64,
    /// Body rates (rad/s).
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Z-Y-X Euler angles (rad).
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub theta_m: f64,
    pub omega_m: f64,
    pub u_a: f64,
    pub u_s: f64,
    pub u_r: f64,
    pub u_p: f64,
    pub v_tail: f64,
    pub a_tail: f64,
    pub u_t: f64,
    pub thrust: f64,
    pub fin_left: f64,
    pub fin_right: f64,
    /// Summed body-frame loads from the last substep.
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
    pub breach: bool,
    pub floor_contact: bool,
}

impl TelemetryRecord {
    pub fn new(t: f64, s: &FishState, cmd: &ControlInput, d: &StepDerived) -> Self {
        let q = s.orientation.quaternion();
        let (roll, pitch, yaw) = s.euler();
        Self {
            t,
            x: s.position.x,
            y: s.position.y,
            z: s.position.z,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            u: s.lin_vel.x,
            v: s.lin_vel.y,
            w: s.lin_vel.z,
            p: s.ang_vel.x,
            q: s.ang_vel.y,
            r: s.ang_vel.z,
            roll,
            pitch,
            yaw,
            theta_m: s.motor.theta_m,
            omega_m: s.motor.omega_m,
            u_a: cmd.u_a,
            u_s: cmd.u_s,
            u_r: cmd.u_r,
            u_p: cmd.u_p,
            v_tail: d.v_tail,
            a_tail: d.a_tail,
            u_t: d.u_t,
            thrust: d.thrust,
            fin_left: s.fins.left,
            fin_right: s.fins.right,
            fx: d.loads.force.x,
            fy: d.loads.force.y,
            fz: d.loads.force.z,
            mx: d.loads.moment.x,
            my: d.loads.moment.y,
            mz: d.loads.moment.z,
            breach: d.breach,
            floor_contact: d.floor_contact,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_quaternion(Quaternion::new(self.qw, self.qx, self.qy, self.qz))
    }

    pub fn world_velocity(&self) -> Vector3<f64> {
        self.orientation()
            .transform_vector(&Vector3::new(self.u, self.v, self.w))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Telemetry(e.to_string())
}

/// Write every `decimation`-th record (the first is always written).
pub fn write_csv<'a, W: Write>(
    out: W,
    records: impl IntoIterator<Item = &'a TelemetryRecord>,
    decimation: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in records.into_iter().step_by(decimation.max(1)) {
        w.serialize(rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a TelemetryRecord>,
    decimation: usize,
) -> Result<()> {
    for rec in records.into_iter().step_by(decimation.max(1)) {
        serde_json::to_writer(&mut out, rec).map_err(|e| Error::Telemetry(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TelemetryRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != COLUMNS {
        return Err(Error::Telemetry(format!(
            "unexpected CSV header; expected {} columns starting `t,x,y,z`",
            COLUMNS.len()
        )));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Telemetry(format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TelemetryRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Telemetry(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FishState;

    fn sample(t: f64) -> TelemetryRecord {
        let s = FishState::at_rest(
            Vector3::new(1.0, -2.0, 0.5),
            UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3),
        );
        TelemetryRecord::new(
            t,
            &s,
            &ControlInput::new(0.62, 0.1, -0.2, 0.3).unwrap(),
            &StepDerived::default(),
        )
    }

    #[test]
    fn header_matches_columns() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[sample(0.0)], 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let recs: Vec<_> = (0..10).map(|i| sample(i as f64 * 0.0025)).collect();
        let mut csv_buf = Vec::new();
        write_csv(&mut csv_buf, &recs, 1).unwrap();
        assert_eq!(read_csv(csv_buf.as_slice()).unwrap(), recs);
        let mut jl = Vec::new();
        write_jsonl(&mut jl, &recs, 1).unwrap();
        assert_eq!(read_jsonl(jl.as_slice()).unwrap(), recs);
    }

    #[test]
    fn decimation_keeps_first_and_every_nth() {
        let recs: Vec<_> = (0..10).map(|i| sample(i as f64)).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs, 4).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        let ts: Vec<f64> = back.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 4.0, 8.0]);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
