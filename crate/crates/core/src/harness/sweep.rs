//! Grid search over tail-beat frequency and lever geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gait::throttle_for_frequency;
use super::scenario::{run_to_report, Scenario, Trace};
use crate::actuation::ControlInput;
use crate::error::{Error, Result};
use crate::mechanism::MechanismGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Requested beat frequency (Hz).
    pub frequency: f64,
    pub d_1: f64,
    pub amplitude_pp: f64,
    pub max_tail_angle_deg: f64,
    pub u_a: f64,
    /// Beat frequency measured over the steady window (Hz).
    pub beat_hz: f64,
    /// Full throttle could not reach the requested frequency.
    pub saturated: bool,
    pub steady_speed: f64,
    pub strouhal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub frequency: f64,
    pub d_1: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedPoint>,
    /// Index of the fastest row.
    pub best: Option<usize>,
}

impl SweepTable {
    pub fn best_row(&self) -> Option<&SweepRow> {
        self.best.map(|i| &self.rows[i])
    }
}

/// Inclusive arithmetic grid `start, start + step, ..., <= stop`.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop >= start) {
        return Err(Error::Scenario(format!("bad grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

enum Point {
    Row(SweepRow),
    Skip(SkippedPoint),
}

fn run_point(template: &Scenario, frequency: f64, d_1: f64) -> Result<Point> {
    let mut params = template.params;
    params.mechanism.d_1 = d_1;
    let geom: &MechanismGeometry = &params.mechanism;
    if let Err(e) = geom.validate() {
        return Ok(Point::Skip(SkippedPoint {
            frequency,
            d_1,
            reason: e.to_string(),
        }));
    }
    let gait = throttle_for_frequency(frequency, &params)?;
    let mut s = template.clone();
    s.params = params;
    s.trace = Trace::Steps(vec![(0.0, ControlInput::cruise(gait.u_a)?)]);
    let report = run_to_report(&s)?;
    let amplitude_pp = geom.peak_to_peak_amplitude();
    Ok(Point::Row(SweepRow {
        frequency,
        d_1,
        amplitude_pp,
        max_tail_angle_deg: geom.max_tail_angle().to_degrees(),
        u_a: gait.u_a,
        beat_hz: report.tail_beat_hz,
        saturated: gait.saturated,
        steady_speed: report.steady_speed,
        strouhal: report.tail_beat_hz * amplitude_pp / report.steady_speed,
    }))
}

/// Steady straight swims over every `(f, d_1)` pair, run in parallel. Points
/// whose lever geometry passes the tail-angle cap are skipped and listed.
pub fn strouhal_sweep(template: &Scenario, frequencies: &[f64], d1s: &[f64]) -> Result<SweepTable> {
    let points: Vec<(f64, f64)> = d1s
        .iter()
        .flat_map(|&d| frequencies.iter().map(move |&f| (f, d)))
        .collect();
    let results: Vec<Point> = points
        .par_iter()
        .map(|&(f, d)| run_point(template, f, d))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Point::Row(row) => rows.push(row),
            Point::Skip(s) => skipped.push(s),
        }
    }
    let best = rows
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, r)| match acc {
            Some((_, v)) if v >= r.steady_speed => acc,
            _ => Some((i, r.steady_speed)),
        })
        .map(|(i, _)| i);
    Ok(SweepTable {
        rows,
        skipped,
        best,
    })
}
