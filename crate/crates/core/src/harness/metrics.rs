//! Trajectory estimators over telemetry.
//!
//! Attitude quantities oscillate once per tail beat, so headings, roll and
//! pitch are read as averages over one disk revolution centred on the sample
//! of interest; the revolution is located from the unwrapped disk angle, not
//! a fixed time, so the average stays exact while the beat rate changes.
//! Path curvature uses planar velocity smoothed over 0.5 s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::telemetry::TelemetryRecord;
use crate::error::{Error, Result};

/// Below this planar speed the path curvature is undefined (m/s).
pub const MIN_TURN_SPEED: f64 = 0.05;
/// Turns shorter than this are folded into their neighbours (deg).
pub const MIN_TURN_DEG: f64 = 20.0;
/// Radii above this are reported as absent (straight path).
const STRAIGHT_RADIUS: f64 = 1e6;
/// Beat windows never reach further than this per revolution when the disk
/// is slow or idle (s).
const MAX_HALF_BEAT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceWindow {
    /// Time at which distance starts counting (s).
    pub start: f64,
    /// Planar path length to cover (m).
    pub length: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// Window for steady speed and beat rate; defaults to the last 5 s.
    pub steady: Option<Window>,
    pub windows: Vec<Window>,
    pub distance: Option<DistanceWindow>,
    /// Run-wide rates and turn metrics ignore samples before this time (s),
    /// so the launch from rest does not dominate them.
    pub settle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub start: f64,
    pub end: f64,
    pub heading_change_deg: f64,
    pub roll_start_deg: f64,
    pub roll_end_deg: f64,
    pub pitch_start_deg: f64,
    pub pitch_end_deg: f64,
    /// Largest body rates inside the window (rad/s).
    pub max_roll_rate: f64,
    pub max_pitch_rate: f64,
    pub max_yaw_rate: f64,
    /// Heading change divided by window length (deg/s).
    pub mean_yaw_rate_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnSegment {
    /// +1 for a right (clockwise from above) turn, -1 for left.
    pub direction: i8,
    pub start: f64,
    pub end: f64,
    pub heading_change_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub start: f64,
    pub end: f64,
    pub travelled: f64,
    pub heading_change_deg: f64,
    /// Signed offset to the right of the start heading line (m).
    pub lateral_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub duration: f64,
    pub steady_speed: f64,
    pub tail_beat_hz: f64,
    pub strouhal: Option<f64>,
    pub max_roll_rate: f64,
    pub max_pitch_rate: f64,
    pub max_yaw_rate: f64,
    pub mean_roll_rate: f64,
    pub mean_pitch_rate: f64,
    pub mean_yaw_rate: f64,
    /// Yaw rate averaged over two tail beats, largest magnitude (deg/s).
    pub max_yaw_rate_2beat_deg: Option<f64>,
    pub min_turn_radius: Option<f64>,
    pub distance: Option<DistanceReport>,
    pub windows: Vec<WindowReport>,
    pub turns: Vec<TurnSegment>,
    pub breached: bool,
    pub floor_contact: bool,
}

impl MetricReport {
    /// Look up a numeric field by JSON pointer, e.g. `/windows/0/heading_change_deg`.
    /// A bare name is treated as a top-level field.
    pub fn observable(&self, name: &str) -> Option<f64> {
        let v = serde_json::to_value(self).ok()?;
        let ptr = if name.starts_with('/') {
            name.to_owned()
        } else {
            format!("/{}", name.replace('.', "/"))
        };
        v.pointer(&ptr)?.as_f64()
    }
}

struct Prefix(Vec<f64>);

impl Prefix {
    fn new(xs: impl Iterator<Item = f64>) -> Self {
        let mut acc = vec![0.0];
        let mut s = 0.0;
        for x in xs {
            s += x;
            acc.push(s);
        }
        Prefix(acc)
    }

    /// Mean over the inclusive index range.
    fn mean(&self, a: usize, b: usize) -> f64 {
        (self.0[b + 1] - self.0[a]) / (b + 1 - a) as f64
    }
}

fn unwrap_series(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut prev = 0.0;
    for x in xs {
        match out.last() {
            None => out.push(x),
            Some(&last) => {
                let d = (x - prev + PI).rem_euclid(2.0 * PI) - PI;
                out.push(last + d);
            }
        }
        prev = x;
    }
    out
}

/// Per-sample time windows aligned to whole disk revolutions.
pub struct BeatClock {
    t: Vec<f64>,
    phase: Vec<f64>,
}

impl BeatClock {
    pub fn new(records: &[TelemetryRecord]) -> Self {
        let mut phase = unwrap_series(records.iter().map(|r| r.theta_m));
        // a brief reverse creep must not break the ordering
        for i in 1..phase.len() {
            phase[i] = phase[i].max(phase[i - 1]);
        }
        Self {
            t: records.iter().map(|r| r.t).collect(),
            phase,
        }
    }

    /// Inclusive index range spanning `revs` revolutions centred on sample `i`,
    /// and whether it was cut short by the ends of the record.
    pub fn span(&self, i: usize, revs: f64) -> (usize, usize, bool) {
        let n = self.t.len();
        let lo_phase = self.phase[i] - revs * PI;
        let hi_phase = self.phase[i] + revs * PI;
        let reach = revs * MAX_HALF_BEAT;
        let mut a = self.phase.partition_point(|&p| p < lo_phase);
        let a_time = self.t.partition_point(|&t| t < self.t[i] - reach);
        let mut b = self
            .phase
            .partition_point(|&p| p <= hi_phase)
            .saturating_sub(1);
        let b_time = self
            .t
            .partition_point(|&t| t <= self.t[i] + reach)
            .saturating_sub(1);
        let truncated =
            (a == 0 && self.phase[0] > lo_phase) || (b == n - 1 && self.phase[n - 1] < hi_phase);
        a = a.max(a_time).min(i);
        b = b.min(b_time).max(i);
        (a, b, truncated)
    }

    /// Times `revs / 2` revolutions either side of sample `i`, interpolated
    /// between samples and capped at `revs * MAX_HALF_BEAT` each way and at
    /// the record ends.
    pub fn time_span(&self, i: usize, revs: f64) -> (f64, f64) {
        let n = self.t.len();
        let reach = revs * MAX_HALF_BEAT;
        let at = |target: f64| -> Option<f64> {
            let k = self.phase.partition_point(|&p| p < target);
            if k == 0 || k == n {
                return None;
            }
            let (p0, p1) = (self.phase[k - 1], self.phase[k]);
            let f = if p1 > p0 {
                (target - p0) / (p1 - p0)
            } else {
                0.0
            };
            Some(self.t[k - 1] + f * (self.t[k] - self.t[k - 1]))
        };
        let ti = self.t[i];
        let lo = at(self.phase[i] - revs * PI).map_or(ti - reach, |t| t.max(ti - reach));
        let hi = at(self.phase[i] + revs * PI).map_or(ti + reach, |t| t.min(ti + reach));
        (lo.max(self.t[0]), hi.min(self.t[n - 1]))
    }

    pub fn index_at(&self, t: f64) -> usize {
        self.t.partition_point(|&x| x < t).min(self.t.len() - 1)
    }

    /// Revolutions per second between two samples.
    pub fn rate(&self, a: usize, b: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.phase[b] - self.phase[a]) / (2.0 * PI * (self.t[b] - self.t[a]))
    }
}

/// Beat-averaged attitude series.
struct Attitude {
    clock: BeatClock,
    heading: Prefix,
    roll: Prefix,
    pitch: Prefix,
}

impl Attitude {
    fn new(records: &[TelemetryRecord]) -> Self {
        Self {
            clock: BeatClock::new(records),
            heading: Prefix::new(unwrap_series(records.iter().map(|r| r.yaw)).into_iter()),
            roll: Prefix::new(records.iter().map(|r| r.roll)),
            pitch: Prefix::new(records.iter().map(|r| r.pitch)),
        }
    }

    fn avg(&self, series: &Prefix, i: usize) -> f64 {
        let (a, b, _) = self.clock.span(i, 1.0);
        series.mean(a, b)
    }
}

/// Planar velocity from central differences of position, averaged over one
/// disk revolution centred on each sample so the tail-beat sway cancels.
/// Without a beat the window is `2 * MAX_HALF_BEAT` wide. On a circle at yaw
/// rate `w` with half-window `h` the averaging shortens the velocity by
/// `sinc(w h)`, so radii read low by about `(w h)^2 / 6`.
fn smoothed_planar_velocity(records: &[TelemetryRecord], clock: &BeatClock) -> Vec<[f64; 2]> {
    let n = records.len();
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let raw: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let a = i.saturating_sub(1);
            let b = (i + 1).min(n - 1);
            let dt = t[b] - t[a];
            if dt <= 0.0 {
                return [0.0, 0.0];
            }
            [
                (records[b].x - records[a].x) / dt,
                (records[b].y - records[a].y) / dt,
            ]
        })
        .collect();
    // trapezoid integral of the piecewise-linear velocity, so window ends can
    // fall between samples
    let mut integral = vec![[0.0; 2]; n];
    for k in 1..n {
        let h = 0.5 * (t[k] - t[k - 1]);
        integral[k] = [
            integral[k - 1][0] + h * (raw[k - 1][0] + raw[k][0]),
            integral[k - 1][1] + h * (raw[k - 1][1] + raw[k][1]),
        ];
    }
    let integral_at = |x: f64| -> [f64; 2] {
        let k = t.partition_point(|&s| s <= x).clamp(1, n - 1);
        let f = (x - t[k - 1]).clamp(0.0, t[k] - t[k - 1]);
        let dt = t[k] - t[k - 1];
        let w = if dt > 0.0 { f / dt } else { 0.0 };
        let v = [
            raw[k - 1][0] + w * (raw[k][0] - raw[k - 1][0]),
            raw[k - 1][1] + w * (raw[k][1] - raw[k - 1][1]),
        ];
        [
            integral[k - 1][0] + 0.5 * f * (raw[k - 1][0] + v[0]),
            integral[k - 1][1] + 0.5 * f * (raw[k - 1][1] + v[1]),
        ]
    };
    (0..n)
        .map(|i| {
            let (lo, hi) = clock.time_span(i, 1.0);
            if hi <= lo {
                return raw[i];
            }
            let (a, b) = (integral_at(lo), integral_at(hi));
            [(b[0] - a[0]) / (hi - lo), (b[1] - a[1]) / (hi - lo)]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnMetrics {
    /// `None` for a straight path.
    pub min_radius: Option<f64>,
    /// Signed curvature per sample (1/m, positive turning right); zero where
    /// the speed is below [`MIN_TURN_SPEED`].
    pub curvature: Vec<f64>,
    /// Two-beat averaged yaw rate per sample (deg/s); `None` near the ends.
    pub yaw_rate_2beat_deg: Vec<Option<f64>>,
    pub max_yaw_rate_2beat_deg: Option<f64>,
    pub turns: Vec<TurnSegment>,
}

/// Curvature, minimum turn radius, two-beat yaw rate and turn segments.
/// Needs at least 2 s of telemetry with some motion above 0.05 m/s.
pub fn turn_metrics(records: &[TelemetryRecord]) -> Result<TurnMetrics> {
    let n = records.len();
    if n < 3 || records[n - 1].t - records[0].t < 2.0 {
        return Err(Error::Telemetry(
            "turn metrics need at least 2 s of telemetry".into(),
        ));
    }
    let clock = BeatClock::new(records);
    let vel = smoothed_planar_velocity(records, &clock);
    if vel.iter().all(|v| v[0].hypot(v[1]) < MIN_TURN_SPEED) {
        return Err(Error::Telemetry(format!(
            "planar speed stays below {MIN_TURN_SPEED} m/s; turn radius undefined"
        )));
    }
    let mut curvature = vec![0.0; n];
    let mut kappa_max: f64 = 0.0;
    for i in 1..n - 1 {
        let dt = records[i + 1].t - records[i - 1].t;
        let v = vel[i];
        let speed = v[0].hypot(v[1]);
        if speed < MIN_TURN_SPEED || dt <= 0.0 {
            continue;
        }
        let ax = (vel[i + 1][0] - vel[i - 1][0]) / dt;
        let ay = (vel[i + 1][1] - vel[i - 1][1]) / dt;
        let k = (v[0] * ay - v[1] * ax) / speed.powi(3);
        curvature[i] = k;
        // the smoothing window is one-sided near the ends
        let (a, b, cut) = clock.span(i, 2.0);
        if !cut && a > 0 && b < n - 1 {
            kappa_max = kappa_max.max(k.abs());
        }
    }
    let min_radius = if kappa_max > 1.0 / STRAIGHT_RADIUS {
        Some(1.0 / kappa_max)
    } else {
        None
    };

    let heading = unwrap_series(records.iter().map(|r| r.yaw));
    let mut max_rate: Option<f64> = None;
    let yaw_rate_2beat_deg: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let (a, b, cut) = clock.span(i, 2.0);
            if cut || b <= a {
                return None;
            }
            let rate = ((heading[b] - heading[a]) / (records[b].t - records[a].t)).to_degrees();
            if max_rate.is_none_or(|m| rate.abs() > m.abs()) {
                max_rate = Some(rate);
            }
            Some(rate)
        })
        .collect();

    let turns = turn_segments(records, &vel, &curvature);
    Ok(TurnMetrics {
        min_radius,
        curvature,
        yaw_rate_2beat_deg,
        max_yaw_rate_2beat_deg: max_rate.map(f64::abs),
        turns,
    })
}

/// Runs of constant curvature sign. The run with the smallest turn is
/// folded into its neighbours until every run turns at least
/// [`MIN_TURN_DEG`]; each run reports the net change of the path heading
/// across it.
fn turn_segments(
    records: &[TelemetryRecord],
    vel: &[[f64; 2]],
    curvature: &[f64],
) -> Vec<TurnSegment> {
    let path_heading = unwrap_series(vel.iter().map(|v| v[1].atan2(v[0])));
    // (direction, first index, last index)
    let mut runs: Vec<(i8, usize, usize)> = Vec::new();
    for (i, &k) in curvature.iter().enumerate() {
        if k == 0.0 {
            continue;
        }
        let dir = if k > 0.0 { 1 } else { -1 };
        match runs.last_mut() {
            Some(r) if r.0 == dir => r.2 = i,
            Some(r) => {
                let start = r.2;
                runs.push((dir, start, i));
            }
            None => runs.push((dir, i.saturating_sub(1), i)),
        }
    }
    let turn = |r: &(i8, usize, usize)| (path_heading[r.2] - path_heading[r.1]).to_degrees();
    while runs.len() > 1 {
        let Some(i) = (0..runs.len())
            .filter(|&i| turn(&runs[i]).abs() < MIN_TURN_DEG)
            .min_by(|&a, &b| turn(&runs[a]).abs().total_cmp(&turn(&runs[b]).abs()))
        else {
            break;
        };
        // neighbours of a run share a direction, so the three become one
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(runs.len() - 1);
        let dir = if i > 0 { runs[i - 1].0 } else { runs[i + 1].0 };
        let merged = (dir, runs[lo].1, runs[hi].2);
        runs.splice(lo..=hi, [merged]);
    }
    runs.iter()
        .map(|r| TurnSegment {
            direction: r.0,
            start: records[r.1].t,
            end: records[r.2].t,
            heading_change_deg: turn(r),
        })
        .collect()
}

/// Path-length window: heading change and lateral offset of the end point
/// from the line along the starting heading.
fn distance_report(
    records: &[TelemetryRecord],
    att: &Attitude,
    w: &DistanceWindow,
) -> DistanceReport {
    let s = att.clock.index_at(w.start);
    let mut travelled = 0.0;
    let mut e = s;
    while e + 1 < records.len() && travelled < w.length {
        let (a, b) = (&records[e], &records[e + 1]);
        travelled += (b.x - a.x).hypot(b.y - a.y);
        e += 1;
    }
    let psi0 = att.avg(&att.heading, s);
    let dx = records[e].x - records[s].x;
    let dy = records[e].y - records[s].y;
    DistanceReport {
        start: records[s].t,
        end: records[e].t,
        travelled,
        heading_change_deg: (att.avg(&att.heading, e) - psi0).to_degrees(),
        lateral_drift: -psi0.sin() * dx + psi0.cos() * dy,
    }
}

fn window_report(records: &[TelemetryRecord], att: &Attitude, w: &Window) -> WindowReport {
    let a = att.clock.index_at(w.start);
    let b = att.clock.index_at(w.end).max(a);
    let max_abs = |f: fn(&TelemetryRecord) -> f64| {
        records[a..=b]
            .iter()
            .map(f)
            .fold(0.0f64, |m, x| m.max(x.abs()))
    };
    let heading_change = att.avg(&att.heading, b) - att.avg(&att.heading, a);
    let span = records[b].t - records[a].t;
    WindowReport {
        start: records[a].t,
        end: records[b].t,
        heading_change_deg: heading_change.to_degrees(),
        roll_start_deg: att.avg(&att.roll, a).to_degrees(),
        roll_end_deg: att.avg(&att.roll, b).to_degrees(),
        pitch_start_deg: att.avg(&att.pitch, a).to_degrees(),
        pitch_end_deg: att.avg(&att.pitch, b).to_degrees(),
        max_roll_rate: max_abs(|r| r.p),
        max_pitch_rate: max_abs(|r| r.q),
        max_yaw_rate: max_abs(|r| r.r),
        mean_yaw_rate_deg: if span > 0.0 {
            heading_change.to_degrees() / span
        } else {
            0.0
        },
    }
}

/// All metrics for one run. `amplitude_pp` is the tail's peak-to-peak
/// excursion, used for the Strouhal number.
pub fn compute_metrics(
    records: &[TelemetryRecord],
    cfg: &MetricConfig,
    amplitude_pp: Option<f64>,
) -> Result<MetricReport> {
    let n = records.len();
    if n == 0 {
        return Err(Error::Telemetry("no telemetry records".into()));
    }
    let att = Attitude::new(records);
    let duration = records[n - 1].t - records[0].t;

    let steady = cfg.steady.unwrap_or(Window {
        start: records[n - 1].t - 5.0,
        end: records[n - 1].t,
    });
    let a = att.clock.index_at(steady.start);
    let b = att.clock.index_at(steady.end).max(a);
    let vel = smoothed_planar_velocity(records, &att.clock);
    let steady_speed =
        vel[a..=b].iter().map(|v| v[0].hypot(v[1])).sum::<f64>() / (b + 1 - a) as f64;
    let tail_beat_hz = att.clock.rate(a, b);
    let strouhal = amplitude_pp
        .filter(|_| steady_speed > MIN_TURN_SPEED)
        .map(|amp| tail_beat_hz * amp / steady_speed);

    let settled = &records[records
        .partition_point(|r| r.t < records[0].t + cfg.settle)
        .min(n - 1)..];
    let mean_abs = |f: fn(&TelemetryRecord) -> f64| {
        settled.iter().map(|r| f(r).abs()).sum::<f64>() / settled.len() as f64
    };
    let max_abs =
        |f: fn(&TelemetryRecord) -> f64| settled.iter().fold(0.0f64, |m, r| m.max(f(r).abs()));

    let turns = turn_metrics(settled).ok();
    Ok(MetricReport {
        duration,
        steady_speed,
        tail_beat_hz,
        strouhal,
        max_roll_rate: max_abs(|r| r.p),
        max_pitch_rate: max_abs(|r| r.q),
        max_yaw_rate: max_abs(|r| r.r),
        mean_roll_rate: mean_abs(|r| r.p),
        mean_pitch_rate: mean_abs(|r| r.q),
        mean_yaw_rate: mean_abs(|r| r.r),
        max_yaw_rate_2beat_deg: turns.as_ref().and_then(|t| t.max_yaw_rate_2beat_deg),
        min_turn_radius: turns.as_ref().and_then(|t| t.min_radius),
        distance: cfg
            .distance
            .as_ref()
            .map(|w| distance_report(records, &att, w)),
        windows: cfg
            .windows
            .iter()
            .map(|w| window_report(records, &att, w))
            .collect(),
        turns: turns.map(|t| t.turns).unwrap_or_default(),
        breached: records.iter().any(|r| r.breach),
        floor_contact: records.iter().any(|r| r.floor_contact),
    })
}
