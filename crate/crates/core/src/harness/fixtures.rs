//! Analytic trajectories written as telemetry, for checking the estimators.
//!
//! Every fixture samples at the control rate, holds the body level with the
//! heading along the path tangent, and spins the disk at a 4 Hz beat.

use nalgebra::{UnitQuaternion, Vector3};
use std::f64::consts::TAU;

use super::telemetry::TelemetryRecord;
use crate::actuation::{ControlInput, CONTROL_PERIOD};
use crate::dynamics::{FishState, StepDerived};
use crate::mechanism::wrap_angle;

const BEAT_OMEGA: f64 = TAU * 4.0;

fn record(t: f64, pos: [f64; 2], vel: [f64; 2]) -> TelemetryRecord {
    let heading = vel[1].atan2(vel[0]);
    let mut s = FishState::at_rest(
        Vector3::new(pos[0], pos[1], 0.5),
        UnitQuaternion::from_euler_angles(0.0, 0.0, heading),
    );
    s.lin_vel = Vector3::new(vel[0].hypot(vel[1]), 0.0, 0.0);
    s.motor.theta_m = wrap_angle(BEAT_OMEGA * t);
    s.motor.omega_m = BEAT_OMEGA;
    TelemetryRecord::new(t, &s, &ControlInput::ZERO, &StepDerived::default())
}

fn sample(duration: f64, f: impl Fn(f64) -> ([f64; 2], [f64; 2])) -> Vec<TelemetryRecord> {
    let n = (duration / CONTROL_PERIOD).round() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 * CONTROL_PERIOD;
            let (p, v) = f(t);
            record(t, p, v)
        })
        .collect()
}

/// Clockwise-from-above (right-turning) circle about the origin.
pub fn circle(radius: f64, speed: f64, duration: f64) -> Vec<TelemetryRecord> {
    let w = speed / radius;
    sample(duration, |t| {
        let a = w * t;
        // starts at (0, -r) heading north, turning toward east
        (
            [radius * a.sin(), -radius * a.cos()],
            [speed * a.cos(), speed * a.sin()],
        )
    })
}

pub fn line(heading: f64, speed: f64, duration: f64) -> Vec<TelemetryRecord> {
    let (s, c) = heading.sin_cos();
    sample(duration, |t| {
        ([speed * t * c, speed * t * s], [speed * c, speed * s])
    })
}

/// `y = amplitude sin(2 pi x / wavelength)` traversed at constant `dx/dt`.
pub fn sinusoid(
    amplitude: f64,
    wavelength: f64,
    speed_x: f64,
    duration: f64,
) -> Vec<TelemetryRecord> {
    let k = TAU / wavelength;
    sample(duration, |t| {
        let x = speed_x * t;
        (
            [x, amplitude * (k * x).sin()],
            [speed_x, amplitude * k * speed_x * (k * x).cos()],
        )
    })
}
