//! Scotch-yoke tail kinematics.
//!
//! The rotary disk (radius `r_d`) drives a slider laterally with
//! `x_p = r_d sin(theta_m)`. A pivot lever fixed at the body axis multiplies
//! the slider motion by `d_tail / d_1` at the tail tip, so every tail quantity
//! is a scaled copy of the slider motion with the mechanical constant
//! `K = r_d d_tail / d_1`.
//!
//! Lateral quantities are positive toward body starboard (+y in the
//! forward-right-down body frame).

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Largest tail angle the lever can reach while the fin keeps attached flow.
pub const MAX_TAIL_ANGLE: f64 = PI / 6.0;
const CAP_SLACK: f64 = 0.05 * PI / 180.0;

/// Reduce an angle to `[0, 2pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid of a tiny negative value rounds up to exactly TAU
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismGeometry {
    /// Disk radius (m).
    pub r_d: f64,
    /// Distance from the fixed pivot axis to the slider axis (m).
    pub d_1: f64,
    /// Tail length from the fixed pivot axis (m).
    pub d_tail: f64,
}

impl Default for MechanismGeometry {
    /// Cruise geometry: 150 mm rigid tail link with `d_1` chosen so the
    /// peak-to-peak tip excursion is 0.1125 m.
    fn default() -> Self {
        Self {
            r_d: 0.02,
            d_1: 0.02 * 0.15 * 2.0 / 0.1125,
            d_tail: 0.15,
        }
    }
}

impl MechanismGeometry {
    pub fn new(r_d: f64, d_1: f64, d_tail: f64) -> Result<Self> {
        let g = Self { r_d, d_1, d_tail };
        g.validate()?;
        Ok(g)
    }

    /// Geometry with `d_1` chosen to give the requested peak-to-peak
    /// tip excursion.
    pub fn with_peak_to_peak(r_d: f64, d_tail: f64, amplitude_pp: f64) -> Result<Self> {
        if !(amplitude_pp > 0.0) {
            return Err(Error::Geometry(format!(
                "peak-to-peak amplitude must be positive, got {amplitude_pp}"
            )));
        }
        Self::new(r_d, 2.0 * r_d * d_tail / amplitude_pp, d_tail)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { r_d, d_1, d_tail } = *self;
        if !(r_d.is_finite() && d_1.is_finite() && d_tail.is_finite()) {
            return Err(Error::Geometry("non-finite dimension".into()));
        }
        if r_d < 0.0 || d_1 <= 0.0 || d_tail <= 0.0 {
            return Err(Error::Geometry(format!(
                "dimensions must be positive (r_d = {r_d}, d_1 = {d_1}, d_tail = {d_tail})"
            )));
        }
        // dimensions quoted to 0.1 mm land a few hundredths of a degree
        // either side of the cap, so accept anything that rounds to it
        if (r_d / d_1).atan() > MAX_TAIL_ANGLE + CAP_SLACK {
            return Err(Error::Geometry(format!(
                "tail angle {:.2} deg exceeds the 30 deg cap (r_d/d_1 = {:.4})",
                (r_d / d_1).atan().to_degrees(),
                r_d / d_1
            )));
        }
        Ok(())
    }

    /// Mechanical constant `K = r_d d_tail / d_1` (m).
    pub fn k_mech(&self) -> f64 {
        self.r_d * self.d_tail / self.d_1
    }

    /// Tip excursion on each side of the centre line, `d_tail r_d / d_1`.
    pub fn tip_amplitude(&self) -> f64 {
        self.d_tail * self.r_d / self.d_1
    }

    /// Full side-to-side tip excursion, the amplitude used for Strouhal.
    pub fn peak_to_peak_amplitude(&self) -> f64 {
        2.0 * self.tip_amplitude()
    }

    /// Max tail angle `arctan(r_d / d_1)` (rad).
    pub fn max_tail_angle(&self) -> f64 {
        (self.r_d / self.d_1).atan()
    }

    /// Tail angle about the fixed pivot at disk angle `theta_m` (rad).
    pub fn tail_angle(&self, theta_m: f64) -> f64 {
        (self.r_d * theta_m.sin() / self.d_1).atan()
    }

    /// Lateral tip displacement at disk angle `theta_m` (m).
    pub fn tail_tip_position(&self, theta_m: f64) -> f64 {
        self.k_mech() * theta_m.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TailKinematicState {
    /// Disk angle in `[0, 2pi)`.
    pub theta_m: f64,
    pub omega_m: f64,
    pub omega_dot_m: f64,
}

impl TailKinematicState {
    pub fn new(theta_m: f64, omega_m: f64, omega_dot_m: f64) -> Self {
        Self {
            theta_m: wrap_angle(theta_m),
            omega_m,
            omega_dot_m,
        }
    }

    pub fn steady(theta_m: f64, omega_m: f64) -> Self {
        Self::new(theta_m, omega_m, 0.0)
    }
}

/// Returns `(A, theta_t)`: tip amplitude `d_tail r_d / d_1` and the max tail
/// angle. Rejects geometry past the 30 degree cap.
pub fn amplitude_params(geom: &MechanismGeometry) -> Result<(f64, f64)> {
    geom.validate()?;
    Ok((geom.tip_amplitude(), geom.max_tail_angle()))
}

/// Lateral slider velocity `v_p = r_d omega_m cos(theta_m)`.
pub fn slider_velocity(geom: &MechanismGeometry, s: &TailKinematicState) -> f64 {
    geom.r_d * s.omega_m * s.theta_m.cos()
}

/// Tail tip velocity `K omega_m cos(theta_m)`.
pub fn tail_tip_velocity(geom: &MechanismGeometry, s: &TailKinematicState) -> f64 {
    geom.k_mech() * s.omega_m * s.theta_m.cos()
}

/// Full tail tip acceleration `K (omega_dot cos(theta) - omega^2 sin(theta))`,
/// the time derivative of [`tail_tip_velocity`] with `theta' = omega`.
///
/// Tip displacement `K sin(theta)`, velocity and acceleration share one
/// lateral axis, positive toward the body's left.
pub fn tail_tip_acceleration(geom: &MechanismGeometry, s: &TailKinematicState) -> f64 {
    let (sin, cos) = s.theta_m.sin_cos();
    geom.k_mech() * (s.omega_dot_m * cos - s.omega_m * s.omega_m * sin)
}

/// Steady-swim form of [`tail_tip_acceleration`] with `omega_dot = 0`.
pub fn tail_tip_acceleration_steady(geom: &MechanismGeometry, theta_m: f64, omega_m: f64) -> f64 {
    tail_tip_acceleration(geom, &TailKinematicState::new(theta_m, omega_m, 0.0))
}

/// Strouhal number `f A / U`.
pub fn strouhal(freq_hz: f64, amplitude: f64, speed: f64) -> Result<f64> {
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(Error::Param(format!(
            "swimming speed must be positive, got {speed}"
        )));
    }
    if freq_hz < 0.0 || amplitude < 0.0 {
        return Err(Error::Param(format!(
            "frequency and amplitude must be non-negative (f = {freq_hz}, A = {amplitude})"
        )));
    }
    Ok(freq_hz * amplitude / speed)
}

/// Traveling-wave body reference `y = (c_1 x + c_2 x^2) sin(k x - omega t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveParams {
    pub c_1: f64,
    pub c_2: f64,
    /// Wavenumber per normalized body length.
    pub k: f64,
    /// rad/s
    pub omega: f64,
}

impl Default for WaveParams {
    fn default() -> Self {
        Self {
            c_1: 0.02,
            c_2: 0.08,
            k: TAU,
            omega: TAU * 4.0,
        }
    }
}

impl WaveParams {
    pub fn envelope(&self, x: f64) -> f64 {
        self.c_1 * x + self.c_2 * x * x
    }

    pub fn wavelength(&self) -> f64 {
        TAU / self.k
    }
}

pub fn wave_reference(w: &WaveParams, x: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(w.envelope(x) * (w.k * x - w.omega * t).sin())
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn geometry() -> impl Strategy<Value = MechanismGeometry> {
        (0.005f64..0.05, 0.05f64..0.4, 1.8f64..10.0).prop_map(|(r_d, d_tail, ratio)| {
            MechanismGeometry {
                r_d,
                d_1: r_d * ratio,
                d_tail,
            }
        })
    }

    proptest! {
        #[test]
        fn velocity_is_periodic(g in geometry(), th in 0.0f64..TAU, w in 0.0f64..70.0) {
            // theta is wrapped on construction, so a shifted angle lands on the same state
            let a = tail_tip_velocity(&g, &TailKinematicState::steady(th, w));
            let b = tail_tip_velocity(&g, &TailKinematicState::steady(th + TAU, w));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn decreasing_d1_increases_amplitude(g in geometry(), shrink in 0.5f64..0.999) {
            let tighter = MechanismGeometry { d_1: (g.d_1 * shrink).max(g.r_d / MAX_TAIL_ANGLE.tan()), ..g };
            prop_assume!(tighter.d_1 < g.d_1);
            let (a0, t0) = amplitude_params(&g).unwrap();
            let (a1, t1) = amplitude_params(&tighter).unwrap();
            prop_assert!(a1 > a0);
            prop_assert!(t1 > t0);
        }

        #[test]
        fn envelope_increasing(c1 in 1e-4f64..0.2, c2 in 1e-4f64..0.2, x in 0.001f64..0.999) {
            let w = WaveParams { c_1: c1, c_2: c2, ..WaveParams::default() };
            prop_assert!(w.envelope(x + 1e-3) > w.envelope(x));
            prop_assert!(w.envelope(x) > 0.0);
        }
    }

    #[test]
    fn stroke_has_zero_mean() {
        let g = MechanismGeometry::default();
        let n = 4096;
        let omega = 25.0;
        let dt = TAU / omega / n as f64;
        // periodic trapezoid over one revolution
        let sum: f64 = (0..n)
            .map(|i| {
                tail_tip_velocity(
                    &g,
                    &TailKinematicState::steady(i as f64 * TAU / n as f64, omega),
                ) * dt
            })
            .sum();
        assert!(sum.abs() < 1e-9, "{sum}");
    }
}
