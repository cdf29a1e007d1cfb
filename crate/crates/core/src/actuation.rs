//! Caudal motor, encoder, cyclic-differential voltage modulation and the
//! 400 Hz control tick.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{check_range, Error, Result};
use crate::hydro::{fin_mix, FinAngles};
use crate::mechanism::wrap_angle;

/// Control loop rate (Hz).
pub const CONTROL_RATE_HZ: f64 = 400.0;
/// Control period (s).
pub const CONTROL_PERIOD: f64 = 1.0 / CONTROL_RATE_HZ;
/// Incremental encoder resolution.
pub const ENCODER_COUNTS: u32 = 500;

/// Normalized command vector `[u_a, u_s, u_r, u_p]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    /// Average motor voltage, `[0, 1]`.
    pub u_a: f64,
    /// Square-wave differential amplitude, `[-1, 1]`, `|u_s| <= u_a`.
    pub u_s: f64,
    /// Roll, `[-1, 1]`.
    pub u_r: f64,
    /// Pitch, `[-1, 1]`. Positive dives.
    pub u_p: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        u_a: 0.0,
        u_s: 0.0,
        u_r: 0.0,
        u_p: 0.0,
    };

    pub fn new(u_a: f64, u_s: f64, u_r: f64, u_p: f64) -> Result<Self> {
        let c = Self { u_a, u_s, u_r, u_p };
        c.validate()?;
        Ok(c)
    }

    pub fn cruise(u_a: f64) -> Result<Self> {
        Self::new(u_a, 0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("u_a", self.u_a, 0.0, 1.0)?;
        check_range("u_s", self.u_s, -1.0, 1.0)?;
        check_range("u_r", self.u_r, -1.0, 1.0)?;
        check_range("u_p", self.u_p, -1.0, 1.0)?;
        if self.u_s.abs() > self.u_a {
            return Err(Error::DifferentialExceedsAverage {
                u_a: self.u_a,
                u_s: self.u_s,
            });
        }
        Ok(())
    }

    /// Command reflected about the vertical plane.
    pub fn mirrored(&self) -> Self {
        Self {
            u_s: -self.u_s,
            u_r: -self.u_r,
            ..*self
        }
    }
}

/// DC motor constants reflected to the disk through the 12:1 gearbox.
///
/// Defaults: `k_e = 24 V / 68.07 rad/s` so the unloaded disk tops out at
/// 650 RPM (7800 RPM motor / 12). `k_t = k_e` in SI units. The winding plus
/// driver resistance is set so `u_a = 0.62` holds a 4 Hz beat against the
/// default tail load, and `J` lumps rotor, gearbox, disk and lever inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorParams {
    /// Supply voltage (V).
    pub v_t: f64,
    /// Back-EMF constant at the disk (V s/rad).
    pub k_e: f64,
    /// Torque constant at the disk (N m/A).
    pub k_t: f64,
    /// Resistance (ohm).
    pub r: f64,
    /// Reflected inertia at the disk (kg m^2).
    pub j: f64,
    /// Modulation phase offset (rad).
    pub phi: f64,
    /// Delay-compensation angle (rad).
    pub gamma_0: f64,
}

pub const UNLOADED_TOP_SPEED: f64 = 650.0 * TAU / 60.0;

impl Default for MotorParams {
    fn default() -> Self {
        let k_e = 24.0 / UNLOADED_TOP_SPEED;
        Self {
            v_t: 24.0,
            k_e,
            k_t: k_e,
            r: DEFAULT_RESISTANCE,
            j: 0.005,
            phi: 0.0,
            gamma_0: 0.0,
        }
    }
}

/// Resistance solved so the default geometry and tail load beat at 4 Hz with
/// `u_a = 0.62`; see `default_resistance_holds_4hz_cruise`.
const DEFAULT_RESISTANCE: f64 = 1.206_066;

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_t", self.v_t),
            ("k_e", self.k_e),
            ("k_t", self.k_t),
            ("r", self.r),
            ("j", self.j),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Param(format!(
                    "motor.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.phi.is_finite() && self.gamma_0.is_finite()) {
            return Err(Error::Param("motor phase offsets must be finite".into()));
        }
        Ok(())
    }

    /// Electrical damping `k_t k_e / R` (N m s).
    pub fn electrical_damping(&self) -> f64 {
        self.k_t * self.k_e / self.r
    }
}

/// Pectoral fin servo mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    /// Command-to-angle mapping coefficient (rad).
    pub k_map: f64,
    /// Servo slew limit (rad/s).
    pub servo_rate: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            k_map: 0.6,
            servo_rate: 6.0,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_map >= 0.0 && self.k_map.is_finite()) {
            return Err(Error::Param(format!(
                "control.k_map must be >= 0, got {}",
                self.k_map
            )));
        }
        if !(self.servo_rate > 0.0) {
            return Err(Error::Param(format!(
                "control.servo_rate must be positive, got {}",
                self.servo_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorState {
    /// Disk angle in `[0, 2pi)`.
    pub theta_m: f64,
    /// Disk speed (rad/s).
    pub omega_m: f64,
    /// Voltage held since the last control tick (V).
    pub applied_voltage: f64,
}

impl MotorState {
    pub fn at_rest(theta_m: f64) -> Self {
        Self {
            theta_m: wrap_angle(theta_m),
            omega_m: 0.0,
            applied_voltage: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderReading {
    pub counts: u32,
}

impl EncoderReading {
    /// Angle at the lower edge of the count bin.
    pub fn angle(&self) -> f64 {
        self.counts as f64 * TAU / ENCODER_COUNTS as f64
    }
}

pub fn encoder_read(theta_m: f64) -> EncoderReading {
    let turns = wrap_angle(theta_m) / TAU;
    let counts = (turns * ENCODER_COUNTS as f64).floor() as u32 % ENCODER_COUNTS;
    EncoderReading { counts }
}

/// Sign of `sin(psi)` with the half-open split `[0, pi)` positive and
/// `[pi, 2pi)` negative, so both halves cover the same number of encoder
/// counts. Evaluating `sin` directly would put the `pi` boundary on the
/// positive side by rounding.
fn half_cycle_sign(psi: f64) -> f64 {
    if wrap_angle(psi) < PI {
        1.0
    } else {
        -1.0
    }
}

/// Cyclic-differential voltage from a reconstructed disk angle:
/// `(u_a + u_s sign(sin(theta + phi + gamma_0))) V_t`, limited to the supply.
pub fn modulate_voltage_at(c: &ControlInput, theta_hat: f64, m: &MotorParams) -> f64 {
    let s = half_cycle_sign(theta_hat + m.phi + m.gamma_0);
    ((c.u_a + c.u_s * s) * m.v_t).clamp(0.0, m.v_t)
}

pub fn modulate_voltage(c: &ControlInput, enc: EncoderReading, m: &MotorParams) -> f64 {
    modulate_voltage_at(c, enc.angle(), m)
}

/// Disk acceleration `(k_t/R (u - k_e w) - load) / J`.
pub fn motor_acceleration(omega: f64, u_t: f64, load_torque: f64, m: &MotorParams) -> f64 {
    ((m.k_t / m.r) * (u_t - m.k_e * omega) - load_torque) / m.j
}

/// One semi-implicit Euler step: speed from the current torque balance, then
/// angle from the new speed.
pub fn motor_step(
    s: &MotorState,
    u_t: f64,
    load_torque: f64,
    dt: f64,
    m: &MotorParams,
) -> Result<MotorState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::TimeStep(dt));
    }
    let omega = s.omega_m + dt * motor_acceleration(s.omega_m, u_t, load_torque, m);
    Ok(MotorState {
        theta_m: wrap_angle(s.theta_m + omega * dt),
        omega_m: omega,
        applied_voltage: u_t,
    })
}

/// One control tick: read the encoder, modulate the caudal voltage, and mix
/// the pectoral fin targets.
pub fn control_tick(
    c: &ControlInput,
    s: &MotorState,
    m: &MotorParams,
    k_map: f64,
    stall_angle: f64,
) -> Result<(f64, FinAngles)> {
    let enc = encoder_read(s.theta_m);
    let u_t = modulate_voltage(c, enc, m);
    let fins = fin_mix(c.u_r, c.u_p, k_map, stall_angle)?;
    Ok((u_t, fins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn ingestion_rejects_bad_commands() {
        assert!(ControlInput::new(0.5, 0.6, 0.0, 0.0).is_err());
        assert!(ControlInput::new(1.2, 0.0, 0.0, 0.0).is_err());
        assert!(ControlInput::new(0.5, 0.0, -1.5, 0.0).is_err());
        assert!(ControlInput::new(0.5, 0.0, 0.0, f64::NAN).is_err());
        assert!(ControlInput::new(0.5, -0.5, 1.0, -1.0).is_ok());
    }

    #[test]
    fn encoder_examples() {
        assert_eq!(encoder_read(0.0).counts, 0);
        assert_eq!(encoder_read(TAU).counts, 0);
        assert_eq!(encoder_read(PI / 2.0).counts, 125);
        assert_eq!(encoder_read(-1e-9).counts, 499);
    }

    #[test]
    fn encoder_round_trip_error_bounded() {
        for i in 0..10_000 {
            let th = i as f64 * 0.000_628_1;
            let err = wrap_angle(th) - encoder_read(th).angle();
            assert!(
                (0.0..TAU / 500.0 + 1e-12).contains(&err),
                "theta {th} err {err}"
            );
        }
    }

    #[test]
    fn constant_voltage_without_differential() {
        let m = MotorParams::default();
        let c = ControlInput::cruise(0.5).unwrap();
        for k in 0..500 {
            let u = modulate_voltage(&c, EncoderReading { counts: k }, &m);
            assert_eq!(u, 12.0);
        }
    }

    #[test]
    fn differential_half_cycle_voltages() {
        let m = MotorParams::default();
        let c = ControlInput::new(0.5, 0.2, 0.0, 0.0).unwrap();
        assert_relative_eq!(modulate_voltage_at(&c, PI / 2.0, &m), 16.8, epsilon = 1e-12);
        assert_relative_eq!(modulate_voltage_at(&c, 1.5 * PI, &m), 7.2, epsilon = 1e-12);
        let full = ControlInput::new(0.5, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(modulate_voltage_at(&full, 1.5 * PI, &m), 0.0);
    }

    #[test]
    fn switches_twice_per_revolution() {
        let m = MotorParams {
            gamma_0: 0.3,
            ..MotorParams::default()
        };
        let c = ControlInput::new(0.5, 0.2, 0.0, 0.0).unwrap();
        let volts: Vec<f64> = (0..500)
            .map(|k| modulate_voltage(&c, EncoderReading { counts: k }, &m))
            .collect();
        let switches = (0..500)
            .filter(|&k| volts[k] != volts[(k + 1) % 500])
            .count();
        assert_eq!(switches, 2);
    }

    #[test]
    fn motor_steady_when_emf_balances() {
        let m = MotorParams::default();
        let s = MotorState {
            theta_m: 1.0,
            omega_m: 20.0,
            applied_voltage: 0.0,
        };
        let next = motor_step(&s, m.k_e * 20.0, 0.0, 1e-3, &m).unwrap();
        assert_eq!(next.omega_m, 20.0);
    }

    #[test]
    fn motor_step_explicit_update() {
        let m = MotorParams {
            j: 1e-3,
            k_t: 0.05,
            r: 1.0,
            k_e: 0.9,
            ..MotorParams::default()
        };
        let s = MotorState {
            theta_m: 0.0,
            omega_m: 10.0,
            applied_voltage: 0.0,
        };
        let next = motor_step(&s, 12.0, 0.0, 1e-3, &m).unwrap();
        assert_relative_eq!(next.omega_m, 10.15, epsilon = 1e-12);
        assert_relative_eq!(next.theta_m, 10.15e-3, epsilon = 1e-15);
    }

    #[test]
    fn motor_spins_up_monotonically() {
        let m = MotorParams::default();
        let mut s = MotorState::at_rest(0.0);
        let mut prev = 0.0;
        for _ in 0..20_000 {
            s = motor_step(&s, 12.0, 0.0, 1e-3, &m).unwrap();
            assert!(s.omega_m >= prev);
            prev = s.omega_m;
        }
        assert_relative_eq!(s.omega_m, 12.0 / m.k_e, max_relative = 1e-6);
    }

    #[test]
    fn motor_step_rejects_bad_dt() {
        let m = MotorParams::default();
        let s = MotorState::default();
        assert!(motor_step(&s, 1.0, 0.0, 0.0, &m).is_err());
        assert!(motor_step(&s, 1.0, 0.0, -1e-3, &m).is_err());
        assert!(motor_step(&s, 1.0, 0.0, f64::NAN, &m).is_err());
    }

    #[test]
    fn motor_step_is_deterministic() {
        let m = MotorParams::default();
        let s = MotorState {
            theta_m: 2.1,
            omega_m: 24.7,
            applied_voltage: 3.0,
        };
        let a = motor_step(&s, 14.2, 1.3, 8.3e-4, &m).unwrap();
        let b = motor_step(&s, 14.2, 1.3, 8.3e-4, &m).unwrap();
        assert_eq!(a.omega_m.to_bits(), b.omega_m.to_bits());
        assert_eq!(a.theta_m.to_bits(), b.theta_m.to_bits());
    }

    #[test]
    fn unloaded_top_speed_is_650_rpm() {
        let m = MotorParams::default();
        assert_relative_eq!(m.v_t / m.k_e * 60.0 / TAU, 650.0, epsilon = 1e-9);
    }

    #[test]
    fn control_tick_examples() {
        let m = MotorParams::default();
        let s = MotorState::at_rest(0.4);
        let stall = 35f64.to_radians();
        let (u, fins) = control_tick(&ControlInput::ZERO, &s, &m, 0.6, stall).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(fins, FinAngles::default());
        let cruise = ControlInput::cruise(0.5).unwrap();
        let (u, fins) = control_tick(&cruise, &s, &m, 0.6, stall).unwrap();
        assert_eq!(u, 12.0);
        assert_eq!(fins, FinAngles::default());
        let turn = ControlInput::new(0.5, 0.2, 0.0, 0.0).unwrap();
        let hi = control_tick(&turn, &MotorState::at_rest(PI / 2.0), &m, 0.6, stall).unwrap();
        let lo = control_tick(&turn, &MotorState::at_rest(1.5 * PI), &m, 0.6, stall).unwrap();
        assert_relative_eq!(hi.0, 16.8, epsilon = 1e-12);
        assert_relative_eq!(lo.0, 7.2, epsilon = 1e-12);
    }

    #[test]
    fn duty_symmetry_at_constant_speed() {
        // constant disk speed, voltage sampled at the 400 Hz tick and held
        let m = MotorParams::default();
        let c = ControlInput::new(0.5, 0.2, 0.0, 0.0).unwrap();
        let omega = 25.13;
        let period = TAU / omega;
        let substeps = 100;
        let dt = CONTROL_PERIOD / substeps as f64;
        let n = (period / dt).round() as usize;
        let mut held = 0.0;
        let mut sum = 0.0;
        for i in 0..n {
            if i % substeps == 0 {
                held = modulate_voltage(&c, encoder_read(omega * i as f64 * dt), &m);
            }
            sum += held * dt;
        }
        let mean = sum / (n as f64 * dt);
        assert!((mean - 12.0).abs() / 12.0 < 0.01, "mean voltage {mean}");
    }
}

#[cfg(test)]
mod resistance_tests {
    use super::*;
    use crate::hydro::{periodic_stroke, HydroParams, CRUISE_FREQ_HZ};
    use crate::mechanism::MechanismGeometry;

    #[test]
    fn default_resistance_holds_4hz_cruise() {
        let cycle = periodic_stroke(
            &ControlInput::cruise(0.62).unwrap(),
            &MotorParams::default(),
            &MechanismGeometry::default(),
            &HydroParams::default(),
        )
        .unwrap();
        assert!((cycle.frequency() - CRUISE_FREQ_HZ).abs() < 0.01 * CRUISE_FREQ_HZ);
    }
}
