//! Hydrodynamic loads: pectoral lift and mixing, caudal added-mass reaction,
//! the per-beat yaw impulse of the cyclic differential, drag, buoyancy and
//! the passive righting moment.
//!
//! Body axes are forward-right-down. Pectoral lift is positive along body +z
//! (down) for a positive angle of attack; the left fin sits at `y = -d_roll`,
//! both fins sit `d_pitch` ahead of the centre of mass, and the caudal
//! reaction acts `d_yaw` behind it.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::actuation::{
    modulate_voltage, ControlInput, EncoderReading, MotorParams, ENCODER_COUNTS,
};
use crate::dynamics::{FishState, RigidBodyParams, GRAVITY};
use crate::error::{check_range, Error, Result};
use crate::mechanism::MechanismGeometry;

/// Quadratic drag and rotational damping, body axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DragCoeffs {
    /// N s^2/m^2
    pub axial: f64,
    pub lateral: f64,
    pub vertical: f64,
    /// Quadratic rotational drag `[roll, pitch, yaw]` (N m s^2).
    pub rotational: [f64; 3],
    /// Linear rotational damping `[roll, pitch, yaw]` (N m s).
    pub rotational_linear: [f64; 3],
    /// Slender-body cross-flow force per unit forward speed and cross
    /// velocity (N s^2/m^2): side force from sideslip and hull lift from
    /// angle of attack.
    pub cross_flow: f64,
    /// Distance of the cross-flow centre of pressure behind the centre of
    /// mass (m); makes the hull weathervane into the flow.
    pub cross_flow_arm: f64,
}

impl Default for DragCoeffs {
    fn default() -> Self {
        Self {
            axial: 2.6,
            lateral: 40.0,
            vertical: 40.0,
            rotational: [0.05, 0.5, 0.1],
            rotational_linear: [0.9, 0.9, 0.6],
            cross_flow: 20.0,
            cross_flow_arm: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroParams {
    /// Water density (kg/m^3).
    pub rho_w: f64,
    /// Area of one pectoral fin (m^2).
    pub fin_area: f64,
    /// Flat-plate lift slope (per rad).
    pub lift_slope: f64,
    /// rad
    pub stall_angle: f64,
    /// Caudal added mass `m_w` (kg).
    pub added_mass: f64,
    pub d_yaw: f64,
    pub d_roll: f64,
    pub d_pitch: f64,
    pub drag: DragCoeffs,
    /// Net upward force when fully submerged (N).
    pub buoy_net: f64,
    /// Height of the centre of buoyancy above the centre of mass (m).
    pub h_meta: f64,
    /// Depth of the thrust line below the centre of mass (m).
    pub thrust_offset: f64,
    /// Reaction-thrust gain `c_thrust`.
    pub thrust_gain: f64,
    /// Extra thrust fraction from fin bending at full deflection.
    pub deflection_gain: f64,
    /// Tail acceleration at which the flexible fin reaches its deflection cap (m/s^2).
    pub deflection_accel: f64,
    /// Axial loss from the tail sweeping sideways, per `v_tail^2` (N s^2/m^2).
    pub sweep_drag: f64,
    /// Lateral drag on the sweeping fin, per `v_tail^2` (N s^2/m^2); loads the motor.
    pub tail_lateral_drag: f64,
    /// Static roll moment from ballast asymmetry (N m).
    pub roll_trim: f64,
}

/// Tail-beat frequency and peak-to-peak amplitude at the cruise optimum.
pub const CRUISE_FREQ_HZ: f64 = 4.0;
pub const CRUISE_AMPLITUDE_PP: f64 = 0.1125;

impl Default for HydroParams {
    fn default() -> Self {
        let mut p = Self {
            rho_w: 1000.0,
            fin_area: 0.003,
            lift_slope: TAU,
            stall_angle: 35f64.to_radians(),
            added_mass: 0.5,
            d_yaw: 0.3,
            d_roll: 0.15,
            d_pitch: 0.015,
            drag: DragCoeffs::default(),
            buoy_net: 0.2,
            h_meta: 0.03,
            thrust_offset: 0.0,
            thrust_gain: 1.0,
            deflection_gain: 0.1,
            deflection_accel: 60.0,
            sweep_drag: 0.0,
            tail_lateral_drag: 40.0,
            roll_trim: 0.0,
        };
        p.sweep_drag = p.sweep_drag_for_optimum(CRUISE_AMPLITUDE_PP / 2.0, TAU * CRUISE_FREQ_HZ);
        p
    }
}

impl HydroParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("rho_w", self.rho_w), ("fin_area", self.fin_area)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Param(format!(
                    "hydro.{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("added_mass", self.added_mass),
            ("d_yaw", self.d_yaw),
            ("d_roll", self.d_roll),
            ("d_pitch", self.d_pitch),
            ("buoy_net", self.buoy_net),
            ("h_meta", self.h_meta),
            ("thrust_gain", self.thrust_gain),
            ("deflection_gain", self.deflection_gain),
            ("sweep_drag", self.sweep_drag),
            ("tail_lateral_drag", self.tail_lateral_drag),
            ("lift_slope", self.lift_slope),
            ("drag.axial", self.drag.axial),
            ("drag.lateral", self.drag.lateral),
            ("drag.vertical", self.drag.vertical),
            ("drag.cross_flow", self.drag.cross_flow),
            ("drag.cross_flow_arm", self.drag.cross_flow_arm),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("hydro.{name} must be >= 0, got {v}")));
            }
        }
        for v in self
            .drag
            .rotational
            .iter()
            .chain(self.drag.rotational_linear.iter())
        {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::Param(format!(
                    "hydro.drag rotational terms must be >= 0, got {v}"
                )));
            }
        }
        if !(self.stall_angle > 0.0 && self.stall_angle <= PI / 2.0) {
            return Err(Error::Param(format!(
                "hydro.stall_angle must be in (0, pi/2], got {}",
                self.stall_angle
            )));
        }
        if !(self.deflection_accel > 0.0) {
            return Err(Error::Param(
                "hydro.deflection_accel must be positive".into(),
            ));
        }
        if !(self.thrust_offset.is_finite() && self.roll_trim.is_finite()) {
            return Err(Error::Param("hydro offsets must be finite".into()));
        }
        Ok(())
    }

    /// Sweep-loss coefficient that puts the cycle-mean net propulsive force
    /// at its maximum over tip amplitude `k_star` for disk speed `omega`.
    ///
    /// Cycle means at constant speed: `<|a|> = 2 K w^2 / pi`,
    /// `<a^2> = K^2 w^4 / 2`, `<v^2> = K^2 w^2 / 2`. With the linear
    /// deflection gain below the cap, net force per `w^2` is
    /// `c m (2K/pi + g K^2 w^2 / (2 a_c)) - c_sw K^2 / 2`, stationary where
    /// `c_sw = c m (2/(pi K) + g w^2 / a_c)`.
    pub fn sweep_drag_for_optimum(&self, k_star: f64, omega: f64) -> f64 {
        self.thrust_gain
            * self.added_mass
            * (2.0 / (PI * k_star) + self.deflection_gain * omega * omega / self.deflection_accel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FinAngles {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyForces {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Default for BodyForces {
    fn default() -> Self {
        Self::ZERO
    }
}

impl BodyForces {
    pub const ZERO: BodyForces = BodyForces {
        force: Vector3::new(0.0, 0.0, 0.0),
        moment: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn is_finite(&self) -> bool {
        self.force
            .iter()
            .chain(self.moment.iter())
            .all(|v| v.is_finite())
    }
}

impl std::ops::Add for BodyForces {
    type Output = BodyForces;
    fn add(self, o: BodyForces) -> BodyForces {
        BodyForces {
            force: self.force + o.force,
            moment: self.moment + o.moment,
        }
    }
}

impl std::ops::AddAssign for BodyForces {
    fn add_assign(&mut self, o: BodyForces) {
        self.force += o.force;
        self.moment += o.moment;
    }
}

/// Flat-plate lift coefficient `lift_slope sin(theta)`, held at its stall
/// value past the stall angle. Odd in `theta`.
pub fn lift_coefficient(theta: f64, p: &HydroParams) -> f64 {
    let t = theta.clamp(-p.stall_angle, p.stall_angle);
    p.lift_slope * t.sin()
}

/// `L = rho c_L(theta) S V^2 / 2`.
pub fn lift(theta: f64, speed: f64, p: &HydroParams) -> f64 {
    0.5 * p.rho_w * lift_coefficient(theta, p) * p.fin_area * speed * speed
}

/// Pitch drives both fins together, roll drives them apart:
/// `theta_l = k (u_p + u_r)`, `theta_r = k (u_p - u_r)`.
pub fn fin_mix(u_r: f64, u_p: f64, k_map: f64, stall_angle: f64) -> Result<FinAngles> {
    check_range("u_r", u_r, -1.0, 1.0)?;
    check_range("u_p", u_p, -1.0, 1.0)?;
    Ok(FinAngles {
        left: (k_map * (u_p + u_r)).clamp(-stall_angle, stall_angle),
        right: (k_map * (u_p - u_r)).clamp(-stall_angle, stall_angle),
    })
}

/// Scalar pectoral loads: lift, roll moment from the lift difference, and
/// pitch moment from the lift sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FinLoads {
    pub f_z: f64,
    pub m_roll: f64,
    pub m_pitch: f64,
}

pub fn fin_loads(a: &FinAngles, speed: f64, p: &HydroParams) -> FinLoads {
    let l = lift(a.left, speed, p);
    let r = lift(a.right, speed, p);
    FinLoads {
        f_z: l + r,
        m_roll: p.d_roll * (l - r),
        m_pitch: p.d_pitch * (l + r),
    }
}

/// Pectoral loads as body forces. Extra lift on the left fin pushes the port
/// side down (negative body roll); lift ahead of the centre of mass pitches
/// the nose down.
pub fn fin_forces(a: &FinAngles, speed: f64, p: &HydroParams) -> BodyForces {
    let loads = fin_loads(a, speed, p);
    BodyForces {
        force: Vector3::new(0.0, 0.0, loads.f_z),
        moment: Vector3::new(-loads.m_roll, -loads.m_pitch, 0.0),
    }
}

/// Added-mass reaction `F_r = m_w a_tail` and its yaw moment on the body,
/// `M_yaw = -d_yaw F_r`. `a_tail` is positive toward the body's left, so the
/// water pushes the tail right and swings the nose left.
pub fn yaw_reaction(a_tail: f64, p: &HydroParams) -> (f64, f64) {
    let f_r = p.added_mass * a_tail;
    (f_r, -p.d_yaw * f_r)
}

/// Caudal reaction as body forces (body +y is starboard).
pub fn caudal_forces(a_tail: f64, p: &HydroParams) -> BodyForces {
    let (f_r, m_yaw) = yaw_reaction(a_tail, p);
    BodyForces {
        force: Vector3::new(0.0, f_r, 0.0),
        moment: Vector3::new(0.0, 0.0, m_yaw),
    }
}

/// Axial loss from the tail sweeping through the water (N, always <= 0).
pub fn tail_sweep_drag(v_tail: f64, p: &HydroParams) -> f64 {
    -p.sweep_drag * v_tail * v_tail
}

/// Torque the tail load puts on the disk: lateral fin force (added-mass
/// reaction at steady disk speed plus sweep drag) reflected through the
/// lever, `dy_tip/dtheta = K cos(theta)`.
pub fn tail_load_torque(
    geom: &MechanismGeometry,
    theta_m: f64,
    omega_m: f64,
    p: &HydroParams,
) -> f64 {
    let k = geom.k_mech();
    let (sin, cos) = theta_m.sin_cos();
    let v = k * omega_m * cos;
    let a = -k * omega_m * omega_m * sin;
    (p.added_mass * a + p.tail_lateral_drag * v.abs() * v) * k * cos
}

/// Quadratic drag, cross flow, buoyancy, righting, trim and thrust-line
/// pitch moment, all in body axes.
///
/// `thrust` is the current caudal thrust (N); it only enters through the
/// pitch-up moment of the offset thrust line.
pub fn drag_and_restoring(
    state: &FishState,
    relative_velocity: &Vector3<f64>,
    thrust: f64,
    p: &HydroParams,
    body: &RigidBodyParams,
) -> BodyForces {
    let v = relative_velocity;
    let w = &state.ang_vel;
    let d = &p.drag;
    let quad = |c: f64, x: f64| -c * x * x.abs();

    let mut force = Vector3::new(
        quad(d.axial, v.x),
        quad(d.lateral, v.y),
        quad(d.vertical, v.z),
    );
    let mut moment = Vector3::zeros();
    for i in 0..3 {
        moment[i] = quad(d.rotational[i], w[i]) - d.rotational_linear[i] * w[i];
    }

    // cross flow at the centre of pressure, using the local velocity there so
    // the pair can only dissipate
    let arm = Vector3::new(-d.cross_flow_arm, 0.0, 0.0);
    let v_cp = v + w.cross(&arm);
    let cross = -d.cross_flow * v.x.abs() * Vector3::new(0.0, v_cp.y, v_cp.z);
    force += cross;
    moment += arm.cross(&cross);

    // world down expressed in body axes
    let down = state.orientation.inverse_transform_vector(&Vector3::z());
    force += -p.buoy_net * down;
    // centre of buoyancy h_meta above the centre of mass
    moment += body.mass * GRAVITY * p.h_meta * Vector3::z().cross(&down);
    moment.x += p.roll_trim;
    moment.y += p.thrust_offset * thrust;

    BodyForces { force, moment }
}

/// Righting moment magnitude at a given tilt from vertical.
pub fn righting_magnitude(tilt: f64, p: &HydroParams, body: &RigidBodyParams) -> f64 {
    body.mass * GRAVITY * p.h_meta * tilt.sin()
}

/// One tail beat at periodic steady state under constant commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeCycle {
    /// Beat period (s).
    pub period: f64,
    /// Net yaw impulse on the body over the beat (N m s); positive turns the
    /// nose to starboard.
    pub yaw_impulse: f64,
    /// Revolution-averaged disk speed (rad/s).
    pub mean_omega: f64,
    /// Time-mean disk speed over the half where `sin(theta) > 0`.
    pub mean_omega_positive_half: f64,
    pub mean_omega_negative_half: f64,
    /// Time-mean motor voltage (V).
    pub mean_voltage: f64,
    pub min_omega: f64,
    pub max_omega: f64,
    /// Cycle-mean caudal thrust (N).
    pub mean_thrust: f64,
    /// Cycle-mean sweep loss (N, <= 0).
    pub mean_sweep_drag: f64,
    pub revolutions: usize,
}

impl StrokeCycle {
    pub fn frequency(&self) -> f64 {
        1.0 / self.period
    }
}

/// Angle steps per revolution for the stroke integrator; a multiple of the
/// encoder resolution so every step maps onto a whole count.
const STROKE_STEPS: usize = 4 * ENCODER_COUNTS as usize;
const STALL_SPEED: f64 = 1e-3;
const MAX_REVOLUTIONS: usize = 2000;

/// Integrate the disk over whole revolutions in the angle domain until the
/// speed at `theta = 0` repeats, then report the final revolution.
///
/// The voltage follows the encoder continuously (no tick hold), so `gamma_0`
/// is the only delay term.
pub fn periodic_stroke(
    cmd: &ControlInput,
    motor: &MotorParams,
    geom: &MechanismGeometry,
    p: &HydroParams,
) -> Result<StrokeCycle> {
    let h = TAU / STROKE_STEPS as f64;
    let per_count = STROKE_STEPS / ENCODER_COUNTS as usize;
    let k = geom.k_mech();
    let voltages: Vec<f64> = (0..STROKE_STEPS)
        .map(|i| {
            modulate_voltage(
                cmd,
                EncoderReading {
                    counts: (i / per_count) as u32,
                },
                motor,
            )
        })
        .collect();
    let angles: Vec<f64> = (0..=STROKE_STEPS).map(|i| i as f64 * h).collect();

    let slope = |theta: f64, omega: f64, u: f64| -> f64 {
        let load = tail_load_torque(geom, theta, omega, p);
        crate::actuation::motor_acceleration(omega, u, load, motor) / omega
    };

    let mut omega0 = (cmd.u_a * motor.v_t / motor.k_e).max(1.0) * 0.5;
    let mut omegas = vec![0.0; STROKE_STEPS + 1];
    for rev in 1..=MAX_REVOLUTIONS {
        omegas[0] = omega0;
        for i in 0..STROKE_STEPS {
            let (th, w, u) = (angles[i], omegas[i], voltages[i]);
            let mid = w + 0.5 * h * slope(th, w, u);
            if !(mid > STALL_SPEED) {
                return Err(Error::MotorStall { angle: th });
            }
            let next = w + h * slope(th + 0.5 * h, mid, u);
            if !(next > STALL_SPEED) {
                return Err(Error::MotorStall { angle: th });
            }
            omegas[i + 1] = next;
        }
        let end = omegas[STROKE_STEPS];
        let converged = (end - omega0).abs() <= 1e-12 * omega0.max(1.0);
        omega0 = end;
        if converged {
            return Ok(summarize_stroke(&angles, &omegas, &voltages, h, k, p, rev));
        }
    }
    Err(Error::Calibration(format!(
        "stroke did not settle after {MAX_REVOLUTIONS} revolutions"
    )))
}

fn summarize_stroke(
    angles: &[f64],
    omegas: &[f64],
    voltages: &[f64],
    h: f64,
    k: f64,
    p: &HydroParams,
    revolutions: usize,
) -> StrokeCycle {
    let n = voltages.len();
    let mut period = 0.0;
    let mut t_pos = 0.0;
    let mut t_neg = 0.0;
    let mut volt_time = 0.0;
    let mut thrust_time = 0.0;
    let mut sweep_time = 0.0;
    let mut impulse_sum = 0.0;
    for i in 0..n {
        let dt = 0.5 * h * (1.0 / omegas[i] + 1.0 / omegas[i + 1]);
        period += dt;
        let mid = angles[i] + 0.5 * h;
        if mid.sin() > 0.0 {
            t_pos += dt;
        } else {
            t_neg += dt;
        }
        volt_time += voltages[i] * dt;
        let (sin, cos) = angles[i].sin_cos();
        let w = omegas[i];
        let a = -k * w * w * sin;
        thrust_time += crate::dynamics::thrust_from_tail(a, p) * dt;
        sweep_time += tail_sweep_drag(k * w * cos, p) * dt;
        // M dt = -d m a dt = d m K w^2 sin(theta) dt = d m K w sin(theta) dtheta
        impulse_sum += w * sin;
    }
    StrokeCycle {
        period,
        yaw_impulse: p.d_yaw * p.added_mass * k * impulse_sum * h,
        mean_omega: TAU / period,
        mean_omega_positive_half: PI / t_pos,
        mean_omega_negative_half: PI / t_neg,
        mean_voltage: volt_time / period,
        min_omega: omegas.iter().copied().fold(f64::INFINITY, f64::min),
        max_omega: omegas.iter().copied().fold(0.0, f64::max),
        mean_thrust: thrust_time / period,
        mean_sweep_drag: sweep_time / period,
        revolutions,
    }
}

/// Net yaw impulse per tail beat (N m s) for average voltage `u_a` and
/// differential `u_s`. Positive values turn the nose to starboard.
pub fn cycle_yaw_moment(
    u_a: f64,
    u_s: f64,
    motor: &MotorParams,
    geom: &MechanismGeometry,
    p: &HydroParams,
) -> Result<f64> {
    let cmd = ControlInput::new(u_a, u_s, 0.0, 0.0)?;
    Ok(periodic_stroke(&cmd, motor, geom, p)?.yaw_impulse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FishState;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;

    fn flat_plate() -> HydroParams {
        HydroParams {
            rho_w: 1000.0,
            fin_area: 0.01,
            lift_slope: TAU,
            ..HydroParams::default()
        }
    }

    #[test]
    fn lift_examples() {
        let p = flat_plate();
        assert_eq!(lift(0.3, 0.0, &p), 0.0);
        assert_eq!(lift(0.0, 1.5, &p), 0.0);
        let l = lift(10f64.to_radians(), 1.0, &p);
        // 0.5 * 1000 * 2pi sin(10 deg) * 0.01
        assert_relative_eq!(l, 5.0 * TAU * 10f64.to_radians().sin(), epsilon = 1e-12);
        assert!((l - 5.46).abs() < 0.01, "{l}");
    }

    #[test]
    fn lift_holds_past_stall() {
        let p = flat_plate();
        let at_stall = lift(p.stall_angle, 1.0, &p);
        assert_eq!(lift(p.stall_angle + 0.2, 1.0, &p), at_stall);
        assert_eq!(lift(-p.stall_angle - 0.2, 1.0, &p), -at_stall);
    }

    #[test]
    fn mix_examples() {
        let stall = 35f64.to_radians();
        assert_eq!(fin_mix(0.0, 0.0, 0.6, stall).unwrap(), FinAngles::default());
        let roll = fin_mix(0.5, 0.0, 0.6, stall).unwrap();
        assert_relative_eq!(roll.left, 0.3, epsilon = 1e-15);
        assert_relative_eq!(roll.right, -0.3, epsilon = 1e-15);
        let pitch = fin_mix(0.0, 0.5, 0.6, stall).unwrap();
        assert_relative_eq!(pitch.left, 0.3, epsilon = 1e-15);
        assert_relative_eq!(pitch.right, 0.3, epsilon = 1e-15);
        let sat = fin_mix(1.0, 1.0, 0.6, stall).unwrap();
        assert_eq!(sat.left, stall);
        assert!(fin_mix(1.1, 0.0, 0.6, stall).is_err());
        assert!(fin_mix(0.0, -1.1, 0.6, stall).is_err());
    }

    #[test]
    fn fin_force_examples() {
        let p = HydroParams {
            d_roll: 0.15,
            ..flat_plate()
        };
        let sym = FinAngles {
            left: 0.2,
            right: 0.2,
        };
        assert_eq!(fin_loads(&sym, 1.2, &p).m_roll, 0.0);
        let anti = FinAngles {
            left: 0.2,
            right: -0.2,
        };
        let loads = fin_loads(&anti, 1.2, &p);
        assert_eq!(loads.f_z, 0.0);
        assert_eq!(loads.m_pitch, 0.0);
        assert!(loads.m_roll > 0.0);
        let one = FinAngles {
            left: 10f64.to_radians(),
            right: 0.0,
        };
        let m = fin_loads(&one, 1.0, &p).m_roll;
        assert!((m - 0.82).abs() < 0.005, "{m}");
        let bf = fin_forces(&one, 1.0, &p);
        assert_relative_eq!(bf.moment.x, -m, epsilon = 1e-15);
        assert!(bf.force.z > 0.0 && bf.moment.y < 0.0);
    }

    #[test]
    fn yaw_reaction_examples() {
        let p = HydroParams {
            added_mass: 0.5,
            d_yaw: 0.3,
            ..HydroParams::default()
        };
        assert_eq!(yaw_reaction(0.0, &p), (0.0, -0.0));
        let (f, m) = yaw_reaction(54.8, &p);
        assert_relative_eq!(f, 27.4, epsilon = 1e-12);
        assert_relative_eq!(m, -8.22, epsilon = 1e-12);
        let (fm, mm) = yaw_reaction(-54.8, &p);
        assert_eq!((fm, mm), (-f, -m));
        // tail accelerating to port: tail pushed to starboard, nose to port
        let body = caudal_forces(54.8, &p);
        assert!(body.moment.z < 0.0 && body.force.y > 0.0);
    }

    fn upright() -> FishState {
        FishState::at_rest(Vector3::new(0.0, 0.0, 0.6), UnitQuaternion::identity())
    }

    #[test]
    fn restoring_at_rest_is_net_buoyancy() {
        let p = HydroParams::default();
        let body = RigidBodyParams::default();
        let s = upright();
        let f = drag_and_restoring(&s, &Vector3::zeros(), 0.0, &p, &body);
        let world = s.orientation.transform_vector(&f.force);
        assert_eq!(world, Vector3::new(0.0, 0.0, -p.buoy_net));
        assert_eq!(f.moment, Vector3::zeros());
    }

    #[test]
    fn righting_opposes_roll_and_pitch() {
        let p = HydroParams::default();
        let body = RigidBodyParams::default();
        for tilt in [0.05_f64, -0.05, 0.8, -1.2] {
            let mut s = upright();
            s.orientation = UnitQuaternion::from_euler_angles(tilt, 0.0, 0.0);
            let m = drag_and_restoring(&s, &Vector3::zeros(), 0.0, &p, &body).moment;
            assert!(m.x * tilt < 0.0);
            s.orientation = UnitQuaternion::from_euler_angles(0.0, tilt, 0.0);
            let m = drag_and_restoring(&s, &Vector3::zeros(), 0.0, &p, &body).moment;
            assert!(m.y * tilt < 0.0);
        }
        let mut s = upright();
        s.orientation = UnitQuaternion::from_euler_angles(PI / 2.0, 0.0, 0.0);
        let m = drag_and_restoring(&s, &Vector3::zeros(), 0.0, &p, &body).moment;
        assert_relative_eq!(
            m.norm(),
            body.mass * GRAVITY * p.h_meta,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            righting_magnitude(PI / 2.0, &p, &body),
            m.norm(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn righting_has_single_stable_zero() {
        let p = HydroParams::default();
        let body = RigidBodyParams::default();
        let n = 2001;
        let mut zeros = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..n {
            let tilt = -PI + TAU * i as f64 / n as f64;
            let mut s = upright();
            s.orientation = UnitQuaternion::from_euler_angles(tilt, 0.0, 0.0);
            let m = drag_and_restoring(&s, &Vector3::zeros(), 0.0, &p, &body)
                .moment
                .x;
            if let Some((pt, pm)) = prev {
                if pm.signum() != m.signum() {
                    zeros.push((pt + tilt) / 2.0);
                    // stable: moment goes from positive to negative through the zero
                    assert!(pm > 0.0 && m < 0.0);
                }
            }
            prev = Some((tilt, m));
        }
        assert_eq!(zeros.len(), 1);
        assert!(zeros[0].abs() < 0.01);
    }

    #[test]
    fn thrust_line_pitches_nose_up() {
        let p = HydroParams {
            thrust_offset: 0.02,
            ..HydroParams::default()
        };
        let body = RigidBodyParams::default();
        let m = drag_and_restoring(&upright(), &Vector3::zeros(), 10.0, &p, &body).moment;
        assert_relative_eq!(m.y, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn drag_opposes_motion() {
        let p = HydroParams::default();
        let body = RigidBodyParams::default();
        let v = Vector3::new(1.0, -0.5, 0.2);
        let f = drag_and_restoring(&upright(), &v, 0.0, &p, &body).force;
        let buoy = Vector3::new(0.0, 0.0, -p.buoy_net);
        let drag = f - buoy;
        for i in 0..3 {
            assert!(drag[i] * v[i] < 0.0);
        }
    }

    #[test]
    fn symmetric_stroke_has_no_net_yaw() {
        let m = MotorParams::default();
        let g = MechanismGeometry::default();
        let p = HydroParams::default();
        for u_a in [0.3, 0.5, 0.62, 0.9] {
            let yaw = cycle_yaw_moment(u_a, 0.0, &m, &g, &p).unwrap();
            assert!(yaw.abs() < 1e-9, "u_a {u_a}: {yaw}");
        }
    }

    #[test]
    fn differential_turns_and_is_odd() {
        let m = MotorParams::default();
        let g = MechanismGeometry::default();
        let p = HydroParams::default();
        let plus = cycle_yaw_moment(0.5, 0.2, &m, &g, &p).unwrap();
        let minus = cycle_yaw_moment(0.5, -0.2, &m, &g, &p).unwrap();
        assert!(plus > 0.0);
        assert_relative_eq!(plus, -minus, max_relative = 1e-9);
        let cmd = ControlInput::new(0.5, 0.2, 0.0, 0.0).unwrap();
        let cyc = periodic_stroke(&cmd, &m, &g, &p).unwrap();
        assert!(cyc.mean_omega_positive_half > cyc.mean_omega_negative_half);
    }

    #[test]
    fn rejects_differential_beyond_average() {
        let m = MotorParams::default();
        let g = MechanismGeometry::default();
        let p = HydroParams::default();
        assert!(matches!(
            cycle_yaw_moment(0.2, 0.3, &m, &g, &p),
            Err(Error::DifferentialExceedsAverage { .. })
        ));
    }

    #[test]
    fn stroke_matches_time_domain_oracle() {
        // independent route: explicit 1 kHz time stepping of the same motor
        // and load with the voltage following the encoder every substep
        let m = MotorParams::default();
        let g = MechanismGeometry::default();
        let p = HydroParams::default();
        let cmd = ControlInput::new(0.5, 0.2, 0.0, 0.0).unwrap();
        let cyc = periodic_stroke(&cmd, &m, &g, &p).unwrap();

        let dt = 1e-4;
        let (mut th, mut w) = (0.0f64, 20.0f64);
        let mut revs = 0;
        let mut impulse = 0.0;
        let mut time = 0.0;
        let k = g.k_mech();
        while revs < 40 {
            let u = modulate_voltage(&cmd, crate::actuation::encoder_read(th), &m);
            let load = tail_load_torque(&g, th, w, &p);
            w += dt * crate::actuation::motor_acceleration(w, u, load, &m);
            let prev = th;
            th = crate::mechanism::wrap_angle(th + w * dt);
            if revs >= 30 {
                impulse += p.d_yaw * p.added_mass * k * w * w * th.sin() * dt;
                time += dt;
            }
            if th < prev {
                revs += 1;
            }
        }
        let per_beat = impulse / 10.0;
        assert_relative_eq!(time / 10.0, cyc.period, max_relative = 2e-3);
        assert_relative_eq!(per_beat, cyc.yaw_impulse, max_relative = 0.03);
    }
}
