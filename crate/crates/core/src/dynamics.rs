//! Fixed-step 6-DOF rigid-body integration.
//!
//! World axes are north-east-down with the water surface at `z = 0` and the
//! pool floor at `z = floor_z`; body axes are forward-right-down. The
//! orientation maps body vectors into the world frame.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuation::{
    control_tick, motor_step, ControlInput, ControlParams, MotorParams, MotorState, CONTROL_PERIOD,
};
use crate::error::{Error, Result};
use crate::hydro::{
    caudal_forces, drag_and_restoring, fin_forces, tail_load_torque, tail_sweep_drag, BodyForces,
    FinAngles, HydroParams,
};
use crate::mechanism::{
    tail_tip_acceleration_steady, tail_tip_velocity, MechanismGeometry, TailKinematicState,
};

pub const GRAVITY: f64 = 9.81;
/// Longest physics substep (s).
pub const MAX_SUBSTEP: f64 = 1e-3;
/// Longest accepted outer step (s).
pub const MAX_STEP: f64 = 5e-3;

/// Hull: 550 mm long, 74 mm wide, 292 mm tall.
pub const HULL_DIMENSIONS: [f64; 3] = [0.55, 0.074, 0.292];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigidBodyParams {
    /// Dry mass (kg).
    pub mass: f64,
    /// Principal inertia `[Ixx, Iyy, Izz]` (kg m^2).
    pub inertia: [f64; 3],
    /// Scalar inflation for entrained water, applied to mass and inertia.
    pub effective_mass_factor: f64,
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        let m = 5.0;
        let [l, w, h] = HULL_DIMENSIONS;
        Self {
            mass: m,
            inertia: [
                m / 12.0 * (w * w + h * h),
                m / 12.0 * (l * l + h * h),
                m / 12.0 * (l * l + w * w),
            ],
            effective_mass_factor: 1.2,
        }
    }
}

impl RigidBodyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || self.inertia.iter().any(|i| !(*i > 0.0)) {
            return Err(Error::Param(
                "body mass and inertia must be positive".into(),
            ));
        }
        if !(self.effective_mass_factor >= 1.0) {
            return Err(Error::Param(
                "body.effective_mass_factor must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_mass(&self) -> f64 {
        self.mass * self.effective_mass_factor
    }

    pub fn effective_inertia(&self) -> Vector3<f64> {
        Vector3::from(self.inertia) * self.effective_mass_factor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentParams {
    /// Depth of the floor below the surface (m).
    pub floor_z: f64,
    /// Constant water current, world frame (m/s).
    pub current: [f64; 3],
}

impl Default for EnvironmentParams {
    fn default() -> Self {
        Self {
            floor_z: 1.2,
            current: [0.0; 3],
        }
    }
}

/// Every parameter block the stepper reads.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub mechanism: MechanismGeometry,
    pub hydro: HydroParams,
    pub motor: MotorParams,
    pub control: ControlParams,
    pub body: RigidBodyParams,
    pub environment: EnvironmentParams,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.mechanism.validate()?;
        self.hydro.validate()?;
        self.motor.validate()?;
        self.control.validate()?;
        self.body.validate()?;
        if !(self.environment.floor_z > 0.0) {
            return Err(Error::Param("environment.floor_z must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FishState {
    /// World position (m), z down.
    pub position: Vector3<f64>,
    /// World-from-body rotation.
    pub orientation: UnitQuaternion<f64>,
    /// Body-frame linear velocity (m/s).
    pub lin_vel: Vector3<f64>,
    /// Body-frame angular velocity (rad/s).
    pub ang_vel: Vector3<f64>,
    pub motor: MotorState,
    /// Pectoral servo positions (rad).
    pub fins: FinAngles,
}

impl FishState {
    pub fn at_rest(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
            lin_vel: Vector3::zeros(),
            ang_vel: Vector3::zeros(),
            motor: MotorState::default(),
            fins: FinAngles::default(),
        }
    }

    /// `(roll, pitch, yaw)`, intrinsic Z-Y-X.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.orientation.euler_angles()
    }

    pub fn world_velocity(&self) -> Vector3<f64> {
        self.orientation.transform_vector(&self.lin_vel)
    }

    pub fn is_finite(&self) -> bool {
        let q = self.orientation.as_ref().coords;
        self.position
            .iter()
            .chain(q.iter())
            .chain(self.lin_vel.iter())
            .chain(self.ang_vel.iter())
            .all(|v| v.is_finite())
            && self.motor.theta_m.is_finite()
            && self.motor.omega_m.is_finite()
    }

    /// Reflection about the vertical x-z plane. The disk phase shifts by half a
    /// turn so the tail sits at the mirrored lateral position.
    pub fn mirrored(&self) -> Self {
        let (r, p, y) = self.euler();
        let mut m = *self;
        m.position.y = -self.position.y;
        m.orientation = UnitQuaternion::from_euler_angles(-r, p, -y);
        m.lin_vel.y = -self.lin_vel.y;
        m.ang_vel.x = -self.ang_vel.x;
        m.ang_vel.z = -self.ang_vel.z;
        m.motor.theta_m = crate::mechanism::wrap_angle(self.motor.theta_m + std::f64::consts::PI);
        m.fins = FinAngles {
            left: self.fins.right,
            right: self.fins.left,
        };
        m
    }

    pub fn rotational_energy(&self, body: &RigidBodyParams) -> f64 {
        0.5 * self
            .ang_vel
            .component_mul(&self.ang_vel)
            .dot(&body.effective_inertia())
    }

    pub fn translational_energy(&self, body: &RigidBodyParams) -> f64 {
        0.5 * body.effective_mass() * self.lin_vel.norm_squared()
    }
}

/// Flexible-fin bending gain: grows linearly with tail acceleration up to the
/// deflection cap.
pub fn deflection_factor(a_tail: f64, p: &HydroParams) -> f64 {
    1.0 + p.deflection_gain * a_tail.abs().min(p.deflection_accel) / p.deflection_accel
}

/// Axial thrust proxy `c_thrust m_w |a_tail| deflection(a_tail)`; even in
/// `a_tail` and never negative.
pub fn thrust_from_tail(a_tail: f64, p: &HydroParams) -> f64 {
    p.thrust_gain * p.added_mass * a_tail.abs() * deflection_factor(a_tail, p)
}

/// Quantities produced alongside a step, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDerived {
    pub v_tail: f64,
    pub a_tail: f64,
    pub u_t: f64,
    pub thrust: f64,
    /// Pectoral servo targets for this tick.
    pub fin_targets: FinAngles,
    /// Total body-frame load at the last substep.
    pub loads: BodyForces,
    pub breach: bool,
    pub floor_contact: bool,
}

/// Fraction of the hull height below the surface.
fn submerged_fraction(z: f64) -> f64 {
    let h = HULL_DIMENSIONS[2];
    ((z + 0.5 * h) / h).clamp(0.0, 1.0)
}

fn slew(current: f64, target: f64, max_delta: f64) -> f64 {
    current + (target - current).clamp(-max_delta, max_delta)
}

/// Advance by `dt` with one control tick at the start of the interval and
/// equal physics substeps of at most 1 ms.
pub fn step(
    state: &FishState,
    cmd: &ControlInput,
    params: &SimParams,
    dt: f64,
) -> Result<FishState> {
    step_detailed(state, cmd, params, dt, &BodyForces::ZERO, 0.0).map(|(s, _)| s)
}

/// [`step`] with an extra body-frame disturbance load, the start time used in
/// error reports, and the derived quantities.
pub fn step_detailed(
    state: &FishState,
    cmd: &ControlInput,
    params: &SimParams,
    dt: f64,
    disturbance: &BodyForces,
    t: f64,
) -> Result<(FishState, StepDerived)> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::TimeStep(dt));
    }
    let SimParams {
        mechanism: geom,
        hydro: p,
        motor,
        control,
        body,
        environment: env,
    } = params;

    let (u_t, fin_targets) = control_tick(cmd, &state.motor, motor, control.k_map, p.stall_angle)?;
    let substeps = (dt / MAX_SUBSTEP - 1e-9).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;

    let mass_eff = body.effective_mass();
    let inertia = body.effective_inertia();
    let current = Vector3::from(env.current);
    let full_buoyancy = body.mass * GRAVITY + p.buoy_net;

    let mut s = *state;
    let mut derived = StepDerived {
        u_t,
        fin_targets,
        ..StepDerived::default()
    };

    for _ in 0..substeps {
        let max_slew = control.servo_rate * h;
        s.fins.left = slew(s.fins.left, fin_targets.left, max_slew);
        s.fins.right = slew(s.fins.right, fin_targets.right, max_slew);

        let kin = TailKinematicState::steady(s.motor.theta_m, s.motor.omega_m);
        let v_tail = tail_tip_velocity(geom, &kin);
        let a_tail = tail_tip_acceleration_steady(geom, kin.theta_m, kin.omega_m);
        let submerged = s.position.z > 0.0;

        let world_current_body = s.orientation.inverse_transform_vector(&current);
        let v_rel = s.lin_vel - world_current_body;

        let mut loads = *disturbance;
        let thrust;
        let mass;
        if submerged {
            thrust = thrust_from_tail(a_tail, p);
            loads.force.x += thrust + tail_sweep_drag(v_tail, p);
            loads += caudal_forces(a_tail, p);
            loads += fin_forces(&s.fins, v_rel.norm(), p);
            loads += drag_and_restoring(&s, &v_rel, thrust, p, body);
            mass = mass_eff;
        } else {
            thrust = 0.0;
            mass = body.mass;
        }
        // buoyancy lost as the hull clears the surface
        let lost = (1.0 - submerged_fraction(s.position.z)) * full_buoyancy;
        let mut world_force = Vector3::new(0.0, 0.0, lost);
        if !submerged {
            world_force.z -= p.buoy_net;
        }

        let load_torque = if submerged {
            tail_load_torque(geom, kin.theta_m, kin.omega_m, p)
        } else {
            0.0
        };
        s.motor = motor_step(&s.motor, u_t, load_torque, h, motor)?;

        // translation in the world frame; drag dissipates without a Coriolis residue
        let mut v_world = s.orientation.transform_vector(&s.lin_vel);
        v_world += h * (s.orientation.transform_vector(&loads.force) + world_force) / mass;

        // gyroscopic update, energy-restored, then applied torques
        let w = s.ang_vel;
        let l = inertia.component_mul(&w);
        let mut w_g = w - h * w.cross(&l).component_div(&inertia);
        let e0 = w.dot(&l);
        let e_g = w_g.dot(&inertia.component_mul(&w_g));
        if e_g > 0.0 {
            w_g *= (e0 / e_g).sqrt();
        }
        s.ang_vel = w_g + h * loads.moment.component_div(&inertia);

        s.position += h * v_world;
        let dq = UnitQuaternion::from_scaled_axis(s.ang_vel * h);
        let mut q = s.orientation * dq;
        q.renormalize();
        s.orientation = q;

        if s.position.z > env.floor_z {
            s.position.z = env.floor_z;
            if v_world.z > 0.0 {
                v_world.z = 0.0;
            }
            derived.floor_contact = true;
        }
        s.lin_vel = s.orientation.inverse_transform_vector(&v_world);

        derived.v_tail = v_tail;
        derived.a_tail = a_tail;
        derived.thrust = thrust;
        derived.loads = loads;
        derived.breach |= !submerged;

        if !s.is_finite() {
            return Err(Error::Integration { t });
        }
    }
    Ok((s, derived))
}

/// Single simulation instance driven at the 400 Hz control cadence. Offline
/// replay and the live pilot bridge both advance through [`Simulator::tick`].
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: SimParams,
    state: FishState,
    ticks: u64,
    last: StepDerived,
}

impl Simulator {
    pub fn new(params: SimParams, initial: FishState) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: initial,
            ticks: 0,
            last: StepDerived::default(),
        })
    }

    pub fn state(&self) -> &FishState {
        &self.state
    }

    pub fn last_derived(&self) -> &StepDerived {
        &self.last
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Simulated time (s).
    pub fn time(&self) -> f64 {
        self.ticks as f64 * CONTROL_PERIOD
    }

    pub fn reset(&mut self, initial: FishState) {
        self.state = initial;
        self.ticks = 0;
        self.last = StepDerived::default();
    }

    pub fn tick(&mut self, cmd: &ControlInput) -> Result<&StepDerived> {
        self.tick_with(cmd, &BodyForces::ZERO)
    }

    pub fn tick_with(
        &mut self,
        cmd: &ControlInput,
        disturbance: &BodyForces,
    ) -> Result<&StepDerived> {
        let t = self.time();
        let (s, d) = step_detailed(
            &self.state,
            cmd,
            &self.params,
            CONTROL_PERIOD,
            disturbance,
            t,
        )?;
        self.state = s;
        self.last = d;
        self.ticks += 1;
        Ok(&self.last)
    }
}
