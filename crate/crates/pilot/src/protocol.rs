//! JSON text messages on `/ws`. Every message carries `"v": 1`.
//!
//! Client to server:
//!
//! | `type`   | fields                                                        |
//! |----------|---------------------------------------------------------------|
//! | `cmd`    | `u_a u_s u_r u_p`; optional `ts` (client wall clock, ms since the Unix epoch) and `sim_t` (apply at this simulated time, s) |
//! | `pause`  | none                                                          |
//! | `resume` | none                                                          |
//! | `reset`  | none: back to the initial conditions, command zeroed          |
//!
//! Server to client: `hello` once on connect, then `frame` at the frame rate,
//! and `error` whenever a message is rejected (the connection stays open).

use serde::{Deserialize, Serialize};
use yokefish_core::actuation::ControlInput;
use yokefish_core::dynamics::{FishState, StepDerived};
use yokefish_core::mechanism::MechanismGeometry;

pub const PROTOCOL_VERSION: u32 = 1;

/// Commands older than this on arrival are dropped (ms).
pub const STALE_MS: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMsg {
    Cmd {
        v: u32,
        u_a: f64,
        u_s: f64,
        u_r: f64,
        u_p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sim_t: Option<f64>,
    },
    Pause {
        v: u32,
    },
    Resume {
        v: u32,
    },
    Reset {
        v: u32,
    },
}

impl ClientMsg {
    pub fn version(&self) -> u32 {
        match self {
            ClientMsg::Cmd { v, .. }
            | ClientMsg::Pause { v }
            | ClientMsg::Resume { v }
            | ClientMsg::Reset { v } => *v,
        }
    }

    pub fn cmd(c: &ControlInput) -> Self {
        ClientMsg::Cmd {
            v: PROTOCOL_VERSION,
            u_a: c.u_a,
            u_s: c.u_s,
            u_r: c.u_r,
            u_p: c.u_p,
            ts: None,
            sim_t: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Pilot,
    Spectator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    Version,
    Range,
    Stale,
    Spectator,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandEcho {
    pub u_a: f64,
    pub u_s: f64,
    pub u_r: f64,
    pub u_p: f64,
}

impl From<&ControlInput> for CommandEcho {
    fn from(c: &ControlInput) -> Self {
        Self {
            u_a: c.u_a,
            u_s: c.u_s,
            u_r: c.u_r,
            u_p: c.u_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Simulated time (s), monotone between resets.
    pub t: f64,
    /// Control ticks since the last reset.
    pub tick: u64,
    /// Number of resets so far; `t` restarts from zero with each.
    pub resets: u64,
    /// World position, NED (m).
    pub position: [f64; 3],
    /// Body to world, `[w, x, y, z]`.
    pub quaternion: [f64; 4],
    /// `[roll, pitch, yaw]` (rad, Z-Y-X).
    pub euler: [f64; 3],
    /// Body-frame velocity `[u, v, w]` (m/s).
    pub velocity: [f64; 3],
    /// Body rates `[p, q, r]` (rad/s).
    pub rates: [f64; 3],
    /// Speed through the water (m/s).
    pub speed: f64,
    /// Command applied during the last tick.
    pub command: CommandEcho,
    /// Tail angle from the centre line (rad).
    pub tail_angle: f64,
    /// Disk speed (rad/s).
    pub omega_m: f64,
    pub breach: bool,
    pub floor_contact: bool,
    pub paused: bool,
}

impl Frame {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tick: u64,
        t: f64,
        resets: u64,
        s: &FishState,
        cmd: &ControlInput,
        d: &StepDerived,
        geom: &MechanismGeometry,
        paused: bool,
    ) -> Self {
        let q = s.orientation.quaternion();
        let (roll, pitch, yaw) = s.euler();
        Self {
            t,
            tick,
            resets,
            position: s.position.into(),
            quaternion: [q.w, q.i, q.j, q.k],
            euler: [roll, pitch, yaw],
            velocity: s.lin_vel.into(),
            rates: s.ang_vel.into(),
            speed: s.lin_vel.norm(),
            command: cmd.into(),
            tail_angle: geom.tail_angle(s.motor.theta_m),
            omega_m: s.motor.omega_m,
            breach: d.breach,
            floor_contact: d.floor_contact,
            paused,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Hello {
        v: u32,
        role: Role,
        /// Frames per simulated second.
        rate: f64,
        timescale: f64,
        scenario: String,
    },
    Frame {
        v: u32,
        #[serde(flatten)]
        frame: Frame,
    },
    Error {
        v: u32,
        code: ErrorCode,
        message: String,
    },
}

impl ServerMsg {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMsg::Error {
            v: PROTOCOL_VERSION,
            code,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}
