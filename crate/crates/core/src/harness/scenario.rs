//! Scenario files, command traces and the offline replay loop.

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::gait::throttle_for_frequency;
use super::metrics::{compute_metrics, MetricConfig, MetricReport};
use super::telemetry::TelemetryRecord;
use crate::actuation::{ControlInput, CONTROL_PERIOD};
use crate::dynamics::{FishState, SimParams, Simulator};
use crate::error::{Error, Result};
use crate::hydro::BodyForces;

pub const SCHEMA_VERSION: u32 = 1;

/// Render a deserialisation path as a JSON pointer under `prefix`.
fn pointer(prefix: &str, path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = prefix.to_owned();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1")))
            }
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

/// Deserialise with error locations reported as JSON pointers.
pub fn from_value_at<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| Error::Config {
        pointer: pointer(prefix, e.path()),
        message: e.into_inner().to_string(),
    })
}

pub fn from_str_at<T: DeserializeOwned>(text: &str, prefix: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let v = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
        pointer: pointer(prefix, e.path()),
        message: e.into_inner().to_string(),
    })?;
    de.end().map_err(|e| Error::Config {
        pointer: prefix.to_owned(),
        message: e.to_string(),
    })?;
    Ok(v)
}

/// Recursive object merge; anything that is not an object replaces.
pub fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Apply a partial parameter block over `base`, validating the result.
pub fn overlay_params(base: &SimParams, overlay: &Value, prefix: &str) -> Result<SimParams> {
    if overlay.is_null() {
        return Ok(*base);
    }
    if !overlay.is_object() {
        return Err(Error::Config {
            pointer: prefix.to_owned(),
            message: "params must be an object".into(),
        });
    }
    let mut v = serde_json::to_value(base).map_err(|e| Error::Param(e.to_string()))?;
    merge(&mut v, overlay);
    let p: SimParams = from_value_at(v, prefix)?;
    p.validate().map_err(|e| Error::Config {
        pointer: prefix.to_owned(),
        message: e.to_string(),
    })?;
    Ok(p)
}

fn check_schema(version: u32, pointer: &str) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Config {
            pointer: pointer.to_owned(),
            message: format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

/// Parameter configuration file: `{"schema_version": 1, "params": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub params: Value,
}

pub fn load_config(text: &str) -> Result<SimParams> {
    let cfg: ConfigFile = from_str_at(text, "")?;
    check_schema(cfg.schema_version, "/schema_version")?;
    overlay_params(&SimParams::default(), &cfg.params, "/params")
}

pub fn config_json(params: &SimParams) -> Result<String> {
    let cfg = ConfigFile {
        schema_version: SCHEMA_VERSION,
        params: serde_json::to_value(params).map_err(|e| Error::Param(e.to_string()))?,
    };
    serde_json::to_string_pretty(&cfg).map_err(|e| Error::Param(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditions {
    /// World position, z down (m).
    pub position: [f64; 3],
    /// Roll, pitch, heading (deg).
    pub attitude_deg: [f64; 3],
    /// Forward body speed (m/s).
    pub speed: f64,
    /// Disk angle (rad).
    pub theta_m: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 0.5],
            attitude_deg: [0.0; 3],
            speed: 0.0,
            theta_m: 0.0,
        }
    }
}

impl InitialConditions {
    pub fn state(&self) -> FishState {
        let [r, p, y] = self.attitude_deg.map(f64::to_radians);
        let mut s = FishState::at_rest(
            Vector3::from(self.position),
            UnitQuaternion::from_euler_angles(r, p, y),
        );
        s.lin_vel.x = self.speed;
        s.motor.theta_m = crate::mechanism::wrap_angle(self.theta_m);
        s
    }
}

/// One command step, held until the next. Throttle is given either directly
/// (`u_a`) or as a tail-beat frequency (`gait_hz`) solved for the scenario's
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStep {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait_hz: Option<f64>,
    #[serde(default)]
    pub u_s: f64,
    #[serde(default)]
    pub u_r: f64,
    #[serde(default)]
    pub u_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    Steps(Vec<TraceStep>),
    /// Path of a trace file, resolved by the caller.
    File(String),
    /// Commands arrive live from the pilot bridge.
    Pilot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub schema_version: u32,
    pub steps: Vec<TraceStep>,
}

/// Piecewise-constant random body load, redrawn every `hold` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub seed: u64,
    /// Standard deviation per force axis (N).
    pub force_std: f64,
    /// Standard deviation per moment axis (N m).
    pub moment_std: f64,
    pub hold: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            force_std: 0.0,
            moment_std: 0.0,
            hold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration: f64,
    #[serde(default)]
    pub initial: InitialConditions,
    #[serde(default)]
    pub params: Value,
    pub trace: TraceSource,
    #[serde(default)]
    pub metrics: MetricConfig,
    #[serde(default)]
    pub disturbance: Option<DisturbanceSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Steps(Vec<(f64, ControlInput)>),
    Pilot,
}

impl Trace {
    /// Command in force at time `t`; all-zero before the first step.
    pub fn command_at(&self, t: f64) -> ControlInput {
        match self {
            Trace::Pilot => ControlInput::ZERO,
            Trace::Steps(steps) => {
                // tolerate tick times a rounding error short of a step
                let i = steps.partition_point(|(ts, _)| *ts <= t + 1e-9);
                if i == 0 {
                    ControlInput::ZERO
                } else {
                    steps[i - 1].1
                }
            }
        }
    }

    /// The same trace with yaw and roll commands negated.
    pub fn mirrored(&self) -> Trace {
        match self {
            Trace::Pilot => Trace::Pilot,
            Trace::Steps(s) => Trace::Steps(s.iter().map(|(t, c)| (*t, c.mirrored())).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub duration: f64,
    pub initial: FishState,
    pub params: SimParams,
    pub trace: Trace,
    pub metrics: MetricConfig,
    pub disturbance: Option<DisturbanceSpec>,
}

fn resolve_steps(
    steps: &[TraceStep],
    params: &SimParams,
    prefix: &str,
) -> Result<Vec<(f64, ControlInput)>> {
    let mut out: Vec<(f64, ControlInput)> = Vec::with_capacity(steps.len());
    for (i, s) in steps.iter().enumerate() {
        let at = |field: &str, message: String| Error::Config {
            pointer: format!("{prefix}/{i}{field}"),
            message,
        };
        if !(s.t >= 0.0 && s.t.is_finite()) {
            return Err(at(
                "/t",
                format!("time must be finite and >= 0, got {}", s.t),
            ));
        }
        if let Some(&(prev, _)) = out.last() {
            if s.t <= prev {
                return Err(at(
                    "/t",
                    format!("times must be strictly increasing ({} after {prev})", s.t),
                ));
            }
        }
        let u_a = match (s.u_a, s.gait_hz) {
            (Some(_), Some(_)) => {
                return Err(at("", "give either u_a or gait_hz, not both".into()))
            }
            (Some(u), None) => u,
            (None, Some(hz)) => {
                let g = throttle_for_frequency(hz, params)
                    .map_err(|e| at("/gait_hz", e.to_string()))?;
                if g.saturated {
                    return Err(at(
                        "/gait_hz",
                        format!("{hz} Hz is beyond full throttle ({:.3} Hz)", g.frequency),
                    ));
                }
                g.u_a
            }
            (None, None) => 0.0,
        };
        let cmd = ControlInput::new(u_a, s.u_s, s.u_r, s.u_p).map_err(|e| at("", e.to_string()))?;
        out.push((s.t, cmd));
    }
    Ok(out)
}

impl Scenario {
    /// Parse a scenario over `base` parameters. `load_trace` returns the text of
    /// a referenced trace file.
    pub fn parse(
        text: &str,
        base: &SimParams,
        load_trace: &dyn Fn(&str) -> Result<String>,
    ) -> Result<Scenario> {
        let file: ScenarioFile = from_str_at(text, "")?;
        Self::from_file(file, base, load_trace)
    }

    pub fn from_file(
        file: ScenarioFile,
        base: &SimParams,
        load_trace: &dyn Fn(&str) -> Result<String>,
    ) -> Result<Scenario> {
        check_schema(file.schema_version, "/schema_version")?;
        if !(file.duration > 0.0 && file.duration.is_finite()) {
            return Err(Error::Config {
                pointer: "/duration".into(),
                message: format!("duration must be positive, got {}", file.duration),
            });
        }
        let params = overlay_params(base, &file.params, "/params")?;
        let trace = match &file.trace {
            TraceSource::Pilot => Trace::Pilot,
            TraceSource::Steps(steps) => {
                Trace::Steps(resolve_steps(steps, &params, "/trace/steps")?)
            }
            TraceSource::File(path) => {
                let text = load_trace(path).map_err(|e| Error::Config {
                    pointer: "/trace/file".into(),
                    message: format!("{path}: {e}"),
                })?;
                let tf: TraceFile = from_str_at(&text, "").map_err(|e| match e {
                    Error::Config { pointer, message } => Error::Config {
                        pointer: format!("/trace/file{pointer}"),
                        message: format!("{path}: {message}"),
                    },
                    other => other,
                })?;
                check_schema(tf.schema_version, "/trace/file/schema_version")?;
                Trace::Steps(resolve_steps(&tf.steps, &params, "/trace/file/steps")?)
            }
        };
        if let Some(d) = &file.disturbance {
            if !(d.force_std >= 0.0 && d.moment_std >= 0.0 && d.hold > 0.0) {
                return Err(Error::Config {
                    pointer: "/disturbance".into(),
                    message: "standard deviations must be >= 0 and hold > 0".into(),
                });
            }
        }
        Ok(Scenario {
            name: file.name,
            description: file.description,
            duration: file.duration,
            initial: file.initial.state(),
            params,
            trace,
            metrics: file.metrics,
            disturbance: file.disturbance,
        })
    }

    pub fn ticks(&self) -> u64 {
        (self.duration / CONTROL_PERIOD).round() as u64
    }

    /// Reflection about the vertical plane: mirrored initial state and trace.
    pub fn mirrored(&self) -> Scenario {
        let mut m = self.clone();
        m.initial = self.initial.mirrored();
        m.trace = self.trace.mirrored();
        m.params.hydro.roll_trim = -self.params.hydro.roll_trim;
        m
    }
}

/// Seeded piecewise-constant disturbance sequence.
pub struct Disturbance {
    spec: DisturbanceSpec,
    rng: ChaCha8Rng,
    current: BodyForces,
    next_draw: f64,
}

impl Disturbance {
    pub fn new(spec: DisturbanceSpec) -> Self {
        Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            current: BodyForces::ZERO,
            next_draw: 0.0,
        }
    }

    pub fn at(&mut self, t: f64) -> BodyForces {
        if t + 1e-12 >= self.next_draw {
            let f = Normal::new(0.0, self.spec.force_std).expect("validated std");
            let m = Normal::new(0.0, self.spec.moment_std).expect("validated std");
            let mut draw = |d: &Normal<f64>| d.sample(&mut self.rng);
            self.current = BodyForces {
                force: Vector3::new(draw(&f), draw(&f), draw(&f)),
                moment: Vector3::new(draw(&m), draw(&m), draw(&m)),
            };
            self.next_draw += self.spec.hold;
        }
        self.current
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    /// Absent when the run aborted before producing any motion to measure.
    pub report: Option<MetricReport>,
    /// Set when the integrator failed; `records` then hold the partial run.
    pub aborted: Option<Error>,
}

/// Replay a scenario at the control rate. The first record is the initial
/// state; each later record is the state after one tick under the command
/// logged with it.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput> {
    let Trace::Steps(_) = &s.trace else {
        return Err(Error::Scenario(format!(
            "scenario `{}` is pilot-driven; run it through the pilot server",
            s.name
        )));
    };
    let mut sim = Simulator::new(s.params, s.initial)?;
    let mut dist = s.disturbance.map(Disturbance::new);
    let n = s.ticks();
    let mut records = Vec::with_capacity(n as usize + 1);
    records.push(TelemetryRecord::new(
        0.0,
        sim.state(),
        &s.trace.command_at(0.0),
        sim.last_derived(),
    ));
    let mut aborted = None;
    for _ in 0..n {
        let t = sim.time();
        let cmd = s.trace.command_at(t);
        let load = dist.as_mut().map_or(BodyForces::ZERO, |d| d.at(t));
        match sim.tick_with(&cmd, &load) {
            Ok(_) => records.push(TelemetryRecord::new(
                sim.time(),
                sim.state(),
                &cmd,
                sim.last_derived(),
            )),
            Err(e) => {
                log::warn!("scenario `{}` aborted at t = {t:.4}: {e}", s.name);
                aborted = Some(e);
                break;
            }
        }
    }
    let amplitude = s.params.mechanism.peak_to_peak_amplitude();
    let report = compute_metrics(&records, &s.metrics, Some(amplitude)).ok();
    Ok(RunOutput {
        records,
        report,
        aborted,
    })
}

/// Run and require a clean finish.
pub fn run_to_report(s: &Scenario) -> Result<MetricReport> {
    let out = run_scenario(s)?;
    if let Some(e) = out.aborted {
        return Err(e);
    }
    out.report
        .ok_or_else(|| Error::Scenario(format!("scenario `{}` produced no metrics", s.name)))
}
