//! Scenarios, traces and calibration targets compiled into the binary.
//! Names given to the CLI resolve here before the filesystem.

use super::calibrate::TargetSet;
use super::scenario::{from_str_at, Scenario};
use crate::dynamics::SimParams;
use crate::error::{Error, Result};

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../scenarios/", $name, ".json")))),*]
    };
}

pub const SCENARIOS: &[(&str, &str)] = bundle![
    "idle",
    "straight-25m",
    "straight-nocomp",
    "cruise-4hz",
    "sharp-yaw",
    "cruise-yaw",
    "roll-step",
    "dive",
    "figure8",
    "steady-swim",
    "pilot",
];

pub const TRACES: &[(&str, &str)] = &[(
    "figure8-trace.json",
    include_str!("../../scenarios/figure8-trace.json"),
)];

pub const TARGETS: &[(&str, &str)] = bundle!["anchors", "cruise-anchor"];

/// Parameters produced by calibrating against `anchors`.
pub const CALIBRATED_CONFIG: &str = include_str!("../../scenarios/calibrated.json");

fn lookup(table: &'static [(&'static str, &'static str)], name: &str) -> Option<&'static str> {
    let key = name.strip_suffix(".json").unwrap_or(name);
    table
        .iter()
        .find(|(n, _)| *n == key || *n == name)
        .map(|(_, text)| *text)
}

pub fn scenario_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn scenario_text(name: &str) -> Option<&'static str> {
    lookup(SCENARIOS, name)
}

pub fn trace_text(name: &str) -> Option<&'static str> {
    lookup(TRACES, name)
}

pub fn targets_text(name: &str) -> Option<&'static str> {
    lookup(TARGETS, name)
}

pub fn load_trace(name: &str) -> Result<String> {
    trace_text(name)
        .map(str::to_owned)
        .ok_or_else(|| Error::Scenario(format!("no bundled trace `{name}`")))
}

/// A bundled scenario over `base` parameters.
pub fn scenario(name: &str, base: &SimParams) -> Result<Scenario> {
    let text = scenario_text(name)
        .ok_or_else(|| Error::Scenario(format!("no bundled scenario `{name}`")))?;
    Scenario::parse(text, base, &load_trace)
}

pub fn targets(name: &str) -> Result<TargetSet> {
    let text = targets_text(name)
        .ok_or_else(|| Error::Scenario(format!("no bundled target set `{name}`")))?;
    from_str_at(text, "")
}

pub fn calibrated_params() -> Result<SimParams> {
    super::scenario::load_config(CALIBRATED_CONFIG)
}
