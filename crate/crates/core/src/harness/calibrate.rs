//! Fit free model coefficients so scenario observables hit target values.
//!
//! Each free parameter is paired with the target at the same index and
//! solved by a scalar secant search in log-log space (observable and
//! parameter are positive in every shipped target, and most responses are
//! close to power laws there). Parameters are swept coordinate by
//! coordinate until every target, including unpaired extras, is within
//! tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::scenario::{from_value_at, run_to_report, Scenario};
use crate::dynamics::SimParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub scenario: String,
    /// Metric field, as a name or JSON pointer into the metric report.
    pub observable: String,
    pub value: f64,
}

fn default_tolerance() -> f64 {
    0.01
}

fn default_iterations() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSet {
    pub schema_version: u32,
    #[serde(default)]
    pub description: String,
    pub targets: Vec<Target>,
    /// JSON pointers into the parameter tree, e.g. `/hydro/drag/axial`.
    #[serde(default)]
    pub free: Vec<String>,
    /// Relative tolerance on every target.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub scenario: String,
    pub observable: String,
    pub target: f64,
    pub value: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParam {
    pub name: String,
    pub initial: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Coordinate sweeps performed; zero when the start already fits.
    pub iterations: usize,
    /// Scenario runs used.
    pub evaluations: usize,
    pub params: Vec<FittedParam>,
    pub residuals: Vec<Residual>,
}

pub fn get_param(p: &SimParams, pointer: &str) -> Result<f64> {
    let v = serde_json::to_value(p).map_err(|e| Error::Param(e.to_string()))?;
    v.pointer(pointer)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Calibration(format!("`{pointer}` is not a numeric parameter")))
}

pub fn set_param(p: &SimParams, pointer: &str, value: f64) -> Result<SimParams> {
    let mut v = serde_json::to_value(p).map_err(|e| Error::Param(e.to_string()))?;
    let slot = v
        .pointer_mut(pointer)
        .filter(|s| s.is_number())
        .ok_or_else(|| Error::Calibration(format!("`{pointer}` is not a numeric parameter")))?;
    *slot = Value::from(value);
    let p: SimParams = from_value_at(v, "/params")?;
    p.validate().map_err(|e| Error::Config {
        pointer: format!("/params{pointer}"),
        message: e.to_string(),
    })?;
    Ok(p)
}

/// Resolves a target's scenario name over trial parameters.
pub type ScenarioResolver<'a> = dyn Fn(&str, &SimParams) -> Result<Scenario> + Sync + 'a;

struct Evaluator<'a> {
    set: &'a TargetSet,
    resolve: &'a ScenarioResolver<'a>,
    evaluations: std::sync::atomic::AtomicUsize,
}

impl Evaluator<'_> {
    fn observe(&self, i: usize, p: &SimParams) -> Result<f64> {
        let t = &self.set.targets[i];
        let scenario = (self.resolve)(&t.scenario, p)?;
        self.evaluations
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let report = run_to_report(&scenario)?;
        report.observable(&t.observable).ok_or_else(|| {
            Error::Calibration(format!(
                "scenario `{}` reports no `{}`",
                t.scenario, t.observable
            ))
        })
    }

    fn residuals(&self, p: &SimParams) -> Result<Vec<Residual>> {
        (0..self.set.targets.len())
            .into_par_iter()
            .map(|i| {
                let t = &self.set.targets[i];
                let value = self.observe(i, p)?;
                Ok(Residual {
                    scenario: t.scenario.clone(),
                    observable: t.observable.clone(),
                    target: t.value,
                    value,
                    relative: (value - t.value) / t.value.abs().max(f64::MIN_POSITIVE),
                })
            })
            .collect()
    }

    /// Scalar secant search on parameter `j` for target `j`.
    fn solve(&self, j: usize, p: &SimParams, start_value: f64) -> Result<SimParams> {
        let name = &self.set.free[j];
        let target = self.set.targets[j].value;
        let x_of = |v: f64| if v > 0.0 { v.ln() } else { v };
        let v_of = |x: f64, positive: bool| if positive { x.exp() } else { x };
        let y_of = |obs: f64| {
            if obs > 0.0 && target > 0.0 {
                obs.ln() - target.ln()
            } else {
                obs - target
            }
        };
        let done = |obs: f64| ((obs - target) / target).abs() < 0.25 * self.set.tolerance;

        let p0 = get_param(p, name)?;
        let positive = p0 > 0.0;
        let mut x_prev = x_of(p0);
        let mut y_prev = y_of(start_value);
        let mut x = x_prev
            + if positive {
                0.1
            } else {
                0.1 * p0.abs().max(1e-3)
            };
        let mut trial = set_param(p, name, v_of(x, positive))?;
        let max_step = if positive { 4f64.ln() } else { f64::INFINITY };
        for _ in 0..12 {
            let obs = self.observe(j, &trial)?;
            if done(obs) {
                return Ok(trial);
            }
            let y = y_of(obs);
            let slope = (y - y_prev) / (x - x_prev);
            if !slope.is_finite() || slope == 0.0 {
                return Err(Error::Calibration(format!(
                    "target {} (`{}`) does not respond to `{name}`",
                    j, self.set.targets[j].observable
                )));
            }
            let step = (-y / slope).clamp(-max_step, max_step);
            x_prev = x;
            y_prev = y;
            x += step;
            trial = set_param(p, name, v_of(x, positive))?;
        }
        Ok(trial)
    }
}

fn summarize(residuals: &[Residual]) -> String {
    residuals
        .iter()
        .map(|r| {
            format!(
                "{} {}: {:.6} vs {:.6} ({:+.3}%)",
                r.scenario,
                r.observable,
                r.value,
                r.target,
                100.0 * r.relative
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Fit `set.free` starting from `base`. Fails with the final residuals when
/// the targets are not all met within `max_iterations` sweeps.
pub fn calibrate(
    set: &TargetSet,
    base: &SimParams,
    resolve: &ScenarioResolver<'_>,
) -> Result<(SimParams, CalibrationReport)> {
    if set.free.len() > set.targets.len() {
        return Err(Error::Calibration(format!(
            "{} free parameters but only {} targets",
            set.free.len(),
            set.targets.len()
        )));
    }
    if !(set.tolerance > 0.0) {
        return Err(Error::Calibration("tolerance must be positive".into()));
    }
    let initial: Vec<f64> = set
        .free
        .iter()
        .map(|n| get_param(base, n))
        .collect::<Result<_>>()?;
    let ev = Evaluator {
        set,
        resolve,
        evaluations: 0.into(),
    };
    let mut p = *base;
    let mut iterations = 0;
    let report = |p: &SimParams,
                  iterations,
                  residuals: Vec<Residual>,
                  ev: &Evaluator|
     -> Result<CalibrationReport> {
        Ok(CalibrationReport {
            iterations,
            evaluations: ev.evaluations.load(std::sync::atomic::Ordering::Relaxed),
            params: set
                .free
                .iter()
                .zip(&initial)
                .map(|(n, &i)| {
                    Ok(FittedParam {
                        name: n.clone(),
                        initial: i,
                        value: get_param(p, n)?,
                    })
                })
                .collect::<Result<_>>()?,
            residuals,
        })
    };
    if set.free.is_empty() {
        let residuals = ev.residuals(&p)?;
        return Ok((p, report(&p, 0, residuals, &ev)?));
    }
    loop {
        let residuals = ev.residuals(&p)?;
        if residuals.iter().all(|r| r.relative.abs() < set.tolerance) {
            let rep = report(&p, iterations, residuals, &ev)?;
            return Ok((p, rep));
        }
        if iterations == set.max_iterations {
            return Err(Error::Calibration(format!(
                "no convergence after {iterations} iterations: {}",
                summarize(&residuals)
            )));
        }
        iterations += 1;
        for j in 0..set.free.len() {
            // the residual from the last sweep is stale once an earlier
            // coordinate moved
            let current = if j == 0 {
                residuals[0].value
            } else {
                ev.observe(j, &p)?
            };
            if ((current - set.targets[j].value) / set.targets[j].value).abs()
                < 0.25 * set.tolerance
            {
                continue;
            }
            p = ev.solve(j, &p, current)?;
        }
        log::info!(
            "calibration sweep {iterations}: {:?}",
            set.free
                .iter()
                .map(|n| get_param(&p, n))
                .collect::<Vec<_>>()
        );
    }
}
