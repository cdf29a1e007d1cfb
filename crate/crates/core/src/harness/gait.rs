//! Throttle needed for a tail-beat frequency.

use serde::{Deserialize, Serialize};

use crate::actuation::ControlInput;
use crate::dynamics::SimParams;
use crate::error::{Error, Result};
use crate::hydro::periodic_stroke;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitPoint {
    pub u_a: f64,
    /// Frequency actually reached, below the request when saturated (Hz).
    pub frequency: f64,
    /// The request is beyond full supply voltage.
    pub saturated: bool,
}

/// Steady beat frequency for a straight-swim throttle; zero if the disk stalls.
pub fn frequency_for_throttle(u_a: f64, params: &SimParams) -> Result<f64> {
    let cmd = ControlInput::cruise(u_a)?;
    match periodic_stroke(&cmd, &params.motor, &params.mechanism, &params.hydro) {
        Ok(c) => Ok(c.frequency()),
        Err(Error::MotorStall { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Bisect the throttle so the straight-swim beat runs at `hz`.
pub fn throttle_for_frequency(hz: f64, params: &SimParams) -> Result<GaitPoint> {
    if !(hz > 0.0 && hz.is_finite()) {
        return Err(Error::Scenario(format!(
            "gait frequency must be positive, got {hz}"
        )));
    }
    let top = frequency_for_throttle(1.0, params)?;
    if hz >= top {
        return Ok(GaitPoint {
            u_a: 1.0,
            frequency: top,
            saturated: hz > top * (1.0 + 1e-9),
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if frequency_for_throttle(mid, params)? < hz {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u_a = 0.5 * (lo + hi);
    Ok(GaitPoint {
        u_a,
        frequency: frequency_for_throttle(u_a, params)?,
        saturated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cruise_throttle_gives_four_hz() {
        let g = throttle_for_frequency(4.0, &SimParams::default()).unwrap();
        assert!((g.u_a - 0.62).abs() < 1e-3, "{g:?}");
        assert!((g.frequency - 4.0).abs() < 1e-9);
    }

    #[test]
    fn frequency_rises_with_throttle() {
        let p = SimParams::default();
        let fs: Vec<f64> = [0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&u| frequency_for_throttle(u, &p).unwrap())
            .collect();
        assert!(fs.windows(2).all(|w| w[1] > w[0]), "{fs:?}");
    }

    #[test]
    fn beyond_top_speed_saturates() {
        let g = throttle_for_frequency(50.0, &SimParams::default()).unwrap();
        assert!(g.saturated);
        assert_eq!(g.u_a, 1.0);
    }
}
