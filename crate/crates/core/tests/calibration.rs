use yokefish_core::dynamics::SimParams;
use yokefish_core::error::Error;
use yokefish_core::harness::bundled;
use yokefish_core::harness::calibrate::{calibrate, get_param, set_param, Target, TargetSet};
use yokefish_core::harness::scenario::Scenario;
use yokefish_core::harness::sweep::{grid, strouhal_sweep};

fn resolve(name: &str, p: &SimParams) -> yokefish_core::error::Result<Scenario> {
    bundled::scenario(name, p)
}

fn cruise_target(value: f64) -> TargetSet {
    TargetSet {
        schema_version: 1,
        description: String::new(),
        targets: vec![Target {
            scenario: "cruise-4hz".into(),
            observable: "steady_speed".into(),
            value,
        }],
        free: vec!["/hydro/drag/axial".into()],
        tolerance: 0.01,
        max_iterations: 20,
    }
}

#[test]
fn param_pointers() {
    let p = SimParams::default();
    assert_eq!(get_param(&p, "/hydro/d_yaw").unwrap(), p.hydro.d_yaw);
    let q = set_param(&p, "/hydro/drag/axial", 3.0).unwrap();
    assert_eq!(q.hydro.drag.axial, 3.0);
    assert!(get_param(&p, "/hydro/nope").is_err());
    assert!(set_param(&p, "/hydro/drag", 1.0).is_err());
    assert!(set_param(&p, "/hydro/drag/axial", -1.0).is_err());
}

#[test]
fn fits_cruise_speed() {
    let (p, rep) = calibrate(&cruise_target(1.3), &SimParams::default(), &resolve).unwrap();
    assert!(rep.iterations >= 1);
    assert!(rep.residuals[0].relative.abs() < 0.01, "{rep:?}");
    assert!(p.hydro.drag.axial > SimParams::default().hydro.drag.axial);
    assert_eq!(rep.params[0].value, p.hydro.drag.axial);
}

#[test]
fn calibrated_config_is_a_fixed_point() {
    let base = bundled::calibrated_params().unwrap();
    let set = bundled::targets("anchors").unwrap();
    let (p, rep) = calibrate(&set, &base, &resolve).unwrap();
    assert_eq!(rep.iterations, 0, "{rep:?}");
    assert_eq!(p, base);
}

#[test]
fn no_free_parameters_only_reports() {
    let mut set = cruise_target(1.5);
    set.free.clear();
    let (p, rep) = calibrate(&set, &SimParams::default(), &resolve).unwrap();
    assert_eq!(p, SimParams::default());
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.evaluations, 1);
    assert_eq!(rep.residuals.len(), 1);
}

#[test]
fn non_convergence_reports_residuals() {
    let mut set = cruise_target(1.0);
    set.max_iterations = 0;
    match calibrate(&set, &SimParams::default(), &resolve) {
        Err(Error::Calibration(msg)) => assert!(msg.contains("cruise-4hz steady_speed"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unresponsive_parameter_is_an_error() {
    let mut set = cruise_target(1.0);
    // the pectoral fins sit at zero during a straight cruise
    set.free = vec!["/hydro/d_roll".into()];
    assert!(matches!(
        calibrate(&set, &SimParams::default(), &resolve),
        Err(Error::Calibration(_))
    ));
}

#[test]
fn more_free_parameters_than_targets() {
    let mut set = cruise_target(1.0);
    set.free.push("/hydro/d_yaw".into());
    assert!(matches!(
        calibrate(&set, &SimParams::default(), &resolve),
        Err(Error::Calibration(_))
    ));
}

#[test]
fn grid_is_inclusive() {
    assert_eq!(grid(2.0, 3.0, 0.5).unwrap(), vec![2.0, 2.5, 3.0]);
    assert_eq!(grid(2.0, 2.0, 0.25).unwrap(), vec![2.0]);
    assert!(grid(3.0, 2.0, 0.5).is_err());
    assert!(grid(2.0, 3.0, 0.0).is_err());
}

#[test]
fn single_point_sweep() {
    let template = bundled::scenario("steady-swim", &SimParams::default()).unwrap();
    let d1 = SimParams::default().mechanism.d_1;
    let t = strouhal_sweep(&template, &[4.0], &[d1]).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.skipped.is_empty());
    let row = t.best_row().unwrap();
    assert!((row.u_a - 0.62).abs() < 1e-3, "{row:?}");
    assert!((row.beat_hz - 4.0).abs() < 0.02, "{row:?}");
    assert!((row.amplitude_pp - 0.1125).abs() < 1e-4);
    assert!(row.strouhal > 0.25 && row.strouhal < 0.35, "{row:?}");
}

#[test]
fn sweep_skips_capped_geometry() {
    let template = bundled::scenario("steady-swim", &SimParams::default()).unwrap();
    let t = strouhal_sweep(&template, &[3.0, 4.0], &[0.02, 0.06]).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.skipped.len(), 2);
    assert!(t
        .skipped
        .iter()
        .all(|s| s.d_1 == 0.02 && !s.reason.is_empty()));
    // faster beat, faster fish
    assert_eq!(t.best_row().unwrap().frequency, 4.0);
}
