use yokefish_core::dynamics::SimParams;
use yokefish_core::error::Error;
use yokefish_core::harness::scenario::{self, Scenario, Trace};
use yokefish_core::harness::{bundled, run_scenario, telemetry};

fn parse(text: &str) -> yokefish_core::error::Result<Scenario> {
    Scenario::parse(text, &SimParams::default(), &bundled::load_trace)
}

fn pointer_of(r: yokefish_core::error::Result<Scenario>) -> String {
    match r {
        Err(Error::Config { pointer, .. }) => pointer,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn every_bundled_scenario_parses() {
    for name in bundled::scenario_names() {
        let s = bundled::scenario(name, &SimParams::default())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(s.name, name);
        assert!(s.ticks() > 0);
    }
}

#[test]
fn pilot_scenario_cannot_run_offline() {
    let s = bundled::scenario("pilot", &SimParams::default()).unwrap();
    assert!(matches!(s.trace, Trace::Pilot));
    assert!(matches!(run_scenario(&s), Err(Error::Scenario(_))));
}

#[test]
fn wrong_type_points_at_the_field() {
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,
        "trace":{"steps":[{"t":0.0},{"t":0.5,"u_s":"left"}]}}"#;
    assert_eq!(pointer_of(parse(text)), "/trace/steps/1/u_s");
}

#[test]
fn unknown_parameter_points_into_params() {
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,
        "params":{"hydro":{"d_yew":0.3}},"trace":{"steps":[{"t":0.0}]}}"#;
    assert!(pointer_of(parse(text)).starts_with("/params/hydro"));
}

#[test]
fn invalid_parameter_value_is_rejected() {
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,
        "params":{"mechanism":{"d_1":0.01}},"trace":{"steps":[{"t":0.0}]}}"#;
    assert!(pointer_of(parse(text)).starts_with("/params"));
}

#[test]
fn step_times_must_increase() {
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,
        "trace":{"steps":[{"t":0.0},{"t":0.5},{"t":0.5}]}}"#;
    assert_eq!(pointer_of(parse(text)), "/trace/steps/2/t");
}

#[test]
fn command_limits_are_checked() {
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,
        "trace":{"steps":[{"t":0.0,"u_a":0.3,"u_s":0.5}]}}"#;
    assert_eq!(pointer_of(parse(text)), "/trace/steps/0");
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,
        "trace":{"steps":[{"t":0.0,"gait_hz":40.0}]}}"#;
    assert_eq!(pointer_of(parse(text)), "/trace/steps/0/gait_hz");
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,
        "trace":{"steps":[{"t":0.0,"u_a":0.5,"gait_hz":3.0}]}}"#;
    assert_eq!(pointer_of(parse(text)), "/trace/steps/0");
}

#[test]
fn schema_version_and_duration() {
    let text = r#"{"schema_version":2,"name":"x","duration":1.0,"trace":{"steps":[{"t":0.0}]}}"#;
    assert_eq!(pointer_of(parse(text)), "/schema_version");
    let text = r#"{"schema_version":1,"name":"x","duration":0.0,"trace":{"steps":[{"t":0.0}]}}"#;
    assert_eq!(pointer_of(parse(text)), "/duration");
}

#[test]
fn missing_trace_file_is_reported() {
    let text = r#"{"schema_version":1,"name":"x","duration":1.0,"trace":{"file":"nope.json"}}"#;
    assert_eq!(pointer_of(parse(text)), "/trace/file");
}

#[test]
fn trace_holds_last_step() {
    let text = r#"{"schema_version":1,"name":"x","duration":2.0,
        "trace":{"steps":[{"t":0.0,"u_a":0.4},{"t":1.0,"u_a":0.6,"u_s":0.1}]}}"#;
    let s = parse(text).unwrap();
    assert_eq!(s.trace.command_at(0.99).u_a, 0.4);
    assert_eq!(s.trace.command_at(1.0).u_s, 0.1);
    assert_eq!(s.trace.command_at(5.0).u_a, 0.6);
    assert_eq!(s.trace.mirrored().command_at(1.5).u_s, -0.1);
}

#[test]
fn config_round_trip_and_overlay() {
    let mut p = SimParams::default();
    p.hydro.d_yaw = 0.77;
    let text = scenario::config_json(&p).unwrap();
    assert_eq!(scenario::load_config(&text).unwrap(), p);
    let over = scenario::overlay_params(
        &p,
        &serde_json::json!({"hydro": {"d_roll": 0.2}}),
        "/params",
    )
    .unwrap();
    assert_eq!(over.hydro.d_roll, 0.2);
    assert_eq!(over.hydro.d_yaw, 0.77);
    match scenario::load_config(r#"{"schema_version":1,"params":{"motor":{"j":-1.0}}}"#) {
        Err(Error::Config { pointer, .. }) => assert!(pointer.starts_with("/params"), "{pointer}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn calibrated_config_loads() {
    let p = bundled::calibrated_params().unwrap();
    assert_ne!(p, SimParams::default());
}

#[test]
fn seeded_disturbance_is_repeatable() {
    let text = |seed: u64| {
        format!(
            r#"{{"schema_version":1,"name":"x","duration":1.0,"trace":{{"steps":[{{"t":0.0,"u_a":0.5}}]}},
            "disturbance":{{"seed":{seed},"force_std":0.5,"moment_std":0.05}}}}"#
        )
    };
    let run = |seed| {
        let out = run_scenario(&parse(&text(seed)).unwrap()).unwrap();
        let mut buf = Vec::new();
        telemetry::write_csv(&mut buf, &out.records, 1).unwrap();
        buf
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}
