use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use yokefish_core::dynamics::SimParams;
use yokefish_core::error::Error as CoreError;
use yokefish_core::harness::calibrate::{calibrate, TargetSet};
use yokefish_core::harness::metrics::{compute_metrics, MetricConfig, MetricReport};
use yokefish_core::harness::scenario::{self, from_str_at, Scenario};
use yokefish_core::harness::sweep::{grid, strouhal_sweep, SweepTable};
use yokefish_core::harness::{bundled, run_scenario, telemetry};
use yokefish_pilot::{PilotError, ServeConfig};

/// Simulator and tooling for a scotch-yoke robotic fish.
///
/// Scenario and target names resolve against the bundled set first, then
/// as filesystem paths.
#[derive(Debug, Parser)]
#[command(name = "yokefish", version, propagate_version = true)]
struct Cli {
    /// Parameter config: a JSON file, or `calibrated` / `default` for the bundled sets
    #[arg(
        long,
        global = true,
        env = "YOKEFISH_CONFIG",
        default_value = "calibrated"
    )]
    config: String,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario; writes telemetry and a metrics report
    Run {
        /// Bundled scenario name or path to a scenario file
        scenario: String,
        /// Seed for the scenario's random disturbance, if it has one
        #[arg(long)]
        seed: Option<u64>,
        /// Keep every n-th control tick in the telemetry
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        decimation: u64,
        /// Telemetry format
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Fit free parameters to a target set; writes the fitted config and a report
    Calibrate {
        /// Bundled target set name or path to a target file
        targets: String,
    },
    /// Strouhal sweep over beat frequency and lever length
    Sweep {
        /// Frequency grid start:stop:step (Hz), inclusive
        #[arg(long, default_value = "2:5:0.25")]
        freqs: String,
        /// Lever lengths d_1 (m), comma separated; defaults to seven levers
        /// spanning 0.075 to 0.15 m of peak-to-peak tail amplitude
        #[arg(long, value_delimiter = ',')]
        d1: Vec<f64>,
        /// Scenario used as the template for every point
        #[arg(long, default_value = "steady-swim")]
        scenario: String,
    },
    /// Compute metrics from a telemetry file (.csv or .jsonl); prints JSON
    Metrics {
        /// Telemetry file
        telemetry: PathBuf,
        /// Take windows and settle time from this scenario's metrics block
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Start the real-time pilot server
    Serve {
        /// Listen port
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Listen address
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Frames per simulated second (20 to 400)
        #[arg(long, default_value_t = 30.0)]
        rate: f64,
        /// Simulated seconds per wall second
        #[arg(long, default_value_t = 1.0)]
        timescale: f64,
        /// Scenario supplying initial conditions and parameters
        #[arg(long, default_value = "pilot")]
        scenario: String,
        /// Hold at t = 0 until a client sends resume
        #[arg(long)]
        paused: bool,
        /// Directory with a UI bundle to serve at /
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

fn load_params(source: &str) -> anyhow::Result<SimParams> {
    match source {
        "calibrated" => Ok(bundled::calibrated_params()?),
        "default" => Ok(SimParams::default()),
        path => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
            scenario::load_config(&text).with_context(|| format!("in config {path}"))
        }
    }
}

/// Bundled name first, then a file path. Trace files named by a scenario file
/// resolve the same way, relative to that file's directory.
fn resolve_scenario(name: &str, base: &SimParams) -> yokefish_core::error::Result<Scenario> {
    if bundled::scenario_text(name).is_some() {
        return bundled::scenario(name, base);
    }
    let path = Path::new(name);
    let text = fs::read_to_string(path).map_err(|e| {
        CoreError::Scenario(format!("no bundled scenario `{name}` and {name}: {e}"))
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let load_trace = move |trace: &str| -> yokefish_core::error::Result<String> {
        if let Some(t) = bundled::trace_text(trace) {
            return Ok(t.to_owned());
        }
        Ok(fs::read_to_string(dir.join(trace))?)
    };
    Scenario::parse(&text, base, &load_trace)
}

fn load_targets(name: &str) -> anyhow::Result<TargetSet> {
    match bundled::targets_text(name) {
        Some(text) => Ok(from_str_at(text, "")?),
        None => {
            let text = fs::read_to_string(name)
                .with_context(|| format!("no bundled target set `{name}`; reading {name}"))?;
            from_str_at(&text, "").with_context(|| format!("in target file {name}"))
        }
    }
}

fn create(out: &Path, file: &str) -> anyhow::Result<BufWriter<File>> {
    let path = out.join(file);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json(out: &Path, file: &str, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut w = create(out, file)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn file_stem(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map_or_else(|| name.to_owned(), |s| s.to_string_lossy().into_owned())
}

fn cmd_run(
    cli: &Cli,
    name: &str,
    seed: Option<u64>,
    decimation: u64,
    format: Format,
) -> anyhow::Result<()> {
    let base = load_params(&cli.config)?;
    let mut s = resolve_scenario(name, &base)?;
    if let Some(seed) = seed {
        match s.disturbance.as_mut() {
            Some(d) => d.seed = seed,
            None => log::info!(
                "scenario `{}` has no disturbance; --seed has no effect",
                s.name
            ),
        }
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = run_scenario(&s)?;
    let stem = file_stem(name);
    let decimation = decimation as usize;
    let file = match format {
        Format::Csv => format!("{stem}.csv"),
        Format::Jsonl => format!("{stem}.jsonl"),
    };
    let w = create(&cli.out, &file)?;
    match format {
        Format::Csv => telemetry::write_csv(w, &out.records, decimation)?,
        Format::Jsonl => telemetry::write_jsonl(w, &out.records, decimation)?,
    }
    if let Some(report) = &out.report {
        write_json(&cli.out, &format!("{stem}.metrics.json"), report)?;
    }
    let path = cli.out.join(&file);
    if let Some(e) = out.aborted {
        bail!(
            "scenario `{}` aborted: {e} (partial telemetry in {})",
            s.name,
            path.display()
        );
    }
    let report = out.report.context("run produced no metrics")?;
    println!(
        "{}: {} records, steady speed {:.3} m/s, beat {:.2} Hz -> {}",
        s.name,
        out.records.len(),
        report.steady_speed,
        report.tail_beat_hz,
        path.display()
    );
    Ok(())
}

fn cmd_calibrate(cli: &Cli, targets: &str) -> anyhow::Result<()> {
    let base = load_params(&cli.config)?;
    let set = load_targets(targets)?;
    let (params, report) = calibrate(&set, &base, &resolve_scenario)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut w = create(&cli.out, "calibrated.json")?;
    writeln!(w, "{}", scenario::config_json(&params)?)?;
    w.flush()?;
    write_json(&cli.out, "calibration.json", &report)?;
    println!(
        "converged in {} sweeps ({} runs) -> {}",
        report.iterations,
        report.evaluations,
        cli.out.join("calibrated.json").display()
    );
    for p in &report.params {
        println!("  {} {:.6} -> {:.6}", p.name, p.initial, p.value);
    }
    for r in &report.residuals {
        println!(
            "  {} {} {:.4} (target {:.4})",
            r.scenario, r.observable, r.value, r.target
        );
    }
    Ok(())
}

fn parse_grid(arg: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = arg.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        bail!("--freqs expects start:stop:step, got `{arg}`");
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("--freqs: `{s}` is not a number"))
    };
    Ok(grid(num(a)?, num(b)?, num(step)?)?)
}

fn write_sweep_csv(mut w: impl Write, table: &SweepTable) -> anyhow::Result<()> {
    writeln!(w, "frequency,d_1,amplitude_pp,max_tail_angle_deg,u_a,beat_hz,saturated,steady_speed,strouhal,best")?;
    for (i, r) in table.rows.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.frequency,
            r.d_1,
            r.amplitude_pp,
            r.max_tail_angle_deg,
            r.u_a,
            r.beat_hz,
            r.saturated,
            r.steady_speed,
            r.strouhal,
            table.best == Some(i)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep(cli: &Cli, freqs: &str, d1: &[f64], template: &str) -> anyhow::Result<()> {
    let base = load_params(&cli.config)?;
    let freqs = parse_grid(freqs)?;
    let template = resolve_scenario(template, &base)?;
    let d1s: Vec<f64> = if d1.is_empty() {
        let k = base.mechanism.r_d * base.mechanism.d_tail;
        (0..7)
            .map(|i| 2.0 * k / (0.075 + 0.0125 * i as f64))
            .collect()
    } else {
        d1.to_vec()
    };
    let table = strouhal_sweep(&template, &freqs, &d1s)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    write_sweep_csv(create(&cli.out, "sweep.csv")?, &table)?;
    write_json(&cli.out, "sweep.json", &table)?;
    for s in &table.skipped {
        log::warn!(
            "skipped f = {} Hz, d_1 = {} m: {}",
            s.frequency,
            s.d_1,
            s.reason
        );
    }
    let best = table.best_row().context("every sweep point was skipped")?;
    println!(
        "{} points, {} skipped; fastest: f {} Hz, d_1 {:.4} m, A {:.4} m, U {:.3} m/s, St {:.3} -> {}",
        table.rows.len(),
        table.skipped.len(),
        best.frequency,
        best.d_1,
        best.amplitude_pp,
        best.steady_speed,
        best.strouhal,
        cli.out.join("sweep.csv").display()
    );
    Ok(())
}

fn cmd_metrics(cli: &Cli, path: &Path, scenario: Option<&str>) -> anyhow::Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let records = match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => telemetry::read_jsonl(BufReader::new(file))?,
        _ => telemetry::read_csv(BufReader::new(file))?,
    };
    let base = load_params(&cli.config)?;
    let (cfg, amplitude) = match scenario {
        Some(name) => {
            let s = resolve_scenario(name, &base)?;
            (
                s.metrics.clone(),
                s.params.mechanism.peak_to_peak_amplitude(),
            )
        }
        None => (
            MetricConfig::default(),
            base.mechanism.peak_to_peak_amplitude(),
        ),
    };
    let report: MetricReport = compute_metrics(&records, &cfg, Some(amplitude))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_serve(
    cli: &Cli,
    port: u16,
    host: IpAddr,
    rate: f64,
    timescale: f64,
    scenario: &str,
    paused: bool,
    ui: Option<PathBuf>,
) -> anyhow::Result<()> {
    let base = load_params(&cli.config)?;
    let mut cfg = ServeConfig::new(resolve_scenario(scenario, &base)?);
    cfg.addr = SocketAddr::new(host, port);
    cfg.rate = rate;
    cfg.timescale = timescale;
    cfg.start_paused = paused;
    cfg.ui_dir = ui;
    cfg.validate()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(yokefish_pilot::serve(cfg))?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Run {
            scenario,
            seed,
            decimation,
            format,
        } => cmd_run(cli, scenario, *seed, *decimation, *format),
        Command::Calibrate { targets } => cmd_calibrate(cli, targets),
        Command::Sweep {
            freqs,
            d1,
            scenario,
        } => cmd_sweep(cli, freqs, d1, scenario),
        Command::Metrics {
            telemetry,
            scenario,
        } => cmd_metrics(cli, telemetry, scenario.as_deref()),
        Command::Serve {
            port,
            host,
            rate,
            timescale,
            scenario,
            paused,
            ui,
        } => cmd_serve(
            cli,
            *port,
            *host,
            *rate,
            *timescale,
            scenario,
            *paused,
            ui.clone(),
        ),
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<CoreError>(),
            Some(CoreError::Config { .. })
        ) || matches!(
            cause.downcast_ref::<PilotError>(),
            Some(PilotError::Core(CoreError::Config { .. }) | PilotError::Config(_))
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
