use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::{broadcast, oneshot};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;
use yokefish_core::actuation::ControlInput;
use yokefish_core::dynamics::{SimParams, Simulator};
use yokefish_core::harness::bundled;
use yokefish_core::harness::scenario::{Scenario, Trace};

use crate::protocol::{ClientMsg, ErrorCode, Role, ServerMsg, PROTOCOL_VERSION, STALE_MS};
use crate::stepper::{Control, Stepper, StepperConfig};
use crate::{PilotError, Result};

const INDEX_HTML: &str = include_str!("index.html");

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Frames per simulated second, 20 to 400.
    pub rate: f64,
    /// Simulated seconds per wall second.
    pub timescale: f64,
    /// Supplies the initial conditions and parameters. Its trace is ignored.
    pub scenario: Scenario,
    /// Hold the simulation at t = 0 until a client sends `resume`.
    pub start_paused: bool,
    /// Static UI bundle served at `/`; a placeholder page otherwise.
    pub ui_dir: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            rate: 30.0,
            timescale: 1.0,
            scenario,
            start_paused: false,
            ui_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(20.0..=400.0).contains(&self.rate) {
            return Err(PilotError::Config(format!(
                "frame rate {} Hz outside [20, 400]",
                self.rate
            )));
        }
        if !(self.timescale > 0.0 && self.timescale <= 1000.0) {
            return Err(PilotError::Config(format!(
                "timescale {} outside (0, 1000]",
                self.timescale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
struct ScenarioInfo {
    name: String,
    description: String,
    duration: f64,
    live: bool,
}

struct AppState {
    stepper: Stepper,
    commands: mpsc::Sender<Control>,
    pilot_taken: AtomicBool,
    clients: AtomicUsize,
    rate: f64,
    timescale: f64,
    scenario: String,
    scenarios: Vec<ScenarioInfo>,
}

/// A server bound to a socket; dropping it without [`RunningServer::shutdown`]
/// leaves the HTTP task running until the runtime stops.
pub struct RunningServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub async fn shutdown(mut self) -> Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.task
            .await
            .map_err(|e| PilotError::Config(e.to_string()))??;
        Ok(())
    }

    /// Wait until the server stops on its own.
    pub async fn wait(self) -> Result<()> {
        self.task
            .await
            .map_err(|e| PilotError::Config(e.to_string()))??;
        Ok(())
    }
}

fn bundled_scenarios() -> Vec<ScenarioInfo> {
    let base = SimParams::default();
    bundled::scenario_names()
        .filter_map(|name| bundled::scenario(name, &base).ok())
        .map(|s| ScenarioInfo {
            live: matches!(s.trace, Trace::Pilot),
            name: s.name,
            description: s.description,
            duration: s.duration,
        })
        .collect()
}

/// Bind, start the stepping thread and serve until shut down.
pub async fn start(cfg: ServeConfig) -> Result<RunningServer> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let sim = Simulator::new(sc.params, sc.initial)?;
    let stepper = Stepper::spawn(
        sim,
        sc.initial,
        StepperConfig {
            rate: cfg.rate,
            timescale: cfg.timescale,
            start_paused: cfg.start_paused,
        },
    );
    let state = Arc::new(AppState {
        commands: stepper.sender(),
        stepper,
        pilot_taken: AtomicBool::new(false),
        clients: AtomicUsize::new(0),
        rate: cfg.rate,
        timescale: cfg.timescale,
        scenario: sc.name.clone(),
        scenarios: bundled_scenarios(),
    });

    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .route("/scenarios", get(scenarios))
        .route("/ws", get(ws_upgrade));
    app = match &cfg.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(INDEX_HTML) })),
    };
    let app = app.with_state(state);

    let listener = tokio::net::TcpListener::bind(cfg.addr).await?;
    let addr = listener.local_addr()?;
    log::info!(
        "pilot bridge on http://{addr} ({} Hz frames, x{} time)",
        cfg.rate,
        cfg.timescale
    );
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(RunningServer {
        addr,
        stop: Some(stop),
        task,
    })
}

/// Serve until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    let server = start(cfg).await?;
    tokio::signal::ctrl_c().await?;
    log::info!("shutting down");
    server.shutdown().await
}

async fn healthz(State(st): State<Arc<AppState>>) -> impl IntoResponse {
    let f = st.stepper.latest();
    Json(serde_json::json!({
        "v": PROTOCOL_VERSION,
        "status": "ok",
        "scenario": st.scenario,
        "t": f.as_ref().map_or(0.0, |f| f.t),
        "paused": f.as_ref().is_some_and(|f| f.paused),
        "clients": st.clients.load(Ordering::Relaxed),
    }))
}

async fn scenarios(State(st): State<Arc<AppState>>) -> impl IntoResponse {
    Json(st.scenarios.clone())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(st): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| session(socket, st))
}

/// Frees the pilot seat when the pilot's connection ends, however it ends.
struct Seat<'a> {
    st: &'a AppState,
    role: Role,
}

impl Drop for Seat<'_> {
    fn drop(&mut self) {
        if self.role == Role::Pilot {
            self.st.pilot_taken.store(false, Ordering::SeqCst);
        }
        self.st.clients.fetch_sub(1, Ordering::Relaxed);
    }
}

async fn send(socket: &mut WebSocket, msg: &ServerMsg) -> bool {
    socket
        .send(Message::Text(msg.to_json().into()))
        .await
        .is_ok()
}

async fn session(mut socket: WebSocket, st: Arc<AppState>) {
    let role = if st
        .pilot_taken
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_ok()
    {
        Role::Pilot
    } else {
        Role::Spectator
    };
    st.clients.fetch_add(1, Ordering::Relaxed);
    let _seat = Seat { st: &st, role };
    log::info!("client connected as {role:?}");

    let mut frames = st.stepper.subscribe();
    let hello = ServerMsg::Hello {
        v: PROTOCOL_VERSION,
        role,
        rate: st.rate,
        timescale: st.timescale,
        scenario: st.scenario.clone(),
    };
    if !send(&mut socket, &hello).await {
        return;
    }
    if let Some(frame) = st.stepper.latest() {
        let msg = ServerMsg::Frame {
            v: PROTOCOL_VERSION,
            frame,
        };
        if !send(&mut socket, &msg).await {
            return;
        }
    }

    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let reply = match incoming {
                    None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                    Some(Ok(Message::Text(text))) => handle_text(&st, role, text.as_str()),
                    Some(Ok(Message::Binary(_))) => {
                        Some(ServerMsg::error(ErrorCode::Malformed, "binary messages are not accepted"))
                    }
                    Some(Ok(_)) => None,
                };
                if let Some(reply) = reply {
                    if !send(&mut socket, &reply).await {
                        break;
                    }
                }
            }
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::debug!("client lagging, dropped {n} frames"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    log::info!("{role:?} disconnected");
}

fn now_ms() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64() * 1e3)
}

/// Validate one client message and forward it; returns the error frame to
/// send back, if any.
fn handle_text(st: &AppState, role: Role, text: &str) -> Option<ServerMsg> {
    let msg: ClientMsg = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return Some(ServerMsg::error(ErrorCode::Malformed, e.to_string())),
    };
    if msg.version() != PROTOCOL_VERSION {
        return Some(ServerMsg::error(
            ErrorCode::Version,
            format!(
                "protocol version {} is not supported, expected {PROTOCOL_VERSION}",
                msg.version()
            ),
        ));
    }
    if role == Role::Spectator {
        return Some(ServerMsg::error(
            ErrorCode::Spectator,
            "spectator connections are read-only",
        ));
    }
    let control = match msg {
        ClientMsg::Cmd {
            u_a,
            u_s,
            u_r,
            u_p,
            ts,
            sim_t,
            ..
        } => {
            if let Some(ts) = ts {
                let age = now_ms() - ts;
                if age > STALE_MS {
                    return Some(ServerMsg::error(
                        ErrorCode::Stale,
                        format!("command is {age:.0} ms old, limit {STALE_MS} ms"),
                    ));
                }
            }
            if sim_t.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
                return Some(ServerMsg::error(
                    ErrorCode::Malformed,
                    "sim_t must be a finite time >= 0",
                ));
            }
            match ControlInput::new(u_a, u_s, u_r, u_p) {
                Ok(cmd) => Control::Command { cmd, sim_t },
                Err(e) => return Some(ServerMsg::error(ErrorCode::Range, e.to_string())),
            }
        }
        ClientMsg::Pause { .. } => Control::Pause,
        ClientMsg::Resume { .. } => Control::Resume,
        ClientMsg::Reset { .. } => Control::Reset,
    };
    match st.commands.send(control) {
        Ok(()) => None,
        Err(_) => Some(ServerMsg::error(
            ErrorCode::Simulation,
            "simulation thread has stopped",
        )),
    }
}
