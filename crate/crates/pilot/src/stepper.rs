//! Real-time stepping thread. Owns the simulator, drains one ordered command
//! queue before every control tick and broadcasts decimated frames.

use std::collections::VecDeque;
use std::sync::mpsc::{self, RecvTimeoutError, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tokio::sync::broadcast;
use yokefish_core::actuation::{ControlInput, CONTROL_PERIOD, CONTROL_RATE_HZ};
use yokefish_core::dynamics::{FishState, Simulator};

use crate::protocol::{ErrorCode, Frame, ServerMsg, PROTOCOL_VERSION};

/// Frames buffered per subscriber before a slow client starts losing them.
const FRAME_BUFFER: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    /// Applied at the first tick whose start time reaches `sim_t`, or at the
    /// next tick when `sim_t` is absent.
    Command {
        cmd: ControlInput,
        sim_t: Option<f64>,
    },
    Pause,
    Resume,
    Reset,
    Shutdown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    /// Frames per simulated second.
    pub rate: f64,
    /// Simulated seconds per wall second.
    pub timescale: f64,
    pub start_paused: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            rate: 30.0,
            timescale: 1.0,
            start_paused: false,
        }
    }
}

impl StepperConfig {
    /// Control ticks between frames.
    pub fn decimation(&self) -> u64 {
        ((CONTROL_RATE_HZ / self.rate).round() as u64).max(1)
    }
}

pub struct Stepper {
    tx: mpsc::Sender<Control>,
    frames: broadcast::Sender<Arc<str>>,
    latest: Arc<Mutex<Option<Frame>>>,
    join: Option<JoinHandle<()>>,
}

impl Stepper {
    pub fn spawn(sim: Simulator, initial: FishState, cfg: StepperConfig) -> Self {
        let (tx, rx) = mpsc::channel();
        let (frames, _) = broadcast::channel(FRAME_BUFFER);
        let latest = Arc::new(Mutex::new(None));
        let mut worker = Worker {
            sim,
            initial,
            cfg,
            rx,
            frames: frames.clone(),
            latest: latest.clone(),
            pending: VecDeque::new(),
            cmd: ControlInput::ZERO,
            resets: 0,
            paused: cfg.start_paused,
        };
        let join = thread::Builder::new()
            .name("yokefish-stepper".into())
            .spawn(move || worker.run())
            .expect("spawn stepper thread");
        Self {
            tx,
            frames,
            latest,
            join: Some(join),
        }
    }

    pub fn sender(&self) -> mpsc::Sender<Control> {
        self.tx.clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.frames.subscribe()
    }

    pub fn latest(&self) -> Option<Frame> {
        self.latest.lock().expect("frame lock").clone()
    }
}

impl Drop for Stepper {
    fn drop(&mut self) {
        let _ = self.tx.send(Control::Shutdown);
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

struct Worker {
    sim: Simulator,
    initial: FishState,
    cfg: StepperConfig,
    rx: mpsc::Receiver<Control>,
    frames: broadcast::Sender<Arc<str>>,
    latest: Arc<Mutex<Option<Frame>>>,
    pending: VecDeque<(Option<f64>, ControlInput)>,
    cmd: ControlInput,
    resets: u64,
    paused: bool,
}

impl Worker {
    fn run(&mut self) {
        let period = Duration::from_secs_f64(CONTROL_PERIOD / self.cfg.timescale);
        let every = self.cfg.decimation();
        self.publish_frame();
        let mut deadline = Instant::now();
        loop {
            // handle everything queued so far, blocking only while paused
            loop {
                let msg = if self.paused {
                    match self.rx.recv_timeout(Duration::from_millis(200)) {
                        Ok(m) => m,
                        Err(RecvTimeoutError::Timeout) => continue,
                        Err(RecvTimeoutError::Disconnected) => return,
                    }
                } else {
                    match self.rx.try_recv() {
                        Ok(m) => m,
                        Err(TryRecvError::Empty) => break,
                        Err(TryRecvError::Disconnected) => return,
                    }
                };
                let was_paused = self.paused;
                if !self.handle(msg) {
                    return;
                }
                if was_paused && !self.paused {
                    deadline = Instant::now();
                }
            }

            let now_t = self.sim.time();
            while let Some((at, _)) = self.pending.front() {
                if at.is_some_and(|s| s > now_t + 1e-9) {
                    break;
                }
                self.cmd = self.pending.pop_front().expect("front exists").1;
            }
            if let Err(e) = self.sim.tick(&self.cmd) {
                log::warn!("simulation halted at t = {now_t:.4}: {e}");
                self.broadcast(ServerMsg::error(ErrorCode::Simulation, e.to_string()).to_json());
                self.paused = true;
                self.publish_frame();
                continue;
            }
            if self.sim.ticks().is_multiple_of(every) {
                self.publish_frame();
            }

            // fixed deadlines: lateness is absorbed by running ticks back to back
            deadline += period;
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            }
        }
    }

    /// Returns false on shutdown.
    fn handle(&mut self, msg: Control) -> bool {
        match msg {
            Control::Command { cmd, sim_t } => self.pending.push_back((sim_t, cmd)),
            Control::Pause => {
                if !self.paused {
                    self.paused = true;
                    self.publish_frame();
                }
            }
            Control::Resume => self.paused = false,
            Control::Reset => {
                self.sim.reset(self.initial);
                self.pending.clear();
                self.cmd = ControlInput::ZERO;
                self.resets += 1;
                self.publish_frame();
            }
            Control::Shutdown => return false,
        }
        true
    }

    fn publish_frame(&mut self) {
        let frame = Frame::new(
            self.sim.ticks(),
            self.sim.time(),
            self.resets,
            self.sim.state(),
            &self.cmd,
            self.sim.last_derived(),
            &self.sim.params.mechanism,
            self.paused,
        );
        let text = ServerMsg::Frame {
            v: PROTOCOL_VERSION,
            frame: frame.clone(),
        }
        .to_json();
        *self.latest.lock().expect("frame lock") = Some(frame);
        self.broadcast(text);
    }

    fn broadcast(&self, text: String) {
        // no subscribers is fine; slow ones lag rather than block the loop
        let _ = self.frames.send(Arc::from(text));
    }
}
