//! Websocket teleoperation server. Every connection owns its own simulated
//! episode; the client steers the end-effector with position deltas and jaw
//! bits, and can record the episode as a demonstration.
//!
//! Frames are JSON text. Client to server:
//! `{"type":"cmd","dx":..,"dy":..,"dz":..,"jawL":0|1|null,"jawR":0|1|null}`,
//! `{"type":"start_demo","exemplar":n,"seed":n}` and
//! `{"type":"end_demo","save":bool,"path":".."}`. Server to client:
//! `state` frames at the tick rate, `saved` after `end_demo`, and `error`
//! for anything it cannot act on. A bad frame never closes the connection.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chicgrasp_core::datasets::{demo_from_episode, DemoSet, Source};
use chicgrasp_core::rng::{stream, Stream};
use chicgrasp_core::runtime::Episode;
use chicgrasp_core::sim::{sample_carcass, Phase};
use chicgrasp_core::types::{Action, Jaws};
use chicgrasp_core::Config;
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::commands::created_at;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Cmd {
        dx: f64,
        dy: f64,
        dz: f64,
        #[serde(rename = "jawL", default)]
        jaw_l: Option<u8>,
        #[serde(rename = "jawR", default)]
        jaw_r: Option<u8>,
    },
    StartDemo {
        exemplar: u8,
        seed: u64,
    },
    EndDemo {
        save: bool,
        #[serde(default)]
        path: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub tick: u64,
    pub ee: [f64; 3],
    pub jaws: [u8; 2],
    pub legs: [[f64; 2]; 2],
    pub carcass_z: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    State(StateFrame),
    /// Demos now in the target file; 0 when the recording was discarded.
    Saved {
        count: usize,
    },
    Error {
        msg: String,
    },
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Advance exactly one tick per `cmd` frame instead of on a timer.
    /// Meant for scripted clients and tests.
    pub lockstep: bool,
    /// `end_demo` paths are resolved under this directory.
    pub data_dir: PathBuf,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            lockstep: false,
            data_dir: PathBuf::from("."),
        }
    }
}

/// One client's simulation.
pub struct Session {
    cfg: Arc<Config>,
    exemplar: u8,
    seed: u64,
    episode: Episode,
    target: [f64; 3],
    jaws: Jaws,
    recording: bool,
}

impl Session {
    /// An idle (not recording) session on the first configured exemplar.
    pub fn new(cfg: Arc<Config>) -> Result<Self> {
        let exemplar = cfg.exemplar_ids()[0];
        let episode = new_episode(&cfg, exemplar, 0)?;
        let target = episode.state().ee;
        Ok(Self {
            cfg,
            exemplar,
            seed: 0,
            episode,
            target,
            jaws: Jaws::OPEN,
            recording: false,
        })
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    pub fn state_frame(&self) -> StateFrame {
        let s = self.episode.state();
        StateFrame {
            tick: s.tick,
            ee: s.ee,
            jaws: s.jaw_state.bits(),
            legs: s.legs.map(|l| [l[0], l[1]]),
            carcass_z: s.carcass_z,
            phase: s.phase,
        }
    }

    fn start(&mut self, exemplar: u8, seed: u64) -> Result<()> {
        self.episode = new_episode(&self.cfg, exemplar, seed)?;
        self.exemplar = exemplar;
        self.seed = seed;
        self.target = self.episode.state().ee;
        self.jaws = Jaws::OPEN;
        self.recording = true;
        Ok(())
    }

    /// Set the target for the next tick.
    fn command(&mut self, d: [f64; 3], jaw_l: Option<u8>, jaw_r: Option<u8>) -> Result<()> {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Arg("cmd deltas must be finite".into()));
        }
        let bit = |b: Option<u8>, cur: bool| match b {
            None => Ok(cur),
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            Some(v) => Err(CliError::Arg(format!("jaw bit must be 0, 1 or null, got {v}"))),
        };
        let left = bit(jaw_l, self.jaws.left)?;
        let right = bit(jaw_r, self.jaws.right)?;
        let ee = self.episode.state().ee;
        self.target = self.cfg.sim.bounds.clamp([ee[0] + d[0], ee[1] + d[1], ee[2] + d[2]]);
        self.jaws = Jaws::new(left, right);
        Ok(())
    }

    /// Advance one tick unless the episode is over. Once the grasp detector
    /// has fired the scripted rehang drives and commands are ignored.
    pub fn tick(&mut self) -> Result<()> {
        if !self.episode.is_done() {
            self.episode.step(Some(Action::new(self.target, self.jaws)))?;
        }
        Ok(())
    }

    fn end(&mut self, save: bool, path: Option<&str>, data_dir: &Path, file_lock: &Mutex<()>) -> Result<usize> {
        if !self.recording {
            return Err(CliError::Arg("end_demo without start_demo".into()));
        }
        let target = if save {
            let p = path.ok_or_else(|| CliError::Arg("end_demo with save needs a path".into()))?;
            Some(resolve_demo_path(data_dir, p)?)
        } else {
            None
        };
        let fresh = new_episode(&self.cfg, self.exemplar, self.seed)?;
        let episode = std::mem::replace(&mut self.episode, fresh);
        self.target = self.episode.state().ee;
        self.jaws = Jaws::OPEN;
        self.recording = false;
        let Some(target) = target else {
            return Ok(0);
        };
        let log = episode.finish(false)?;
        if log.records.is_empty() {
            return Err(CliError::Arg("recording has no frames".into()));
        }
        // Operator frames are marked LEARNED and stay learnable.
        let demo = demo_from_episode(&log, Source::Teleop, self.cfg.sim.tick_rate, created_at());
        let _guard = file_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut set = if target.exists() {
            DemoSet::load_jsonl(&target)?
        } else {
            DemoSet::default()
        };
        set.demos.push(demo);
        set.save_jsonl(&target)?;
        Ok(set.len())
    }

    /// Handle one text frame and return the replies. In lockstep mode a
    /// `cmd` also advances the episode one tick.
    fn handle(
        &mut self,
        text: &str,
        lockstep: bool,
        data_dir: &Path,
        file_lock: &Mutex<()>,
    ) -> Vec<ServerMsg> {
        let msg: ClientMsg = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => return vec![error_msg(format!("malformed frame: {e}"))],
        };
        let result = match msg {
            ClientMsg::Cmd {
                dx,
                dy,
                dz,
                jaw_l,
                jaw_r,
            } => self.command([dx, dy, dz], jaw_l, jaw_r).and_then(|()| {
                if lockstep {
                    self.tick()?;
                    Ok(vec![ServerMsg::State(self.state_frame())])
                } else {
                    Ok(Vec::new())
                }
            }),
            ClientMsg::StartDemo { exemplar, seed } => self
                .start(exemplar, seed)
                .map(|()| vec![ServerMsg::State(self.state_frame())]),
            ClientMsg::EndDemo { save, path } => self
                .end(save, path.as_deref(), data_dir, file_lock)
                .map(|count| vec![ServerMsg::Saved { count }]),
        };
        result.unwrap_or_else(|e| vec![error_msg(e.to_string())])
    }
}

fn new_episode(cfg: &Config, exemplar: u8, seed: u64) -> Result<Episode> {
    let spec = sample_carcass(exemplar, &cfg.exemplars, &cfg.placement, &mut stream(seed, Stream::Placement))?;
    Ok(Episode::new(cfg, &spec, seed))
}

fn error_msg(msg: String) -> ServerMsg {
    ServerMsg::Error { msg }
}

/// Only plain relative paths, so a client cannot write outside `data_dir`.
fn resolve_demo_path(data_dir: &Path, path: &str) -> Result<PathBuf> {
    let p = Path::new(path);
    let plain = !path.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if !plain {
        return Err(CliError::Arg(format!("demo path must be relative without `..`: {path:?}")));
    }
    Ok(data_dir.join(p))
}

pub struct TeleopServer {
    listener: TcpListener,
    cfg: Arc<Config>,
    opts: Arc<ServeOptions>,
    file_lock: Arc<Mutex<()>>,
}

impl TeleopServer {
    pub fn bind(addr: &str, cfg: Config, opts: ServeOptions) -> Result<Self> {
        let listener = TcpListener::bind(addr).map_err(|e| CliError::io(addr, e))?;
        Ok(Self {
            listener,
            cfg: Arc::new(cfg),
            opts: Arc::new(opts),
            file_lock: Arc::new(Mutex::new(())),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener.local_addr().map_err(|e| CliError::io("listener", e))
    }

    /// Accept connections forever, one thread per client.
    pub fn run(self) -> Result<()> {
        for conn in self.listener.incoming() {
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let (cfg, opts, lock) = (self.cfg.clone(), self.opts.clone(), self.file_lock.clone());
            thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                match serve_client(stream, cfg, &opts, &lock) {
                    Ok(()) => log::info!("client {peer} disconnected"),
                    Err(e) => log::warn!("client {peer}: {e}"),
                }
            });
        }
        Ok(())
    }
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &ServerMsg) -> Result<()> {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    ws.send(Message::text(text))?;
    Ok(())
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn serve_client(stream: TcpStream, cfg: Arc<Config>, opts: &ServeOptions, lock: &Mutex<()>) -> Result<()> {
    stream.set_nodelay(true).ok();
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => CliError::from(e),
        tungstenite::HandshakeError::Interrupted(_) => CliError::Arg("handshake interrupted".into()),
    })?;
    let period = Duration::from_secs_f64(1.0 / cfg.sim.tick_rate);
    let mut session = Session::new(cfg)?;
    send(&mut ws, &ServerMsg::State(session.state_frame()))?;
    let mut deadline = Instant::now() + period;
    loop {
        if !opts.lockstep {
            let now = Instant::now();
            if now >= deadline {
                session.tick()?;
                send(&mut ws, &ServerMsg::State(session.state_frame()))?;
                deadline += period;
                // Fall behind gracefully instead of bursting to catch up.
                if deadline < now {
                    deadline = now + period;
                }
                continue;
            }
            ws.get_mut().set_read_timeout(Some(deadline - now)).ok();
        }
        let msg = match ws.read() {
            Ok(m) => m,
            Err(e) if is_timeout(&e) => continue,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let replies = match msg {
            Message::Text(t) => session.handle(t.as_str(), opts.lockstep, &opts.data_dir, lock),
            Message::Binary(_) => vec![error_msg("binary frames are not supported".into())],
            Message::Close(_) => return Ok(()),
            _ => Vec::new(),
        };
        for r in &replies {
            send(&mut ws, r)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_shapes() {
        let cmd: ClientMsg =
            serde_json::from_str(r#"{"type":"cmd","dx":0.01,"dy":0,"dz":-0.02,"jawL":1,"jawR":null}"#).unwrap();
        assert_eq!(
            cmd,
            ClientMsg::Cmd {
                dx: 0.01,
                dy: 0.0,
                dz: -0.02,
                jaw_l: Some(1),
                jaw_r: None
            }
        );
        let saved = serde_json::to_string(&ServerMsg::Saved { count: 3 }).unwrap();
        assert_eq!(saved, r#"{"type":"saved","count":3}"#);
        let session = Session::new(Arc::new(Config::default())).unwrap();
        let v: serde_json::Value = serde_json::to_value(ServerMsg::State(session.state_frame())).unwrap();
        assert_eq!(v["type"], "state");
        assert_eq!(v["phase"], "APPROACH");
        assert_eq!(v["jaws"], serde_json::json!([0, 0]));
        assert_eq!(v["legs"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn demo_paths_stay_under_data_dir() {
        let d = Path::new("/data");
        assert_eq!(resolve_demo_path(d, "a/b.jsonl").unwrap(), Path::new("/data/a/b.jsonl"));
        assert!(resolve_demo_path(d, "../x.jsonl").is_err());
        assert!(resolve_demo_path(d, "/etc/x").is_err());
        assert!(resolve_demo_path(d, "").is_err());
    }

    #[test]
    fn bad_jaw_bit_leaves_session_unchanged() {
        let lock = Mutex::new(());
        let mut s = Session::new(Arc::new(Config::default())).unwrap();
        let before = s.state_frame();
        let r = s.handle(r#"{"type":"cmd","dx":0,"dy":0,"dz":0,"jawL":2}"#, true, Path::new("."), &lock);
        assert!(matches!(&r[..], [ServerMsg::Error { .. }]));
        assert_eq!(s.state_frame(), before);
        let r = s.handle(r#"{"type":"end_demo","save":false}"#, true, Path::new("."), &lock);
        assert!(matches!(&r[..], [ServerMsg::Error { .. }]));
    }
}
