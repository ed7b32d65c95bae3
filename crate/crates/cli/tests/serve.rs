use std::net::TcpStream;
use std::path::Path;
use std::thread;

use chicgrasp_cli::commands::{cmd_train, TrainArgs};
use chicgrasp_cli::serve::{ClientMsg, ServeOptions, ServerMsg, StateFrame, TeleopServer};
use chicgrasp_cli::CliError;
use chicgrasp_core::datasets::{replay_demo, scripted_expert, DemoSet, Source};
use chicgrasp_core::policies::Algo;
use chicgrasp_core::rng::{stream, Stream};
use chicgrasp_core::sim::{sample_carcass, Phase, SimState};
use chicgrasp_core::types::Jaws;
use chicgrasp_core::Config;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn start_server(data_dir: &Path, lockstep: bool) -> String {
    let opts = ServeOptions {
        lockstep,
        data_dir: data_dir.to_path_buf(),
    };
    let server = TeleopServer::bind("127.0.0.1:0", Config::default(), opts).unwrap();
    let addr = server.local_addr().unwrap();
    thread::spawn(move || server.run());
    format!("ws://{addr}")
}

fn connect(url: &str) -> Client {
    tungstenite::connect(url).unwrap().0
}

fn recv(ws: &mut Client) -> ServerMsg {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Close(_) => panic!("server closed the connection"),
            _ => {}
        }
    }
}

fn recv_state(ws: &mut Client) -> StateFrame {
    match recv(ws) {
        ServerMsg::State(s) => s,
        other => panic!("expected state, got {other:?}"),
    }
}

fn send(ws: &mut Client, msg: &ClientMsg) {
    ws.send(Message::text(serde_json::to_string(msg).unwrap())).unwrap();
}

fn hold() -> ClientMsg {
    ClientMsg::Cmd {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
        jaw_l: None,
        jaw_r: None,
    }
}

/// Drive one episode with the scripted expert, seeing only what the state
/// frames carry. A closed jaw is taken to be holding its leg.
fn drive_expert(ws: &mut Client, cfg: &Config, exemplar: u8, seed: u64) -> StateFrame {
    send(ws, &ClientMsg::StartDemo { exemplar, seed });
    let mut frame = recv_state(ws);
    assert_eq!(frame.tick, 0);
    let spec = sample_carcass(exemplar, &cfg.exemplars, &cfg.placement, &mut stream(seed, Stream::Placement)).unwrap();
    let mut erng = stream(seed, Stream::Expert);
    let mut view = SimState::new(&spec, &cfg.sim);
    while !frame.phase.is_terminal() && frame.tick < cfg.runtime.max_ticks {
        view.ee = frame.ee;
        view.jaw_state = Jaws::new(frame.jaws[0] == 1, frame.jaws[1] == 1);
        view.grasped = [view.jaw_state.left, view.jaw_state.right];
        view.legs = [0, 1].map(|i| [frame.legs[i][0], frame.legs[i][1], frame.carcass_z]);
        view.carcass_z = frame.carcass_z;
        view.phase = frame.phase;
        view.tick = frame.tick;
        let a = scripted_expert(&view, &spec, &cfg.sim, &cfg.expert, &mut erng).unwrap();
        let [gl, gr] = a.jaws.bits();
        send(
            ws,
            &ClientMsg::Cmd {
                dx: a.pos[0] - frame.ee[0],
                dy: a.pos[1] - frame.ee[1],
                dz: a.pos[2] - frame.ee[2],
                jaw_l: Some(gl),
                jaw_r: Some(gr),
            },
        );
        let next = recv_state(ws);
        assert_eq!(next.tick, frame.tick + 1);
        frame = next;
    }
    frame
}

#[test]
fn expert_driver_records_a_trainable_demo() {
    let dir = tempfile::tempdir().unwrap();
    let url = start_server(dir.path(), true);
    let cfg = Config::default();
    let mut ws = connect(&url);
    let first = recv_state(&mut ws);
    assert_eq!(first.phase, Phase::Approach);

    let last = drive_expert(&mut ws, &cfg, 2, 77);
    assert_eq!(last.phase, Phase::Rehung);
    send(
        &mut ws,
        &ClientMsg::EndDemo {
            save: true,
            path: Some("teleop.jsonl".into()),
        },
    );
    assert_eq!(recv(&mut ws), ServerMsg::Saved { count: 1 });

    // A second recording appends to the same file.
    drive_expert(&mut ws, &cfg, 1, 78);
    send(
        &mut ws,
        &ClientMsg::EndDemo {
            save: true,
            path: Some("teleop.jsonl".into()),
        },
    );
    assert_eq!(recv(&mut ws), ServerMsg::Saved { count: 2 });

    let file = dir.path().join("teleop.jsonl");
    let set = DemoSet::load_jsonl(&file).unwrap();
    let demo = &set.demos[0];
    assert_eq!(demo.meta.source, Source::Teleop);
    assert_eq!(demo.meta.seed, 77);
    let states = replay_demo(demo, &cfg, demo.meta.seed);
    assert_eq!(states.last().unwrap().phase, Phase::Rehung);
    assert!(!demo.learnable().is_empty());

    let args = TrainArgs {
        algo: Algo::LstmGmm,
        data: file,
        out: dir.path().join("teleop_model.json"),
        epochs: Some(2),
        batch: None,
        lr: None,
        seed: None,
        fast: false,
    };
    assert_eq!(cmd_train(&cfg, &args).unwrap().history.len(), 2);
}

#[test]
fn malformed_frames_get_errors_and_the_connection_survives() {
    let dir = tempfile::tempdir().unwrap();
    let url = start_server(dir.path(), true);
    let mut ws = connect(&url);
    recv_state(&mut ws);
    for bad in [
        "not json",
        r#"{"type":"warp"}"#,
        r#"{"type":"cmd","dx":"left"}"#,
        r#"{"type":"cmd","dx":0,"dy":0,"dz":0,"jawL":3}"#,
        r#"{"type":"start_demo","exemplar":9,"seed":1}"#,
        r#"{"type":"end_demo","save":true,"path":"x.jsonl"}"#,
    ] {
        ws.send(Message::text(bad)).unwrap();
        assert!(matches!(recv(&mut ws), ServerMsg::Error { .. }), "{bad}");
    }
    ws.send(Message::binary(vec![1u8, 2, 3])).unwrap();
    assert!(matches!(recv(&mut ws), ServerMsg::Error { .. }));

    send(&mut ws, &ClientMsg::StartDemo { exemplar: 1, seed: 3 });
    recv_state(&mut ws);
    send(
        &mut ws,
        &ClientMsg::EndDemo {
            save: true,
            path: Some("../escape.jsonl".into()),
        },
    );
    assert!(matches!(recv(&mut ws), ServerMsg::Error { .. }));

    send(&mut ws, &hold());
    assert_eq!(recv_state(&mut ws).tick, 1);
}

#[test]
fn clients_get_independent_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let url = start_server(dir.path(), true);
    let mut a = connect(&url);
    let mut b = connect(&url);
    recv_state(&mut a);
    recv_state(&mut b);
    send(&mut a, &ClientMsg::StartDemo { exemplar: 1, seed: 10 });
    send(&mut b, &ClientMsg::StartDemo { exemplar: 3, seed: 11 });
    let sa = recv_state(&mut a);
    let sb = recv_state(&mut b);
    assert_ne!(sa.legs, sb.legs);

    let down = ClientMsg::Cmd {
        dx: 0.0,
        dy: 0.0,
        dz: -0.05,
        jaw_l: Some(1),
        jaw_r: None,
    };
    let mut last_a = sa.clone();
    for _ in 0..5 {
        send(&mut a, &down);
        last_a = recv_state(&mut a);
    }
    send(&mut b, &hold());
    let sb2 = recv_state(&mut b);
    assert_eq!(sb2.tick, 1);
    assert_eq!(sb2.ee, sb.ee);
    assert_eq!(sb2.jaws, [0, 0]);
    assert_eq!(sb2.legs, sb.legs);

    // Same start on a fresh connection reproduces a's trajectory exactly.
    let mut c = connect(&url);
    recv_state(&mut c);
    send(&mut c, &ClientMsg::StartDemo { exemplar: 1, seed: 10 });
    assert_eq!(recv_state(&mut c), sa);
    let mut last_c = sa.clone();
    for _ in 0..5 {
        send(&mut c, &down);
        last_c = recv_state(&mut c);
    }
    assert_eq!(last_c, last_a);
    assert!(last_c.ee[2] < sa.ee[2]);
}

#[test]
fn realtime_mode_streams_at_the_tick_rate() {
    let dir = tempfile::tempdir().unwrap();
    let url = start_server(dir.path(), false);
    let mut ws = connect(&url);
    let t0 = std::time::Instant::now();
    let first = recv_state(&mut ws);
    let mut last = first.clone();
    for _ in 0..5 {
        last = recv_state(&mut ws);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert_eq!(last.tick, first.tick + 5);
    // Five ticks at 10 Hz.
    assert!(elapsed > 0.35 && elapsed < 2.0, "{elapsed}");
    send(&mut ws, &hold());
    // Commands do not produce an immediate extra frame; ticks keep coming.
    assert_eq!(recv_state(&mut ws).tick, last.tick + 1);
}

#[test]
fn busy_port_is_an_io_error() {
    let first = TeleopServer::bind("127.0.0.1:0", Config::default(), ServeOptions::default()).unwrap();
    let addr = first.local_addr().unwrap().to_string();
    let second = TeleopServer::bind(&addr, Config::default(), ServeOptions::default());
    assert!(matches!(second, Err(CliError::Io { .. })));
    drop(first);
}
