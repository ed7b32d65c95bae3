//! Acceptance checks. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero if any fail.

use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use chicgrasp_cli::commands::{cmd_eval, cmd_gen_demos, cmd_train, EvalArgs, GenDemosArgs, TrainArgs};
use chicgrasp_cli::report::{TrialResult, TrialTable};
use chicgrasp_core::datasets::{compute_norm_stats, generate_demos, DemoSet, NormStats, WindowIndex};
use chicgrasp_core::policies::{make_noise_schedule, q_sample, window_batch, Algo, PolicyConfig, PolicyModel};
use chicgrasp_core::rng::{stream, trial_seed, Stream};
use chicgrasp_core::runtime::{detector_update, run_episode, ExpertSource, GraspDetector, DETECTOR_FRAMES};
use chicgrasp_core::sim::FailureStage;
use chicgrasp_core::types::{encode_action, threshold_jaws, Jaws, RawAction, Side};
use chicgrasp_core::{Config, Error};
use chicgrasp_nn::{gradcheck, NnError};
use rand::Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn small_demos() -> DemoSet {
    generate_demos(12, &[1, 2, 3], 17, &Config::default(), 0).unwrap().set
}

fn tiny(algo: Algo) -> PolicyConfig {
    let mut c = PolicyConfig::with_algo(algo);
    c.pred_horizon = 2;
    c.action_horizon = 1;
    c.encoder_hidden = vec![5];
    c.obs_embed = 4;
    c.diffusion.hidden = 6;
    c.diffusion.blocks = 1;
    c.diffusion.t_embed = 4;
    c.diffusion.n_diff = 10;
    c.diffusion.noise_draws = 2;
    c.lstm_gmm.hidden = 4;
    c.lstm_gmm.modes = 2;
    c.ibc.hidden = vec![6];
    c.ibc.n_neg = 3;
    c
}

fn gradients() -> Check {
    let start = Instant::now();
    let demos = small_demos();
    let norm = compute_norm_stats(&demos).unwrap();
    let mut worst: f64 = 0.0;
    for algo in Algo::ALL {
        let cfg = tiny(algo);
        let idx = WindowIndex::new(&demos, cfg.obs_horizon, cfg.pred_horizon).unwrap();
        for seed in 0..10 {
            let model = PolicyModel::new(cfg.clone(), norm.clone(), None, seed).unwrap();
            let windows = idx.sample(&demos, 2, &mut stream(seed, Stream::Training)).unwrap();
            let batch = window_batch(&windows, &norm, None).unwrap();
            let noise = model.draw_noise(batch.n, &mut stream(seed, Stream::Training));
            let err = gradcheck(
                |g, v| {
                    model
                        .loss(g, v, &batch, &noise)
                        .map(|(l, _)| l)
                        .map_err(|e| NnError::Contract(e.to_string()))
                },
                &model.params.to_tensors::<f64>(),
            )
            .map_err(|e| e.to_string())?;
            ensure(err < 1e-4, format!("{algo} seed {seed}: relative error {err:.2e}"))?;
            worst = worst.max(err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("3 losses x 10 seeds, worst relative error {worst:.2e}, {secs:.1}s"))
}

fn schedule_and_normalization() -> Check {
    let d = PolicyConfig::default().diffusion;
    let s = make_noise_schedule(d.n_diff, d.beta_min, d.beta_max).map_err(|e| e.to_string())?;
    ensure(s.alpha_bars.windows(2).all(|w| w[1] < w[0]), "alpha_bar not strictly decreasing")?;

    let mut rng = stream(3, Stream::Training);
    let mut worst: f64 = 0.0;
    for t in [1, d.n_diff / 4, d.n_diff / 2, d.n_diff] {
        let draws = 100_000;
        let xs: Vec<f64> = (0..draws)
            .map(|_| q_sample(&[0.4], t, &[rng.sample(StandardNormal)], &s).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let want = 1.0 - s.alpha_bar(t);
        let rel = (var - want).abs() / want;
        ensure(rel < 0.03, format!("t={t}: variance {var:.5} vs {want:.5}"))?;
        worst = worst.max(rel);
    }

    let demos = small_demos();
    let norm: NormStats = compute_norm_stats(&demos).unwrap();
    let mut max_err: f64 = 0.0;
    for f in demos.demos.iter().flat_map(|d| d.learnable()) {
        let a = encode_action(&f.action);
        let back = norm.act.denormalize(&norm.act.normalize(&a));
        max_err = a.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(max_err, f64::max);
    }
    let mut prng = stream(4, Stream::Training);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..norm.obs.dim()).map(|_| prng.random_range(-1.0..1.0)).collect();
        let back = norm.obs.denormalize(&norm.obs.normalize(&x));
        max_err = x.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(max_err, f64::max);
    }
    ensure(max_err < 1e-6, format!("round-trip error {max_err:.2e}"))?;
    Ok(format!(
        "alpha_bar decreasing over {} steps, worst variance error {:.2}%, round-trip error {max_err:.1e}",
        d.n_diff,
        worst * 100.0
    ))
}

fn expert_oracle() -> Check {
    let start = Instant::now();
    let cfg = Config::default();
    let src = ExpertSource::default();
    let n = 500;
    let (mut ok, mut staggered) = (0, 0);
    let first = |log: &chicgrasp_core::runtime::EpisodeLog, side: Side| {
        log.records.iter().find(|r| r.state.grasped[side.index()]).map(|r| r.tick)
    };
    for i in 0..n {
        let log = run_episode(&src, &cfg, (i % 3) as u8 + 1, trial_seed(11, i)).map_err(|e| e.to_string())?;
        if log.report.success {
            ok += 1;
            if matches!((first(&log, Side::R), first(&log, Side::L)), (Some(r), Some(l)) if r < l) {
                staggered += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{ok}/{n} successes, right-first in {staggered}/{ok}, {secs:.1}s");
    ensure(ok as f64 >= 0.95 * n as f64, detail.clone())?;
    ensure(staggered as f64 >= 0.99 * ok as f64, detail.clone())?;
    ensure(secs < 120.0, detail.clone())?;
    Ok(detail)
}

fn detector() -> Check {
    let k = DETECTOR_FRAMES as usize;
    let mut frames = [(false, false); 10];
    for code in 0u32..(1 << 20) {
        for (i, f) in frames.iter_mut().enumerate() {
            let pair = (code >> (2 * i)) & 3;
            *f = (pair & 1 == 1, pair & 2 == 2);
        }
        let mut det = GraspDetector::new();
        for i in 0..frames.len() {
            let (next, fired) = detector_update(det, Jaws::new(frames[i].0, frames[i].1));
            det = next;
            let want = i + 1 >= k && frames[i + 1 - k..=i].iter().all(|&(l, r)| l && r);
            ensure(fired == want, format!("sequence {code:#x}, frame {i}"))?;
        }
    }
    Ok("all 4^10 ten-frame sequences agree with enumeration".into())
}

fn jaw_threshold() -> Check {
    let mut rng = stream(9, Stream::Policy);
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let n = 1_000_000;
    for i in 0..n {
        let scale = [1e-6, 1e-2, 1.0, 10.0, 1e3][i % 5];
        let l: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
        let r: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
        let a = threshold_jaws(&RawAction { pos: [0.0; 3], logits: [l, r] }).map_err(|e| e.to_string())?;
        ensure(
            a.jaws.left == (sigmoid(l) > 0.5) && a.jaws.right == (sigmoid(r) > 0.5),
            format!("logits ({l}, {r}) gave {:?}", a.jaws.bits()),
        )?;
    }
    for z in [0.0, -0.0] {
        let a = threshold_jaws(&RawAction { pos: [0.0; 3], logits: [z, z] }).unwrap();
        ensure(a.jaws.bits() == [0, 0], "zero logit did not map to open")?;
    }
    Ok(format!("{n} random logit pairs match the sigmoid threshold; 0 maps to 0"))
}

fn serialization(dir: &Path) -> Check {
    let set = generate_demos(20, &[1, 2, 3], 4, &Config::default(), 1_700_000_000).unwrap().set;
    let mut bytes = Vec::new();
    set.write_jsonl(&mut bytes).unwrap();
    let back = DemoSet::read_jsonl(Cursor::new(&bytes)).map_err(|e| e.to_string())?;
    ensure(back == set, "demo set changed on round-trip")?;

    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let cut = format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..lines[2].len() / 2]);
    ensure(
        matches!(DemoSet::read_jsonl(Cursor::new(cut.as_bytes())), Err(Error::Parse { line: 3, .. })),
        "truncated demo file not reported at line 3",
    )?;
    let bumped = text.replacen("\"format_version\":", "\"format_version\":9", 1);
    ensure(
        matches!(DemoSet::read_jsonl(Cursor::new(bumped.as_bytes())), Err(Error::FormatVersion { .. })),
        "demo version mismatch not reported",
    )?;

    let norm = compute_norm_stats(&set).unwrap();
    for algo in Algo::ALL {
        let model = PolicyModel::new(PolicyConfig::with_algo(algo), norm.clone(), None, 5).unwrap();
        let path = dir.join(format!("roundtrip_{algo}.json"));
        model.save(&path).map_err(|e| e.to_string())?;
        let back = PolicyModel::load(&path).map_err(|e| e.to_string())?;
        ensure(
            back.params == model.params && back.config == model.config && back.norm == model.norm,
            format!("{algo} model changed on round-trip"),
        )?;
        let json = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &json[..json.len() / 2]).unwrap();
        ensure(
            matches!(PolicyModel::load(&path), Err(Error::Parse { .. })),
            format!("{algo}: truncated manifest not reported"),
        )?;
        std::fs::write(&path, json.replacen("\"format_version\": 1", "\"format_version\": 7", 1)).unwrap();
        ensure(
            matches!(PolicyModel::load(&path), Err(Error::FormatVersion { found: 7, .. })),
            format!("{algo}: model version mismatch not reported"),
        )?;
    }
    Ok("demo JSONL and model files round-trip exactly; truncation and version faults reported".into())
}

fn table_arithmetic() -> Check {
    let trials: Vec<TrialResult> = (0..101)
        .map(|i| TrialResult {
            index: i,
            exemplar: 1 + (i % 3) as u8,
            seed: i as u64,
            success: i < 41,
            failure_stage: if i < 41 { FailureStage::None } else { FailureStage::Grasp },
            cycle_seconds: 38.0,
        })
        .collect();
    let md = TrialTable::from_trials("DIFFUSION", &trials).to_markdown();
    ensure(md.contains("40.59%"), md.clone())?;
    Ok("41 / 60 / 101 prints 40.59%".into())
}

/// Trains all three algorithms on the same 200 demos with the fast profile
/// and evaluates them on the same 100 held-out placements. Returns the
/// diffusion model path for the determinism check.
fn reproduction(dir: &Path, diffusion: &mut Option<std::path::PathBuf>) -> Check {
    let start = Instant::now();
    let cfg = Config::default();
    let data = dir.join("demos200.jsonl");
    let gen = GenDemosArgs {
        n: 200,
        exemplars: vec![1, 2, 3],
        seed: 0,
        out: data.clone(),
    };
    cmd_gen_demos(&cfg, &gen).map_err(|e| e.to_string())?;
    let mut models = Vec::new();
    let mut train_secs = Vec::new();
    for algo in Algo::ALL {
        let out = dir.join(format!("{algo}.json"));
        let args = TrainArgs {
            algo,
            data: data.clone(),
            out: out.clone(),
            epochs: None,
            batch: None,
            lr: None,
            seed: Some(0),
            fast: true,
        };
        let o = cmd_train(&cfg, &args).map_err(|e| e.to_string())?;
        train_secs.push(format!("{algo} {:.0}s", o.elapsed.as_secs_f64()));
        if algo == Algo::Diffusion {
            *diffusion = Some(out.clone());
        }
        models.push(out);
    }
    // 100 episodes cycling through the three exemplars.
    let exemplars: Vec<u8> = (0..100).map(|i| (i % 3) as u8 + 1).collect();
    let eval = EvalArgs {
        models,
        episodes: 1,
        exemplars,
        seed: 1,
        report: Some(dir.join("reproduction")),
        expect_algo: None,
    };
    let o = cmd_eval(&cfg, &eval).map_err(|e| e.to_string())?;
    let rate = |algo: Algo| {
        let t = &o.trials.iter().find(|(a, _)| *a == algo).unwrap().1;
        100.0 * t.iter().filter(|r| r.success).count() as f64 / t.len() as f64
    };
    let (d, l, i) = (rate(Algo::Diffusion), rate(Algo::LstmGmm), rate(Algo::Ibc));
    let mins = start.elapsed().as_secs_f64() / 60.0;
    let detail = format!(
        "diffusion {d:.0}%, LSTM-GMM {l:.0}%, IBC {i:.0}% over 100 episodes; training {}; total {mins:.1} min",
        train_secs.join(", ")
    );
    ensure(d >= 70.0, detail.clone())?;
    ensure(d - l >= 20.0 && d - i >= 20.0, detail.clone())?;
    ensure(mins < 60.0, detail.clone())?;
    Ok(detail)
}

fn eval_determinism(dir: &Path, model: Option<std::path::PathBuf>) -> Check {
    let model = model.ok_or("no trained diffusion model")?;
    let cfg = Config::default();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let prefix = dir.join(format!("determinism_{run}"));
        let args = EvalArgs {
            models: vec![model.clone()],
            episodes: 4,
            exemplars: vec![1, 2, 3],
            seed: 7,
            report: Some(prefix.clone()),
            expect_algo: None,
        };
        cmd_eval(&cfg, &args).map_err(|e| e.to_string())?;
        let csv = std::fs::read(prefix.with_extension("csv")).unwrap();
        let md = std::fs::read(prefix.with_extension("md")).unwrap();
        reports.push((csv, md));
    }
    ensure(reports[0] == reports[1], "reports differ between runs")?;
    Ok("two cmd_eval runs with seed 7 wrote byte-identical CSV and Markdown".into())
}

fn run(name: &str, f: impl FnOnce() -> Check) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL  {name}: {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
    let dir = tempfile::tempdir().unwrap();
    let mut diffusion = None;
    let results = [
        run("gradient correctness", gradients),
        run("schedule and normalization invariants", schedule_and_normalization),
        run("plant and expert oracle", expert_oracle),
        run("detector conformance", detector),
        run("directional reproduction", || reproduction(dir.path(), &mut diffusion)),
        run("jaw threshold conformance", jaw_threshold),
        run("eval determinism", || eval_determinism(dir.path(), diffusion.take())),
        run("serialization", || serialization(dir.path())),
        run("table arithmetic", table_arithmetic),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
