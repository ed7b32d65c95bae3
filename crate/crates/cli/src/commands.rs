//! The batch subcommands. Each takes a validated argument struct and the
//! loaded [`Config`], does its work and returns a summary the binary prints.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use chicgrasp_core::datasets::{generate_demos, replay_demo, DemoSet};
use chicgrasp_core::policies::{train_policy, Algo, EpochStats, PolicyModel};
use chicgrasp_core::rng::{stream, trial_seed, Stream};
use chicgrasp_core::runtime::run_episode;
use chicgrasp_core::sim::{check_success, sample_carcass, Phase, SimState, SuccessReport};
use chicgrasp_core::Config;
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::plot::trajectory_svg;
use crate::report::{TrialResult, TrialTable};

/// Unix seconds for demo metadata. `SOURCE_DATE_EPOCH` pins it so that
/// generated files are reproducible.
pub fn created_at() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return v;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn check_exemplars(cfg: &Config, exemplars: &[u8]) -> Result<()> {
    if exemplars.is_empty() {
        return Err(CliError::Arg("exemplar list is empty".into()));
    }
    let known = cfg.exemplar_ids();
    match exemplars.iter().find(|id| !known.contains(id)) {
        Some(id) => Err(CliError::Arg(format!("unknown exemplar {id}; configured: {known:?}"))),
        None => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct GenDemosArgs {
    pub n: usize,
    pub exemplars: Vec<u8>,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct GenDemosOutcome {
    pub written: usize,
    pub attempts: usize,
    pub retention: f64,
}

pub fn cmd_gen_demos(cfg: &Config, args: &GenDemosArgs) -> Result<GenDemosOutcome> {
    if args.n == 0 {
        return Err(CliError::Arg("n must be at least 1".into()));
    }
    check_exemplars(cfg, &args.exemplars)?;
    let summary = generate_demos(args.n, &args.exemplars, args.seed, cfg, created_at())?;
    summary.set.save_jsonl(&args.out)?;
    Ok(GenDemosOutcome {
        written: summary.set.len(),
        attempts: summary.attempts,
        retention: summary.retention(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub algo: Algo,
    pub data: PathBuf,
    pub out: PathBuf,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    /// 30 epochs unless `epochs` says otherwise.
    pub fast: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochStats>,
    pub loss_csv: PathBuf,
    pub elapsed: Duration,
}

/// `model.json` → `model.loss.csv`.
pub fn loss_csv_path(model: &Path) -> PathBuf {
    model.with_extension("loss.csv")
}

pub fn cmd_train(cfg: &Config, args: &TrainArgs) -> Result<TrainOutcome> {
    let mut pcfg = cfg.policy.clone();
    pcfg.algo = args.algo;
    let mut tcfg = cfg.train.clone();
    if args.fast {
        tcfg.epochs = chicgrasp_core::policies::TrainConfig::fast().epochs;
    }
    if let Some(e) = args.epochs {
        tcfg.epochs = e;
    }
    if args.batch.is_some() {
        tcfg.batch = args.batch;
    }
    if let Some(lr) = args.lr {
        tcfg.lr = lr;
    }
    if let Some(s) = args.seed {
        tcfg.seed = s;
    }
    pcfg.validate()?;
    tcfg.validate()?;

    let set = DemoSet::load_jsonl(&args.data)?;
    let csv_path = loss_csv_path(&args.out);
    let mut csv = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    writeln!(csv, "epoch,loss,lr,clamped").map_err(|e| CliError::io(&csv_path, e))?;
    let mut csv_err = None;
    let start = Instant::now();
    let (model, history) = train_policy(&set, &pcfg, &tcfg, &cfg.sim, |s| {
        log::info!("epoch {:>4}  loss {:.5}  lr {:.2e}", s.epoch, s.loss, s.lr);
        if let Err(e) = writeln!(csv, "{},{},{},{}", s.epoch, s.loss, s.lr, s.clamped) {
            csv_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = csv_err {
        return Err(CliError::io(&csv_path, e));
    }
    model.save(&args.out)?;
    Ok(TrainOutcome {
        history,
        loss_csv: csv_path,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub models: Vec<PathBuf>,
    /// Episodes per exemplar.
    pub episodes: usize,
    pub exemplars: Vec<u8>,
    pub seed: u64,
    /// Writes `<report>.csv` and `<report>.md` when set.
    pub report: Option<PathBuf>,
    /// Refuse models whose manifest names another algorithm.
    pub expect_algo: Option<Algo>,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub table: TrialTable,
    pub trials: Vec<(Algo, Vec<TrialResult>)>,
}

/// Seeds for evaluation come from their own branch of the seed tree so they
/// never coincide with demo-generation seeds drawn from the same base seed.
pub fn eval_seed(seed: u64, index: usize) -> u64 {
    trial_seed(trial_seed(seed, u64::MAX), index as u64)
}

/// Run `episodes` trials per exemplar with `model`, in parallel, returned in
/// trial-index order. Trial `i` uses exemplar `exemplars[i % len]`.
pub fn run_trials(
    model: &PolicyModel,
    cfg: &Config,
    exemplars: &[u8],
    episodes: usize,
    seed: u64,
) -> Result<Vec<TrialResult>> {
    let n = episodes * exemplars.len();
    let mut trials = (0..n)
        .into_par_iter()
        .map(|index| {
            let exemplar = exemplars[index % exemplars.len()];
            let s = eval_seed(seed, index);
            let log = run_episode(model, cfg, exemplar, s)?;
            Ok(TrialResult {
                index,
                exemplar,
                seed: s,
                success: log.report.success,
                failure_stage: log.report.failure_stage,
                cycle_seconds: log.report.cycle_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    trials.sort_by_key(|t| t.index);
    Ok(trials)
}

pub fn cmd_eval(cfg: &Config, args: &EvalArgs) -> Result<EvalOutcome> {
    if args.models.is_empty() {
        return Err(CliError::Arg("at least one model is required".into()));
    }
    if args.episodes == 0 {
        return Err(CliError::Arg("episodes must be at least 1".into()));
    }
    check_exemplars(cfg, &args.exemplars)?;
    // Load everything up front so a bad path fails before any episode runs.
    let mut models = Vec::with_capacity(args.models.len());
    for path in &args.models {
        let model = PolicyModel::load(path)?;
        if let Some(want) = args.expect_algo {
            if model.algo() != want {
                return Err(chicgrasp_core::Error::Config(format!(
                    "{} holds a {} model, expected {want}",
                    path.display(),
                    model.algo()
                ))
                .into());
            }
        }
        models.push(model);
    }
    let mut table = TrialTable::default();
    let mut all = Vec::with_capacity(models.len());
    for model in &models {
        let trials = run_trials(model, cfg, &args.exemplars, args.episodes, args.seed)?;
        table.extend(TrialTable::from_trials(model.algo().as_str(), &trials));
        all.push((model.algo(), trials));
    }
    if let Some(prefix) = &args.report {
        write_file(&prefix.with_extension("csv"), &table.to_csv())?;
        write_file(&prefix.with_extension("md"), &table.to_markdown())?;
    }
    Ok(EvalOutcome { table, trials: all })
}

#[derive(Debug, Clone)]
pub struct ReplayArgs {
    pub data: PathBuf,
    pub idx: usize,
    /// Re-place the carcass from this seed instead of the recorded placement.
    pub seed_override: Option<u64>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    /// `(tick, phase)` at the start and at every phase change.
    pub timeline: Vec<(u64, Phase)>,
    pub final_phase: Phase,
    pub report: SuccessReport,
    pub states: Vec<SimState>,
}

pub fn cmd_replay(cfg: &Config, args: &ReplayArgs) -> Result<ReplayOutcome> {
    let set = DemoSet::load_jsonl(&args.data)?;
    let mut demo = set
        .demos
        .get(args.idx)
        .cloned()
        .ok_or_else(|| CliError::Arg(format!("index {} out of range (file has {} demos)", args.idx, set.len())))?;
    let mut seed = demo.meta.seed;
    if let Some(s) = args.seed_override {
        demo.meta.carcass = sample_carcass(
            demo.meta.exemplar_id,
            &cfg.exemplars,
            &cfg.placement,
            &mut stream(s, Stream::Placement),
        )?;
        seed = s;
    }
    let states = replay_demo(&demo, cfg, seed);
    let report = check_success(&states, &cfg.sim)?;
    let mut timeline: Vec<(u64, Phase)> = Vec::new();
    for s in &states {
        if timeline.last().map(|(_, p)| *p) != Some(s.phase) {
            timeline.push((s.tick, s.phase));
        }
    }
    let final_phase = states.last().map(|s| s.phase).unwrap_or(Phase::Approach);
    if let Some(path) = &args.plot {
        write_file(path, &trajectory_svg(&states, &cfg.sim))?;
    }
    Ok(ReplayOutcome {
        timeline,
        final_phase,
        report,
        states,
    })
}
