//! Experiment orchestration: `key = value` run configs, seeded multi-seed
//! runs with CSV artifacts, and random hyperparameter search.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::config::TrainerConfig;
use crate::ddpg::train_ddpg;
use crate::env::{BumpsBandit, PointMass};
use crate::error::{Error, Result, TrainFailure};
use crate::smoothie;
use crate::train_log::{format_sig9, TrainLog};
use crate::verify::smoothed_landscape;
use crate::{seeded_rng, SeededRng};

/// KL weight used by `smoothie_kl` when the config does not set one. It lies
/// in the upper part of the searched range because the desk presets use
/// reward scales near the bottom of theirs.
pub const DEFAULT_KL_LAMBDA: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Smoothie,
    SmoothieKl,
    Ddpg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Smoothie => "smoothie",
            Self::SmoothieKl => "smoothie_kl",
            Self::Ddpg => "ddpg",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "smoothie" => Ok(Self::Smoothie),
            "smoothie_kl" => Ok(Self::SmoothieKl),
            "ddpg" => Ok(Self::Ddpg),
            _ => Err(format!("unknown algorithm `{s}` (expected smoothie, smoothie_kl or ddpg)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Bumps,
    PointMass,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bumps => "bumps",
            Self::PointMass => "pointmass",
        }
    }

    /// Preset trainer settings for this environment.
    pub fn preset(self) -> TrainerConfig {
        match self {
            Self::Bumps => TrainerConfig::bumps(),
            Self::PointMass => TrainerConfig::point_mass(),
        }
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bumps" => Ok(Self::Bumps),
            "pointmass" => Ok(Self::PointMass),
            _ => Err(format!("unknown environment `{s}` (expected bumps or pointmass)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub environment: EnvKind,
    pub trainer: TrainerConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, environment: EnvKind) -> Self {
        let mut trainer = environment.preset();
        if algorithm == Algorithm::SmoothieKl {
            trainer.lambda = DEFAULT_KL_LAMBDA;
        }
        Self { algorithm, environment, trainer, seeds: vec![0], out_dir: PathBuf::from("runs") }
    }

    /// Trainer settings as actually used: plain Smoothie ignores the KL weight.
    pub fn effective_trainer(&self) -> TrainerConfig {
        let mut t = self.trainer.clone();
        if self.algorithm == Algorithm::Smoothie {
            t.lambda = 0.0;
        }
        t
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    if v == "none" {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| x.trim().parse::<T>().map_err(|_| format!("bad list element `{x}`"))).collect()
}

fn parse_num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

/// Sets one trainer field from its textual value.
pub fn set_trainer_key(t: &mut TrainerConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "actor_lr" => t.actor_lr = parse_num(v)?,
        "critic_lr" => t.critic_lr = parse_num(v)?,
        "gamma" => t.gamma = parse_num(v)?,
        "lambda" => t.lambda = parse_num(v)?,
        "tau" => t.tau = parse_num(v)?,
        "batch_size" => t.batch_size = parse_num(v)?,
        "total_steps" => t.total_steps = parse_num(v)?,
        "reward_scale" => t.reward_scale = parse_num(v)?,
        "q_grad_clip" => t.q_grad_clip = parse_num(v)?,
        "huber_clip" => t.huber_clip = parse_num(v)?,
        "log_var_init" => t.log_var_init = parse_num(v)?,
        "init_mean" => t.init_mean = if v == "none" { None } else { Some(parse_num(v)?) },
        "actor_hidden" => t.actor_hidden = parse_list(v)?,
        "critic_embed" => t.critic_embed = parse_num(v)?,
        "critic_hidden" => t.critic_hidden = parse_num(v)?,
        "replay_capacity" => t.replay_capacity = parse_num(v)?,
        "importance_weights" => t.importance_weights = parse_bool(v)?,
        "fit_samples" => t.fit_samples = parse_num(v)?,
        "ou_damping" => t.ou_damping = parse_num(v)?,
        "ou_stddev" => t.ou_stddev = parse_num(v)?,
        "log_every" => t.log_every = parse_num(v)?,
        "eval_every" => t.eval_every = parse_num(v)?,
        "eval_episodes" => t.eval_episodes = parse_num(v)?,
        "record_wall_clock" => t.record_wall_clock = parse_bool(v)?,
        "quadrature_order" => t.quadrature_order = parse_num(v)?,
        "fd_step" => t.fd_step = parse_num(v)?,
        "fd_step2" => t.fd_step2 = parse_num(v)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Parses a run config. Absent keys take the environment preset.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Parse { line, message: "empty key or value".into() });
        }
        if pairs.iter().any(|(_, key, _): &(usize, &str, &str)| *key == k) {
            return Err(Error::Parse { line, message: format!("duplicate key `{k}`") });
        }
        pairs.push((line, k, v));
    }
    let lookup = |name: &str| pairs.iter().find(|p| p.1 == name).map(|p| (p.0, p.2));
    let required = |name: &str| {
        lookup(name).ok_or_else(|| Error::Parse { line: 0, message: format!("missing required key `{name}`") })
    };
    let (aline, aval) = required("algorithm")?;
    let algorithm = aval.parse().map_err(|message| Error::Parse { line: aline, message })?;
    let (eline, eval) = required("environment")?;
    let environment = eval.parse().map_err(|message| Error::Parse { line: eline, message })?;

    let mut cfg = RunConfig::new(algorithm, environment);
    let baseline = cfg.trainer.clone();
    for &(line, k, v) in &pairs {
        let err = |message: String| Error::Parse { line, message };
        match k {
            "algorithm" | "environment" => {}
            "seeds" => {
                cfg.seeds = parse_list(v).map_err(err)?;
                if cfg.seeds.is_empty() {
                    return Err(Error::Parse { line, message: "at least one seed is required".into() });
                }
            }
            "out_dir" => cfg.out_dir = PathBuf::from(v),
            _ => {
                set_trainer_key(&mut cfg.trainer, k, v).map_err(err)?;
                // Range errors are attributed to the line that set the field.
                let mut probe = baseline.clone();
                set_trainer_key(&mut probe, k, v).map_err(err)?;
                probe.validate().map_err(|e| err(e.to_string()))?;
            }
        }
    }
    cfg.trainer.validate()?;
    Ok(cfg)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes every field so that `parse_config(dump(c)) == c`.
pub fn dump(c: &RunConfig) -> String {
    let t = &c.trainer;
    let list = |v: &[usize]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
    };
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("algorithm", c.algorithm.name().into());
    kv("environment", c.environment.name().into());
    kv("seeds", c.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
    kv("out_dir", c.out_dir.display().to_string());
    kv("actor_lr", fmt_f64(t.actor_lr));
    kv("critic_lr", fmt_f64(t.critic_lr));
    kv("gamma", fmt_f64(t.gamma));
    kv("lambda", fmt_f64(t.lambda));
    kv("tau", fmt_f64(t.tau));
    kv("batch_size", t.batch_size.to_string());
    kv("total_steps", t.total_steps.to_string());
    kv("reward_scale", fmt_f64(t.reward_scale));
    kv("q_grad_clip", fmt_f64(t.q_grad_clip));
    kv("huber_clip", fmt_f64(t.huber_clip));
    kv("log_var_init", fmt_f64(t.log_var_init));
    kv("init_mean", t.init_mean.map_or("none".into(), fmt_f64));
    kv("actor_hidden", list(&t.actor_hidden));
    kv("critic_embed", t.critic_embed.to_string());
    kv("critic_hidden", t.critic_hidden.to_string());
    kv("replay_capacity", t.replay_capacity.to_string());
    kv("importance_weights", t.importance_weights.to_string());
    kv("fit_samples", t.fit_samples.to_string());
    kv("ou_damping", fmt_f64(t.ou_damping));
    kv("ou_stddev", fmt_f64(t.ou_stddev));
    kv("log_every", t.log_every.to_string());
    kv("eval_every", t.eval_every.to_string());
    kv("eval_episodes", t.eval_episodes.to_string());
    kv("record_wall_clock", t.record_wall_clock.to_string());
    kv("quadrature_order", t.quadrature_order.to_string());
    kv("fd_step", fmt_f64(t.fd_step));
    kv("fd_step2", fmt_f64(t.fd_step2));
    out
}

/// Trains one seed. Each call owns its environment, networks and rng.
pub fn train_seed(algorithm: Algorithm, environment: EnvKind, trainer: &TrainerConfig, seed: u64) -> Result<TrainLog, TrainFailure> {
    let cfg = TrainerConfig { seed, ..trainer.clone() };
    let mut rng = seeded_rng(seed);
    match (algorithm, environment) {
        (Algorithm::Ddpg, EnvKind::Bumps) => train_ddpg(&mut BumpsBandit::default(), &cfg, &mut rng),
        (Algorithm::Ddpg, EnvKind::PointMass) => train_ddpg(&mut PointMass::default(), &cfg, &mut rng),
        (_, EnvKind::Bumps) => smoothie::train(&mut BumpsBandit::default(), &cfg, &mut rng),
        (_, EnvKind::PointMass) => smoothie::train(&mut PointMass::default(), &cfg, &mut rng),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub seed: u64,
    pub final_return: f64,
    pub best_return: f64,
    pub final_sigma_mean: f64,
    pub final_mu: Vec<f64>,
    pub wall_ms: f64,
}

pub const SUMMARY_HEADER: &str = "seed,final_return,best_return,final_sigma_mean,final_mu,wall_ms";

impl SummaryRow {
    fn from_log(seed: u64, log: &TrainLog, wall_ms: f64) -> Self {
        Self {
            seed,
            final_return: log.final_return().unwrap_or(f64::NAN),
            best_return: log.best_return().unwrap_or(f64::NAN),
            final_sigma_mean: log.rows.last().map_or(f64::NAN, |r| r.sigma_mean),
            final_mu: log.final_mean_action.clone(),
            wall_ms,
        }
    }

    pub fn csv_line(&self) -> String {
        let mu = self.final_mu.iter().map(|m| format_sig9(*m)).collect::<Vec<_>>().join(";");
        format!(
            "{},{},{},{},{},{}",
            self.seed,
            format_sig9(self.final_return),
            format_sig9(self.best_return),
            format_sig9(self.final_sigma_mean),
            mu,
            format_sig9(self.wall_ms)
        )
    }
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub rows: Vec<SummaryRow>,
    /// Seeds whose training aborted, with the cause. Their partial logs are
    /// still written.
    pub failures: Vec<(u64, Error)>,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// Trains every seed in order, writing `seed_<n>.csv` and `summary.csv`
/// under the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let trainer = cfg.effective_trainer();
    trainer.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut outcome = RunOutcome::default();
    for &seed in &cfg.seeds {
        let start = std::time::Instant::now();
        let (log, failure) = match train_seed(cfg.algorithm, cfg.environment, &trainer, seed) {
            Ok(log) => (log, None),
            Err(TrainFailure { log, error }) => (log, Some(error)),
        };
        let wall_ms = if trainer.record_wall_clock { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        log.write_csv(fs::File::create(cfg.out_dir.join(format!("seed_{seed}.csv")))?)?;
        match failure {
            None => outcome.rows.push(SummaryRow::from_log(seed, &log, wall_ms)),
            Some(e) => outcome.failures.push((seed, e)),
        }
    }
    fs::write(cfg.out_dir.join("summary.csv"), summary_csv(&outcome.rows))?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sampling {
    /// Log-uniform on `[lo, hi]`.
    Log { lo: f64, hi: f64 },
    /// The same textual value for every trial.
    Fixed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchRow {
    pub key: String,
    pub sampling: Sampling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    pub rows: Vec<SearchRow>,
    pub trials: usize,
    /// Run trials on the rayon pool. Results are identical to sequential mode
    /// because every trial's hyperparameters are drawn before any trial runs.
    pub parallel: bool,
}

impl Default for SearchSpec {
    fn default() -> Self {
        let log = |key: &str, lo: f64, hi: f64| SearchRow { key: key.into(), sampling: Sampling::Log { lo, hi } };
        let fixed = |key: &str, v: &str| SearchRow { key: key.into(), sampling: Sampling::Fixed(v.into()) };
        Self {
            rows: vec![
                log("actor_lr", 1e-6, 1e-3),
                log("critic_lr", 1e-6, 1e-3),
                log("reward_scale", 0.01, 0.3),
                log("ou_damping", 1e-4, 1e-3),
                log("ou_stddev", 1e-3, 1.0),
                log("lambda", 1e-6, 4e-2),
                fixed("gamma", "0.995"),
                fixed("tau", "0.01"),
                fixed("batch_size", "128"),
                fixed("q_grad_clip", "4.0"),
                fixed("huber_clip", "1.0"),
            ],
            trials: 100,
            parallel: false,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("search needs at least one trial".into()));
        }
        for r in &self.rows {
            if let Sampling::Log { lo, hi } = r.sampling {
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Error::Config(format!("log range for `{}` must be positive and ordered", r.key)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// Sampled or fixed value of every search row, in row order.
    pub values: Vec<String>,
    /// Mean over seeds of the final evaluation return; `None` if any seed diverged.
    pub score: Option<f64>,
    pub error: Option<String>,
}

/// Samples every trial's settings up front, trains each trial on all of
/// `base`'s seeds, and ranks trials by mean final return, best first.
/// Diverged trials rank last. Writes `search.csv` to the output directory.
pub fn random_search(spec: &SearchSpec, base: &RunConfig, rng: &mut SeededRng) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    let mut planned = Vec::with_capacity(spec.trials);
    for trial in 0..spec.trials {
        let mut t = base.trainer.clone();
        let mut values = Vec::with_capacity(spec.rows.len());
        for row in &spec.rows {
            let v = match &row.sampling {
                Sampling::Log { lo, hi } => {
                    let u: f64 = rng.random();
                    fmt_f64((lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi))
                }
                Sampling::Fixed(v) => v.clone(),
            };
            set_trainer_key(&mut t, &row.key, &v).map_err(Error::Config)?;
            values.push(v);
        }
        if base.algorithm == Algorithm::Smoothie {
            t.lambda = 0.0;
        }
        planned.push((trial, t, values));
    }

    let run_trial = |(trial, t, values): &(usize, TrainerConfig, Vec<String>)| -> TrialResult {
        let mut total = 0.0;
        for &seed in &base.seeds {
            match train_seed(base.algorithm, base.environment, t, seed) {
                Ok(log) => total += log.final_return().unwrap_or(f64::NAN),
                Err(f) => {
                    return TrialResult { trial: *trial, values: values.clone(), score: None, error: Some(f.error.to_string()) }
                }
            }
        }
        let score = total / base.seeds.len() as f64;
        TrialResult { trial: *trial, values: values.clone(), score: score.is_finite().then_some(score), error: None }
    };
    let mut results: Vec<TrialResult> =
        if spec.parallel { planned.par_iter().map(run_trial).collect() } else { planned.iter().map(run_trial).collect() };
    results.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.trial.cmp(&b.trial)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.trial.cmp(&b.trial),
    });

    fs::create_dir_all(&base.out_dir)?;
    fs::write(base.out_dir.join("search.csv"), search_csv(spec, &results))?;
    Ok(results)
}

pub fn search_csv(spec: &SearchSpec, results: &[TrialResult]) -> String {
    let mut s = String::from("rank,trial,score,status");
    for r in &spec.rows {
        s.push(',');
        s.push_str(&r.key);
    }
    s.push('\n');
    for (rank, r) in results.iter().enumerate() {
        let status = if r.error.is_some() { "diverged" } else { "ok" };
        let score = r.score.map_or("nan".into(), format_sig9);
        let _ = write!(s, "{},{},{},{}", rank + 1, r.trial, score, status);
        for v in &r.values {
            s.push(',');
            s.push_str(v);
        }
        s.push('\n');
    }
    s
}

/// `a,reward,smoothed` rows of the bandit reward and its Gaussian smoothing.
pub fn landscape_csv(env: &BumpsBandit, sigma: f64, lo: f64, hi: f64, points: usize) -> Result<String> {
    if points < 2 || !(hi > lo) {
        return Err(Error::Config("landscape needs at least two points on a non-empty interval".into()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let smooth = smoothed_landscape(|a| env.reward(a), sigma, &grid, 64)?;
    let mut s = String::from("a,reward,smoothed\n");
    for (a, q) in grid.iter().zip(smooth) {
        let _ = writeln!(s, "{},{},{}", format_sig9(*a), format_sig9(env.reward(*a)), format_sig9(q));
    }
    Ok(s)
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn required_keys() {
        assert!(matches!(parse_config(""), Err(Error::Parse { .. })));
        assert!(parse_config("algorithm = smoothie").is_err());
        let c = parse_config("# comment\nalgorithm = smoothie\nenvironment = bumps\n").unwrap();
        assert_eq!(c.trainer, TrainerConfig::bumps());
        assert_eq!(c.seeds, vec![0]);
    }

    #[test]
    fn values_and_line_numbers() {
        let c = parse_config("algorithm = ddpg\nenvironment = pointmass\ngamma = 0.995 # discount\n").unwrap();
        assert_eq!(c.trainer.gamma, 0.995);
        let e = parse_config("algorithm = ddpg\nenvironment = bumps\n\ngamma = 1.5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
        let e = parse_config("algorithm = ddpg\nenvironment = bumps\nwarp = 9\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = parse_config("algorithm = ddpg\nenvironment = bumps\nno equals sign\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = parse_config("algorithm = sac\nenvironment = bumps\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        assert!(parse_config("algorithm = ddpg\nenvironment = bumps\nseeds = none\n").is_err());
    }

    #[test]
    fn kl_default_applies_only_to_kl_variant() {
        let kl = parse_config("algorithm = smoothie_kl\nenvironment = bumps\n").unwrap();
        assert_eq!(kl.trainer.lambda, DEFAULT_KL_LAMBDA);
        let plain = parse_config("algorithm = smoothie\nenvironment = bumps\nlambda = 0.5\n").unwrap();
        assert_eq!(plain.effective_trainer().lambda, 0.0);
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            prop_oneof![Just(Algorithm::Smoothie), Just(Algorithm::SmoothieKl), Just(Algorithm::Ddpg)],
            prop_oneof![Just(EnvKind::Bumps), Just(EnvKind::PointMass)],
            1e-7f64..1e-2,
            0.0f64..0.999,
            prop::collection::vec(1usize..64, 0..3),
            prop::option::of(-3.0f64..3.0),
            prop::collection::vec(0u64..1000, 1..4),
            any::<bool>(),
        )
            .prop_map(|(a, e, lr, gamma, hidden, init_mean, seeds, iw)| {
                let mut c = RunConfig::new(a, e);
                c.trainer.actor_lr = lr;
                c.trainer.gamma = gamma;
                c.trainer.actor_hidden = hidden;
                c.trainer.init_mean = init_mean;
                c.trainer.importance_weights = iw;
                c.seeds = seeds;
                c
            })
    }

    proptest! {
        #[test]
        fn dump_round_trips(c in arb_config()) {
            let parsed = parse_config(&dump(&c)).unwrap();
            prop_assert_eq!(&parsed, &c);
            prop_assert_eq!(parse_config(&dump(&parsed)).unwrap(), parsed);
        }
    }

    #[test]
    fn search_rows_respect_table() {
        let mut base = RunConfig::new(Algorithm::Smoothie, EnvKind::Bumps);
        base.trainer.total_steps = 5;
        base.out_dir = tempfile::tempdir().unwrap().keep();
        let spec = SearchSpec { trials: 6, ..Default::default() };
        let results = random_search(&spec, &base, &mut seeded_rng(1)).unwrap();
        assert_eq!(results.len(), 6);
        for r in &results {
            for (row, v) in spec.rows.iter().zip(&r.values) {
                match &row.sampling {
                    Sampling::Log { lo, hi } => {
                        let x: f64 = v.parse().unwrap();
                        assert!(*lo <= x && x <= *hi, "{} = {x}", row.key);
                    }
                    Sampling::Fixed(f) => assert_eq!(v, f),
                }
            }
        }
        let csv = fs::read_to_string(base.out_dir.join("search.csv")).unwrap();
        assert_eq!(csv.lines().count(), 7);
        let single = random_search(&SearchSpec { trials: 1, ..Default::default() }, &base, &mut seeded_rng(1)).unwrap();
        assert_eq!(single.len(), 1);
        assert!(random_search(&SearchSpec { trials: 0, ..Default::default() }, &base, &mut seeded_rng(1)).is_err());
        fs::remove_dir_all(&base.out_dir).unwrap();
    }

    #[test]
    fn parallel_search_matches_sequential() {
        let mut base = RunConfig::new(Algorithm::Ddpg, EnvKind::Bumps);
        base.trainer.total_steps = 80;
        base.trainer.batch_size = 16;
        base.out_dir = tempfile::tempdir().unwrap().keep();
        let seq = random_search(&SearchSpec { trials: 3, ..Default::default() }, &base, &mut seeded_rng(2)).unwrap();
        let par =
            random_search(&SearchSpec { trials: 3, parallel: true, ..Default::default() }, &base, &mut seeded_rng(2)).unwrap();
        assert_eq!(seq, par);
        fs::remove_dir_all(&base.out_dir).unwrap();
    }

    #[test]
    fn landscape_csv_shape() {
        let s = landscape_csv(&BumpsBandit::default(), 1.0, -3.0, 3.0, 7).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], "a,reward,smoothed");
        assert!(lines[4].starts_with("0,"));
        assert!(landscape_csv(&BumpsBandit::default(), 0.0, -3.0, 3.0, 7).is_err());
    }
}
