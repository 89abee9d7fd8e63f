//! Command-line driver. Every run writes its artifacts into `--out` together
//! with a `manifest.json` recording the command, the resolved configuration,
//! sha256 hashes of all inputs, and the artifact list. Runs are deterministic:
//! the same inputs, flags, and seed produce byte-identical output trees.

mod artifacts;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Distribution;
use serde::de::DeserializeOwned;
use serde_json::json;

use pohmm::latent::{self, Effects, HyperParams};
use pohmm::obsmodel::NoiseMode;
use pohmm::pipeline::{self, Dataset};
use pohmm::plackett::{self, PlConfig};
use pohmm::poset::all_posets;
use pohmm::sampler::{ess, run_chain, AcceptanceCounters, InitKind, McmcConfig, Model, Sample};
use pohmm::summaries::{self, StructureClass};
use pohmm::synth::{self, SizeSpec, SynthParams, TrueEffects};
use pohmm::{ActorId, Year};

use artifacts::{fnum, Csv, OutDir};

#[derive(Parser)]
#[command(
    name = "pohmm",
    version,
    about = "Time-evolving partial orders from rank-order lists"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate raw actor/list files and freeze them into a dataset.
    Ingest(IngestArgs),
    /// Sample the prior over orders and report the implied depth profile.
    SimulatePrior(SimulatePriorArgs),
    /// Run the partial-order MCMC and write samples plus summaries.
    Fit(FitArgs),
    /// Recompute posterior summaries from stored samples.
    Summarize(SummarizeArgs),
    /// Bayes factor for "top seniority levels are strictly ordered".
    BfEffects(BfEffectsArgs),
    /// Structure Bayes factor (vsp or bucket) from posterior and prior samples.
    BfStructure(BfStructureArgs),
    /// Fit the time-series Plackett-Luce baseline.
    PlFit(PlFitArgs),
    /// Fit the static Plackett-Luce mixture baseline.
    PlmixFit(PlmixFitArgs),
    /// Leave-one-out predictive score for a chosen model.
    Elpd(ElpdArgs),
    /// Generate synthetic data with known ground truth.
    Synth(SynthArgs),
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Cmd::Ingest(a) => cmd_ingest(a),
        Cmd::SimulatePrior(a) => cmd_simulate_prior(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Summarize(a) => cmd_summarize(a),
        Cmd::BfEffects(a) => cmd_bf_effects(a),
        Cmd::BfStructure(a) => cmd_bf_structure(a),
        Cmd::PlFit(a) => cmd_pl_fit(a),
        Cmd::PlmixFit(a) => cmd_plmix_fit(a),
        Cmd::Elpd(a) => cmd_elpd(a),
        Cmd::Synth(a) => cmd_synth(a),
    }
}

// ---------------------------------------------------------------- config

/// Optional JSON config file. Flags win over config values, config values win
/// over built-in defaults.
struct Conf(serde_json::Value);

impl Conf {
    fn load(path: Option<&PathBuf>, out: &mut OutDir) -> Result<Conf> {
        match path {
            None => Ok(Conf(serde_json::Value::Null)),
            Some(p) => {
                out.record_input(p)?;
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let v: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                if !v.is_object() {
                    bail!("config {} must be a JSON object", p.display());
                }
                Ok(Conf(v))
            }
        }
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| anyhow!("config key {key:?}: {e}")),
        }
    }
}

/// Flag beats config beats default.
fn pick<T>(flag: Option<T>, conf: Option<T>, default: T) -> T {
    flag.or(conf).unwrap_or(default)
}

// ---------------------------------------------------------------- parsers

fn parse_year_pair(s: &str) -> Result<(Year, Year)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("expected LO:HI, got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn parse_usize_pair(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("expected LO:HI, got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn parse_noise(s: &str) -> Result<NoiseMode> {
    match s {
        "down" => Ok(NoiseMode::Down),
        "up" => Ok(NoiseMode::Up),
        "free" | "noise-free" => Ok(NoiseMode::NoiseFree),
        other => bail!("unknown noise mode {other:?} (down | up | free)"),
    }
}

fn parse_class(s: &str) -> Result<StructureClass> {
    match s {
        "vsp" => Ok(StructureClass::Vsp),
        "bucket" => Ok(StructureClass::Bucket),
        other => bail!("unknown structure class {other:?} (vsp | bucket)"),
    }
}

fn parse_init(s: &str) -> Result<InitKind> {
    match s {
        "ordered" => Ok(InitKind::Ordered),
        "disordered" => Ok(InitKind::Disordered),
        other => bail!("unknown init {other:?} (ordered | disordered)"),
    }
}

/// Effects syntax: `none`, `decreasing:TOP:STEP`, or `given:v1,v2,...`.
fn parse_effects(s: &str) -> Result<TrueEffects> {
    if s == "none" {
        return Ok(TrueEffects::None);
    }
    if let Some(rest) = s.strip_prefix("decreasing:") {
        let (top, step) = rest
            .split_once(':')
            .ok_or_else(|| anyhow!("expected decreasing:TOP:STEP"))?;
        return Ok(TrueEffects::Decreasing { top: top.parse()?, step: step.parse()? });
    }
    if let Some(rest) = s.strip_prefix("given:") {
        let vals: Result<Vec<f64>, _> = rest.split(',').map(|v| v.trim().parse()).collect();
        return Ok(TrueEffects::Given(vals?));
    }
    bail!("unknown effects syntax {s:?} (none | decreasing:TOP:STEP | given:v1,v2,...)")
}

// ---------------------------------------------------------------- data input

#[derive(Args)]
struct DataArgs {
    /// Frozen dataset JSON as written by `ingest` or `synth`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Raw actors CSV (goes with --lists).
    #[arg(long)]
    actors: Option<PathBuf>,
    /// Raw lists CSV (goes with --actors).
    #[arg(long)]
    lists: Option<PathBuf>,
    /// Raw single-file JSON export (actors + lists).
    #[arg(long)]
    raw_json: Option<PathBuf>,
    /// Study window B:E. Defaults to the span of the list date intervals.
    #[arg(long)]
    window: Option<String>,
    /// Ignore the per-actor focus flags and register everyone.
    #[arg(long)]
    include_all: bool,
}

/// Load a dataset from whichever source was given. A frozen dataset is taken
/// verbatim (optionally window-selected); raw files go through registration.
fn load_dataset(d: &DataArgs, conf: &Conf, out: &mut OutDir) -> Result<Dataset> {
    let window_s: Option<String> = match &d.window {
        Some(w) => Some(w.clone()),
        None => conf.get("window")?,
    };
    let window = window_s.as_deref().map(parse_year_pair).transpose()?;

    if let Some(path) = &d.dataset {
        out.record_input(path)?;
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading dataset {}", path.display()))?;
        let data: Dataset = serde_json::from_str(&text)
            .with_context(|| format!("parsing dataset {}", path.display()))?;
        return match window {
            Some((b, e)) => Ok(data.window_select(b, e)?),
            None => Ok(data),
        };
    }

    let (actors, lists) = if let Some(path) = &d.raw_json {
        out.record_input(path)?;
        pipeline::load_json(path)?
    } else if let (Some(ap), Some(lp)) = (&d.actors, &d.lists) {
        out.record_input(ap)?;
        out.record_input(lp)?;
        (pipeline::load_actors_csv(ap)?, pipeline::load_lists_csv(lp)?)
    } else {
        bail!("no data source: give --dataset, --raw-json, or --actors with --lists");
    };

    let window = match window {
        Some(w) => w,
        None => {
            let lo = lists.iter().map(|l| l.tau_minus).min();
            let hi = lists.iter().map(|l| l.tau_plus).max();
            match (lo, hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => bail!("no lists to infer a window from; give --window B:E"),
            }
        }
    };
    // Registration keeps focus-flagged actors only; --include-all overrides
    // by passing the full id set explicitly.
    let focus_set: Option<BTreeSet<ActorId>> = if d.include_all {
        Some(actors.iter().map(|a| a.id).collect())
    } else {
        None
    };
    Ok(pipeline::register(&actors, &lists, window, focus_set.as_ref())?)
}

fn data_source_json(d: &DataArgs) -> serde_json::Value {
    json!({
        "dataset": d.dataset.as_ref().map(|p| p.display().to_string()),
        "actors": d.actors.as_ref().map(|p| p.display().to_string()),
        "lists": d.lists.as_ref().map(|p| p.display().to_string()),
        "raw_json": d.raw_json.as_ref().map(|p| p.display().to_string()),
        "window": d.window,
        "include_all": d.include_all,
    })
}

// ---------------------------------------------------------------- model/mcmc args

#[derive(Args)]
struct ModelArgs {
    /// Latent feature count K. Defaults to max(1, ceil(max crowding / 2)).
    #[arg(long)]
    k: Option<usize>,
    /// Beta(1, gamma) prior rate for the correlation rho.
    #[arg(long)]
    gamma: Option<f64>,
    /// Beta(1, delta) prior rate for the error probability p.
    #[arg(long)]
    delta: Option<f64>,
    /// Observation error model: down | up | free.
    #[arg(long)]
    noise: Option<String>,
    /// Include seniority level effects.
    #[arg(long)]
    effects: bool,
    /// With --effects: drop the decreasing-in-level constraint on beta.
    #[arg(long)]
    free_effects: bool,
}

fn resolve_hyper(m: &ModelArgs, conf: &Conf, data: &Dataset) -> Result<(HyperParams, bool)> {
    let k = pick(m.k, conf.get("k")?, data.activity_index().default_k());
    let gamma = pick(m.gamma, conf.get("gamma")?, 1.0 / 6.0);
    let delta = pick(m.delta, conf.get("delta")?, 9.0);
    let noise_s = pick(m.noise.clone(), conf.get("noise")?, "down".to_string());
    let use_effects = m.effects || conf.get("effects")?.unwrap_or(false);
    let free = m.free_effects || conf.get("free_effects")?.unwrap_or(false);
    let hyper = HyperParams {
        k,
        gamma,
        delta,
        beta_constrained: !free,
        noise_mode: parse_noise(&noise_s)?,
    };
    Ok((hyper, use_effects))
}

#[derive(Args)]
struct McmcArgs {
    /// MCMC sweeps over all blocks.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Sweeps discarded up front. Defaults to 20% of sweeps.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every thin-th sweep after burn-in.
    #[arg(long)]
    thin: Option<usize>,
    /// Chain initialisation: ordered | disordered.
    #[arg(long)]
    init: Option<String>,
    /// Random-walk scale for effect updates.
    #[arg(long)]
    beta_bandwidth: Option<f64>,
    /// Use the plain single-site proposal set throughout.
    #[arg(long)]
    plain_proposals: bool,
    /// Sweeps between internal coherence audits (0 disables).
    #[arg(long)]
    coherence_every: Option<usize>,
}

fn resolve_mcmc(a: &McmcArgs, conf: &Conf, seed: u64) -> Result<McmcConfig> {
    let sweeps = pick(a.sweeps, conf.get("sweeps")?, 2000);
    let burn_in = pick(a.burn_in, conf.get("burn_in")?, sweeps / 5);
    let thin = pick(a.thin, conf.get("thin")?, 10).max(1);
    let init_s = pick(a.init.clone(), conf.get("init")?, "disordered".to_string());
    let plain = a.plain_proposals || conf.get("plain_proposals")?.unwrap_or(false);
    Ok(McmcConfig {
        sweeps,
        burn_in,
        thin,
        seed,
        init: parse_init(&init_s)?,
        beta_bandwidth: pick(a.beta_bandwidth, conf.get("beta_bandwidth")?, 0.2),
        plain_proposals: plain,
        prior_only: false,
        fix_rho: None,
        fix_theta: None,
        fix_p: None,
        coherence_every: pick(a.coherence_every, conf.get("coherence_every")?, 500),
    })
}

// ---------------------------------------------------------------- ingest

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;
    let data = load_dataset(&a.data, &conf, &mut out)?;
    out.write("dataset.json", &data.to_canonical_json())?;

    let idx = data.activity_index();
    let (b, e) = data.window;
    let mut active = Csv::new("year,active");
    for t in b..=e {
        active.row(&[t.to_string(), data.active_set(t).len().to_string()]);
    }
    out.write("active_counts.csv", &active.into_string())?;

    let lens: Vec<usize> = data.lists.iter().map(|l| l.entries.members().len()).collect();
    let report = json!({
        "n_actors": data.actors.len(),
        "n_lists": data.lists.len(),
        "window": data.window,
        "max_crowding": idx.d_max,
        "default_k": idx.default_k(),
        "list_len_min": lens.iter().min(),
        "list_len_max": lens.iter().max(),
        "list_len_mean": lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64,
    });
    out.write_json("registry_report.json", &report)?;

    let config = json!({ "source": data_source_json(&a.data) });
    let dir = out.finish("ingest", config)?;
    println!("ingest: {} actors, {} lists -> {}", data.actors.len(), data.lists.len(), dir.display());
    Ok(())
}

// ---------------------------------------------------------------- simulate-prior

#[derive(Args)]
struct SimulatePriorArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Prior draws.
    #[arg(long, default_value_t = 2000)]
    draws: usize,
    /// Also tabulate depth under the uniform distribution on m-element orders.
    #[arg(long)]
    uniform_m: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_simulate_prior(a: SimulatePriorArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;
    let data = load_dataset(&a.data, &conf, &mut out)?;
    let idx = data.activity_index();
    let k = pick(a.k, conf.get("k")?, idx.default_k());
    let gamma = pick(a.gamma, conf.get("gamma")?, 1.0 / 6.0);
    let (b, e) = data.window;

    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
    let beta_rho = rand_distr::Beta::new(1.0, gamma)
        .map_err(|e| anyhow!("bad gamma for Beta(1, gamma): {e}"))?;
    let empty_beta = Effects::zero(0);
    let no_levels: BTreeMap<ActorId, usize> = BTreeMap::new();

    // hist[t][depth] counts draws; active-set sizes are fixed by the data.
    let mut hist: BTreeMap<Year, BTreeMap<usize, usize>> = BTreeMap::new();
    for _ in 0..a.draws {
        let rho: f64 = beta_rho.sample(&mut rng);
        let theta: f64 = rng.gen();
        let mut us = Vec::with_capacity(data.actors.len());
        for actor in &data.actors {
            us.push(latent::var1_sample(
                actor.id,
                actor.begin_year.max(b),
                actor.end_year.min(e),
                rho,
                theta,
                k,
                &mut rng,
            )?);
        }
        for t in b..=e {
            let z = latent::status_from(&us, &empty_beta, &no_levels, t)?;
            if z.actors.is_empty() {
                continue;
            }
            let h = latent::order_from_status(&z);
            *hist.entry(t).or_default().entry(h.depth()).or_insert(0) += 1;
        }
    }

    let mut csv = Csv::new("year,active,depth,count,fraction");
    for (t, by_depth) in &hist {
        let total: usize = by_depth.values().sum();
        let active = data.active_set(*t).len();
        for (&depth, &count) in by_depth {
            csv.row(&[
                t.to_string(),
                active.to_string(),
                depth.to_string(),
                count.to_string(),
                fnum(count as f64 / total as f64),
            ]);
        }
    }
    out.write("depth_prior.csv", &csv.into_string())?;

    if let Some(m) = a.uniform_m {
        let orders = all_posets(m)?;
        let mut by_depth: BTreeMap<usize, usize> = BTreeMap::new();
        for h in &orders {
            *by_depth.entry(h.depth()).or_insert(0) += 1;
        }
        let mut csv = Csv::new("depth,count,fraction");
        for (&depth, &count) in &by_depth {
            csv.row(&[
                depth.to_string(),
                count.to_string(),
                fnum(count as f64 / orders.len() as f64),
            ]);
        }
        out.write("uniform_reference.csv", &csv.into_string())?;
    }

    let config = json!({
        "source": data_source_json(&a.data),
        "k": k, "gamma": gamma, "draws": a.draws,
        "uniform_m": a.uniform_m, "seed": a.seed,
    });
    let dir = out.finish("simulate-prior", config)?;
    println!("simulate-prior: {} draws -> {}", a.draws, dir.display());
    Ok(())
}

// ---------------------------------------------------------------- fit

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[arg(long)]
    seed: u64,
    /// Independent chains run concurrently with seeds seed, seed+1, ...
    #[arg(long)]
    chains: Option<usize>,
    /// Collapse every date to the window midpoint and pin theta to 0,
    /// giving the static single-order model.
    #[arg(long)]
    fixed_time: bool,
    /// Sample from the prior (likelihood switched off).
    #[arg(long)]
    prior_only: bool,
    #[arg(long)]
    fix_rho: Option<f64>,
    #[arg(long)]
    fix_theta: Option<f64>,
    #[arg(long)]
    fix_p: Option<f64>,
    /// Edge probability needed to enter the consensus order.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;
    let mut data = load_dataset(&a.data, &conf, &mut out)?;

    let fixed_time = a.fixed_time || conf.get("fixed_time")?.unwrap_or(false);
    let mut fix_theta = a.fix_theta.or(conf.get("fix_theta")?);
    if fixed_time {
        let (b, e) = data.window;
        let mid = b + (e - b) / 2;
        data = data.collapse_to_year(mid);
        fix_theta = Some(0.0);
    }

    let (hyper, use_effects) = resolve_hyper(&a.model, &conf, &data)?;
    let mut cfg = resolve_mcmc(&a.mcmc, &conf, a.seed)?;
    cfg.prior_only = a.prior_only || conf.get("prior_only")?.unwrap_or(false);
    cfg.fix_rho = a.fix_rho.or(conf.get("fix_rho")?);
    cfg.fix_theta = fix_theta;
    cfg.fix_p = a.fix_p.or(conf.get("fix_p")?);
    let chains = pick(a.chains, conf.get("chains")?, 1).max(1);
    let threshold = pick(a.threshold, conf.get("threshold")?, 0.9);

    let model = Model::new(data, hyper.clone(), use_effects)?;
    let runs = run_chains(&model, &cfg, chains)?;

    let mut samples: Vec<Sample> = Vec::new();
    let mut jsonl = String::new();
    for (i, run) in runs.iter().enumerate() {
        out.write(&format!("trace_c{i}.csv"), &trace_csv(&run.samples))?;
        for s in &run.samples {
            jsonl.push_str(&serde_json::to_string(s)?);
            jsonl.push('\n');
        }
        samples.extend(run.samples.iter().cloned());
    }
    out.write("samples.jsonl", &jsonl)?;
    out.write("ess.csv", &ess_csv(&samples))?;
    out.write(
        "acceptance.csv",
        &acceptance_csv(runs.iter().map(|r| &r.accepts)),
    )?;

    if cfg.prior_only {
        out.write_json("prior_report.json", &prior_report(&samples, &hyper, &cfg))?;
    }
    write_posterior_summaries(&mut out, &samples, threshold, true)?;

    let report = json!({
        "chains": chains,
        "samples_per_chain": runs.first().map_or(0, |r| r.samples.len()),
        "n_samples": samples.len(),
        "mean_log_post": mean(&samples.iter().map(|s| s.log_post).collect::<Vec<_>>()),
        "mean_log_lik": mean(&samples.iter().map(|s| s.log_lik).collect::<Vec<_>>()),
        "fixed_time": fixed_time,
    });
    out.write_json("run_report.json", &report)?;

    let config = json!({
        "source": data_source_json(&a.data),
        "hyper": serde_json::to_value(&hyper)?,
        "use_effects": use_effects,
        "mcmc": serde_json::to_value(&cfg)?,
        "chains": chains,
        "threshold": threshold,
        "fixed_time": fixed_time,
    });
    let dir = out.finish("fit", config)?;
    println!("fit: {} samples ({} chains) -> {}", samples.len(), chains, dir.display());
    Ok(())
}

fn run_chains(model: &Model, cfg: &McmcConfig, chains: usize) -> Result<Vec<pohmm::sampler::RunResult>> {
    if chains == 1 {
        return Ok(vec![run_chain(model, cfg)?]);
    }
    let mut slots: Vec<Option<pohmm::Result<pohmm::sampler::RunResult>>> =
        (0..chains).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (i, slot) in slots.iter_mut().enumerate() {
            let cfg_i = McmcConfig { seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() };
            handles.push(scope.spawn(move || {
                *slot = Some(run_chain(model, &cfg_i));
            }));
        }
        for h in handles {
            h.join().map_err(|_| anyhow!("chain thread panicked"))?;
        }
        Ok::<(), anyhow::Error>(())
    })?;
    slots
        .into_iter()
        .map(|s| s.expect("slot filled").map_err(Into::into))
        .collect()
}

fn trace_csv(samples: &[Sample]) -> String {
    let s_len = samples.first().map_or(0, |s| s.beta.len());
    let mut header = String::from("iteration,rho,theta,p,log_post");
    for j in 0..s_len {
        header.push_str(&format!(",beta_{j}"));
    }
    let mut csv = Csv::new(&header);
    for s in samples {
        let mut row = vec![
            s.sweep.to_string(),
            fnum(s.scalars.rho),
            fnum(s.scalars.theta),
            fnum(s.scalars.p),
            fnum(s.log_post),
        ];
        row.extend(s.beta.iter().map(|&b| fnum(b)));
        csv.row(&row);
    }
    csv.into_string()
}

fn scalar_series(samples: &[Sample]) -> Vec<(String, Vec<f64>)> {
    let mut series = vec![
        ("rho".to_string(), samples.iter().map(|s| s.scalars.rho).collect::<Vec<_>>()),
        ("theta".to_string(), samples.iter().map(|s| s.scalars.theta).collect()),
        ("p".to_string(), samples.iter().map(|s| s.scalars.p).collect()),
        ("log_post".to_string(), samples.iter().map(|s| s.log_post).collect()),
        ("log_lik".to_string(), samples.iter().map(|s| s.log_lik).collect()),
    ];
    let s_len = samples.first().map_or(0, |s| s.beta.len());
    for j in 0..s_len {
        series.push((format!("beta_{j}"), samples.iter().map(|s| s.beta[j]).collect()));
    }
    series
}

fn ess_csv(samples: &[Sample]) -> String {
    let mut csv = Csv::new("parameter,ess,n");
    for (name, xs) in scalar_series(samples) {
        csv.row(&[name, fnum(ess(&xs)), xs.len().to_string()]);
    }
    csv.into_string()
}

fn acceptance_csv<'a>(counters: impl Iterator<Item = &'a AcceptanceCounters>) -> String {
    let mut sums: Vec<(&str, u64, u64)> = vec![
        ("rho", 0, 0),
        ("theta", 0, 0),
        ("p", 0, 0),
        ("beta", 0, 0),
        ("authority", 0, 0),
        ("tau", 0, 0),
    ];
    for c in counters {
        let parts = [c.rho, c.theta, c.p, c.beta, c.authority, c.tau];
        for (slot, part) in sums.iter_mut().zip(parts) {
            slot.1 += part.proposed;
            slot.2 += part.accepted;
        }
    }
    let mut csv = Csv::new("move,proposed,accepted,rate");
    for (name, proposed, accepted) in sums {
        let rate = if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 };
        csv.row(&[name.to_string(), proposed.to_string(), accepted.to_string(), fnum(rate)]);
    }
    csv.into_string()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Monte Carlo z-scores of prior-only scalar means against their known prior
/// moments, with the standard error taken from the effective sample size.
fn prior_report(samples: &[Sample], hyper: &HyperParams, cfg: &McmcConfig) -> serde_json::Value {
    let beta_mean = |a: f64, b: f64| a / (a + b);
    let beta_var = |a: f64, b: f64| a * b / ((a + b) * (a + b) * (a + b + 1.0));
    let mut checks = Vec::new();
    let mut scalar = |name: &str, xs: Vec<f64>, want_mean: f64, want_var: f64, fixed: bool| {
        let m = mean(&xs);
        if fixed {
            checks.push(json!({ "parameter": name, "mean": m, "fixed": true }));
            return;
        }
        let n_eff = ess(&xs).max(1.0);
        let se = (want_var / n_eff).sqrt();
        checks.push(json!({
            "parameter": name,
            "mean": m,
            "expected_mean": want_mean,
            "se": se,
            "z": (m - want_mean) / se,
            "ess": n_eff,
        }));
    };
    scalar(
        "rho",
        samples.iter().map(|s| s.scalars.rho).collect(),
        beta_mean(1.0, hyper.gamma),
        beta_var(1.0, hyper.gamma),
        cfg.fix_rho.is_some(),
    );
    scalar(
        "theta",
        samples.iter().map(|s| s.scalars.theta).collect(),
        0.5,
        1.0 / 12.0,
        cfg.fix_theta.is_some(),
    );
    scalar(
        "p",
        samples.iter().map(|s| s.scalars.p).collect(),
        beta_mean(1.0, hyper.delta),
        beta_var(1.0, hyper.delta),
        cfg.fix_p.is_some(),
    );
    let s_len = samples.first().map_or(0, |s| s.beta.len());
    let mut beta = Vec::new();
    for j in 0..s_len {
        let xs: Vec<f64> = samples.iter().map(|s| s.beta[j]).collect();
        beta.push(json!({ "component": j, "mean": mean(&xs) }));
    }
    json!({ "scalars": checks, "beta": beta, "n_samples": samples.len() })
}

fn write_posterior_summaries(
    out: &mut OutDir,
    samples: &[Sample],
    threshold: f64,
    center: bool,
) -> Result<()> {
    let years: Vec<Year> = samples
        .first()
        .map(|s| s.orders.keys().copied().collect())
        .unwrap_or_default();

    let mut edge_csv = Csv::new("year,above,below,prob");
    let mut consensus_all = Vec::new();
    for &t in &years {
        let support = summaries::edge_support(samples, t)?;
        for (i, row) in support.prob.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if i != j && p > 0.0 {
                    edge_csv.row(&[
                        t.to_string(),
                        support.actors[i].to_string(),
                        support.actors[j].to_string(),
                        fnum(p),
                    ]);
                }
            }
        }
        let cons = summaries::consensus(&support, threshold);
        if let Some(order) = &cons.order {
            out.write(&format!("consensus_{t}.dot"), &order.to_dot(&format!("consensus_{t}")))?;
        }
        consensus_all.push(cons);
    }
    out.write("edge_support.csv", &edge_csv.into_string())?;
    out.write_json("consensus.json", &consensus_all)?;

    let curves = summaries::authority_curves(samples, center)?;
    let mut auth = Csv::new("actor,year,mean,sd");
    for c in &curves {
        for (i, &t) in c.years.iter().enumerate() {
            auth.row(&[c.actor.to_string(), t.to_string(), fnum(c.mean[i]), fnum(c.sd[i])]);
        }
    }
    out.write("authority.csv", &auth.into_string())?;

    let depths = summaries::depth_distribution(samples)?;
    let mut d = Csv::new("year,mean,sd,min,max");
    let mut hist = Csv::new("year,depth,count");
    for (t, st) in &depths {
        d.row(&[
            t.to_string(),
            fnum(st.mean),
            fnum(st.sd),
            st.min.to_string(),
            st.max.to_string(),
        ]);
        for (&depth, &count) in &st.histogram {
            hist.row(&[t.to_string(), depth.to_string(), count.to_string()]);
        }
    }
    out.write("depth.csv", &d.into_string())?;
    out.write("depth_hist.csv", &hist.into_string())?;
    Ok(())
}

// ---------------------------------------------------------------- summarize

#[derive(Args)]
struct SummarizeArgs {
    /// samples.jsonl from a fit run.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    /// Report raw (uncentred) authority curves.
    #[arg(long)]
    no_center: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn read_samples(path: &Path, out: &mut OutDir) -> Result<Vec<Sample>> {
    out.record_input(path)?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading samples {}", path.display()))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        samples.push(
            serde_json::from_str(line)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    if samples.is_empty() {
        bail!("no samples in {}", path.display());
    }
    Ok(samples)
}

fn cmd_summarize(a: SummarizeArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;
    let samples = read_samples(&a.samples, &mut out)?;
    let threshold = pick(a.threshold, conf.get("threshold")?, 0.9);
    let center = !(a.no_center || conf.get("no_center")?.unwrap_or(false));

    out.write("ess.csv", &ess_csv(&samples))?;
    write_posterior_summaries(&mut out, &samples, threshold, center)?;

    let config = json!({
        "samples": a.samples.display().to_string(),
        "threshold": threshold,
        "center": center,
    });
    let dir = out.finish("summarize", config)?;
    println!("summarize: {} samples -> {}", samples.len(), dir.display());
    Ok(())
}

// ---------------------------------------------------------------- bayes factors

#[derive(Args)]
struct BfEffectsArgs {
    #[arg(long)]
    samples: PathBuf,
    /// How many top levels must be strictly ordered. Defaults to all.
    #[arg(long)]
    s_prime: Option<usize>,
    /// Use the raw sample count for the standard error instead of the ESS.
    #[arg(long)]
    raw_n: bool,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_bf_effects(a: BfEffectsArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let samples = read_samples(&a.samples, &mut out)?;
    let s_len = samples[0].beta.len();
    if s_len == 0 {
        bail!("samples carry no effect components; fit with --effects first");
    }
    let s_prime = a.s_prime.unwrap_or(s_len);
    let bf = summaries::bf_effects_ordered(&samples, s_prime, !a.raw_n)?;
    out.write_json(
        "bf_effects.json",
        &json!({
            "s_prime": s_prime,
            "bf": bf.bf,
            "se": bf.se,
            "n": bf.n,
            "n_eff": bf.n_eff,
        }),
    )?;
    let config = json!({
        "samples": a.samples.display().to_string(),
        "s_prime": s_prime,
        "raw_n": a.raw_n,
    });
    let dir = out.finish("bf-effects", config)?;
    println!("bf-effects: BF = {} (se {}) -> {}", fnum(bf.bf), fnum(bf.se), dir.display());
    Ok(())
}

#[derive(Args)]
struct BfStructureArgs {
    /// Posterior samples.jsonl.
    #[arg(long)]
    posterior: PathBuf,
    /// Prior samples.jsonl (fit --prior-only with the same data and hypers).
    #[arg(long)]
    prior: PathBuf,
    /// vsp | bucket.
    #[arg(long)]
    class: String,
    #[arg(long)]
    raw_n: bool,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_bf_structure(a: BfStructureArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let class = parse_class(&a.class)?;
    let posterior = read_samples(&a.posterior, &mut out)?;
    let prior = read_samples(&a.prior, &mut out)?;
    let frac = |flags: &[bool]| {
        flags.iter().filter(|&&b| b).count() as f64 / flags.len().max(1) as f64
    };
    let post_frac = frac(&summaries::class_flags(&posterior, class));
    let prior_frac = frac(&summaries::class_flags(&prior, class));
    let bf = summaries::bf_structure(&posterior, &prior, class, !a.raw_n)?;
    out.write_json(
        "bf_structure.json",
        &json!({
            "class": a.class,
            "bf": bf.bf,
            "se": bf.se,
            "n": bf.n,
            "n_eff": bf.n_eff,
            "posterior_fraction": post_frac,
            "prior_fraction": prior_frac,
        }),
    )?;
    let config = json!({
        "posterior": a.posterior.display().to_string(),
        "prior": a.prior.display().to_string(),
        "class": a.class,
        "raw_n": a.raw_n,
    });
    let dir = out.finish("bf-structure", config)?;
    println!("bf-structure: BF = {} (se {}) -> {}", fnum(bf.bf), fnum(bf.se), dir.display());
    Ok(())
}

// ---------------------------------------------------------------- plackett-luce

#[derive(Args)]
struct PlArgs {
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Random-walk scale for strength updates.
    #[arg(long)]
    bandwidth: Option<f64>,
}

fn resolve_pl(a: &PlArgs, conf: &Conf, seed: u64) -> Result<PlConfig> {
    let sweeps = pick(a.sweeps, conf.get("sweeps")?, 4000);
    Ok(PlConfig {
        sweeps,
        burn_in: pick(a.burn_in, conf.get("burn_in")?, sweeps / 4),
        thin: pick(a.thin, conf.get("thin")?, 1).max(1),
        seed,
        bandwidth: pick(a.bandwidth, conf.get("bandwidth")?, 0.2),
        prior_only: false,
        use_covariates: false,
    })
}

#[derive(Args)]
struct PlFitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    pl: PlArgs,
    /// Sample from the prior (likelihood switched off).
    #[arg(long)]
    prior_only: bool,
    /// Add seniority covariate effects to the strength means.
    #[arg(long)]
    covariates: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_pl_fit(a: PlFitArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;
    let data = load_dataset(&a.data, &conf, &mut out)?;
    let mut cfg = resolve_pl(&a.pl, &conf, a.seed)?;
    cfg.prior_only = a.prior_only || conf.get("prior_only")?.unwrap_or(false);
    cfg.use_covariates = a.covariates || conf.get("covariates")?.unwrap_or(false);

    let run = plackett::pl_fit(&data, &cfg)?;
    let mut jsonl = String::new();
    for s in &run.samples {
        jsonl.push_str(&serde_json::to_string(s)?);
        jsonl.push('\n');
    }
    out.write("pl_samples.jsonl", &jsonl)?;

    let mut trace = Csv::new("index,theta,sigma,loglik");
    for (i, s) in run.samples.iter().enumerate() {
        trace.row(&[
            i.to_string(),
            fnum(s.state.theta),
            fnum(s.state.sigma),
            fnum(s.loglik),
        ]);
    }
    out.write("pl_trace.csv", &trace.into_string())?;

    let thetas: Vec<f64> = run.samples.iter().map(|s| s.state.theta).collect();
    let sigmas: Vec<f64> = run.samples.iter().map(|s| s.state.sigma).collect();
    let logliks: Vec<f64> = run.samples.iter().map(|s| s.loglik).collect();
    out.write_json(
        "pl_report.json",
        &json!({
            "n_samples": run.samples.len(),
            "accept_lambda": run.accept_lambda,
            "accept_scalar": run.accept_scalar,
            "mean_theta": mean(&thetas),
            "ess_theta": ess(&thetas),
            "mean_sigma": mean(&sigmas),
            "mean_loglik": mean(&logliks),
        }),
    )?;

    let config = json!({
        "source": data_source_json(&a.data),
        "pl": serde_json::to_value(&cfg)?,
    });
    let dir = out.finish("pl-fit", config)?;
    println!("pl-fit: {} samples -> {}", run.samples.len(), dir.display());
    Ok(())
}

#[derive(Args)]
struct PlmixFitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    pl: PlArgs,
    /// Mixture components.
    #[arg(long, default_value_t = 1)]
    components: usize,
    /// Use the random-walk sampler instead of the Gibbs sampler.
    #[arg(long)]
    mh: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_plmix_fit(a: PlmixFitArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;
    let data = load_dataset(&a.data, &conf, &mut out)?;
    let cfg = resolve_pl(&a.pl, &conf, a.seed)?;
    let gibbs = !(a.mh || conf.get("mh")?.unwrap_or(false));

    let run = plackett::plmix_fit(&data, a.components, &cfg, gibbs)?;
    let mut jsonl = String::new();
    for s in &run.samples {
        jsonl.push_str(&serde_json::to_string(s)?);
        jsonl.push('\n');
    }
    out.write("plmix_samples.jsonl", &jsonl)?;

    let dic = plackett::dic(&run.samples, &data)?;
    let logliks: Vec<f64> = run.samples.iter().map(|s| s.loglik).collect();
    let max_w: Vec<f64> = run
        .samples
        .iter()
        .map(|s| s.state.weights.iter().cloned().fold(0.0, f64::max))
        .collect();
    out.write_json(
        "plmix_report.json",
        &json!({
            "components": a.components,
            "gibbs": gibbs,
            "n_samples": run.samples.len(),
            "dic": dic,
            "mean_loglik": mean(&logliks),
            "mean_max_weight": mean(&max_w),
        }),
    )?;

    let config = json!({
        "source": data_source_json(&a.data),
        "pl": serde_json::to_value(&cfg)?,
        "components": a.components,
        "gibbs": gibbs,
    });
    let dir = out.finish("plmix-fit", config)?;
    println!(
        "plmix-fit: {} samples, DIC = {} -> {}",
        run.samples.len(),
        fnum(dic),
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- elpd

#[derive(Args)]
struct ElpdArgs {
    #[command(flatten)]
    data: DataArgs,
    /// po | plmix.
    #[arg(long)]
    model: String,
    #[command(flatten)]
    po_model: ModelArgs,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Mixture components (plmix only).
    #[arg(long, default_value_t = 1)]
    components: usize,
    #[arg(long)]
    mh: bool,
    /// Worker threads for the per-list refits (po only).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_elpd(a: ElpdArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;
    let data = load_dataset(&a.data, &conf, &mut out)?;
    let uniform = summaries::elpd_uniform(&data);
    let threads = pick(a.threads, conf.get("threads")?, 1).max(1);

    let (result, config) = match a.model.as_str() {
        "po" => {
            let (hyper, use_effects) = resolve_hyper(&a.po_model, &conf, &data)?;
            let cfg = resolve_mcmc(&a.mcmc, &conf, a.seed)?;
            let model = Model::new(data.clone(), hyper.clone(), use_effects)?;
            let r = summaries::elpd_loo_po_threads(&model, &cfg, threads)?;
            let config = json!({
                "source": data_source_json(&a.data),
                "model": "po",
                "hyper": serde_json::to_value(&hyper)?,
                "use_effects": use_effects,
                "mcmc": serde_json::to_value(&cfg)?,
                "threads": threads,
            });
            (r, config)
        }
        "plmix" => {
            let cfg = resolve_pl(
                &PlArgs {
                    sweeps: a.mcmc.sweeps,
                    burn_in: a.mcmc.burn_in,
                    thin: a.mcmc.thin,
                    bandwidth: None,
                },
                &conf,
                a.seed,
            )?;
            let gibbs = !(a.mh || conf.get("mh")?.unwrap_or(false));
            let r = plackett::elpd_loo_plmix(&data, a.components, &cfg, gibbs)?;
            let config = json!({
                "source": data_source_json(&a.data),
                "model": "plmix",
                "components": a.components,
                "gibbs": gibbs,
                "pl": serde_json::to_value(&cfg)?,
            });
            (r, config)
        }
        other => bail!("unknown model {other:?} (po | plmix)"),
    };

    let mut per = Csv::new("index,list_id,elpd_i");
    for (i, v) in result.per_item.iter().enumerate() {
        per.row(&[i.to_string(), data.lists[i].id.to_string(), fnum(*v)]);
    }
    out.write("elpd_per_item.csv", &per.into_string())?;
    out.write_json(
        "elpd.json",
        &json!({
            "model": a.model,
            "n_lists": data.lists.len(),
            "elpd": result.elpd,
            "se": result.se,
            "uniform_elpd": uniform.elpd,
            "uniform_se": uniform.se,
        }),
    )?;

    let dir = out.finish("elpd", config)?;
    println!(
        "elpd[{}] = {} (se {}), uniform = {} -> {}",
        a.model,
        fnum(result.elpd),
        fnum(result.se),
        fnum(uniform.elpd),
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Args)]
struct SynthArgs {
    /// Copy actors, dates, and list shapes from this frozen dataset.
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    n_actors: Option<usize>,
    /// Window B:E.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    n_lists: Option<usize>,
    /// List length range LO:HI.
    #[arg(long)]
    list_len: Option<String>,
    /// Date interval width range LO:HI.
    #[arg(long)]
    interval_width: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// down | up | free.
    #[arg(long)]
    noise: Option<String>,
    /// none | decreasing:TOP:STEP | given:v1,v2,...
    #[arg(long)]
    effects: Option<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut out = OutDir::create(&a.out)?;
    let conf = Conf::load(a.config.as_ref(), &mut out)?;

    let noise_s = pick(a.noise.clone(), conf.get("noise")?, "down".to_string());
    let effects_s = pick(a.effects.clone(), conf.get("effects")?, "none".to_string());
    let params = SynthParams {
        k: pick(a.k, conf.get("k")?, 2),
        rho: pick(a.rho, conf.get("rho")?, 0.8),
        theta: pick(a.theta, conf.get("theta")?, 0.7),
        p: pick(a.p, conf.get("p")?, 0.1),
        noise: parse_noise(&noise_s)?,
        effects: parse_effects(&effects_s)?,
    };

    let (data, truth, mode) = if let Some(tpl) = &a.template {
        out.record_input(tpl)?;
        let text = std::fs::read_to_string(tpl)
            .with_context(|| format!("reading template {}", tpl.display()))?;
        let template: Dataset = serde_json::from_str(&text)
            .with_context(|| format!("parsing template {}", tpl.display()))?;
        let (d, t) = synth::synth_template(&template, &params, a.seed)?;
        (d, t, "template")
    } else {
        let window_s = pick(a.window.clone(), conf.get("window")?, "1100:1119".to_string());
        let list_len_s = pick(a.list_len.clone(), conf.get("list_len")?, "3:6".to_string());
        let width_s =
            pick(a.interval_width.clone(), conf.get("interval_width")?, "0:3".to_string());
        let spec = SizeSpec {
            n_actors: pick(a.n_actors, conf.get("n_actors")?, 10),
            window: parse_year_pair(&window_s)?,
            n_lists: pick(a.n_lists, conf.get("n_lists")?, 40),
            list_len: parse_usize_pair(&list_len_s)?,
            interval_width: parse_year_pair(&width_s)?,
        };
        let (d, t) = synth::synth_size(&spec, &params, a.seed)?;
        (d, t, "size")
    };

    let mut actors = Csv::new("id,name,group,begin_year,end_year,focus");
    for r in &data.actors {
        actors.row(&[
            r.id.to_string(),
            r.name.clone(),
            r.group.clone(),
            r.begin_year.to_string(),
            r.end_year.to_string(),
            u8::from(r.focus).to_string(),
        ]);
    }
    out.write("actors.csv", &actors.into_string())?;

    let mut lists = Csv::new("list_id,tau_minus,tau_plus,rank,actor_id");
    for l in &data.lists {
        for (rank, actor) in l.entries.members().iter().enumerate() {
            lists.row(&[
                l.id.to_string(),
                l.tau_minus.to_string(),
                l.tau_plus.to_string(),
                (rank + 1).to_string(),
                actor.to_string(),
            ]);
        }
    }
    out.write("lists.csv", &lists.into_string())?;
    out.write("dataset.json", &data.to_canonical_json())?;
    out.write_json("truth.json", &truth)?;

    let config = json!({
        "mode": mode,
        "template": a.template.as_ref().map(|p| p.display().to_string()),
        "params": serde_json::to_value(&params)?,
        "n_actors": data.actors.len(),
        "n_lists": data.lists.len(),
        "window": data.window,
        "seed": a.seed,
    });
    let dir = out.finish("synth", config)?;
    println!(
        "synth[{mode}]: {} actors, {} lists -> {}",
        data.actors.len(),
        data.lists.len(),
        dir.display()
    );
    Ok(())
}
