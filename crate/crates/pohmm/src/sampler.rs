//! Metropolis-within-Gibbs sampling of the posterior over authority paths,
//! covariate effects, scalar parameters, and list dates.
//!
//! One sweep updates, in turn: `rho` and `theta` by prior-draw proposals
//! accepted on the change in the authority-path density; `p` by a
//! prior-draw proposal accepted on the likelihood; each component of `beta`
//! by a random walk; every authority value U_j^(t) by a draw from its
//! conditional under the VAR(1) prior given its neighbours (so the
//! acceptance ratio reduces to a likelihood ratio, computed here in full
//! Hastings form so alternative proposal scales stay valid); and each list
//! date uniformly over its interval.
//!
//! The state caches the additive parts of the log posterior and the
//! realized per-year orders, refreshed incrementally; a periodic coherence
//! check recomputes everything from scratch and asserts agreement.

use crate::latent::{
    gauss_logpdf, gauss_sample, log_prior_beta, log_prior_scalars, log_prior_taus,
    order_from_status, status_from, var1_logpdf, AuthoritySeries, Effects,
    HyperParams, ScalarParams, StatusMatrix,
};
use crate::obsmodel::{loglik_list, NoiseMode, NoiseModel};
use crate::pipeline::{Dataset, SeniorityTable};
use crate::poset::{intersection_order, CountCache, PartialOrder};
use crate::{ActorId, Error, Result, Year};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Start from featureless paths whose realized orders are empty.
    Disordered,
    /// Start near the order the lists agree on.
    Ordered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub seed: u64,
    pub init: InitKind,
    /// Random-walk scale for effect components.
    pub beta_bandwidth: f64,
    /// Use fixed random-walk scales for authority updates instead of the
    /// exact conditional ones. Both are corrected by a Hastings term,
    /// so this changes mixing, not the target.
    pub plain_proposals: bool,
    /// Drop the likelihood: sample the prior (for calibration checks).
    pub prior_only: bool,
    /// Pin scalars instead of sampling them.
    pub fix_rho: Option<f64>,
    pub fix_theta: Option<f64>,
    pub fix_p: Option<f64>,
    /// Recompute the cached log posterior from scratch every this many
    /// sweeps and assert agreement; 0 disables.
    pub coherence_every: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            burn_in: 500,
            thin: 1,
            seed: 1,
            init: InitKind::Disordered,
            beta_bandwidth: 0.2,
            plain_proposals: false,
            prior_only: false,
            fix_rho: None,
            fix_theta: None,
            fix_p: None,
            coherence_every: 500,
        }
    }
}

/// The inference problem: registered data plus hyperparameters and the
/// derived covariate table.
#[derive(Debug, Clone)]
pub struct Model {
    pub data: Dataset,
    pub hyper: HyperParams,
    pub seniority: SeniorityTable,
    /// Number of effect components; 0 disables the covariate term.
    pub n_effects: usize,
    list_members: Vec<Vec<ActorId>>,
    empty_levels: BTreeMap<ActorId, usize>,
}

impl Model {
    /// `use_effects` attaches the seniority covariate; without it the
    /// status is the raw authority.
    pub fn new(data: Dataset, hyper: HyperParams, use_effects: bool) -> Result<Model> {
        hyper.validate()?;
        if data.lists.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (seniority, n_effects) = if use_effects {
            let s = data.seniority();
            let n = s.s_max;
            (s, n)
        } else {
            (SeniorityTable::empty(), 0)
        };
        let list_members = data.lists.iter().map(|l| l.entries.members()).collect();
        Ok(Model {
            data,
            hyper,
            seniority,
            n_effects,
            list_members,
            empty_levels: BTreeMap::new(),
        })
    }

    pub fn noise_model(&self, p: f64) -> NoiseModel {
        NoiseModel { mode: self.hyper.noise_mode, p }
    }

    fn levels_for(&self, t: Year) -> &BTreeMap<ActorId, usize> {
        if self.n_effects == 0 {
            return &self.empty_levels;
        }
        self.seniority.levels(t).unwrap_or(&self.empty_levels)
    }

    fn status_at(&self, us: &[AuthoritySeries], beta: &Effects, t: Year) -> Result<StatusMatrix> {
        status_from(us, beta, self.levels_for(t), t)
    }

    fn order_at(&self, us: &[AuthoritySeries], beta: &Effects, t: Year) -> Result<PartialOrder> {
        Ok(order_from_status(&self.status_at(us, beta, t)?))
    }

    fn orders_all(
        &self,
        us: &[AuthoritySeries],
        beta: &Effects,
    ) -> Result<BTreeMap<Year, PartialOrder>> {
        let (b, e) = self.data.window;
        (b..=e).map(|t| Ok((t, self.order_at(us, beta, t)?))).collect()
    }

    fn list_contains(&self, i: usize, j: ActorId) -> bool {
        self.list_members[i].binary_search(&j).is_ok()
    }
}

/// Full parameter state plus cached log-density parts.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub scalars: ScalarParams,
    pub us: Vec<AuthoritySeries>,
    pub beta: Effects,
    pub taus: Vec<Year>,
    pub orders: BTreeMap<Year, PartialOrder>,
    lp_scalars: f64,
    lp_beta: f64,
    lp_taus: f64,
    lp_var1: Vec<f64>,
    ll_lists: Vec<f64>,
}

impl ChainState {
    pub fn log_posterior(&self) -> f64 {
        self.lp_scalars
            + self.lp_beta
            + self.lp_taus
            + self.lp_var1.iter().sum::<f64>()
            + self.log_lik()
    }

    pub fn log_lik(&self) -> f64 {
        self.ll_lists.iter().sum()
    }
}

/// One retained posterior draw. Orders are stored realized, statuses as a
/// per-year mean-over-features authority value per active actor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub sweep: usize,
    pub scalars: ScalarParams,
    pub beta: Vec<f64>,
    pub taus: Vec<Year>,
    pub orders: BTreeMap<Year, PartialOrder>,
    pub authority: BTreeMap<Year, Vec<(ActorId, f64)>>,
    pub log_post: f64,
    pub log_lik: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Counter {
    pub proposed: u64,
    pub accepted: u64,
}

impl Counter {
    fn tally(&mut self, accepted: bool) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AcceptanceCounters {
    pub rho: Counter,
    pub theta: Counter,
    pub p: Counter,
    pub beta: Counter,
    pub authority: Counter,
    pub tau: Counter,
}

#[derive(Debug)]
pub struct RunResult {
    pub samples: Vec<Sample>,
    pub accepts: AcceptanceCounters,
}

pub struct Sampler<'a> {
    model: &'a Model,
    cfg: McmcConfig,
    pub state: ChainState,
    pub accepts: AcceptanceCounters,
    cache: CountCache,
    rng: ChaCha20Rng,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a Model, cfg: McmcConfig) -> Result<Self> {
        if cfg.sweeps == 0 || cfg.thin == 0 {
            return Err(Error::Domain("sweeps and thin must be positive".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let mut cache = CountCache::default();
        let mut state = init_state(model, &cfg, &mut cache, &mut rng)?;
        if !state.log_posterior().is_finite() {
            // An ordered start can contradict a list under a noise-free
            // model; the featureless start never does.
            state = init_disordered(model, &cfg, &mut cache, &mut rng)?;
        }
        if !state.log_posterior().is_finite() {
            return Err(Error::ZeroPriorMass);
        }
        Ok(Self {
            model,
            cfg,
            state,
            accepts: AcceptanceCounters::default(),
            cache,
            rng,
        })
    }

    /// Runs the configured number of sweeps, returning the retained draws.
    pub fn run(&mut self) -> Result<RunResult> {
        let mut samples = Vec::new();
        for sweep in 1..=self.cfg.sweeps {
            self.sweep()?;
            if self.cfg.coherence_every > 0 && sweep % self.cfg.coherence_every == 0 {
                self.assert_coherent()?;
            }
            if sweep > self.cfg.burn_in && (sweep - self.cfg.burn_in) % self.cfg.thin == 0 {
                samples.push(self.snapshot(sweep)?);
            }
        }
        Ok(RunResult { samples, accepts: self.accepts })
    }

    pub fn sweep(&mut self) -> Result<()> {
        if self.cfg.fix_rho.is_none() {
            self.update_rho()?;
        }
        if self.cfg.fix_theta.is_none() {
            self.update_theta()?;
        }
        if self.cfg.fix_p.is_none() && self.model.hyper.noise_mode != NoiseMode::NoiseFree {
            self.update_p()?;
        }
        self.update_beta()?;
        self.update_authorities()?;
        self.update_taus()?;
        Ok(())
    }

    fn accept(&mut self, log_acc: f64) -> bool {
        if log_acc >= 0.0 {
            return true;
        }
        self.rng.gen::<f64>().ln() < log_acc
    }

    fn update_rho(&mut self) -> Result<()> {
        let prop = draw_beta(1.0, self.model.hyper.gamma, &mut self.rng);
        let cand = ScalarParams { rho: prop, ..self.state.scalars };
        let mut lp_var1 = Vec::with_capacity(self.state.us.len());
        for s in &self.state.us {
            lp_var1.push(var1_logpdf(s, cand.rho, cand.theta)?);
        }
        // Prior-draw proposal: prior and proposal cancel, leaving the
        // authority-path density ratio.
        let log_acc =
            lp_var1.iter().sum::<f64>() - self.state.lp_var1.iter().sum::<f64>();
        let ok = self.accept(log_acc);
        self.accepts.rho.tally(ok);
        if ok {
            self.state.scalars = cand;
            self.state.lp_var1 = lp_var1;
            self.state.lp_scalars = log_prior_scalars(&cand, &self.model.hyper);
        }
        Ok(())
    }

    fn update_theta(&mut self) -> Result<()> {
        let prop: f64 = self.rng.gen::<f64>().min(1.0 - 1e-12);
        let cand = ScalarParams { theta: prop, ..self.state.scalars };
        let mut lp_var1 = Vec::with_capacity(self.state.us.len());
        for s in &self.state.us {
            lp_var1.push(var1_logpdf(s, cand.rho, cand.theta)?);
        }
        let log_acc =
            lp_var1.iter().sum::<f64>() - self.state.lp_var1.iter().sum::<f64>();
        let ok = self.accept(log_acc);
        self.accepts.theta.tally(ok);
        if ok {
            self.state.scalars = cand;
            self.state.lp_var1 = lp_var1;
            self.state.lp_scalars = log_prior_scalars(&cand, &self.model.hyper);
        }
        Ok(())
    }

    fn update_p(&mut self) -> Result<()> {
        let prop = draw_beta(1.0, self.model.hyper.delta, &mut self.rng);
        let cand = ScalarParams { p: prop, ..self.state.scalars };
        let ll = ll_all(
            self.model,
            self.cfg.prior_only,
            &self.state.orders,
            &self.state.taus,
            cand.p,
            &mut self.cache,
        )?;
        let log_acc = ll.iter().sum::<f64>() - self.state.log_lik();
        let ok = self.accept(log_acc);
        self.accepts.p.tally(ok);
        if ok {
            self.state.scalars = cand;
            self.state.ll_lists = ll;
            self.state.lp_scalars = log_prior_scalars(&cand, &self.model.hyper);
        }
        Ok(())
    }

    fn update_beta(&mut self) -> Result<()> {
        for s in 0..self.model.n_effects {
            let mut beta = self.state.beta.clone();
            let step: f64 = self.rng.sample(StandardNormal);
            beta.beta[s] += self.cfg.beta_bandwidth * step;
            let lp_beta = log_prior_beta(&beta, &self.model.hyper);
            if lp_beta == f64::NEG_INFINITY {
                self.accepts.beta.tally(false);
                continue;
            }
            let orders = self.model.orders_all(&self.state.us, &beta)?;
            let ll = ll_all(
                self.model,
                self.cfg.prior_only,
                &orders,
                &self.state.taus,
                self.state.scalars.p,
                &mut self.cache,
            )?;
            let log_acc = lp_beta - self.state.lp_beta + ll.iter().sum::<f64>()
                - self.state.log_lik();
            let ok = self.accept(log_acc);
            self.accepts.beta.tally(ok);
            if ok {
                self.state.beta = beta;
                self.state.lp_beta = lp_beta;
                self.state.orders = orders;
                self.state.ll_lists = ll;
            }
        }
        Ok(())
    }

    /// Mean and covariance scale of the authority proposal at year `t` of
    /// series `s`: the conditional of the VAR(1) prior given the
    /// neighbouring years, or fixed scales under `plain_proposals`.
    fn proposal_params(&self, s: &AuthoritySeries, t: Year) -> (Vec<f64>, f64) {
        let theta = self.state.scalars.theta;
        let k = self.model.hyper.k;
        let prev = s.value(t - 1);
        let next = s.value(t + 1);
        match (prev, next) {
            (Some(a), Some(b)) => {
                let w = theta / (1.0 + theta * theta);
                let mean = a.iter().zip(b).map(|(x, y)| w * (x + y)).collect();
                let c = if self.cfg.plain_proposals {
                    (1.0 - theta * theta) / (1.0 + theta * theta)
                } else {
                    1.0 / (1.0 + theta * theta)
                };
                (mean, c)
            }
            (Some(a), None) | (None, Some(a)) => {
                let mean = a.iter().map(|x| theta * x).collect();
                let c = if self.cfg.plain_proposals { 1.0 - theta * theta } else { 1.0 };
                (mean, c)
            }
            (None, None) => {
                let c = if self.cfg.plain_proposals {
                    1.0
                } else {
                    1.0 / (1.0 - theta * theta)
                };
                (vec![0.0; k], c)
            }
        }
    }

    fn update_authorities(&mut self) -> Result<()> {
        let rho = self.state.scalars.rho;
        let k = self.model.hyper.k;
        let n_actors = self.state.us.len();
        for a in 0..n_actors {
            let begin = self.state.us[a].begin;
            let end = self.state.us[a].end();
            for t in begin..=end {
                let (mean, c) = self.proposal_params(&self.state.us[a], t);
                let prop = gauss_sample(Some(&mean), c, rho, k, &mut self.rng);
                let old = self.state.us[a].value(t).expect("year in range").to_vec();
                // Hastings term: the proposal depends only on the fixed
                // neighbours, so the densities use the same mean and scale.
                let log_q_ratio =
                    gauss_logpdf(&old, Some(&mean), c, rho) - gauss_logpdf(&prop, Some(&mean), c, rho);

                *self.state.us[a].value_mut(t).expect("year in range") = prop;
                let lp_new = var1_logpdf(&self.state.us[a], rho, self.state.scalars.theta)?;
                let order_new = self.model.order_at(&self.state.us, &self.state.beta, t)?;
                let actor = self.state.us[a].actor;
                let mut ll_new: Vec<(usize, f64)> = Vec::new();
                let mut delta_ll = 0.0;
                if !self.cfg.prior_only {
                    for (i, list) in self.model.data.lists.iter().enumerate() {
                        if self.state.taus[i] != t || !self.model.list_contains(i, actor) {
                            continue;
                        }
                        let ll = loglik_list(
                            &order_new,
                            &list.entries,
                            &self.model.noise_model(self.state.scalars.p),
                            &mut self.cache,
                        )?;
                        delta_ll += ll - self.state.ll_lists[i];
                        ll_new.push((i, ll));
                    }
                }
                let log_acc =
                    lp_new - self.state.lp_var1[a] + delta_ll + log_q_ratio;
                let ok = self.accept(log_acc);
                self.accepts.authority.tally(ok);
                if ok {
                    self.state.lp_var1[a] = lp_new;
                    self.state.orders.insert(t, order_new);
                    for (i, ll) in ll_new {
                        self.state.ll_lists[i] = ll;
                    }
                } else {
                    *self.state.us[a].value_mut(t).expect("year in range") = old;
                }
            }
        }
        Ok(())
    }

    fn update_taus(&mut self) -> Result<()> {
        for i in 0..self.state.taus.len() {
            let list = &self.model.data.lists[i];
            if list.tau_minus == list.tau_plus {
                continue;
            }
            let prop = self.rng.gen_range(list.tau_minus..=list.tau_plus);
            if prop == self.state.taus[i] {
                self.accepts.tau.tally(true);
                continue;
            }
            let ll = if self.cfg.prior_only {
                0.0
            } else {
                let h = self.state.orders.get(&prop).expect("window year");
                loglik_list(
                    h,
                    &list.entries,
                    &self.model.noise_model(self.state.scalars.p),
                    &mut self.cache,
                )?
            };
            // Uniform proposal over a uniform prior: likelihood ratio only.
            let log_acc = ll - self.state.ll_lists[i];
            let ok = self.accept(log_acc);
            self.accepts.tau.tally(ok);
            if ok {
                self.state.taus[i] = prop;
                self.state.ll_lists[i] = ll;
            }
        }
        Ok(())
    }

    fn snapshot(&self, sweep: usize) -> Result<Sample> {
        let (b, e) = self.model.data.window;
        let mut authority = BTreeMap::new();
        for t in b..=e {
            let z = self.model.status_at(&self.state.us, &self.state.beta, t)?;
            let vals: Vec<(ActorId, f64)> = z
                .actors
                .iter()
                .zip(&z.rows)
                .map(|(&a, row)| (a, row.iter().sum::<f64>() / row.len() as f64))
                .collect();
            authority.insert(t, vals);
        }
        Ok(Sample {
            sweep,
            scalars: self.state.scalars,
            beta: self.state.beta.beta.clone(),
            taus: self.state.taus.clone(),
            orders: self.state.orders.clone(),
            authority,
            log_post: self.state.log_posterior(),
            log_lik: self.state.log_lik(),
        })
    }

    fn assert_coherent(&mut self) -> Result<()> {
        let fresh = compute_state(
            self.model,
            &self.cfg,
            self.state.scalars,
            self.state.us.clone(),
            self.state.beta.clone(),
            self.state.taus.clone(),
            &mut self.cache,
        )?;
        let a = self.state.log_posterior();
        let b = fresh.log_posterior();
        if (a - b).abs() > 1e-6 * (1.0 + a.abs().max(b.abs())) {
            return Err(Error::Domain(format!(
                "cached log posterior {a} drifted from recomputed {b}"
            )));
        }
        Ok(())
    }
}

fn draw_beta<R: Rng>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let d = Beta::new(alpha, beta).expect("valid shape parameters");
    d.sample(rng).clamp(0.0, 1.0 - 1e-12)
}

/// Per-list log likelihoods for the given orders, dates, and noise level.
fn ll_all(
    model: &Model,
    prior_only: bool,
    orders: &BTreeMap<Year, PartialOrder>,
    taus: &[Year],
    p: f64,
    cache: &mut CountCache,
) -> Result<Vec<f64>> {
    if prior_only {
        return Ok(vec![0.0; model.data.lists.len()]);
    }
    let noise = model.noise_model(p);
    let mut out = Vec::with_capacity(model.data.lists.len());
    for (i, list) in model.data.lists.iter().enumerate() {
        let h = orders
            .get(&taus[i])
            .ok_or_else(|| Error::Domain(format!("no order for year {}", taus[i])))?;
        out.push(loglik_list(h, &list.entries, &noise, cache)?);
    }
    Ok(out)
}

/// Assembles a `ChainState` from parameter values, computing every cached
/// part from scratch.
fn compute_state(
    model: &Model,
    cfg: &McmcConfig,
    scalars: ScalarParams,
    us: Vec<AuthoritySeries>,
    beta: Effects,
    taus: Vec<Year>,
    cache: &mut CountCache,
) -> Result<ChainState> {
    let orders = model.orders_all(&us, &beta)?;
    let mut lp_var1 = Vec::with_capacity(us.len());
    for s in &us {
        lp_var1.push(var1_logpdf(s, scalars.rho, scalars.theta)?);
    }
    let ll_lists = ll_all(model, cfg.prior_only, &orders, &taus, scalars.p, cache)?;
    Ok(ChainState {
        lp_scalars: log_prior_scalars(&scalars, &model.hyper),
        lp_beta: log_prior_beta(&beta, &model.hyper),
        lp_taus: log_prior_taus(&taus, &model.data),
        lp_var1,
        ll_lists,
        scalars,
        us,
        beta,
        taus,
        orders,
    })
}

fn init_scalars<R: Rng>(model: &Model, cfg: &McmcConfig, rng: &mut R) -> ScalarParams {
    let rho = cfg
        .fix_rho
        .unwrap_or_else(|| draw_beta(1.0, model.hyper.gamma, rng));
    let theta = cfg
        .fix_theta
        .unwrap_or_else(|| rng.gen::<f64>().min(1.0 - 1e-12));
    let p = match model.hyper.noise_mode {
        NoiseMode::NoiseFree => 0.0,
        _ => cfg.fix_p.unwrap_or_else(|| draw_beta(1.0, model.hyper.delta, rng)),
    };
    ScalarParams { rho, theta, p }
}

/// Activity span of each actor clipped to the study window.
fn actor_spans(model: &Model) -> Vec<(ActorId, Year, Year)> {
    let (b, e) = model.data.window;
    model
        .data
        .actors
        .iter()
        .map(|a| (a.id, a.begin_year.max(b), a.end_year.min(e)))
        .collect()
}

fn midpoint_taus(model: &Model) -> Vec<Year> {
    model
        .data
        .lists
        .iter()
        .map(|l| l.tau_minus + (l.tau_plus - l.tau_minus) / 2)
        .collect()
}

fn init_disordered(
    model: &Model,
    cfg: &McmcConfig,
    cache: &mut CountCache,
    rng: &mut R1,
) -> Result<ChainState> {
    let scalars = init_scalars(model, cfg, rng);
    let k = model.hyper.k;
    // Feature columns pull in opposite directions (or vanish for K = 1), so
    // no actor dominates any other and every realized order starts empty.
    let us = actor_spans(model)
        .into_iter()
        .enumerate()
        .map(|(rank, (actor, b, e))| {
            let row: Vec<f64> = (0..k)
                .map(|f| {
                    if k == 1 {
                        0.0
                    } else {
                        let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
                        sign * 0.05 * rank as f64
                    }
                })
                .collect();
            AuthoritySeries { actor, begin: b, values: vec![row; (e - b + 1) as usize] }
        })
        .collect();
    let beta = Effects::zero(model.n_effects).init_decreasing(&model.hyper);
    compute_state(model, cfg, scalars, us, beta, midpoint_taus(model), cache)
}

fn init_ordered(
    model: &Model,
    cfg: &McmcConfig,
    cache: &mut CountCache,
    rng: &mut R1,
) -> Result<ChainState> {
    let scalars = init_scalars(model, cfg, rng);
    let k = model.hyper.k;
    // The order every list is consistent with. Relations caught in a cycle
    // (same strongly connected component) are all dropped before closure.
    let lists: Vec<_> = model.data.lists.iter().map(|l| l.entries.clone()).collect();
    let pairs = intersection_order(&lists);
    let ground: Vec<ActorId> = model.data.actors.iter().map(|a| a.id).collect();
    let comp = scc_labels(&ground, &pairs);
    let kept: Vec<(ActorId, ActorId)> = pairs
        .into_iter()
        .filter(|&(a, b)| comp[&a] != comp[&b])
        .collect();
    let base = PartialOrder::transitive_closure(&ground, &kept)?;
    // Columns get independent random extensions of the consensus, mapped to
    // evenly spread values, so the realized orders start near it.
    let spans = actor_spans(model);
    let mut us: Vec<AuthoritySeries> = spans
        .iter()
        .map(|&(actor, b, e)| AuthoritySeries {
            actor,
            begin: b,
            values: vec![vec![0.0; k]; (e - b + 1) as usize],
        })
        .collect();
    let n = ground.len().max(2) as f64;
    for f in 0..k {
        let ext = random_topological(&base, rng);
        for (rank, &actor) in ext.iter().enumerate() {
            // Top of the extension gets the largest value, spread over
            // roughly the stationary range.
            let v = 2.0 - 4.0 * rank as f64 / (n - 1.0);
            let s = us.iter_mut().find(|s| s.actor == actor).expect("span exists");
            for row in &mut s.values {
                row[f] = v;
            }
        }
    }
    let beta = Effects::zero(model.n_effects).init_decreasing(&model.hyper);
    compute_state(model, cfg, scalars, us, beta, midpoint_taus(model), cache)
}

/// Strongly connected component label per vertex (Kosaraju), used to spot
/// relations that sit on a directed cycle.
fn scc_labels(ground: &[ActorId], pairs: &[(ActorId, ActorId)]) -> BTreeMap<ActorId, usize> {
    let idx: BTreeMap<ActorId, usize> = ground.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let n = ground.len();
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for &(a, b) in pairs {
        fwd[idx[&a]].push(idx[&b]);
        rev[idx[&b]].push(idx[&a]);
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // Iterative DFS recording finish order.
        let mut stack = vec![(start, 0usize)];
        seen[start] = true;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < fwd[v].len() {
                let w = fwd[v][*next];
                *next += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut current = 0;
    for &start in order.iter().rev() {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = current;
        while let Some(v) = stack.pop() {
            for &w in &rev[v] {
                if label[w] == usize::MAX {
                    label[w] = current;
                    stack.push(w);
                }
            }
        }
        current += 1;
    }
    ground.iter().map(|&a| (a, label[idx[&a]])).collect()
}

/// A linear extension drawn by repeatedly picking uniformly among maximal
/// elements. Not uniform over extensions, but cheap at any size; only used
/// to seed starting states.
fn random_topological<R: Rng>(h: &PartialOrder, rng: &mut R) -> Vec<ActorId> {
    let n = h.size();
    let cols = {
        let mut above = vec![0u64; n];
        for (i, &row) in h.rows().iter().enumerate() {
            let mut rest = row;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                above[j] |= 1 << i;
            }
        }
        above
    };
    let mut mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut out = Vec::with_capacity(n);
    while mask != 0 {
        let maximal: Vec<usize> =
            (0..n).filter(|&v| mask & (1 << v) != 0 && cols[v] & mask == 0).collect();
        let pick = maximal[rng.gen_range(0..maximal.len())];
        out.push(h.ground()[pick]);
        mask &= !(1 << pick);
    }
    out
}

type R1 = ChaCha20Rng;

fn init_state(
    model: &Model,
    cfg: &McmcConfig,
    cache: &mut CountCache,
    rng: &mut R1,
) -> Result<ChainState> {
    match cfg.init {
        InitKind::Disordered => init_disordered(model, cfg, cache, rng),
        InitKind::Ordered => init_ordered(model, cfg, cache, rng),
    }
}

impl Effects {
    /// A starting point inside the support: zeros normally, a strictly
    /// decreasing ramp under the order constraint.
    fn init_decreasing(mut self, hyper: &HyperParams) -> Effects {
        if hyper.beta_constrained {
            let s = self.beta.len();
            for (i, b) in self.beta.iter_mut().enumerate() {
                *b = 0.1 * (s - i) as f64;
            }
        }
        self
    }
}

/// Runs a single chain to completion.
pub fn run_chain(model: &Model, cfg: &McmcConfig) -> Result<RunResult> {
    Sampler::new(model, cfg.clone())?.run()
}

/// Effective sample size by the initial positive sequence estimator:
/// autocovariances are summed in adjacent pairs until a pair goes
/// non-positive. A constant (zero-variance) trace reports 0: it carries no
/// information about the stationary distribution.
pub fn ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    let nf = n as f64;
    if n == 0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / nf;
    let gamma = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (xs[i] - mean) * (xs[i + lag] - mean))
            .sum::<f64>()
            / nf
    };
    let g0 = gamma(0);
    if g0 <= 0.0 {
        return 0.0;
    }
    if n < 4 {
        return nf;
    }
    let mut sum_pairs = 0.0;
    let mut m = 0;
    loop {
        let a = 2 * m;
        let b = 2 * m + 1;
        if b >= n {
            break;
        }
        let pair = gamma(a) + gamma(b);
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        m += 1;
    }
    let var = 2.0 * sum_pairs - g0;
    if var <= 0.0 {
        return nf;
    }
    (nf * g0 / var).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{ActorRecord, ListRecord};
    use crate::poset::RankList;
    use approx::assert_abs_diff_eq;

    fn actor(id: ActorId, b: Year, e: Year) -> ActorRecord {
        ActorRecord {
            id,
            name: format!("a{id}"),
            group: String::new(),
            begin_year: b,
            end_year: e,
            focus: true,
        }
    }

    fn list(id: u32, lo: Year, hi: Year, entries: &[ActorId]) -> ListRecord {
        ListRecord {
            id,
            tau_minus: lo,
            tau_plus: hi,
            entries: RankList::new(entries.to_vec()).unwrap(),
        }
    }

    fn tiny_dataset() -> Dataset {
        Dataset {
            actors: vec![actor(1, 1100, 1102), actor(2, 1100, 1102)],
            lists: vec![
                list(1, 1100, 1102, &[1, 2]),
                list(2, 1100, 1102, &[2, 1]),
            ],
            window: (1100, 1102),
        }
    }

    #[test]
    fn prior_only_run_recovers_scalar_prior_moments() {
        let model = Model::new(tiny_dataset(), HyperParams::default(), false).unwrap();
        let cfg = McmcConfig {
            sweeps: 12_000,
            burn_in: 2_000,
            thin: 2,
            seed: 31,
            prior_only: true,
            ..McmcConfig::default()
        };
        let run = run_chain(&model, &cfg).unwrap();
        let n = run.samples.len() as f64;
        let mean = |f: &dyn Fn(&Sample) -> f64| run.samples.iter().map(|s| f(s)).sum::<f64>() / n;
        // rho ~ Beta(1, 1/6): mean 6/7; theta ~ U(0,1): 1/2; p ~ Beta(1,9): 0.1.
        assert_abs_diff_eq!(mean(&|s| s.scalars.rho), 6.0 / 7.0, epsilon = 0.02);
        assert_abs_diff_eq!(mean(&|s| s.scalars.theta), 0.5, epsilon = 0.03);
        assert_abs_diff_eq!(mean(&|s| s.scalars.p), 0.1, epsilon = 0.02);
        // Dates are uniform over a 3-year grid with mean 1101.
        let tau_mean = run
            .samples
            .iter()
            .map(|s| s.taus.iter().map(|&t| t as f64).sum::<f64>() / 2.0)
            .sum::<f64>()
            / n;
        assert_abs_diff_eq!(tau_mean, 1101.0, epsilon = 0.05);
    }

    #[test]
    fn prior_pair_order_probability_matches_orthant_formula() {
        // Two actors, one year, K = 2, rho and theta pinned. P(1 above 2)
        // is the orthant probability 1/4 + asin(rho)/(2 pi) = 1/3 at rho = 1/2.
        let data = Dataset {
            actors: vec![actor(1, 1100, 1100), actor(2, 1100, 1100)],
            lists: vec![list(1, 1100, 1100, &[1, 2]), list(2, 1100, 1100, &[2, 1])],
            window: (1100, 1100),
        };
        let hyper = HyperParams { k: 2, ..HyperParams::default() };
        let model = Model::new(data, hyper, false).unwrap();
        let cfg = McmcConfig {
            sweeps: 9_000,
            burn_in: 1_000,
            seed: 5,
            prior_only: true,
            fix_rho: Some(0.5),
            fix_theta: Some(0.0),
            ..McmcConfig::default()
        };
        let run = run_chain(&model, &cfg).unwrap();
        let hits = run
            .samples
            .iter()
            .filter(|s| s.orders[&1100].has_edge(1, 2))
            .count() as f64;
        let frac = hits / run.samples.len() as f64;
        // Isolated-year proposals are exact prior draws, so samples are
        // nearly independent; 4 binomial standard errors.
        let se = (frac * (1.0 - frac) / run.samples.len() as f64).sqrt();
        assert!((frac - 1.0 / 3.0).abs() < 4.0 * se.max(0.005), "frac = {frac}");
    }

    #[test]
    fn posterior_concentrates_on_repeated_list() {
        // Twenty copies of [1, 2] in a one-year window: the posterior puts
        // 1 above 2 almost always.
        let lists: Vec<ListRecord> = (0..20).map(|i| list(i, 1100, 1100, &[1, 2])).collect();
        let data = Dataset {
            actors: vec![actor(1, 1100, 1100), actor(2, 1100, 1100)],
            lists,
            window: (1100, 1100),
        };
        let model = Model::new(data, HyperParams::default(), false).unwrap();
        let cfg = McmcConfig {
            sweeps: 3_000,
            burn_in: 500,
            seed: 9,
            fix_p: Some(0.1),
            fix_theta: Some(0.0),
            coherence_every: 200,
            ..McmcConfig::default()
        };
        let run = run_chain(&model, &cfg).unwrap();
        let hits = run
            .samples
            .iter()
            .filter(|s| s.orders[&1100].has_edge(1, 2))
            .count() as f64;
        assert!(hits / run.samples.len() as f64 > 0.9);
        assert!(run.accepts.authority.proposed > 0);
    }

    #[test]
    fn ordered_init_matches_list_consensus() {
        let data = tiny_dataset();
        let model = Model::new(data, HyperParams::default(), false).unwrap();
        let cfg = McmcConfig { init: InitKind::Ordered, seed: 2, sweeps: 10, burn_in: 0, ..McmcConfig::default() };
        // Conflicting lists leave no attested pairs, so this starts empty
        // and must still be a valid state.
        let run = run_chain(&model, &cfg).unwrap();
        assert_eq!(run.samples.len(), 10);
    }

    #[test]
    fn plain_proposal_scales_target_the_same_posterior() {
        let data = tiny_dataset();
        let model = Model::new(data, HyperParams::default(), false).unwrap();
        let base = McmcConfig {
            sweeps: 8_000,
            burn_in: 1_000,
            seed: 77,
            prior_only: true,
            fix_rho: Some(0.3),
            fix_theta: Some(0.6),
            ..McmcConfig::default()
        };
        let exact = run_chain(&model, &base).unwrap();
        let plain = run_chain(
            &model,
            &McmcConfig { plain_proposals: true, seed: 78, ..base },
        )
        .unwrap();
        // Both should reproduce the stationary prior variance 1/(1-theta^2)
        // of a single authority component.
        let var = |run: &RunResult| {
            let vals: Vec<f64> = run
                .samples
                .iter()
                .map(|s| s.authority[&1100][0].1)
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64
        };
        let want = 1.0 / (1.0 - 0.6 * 0.6);
        assert_abs_diff_eq!(var(&exact), want, epsilon = 0.12 * want);
        assert_abs_diff_eq!(var(&plain), want, epsilon = 0.12 * want);
    }

    #[test]
    fn ess_detects_correlation() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let iid: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        assert!(ess(&iid) > 1200.0);
        // A strongly autocorrelated chain: long runs of repeated values.
        let mut slow = Vec::new();
        let mut val = 0.0;
        for i in 0..2000 {
            if i % 50 == 0 {
                val = rng.gen::<f64>();
            }
            slow.push(val);
        }
        assert!(ess(&slow) < 300.0);
        // Degenerate traces carry no information.
        assert_eq!(ess(&[1.0, 1.0, 1.0, 1.0]), 0.0);
    }
}
