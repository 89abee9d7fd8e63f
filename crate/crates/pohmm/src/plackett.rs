//! Plackett-Luce baselines: a time-series model with covariates and a
//! static mixture, with DIC and leave-one-out predictive utilities.
//!
//! The time-series model gives every actor a per-year log-strength
//! `lambda_j^(t)`; a list is built top to bottom, each position picking
//! among the remaining members with probability proportional to
//! `exp(lambda + beta_s)`. Strengths are centered within each year (the
//! likelihood is shift-invariant, so only contrasts are identified) and
//! follow a centered AR(1) across years. The mixture model drops time and
//! covariates and mixes D strength vectors with Dirichlet weights.

use crate::pipeline::{Dataset, SeniorityTable};
use crate::summaries::{logsumexp, ElpdResult};
use crate::{ActorId, Error, Result, Year};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Time-series Plackett-Luce parameters. Both `lambda` columns and `beta`
/// sum to zero exactly; the samplers work in reduced coordinates, so the
/// constraint cannot drift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlState {
    /// Actor ids, sorted; `lambda[t][i]` pairs with `actors[i]`.
    pub actors: Vec<ActorId>,
    pub lambda: BTreeMap<Year, Vec<f64>>,
    /// Centered covariate level effects; empty when unused.
    pub beta: Vec<f64>,
    pub theta: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub bandwidth: f64,
    pub prior_only: bool,
    /// Attach the seniority covariate to the strengths.
    pub use_covariates: bool,
}

impl Default for PlConfig {
    fn default() -> Self {
        Self {
            sweeps: 4000,
            burn_in: 1000,
            thin: 1,
            seed: 1,
            bandwidth: 0.2,
            prior_only: false,
            use_covariates: false,
        }
    }
}

/// Midpoint of each list's date interval; the time-series model fixes list
/// years there instead of sampling them.
pub fn midpoints(data: &Dataset) -> Vec<Year> {
    data.lists
        .iter()
        .map(|l| l.tau_minus + (l.tau_plus - l.tau_minus) / 2)
        .collect()
}

fn actor_index(actors: &[ActorId], a: ActorId) -> Result<usize> {
    actors.binary_search(&a).map_err(|_| Error::UnknownActor(a))
}

/// Log likelihood of one list under strengths `lam` (indexed like
/// `actors`) and level effects `beta` for year `t`.
fn pl_list_loglik(
    actors: &[ActorId],
    lam: &[f64],
    beta: &[f64],
    seniority: &SeniorityTable,
    t: Year,
    entries: &[ActorId],
) -> Result<f64> {
    let mut scores = Vec::with_capacity(entries.len());
    for &a in entries {
        let mut s = lam[actor_index(actors, a)?];
        if !beta.is_empty() {
            let level = seniority
                .level(t, a)
                .ok_or(Error::MissingCovariate { actor: a, year: t })?;
            s += beta
                .get(level - 1)
                .copied()
                .ok_or(Error::MissingCovariate { actor: a, year: t })?;
        }
        scores.push(s);
    }
    let mut lp = 0.0;
    for j in 0..scores.len() {
        lp += scores[j] - logsumexp(&scores[j..]);
    }
    Ok(lp)
}

/// Total log likelihood with list years fixed at interval midpoints.
pub fn pl_loglik(data: &Dataset, state: &PlState, seniority: &SeniorityTable) -> Result<f64> {
    let taus = midpoints(data);
    let mut lp = 0.0;
    for (i, list) in data.lists.iter().enumerate() {
        let t = taus[i];
        let lam = state
            .lambda
            .get(&t)
            .ok_or_else(|| Error::Domain(format!("no strengths for year {t}")))?;
        lp += pl_list_loglik(
            &state.actors,
            lam,
            &state.beta,
            seniority,
            t,
            list.entries.entries(),
        )?;
    }
    Ok(lp)
}

/// Appends the balancing coordinate so the vector sums to zero exactly.
fn expand_centered(reduced: &[f64]) -> Vec<f64> {
    let mut full = reduced.to_vec();
    full.push(-reduced.iter().sum::<f64>());
    full
}

/// log N(v; mean, c * A) on reduced coordinates, where A is the centering
/// projection I - J/M expressed in the first M-1 coordinates. Then
/// A^{-1} = I + J, so the quadratic form is |v - mean|^2 plus the squared
/// coordinate sum, and det A = 1/M.
fn centered_gauss_logpdf(v: &[f64], mean: Option<&[f64]>, c: f64) -> f64 {
    let d = v.len();
    if d == 0 {
        return 0.0;
    }
    let m = d as f64 + 1.0;
    let diff: Vec<f64> = match mean {
        Some(mu) => v.iter().zip(mu).map(|(a, b)| a - b).collect(),
        None => v.to_vec(),
    };
    let ss: f64 = diff.iter().map(|x| x * x).sum();
    let s: f64 = diff.iter().sum();
    -0.5 * d as f64 * (2.0 * std::f64::consts::PI * c).ln() + 0.5 * m.ln()
        - (ss + s * s) / (2.0 * c)
}

/// Joint log prior: centered AR(1) over the per-year reduced strengths
/// (stationary start), a centered unit Gaussian on the reduced effects, a
/// uniform theta, and sigma ~ Gamma(2, 2).
pub fn pl_prior_logpdf(state: &PlState) -> f64 {
    if !(0.0..1.0).contains(&state.theta) || state.sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let theta = state.theta;
    let s2 = state.sigma * state.sigma;
    let mut lp = 0.0;
    // Gamma(2, 2) on sigma: rate^shape / Gamma(shape) * s exp(-2s).
    lp += (2.0f64 * 2.0).ln() + state.sigma.ln() - 2.0 * state.sigma;
    let mut prev: Option<&Vec<f64>> = None;
    for lam in state.lambda.values() {
        let v = &lam[..lam.len() - 1];
        lp += match prev {
            None => centered_gauss_logpdf(v, None, s2 / (1.0 - theta * theta)),
            Some(p) => {
                let mean: Vec<f64> = p[..p.len() - 1].iter().map(|x| theta * x).collect();
                centered_gauss_logpdf(v, Some(&mean), s2)
            }
        };
        prev = Some(lam);
    }
    if !state.beta.is_empty() {
        lp += centered_gauss_logpdf(&state.beta[..state.beta.len() - 1], None, 1.0);
    }
    lp
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlSample {
    pub state: PlState,
    pub loglik: f64,
}

#[derive(Debug)]
pub struct PlRun {
    pub samples: Vec<PlSample>,
    pub accept_lambda: f64,
    pub accept_scalar: f64,
}

struct PlSampler<'a> {
    data: &'a Dataset,
    seniority: SeniorityTable,
    actors: Vec<ActorId>,
    years: Vec<Year>,
    taus: Vec<Year>,
    n_levels: usize,
    cfg: PlConfig,
    // reduced coordinates
    v: Vec<Vec<f64>>,
    beta_red: Vec<f64>,
    theta: f64,
    sigma: f64,
    ll_lists: Vec<f64>,
    rng: ChaCha20Rng,
    prop_lambda: (u64, u64),
    prop_scalar: (u64, u64),
}

impl<'a> PlSampler<'a> {
    fn new(data: &'a Dataset, cfg: PlConfig) -> Result<Self> {
        if data.lists.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let actors: Vec<ActorId> = data.actors.iter().map(|a| a.id).collect();
        if actors.len() < 2 {
            return Err(Error::InsufficientData("need at least two actors".into()));
        }
        let (b, e) = data.window;
        let years: Vec<Year> = (b..=e).collect();
        let (seniority, n_levels) = if cfg.use_covariates {
            let s = data.seniority();
            let n = s.s_max;
            (s, n)
        } else {
            (SeniorityTable::empty(), 0)
        };
        let mut sampler = Self {
            data,
            seniority,
            taus: midpoints(data),
            n_levels,
            v: vec![vec![0.0; actors.len() - 1]; years.len()],
            beta_red: vec![0.0; n_levels.saturating_sub(1)],
            theta: 0.5,
            sigma: 1.0,
            ll_lists: vec![0.0; data.lists.len()],
            rng: ChaCha20Rng::seed_from_u64(cfg.seed),
            prop_lambda: (0, 0),
            prop_scalar: (0, 0),
            actors,
            years,
            cfg,
        };
        sampler.ll_lists = sampler.ll_all()?;
        Ok(sampler)
    }

    fn beta_full(&self) -> Vec<f64> {
        if self.n_levels == 0 {
            Vec::new()
        } else {
            expand_centered(&self.beta_red)
        }
    }

    fn state(&self) -> PlState {
        let lambda: BTreeMap<Year, Vec<f64>> = self
            .years
            .iter()
            .zip(&self.v)
            .map(|(&t, v)| (t, expand_centered(v)))
            .collect();
        PlState {
            actors: self.actors.clone(),
            lambda,
            beta: self.beta_full(),
            theta: self.theta,
            sigma: self.sigma,
        }
    }

    fn prior_logpdf(&self) -> f64 {
        pl_prior_logpdf(&self.state())
    }

    fn ll_list(&self, i: usize) -> Result<f64> {
        if self.cfg.prior_only {
            return Ok(0.0);
        }
        let t = self.taus[i];
        let yi = self
            .years
            .binary_search(&t)
            .map_err(|_| Error::Domain(format!("list dated {t} outside the window")))?;
        pl_list_loglik(
            &self.actors,
            &expand_centered(&self.v[yi]),
            &self.beta_full(),
            &self.seniority,
            t,
            self.data.lists[i].entries.entries(),
        )
    }

    fn ll_all(&self) -> Result<Vec<f64>> {
        (0..self.data.lists.len()).map(|i| self.ll_list(i)).collect()
    }

    fn accept(&mut self, log_acc: f64) -> bool {
        log_acc >= 0.0 || self.rng.gen::<f64>().ln() < log_acc
    }

    /// Full conditional of year `yi` under the AR prior given its
    /// neighbours: mean and isotropic scale of a centered Gaussian.
    fn ar_conditional(&self, yi: usize) -> (Vec<f64>, f64) {
        let t2 = self.theta * self.theta;
        let s2 = self.sigma * self.sigma;
        let d = self.actors.len() - 1;
        let has_prev = yi > 0;
        let has_next = yi + 1 < self.v.len();
        match (has_prev, has_next) {
            (true, true) => {
                let w = self.theta / (1.0 + t2);
                let mean = (0..d).map(|i| w * (self.v[yi - 1][i] + self.v[yi + 1][i])).collect();
                (mean, s2 / (1.0 + t2))
            }
            (true, false) => ((0..d).map(|i| self.theta * self.v[yi - 1][i]).collect(), s2),
            (false, true) => ((0..d).map(|i| self.theta * self.v[yi + 1][i]).collect(), s2),
            (false, false) => (vec![0.0; d], s2 / (1.0 - t2)),
        }
    }

    /// Draw from N(0, c * A) in reduced coordinates: center d+1 iid
    /// normals and drop the last coordinate.
    fn sample_centered(&mut self, d: usize, c: f64) -> Vec<f64> {
        let w: Vec<f64> = (0..=d).map(|_| self.rng.sample(StandardNormal)).collect();
        let mean = w.iter().sum::<f64>() / (d as f64 + 1.0);
        w[..d].iter().map(|x| (x - mean) * c.sqrt()).collect()
    }

    /// Likelihood change if year `t`'s strengths moved; returns the delta
    /// and the refreshed per-list values.
    fn ll_delta_at(&self, t: Year) -> Result<(f64, Vec<(usize, f64)>)> {
        let mut delta = 0.0;
        let mut fresh = Vec::new();
        for i in 0..self.data.lists.len() {
            if self.taus[i] != t {
                continue;
            }
            let ll = self.ll_list(i)?;
            delta += ll - self.ll_lists[i];
            fresh.push((i, ll));
        }
        Ok((delta, fresh))
    }

    fn sweep(&mut self) -> Result<()> {
        // Scalars: a local random walk plus an independence draw from the
        // prior; the latter traverses the support even when the random
        // walk is stuck in a funnel.
        for which in 0..2 {
            for fresh in [false, true] {
                let old = if which == 0 { self.theta } else { self.sigma };
                let lp_old = self.prior_logpdf();
                let (new, log_q_ratio) = if fresh {
                    // Prior draw; Hastings ratio cancels the scalar's own
                    // prior factor, leaving the AR-density ratio.
                    if which == 0 {
                        (self.rng.gen::<f64>(), 0.0)
                    } else {
                        let prop: f64 =
                            Gamma::new(2.0, 0.5).expect("valid gamma").sample(&mut self.rng);
                        let gamma_lp = |s: f64| s.ln() - 2.0 * s;
                        (prop, gamma_lp(old) - gamma_lp(prop))
                    }
                } else {
                    let step: f64 =
                        self.rng.sample::<f64, _>(StandardNormal) * self.cfg.bandwidth;
                    (old + step, 0.0)
                };
                if which == 0 {
                    self.theta = new;
                } else {
                    self.sigma = new;
                }
                let lp_new = self.prior_logpdf();
                let ok = self.accept(lp_new - lp_old + log_q_ratio);
                self.prop_scalar.0 += 1;
                if ok {
                    self.prop_scalar.1 += 1;
                } else if which == 0 {
                    self.theta = old;
                } else {
                    self.sigma = old;
                }
            }
        }
        // Per-year strength vectors: a random walk, then an exact draw
        // from the AR full conditional (a Gibbs move when the year has no
        // lists).
        for yi in 0..self.years.len() {
            let t = self.years[yi];
            for fresh in [false, true] {
                let old_v = self.v[yi].clone();
                let lp_old = self.prior_logpdf();
                let log_q_ratio = if fresh {
                    let (mean, c) = self.ar_conditional(yi);
                    let step = self.sample_centered(mean.len(), c);
                    let prop: Vec<f64> = mean.iter().zip(&step).map(|(m, s)| m + s).collect();
                    let q_new = centered_gauss_logpdf(&prop, Some(&mean), c);
                    let q_old = centered_gauss_logpdf(&old_v, Some(&mean), c);
                    self.v[yi] = prop;
                    q_old - q_new
                } else {
                    for x in &mut self.v[yi] {
                        let step: f64 = self.rng.sample(StandardNormal);
                        *x += self.cfg.bandwidth * step;
                    }
                    0.0
                };
                let lp_new = self.prior_logpdf();
                let (delta_ll, new_ll) = self.ll_delta_at(t)?;
                let ok = self.accept(lp_new - lp_old + delta_ll + log_q_ratio);
                self.prop_lambda.0 += 1;
                if ok {
                    self.prop_lambda.1 += 1;
                    for (i, ll) in new_ll {
                        self.ll_lists[i] = ll;
                    }
                } else {
                    self.v[yi] = old_v;
                }
            }
        }
        // Effects.
        if !self.beta_red.is_empty() {
            let old = self.beta_red.clone();
            let lp_old = self.prior_logpdf();
            for x in &mut self.beta_red {
                let step: f64 = self.rng.sample(StandardNormal);
                *x += self.cfg.bandwidth * step;
            }
            let lp_new = self.prior_logpdf();
            let ll = self.ll_all()?;
            let log_acc =
                lp_new - lp_old + ll.iter().sum::<f64>() - self.ll_lists.iter().sum::<f64>();
            let ok = self.accept(log_acc);
            self.prop_scalar.0 += 1;
            if ok {
                self.prop_scalar.1 += 1;
                self.ll_lists = ll;
            } else {
                self.beta_red = old;
            }
        }
        Ok(())
    }
}

/// Random-walk MH fit of the time-series model.
pub fn pl_fit(data: &Dataset, cfg: &PlConfig) -> Result<PlRun> {
    let mut s = PlSampler::new(data, cfg.clone())?;
    let mut samples = Vec::new();
    for sweep in 1..=s.cfg.sweeps {
        s.sweep()?;
        if sweep > s.cfg.burn_in && (sweep - s.cfg.burn_in) % s.cfg.thin == 0 {
            samples.push(PlSample {
                state: s.state(),
                loglik: s.ll_lists.iter().sum(),
            });
        }
    }
    Ok(PlRun {
        samples,
        accept_lambda: s.prop_lambda.1 as f64 / s.prop_lambda.0.max(1) as f64,
        accept_scalar: s.prop_scalar.1 as f64 / s.prop_scalar.0.max(1) as f64,
    })
}

/// Draws a ranking of `0..n` from a static Plackett-Luce law.
pub fn pl_sample_ranking<R: Rng>(log_strengths: &[f64], rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..log_strengths.len()).collect();
    let mut out = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let scores: Vec<f64> = remaining.iter().map(|&i| log_strengths[i]).collect();
        let lse = logsumexp(&scores);
        let mut u = rng.gen::<f64>();
        let mut pick = remaining.len() - 1;
        for (pos, &sc) in scores.iter().enumerate() {
            let p = (sc - lse).exp();
            if u < p {
                pick = pos;
                break;
            }
            u -= p;
        }
        out.push(remaining.remove(pick));
    }
    out
}

/// Static mixture parameters over a fixed actor set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlMixState {
    pub actors: Vec<ActorId>,
    /// `log_strength[d][i]` pairs component d with `actors[i]`.
    pub log_strength: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn plmix_list_loglik(st: &PlMixState, entries: &[ActorId]) -> Result<f64> {
    let mut per_comp = Vec::with_capacity(st.log_strength.len());
    for (lam, &w) in st.log_strength.iter().zip(&st.weights) {
        let mut scores = Vec::with_capacity(entries.len());
        for &a in entries {
            scores.push(lam[actor_index(&st.actors, a)?]);
        }
        let mut lp = 0.0;
        for j in 0..scores.len() {
            lp += scores[j] - logsumexp(&scores[j..]);
        }
        per_comp.push(if w > 0.0 { w.ln() + lp } else { f64::NEG_INFINITY });
    }
    Ok(logsumexp(&per_comp))
}

/// Mixture log likelihood: each list is explained by a latent component.
pub fn plmix_loglik(data: &Dataset, st: &PlMixState) -> Result<f64> {
    let mut lp = 0.0;
    for l in &data.lists {
        lp += plmix_list_loglik(st, l.entries.entries())?;
    }
    Ok(lp)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlMixSample {
    pub state: PlMixState,
    pub loglik: f64,
}

#[derive(Debug)]
pub struct PlMixRun {
    pub samples: Vec<PlMixSample>,
}

/// Strength prior: exp(lambda) ~ Gamma(1, 0.001), i.e. exponential with
/// rate 0.001, diffuse over several orders of magnitude.
const STRENGTH_RATE: f64 = 0.001;

fn log_prior_strength(lam: f64) -> f64 {
    // Density of lambda = ln w, w ~ Exp(rate): rate * exp(-rate e^l) * e^l.
    STRENGTH_RATE.ln() - STRENGTH_RATE * lam.exp() + lam
}

/// Caron-Doucet Gibbs sampler: latent exponential stage variables make the
/// strengths conditionally Gamma, and Dirichlet weights follow from the
/// component allocations. The MH fallback (`gibbs = false`) random-walks
/// the log-strengths and logit weights instead; both target the same
/// posterior.
pub fn plmix_fit(data: &Dataset, d: usize, cfg: &PlConfig, gibbs: bool) -> Result<PlMixRun> {
    if d < 1 {
        return Err(Error::Domain("need at least one component".into()));
    }
    if data.lists.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let actors: Vec<ActorId> = data.actors.iter().map(|a| a.id).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    // Entries as indices into `actors` for the hot loops.
    let mut lists_idx: Vec<Vec<usize>> = Vec::with_capacity(data.lists.len());
    for l in &data.lists {
        let idx: Result<Vec<usize>> = l
            .entries
            .entries()
            .iter()
            .map(|&a| actor_index(&actors, a))
            .collect();
        lists_idx.push(idx?);
    }
    let m = actors.len();
    let mut st = PlMixState {
        actors,
        log_strength: vec![vec![0.0; m]; d],
        weights: vec![1.0 / d as f64; d],
    };
    // Overdispersed start so components differ.
    for lam in &mut st.log_strength {
        for x in lam.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = z;
        }
    }
    let mut samples = Vec::new();
    let mut gfree: Vec<f64> = vec![0.0; d.saturating_sub(1)]; // MH weight coordinates
    for sweep in 1..=cfg.sweeps {
        if gibbs {
            gibbs_sweep(data, &lists_idx, &mut st, d, &mut rng)?;
        } else {
            mh_sweep(data, &lists_idx, &mut st, &mut gfree, cfg.bandwidth, &mut rng)?;
        }
        if sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0 {
            let loglik = plmix_loglik(data, &st)?;
            samples.push(PlMixSample { state: st.clone(), loglik });
        }
    }
    Ok(PlMixRun { samples })
}

fn list_loglik_idx(lam: &[f64], idx: &[usize]) -> f64 {
    let scores: Vec<f64> = idx.iter().map(|&i| lam[i]).collect();
    let mut lp = 0.0;
    for j in 0..scores.len() {
        lp += scores[j] - logsumexp(&scores[j..]);
    }
    lp
}

fn gibbs_sweep(
    data: &Dataset,
    lists_idx: &[Vec<usize>],
    st: &mut PlMixState,
    d: usize,
    rng: &mut ChaCha20Rng,
) -> Result<()> {
    let m = st.actors.len();
    // (1) Allocate each list to a component.
    let mut alloc = vec![0usize; data.lists.len()];
    let mut counts = vec![0usize; d];
    for (i, idx) in lists_idx.iter().enumerate() {
        let logw: Vec<f64> = (0..d)
            .map(|c| st.weights[c].max(1e-300).ln() + list_loglik_idx(&st.log_strength[c], idx))
            .collect();
        let lse = logsumexp(&logw);
        let mut u = rng.gen::<f64>();
        let mut pick = d - 1;
        for (c, &lw) in logw.iter().enumerate() {
            let p = (lw - lse).exp();
            if u < p {
                pick = c;
                break;
            }
            u -= p;
        }
        alloc[i] = pick;
        counts[pick] += 1;
    }
    // (2) Latent stage rates and conjugate strength updates per component.
    for c in 0..d {
        let mut chosen = vec![0f64; m];
        let mut rate = vec![0f64; m];
        let w: Vec<f64> = st.log_strength[c].iter().map(|l| l.exp()).collect();
        for (i, idx) in lists_idx.iter().enumerate() {
            if alloc[i] != c {
                continue;
            }
            for j in 0..idx.len() {
                let total: f64 = idx[j..].iter().map(|&k| w[k]).sum();
                let z = Exp::new(total.max(1e-300)).expect("positive rate").sample(rng);
                chosen[idx[j]] += 1.0;
                for &k in &idx[j..] {
                    rate[k] += z;
                }
            }
        }
        for i in 0..m {
            let shape = 1.0 + chosen[i];
            let scale = 1.0 / (STRENGTH_RATE + rate[i]);
            let wnew = Gamma::new(shape, scale).expect("valid gamma").sample(rng);
            st.log_strength[c][i] = wnew.max(1e-300).ln();
        }
    }
    // (3) Weights from the allocation counts.
    let draws: Vec<f64> = counts
        .iter()
        .map(|&n| Gamma::new(1.0 + n as f64, 1.0).expect("valid gamma").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    for (wgt, dr) in st.weights.iter_mut().zip(draws) {
        *wgt = dr / total;
    }
    Ok(())
}

fn mh_sweep(
    data: &Dataset,
    lists_idx: &[Vec<usize>],
    st: &mut PlMixState,
    gfree: &mut Vec<f64>,
    bandwidth: f64,
    rng: &mut ChaCha20Rng,
) -> Result<()> {
    let d = st.log_strength.len();
    let loglik_all = |st: &PlMixState| -> f64 {
        lists_idx
            .iter()
            .map(|idx| {
                let per: Vec<f64> = st
                    .log_strength
                    .iter()
                    .zip(&st.weights)
                    .map(|(lam, &w)| w.max(1e-300).ln() + list_loglik_idx(lam, idx))
                    .collect();
                logsumexp(&per)
            })
            .sum()
    };
    let _ = data;
    // Strength coordinates.
    for c in 0..d {
        for i in 0..st.log_strength[c].len() {
            let old = st.log_strength[c][i];
            let ll_old = loglik_all(st);
            let lp_old = log_prior_strength(old);
            let step: f64 = rng.sample(StandardNormal);
            st.log_strength[c][i] = old + bandwidth * step;
            let ll_new = loglik_all(st);
            let lp_new = log_prior_strength(st.log_strength[c][i]);
            let log_acc = ll_new - ll_old + lp_new - lp_old;
            if !(log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc) {
                st.log_strength[c][i] = old;
            }
        }
    }
    // Weight coordinates: additive logistic with the last component pinned;
    // a flat Dirichlet prior becomes proportional to the product of the
    // weights (the transform's Jacobian).
    if d > 1 {
        let weights_of = |g: &[f64]| -> Vec<f64> {
            let mut e: Vec<f64> = g.iter().map(|x| x.exp()).collect();
            e.push(1.0);
            let tot: f64 = e.iter().sum();
            e.into_iter().map(|x| x / tot).collect()
        };
        for i in 0..gfree.len() {
            let old = gfree[i];
            let ll_old = loglik_all(st);
            let jac_old: f64 = st.weights.iter().map(|w| w.max(1e-300).ln()).sum();
            let step: f64 = rng.sample(StandardNormal);
            gfree[i] = old + bandwidth * step;
            let wnew = weights_of(gfree);
            let old_weights = std::mem::replace(&mut st.weights, wnew);
            let ll_new = loglik_all(st);
            let jac_new: f64 = st.weights.iter().map(|w| w.max(1e-300).ln()).sum();
            let log_acc = ll_new - ll_old + jac_new - jac_old;
            if !(log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc) {
                gfree[i] = old;
                st.weights = old_weights;
            }
        }
    }
    Ok(())
}

/// Deviance information criterion: mean deviance plus the effective
/// parameter count (mean deviance minus deviance at the posterior mean).
pub fn dic(samples: &[PlMixSample], data: &Dataset) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let n = samples.len() as f64;
    let d_bar = samples.iter().map(|s| -2.0 * s.loglik).sum::<f64>() / n;
    let d0 = samples[0].state.log_strength.len();
    let m = samples[0].state.actors.len();
    let mut mean = PlMixState {
        actors: samples[0].state.actors.clone(),
        log_strength: vec![vec![0.0; m]; d0],
        weights: vec![0.0; d0],
    };
    for s in samples {
        for c in 0..d0 {
            for i in 0..m {
                mean.log_strength[c][i] += s.state.log_strength[c][i] / n;
            }
            mean.weights[c] += s.state.weights[c] / n;
        }
    }
    let d_hat = -2.0 * plmix_loglik(data, &mean)?;
    let p_d = d_bar - d_hat;
    Ok(d_bar + p_d)
}

/// Leave-one-out predictive score for the mixture model, refitting per
/// fold.
pub fn elpd_loo_plmix(data: &Dataset, d: usize, cfg: &PlConfig, gibbs: bool) -> Result<ElpdResult> {
    let n = data.lists.len();
    if n < 2 {
        return Err(Error::InsufficientData("need at least two lists".into()));
    }
    let mut per_item = Vec::with_capacity(n);
    for i in 0..n {
        let rest = data.without_list(i);
        let fold_cfg = PlConfig { seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() };
        let run = plmix_fit(&rest, d, &fold_cfg, gibbs)?;
        if run.samples.is_empty() {
            return Err(Error::InsufficientData("fold produced no samples".into()));
        }
        let held = data.lists[i].entries.entries();
        let lps: Result<Vec<f64>> = run
            .samples
            .iter()
            .map(|s| plmix_list_loglik(&s.state, held))
            .collect();
        let lps = lps?;
        per_item.push(logsumexp(&lps) - (lps.len() as f64).ln());
    }
    Ok(ElpdResult::from_items(per_item))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{ActorRecord, ListRecord};
    use crate::poset::RankList;
    use approx::assert_abs_diff_eq;

    fn actor(id: ActorId) -> ActorRecord {
        ActorRecord {
            id,
            name: String::new(),
            group: String::new(),
            begin_year: 1100,
            end_year: 1105,
            focus: true,
        }
    }

    fn list(id: u32, t: Year, entries: &[ActorId]) -> ListRecord {
        ListRecord {
            id,
            tau_minus: t,
            tau_plus: t,
            entries: RankList::new(entries.to_vec()).unwrap(),
        }
    }

    fn flat_state(actors: Vec<ActorId>, years: &[Year]) -> PlState {
        let m = actors.len();
        PlState {
            actors,
            lambda: years.iter().map(|&t| (t, vec![0.0; m])).collect(),
            beta: vec![],
            theta: 0.5,
            sigma: 1.0,
        }
    }

    fn three_actor_data(lists: Vec<ListRecord>) -> Dataset {
        Dataset {
            actors: vec![actor(1), actor(2), actor(3)],
            lists,
            window: (1100, 1105),
        }
    }

    #[test]
    fn zero_strengths_give_uniform_rankings() {
        let data = three_actor_data(vec![list(1, 1102, &[2, 1, 3]), list(2, 1103, &[1, 3])]);
        let st = flat_state(vec![1, 2, 3], &[1102, 1103]);
        let lp = pl_loglik(&data, &st, &SeniorityTable::empty()).unwrap();
        assert_abs_diff_eq!(lp, -(6f64).ln() - (2f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn strengths_two_one_one() {
        let data = three_actor_data(vec![list(1, 1100, &[1, 2, 3])]);
        let mut st = flat_state(vec![1, 2, 3], &[1100]);
        st.lambda.insert(1100, vec![(2f64).ln(), 0.0, 0.0]);
        let lp = pl_loglik(&data, &st, &SeniorityTable::empty()).unwrap();
        assert_abs_diff_eq!(lp, (0.25f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn shift_invariance_is_exact() {
        let data = three_actor_data(vec![list(1, 1101, &[3, 1, 2]), list(2, 1101, &[2, 3])]);
        let mut st = flat_state(vec![1, 2, 3], &[1101]);
        st.lambda.insert(1101, vec![0.4, -1.2, 0.3]);
        let base = pl_loglik(&data, &st, &SeniorityTable::empty()).unwrap();
        st.lambda.insert(1101, vec![0.4 + 7.0, -1.2 + 7.0, 0.3 + 7.0]);
        let shifted = pl_loglik(&data, &st, &SeniorityTable::empty()).unwrap();
        assert_abs_diff_eq!(base, shifted, epsilon = 1e-12);
    }

    #[test]
    fn list_probabilities_sum_to_one() {
        fn perms(items: &[ActorId]) -> Vec<Vec<ActorId>> {
            if items.len() <= 1 {
                return vec![items.to_vec()];
            }
            let mut out = Vec::new();
            for (i, &x) in items.iter().enumerate() {
                let mut rest = items.to_vec();
                rest.remove(i);
                for mut tail in perms(&rest) {
                    tail.insert(0, x);
                    out.push(tail);
                }
            }
            out
        }
        let mut st = flat_state(vec![1, 2, 3, 4], &[1100]);
        st.lambda.insert(1100, vec![0.7, -0.3, 1.1, -0.5]);
        let total: f64 = perms(&[1, 2, 3, 4])
            .into_iter()
            .map(|p| {
                let data = Dataset {
                    actors: vec![actor(1), actor(2), actor(3), actor(4)],
                    lists: vec![list(1, 1100, &p)],
                    window: (1100, 1105),
                };
                pl_loglik(&data, &st, &SeniorityTable::empty()).unwrap().exp()
            })
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn prior_at_theta_zero_factorizes() {
        // With theta = 0 the AR chain is independent years, so permuting
        // years leaves the density unchanged.
        let mut st = flat_state(vec![1, 2, 3], &[1100, 1101]);
        st.theta = 0.0;
        st.lambda.insert(1100, expand_centered(&[0.3, -0.5]));
        st.lambda.insert(1101, expand_centered(&[-0.9, 0.2]));
        let a = pl_prior_logpdf(&st);
        let l0 = st.lambda[&1100].clone();
        let l1 = st.lambda[&1101].clone();
        st.lambda.insert(1100, l1);
        st.lambda.insert(1101, l0);
        let b = pl_prior_logpdf(&st);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        st.theta = -0.1;
        assert_eq!(pl_prior_logpdf(&st), f64::NEG_INFINITY);
        st.theta = 0.5;
        st.sigma = 0.0;
        assert_eq!(pl_prior_logpdf(&st), f64::NEG_INFINITY);
    }

    #[test]
    fn centering_projection_is_idempotent() {
        // Q = I - J/M applied twice equals applying it once.
        let m = 4;
        let q = |v: &[f64]| -> Vec<f64> {
            let mean = v.iter().sum::<f64>() / m as f64;
            v.iter().map(|x| x - mean).collect()
        };
        let v = vec![0.3, -1.0, 2.0, 0.4];
        let once = q(&v);
        let twice = q(&once);
        for (a, b) in once.iter().zip(&twice) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // And expansion lands exactly on the sum-zero subspace.
        let full = expand_centered(&[0.25, -1.5, 0.3]);
        assert_abs_diff_eq!(full.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reduced_density_matches_dense_gaussian() {
        // Compare against an explicit (M-1)-dim Gaussian with covariance
        // c * (I - J/M).
        let v = [0.4, -0.2, 0.7];
        let c = 1.7;
        let m = 4.0;
        let mut cov: nalgebra::DMatrix<f64> = nalgebra::DMatrix::from_fn(3, 3, |i, j| {
            c * (if i == j { 1.0 } else { 0.0 } - 1.0 / m)
        });
        for i in 0..3 {
            cov[(i, i)] = c * (1.0 - 1.0 / m);
        }
        let chol = nalgebra::Cholesky::new(cov).unwrap();
        let xv = nalgebra::DVector::from_row_slice(&v);
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let quad = xv.dot(&chol.solve(&xv));
        let want = -0.5 * 3.0 * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * quad;
        assert_abs_diff_eq!(centered_gauss_logpdf(&v, None, c), want, epsilon = 1e-9);
    }

    #[test]
    fn prior_only_fit_recovers_theta_and_sigma_moments() {
        let data = three_actor_data(vec![list(1, 1101, &[1, 2]), list(2, 1102, &[2, 1])]);
        let cfg = PlConfig {
            sweeps: 30_000,
            burn_in: 5_000,
            thin: 5,
            seed: 11,
            prior_only: true,
            ..PlConfig::default()
        };
        let run = pl_fit(&data, &cfg).unwrap();
        let n = run.samples.len() as f64;
        let mean_theta = run.samples.iter().map(|s| s.state.theta).sum::<f64>() / n;
        let mean_sigma = run.samples.iter().map(|s| s.state.sigma).sum::<f64>() / n;
        // theta ~ U(0,1) mean 1/2; sigma ~ Gamma(2,2) mean 1.
        assert_abs_diff_eq!(mean_theta, 0.5, epsilon = 0.05);
        assert_abs_diff_eq!(mean_sigma, 1.0, epsilon = 0.08);
    }

    #[test]
    fn fit_is_deterministic_in_the_seed() {
        let data = three_actor_data(vec![
            list(1, 1101, &[1, 2, 3]),
            list(2, 1102, &[2, 1]),
            list(3, 1103, &[1, 3]),
        ]);
        let cfg = PlConfig { sweeps: 200, burn_in: 50, seed: 4, ..PlConfig::default() };
        let a = pl_fit(&data, &cfg).unwrap();
        let b = pl_fit(&data, &cfg).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.state.theta, y.state.theta);
            assert_eq!(x.loglik, y.loglik);
        }
        let c = pl_fit(&data, &PlConfig { seed: 5, ..cfg }).unwrap();
        assert!(a.samples.iter().zip(&c.samples).any(|(x, y)| x.state.theta != y.state.theta));
    }

    #[test]
    fn sampler_centers_every_draw_exactly() {
        let data = three_actor_data(vec![list(1, 1101, &[1, 2, 3]), list(2, 1102, &[3, 1])]);
        let cfg = PlConfig { sweeps: 300, burn_in: 100, seed: 8, ..PlConfig::default() };
        let run = pl_fit(&data, &cfg).unwrap();
        for s in &run.samples {
            for lam in s.state.lambda.values() {
                assert_abs_diff_eq!(lam.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mixture_with_one_component_matches_static_pl() {
        let data = three_actor_data(vec![list(1, 1100, &[1, 2, 3]), list(2, 1100, &[2, 3])]);
        let st = PlMixState {
            actors: vec![1, 2, 3],
            log_strength: vec![vec![0.9, -0.1, 0.2]],
            weights: vec![1.0],
        };
        let flat = PlState {
            actors: vec![1, 2, 3],
            lambda: BTreeMap::from([(1100, vec![0.9, -0.1, 0.2])]),
            beta: vec![],
            theta: 0.5,
            sigma: 1.0,
        };
        let a = plmix_loglik(&data, &st).unwrap();
        let b = pl_loglik(&data, &flat, &SeniorityTable::empty()).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn identical_components_make_weights_irrelevant() {
        let data = three_actor_data(vec![list(1, 1100, &[3, 2, 1])]);
        let lam = vec![0.4, 0.0, -0.4];
        let a = plmix_loglik(
            &data,
            &PlMixState {
                actors: vec![1, 2, 3],
                log_strength: vec![lam.clone(), lam.clone()],
                weights: vec![0.9, 0.1],
            },
        )
        .unwrap();
        let b = plmix_loglik(
            &data,
            &PlMixState {
                actors: vec![1, 2, 3],
                log_strength: vec![lam.clone(), lam],
                weights: vec![0.2, 0.8],
            },
        )
        .unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_weight_silences_a_component() {
        let data = three_actor_data(vec![list(1, 1100, &[1, 2])]);
        let good = vec![1.0, 0.0, 0.0];
        let junk = vec![-9.0, 9.0, 0.0];
        let a = plmix_loglik(
            &data,
            &PlMixState {
                actors: vec![1, 2, 3],
                log_strength: vec![good.clone(), junk],
                weights: vec![1.0, 0.0],
            },
        )
        .unwrap();
        let b = plmix_loglik(
            &data,
            &PlMixState {
                actors: vec![1, 2, 3],
                log_strength: vec![good],
                weights: vec![1.0],
            },
        )
        .unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn dic_point_mass_has_zero_parameter_count() {
        let data = three_actor_data(vec![list(1, 1100, &[1, 2, 3])]);
        let st = PlMixState {
            actors: vec![1, 2, 3],
            log_strength: vec![vec![0.5, 0.0, -0.5]],
            weights: vec![1.0],
        };
        let ll = plmix_loglik(&data, &st).unwrap();
        let samples: Vec<PlMixSample> = (0..5)
            .map(|_| PlMixSample { state: st.clone(), loglik: ll })
            .collect();
        assert_abs_diff_eq!(dic(&samples, &data).unwrap(), -2.0 * ll, epsilon = 1e-10);
    }

    #[test]
    fn dic_penalizes_posterior_spread() {
        let data = three_actor_data(vec![list(1, 1100, &[1, 2, 3])]);
        let mk = |delta: f64| -> Vec<PlMixSample> {
            [-delta, delta]
                .iter()
                .map(|&e| {
                    let st = PlMixState {
                        actors: vec![1, 2, 3],
                        log_strength: vec![vec![e, 0.0, -e]],
                        weights: vec![1.0],
                    };
                    let loglik = plmix_loglik(&data, &st).unwrap();
                    PlMixSample { state: st, loglik }
                })
                .collect()
        };
        let tight = dic(&mk(0.1), &data).unwrap();
        let wide = dic(&mk(1.5), &data).unwrap();
        // Same posterior mean (zero vector), wider spread, higher DIC.
        assert!(wide > tight);
    }

    #[test]
    fn gibbs_and_mh_agree_on_a_small_mixture() {
        // One dominant pattern plus occasional reversals; compare
        // label-invariant summaries across the two samplers.
        let mut lists = Vec::new();
        for i in 0..8 {
            lists.push(list(i, 1100, &[1, 2, 3, 4]));
        }
        for i in 8..12 {
            lists.push(list(i, 1100, &[4, 3, 2, 1]));
        }
        let data = Dataset {
            actors: vec![actor(1), actor(2), actor(3), actor(4)],
            lists,
            window: (1100, 1105),
        };
        let cfg = PlConfig {
            sweeps: 6000,
            burn_in: 2000,
            thin: 2,
            seed: 21,
            ..PlConfig::default()
        };
        let g = plmix_fit(&data, 2, &cfg, true).unwrap();
        let m = plmix_fit(&data, 2, &PlConfig { seed: 22, ..cfg }, false).unwrap();
        let summarize = |run: &PlMixRun| -> (f64, f64) {
            let n = run.samples.len() as f64;
            let mean_ll = run.samples.iter().map(|s| s.loglik).sum::<f64>() / n;
            let mean_wmax = run
                .samples
                .iter()
                .map(|s| s.state.weights.iter().cloned().fold(0.0, f64::max))
                .sum::<f64>()
                / n;
            (mean_ll, mean_wmax)
        };
        let (ll_g, w_g) = summarize(&g);
        let (ll_m, w_m) = summarize(&m);
        // Generous MC tolerance; the two kernels mix very differently.
        assert!((ll_g - ll_m).abs() < 2.0, "loglik means {ll_g} vs {ll_m}");
        assert!((w_g - w_m).abs() < 0.12, "max-weight means {w_g} vs {w_m}");
    }

    #[test]
    fn flat_data_keeps_strengths_exchangeable() {
        // Every permutation of {1,2,3} once: no actor should stand out.
        let perms: Vec<Vec<ActorId>> = vec![
            vec![1, 2, 3],
            vec![1, 3, 2],
            vec![2, 1, 3],
            vec![2, 3, 1],
            vec![3, 1, 2],
            vec![3, 2, 1],
        ];
        let lists: Vec<ListRecord> = perms
            .into_iter()
            .enumerate()
            .map(|(i, p)| list(i as u32, 1100, &p))
            .collect();
        let data = three_actor_data(lists);
        let cfg = PlConfig { sweeps: 8000, burn_in: 2000, seed: 13, ..PlConfig::default() };
        let run = plmix_fit(&data, 1, &cfg, true).unwrap();
        let n = run.samples.len() as f64;
        // Compare mean within-sample relative strength shares.
        let mut shares = [0.0f64; 3];
        for s in &run.samples {
            let w: Vec<f64> = s.state.log_strength[0].iter().map(|l| l.exp()).collect();
            let tot: f64 = w.iter().sum();
            for i in 0..3 {
                shares[i] += w[i] / tot / n;
            }
        }
        for i in 0..3 {
            assert_abs_diff_eq!(shares[i], 1.0 / 3.0, epsilon = 0.05);
        }
    }

    #[test]
    fn ranking_sampler_matches_strengths() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let lam = vec![(2f64).ln(), 0.0, 0.0];
        let reps = 30_000;
        let mut first = [0usize; 3];
        for _ in 0..reps {
            let r = pl_sample_ranking(&lam, &mut rng);
            first[r[0]] += 1;
        }
        let f0 = first[0] as f64 / reps as f64;
        // P(actor 0 first) = 2/4.
        assert_abs_diff_eq!(f0, 0.5, epsilon = 0.01);
    }
}
