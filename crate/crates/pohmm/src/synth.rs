//! Synthetic dataset generation with a known ground truth: draw a latent
//! state from the model, realize per-year orders, and emit observed lists
//! through the same observation law the sampler inverts. Two modes: build
//! everything from size parameters, or reuse an existing dataset's
//! memberships and date intervals (template mode) and resample only the
//! orderings.

use crate::latent::{
    order_from_status, status_from, var1_sample, AuthoritySeries, Effects, StatusMatrix,
};
use crate::obsmodel::{sample_list, NoiseMode, NoiseModel};
use crate::pipeline::{ActorRecord, Dataset, ListRecord};
use crate::poset::{CountCache, PartialOrder};
use crate::{ActorId, Error, Result, Year};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// True generating parameters common to both modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub k: usize,
    pub rho: f64,
    pub theta: f64,
    pub p: f64,
    pub noise: NoiseMode,
    pub effects: TrueEffects,
}

/// How the true covariate effects are chosen.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum TrueEffects {
    /// No covariates in the generator.
    None,
    /// Strictly decreasing ladder over seniority levels:
    /// `beta_r = top - step * (r - 1)` with the level count taken from the
    /// generated actor registry.
    Decreasing { top: f64, step: f64 },
    /// Explicit per-level values; must cover the maximum seniority rank.
    Given(Vec<f64>),
}

/// Size-mode shape controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSpec {
    pub n_actors: usize,
    pub window: (Year, Year),
    pub n_lists: usize,
    /// Inclusive range of list sizes (capped by the active count).
    pub list_len: (usize, usize),
    /// Inclusive range of date-interval widths in years.
    pub interval_width: (Year, Year),
}

/// Everything needed to score a fit against the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTruth {
    pub rho: f64,
    pub theta: f64,
    pub p: f64,
    pub noise: NoiseMode,
    pub k: usize,
    pub beta: Vec<f64>,
    /// True year of each list, aligned with the dataset's list order.
    pub taus: Vec<Year>,
    /// Active actor count per year.
    pub actives: BTreeMap<Year, usize>,
    /// Depth of the true order per year.
    pub depths: BTreeMap<Year, usize>,
    pub orders: BTreeMap<Year, PartialOrder>,
}

fn validate(params: &SynthParams) -> Result<()> {
    if params.k < 1 {
        return Err(Error::Domain("need at least one latent feature".into()));
    }
    if !(0.0..1.0).contains(&params.rho) {
        return Err(Error::Domain(format!("rho {} outside [0,1)", params.rho)));
    }
    if !(0.0..1.0).contains(&params.theta) {
        return Err(Error::Domain(format!("theta {} outside [0,1)", params.theta)));
    }
    if !(0.0..=1.0).contains(&params.p) {
        return Err(Error::Domain(format!("p {} outside [0,1]", params.p)));
    }
    Ok(())
}

/// Draw the latent year-by-year orders implied by a fresh state.
fn draw_orders(
    data: &Dataset,
    params: &SynthParams,
    rng: &mut ChaCha20Rng,
) -> Result<(BTreeMap<Year, StatusMatrix>, Vec<f64>)> {
    let (b, e) = data.window;
    let mut us: Vec<AuthoritySeries> = Vec::with_capacity(data.actors.len());
    for a in &data.actors {
        let begin = a.begin_year.max(b);
        let end = a.end_year.min(e);
        us.push(var1_sample(a.id, begin, end, params.rho, params.theta, params.k, rng)?);
    }
    let seniority = data.seniority();
    let beta = match &params.effects {
        TrueEffects::None => Vec::new(),
        TrueEffects::Decreasing { top, step } => {
            if *step <= 0.0 {
                return Err(Error::Domain("effect step must be positive".into()));
            }
            (0..seniority.s_max).map(|r| top - step * r as f64).collect()
        }
        TrueEffects::Given(v) => {
            if v.len() < seniority.s_max {
                return Err(Error::Domain(format!(
                    "{} effect levels given but seniority reaches {}",
                    v.len(),
                    seniority.s_max
                )));
            }
            v.clone()
        }
    };
    let effects = Effects { beta: beta.clone() };
    let empty = BTreeMap::new();
    let mut status = BTreeMap::new();
    for t in b..=e {
        let levels = if effects.is_empty() {
            &empty
        } else {
            seniority.levels(t).unwrap_or(&empty)
        };
        status.insert(t, status_from(&us, &effects, levels, t)?);
    }
    Ok((status, beta))
}

/// Observe one list: restrict the year's order to the members and push it
/// through the noisy queue model.
fn observe(
    status: &BTreeMap<Year, StatusMatrix>,
    t: Year,
    members: &[ActorId],
    model: &NoiseModel,
    cache: &mut CountCache,
    rng: &mut ChaCha20Rng,
) -> Result<crate::poset::RankList> {
    let z = status
        .get(&t)
        .ok_or_else(|| Error::Domain(format!("no latent state for year {t}")))?;
    let order = order_from_status(z);
    let sub = order.suborder(members)?;
    sample_list(&sub, model, cache, rng)
}

fn truth_from(
    status: &BTreeMap<Year, StatusMatrix>,
    params: &SynthParams,
    beta: Vec<f64>,
    taus: Vec<Year>,
) -> SynthTruth {
    let mut actives = BTreeMap::new();
    let mut depths = BTreeMap::new();
    let mut orders = BTreeMap::new();
    for (&t, z) in status {
        let h = order_from_status(z);
        actives.insert(t, h.size());
        depths.insert(t, h.depth());
        orders.insert(t, h);
    }
    SynthTruth {
        rho: params.rho,
        theta: params.theta,
        p: params.p,
        noise: params.noise,
        k: params.k,
        beta,
        taus,
        actives,
        depths,
        orders,
    }
}

/// Generate a dataset from scratch. Actors get staggered activity windows
/// that always share the middle third of the study window, so every year
/// keeps at least two active actors.
pub fn synth_size(spec: &SizeSpec, params: &SynthParams, seed: u64) -> Result<(Dataset, SynthTruth)> {
    validate(params)?;
    let (b, e) = spec.window;
    if b > e {
        return Err(Error::InvalidInterval(b, e));
    }
    if spec.n_actors < 2 || spec.n_actors > 64 {
        return Err(Error::Domain(format!("{} actors outside 2..=64", spec.n_actors)));
    }
    if spec.list_len.0 < 2 || spec.list_len.0 > spec.list_len.1 {
        return Err(Error::Domain("list size range must be 2 <= lo <= hi".into()));
    }
    if spec.interval_width.0 < 0 || spec.interval_width.0 > spec.interval_width.1 {
        return Err(Error::Domain("interval width range must be 0 <= lo <= hi".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let span = e - b;
    let stagger = span / 3;
    let actors: Vec<ActorRecord> = (0..spec.n_actors)
        .map(|i| {
            // Two anchors span the whole window so no year goes below two
            // active actors; the rest start and stop at staggered years.
            let (begin, end) = if i < 2 || stagger == 0 {
                (b, e)
            } else {
                (b + rng.gen_range(0..=stagger), e - rng.gen_range(0..=stagger))
            };
            ActorRecord {
                id: (i + 1) as ActorId,
                name: format!("actor-{:02}", i + 1),
                group: "synthetic".into(),
                begin_year: begin,
                end_year: end.max(begin),
                focus: true,
            }
        })
        .collect();
    let mut data = Dataset { actors, lists: Vec::new(), window: spec.window };
    let (status, beta) = draw_orders(&data, params, &mut rng)?;
    let model = NoiseModel { mode: params.noise, p: params.p };
    let mut cache = CountCache::default();
    let mut taus = Vec::with_capacity(spec.n_lists);
    let mut lists = Vec::with_capacity(spec.n_lists);
    let by_id: BTreeMap<ActorId, (Year, Year)> =
        data.actors.iter().map(|a| (a.id, (a.begin_year, a.end_year))).collect();
    for i in 0..spec.n_lists {
        let (t, members) = loop {
            let t = rng.gen_range(b..=e);
            let mut active = data.active_set(t);
            if active.len() < 2 {
                continue;
            }
            let hi = spec.list_len.1.min(active.len());
            let lo = spec.list_len.0.min(hi);
            let size = rng.gen_range(lo..=hi);
            if size < 2 {
                continue;
            }
            // Fisher-Yates prefix for a uniform subset.
            for pos in 0..size {
                let swap = rng.gen_range(pos..active.len());
                active.swap(pos, swap);
            }
            active.truncate(size);
            break (t, active);
        };
        let entries = observe(&status, t, &members, &model, &mut cache, &mut rng)?;
        let width = rng.gen_range(spec.interval_width.0..=spec.interval_width.1);
        let offset = if width > 0 { rng.gen_range(0..=width) } else { 0 };
        let mut lo_t = (t - offset).max(b);
        let mut hi_t = (lo_t + width).min(e);
        // Keep the interval inside every member's activity; it always
        // still contains the true year.
        for m in &members {
            let (mb, me) = by_id[m];
            lo_t = lo_t.max(mb);
            hi_t = hi_t.min(me);
        }
        debug_assert!(lo_t <= t && t <= hi_t);
        taus.push(t);
        lists.push(ListRecord { id: (i + 1) as u32, tau_minus: lo_t, tau_plus: hi_t, entries });
    }
    data.lists = lists;
    let truth = truth_from(&status, params, beta, taus);
    Ok((data, truth))
}

/// Resample a dataset's orderings under a fresh latent state, preserving
/// every list's membership and date interval exactly.
pub fn synth_template(
    template: &Dataset,
    params: &SynthParams,
    seed: u64,
) -> Result<(Dataset, SynthTruth)> {
    validate(params)?;
    if template.lists.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (status, beta) = draw_orders(template, params, &mut rng)?;
    let model = NoiseModel { mode: params.noise, p: params.p };
    let mut cache = CountCache::default();
    let mut data = template.clone();
    let mut taus = Vec::with_capacity(data.lists.len());
    for list in &mut data.lists {
        let t = rng.gen_range(list.tau_minus..=list.tau_plus);
        let members = list.entries.members();
        list.entries = observe(&status, t, &members, &model, &mut cache, &mut rng)?;
        taus.push(t);
    }
    let truth = truth_from(&status, params, beta, taus);
    Ok((data, truth))
}
