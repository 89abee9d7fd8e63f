//! Posterior reductions: edge supports, consensus orders, authority curves,
//! depth distributions, Savage-Dickey Bayes factors, and held-out
//! predictive comparisons.

use crate::poset::{is_bucket, is_vsp, PartialOrder};
use crate::sampler::{ess, run_chain, McmcConfig, Model, Sample};
use crate::{ActorId, Error, Result, Year};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Pairwise posterior order probabilities for one year.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSupport {
    pub year: Year,
    pub actors: Vec<ActorId>,
    /// `prob[i][j]` estimates P(actors[i] above actors[j] | data).
    pub prob: Vec<Vec<f64>>,
    pub n_samples: usize,
}

pub fn edge_support(samples: &[Sample], t: Year) -> Result<EdgeSupport> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let first = samples[0]
        .orders
        .get(&t)
        .ok_or_else(|| Error::Domain(format!("no order for year {t}")))?;
    let actors = first.ground().to_vec();
    let n = actors.len();
    let mut prob = vec![vec![0.0; n]; n];
    for s in samples {
        let h = s
            .orders
            .get(&t)
            .ok_or_else(|| Error::Domain(format!("no order for year {t}")))?;
        if h.ground() != actors.as_slice() {
            return Err(Error::GroundMismatch);
        }
        for (i, &row) in h.rows().iter().enumerate() {
            let mut rest = row;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                prob[i][j] += 1.0;
            }
        }
    }
    let m = samples.len() as f64;
    for row in &mut prob {
        for v in row.iter_mut() {
            *v /= m;
        }
    }
    Ok(EdgeSupport { year: t, actors, prob, n_samples: samples.len() })
}

/// Edges retained above a support threshold, closed transitively when that
/// is possible. Thresholds at or above one half can still admit directed
/// cycles through longer loops, in which case `order` is absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Consensus {
    pub year: Year,
    pub threshold: f64,
    pub edges: Vec<(ActorId, ActorId, f64)>,
    pub acyclic: bool,
    pub order: Option<PartialOrder>,
}

pub fn consensus(support: &EdgeSupport, threshold: f64) -> Consensus {
    let mut edges = Vec::new();
    let mut rel = Vec::new();
    for (i, row) in support.prob.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p >= threshold {
                edges.push((support.actors[i], support.actors[j], p));
                rel.push((support.actors[i], support.actors[j]));
            }
        }
    }
    let order = PartialOrder::transitive_closure(&support.actors, &rel).ok();
    Consensus {
        year: support.year,
        threshold,
        edges,
        acyclic: order.is_some(),
        order,
    }
}

/// Posterior mean and spread of one actor's authority through time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthorityCurve {
    pub actor: ActorId,
    pub years: Vec<Year>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Authority curves over the sampled statuses. With `center` set, each
/// sample's year mean over active actors is subtracted first, removing the
/// common drift the order cannot identify.
pub fn authority_curves(samples: &[Sample], center: bool) -> Result<Vec<AuthorityCurve>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    // accum[actor][year] = (sum, sum of squares, count)
    let mut accum: BTreeMap<ActorId, BTreeMap<Year, (f64, f64, usize)>> = BTreeMap::new();
    for s in samples {
        for (&t, vals) in &s.authority {
            if vals.is_empty() {
                continue;
            }
            let shift = if center {
                vals.iter().map(|&(_, v)| v).sum::<f64>() / vals.len() as f64
            } else {
                0.0
            };
            for &(a, v) in vals {
                let e = accum.entry(a).or_default().entry(t).or_insert((0.0, 0.0, 0));
                let c = v - shift;
                e.0 += c;
                e.1 += c * c;
                e.2 += 1;
            }
        }
    }
    Ok(accum
        .into_iter()
        .map(|(actor, by_year)| {
            let mut years = Vec::new();
            let mut mean = Vec::new();
            let mut sd = Vec::new();
            for (t, (sum, sum2, n)) in by_year {
                let m = sum / n as f64;
                years.push(t);
                mean.push(m);
                sd.push((sum2 / n as f64 - m * m).max(0.0).sqrt());
            }
            AuthorityCurve { actor, years, mean, sd }
        })
        .collect())
}

/// Depth summary for one year.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthStats {
    pub mean: f64,
    pub sd: f64,
    pub min: usize,
    pub max: usize,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn depth_distribution(samples: &[Sample]) -> Result<BTreeMap<Year, DepthStats>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut by_year: BTreeMap<Year, Vec<usize>> = BTreeMap::new();
    for s in samples {
        for (&t, h) in &s.orders {
            by_year.entry(t).or_default().push(h.depth());
        }
    }
    Ok(by_year
        .into_iter()
        .map(|(t, depths)| {
            let n = depths.len() as f64;
            let mean = depths.iter().sum::<usize>() as f64 / n;
            let var = depths.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;
            let mut histogram = BTreeMap::new();
            for &d in &depths {
                *histogram.entry(d).or_insert(0) += 1;
            }
            let stats = DepthStats {
                mean,
                sd: var.sqrt(),
                min: *depths.iter().min().expect("nonempty"),
                max: *depths.iter().max().expect("nonempty"),
                histogram,
            };
            (t, stats)
        })
        .collect())
}

/// A Monte Carlo Bayes factor estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BayesFactor {
    pub bf: f64,
    pub se: f64,
    /// Samples behind the estimate and the effective count used for `se`.
    pub n: usize,
    pub n_eff: f64,
}

fn fraction_with_se(flags: &[bool], use_ess: bool) -> (f64, f64, f64) {
    let n = flags.len() as f64;
    let series: Vec<f64> = flags.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let f = series.iter().sum::<f64>() / n;
    // A constant indicator series has ESS 0 by convention; clamp so the
    // (zero) binomial variance still divides cleanly.
    let n_eff = if use_ess { ess(&series).clamp(1.0, n) } else { n };
    let se = (f * (1.0 - f) / n_eff).sqrt();
    (f, se, n_eff)
}

/// Savage-Dickey Bayes factor for a decreasing effect ladder: the posterior
/// probability that the first `s_prime` effect components are strictly
/// decreasing, against its prior value 1/s_prime! under exchangeable
/// standard normals.
pub fn bf_effects_ordered(samples: &[Sample], s_prime: usize, use_ess: bool) -> Result<BayesFactor> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    if s_prime < 2 {
        return Err(Error::Domain("need at least two effect components".into()));
    }
    if samples.iter().any(|s| s.beta.len() < s_prime) {
        return Err(Error::Domain(format!(
            "samples carry fewer than {s_prime} effect components"
        )));
    }
    let flags: Vec<bool> = samples
        .iter()
        .map(|s| s.beta[..s_prime].windows(2).all(|w| w[0] > w[1]))
        .collect();
    let (f, se, n_eff) = fraction_with_se(&flags, use_ess);
    let fact: f64 = (1..=s_prime).map(|i| i as f64).product();
    Ok(BayesFactor { bf: fact * f, se: fact * se, n: samples.len(), n_eff })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureClass {
    /// Vertex-series-parallel orders (no induced "N").
    Vsp,
    /// Bucket orders (transitive incomparability).
    Bucket,
}

fn in_class(h: &PartialOrder, class: StructureClass) -> bool {
    match class {
        StructureClass::Vsp => is_vsp(h),
        StructureClass::Bucket => is_bucket(h),
    }
}

/// Per-sample indicator that every year's order lies in the class.
pub fn class_flags(samples: &[Sample], class: StructureClass) -> Vec<bool> {
    samples
        .iter()
        .map(|s| s.orders.values().all(|h| in_class(h, class)))
        .collect()
}

/// Bayes factor for a structural restriction, estimated as the ratio of the
/// posterior to the prior probability that all years realize the class.
/// Both runs must target the same model; standard errors combine by the
/// delta method.
pub fn bf_structure(
    posterior: &[Sample],
    prior: &[Sample],
    class: StructureClass,
    use_ess: bool,
) -> Result<BayesFactor> {
    if posterior.is_empty() || prior.is_empty() {
        return Err(Error::InsufficientData("need posterior and prior samples".into()));
    }
    let (fq, seq, nq) = fraction_with_se(&class_flags(posterior, class), use_ess);
    let (fp, sep, _np) = fraction_with_se(&class_flags(prior, class), use_ess);
    if fp == 0.0 {
        return Err(Error::ZeroPriorMass);
    }
    let bf = fq / fp;
    let se = if fq == 0.0 {
        seq / fp
    } else {
        bf * ((seq / fq).powi(2) + (sep / fp).powi(2)).sqrt()
    };
    Ok(BayesFactor { bf, se, n: posterior.len(), n_eff: nq })
}

/// Sum of held-out predictive log densities with a standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElpdResult {
    pub per_item: Vec<f64>,
    pub elpd: f64,
    pub se: f64,
}

impl ElpdResult {
    pub fn from_items(per_item: Vec<f64>) -> ElpdResult {
        let n = per_item.len() as f64;
        let elpd: f64 = per_item.iter().sum();
        let mean = elpd / n;
        let var = per_item.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        ElpdResult { se: (n * var).sqrt(), per_item, elpd }
    }
}

pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One leave-one-out fold under the partial-order model: refit without
/// list `i`, then average that list's likelihood over the posterior draws
/// and, within each draw, over the list's date interval.
fn loo_fold_po(model: &Model, cfg: &McmcConfig, i: usize) -> Result<f64> {
    let held = &model.data.lists[i];
    let rest = Model::new(
        model.data.without_list(i),
        model.hyper.clone(),
        model.n_effects > 0,
    )?;
    let fold_cfg = McmcConfig { seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() };
    let run = run_chain(&rest, &fold_cfg)?;
    if run.samples.is_empty() {
        return Err(Error::InsufficientData("fold produced no samples".into()));
    }
    let mut cache = crate::poset::CountCache::default();
    let years: Vec<Year> = (held.tau_minus..=held.tau_plus).collect();
    let mut log_preds = Vec::with_capacity(run.samples.len());
    for s in &run.samples {
        let noise = rest.noise_model(s.scalars.p);
        let mut by_year = Vec::with_capacity(years.len());
        for &t in &years {
            let h = s
                .orders
                .get(&t)
                .ok_or_else(|| Error::Domain(format!("no order for year {t}")))?;
            by_year.push(crate::obsmodel::loglik_list(h, &held.entries, &noise, &mut cache)?);
        }
        log_preds.push(logsumexp(&by_year) - (years.len() as f64).ln());
    }
    Ok(logsumexp(&log_preds) - (log_preds.len() as f64).ln())
}

/// Leave-one-out expected log predictive density under the partial-order
/// model, refitting per fold.
pub fn elpd_loo_po(model: &Model, cfg: &McmcConfig) -> Result<ElpdResult> {
    elpd_loo_po_threads(model, cfg, 1)
}

/// As `elpd_loo_po`, with folds spread over up to `threads` worker
/// threads. Fold seeds depend only on the fold index, so the result does
/// not depend on the thread count.
pub fn elpd_loo_po_threads(model: &Model, cfg: &McmcConfig, threads: usize) -> Result<ElpdResult> {
    let n = model.data.lists.len();
    if n < 2 {
        return Err(Error::InsufficientData("need at least two lists".into()));
    }
    let threads = threads.clamp(1, n);
    let mut per_item: Vec<Result<f64>> = Vec::with_capacity(n);
    if threads == 1 {
        for i in 0..n {
            per_item.push(loo_fold_po(model, cfg, i));
        }
    } else {
        per_item = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    scope.spawn(move || {
                        (w..n)
                            .step_by(threads)
                            .map(|i| (i, loo_fold_po(model, cfg, i)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut slots: Vec<Option<Result<f64>>> = (0..n).map(|_| None).collect();
            for h in handles {
                for (i, r) in h.join().expect("fold worker panicked") {
                    slots[i] = Some(r);
                }
            }
            slots.into_iter().map(|s| s.expect("fold covered")).collect()
        });
    }
    Ok(ElpdResult::from_items(per_item.into_iter().collect::<Result<Vec<f64>>>()?))
}

/// Baseline predictive where every ordering of each list is equally likely.
pub fn elpd_uniform(data: &crate::pipeline::Dataset) -> ElpdResult {
    let per_item: Vec<f64> = data
        .lists
        .iter()
        .map(|l| -(1..=l.entries.len()).map(|r| (r as f64).ln()).sum::<f64>())
        .collect();
    ElpdResult::from_items(per_item)
}
