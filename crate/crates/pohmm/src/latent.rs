//! Latent status parameterization and priors.
//!
//! Each actor `j` carries a K-vector authority series following a stationary
//! VAR(1) process with equicorrelated innovations:
//!
//! ```text
//! U_j^(b_j) ~ N(0, Sigma(rho) / (1 - theta^2))
//! U_j^(t)   = theta U_j^(t-1) + eps_t,   eps_t ~ N(0, Sigma(rho)) iid
//! ```
//!
//! where `Sigma(rho)` has unit diagonal and constant off-diagonal `rho`.
//! Statuses add a covariate lift shared across features,
//! `Z_j^(t) = U_j^(t) + 1_K beta_{s(t,j)}`, and the year-t order is strict
//! componentwise dominance of status rows. Larger `rho` aligns the K
//! feature paths and so deepens the realized orders; `theta` carries the
//! hierarchy smoothly through time.

use crate::obsmodel::NoiseMode;
use crate::pipeline::Dataset;
use crate::poset::PartialOrder;
use crate::{ActorId, Error, Result, Year};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Model hyperparameters shared by prior, likelihood, and samplers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    /// Feature count K >= 1.
    pub k: usize,
    /// rho ~ Beta(1, gamma); small gamma pushes rho (and depth) up.
    pub gamma: f64,
    /// p ~ Beta(1, delta); delta = 9 puts the prior noise mean at 0.1.
    pub delta: f64,
    /// Restrict beta to strictly decreasing components (B_S) or not (B_0).
    pub beta_constrained: bool,
    pub noise_mode: NoiseMode,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            k: 1,
            gamma: 1.0 / 6.0,
            delta: 9.0,
            beta_constrained: false,
            noise_mode: NoiseMode::Down,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Domain("K must be at least 1".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Domain("gamma must be positive".into()));
        }
        if !(self.delta >= 1.0) {
            return Err(Error::Domain("delta must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scalar model parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalarParams {
    /// Cross-feature correlation, in [0, 1).
    pub rho: f64,
    /// Serial correlation, in [0, 1).
    pub theta: f64,
    /// Queue-jumping noise probability, in [0, 1].
    pub p: f64,
}

/// Covariate level effects. Levels are 1-based: level `s` reads `beta[s-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    pub beta: Vec<f64>,
}

impl Effects {
    pub fn zero(s: usize) -> Self {
        Self { beta: vec![0.0; s] }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn level(&self, s: usize) -> Option<f64> {
        if s == 0 {
            return None;
        }
        self.beta.get(s - 1).copied()
    }

    /// Strictly decreasing components, the constrained support.
    pub fn is_decreasing(&self) -> bool {
        self.beta.windows(2).all(|w| w[0] > w[1])
    }
}

/// One actor's authority path over its active window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthoritySeries {
    pub actor: ActorId,
    pub begin: Year,
    /// `values[t - begin]` is the K-vector for year `t`.
    pub values: Vec<Vec<f64>>,
}

impl AuthoritySeries {
    pub fn end(&self) -> Year {
        self.begin + self.values.len() as Year - 1
    }

    pub fn covers(&self, t: Year) -> bool {
        t >= self.begin && t <= self.end()
    }

    pub fn value(&self, t: Year) -> Option<&[f64]> {
        if !self.covers(t) {
            return None;
        }
        Some(&self.values[(t - self.begin) as usize])
    }

    pub fn value_mut(&mut self, t: Year) -> Option<&mut Vec<f64>> {
        if !self.covers(t) {
            return None;
        }
        let i = (t - self.begin) as usize;
        Some(&mut self.values[i])
    }
}

/// Status rows for the actors active in one year, sorted by actor id.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusMatrix {
    pub year: Year,
    pub actors: Vec<ActorId>,
    pub rows: Vec<Vec<f64>>,
}

/// The K x K equicorrelation matrix: unit diagonal, `rho` off it.
pub fn sigma_rho(rho: f64, k: usize) -> Result<Vec<Vec<f64>>> {
    check_corr("rho", rho)?;
    if k < 1 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    Ok((0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { rho }).collect())
        .collect())
}

fn check_corr(name: &str, v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} outside [0, 1)")));
    }
    Ok(())
}

/// log det Sigma(rho) for dimension k, via the rank-one structure.
pub(crate) fn equicorr_logdet(rho: f64, k: usize) -> f64 {
    if k == 1 {
        return 0.0;
    }
    (k as f64 - 1.0) * (1.0 - rho).ln() + (1.0 + (k as f64 - 1.0) * rho).ln()
}

/// v' Sigma(rho)^{-1} v, via Sherman-Morrison.
pub(crate) fn equicorr_quad(rho: f64, v: &[f64]) -> f64 {
    let k = v.len();
    let ss: f64 = v.iter().map(|x| x * x).sum();
    if k == 1 {
        return ss;
    }
    let s: f64 = v.iter().sum();
    (ss - rho * s * s / (1.0 + (k as f64 - 1.0) * rho)) / (1.0 - rho)
}

/// log N(v; mean, c * Sigma(rho)).
pub(crate) fn gauss_logpdf(v: &[f64], mean: Option<&[f64]>, c: f64, rho: f64) -> f64 {
    let k = v.len();
    let diff: Vec<f64> = match mean {
        Some(m) => v.iter().zip(m).map(|(a, b)| a - b).collect(),
        None => v.to_vec(),
    };
    let quad = equicorr_quad(rho, &diff);
    -0.5 * k as f64 * ((2.0 * std::f64::consts::PI * c).ln())
        - 0.5 * equicorr_logdet(rho, k)
        - quad / (2.0 * c)
}

/// Draw from N(mean, c * Sigma(rho)) using the rank-one decomposition
/// `sqrt(rho) g 1_K + sqrt(1-rho) eta`.
pub(crate) fn gauss_sample<R: Rng + ?Sized>(
    mean: Option<&[f64]>,
    c: f64,
    rho: f64,
    k: usize,
    rng: &mut R,
) -> Vec<f64> {
    let sc = c.sqrt();
    let g: f64 = rng.sample(StandardNormal);
    let shared = rho.sqrt() * g;
    let own = (1.0 - rho).sqrt();
    (0..k)
        .map(|i| {
            let eta: f64 = rng.sample(StandardNormal);
            let base = sc * (shared + own * eta);
            match mean {
                Some(m) => m[i] + base,
                None => base,
            }
        })
        .collect()
}

/// Log density of a full authority path under the stationary VAR(1) prior.
pub fn var1_logpdf(series: &AuthoritySeries, rho: f64, theta: f64) -> Result<f64> {
    check_corr("rho", rho)?;
    check_corr("theta", theta)?;
    let init_scale = 1.0 / (1.0 - theta * theta);
    let mut lp = gauss_logpdf(&series.values[0], None, init_scale, rho);
    for w in series.values.windows(2) {
        let mean: Vec<f64> = w[0].iter().map(|x| theta * x).collect();
        lp += gauss_logpdf(&w[1], Some(&mean), 1.0, rho);
    }
    Ok(lp)
}

/// Sample a full authority path from the stationary VAR(1) prior.
pub fn var1_sample<R: Rng + ?Sized>(
    actor: ActorId,
    b: Year,
    e: Year,
    rho: f64,
    theta: f64,
    k: usize,
    rng: &mut R,
) -> Result<AuthoritySeries> {
    check_corr("rho", rho)?;
    check_corr("theta", theta)?;
    if b > e {
        return Err(Error::InvalidInterval(b, e));
    }
    let init_scale = 1.0 / (1.0 - theta * theta);
    let mut values = Vec::with_capacity((e - b + 1) as usize);
    values.push(gauss_sample(None, init_scale, rho, k, rng));
    for _ in b..e {
        let mean: Vec<f64> = values.last().unwrap().iter().map(|x| theta * x).collect();
        values.push(gauss_sample(Some(&mean), 1.0, rho, k, rng));
    }
    Ok(AuthoritySeries { actor, begin: b, values })
}

/// Status rows for year `t`: `Z_j = U_j + 1_K beta_{level(j)}`. Rows come
/// from every series covering `t`; `levels` may be empty only when `beta`
/// is empty.
pub fn status_from(
    us: &[AuthoritySeries],
    beta: &Effects,
    levels: &BTreeMap<ActorId, usize>,
    t: Year,
) -> Result<StatusMatrix> {
    let mut active: Vec<&AuthoritySeries> = us.iter().filter(|s| s.covers(t)).collect();
    active.sort_by_key(|s| s.actor);
    let mut actors = Vec::with_capacity(active.len());
    let mut rows = Vec::with_capacity(active.len());
    for s in active {
        let u = s.value(t).ok_or(Error::MissingAuthority { actor: s.actor, year: t })?;
        let lift = if beta.is_empty() {
            0.0
        } else {
            let level = *levels
                .get(&s.actor)
                .ok_or(Error::MissingCovariate { actor: s.actor, year: t })?;
            beta.level(level)
                .ok_or(Error::MissingCovariate { actor: s.actor, year: t })?
        };
        actors.push(s.actor);
        rows.push(u.iter().map(|x| x + lift).collect());
    }
    Ok(StatusMatrix { year: t, actors, rows })
}

/// The order realized by a status matrix: `i` above `j` iff row i strictly
/// dominates row j in every component. Ties in any component leave the pair
/// unordered. Strict dominance is irreflexive, antisymmetric, and
/// transitive, so the result is always a valid partial order.
pub fn order_from_status(z: &StatusMatrix) -> PartialOrder {
    let n = z.actors.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| z.actors[i]);
    let actors: Vec<ActorId> = idx.iter().map(|&i| z.actors[i]).collect();
    let mut rel = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&z.rows[idx[i]], &z.rows[idx[j]]) {
                rel[i] |= 1 << j;
            }
        }
    }
    PartialOrder::from_closed_rows(&actors, rel).expect("strict dominance is a partial order")
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x > y)
}

/// Constructs a status matrix whose realized order is exactly `h`, using at
/// most `k` features, or errors when no such matrix exists.
///
/// Searches realizers first: sets of up to `k` linear extensions of `h`
/// whose pairwise-rank intersection equals `h` (any order of dimension at
/// most `k` is found this way). Orders that need ties (e.g. an antichain
/// with one feature) fall back to a search over weak orders on small
/// grounds. Exhaustive, so restricted to small grounds.
pub fn represent(h: &PartialOrder, k: usize) -> Result<StatusMatrix> {
    if k == 0 {
        return Err(Error::Domain("need at least one feature".into()));
    }
    let m = h.size();
    let ground = h.ground().to_vec();
    // Candidate columns are height ranks (smaller = higher); ties allowed.
    let matrix = |cols: Vec<&Vec<usize>>| -> StatusMatrix {
        let mut rows = vec![Vec::with_capacity(k); m];
        for f in 0..k {
            let col = cols[f.min(cols.len() - 1)];
            for i in 0..m {
                rows[i].push((m - col[i]) as f64);
            }
        }
        StatusMatrix { year: 0, actors: ground.clone(), rows }
    };
    let realized = |cols: &[&Vec<usize>]| -> Vec<u64> {
        let mut rows = vec![0u64; m];
        for i in 0..m {
            for j in 0..m {
                if i != j && cols.iter().all(|c| c[i] < c[j]) {
                    rows[i] |= 1 << j;
                }
            }
        }
        rows
    };
    if m <= 1 {
        let col = vec![0usize; m];
        return Ok(matrix(vec![&col]));
    }
    let exts = crate::poset::linear_extensions(h)?;
    let ranks: Vec<Vec<usize>> = exts
        .iter()
        .map(|ext| {
            let mut rank = vec![0usize; m];
            for (r, a) in ext.iter().enumerate() {
                let i = ground.binary_search(a).expect("extension covers ground");
                rank[i] = r;
            }
            rank
        })
        .collect();
    let n = ranks.len();
    let target = h.rows();
    for rk in &ranks {
        if realized(&[rk]) == target {
            return Ok(matrix(vec![rk]));
        }
    }
    if k >= 2 {
        for a in 0..n {
            for b in a + 1..n {
                if realized(&[&ranks[a], &ranks[b]]) == target {
                    return Ok(matrix(vec![&ranks[a], &ranks[b]]));
                }
            }
        }
    }
    if k >= 3 && n >= 3 {
        // For each ordered pair (i, j), the set of extensions placing j
        // above i, as a bitset over extensions. A third extension fixes a
        // pair's intersection iff it reverses every excess relation.
        let words = n.div_ceil(64);
        let mut rev = vec![vec![0u64; words]; m * m];
        for (e, rk) in ranks.iter().enumerate() {
            for i in 0..m {
                for j in 0..m {
                    if i != j && rk[j] < rk[i] {
                        rev[i * m + j][e / 64] |= 1 << (e % 64);
                    }
                }
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                let inter = realized(&[&ranks[a], &ranks[b]]);
                let mut cand = vec![u64::MAX; words];
                let mut excess = false;
                for i in 0..m {
                    let mut extra = inter[i] & !target[i];
                    while extra != 0 {
                        let j = extra.trailing_zeros() as usize;
                        extra &= extra - 1;
                        excess = true;
                        for (c, r) in cand.iter_mut().zip(&rev[i * m + j]) {
                            *c &= r;
                        }
                    }
                }
                if !excess {
                    continue; // equal to target; caught in the pair pass
                }
                if let Some(e) = first_bit(&cand, n) {
                    let cols = [&ranks[a], &ranks[b], &ranks[e]];
                    if realized(&cols) == target {
                        return Ok(matrix(cols.to_vec()));
                    }
                }
            }
        }
    }
    // Tie fallback: exhaustive weak orders, feasible only on tiny grounds.
    if m <= 4 {
        let weaks = weak_orders(m);
        for w in &weaks {
            if realized(&[w]) == target {
                return Ok(matrix(vec![w]));
            }
        }
        if k >= 2 {
            for a in 0..weaks.len() {
                for b in a + 1..weaks.len() {
                    if realized(&[&weaks[a], &weaks[b]]) == target {
                        return Ok(matrix(vec![&weaks[a], &weaks[b]]));
                    }
                }
            }
        }
    }
    Err(Error::Domain(format!(
        "no dominance representation of the order within {k} features"
    )))
}

fn first_bit(words: &[u64], n: usize) -> Option<usize> {
    for (w, &word) in words.iter().enumerate() {
        if word != 0 {
            let e = w * 64 + word.trailing_zeros() as usize;
            if e < n {
                return Some(e);
            }
        }
    }
    None
}

/// All weak orders (ordered set partitions) on `m` elements as bucket
/// indices per element; bucket 0 is the top.
fn weak_orders(m: usize) -> Vec<Vec<usize>> {
    let full: u64 = (1 << m) - 1;
    let mut out = Vec::new();
    let mut assign = vec![0usize; m];
    fn rec(remaining: u64, bucket: usize, assign: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(assign.clone());
            return;
        }
        let mut sub = remaining;
        loop {
            let mut rest = sub;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                assign[i] = bucket;
            }
            rec(remaining & !sub, bucket + 1, assign, out);
            sub = (sub - 1) & remaining;
            if sub == 0 {
                break;
            }
        }
    }
    rec(full, 0, &mut assign, &mut out);
    out
}

/// Joint log prior density of the full parameter state. Returns negative
/// infinity off the support rather than erroring; MCMC treats that as a
/// straight rejection.
#[allow(clippy::too_many_arguments)]
pub fn log_prior(
    scalars: &ScalarParams,
    us: &[AuthoritySeries],
    beta: &Effects,
    taus: &[Year],
    dataset: &Dataset,
    hyper: &HyperParams,
) -> f64 {
    let mut lp = log_prior_scalars(scalars, hyper);
    if !lp.is_finite() {
        return f64::NEG_INFINITY;
    }
    lp += log_prior_beta(beta, hyper);
    lp += log_prior_taus(taus, dataset);
    if !lp.is_finite() {
        return f64::NEG_INFINITY;
    }
    for s in us {
        match var1_logpdf(s, scalars.rho, scalars.theta) {
            Ok(v) => lp += v,
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    lp
}

/// Beta(1, gamma) at rho + uniform theta + Beta(1, delta) at p.
pub fn log_prior_scalars(scalars: &ScalarParams, hyper: &HyperParams) -> f64 {
    let mut lp = 0.0;
    if !(0.0..1.0).contains(&scalars.rho) || !(0.0..1.0).contains(&scalars.theta) {
        return f64::NEG_INFINITY;
    }
    if !(0.0..=1.0).contains(&scalars.p) {
        return f64::NEG_INFINITY;
    }
    lp += hyper.gamma.ln() + (hyper.gamma - 1.0) * (1.0 - scalars.rho).ln();
    lp += hyper.delta.ln() + (hyper.delta - 1.0) * (1.0 - scalars.p).ln();
    lp
}

/// Independent standard normals, restricted to decreasing components in
/// constrained mode.
pub fn log_prior_beta(beta: &Effects, hyper: &HyperParams) -> f64 {
    if hyper.beta_constrained && !beta.is_decreasing() {
        return f64::NEG_INFINITY;
    }
    beta.beta
        .iter()
        .map(|b| -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * b * b)
        .sum()
}

/// Uniform over each list's integer date grid.
pub fn log_prior_taus(taus: &[Year], dataset: &Dataset) -> f64 {
    let mut lp = 0.0;
    for (i, list) in dataset.lists.iter().enumerate() {
        let t = taus[i];
        if t < list.tau_minus || t > list.tau_plus {
            return f64::NEG_INFINITY;
        }
        lp -= ((list.tau_plus - list.tau_minus + 1) as f64).ln();
    }
    lp
}
