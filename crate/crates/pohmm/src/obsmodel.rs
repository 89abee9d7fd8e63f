//! Observation models linking a partial order to an observed rank list.
//!
//! In the noise-free model a list is a uniform draw from the linear
//! extensions of the order restricted to the list's members. The two
//! queue-jump models relax this: the list is built one position at a time,
//! and at each step the recorded actor is, with probability `p`, an
//! arbitrary remaining actor (a jump) and otherwise the next actor of a
//! uniform random extension. The `Down` variant fills positions from the
//! top of the list, the `Up` variant from the bottom; they are not
//! equivalent for `0 < p < 1`.

use crate::pipeline::Dataset;
use crate::poset::{CountCache, End, PartialOrder, RankList};
use crate::{Error, Result, Year};
use num_bigint::{BigUint, RandBigInt};
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    NoiseFree,
    /// Queue-jumping acting from the first position downwards.
    Down,
    /// Queue-jumping acting from the last position upwards.
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    /// Jump probability; ignored by `NoiseFree`.
    pub p: f64,
}

impl NoiseModel {
    pub fn noise_free() -> Self {
        Self { mode: NoiseMode::NoiseFree, p: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Domain(format!("jump probability {} outside [0,1]", self.p)));
        }
        Ok(())
    }
}

fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    // Counts stay below 64! so both convert to finite doubles; the ratio is
    // then exact to a couple of ulps.
    num.to_f64().unwrap_or(f64::INFINITY) / den.to_f64().unwrap_or(f64::INFINITY)
}

/// Log probability of `y` as a uniform draw from the linear extensions of
/// `h`. The ground of `h` must equal the members of `y`.
pub fn loglik_noise_free(h: &PartialOrder, y: &RankList, cache: &mut CountCache) -> Result<f64> {
    check_ground(h, y)?;
    if !is_extension(h, y) {
        return Ok(f64::NEG_INFINITY);
    }
    let total = cache.count(h)?;
    Ok(-total.to_f64().unwrap_or(f64::INFINITY).ln())
}

fn check_ground(h: &PartialOrder, y: &RankList) -> Result<()> {
    if h.ground() != y.members().as_slice() {
        return Err(Error::GroundMismatch);
    }
    Ok(())
}

/// Whether `y` is a linear extension of `h`: true iff no later entry sits
/// above an earlier one. Entries outside `h`'s ground make it false.
pub fn is_extension(h: &PartialOrder, y: &RankList) -> bool {
    // Nothing listed later may sit above an earlier entry.
    let mut seen = 0u64;
    for &a in y.entries().iter() {
        let pos = match h.pos(a) {
            Some(p) => p,
            None => return false,
        };
        if h.rows()[pos] & seen != 0 {
            return false;
        }
        seen |= 1 << pos;
    }
    true
}

/// Queue-jump log likelihood of `y` under `h` with jump probability `p`.
pub fn loglik_queue(
    h: &PartialOrder,
    y: &RankList,
    mode: NoiseMode,
    p: f64,
    cache: &mut CountCache,
) -> Result<f64> {
    check_ground(h, y)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("jump probability {p} outside [0,1]")));
    }
    let m = y.len();
    if m < 2 {
        return Ok(0.0);
    }
    // At p = 1 every step is a uniform jump and no counting is needed.
    if p == 1.0 {
        let mut lp = 0.0;
        for r in 2..=m {
            lp -= (r as f64).ln();
        }
        return Ok(lp);
    }
    let entries = y.entries();
    let mut lp = 0.0;
    match mode {
        NoiseMode::NoiseFree => return loglik_noise_free(h, y, cache),
        NoiseMode::Down => {
            // Position j sees the suborder on the still-unplaced suffix.
            for j in 0..m - 1 {
                let sub = h.suborder(&entries[j..])?;
                let anchored = cache.count_anchored(&sub, entries[j], End::First)?;
                let total = cache.count(&sub)?;
                let factor = p / (m - j) as f64
                    + (1.0 - p) * if anchored.is_zero() { 0.0 } else { ratio(&anchored, &total) };
                if factor <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                lp += factor.ln();
            }
        }
        NoiseMode::Up => {
            // Position j (filled from the bottom) sees the prefix suborder.
            for j in (1..m).rev() {
                let sub = h.suborder(&entries[..=j])?;
                let anchored = cache.count_anchored(&sub, entries[j], End::Last)?;
                let total = cache.count(&sub)?;
                let factor = p / (j + 1) as f64
                    + (1.0 - p) * if anchored.is_zero() { 0.0 } else { ratio(&anchored, &total) };
                if factor <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                lp += factor.ln();
            }
        }
    }
    Ok(lp)
}

/// Log likelihood of one list under the order holding at its date. The
/// order is restricted to the list's members first; every member must be in
/// the order's ground.
pub fn loglik_list(
    h: &PartialOrder,
    y: &RankList,
    model: &NoiseModel,
    cache: &mut CountCache,
) -> Result<f64> {
    let members = y.members();
    for &a in &members {
        if h.pos(a).is_none() {
            return Err(Error::UnknownActor(a));
        }
    }
    let sub = if members.len() == h.size() { h.clone() } else { h.suborder(&members)? };
    match model.mode {
        NoiseMode::NoiseFree => loglik_noise_free(&sub, y, cache),
        mode => loglik_queue(&sub, y, mode, model.p, cache),
    }
}

/// Total log likelihood of a dataset given per-year orders and per-list
/// dates. `taus[i]` must lie in list i's interval and have an order.
pub fn loglik_total(
    data: &Dataset,
    taus: &[Year],
    orders: &BTreeMap<Year, PartialOrder>,
    model: &NoiseModel,
    cache: &mut CountCache,
) -> Result<f64> {
    if taus.len() != data.lists.len() {
        return Err(Error::Domain(format!(
            "{} dates for {} lists",
            taus.len(),
            data.lists.len()
        )));
    }
    let mut lp = 0.0;
    for (i, list) in data.lists.iter().enumerate() {
        let t = taus[i];
        if t < list.tau_minus || t > list.tau_plus {
            return Err(Error::Domain(format!(
                "list {} dated {t} outside [{}, {}]",
                list.id, list.tau_minus, list.tau_plus
            )));
        }
        let h = orders
            .get(&t)
            .ok_or_else(|| Error::Domain(format!("no order for year {t}")))?;
        lp += loglik_list(h, &list.entries, model, cache)?;
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
    }
    Ok(lp)
}

/// Draws a list over the full ground of `h` from the observation model.
pub fn sample_list<R: Rng>(
    h: &PartialOrder,
    model: &NoiseModel,
    cache: &mut CountCache,
    rng: &mut R,
) -> Result<RankList> {
    model.validate()?;
    match model.mode {
        NoiseMode::NoiseFree => cache.sample_extension(h, rng),
        NoiseMode::Down => {
            let mut remaining: Vec<crate::ActorId> = h.ground().to_vec();
            let mut out = Vec::with_capacity(remaining.len());
            while !remaining.is_empty() {
                let idx = if rng.gen::<f64>() < model.p {
                    rng.gen_range(0..remaining.len())
                } else {
                    let sub = h.suborder(&remaining)?;
                    pick_anchored(&sub, &remaining, End::First, cache, rng)?
                };
                out.push(remaining.remove(idx));
            }
            RankList::new(out)
        }
        NoiseMode::Up => {
            let mut remaining: Vec<crate::ActorId> = h.ground().to_vec();
            let mut rev = Vec::with_capacity(remaining.len());
            while !remaining.is_empty() {
                let idx = if rng.gen::<f64>() < model.p {
                    rng.gen_range(0..remaining.len())
                } else {
                    let sub = h.suborder(&remaining)?;
                    pick_anchored(&sub, &remaining, End::Last, cache, rng)?
                };
                rev.push(remaining.remove(idx));
            }
            rev.reverse();
            RankList::new(rev)
        }
    }
}

/// Index into `remaining` of an element chosen with probability
/// proportional to its anchored extension count (the law of the first or
/// last entry of a uniform draw).
fn pick_anchored<R: Rng>(
    sub: &PartialOrder,
    remaining: &[crate::ActorId],
    end: End,
    cache: &mut CountCache,
    rng: &mut R,
) -> Result<usize> {
    let mut weights = Vec::with_capacity(remaining.len());
    let mut total = BigUint::zero();
    for &a in remaining {
        let w = cache.count_anchored(sub, a, end)?;
        total += &w;
        weights.push(w);
    }
    debug_assert!(!total.is_zero());
    let mut draw = rng.gen_biguint_below(&total);
    for (idx, w) in weights.iter().enumerate() {
        if &draw < w {
            return Ok(idx);
        }
        draw -= w;
    }
    unreachable!("draw below total")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn order(ground: &[u32], rel: &[(u32, u32)]) -> PartialOrder {
        PartialOrder::transitive_closure(ground, rel).unwrap()
    }

    fn rl(entries: &[u32]) -> RankList {
        RankList::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn two_element_jump_probabilities() {
        let h = order(&[1, 2], &[(1, 2)]);
        let mut cache = CountCache::default();
        let good = loglik_queue(&h, &rl(&[1, 2]), NoiseMode::Down, 0.5, &mut cache).unwrap();
        let bad = loglik_queue(&h, &rl(&[2, 1]), NoiseMode::Down, 0.5, &mut cache).unwrap();
        assert_abs_diff_eq!(good.exp(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(bad.exp(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn down_and_up_disagree_on_a_chain() {
        // Chain 1 > 2 > 3, list [2, 1, 3], p = 1/2: the down model pays the
        // jump at the first step, the up model at the second.
        let h = order(&[1, 2, 3], &[(1, 2), (2, 3)]);
        let mut cache = CountCache::default();
        let y = rl(&[2, 1, 3]);
        let down = loglik_queue(&h, &y, NoiseMode::Down, 0.5, &mut cache).unwrap();
        let up = loglik_queue(&h, &y, NoiseMode::Up, 0.5, &mut cache).unwrap();
        assert_abs_diff_eq!(down.exp(), 1.0 / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(up.exp(), 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_jump_reduces_to_noise_free() {
        let h = order(&[1, 2, 3, 4], &[(1, 2), (1, 3), (2, 4), (3, 4)]);
        let mut cache = CountCache::default();
        let y = rl(&[1, 3, 2, 4]);
        let nf = loglik_noise_free(&h, &y, &mut cache).unwrap();
        for mode in [NoiseMode::Down, NoiseMode::Up] {
            let q = loglik_queue(&h, &y, mode, 0.0, &mut cache).unwrap();
            assert_abs_diff_eq!(q, nf, epsilon = 1e-12);
        }
        // An inconsistent list gets zero likelihood at p = 0.
        let bad = rl(&[2, 1, 3, 4]);
        assert_eq!(loglik_noise_free(&h, &bad, &mut cache).unwrap(), f64::NEG_INFINITY);
        for mode in [NoiseMode::Down, NoiseMode::Up] {
            assert_eq!(
                loglik_queue(&h, &bad, mode, 0.0, &mut cache).unwrap(),
                f64::NEG_INFINITY
            );
        }
    }

    #[test]
    fn empty_relation_gives_uniform_permutations() {
        let h = order(&[1, 2, 3, 4], &[]);
        let mut cache = CountCache::default();
        let y = rl(&[3, 1, 4, 2]);
        let expect = -(24f64).ln();
        assert_abs_diff_eq!(
            loglik_noise_free(&h, &y, &mut cache).unwrap(),
            expect,
            epsilon = 1e-12
        );
        for mode in [NoiseMode::Down, NoiseMode::Up] {
            for p in [0.0, 0.4, 1.0] {
                assert_abs_diff_eq!(
                    loglik_queue(&h, &y, mode, p, &mut cache).unwrap(),
                    expect,
                    epsilon = 1e-12
                );
            }
        }
    }

    fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for (i, &x) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, x);
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn list_probabilities_sum_to_one() {
        let h = order(&[1, 2, 3, 4], &[(1, 2), (3, 4)]);
        let mut cache = CountCache::default();
        for (mode, p) in [
            (NoiseMode::Down, 0.0),
            (NoiseMode::Down, 0.3),
            (NoiseMode::Down, 1.0),
            (NoiseMode::Up, 0.3),
            (NoiseMode::Up, 0.9),
        ] {
            let total: f64 = permutations(&[1, 2, 3, 4])
                .into_iter()
                .map(|perm| {
                    loglik_queue(&h, &rl(&perm), mode, p, &mut cache)
                        .unwrap()
                        .exp()
                })
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sublist_uses_the_restricted_order() {
        // Restricting 1 > 2 > 3 to {1, 3} keeps 1 > 3.
        let h = order(&[1, 2, 3], &[(1, 2), (2, 3)]);
        let mut cache = CountCache::default();
        let model = NoiseModel { mode: NoiseMode::Down, p: 0.5 };
        let lp = loglik_list(&h, &rl(&[3, 1]), &model, &mut cache).unwrap();
        assert_abs_diff_eq!(lp.exp(), 0.25, epsilon = 1e-12);
        assert!(matches!(
            loglik_list(&h, &rl(&[1, 9]), &model, &mut cache),
            Err(Error::UnknownActor(9))
        ));
    }

    #[test]
    fn ground_mismatch_is_rejected() {
        let h = order(&[1, 2, 3], &[(1, 2)]);
        let mut cache = CountCache::default();
        assert!(matches!(
            loglik_noise_free(&h, &rl(&[1, 2]), &mut cache),
            Err(Error::GroundMismatch)
        ));
    }

    #[test]
    fn total_likelihood_checks_dates() {
        use crate::pipeline::{ActorRecord, ListRecord};
        let actors: Vec<ActorRecord> = [1, 2]
            .iter()
            .map(|&id| ActorRecord {
                id,
                name: String::new(),
                group: String::new(),
                begin_year: 1100,
                end_year: 1105,
                focus: true,
            })
            .collect();
        let data = Dataset {
            actors,
            lists: vec![
                ListRecord { id: 1, tau_minus: 1100, tau_plus: 1101, entries: rl(&[1, 2]) },
                ListRecord { id: 2, tau_minus: 1101, tau_plus: 1102, entries: rl(&[2, 1]) },
            ],
            window: (1100, 1105),
        };
        let mut orders = BTreeMap::new();
        orders.insert(1100, order(&[1, 2], &[(1, 2)]));
        orders.insert(1101, order(&[1, 2], &[]));
        let model = NoiseModel::noise_free();
        let mut cache = CountCache::default();
        let lp = loglik_total(&data, &[1100, 1101], &orders, &model, &mut cache);
        // ln 1 + ln(1/2)
        assert_abs_diff_eq!(lp.unwrap(), -(2f64).ln(), epsilon = 1e-12);
        assert!(loglik_total(&data, &[1100, 1103], &orders, &model, &mut cache).is_err());
        assert!(loglik_total(&data, &[1100], &orders, &model, &mut cache).is_err());
    }

    #[test]
    fn sampled_lists_respect_the_order_at_zero_jump() {
        let h = order(&[1, 2, 3, 4, 5], &[(1, 2), (1, 4), (2, 3), (3, 5), (4, 5)]);
        let mut cache = CountCache::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for mode in [NoiseMode::NoiseFree, NoiseMode::Down, NoiseMode::Up] {
            let model = NoiseModel { mode, p: 0.0 };
            for _ in 0..50 {
                let y = sample_list(&h, &model, &mut cache, &mut rng).unwrap();
                assert!(is_extension(&h, &y));
                assert_eq!(y.members(), h.ground());
            }
        }
    }

    #[test]
    fn sampled_jump_lists_cover_all_permutations() {
        let h = order(&[1, 2], &[(1, 2)]);
        let mut cache = CountCache::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = NoiseModel { mode: NoiseMode::Down, p: 0.5 };
        let mut bad = 0;
        let reps = 4000;
        for _ in 0..reps {
            let y = sample_list(&h, &model, &mut cache, &mut rng).unwrap();
            if y.entries() == [2, 1] {
                bad += 1;
            }
        }
        // P([2,1]) = 0.25; allow 4 standard errors.
        let se = (0.25 * 0.75 / reps as f64).sqrt();
        assert!((bad as f64 / reps as f64 - 0.25).abs() < 4.0 * se);
    }
}
