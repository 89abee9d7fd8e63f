//! Linear-extension counting, anchored counts, and uniform extension
//! sampling.
//!
//! Counting uses the suborder recursion `C(H) = sum_j C(H - j)` over maximal
//! elements `j`, with two structural shortcuts that make the MCMC-time cost
//! acceptable: the remaining vertex set is split into comparability
//! components (extensions interleave freely, contributing a multinomial
//! factor), and per-component results are memoized in a bounded
//! least-recently-used cache keyed by the component's re-indexed relation
//! pattern. The cache is chain-local: one per running chain, no sharing.

use super::{PartialOrder, RankList};
use crate::{Error, Result};
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;
use std::collections::HashMap;

/// Which end of the extension an anchored count pins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    First,
    Last,
}

/// Default refusal threshold for exact counting.
pub const DEFAULT_SIZE_LIMIT: usize = 22;
/// Default bound on cached component entries.
pub const DEFAULT_CACHE_CAP: usize = 1 << 20;

/// Memo store for extension counts. Owned by one chain; all counting entry
/// points go through it.
pub struct CountCache {
    limit: usize,
    cap: usize,
    tick: u64,
    map: HashMap<Box<[u64]>, (BigUint, u64)>,
    facts: Vec<BigUint>,
}

impl Default for CountCache {
    fn default() -> Self {
        Self::new(DEFAULT_SIZE_LIMIT, DEFAULT_CACHE_CAP)
    }
}

impl CountCache {
    pub fn new(size_limit: usize, cache_cap: usize) -> Self {
        Self {
            limit: size_limit,
            cap: cache_cap.max(16),
            tick: 0,
            map: HashMap::new(),
            facts: vec![BigUint::one(), BigUint::one()],
        }
    }

    pub fn size_limit(&self) -> usize {
        self.limit
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Exact number of linear extensions `C(H)`.
    pub fn count(&mut self, h: &PartialOrder) -> Result<BigUint> {
        self.check_size(h.size())?;
        let full = full_mask(h.size());
        Ok(self.count_mask(h.rows(), &h.above_columns(), full))
    }

    /// Extensions with `j` first (`End::First`) or last (`End::Last`).
    /// Zero when `j` cannot occupy that end; summing over `j` gives `C(H)`.
    pub fn count_anchored(&mut self, h: &PartialOrder, j: crate::ActorId, end: End) -> Result<BigUint> {
        self.check_size(h.size())?;
        let pos = h.pos(j).ok_or(Error::UnknownActor(j))?;
        let cols = h.above_columns();
        let full = full_mask(h.size());
        let admissible = match end {
            End::First => cols[pos] == 0,        // nothing above j
            End::Last => h.rows()[pos] == 0,     // nothing below j
        };
        if !admissible {
            return Ok(BigUint::zero());
        }
        Ok(self.count_mask(h.rows(), &cols, full & !(1 << pos)))
    }

    /// Uniform draw from the linear extensions of `h`: repeatedly picks the
    /// next (highest) element among the maximal ones with probability
    /// `C(rest - j) / C(rest)`.
    pub fn sample_extension<R: Rng + ?Sized>(
        &mut self,
        h: &PartialOrder,
        rng: &mut R,
    ) -> Result<RankList> {
        self.check_size(h.size())?;
        if h.size() == 0 {
            return Err(Error::Parse("cannot sample an extension of an empty ground".into()));
        }
        let cols = h.above_columns();
        let mut mask = full_mask(h.size());
        let mut out = Vec::with_capacity(h.size());
        while mask != 0 {
            let total = self.count_mask(h.rows(), &cols, mask);
            let r = rng.gen_biguint_below(&total);
            let mut acc = BigUint::zero();
            let mut rest = mask;
            let mut picked = None;
            while rest != 0 {
                let v = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if cols[v] & mask != 0 {
                    continue; // not maximal in the remainder
                }
                acc += self.count_mask(h.rows(), &cols, mask & !(1 << v));
                if r < acc {
                    picked = Some(v);
                    break;
                }
            }
            let v = picked.expect("anchored counts sum to the total");
            out.push(h.ground()[v]);
            mask &= !(1 << v);
        }
        RankList::new(out)
    }

    fn check_size(&self, n: usize) -> Result<()> {
        if n > self.limit {
            return Err(Error::SizeLimit(n, self.limit));
        }
        Ok(())
    }

    /// Count over the vertices of `mask`, with `rows`/`cols` the full-ground
    /// relation. Internal: sizes were validated by the entry points.
    pub(crate) fn count_mask(&mut self, rows: &[u64], cols: &[u64], mask: u64) -> BigUint {
        let k = mask.count_ones() as usize;
        if k <= 1 {
            return BigUint::one();
        }
        let mut result = BigUint::one();
        let mut sizes = Vec::new();
        let mut rest = mask;
        while rest != 0 {
            // Flood-fill one comparability component.
            let seed = rest & rest.wrapping_neg();
            let mut comp = seed;
            loop {
                let mut grown = comp;
                let mut scan = comp;
                while scan != 0 {
                    let v = scan.trailing_zeros() as usize;
                    scan &= scan - 1;
                    grown |= (rows[v] | cols[v]) & mask;
                }
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            rest &= !comp;
            sizes.push(comp.count_ones() as usize);
            if comp.count_ones() >= 2 {
                result *= self.count_component(rows, cols, comp);
            }
        }
        // Components interleave freely: multinomial over component sizes.
        if sizes.len() > 1 {
            result *= self.multinomial(k, &sizes);
        }
        result
    }

    fn count_component(&mut self, rows: &[u64], cols: &[u64], comp: u64) -> BigUint {
        let key = canonical_key(rows, comp);
        self.tick += 1;
        if let Some((c, last)) = self.map.get_mut(&key) {
            *last = self.tick;
            return c.clone();
        }
        let mut total = BigUint::zero();
        let mut rest = comp;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if cols[v] & comp == 0 {
                total += self.count_mask(rows, cols, comp & !(1 << v));
            }
        }
        self.insert(key, total.clone());
        total
    }

    fn insert(&mut self, key: Box<[u64]>, value: BigUint) {
        if self.map.len() >= self.cap {
            // Evict the least-recently-used half in one batch.
            let mut ticks: Vec<u64> = self.map.values().map(|&(_, t)| t).collect();
            ticks.sort_unstable();
            let cutoff = ticks[ticks.len() / 2];
            self.map.retain(|_, &mut (_, t)| t > cutoff);
        }
        self.map.insert(key, (value, self.tick));
    }

    fn multinomial(&mut self, total: usize, parts: &[usize]) -> BigUint {
        let mut m = self.fact(total).clone();
        for &p in parts {
            m /= self.fact(p).clone();
        }
        m
    }

    fn fact(&mut self, n: usize) -> &BigUint {
        while self.facts.len() <= n {
            let next = &self.facts[self.facts.len() - 1] * BigUint::from(self.facts.len());
            self.facts.push(next);
        }
        &self.facts[n]
    }
}

/// Relation pattern of `mask`'s vertices re-indexed to 0..k, the memo key.
/// Two masks with equal keys induce identical labelled suborders.
fn canonical_key(rows: &[u64], mask: u64) -> Box<[u64]> {
    let k = mask.count_ones() as usize;
    let mut verts = [0usize; 64];
    let mut rest = mask;
    let mut i = 0;
    while rest != 0 {
        verts[i] = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        i += 1;
    }
    let mut key = vec![0u64; k];
    for (new_i, &v) in verts[..k].iter().enumerate() {
        let row = rows[v] & mask;
        if row != 0 {
            let mut packed = 0u64;
            for (new_j, &w) in verts[..k].iter().enumerate() {
                if row & (1 << w) != 0 {
                    packed |= 1 << new_j;
                }
            }
            key[new_i] = packed;
        }
    }
    key.into_boxed_slice()
}

fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::PartialOrder;
    use num_traits::ToPrimitive;
    use rand::SeedableRng;

    fn fig_poset() -> PartialOrder {
        PartialOrder::transitive_closure(
            &[1, 2, 3, 4, 5],
            &[(1, 2), (2, 3), (3, 5), (1, 4), (4, 5)],
        )
        .unwrap()
    }

    #[test]
    fn fig_poset_has_three_extensions() {
        let mut cc = CountCache::default();
        assert_eq!(cc.count(&fig_poset()).unwrap(), BigUint::from(3u32));
    }

    #[test]
    fn empty_order_counts_factorial() {
        let mut cc = CountCache::default();
        let h = PartialOrder::empty(&[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(cc.count(&h).unwrap(), BigUint::from(120u32));
        let h0 = PartialOrder::empty(&[]).unwrap();
        assert_eq!(cc.count(&h0).unwrap(), BigUint::one());
    }

    #[test]
    fn suborder_count_matches_listed_extensions() {
        let mut cc = CountCache::default();
        let s = fig_poset().suborder(&[2, 4, 5]).unwrap();
        assert_eq!(cc.count(&s).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn anchored_counts() {
        let mut cc = CountCache::default();
        let h = fig_poset();
        let c = |cc: &mut CountCache, j, end| cc.count_anchored(&h, j, end).unwrap().to_u64().unwrap();
        assert_eq!(c(&mut cc, 1, End::First), 3);
        assert_eq!(c(&mut cc, 4, End::First), 0);
        assert_eq!(c(&mut cc, 5, End::Last), 3);
        let total: u64 = [1, 2, 3, 4, 5]
            .iter()
            .map(|&j| c(&mut cc, j, End::First))
            .sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn size_limit_enforced() {
        let mut cc = CountCache::new(4, 1024);
        let h = PartialOrder::empty(&[1, 2, 3, 4, 5]).unwrap();
        assert!(matches!(cc.count(&h), Err(Error::SizeLimit(5, 4))));
    }

    #[test]
    fn total_order_samples_itself() {
        let mut cc = CountCache::default();
        let h = PartialOrder::transitive_closure(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let l = cc.sample_extension(&h, &mut rng).unwrap();
            assert_eq!(l.entries(), &[1, 2, 3]);
        }
    }

    #[test]
    fn cache_eviction_keeps_answers_right() {
        let mut cc = CountCache::new(22, 16);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let posets: Vec<_> = (0..40)
            .map(|_| crate::poset::random_poset(6, 0.4, &mut rng))
            .collect();
        let first: Vec<_> = posets.iter().map(|h| cc.count(h).unwrap()).collect();
        let second: Vec<_> = posets.iter().map(|h| cc.count(h).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn twenty_element_chain_and_antichain_are_fast() {
        let mut cc = CountCache::default();
        let ids: Vec<u32> = (0..20).collect();
        let chain_edges: Vec<_> = (0..19u32).map(|i| (i, i + 1)).collect();
        let chain = PartialOrder::transitive_closure(&ids, &chain_edges).unwrap();
        assert_eq!(cc.count(&chain).unwrap(), BigUint::one());
        let anti = PartialOrder::empty(&ids).unwrap();
        let mut f = BigUint::one();
        for i in 1..=20u32 {
            f *= BigUint::from(i);
        }
        assert_eq!(cc.count(&anti).unwrap(), f);
    }
}
