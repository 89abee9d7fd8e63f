//! Exact combinatorics on partial orders over small ground sets.
//!
//! A [`PartialOrder`] is a transitively closed DAG: `i -> j` means `i` ranks
//! strictly above `j`. The representation is one `u64` bitmask row per ground
//! element, which caps the ground at 64 elements; everything downstream works
//! on per-year active sets far below that.

mod classes;
mod count;
mod enumerate;

pub use classes::{is_bucket, is_vsp};
pub use count::{CountCache, End};
pub use enumerate::{all_posets, linear_extensions, random_poset, random_vsp};

use crate::{ActorId, Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest ground set the bitmask representation supports.
pub const MAX_GROUND: usize = 64;

/// A rank-order list: distinct actors, first entry ranked highest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ActorId>", into = "Vec<ActorId>")]
pub struct RankList {
    entries: Vec<ActorId>,
}

impl RankList {
    pub fn new(entries: Vec<ActorId>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Parse("empty rank list".into()));
        }
        let mut seen = entries.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parse("rank list repeats an actor".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ActorId] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Membership as a sorted set.
    pub fn members(&self) -> Vec<ActorId> {
        let mut m = self.entries.clone();
        m.sort_unstable();
        m
    }
}

impl TryFrom<Vec<ActorId>> for RankList {
    type Error = Error;
    fn try_from(v: Vec<ActorId>) -> Result<Self> {
        RankList::new(v)
    }
}

impl From<RankList> for Vec<ActorId> {
    fn from(l: RankList) -> Self {
        l.entries
    }
}

/// Transitively closed, acyclic relation over a sorted ground set.
///
/// `below[i]` holds a bit per ground position `j` with `ground[i] > ground[j]`
/// (reading `>` as "ranks above"). The closure invariant is maintained by
/// every constructor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialOrder {
    ground: Vec<ActorId>,
    below: Vec<u64>,
}

impl PartialOrder {
    /// The empty order (no relations) on the given actors.
    pub fn empty(ground: &[ActorId]) -> Result<Self> {
        let ground = sorted_ground(ground)?;
        let below = vec![0u64; ground.len()];
        Ok(Self { ground, below })
    }

    /// Smallest transitively closed superset of `edges`; errors on any
    /// directed cycle.
    pub fn transitive_closure(ground: &[ActorId], edges: &[(ActorId, ActorId)]) -> Result<Self> {
        let ground = sorted_ground(ground)?;
        let n = ground.len();
        let mut below = vec![0u64; n];
        for &(a, b) in edges {
            let i = position(&ground, a).ok_or(Error::UnknownActor(a))?;
            let j = position(&ground, b).ok_or(Error::UnknownActor(b))?;
            if i == j {
                return Err(Error::Cycle);
            }
            below[i] |= 1 << j;
        }
        // Warshall reachability on bitmask rows.
        for k in 0..n {
            let row_k = below[k];
            for row in below.iter_mut() {
                if *row & (1 << k) != 0 {
                    *row |= row_k;
                }
            }
        }
        for (i, row) in below.iter().enumerate() {
            if row & (1 << i) != 0 {
                return Err(Error::Cycle);
            }
        }
        Ok(Self { ground, below })
    }

    /// Builds directly from bitmask rows, verifying the strict-partial-order
    /// invariants (irreflexive, antisymmetric, transitively closed). The
    /// ground must already be strictly increasing: rows are positional.
    pub fn from_closed_rows(ground: &[ActorId], rows: Vec<u64>) -> Result<Self> {
        if !ground.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parse("ground must be strictly increasing".into()));
        }
        if ground.len() > MAX_GROUND {
            return Err(Error::GroundTooLarge(ground.len(), MAX_GROUND));
        }
        let ground = ground.to_vec();
        let n = ground.len();
        if rows.len() != n {
            return Err(Error::Parse("row count does not match ground".into()));
        }
        if n < 64 {
            let full = (1u64 << n) - 1;
            if rows.iter().any(|r| r & !full != 0) {
                return Err(Error::Parse("relation bits outside ground".into()));
            }
        }
        for (i, &row) in rows.iter().enumerate() {
            if row & (1 << i) != 0 {
                return Err(Error::Cycle);
            }
            let mut rest = row;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if rows[j] & (1 << i) != 0 {
                    return Err(Error::Cycle);
                }
                if rows[j] & !row != 0 {
                    return Err(Error::Parse("relation not transitively closed".into()));
                }
            }
        }
        Ok(Self { ground, below: rows })
    }

    pub fn ground(&self) -> &[ActorId] {
        &self.ground
    }

    pub fn size(&self) -> usize {
        self.ground.len()
    }

    /// Bitmask rows of the closure; row order matches `ground()`.
    pub fn rows(&self) -> &[u64] {
        &self.below
    }

    pub(crate) fn pos(&self, a: ActorId) -> Option<usize> {
        position(&self.ground, a)
    }

    pub fn has_edge(&self, a: ActorId, b: ActorId) -> bool {
        match (self.pos(a), self.pos(b)) {
            (Some(i), Some(j)) => self.below[i] & (1 << j) != 0,
            _ => false,
        }
    }

    /// All closure edges `(above, below)` in ground order.
    pub fn edges(&self) -> Vec<(ActorId, ActorId)> {
        let mut out = Vec::new();
        for (i, &row) in self.below.iter().enumerate() {
            let mut rest = row;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                out.push((self.ground[i], self.ground[j]));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.below.iter().map(|r| r.count_ones() as usize).sum()
    }

    /// Restriction to `keep`, retaining only internal edges. Transitive
    /// closure is inherited by restriction.
    pub fn suborder(&self, keep: &[ActorId]) -> Result<Self> {
        let keep = sorted_ground(keep)?;
        let positions: Vec<usize> = keep
            .iter()
            .map(|&a| self.pos(a).ok_or(Error::UnknownActor(a)))
            .collect::<Result<_>>()?;
        let mut below = vec![0u64; keep.len()];
        for (new_i, &old_i) in positions.iter().enumerate() {
            let row = self.below[old_i];
            for (new_j, &old_j) in positions.iter().enumerate() {
                if row & (1 << old_j) != 0 {
                    below[new_i] |= 1 << new_j;
                }
            }
        }
        Ok(Self { ground: keep, below })
    }

    /// Unique minimal edge set whose closure is `self`: keeps `i -> j` only
    /// when no intermediate `k` has `i -> k -> j`.
    pub fn transitive_reduction(&self) -> Vec<(ActorId, ActorId)> {
        let mut out = Vec::new();
        for (i, &row) in self.below.iter().enumerate() {
            let mut implied = 0u64;
            let mut rest = row;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                implied |= self.below[k];
            }
            let mut cover = row & !implied;
            while cover != 0 {
                let j = cover.trailing_zeros() as usize;
                cover &= cover - 1;
                out.push((self.ground[i], self.ground[j]));
            }
        }
        out.sort_unstable();
        out
    }

    /// Number of vertices on the longest chain; 1 for a nonempty antichain,
    /// 0 for an empty ground set.
    pub fn depth(&self) -> usize {
        let n = self.size();
        if n == 0 {
            return 0;
        }
        // below[j] is a strict subset of below[i] whenever i > j, so
        // processing by ascending popcount sees all successors first.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by_key(|&i| self.below[i].count_ones());
        let mut chain = vec![1usize; n];
        let mut best = 1;
        for &i in &order {
            let mut rest = self.below[i];
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                chain[i] = chain[i].max(1 + chain[j]);
            }
            best = best.max(chain[i]);
        }
        best
    }

    /// Column masks: `above[j]` = set of positions ranked above `j`.
    pub(crate) fn above_columns(&self) -> Vec<u64> {
        above_columns(&self.below)
    }

    /// DOT rendering of the transitive reduction.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph \"{name}\" {{\n  rankdir=TB;\n");
        for &a in &self.ground {
            s.push_str(&format!("  \"{a}\";\n"));
        }
        for (a, b) in self.transitive_reduction() {
            s.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
        }
        s.push_str("}\n");
        s
    }
}

pub(crate) fn above_columns(rows: &[u64]) -> Vec<u64> {
    let mut above = vec![0u64; rows.len()];
    for (i, &row) in rows.iter().enumerate() {
        let mut rest = row;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            above[j] |= 1 << i;
        }
    }
    above
}

fn sorted_ground(ground: &[ActorId]) -> Result<Vec<ActorId>> {
    if ground.len() > MAX_GROUND {
        return Err(Error::GroundTooLarge(ground.len(), MAX_GROUND));
    }
    let mut g = ground.to_vec();
    g.sort_unstable();
    if let Some(w) = g.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateId(w[0].to_string()));
    }
    Ok(g)
}

fn position(ground: &[ActorId], a: ActorId) -> Option<usize> {
    ground.binary_search(&a).ok()
}

/// Precedence relations attested by at least one list and contradicted by
/// none. The result is raw: it is neither closed nor guaranteed acyclic
/// (three lists can attest a 3-cycle pairwise); callers resolve that.
pub fn intersection_order(lists: &[RankList]) -> Vec<(ActorId, ActorId)> {
    let mut attested = std::collections::BTreeSet::new();
    for l in lists {
        let e = l.entries();
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                attested.insert((e[i], e[j]));
            }
        }
    }
    attested
        .iter()
        .filter(|&&(a, b)| !attested.contains(&(b, a)))
        .copied()
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PartialOrderJson {
    ground: Vec<ActorId>,
    edges: Vec<(ActorId, ActorId)>,
}

impl Serialize for PartialOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PartialOrderJson {
            ground: self.ground.clone(),
            edges: self.edges(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PartialOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PartialOrderJson::deserialize(d)?;
        PartialOrder::transitive_closure(&raw.ground, &raw.edges).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig_poset() -> PartialOrder {
        PartialOrder::transitive_closure(
            &[1, 2, 3, 4, 5],
            &[(1, 2), (2, 3), (3, 5), (1, 4), (4, 5)],
        )
        .unwrap()
    }

    #[test]
    fn closure_adds_implied_edges() {
        let h = PartialOrder::transitive_closure(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(h.edges(), vec![(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn closure_of_reduction_gives_eight_edges() {
        let h = fig_poset();
        let mut e = h.edges();
        e.sort_unstable();
        assert_eq!(
            e,
            vec![
                (1, 2),
                (1, 3),
                (1, 4),
                (1, 5),
                (2, 3),
                (2, 5),
                (3, 5),
                (4, 5)
            ]
        );
    }

    #[test]
    fn cycles_rejected() {
        assert!(matches!(
            PartialOrder::transitive_closure(&[1, 2], &[(1, 2), (2, 1)]),
            Err(Error::Cycle)
        ));
        assert!(matches!(
            PartialOrder::transitive_closure(&[1, 2, 3], &[(1, 2), (2, 3), (3, 1)]),
            Err(Error::Cycle)
        ));
    }

    #[test]
    fn reduction_recovers_cover_edges() {
        let h = fig_poset();
        assert_eq!(
            h.transitive_reduction(),
            vec![(1, 2), (1, 4), (2, 3), (3, 5), (4, 5)]
        );
        let chain = PartialOrder::transitive_closure(&[1, 2, 3], &[(1, 2), (2, 3), (1, 3)]).unwrap();
        assert_eq!(chain.transitive_reduction(), vec![(1, 2), (2, 3)]);
        let empty = PartialOrder::empty(&[1, 2, 3]).unwrap();
        assert!(empty.transitive_reduction().is_empty());
    }

    #[test]
    fn suborder_keeps_internal_edges() {
        let h = fig_poset();
        let s = h.suborder(&[2, 4, 5]).unwrap();
        assert_eq!(s.edges(), vec![(2, 5), (4, 5)]);
        assert_eq!(h.suborder(&[1, 2, 3, 4, 5]).unwrap(), h);
        let none = h.suborder(&[]).unwrap();
        assert_eq!(none.size(), 0);
        assert!(matches!(h.suborder(&[2, 9]), Err(Error::UnknownActor(9))));
    }

    #[test]
    fn depth_counts_chain_vertices() {
        assert_eq!(fig_poset().depth(), 4);
        assert_eq!(PartialOrder::empty(&[1, 2, 3]).unwrap().depth(), 1);
        assert_eq!(PartialOrder::empty(&[]).unwrap().depth(), 0);
        let total =
            PartialOrder::transitive_closure(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(total.depth(), 3);
    }

    #[test]
    fn intersection_order_drops_contradicted_pairs() {
        let l = |v: &[ActorId]| RankList::new(v.to_vec()).unwrap();
        assert_eq!(
            intersection_order(&[l(&[1, 2, 3]), l(&[1, 3, 2])]),
            vec![(1, 2), (1, 3)]
        );
        assert_eq!(
            intersection_order(&[l(&[1, 2]), l(&[2, 3])]),
            vec![(1, 2), (2, 3)]
        );
        assert!(intersection_order(&[l(&[1, 2]), l(&[2, 1])]).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let h = fig_poset();
        let js = serde_json::to_string(&h).unwrap();
        let back: PartialOrder = serde_json::from_str(&js).unwrap();
        assert_eq!(h, back);
        // Format is {ground, edges}.
        assert!(js.starts_with("{\"ground\":[1,2,3,4,5],\"edges\":"));
    }

    #[test]
    fn dot_contains_reduction_only() {
        let h = fig_poset();
        let dot = h.to_dot("y1100");
        assert!(dot.contains("\"1\" -> \"2\""));
        assert!(!dot.contains("\"1\" -> \"3\"")); // implied edge not drawn
    }

    #[test]
    fn from_closed_rows_validates() {
        // {0 > 1, 1 > 2} without 0 > 2 is not closed.
        let bad = PartialOrder::from_closed_rows(&[0, 1, 2], vec![0b010, 0b100, 0]);
        assert!(bad.is_err());
        let good = PartialOrder::from_closed_rows(&[0, 1, 2], vec![0b110, 0b100, 0]).unwrap();
        assert_eq!(good.depth(), 3);
    }
}
