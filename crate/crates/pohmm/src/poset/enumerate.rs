//! Poset generators: exhaustive enumeration for small grounds, random
//! closed orders, and random series-parallel constructions.

use super::PartialOrder;
use crate::{ActorId, Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// Largest ground for exhaustive enumeration (130023 labelled posets at 6;
/// the count grows by ~50x per extra element).
pub const MAX_ENUMERATE: usize = 6;

/// Every labelled partial order on ground `{0, .., m-1}`.
///
/// Built by extending every (m-1)-poset with a new greatest-index vertex:
/// choose an up-closed set `U` above it and a down-closed set `D` below it
/// with `U x D` already related. Each labelled poset arises exactly once.
pub fn all_posets(m: usize) -> Result<Vec<PartialOrder>> {
    if m > MAX_ENUMERATE {
        return Err(Error::SizeLimit(m, MAX_ENUMERATE));
    }
    let mut layer: Vec<Vec<u64>> = vec![vec![]];
    for k in 0..m {
        let mut next = Vec::new();
        for rows in &layer {
            let above = super::above_columns(rows);
            let all = if k == 0 { 0 } else { (1u64 << k) - 1 };
            for u in submasks(all) {
                if !up_closed(u, &above) {
                    continue;
                }
                let mut d = all & !u;
                loop {
                    if down_closed(d, rows) && covers(u, d, rows) {
                        let mut new_rows = rows.clone();
                        for v in bits(u) {
                            new_rows[v] |= 1 << k;
                        }
                        new_rows.push(d);
                        next.push(new_rows);
                    }
                    if d == 0 {
                        break;
                    }
                    d = (d - 1) & (all & !u);
                }
            }
        }
        layer = next;
    }
    let ground: Vec<ActorId> = (0..m as ActorId).collect();
    layer
        .into_iter()
        .map(|rows| PartialOrder::from_closed_rows(&ground, rows))
        .collect()
}

fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut cur = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = cur;
        if cur == 0 {
            done = true;
        } else {
            cur = (cur - 1) & mask;
        }
        Some(out)
    })
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            return None;
        }
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        Some(v)
    })
}

fn up_closed(u: u64, above: &[u64]) -> bool {
    bits(u).all(|v| above[v] & !u == 0)
}

fn down_closed(d: u64, rows: &[u64]) -> bool {
    bits(d).all(|v| rows[v] & !d == 0)
}

fn covers(u: u64, d: u64, rows: &[u64]) -> bool {
    bits(u).all(|v| rows[v] & d == d)
}

/// Every linear extension of `h`, top first, by peeling maximal elements.
/// Exhaustive, so only sensible for small grounds (up to m! lists).
pub fn linear_extensions(h: &PartialOrder) -> Result<Vec<Vec<ActorId>>> {
    let m = h.size();
    if m > 8 {
        return Err(Error::SizeLimit(m, 8));
    }
    let above = super::above_columns(h.rows());
    let full = if m == 0 { 0 } else { (1u64 << m) - 1 };
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(m);
    fn recurse(
        h: &PartialOrder,
        above: &[u64],
        left: u64,
        prefix: &mut Vec<ActorId>,
        out: &mut Vec<Vec<ActorId>>,
    ) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for i in bits(left) {
            if above[i] & left == 0 {
                prefix.push(h.ground()[i]);
                recurse(h, above, left & !(1 << i), prefix, out);
                prefix.pop();
            }
        }
    }
    recurse(h, &above, full, &mut prefix, &mut out);
    Ok(out)
}

/// Random closed order on `{0, .., m-1}`: a random vertex permutation fixes
/// admissible directions, each admissible pair is related with probability
/// `edge_prob`, then the relation is closed. Always acyclic.
pub fn random_poset<R: Rng + ?Sized>(m: usize, edge_prob: f64, rng: &mut R) -> PartialOrder {
    let ground: Vec<ActorId> = (0..m as ActorId).collect();
    let mut perm = ground.clone();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if rng.gen::<f64>() < edge_prob {
                edges.push((perm[i], perm[j]));
            }
        }
    }
    PartialOrder::transitive_closure(&ground, &edges).expect("consistent with a total order")
}

/// Random vertex-series-parallel order on `{0, .., m-1}` from a random
/// binary decomposition tree: split, recurse, then compose in series (every
/// left vertex above every right vertex) or parallel.
pub fn random_vsp<R: Rng + ?Sized>(m: usize, rng: &mut R) -> PartialOrder {
    assert!(m >= 1);
    let mut ids: Vec<ActorId> = (0..m as ActorId).collect();
    ids.shuffle(rng);
    let mut edges = Vec::new();
    build_vsp(&ids, rng, &mut edges);
    let ground: Vec<ActorId> = (0..m as ActorId).collect();
    PartialOrder::transitive_closure(&ground, &edges).expect("series-parallel edges are acyclic")
}

fn build_vsp<R: Rng + ?Sized>(ids: &[ActorId], rng: &mut R, edges: &mut Vec<(ActorId, ActorId)>) {
    if ids.len() <= 1 {
        return;
    }
    let split = rng.gen_range(1..ids.len());
    let (left, right) = ids.split_at(split);
    build_vsp(left, rng, edges);
    build_vsp(right, rng, edges);
    if rng.gen::<bool>() {
        for &a in left {
            for &b in right {
                edges.push((a, b));
            }
        }
    }
}
