//! Recognition of structured order classes: vertex-series-parallel orders
//! and bucket orders.

use super::PartialOrder;

/// True iff no four vertices `a, b, c, d` induce the forbidden pattern
/// `{a > b, c > b, c > d}` with `a || c`, `a || d`, `b || d` (the "N").
/// Orders built purely by series/parallel composition are exactly the
/// N-free ones.
pub fn is_vsp(h: &PartialOrder) -> bool {
    let n = h.size();
    if n < 4 {
        return true;
    }
    let below = h.rows();
    let above = h.above_columns();
    let linked: Vec<u64> = (0..n).map(|v| below[v] | above[v] | (1 << v)).collect();
    for c in 0..n {
        let mut bs = below[c];
        while bs != 0 {
            let b = bs.trailing_zeros() as usize;
            bs &= bs - 1;
            // a > b, a unrelated to c (a != c is implied: c > b links them).
            let cand_a = above[b] & !linked[c];
            if cand_a == 0 {
                continue;
            }
            let mut ds = below[c] & !(1 << b) & !linked[b];
            while ds != 0 {
                let d = ds.trailing_zeros() as usize;
                ds &= ds - 1;
                if cand_a & !linked[d] != 0 {
                    return false;
                }
            }
        }
    }
    true
}

/// True iff the vertices partition into antichain "buckets" with a complete
/// order across buckets. Vertices share a bucket exactly when their
/// above/below signatures coincide, so it suffices to check that every pair
/// with distinct signatures is comparable.
pub fn is_bucket(h: &PartialOrder) -> bool {
    let n = h.size();
    let below = h.rows();
    let above = h.above_columns();
    for i in 0..n {
        for j in i + 1..n {
            let same_sig = below[i] == below[j] && above[i] == above[j];
            let comparable = below[i] & (1 << j) != 0 || below[j] & (1 << i) != 0;
            if !same_sig && !comparable {
                return false;
            }
        }
    }
    true
}
