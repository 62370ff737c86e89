//! Lexicographic bottleneck matching for the descending-length (+∞) order.
//!
//! The longest edge is minimised first: binary search over the sorted
//! eligible lengths for the smallest threshold admitting a matching of the
//! required size. With distinct lengths the edge at that threshold belongs to
//! every such matching, so it is fixed and the search repeats on the rest.

use petgraph::algo::maximum_matching;
use petgraph::graph::UnGraph;

use super::{min_unmatched, Matching};
use crate::error::Result;
use crate::points::{PointConfig, PointRef, EPS_TIE};

fn matchable(n: usize, edges: &[(f64, usize, usize)], upto: usize) -> usize {
    let mut g = UnGraph::<(), ()>::with_capacity(n, upto);
    for _ in 0..n {
        g.add_node(());
    }
    for &(_, i, j) in &edges[..upto] {
        g.add_edge((i as u32).into(), (j as u32).into(), ());
    }
    maximum_matching(&g).len()
}

pub(super) fn bottleneck_min(config: &PointConfig) -> Result<Matching> {
    let refs: Vec<PointRef> = config.refs().collect();
    let n = refs.len();
    let need_total = (n - min_unmatched(config)) / 2;
    let mut alive = vec![true; n];
    let mut fixed = vec![];
    let mut tie = false;
    while fixed.len() < need_total {
        let need = need_total - fixed.len();
        let mut edges = vec![];
        for i in 0..n {
            for j in i + 1..n {
                if alive[i] && alive[j] && config.eligible(refs[i], refs[j]) {
                    edges.push((config.distance(refs[i], refs[j]), i, j));
                }
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        if tie && matchable(n, &edges, edges.len()) < need {
            // an earlier tied choice was not extendable
            break;
        }
        // smallest prefix length whose edges admit `need` disjoint pairs
        let (mut lo, mut hi) = (need, edges.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if matchable(n, &edges, mid) >= need {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let t = lo - 1;
        let (len, i, j) = edges[t];
        let near = |k: usize| {
            edges
                .get(k)
                .is_some_and(|e| (e.0 - len).abs() <= EPS_TIE * len.max(e.0))
        };
        if (t > 0 && near(t - 1)) || near(t + 1) {
            tie = true;
        }
        alive[i] = false;
        alive[j] = false;
        fixed.push((refs[i], refs[j]));
    }
    Ok(Matching::from_edges(config, fixed).with_tie(tie))
}
