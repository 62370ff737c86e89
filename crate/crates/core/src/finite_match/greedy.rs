//! Stable matchings: repeatedly join the globally closest eligible pair.
//! Under distinct distances this is the unique stable matching and the
//! lexicographically minimal one for the ascending-length order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::Matching;
use crate::error::{Error, Result};
use crate::points::{PointConfig, PointRef, EPS_TIE};

/// Configurations up to this size get a full pairwise distinct-distance
/// check; larger ones only compare the distances the greedy actually races.
const FULL_CHECK_CAP: usize = 2000;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS_TIE * a.max(b)
}

struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Greedy {
    matching: Matching,
    /// Two eligible distances that agree within the tie tolerance.
    degenerate: Option<(f64, f64)>,
}

fn eligible_distances_close(config: &PointConfig) -> Option<(f64, f64)> {
    let refs: Vec<PointRef> = config.refs().collect();
    let mut d = vec![];
    for (i, &a) in refs.iter().enumerate() {
        for &b in &refs[i + 1..] {
            if config.eligible(a, b) {
                d.push(config.distance(a, b));
            }
        }
    }
    d.sort_by(f64::total_cmp);
    d.windows(2)
        .find(|w| close(w[0], w[1]))
        .map(|w| (w[0], w[1]))
}

/// On the line the closest eligible pair among the remaining points is
/// always adjacent among them: a point in between would be eligible with
/// one of the two and closer to it. A heap of adjacent eligible gaps over a
/// linked list of survivors therefore runs in O(n log n).
fn greedy_line(config: &PointConfig) -> Greedy {
    let mut pts: Vec<(f64, PointRef)> = config.refs().map(|p| (config.x(p), p)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();
    let eligible = |i: usize, j: usize| config.eligible(pts[i].1, pts[j].1);
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut next: Vec<Option<usize>> = (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect();
    let mut alive = vec![true; n];
    let mut heap = BinaryHeap::new();
    for i in 0..n.saturating_sub(1) {
        if eligible(i, i + 1) {
            heap.push(Reverse((Key(pts[i + 1].0 - pts[i].0), i, i + 1)));
        }
    }
    let mut edges = vec![];
    let mut degenerate = None;
    let mut last: Option<f64> = None;
    while let Some(Reverse((Key(d), i, j))) = heap.pop() {
        if !(alive[i] && alive[j] && next[i] == Some(j)) {
            continue;
        }
        if let Some(l) = last {
            if degenerate.is_none() && close(l, d) {
                degenerate = Some((l, d));
            }
        }
        last = Some(d);
        alive[i] = false;
        alive[j] = false;
        edges.push((pts[i].1, pts[j].1));
        let (l, r) = (prev[i], next[j]);
        if let Some(l) = l {
            next[l] = r;
        }
        if let Some(r) = r {
            prev[r] = l;
        }
        if let (Some(l), Some(r)) = (l, r) {
            if eligible(l, r) {
                heap.push(Reverse((Key(pts[r].0 - pts[l].0), l, r)));
            }
        }
        // the next live candidate races the one just taken
        while let Some(Reverse((Key(d2), a, b))) = heap.peek() {
            if alive[*a] && alive[*b] && next[*a] == Some(*b) {
                if degenerate.is_none() && close(d, *d2) {
                    degenerate = Some((d, *d2));
                }
                break;
            }
            heap.pop();
        }
    }
    Greedy {
        matching: Matching::from_edges(config, edges),
        degenerate,
    }
}

fn greedy_general(config: &PointConfig) -> Greedy {
    let refs: Vec<PointRef> = config.refs().collect();
    let mut pairs = vec![];
    for (i, &a) in refs.iter().enumerate() {
        for (j, &b) in refs.iter().enumerate().skip(i + 1) {
            if config.eligible(a, b) {
                pairs.push((config.distance(a, b), i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let degenerate = pairs
        .windows(2)
        .find(|w| close(w[0].0, w[1].0))
        .map(|w| (w[0].0, w[1].0));
    let mut used = vec![false; refs.len()];
    let mut edges = vec![];
    for (_, i, j) in pairs {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            edges.push((refs[i], refs[j]));
        }
    }
    Greedy {
        matching: Matching::from_edges(config, edges),
        degenerate,
    }
}

fn run(config: &PointConfig) -> Greedy {
    let mut g = if config.dim() == 1 {
        greedy_line(config)
    } else {
        greedy_general(config)
    };
    if config.dim() == 1 && config.len() <= FULL_CHECK_CAP {
        g.degenerate = eligible_distances_close(config);
    }
    g
}

/// The minimal matching for the ascending-length (−∞) order; near-equal
/// eligible distances set the tie flag.
pub(super) fn greedy_min(config: &PointConfig) -> Matching {
    let g = run(config);
    let tie = g.degenerate.is_some();
    g.matching.with_tie(tie)
}

/// The unique stable matching of a configuration with distinct distances:
/// no two points prefer each other to their partners (unmatched points
/// prefer everyone).
pub fn solve_stable(config: &PointConfig) -> Result<Matching> {
    let g = run(config);
    if let Some((a, b)) = g.degenerate {
        return Err(Error::DegenerateDistances(a, b));
    }
    Ok(g.matching)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Mode;

    #[test]
    fn examples() {
        let cfg = PointConfig::line((-5.0, 5.0), Mode::TwoColour, vec![0.0], vec![1.0]).unwrap();
        assert_eq!(solve_stable(&cfg).unwrap().index_edges(), vec![(0, 0)]);
        let one = PointConfig::line(
            (-1.0, 10.0),
            Mode::OneColour,
            vec![0.0, 1.0, 3.0, 7.0],
            vec![],
        )
        .unwrap();
        assert_eq!(
            solve_stable(&one).unwrap().index_edges(),
            vec![(0, 1), (2, 3)]
        );
        let tied =
            PointConfig::line((-1.0, 10.0), Mode::OneColour, vec![0.0, 1.0, 2.0], vec![]).unwrap();
        assert!(matches!(
            solve_stable(&tied),
            Err(Error::DegenerateDistances(_, _))
        ));
    }

    #[test]
    fn line_and_general_routes_agree() {
        use crate::points::{sample_poisson, Seed, Window};
        let w = Window::line(0.0, 30.0).unwrap();
        for s in 0..100 {
            for mode in [Mode::OneColour, Mode::TwoColour] {
                let cfg = sample_poisson(&w, 1.0, mode, Seed::new(s)).unwrap();
                let a = greedy_line(&cfg).matching;
                let b = greedy_general(&cfg).matching;
                assert_eq!(a, b);
            }
        }
    }
}
