//! One-colour sum-cost solvers: an interval dynamic programme over
//! non-crossing matchings on the line, and a subset dynamic programme in
//! higher dimension.

use super::{Matching, BITMASK_CAP};
use crate::costs::power_cost;
use crate::error::{Error, Result};
use crate::points::{PointConfig, PointRef, EPS_TIE};

fn near(a: f64, b: f64, scale: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= EPS_TIE * a.abs().max(b.abs()).max(scale)
}

/// On the line an entwined pair can always be uncrossed at strictly lower
/// cost, so some optimum is non-crossing and an interval recursion finds it.
/// An odd point out is never covered by an edge (re-matching it to the
/// nearer endpoint would be cheaper), so it sits between top-level blocks.
pub(super) fn interval_min(config: &PointConfig, gamma: f64) -> Matching {
    let x = config.red_line();
    let n = x.len();
    let c = |i: usize, j: usize| power_cost(gamma, x[j] - x[i]);
    let scale = if n > 1 {
        c(0, n - 1).abs().max(c(0, 1).abs())
    } else {
        1.0
    };

    // best[i][len/2] over the block x[i..i+len]; choice stores i's partner
    let half = n / 2;
    let mut best = vec![vec![0.0f64; half + 1]; n + 1];
    let mut choice = vec![vec![usize::MAX; half + 1]; n + 1];
    let mut tie = vec![vec![false; half + 1]; n + 1];
    for h in 1..=half {
        let len = 2 * h;
        for i in 0..=n - len {
            let j = i + len - 1;
            let mut val = f64::INFINITY;
            let mut arg = usize::MAX;
            let mut ambiguous = false;
            for k in (i + 1..=j).step_by(2) {
                let inner = (k - i - 1) / 2;
                let outer = (j - k) / 2;
                let cand = c(i, k) + best[i + 1][inner] + best[k + 1][outer];
                if cand < val {
                    ambiguous = near(cand, val, scale);
                    val = cand;
                    arg = k;
                } else if near(cand, val, scale) {
                    ambiguous = true;
                }
            }
            let k = arg;
            best[i][h] = val;
            choice[i][h] = k;
            tie[i][h] = ambiguous || tie[i + 1][(k - i - 1) / 2] || tie[k + 1][(j - k) / 2];
        }
    }

    let mut edges = vec![];
    let mut stack = vec![];
    let mut unmatched = vec![];
    let flag;
    if n.is_multiple_of(2) {
        stack.push((0, half));
        flag = tie[0][half];
    } else {
        let mut val = f64::INFINITY;
        let mut arg = 0;
        let mut ambiguous = false;
        for u in (0..n).step_by(2) {
            let cand = best[0][u / 2] + best[u + 1][(n - 1 - u) / 2];
            if cand < val {
                ambiguous = near(cand, val, scale);
                val = cand;
                arg = u;
            } else if near(cand, val, scale) {
                ambiguous = true;
            }
        }
        unmatched.push(arg);
        stack.push((0, arg / 2));
        stack.push((arg + 1, (n - 1 - arg) / 2));
        flag = ambiguous || tie[0][arg / 2] || tie[arg + 1][(n - 1 - arg) / 2];
    }
    while let Some((i, h)) = stack.pop() {
        if h == 0 {
            continue;
        }
        let k = choice[i][h];
        edges.push((i, k));
        stack.push((i + 1, (k - i - 1) / 2));
        stack.push((k + 1, (i + 2 * h - 1 - k) / 2));
    }
    Matching::one_colour(edges, unmatched).with_tie(flag)
}

/// Exact one-colour optimum by dynamic programming over subsets of the
/// points still to be resolved; the lowest remaining point is either paired
/// or, when the subset has odd size, left unmatched.
pub(super) fn subset_min(config: &PointConfig, gamma: f64) -> Result<Matching> {
    let n = config.n_red();
    if n > BITMASK_CAP {
        return Err(Error::TooLarge {
            points: n,
            cap: BITMASK_CAP,
        });
    }
    let d =
        |i: usize, j: usize| power_cost(gamma, config.distance(PointRef::red(i), PointRef::red(j)));
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            scale = scale.max(d(i, j).abs());
        }
    }
    let full = (1usize << n) - 1;
    let mut best = vec![0.0f64; full + 1];
    // partner of the lowest point, or n for "left unmatched"
    let mut choice = vec![u8::MAX; full + 1];
    let mut tie = vec![false; full + 1];
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut val = f64::INFINITY;
        let mut arg = u8::MAX;
        let mut ambiguous = false;
        let mut consider = |cand: f64, a: u8, val: &mut f64, arg: &mut u8| {
            if cand < *val {
                ambiguous = near(cand, *val, scale);
                *val = cand;
                *arg = a;
            } else if near(cand, *val, scale) {
                ambiguous = true;
            }
        };
        if mask.count_ones() % 2 == 1 {
            consider(best[rest], n as u8, &mut val, &mut arg);
        }
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let sub = rest & !(1 << j);
            consider(d(i, j) + best[sub], j as u8, &mut val, &mut arg);
        }
        best[mask] = val;
        choice[mask] = arg;
        let sub = if arg as usize == n {
            rest
        } else {
            rest & !(1 << arg)
        };
        tie[mask] = ambiguous || tie[sub];
    }

    let mut edges = vec![];
    let mut unmatched = vec![];
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = choice[mask] as usize;
        mask &= !(1 << i);
        if j == n {
            unmatched.push(i);
        } else {
            edges.push((i, j));
            mask &= !(1 << j);
        }
    }
    Ok(Matching::one_colour(edges, unmatched).with_tie(tie[full]))
}
