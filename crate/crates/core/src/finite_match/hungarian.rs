//! Two-colour sum-cost solver: the O(n³) shortest augmenting path Hungarian
//! method with row and column potentials, on a square matrix padded with
//! zero-cost dummy rows.

use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;

use super::Matching;
use crate::costs::{self, power_cost, CostSpec};
use crate::error::Result;
use crate::points::{Colour, PointConfig, PointRef, EPS_TIE};

struct Assignment {
    /// Column of each real row.
    row_to_col: Vec<usize>,
    tie: bool,
}

/// Minimum-cost assignment of every row of `cost` (rows ≤ columns).
/// The tie flag reports an alternating cycle of tight edges, i.e. a second
/// assignment whose cost agrees within the tolerance.
fn assign(cost: &[Vec<f64>], n_cols: usize) -> Assignment {
    let n_real = cost.len();
    let n = n_cols;
    debug_assert!(n_real <= n);
    let scale = cost
        .iter()
        .flatten()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    let c = |i: usize, j: usize| if i < n_real { cost[i][j] } else { 0.0 };

    // 1-based potentials as in the classical formulation; p[j] is the row on column j
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }

    // Alternating-cycle search in the tight graph. All dummy rows are
    // interchangeable and share one potential at optimality, so they are
    // contracted into a single node; otherwise swapping two dummies would
    // look like a second optimum.
    let tol = EPS_TIE * scale * n as f64;
    let dummy = n_real;
    let row_node = |i: usize| if i < n_real { i } else { dummy };
    let mut g = DiGraph::<(), ()>::new();
    let rows: Vec<_> = (0..=n_real).map(|_| g.add_node(())).collect();
    let cols: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for j in 0..n {
        g.add_edge(cols[j], rows[row_node(p[j + 1] - 1)], ());
    }
    let dummy_u = (1..=n).find(|&j| p[j] > n_real).map(|j| u[p[j]]);
    for j in 0..n {
        let owner = row_node(p[j + 1] - 1);
        if let Some(du) = dummy_u {
            if owner != dummy && (-du - v[j + 1]).abs() <= tol {
                g.add_edge(rows[dummy], cols[j], ());
            }
        }
        for i in 0..n_real {
            if i != owner && (cost[i][j] - u[i + 1] - v[j + 1]).abs() <= tol {
                g.add_edge(rows[i], cols[j], ());
            }
        }
    }
    Assignment {
        row_to_col: row_to_col.into_iter().take(n_real).collect(),
        tie: is_cyclic_directed(&g),
    }
}

/// Minimal sum-cost two-colour matching with edge cost `cost(length)`.
fn two_colour_with(config: &PointConfig, cost: impl Fn(f64) -> f64) -> Matching {
    let (row_colour, n_rows, n_cols) = if config.n_red() <= config.n_blue() {
        (Colour::Red, config.n_red(), config.n_blue())
    } else {
        (Colour::Blue, config.n_blue(), config.n_red())
    };
    let row = |i| PointRef {
        colour: row_colour,
        index: i,
    };
    let col = |j| PointRef {
        colour: row_colour.other(),
        index: j,
    };
    let matrix: Vec<Vec<f64>> = (0..n_rows)
        .map(|i| {
            (0..n_cols)
                .map(|j| cost(config.distance(row(i), col(j))))
                .collect()
        })
        .collect();
    if n_rows == 0 {
        return Matching::empty(config);
    }
    let a = assign(&matrix, n_cols);
    let edges = a
        .row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| (row(i), col(j)));
    Matching::from_edges(config, edges).with_tie(a.tie)
}

pub(super) fn two_colour_min(config: &PointConfig, gamma: f64) -> Matching {
    two_colour_with(config, |x| power_cost(gamma, x))
}

/// The 1− and 1+ kinds on the line. The γ=1 cost is perturbed by
/// ∓δ·x·ln(x/x̄), the first-order term of x^{1∓δ}, which among γ=1 optima
/// prefers straddling (1−) or entwined (1+) pairs. The answer is accepted
/// only after checking that it is γ=1 optimal and free of the forbidden
/// arrangement; otherwise δ shrinks, and a failure at the smallest δ is
/// reported as a tie.
pub(super) fn two_colour_critical(spec: CostSpec, config: &PointConfig) -> Result<Matching> {
    let sign = if spec == CostSpec::OneMinus {
        -1.0
    } else {
        1.0
    };
    let gamma1 = CostSpec::Finite(1.0);
    let base = two_colour_min(config, 1.0);
    let base_score = costs::score(gamma1, config, &base)?;
    let mean = {
        let lens: Vec<f64> = base
            .edge_refs()
            .map(|(a, b)| config.distance(a, b))
            .collect();
        if lens.is_empty() {
            1.0
        } else {
            lens.iter().sum::<f64>() / lens.len() as f64
        }
    };
    let mut last = base.clone();
    for delta in [1e-6, 1e-8, 1e-10] {
        let m = two_colour_with(config, |x| x + sign * delta * x * (x / mean).ln());
        let s = costs::score(gamma1, config, &m)?;
        let optimal = costs::compare(gamma1, &s, &base_score)? != std::cmp::Ordering::Greater;
        if optimal && !costs::has_forbidden_pair(spec, config, &m) {
            return Ok(m);
        }
        last = m;
    }
    Ok(last.with_tie(true))
}
