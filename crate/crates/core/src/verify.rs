//! Structural and minimality predicates for matchings from any source.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::costs::{self, CostSpec};
use crate::error::{Error, Result};
use crate::finite_match::{oracle_min, Matching, ORACLE_CAP};
use crate::points::{Mode, PointConfig, PointRef, Seed};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub predicate: String,
    pub result: bool,
    /// Points involved in the first failure found.
    pub witness: Option<Vec<PointRef>>,
    pub pairs_checked: usize,
    pub subsets_checked: usize,
}

impl Report {
    pub fn to_json(&self, config: &PointConfig) -> Value {
        let witness = self.witness.as_ref().map(|w| {
            w.iter()
                .map(
                    |&p| json!({"colour": p.colour, "index": p.index, "position": config.point(p)}),
                )
                .collect::<Vec<_>>()
        });
        json!({
            "predicate": self.predicate,
            "result": self.result,
            "witness": witness,
            "pairs_checked": self.pairs_checked,
            "subsets_checked": self.subsets_checked,
        })
    }
}

fn partner_lengths(config: &PointConfig, m: &Matching) -> Result<BTreeMap<PointRef, f64>> {
    m.validate(config)?;
    let mut d: BTreeMap<PointRef, f64> = config.refs().map(|p| (p, f64::INFINITY)).collect();
    for (a, b) in m.edge_refs() {
        let l = config.distance(a, b);
        d.insert(a, l);
        d.insert(b, l);
    }
    Ok(d)
}

/// Whether x and y (distinct, and eligible to be matched) break
/// |x−M(x)| ∧ |y−M(y)| ≤ κ|x−y|.
pub fn violates(config: &PointConfig, m: &Matching, kappa: f64, x: PointRef, y: PointRef) -> bool {
    let d = |p: PointRef| {
        m.partner(p)
            .map_or(f64::INFINITY, |q| config.distance(p, q))
    };
    x != y && config.eligible(x, y) && d(x).min(d(y)) > kappa * config.distance(x, y)
}

fn kappa_check(config: &PointConfig, m: &Matching, kappa: f64, name: &str) -> Result<Report> {
    if !(kappa >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "κ must be at least 1, got {kappa}"
        )));
    }
    let d = partner_lengths(config, m)?;
    let refs: Vec<PointRef> = config.refs().collect();
    let mut pairs = 0;
    for (i, &x) in refs.iter().enumerate() {
        for &y in &refs[i + 1..] {
            if !config.eligible(x, y) {
                continue;
            }
            pairs += 1;
            if d[&x].min(d[&y]) > kappa * config.distance(x, y) {
                return Ok(Report {
                    predicate: name.into(),
                    result: false,
                    witness: Some(vec![x, y]),
                    pairs_checked: pairs,
                    subsets_checked: 0,
                });
            }
        }
    }
    Ok(Report {
        predicate: name.into(),
        result: true,
        witness: None,
        pairs_checked: pairs,
        subsets_checked: 0,
    })
}

/// No two points (of opposite colours for two colours) both strictly prefer
/// each other to their partners. Unmatched points have infinite distance to
/// their partner.
pub fn is_stable(config: &PointConfig, m: &Matching) -> Result<Report> {
    kappa_check(config, m, 1.0, "stable")
}

/// Stability weakened by the factor κ ≥ 1.
pub fn is_quasistable(config: &PointConfig, m: &Matching, kappa: f64) -> Result<Report> {
    kappa_check(config, m, kappa, "quasistable")
}

/// Units of a compatible subset: an edge or an unmatched point.
fn units(m: &Matching) -> Vec<Vec<PointRef>> {
    m.edge_refs()
        .map(|(a, b)| vec![a, b])
        .chain(m.unmatched().iter().map(|&p| vec![p]))
        .collect()
}

/// Whether the restriction of `m` to `subset`, a union of units, is a
/// minimal matching of those points.
fn restriction_minimal(
    spec: CostSpec,
    config: &PointConfig,
    m: &Matching,
    subset: &[PointRef],
) -> Result<bool> {
    let (sub, back) = config.restrict(subset);
    let fwd: BTreeMap<PointRef, PointRef> = (0..sub.len())
        .map(|d| (back[d], sub.from_dense(d)))
        .collect();
    let edges: Vec<(PointRef, PointRef)> = m
        .edge_refs()
        .filter(|(a, _)| fwd.contains_key(a))
        .map(|(a, b)| (fwd[&a], fwd[&b]))
        .collect();
    let restricted = Matching::from_edges(&sub, edges);
    let mine = costs::score(spec, &sub, &restricted)?;
    let best = oracle_min(spec, &sub)?;
    let opt = costs::score(spec, &sub, &best[0])?;
    Ok(costs::compare(spec, &mine, &opt)? != Ordering::Greater)
}

/// Every compatible subset of at most `subset_cap` points (unions of edges
/// and unmatched points of `m`) carries a minimal restriction. All unions of
/// two units are checked; larger unions are drawn at random, `samples` of
/// them, from the stream given by `seed`.
pub fn is_gamma_minimal_local(
    spec: CostSpec,
    config: &PointConfig,
    m: &Matching,
    subset_cap: usize,
    samples: usize,
    seed: Seed,
) -> Result<Report> {
    if subset_cap > ORACLE_CAP {
        return Err(Error::TooLarge {
            points: subset_cap,
            cap: ORACLE_CAP,
        });
    }
    m.validate(config)?;
    let name = format!("gamma-minimal-local({spec})");
    let us = units(m);
    let fail = |w: Vec<PointRef>, pairs, subsets| Report {
        predicate: name.clone(),
        result: false,
        witness: Some(w),
        pairs_checked: pairs,
        subsets_checked: subsets,
    };
    let mut pairs = 0;
    for i in 0..us.len() {
        for j in i..us.len() {
            let s: Vec<PointRef> = if i == j {
                us[i].clone()
            } else {
                [us[i].clone(), us[j].clone()].concat()
            };
            if s.len() > subset_cap {
                continue;
            }
            pairs += 1;
            if !restriction_minimal(spec, config, m, &s)? {
                return Ok(fail(s, pairs, 0));
            }
        }
    }
    let mut rng = seed.rng();
    let mut seen = BTreeSet::new();
    let mut subsets = 0;
    let mut order: Vec<usize> = (0..us.len()).collect();
    for _ in 0..samples {
        order.shuffle(&mut rng);
        let target = rng.random_range(1..=subset_cap.max(1));
        let mut pick = vec![];
        let mut size = 0;
        for &u in &order {
            if size + us[u].len() <= target {
                size += us[u].len();
                pick.push(u);
            }
        }
        pick.sort_unstable();
        if pick.len() < 3 || !seen.insert(pick.clone()) {
            continue;
        }
        subsets += 1;
        let s: Vec<PointRef> = pick.iter().flat_map(|&u| us[u].clone()).collect();
        if !restriction_minimal(spec, config, m, &s)? {
            return Ok(fail(s, pairs, subsets));
        }
    }
    Ok(Report {
        predicate: name,
        result: true,
        witness: None,
        pairs_checked: pairs,
        subsets_checked: subsets,
    })
}

/// Whether `m` leaves unmatched points of both colours (two colours) or two
/// unmatched points (one colour), which no minimal matching does.
pub fn has_excess_unmatched(config: &PointConfig, m: &Matching) -> bool {
    let u = m.unmatched();
    match config.mode() {
        Mode::OneColour => u.len() > 1,
        Mode::TwoColour => u.iter().any(|p| p.colour != u[0].colour),
    }
}
