//! Exhaustive enumeration, used as an independent check on the solvers.

use std::cmp::Ordering;

use super::{min_unmatched, Matching};
use crate::costs::{self, CostSpec, MatchScore, ScorePayload};
use crate::error::{Error, Result};
use crate::points::{PointConfig, PointRef};

/// Largest configuration the oracle enumerates.
pub const ORACLE_CAP: usize = 12;

fn check_cap(config: &PointConfig) -> Result<()> {
    if config.len() > ORACLE_CAP {
        return Err(Error::TooLarge {
            points: config.len(),
            cap: ORACLE_CAP,
        });
    }
    Ok(())
}

/// Calls `visit` with the edge list of every matching of `config` leaving
/// between `min_left` and `max_left` points unmatched.
fn enumerate(
    config: &PointConfig,
    min_left: usize,
    max_left: usize,
    visit: &mut dyn FnMut(&[(PointRef, PointRef)]),
) {
    let refs: Vec<PointRef> = config.refs().collect();
    let n = refs.len();
    let mut used = vec![false; n];
    let mut edges = vec![];

    fn go(
        config: &PointConfig,
        refs: &[PointRef],
        used: &mut Vec<bool>,
        edges: &mut Vec<(PointRef, PointRef)>,
        left: usize,
        bounds: (usize, usize),
        visit: &mut dyn FnMut(&[(PointRef, PointRef)]),
    ) {
        let Some(i) = used.iter().position(|u| !u) else {
            if left >= bounds.0 {
                visit(edges);
            }
            return;
        };
        used[i] = true;
        if left < bounds.1 {
            go(config, refs, used, edges, left + 1, bounds, visit);
        }
        for j in i + 1..refs.len() {
            if !used[j] && config.eligible(refs[i], refs[j]) {
                used[j] = true;
                edges.push((refs[i], refs[j]));
                go(config, refs, used, edges, left, bounds, visit);
                edges.pop();
                used[j] = false;
            }
        }
        used[i] = false;
    }
    go(
        config,
        &refs,
        &mut used,
        &mut edges,
        0,
        (min_left, max_left),
        visit,
    );
}

/// Every optimal matching of `config` under `spec` (those whose score is
/// within the tie tolerance of the best). All carry the tie flag when there
/// is more than one.
pub fn oracle_min(spec: CostSpec, config: &PointConfig) -> Result<Vec<Matching>> {
    check_cap(config)?;
    let need = min_unmatched(config);
    let mut all: Vec<(Matching, MatchScore)> = vec![];
    let mut err = None;
    enumerate(config, need, need, &mut |edges| {
        let m = Matching::from_edges(config, edges.iter().copied());
        match costs::score(spec, config, &m) {
            Ok(s) => all.push((m, s)),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let mut best: Option<&MatchScore> = None;
    for (_, s) in &all {
        if best.is_none_or(|b| {
            costs::compare(spec, s, b)
                .map(|o| o == Ordering::Less)
                .unwrap_or(false)
        }) {
            best = Some(s);
        }
    }
    let Some(best) = best.cloned() else {
        return Ok(vec![Matching::empty(config)]);
    };
    let mut out = vec![];
    for (m, s) in all {
        if costs::compare(spec, &s, &best)? == Ordering::Equal {
            out.push(m);
        }
    }
    let tie = out.len() > 1;
    Ok(out.into_iter().map(|m| m.with_tie(tie)).collect())
}

fn payload_key(p: &ScorePayload) -> (u8, Vec<f64>) {
    match p {
        ScorePayload::Cost { cost } => (0, vec![*cost]),
        ScorePayload::Lengths { lengths } => (0, lengths.clone()),
        ScorePayload::Critical { cost, violation } => (*violation as u8, vec![*cost]),
    }
}

/// Whether two distinct matchings of `config` (any number of edges) have
/// scores equal within the tie tolerance.
pub fn detect_tie(spec: CostSpec, config: &PointConfig) -> Result<bool> {
    check_cap(config)?;
    let mut scores: Vec<MatchScore> = vec![];
    let mut err = None;
    enumerate(config, 0, config.len(), &mut |edges| {
        let m = Matching::from_edges(config, edges.iter().copied());
        match costs::score(spec, config, &m) {
            Ok(s) => scores.push(s),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    scores.sort_by(|a, b| {
        let (ka, kb) = (payload_key(&a.payload), payload_key(&b.payload));
        a.unmatched
            .cmp(&b.unmatched)
            .then(ka.0.cmp(&kb.0))
            .then_with(|| {
                ka.1.iter()
                    .zip(&kb.1)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
    });
    for w in scores.windows(2) {
        if costs::compare(spec, &w[0], &w[1])? == Ordering::Equal {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Mode;

    fn line2(red: Vec<f64>, blue: Vec<f64>) -> PointConfig {
        PointConfig::line((-10.0, 10.0), Mode::TwoColour, red, blue).unwrap()
    }

    #[test]
    fn single_pair_is_unique() {
        let cfg = line2(vec![0.0], vec![1.5]);
        let all = oracle_min(CostSpec::Finite(2.0), &cfg).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].index_edges(), vec![(0, 0)]);
        assert!(!detect_tie(CostSpec::Finite(2.0), &cfg).unwrap());
    }

    #[test]
    fn critical_gamma_ties_on_the_line() {
        let cfg = line2(vec![0.0, 1.0], vec![2.0, 3.0]);
        let all = oracle_min(CostSpec::Finite(1.0), &cfg).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all.iter().all(|m| m.tie));
        let cfg = line2(vec![0.0, 1.3], vec![2.9, 3.2]);
        assert!(detect_tie(CostSpec::Finite(1.0), &cfg).unwrap());
        assert!(!detect_tie(CostSpec::Finite(2.0), &cfg).unwrap());
    }

    #[test]
    fn counts_of_enumerated_matchings() {
        // perfect matchings of K_6: 15; of K_{3,3}: 6; all matchings of K_4: 10
        let one = PointConfig::line(
            (0.0, 10.0),
            Mode::OneColour,
            (1..=6).map(|i| i as f64 * 1.1).collect(),
            vec![],
        )
        .unwrap();
        let mut c = 0;
        enumerate(&one, 0, 0, &mut |_| c += 1);
        assert_eq!(c, 15);
        let two = line2(vec![0.1, 0.5, 0.9], vec![0.2, 0.6, 1.7]);
        let mut c = 0;
        enumerate(&two, 0, 0, &mut |_| c += 1);
        assert_eq!(c, 6);
        let four = PointConfig::line(
            (0.0, 10.0),
            Mode::OneColour,
            vec![1.0, 2.0, 4.0, 8.0],
            vec![],
        )
        .unwrap();
        let mut c = 0;
        enumerate(&four, 0, 4, &mut |_| c += 1);
        assert_eq!(c, 10);
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = PointConfig::line(
            (0.0, 100.0),
            Mode::OneColour,
            (0..13).map(|i| i as f64 * 1.7).collect(),
            vec![],
        )
        .unwrap();
        assert_eq!(
            oracle_min(CostSpec::Finite(1.0), &cfg).unwrap_err(),
            Error::TooLarge {
                points: 13,
                cap: 12
            }
        );
    }
}
