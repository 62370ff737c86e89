//! Exact minimal matchings of finite configurations for every cost kind,
//! plus a brute-force oracle used to cross-check them.

mod bottleneck;
mod dp;
mod greedy;
mod hungarian;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::costs::{self, CostSpec};
use crate::error::{Error, Result};
use crate::points::{Colour, Mode, PointConfig, PointRef};

pub use greedy::solve_stable;
pub use oracle::{detect_tie, oracle_min, ORACLE_CAP};

/// Largest one-colour configuration in dimension ≥ 2 handled by the exact
/// subset dynamic programme.
pub const BITMASK_CAP: usize = 20;

/// A matching of a configuration: edges plus the unmatched points.
///
/// Two-colour edges are stored as (red, blue); one-colour edges as an
/// increasing index pair, both referencing the red array.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    mode: Mode,
    edges: Vec<(PointRef, PointRef)>,
    unmatched: Vec<PointRef>,
    /// Set when a solver found several optima within the tie tolerance.
    pub tie: bool,
}

fn order_edge(mode: Mode, a: PointRef, b: PointRef) -> (PointRef, PointRef) {
    match mode {
        Mode::TwoColour if a.colour == Colour::Blue => (b, a),
        Mode::OneColour if b.index < a.index => (b, a),
        _ => (a, b),
    }
}

fn ref_key(p: PointRef) -> (u8, usize) {
    (p.colour as u8, p.index)
}

impl Matching {
    pub fn from_refs(
        mode: Mode,
        edges: impl IntoIterator<Item = (PointRef, PointRef)>,
        unmatched: impl IntoIterator<Item = PointRef>,
    ) -> Matching {
        let mut edges: Vec<_> = edges
            .into_iter()
            .map(|(a, b)| order_edge(mode, a, b))
            .collect();
        edges.sort_by_key(|&(a, b)| (ref_key(a), ref_key(b)));
        let mut unmatched: Vec<_> = unmatched.into_iter().collect();
        unmatched.sort_by_key(|&p| ref_key(p));
        Matching {
            mode,
            edges,
            unmatched,
            tie: false,
        }
    }

    pub fn one_colour(edges: Vec<(usize, usize)>, unmatched: Vec<usize>) -> Matching {
        Matching::from_refs(
            Mode::OneColour,
            edges
                .into_iter()
                .map(|(i, j)| (PointRef::red(i), PointRef::red(j))),
            unmatched.into_iter().map(PointRef::red),
        )
    }

    pub fn two_colour(
        edges: Vec<(usize, usize)>,
        unmatched_red: Vec<usize>,
        unmatched_blue: Vec<usize>,
    ) -> Matching {
        Matching::from_refs(
            Mode::TwoColour,
            edges
                .into_iter()
                .map(|(r, b)| (PointRef::red(r), PointRef::blue(b))),
            unmatched_red
                .into_iter()
                .map(PointRef::red)
                .chain(unmatched_blue.into_iter().map(PointRef::blue)),
        )
    }

    /// Builds a matching from edges alone; every other point of `config` is unmatched.
    pub fn from_edges(
        config: &PointConfig,
        edges: impl IntoIterator<Item = (PointRef, PointRef)>,
    ) -> Matching {
        let edges: Vec<_> = edges.into_iter().collect();
        let used: BTreeSet<(u8, usize)> = edges
            .iter()
            .flat_map(|&(a, b)| [ref_key(a), ref_key(b)])
            .collect();
        let rest: Vec<PointRef> = config
            .refs()
            .filter(|&p| !used.contains(&ref_key(p)))
            .collect();
        Matching::from_refs(config.mode(), edges, rest)
    }

    pub fn empty(config: &PointConfig) -> Matching {
        Matching::from_refs(config.mode(), [], config.refs())
    }

    pub fn with_tie(mut self, tie: bool) -> Matching {
        self.tie = tie;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn edge_refs(&self) -> impl Iterator<Item = (PointRef, PointRef)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn unmatched(&self) -> &[PointRef] {
        &self.unmatched
    }

    pub fn unmatched_count(&self) -> usize {
        self.unmatched.len()
    }

    /// Edges as plain index pairs ((red, blue) or (i, j) with i < j).
    pub fn index_edges(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|(a, b)| (a.index, b.index)).collect()
    }

    pub fn partner(&self, p: PointRef) -> Option<PointRef> {
        self.edges.iter().find_map(|&(a, b)| {
            if a == p {
                Some(b)
            } else if b == p {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Partner lookup table keyed by point.
    pub fn partner_map(&self) -> BTreeMap<(u8, usize), PointRef> {
        let mut m = BTreeMap::new();
        for &(a, b) in &self.edges {
            m.insert(ref_key(a), b);
            m.insert(ref_key(b), a);
        }
        m
    }

    pub fn same_edges(&self, other: &Matching) -> bool {
        self.edges == other.edges
    }

    /// Checks the structural invariants against `config`.
    pub fn validate(&self, config: &PointConfig) -> Result<()> {
        if self.mode != config.mode() {
            return Err(Error::InvalidMatching(
                "matching mode differs from configuration mode".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        let mut touch = |p: PointRef| -> Result<()> {
            if p.index >= config.count(p.colour) {
                return Err(Error::InvalidMatching(format!(
                    "{:?} index {} out of range",
                    p.colour, p.index
                )));
            }
            if self.mode == Mode::OneColour && p.colour == Colour::Blue {
                return Err(Error::InvalidMatching(
                    "blue point in a one-colour matching".into(),
                ));
            }
            if !seen.insert(ref_key(p)) {
                return Err(Error::InvalidMatching(format!(
                    "{:?} {} used twice",
                    p.colour, p.index
                )));
            }
            Ok(())
        };
        for &(a, b) in &self.edges {
            if self.mode == Mode::TwoColour && a.colour == b.colour {
                return Err(Error::InvalidMatching(
                    "edge joins two points of one colour".into(),
                ));
            }
            touch(a)?;
            touch(b)?;
        }
        for &p in &self.unmatched {
            touch(p)?;
        }
        if seen.len() != config.len() {
            return Err(Error::InvalidMatching(
                "unmatched set is not the complement of the matched set".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self, spec: CostSpec, config: &PointConfig) -> Result<Value> {
        let score = costs::score(spec, config, self)?;
        Ok(json!({
            "edges": self.index_edges().iter().map(|&(i, j)| json!([i, j])).collect::<Vec<_>>(),
            "unmatched": unmatched_json(self.mode, &self.unmatched),
            "score": score,
            "tie": self.tie,
        }))
    }

    /// Parses the `edges`/`unmatched` fields of a matching document.
    pub fn from_json(mode: Mode, v: &Value) -> Result<Matching> {
        let edges: Vec<(usize, usize)> =
            serde_json::from_value(v.get("edges").cloned().unwrap_or(json!([])))?;
        let tie = v.get("tie").and_then(Value::as_bool).unwrap_or(false);
        let un = v.get("unmatched").cloned().unwrap_or(json!([]));
        let m = match mode {
            Mode::OneColour => Matching::one_colour(edges, serde_json::from_value(un)?),
            Mode::TwoColour => {
                let (r, b) = parse_coloured_indices(&un)?;
                Matching::two_colour(edges, r, b)
            }
        };
        Ok(m.with_tie(tie))
    }
}

pub(crate) fn unmatched_json(mode: Mode, pts: &[PointRef]) -> Value {
    let idx = |c: Colour| {
        pts.iter()
            .filter(|p| p.colour == c)
            .map(|p| p.index)
            .collect::<Vec<_>>()
    };
    match mode {
        Mode::OneColour => json!(idx(Colour::Red)),
        Mode::TwoColour => json!({"red": idx(Colour::Red), "blue": idx(Colour::Blue)}),
    }
}

pub(crate) fn parse_coloured_indices(v: &Value) -> Result<(Vec<usize>, Vec<usize>)> {
    let get = |k: &str| -> Result<Vec<usize>> {
        Ok(serde_json::from_value(
            v.get(k).cloned().unwrap_or(json!([])),
        )?)
    };
    if v.is_array() {
        return Err(Error::InvalidInput(
            "two-colour index sets must be given as {\"red\":[..],\"blue\":[..]}".into(),
        ));
    }
    Ok((get("red")?, get("blue")?))
}

/// Required number of unmatched points in a minimal matching.
pub fn min_unmatched(config: &PointConfig) -> usize {
    match config.mode() {
        Mode::OneColour => config.n_red() % 2,
        Mode::TwoColour => config.n_red().abs_diff(config.n_blue()),
    }
}

/// A minimal matching of `config` under `spec`.
///
/// Suspected ties (several optima within the tie tolerance) set
/// [`Matching::tie`]; one of the optima is returned.
pub fn solve_min(spec: CostSpec, config: &PointConfig) -> Result<Matching> {
    if config.is_empty() {
        return Ok(Matching::empty(config));
    }
    match (spec, config.mode()) {
        (CostSpec::NegInfinity, _) => Ok(greedy::greedy_min(config)),
        (CostSpec::PosInfinity, _) => bottleneck::bottleneck_min(config),
        (CostSpec::Finite(g), Mode::TwoColour) => Ok(hungarian::two_colour_min(config, g)),
        (CostSpec::OneMinus | CostSpec::OnePlus, Mode::TwoColour) => {
            if config.dim() == 1 {
                hungarian::two_colour_critical(spec, config)
            } else {
                Ok(hungarian::two_colour_min(config, 1.0))
            }
        }
        (_, Mode::OneColour) => {
            // on the line the γ=1 one-colour optimum never entwines or
            // straddles, so both critical kinds coincide with γ=1
            let g = spec.sum_gamma().expect("additive kind");
            if config.dim() == 1 {
                Ok(dp::interval_min(config, g))
            } else {
                dp::subset_min(config, g)
            }
        }
    }
}

/// Matches each tile of the partition `{offset + s·(ℤ^d + [0,1)^d)}` of
/// space separately; no edge crosses a tile boundary.
pub fn tile_match(
    spec: CostSpec,
    config: &PointConfig,
    tile_size: f64,
    offset: &[f64],
) -> Result<Matching> {
    if !(tile_size > 0.0 && tile_size.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tile size must be positive, got {tile_size}"
        )));
    }
    if offset.len() != config.dim() {
        return Err(Error::InvalidParameter(format!(
            "offset needs {} coordinates",
            config.dim()
        )));
    }
    let mut tiles: BTreeMap<Vec<i64>, Vec<PointRef>> = BTreeMap::new();
    for p in config.refs() {
        let key = config
            .point(p)
            .iter()
            .zip(offset)
            .map(|(x, o)| ((x - o) / tile_size).floor() as i64)
            .collect();
        tiles.entry(key).or_default().push(p);
    }
    let mut edges = vec![];
    let mut unmatched = vec![];
    let mut tie = false;
    for members in tiles.values() {
        let (sub, back) = config.restrict(members);
        let m = solve_min(spec, &sub)?;
        tie |= m.tie;
        let lift = |p: PointRef| back[sub.dense(p)];
        edges.extend(m.edge_refs().map(|(a, b)| (lift(a), lift(b))));
        unmatched.extend(m.unmatched().iter().map(|&p| lift(p)));
    }
    Ok(Matching::from_refs(config.mode(), edges, unmatched).with_tie(tie))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::{equal_count_pair, sample_poisson, Seed, Window};

    fn line2(red: Vec<f64>, blue: Vec<f64>) -> PointConfig {
        PointConfig::line((-10.0, 10.0), Mode::TwoColour, red, blue).unwrap()
    }

    #[test]
    fn spec_examples() {
        let cfg = line2(vec![0.0, 1.0], vec![2.0, 3.0]);
        let m = solve_min(CostSpec::Finite(2.0), &cfg).unwrap();
        assert_eq!(m.index_edges(), vec![(0, 0), (1, 1)]);
        assert_eq!(
            costs::score(CostSpec::Finite(2.0), &cfg, &m)
                .unwrap()
                .cost(),
            Some(8.0)
        );

        let m = solve_min(CostSpec::Finite(0.5), &cfg).unwrap();
        assert_eq!(m.index_edges(), vec![(0, 1), (1, 0)]);
        let c = costs::score(CostSpec::Finite(0.5), &cfg, &m)
            .unwrap()
            .cost()
            .unwrap();
        assert!((c - (1.0 + 3f64.sqrt())).abs() < 1e-12);

        let one =
            PointConfig::line((-10.0, 10.0), Mode::OneColour, vec![0.0, 1.0, 5.0], vec![]).unwrap();
        let m = solve_min(CostSpec::Finite(1.0), &one).unwrap();
        assert_eq!(m.index_edges(), vec![(0, 1)]);
        assert_eq!(m.unmatched(), &[PointRef::red(2)]);
    }

    #[test]
    fn empty_config_gives_empty_matching() {
        let cfg = line2(vec![], vec![]);
        for spec in [
            CostSpec::Finite(1.0),
            CostSpec::NegInfinity,
            CostSpec::PosInfinity,
            CostSpec::OnePlus,
        ] {
            let m = solve_min(spec, &cfg).unwrap();
            assert_eq!(m.edge_count(), 0);
            assert_eq!(m.unmatched_count(), 0);
        }
    }

    #[test]
    fn critical_kinds_pick_the_allowed_arrangement() {
        let cfg = line2(vec![0.0, 1.0], vec![2.5, 3.7]);
        // γ=1 tie between entwined and straddling
        assert!(solve_min(CostSpec::Finite(1.0), &cfg).unwrap().tie);
        let minus = solve_min(CostSpec::OneMinus, &cfg).unwrap();
        assert_eq!(minus.index_edges(), vec![(0, 1), (1, 0)]);
        let plus = solve_min(CostSpec::OnePlus, &cfg).unwrap();
        assert_eq!(plus.index_edges(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn unequal_counts_leave_majority_unmatched() {
        let cfg = line2(vec![0.0, 1.0, 5.0], vec![0.4]);
        for spec in [
            CostSpec::Finite(-1.0),
            CostSpec::Finite(2.0),
            CostSpec::PosInfinity,
            CostSpec::OneMinus,
        ] {
            let m = solve_min(spec, &cfg).unwrap();
            assert_eq!(m.index_edges(), vec![(0, 0)], "{spec}");
            assert_eq!(m.unmatched(), &[PointRef::red(1), PointRef::red(2)]);
        }
    }

    #[test]
    fn equal_counts_give_perfect_matchings() {
        let w = Window::line(0.0, 5.0).unwrap();
        for s in 0..50 {
            let cfg = equal_count_pair(&w, 5, Seed::new(s)).unwrap();
            for spec in [
                CostSpec::Finite(0.3),
                CostSpec::NegInfinity,
                CostSpec::PosInfinity,
                CostSpec::OnePlus,
            ] {
                assert_eq!(solve_min(spec, &cfg).unwrap().unmatched_count(), 0);
            }
        }
    }

    #[test]
    fn tile_examples() {
        let cfg = line2(vec![0.5, 2.5], vec![1.5, 3.5]);
        let m = tile_match(CostSpec::Finite(1.0), &cfg, 2.0, &[0.0]).unwrap();
        assert_eq!(m.index_edges(), vec![(0, 0), (1, 1)]);
        let big = tile_match(CostSpec::Finite(0.5), &cfg, 100.0, &[-10.0]).unwrap();
        assert!(big.same_edges(&solve_min(CostSpec::Finite(0.5), &cfg).unwrap()));
        assert!(matches!(
            tile_match(CostSpec::Finite(1.0), &cfg, 0.0, &[0.0]),
            Err(Error::InvalidParameter(_))
        ));

        let w = Window::cube(2, 0.0, 4.0).unwrap();
        let cfg = sample_poisson(&w, 1.0, Mode::TwoColour, Seed::new(3)).unwrap();
        let m = tile_match(CostSpec::Finite(2.0), &cfg, 1.0, &[0.0, 0.0]).unwrap();
        let mut imbalance = 0;
        let mut counts: BTreeMap<(i64, i64), (i64, i64)> = BTreeMap::new();
        for p in cfg.refs() {
            let x = cfg.point(p);
            let e = counts
                .entry((x[0].floor() as i64, x[1].floor() as i64))
                .or_default();
            match p.colour {
                Colour::Red => e.0 += 1,
                Colour::Blue => e.1 += 1,
            }
        }
        for (r, b) in counts.values() {
            imbalance += (r - b).unsigned_abs() as usize;
        }
        assert_eq!(m.unmatched_count(), imbalance);
    }

    #[test]
    fn json_round_trip() {
        let cfg = line2(vec![0.0, 1.0, 7.0], vec![2.0, 3.0]);
        let m = solve_min(CostSpec::Finite(2.0), &cfg).unwrap();
        let v = m.to_json(CostSpec::Finite(2.0), &cfg).unwrap();
        assert_eq!(v["unmatched"]["red"], json!([2]));
        assert_eq!(v["score"]["unmatched"], json!(1));
        assert_eq!(Matching::from_json(Mode::TwoColour, &v).unwrap(), m);
    }

    #[test]
    fn validation_catches_bad_matchings() {
        let cfg = line2(vec![0.0, 1.0], vec![2.0]);
        let dup = Matching::two_colour(vec![(0, 0), (1, 0)], vec![], vec![]);
        assert!(matches!(dup.validate(&cfg), Err(Error::InvalidMatching(_))));
        let missing = Matching::two_colour(vec![(0, 0)], vec![], vec![]);
        assert!(matches!(
            missing.validate(&cfg),
            Err(Error::InvalidMatching(_))
        ));
        let oob = Matching::two_colour(vec![(5, 0)], vec![0, 1], vec![]);
        assert!(oob.validate(&cfg).is_err());
    }
}
