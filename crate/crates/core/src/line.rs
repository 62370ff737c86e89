//! Explicit infinite-volume matchings on the line, realised on a finite
//! window: alternating matchings, the order-preserving family Mᵏ, the level
//! matchings M_k with their first-return limits, swap variants at γ = 1,
//! and the finitary partner of a point in the subcritical regime.
//!
//! A window only shows part of an infinite matching. Points whose partner
//! may lie outside the window are reported as boundary points together with
//! the side on which the missing partner lies.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::Serialize;
use serde_json::{json, Value};

use crate::costs::{self, Arrangement, CostSpec};
use crate::error::{Error, Result};
use crate::finite_match::{parse_coloured_indices, solve_min, unmatched_json, Matching};
use crate::points::{Colour, Mode, PointConfig, PointRef};
use crate::walk::{assign_levels, build_walk, LevelAssignment, Walk};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryPoint {
    pub point: PointRef,
    /// Side of the window beyond which the partner would lie.
    pub side: Side,
}

/// What a window matching says about one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partner {
    Point(PointRef),
    Unmatched,
    Boundary(Side),
}

/// A finite-window truncation of an infinite matching.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowMatching {
    mode: Mode,
    edges: Vec<(PointRef, PointRef)>,
    unmatched: Vec<PointRef>,
    boundary: Vec<BoundaryPoint>,
}

impl WindowMatching {
    fn new(
        mode: Mode,
        edges: Vec<(PointRef, PointRef)>,
        boundary: Vec<BoundaryPoint>,
    ) -> WindowMatching {
        let mut boundary = boundary;
        boundary.sort_by_key(|b| (b.point.colour as u8, b.point.index));
        let m = Matching::from_refs(mode, edges, []);
        WindowMatching {
            mode,
            edges: m.edge_refs().collect(),
            unmatched: vec![],
            boundary,
        }
    }

    /// A finite matching with no boundary points.
    pub fn from_matching(m: &Matching) -> WindowMatching {
        let mut w = WindowMatching::new(m.mode(), m.edge_refs().collect(), vec![]);
        w.unmatched = m.unmatched().to_vec();
        w
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn edge_refs(&self) -> &[(PointRef, PointRef)] {
        &self.edges
    }

    pub fn boundary(&self) -> &[BoundaryPoint] {
        &self.boundary
    }

    pub fn unmatched(&self) -> &[PointRef] {
        &self.unmatched
    }

    pub fn is_boundary(&self, p: PointRef) -> bool {
        self.boundary.iter().any(|b| b.point == p)
    }

    pub fn partner(&self, p: PointRef) -> Partner {
        for &(a, b) in &self.edges {
            if a == p {
                return Partner::Point(b);
            }
            if b == p {
                return Partner::Point(a);
            }
        }
        match self.boundary.iter().find(|b| b.point == p) {
            Some(b) => Partner::Boundary(b.side),
            None => Partner::Unmatched,
        }
    }

    /// The window matching as a finite matching, boundary points counted as
    /// unmatched.
    pub fn as_matching(&self) -> Matching {
        let un = self
            .unmatched
            .iter()
            .copied()
            .chain(self.boundary.iter().map(|b| b.point));
        Matching::from_refs(self.mode, self.edges.iter().copied(), un)
    }

    /// The configuration without its boundary points and the matching
    /// restricted to it, with the map back to the original references.
    pub fn interior(&self, config: &PointConfig) -> (PointConfig, Matching, Vec<PointRef>) {
        let keep: Vec<PointRef> = config.refs().filter(|&p| !self.is_boundary(p)).collect();
        let (sub, back) = config.restrict(&keep);
        let forward: BTreeMap<(u8, usize), PointRef> = back
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.colour as u8, p.index), sub.from_dense(i)))
            .collect();
        let fwd = |p: PointRef| forward[&(p.colour as u8, p.index)];
        let m = Matching::from_refs(
            self.mode,
            self.edges.iter().map(|&(a, b)| (fwd(a), fwd(b))),
            self.unmatched.iter().map(|&p| fwd(p)),
        );
        (sub, m, back)
    }

    /// Number of edges crossing `x`, counting boundary points whose missing
    /// edge would cross it.
    pub fn crossings(&self, config: &PointConfig, x: f64) -> usize {
        let inner = self
            .edges
            .iter()
            .filter(|&&(a, b)| {
                let (u, v) = (config.x(a), config.x(b));
                u.min(v) < x && x < u.max(v)
            })
            .count();
        let outer = self
            .boundary
            .iter()
            .filter(|b| match b.side {
                Side::Left => x < config.x(b.point),
                Side::Right => config.x(b.point) < x,
            })
            .count();
        inner + outer
    }

    pub fn to_json(&self) -> Value {
        let side_of = |c: Colour| {
            self.boundary
                .iter()
                .filter(|b| b.point.colour == c)
                .map(|b| json!(b.side))
                .collect::<Vec<_>>()
        };
        let boundary: Vec<PointRef> = self.boundary.iter().map(|b| b.point).collect();
        let sides = match self.mode {
            Mode::OneColour => json!(side_of(Colour::Red)),
            Mode::TwoColour => json!({"red": side_of(Colour::Red), "blue": side_of(Colour::Blue)}),
        };
        json!({
            "edges": self.edges.iter().map(|&(a, b)| json!([a.index, b.index])).collect::<Vec<_>>(),
            "unmatched": unmatched_json(self.mode, &self.unmatched),
            "boundary": unmatched_json(self.mode, &boundary),
            "boundary_side": sides,
        })
    }

    pub fn from_json(mode: Mode, v: &Value) -> Result<WindowMatching> {
        let edges = v.get("edges").cloned().unwrap_or(json!([]));
        let m = Matching::from_json(
            mode,
            &json!({"edges": edges, "unmatched": unmatched_json(mode, &[])}),
        )?;
        let parse_sides = |s: &Value| -> Result<Vec<Side>> {
            s.as_array()
                .ok_or_else(|| Error::InvalidInput("boundary_side must list sides".into()))?
                .iter()
                .map(|x| match x.as_str() {
                    Some("left") => Ok(Side::Left),
                    Some("right") => Ok(Side::Right),
                    _ => Err(Error::InvalidInput(format!("bad boundary side {x}"))),
                })
                .collect()
        };
        let b = v.get("boundary").cloned().unwrap_or(json!([]));
        let s = v.get("boundary_side").cloned();
        let mut boundary = vec![];
        let mut push = |colour: Colour, idx: Vec<usize>, sides: Option<Vec<Side>>| -> Result<()> {
            if sides.as_ref().is_some_and(|s| s.len() != idx.len()) {
                return Err(Error::InvalidInput(
                    "boundary and boundary_side differ in length".into(),
                ));
            }
            for (k, i) in idx.into_iter().enumerate() {
                let side = sides.as_ref().map_or(Side::Right, |s| s[k]);
                boundary.push(BoundaryPoint {
                    point: PointRef { colour, index: i },
                    side,
                });
            }
            Ok(())
        };
        match mode {
            Mode::OneColour => {
                let idx: Vec<usize> = serde_json::from_value(b)?;
                push(Colour::Red, idx, s.as_ref().map(parse_sides).transpose()?)?;
            }
            Mode::TwoColour => {
                let (r, bl) = parse_coloured_indices(&b)?;
                let side = |k: &str| {
                    s.as_ref()
                        .and_then(|s| s.get(k))
                        .map(parse_sides)
                        .transpose()
                };
                push(Colour::Red, r, side("red")?)?;
                push(Colour::Blue, bl, side("blue")?)?;
            }
        }
        let unmatched = v.get("unmatched").cloned().unwrap_or(json!([]));
        let un = match mode {
            Mode::OneColour => serde_json::from_value::<Vec<usize>>(unmatched)?
                .into_iter()
                .map(PointRef::red)
                .collect::<Vec<_>>(),
            Mode::TwoColour => {
                let (r, bl) = parse_coloured_indices(&unmatched)?;
                r.into_iter()
                    .map(PointRef::red)
                    .chain(bl.into_iter().map(PointRef::blue))
                    .collect()
            }
        };
        let mut w = WindowMatching::new(mode, m.edge_refs().collect(), boundary);
        w.unmatched = un;
        Ok(w)
    }

    pub fn validate(&self, config: &PointConfig) -> Result<()> {
        let mut seen = vec![0u8; config.len()];
        let pts = self
            .edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(self.unmatched.iter().copied())
            .chain(self.boundary.iter().map(|b| b.point));
        for p in pts {
            if p.index >= config.count(p.colour) {
                return Err(Error::InvalidMatching(format!(
                    "point {p:?} is not in the configuration"
                )));
            }
            let d = config.dense(p);
            seen[d] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::InvalidMatching(
                "every point must be matched, unmatched or boundary exactly once".into(),
            ));
        }
        for &(a, b) in &self.edges {
            if !config.eligible(a, b) {
                return Err(Error::InvalidMatching(format!(
                    "{a:?} and {b:?} cannot be matched"
                )));
            }
        }
        Ok(())
    }
}

fn require_line(config: &PointConfig, mode: Mode) -> Result<()> {
    if config.dim() != 1 || config.mode() != mode {
        let what = match mode {
            Mode::OneColour => "a one-colour",
            Mode::TwoColour => "a two-colour",
        };
        return Err(Error::InvalidInput(format!(
            "this construction needs {what} configuration on the line"
        )));
    }
    Ok(())
}

/// Points of a line configuration in increasing position.
fn merged(config: &PointConfig) -> Vec<PointRef> {
    let mut pts: Vec<PointRef> = config.refs().collect();
    pts.sort_by(|&a, &b| config.x(a).total_cmp(&config.x(b)));
    pts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Plus,
    Minus,
}

/// The nearest-neighbour pairings of a one-colour configuration. With
/// x₋₁ < 0 ≤ x₀, the plus phase pairs (x₋₁, x₀), (x₁, x₂), … and the minus
/// phase pairs (x₀, x₁), (x₂, x₃), ….
pub fn alternating(config: &PointConfig, phase: Phase) -> Result<WindowMatching> {
    require_line(config, Mode::OneColour)?;
    let xs = config.red_line();
    let n = xs.len();
    let z = xs.partition_point(|&x| x < 0.0) as i64;
    let opens = |i: usize| {
        let t = i as i64 - z;
        match phase {
            Phase::Plus => t.rem_euclid(2) == 1,
            Phase::Minus => t.rem_euclid(2) == 0,
        }
    };
    let mut edges = vec![];
    let mut boundary = vec![];
    for i in 0..n {
        if opens(i) {
            if i + 1 < n {
                edges.push((PointRef::red(i), PointRef::red(i + 1)));
            } else {
                boundary.push(BoundaryPoint {
                    point: PointRef::red(i),
                    side: Side::Right,
                });
            }
        } else if i == 0 {
            boundary.push(BoundaryPoint {
                point: PointRef::red(i),
                side: Side::Left,
            });
        }
    }
    Ok(WindowMatching::new(Mode::OneColour, edges, boundary))
}

/// The order-preserving matching {⟨r_{i+k}, b_i⟩} with r₋₁ < 0 ≤ r₀ and
/// b₋₁ < 0 ≤ b₀.
pub fn order_matching_k(config: &PointConfig, k: i64) -> Result<WindowMatching> {
    require_line(config, Mode::TwoColour)?;
    let (r, b) = (config.red_line(), config.blue_line());
    let zr = r.partition_point(|&x| x < 0.0) as i64;
    let zb = b.partition_point(|&x| x < 0.0) as i64;
    let mut edges = vec![];
    let mut boundary = vec![];
    for jb in 0..b.len() {
        let ir = jb as i64 - zb + zr + k;
        if ir < 0 {
            boundary.push(BoundaryPoint {
                point: PointRef::blue(jb),
                side: Side::Left,
            });
        } else if ir as usize >= r.len() {
            boundary.push(BoundaryPoint {
                point: PointRef::blue(jb),
                side: Side::Right,
            });
        } else {
            edges.push((PointRef::red(ir as usize), PointRef::blue(jb)));
        }
    }
    for ir in 0..r.len() {
        let jb = ir as i64 - zr - k + zb;
        if jb < 0 {
            boundary.push(BoundaryPoint {
                point: PointRef::red(ir),
                side: Side::Left,
            });
        } else if jb as usize >= b.len() {
            boundary.push(BoundaryPoint {
                point: PointRef::red(ir),
                side: Side::Right,
            });
        }
    }
    Ok(WindowMatching::new(Mode::TwoColour, edges, boundary))
}

/// Bracket matching: points of colour `opener` open, the other colour closes.
fn first_return(config: &PointConfig, opener: Colour) -> WindowMatching {
    let mut stack = vec![];
    let mut edges = vec![];
    let mut boundary = vec![];
    for p in merged(config) {
        if p.colour == opener {
            stack.push(p);
        } else if let Some(q) = stack.pop() {
            edges.push((q, p));
        } else {
            boundary.push(BoundaryPoint {
                point: p,
                side: Side::Left,
            });
        }
    }
    boundary.extend(stack.into_iter().map(|p| BoundaryPoint {
        point: p,
        side: Side::Right,
    }));
    WindowMatching::new(Mode::TwoColour, edges, boundary)
}

/// M₋∞: every red point is matched to the first b > r with as many red as
/// blue points in [r, b].
pub fn meshalkin(config: &PointConfig) -> Result<WindowMatching> {
    require_line(config, Mode::TwoColour)?;
    Ok(first_return(config, Colour::Red))
}

/// M∞, the colour-reversed first-return matching.
pub fn meshalkin_reversed(config: &PointConfig) -> Result<WindowMatching> {
    require_line(config, Mode::TwoColour)?;
    Ok(first_return(config, Colour::Blue))
}

/// Threshold k of the level family M_k.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelThreshold {
    Finite(i64),
    NegInfinity,
    PosInfinity,
}

impl LevelThreshold {
    /// Whether level j is matched rightward (j > k − ½).
    fn rightward(self, j: i64) -> bool {
        match self {
            LevelThreshold::Finite(k) => j >= k,
            LevelThreshold::NegInfinity => true,
            LevelThreshold::PosInfinity => false,
        }
    }
}

fn points_by_level(
    config: &PointConfig,
    levels: &LevelAssignment,
) -> Result<BTreeMap<i64, Vec<PointRef>>> {
    let mut by_level: BTreeMap<i64, Vec<PointRef>> = BTreeMap::new();
    for p in merged(config) {
        by_level.entry(levels.level(p)).or_default().push(p);
    }
    for pts in by_level.values() {
        if pts.windows(2).any(|w| w[0].colour == w[1].colour) {
            return Err(Error::InvalidInput(
                "colours do not alternate within a level".into(),
            ));
        }
    }
    Ok(by_level)
}

/// M_k: level j is matched by its right-oriented alternating matching when
/// j > k − ½ and by its left-oriented one otherwise.
pub fn level_matching(
    config: &PointConfig,
    levels: &LevelAssignment,
    k: LevelThreshold,
) -> Result<WindowMatching> {
    require_line(config, Mode::TwoColour)?;
    if levels.red.len() != config.n_red() || levels.blue.len() != config.n_blue() {
        return Err(Error::InvalidInput(
            "level assignment does not fit the configuration".into(),
        ));
    }
    let mut edges = vec![];
    let mut boundary = vec![];
    for (j, pts) in points_by_level(config, levels)? {
        let n = pts.len();
        let right = k.rightward(j);
        for (i, &p) in pts.iter().enumerate() {
            match (p.colour, right) {
                (Colour::Red, true) if i + 1 < n => edges.push((p, pts[i + 1])),
                (Colour::Red, true) => boundary.push(BoundaryPoint {
                    point: p,
                    side: Side::Right,
                }),
                (Colour::Blue, true) if i == 0 => boundary.push(BoundaryPoint {
                    point: p,
                    side: Side::Left,
                }),
                (Colour::Red, false) if i > 0 => edges.push((p, pts[i - 1])),
                (Colour::Red, false) => boundary.push(BoundaryPoint {
                    point: p,
                    side: Side::Left,
                }),
                (Colour::Blue, false) if i + 1 == n => boundary.push(BoundaryPoint {
                    point: p,
                    side: Side::Right,
                }),
                _ => {}
            }
        }
    }
    Ok(WindowMatching::new(Mode::TwoColour, edges, boundary))
}

/// At every run r < r′ < b′ < b of four consecutive points coloured red,
/// red, blue, blue in which `base` matches ⟨r, b⟩ and ⟨r′, b′⟩, rematches
/// them as ⟨r, b′⟩, ⟨r′, b⟩ when `selector(b′ − r′)` holds.
pub fn one_swap_variant(
    config: &PointConfig,
    base: &WindowMatching,
    selector: impl Fn(f64) -> bool,
) -> Result<WindowMatching> {
    require_line(config, Mode::TwoColour)?;
    let pts = merged(config);
    let mut edges = base.edges.clone();
    let pos = |edges: &[(PointRef, PointRef)], e: (PointRef, PointRef)| {
        edges.iter().position(|&f| f == e)
    };
    for w in pts.windows(4) {
        let [r, r2, b2, b] = [w[0], w[1], w[2], w[3]];
        let pattern = [Colour::Red, Colour::Red, Colour::Blue, Colour::Blue];
        if [r.colour, r2.colour, b2.colour, b.colour] != pattern {
            continue;
        }
        let (Some(outer), Some(inner)) = (pos(&edges, (r, b)), pos(&edges, (r2, b2))) else {
            continue;
        };
        if selector(config.x(b2) - config.x(r2)) {
            edges[outer] = (r, b2);
            edges[inner] = (r2, b);
        }
    }
    let mut out = WindowMatching::new(Mode::TwoColour, edges, base.boundary.clone());
    out.unmatched = base.unmatched.clone();
    Ok(out)
}

/// A finite union of closed intervals of gap lengths, used as a swap
/// selector.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUnion(pub Vec<(f64, f64)>);

impl IntervalUnion {
    pub fn contains(&self, x: f64) -> bool {
        self.0.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }
}

impl std::str::FromStr for IntervalUnion {
    type Err = Error;

    /// Parses `lo:hi,lo:hi,…`; the empty string is the empty set.
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidParameter(format!("bad interval list {s:?}, expected lo:hi,lo:hi"));
        let mut out = vec![];
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (lo, hi) = part.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            if !(lo <= hi) {
                return Err(bad());
            }
            out.push((lo, hi));
        }
        Ok(IntervalUnion(out))
    }
}

/// The quasistability constant: minimal matchings satisfy
/// |x − M(x)| ∧ |y − M(y)| ≤ κ|x − y|.
pub fn kappa(spec: CostSpec) -> Result<f64> {
    match spec {
        CostSpec::NegInfinity => Ok(1.0),
        CostSpec::Finite(g) if g < 0.0 => Ok(2f64.powf(-1.0 / g) + 1.0),
        CostSpec::Finite(g) if g == 0.0 => Ok(3.0),
        CostSpec::Finite(g) if g > 0.0 && g < 1.0 => Ok(swap_root(g) + 1.0),
        _ => Err(Error::OutOfRange(format!(
            "no quasistability constant for γ = {spec}"
        ))),
    }
}

/// u^γ + v^γ − 1 − (1+u+v)^γ: the gain of the swap when x, y are one unit
/// apart and their partners at distances u, v.
pub(crate) fn swap_gain(g: f64, u: f64, v: f64) -> f64 {
    u.powf(g) + v.powf(g) - 1.0 - (1.0 + u + v).powf(g)
}

/// Root of u ↦ swap_gain(γ, u, u), which is increasing, by bisection.
fn swap_root(g: f64) -> f64 {
    let f = |u: f64| swap_gain(g, u, u);
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateRule {
    /// H is the whole level of V inside (q − Y, q + Y), where the walk
    /// stays above its value at q on both annuli [Y, aY].
    Intervals,
    /// H is the shortest run of consecutive points of V's level around V,
    /// of even size, whose gaps to the neighbouring level points exceed κ
    /// times its diameter.
    LevelGap,
}

impl std::str::FromStr for CertificateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intervals" => Ok(CertificateRule::Intervals),
            "level-gap" => Ok(CertificateRule::LevelGap),
            _ => Err(Error::InvalidParameter(format!(
                "unknown certificate rule {s:?}"
            ))),
        }
    }
}

/// Evidence that the partner of V is the same in every minimal matching.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinitaryCertificate {
    pub query: f64,
    pub v: PointRef,
    pub v_position: f64,
    /// Level of V relative to the walk value just left of the query.
    pub level: i64,
    pub kappa: f64,
    pub a: f64,
    /// Scale index n with y = (3a)^n.
    pub n: u32,
    pub y: f64,
    pub h: Vec<PointRef>,
    pub partner: PointRef,
    pub partner_position: f64,
    pub rule: CertificateRule,
}

impl FinitaryCertificate {
    pub fn to_json(&self) -> Value {
        let h: Vec<Value> = self.h.iter().map(|p| json!(p)).collect();
        json!({
            "query": self.query,
            "v": self.v,
            "v_position": self.v_position,
            "level": self.level,
            "kappa": self.kappa,
            "a": self.a,
            "n": self.n,
            "y": self.y,
            "h": h,
            "partner": self.partner,
            "partner_position": self.partner_position,
            "rule": self.rule,
            "coding_radius": coding_radius(self),
        })
    }
}

/// Radius of the data the certificate reads: a·Y.
pub fn coding_radius(cert: &FinitaryCertificate) -> f64 {
    cert.a * cert.y
}

fn level_of(walk: &Walk, idx: usize) -> i64 {
    let j = walk.jumps()[idx];
    match j.point.colour {
        Colour::Red => j.after - 1,
        Colour::Blue => j.after,
    }
}

/// Gain of rematching ⟨x, y⟩, ⟨M(x), M(y)⟩ when |x − y| = 1, x and y have
/// partners at distances u and v, and M(x), M(y) are as far apart as the
/// triangle inequality allows. Positive gain rules the original pair out.
fn rematch_gain(spec: CostSpec) -> Result<impl Fn(f64, f64) -> f64> {
    let g = match spec {
        CostSpec::NegInfinity => None,
        CostSpec::Finite(g) if g < 1.0 => Some(g),
        _ => {
            return Err(Error::OutOfRange(format!(
                "no finitary certificate for γ = {spec}"
            )))
        }
    };
    Ok(move |u: f64, v: f64| match g {
        None => u.min(v) - 1.0,
        Some(g) if g > 0.0 => swap_gain(g, u, v),
        Some(g) if g == 0.0 => u.ln() + v.ln() - (1.0 + u + v).ln(),
        Some(g) => 1.0 + (1.0 + u + v).powf(g) - u.powf(g) - v.powf(g),
    })
}

/// Closes self-matched runs of a level bottom-up until V is closed.
///
/// `xs` are the positions of the level's points in the region, whose colours
/// alternate, and `edge` the region's ends, which bound the distance to level
/// points beyond it. A run is an even number of consecutive open points such
/// that for every two of its points of opposite colour, partners outside the
/// run (no nearer than the nearest open point outside it) would make
/// rematching the two with each other profitable. Closed runs are matched
/// among themselves, so a run is matched to itself and its points are then
/// closed. Returns the open points of the run that closes V.
fn close_around(
    xs: &[f64],
    v: usize,
    gain: &dyn Fn(f64, f64) -> f64,
    edge: (f64, f64),
) -> Option<Vec<usize>> {
    let mut open: Vec<usize> = (0..xs.len()).collect();
    loop {
        let m = open.len();
        let x = |s: usize| xs[open[s]];
        let valid = |s: usize, e: usize| {
            let lo = if s == 0 { edge.0 } else { x(s - 1) };
            let hi = if e + 1 == m { edge.1 } else { x(e + 1) };
            let out = |i: usize| (x(i) - lo).min(hi - x(i));
            (s..=e).all(|i| {
                (i + 1..=e).step_by(2).all(|j| {
                    let d = x(j) - x(i);
                    gain(out(i) / d, out(j) / d) > 0.0
                })
            })
        };
        let mut runs = vec![];
        for s in 0..m {
            // the left end needs a partner-free margin longer than the run
            let reach = if s == 0 {
                x(0) - edge.0
            } else {
                x(s) - x(s - 1)
            };
            let mut e = s + 1;
            while e < m && x(e) - x(s) < reach {
                if valid(s, e) {
                    runs.push((x(e) - x(s), s, e));
                    break;
                }
                e += 2;
            }
        }
        if runs.is_empty() {
            return None;
        }
        // valid runs are nested or disjoint; close the innermost first
        runs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut closed = vec![false; m];
        for (_, s, e) in runs {
            if closed[s..=e].iter().any(|&c| c) {
                continue;
            }
            closed[s..=e].fill(true);
            if open[s] <= v && v <= open[e] {
                return Some(open[s..=e].to_vec());
            }
        }
        open = open
            .into_iter()
            .zip(closed)
            .filter(|&(_, c)| !c)
            .map(|(i, _)| i)
            .collect();
    }
}

/// The partner of V, the first point at or after `query`, in the unique
/// minimal matching, certified from the data within distance a(3a)^n of the
/// query for the smallest n ≤ `max_n` that works.
pub fn finitary_partner(
    config: &PointConfig,
    spec: CostSpec,
    query: f64,
    max_n: u32,
    rule: CertificateRule,
) -> Result<Option<FinitaryCertificate>> {
    finitary_partner_scales(config, spec, query, 0..=max_n, rule)
}

/// As [`finitary_partner`], trying only the scales in `scales`.
pub fn finitary_partner_scales(
    config: &PointConfig,
    spec: CostSpec,
    query: f64,
    scales: RangeInclusive<u32>,
    rule: CertificateRule,
) -> Result<Option<FinitaryCertificate>> {
    require_line(config, Mode::TwoColour)?;
    let k = kappa(spec)?;
    let gain = rematch_gain(spec)?;
    let a = 2.0 * k + 1.0;
    let reach = a * (3.0 * a).powi(*scales.end() as i32);
    let (lo, hi) = config.window().span();
    if lo > query - reach || query + reach > hi {
        return Err(Error::WindowTooSmall {
            have_lo: lo,
            have_hi: hi,
            need_lo: query - reach,
            need_hi: query + reach,
        });
    }
    let walk = build_walk(config)?;
    let jumps = walk.jumps();
    let vi = jumps.partition_point(|j| j.position < query);
    if vi == jumps.len() {
        return Ok(None);
    }
    let base = walk.value_left(query);
    let level = level_of(&walk, vi);
    for n in scales {
        let y = (3.0 * a).powi(n as i32);
        let h = match rule {
            CertificateRule::Intervals => {
                let clear = walk.min_on(query - a * y, query - y) > base
                    && walk.min_on(query + y, query + a * y) > base;
                if !clear {
                    continue;
                }
                let from = jumps.partition_point(|j| j.position <= query - y);
                let to = jumps.partition_point(|j| j.position < query + y);
                let h: Vec<usize> = (from..to)
                    .filter(|&i| level_of(&walk, i) == level)
                    .collect();
                if !h.contains(&vi) {
                    continue;
                }
                h
            }
            CertificateRule::LevelGap => {
                let from = jumps.partition_point(|j| j.position < query - a * y);
                let to = jumps.partition_point(|j| j.position <= query + a * y);
                let lam: Vec<usize> = (from..to)
                    .filter(|&i| level_of(&walk, i) == level)
                    .collect();
                let xs: Vec<f64> = lam.iter().map(|&i| jumps[i].position).collect();
                let Ok(v) = lam.binary_search(&vi) else {
                    // V lies beyond the region
                    continue;
                };
                match close_around(&xs, v, &gain, (query - a * y, query + a * y)) {
                    Some(run) => run.into_iter().map(|i| lam[i]).collect(),
                    None => continue,
                }
            }
        };
        let refs: Vec<PointRef> = h.iter().map(|&i| jumps[i].point).collect();
        let (sub, back) = config.restrict(&refs);
        let m = solve_min(spec, &sub)?;
        let v = jumps[vi].point;
        let sv = (0..sub.len())
            .map(|d| sub.from_dense(d))
            .find(|&p| back[sub.dense(p)] == v)
            .expect("V in H");
        let partner = m
            .partner(sv)
            .map(|p| back[sub.dense(p)])
            .ok_or_else(|| Error::InvalidInput("certified block is not colour balanced".into()))?;
        return Ok(Some(FinitaryCertificate {
            query,
            v,
            v_position: config.x(v),
            level: level - base,
            kappa: k,
            a,
            n,
            y,
            h: refs,
            partner,
            partner_position: config.x(partner),
            rule,
        }));
    }
    Ok(None)
}

/// Largest scale index whose certificate region around `q` fits in the
/// window, capped at `max_n`.
pub fn fitting_scale(
    config: &PointConfig,
    spec: CostSpec,
    q: f64,
    max_n: u32,
) -> Result<Option<u32>> {
    let a = 2.0 * kappa(spec)? + 1.0;
    let (lo, hi) = config.window().span();
    let room = (q - lo).min(hi - q);
    if room < a {
        return Ok(None);
    }
    let n = ((room / a).ln() / (3.0 * a).ln()).floor() as u32;
    // guard against rounding in the logarithm
    let n = (0..=n.min(max_n))
        .rev()
        .find(|&n| a * (3.0 * a).powi(n as i32) <= room);
    Ok(n)
}

/// The certified part of the minimal matching on the window: every point
/// whose certificate fits in the window is matched to its certified
/// partner; the rest are boundary points.
pub fn finitary_window(
    config: &PointConfig,
    spec: CostSpec,
    max_n: u32,
    rule: CertificateRule,
) -> Result<(WindowMatching, Vec<FinitaryCertificate>)> {
    require_line(config, Mode::TwoColour)?;
    let mut certs = vec![];
    let mut partner: BTreeMap<(u8, usize), PointRef> = BTreeMap::new();
    for p in merged(config) {
        let x = config.x(p);
        let Some(n) = fitting_scale(config, spec, x, max_n)? else {
            continue;
        };
        if let Some(c) = finitary_partner(config, spec, x, n, rule)? {
            debug_assert_eq!(c.v, p);
            partner.insert((p.colour as u8, p.index), c.partner);
            certs.push(c);
        }
    }
    let mut edges = vec![];
    let mut boundary = vec![];
    for p in config.refs() {
        let mine = partner.get(&(p.colour as u8, p.index));
        let back = mine.and_then(|q| partner.get(&(q.colour as u8, q.index)));
        match (mine, back) {
            (Some(&q), Some(&b)) if b == p => {
                if p.colour == Colour::Red {
                    edges.push((p, q));
                }
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidMatching(format!(
                    "certified partners of {p:?} are not mutual"
                )));
            }
            _ => boundary.push(BoundaryPoint {
                point: p,
                side: side_toward_edge(config, p),
            }),
        }
    }
    Ok((WindowMatching::new(Mode::TwoColour, edges, boundary), certs))
}

fn side_toward_edge(config: &PointConfig, p: PointRef) -> Side {
    let (lo, hi) = config.window().span();
    if config.x(p) - lo < hi - config.x(p) {
        Side::Left
    } else {
        Side::Right
    }
}

/// The part of the stable matching of a one-colour configuration on the
/// line that the window determines.
///
/// Adjacent survivors are paired in increasing order of their gap, as in
/// the greedy construction. The window ends act as walls standing for the
/// unseen points beyond them: a point whose gap to a wall comes first may be
/// taken from outside, so it becomes undetermined and acts as a wall itself.
pub fn stable_window(config: &PointConfig) -> Result<WindowMatching> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    require_line(config, Mode::OneColour)?;
    let xs = config.red_line();
    let n = xs.len();
    let (lo, hi) = config.window().span();
    // nodes 0..n are points, n and n + 1 the left and right walls
    let pos = |i: usize| match i {
        i if i < n => xs[i],
        i if i == n => lo,
        _ => hi,
    };
    let mut prev: Vec<usize> = (0..n).map(|i| if i == 0 { n } else { i - 1 }).collect();
    let mut next: Vec<usize> = (0..n)
        .map(|i| if i + 1 == n { n + 1 } else { i + 1 })
        .collect();
    prev.extend([n, n]);
    next.extend([n, n + 1]);
    next[n] = if n == 0 { n + 1 } else { 0 };
    prev[n + 1] = if n == 0 { n } else { n - 1 };
    let mut wall: Vec<Option<Side>> = vec![None; n];
    wall.extend([Some(Side::Left), Some(Side::Right)]);
    let mut gone = vec![false; n + 2];
    let key = |d: f64| d.to_bits();
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<_>, i: usize, j: usize| {
        heap.push(Reverse((key(pos(j) - pos(i)), i, j)))
    };
    let mut i = n;
    while i != n + 1 {
        let j = next[i];
        if !(i >= n && j >= n) {
            push(&mut heap, i, j);
        }
        i = j;
    }
    let mut edges = vec![];
    let mut boundary = vec![];
    while let Some(Reverse((_, i, j))) = heap.pop() {
        if gone[i] || gone[j] || next[i] != j {
            continue;
        }
        match (wall[i], wall[j]) {
            (None, None) => {
                edges.push((PointRef::red(i), PointRef::red(j)));
                gone[i] = true;
                gone[j] = true;
                let (l, r) = (prev[i], next[j]);
                next[l] = r;
                prev[r] = l;
                if wall[l].is_none() || wall[r].is_none() {
                    push(&mut heap, l, r);
                }
            }
            (Some(side), None) | (None, Some(side)) => {
                let p = if wall[i].is_none() { i } else { j };
                wall[p] = Some(side);
                boundary.push(BoundaryPoint {
                    point: PointRef::red(p),
                    side,
                });
            }
            (Some(_), Some(_)) => {}
        }
    }
    Ok(WindowMatching::new(Mode::OneColour, edges, boundary))
}

/// Connected components of the union of two window matchings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentSummary {
    /// Sizes of the components free of boundary points, in decreasing order.
    pub sizes: Vec<usize>,
    /// Components touching a boundary point of either matching.
    pub excluded: usize,
    /// Sizes of the excluded components, in decreasing order.
    pub excluded_sizes: Vec<usize>,
}

pub fn compare_matchings(
    config: &PointConfig,
    m1: &WindowMatching,
    m2: &WindowMatching,
) -> Result<ComponentSummary> {
    m1.validate(config)
        .map_err(|e| Error::InvalidInput(format!("first matching: {e}")))?;
    m2.validate(config)
        .map_err(|e| Error::InvalidInput(format!("second matching: {e}")))?;
    if m1.mode != m2.mode || m1.mode != config.mode() {
        return Err(Error::InvalidInput(
            "matchings belong to different configurations".into(),
        ));
    }
    let n = config.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &(a, b) in m1.edges.iter().chain(&m2.edges) {
        let (ra, rb) = (
            find(&mut parent, config.dense(a)),
            find(&mut parent, config.dense(b)),
        );
        parent[ra] = rb;
    }
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    let mut touches: BTreeMap<usize, bool> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        *size.entry(r).or_default() += 1;
        let p = config.from_dense(i);
        *touches.entry(r).or_default() |= m1.is_boundary(p) || m2.is_boundary(p);
    }
    let (mut sizes, mut excluded_sizes) = (vec![], vec![]);
    for (r, s) in size {
        if touches[&r] {
            excluded_sizes.push(s);
        } else {
            sizes.push(s);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    excluded_sizes.sort_unstable_by(|a, b| b.cmp(a));
    Ok(ComponentSummary {
        excluded: excluded_sizes.len(),
        sizes,
        excluded_sizes,
    })
}

/// Level assignment of a two-colour line configuration.
pub fn levels(config: &PointConfig) -> Result<LevelAssignment> {
    let walk = build_walk(config)?;
    Ok(assign_levels(&walk, config))
}

/// Orientation check around `x`: the edges of `m` within one level that
/// cross `x`, ordered from innermost outward. Returns the number of
/// consecutive pairs checked and how many of them alternate orientation.
/// A pair is checked only when every level point between the two edges'
/// endpoints is matched inside the window, so that no edge can be missing
/// between them.
pub fn orientation_alternation(
    config: &PointConfig,
    levels: &LevelAssignment,
    m: &WindowMatching,
    x: f64,
) -> Result<(usize, usize)> {
    let by_level = points_by_level(config, levels)?;
    let mut crossing: BTreeMap<i64, Vec<(f64, f64, bool)>> = BTreeMap::new();
    for &(r, b) in &m.edges {
        let (xr, xb) = (config.x(r), config.x(b));
        if xr.min(xb) < x && x < xr.max(xb) {
            crossing
                .entry(levels.level(r))
                .or_default()
                .push((xr.min(xb), xr.max(xb), xr < xb));
        }
    }
    let (mut checked, mut alternating) = (0, 0);
    for (j, mut es) in crossing {
        es.sort_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)));
        let pts = &by_level[&j];
        for w in es.windows(2) {
            let (inner, outer) = (w[0], w[1]);
            if costs::arrangement((inner.0, inner.1), (outer.0, outer.1))? == Arrangement::Entwined
            {
                return Err(Error::InvalidMatching(
                    "entwined edges within a level".into(),
                ));
            }
            let complete = pts
                .iter()
                .filter(|&&p| outer.0 <= config.x(p) && config.x(p) <= outer.1)
                .all(|&p| matches!(m.partner(p), Partner::Point(_)));
            if complete {
                checked += 1;
                if inner.2 != outer.2 {
                    alternating += 1;
                }
            }
        }
    }
    Ok((checked, alternating))
}
