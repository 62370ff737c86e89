//! The extended cost parameter, edge costs, and the lexicographic order on
//! matching scores (fewest unmatched points first, then cost).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::finite_match::Matching;
use crate::points::{Colour, Mode, PointConfig, PointRef, Window, EPS_TIE};

/// γ ∈ ℝ ∪ {−∞, +∞, 1−, 1+}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostSpec {
    Finite(f64),
    NegInfinity,
    PosInfinity,
    /// γ = 1 with entwined edge pairs forbidden.
    OneMinus,
    /// γ = 1 with straddling edge pairs forbidden.
    OnePlus,
}

impl CostSpec {
    pub fn is_finite(&self) -> bool {
        matches!(self, CostSpec::Finite(_))
    }

    /// Whether the matching problem is a sum of edge costs (finite γ and 1±).
    pub fn is_additive(&self) -> bool {
        !matches!(self, CostSpec::NegInfinity | CostSpec::PosInfinity)
    }

    /// Subcritical regime: γ < 1 or −∞.
    pub fn is_subcritical(&self) -> bool {
        match *self {
            CostSpec::Finite(g) => g < 1.0,
            CostSpec::NegInfinity => true,
            _ => false,
        }
    }

    /// The finite γ that orders sums for this kind (1 for 1±).
    pub(crate) fn sum_gamma(&self) -> Option<f64> {
        match *self {
            CostSpec::Finite(g) => Some(g),
            CostSpec::OneMinus | CostSpec::OnePlus => Some(1.0),
            _ => None,
        }
    }

    fn kind_tag(&self) -> u8 {
        match self {
            CostSpec::Finite(_) => 0,
            CostSpec::NegInfinity => 1,
            CostSpec::PosInfinity => 2,
            CostSpec::OneMinus => 3,
            CostSpec::OnePlus => 4,
        }
    }
}

impl fmt::Display for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostSpec::Finite(g) => write!(f, "{g}"),
            CostSpec::NegInfinity => write!(f, "-inf"),
            CostSpec::PosInfinity => write!(f, "+inf"),
            CostSpec::OneMinus => write!(f, "1-"),
            CostSpec::OnePlus => write!(f, "1+"),
        }
    }
}

impl FromStr for CostSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-inf" | "-infinity" => Ok(CostSpec::NegInfinity),
            "+inf" | "inf" | "infinity" | "+infinity" => Ok(CostSpec::PosInfinity),
            "1-" => Ok(CostSpec::OneMinus),
            "1+" => Ok(CostSpec::OnePlus),
            other => match other.parse::<f64>() {
                Ok(g) if g.is_finite() => Ok(CostSpec::Finite(g)),
                _ => Err(Error::InvalidParameter(format!(
                    "unrecognised gamma {other:?}"
                ))),
            },
        }
    }
}

impl Serialize for CostSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CostSpec::Finite(g) => s.serialize_f64(*g),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for CostSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(g) => Ok(CostSpec::Finite(g)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// f_γ: x^γ for γ>0, log x for γ=0, −x^γ for γ<0.
pub(crate) fn power_cost(gamma: f64, x: f64) -> f64 {
    if gamma > 0.0 {
        x.powf(gamma)
    } else if gamma == 0.0 {
        x.ln()
    } else {
        -x.powf(gamma)
    }
}

pub fn edge_cost(spec: CostSpec, length: f64) -> Result<f64> {
    let CostSpec::Finite(g) = spec else {
        return Err(Error::WrongKind(format!(
            "edge cost needs a finite gamma, got {spec}"
        )));
    };
    if !(length > 0.0) {
        return Err(Error::InvalidLength(length));
    }
    Ok(power_cost(g, length))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScorePayload {
    Cost {
        cost: f64,
    },
    /// Ascending lengths for −∞, descending for +∞.
    Lengths {
        lengths: Vec<f64>,
    },
    /// Total length plus whether the forbidden arrangement occurs.
    Critical {
        cost: f64,
        violation: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchScore {
    pub unmatched: usize,
    #[serde(flatten)]
    pub payload: ScorePayload,
    #[serde(skip)]
    kind: u8,
}

impl MatchScore {
    pub fn cost(&self) -> Option<f64> {
        match self.payload {
            ScorePayload::Cost { cost } | ScorePayload::Critical { cost, .. } => Some(cost),
            ScorePayload::Lengths { .. } => None,
        }
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS_TIE * a.abs().max(b.abs()).max(1.0)
}

fn cmp_tol(a: f64, b: f64) -> Ordering {
    if approx_eq(a, b) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Orientation-free arrangement of two disjoint edges on the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    Separate,
    Entwined,
    /// One edge has both endpoints of the other between its own.
    Straddling {
        outer: Outer,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outer {
    First,
    Second,
}

/// Classifies two edges given by their endpoint positions.
pub fn arrangement(e: (f64, f64), f: (f64, f64)) -> Result<Arrangement> {
    let (a0, a1) = if e.0 <= e.1 { e } else { (e.1, e.0) };
    let (b0, b1) = if f.0 <= f.1 { f } else { (f.1, f.0) };
    let pts = [a0, a1, b0, b1];
    for i in 0..4 {
        for j in i + 1..4 {
            if pts[i] == pts[j] {
                return Err(Error::InvalidPair);
            }
        }
    }
    let inside = |x: f64, lo: f64, hi: f64| lo < x && x < hi;
    let f_in_e = inside(b0, a0, a1) as u8 + inside(b1, a0, a1) as u8;
    Ok(match f_in_e {
        2 => Arrangement::Straddling {
            outer: Outer::First,
        },
        1 => Arrangement::Entwined,
        _ => {
            if inside(a0, b0, b1) && inside(a1, b0, b1) {
                Arrangement::Straddling {
                    outer: Outer::Second,
                }
            } else {
                Arrangement::Separate
            }
        }
    })
}

/// Edge lengths of `m` in `config`, validating the matching first.
pub(crate) fn edge_lengths(config: &PointConfig, m: &Matching) -> Result<Vec<f64>> {
    m.validate(config)?;
    Ok(m.edge_refs().map(|(a, b)| config.distance(a, b)).collect())
}

/// Whether any two edges of `m` realise the arrangement forbidden by `spec`
/// (straddling for 1+, entwined for 1−). Only meaningful on the line; in
/// higher dimension there is no such notion and the answer is `false`.
pub fn has_forbidden_pair(spec: CostSpec, config: &PointConfig, m: &Matching) -> bool {
    if config.dim() != 1 {
        return false;
    }
    let forbidden = |a: Arrangement| match spec {
        CostSpec::OnePlus => matches!(a, Arrangement::Straddling { .. }),
        CostSpec::OneMinus => a == Arrangement::Entwined,
        _ => false,
    };
    let edges: Vec<(f64, f64)> = m
        .edge_refs()
        .map(|(a, b)| (config.x(a), config.x(b)))
        .collect();
    first_forbidden_pair(&edges, forbidden).is_some()
}

pub(crate) fn first_forbidden_pair(
    edges: &[(f64, f64)],
    forbidden: impl Fn(Arrangement) -> bool,
) -> Option<(usize, usize)> {
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            if let Ok(a) = arrangement(edges[i], edges[j]) {
                if forbidden(a) {
                    return Some((i, j));
                }
            }
        }
    }
    None
}

pub fn score(spec: CostSpec, config: &PointConfig, m: &Matching) -> Result<MatchScore> {
    let lengths = edge_lengths(config, m)?;
    let unmatched = m.unmatched_count();
    let payload = match spec {
        CostSpec::Finite(g) => {
            // summed in ascending length order so equal edge sets give identical bits
            let mut sorted = lengths;
            sorted.sort_by(f64::total_cmp);
            ScorePayload::Cost {
                cost: sorted.iter().map(|&x| power_cost(g, x)).sum(),
            }
        }
        CostSpec::NegInfinity => {
            let mut l = lengths;
            l.sort_by(f64::total_cmp);
            ScorePayload::Lengths { lengths: l }
        }
        CostSpec::PosInfinity => {
            let mut l = lengths;
            l.sort_by(|a, b| b.total_cmp(a));
            ScorePayload::Lengths { lengths: l }
        }
        CostSpec::OneMinus | CostSpec::OnePlus => {
            let mut sorted = lengths;
            sorted.sort_by(f64::total_cmp);
            ScorePayload::Critical {
                cost: sorted.iter().sum(),
                violation: has_forbidden_pair(spec, config, m),
            }
        }
    };
    Ok(MatchScore {
        unmatched,
        payload,
        kind: spec.kind_tag(),
    })
}

/// Lexicographic comparison: fewer unmatched points first, then the
/// kind-dependent payload. Payload values within [`EPS_TIE`] (relative) are equal.
pub fn compare(spec: CostSpec, a: &MatchScore, b: &MatchScore) -> Result<Ordering> {
    let tag = spec.kind_tag();
    if a.kind != tag || b.kind != tag {
        return Err(Error::WrongKind(format!(
            "scores were not computed for {spec}"
        )));
    }
    let first = a.unmatched.cmp(&b.unmatched);
    if first != Ordering::Equal {
        return Ok(first);
    }
    Ok(match (&a.payload, &b.payload) {
        (ScorePayload::Cost { cost: x }, ScorePayload::Cost { cost: y }) => cmp_tol(*x, *y),
        (ScorePayload::Lengths { lengths: x }, ScorePayload::Lengths { lengths: y }) => {
            for (p, q) in x.iter().zip(y) {
                let o = cmp_tol(*p, *q);
                if o != Ordering::Equal {
                    return Ok(o);
                }
            }
            // the shorter sequence is padded with −∞
            y.len().cmp(&x.len())
        }
        (
            ScorePayload::Critical {
                cost: x,
                violation: vx,
            },
            ScorePayload::Critical {
                cost: y,
                violation: vy,
            },
        ) => cmp_tol(*x, *y).then(vx.cmp(vy)),
        _ => return Err(Error::WrongKind("payload shapes differ".into())),
    })
}

/// Colour pattern of four points in left-to-right order, e.g. `"rrbb"`.
/// One-colour patterns are written `"rrrr"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColourPattern(pub [Colour; 4]);

impl FromStr for ColourPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cs: Vec<Colour> = s
            .chars()
            .map(|c| match c {
                'r' | 'R' => Ok(Colour::Red),
                'b' | 'B' => Ok(Colour::Blue),
                _ => Err(Error::InvalidParameter(format!("bad colour pattern {s:?}"))),
            })
            .collect::<Result<_>>()?;
        let arr: [Colour; 4] = cs
            .try_into()
            .map_err(|_| Error::InvalidParameter(format!("pattern {s:?} needs four colours")))?;
        Ok(ColourPattern(arr))
    }
}

/// Index pairs of the four ordered points realising each arrangement.
fn pairing(a: Arrangement) -> [(usize, usize); 2] {
    match a {
        Arrangement::Separate => [(0, 1), (2, 3)],
        Arrangement::Entwined => [(0, 2), (1, 3)],
        Arrangement::Straddling { .. } => [(0, 3), (1, 2)],
    }
}

/// Whether two edges in arrangement `arr` over four points with colours
/// `colours` and successive gaps `(a, b, c)` can both belong to a γ-minimal
/// matching: the pairing must respect colours and be score-minimal among all
/// colour-respecting pairings of the four points.
pub fn pair_legal(
    spec: CostSpec,
    colours: ColourPattern,
    arr: Arrangement,
    gaps: (f64, f64, f64),
) -> bool {
    let (a, b, c) = gaps;
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return false;
    }
    let xs = [0.0, a, a + b, a + b + c];
    let cs = colours.0;
    let one_colour = cs.iter().all(|&c| c == cs[0]);
    let mode = if one_colour {
        Mode::OneColour
    } else {
        Mode::TwoColour
    };
    let valid = |p: [(usize, usize); 2]| one_colour || p.iter().all(|&(i, j)| cs[i] != cs[j]);
    let mine = pairing(arr);
    if !valid(mine) {
        return false;
    }

    let (mut red, mut blue) = (vec![], vec![]);
    let mut at = [PointRef::red(0); 4];
    for (k, &col) in cs.iter().enumerate() {
        if one_colour || col == Colour::Red {
            at[k] = PointRef::red(red.len());
            red.push(xs[k]);
        } else {
            at[k] = PointRef::blue(blue.len());
            blue.push(xs[k]);
        }
    }
    let window = Window::line(-1.0, xs[3] + 1.0).expect("positive span");
    let config = PointConfig::from_sorted_unchecked(window, mode, red, blue);
    let to_matching = |p: [(usize, usize); 2]| {
        Matching::from_refs(mode, p.iter().map(|&(i, j)| (at[i], at[j])), [])
    };
    let my_score = score(spec, &config, &to_matching(mine)).expect("valid pairing");
    [
        Arrangement::Separate,
        Arrangement::Entwined,
        Arrangement::Straddling {
            outer: Outer::First,
        },
    ]
    .into_iter()
    .map(pairing)
    .filter(|&p| valid(p))
    .all(|p| {
        let s = score(spec, &config, &to_matching(p)).expect("valid pairing");
        compare(spec, &my_score, &s).expect("same kind") != Ordering::Greater
    })
}
