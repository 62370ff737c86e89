//! Colour-tagged point configurations on axis-aligned windows.
//!
//! Coordinates are stored flat (`dim` numbers per point) and each colour is
//! kept in lexicographic order, so in dimension one the arrays are simply
//! sorted positions. One-colour configurations keep their points in `red`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Relative tolerance under which two distances or scores count as equal.
pub const EPS_TIE: f64 = 1e-12;

/// Largest configuration for which sampling enforces distinct pairwise
/// distances by rejection. Larger samples are only checked for repeated points.
pub const DISTINCT_CHECK_CAP: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    OneColour,
    TwoColour,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colour {
    Red,
    Blue,
}

impl Colour {
    pub fn other(self) -> Colour {
        match self {
            Colour::Red => Colour::Blue,
            Colour::Blue => Colour::Red,
        }
    }
}

/// A point addressed by colour and its index in that colour's sorted array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointRef {
    pub colour: Colour,
    pub index: usize,
}

impl PointRef {
    pub fn red(index: usize) -> Self {
        PointRef {
            colour: Colour::Red,
            index,
        }
    }

    pub fn blue(index: usize) -> Self {
        PointRef {
            colour: Colour::Blue,
            index,
        }
    }
}

/// Axis-aligned closed box.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    bounds: Vec<(f64, f64)>,
}

impl Window {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidWindow(
                "window needs at least one axis".into(),
            ));
        }
        for &(lo, hi) in &bounds {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidWindow(format!(
                    "axis [{lo}, {hi}] is empty or unbounded"
                )));
            }
        }
        Ok(Window { bounds })
    }

    pub fn line(lo: f64, hi: f64) -> Result<Self> {
        Window::new(vec![(lo, hi)])
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Window::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Bounds of the first axis.
    pub fn span(&self) -> (f64, f64) {
        self.bounds[0]
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(&self.bounds)
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn diameter(&self) -> f64 {
        self.bounds
            .iter()
            .map(|(lo, hi)| (hi - lo).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, s: f64) -> Window {
        Window {
            bounds: self
                .bounds
                .iter()
                .map(|&(lo, hi)| (lo * s, hi * s))
                .collect(),
        }
    }
}

/// Deterministic seeding: identical `(value, stream)` pairs give identical samples.
///
/// Backed by ChaCha8 (rand_chacha, version pinned in the workspace manifest);
/// `stream` selects an independent ChaCha stream for parallel batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    pub stream: u64,
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed { value, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Seed { stream, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.value);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointConfig {
    dim: usize,
    window: Window,
    mode: Mode,
    red: Vec<f64>,
    blue: Vec<f64>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn sort_flat(dim: usize, flat: Vec<f64>) -> Vec<f64> {
    if dim == 1 {
        let mut v = flat;
        v.sort_by(f64::total_cmp);
        return v;
    }
    let mut pts: Vec<&[f64]> = flat.chunks(dim).collect();
    pts.sort_by(|a, b| lex_cmp(a, b));
    pts.concat()
}

impl PointConfig {
    /// Builds a configuration, sorting each colour. Fails if any structural
    /// invariant (containment, distinct points, colour discipline) is violated.
    pub fn new(
        window: Window,
        mode: Mode,
        red: Vec<Vec<f64>>,
        blue: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let dim = window.dim();
        for p in red.iter().chain(&blue) {
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point {p:?} has dimension {} not {dim}",
                    p.len()
                )));
            }
        }
        let red = sort_flat(dim, red.concat());
        let blue = sort_flat(dim, blue.concat());
        let cfg = PointConfig {
            dim,
            window,
            mode,
            red,
            blue,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One-dimensional shorthand; positions need not be sorted.
    pub fn line(window: (f64, f64), mode: Mode, red: Vec<f64>, blue: Vec<f64>) -> Result<Self> {
        let window = Window::line(window.0, window.1)?;
        let mut red = red;
        let mut blue = blue;
        red.sort_by(f64::total_cmp);
        blue.sort_by(f64::total_cmp);
        let cfg = PointConfig {
            dim: 1,
            window,
            mode,
            red,
            blue,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn from_sorted_unchecked(
        window: Window,
        mode: Mode,
        red: Vec<f64>,
        blue: Vec<f64>,
    ) -> Self {
        PointConfig {
            dim: window.dim(),
            window,
            mode,
            red,
            blue,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::OneColour && !self.blue.is_empty() {
            return Err(Error::InvalidInput(
                "one-colour configuration with blue points".into(),
            ));
        }
        for colour in [Colour::Red, Colour::Blue] {
            let n = self.count(colour);
            for i in 0..n {
                let p = self.point(PointRef { colour, index: i });
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "non-finite coordinate in {p:?}"
                    )));
                }
                if !self.window.contains(p) {
                    return Err(Error::InvalidInput(format!(
                        "point {p:?} lies outside the window"
                    )));
                }
                if i > 0 {
                    let q = self.point(PointRef {
                        colour,
                        index: i - 1,
                    });
                    if lex_cmp(q, p) != std::cmp::Ordering::Less {
                        return Err(Error::InvalidInput(format!(
                            "{colour:?} points must be strictly sorted and distinct ({q:?}, {p:?})"
                        )));
                    }
                }
            }
        }
        // red and blue sorted: a merge finds coincidences
        let (mut i, mut j) = (0, 0);
        while i < self.n_red() && j < self.n_blue() {
            let a = self.point(PointRef::red(i));
            let b = self.point(PointRef::blue(j));
            match lex_cmp(a, b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    return Err(Error::InvalidInput(format!(
                        "red and blue point coincide at {a:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_red(&self) -> usize {
        self.red.len() / self.dim
    }

    pub fn n_blue(&self) -> usize {
        self.blue.len() / self.dim
    }

    pub fn count(&self, colour: Colour) -> usize {
        match colour {
            Colour::Red => self.n_red(),
            Colour::Blue => self.n_blue(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_red() + self.n_blue()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, p: PointRef) -> &[f64] {
        let d = self.dim;
        match p.colour {
            Colour::Red => &self.red[p.index * d..(p.index + 1) * d],
            Colour::Blue => &self.blue[p.index * d..(p.index + 1) * d],
        }
    }

    /// First coordinate; the position on the line when `dim == 1`.
    pub fn x(&self, p: PointRef) -> f64 {
        self.point(p)[0]
    }

    /// Sorted red positions (dimension one).
    pub fn red_line(&self) -> &[f64] {
        &self.red
    }

    pub fn blue_line(&self) -> &[f64] {
        &self.blue
    }

    pub fn distance(&self, a: PointRef, b: PointRef) -> f64 {
        let (p, q) = (self.point(a), self.point(b));
        if self.dim == 1 {
            return (p[0] - q[0]).abs();
        }
        p.iter()
            .zip(q)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// All points, red before blue.
    pub fn refs(&self) -> impl Iterator<Item = PointRef> + '_ {
        (0..self.n_red())
            .map(PointRef::red)
            .chain((0..self.n_blue()).map(PointRef::blue))
    }

    /// Whether the two points may be joined by an edge.
    pub fn eligible(&self, a: PointRef, b: PointRef) -> bool {
        a != b
            && match self.mode {
                Mode::OneColour => true,
                Mode::TwoColour => a.colour != b.colour,
            }
    }

    /// Dense index: red points first, then blue.
    pub fn dense(&self, p: PointRef) -> usize {
        match p.colour {
            Colour::Red => p.index,
            Colour::Blue => self.n_red() + p.index,
        }
    }

    pub fn from_dense(&self, i: usize) -> PointRef {
        if i < self.n_red() {
            PointRef::red(i)
        } else {
            PointRef::blue(i - self.n_red())
        }
    }

    /// The configuration restricted to `subset` (same window and mode).
    /// Returns the sub-configuration and, for each of its points, the
    /// reference into `self`.
    pub fn restrict(&self, subset: &[PointRef]) -> (PointConfig, Vec<PointRef>) {
        let mut reds: Vec<usize> = subset
            .iter()
            .filter(|p| p.colour == Colour::Red)
            .map(|p| p.index)
            .collect();
        let mut blues: Vec<usize> = subset
            .iter()
            .filter(|p| p.colour == Colour::Blue)
            .map(|p| p.index)
            .collect();
        reds.sort_unstable();
        reds.dedup();
        blues.sort_unstable();
        blues.dedup();
        let red: Vec<f64> = reds
            .iter()
            .flat_map(|&i| self.point(PointRef::red(i)).to_vec())
            .collect();
        let blue: Vec<f64> = blues
            .iter()
            .flat_map(|&i| self.point(PointRef::blue(i)).to_vec())
            .collect();
        let mut back: Vec<PointRef> = reds.into_iter().map(PointRef::red).collect();
        back.extend(blues.into_iter().map(PointRef::blue));
        let sub = PointConfig {
            dim: self.dim,
            window: self.window.clone(),
            mode: self.mode,
            red,
            blue,
        };
        (sub, back)
    }

    pub fn with_window(&self, window: Window) -> Result<PointConfig> {
        let cfg = PointConfig {
            window,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every coordinate multiplied by `s > 0` (window included).
    pub fn scaled(&self, s: f64) -> PointConfig {
        PointConfig {
            dim: self.dim,
            window: self.window.scaled(s),
            mode: self.mode,
            red: self.red.iter().map(|x| x * s).collect(),
            blue: self.blue.iter().map(|x| x * s).collect(),
        }
    }

    /// Colours swapped (two-colour only; one-colour configurations are returned unchanged).
    pub fn colour_swapped(&self) -> PointConfig {
        match self.mode {
            Mode::OneColour => self.clone(),
            Mode::TwoColour => PointConfig {
                red: self.blue.clone(),
                blue: self.red.clone(),
                ..self.clone()
            },
        }
    }

    /// Smallest and largest pairwise distance ratio check: returns two
    /// distances that agree within [`EPS_TIE`] (relative), if any, or a zero
    /// distance between distinct points.
    pub fn near_equal_distances(&self) -> Option<(f64, f64)> {
        let refs: Vec<PointRef> = self.refs().collect();
        let mut d = Vec::with_capacity(refs.len() * refs.len().saturating_sub(1) / 2);
        for (i, &a) in refs.iter().enumerate() {
            for &b in &refs[i + 1..] {
                d.push(self.distance(a, b));
            }
        }
        d.sort_by(f64::total_cmp);
        if let Some(&first) = d.first() {
            if first <= 0.0 {
                return Some((first, first));
            }
        }
        d.windows(2)
            .find(|w| w[1] - w[0] <= EPS_TIE * w[1])
            .map(|w| (w[0], w[1]))
    }

    fn has_repeated_point(&self) -> bool {
        if self.dim == 1 {
            let mut all: Vec<f64> = self.red.iter().chain(&self.blue).copied().collect();
            all.sort_by(f64::total_cmp);
            return all.windows(2).any(|w| w[0] == w[1]);
        }
        self.validate().is_err()
    }

    pub fn to_json(&self) -> Value {
        let pts = |flat: &[f64]| -> Value {
            if self.dim == 1 {
                json!(flat)
            } else {
                Value::Array(flat.chunks(self.dim).map(|c| json!(c)).collect())
            }
        };
        let window = if self.dim == 1 {
            json!([self.window.bounds[0].0, self.window.bounds[0].1])
        } else {
            Value::Array(
                self.window
                    .bounds
                    .iter()
                    .map(|(lo, hi)| json!([lo, hi]))
                    .collect(),
            )
        };
        json!({
            "dim": self.dim,
            "window": window,
            "mode": self.mode,
            "red": pts(&self.red),
            "blue": pts(&self.blue),
        })
    }

    /// Parses the point-config JSON. Points must already be sorted; inputs
    /// are validated, never adjusted.
    pub fn from_json(v: &Value) -> Result<Self> {
        let raw: RawConfig = serde_json::from_value(v.clone())?;
        let window = match raw.window {
            RawWindow::Line([lo, hi]) => Window::line(lo, hi)?,
            RawWindow::Box(b) => Window::new(b.into_iter().map(|[lo, hi]| (lo, hi)).collect())?,
        };
        if window.dim() != raw.dim {
            return Err(Error::InvalidInput(format!(
                "window has {} axes, dim is {}",
                window.dim(),
                raw.dim
            )));
        }
        let flat = |c: RawCoords| -> Result<Vec<f64>> {
            match c {
                RawCoords::Line(v) if raw.dim == 1 => Ok(v),
                RawCoords::Space(v) if v.iter().all(|p| p.len() == raw.dim) => Ok(v.concat()),
                RawCoords::Line(v) if v.is_empty() => Ok(v),
                _ => Err(Error::InvalidInput(
                    "point coordinates do not match dim".into(),
                )),
            }
        };
        let cfg = PointConfig {
            dim: raw.dim,
            window,
            mode: raw.mode,
            red: flat(raw.red)?,
            blue: flat(raw.blue.unwrap_or(RawCoords::Line(vec![])))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Deserialize)]
struct RawConfig {
    dim: usize,
    window: RawWindow,
    mode: Mode,
    red: RawCoords,
    blue: Option<RawCoords>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawWindow {
    Line([f64; 2]),
    Box(Vec<[f64; 2]>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCoords {
    Line(Vec<f64>),
    Space(Vec<Vec<f64>>),
}

fn uniform_points<R: Rng>(rng: &mut R, window: &Window, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * window.dim());
    for _ in 0..n {
        for &(lo, hi) in window.bounds() {
            out.push(rng.random_range(lo..hi));
        }
    }
    sort_flat(window.dim(), out)
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> usize {
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as usize
}

fn accept(cfg: &PointConfig) -> bool {
    if cfg.len() <= DISTINCT_CHECK_CAP {
        cfg.near_equal_distances().is_none()
    } else {
        !cfg.has_repeated_point()
    }
}

/// Homogeneous Poisson configuration(s) of the given intensity on `window`.
pub fn sample_poisson(
    window: &Window,
    intensity: f64,
    mode: Mode,
    seed: Seed,
) -> Result<PointConfig> {
    let mut rng = seed.rng();
    sample_poisson_rng(&mut rng, window, intensity, mode)
}

pub fn sample_poisson_rng<R: Rng>(
    rng: &mut R,
    window: &Window,
    intensity: f64,
    mode: Mode,
) -> Result<PointConfig> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "intensity must be positive, got {intensity}"
        )));
    }
    let mean = intensity * window.volume();
    loop {
        let nr = poisson_count(rng, mean);
        let red = uniform_points(rng, window, nr);
        let blue = match mode {
            Mode::OneColour => vec![],
            Mode::TwoColour => {
                let nb = poisson_count(rng, mean);
                uniform_points(rng, window, nb)
            }
        };
        let cfg = PointConfig::from_sorted_unchecked(window.clone(), mode, red, blue);
        if accept(&cfg) {
            return Ok(cfg);
        }
    }
}

/// Exactly `n` red and `n` blue independent uniform points.
pub fn equal_count_pair(window: &Window, n: usize, seed: Seed) -> Result<PointConfig> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "need at least one point of each colour".into(),
        ));
    }
    let mut rng = seed.rng();
    loop {
        let red = uniform_points(&mut rng, window, n);
        let blue = uniform_points(&mut rng, window, n);
        let cfg = PointConfig::from_sorted_unchecked(window.clone(), Mode::TwoColour, red, blue);
        if accept(&cfg) {
            return Ok(cfg);
        }
    }
}

/// Inserts a red point at the origin (the Palm version of the configuration).
pub fn palm_augment(config: &PointConfig) -> Result<PointConfig> {
    let origin = vec![0.0; config.dim()];
    if !config.window().contains(&origin) {
        return Err(Error::InvalidWindow(
            "window does not contain the origin".into(),
        ));
    }
    if config
        .refs()
        .any(|p| config.point(p).iter().all(|&x| x == 0.0))
    {
        return Err(Error::OriginOccupied);
    }
    let mut reds: Vec<Vec<f64>> = config
        .red
        .chunks(config.dim())
        .map(|c| c.to_vec())
        .collect();
    reds.push(origin);
    let red = sort_flat(config.dim(), reds.concat());
    Ok(PointConfig {
        red,
        ..config.clone()
    })
}
