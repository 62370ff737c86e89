//! The difference walk of a two-colour configuration on the line, its level
//! decomposition, and hitting-time queries.
//!
//! The walk steps up by one at every red point and down by one at every
//! blue point, is right-continuous, and is anchored so that its value just
//! left of the origin is zero.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::points::{Colour, Mode, PointConfig, PointRef};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Jump {
    pub position: f64,
    pub point: PointRef,
    /// Walk value from this position (inclusive) to the next jump.
    pub after: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Walk {
    span: (f64, f64),
    initial: i64,
    jumps: Vec<Jump>,
}

fn step(c: Colour) -> i64 {
    match c {
        Colour::Red => 1,
        Colour::Blue => -1,
    }
}

pub fn build_walk(config: &PointConfig) -> Result<Walk> {
    if config.dim() != 1 || config.mode() != Mode::TwoColour {
        return Err(Error::InvalidInput(
            "the walk needs a two-colour configuration on the line".into(),
        ));
    }
    let (r, b) = (config.red_line(), config.blue_line());
    let mut merged = Vec::with_capacity(r.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < r.len() || j < b.len() {
        if j == b.len() || (i < r.len() && r[i] < b[j]) {
            merged.push((r[i], PointRef::red(i)));
            i += 1;
        } else {
            merged.push((b[j], PointRef::blue(j)));
            j += 1;
        }
    }
    let initial = -merged
        .iter()
        .filter(|(x, _)| *x < 0.0)
        .map(|(_, p)| step(p.colour))
        .sum::<i64>();
    let mut value = initial;
    let jumps = merged
        .into_iter()
        .map(|(position, point)| {
            value += step(point.colour);
            Jump {
                position,
                point,
                after: value,
            }
        })
        .collect();
    Ok(Walk {
        span: config.window().span(),
        initial,
        jumps,
    })
}

impl Walk {
    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Value to the left of every point.
    pub fn initial(&self) -> i64 {
        self.initial
    }

    /// Number of jumps at positions ≤ `x`.
    fn rank(&self, x: f64) -> usize {
        self.jumps.partition_point(|j| j.position <= x)
    }

    /// W(x), right-continuous.
    pub fn value(&self, x: f64) -> i64 {
        match self.rank(x) {
            0 => self.initial,
            k => self.jumps[k - 1].after,
        }
    }

    /// W(x−).
    pub fn value_left(&self, x: f64) -> i64 {
        match self.jumps.partition_point(|j| j.position < x) {
            0 => self.initial,
            k => self.jumps[k - 1].after,
        }
    }

    /// Minimum of W over the closed interval [s, t].
    pub fn min_on(&self, s: f64, t: f64) -> i64 {
        let mut m = self.value(s);
        let start = self.rank(s);
        for j in &self.jumps[start..] {
            if j.position > t {
                break;
            }
            m = m.min(j.after);
        }
        m
    }

    /// Whether the walk data covers `[lo, hi]`.
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.span.0 <= lo && hi <= self.span.1
    }

    /// Rows `position,value`, starting with the window's left end.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("position,value\n");
        let _ = writeln!(s, "{:.17e},{}", self.span.0, self.initial);
        for j in &self.jumps {
            let _ = writeln!(s, "{:.17e},{}", j.position, j.after);
        }
        s
    }
}

/// Level index of every point: the level of a point is k when the walk
/// moves between k and k+1 there.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelAssignment {
    pub red: Vec<i64>,
    pub blue: Vec<i64>,
}

impl LevelAssignment {
    pub fn level(&self, p: PointRef) -> i64 {
        match p.colour {
            Colour::Red => self.red[p.index],
            Colour::Blue => self.blue[p.index],
        }
    }
}

pub fn assign_levels(walk: &Walk, config: &PointConfig) -> LevelAssignment {
    let mut red = vec![0; config.n_red()];
    let mut blue = vec![0; config.n_blue()];
    for j in walk.jumps() {
        let before = j.after - step(j.point.colour);
        match j.point.colour {
            Colour::Red => red[j.point.index] = before,
            Colour::Blue => blue[j.point.index] = j.after,
        }
    }
    LevelAssignment { red, blue }
}

/// First position after `from` at which the walk jumps onto `target`, or
/// `None` if that does not happen inside the window.
pub fn first_hit(walk: &Walk, target: i64, from: f64) -> Option<f64> {
    let start = walk.rank(from);
    walk.jumps[start..]
        .iter()
        .find(|j| j.after == target)
        .map(|j| j.position)
}

/// The first scale y = (3a)^n, 0 ≤ n ≤ `max_n`, with W − W(q−) > 0 on
/// [q−ay, q−y] ∪ [q+y, q+ay].
pub fn find_y_at(walk: &Walk, q: f64, a: f64, max_n: u32) -> Result<Option<f64>> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a must exceed 1, got {a}")));
    }
    let reach = a * (3.0 * a).powi(max_n as i32);
    let (lo, hi) = (q - reach, q + reach);
    if !walk.covers(lo, hi) {
        return Err(Error::WindowTooSmall {
            have_lo: walk.span.0,
            have_hi: walk.span.1,
            need_lo: lo,
            need_hi: hi,
        });
    }
    let base = walk.value_left(q);
    for n in 0..=max_n {
        let y = (3.0 * a).powi(n as i32);
        if walk.min_on(q - a * y, q - y) > base && walk.min_on(q + y, q + a * y) > base {
            return Ok(Some(y));
        }
    }
    Ok(None)
}

pub fn find_y(walk: &Walk, a: f64, max_n: u32) -> Result<Option<f64>> {
    find_y_at(walk, 0.0, a, max_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::{sample_poisson, Seed, Window};

    fn two(red: Vec<f64>, blue: Vec<f64>) -> PointConfig {
        PointConfig::line((-10.0, 10.0), Mode::TwoColour, red, blue).unwrap()
    }

    #[test]
    fn walk_examples() {
        let w = build_walk(&two(vec![1.0], vec![2.0])).unwrap();
        assert_eq!(
            (
                w.value(0.5),
                w.value(1.0),
                w.value(1.5),
                w.value(2.0),
                w.value(9.0)
            ),
            (0, 1, 1, 0, 0)
        );

        let w = build_walk(&two(vec![-1.0], vec![1.0])).unwrap();
        assert_eq!(
            (w.value(-5.0), w.value(-1.0), w.value(0.0), w.value(1.0)),
            (-1, 0, 0, -1)
        );
        assert_eq!(w.value_left(0.0), 0);

        let w = build_walk(&two(vec![], vec![])).unwrap();
        assert_eq!((w.value(-3.0), w.value(3.0)), (0, 0));

        let one = PointConfig::line((-1.0, 1.0), Mode::OneColour, vec![0.5], vec![]).unwrap();
        assert!(matches!(build_walk(&one), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn level_examples() {
        let cfg = two(vec![1.0], vec![2.0]);
        let l = assign_levels(&build_walk(&cfg).unwrap(), &cfg);
        assert_eq!((l.red.clone(), l.blue.clone()), (vec![0], vec![0]));
        let cfg = two(vec![1.0, 2.0], vec![3.0, 4.0]);
        let l = assign_levels(&build_walk(&cfg).unwrap(), &cfg);
        assert_eq!(l.red, vec![0, 1]);
        assert_eq!(l.blue, vec![1, 0]);
    }

    #[test]
    fn first_hit_examples() {
        let cfg = two(vec![1.0], vec![2.0]);
        let w = build_walk(&cfg).unwrap();
        assert_eq!(first_hit(&w, 1, 0.0), Some(1.0));
        assert_eq!(first_hit(&w, 0, 1.0), Some(2.0));
        let reds = two(vec![1.0, 2.0, 3.0], vec![]);
        assert_eq!(first_hit(&build_walk(&reds).unwrap(), -5, 0.0), None);
    }

    #[test]
    fn find_y_examples() {
        // W = 1 on [−3, −0.5) and on [0.5, ∞)
        let cfg = PointConfig::line(
            (-100.0, 100.0),
            Mode::TwoColour,
            vec![-3.0, 0.5],
            vec![-0.5],
        )
        .unwrap();
        let w = build_walk(&cfg).unwrap();
        assert_eq!(find_y(&w, 2.0, 0).unwrap(), Some(1.0));
        let flat = PointConfig::line((-100.0, 100.0), Mode::TwoColour, vec![], vec![]).unwrap();
        assert_eq!(find_y(&build_walk(&flat).unwrap(), 2.0, 1).unwrap(), None);
        assert!(matches!(
            find_y(&w, 2.0, 3),
            Err(Error::WindowTooSmall { .. })
        ));
        assert!(matches!(
            find_y(&w, 1.0, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn increments_and_levels_on_samples() {
        use rand::{Rng, SeedableRng};
        let win = Window::line(-200.0, 200.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for s in 0..100 {
            let cfg = sample_poisson(&win, 1.0, Mode::TwoColour, Seed::new(s)).unwrap();
            let w = build_walk(&cfg).unwrap();
            assert_eq!(w.value_left(0.0), 0);
            for _ in 0..1000 {
                let mut x: f64 = rng.random_range(-200.0..200.0);
                let mut y: f64 = rng.random_range(-200.0..200.0);
                if x > y {
                    std::mem::swap(&mut x, &mut y);
                }
                let nr = cfg.red_line().iter().filter(|&&p| x < p && p <= y).count() as i64;
                let nb = cfg.blue_line().iter().filter(|&&p| x < p && p <= y).count() as i64;
                assert_eq!(w.value(y) - w.value(x), nr - nb);
            }
            let l = assign_levels(&w, &cfg);
            for j in w.jumps() {
                let (lo, hi) = (w.value_left(j.position), w.value(j.position));
                assert_eq!(lo.min(hi), l.level(j.point));
                assert_eq!((lo - hi).abs(), 1);
            }
            // colours alternate inside every level
            let mut last: std::collections::HashMap<i64, Colour> = Default::default();
            for j in w.jumps() {
                if let Some(c) = last.insert(l.level(j.point), j.point.colour) {
                    assert_ne!(c, j.point.colour);
                }
            }
        }
    }
}
