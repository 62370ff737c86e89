//! Palm Monte Carlo estimators for the matching distance X, the coding
//! radius L, the hitting time T and the orientation alternation rate.
//!
//! Every sample draws a fresh configuration from its own random stream, so
//! results do not depend on the number of worker threads. Configurations on
//! the line are revealed lazily: the window grows until the quantity of
//! interest is determined or the maximal half-width is reached, in which
//! case the sample is censored. Censored samples never enter a CCDF.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::Serialize;
use serde_json::{json, Value};
use statrs::function::gamma::ln_gamma;

use crate::costs::CostSpec;
use crate::error::{Error, Result};
use crate::line::{
    alternating, finitary_partner_scales, finitary_window, kappa, level_matching, levels,
    meshalkin, orientation_alternation, stable_window, CertificateRule, LevelThreshold, Partner,
    Phase, WindowMatching,
};
use crate::points::{sample_poisson, Colour, Mode, PointConfig, PointRef, Seed, Window};

/// Fraction of censored samples above which an estimate is flagged.
pub const CENSOR_BUDGET: f64 = 0.01;

/// Bootstrap resamples for confidence intervals.
pub const BOOTSTRAP: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Largest half-width of the window revealed around the origin.
    pub half_width: f64,
    pub jobs: usize,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64, half_width: f64) -> McOptions {
        McOptions {
            samples,
            seed,
            half_width,
            jobs: 1,
        }
    }

    pub fn with_jobs(self, jobs: usize) -> McOptions {
        McOptions {
            jobs: jobs.max(1),
            ..self
        }
    }
}

/// Runs `f` once per sample, each with its own random stream, on
/// `opts.jobs` threads. Results are in sample order.
pub fn run_samples<T: Send>(opts: &McOptions, f: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Vec<T> {
    let n = opts.samples;
    let jobs = opts.jobs.clamp(1, n.max(1));
    let one = |i: usize| {
        f(&mut Seed {
            value: opts.seed,
            stream: i as u64,
        }
        .rng())
    };
    if jobs == 1 {
        return (0..n).map(one).collect();
    }
    let chunk = n.div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let one = &one;
                s.spawn(move || {
                    (j * chunk..((j + 1) * chunk).min(n))
                        .map(one)
                        .collect::<Vec<T>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Poisson points on the line revealed outward from the origin.
struct LazyLine {
    colours: bool,
    gap: Exp<f64>,
    right: Vec<(f64, Colour)>,
    left: Vec<(f64, Colour)>,
}

impl LazyLine {
    /// Intensity one per colour.
    fn new(mode: Mode) -> LazyLine {
        let colours = mode == Mode::TwoColour;
        let rate = if colours { 2.0 } else { 1.0 };
        LazyLine {
            colours,
            gap: Exp::new(rate).expect("positive rate"),
            right: vec![],
            left: vec![],
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, Colour) {
        let d = self.gap.sample(rng);
        let c = if self.colours && rng.random_bool(0.5) {
            Colour::Blue
        } else {
            Colour::Red
        };
        (d, c)
    }

    /// Reveals every point in [−r, r].
    fn grow(&mut self, rng: &mut ChaCha8Rng, r: f64) {
        while self.right.last().is_none_or(|p| p.0 <= r) {
            let (d, c) = self.draw(rng);
            let x = self.right.last().map_or(0.0, |p| p.0) + d;
            self.right.push((x, c));
        }
        while self.left.last().is_none_or(|p| -p.0 <= r) {
            let (d, c) = self.draw(rng);
            let x = self.left.last().map_or(0.0, |p| p.0) - d;
            self.left.push((x, c));
        }
    }

    /// The revealed configuration on [−r, r], with a red point added at the
    /// origin when `palm` is set.
    fn config(&mut self, rng: &mut ChaCha8Rng, r: f64, palm: bool) -> PointConfig {
        self.grow(rng, r);
        let (mut red, mut blue) = (vec![], vec![]);
        let mut put = |(x, c): (f64, Colour)| match c {
            Colour::Red => red.push(x),
            Colour::Blue => blue.push(x),
        };
        self.left
            .iter()
            .rev()
            .filter(|p| p.0 >= -r)
            .for_each(|&p| put(p));
        if palm {
            put((0.0, Colour::Red));
        }
        self.right.iter().filter(|p| p.0 <= r).for_each(|&p| put(p));
        let mode = if self.colours {
            Mode::TwoColour
        } else {
            Mode::OneColour
        };
        let window = Window::line(-r, r).expect("positive half-width");
        PointConfig::from_sorted_unchecked(window, mode, red, blue)
    }
}

fn origin(config: &PointConfig) -> PointRef {
    PointRef::red(config.red_line().partition_point(|&x| x < 0.0))
}

/// Half-widths 8, 16, 32, … capped at `max`.
fn doubling(max: f64) -> impl Iterator<Item = f64> {
    let mut r = 8.0f64.min(max);
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = r;
        done = r >= max;
        r = (2.0 * r).min(max);
        Some(out)
    })
}

/// Constructions whose matching distance can be sampled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    /// One colour: a fair coin chooses the plus or minus alternating matching.
    AlternatingMixture,
    Meshalkin,
    Level(LevelThreshold),
    Finitary(CostSpec),
    /// One colour: the stable matching.
    Stable1Colour,
}

impl FromStr for Scheme {
    type Err = Error;

    /// `alternating-mixture`, `meshalkin`, `level:K` (K an integer or ±inf),
    /// `finitary:γ`, `stable-1colour`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown scheme {s:?}"));
        match s {
            "alternating-mixture" => return Ok(Scheme::AlternatingMixture),
            "meshalkin" => return Ok(Scheme::Meshalkin),
            "stable-1colour" => return Ok(Scheme::Stable1Colour),
            _ => {}
        }
        let (head, arg) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "level" => Ok(Scheme::Level(match arg {
                "-inf" => LevelThreshold::NegInfinity,
                "+inf" | "inf" => LevelThreshold::PosInfinity,
                k => LevelThreshold::Finite(k.parse().map_err(|_| bad())?),
            })),
            "finitary" => Ok(Scheme::Finitary(arg.parse()?)),
            _ => Err(bad()),
        }
    }
}

/// One Palm sample of a certified finitary partner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FinitarySample {
    /// Distance from the origin to its partner.
    pub x: f64,
    /// Coding radius a·Y.
    pub l: f64,
    pub n: u32,
}

/// Largest n with a(3a)^n ≤ `half_width`.
pub fn max_scale(spec: CostSpec, half_width: f64) -> Result<Option<u32>> {
    let a = 2.0 * kappa(spec)? + 1.0;
    Ok((0..64u32)
        .take_while(|&n| a * (3.0 * a).powi(n as i32) <= half_width)
        .last())
}

fn finitary_sample(
    rng: &mut ChaCha8Rng,
    spec: CostSpec,
    max_n: Option<u32>,
) -> Result<Option<FinitarySample>> {
    let Some(max_n) = max_n else { return Ok(None) };
    let a = 2.0 * kappa(spec)? + 1.0;
    let mut line = LazyLine::new(Mode::TwoColour);
    for n in 0..=max_n {
        let r = a * (3.0 * a).powi(n as i32);
        let cfg = line.config(rng, r, true);
        if let Some(c) = finitary_partner_scales(&cfg, spec, 0.0, n..=n, CertificateRule::LevelGap)?
        {
            debug_assert_eq!(c.v_position, 0.0);
            return Ok(Some(FinitarySample {
                x: c.partner_position.abs(),
                l: c.a * c.y,
                n: c.n,
            }));
        }
    }
    Ok(None)
}

/// Palm samples of the certified finitary partner of the origin.
pub fn finitary_samples(spec: CostSpec, opts: &McOptions) -> Result<Vec<Option<FinitarySample>>> {
    let max_n = max_scale(spec, opts.half_width)?;
    run_samples(opts, |rng| finitary_sample(rng, spec, max_n))
        .into_iter()
        .collect()
}

fn partner_distance(
    rng: &mut ChaCha8Rng,
    mode: Mode,
    max: f64,
    build: impl Fn(&PointConfig) -> Result<WindowMatching>,
) -> Result<Option<f64>> {
    let mut line = LazyLine::new(mode);
    for r in doubling(max) {
        let cfg = line.config(rng, r, true);
        match build(&cfg)?.partner(origin(&cfg)) {
            Partner::Point(p) => return Ok(Some(cfg.x(p).abs())),
            Partner::Unmatched => return Ok(None),
            Partner::Boundary(_) => {}
        }
    }
    Ok(None)
}

/// Palm samples of X for `scheme`; `None` marks a censored sample.
pub fn sample_x(scheme: Scheme, opts: &McOptions) -> Result<Vec<Option<f64>>> {
    if let Scheme::Finitary(spec) = scheme {
        return Ok(finitary_samples(spec, opts)?
            .into_iter()
            .map(|s| s.map(|s| s.x))
            .collect());
    }
    let max = opts.half_width;
    let out = run_samples(opts, |rng| match scheme {
        Scheme::AlternatingMixture => {
            let phase = if rng.random_bool(0.5) {
                Phase::Plus
            } else {
                Phase::Minus
            };
            partner_distance(rng, Mode::OneColour, max, |c| alternating(c, phase))
        }
        Scheme::Meshalkin => partner_distance(rng, Mode::TwoColour, max, meshalkin),
        Scheme::Level(k) => partner_distance(rng, Mode::TwoColour, max, |c| {
            level_matching(c, &levels(c)?, k)
        }),
        Scheme::Stable1Colour => partner_distance(rng, Mode::OneColour, max, stable_window),
        Scheme::Finitary(_) => unreachable!("handled above"),
    });
    out.into_iter().collect()
}

/// Empirical survival function with a fitted log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    /// Uncensored samples.
    pub samples: usize,
    pub censored: usize,
    pub censored_fraction: f64,
    /// Censoring above the budget.
    pub unreliable: bool,
    pub thresholds: Vec<f64>,
    pub ccdf: Vec<f64>,
    /// Pointwise bootstrap 95% band.
    pub ccdf_lo: Vec<f64>,
    pub ccdf_hi: Vec<f64>,
    pub fit_range: (f64, f64),
    pub slope: Option<f64>,
    pub slope_ci: Option<(f64, f64)>,
}

/// Log-spaced thresholds, ten per decade, covering the positive values.
fn log_grid(values: &[f64]) -> Vec<f64> {
    let pos: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    let (Some(lo), Some(hi)) = (
        pos.iter().copied().reduce(f64::min),
        pos.iter().copied().reduce(f64::max),
    ) else {
        return vec![];
    };
    let (a, b) = (
        (lo.log10() * 10.0).floor() as i64,
        (hi.log10() * 10.0).ceil() as i64,
    );
    (a..=b).map(|k| 10f64.powf(k as f64 / 10.0)).collect()
}

/// Least-squares slope of ln y against ln x.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// The q-quantile of sorted data by linear interpolation.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let (i, f) = (h.floor() as usize, h.fract());
    if i + 1 < sorted.len() {
        sorted[i] + f * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

impl TailEstimate {
    /// Builds the estimate from samples (`None` = censored), fitting the
    /// slope over thresholds in `fit_range`. The bootstrap uses `seed`.
    pub fn from_samples(samples: &[Option<f64>], fit_range: (f64, f64), seed: u64) -> TailEstimate {
        let values: Vec<f64> = samples.iter().flatten().copied().collect();
        let censored = samples.len() - values.len();
        let censored_fraction = if samples.is_empty() {
            0.0
        } else {
            censored as f64 / samples.len() as f64
        };
        let thresholds = log_grid(&values);
        let n = values.len();
        // bin k holds the values in (t_{k-1}, t_k]; survival at t_k counts bins above k
        let bin = |v: f64| thresholds.partition_point(|&t| t < v);
        let bins: Vec<usize> = values.iter().map(|&v| bin(v)).collect();
        let nb = thresholds.len() + 1;
        let survival = |counts: &[usize]| -> Vec<f64> {
            let mut out = vec![0.0; thresholds.len()];
            let mut above = 0usize;
            for k in (0..thresholds.len()).rev() {
                above += counts[k + 1];
                out[k] = above as f64 / n as f64;
            }
            out
        };
        let mut counts = vec![0usize; nb];
        for &b in &bins {
            counts[b] += 1;
        }
        let ccdf = if n == 0 {
            vec![0.0; thresholds.len()]
        } else {
            survival(&counts)
        };
        let eps = 1e-9;
        let fit: Vec<usize> = (0..thresholds.len())
            .filter(|&k| {
                thresholds[k] >= fit_range.0 * (1.0 - eps)
                    && thresholds[k] <= fit_range.1 * (1.0 + eps)
            })
            .collect();
        let slope_of = |c: &[f64]| {
            let xs: Vec<f64> = fit.iter().map(|&k| thresholds[k]).collect();
            let ys: Vec<f64> = fit.iter().map(|&k| c[k]).collect();
            loglog_slope(&xs, &ys)
        };
        let slope = if n == 0 { None } else { slope_of(&ccdf) };

        let mut rng = Seed {
            value: seed,
            stream: u64::MAX,
        }
        .rng();
        let mut boot_slopes = vec![];
        let mut boot_ccdf: Vec<Vec<f64>> = vec![vec![]; thresholds.len()];
        if n > 0 {
            for _ in 0..BOOTSTRAP {
                let mut c = vec![0usize; nb];
                for _ in 0..n {
                    c[bins[rng.random_range(0..n)]] += 1;
                }
                let s = survival(&c);
                for (k, v) in s.iter().enumerate() {
                    boot_ccdf[k].push(*v);
                }
                if let Some(b) = slope_of(&s) {
                    boot_slopes.push(b);
                }
            }
        }
        boot_slopes.sort_by(f64::total_cmp);
        let slope_ci = (!boot_slopes.is_empty())
            .then(|| (quantile(&boot_slopes, 0.025), quantile(&boot_slopes, 0.975)));
        let (mut ccdf_lo, mut ccdf_hi) = (vec![], vec![]);
        for mut b in boot_ccdf {
            b.sort_by(f64::total_cmp);
            if b.is_empty() {
                ccdf_lo.push(0.0);
                ccdf_hi.push(0.0);
            } else {
                ccdf_lo.push(quantile(&b, 0.025));
                ccdf_hi.push(quantile(&b, 0.975));
            }
        }
        TailEstimate {
            samples: n,
            censored,
            censored_fraction,
            unreliable: censored_fraction > CENSOR_BUDGET,
            thresholds,
            ccdf,
            ccdf_lo,
            ccdf_hi,
            fit_range,
            slope,
            slope_ci,
        }
    }

    /// Survival value at the threshold nearest to `t` on a log scale.
    pub fn ccdf_at(&self, t: f64) -> Option<f64> {
        let k = (0..self.thresholds.len()).min_by(|&a, &b| {
            (self.thresholds[a] / t)
                .ln()
                .abs()
                .total_cmp(&(self.thresholds[b] / t).ln().abs())
        })?;
        Some(self.ccdf[k])
    }

    /// Rows `threshold,ccdf,ci_lo,ci_hi`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,ccdf,ci_lo,ci_hi\n");
        for k in 0..self.thresholds.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.thresholds[k], self.ccdf[k], self.ccdf_lo[k], self.ccdf_hi[k]
            );
        }
        s
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "samples": self.samples,
            "censored": self.censored,
            "censored_fraction": self.censored_fraction,
            "unreliable": self.unreliable,
            "fit_range": [self.fit_range.0, self.fit_range.1],
            "slope": self.slope,
            "slope_ci": self.slope_ci.map(|(a, b)| vec![a, b]),
        })
    }
}

pub fn estimate_x(scheme: Scheme, opts: &McOptions, fit_range: (f64, f64)) -> Result<TailEstimate> {
    Ok(TailEstimate::from_samples(
        &sample_x(scheme, opts)?,
        fit_range,
        opts.seed,
    ))
}

pub fn estimate_l(spec: CostSpec, opts: &McOptions, fit_range: (f64, f64)) -> Result<TailEstimate> {
    let s: Vec<Option<f64>> = finitary_samples(spec, opts)?
        .into_iter()
        .map(|s| s.map(|s| s.l))
        .collect();
    Ok(TailEstimate::from_samples(&s, fit_range, opts.seed))
}

/// ln of C(2m, m)/4^m, the probability that a simple random walk stays at
/// or below zero for 2m steps.
fn ln_stay(m: f64) -> f64 {
    ln_gamma(2.0 * m + 1.0) - 2.0 * ln_gamma(m + 1.0) - m * 4f64.ln()
}

/// Beyond this many double steps the hitting time is far past any window.
const STAY_CAP: u64 = 1 << 40;

/// Number of jumps until the walk started at 0 first reaches 1: 2M + 1 with
/// P(M ≥ m) = C(2m, m)/4^m.
fn jumps_to_hit(rng: &mut ChaCha8Rng) -> u64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let lu = u.ln();
    if ln_stay(STAY_CAP as f64) >= lu {
        return 2 * STAY_CAP + 1;
    }
    // largest m with ln_stay(m) ≥ ln u
    let (mut lo, mut hi) = (0u64, STAY_CAP);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ln_stay(mid as f64) >= lu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    2 * lo + 1
}

/// One hitting time T = min{t > 0 : W(t) = 1}: the walk jumps at rate 2,
/// so T is a sum of K independent exponentials of rate 2.
pub fn sample_hitting_time(rng: &mut ChaCha8Rng) -> f64 {
    let k = jumps_to_hit(rng);
    Gamma::new(k as f64, 0.5)
        .expect("positive shape")
        .sample(rng)
}

/// Hitting times, censored beyond `opts.half_width`.
pub fn sample_t(opts: &McOptions) -> Vec<Option<f64>> {
    let max = opts.half_width;
    run_samples(opts, |rng| {
        Some(sample_hitting_time(rng)).filter(|&t| t <= max)
    })
}

pub fn estimate_t(opts: &McOptions, fit_range: (f64, f64)) -> TailEstimate {
    TailEstimate::from_samples(&sample_t(opts), fit_range, opts.seed)
}

/// Kolmogorov–Smirnov distance between the sample and Exp(1).
pub fn ks_exponential(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x).exp();
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Mean of √X over each prefix length in `prefixes`.
pub fn running_mean_sqrt(values: &[f64], prefixes: &[usize]) -> Vec<f64> {
    prefixes
        .iter()
        .map(|&p| {
            let p = p.min(values.len());
            values[..p].iter().map(|x| x.sqrt()).sum::<f64>() / p as f64
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlternationReport {
    pub windows: usize,
    pub checked: usize,
    pub alternating: usize,
    pub rate: Option<f64>,
}

/// Over `windows` independent configurations on [−h, h], the fraction of
/// consecutive nested certified edges of one level that alternate in
/// orientation, checked at `positions` random points of the middle half of
/// each window.
pub fn orientation_alternation_rate(
    spec: CostSpec,
    windows: usize,
    half_width: f64,
    positions: usize,
    seed: u64,
) -> Result<AlternationReport> {
    let win = Window::line(-half_width, half_width)?;
    let max_n = max_scale(spec, half_width)?.unwrap_or(0);
    let (mut checked, mut alternating) = (0, 0);
    for w in 0..windows {
        let s = Seed {
            value: seed,
            stream: w as u64,
        };
        let cfg = sample_poisson(&win, 1.0, Mode::TwoColour, s)?;
        let (m, _) = finitary_window(&cfg, spec, max_n, CertificateRule::LevelGap)?;
        let lv = levels(&cfg)?;
        let mut rng = s.with_stream(u64::MAX - w as u64).rng();
        for _ in 0..positions {
            let x = rng.random_range(-half_width / 2.0..half_width / 2.0);
            let (c, a) = orientation_alternation(&cfg, &lv, &m, x)?;
            checked += c;
            alternating += a;
        }
    }
    let rate = (checked > 0).then(|| alternating as f64 / checked as f64);
    Ok(AlternationReport {
        windows,
        checked,
        alternating,
        rate,
    })
}
