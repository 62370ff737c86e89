use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use matchlab::finite_match::{oracle_min, solve_stable, tile_match};
use matchlab::line::{
    alternating, finitary_partner, finitary_window, fitting_scale, kappa, level_matching, levels,
    meshalkin, meshalkin_reversed, one_swap_variant, order_matching_k, stable_window,
    CertificateRule, IntervalUnion, LevelThreshold, Phase, WindowMatching,
};
use matchlab::points::{equal_count_pair, palm_augment, sample_poisson};
use matchlab::stats::{self, McOptions, Scheme, TailEstimate};
use matchlab::verify::{is_gamma_minimal_local, is_quasistable, is_stable, Report};
use matchlab::{costs, render, solve_min, CostSpec, Matching, Mode, PointConfig, Seed, Window};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "matchlab",
    version,
    about = "Minimal power-cost matchings of Poisson points"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    OneColour,
    TwoColour,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::OneColour => Mode::OneColour,
            ModeArg::TwoColour => Mode::TwoColour,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Predicate {
    Stable,
    Quasistable,
    LocalMinimal,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Stat {
    #[value(name = "X", alias = "x")]
    X,
    #[value(name = "L", alias = "l")]
    L,
    #[value(name = "T", alias = "t")]
    T,
    Alternation,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Poisson configuration (intensity per colour) on a window.
    Sample {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Lower and upper end of every axis.
        #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["LO", "HI"])]
        window: Vec<f64>,
        #[arg(long, value_enum, default_value = "two-colour")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1.0)]
        intensity: f64,
        #[arg(long, env = "MATCHLAB_SEED", default_value_t = 0)]
        seed: u64,
        /// Exactly N uniform points of each colour instead of Poisson counts.
        #[arg(long)]
        equal_n: Option<usize>,
        /// Add a red point at the origin.
        #[arg(long)]
        palm: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimal matching of a configuration.
    Solve {
        #[arg(long, allow_hyphen_values = true)]
        gamma: String,
        #[arg(long = "in")]
        input: PathBuf,
        /// Cross-check the score against exhaustive enumeration.
        #[arg(long)]
        oracle: bool,
        /// Match each cube tile of this side separately.
        #[arg(long)]
        tile: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A construction on the line: alternating+, alternating-, order-k,
    /// meshalkin, meshalkin-reversed, level-k, swap, finitary, stable.
    Build {
        #[arg(long)]
        construction: String,
        #[arg(long = "in")]
        input: PathBuf,
        /// Threshold for order-k and level-k (an integer, or ±inf for level-k).
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        k: String,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<String>,
        /// Certificate for the partner of the first point at or after this position,
        /// at the largest scale up to --max-n that fits the window.
        #[arg(long, allow_hyphen_values = true)]
        query: Option<f64>,
        #[arg(long, default_value_t = 3)]
        max_n: u32,
        #[arg(long, default_value = "level-gap")]
        rule: String,
        /// Gap lengths `lo:hi,…` selecting the swaps of the swap construction.
        #[arg(long, default_value = "")]
        swap: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a predicate on a matching; exit code 1 when it fails.
    Verify {
        #[arg(long, value_enum)]
        predicate: Predicate,
        #[arg(long)]
        points: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Quasistability constant; computed from --gamma when absent.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<String>,
        #[arg(long, default_value_t = 6)]
        cap: usize,
        /// Random subsets beyond the exhaustive pairs.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, env = "MATCHLAB_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Palm Monte Carlo tail estimates.
    Tails {
        #[arg(long, value_enum)]
        stat: Stat,
        /// alternating-mixture, meshalkin, level:K, finitary:γ, stable-1colour.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, env = "MATCHLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [10.0, 1000.0])]
        fit: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Windows and positions per window for --stat alternation.
        #[arg(long, default_value_t = 20)]
        windows: usize,
        #[arg(long, default_value_t = 50)]
        positions: usize,
        /// Write the CCDF table here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// SVG arc diagram of a matching on the line.
    Render {
        #[arg(long)]
        points: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Bad flags or unreadable input.
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(Usage(e.into()))
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)
}

fn read_points(path: &Path) -> anyhow::Result<PointConfig> {
    PointConfig::from_json(&read_json(path)?).map_err(usage)
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> anyhow::Result<()> {
    emit(out, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn gamma(s: &Option<String>) -> anyhow::Result<CostSpec> {
    s.as_deref()
        .ok_or_else(|| usage(anyhow!("--gamma is required")))
        .and_then(|g| g.parse().map_err(usage))
}

/// A matching document: a window matching when it lists boundary points.
fn read_matching(path: &Path, config: &PointConfig) -> anyhow::Result<WindowMatching> {
    let v = read_json(path)?;
    let w = if v.get("boundary").is_some() {
        WindowMatching::from_json(config.mode(), &v)
    } else {
        Matching::from_json(config.mode(), &v).map(|m| WindowMatching::from_matching(&m))
    }
    .map_err(usage)?;
    w.validate(config).map_err(usage)?;
    Ok(w)
}

fn cmd_sample(
    dim: usize,
    window: Vec<f64>,
    mode: Mode,
    intensity: f64,
    seed: u64,
    equal_n: Option<usize>,
    palm: bool,
    out: &Option<PathBuf>,
) -> anyhow::Result<()> {
    let [lo, hi] = window[..] else {
        return Err(usage(anyhow!("--window needs LO HI")));
    };
    let win = Window::cube(dim, lo, hi).map_err(usage)?;
    let seed = Seed::new(seed);
    let mut cfg = match equal_n {
        Some(n) => equal_count_pair(&win, n, seed),
        None => sample_poisson(&win, intensity, mode, seed),
    }
    .map_err(usage)?;
    if palm {
        cfg = palm_augment(&cfg).map_err(usage)?;
    }
    emit_json(out, &cfg.to_json())
}

fn cmd_solve(
    g: &str,
    input: &Path,
    oracle: bool,
    tile: Option<f64>,
    out: &Option<PathBuf>,
) -> anyhow::Result<bool> {
    let spec: CostSpec = g.parse().map_err(usage)?;
    let cfg = read_points(input)?;
    let m = match (tile, spec) {
        (Some(s), _) => tile_match(spec, &cfg, s, &vec![cfg.window().bounds()[0].0; cfg.dim()]),
        (None, CostSpec::NegInfinity) => solve_stable(&cfg),
        (None, _) => solve_min(spec, &cfg),
    }
    .map_err(usage)?;
    let mut doc = m.to_json(spec, &cfg)?;
    let mut ok = true;
    if oracle {
        let best = oracle_min(spec, &cfg).map_err(usage)?;
        let mine = costs::score(spec, &cfg, &m)?;
        let opt = costs::score(spec, &cfg, &best[0])?;
        ok = costs::compare(spec, &mine, &opt)? == std::cmp::Ordering::Equal;
        doc["oracle"] = json!({"agrees": ok, "optimal_score": opt, "optima": best.len()});
    }
    emit_json(out, &doc)?;
    Ok(ok)
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    construction: &str,
    input: &Path,
    k: &str,
    g: &Option<String>,
    query: Option<f64>,
    max_n: u32,
    rule: &str,
    swap: &str,
    out: &Option<PathBuf>,
) -> anyhow::Result<()> {
    let cfg = read_points(input)?;
    let int_k = || {
        k.parse::<i64>()
            .map_err(|_| usage(anyhow!("--k must be an integer, got {k:?}")))
    };
    let m = match construction {
        "alternating+" => alternating(&cfg, Phase::Plus),
        "alternating-" => alternating(&cfg, Phase::Minus),
        "order-k" => order_matching_k(&cfg, int_k()?),
        "meshalkin" => meshalkin(&cfg),
        "meshalkin-reversed" => meshalkin_reversed(&cfg),
        "level-k" => {
            let t = match k {
                "-inf" => LevelThreshold::NegInfinity,
                "+inf" | "inf" => LevelThreshold::PosInfinity,
                _ => LevelThreshold::Finite(int_k()?),
            };
            levels(&cfg).and_then(|l| level_matching(&cfg, &l, t))
        }
        "swap" => {
            let sel: IntervalUnion = swap.parse().map_err(usage)?;
            meshalkin(&cfg).and_then(|base| one_swap_variant(&cfg, &base, |gap| sel.contains(gap)))
        }
        "stable" => stable_window(&cfg),
        "finitary" => {
            let spec = gamma(g)?;
            let rule: CertificateRule = rule.parse().map_err(usage)?;
            if let Some(q) = query {
                // the largest scale that fits the window, up to --max-n
                let n = fitting_scale(&cfg, spec, q, max_n)
                    .map_err(usage)?
                    .ok_or_else(|| {
                        usage(anyhow!(
                            "the window is too small for any certificate around {q}"
                        ))
                    })?;
                let cert = finitary_partner(&cfg, spec, q, n, rule).map_err(usage)?;
                return emit_json(out, &json!({"certificate": cert.map(|c| c.to_json())}));
            }
            let (m, certs) = finitary_window(&cfg, spec, max_n, rule).map_err(usage)?;
            let mut doc = m.to_json();
            doc["certified"] = json!(certs.len());
            doc["kappa"] = json!(kappa(spec)?);
            return emit_json(out, &doc);
        }
        other => return Err(usage(anyhow!("unknown construction {other:?}"))),
    }
    .map_err(usage)?;
    emit_json(out, &m.to_json())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    predicate: Predicate,
    points: &Path,
    input: &Path,
    kappa_arg: Option<f64>,
    g: &Option<String>,
    cap: usize,
    samples: usize,
    seed: u64,
) -> anyhow::Result<bool> {
    let cfg = read_points(points)?;
    let w = read_matching(input, &cfg)?;
    // boundary points have unknown partners: check the interior
    let (sub, m, _) = w.interior(&cfg);
    let report: Report = match predicate {
        Predicate::Stable => is_stable(&sub, &m),
        Predicate::Quasistable => {
            let k = match kappa_arg {
                Some(k) => k,
                None => kappa(gamma(g)?).map_err(usage)?,
            };
            is_quasistable(&sub, &m, k)
        }
        Predicate::LocalMinimal => {
            is_gamma_minimal_local(gamma(g)?, &sub, &m, cap, samples, Seed::new(seed))
        }
    }
    .map_err(usage)?;
    emit_json(&None, &report.to_json(&sub))?;
    Ok(report.result)
}

#[allow(clippy::too_many_arguments)]
fn cmd_tails(
    stat: Stat,
    scheme: &Option<String>,
    g: &Option<String>,
    samples: usize,
    seed: u64,
    half_width: Option<f64>,
    fit: &[f64],
    jobs: usize,
    windows: usize,
    positions: usize,
    csv: &Option<PathBuf>,
) -> anyhow::Result<()> {
    let fit = (fit[0], fit[1]);
    let est: TailEstimate = match stat {
        Stat::X => {
            let s = scheme
                .as_deref()
                .ok_or_else(|| usage(anyhow!("--stat X needs --scheme")))?;
            let scheme: Scheme = s.parse().map_err(usage)?;
            let opts = McOptions::new(samples, seed, half_width.unwrap_or(1e4)).with_jobs(jobs);
            stats::estimate_x(scheme, &opts, fit)?
        }
        Stat::L => {
            let spec = gamma(g)?;
            let a = 2.0 * kappa(spec).map_err(usage)? + 1.0;
            let opts = McOptions::new(samples, seed, half_width.unwrap_or(a * (3.0 * a).powi(6)))
                .with_jobs(jobs);
            stats::estimate_l(spec, &opts, fit)?
        }
        Stat::T => stats::estimate_t(
            &McOptions::new(samples, seed, half_width.unwrap_or(1e4)).with_jobs(jobs),
            fit,
        ),
        Stat::Alternation => {
            let spec = gamma(g)?;
            let r = stats::orientation_alternation_rate(
                spec,
                windows,
                half_width.unwrap_or(2000.0),
                positions,
                seed,
            )
            .map_err(usage)?;
            emit_json(&None, &serde_json::to_value(r)?)?;
            return Ok(());
        }
    };
    if let Some(p) = csv {
        fs::write(p, est.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    emit_json(&None, &est.summary_json())?;
    Ok(())
}

fn cmd_render(points: &Path, input: &Path, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let cfg = read_points(points)?;
    let w = read_matching(input, &cfg)?;
    emit(out, &render::render_window(&cfg, &w).map_err(usage)?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Sample {
            dim,
            window,
            mode,
            intensity,
            seed,
            equal_n,
            palm,
            out,
        } => cmd_sample(
            dim,
            window,
            mode.into(),
            intensity,
            seed,
            equal_n,
            palm,
            &out,
        )
        .map(|_| true),
        Command::Solve {
            gamma,
            input,
            oracle,
            tile,
            out,
        } => cmd_solve(&gamma, &input, oracle, tile, &out),
        Command::Build {
            construction,
            input,
            k,
            gamma,
            query,
            max_n,
            rule,
            swap,
            out,
        } => cmd_build(
            &construction,
            &input,
            &k,
            &gamma,
            query,
            max_n,
            &rule,
            &swap,
            &out,
        )
        .map(|_| true),
        Command::Verify {
            predicate,
            points,
            input,
            kappa,
            gamma,
            cap,
            samples,
            seed,
        } => cmd_verify(
            predicate, &points, &input, kappa, &gamma, cap, samples, seed,
        ),
        Command::Tails {
            stat,
            scheme,
            gamma,
            samples,
            seed,
            half_width,
            fit,
            jobs,
            windows,
            positions,
            csv,
        } => {
            if stat != Stat::X && scheme.is_some() {
                return Err(usage(anyhow!("--scheme applies to --stat X only")));
            }
            cmd_tails(
                stat, &scheme, &gamma, samples, seed, half_width, &fit, jobs, windows, positions,
                &csv,
            )
            .map(|_| true)
        }
        Command::Render { points, input, out } => cmd_render(&points, &input, &out).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        Cli::try_parse_from([
            "matchlab", "sample", "--window", "-100", "100", "--seed", "7",
        ])
        .unwrap();
        Cli::try_parse_from(["matchlab", "solve", "--gamma", "-inf", "--in", "p.json"]).unwrap();
        assert!(Cli::try_parse_from(["matchlab", "tails", "--stat", "Q"]).is_err());
    }
}
