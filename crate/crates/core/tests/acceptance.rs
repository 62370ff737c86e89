//! The ten acceptance criteria. Each test prints one PASS/FAIL line to the
//! terminal (outside the test harness capture) and then asserts.

use std::cmp::Ordering;
use std::io::Write as _;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use matchlab::costs::{arrangement, compare, pair_legal, score, Arrangement, ColourPattern};
use matchlab::finite_match::{oracle_min, solve_min, solve_stable};
use matchlab::line::{
    finitary_partner, finitary_partner_scales, finitary_window, kappa, level_matching, levels,
    meshalkin, order_matching_k, CertificateRule, LevelThreshold, Partner,
};
use matchlab::points::sample_poisson;
use matchlab::stats::{
    finitary_samples, ks_exponential, max_scale, orientation_alternation_rate, running_mean_sqrt,
    sample_t, sample_x, FinitarySample, McOptions, Scheme, TailEstimate,
};
use matchlab::verify::violates;
use matchlab::walk::build_walk;
use matchlab::{Colour, CostSpec, Matching, Mode, PointConfig, PointRef, Seed, Window};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria run one at a time so that wall-clock limits are meaningful.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {verdict}: {detail}");
}

fn kinds() -> Vec<CostSpec> {
    let mut k: Vec<CostSpec> = [-2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0]
        .into_iter()
        .map(CostSpec::Finite)
        .collect();
    k.extend([
        CostSpec::NegInfinity,
        CostSpec::PosInfinity,
        CostSpec::OneMinus,
        CostSpec::OnePlus,
    ]);
    k
}

fn random_config(rng: &mut ChaCha8Rng, dim: usize, mode: Mode, max_n: usize) -> PointConfig {
    let w = Window::cube(dim, 0.0, 4.0).unwrap();
    loop {
        let n = rng.random_range(1..=max_n);
        let (mut red, mut blue) = (vec![], vec![]);
        for _ in 0..n {
            let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..4.0)).collect();
            if mode == Mode::OneColour || rng.random_bool(0.5) {
                red.push(p);
            } else {
                blue.push(p);
            }
        }
        if let Ok(cfg) = PointConfig::new(w.clone(), mode, red, blue) {
            return cfg;
        }
    }
}

#[test]
fn criterion_1_oracle_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut ties, mut mismatches) = (0, 0, vec![]);
    for spec in kinds() {
        for trial in 0..500 {
            let dim = 1 + trial % 2;
            let mode = if trial % 4 < 2 {
                Mode::TwoColour
            } else {
                Mode::OneColour
            };
            let cfg = random_config(&mut rng, dim, mode, 8);
            let m = solve_min(spec, &cfg).unwrap();
            let s = score(spec, &cfg, &m).unwrap();
            let optima = oracle_min(spec, &cfg).unwrap();
            let best = score(spec, &cfg, &optima[0]).unwrap();
            let equal = compare(spec, &s, &best).unwrap() == Ordering::Equal;
            // bit-for-bit equal to an enumerated optimum, or a flagged tie
            let exact = optima.iter().any(|o| score(spec, &cfg, o).unwrap() == s);
            checked += 1;
            ties += usize::from(m.tie);
            if !(equal && (exact || m.tie)) {
                mismatches.push(format!("{spec} {cfg:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed <= Duration::from_secs(120);
    report(
        1,
        pass,
        format!(
            "{checked} configs over {} kinds, {} mismatches, {ties} flagged ties, {:.1}s",
            kinds().len(),
            mismatches.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(
        mismatches.is_empty(),
        "{:?}",
        &mismatches[..mismatches.len().min(3)]
    );
    assert!(elapsed <= Duration::from_secs(120));
}

#[test]
fn criterion_2_stability_equivalence() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for trial in 0..200 {
        let mode = if trial % 2 == 0 {
            Mode::TwoColour
        } else {
            Mode::OneColour
        };
        let cfg = random_config(&mut rng, 1 + trial % 3 / 2, mode, 10);
        let m = solve_stable(&cfg).unwrap();
        let optima = oracle_min(CostSpec::NegInfinity, &cfg).unwrap();
        if !optima.iter().any(|o| o.same_edges(&m)) {
            bad += 1;
        }
    }
    report(2, bad == 0, format!("200 configs, {bad} mismatches"));
    assert_eq!(bad, 0);
}

#[test]
fn criterion_3_exponential_law() {
    let _g = serial();
    let opts = McOptions::new(100_000, 3, 1e3);
    let x = sample_x(Scheme::AlternatingMixture, &opts).unwrap();
    let v: Vec<f64> = x.iter().flatten().copied().collect();
    let ks = ks_exponential(&v);
    let at1 = v.iter().filter(|&&t| t > 1.0).count() as f64 / v.len() as f64;
    let pass = ks < 0.02 && v.len() == x.len();
    report(
        3,
        pass,
        format!(
            "KS distance {ks:.5} (limit 0.02), P(X>1) = {at1:.4} vs e^-1 = {:.4}, {} censored",
            (-1f64).exp(),
            x.len() - v.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_hitting_time_exponent() {
    let _g = serial();
    let start = Instant::now();
    let opts = McOptions::new(100_000, 4, 1e6);
    let est = TailEstimate::from_samples(&sample_t(&opts), (10.0, 1e3), 4);
    let elapsed = start.elapsed();
    let slope = est.slope.unwrap();
    let ci = est.slope_ci.unwrap();
    let pass = (-0.55..=-0.45).contains(&slope) && elapsed <= Duration::from_secs(300);
    report(
        4,
        pass,
        format!(
            "slope {slope:.4} (CI {:.4}..{:.4}) over t in [10, 1000], {} censored, {:.1}s",
            ci.0,
            ci.1,
            est.censored,
            elapsed.as_secs_f64()
        ),
    );
    assert!(est.ccdf.windows(2).all(|w| w[0] >= w[1]));
    assert!(pass);
}

/// Half-width for finitary Palm samples at γ = 0: a(3a)^3 ≈ 6.5·10⁴ is the
/// largest scale whose 10⁵ samples run in minutes.
const FINITARY_HALF_WIDTH: f64 = 7e4;

fn finitary_cache() -> &'static Vec<Option<FinitarySample>> {
    static CACHE: OnceLock<Vec<Option<FinitarySample>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let opts = McOptions::new(100_000, 5, FINITARY_HALF_WIDTH);
        finitary_samples(CostSpec::Finite(0.0), &opts).unwrap()
    })
}

fn sqrt_growth(samples: &[Option<f64>]) -> (f64, f64, f64) {
    let v: Vec<f64> = samples.iter().flatten().copied().collect();
    let m = running_mean_sqrt(&v, &[10_000, 100_000]);
    (m[0], m[1], m[1] / m[0] - 1.0)
}

#[test]
fn criterion_5_subcritical_exponent() {
    let _g = serial();
    let mesh = sample_x(Scheme::Meshalkin, &McOptions::new(100_000, 5, 1e6)).unwrap();
    let me = TailEstimate::from_samples(&mesh, (10.0, 1e3), 5);
    let fin: Vec<Option<f64>> = finitary_cache().iter().map(|s| s.map(|s| s.x)).collect();
    let fe = TailEstimate::from_samples(&fin, (10.0, 1e3), 5);
    let (m1, m2, mg) = sqrt_growth(&mesh);
    let (f1, f2, fg) = sqrt_growth(&fin);
    let ok = |s: Option<f64>| s.is_some_and(|s| (-0.6..=-0.4).contains(&s));
    let slopes = ok(me.slope) && ok(fe.slope);
    let growth = mg >= 0.2 && fg >= 0.2;
    let ci = |e: &TailEstimate| {
        e.slope_ci
            .map_or("none".into(), |c| format!("{:.3}..{:.3}", c.0, c.1))
    };
    report(
        5,
        slopes && growth,
        format!(
            "meshalkin slope {:.4} (CI {}, censored {:.4}%); finitary slope {:.4} (CI {}, censored {:.3}%{}); \
             mean sqrt X at 1e4/1e5: meshalkin {m1:.3}/{m2:.3} (+{:.1}%), finitary {f1:.3}/{f2:.3} (+{:.1}%), need +20%",
            me.slope.unwrap_or(f64::NAN),
            ci(&me),
            100.0 * me.censored_fraction,
            fe.slope.unwrap_or(f64::NAN),
            ci(&fe),
            100.0 * fe.censored_fraction,
            if fe.unreliable { ", over the 1% budget" } else { "" },
            100.0 * mg,
            100.0 * fg,
        ),
    );
    assert!(slopes, "slopes {:?} {:?}", me.slope, fe.slope);
    assert!(growth, "growth {mg} {fg}");
}

#[test]
fn criterion_6_coding_radius() {
    let _g = serial();
    let spec = CostSpec::Finite(0.0);
    let a = 2.0 * kappa(spec).unwrap() + 1.0;
    let samples = finitary_cache();
    let l: Vec<Option<f64>> = samples.iter().map(|s| s.map(|s| s.l)).collect();
    let est = TailEstimate::from_samples(&l, (a, FINITARY_HALF_WIDTH), 6);
    let done: Vec<&FinitarySample> = samples.iter().flatten().collect();
    let l_ge_x = done.iter().filter(|s| s.l >= s.x).count();
    let on_grid = done
        .iter()
        .filter(|s| {
            let g = a * (3.0 * a).powi(s.n as i32);
            (s.l - g).abs() <= 1e-12 * g
        })
        .count();
    let slope = est.slope.unwrap_or(f64::NAN);
    let ci = est.slope_ci.unwrap_or((f64::NAN, f64::NAN));
    let pass = slope < 0.0 && ci.1 < 0.0 && l_ge_x == done.len() && on_grid == done.len();
    report(
        6,
        pass,
        format!(
            "L slope {slope:.4} (CI {:.4}..{:.4}); L >= X on {l_ge_x}/{n}; on the a(3a)^n grid {on_grid}/{n}; censored {:.3}%",
            ci.0,
            ci.1,
            100.0 * est.censored_fraction,
            n = done.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_crossing_identities() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let win = Window::line(-300.0, 300.0).unwrap();
    let (mut level_bad, mut order_bad) = (0, 0);
    for s in 0..50 {
        let cfg = sample_poisson(&win, 1.0, Mode::TwoColour, Seed::new(700 + s)).unwrap();
        let walk = build_walk(&cfg).unwrap();
        let lv = levels(&cfg).unwrap();
        let vals: Vec<i64> = walk
            .jumps()
            .iter()
            .map(|j| j.after)
            .chain([walk.initial()])
            .collect();
        let (lo, hi) = (*vals.iter().min().unwrap(), *vals.iter().max().unwrap());
        for _ in 0..20 {
            // level matchings: |W(x) − k| edges cross x
            let k = rng.random_range(lo..=hi);
            let m = level_matching(&cfg, &lv, LevelThreshold::Finite(k)).unwrap();
            let x: f64 = rng.random_range(-300.0..300.0);
            if m.crossings(&cfg, x) as i64 != (walk.value(x) - k).abs() {
                level_bad += 1;
            }
            // order matchings: |k| edges cross 0
            let k = rng.random_range(-10..=10i64);
            let m = order_matching_k(&cfg, k).unwrap();
            if m.crossings(&cfg, 0.0) as i64 != k.abs() {
                order_bad += 1;
            }
        }
    }
    report(
        7,
        level_bad == 0 && order_bad == 0,
        format!("1000 level checks with {level_bad} failures, 1000 order checks with {order_bad} failures"),
    );
    assert_eq!((level_bad, order_bad), (0, 0));
}

#[test]
fn criterion_8_structural_invariants() {
    let _g = serial();
    let spec = CostSpec::Finite(0.0);
    let k = kappa(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // quasistability on certified pairs
    let win = Window::line(-400.0, 400.0).unwrap();
    let (mut pairs, mut violations) = (0, 0);
    for s in 0..10 {
        let cfg = sample_poisson(&win, 1.0, Mode::TwoColour, Seed::new(800 + s)).unwrap();
        let max_n = max_scale(spec, 400.0).unwrap().unwrap();
        let (wm, _) = finitary_window(&cfg, spec, max_n, CertificateRule::LevelGap).unwrap();
        let m: Matching = wm.as_matching();
        let reds: Vec<PointRef> = wm.edge_refs().iter().map(|e| e.0).collect();
        let blues: Vec<PointRef> = wm.edge_refs().iter().map(|e| e.1).collect();
        for _ in 0..1000 {
            let x = reds[rng.random_range(0..reds.len())];
            let y = blues[rng.random_range(0..blues.len())];
            pairs += 1;
            if violates(&cfg, &m, k, x, y) {
                violations += 1;
            }
        }
    }

    let alt = orientation_alternation_rate(spec, 6, 2000.0, 100, 8).unwrap();

    // meshalkin never entwines
    let mut entwined = 0;
    let mut edge_pairs = 0usize;
    let mwin = Window::line(-200.0, 200.0).unwrap();
    for s in 0..20 {
        let cfg = sample_poisson(&mwin, 1.0, Mode::TwoColour, Seed::new(880 + s)).unwrap();
        let m = meshalkin(&cfg).unwrap();
        let iv: Vec<(f64, f64)> = m
            .edge_refs()
            .iter()
            .map(|&(a, b)| (cfg.x(a).min(cfg.x(b)), cfg.x(a).max(cfg.x(b))))
            .collect();
        for i in 0..iv.len() {
            for j in i + 1..iv.len() {
                edge_pairs += 1;
                if arrangement(iv[i], iv[j]).unwrap() == Arrangement::Entwined {
                    entwined += 1;
                }
            }
        }
    }
    let pass = violations == 0 && alt.rate == Some(1.0) && entwined == 0 && pairs >= 10_000;
    report(
        8,
        pass,
        format!(
            "quasistability with kappa {k}: {violations} violations in {pairs} pairs; orientation alternation {}/{} (rate {:?}); \
             meshalkin: {entwined} entwined among {edge_pairs} edge pairs",
            alt.alternating, alt.checked, alt.rate
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_finitary_consistency() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut queries, mut certified, mut stable, mut higher, mut inv_checked, mut inv_ok) =
        (0, 0, 0, 0, 0, 0);
    let mut failures = vec![];
    for (gi, (g, target)) in [(0.0, 600), (-1.0, 200), (0.5, 200)]
        .into_iter()
        .enumerate()
    {
        let spec = CostSpec::Finite(g);
        let a = 2.0 * kappa(spec).unwrap() + 1.0;
        let max_n = 1;
        let top = max_n + 1;
        let half = a * (3.0 * a).powi(top as i32) + 2.0 * a * (3.0 * a).powi(max_n as i32) + 10.0;
        let win = Window::line(-half, half).unwrap();
        let mut asked = 0;
        for s in 0.. {
            if asked >= target {
                break;
            }
            let cfg = sample_poisson(
                &win,
                1.0,
                Mode::TwoColour,
                Seed::new(900 + 100 * gi as u64 + s),
            )
            .unwrap();
            for _ in 0..20 {
                asked += 1;
                queries += 1;
                let q: f64 = rng.random_range(-10.0..10.0);
                let rule = CertificateRule::LevelGap;
                let Some(c) = finitary_partner(&cfg, spec, q, max_n, rule).unwrap() else {
                    continue;
                };
                certified += 1;
                // raising max_n and forcing every larger scale keep the partner
                let more = finitary_partner(&cfg, spec, q, top, rule).unwrap();
                if more.as_ref().map(|m| m.partner) == Some(c.partner) {
                    stable += 1;
                } else {
                    failures.push(format!("gamma {g} query {q}: max_n change"));
                }
                for n in c.n + 1..=top {
                    if let Some(f) = finitary_partner_scales(&cfg, spec, q, n..=n, rule).unwrap() {
                        higher += 1;
                        if f.partner != c.partner {
                            failures.push(format!("gamma {g} query {q}: scale {n} disagrees"));
                        }
                    }
                }
                // involution: the partner's certified partner is V
                inv_checked += 1;
                let back = finitary_partner(&cfg, spec, c.partner_position, top, rule).unwrap();
                if back.as_ref().map(|b| b.partner) == Some(c.v) {
                    inv_ok += 1;
                } else {
                    failures.push(format!("gamma {g} query {q}: involution {back:?}"));
                }
            }
        }
    }
    let pass = failures.is_empty() && certified > 0;
    report(
        9,
        pass,
        format!(
            "{queries} queries, {certified} certified; partner unchanged from max_n to max_n+1 in {stable}/{certified}, \
             {higher} agreeing certificates at forced larger scales; involution {inv_ok}/{inv_checked}"
        ),
    );
    assert!(pass, "{:?}", &failures[..failures.len().min(5)]);
}

fn same_argmin(spec: CostSpec, cfg: &PointConfig, s: f64) -> bool {
    let m = solve_min(spec, cfg).unwrap();
    let ms = solve_min(spec, &cfg.scaled(s)).unwrap();
    m.same_edges(&ms) || (m.tie && ms.tie)
}

#[test]
fn criterion_10_property_suites() {
    let _g = serial();
    // scale invariance
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut changes = 0;
    let finite: Vec<CostSpec> = kinds().into_iter().filter(|k| k.is_finite()).collect();
    for i in 0..200 {
        let mode = if i % 2 == 0 {
            Mode::TwoColour
        } else {
            Mode::OneColour
        };
        let cfg = random_config(&mut rng, 1 + i % 4 / 2, mode, 8);
        let spec = finite[i % finite.len()];
        for s in [0.5, 2.0, 10.0] {
            if !same_argmin(spec, &cfg, s) {
                changes += 1;
            }
        }
    }

    // γ-limit stability
    let mut limit_checks = 0;
    let mut exceptions = vec![];
    let pairs: Vec<(CostSpec, f64)> = vec![
        (CostSpec::Finite(-2.0), -2.0),
        (CostSpec::Finite(-1.0), -1.0),
        (CostSpec::Finite(0.0), 0.0),
        (CostSpec::Finite(0.5), 0.5),
        (CostSpec::Finite(1.5), 1.5),
        (CostSpec::Finite(2.0), 2.0),
        (CostSpec::Finite(3.0), 3.0),
        (CostSpec::OneMinus, 1.0),
        (CostSpec::OnePlus, 1.0),
    ];
    for i in 0..200 {
        let mode = if i % 2 == 0 {
            Mode::TwoColour
        } else {
            Mode::OneColour
        };
        let cfg = random_config(&mut rng, 1 + i % 4 / 2, mode, 8);
        for &(spec, g) in &pairs {
            let base = solve_min(spec, &cfg).unwrap();
            if base.tie {
                continue;
            }
            let sides: &[f64] = match spec {
                CostSpec::OneMinus => &[-1e-3],
                CostSpec::OnePlus => &[1e-3],
                _ => &[-1e-3, 1e-3],
            };
            for &d in sides {
                limit_checks += 1;
                let near = solve_min(CostSpec::Finite(g + d), &cfg).unwrap();
                if !near.same_edges(&base) {
                    exceptions.push(format!("{spec} at {}: {cfg:?}", g + d));
                }
            }
        }
    }
    for e in &exceptions {
        let _ = writeln!(std::io::stdout().lock(), "  gamma-limit exception: {e}");
    }
    let rate = exceptions.len() as f64 / limit_checks as f64;

    // pair_legal against the sign of f(a+b+c)+f(b) − f(a+b) − f(b+c)
    let grid = [0.05, 0.1, 0.3, 0.5, 1.0, 1.7, 2.5, 4.0, 7.0, 12.0];
    let rrbb: ColourPattern = "rrbb".parse().unwrap();
    let mut legal_fail = 0;
    let mut triples = 0;
    for &g in &[-2.0, -1.0, 0.0, 0.5, 2.0, 3.0] {
        let f = |x: f64| -> f64 {
            if g > 0.0 {
                x.powf(g)
            } else if g == 0.0 {
                x.ln()
            } else {
                -x.powf(g)
            }
        };
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    triples += 1;
                    let straddle = f(a + b + c) + f(b);
                    let entwine = f(a + b) + f(b + c);
                    let spec = CostSpec::Finite(g);
                    let st = pair_legal(
                        spec,
                        rrbb,
                        Arrangement::Straddling {
                            outer: matchlab::costs::Outer::First,
                        },
                        (a, b, c),
                    );
                    let en = pair_legal(spec, rrbb, Arrangement::Entwined, (a, b, c));
                    let want = if g > 1.0 {
                        (false, true)
                    } else {
                        (true, false)
                    };
                    let sign_ok = if g > 1.0 {
                        straddle > entwine
                    } else {
                        straddle < entwine
                    };
                    if !sign_ok || (st, en) != want {
                        legal_fail += 1;
                    }
                }
            }
        }
    }

    let pass = changes == 0 && rate < 0.01 && legal_fail == 0;
    report(
        10,
        pass,
        format!(
            "scale invariance: {changes} changes in 600 solves; gamma-limit: {} exceptions in {limit_checks} checks ({:.3}%); \
             pair_legal: {legal_fail} failures on {triples} triples",
            exceptions.len(),
            100.0 * rate
        ),
    );
    assert!(pass);
}

fn line_config() -> impl Strategy<Value = PointConfig> {
    (
        proptest::collection::vec(0.0f64..10.0, 1..5),
        proptest::collection::vec(0.0f64..10.0, 1..5),
    )
        .prop_filter_map("distinct points", |(r, b)| {
            let mut r = r;
            let mut b = b;
            r.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            PointConfig::line((0.0, 10.0), Mode::TwoColour, r, b).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn argmin_is_scale_invariant(cfg in line_config(), gi in 0usize..8, s in 0.1f64..20.0) {
        let spec = CostSpec::Finite([-2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0][gi]);
        prop_assert!(same_argmin(spec, &cfg, s));
    }

    #[test]
    fn level_matching_partners_share_a_level(cfg in line_config(), k in -3i64..3) {
        let lv = levels(&cfg).unwrap();
        let m = level_matching(&cfg, &lv, LevelThreshold::Finite(k)).unwrap();
        for &(r, b) in m.edge_refs() {
            prop_assert_eq!(lv.level(r), lv.level(b));
            prop_assert_eq!(r.colour, Colour::Red);
        }
        for p in cfg.refs() {
            prop_assert!(!matches!(m.partner(p), Partner::Unmatched));
        }
    }
}
