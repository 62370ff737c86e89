use std::cmp::Ordering;

use matchlab::costs::{compare, score};
use matchlab::finite_match::{oracle_min, solve_min, solve_stable};
use matchlab::{CostSpec, Mode, PointConfig, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_config(rng: &mut ChaCha8Rng, dim: usize, mode: Mode, max_n: usize) -> PointConfig {
    let w = Window::cube(dim, 0.0, 4.0).unwrap();
    loop {
        let n = rng.random_range(1..=max_n);
        let mut red = vec![];
        let mut blue = vec![];
        for _ in 0..n {
            let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..4.0)).collect();
            if mode == Mode::OneColour || rng.random_bool(0.5) {
                red.push(p);
            } else {
                blue.push(p);
            }
        }
        if let Ok(cfg) = PointConfig::new(w.clone(), mode, red, blue) {
            if cfg.near_equal_distances().is_none() {
                return cfg;
            }
        }
    }
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

#[test]
fn solver_agrees_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for spec in kinds() {
        for trial in 0..60 {
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
            assert_eq!(
                compare(spec, &s, &best).unwrap(),
                Ordering::Equal,
                "{spec} {cfg:?}"
            );
            let exact = optima.iter().any(|o| score(spec, &cfg, o).unwrap() == s);
            assert!(exact || m.tie, "{spec} {cfg:?} {m:?} {optima:?}");
        }
    }
}

#[test]
fn stable_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..200 {
        let mode = if trial % 2 == 0 {
            Mode::TwoColour
        } else {
            Mode::OneColour
        };
        let cfg = random_config(&mut rng, 1 + trial % 3 / 2, mode, 10);
        let m = solve_stable(&cfg).unwrap();
        let optima = oracle_min(CostSpec::NegInfinity, &cfg).unwrap();
        assert!(optima.iter().any(|o| o.same_edges(&m)));
    }
}
