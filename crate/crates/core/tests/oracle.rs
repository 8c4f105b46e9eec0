mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rideshare_evsi::model::demand_affine;
use rideshare_evsi::oracle::{bilevel_oracle, OracleBudget};
use rideshare_evsi::{CityInstance, FollowerBelief, Mode, Realization};

use common::*;

/// Best price of a single zone: revenue is (1-c) p min(S, d(p)) with d
/// affine and decreasing, increasing up to the price where d = S and
/// concave beyond it.
fn single_zone_optimum(inst: &CityInstance, real: &Realization) -> f64 {
    let (a, b) = demand_affine(inst, 0);
    let d0 = real.d0[0];
    let supply = inst.x0[0] + real.y[0];
    let revenue = |p: f64| (1.0 - inst.c) * p * supply.min(d0 * (a + b * p));
    let vertex = -a / (2.0 * b);
    let cross = (supply / d0 - a) / b;
    let p = vertex.max(cross).clamp(inst.p_min[0], inst.p_max[0]);
    revenue(p)
}

#[test]
fn single_zone_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let budget = OracleBudget {
        min_step: 1e-8,
        ..OracleBudget::default()
    };
    for _ in 0..30 {
        let inst = CityInstance {
            n: 1,
            alpha: vec![vec![0.0]],
            p_min: vec![2.5],
            p_max: vec![12.5],
            c: 0.75,
            delta: rng.gen_range(0.2..0.95),
            x0: vec![rng.gen_range(1..200) as f64],
            ybar: 50.0,
        };
        let real = Realization {
            y: vec![rng.gen_range(0.0..50.0)],
            d0: vec![rng.gen_range(1.0..600.0)],
        };
        let want = single_zone_optimum(&inst, &real);
        for mode in [Mode::Sws, Mode::Ws] {
            let belief = FollowerBelief::certain(&real.d0);
            let got = bilevel_oracle(&inst, &real, Some(&belief), mode, &budget).unwrap();
            assert!((got.value - want).abs() <= 1e-3, "{mode}: {} vs {want}", got.value);
            assert!(!got.exhausted);
        }
    }
}

#[test]
fn zero_demand_is_worth_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(93);
    let inst = random_instance(&mut rng, 3);
    let real = Realization {
        y: vec![3.0; 3],
        d0: vec![0.0; 3],
    };
    let belief = FollowerBelief::certain(&[0.0; 3]);
    for mode in [Mode::Sws, Mode::Ws] {
        let r = bilevel_oracle(&inst, &real, Some(&belief), mode, &OracleBudget::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }
}

#[test]
fn budget_exhaustion_is_flagged() {
    let inst = golden_instance();
    let real = golden_realization();
    let budget = OracleBudget {
        grid: 3,
        max_evaluations: 90,
        ..OracleBudget::default()
    };
    let r = bilevel_oracle(&inst, &real, None, Mode::Sws, &budget).unwrap();
    assert!(r.exhausted);
    assert_eq!(r.evaluations, 90);
    assert!(r.value > 0.0);
}

#[test]
fn ws_needs_a_belief() {
    let inst = golden_instance();
    assert!(bilevel_oracle(&inst, &golden_realization(), None, Mode::Ws, &OracleBudget::default()).is_err());
}

#[test]
fn oracle_is_deterministic() {
    let inst = golden_instance();
    let real = golden_realization();
    let b = golden_belief();
    let first = bilevel_oracle(&inst, &real, Some(&b), Mode::Ws, &OracleBudget::default()).unwrap();
    let second = bilevel_oracle(&inst, &real, Some(&b), Mode::Ws, &OracleBudget::default()).unwrap();
    assert_eq!(first, second);
}
