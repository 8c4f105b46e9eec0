mod common;

use mibp::SolverConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rideshare_evsi::evsi::*;
use rideshare_evsi::oracle::{bilevel_oracle, OracleBudget};
use rideshare_evsi::{CityInstance, Mode, Realization};

use common::*;

fn random_probs(rng: &mut ChaCha8Rng, s: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

/// Random game; losses are drawn from a few levels so ties are common.
fn random_game(rng: &mut ChaCha8Rng, nx: usize, ny: usize, s: usize) -> FiniteGame {
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<Vec<f64>>> {
        (0..nx)
            .map(|_| {
                (0..ny)
                    .map(|_| (0..s).map(|_| rng.gen_range(-3..4) as f64 / 2.0).collect())
                    .collect()
            })
            .collect()
    };
    let theta = draw(rng);
    let f = draw(rng);
    FiniteGame {
        z1: (0..s).map(|_| rng.gen_range(0..2)).collect(),
        zeta: random_probs(rng, s),
        xi: random_probs(rng, s),
        theta,
        f,
    }
}

/// The optimistic values straight from the definitions: minimize jointly
/// over pairs (x, y) with y among the follower's minimizers.
fn joint_min(g: &FiniteGame, w: &[f64], u: &[f64]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut best = f64::INFINITY;
    for x in 0..g.theta.len() {
        let fmin = g.f[x].iter().map(|fy| dot(fy, w)).fold(f64::INFINITY, f64::min);
        for y in 0..g.theta[x].len() {
            if dot(&g.f[x][y], w) <= fmin + 1e-12 * (1.0 + fmin.abs()) {
                best = best.min(dot(&g.theta[x][y], u));
            }
        }
    }
    best
}

fn enumerate_values(g: &FiniteGame) -> (f64, f64, f64) {
    let s = g.zeta.len();
    let unit = |k: usize| (0..s).map(|j| if j == k { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    let mut sto = 0.0;
    for group in 0..2 {
        let mass: f64 = (0..s).filter(|&k| g.z1[k] == group).map(|k| g.zeta[k]).sum();
        if mass > 0.0 {
            let u: Vec<f64> = (0..s)
                .map(|k| if g.z1[k] == group { g.zeta[k] / mass } else { 0.0 })
                .collect();
            sto += mass * joint_min(g, &g.xi, &u);
        }
    }
    let ws = (0..s).map(|k| g.zeta[k] * joint_min(g, &g.xi, &unit(k))).sum();
    let sws = (0..s).map(|k| g.zeta[k] * joint_min(g, &unit(k), &unit(k))).sum();
    (sto, ws, sws)
}

#[test]
fn engine_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let g = random_game(&mut rng, 3, 3, 2);
        let v = toy_values(&g).unwrap();
        let (sto, ws, sws) = enumerate_values(&g);
        assert!((v.sto - sto).abs() < 1e-12 && (v.ws - ws).abs() < 1e-12 && (v.sws - sws).abs() < 1e-12);
    }
}

#[test]
fn perfect_information_never_hurts_the_leader() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let (nx, ny, s) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3));
        let g = random_game(&mut rng, nx, ny, s);
        let v = toy_values(&g).unwrap();
        assert!(v.evpi >= -1e-12, "{v:?}");
        assert!(v.sto.is_finite() && v.ws.is_finite() && v.sws.is_finite());
    }
}

#[test]
fn single_scenario_is_a_plain_bilevel_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let g = random_game(&mut rng, 4, 4, 1);
        let v = toy_values(&g).unwrap();
        let plain = joint_min(&g, &[1.0], &[1.0]);
        assert_eq!((v.sto, v.ws, v.sws), (plain, plain, plain));
    }
}

#[test]
fn uninformative_sharing_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        // Follower loss identical across scenarios.
        let mut g = random_game(&mut rng, 3, 4, 3);
        for fx in g.f.iter_mut() {
            for fy in fx.iter_mut() {
                let v = fy[0];
                fy.iter_mut().for_each(|x| *x = v);
            }
        }
        let v = toy_values(&g).unwrap();
        assert!((v.ws - v.sws).abs() < 1e-12);
        // Follower already certain of the only possible scenario.
        let mut g = random_game(&mut rng, 3, 4, 2);
        g.zeta = vec![1.0, 0.0];
        g.xi = vec![1.0, 0.0];
        let v = toy_values(&g).unwrap();
        assert!((v.ws - v.sws).abs() < 1e-12);
    }
}

#[test]
fn quadratic_example_is_grid_stable() {
    for case in [ToyCase::Plus, ToyCase::Minus] {
        let a = toy_values(&toy_example(case, 100).unwrap()).unwrap();
        let b = toy_values(&toy_example(case, 200).unwrap()).unwrap();
        assert!((a.sto - b.sto).abs() < 1e-12 && (a.ws - b.ws).abs() < 1e-12 && (a.sws - b.sws).abs() < 1e-12);
    }
}

fn base_city() -> CityInstance {
    CityInstance {
        x0: vec![250.0; 4],
        ..golden_instance()
    }
}

#[test]
fn sampling_is_reproducible_and_prefix_stable() {
    let inst = base_city();
    let plan = SamplingPlan::new(20, 9, vec![0.2, 0.4, 0.6, 0.8], 3.0, 0.5);
    let a = sample_realizations(&plan, &inst).unwrap();
    let b = sample_realizations(&plan, &inst).unwrap();
    assert_eq!(a, b);
    let short = SamplingPlan {
        samples: 5,
        ..plan.clone()
    };
    assert_eq!(sample_realizations(&short, &inst).unwrap()[..], a[..5]);
    let other = SamplingPlan { seed: 10, ..plan };
    assert_ne!(sample_realizations(&other, &inst).unwrap(), a);
}

#[test]
fn sampled_demand_and_supply_follow_their_laws() {
    let inst = base_city();
    let plan = SamplingPlan::new(100_000, 12, vec![0.1, 0.5, 0.9, 1.0], 2.0, 0.25);
    let reals = sample_realizations(&plan, &inst).unwrap();
    let nominal = plan.nominal_demand(inst.n0());
    let ybar = 0.25 * inst.n0();
    let n = reals.len() as f64;
    for i in 0..4 {
        let mean = reals.iter().map(|r| r.d0[i]).sum::<f64>() / n;
        // Symmetric triangular on [0.7 m, 1.3 m]: variance (0.6 m)^2 / 24.
        let sigma = 0.6 * nominal[i] / 24f64.sqrt();
        assert!(
            (mean - nominal[i]).abs() <= 3.0 * sigma / n.sqrt(),
            "zone {i}: {mean} vs {}",
            nominal[i]
        );
        assert!(reals
            .iter()
            .all(|r| r.d0[i] >= 0.7 * nominal[i] && r.d0[i] <= 1.3 * nominal[i]));
        assert!(reals.iter().all(|r| r.y[i] >= 0.0 && r.y[i] <= ybar));
    }
}

fn quick_options() -> EstimateOptions {
    EstimateOptions {
        solver: SolverConfig::default(),
        integer_flows: false,
    }
}

#[test]
fn tiny_plan_matches_oracle_per_sample() {
    let inst = CityInstance {
        n: 2,
        alpha: vec![vec![0.0, 3.0], vec![4.0, 0.0]],
        p_min: vec![2.5; 2],
        p_max: vec![12.5; 2],
        c: 0.75,
        delta: 0.9,
        x0: vec![60.0, 40.0],
        ybar: 0.0,
    };
    let plan = SamplingPlan::new(5, 21, vec![0.3, 0.9], 1.5, 0.3);
    let belief = plan.belief(&inst);
    let report = estimate(&plan, &inst, &belief, &quick_options()).unwrap();
    let cell = plan.instance(&inst);
    assert_eq!(report.samples.len(), 5);
    assert_eq!(report.used, 5);
    for rec in &report.samples {
        let real = Realization {
            y: rec.y.clone(),
            d0: rec.d0.clone(),
        };
        let ws = bilevel_oracle(&cell, &real, Some(&belief), Mode::Ws, &OracleBudget::default()).unwrap();
        let sws = bilevel_oracle(&cell, &real, None, Mode::Sws, &OracleBudget::default()).unwrap();
        let (psi, phi) = (rec.psi.unwrap(), rec.phi.unwrap());
        assert!(
            (psi - ws.value).abs() <= 0.01 * ws.value.abs().max(1.0),
            "{psi} vs {}",
            ws.value
        );
        assert!(
            (phi - sws.value).abs() <= 0.01 * sws.value.abs().max(1.0),
            "{phi} vs {}",
            sws.value
        );
    }
    let mean_psi = report.samples.iter().map(|r| r.psi.unwrap()).sum::<f64>() / 5.0;
    let mean_phi = report.samples.iter().map(|r| r.phi.unwrap()).sum::<f64>() / 5.0;
    assert_eq!(report.ws, mean_psi);
    assert_eq!(report.sws, mean_phi);
    assert_eq!(report.evsi, mean_phi - mean_psi);
    assert_eq!(report.seed, Some(21));

    // Same plan, same report; reversed sample order, same means.
    let again = estimate(&plan, &inst, &belief, &quick_options()).unwrap();
    assert_eq!(again, report);
    let mut reals = sample_realizations(&plan, &cell).unwrap();
    reals.reverse();
    let rev = estimate_realizations(&cell, &belief, &reals, &quick_options()).unwrap();
    assert!((rev.ws - report.ws).abs() <= 1e-9 * report.ws.abs());
    assert!((rev.sws - report.sws).abs() <= 1e-9 * report.sws.abs());
}

#[test]
fn zero_demand_plan_is_all_zero() {
    let inst = base_city();
    let plan = SamplingPlan::new(3, 5, vec![0.5; 4], 0.0, 0.5);
    let report = estimate(&plan, &inst, &plan.belief(&inst), &quick_options()).unwrap();
    assert_eq!((report.ws, report.sws, report.evsi), (0.0, 0.0, 0.0));
}

#[test]
fn table_realization_report() {
    let inst = golden_instance();
    let belief = golden_belief();
    let opts = EstimateOptions::default();
    let report = estimate_realizations(&inst, &belief, &[golden_realization()], &opts).unwrap();
    let rec = &report.samples[0];
    let (psi, phi) = (rec.psi.unwrap(), rec.phi.unwrap());
    assert!(psi <= phi, "{psi} {phi}");
    assert!((phi - 4635.4).abs() <= 0.05 * 4635.4);
    assert_eq!(report.ws_se, None);
    assert!(report.integer_flows);
}

#[test]
fn bad_plans_are_rejected() {
    let inst = base_city();
    let ok = SamplingPlan::new(2, 1, vec![0.5; 4], 1.0, 0.5);
    assert!(sample_realizations(
        &SamplingPlan {
            samples: 0,
            ..ok.clone()
        },
        &inst
    )
    .is_err());
    assert!(sample_realizations(
        &SamplingPlan {
            spread_low: 1.0,
            ..ok.clone()
        },
        &inst
    )
    .is_err());
    assert!(sample_realizations(
        &SamplingPlan {
            h0: vec![0.5; 3],
            ..ok.clone()
        },
        &inst
    )
    .is_err());
    assert!(sample_realizations(
        &SamplingPlan {
            kappa_prob: vec![0.5, 0.5, 0.5],
            ..ok
        },
        &inst
    )
    .is_err());
}
