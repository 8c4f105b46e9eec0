mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rideshare_evsi::follower::*;
use rideshare_evsi::model::*;
use rideshare_evsi::oracle::{follower_grid_oracle, FlowGrid};
use rideshare_evsi::{CityInstance, FlowMatrix, FollowerBelief, PriceVector, Realization};

use common::*;

/// Two zones whose demand at the drawn prices is integral, so every kink of
/// the shared cost sits on the integer flow lattice.
fn lattice_instance(rng: &mut ChaCha8Rng) -> (CityInstance, Realization, PriceVector) {
    let mut inst = random_instance(rng, 2);
    inst.x0 = vec![rng.gen_range(1..100) as f64, rng.gen_range(1..100) as f64];
    let p = random_prices(rng, &inst);
    let mut d0 = Vec::new();
    for i in 0..2 {
        let (a, b) = demand_affine(&inst, i);
        d0.push(rng.gen_range(0..200) as f64 / (a + b * p[i]));
    }
    let real = Realization {
        y: (0..2).map(|_| rng.gen_range(0..40) as f64).collect(),
        d0,
    };
    (inst, real, PriceVector::new(p))
}

#[test]
fn shared_solver_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let (inst, real, p) = lattice_instance(&mut rng);
        let sol = solve_shared(&p, &real, &inst).unwrap();
        let grid = follower_grid_oracle(&p, &inst, FollowerInfo::Shared(&real), FlowGrid::Integer).unwrap();
        assert!(grid.points <= 10_000);
        assert!(
            (sol.value - grid.value).abs() <= 1e-4,
            "{} vs {}",
            sol.value,
            grid.value
        );
    }
}

#[test]
fn integer_enumeration_counts_points() {
    let mut inst = random_instance(&mut ChaCha8Rng::seed_from_u64(1), 2);
    inst.x0 = vec![3.0, 2.0];
    let real = Realization {
        y: vec![1.0, 2.0],
        d0: vec![6.0, 1.0],
    };
    let p = PriceVector::new(vec![4.0, 5.0]);
    let g = follower_grid_oracle(&p, &inst, FollowerInfo::Shared(&real), FlowGrid::Integer).unwrap();
    assert_eq!(g.points, 12);
    let mut best = f64::INFINITY;
    for a in 0..=3 {
        for b in 0..=2 {
            let v = FlowMatrix::from_arcs(2, &[(0, 1, a as f64), (1, 0, b as f64)]);
            best = best.min(follower_cost_shared(&p, &v, &real, &inst).unwrap());
        }
    }
    assert_eq!(g.value, best);
}

#[test]
fn shared_solution_beats_random_flows() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let inst = random_instance(&mut rng, 4);
        let real = random_realization(&mut rng, &inst);
        let p = PriceVector::new(random_prices(&mut rng, &inst));
        let sol = solve_shared(&p, &real, &inst).unwrap();
        assert!(sol.kkt_residual <= 1e-6, "{}", sol.kkt_residual);
        for _ in 0..100 {
            let mut v = FlowMatrix::zeros(4);
            for i in 0..4 {
                let share: f64 = rng.gen();
                let w: Vec<f64> = (0..4).map(|j| if i == j { 0.0 } else { rng.gen() }).collect();
                let s: f64 = w.iter().sum();
                for j in 0..4 {
                    v.v[i][j] = inst.x0[i] * share * w[j] / s;
                }
            }
            assert!(sol.value <= follower_cost_shared(&p, &v, &real, &inst).unwrap() + 1e-9);
        }
    }
}

#[test]
fn expensive_relocation_keeps_drivers_home() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut inst = random_instance(&mut rng, 3);
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                inst.alpha[i][j] = 100.0;
            }
        }
    }
    let real = random_realization(&mut rng, &inst);
    let p = PriceVector::new(random_prices(&mut rng, &inst));
    let sol = solve_shared(&p, &real, &inst).unwrap();
    assert!(sol.v.v.iter().flatten().all(|&x| x == 0.0));
    let belief = random_belief(&mut rng, &real.d0, 2);
    let sol = solve_scenario(&p, &belief, &inst).unwrap();
    assert!(sol.v.v.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn scenario_solver_matches_dense_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let mut inst = random_instance(&mut rng, 2);
        inst.x0 = vec![rng.gen_range(2..20) as f64, rng.gen_range(2..20) as f64];
        inst.ybar = rng.gen_range(100.0..300.0);
        inst.alpha[0][1] = rng.gen_range(0.1..2.0);
        inst.alpha[1][0] = rng.gen_range(0.1..2.0);
        let real = random_realization(&mut rng, &inst);
        let belief = random_belief(&mut rng, &real.d0, 2);
        let p = PriceVector::new(random_prices(&mut rng, &inst));
        let sol = solve_scenario(&p, &belief, &inst).unwrap();
        assert_eq!(sol.status, FollowerStatus::Optimal);
        let grid = follower_grid_oracle(&p, &inst, FollowerInfo::Belief(&belief), FlowGrid::Steps(800)).unwrap();
        // The grid can only do worse; it is fine enough to come within 1e-4.
        assert!(sol.value <= grid.value + 1e-9, "{} vs {}", sol.value, grid.value);
        assert!(grid.value - sol.value <= 1e-4, "{} vs {}", sol.value, grid.value);
    }
}

#[test]
fn scenario_solver_stationarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3);
        let real = random_realization(&mut rng, &inst);
        let belief = random_belief(&mut rng, &real.d0, 3);
        let p = PriceVector::new(random_prices(&mut rng, &inst));
        let sol = solve_scenario(&p, &belief, &inst).unwrap();
        assert!(sol.kkt_residual <= 1e-5, "{}", sol.kkt_residual);
        // Stationarity written out with the returned multipliers. Moving a
        // driver from i to j lowers x_i and raises x_j, hence the order.
        let x = allocate(&inst.x0, &sol.v).unwrap();
        let slope = |i: usize| -> f64 {
            (0..belief.m)
                .map(|k| {
                    let d = demand(p.p[i], belief.d0_belief[i][k], &inst, i).unwrap();
                    p.p[i] * beta_ws(d, x[i], inst.ybar, inst.c, belief.prob[k])
                })
                .sum()
        };
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let r = slope(j) - slope(i) + inst.alpha[i][j] - sol.lambda[i][j] + sol.gamma[i];
                    assert!(r.abs() <= 1e-5, "arc {i}->{j}: {r}");
                }
            }
        }
    }
}

#[test]
fn gradient_pointing_inward_at_zero_keeps_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut inst = random_instance(&mut rng, 3);
    // No zone is short of drivers, so moving anyone only costs.
    let belief = FollowerBelief::certain(&[0.0, 1.0, 2.0]);
    inst.alpha[0][1] = 0.01;
    let p = PriceVector::new(vec![5.0; 3]);
    let sol = solve_scenario(&p, &belief, &inst).unwrap();
    assert!(sol.v.v.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn perturbed_flows_fail_the_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut inst = random_instance(&mut rng, 2);
    inst.alpha[0][1] = 20.0;
    inst.alpha[1][0] = 20.0;
    let real = random_realization(&mut rng, &inst);
    let belief = random_belief(&mut rng, &real.d0, 2);
    let p = PriceVector::new(random_prices(&mut rng, &inst));
    let moved = FlowMatrix::from_arcs(2, &[(0, 1, 1.0)]);
    let zero = FlowMatrix::zeros(2);
    for info in [FollowerInfo::Shared(&real), FollowerInfo::Belief(&belief)] {
        assert!(kkt_residual(&p, &zero, info, &inst).unwrap() <= 1e-6);
        assert!(kkt_residual(&p, &moved, info, &inst).unwrap() > 1e-3);
    }
}

#[test]
fn multipliers_respect_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3);
        let pmax = inst.p_max_overall();
        let real = random_realization(&mut rng, &inst);
        let m = 2;
        let belief = random_belief(&mut rng, &real.d0, m);
        let p = PriceVector::new(random_prices(&mut rng, &inst));
        let ws = solve_scenario(&p, &belief, &inst).unwrap();
        let sws = solve_shared(&p, &real, &inst).unwrap();
        for (sol, lam, gam) in [
            (&ws, 4.0 * m as f64 * pmax, 2.0 * m as f64 * pmax),
            (&sws, 4.0 * pmax, 2.0 * pmax),
        ] {
            assert!(sol.gamma.iter().all(|&g| (0.0..=gam).contains(&g)), "{:?}", sol.gamma);
            assert!(
                sol.lambda.iter().flatten().all(|&l| (0.0..=lam).contains(&l)),
                "{:?}",
                sol.lambda
            );
        }
    }
}

#[test]
fn displayed_shared_flows_cost() {
    // With the bundled distances the printed flows need not be optimal for
    // the printed prices; the solver must do at least as well.
    let inst = golden_instance();
    let real = golden_realization();
    let p = PriceVector::new(vec![6.80, 9.50, 6.94, 9.54]);
    let sol = solve_shared(&p, &real, &inst).unwrap();
    let printed = FlowMatrix::from_arcs(4, &[(0, 3, 107.0), (2, 1, 330.0), (2, 3, 68.0)]);
    let cost = follower_cost_shared(&p, &printed, &real, &inst).unwrap();
    assert!(sol.value <= cost + 1e-9);
    assert!(sol.kkt_residual <= 1e-6);
}

#[test]
fn optimistic_response_is_on_the_optimal_face() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3);
        let real = random_realization(&mut rng, &inst);
        let p = PriceVector::new(random_prices(&mut rng, &inst));
        let plain = solve_shared(&p, &real, &inst).unwrap();
        let (opt, revenue) = solve_shared_optimistic(&p, &real, &inst).unwrap();
        assert!((opt.value - plain.value).abs() <= 1e-7 * (1.0 + plain.value.abs()));
        let base = leader_revenue(&p, &plain.v, &real, &inst).unwrap();
        assert!(revenue >= base - 1e-7 * (1.0 + base));
    }
}
