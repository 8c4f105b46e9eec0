#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rideshare_evsi::{CityInstance, FollowerBelief, Realization};

pub const KM: [[f64; 4]; 4] = [
    [0.0, 7.0, 15.0, 14.0],
    [7.0, 0.0, 16.0, 21.0],
    [15.0, 16.0, 0.0, 20.0],
    [14.0, 21.0, 20.0, 0.0],
];

pub fn golden_instance() -> CityInstance {
    CityInstance {
        n: 4,
        alpha: KM.iter().map(|r| r.iter().map(|d| d * 1.10).collect()).collect(),
        p_min: vec![2.5; 4],
        p_max: vec![12.5; 4],
        c: 0.75,
        delta: 0.9,
        x0: vec![107.0, 283.0, 399.0, 211.0],
        ybar: 750.0,
    }
}

pub fn golden_realization() -> Realization {
    Realization {
        y: vec![444.55, 296.68, 420.20, 568.07],
        d0: vec![510.0, 1945.0, 1010.0, 1535.0],
    }
}

pub fn golden_belief() -> FollowerBelief {
    FollowerBelief::scaled(&golden_realization().d0, &[0.7, 1.0, 1.3], &[0.25, 0.5, 0.25])
}

/// A small random city with integral supplies.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> CityInstance {
    let mut alpha = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                alpha[i][j] = rng.gen_range(0.5..6.0);
            }
        }
    }
    CityInstance {
        n,
        alpha,
        p_min: vec![2.5; n],
        p_max: vec![12.5; n],
        c: 0.75,
        delta: 0.9,
        x0: (0..n).map(|_| rng.gen_range(5..60) as f64).collect(),
        ybar: rng.gen_range(20.0..80.0),
    }
}

pub fn random_realization(rng: &mut ChaCha8Rng, inst: &CityInstance) -> Realization {
    Realization {
        y: (0..inst.n).map(|_| rng.gen_range(0.0..inst.ybar)).collect(),
        d0: (0..inst.n).map(|_| rng.gen_range(0.0..250.0)).collect(),
    }
}

/// Two or more believed demand levels around a perturbed copy of `d0`.
pub fn random_belief(rng: &mut ChaCha8Rng, d0: &[f64], m: usize) -> FollowerBelief {
    let anchor: Vec<f64> = d0.iter().map(|d| d * rng.gen_range(0.6..1.4)).collect();
    let kappa: Vec<f64> = (0..m).map(|k| 0.7 + 0.6 * k as f64 / (m.max(2) - 1) as f64).collect();
    let mut prob: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = prob.iter().sum();
    prob.iter_mut().for_each(|p| *p /= s);
    FollowerBelief::scaled(&anchor, &kappa, &prob)
}

pub fn random_prices(rng: &mut ChaCha8Rng, inst: &CityInstance) -> Vec<f64> {
    (0..inst.n)
        .map(|i| rng.gen_range(inst.p_min[i]..=inst.p_max[i]))
        .collect()
}
