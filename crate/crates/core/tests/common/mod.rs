#![allow(dead_code)]

use ecgfuse_core::{EmbeddingParams, TimeSeries, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn sine(len: usize, fs: f64, hz: f64) -> TimeSeries {
    let v = (0..len).map(|i| (2.0 * std::f64::consts::PI * hz * (i as f64 / fs)).sin()).collect();
    TimeSeries::new(v, fs, "sine").unwrap()
}

/// x component of the Lorenz system, RK4 with dt = 0.01 from (1, 1, 1)
/// after 1000 transient steps.
pub fn lorenz_x(len: usize) -> TimeSeries {
    let f = |s: [f64; 3]| [10.0 * (s[1] - s[0]), s[0] * (28.0 - s[2]) - s[1], s[0] * s[1] - (8.0 / 3.0) * s[2]];
    let dt = 0.01;
    let mut s = [1.0, 1.0, 1.0];
    let mut out = Vec::with_capacity(len);
    for i in 0..1000 + len {
        let k1 = f(s);
        let k2 = f([s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1], s[2] + 0.5 * dt * k1[2]]);
        let k3 = f([s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1], s[2] + 0.5 * dt * k2[2]]);
        let k4 = f([s[0] + dt * k3[0], s[1] + dt * k3[1], s[2] + dt * k3[2]]);
        for j in 0..3 {
            s[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if i >= 1000 {
            out.push(s[0]);
        }
    }
    TimeSeries::new(out, 100.0, "lorenz_x").unwrap()
}

pub fn white_noise(len: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    TimeSeries::new((0..len).map(|_| n.sample(&mut rng)).collect(), 1.0, "noise").unwrap()
}

pub fn logistic(len: usize, r: f64, x0: f64) -> TimeSeries {
    let mut x = x0;
    let v = (0..len)
        .map(|_| {
            x = r * x * (1.0 - x);
            x
        })
        .collect();
    TimeSeries::new(v, 1.0, "logistic").unwrap()
}

pub fn trajectory(states: Vec<Vec<f64>>) -> Trajectory {
    let m = states[0].len();
    Trajectory::new(states, EmbeddingParams::new(m, 1).unwrap(), "t", 1.0).unwrap()
}
