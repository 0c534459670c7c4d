//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use intervene_core::design::{delta_bar, deviation_stats, DeviationStats};
use intervene_core::games::{FlowControl, PacketDrop};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The four-user flow game of the reference experiments.
pub fn reference_flow(a0_max: f64) -> FlowControl {
    FlowControl::new(10.0, vec![2.0, 2.0, 3.0, 3.0], vec![2.5; 4], a0_max).unwrap()
}

pub fn random_flow(rng: &mut impl Rng, n: usize) -> FlowControl {
    let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let a_max: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let total: f64 = a_max.iter().sum();
    let mu = total * rng.gen_range(1.0..1.5);
    let a0 = rng.gen_range(0.0..mu);
    FlowControl::new(mu, beta, a_max, a0).unwrap()
}

pub fn random_packet_drop(rng: &mut impl Rng, n: usize) -> PacketDrop {
    let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.5)).collect();
    let a_max: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let total: f64 = a_max.iter().sum();
    PacketDrop::new(total * rng.gen_range(1.0..1.5), beta, a_max).unwrap()
}

/// A point on the simplex strictly above the punishment floor, with
/// normalized coordinates at least `margin` above it.
pub fn random_target(rng: &mut impl Rng, stats: &DeviationStats, margin: f64) -> Option<Vec<f64>> {
    let n = stats.n();
    let low: Vec<f64> = (0..n).map(|i| stats.floor()[i] / stats.v_bar[i] + margin).collect();
    let room = 1.0 - low.iter().sum::<f64>();
    if room <= 0.0 {
        return None;
    }
    let e: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    Some((0..n).map(|i| stats.v_bar[i] * (low[i] + room * e[i] / s)).collect())
}

/// A random flow game and target with a discount bound below `max_bound`.
pub fn random_instance(rng: &mut impl Rng, max_bound: f64) -> (FlowControl, DeviationStats, Vec<f64>, f64) {
    loop {
        let n = rng.gen_range(2..=4);
        let game = random_flow(rng, n);
        let Ok(stats) = deviation_stats(&game) else { continue };
        let Some(target) = random_target(rng, &stats, 0.02) else { continue };
        let d = delta_bar(&stats, &target);
        if d < max_bound {
            return (game, stats, target, d);
        }
    }
}

/// Every box corner and interior grid point along one axis.
pub fn axis(cap: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |k| cap * k as f64 / (points - 1) as f64)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
