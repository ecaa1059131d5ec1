#![allow(dead_code)]

use fisherspec::interferometer::OutcomeDistribution;
use fisherspec::{ArmResponse, Medium, ProbeState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-like random pure state with complex coefficients.
pub fn random_state(n: usize, rng: &mut impl Rng) -> ProbeState {
    let coeffs: Vec<Complex64> = (0..=n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    ProbeState::normalized(coeffs).unwrap()
}

pub fn random_real_state(n: usize, rng: &mut impl Rng) -> ProbeState {
    let coeffs: Vec<Complex64> = (0..=n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    ProbeState::normalized(coeffs).unwrap()
}

pub fn random_arm(rng: &mut impl Rng) -> ArmResponse {
    let t = rng.random_range(0.05..=1.0);
    let phi = rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI);
    ArmResponse::new(
        t,
        phi,
        rng.random_range(-1e-8..1e-8),
        rng.random_range(-1e-8..1e-8),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Central difference of every outcome probability along the detuning.
pub fn finite_difference_dprobs(
    state: &ProbeState,
    medium: &Medium,
    delta: f64,
    h: f64,
) -> Vec<f64> {
    let eval = fisherspec::fisher::FisherEvaluator::new(state, medium).unwrap();
    let plus = eval.distribution(delta + h).unwrap();
    let minus = eval.distribution(delta - h).unwrap();
    plus.probs()
        .iter()
        .zip(minus.probs())
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect()
}

/// Unclamped probabilities via the raw pipeline (no 1e−15 floor), for
/// finite differencing near zero.
pub fn probs(dist: &OutcomeDistribution) -> Vec<f64> {
    dist.probs().to_vec()
}

/// Fisher information of two independent runs, from the explicit joint
/// distribution P(o₁, o₂) = P(o₁) P(o₂).
pub fn product_fisher(a: &OutcomeDistribution, b: &OutcomeDistribution) -> f64 {
    let mut pairs = Vec::new();
    for (p1, d1) in a.probs().iter().zip(a.dprobs()) {
        for (p2, d2) in b.probs().iter().zip(b.dprobs()) {
            pairs.push((p1 * p2, d1 * p2 + p1 * d2));
        }
    }
    fisherspec::fisher::fisher_from_outcomes(pairs)
}
