//! Brute-force reference for the counting distribution.
//!
//! Each basis ket is written as a polynomial in creation operators acting on
//! vacuum. Linear optical elements substitute every creation operator by a
//! linear combination of output creation operators; the product is expanded
//! term by term and the resulting monomials are converted back into Fock
//! amplitudes. Coefficients carry a first-order detuning derivative (dual
//! numbers) so the oracle also yields dP/dΔ without finite differences.
//!
//! No closed-form combinatorics are used here. Cost grows exponentially with
//! the photon number, hence [`ORACLE_N_MAX`].

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{outcome_count, outcome_index, OutcomeDistribution, ProbeState};
use crate::error::{Error, Result};
use crate::medium::ArmResponse;

pub const ORACLE_N_MAX: usize = 8;

/// Sign convention of the final 50/50 splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitterConvention {
    /// a† → (c† + d†)/√2, b† → (c† − d†)/√2.
    #[default]
    Standard,
    /// a† → (c† + d†)/√2, b† → (d† − c†)/√2.
    Mirrored,
}

/// Complex value with its derivative along the detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual {
    v: Complex64,
    d: Complex64,
}

impl Dual {
    const ZERO: Dual = Dual {
        v: Complex64::new(0.0, 0.0),
        d: Complex64::new(0.0, 0.0),
    };

    fn constant(v: Complex64) -> Self {
        Dual {
            v,
            d: Complex64::new(0.0, 0.0),
        }
    }

    fn real(v: f64) -> Self {
        Self::constant(Complex64::new(v, 0.0))
    }

    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.v * o.d + self.d * o.v,
        }
    }

    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }

    fn is_zero(&self) -> bool {
        self.v == Complex64::new(0.0, 0.0) && self.d == Complex64::new(0.0, 0.0)
    }
}

// Modes: 0 = ensemble arm, 1 = reference arm, 2 = loss. After the splitter
// modes 0 and 1 are relabelled as output ports c and d.
const MODES: usize = 3;
type Occupation = [usize; MODES];
type Ket = BTreeMap<Occupation, Dual>;

/// Maps each input creation operator to Σ_o U[i][o] o†.
type ModeMap = [Vec<(usize, Dual)>; MODES];

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Applies a linear mode transformation to a Fock-basis ket.
fn evolve(ket: &Ket, map: &ModeMap) -> Ket {
    let mut out = Ket::new();
    for (occ, amp) in ket {
        // |n⟩ = Π (a_i†)^{n_i} / √(n_i!) |0⟩, expanded as a polynomial whose
        // keys are exponents of the output creation operators.
        let norm = occ.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
        let mut poly: BTreeMap<Occupation, Dual> = BTreeMap::new();
        poly.insert([0; MODES], amp.mul(Dual::real(1.0 / norm)));
        for (mode, &count) in occ.iter().enumerate() {
            for _ in 0..count {
                let mut next: BTreeMap<Occupation, Dual> = BTreeMap::new();
                for (exps, coeff) in &poly {
                    for &(target, u) in &map[mode] {
                        let mut e = *exps;
                        e[target] += 1;
                        let slot = next.entry(e).or_insert(Dual::ZERO);
                        *slot = slot.add(coeff.mul(u));
                    }
                }
                poly = next;
            }
        }
        // Π (o†)^{m_o} |0⟩ = √(Π m_o!) |m⟩.
        for (exps, coeff) in poly {
            let scale = exps.iter().map(|&m| factorial(m)).product::<f64>().sqrt();
            let slot = out.entry(exps).or_insert(Dual::ZERO);
            *slot = slot.add(coeff.mul(Dual::real(scale)));
        }
    }
    out.retain(|_, a| !a.is_zero());
    out
}

fn attenuation_map(arm: &ArmResponse) -> ModeMap {
    let t = arm.transmissivity;
    let dt = arm.d_transmissivity;
    let sqrt_t = t.sqrt();
    let sqrt_r = (1.0 - t).max(0.0).sqrt();
    // d√T = dT / (2√T), d√(1−T) = −dT / (2√(1−T)).
    let d_sqrt_t = dt / (2.0 * sqrt_t);
    let d_sqrt_r = if sqrt_r > 0.0 {
        -dt / (2.0 * sqrt_r)
    } else {
        0.0
    };
    let phase = Complex64::from_polar(1.0, arm.phase);
    let i = Complex64::new(0.0, 1.0);
    let transmit = Dual {
        v: phase * sqrt_t,
        d: phase * (d_sqrt_t + i * arm.d_phase * sqrt_t),
    };
    let scatter = Dual {
        v: Complex64::new(sqrt_r, 0.0),
        d: Complex64::new(d_sqrt_r, 0.0),
    };
    [
        vec![(0, transmit), (2, scatter)],
        vec![(1, Dual::real(1.0))],
        vec![(2, Dual::real(1.0))],
    ]
}

fn splitter_map(convention: SplitterConvention) -> ModeMap {
    let h = Dual::real(std::f64::consts::FRAC_1_SQRT_2);
    let mh = Dual::real(-std::f64::consts::FRAC_1_SQRT_2);
    let second = match convention {
        SplitterConvention::Standard => vec![(0, h), (1, mh)],
        SplitterConvention::Mirrored => vec![(0, mh), (1, h)],
    };
    [vec![(0, h), (1, h)], second, vec![(2, Dual::real(1.0))]]
}

/// Counting distribution by explicit Fock-space evolution.
pub fn distribution_oracle(state: &ProbeState, arm: &ArmResponse) -> Result<OutcomeDistribution> {
    distribution_oracle_with(state, arm, SplitterConvention::Standard)
}

pub fn distribution_oracle_with(
    state: &ProbeState,
    arm: &ArmResponse,
    convention: SplitterConvention,
) -> Result<OutcomeDistribution> {
    let n = state.n_total();
    if n > ORACLE_N_MAX {
        return Err(Error::PhotonNumberTooLarge {
            n,
            max: ORACLE_N_MAX,
        });
    }
    let mut ket = Ket::new();
    for (k, &psi) in state.coeffs().iter().enumerate() {
        if psi != Complex64::new(0.0, 0.0) {
            ket.insert([n - k, k, 0], Dual::constant(psi));
        }
    }
    let ket = evolve(&ket, &attenuation_map(arm));
    let ket = evolve(&ket, &splitter_map(convention));

    let mut probs = vec![0.0; outcome_count(n)];
    let mut dprobs = vec![0.0; outcome_count(n)];
    for ([n1, n2, _lost], amp) in ket {
        let i = outcome_index(n1, n2);
        probs[i] += amp.v.norm_sqr();
        dprobs[i] += 2.0 * (amp.v.conj() * amp.d).re;
    }
    OutcomeDistribution::from_parts(n, probs, dprobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_transmitting_single_photon() {
        let d = distribution_oracle(
            &ProbeState::basis(1, 0).unwrap(),
            &ArmResponse::fixed(0.5, 2.1).unwrap(),
        )
        .unwrap();
        assert!((d.prob(0, 0) - 0.5).abs() < 1e-15);
        assert!((d.prob(1, 0) - 0.25).abs() < 1e-15);
        assert!((d.prob(0, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn noon_loses_everything_with_binomial_weight() {
        let n = 4;
        let t = 0.6;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        coeffs[n] = coeffs[0];
        let state = ProbeState::new(coeffs).unwrap();
        let d = distribution_oracle(&state, &ArmResponse::fixed(t, 0.3).unwrap()).unwrap();
        // Only the |N,0⟩ branch can lose all N photons.
        assert!((d.prob(0, 0) - 0.5 * (1.0f64 - t).powi(n as i32)).abs() < 1e-15);
    }

    #[test]
    fn lossless_conserves_photon_number() {
        let state = ProbeState::normalized(
            (0..=3)
                .map(|k| Complex64::new(1.0 + k as f64, -0.5 * k as f64))
                .collect(),
        )
        .unwrap();
        let d = distribution_oracle(&state, &ArmResponse::fixed(1.0, 0.7).unwrap()).unwrap();
        let detected: f64 = d
            .iter()
            .filter(|(a, b, _, _)| a + b == 3)
            .map(|x| x.2)
            .sum();
        assert!((detected - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dual_derivative_of_single_photon() {
        let arm = ArmResponse::new(0.4, 0.1, 3e-9, -1e-9).unwrap();
        let d = distribution_oracle(&ProbeState::basis(1, 0).unwrap(), &arm).unwrap();
        assert!((d.dprob(0, 0) + 3e-9).abs() < 1e-22);
        assert!((d.dprob(1, 0) - 1.5e-9).abs() < 1e-22);
    }

    #[test]
    fn rejects_large_photon_numbers() {
        let s = ProbeState::basis(ORACLE_N_MAX + 1, 0).unwrap();
        assert!(distribution_oracle(&s, &ArmResponse::fixed(0.5, 0.0).unwrap()).is_err());
    }
}
