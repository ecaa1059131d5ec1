//! Photon-counting statistics at the output of the Mach-Zehnder
//! interferometer.
//!
//! The arm state is Σ_k ψ_k |N−k, k⟩ where the first mode passes through the
//! atomic ensemble. That mode is attenuated to transmissivity `T` and picks
//! up phase `φ` per surviving photon, then both modes meet on a 50/50
//! splitter with the convention
//!
//! ```text
//! a† → (c† + d†)/√2,    b† → (c† − d†)/√2
//! ```
//!
//! and photon-number detectors count `n₁` photons in `c` and `n₂` in `d`.
//! Lost photons leave `N − n₁ − n₂` quanta in the (unobserved) loss mode.
//!
//! [`CountingKernel`] evaluates the closed-form combinatorial sum for
//! `P(n₁, n₂)`; [`oracle`] recomputes it by brute-force operator expansion.

pub mod oracle;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::ArmResponse;

/// Largest photon number accepted by the closed-form evaluator.
pub const N_MAX: usize = 20;

const NORM_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-10;
const PROB_SLACK: f64 = 1e-12;
const PROB_FLOOR: f64 = 1e-15;

/// Pure N-photon two-mode probe state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct ProbeState {
    /// ψ_k for k = 0..=N, amplitude of |N−k, k⟩.
    coeffs: Vec<Complex64>,
}

impl ProbeState {
    /// Wraps coefficients that are already normalized.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidState("empty coefficient vector".into()));
        }
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidState("non-finite coefficient".into()));
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm is {norm}, expected 1"
            )));
        }
        Ok(ProbeState { coeffs })
    }

    /// Rescales arbitrary non-zero coefficients onto the unit sphere.
    pub fn normalized(coeffs: Vec<Complex64>) -> Result<Self> {
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState(format!(
                "cannot normalize, norm {norm}"
            )));
        }
        Self::new(coeffs.into_iter().map(|c| c / norm).collect())
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Fock state |N−k, k⟩.
    pub fn basis(n_total: usize, k: usize) -> Result<Self> {
        if k > n_total {
            return Err(Error::InvalidState(format!(
                "k = {k} exceeds N = {n_total}"
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n_total + 1];
        coeffs[k] = Complex64::new(1.0, 0.0);
        Ok(ProbeState { coeffs })
    }

    pub fn n_total(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    /// Multiplies every coefficient by e^{iθ}.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let p = Complex64::from_polar(1.0, theta);
        ProbeState {
            coeffs: self.coeffs.iter().map(|c| c * p).collect(),
        }
    }
}

impl TryFrom<Vec<Complex64>> for ProbeState {
    type Error = Error;

    fn try_from(coeffs: Vec<Complex64>) -> Result<Self> {
        ProbeState::new(coeffs)
    }
}

impl From<ProbeState> for Vec<Complex64> {
    fn from(state: ProbeState) -> Self {
        state.coeffs
    }
}

/// Number of outcomes (n₁, n₂) with n₁ + n₂ ≤ N.
pub fn outcome_count(n_total: usize) -> usize {
    (n_total + 1) * (n_total + 2) / 2
}

/// Position of (n₁, n₂) in the outcome ordering: by detected photon number
/// m = n₁ + n₂, then by n₁.
pub fn outcome_index(n1: usize, n2: usize) -> usize {
    let m = n1 + n2;
    m * (m + 1) / 2 + n1
}

/// Iterates (n₁, n₂) in outcome order.
pub fn outcomes(n_total: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=n_total).flat_map(|m| (0..=m).map(move |n1| (n1, m - n1)))
}

/// Complete detection statistics, including outcomes where photons were lost.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    n_total: usize,
    probs: Vec<f64>,
    dprobs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Checks the invariants and clamps round-off.
    pub fn from_parts(n_total: usize, mut probs: Vec<f64>, dprobs: Vec<f64>) -> Result<Self> {
        let len = outcome_count(n_total);
        if probs.len() != len || dprobs.len() != len {
            return Err(Error::Invariant(format!(
                "expected {len} outcomes, got {} probabilities and {} derivatives",
                probs.len(),
                dprobs.len()
            )));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
                return Err(Error::Invariant(format!("probability {p} at outcome {i}")));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Invariant(format!("probabilities sum to {total}")));
        }
        let dsum: f64 = dprobs.iter().sum();
        let dscale: f64 = dprobs.iter().map(|d| d.abs()).sum();
        if !dsum.is_finite() || dsum.abs() > SUM_TOL * dscale.max(f64::MIN_POSITIVE) {
            return Err(Error::Invariant(format!(
                "derivatives sum to {dsum} (scale {dscale})"
            )));
        }
        for p in &mut probs {
            *p = p.clamp(0.0, 1.0);
            if *p < PROB_FLOOR {
                *p = 0.0;
            }
        }
        Ok(OutcomeDistribution {
            n_total,
            probs,
            dprobs,
        })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn prob(&self, n1: usize, n2: usize) -> f64 {
        if n1 + n2 > self.n_total {
            return 0.0;
        }
        self.probs[outcome_index(n1, n2)]
    }

    /// dP(n₁, n₂)/dΔ in seconds.
    pub fn dprob(&self, n1: usize, n2: usize) -> f64 {
        if n1 + n2 > self.n_total {
            return 0.0;
        }
        self.dprobs[outcome_index(n1, n2)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dprobs(&self) -> &[f64] {
        &self.dprobs
    }

    /// (n₁, n₂, P, dP/dΔ) in outcome order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        outcomes(self.n_total)
            .zip(self.probs.iter().zip(&self.dprobs))
            .map(|((n1, n2), (&p, &dp))| (n1, n2, p, dp))
    }
}

fn factorials() -> [f64; N_MAX + 1] {
    let mut table = [1u64; N_MAX + 1];
    for i in 1..=N_MAX {
        table[i] = table[i - 1] * i as u64;
    }
    table.map(|f| f as f64)
}

fn binomial(fact: &[f64; N_MAX + 1], n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    let (n, k) = (n as usize, k as usize);
    (fact[n] / (fact[k] * fact[n - k])).round()
}

#[derive(Debug, Clone)]
struct OutcomeTerms {
    /// Photons left in the loss mode, N − n₁ − n₂.
    lost: i32,
    /// Amplitude weight per basis index k; zero for k > n₁ + n₂.
    weights: Vec<f64>,
}

/// Precomputed combinatorial weights of the closed-form counting
/// distribution for one photon number.
///
/// For outcome (n₁, n₂) with m = n₁ + n₂ and ℓ = N − m the probability is
///
/// ```text
/// P = Σ_k Σ_k' ψ_k ψ*_k' g_k g_k' (1−T)^ℓ T^{(2m−k−k')/2} e^{−iφ(k−k')}
/// g_k = √(n₁! n₂! ℓ!) C(N−k, ℓ) / √(k!(N−k)!) 2^{−m/2}
///       Σ_u (−1)^{n₂−u} C(m−k, u) C(k, k+u−n₂)
/// ```
///
/// with u running from n₂−k to n₂ and out-of-range binomials equal to zero.
/// The double sum is what [`PreparedProbe`] evaluates, pair by pair.
#[derive(Debug, Clone)]
pub struct CountingKernel {
    n_total: usize,
    terms: Vec<OutcomeTerms>,
}

impl CountingKernel {
    pub fn new(n_total: usize) -> Result<Self> {
        if n_total > N_MAX {
            return Err(Error::PhotonNumberTooLarge {
                n: n_total,
                max: N_MAX,
            });
        }
        let fact = factorials();
        let n = n_total as i64;
        let terms = outcomes(n_total)
            .map(|(n1, n2)| {
                let (n1, n2) = (n1 as i64, n2 as i64);
                let m = n1 + n2;
                let lost = n - m;
                let prefactor = (fact[n1 as usize] * fact[n2 as usize] * fact[lost as usize])
                    .sqrt()
                    * 0.5f64.powf(m as f64 / 2.0);
                let weights = (0..=n)
                    .map(|k| {
                        if k > m {
                            return 0.0;
                        }
                        let split: f64 = ((n2 - k).max(0)..=n2)
                            .map(|u| {
                                let sign = if (n2 - u) % 2 == 0 { 1.0 } else { -1.0 };
                                sign * binomial(&fact, m - k, u) * binomial(&fact, k, k + u - n2)
                            })
                            .sum();
                        prefactor * binomial(&fact, n - k, lost) * split
                            / (fact[k as usize] * fact[(n - k) as usize]).sqrt()
                    })
                    .collect();
                OutcomeTerms {
                    lost: lost as i32,
                    weights,
                }
            })
            .collect();
        Ok(CountingKernel { n_total, terms })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Folds a probe state into the kernel so that repeated evaluation over
    /// a detuning grid only pays for the T and φ dependence.
    pub fn prepare(&self, state: &ProbeState) -> Result<PreparedProbe> {
        if state.n_total() != self.n_total {
            return Err(Error::InvalidState(format!(
                "state has N = {}, kernel expects N = {}",
                state.n_total(),
                self.n_total
            )));
        }
        let norm: f64 = state.coeffs().iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm is {norm}")));
        }
        let psi = state.coeffs();
        let outcomes = self
            .terms
            .iter()
            .map(|t| {
                let detected = self.n_total - t.lost as usize;
                let beta: Vec<Complex64> = (0..=detected).map(|k| psi[k] * t.weights[k]).collect();
                let mut pairs = Vec::new();
                for k in 0..=detected {
                    for kp in k..=detected {
                        let w = beta[k] * beta[kp].conj();
                        if w.re == 0.0 && w.im == 0.0 {
                            continue;
                        }
                        pairs.push(PairTerm {
                            weight: if k == kp { w } else { w * 2.0 },
                            powers: 2 * detected - k - kp,
                            shift: kp - k,
                        });
                    }
                }
                PreparedOutcome {
                    lost: t.lost,
                    pairs,
                }
            })
            .collect();
        Ok(PreparedProbe {
            n_total: self.n_total,
            outcomes,
        })
    }

    pub fn distribution(
        &self,
        state: &ProbeState,
        arm: &ArmResponse,
    ) -> Result<OutcomeDistribution> {
        self.prepare(state)?.distribution(arm)
    }
}

/// One (k, k') term of the double sum, folded with its mirror (k', k).
#[derive(Debug, Clone)]
struct PairTerm {
    /// ψ_k ψ*_k' g_k g_k', doubled off the diagonal.
    weight: Complex64,
    /// j + j' = 2m − k − k', the power of √T.
    powers: usize,
    /// k' − k ≥ 0.
    shift: usize,
}

#[derive(Debug, Clone)]
struct PreparedOutcome {
    lost: i32,
    pairs: Vec<PairTerm>,
}

/// A probe state combined with the counting weights of its photon number.
#[derive(Debug, Clone)]
pub struct PreparedProbe {
    n_total: usize,
    outcomes: Vec<PreparedOutcome>,
}

impl PreparedProbe {
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Outcome probabilities and their detuning derivatives through the
    /// chain rule dP/dΔ = ∂P/∂T · dT/dΔ + ∂P/∂φ · dφ/dΔ.
    ///
    /// Each pair contributes Re[w e^{iφ(k'−k)}] √T^{j+j'} to P. Summing the
    /// pairs directly keeps ∂P/∂φ free of the cancellation that the
    /// factorized |Σ_k …|² form suffers when T is small.
    pub fn distribution(&self, arm: &ArmResponse) -> Result<OutcomeDistribution> {
        let n = self.n_total;
        let t = arm.transmissivity;
        let sqrt_t = t.sqrt();
        let loss = 1.0 - t;
        let phases: Vec<Complex64> = (0..=n)
            .map(|s| Complex64::from_polar(1.0, arm.phase * s as f64))
            .collect();
        let roots: Vec<f64> = (0..=2 * n).map(|j| sqrt_t.powi(j as i32)).collect();

        let mut probs = Vec::with_capacity(self.outcomes.len());
        let mut dprobs = Vec::with_capacity(self.outcomes.len());
        for o in &self.outcomes {
            let (mut p, mut dp_dt, mut dp_dphi) = (0.0, 0.0, 0.0);
            for pair in &o.pairs {
                let z = pair.weight * phases[pair.shift] * roots[pair.powers];
                p += z.re;
                if pair.powers > 0 {
                    dp_dt += z.re * (0.5 * pair.powers as f64 / t);
                }
                if pair.shift > 0 {
                    dp_dphi -= z.im * pair.shift as f64;
                }
            }
            let lossy = loss.powi(o.lost);
            let dlossy_dt = if o.lost == 0 {
                0.0
            } else {
                -(o.lost as f64) * loss.powi(o.lost - 1)
            };
            probs.push(lossy * p);
            dprobs.push(
                (dlossy_dt * p + lossy * dp_dt) * arm.d_transmissivity
                    + lossy * dp_dphi * arm.d_phase,
            );
        }
        OutcomeDistribution::from_parts(n, probs, dprobs)
    }
}

/// Closed-form outcome distribution for one state and arm response.
pub fn detection_distribution(
    state: &ProbeState,
    arm: &ArmResponse,
) -> Result<OutcomeDistribution> {
    CountingKernel::new(state.n_total())?.distribution(state, arm)
}
