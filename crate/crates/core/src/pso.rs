//! Constricted particle-swarm search over probe-state coefficients.
//!
//! Velocity and position updates:
//!
//! ```text
//! v' = χ [v + c_g r_g (x_g − x) + c_ℓ r_ℓ (x_ℓ − x)]
//! x' = x + v'
//! ```
//!
//! Positions are real coordinates of the coefficient vector and are projected
//! back onto the unit sphere after every move. Every random draw comes from a
//! generator keyed by (seed, iteration, particle), so parallel evaluation
//! cannot change the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::{DetuningGrid, FisherEvaluator};
use crate::interferometer::{CountingKernel, ProbeState};
use crate::medium::Medium;

pub const DEFAULT_CONSTRICTION: f64 = 0.729;
pub const DEFAULT_ACCELERATION: f64 = 2.05;
pub const DEFAULT_PARTICLES: usize = 10;
pub const DEFAULT_ITERATIONS: usize = 100;

/// Update coefficients shared by every particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmCoefficients {
    pub constriction: f64,
    pub c_global: f64,
    pub c_local: f64,
    /// Draw r_g, r_ℓ per coordinate instead of once per particle.
    pub per_dimension_rng: bool,
}

impl Default for SwarmCoefficients {
    fn default() -> Self {
        SwarmCoefficients {
            constriction: DEFAULT_CONSTRICTION,
            c_global: DEFAULT_ACCELERATION,
            c_local: DEFAULT_ACCELERATION,
            per_dimension_rng: false,
        }
    }
}

/// Swarm driver settings independent of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmSettings {
    pub coefficients: SwarmCoefficients,
    pub n_particles: usize,
    pub n_iterations: usize,
    pub seed: u64,
}

impl SwarmSettings {
    pub fn validate(&self) -> Result<()> {
        let c = &self.coefficients;
        for (name, v) in [
            ("constriction", c.constriction),
            ("c_global", c.c_global),
            ("c_local", c.c_local),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.n_particles == 0 {
            return Err(Error::InvalidConfig("need at least one particle".into()));
        }
        Ok(())
    }
}

/// Settings for optimizing an N-photon probe state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub constriction: f64,
    pub c_global: f64,
    pub c_local: f64,
    pub n_particles: usize,
    pub n_iterations: usize,
    pub seed: u64,
    pub n_total: usize,
    pub objective_grid: DetuningGrid,
    /// Rescan around each coarse maximum; narrow peaks otherwise fall
    /// between grid points.
    pub refine_peak: bool,
    /// Search complex coefficients (2N+2 real coordinates).
    pub complex_coeffs: bool,
    pub per_dimension_rng: bool,
}

impl PsoConfig {
    /// Default swarm on the default detuning grid of `medium`.
    pub fn new(n_total: usize, medium: &Medium, seed: u64) -> Self {
        PsoConfig {
            constriction: DEFAULT_CONSTRICTION,
            c_global: DEFAULT_ACCELERATION,
            c_local: DEFAULT_ACCELERATION,
            n_particles: DEFAULT_PARTICLES,
            n_iterations: DEFAULT_ITERATIONS,
            seed,
            n_total,
            objective_grid: DetuningGrid::default_for(medium),
            refine_peak: true,
            complex_coeffs: false,
            per_dimension_rng: false,
        }
    }

    pub fn swarm(&self) -> SwarmSettings {
        SwarmSettings {
            coefficients: SwarmCoefficients {
                constriction: self.constriction,
                c_global: self.c_global,
                c_local: self.c_local,
                per_dimension_rng: self.per_dimension_rng,
            },
            n_particles: self.n_particles,
            n_iterations: self.n_iterations,
            seed: self.seed,
        }
    }

    /// Real coordinates per particle.
    pub fn dimension(&self) -> usize {
        let d = self.n_total + 1;
        if self.complex_coeffs {
            2 * d
        } else {
            d
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.swarm().validate()?;
        if self.n_total > crate::interferometer::N_MAX {
            return Err(Error::PhotonNumberTooLarge {
                n: self.n_total,
                max: crate::interferometer::N_MAX,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best_state: ProbeState,
    /// Peak Fisher information (s²).
    pub best_objective: f64,
    /// Detuning at which the peak occurs (rad/s).
    pub best_delta: f64,
    /// Global best after initialization, then after each iteration.
    pub objective_trace: Vec<f64>,
    pub evaluations: usize,
}

/// Generator for one particle at one iteration. Iteration 0 is the
/// initialization.
pub fn particle_rng(seed: u64, iteration: usize, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | particle as u64);
    rng
}

/// Moves one particle. Returns nothing; `position` and `velocity` are
/// updated in place.
pub fn update_particle<R: Rng + ?Sized>(
    position: &mut [f64],
    velocity: &mut [f64],
    local_best: &[f64],
    global_best: &[f64],
    coefficients: &SwarmCoefficients,
    rng: &mut R,
) {
    let draw = |rng: &mut R| -> (f64, f64) { (rng.random::<f64>(), rng.random::<f64>()) };
    let (mut r_g, mut r_l) = draw(rng);
    for i in 0..position.len() {
        if coefficients.per_dimension_rng && i > 0 {
            (r_g, r_l) = draw(rng);
        }
        let x = position[i];
        velocity[i] = coefficients.constriction
            * (velocity[i]
                + coefficients.c_global * r_g * (global_best[i] - x)
                + coefficients.c_local * r_l * (local_best[i] - x));
        position[i] = x + velocity[i];
    }
}

/// One synchronous update of the whole swarm, one generator per particle.
pub fn pso_step<R: Rng>(
    positions: &mut [Vec<f64>],
    velocities: &mut [Vec<f64>],
    local_bests: &[Vec<f64>],
    global_best: &[f64],
    coefficients: &SwarmCoefficients,
    rngs: &mut [R],
) {
    for (((x, v), l), rng) in positions
        .iter_mut()
        .zip(velocities.iter_mut())
        .zip(local_bests)
        .zip(rngs.iter_mut())
    {
        update_particle(x, v, l, global_best, coefficients, rng);
    }
}

/// Scales `x` to unit Euclidean norm; false if that is impossible.
pub fn project_to_sphere(x: &mut [f64]) -> bool {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 1e-300) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

/// Uniformly distributed point on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if project_to_sphere(&mut x) {
            return x;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmOutcome {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

fn evaluate_all<F>(positions: &[Vec<f64>], objective: &F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        positions.par_iter().map(|x| objective(x)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        positions.iter().map(|x| objective(x)).collect()
    }
}

/// Maximizes `objective` from the given starting positions.
///
/// `project` is applied after every move; when it fails the particle is put
/// back where it was and stopped.
pub fn maximize<F, P>(
    settings: &SwarmSettings,
    initial: Vec<Vec<f64>>,
    objective: F,
    project: P,
) -> Result<SwarmOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    P: Fn(&mut [f64]) -> bool,
{
    settings.validate()?;
    if initial.len() != settings.n_particles {
        return Err(Error::InvalidConfig(format!(
            "{} starting positions for {} particles",
            initial.len(),
            settings.n_particles
        )));
    }
    let dim = initial[0].len();
    if initial.iter().any(|x| x.len() != dim) {
        return Err(Error::InvalidConfig(
            "starting positions differ in dimension".into(),
        ));
    }

    let mut positions = initial;
    let mut velocities = vec![vec![0.0; dim]; settings.n_particles];
    let mut values = evaluate_all(&positions, &objective)?;
    let mut evaluations = positions.len();
    let mut local_bests = positions.clone();
    let mut local_values = values.clone();
    let mut best = argmax(&values);
    let mut global_best = positions[best].clone();
    let mut global_value = values[best];
    let mut trace = Vec::with_capacity(settings.n_iterations + 1);
    trace.push(global_value);

    for iteration in 1..=settings.n_iterations {
        let previous = positions.clone();
        let mut rngs: Vec<ChaCha8Rng> = (0..settings.n_particles)
            .map(|p| particle_rng(settings.seed, iteration, p))
            .collect();
        pso_step(
            &mut positions,
            &mut velocities,
            &local_bests,
            &global_best,
            &settings.coefficients,
            &mut rngs,
        );
        for (p, x) in positions.iter_mut().enumerate() {
            if !project(x) {
                x.copy_from_slice(&previous[p]);
                velocities[p].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        values = evaluate_all(&positions, &objective)?;
        evaluations += positions.len();
        for p in 0..settings.n_particles {
            if values[p] > local_values[p] {
                local_values[p] = values[p];
                local_bests[p].copy_from_slice(&positions[p]);
            }
        }
        best = argmax(&local_values);
        if local_values[best] > global_value {
            global_value = local_values[best];
            global_best.copy_from_slice(&local_bests[best]);
        }
        trace.push(global_value);
    }

    Ok(SwarmOutcome {
        best_position: global_best,
        best_value: global_value,
        trace,
        evaluations,
    })
}

/// First index of the largest value; NaN never wins.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Converts swarm coordinates into a probe state.
pub fn position_to_state(x: &[f64], complex: bool) -> Result<ProbeState> {
    let coeffs: Vec<Complex64> = if complex {
        let half = x.len() / 2;
        (0..half)
            .map(|k| Complex64::new(x[k], x[half + k]))
            .collect()
    } else {
        x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    };
    ProbeState::new(coeffs)
}

/// Searches N-photon probe states for the largest peak Fisher information.
pub fn optimize_state(medium: &Medium, config: &PsoConfig) -> Result<PsoResult> {
    config.validate()?;
    medium.validate()?;
    if config.n_total == 0 {
        let vacuum = ProbeState::basis(0, 0)?;
        return Ok(PsoResult {
            best_state: vacuum,
            best_objective: 0.0,
            best_delta: 0.0,
            objective_trace: vec![0.0],
            evaluations: 0,
        });
    }
    let kernel = CountingKernel::new(config.n_total)?;
    let grid = &config.objective_grid;
    let peak = |x: &[f64]| -> Result<(f64, f64)> {
        let state = position_to_state(x, config.complex_coeffs)?;
        let eval = FisherEvaluator::from_kernel(&kernel, &state, medium)?;
        if config.refine_peak {
            eval.refined_peak(grid)
        } else {
            eval.curve(grid).map(|c| (c.peak_delta, c.peak_value))
        }
    };

    let dim = config.dimension();
    let initial = (0..config.n_particles)
        .map(|p| random_unit_vector(dim, &mut particle_rng(config.seed, 0, p)))
        .collect();
    let outcome = maximize(
        &config.swarm(),
        initial,
        |x| peak(x).map(|(_, f)| f),
        project_to_sphere,
    )?;
    let (best_delta, _) = peak(&outcome.best_position)?;
    Ok(PsoResult {
        best_state: position_to_state(&outcome.best_position, config.complex_coeffs)?,
        best_objective: outcome.best_value,
        best_delta,
        objective_trace: outcome.trace,
        evaluations: outcome.evaluations,
    })
}

/// Runs one optimization per seed; results are in seed order.
pub fn optimize_seeds(
    medium: &Medium,
    config: &PsoConfig,
    seeds: &[u64],
) -> Result<Vec<PsoResult>> {
    seeds
        .iter()
        .map(|&seed| {
            let mut c = config.clone();
            c.seed = seed;
            optimize_state(medium, &c)
        })
        .collect()
}

/// Index of the run with the largest objective (first one on ties).
pub fn best_run(results: &[PsoResult]) -> Option<usize> {
    if results.is_empty() {
        return None;
    }
    let values: Vec<f64> = results.iter().map(|r| r.best_objective).collect();
    Some(argmax(&values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coefficients() -> SwarmCoefficients {
        SwarmCoefficients::default()
    }

    #[test]
    fn fixed_point() {
        let mut x = vec![0.3, -0.2, 0.5];
        let mut v = vec![0.0; 3];
        let anchor = x.clone();
        let mut rng = particle_rng(1, 1, 0);
        update_particle(&mut x, &mut v, &anchor, &anchor, &coefficients(), &mut rng);
        assert_eq!(x, anchor);
        assert_eq!(v, vec![0.0; 3]);
    }

    #[test]
    fn inertial_decay_without_attraction() {
        let c = SwarmCoefficients {
            c_global: 0.0,
            c_local: 0.0,
            ..coefficients()
        };
        let mut x = vec![1.0, 2.0];
        let mut v = vec![0.5, -1.0];
        let (l, g) = (vec![9.0, 9.0], vec![-9.0, 4.0]);
        update_particle(&mut x, &mut v, &l, &g, &c, &mut particle_rng(0, 1, 0));
        assert_eq!(v, vec![0.729 * 0.5, -0.729]);
        assert_eq!(x, vec![1.0 + 0.729 * 0.5, 2.0 - 0.729]);
    }

    #[test]
    fn per_dimension_draws_differ() {
        let c = SwarmCoefficients {
            per_dimension_rng: true,
            c_local: 0.0,
            ..coefficients()
        };
        let mut x = vec![0.0; 4];
        let mut v = vec![0.0; 4];
        let g = vec![1.0; 4];
        let l = x.clone();
        update_particle(&mut x, &mut v, &l, &g, &c, &mut particle_rng(3, 1, 0));
        assert!(v.windows(2).any(|w| w[0] != w[1]));
        let c = SwarmCoefficients {
            per_dimension_rng: false,
            ..c
        };
        let mut x = vec![0.0; 4];
        let mut v = vec![0.0; 4];
        let l = x.clone();
        update_particle(&mut x, &mut v, &l, &g, &c, &mut particle_rng(3, 1, 0));
        assert!(v.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn generators_are_keyed() {
        let a: f64 = particle_rng(7, 3, 2).random();
        let b: f64 = particle_rng(7, 3, 2).random();
        let c: f64 = particle_rng(7, 3, 3).random();
        let d: f64 = particle_rng(7, 4, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn projection() {
        let mut x = vec![3.0, 4.0];
        assert!(project_to_sphere(&mut x));
        assert_eq!(x, vec![0.6, 0.8]);
        assert!(!project_to_sphere(&mut [0.0, 0.0]));
        let u = random_unit_vector(5, &mut particle_rng(0, 0, 0));
        assert!((u.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_positions() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = position_to_state(&[h, 0.0, 0.0, h], true).unwrap();
        assert_eq!(s.n_total(), 1);
        assert_eq!(s.coeffs()[1], Complex64::new(0.0, h));
    }

    #[test]
    fn vacuum_is_trivial() {
        let m = Medium::sodium_d1(2.5e17).unwrap();
        let r = optimize_state(&m, &PsoConfig::new(0, &m, 0)).unwrap();
        assert_eq!(r.best_objective, 0.0);
        assert_eq!(r.best_state.n_total(), 0);
    }

    #[test]
    fn invalid_configs() {
        let m = Medium::sodium_d1(2.5e17).unwrap();
        let mut c = PsoConfig::new(2, &m, 0);
        c.n_particles = 0;
        assert!(optimize_state(&m, &c).is_err());
        let mut c = PsoConfig::new(2, &m, 0);
        c.constriction = -1.0;
        assert!(optimize_state(&m, &c).is_err());
        let c = PsoConfig::new(21, &m, 0);
        assert!(optimize_state(&m, &c).is_err());
    }
}
