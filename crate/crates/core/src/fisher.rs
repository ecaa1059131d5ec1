//! Classical Fisher information of the photon-counting measurement with
//! respect to the detuning.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{CountingKernel, OutcomeDistribution, PreparedProbe, ProbeState};
use crate::medium::Medium;

/// Outcomes less likely than this are left out of the Fisher sum.
pub const PROB_SKIP: f64 = 1e-14;

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 100.0;
pub const REFINE_POINTS: usize = 501;
pub const REFINE_HALF_STEPS: f64 = 5.0;

/// F = Σ (dP/dΔ)² / P over the outcomes, in s².
pub fn fisher_information(dist: &OutcomeDistribution) -> f64 {
    fisher_from_outcomes(
        dist.probs()
            .iter()
            .copied()
            .zip(dist.dprobs().iter().copied()),
    )
}

/// Fisher sum over arbitrary (P, dP/dΔ) pairs.
pub fn fisher_from_outcomes(outcomes: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    outcomes
        .into_iter()
        .filter(|&(p, _)| p >= PROB_SKIP)
        .map(|(p, dp)| dp * dp / p)
        .sum()
}

/// Lower bound 1/F on the variance of an unbiased detuning estimate.
pub fn cramer_rao_bound(fisher: f64) -> Result<f64> {
    if fisher > 0.0 && fisher.is_finite() {
        Ok(1.0 / fisher)
    } else {
        Err(Error::UnboundedVariance(fisher))
    }
}

/// Strictly increasing detunings in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningGrid {
    deltas: Vec<f64>,
}

impl DetuningGrid {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidGrid("non-finite detuning".into()));
        }
        if deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "detunings must be strictly increasing".into(),
            ));
        }
        Ok(DetuningGrid { deltas })
    }

    /// `points` evenly spaced detunings from `min` to `max` inclusive.
    pub fn uniform(min: f64, max: f64, points: usize) -> Result<Self> {
        match points {
            0 => Err(Error::InvalidGrid("grid needs at least one point".into())),
            1 if min == max => Self::new(vec![min]),
            1 => Err(Error::InvalidGrid("a single point needs min == max".into())),
            _ => {
                let step = (max - min) / (points - 1) as f64;
                let mut deltas: Vec<f64> = (0..points).map(|i| min + step * i as f64).collect();
                deltas[points - 1] = max;
                Self::new(deltas)
            }
        }
    }

    /// Uniform grid given in units of the medium's linewidth γ_s.
    pub fn in_linewidths(medium: &Medium, min: f64, max: f64, points: usize) -> Result<Self> {
        Self::uniform(min * medium.gamma_s, max * medium.gamma_s, points)
    }

    /// 2001 points over ±100 γ_s.
    pub fn default_for(medium: &Medium) -> Self {
        Self::in_linewidths(
            medium,
            -DEFAULT_GRID_HALF_WIDTH,
            DEFAULT_GRID_HALF_WIDTH,
            DEFAULT_GRID_POINTS,
        )
        .expect("default grid is valid")
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

/// Fisher information sampled on a detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherCurve {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub peak_value: f64,
    pub peak_delta: f64,
}

impl FisherCurve {
    pub fn from_samples(deltas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() || deltas.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} detunings for {} values",
                deltas.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invariant(
                "Fisher information must be finite and non-negative".into(),
            ));
        }
        let (peak_delta, peak_value) = peak(&deltas, &values);
        Ok(FisherCurve {
            deltas,
            values,
            peak_value,
            peak_delta,
        })
    }
}

/// Largest value; ties go to the smallest |Δ|.
fn peak(deltas: &[f64], values: &[f64]) -> (f64, f64) {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best]
            || (values[i] == values[best] && deltas[i].abs() < deltas[best].abs())
        {
            best = i;
        }
    }
    (deltas[best], values[best])
}

/// Fisher information of one probe state as a function of detuning.
#[derive(Debug, Clone)]
pub struct FisherEvaluator {
    probe: PreparedProbe,
    medium: Medium,
}

impl FisherEvaluator {
    pub fn new(state: &ProbeState, medium: &Medium) -> Result<Self> {
        medium.validate()?;
        let probe = CountingKernel::new(state.n_total())?.prepare(state)?;
        Ok(FisherEvaluator {
            probe,
            medium: *medium,
        })
    }

    pub fn from_kernel(
        kernel: &CountingKernel,
        state: &ProbeState,
        medium: &Medium,
    ) -> Result<Self> {
        medium.validate()?;
        Ok(FisherEvaluator {
            probe: kernel.prepare(state)?,
            medium: *medium,
        })
    }

    pub fn distribution(&self, delta: f64) -> Result<OutcomeDistribution> {
        let arm = self.medium.arm_response(delta)?;
        self.probe.distribution(&arm)
    }

    /// F(Δ) in s². A cell too opaque to transmit anything carries no
    /// information.
    pub fn at(&self, delta: f64) -> Result<f64> {
        match self.distribution(delta) {
            Ok(d) => Ok(fisher_information(&d)),
            Err(Error::Opaque { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    pub fn curve(&self, grid: &DetuningGrid) -> Result<FisherCurve> {
        let values = grid
            .deltas()
            .iter()
            .map(|&d| self.at(d))
            .collect::<Result<Vec<_>>>()?;
        FisherCurve::from_samples(grid.deltas().to_vec(), values)
    }

    #[cfg(feature = "parallel")]
    pub fn curve_parallel(&self, grid: &DetuningGrid) -> Result<FisherCurve> {
        let values = grid
            .deltas()
            .par_iter()
            .map(|&d| self.at(d))
            .collect::<Result<Vec<_>>>()?;
        FisherCurve::from_samples(grid.deltas().to_vec(), values)
    }

    /// Coarse scan of `grid` followed by a 501-point rescan over ±5 coarse
    /// steps around the coarse maximum. Returns (peak Δ, peak F).
    pub fn refined_peak(&self, grid: &DetuningGrid) -> Result<(f64, f64)> {
        let coarse = self.curve(grid)?;
        self.refine(&coarse)
    }

    fn refine(&self, coarse: &FisherCurve) -> Result<(f64, f64)> {
        let deltas = &coarse.deltas;
        if deltas.len() < 2 {
            return Ok((coarse.peak_delta, coarse.peak_value));
        }
        let i = deltas
            .iter()
            .position(|&d| d == coarse.peak_delta)
            .expect("peak lies on the grid");
        let step = if i + 1 < deltas.len() {
            deltas[i + 1] - deltas[i]
        } else {
            deltas[i] - deltas[i - 1]
        };
        let half = REFINE_HALF_STEPS * step;
        let fine = DetuningGrid::uniform(
            coarse.peak_delta - half,
            coarse.peak_delta + half,
            REFINE_POINTS,
        )?;
        let mut best = (coarse.peak_delta, coarse.peak_value);
        for &d in fine.deltas() {
            let f = match self.at(d) {
                Ok(f) => f,
                // Refinement may wander below ω = 0 on absurd grids.
                Err(Error::NonPositiveFrequency { .. }) => continue,
                Err(e) => return Err(e),
            };
            if f > best.1 || (f == best.1 && d.abs() < best.0.abs()) {
                best = (d, f);
            }
        }
        Ok(best)
    }
}

/// Fisher curve of `state` in `medium` over `grid`.
pub fn fisher_curve(
    state: &ProbeState,
    medium: &Medium,
    grid: &DetuningGrid,
) -> Result<FisherCurve> {
    let eval = FisherEvaluator::new(state, medium)?;
    #[cfg(feature = "parallel")]
    {
        eval.curve_parallel(grid)
    }
    #[cfg(not(feature = "parallel"))]
    {
        eval.curve(grid)
    }
}

/// Fisher curve of `copies` independent repetitions of the same probe.
pub fn copies_fisher(single: &FisherCurve, copies: usize) -> Result<FisherCurve> {
    if copies == 0 {
        return Err(Error::InvalidState("copies must be at least 1".into()));
    }
    let k = copies as f64;
    FisherCurve::from_samples(
        single.deltas.clone(),
        single.values.iter().map(|v| v * k).collect(),
    )
}
