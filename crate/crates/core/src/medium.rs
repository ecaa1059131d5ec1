//! Two-level atomic ensemble: Lorentzian susceptibility and the resulting
//! intensity transmissivity and phase shift of the arm that contains it.
//!
//! All detunings are angular frequencies in rad/s. Derivatives with respect
//! to the detuning are closed-form; finite differences only appear in tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA values of the constants entering the susceptibility prefactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Vacuum permittivity (F/m).
    pub eps0: f64,
    /// Speed of light (m/s).
    pub c: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: 1.054571817e-34,
        eps0: 8.8541878128e-12,
        c: 2.99792458e8,
    };
}

/// Which photon frequency multiplies the susceptibility in the
/// transmissivity and phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyModel {
    /// ω = ω₀ + Δ, the actual photon frequency.
    #[default]
    Detuned,
    /// ω = ω₀. Drops the O(Δ/ω₀) correction; makes every curve exactly
    /// symmetric in Δ.
    Carrier,
}

/// Physical parameters of the atomic ensemble.
///
/// Serializes with unit-suffixed keys (`mu_Cm`, `gamma_s_per_s`,
/// `omega0_rad_per_s`, `density_per_m3`, `length_m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    /// Electric dipole moment (C m).
    #[serde(rename = "mu_Cm")]
    pub mu: f64,
    /// Spontaneous decay rate of the excited state (1/s).
    #[serde(rename = "gamma_s_per_s")]
    pub gamma_s: f64,
    /// Transition angular frequency (rad/s).
    #[serde(rename = "omega0_rad_per_s")]
    pub omega0: f64,
    /// Atom number density (1/m³).
    #[serde(rename = "density_per_m3")]
    pub density: f64,
    /// Cell length (m).
    #[serde(rename = "length_m")]
    pub length: f64,
    #[serde(default, skip_serializing_if = "is_default_model")]
    pub frequency_model: FrequencyModel,
}

fn is_default_model(m: &FrequencyModel) -> bool {
    *m == FrequencyModel::Detuned
}

/// Complex susceptibility χ = χ′ + iχ″ and its detuning derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibility {
    pub chi_re: f64,
    pub chi_im: f64,
    /// dχ′/dΔ (s).
    pub dchi_re: f64,
    /// dχ″/dΔ (s).
    pub dchi_im: f64,
}

/// Transmissivity and phase of the ensemble arm at one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmResponse {
    pub transmissivity: f64,
    /// Phase shift φ (rad).
    pub phase: f64,
    /// dT/dΔ (s).
    pub d_transmissivity: f64,
    /// dφ/dΔ (s).
    pub d_phase: f64,
}

impl ArmResponse {
    /// An arm with the given transmissivity and phase that does not depend
    /// on the detuning.
    pub fn fixed(transmissivity: f64, phase: f64) -> Result<Self> {
        Self::new(transmissivity, phase, 0.0, 0.0)
    }

    pub fn new(
        transmissivity: f64,
        phase: f64,
        d_transmissivity: f64,
        d_phase: f64,
    ) -> Result<Self> {
        if !(transmissivity > 0.0 && transmissivity <= 1.0) {
            return Err(Error::Invariant(format!(
                "transmissivity {transmissivity} outside (0, 1]"
            )));
        }
        if !(phase.is_finite() && d_transmissivity.is_finite() && d_phase.is_finite()) {
            return Err(Error::Invariant("non-finite arm response".into()));
        }
        Ok(ArmResponse {
            transmissivity,
            phase,
            d_transmissivity,
            d_phase,
        })
    }
}

pub const SODIUM_D1_MU: f64 = 0.704e-29;
pub const SODIUM_D1_GAMMA_S: f64 = 61.354e6;
pub const SODIUM_D1_OMEGA0: f64 = 2.0 * std::f64::consts::PI * 508.332e12;
pub const SODIUM_D1_LENGTH: f64 = 0.01;

impl Medium {
    pub fn new(mu: f64, gamma_s: f64, omega0: f64, density: f64, length: f64) -> Result<Self> {
        let m = Medium {
            mu,
            gamma_s,
            omega0,
            density,
            length,
            frequency_model: FrequencyModel::Detuned,
        };
        m.validate()?;
        Ok(m)
    }

    /// Sodium D1 line in a 1 cm cell at the given number density.
    pub fn sodium_d1(density: f64) -> Result<Self> {
        Self::new(
            SODIUM_D1_MU,
            SODIUM_D1_GAMMA_S,
            SODIUM_D1_OMEGA0,
            density,
            SODIUM_D1_LENGTH,
        )
    }

    /// Looks up a built-in preset by name.
    pub fn preset(name: &str, density: f64) -> Result<Self> {
        match name {
            "sodium-d1" => Self::sodium_d1(density),
            other => Err(Error::InvalidMedium(format!("unknown preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("gamma_s", self.gamma_s),
            ("omega0", self.omega0),
            ("length", self.length),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidMedium(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(Error::InvalidMedium(format!(
                "density must be non-negative, got {}",
                self.density
            )));
        }
        Ok(())
    }

    pub fn with_density(mut self, density: f64) -> Result<Self> {
        self.density = density;
        self.validate()?;
        Ok(self)
    }

    pub fn with_length(mut self, length: f64) -> Result<Self> {
        self.length = length;
        self.validate()?;
        Ok(self)
    }

    pub fn with_frequency_model(mut self, model: FrequencyModel) -> Self {
        self.frequency_model = model;
        self
    }

    /// Prefactor 2𝒩μ²/(ħε₀) of the Lorentzian (rad/s).
    pub fn amplitude(&self) -> f64 {
        let k = PhysicalConstants::CODATA;
        2.0 * self.density * self.mu * self.mu / (k.hbar * k.eps0)
    }

    pub fn susceptibility(&self, delta: f64) -> Susceptibility {
        let a = self.amplitude();
        let g = self.gamma_s;
        let den = delta * delta + g * g;
        let den2 = den * den;
        Susceptibility {
            chi_re: a * delta / den,
            chi_im: a * g / den,
            dchi_re: a * (g * g - delta * delta) / den2,
            dchi_im: -2.0 * a * g * delta / den2,
        }
    }

    /// Photon angular frequency at the given detuning under the medium's
    /// frequency model, together with dω/dΔ.
    fn photon_frequency(&self, delta: f64) -> (f64, f64) {
        match self.frequency_model {
            FrequencyModel::Detuned => (self.omega0 + delta, 1.0),
            FrequencyModel::Carrier => (self.omega0, 0.0),
        }
    }

    /// T = exp(−χ″ωL/c) and φ = −χ′ωL/(2c), with ω the photon frequency.
    pub fn arm_response(&self, delta: f64) -> Result<ArmResponse> {
        let (omega, domega) = self.photon_frequency(delta);
        if !(omega > 0.0) {
            return Err(Error::NonPositiveFrequency { omega, delta });
        }
        let chi = self.susceptibility(delta);
        let scale = self.length / PhysicalConstants::CODATA.c;
        let t = (-chi.chi_im * omega * scale).exp();
        let dt = -scale * t * (chi.chi_im * domega + omega * chi.dchi_im);
        let phase = -0.5 * chi.chi_re * omega * scale;
        let dphase = -0.5 * scale * (chi.chi_re * domega + omega * chi.dchi_re);
        if !(t > 0.0) {
            // Optical depth beyond ~745 underflows f64.
            return Err(Error::Opaque { delta });
        }
        ArmResponse::new(t.min(1.0), phase, dt, dphase)
    }
}
