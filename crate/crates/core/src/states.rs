//! Reference probe states.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::interferometer::ProbeState;

/// (|N,0⟩ + |0,N⟩)/√2.
pub fn noon_state(n: usize) -> Result<ProbeState> {
    if n == 0 {
        return Err(Error::InvalidState(
            "NOON state needs at least one photon".into(),
        ));
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    coeffs[n] = coeffs[0];
    ProbeState::new(coeffs)
}

/// |N,0⟩: every photon goes through the atomic ensemble.
///
/// With `n = 1` this is one copy of the independent-photon baseline; the
/// N-photon baseline is its Fisher curve scaled by N (see
/// [`copies_fisher`](crate::fisher::copies_fisher)).
pub fn all_in_ensemble_arm(n: usize) -> Result<ProbeState> {
    if n == 0 {
        return Err(Error::InvalidState("need at least one photon".into()));
    }
    ProbeState::basis(n, 0)
}
