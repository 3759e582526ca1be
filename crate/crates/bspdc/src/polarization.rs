//! Jones calculus for the polarization elements of the source and analysis
//! optics: half- and quarter-wave plates, the QWP–HWP–QWP phase sandwich and
//! single-qubit projectors.
//!
//! Conventions:
//!
//! - `hwp_matrix(θ)` is the real symmetric form
//!   `[[cos 2θ, sin 2θ], [sin 2θ, −cos 2θ]]` (fast axis at θ from H, overall
//!   phase dropped).
//! - `qwp_matrix(0) = diag(1, i)` up to global phase. Tomography settings
//!   depend on this choice: with the analyzer QWP at −45° and the HWP at 0°
//!   the projected state is |R⟩ = (|H⟩ − i|V⟩)/√2.
//! - States are physical modulo global phase; compare via |⟨ψ|χ⟩|.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex;

use crate::{Error, Result};

pub type C64 = Complex<f64>;
/// 2×2 complex Jones matrix.
pub type Jones = Matrix2<C64>;
/// Single-photon polarization state in the {H, V} basis.
pub type PolState = Vector2<C64>;

/// Polarization basis labels used by the analysis and tomography settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Label {
    H,
    V,
    /// (|H⟩ + |V⟩)/√2
    D,
    /// (|H⟩ − |V⟩)/√2
    A,
    /// (|H⟩ − i|V⟩)/√2
    R,
    /// (|H⟩ + i|V⟩)/√2
    L,
}

impl Label {
    pub const ALL: [Label; 6] = [Label::H, Label::V, Label::D, Label::A, Label::R, Label::L];

    /// Normalized single-qubit ket for this label.
    pub fn ket(self) -> PolState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Label::H => Vector2::new(one, C64::new(0.0, 0.0)),
            Label::V => Vector2::new(C64::new(0.0, 0.0), one),
            Label::D => Vector2::new(one * s, one * s),
            Label::A => Vector2::new(one * s, -one * s),
            Label::R => Vector2::new(one * s, -i * s),
            Label::L => Vector2::new(one * s, i * s),
        }
    }

    /// Analyzer waveplate angles `(qwp, hwp)` in radians realizing this
    /// projection in front of an H-transmitting PBS.
    ///
    /// This is the fixture table for the label → angle mapping; the source
    /// paperwork of such experiments rarely states it, so the table is a
    /// convention tied to the `qwp_matrix(0) = diag(1, i)` choice.
    pub fn analyzer_angles(self) -> (f64, f64) {
        use std::f64::consts::FRAC_PI_4;
        let pi8 = FRAC_PI_4 / 2.0;
        match self {
            Label::H => (0.0, 0.0),
            Label::V => (0.0, FRAC_PI_4),
            Label::D => (0.0, pi8),
            Label::A => (0.0, -pi8),
            // The bare QWP analyzes R at −45°, but the stack includes the
            // HWP at 0°, whose reflection flips handedness; the QWP angle
            // carries the opposite sign to compensate.
            Label::R => (FRAC_PI_4, 0.0),
            Label::L => (-FRAC_PI_4, 0.0),
        }
    }
}

fn rotation(theta: f64) -> Jones {
    let c = C64::new(theta.cos(), 0.0);
    let s = C64::new(theta.sin(), 0.0);
    Matrix2::new(c, s, -s, c)
}

/// Half-wave plate with fast axis at `theta` from H.
///
/// Returns `[[cos 2θ, sin 2θ], [sin 2θ, −cos 2θ]]`.
pub fn hwp_matrix(theta: f64) -> Jones {
    let c2 = C64::new((2.0 * theta).cos(), 0.0);
    let s2 = C64::new((2.0 * theta).sin(), 0.0);
    Matrix2::new(c2, s2, s2, -c2)
}

/// Quarter-wave plate (retardance π/2) with fast axis at `theta` from H;
/// `diag(1, i)` at θ = 0 with the global phase dropped.
pub fn qwp_matrix(theta: f64) -> Jones {
    let retarder = Matrix2::new(
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 1.0),
    );
    rotation(-theta) * retarder * rotation(theta)
}

/// The QWP(45°)–HWP(θ)–QWP(45°) relative-phase element.
///
/// The composite is diagonal in {H, V} up to global phase, so it acts as a
/// pure relative-phase element; the phase advances linearly with the HWP
/// angle (dφ/dθ = 4). Returns the composite matrix and the extracted
/// relative phase φ = arg(m₁₁) − arg(m₀₀) wrapped to (−π, π].
pub fn phase_sandwich(theta_hwp: f64) -> (Jones, f64) {
    use std::f64::consts::FRAC_PI_4;
    let m = qwp_matrix(FRAC_PI_4) * hwp_matrix(theta_hwp) * qwp_matrix(FRAC_PI_4);
    let phi = (m[(1, 1)] / m[(0, 0)]).arg();
    (m, phi)
}

/// Rank-1 projector onto the labelled state.
pub fn projector(label: Label) -> Jones {
    let k = label.ket();
    k * k.adjoint()
}

/// Rank-1 projector realized by an analysis stack: QWP at `qwp`, HWP at
/// `hwp`, then a PBS transmitting H. The projected state is
/// |ψ⟩ = (QWP(q)·HWP(h))† |H⟩.
pub fn projector_from_angles(qwp: f64, hwp: f64) -> Result<Jones> {
    if !qwp.is_finite() || !hwp.is_finite() {
        return Err(Error::Data(format!(
            "non-finite analyzer angles ({qwp}, {hwp})"
        )));
    }
    let k = analyzer_ket(qwp, hwp);
    Ok(k * k.adjoint())
}

/// The state projected onto by the (QWP, HWP, PBS-H) analysis stack.
pub fn analyzer_ket(qwp: f64, hwp: f64) -> PolState {
    (qwp_matrix(qwp) * hwp_matrix(hwp)).adjoint() * Label::H.ket()
}

/// |⟨a|b⟩| for normalized kets; 1 means equal modulo global phase.
pub fn overlap(a: &PolState, b: &PolState) -> f64 {
    a.dotc(b).norm()
}
