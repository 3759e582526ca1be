//! Two-qubit polarization states: the bidirectionally-pumped entangled-state
//! family, density matrices, fidelity, purity and the noise model used for
//! synthetic data.
//!
//! Basis ordering is {HH, HV, VH, VV} with the right-propagating photon as
//! the first factor (R ⊗ L), fixed once here and used everywhere.

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::polarization::{Jones, C64};
use crate::{Error, Result};

/// Two-qubit ket in the {HH, HV, VH, VV} basis (R ⊗ L).
pub type Ket4 = Vector4<C64>;
/// 4×4 density matrix in the same basis.
pub type Rho = Matrix4<C64>;

/// Eigenvalue tolerance below which a density matrix is considered
/// non-physical. MLE output carries floating-point negative tails of this
/// order.
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// The entangled-state family (|H⟩_R|V⟩_L + e^{iφ}|V⟩_R|H⟩_L)/√2 produced
/// by the bidirectional pump; φ is set by the pump path difference.
pub fn eq1_state(phi: f64) -> Ket4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Vector4::new(
        C64::new(0.0, 0.0),
        C64::new(s, 0.0),
        C64::from_polar(s, phi),
        C64::new(0.0, 0.0),
    )
}

/// The singlet |Ψ⁻⟩ = (|H_R V_L⟩ − |V_R H_L⟩)/√2, i.e. φ = π.
pub fn singlet() -> Ket4 {
    eq1_state(std::f64::consts::PI)
}

/// |⟨a|b⟩| for two-qubit kets (comparison modulo global phase).
pub fn overlap4(a: &Ket4, b: &Ket4) -> f64 {
    a.dotc(b).norm()
}

/// Kronecker product of two single-qubit operators, R ⊗ L ordering.
pub fn kron2(a: &Jones, b: &Jones) -> Matrix4<C64> {
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Pure-state density matrix |ψ⟩⟨ψ|.
pub fn pure_density(psi: &Ket4) -> Rho {
    psi * psi.adjoint()
}

/// ρ = mix·|t⟩⟨t| + (1 − mix)·I/4.
pub fn werner_state(target: &Ket4, mix: f64) -> Result<Rho> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::Data(format!("werner mix {mix} outside [0, 1]")));
    }
    let m = C64::new(mix, 0.0);
    let w = C64::new((1.0 - mix) / 4.0, 0.0);
    Ok(pure_density(target) * m + Matrix4::identity() * w)
}

/// Checks Hermiticity, unit trace and positivity within [`PHYSICALITY_TOL`].
pub fn is_physical(rho: &Rho) -> bool {
    if (rho - rho.adjoint()).norm() > PHYSICALITY_TOL {
        return false;
    }
    if (rho.trace().re - 1.0).abs() > PHYSICALITY_TOL || rho.trace().im.abs() > PHYSICALITY_TOL {
        return false;
    }
    eigenvalues(rho).iter().all(|&e| e >= -PHYSICALITY_TOL)
}

/// Real eigenvalues of a Hermitian 4×4 matrix, ascending.
pub fn eigenvalues(rho: &Rho) -> [f64; 4] {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut vals = [0.0; 4];
    for (i, v) in eig.eigenvalues.iter().enumerate() {
        vals[i] = *v;
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Pure-target fidelity F(ρ, |t⟩) = ⟨t|ρ|t⟩.
pub fn fidelity(rho: &Rho, target: &Ket4) -> Result<f64> {
    if !is_physical(rho) {
        return Err(Error::Data(
            "fidelity called with a non-physical density matrix".into(),
        ));
    }
    let f = (target.adjoint() * rho * target)[(0, 0)];
    Ok(f.re.clamp(0.0, 1.0))
}

/// Tr(ρ²); 0.25 for the maximally mixed state, 1 for pure states.
pub fn purity(rho: &Rho) -> f64 {
    (rho * rho).trace().re
}

fn is_rank1_projector(p: &Jones) -> bool {
    let tol = 1e-9;
    (p * p - p).norm() < tol && (p.adjoint() - p).norm() < tol && (p.trace().re - 1.0).abs() < tol
}

/// Coincidence probability Tr(ρ · (Π_R ⊗ Π_L)) for rank-1 projectors on the
/// two arms. This is the model behind every coincidence prediction.
pub fn joint_probability(rho: &Rho, proj_r: &Jones, proj_l: &Jones) -> Result<f64> {
    if !is_rank1_projector(proj_r) || !is_rank1_projector(proj_l) {
        return Err(Error::Data("joint_probability requires rank-1 projectors".into()));
    }
    let p = (rho * kron2(proj_r, proj_l)).trace().re;
    Ok(p.clamp(0.0, 1.0))
}

/// Marginal detection probability Tr(ρ · (Π_R ⊗ I)) on the R arm.
pub fn marginal_r(rho: &Rho, proj_r: &Jones) -> f64 {
    (rho * kron2(proj_r, &Matrix2::identity())).trace().re
}

/// Marginal detection probability Tr(ρ · (I ⊗ Π_L)) on the L arm.
pub fn marginal_l(rho: &Rho, proj_l: &Jones) -> f64 {
    (rho * kron2(&Matrix2::identity(), proj_l)).trace().re
}

/// Noise model for synthetic data: white-noise admixture, flat accidental
/// rate, per-arm detector efficiency and dark counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Weight of the pure target state vs white noise, in [0, 1].
    pub visibility_mix: f64,
    /// Flat accidental-coincidence rate, Hz.
    pub accidental_rate_hz: f64,
    /// Detector efficiency on the R arm, in [0, 1].
    pub efficiency_r: f64,
    /// Detector efficiency on the L arm, in [0, 1].
    pub efficiency_l: f64,
    /// Dark-count rate per arm, Hz.
    pub dark_rate_hz: f64,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel {
            visibility_mix: 1.0,
            accidental_rate_hz: 0.0,
            efficiency_r: 1.0,
            efficiency_l: 1.0,
            dark_rate_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("visibility_mix", self.visibility_mix),
            ("efficiency_r", self.efficiency_r),
            ("efficiency_l", self.efficiency_l),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.accidental_rate_hz < 0.0 || self.dark_rate_hz < 0.0 {
            return Err(Error::Config("noise rates must be ≥ 0".into()));
        }
        Ok(())
    }

    /// The effective state after white-noise admixture.
    pub fn apply_mix(&self, rho: &Rho) -> Rho {
        let m = C64::new(self.visibility_mix, 0.0);
        let w = C64::new((1.0 - self.visibility_mix) / 4.0, 0.0);
        rho * m + Matrix4::identity() * w
    }
}
