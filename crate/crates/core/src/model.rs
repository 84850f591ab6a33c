//! Hamiltonian builders for the optomechanical system.
//!
//! All frequencies and rates are dimensionless multiples of the mechanical
//! frequency, with ω_m ≡ 1. That convention keeps the third-order coupling
//! scale 18√3·g³ (~1e-8 at g = 1e-3) well inside f64 range for horizons of
//! order 1e9.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    annihilation_cavity, annihilation_mech, number_cavity, number_mech, FockSpace, OperatorMatrix,
};

/// Couplings above this are outside the regime where the effective model is
/// trustworthy (fidelity dips become visible from g ≈ 0.004).
pub const WEAK_COUPLING_LIMIT: f64 = 0.01;

pub const SQRT3: f64 = 1.7320508075688772;

/// Physical parameters in units of ω_m (ω_m ≡ 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Cavity frequency ω_c.
    pub omega_c: f64,
    /// Optomechanical coupling g.
    pub g: f64,
    /// Photon loss rate γ_a.
    pub gamma_a: f64,
    /// Phonon loss rate γ_b.
    pub gamma_b: f64,
}

impl ModelParams {
    pub fn new(omega_c: f64, g: f64, gamma_a: f64, gamma_b: f64) -> Result<Self> {
        let p = ModelParams {
            omega_c,
            g,
            gamma_a,
            gamma_b,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with ω_c placed on the |0,3⟩ ↔ |2,0⟩ resonance for the
    /// given coupling.
    pub fn resonant(g: f64, gamma_a: f64, gamma_b: f64) -> Result<Self> {
        Self::new(resonant_omega_c_for(g), g, gamma_a, gamma_b)
    }

    pub fn validate(&self) -> Result<()> {
        // g = 0 is allowed: it is the free-dissipation baseline.
        if !(self.g >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "g must be >= 0, got {}",
                self.g
            )));
        }
        if !(self.omega_c > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega_c must be > 0, got {}",
                self.omega_c
            )));
        }
        if !(self.gamma_a >= 0.0) || !(self.gamma_b >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "loss rates must be >= 0, got gamma_a = {}, gamma_b = {}",
                self.gamma_a, self.gamma_b
            )));
        }
        Ok(())
    }

    /// Detuning Δ = ω_c − ω_m.
    pub fn detuning(&self) -> f64 {
        self.omega_c - 1.0
    }

    pub fn is_weak_coupling(&self) -> bool {
        self.g <= WEAK_COUPLING_LIMIT
    }

    fn require_weak_coupling(&self) -> Result<()> {
        if !self.is_weak_coupling() {
            return Err(Error::WeakCouplingViolated {
                g: self.g,
                limit: WEAK_COUPLING_LIMIT,
            });
        }
        Ok(())
    }

    /// Effective Rabi frequency Ω_eff = 18√3 g³ (ω_m ≡ 1).
    pub fn effective_rabi(&self) -> f64 {
        18.0 * SQRT3 * self.g.powi(3)
    }

    /// Resonance condition ω_c = 3/2 + 21 g²/2 for this coupling.
    pub fn resonant_omega_c(&self) -> f64 {
        resonant_omega_c_for(self.g)
    }

    /// Effective Hamiltonian restricted to {|0,3⟩, |2,0⟩}, row/column order
    /// (|0,3⟩, |2,0⟩).
    pub fn two_level_matrix(&self) -> Result<[[f64; 2]; 2]> {
        self.require_weak_coupling()?;
        let g2 = self.g * self.g;
        let rabi = self.effective_rabi();
        Ok([
            [3.0 - 6.0 * g2, rabi],
            [rabi, 2.0 * self.omega_c - 27.0 * g2],
        ])
    }
}

pub fn resonant_omega_c_for(g: f64) -> f64 {
    1.5 + 10.5 * g * g
}

/// Exact Hamiltonian H_s = ω_c a†a + ω_m b†b + g (a†+a)² (b†+b).
pub fn build_exact(p: &ModelParams, space: &FockSpace) -> Result<OperatorMatrix> {
    p.validate()?;
    let a = annihilation_cavity(space);
    let b = annihilation_mech(space);
    let x_cav = a.add(&a.dagger());
    let x_mech = b.add(&b.dagger());
    let coupling = x_cav.matmul(&x_cav).matmul(&x_mech);
    let mat = number_cavity(space).scale_re(p.omega_c).mat
        + number_mech(space).mat
        + coupling.mat.mapv(|z| z * p.g);
    OperatorMatrix::new(*space, mat, true)
}

/// Effective Hamiltonian
/// H_eff = ω_c a†a + ω_m b†b
///       + (g²/4)[a†²a² − 2(2a†a+1)(3b†b+4a†a+3)]
///       + 9g³ (a†²b³ + a²b†³).
///
/// The second-order part shifts the resonance; the third-order part drives
/// the Casimir-Rabi exchange between |0,3⟩ and |2,0⟩.
pub fn build_effective(p: &ModelParams, space: &FockSpace) -> Result<OperatorMatrix> {
    p.validate()?;
    if !p.is_weak_coupling() {
        return Err(Error::WeakCouplingViolated {
            g: p.g,
            limit: WEAK_COUPLING_LIMIT,
        });
    }
    let d = space.dim();
    let g2 = p.g * p.g;

    // Everything second order is a function of the number operators, so fill
    // the diagonal directly.
    let mut mat: Array2<Complex64> = Array2::zeros((d, d));
    for i in 0..d {
        let (n, k) = space.occupation(i);
        let n = n as f64;
        let k = k as f64;
        let second =
            (g2 / 4.0) * (n * (n - 1.0) - 2.0 * (2.0 * n + 1.0) * (3.0 * k + 4.0 * n + 3.0));
        mat[(i, i)] = Complex64::new(p.omega_c * n + k + second, 0.0);
    }

    // Third order: 9 g³ (a†² b³ + h.c.) from the truncated ladders.
    let a = annihilation_cavity(space);
    let b = annihilation_mech(space);
    let ad2 = a.dagger().matmul(&a.dagger());
    let b3 = b.matmul(&b).matmul(&b);
    let up = ad2.matmul(&b3);
    let third = &up.mat + &up.dagger().mat;
    let coeff = 9.0 * p.g.powi(3);
    let mat = mat + third.mapv(|z| z * coeff);

    OperatorMatrix::new(*space, mat, true)
}

/// Non-Hermitian no-jump generator ℋ = H − i(γ_a a†a + γ_b b†b)/2 with
/// H = H_s or H_eff.
pub fn build_nonhermitian(
    p: &ModelParams,
    space: &FockSpace,
    use_effective: bool,
) -> Result<OperatorMatrix> {
    let h = if use_effective {
        build_effective(p, space)?
    } else {
        build_exact(p, space)?
    };
    let mut mat = h.mat;
    for i in 0..space.dim() {
        let (n, k) = space.occupation(i);
        let decay = 0.5 * (p.gamma_a * n as f64 + p.gamma_b * k as f64);
        mat[(i, i)] -= Complex64::new(0.0, decay);
    }
    let hermitian = p.gamma_a == 0.0 && p.gamma_b == 0.0;
    OperatorMatrix::new(*space, mat, hermitian)
}

/// Generator of the co-rotating frame: F = (3/2) a†a + b†b.
///
/// F commutes with the a†²b³ coupling (2·3/2 = 3·1), with both number
/// operators, and with the loss terms, so removing it changes Fock
/// amplitudes only by phases: every number expectation, norm, and jump
/// statistic is untouched while the residual generator ℋ − F carries only
/// the slow scales (g², Ω_eff, γ). That is what makes horizons of order
/// 1/γ ~ 1e9 steppable.
pub fn rotating_frame_shift(space: &FockSpace) -> OperatorMatrix {
    number_cavity(space).scale_re(1.5).add(&number_mech(space))
}

/// Effective Hamiltonian in the co-rotating frame: H_eff − F (Hermitian).
pub fn build_rotating_effective(p: &ModelParams, space: &FockSpace) -> Result<OperatorMatrix> {
    let h = build_effective(p, space)?;
    Ok(h.sub(&rotating_frame_shift(space)))
}

/// Non-Hermitian rotating-frame generator: (H_eff − F) − i(γ_a a†a + γ_b b†b)/2.
pub fn build_rotating_nonhermitian(p: &ModelParams, space: &FockSpace) -> Result<OperatorMatrix> {
    let h = build_nonhermitian(p, space, true)?;
    Ok(h.sub(&rotating_frame_shift(space)))
}
