//! Quantum Fisher information of the closed-evolution output state with
//! respect to the cavity frequency.
//!
//! For a pure state 𝓕 = 4(⟨∂φ|∂φ⟩ − |⟨φ|∂φ⟩|²) with
//! |φ⟩ = exp(−i H_s(ω_c) t_f)|ψ0⟩. The production path builds |∂φ⟩ by a
//! central finite difference in ω_c, with an embedded Richardson step-halving
//! check. A closed-form path (the ∂H integral summed in the eigenbasis) is
//! also available and is used to cross-validate the difference quotient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockSpace, StateVector};
use crate::linalg::{hermitian_eig, ClosedPropagator};
use crate::model::{build_exact, ModelParams};

pub const DEFAULT_DELTA: f64 = 1e-12;
pub const RICHARDSON_TOL: f64 = 0.05;

fn evolved(
    p: &ModelParams,
    space: &FockSpace,
    omega_c: f64,
    psi0: &StateVector,
    t_f: f64,
) -> Result<StateVector> {
    let shifted = ModelParams { omega_c, ..*p };
    let h = build_exact(&shifted, space)?;
    Ok(ClosedPropagator::new(&h)?.evolve(psi0, t_f))
}

/// 4(⟨∂φ|∂φ⟩ − |⟨φ|∂φ⟩|²) from a state and its parameter derivative.
pub fn qfi_from_states(phi: &StateVector, dphi: &StateVector) -> f64 {
    let dd = dphi.inner(dphi).re;
    let overlap = phi.inner(dphi).norm_sqr();
    4.0 * (dd - overlap)
}

fn fd_estimate(
    p: &ModelParams,
    space: &FockSpace,
    psi0: &StateVector,
    t_f: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    psi0.check_normalized()?;
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let plus = evolved(p, space, p.omega_c + delta, psi0, t_f)?;
    let minus = evolved(p, space, p.omega_c - delta, psi0, t_f)?;
    let phi = evolved(p, space, p.omega_c, psi0, t_f)?;
    let diff = &plus.amps - &minus.amps;
    let diff_norm = diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let dphi = StateVector {
        space: *space,
        amps: diff.mapv(|z| z / (2.0 * delta)),
    };
    Ok((qfi_from_states(&phi, &dphi), diff_norm))
}

/// Single central-difference evaluation with step `delta` (no step check).
pub fn qfi_finite_difference(
    p: &ModelParams,
    space: &FockSpace,
    psi0: &StateVector,
    t_f: f64,
    delta: f64,
) -> Result<f64> {
    fd_estimate(p, space, psi0, t_f, delta).map(|(f, _)| f)
}

/// Production QFI: central differences at `delta`, accepted only when the
/// `delta/2` evaluation agrees within 5%.
///
/// Two failure modes are flagged as an ill-conditioned step: the states at
/// ω_c ± δ no longer close to each other (δ spans more than the local
/// structure), and Richardson disagreement above 5% for values that stand
/// clear of the difference-quotient noise floor. Values below the floor
/// (≲ 1e-4·t_f², e.g. the zero-coupling controls and the echo dip at exact
/// resonance, where the sensitivity cancels) are returned as-is: they are
/// indistinguishable from zero at this δ.
pub fn qfi_at(
    p: &ModelParams,
    space: &FockSpace,
    psi0: &StateVector,
    t_f: f64,
    delta: f64,
) -> Result<f64> {
    let (coarse, diff_norm) = fd_estimate(p, space, psi0, t_f, delta)?;
    if diff_norm > 0.5 {
        return Err(Error::RichardsonMismatch {
            rel: diff_norm,
            tol: 0.5,
        });
    }
    let (fine, _) = fd_estimate(p, space, psi0, t_f, delta / 2.0)?;
    let scale = coarse.abs().max(fine.abs());
    let noise_floor = 1e-4 * t_f * t_f;
    if scale > noise_floor {
        let rel = (coarse - fine).abs() / scale;
        if rel > RICHARDSON_TOL {
            return Err(Error::RichardsonMismatch {
                rel,
                tol: RICHARDSON_TOL,
            });
        }
    }
    Ok(fine)
}

/// Closed-form derivative state via the eigenbasis of H_s:
/// |∂φ⟩ = −i ∫₀^{t_f} e^{−iH(t_f−s)} (a†a) e^{−iHs} |ψ0⟩ ds, with the time
/// integral done analytically for every eigenpair.
pub fn qfi_exact(p: &ModelParams, space: &FockSpace, psi0: &StateVector, t_f: f64) -> Result<f64> {
    psi0.check_normalized()?;
    let h = build_exact(p, space)?;
    let eig = hermitian_eig(&h)?;
    let d = space.dim();

    // ψ0 and N = a†a in the eigenbasis.
    let mut psi_eig = vec![Complex64::new(0.0, 0.0); d];
    for j in 0..d {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            acc += eig.vectors[(i, j)].conj() * psi0.amps[i];
        }
        psi_eig[j] = acc;
    }
    // N is diagonal in the Fock basis: N_eig[i][j] = Σ_m v*_mi n_m v_mj.
    let mut dphi_eig = vec![Complex64::new(0.0, 0.0); d];
    for i in 0..d {
        let ei = eig.eigenvalues[i];
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..d {
            if psi_eig[j] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut n_ij = Complex64::new(0.0, 0.0);
            for m in 0..d {
                let (n, _) = space.occupation(m);
                if n == 0 {
                    continue;
                }
                n_ij += eig.vectors[(m, i)].conj() * eig.vectors[(m, j)] * n as f64;
            }
            let ej = eig.eigenvalues[j];
            let de = ei - ej;
            // ∫₀^t e^{−iE_i(t−s)} e^{−iE_j s} ds
            let integral = if de.abs() * t_f < 1e-8 {
                Complex64::from_polar(t_f, -ei * t_f)
            } else {
                let num =
                    Complex64::from_polar(1.0, -ej * t_f) - Complex64::from_polar(1.0, -ei * t_f);
                num / Complex64::new(0.0, de)
            };
            acc += n_ij * psi_eig[j] * integral;
        }
        dphi_eig[i] = acc * Complex64::new(0.0, -1.0);
    }

    // back to the Fock basis
    let mut phi = StateVector::zero(*space);
    let mut dphi = StateVector::zero(*space);
    for m in 0..d {
        let mut p_acc = Complex64::new(0.0, 0.0);
        let mut d_acc = Complex64::new(0.0, 0.0);
        for j in 0..d {
            let v = eig.vectors[(m, j)];
            p_acc += v * psi_eig[j] * Complex64::from_polar(1.0, -eig.eigenvalues[j] * t_f);
            d_acc += v * dphi_eig[j];
        }
        phi.amps[m] = p_acc;
        dphi.amps[m] = d_acc;
    }
    Ok(qfi_from_states(&phi, &dphi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QfiScan {
    pub omega_c: Vec<f64>,
    pub qfi: Vec<f64>,
    pub t_final: f64,
    pub delta: f64,
    /// Leakage guard of the evolved state at the window edges and center:
    /// largest occupation seen on the highest photon/phonon level.
    pub max_top_photon: f64,
    pub max_top_phonon: f64,
}

impl QfiScan {
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "omega_c,qfi")?;
        for (w, f) in self.omega_c.iter().zip(self.qfi.iter()) {
            writeln!(out, "{w:.17e},{f:.17e}")?;
        }
        Ok(())
    }

    /// Peak location and height: discrete argmax with parabolic refinement
    /// through the three samples around it.
    pub fn peak(&self) -> Result<(f64, f64)> {
        let n = self.qfi.len();
        if n < 3 {
            return Err(Error::Invalid(
                "peak extraction needs at least 3 samples".into(),
            ));
        }
        let mut i_max = 0;
        for i in 1..n {
            if self.qfi[i] > self.qfi[i_max] {
                i_max = i;
            }
        }
        if i_max == 0 || i_max == n - 1 {
            return Err(Error::Invalid("QFI maximum sits on the scan edge".into()));
        }
        let (x0, x1, x2) = (
            self.omega_c[i_max - 1],
            self.omega_c[i_max],
            self.omega_c[i_max + 1],
        );
        let (y0, y1, y2) = (self.qfi[i_max - 1], self.qfi[i_max], self.qfi[i_max + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let curv = (d12 - d01) / (x2 - x0);
        if curv >= 0.0 {
            // flat or noisy top: fall back to the discrete maximum
            return Ok((x1, y1));
        }
        let x_peak = 0.5 * (x0 + x1 - d01 / curv);
        let y_peak = y0 + d01 * (x_peak - x0) + curv * (x_peak - x0) * (x_peak - x1);
        Ok((x_peak, y_peak))
    }
}

/// QFI sampled across a window of cavity frequencies. Samples run in
/// parallel; each uses the guarded [`qfi_at`] path.
pub fn qfi_scan(
    p_base: &ModelParams,
    space: &FockSpace,
    omega_lo: f64,
    omega_hi: f64,
    n_samples: usize,
    t_f: f64,
    delta: f64,
) -> Result<QfiScan> {
    use rayon::prelude::*;
    if n_samples < 3 || !(omega_lo < omega_hi) {
        return Err(Error::Invalid(
            "qfi_scan needs an ascending window and >= 3 samples".into(),
        ));
    }
    let psi0 = space.basis_state(0, 3)?;
    let omegas: Vec<f64> = (0..n_samples)
        .map(|i| omega_lo + (omega_hi - omega_lo) * i as f64 / (n_samples - 1) as f64)
        .collect();
    let values: Vec<Result<f64>> = omegas
        .par_iter()
        .map(|&w| {
            let p = ModelParams {
                omega_c: w,
                ..*p_base
            };
            qfi_at(&p, space, &psi0, t_f, delta)
        })
        .collect();
    let mut qfi = Vec::with_capacity(n_samples);
    for v in values {
        qfi.push(v?);
    }
    // truncation-leakage guard, probed at the window edges and center
    let mut max_top = (0.0f64, 0.0f64);
    for &w in [omega_lo, 0.5 * (omega_lo + omega_hi), omega_hi].iter() {
        let phi = evolved(p_base, space, w, &psi0, t_f)?;
        let (tn, tk) = phi.top_level_occupation();
        max_top.0 = max_top.0.max(tn);
        max_top.1 = max_top.1.max(tk);
    }
    Ok(QfiScan {
        omega_c: omegas,
        qfi,
        t_final: t_f,
        delta,
        max_top_photon: max_top.0,
        max_top_phonon: max_top.1,
    })
}
