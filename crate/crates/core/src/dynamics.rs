//! Closed-system evolution experiments and the dense Lindblad master-equation
//! integrator used as the deterministic oracle for trajectory ensembles.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilation_cavity, annihilation_mech, FockSpace, OperatorMatrix, StateVector};
use crate::linalg::ClosedPropagator;
use crate::model::{build_exact, build_rotating_effective, ModelParams};

/// Which Hamiltonian generates the evolution.
///
/// `EffectiveRotating` is the production frame: the effective Hamiltonian
/// minus the co-rotating shift (3/2)a†a + b†b, leaving only the slow scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Exact,
    EffectiveRotating,
}

impl Frame {
    pub fn hermitian_part(&self, p: &ModelParams, space: &FockSpace) -> Result<OperatorMatrix> {
        match self {
            Frame::Exact => build_exact(p, space),
            Frame::EffectiveRotating => build_rotating_effective(p, space),
        }
    }
}

/// RWA-validation fidelity F(t) = |⟨φ(t)|ψ(t)⟩|² with |φ⟩ evolved under the
/// exact Hamiltonian and |ψ⟩ under the effective one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Leakage guard over both evolved states: largest occupation seen on
    /// the highest photon/phonon level.
    pub max_top_photon: f64,
    pub max_top_phonon: f64,
}

impl FidelityTrace {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelity.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,fidelity")?;
        for (t, f) in self.times.iter().zip(self.fidelity.iter()) {
            writeln!(out, "{t:.17e},{f:.17e}")?;
        }
        Ok(())
    }
}

/// Evolve `psi0` under both Hamiltonians via cached eigendecompositions and
/// sample the fidelity on a uniform grid. Exact at every sample time: no step
/// accumulation, which is what makes t_final ~ 1e8 feasible.
pub fn fidelity_trace(
    p: &ModelParams,
    space: &FockSpace,
    psi0: &StateVector,
    t_final: f64,
    n_samples: usize,
) -> Result<FidelityTrace> {
    psi0.check_normalized()?;
    if n_samples < 2 {
        return Err(Error::Invalid(
            "fidelity trace needs at least 2 samples".into(),
        ));
    }
    let exact = ClosedPropagator::new(&build_exact(p, space)?)?;
    let eff = ClosedPropagator::new(&crate::model::build_effective(p, space)?)?;
    let mut times = Vec::with_capacity(n_samples);
    let mut fidelity = Vec::with_capacity(n_samples);
    let mut max_top = (0.0f64, 0.0f64);
    for i in 0..n_samples {
        let t = t_final * i as f64 / (n_samples - 1) as f64;
        let phi = exact.evolve(psi0, t);
        let psi = eff.evolve(psi0, t);
        for state in [&phi, &psi] {
            let (tn, tk) = state.top_level_occupation();
            max_top.0 = max_top.0.max(tn);
            max_top.1 = max_top.1.max(tk);
        }
        times.push(t);
        fidelity.push(phi.inner(&psi).norm_sqr());
    }
    Ok(FidelityTrace {
        params: *p,
        times,
        fidelity,
        max_top_photon: max_top.0,
        max_top_phonon: max_top.1,
    })
}

/// Post-normalization two-level expectations of the no-jump state starting
/// from |0,3⟩ at resonance: ⟨a†a⟩ = 2 sin²(Ω_eff t), ⟨b†b⟩ = 3 cos²(Ω_eff t).
pub fn two_level_expectations(p: &ModelParams, t: f64) -> (f64, f64) {
    let phase = p.effective_rabi() * t;
    let s = phase.sin();
    let c = phase.cos();
    (2.0 * s * s, 3.0 * c * c)
}

/// Dense density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub space: FockSpace,
    pub mat: Array2<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Self {
        let d = psi.space.dim();
        let mut mat = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[(i, j)] = psi.amps[i] * psi.amps[j].conj();
            }
        }
        DensityMatrix {
            space: psi.space,
            mat,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.space.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.space.dim();
        let scale = self.mat.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        for i in 0..d {
            for j in i..d {
                if (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm() > 1e-10 * scale.max(1.0) {
                    return Err(Error::Invalid("density matrix is not Hermitian".into()));
                }
            }
        }
        if (self.trace() - 1.0).abs() > 1e-8 {
            return Err(Error::Invalid(format!(
                "density matrix trace = {}",
                self.trace()
            )));
        }
        let herm = OperatorMatrix::new(self.space, self.mat.clone(), true)?;
        let eig = crate::linalg::hermitian_eig(&herm)?;
        if eig.eigenvalues.iter().any(|&l| l < -1e-8) {
            return Err(Error::Invalid(format!(
                "density matrix has negative eigenvalue {:.3e}",
                eig.eigenvalues[0]
            )));
        }
        Ok(())
    }

    fn number_expectations(&self) -> (f64, f64) {
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..self.space.dim() {
            let (n, k) = self.space.occupation(i);
            let p = self.mat[(i, i)].re;
            na += n as f64 * p;
            nb += k as f64 * p;
        }
        (na, nb)
    }
}

/// Expectation-value trace from the master-equation integration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LindbladTrace {
    pub times: Vec<f64>,
    pub photons: Vec<f64>,
    pub phonons: Vec<f64>,
    pub final_trace: f64,
}

impl LindbladTrace {
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,n_photon,n_phonon")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e}",
                self.times[i], self.photons[i], self.phonons[i]
            )?;
        }
        Ok(())
    }
}

const TRACE_TOL: f64 = 1e-7;

/// Fixed-step classical RK4 integration of
/// dρ/dt = −i[H, ρ] + γ_a D[a]ρ + γ_b D[b]ρ, D[c]ρ = cρc† − ½{c†c, ρ},
/// recording ⟨a†a⟩ and ⟨b†b⟩ at `n_records` uniformly spaced times (which
/// are hit exactly; steps subdivide each recording segment).
pub fn lindblad_evolve(
    p: &ModelParams,
    space: &FockSpace,
    frame: Frame,
    rho0: &DensityMatrix,
    t_final: f64,
    n_steps: usize,
    n_records: usize,
) -> Result<LindbladTrace> {
    rho0.validate()?;
    if n_steps == 0 || n_records < 2 {
        return Err(Error::Invalid(
            "lindblad_evolve needs n_steps >= 1, n_records >= 2".into(),
        ));
    }
    let h = frame.hermitian_part(p, space)?;
    let a = annihilation_cavity(space);
    let b = annihilation_mech(space);
    let a_dag = a.dagger();
    let b_dag = b.dagger();
    let d = space.dim();
    let na: Vec<f64> = (0..d).map(|i| space.occupation(i).0 as f64).collect();
    let nb: Vec<f64> = (0..d).map(|i| space.occupation(i).1 as f64).collect();

    let rhs = |rho: &Array2<Complex64>| -> Array2<Complex64> {
        let mut out = h.mat.dot(rho) - rho.dot(&h.mat);
        out.mapv_inplace(|z| z * Complex64::new(0.0, -1.0));
        for (rate, c, c_dag, diag) in [(p.gamma_a, &a, &a_dag, &na), (p.gamma_b, &b, &b_dag, &nb)] {
            if rate == 0.0 {
                continue;
            }
            let gain = c.mat.dot(rho).dot(&c_dag.mat);
            out = out + gain.mapv(|z| z * rate);
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] -= rho[(i, j)] * (0.5 * rate * (diag[i] + diag[j]));
                }
            }
        }
        out
    };

    let mut rho = rho0.mat.clone();
    let mut times = Vec::with_capacity(n_records);
    let mut photons = Vec::with_capacity(n_records);
    let mut phonons = Vec::with_capacity(n_records);

    let record = |rho: &Array2<Complex64>,
                  t: f64,
                  times: &mut Vec<f64>,
                  ph: &mut Vec<f64>,
                  pn: &mut Vec<f64>| {
        let dm = DensityMatrix {
            space: *space,
            mat: rho.clone(),
        };
        let (x, y) = dm.number_expectations();
        times.push(t);
        ph.push(x);
        pn.push(y);
    };

    record(&rho, 0.0, &mut times, &mut photons, &mut phonons);
    let segments = n_records - 1;
    let steps_per_segment = n_steps.div_ceil(segments);
    let seg_len = t_final / segments as f64;
    let dt = seg_len / steps_per_segment as f64;

    for seg in 0..segments {
        for _ in 0..steps_per_segment {
            let k1 = rhs(&rho);
            let k2 = rhs(&(&rho + &k1.mapv(|z| z * (dt / 2.0))));
            let k3 = rhs(&(&rho + &k2.mapv(|z| z * (dt / 2.0))));
            let k4 = rhs(&(&rho + &k3.mapv(|z| z * dt)));
            rho = &rho
                + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (dt / 6.0));
            // re-hermitize; RK4 keeps this tiny but it costs nothing
            for i in 0..d {
                for j in (i + 1)..d {
                    let avg = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
                    rho[(i, j)] = avg;
                    rho[(j, i)] = avg.conj();
                }
                rho[(i, i)] = Complex64::new(rho[(i, i)].re, 0.0);
            }
            let tr: f64 = (0..d).map(|i| rho[(i, i)].re).sum();
            let drift = (tr - 1.0).abs();
            // negated comparison so a NaN trace (blown-up integration) trips too
            if !(drift <= TRACE_TOL) {
                return Err(Error::TraceDrift {
                    drift,
                    tol: TRACE_TOL,
                    suggested_steps: n_steps * 4,
                });
            }
        }
        record(
            &rho,
            seg_len * (seg + 1) as f64,
            &mut times,
            &mut photons,
            &mut phonons,
        );
    }

    let final_trace = (0..d).map(|i| rho[(i, i)].re).sum();
    Ok(LindbladTrace {
        times,
        photons,
        phonons,
        final_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;

    fn space() -> FockSpace {
        FockSpace::new(6, 8).unwrap()
    }

    #[test]
    fn fidelity_starts_at_one_and_stays_bounded() {
        let p = ModelParams::resonant(1e-3, 0.0, 0.0).unwrap();
        let s = space();
        let psi0 = s.basis_state(0, 3).unwrap();
        let tr = fidelity_trace(&p, &s, &psi0, 1e6, 101).unwrap();
        assert!((tr.fidelity[0] - 1.0).abs() < 1e-12);
        for &f in &tr.fidelity {
            assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        }
    }

    #[test]
    fn fidelity_swap_symmetric() {
        // |<φ|ψ>|² does not care which Hamiltonian evolved which ket.
        let p = ModelParams::resonant(1e-3, 0.0, 0.0).unwrap();
        let s = space();
        let psi0 = s.basis_state(0, 3).unwrap();
        let exact = ClosedPropagator::new(&build_exact(&p, &s).unwrap()).unwrap();
        let eff = ClosedPropagator::new(&crate::model::build_effective(&p, &s).unwrap()).unwrap();
        for t in [1e5, 3e6, 7e7] {
            let f1 = exact
                .evolve(&psi0, t)
                .inner(&eff.evolve(&psi0, t))
                .norm_sqr();
            let f2 = eff
                .evolve(&psi0, t)
                .inner(&exact.evolve(&psi0, t))
                .norm_sqr();
            assert!((f1 - f2).abs() < 1e-12);
        }
    }

    #[test]
    fn two_level_closed_forms() {
        let p = ModelParams::resonant(1e-3, 0.0, 0.0).unwrap();
        let rabi = p.effective_rabi();
        let (na, nb) = two_level_expectations(&p, 0.0);
        assert!((na, nb) == (0.0, 3.0));
        let (na, nb) = two_level_expectations(&p, std::f64::consts::FRAC_PI_2 / rabi);
        assert!((na - 2.0).abs() < 1e-9 && nb.abs() < 1e-9);
        let (na, nb) = two_level_expectations(&p, std::f64::consts::FRAC_PI_4 / rabi);
        assert!((na - 1.0).abs() < 1e-9 && (nb - 1.5).abs() < 1e-9);
        // energy bookkeeping of the 2↔3 exchange
        for t in [0.0, 1e7, 4.3e7, 9e7] {
            let (na, nb) = two_level_expectations(&p, t);
            assert!((1.5 * na + nb - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lindblad_damped_oscillator() {
        // g = 0, ρ0 = |1,0><1,0|: ⟨a†a⟩(t) = e^{−γ_a t}.
        let gamma = 0.05;
        let p = ModelParams::new(1.5, 0.0, gamma, 0.0).unwrap();
        let s = FockSpace::new(3, 2).unwrap();
        let rho0 = DensityMatrix::from_pure(&s.basis_state(1, 0).unwrap());
        let t_final = 20.0;
        let tr = lindblad_evolve(&p, &s, Frame::Exact, &rho0, t_final, 40_000, 11).unwrap();
        for (t, &na) in tr.times.iter().zip(tr.photons.iter()) {
            assert!((na - (-gamma * t).exp()).abs() < 1e-7, "t={t} na={na}");
        }
        assert!((tr.final_trace - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lindblad_closed_system_matches_rabi_formula() {
        // γ = 0 from |0,3><0,3| in the rotating frame: ⟨b†b⟩ follows
        // 3cos²(Ω_eff t) to better than 1e-3.
        let p = ModelParams::resonant(1e-3, 0.0, 0.0).unwrap();
        let s = FockSpace::new(4, 5).unwrap();
        let rho0 = DensityMatrix::from_pure(&s.basis_state(0, 3).unwrap());
        let t_final = std::f64::consts::PI / p.effective_rabi(); // one population period
        let tr =
            lindblad_evolve(&p, &s, Frame::EffectiveRotating, &rho0, t_final, 60_000, 9).unwrap();
        for (t, &nb) in tr.times.iter().zip(tr.phonons.iter()) {
            let (_, nb_ref) = two_level_expectations(&p, *t);
            assert!((nb - nb_ref).abs() < 1e-3, "t={t} nb={nb} ref={nb_ref}");
        }
    }

    #[test]
    fn lindblad_reports_unstable_steps() {
        // 20 steps over t = 200 cannot resolve the optical coherences the
        // coupling keeps feeding into the populations: RK4 blows up and the
        // trace check reports it.
        let p = ModelParams::new(1.5, 1e-3, 0.05, 0.0).unwrap();
        let s = FockSpace::new(3, 3).unwrap();
        let rho0 = DensityMatrix::from_pure(&s.basis_state(1, 1).unwrap());
        match lindblad_evolve(&p, &s, Frame::Exact, &rho0, 200.0, 20, 3) {
            Err(Error::TraceDrift {
                suggested_steps, ..
            }) => assert!(suggested_steps > 20),
            other => panic!("expected TraceDrift, got {other:?}"),
        }
    }
}
