//! Dense complex linear algebra: Hermitian eigendecomposition (cyclic Jacobi),
//! matrix exponentials by scaling-and-squaring, and exact closed-system
//! propagation through the eigenbasis.
//!
//! Everything here is sized for dim ≤ ~200, where dense O(n³) methods are
//! fast and simple.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{OperatorMatrix, StateVector};

/// Eigenvalues ascending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column j is the eigenvector of `eigenvalues[j]`.
    pub vectors: Array2<Complex64>,
}

/// Max |M·dt| (one-norm) allowed by [`fixed_step_propagator`].
pub const STEP_NORM_GUARD: f64 = 0.1;

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Max abs column sum.
pub fn one_norm(m: &Array2<Complex64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

fn frobenius(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian eigendecomposition by cyclic Jacobi with complex rotations.
///
/// Rejects non-Hermitian input. Converges when the off-diagonal Frobenius
/// norm falls below ~n·ε times the matrix norm; eigenvalues are then
/// refreshed with Rayleigh quotients against the original matrix, which
/// tightens them to O(ε·‖M‖). Downstream propagation multiplies eigenvalues
/// by times of order 1e8, so that refresh carries real weight.
pub fn hermitian_eig(op: &OperatorMatrix) -> Result<EigenDecomposition> {
    op.verify_hermitian()?;
    let n = op.dim();
    let mut a = op.mat.clone();
    let mut v: Array2<Complex64> = Array2::eye(n);

    let scale = frobenius(&a).max(f64::MIN_POSITIVE);
    let target = (n as f64) * 1e-15 * scale;
    let max_sweeps = 60;

    let mut converged = false;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= target {
            converged = true;
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // Phase e^{iφ} of the pivot and the real rotation angle θ with
                // tan(2θ) = 2|apq| / (aqq − app).
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_ph = phase * s; // s e^{iφ}
                let s_ph_c = s_ph.conj();

                // Columns p, q of A (right multiply by J).
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c - aiq * s_ph_c;
                    a[(i, q)] = aip * s_ph + aiq * c;
                }
                // Rows p, q of A (left multiply by J†).
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c - aqj * s_ph;
                    a[(q, j)] = apj * s_ph_c + aqj * c;
                }
                // Clean the pivot pair exactly; diagonals stay real.
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                // Accumulate V ← V·J.
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * s_ph_c;
                    v[(i, q)] = vip * s_ph + viq * c;
                }
            }
        }
    }

    if !converged {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        return Err(Error::EigNotConverged {
            sweeps: max_sweeps,
            off_norm: (2.0 * off).sqrt(),
        });
    }

    // Rayleigh-quotient refresh of the eigenvalues against the original matrix.
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let col = v.column(j);
            let mcol = op.mat.dot(&col.to_owned());
            let rq: Complex64 = col.iter().zip(mcol.iter()).map(|(x, y)| x.conj() * y).sum();
            (rq.re, j)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("eigenvalues are finite"));

    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vectors = Array2::zeros((n, n));
    for (out_col, (_, src_col)) in pairs.iter().enumerate() {
        for i in 0..n {
            vectors[(i, out_col)] = v[(i, *src_col)];
        }
    }

    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
    })
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column j as a state on the given operator's space.
    pub fn eigenvector(&self, op_space: crate::fock::FockSpace, j: usize) -> StateVector {
        StateVector {
            space: op_space,
            amps: self.vectors.column(j).to_owned(),
        }
    }

    /// max |V†V − I|.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let vh = self.vectors.t().mapv(|z| z.conj());
        let g = vh.dot(&self.vectors);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// max |V Λ V† − M| against a reference matrix.
    pub fn reconstruction_defect(&self, m: &Array2<Complex64>) -> f64 {
        let n = self.dim();
        let mut lam_vh = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                lam_vh[(i, j)] = self.vectors[(j, i)].conj() * self.eigenvalues[i];
            }
        }
        let rec = self.vectors.dot(&lam_vh);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((rec[(i, j)] - m[(i, j)]).norm());
            }
        }
        worst
    }

    /// V·exp(−iΛt)·V†·ψ — exact propagation for any t in one application.
    pub fn propagate(&self, psi: &StateVector, t: f64) -> StateVector {
        let n = self.dim();
        // coeffs = V† ψ
        let mut coeffs = Array1::zeros(n);
        for j in 0..n {
            let mut acc = ZERO;
            for i in 0..n {
                acc += self.vectors[(i, j)].conj() * psi.amps[i];
            }
            coeffs[j] = acc;
        }
        for (j, cj) in coeffs.iter_mut().enumerate() {
            let phase = -self.eigenvalues[j] * t;
            *cj *= Complex64::from_polar(1.0, phase);
        }
        let mut out = Array1::zeros(n);
        for j in 0..n {
            let cj = coeffs[j];
            if cj == ZERO {
                continue;
            }
            for i in 0..n {
                out[i] += self.vectors[(i, j)] * cj;
            }
        }
        StateVector {
            space: psi.space,
            amps: out,
        }
    }
}

/// Eigendecomposition cached for repeated exact propagation under one
/// Hermitian Hamiltonian.
#[derive(Debug, Clone)]
pub struct ClosedPropagator {
    pub space: crate::fock::FockSpace,
    pub eig: EigenDecomposition,
}

impl ClosedPropagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        Ok(ClosedPropagator {
            space: h.space,
            eig: hermitian_eig(h)?,
        })
    }

    pub fn evolve(&self, psi0: &StateVector, t: f64) -> StateVector {
        self.eig.propagate(psi0, t)
    }
}

/// exp(−i H t) ψ0 through a fresh eigendecomposition of H.
///
/// Exact at arbitrary t in a single application; callers doing many times
/// should hold a [`ClosedPropagator`] instead.
pub fn evolve_closed(h: &OperatorMatrix, psi0: &StateVector, t: f64) -> Result<StateVector> {
    psi0.check_normalized()?;
    Ok(ClosedPropagator::new(h)?.evolve(psi0, t))
}

/// Dense exp(M) by scaling-and-squaring with a Taylor kernel.
///
/// The argument is scaled so ‖M‖₁/2^s ≤ 0.5; the Taylor series then
/// converges past machine precision in ≤ 23 terms.
pub fn matrix_exp(m: &Array2<Complex64>) -> Array2<Complex64> {
    let n = m.nrows();
    let norm = one_norm(m);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m.mapv(|z| z / 2f64.powi(s as i32));

    let mut result: Array2<Complex64> = Array2::eye(n);
    let mut term: Array2<Complex64> = Array2::eye(n);
    for k in 1..=25 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        result = &result + &term;
        if one_norm(&term) < 1e-17 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Fixed-step propagator U ≈ exp(−i H dt) for a (possibly non-Hermitian) H.
///
/// Guards ‖H‖₁·dt ≤ 0.1 so that callers stepping with U resolve the
/// generator's fastest timescale; the exponential itself is accurate to
/// ~1e-12 regardless.
pub fn fixed_step_propagator(h: &OperatorMatrix, dt: f64) -> Result<OperatorMatrix> {
    if dt <= 0.0 {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    let norm = one_norm(&h.mat);
    let norm_dt = norm * dt;
    if norm_dt > STEP_NORM_GUARD {
        return Err(Error::StepTooLarge {
            norm_dt,
            suggested_dt: STEP_NORM_GUARD / norm,
        });
    }
    let gen = h.mat.mapv(|z| z * Complex64::new(0.0, -dt));
    Ok(OperatorMatrix {
        space: h.space,
        mat: matrix_exp(&gen),
        hermitian: false,
    })
}

/// exp(G t) ψ via a vector-only Taylor sum with sub-stepping so each
/// segment satisfies ‖G‖₁·Δt ≤ 0.5. `g_norm` is (an upper bound on) ‖G‖₁.
pub fn exp_apply(
    g: &Array2<Complex64>,
    g_norm: f64,
    psi: &Array1<Complex64>,
    t: f64,
) -> Array1<Complex64> {
    if t == 0.0 {
        return psi.clone();
    }
    let segments = (g_norm * t.abs() / 0.5).ceil().max(1.0) as usize;
    let dt = t / segments as f64;
    let mut state = psi.clone();
    for _ in 0..segments {
        let mut acc = state.clone();
        let mut term = state;
        for k in 1..=30 {
            term = g.dot(&term).mapv(|z| z * (dt / k as f64));
            acc = &acc + &term;
            let tn: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let an: f64 = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if tn < 1e-17 * an {
                break;
            }
        }
        state = acc;
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation_cavity, number_cavity, FockSpace};

    fn op_from(
        space: FockSpace,
        entries: &[(usize, usize, Complex64)],
        herm: bool,
    ) -> OperatorMatrix {
        let mut m = Array2::zeros((space.dim(), space.dim()));
        for &(i, j, z) in entries {
            m[(i, j)] = z;
        }
        OperatorMatrix::new(space, m, herm).unwrap()
    }

    #[test]
    fn pauli_x_spectrum() {
        let s = FockSpace::new(2, 1).unwrap();
        let omega = 0.37;
        let m = op_from(
            s,
            &[
                (0, 1, Complex64::new(omega, 0.0)),
                (1, 0, Complex64::new(omega, 0.0)),
            ],
            true,
        );
        let eig = hermitian_eig(&m).unwrap();
        assert!((eig.eigenvalues[0] + omega).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - omega).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_sorted() {
        let s = FockSpace::new(3, 1).unwrap();
        let m = op_from(
            s,
            &[
                (0, 0, Complex64::new(2.0, 0.0)),
                (1, 1, Complex64::new(-1.0, 0.0)),
                (2, 2, Complex64::new(0.5, 0.0)),
            ],
            true,
        );
        let eig = hermitian_eig(&m).unwrap();
        assert_eq!(eig.eigenvalues.len(), 3);
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((eig.eigenvalues[1] - 0.5).abs() < 1e-15);
        assert!((eig.eigenvalues[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_level_resonant_splitting() {
        // [[e0, w],[w, e0]] has splitting 2w; with w = 18√3 g³ and g = 1e-3
        // this is the Casimir-Rabi splitting 6.2354e-8.
        let g: f64 = 1e-3;
        let w = 18.0 * 3f64.sqrt() * g.powi(3);
        let e0 = 3.0 - 6.0 * g * g;
        let s = FockSpace::new(2, 1).unwrap();
        let m = op_from(
            s,
            &[
                (0, 0, Complex64::new(e0, 0.0)),
                (1, 1, Complex64::new(e0, 0.0)),
                (0, 1, Complex64::new(w, 0.0)),
                (1, 0, Complex64::new(w, 0.0)),
            ],
            true,
        );
        let eig = hermitian_eig(&m).unwrap();
        let split = eig.eigenvalues[1] - eig.eigenvalues[0];
        let expected = 36.0 * 3f64.sqrt() * 1e-9;
        assert!((expected - 6.2354e-8).abs() / expected < 1e-4);
        // eigenvalues live at scale |e0| ≈ 3, so their difference carries a
        // few ulps of that scale
        assert!((split - expected).abs() < 5e-14, "split = {split:e}");
    }

    #[test]
    fn random_hermitian_reconstruction_and_orthonormality() {
        use rand::prelude::*;
        use rand_chacha::ChaCha12Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let s = FockSpace::new(6, 5).unwrap();
        let d = s.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            m[(i, i)] = Complex64::new(rng.random::<f64>() - 0.5, 0.0);
            for j in (i + 1)..d {
                let z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let op = OperatorMatrix::new(s, m, true).unwrap();
        let eig = hermitian_eig(&op).unwrap();
        let scale = op.max_abs();
        assert!(eig.reconstruction_defect(&op.mat) <= 1e-9 * scale);
        assert!(eig.orthonormality_defect() <= 1e-10);
        // eigenvalue sum = trace
        let sum: f64 = eig.eigenvalues.iter().sum();
        let tr = op.trace().re;
        assert!((sum - tr).abs() <= 1e-9 * tr.abs().max(1.0));
    }

    #[test]
    fn non_hermitian_rejected_with_asymmetry() {
        let s = FockSpace::new(2, 1).unwrap();
        let m = op_from(s, &[(0, 1, Complex64::new(1.0, 0.0))], false);
        match hermitian_eig(&m) {
            Err(Error::NonHermitian { max_asymmetry, .. }) => {
                assert!((max_asymmetry - 1.0).abs() < 1e-15)
            }
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }

    #[test]
    fn closed_evolution_identity_and_phase() {
        let s = FockSpace::new(3, 2).unwrap();
        let omega_c = 1.5;
        let h = number_cavity(&s).scale_re(omega_c);
        let psi0 = s.basis_state(1, 0).unwrap();
        // t = 0 is the identity
        let same = evolve_closed(&h, &psi0, 0.0).unwrap();
        assert!((same.inner(&psi0).re - 1.0).abs() < 1e-14);
        // |1,0> just picks up e^{-i w t}
        let t = 2.31;
        let out = evolve_closed(&h, &psi0, t).unwrap();
        let expect = Complex64::from_polar(1.0, -omega_c * t);
        assert!((out.amps[s.index(1, 0)] - expect).norm() < 1e-12);
        assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_evolution_composes() {
        let s = FockSpace::new(3, 3).unwrap();
        let a = annihilation_cavity(&s);
        let x = a.add(&a.dagger());
        let h = number_cavity(&s).add(&x.scale_re(0.2));
        let prop = ClosedPropagator::new(&h).unwrap();
        let psi0 = s.basis_state(1, 1).unwrap();
        let one_shot = prop.evolve(&psi0, 0.9 + 1.7);
        let two_step = prop.evolve(&prop.evolve(&psi0, 0.9), 1.7);
        let diff: f64 = one_shot
            .amps
            .iter()
            .zip(two_step.amps.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-9);
    }

    #[test]
    fn propagator_identity_for_zero_h() {
        let s = FockSpace::new(2, 2).unwrap();
        let h = OperatorMatrix::zeros(s);
        let u = fixed_step_propagator(&h, 0.1).unwrap();
        assert!(u.sub(&OperatorMatrix::identity(s)).max_abs() < 1e-15);
    }

    #[test]
    fn propagator_norm_decay_matches_closed_form() {
        // H = −(i/2) γ a†a: ‖U ψ‖² = e^{−γ dt} for ψ = |1,0>.
        let s = FockSpace::new(3, 1).unwrap();
        let gamma = 0.8;
        let h = number_cavity(&s).scale(Complex64::new(0.0, -gamma / 2.0));
        let dt = 0.05;
        let u = fixed_step_propagator(&h, dt).unwrap();
        let psi = s.basis_state(1, 0).unwrap();
        let n2 = u.apply(&psi).norm_sq();
        assert!((n2 - (-gamma * dt).exp()).abs() < 1e-13);
    }

    #[test]
    fn propagator_semigroup() {
        let s = FockSpace::new(3, 2).unwrap();
        let a = annihilation_cavity(&s);
        let h = number_cavity(&s)
            .add(&a.add(&a.dagger()).scale_re(0.3))
            .scale_re(0.2);
        let u1 = fixed_step_propagator(&h, 0.04).unwrap();
        let u2 = fixed_step_propagator(&h, 0.08).unwrap();
        let diff = u1.matmul(&u1).sub(&u2).max_abs();
        assert!(diff < 1e-10);
    }

    #[test]
    fn propagator_of_hermitian_is_unitary() {
        let s = FockSpace::new(4, 3).unwrap();
        let a = annihilation_cavity(&s);
        let h = number_cavity(&s).add(&a.add(&a.dagger()).scale_re(0.11));
        let dt = 0.1 / one_norm(&h.mat);
        let u = fixed_step_propagator(&h, dt).unwrap();
        let g = u.dagger().matmul(&u);
        let defect = g.sub(&OperatorMatrix::identity(s)).max_abs();
        assert!(defect <= 1e-10, "unitarity defect {defect:e}");
    }

    #[test]
    fn step_guard_rejects_large_dt() {
        let s = FockSpace::new(3, 1).unwrap();
        let h = number_cavity(&s);
        match fixed_step_propagator(&h, 1.0) {
            Err(Error::StepTooLarge { suggested_dt, .. }) => {
                assert!(suggested_dt > 0.0 && suggested_dt < 1.0)
            }
            other => panic!("expected StepTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn exp_apply_matches_dense_exponential() {
        let s = FockSpace::new(4, 2).unwrap();
        let a = annihilation_cavity(&s);
        let h = number_cavity(&s).add(&a.add(&a.dagger()).scale_re(0.4));
        let gen = h.mat.mapv(|z| z * Complex64::new(0.0, -1.0));
        let t = 3.7;
        let u = matrix_exp(&gen.mapv(|z| z * t));
        let psi = s.basis_state(2, 1).unwrap();
        let dense = u.dot(&psi.amps);
        let lazy = exp_apply(&gen, one_norm(&gen), &psi.amps, t);
        let diff: f64 = dense
            .iter()
            .zip(lazy.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-12);
    }
}
