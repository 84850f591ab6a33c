//! Truncated two-mode bosonic Fock space with dense complex linear algebra.
//!
//! The basis is the product basis |n,k⟩ = |n⟩_c ⊗ |k⟩_m with photon index
//! `n < n_cav` and phonon index `k < n_mech`. The flat index is photon-major:
//! `index(n, k) = n * n_mech + k`. All serialization uses this ordering.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hermiticity verification tolerance, relative to the largest entry.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Tolerance on |‖ψ‖² − 1| for a state labeled normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    pub n_cav: usize,
    pub n_mech: usize,
}

impl FockSpace {
    pub fn new(n_cav: usize, n_mech: usize) -> Result<Self> {
        if n_cav < 1 || n_mech < 1 {
            return Err(Error::InvalidSpace { n_cav, n_mech });
        }
        Ok(FockSpace { n_cav, n_mech })
    }

    pub fn dim(&self) -> usize {
        self.n_cav * self.n_mech
    }

    /// Photon-major flat index of |n,k⟩.
    pub fn index(&self, n: usize, k: usize) -> usize {
        debug_assert!(n < self.n_cav && k < self.n_mech);
        n * self.n_mech + k
    }

    /// Inverse of [`FockSpace::index`]: (photon, phonon) occupation of a flat index.
    pub fn occupation(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_mech, idx % self.n_mech)
    }

    /// Normalized basis ket |n,k⟩.
    pub fn basis_state(&self, n: usize, k: usize) -> Result<StateVector> {
        if n >= self.n_cav || k >= self.n_mech {
            return Err(Error::Invalid(format!(
                "basis state |{n},{k}> outside cutoffs ({}, {})",
                self.n_cav, self.n_mech
            )));
        }
        let mut amps = Array1::zeros(self.dim());
        amps[self.index(n, k)] = Complex64::new(1.0, 0.0);
        Ok(StateVector { space: *self, amps })
    }
}

/// A ket on a truncated two-mode Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub space: FockSpace,
    pub amps: Array1<Complex64>,
}

impl StateVector {
    pub fn new(space: FockSpace, amps: Array1<Complex64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} amplitudes, space dim is {}",
                amps.len(),
                space.dim()
            )));
        }
        Ok(StateVector { space, amps })
    }

    pub fn zero(space: FockSpace) -> Self {
        StateVector {
            space,
            amps: Array1::zeros(space.dim()),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        let amps = if n > 0.0 {
            self.amps.mapv(|a| a / n)
        } else {
            self.amps.clone()
        };
        StateVector {
            space: self.space,
            amps,
        }
    }

    pub fn check_normalized(&self) -> Result<()> {
        let dev = (self.norm_sq() - 1.0).abs();
        if dev > NORMALIZATION_TOL {
            return Err(Error::Invalid(format!(
                "state not normalized: |norm^2 - 1| = {dev:.3e}"
            )));
        }
        Ok(())
    }

    /// ⟨a†a⟩ of the (assumed normalized) state.
    pub fn photon_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let (n, _) = self.space.occupation(i);
                n as f64 * a.norm_sqr()
            })
            .sum()
    }

    /// ⟨b†b⟩ of the (assumed normalized) state.
    pub fn phonon_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let (_, k) = self.space.occupation(i);
                k as f64 * a.norm_sqr()
            })
            .sum()
    }

    /// Total occupation probability of the highest photon level and of the
    /// highest phonon level. Used as the truncation-leakage guard: values
    /// above ~1e-6 mean the cutoffs are biting.
    pub fn top_level_occupation(&self) -> (f64, f64) {
        let mut top_photon = 0.0;
        let mut top_phonon = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let (n, k) = self.space.occupation(i);
            let p = a.norm_sqr();
            if n == self.space.n_cav - 1 {
                top_photon += p;
            }
            if k == self.space.n_mech - 1 {
                top_phonon += p;
            }
        }
        (top_photon, top_phonon)
    }

    /// Fidelity |⟨other|self⟩|².
    pub fn overlap_sq(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Dense complex operator on a [`FockSpace`].
///
/// `hermitian` records the builder's claim; `verify_hermitian` checks it
/// against `HERMITICITY_TOL` relative to the largest entry.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub space: FockSpace,
    pub mat: Array2<Complex64>,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(space: FockSpace, mat: Array2<Complex64>, hermitian: bool) -> Result<Self> {
        let d = space.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, space dim is {d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let op = OperatorMatrix {
            space,
            mat,
            hermitian,
        };
        if hermitian {
            op.verify_hermitian()?;
        }
        Ok(op)
    }

    pub fn zeros(space: FockSpace) -> Self {
        OperatorMatrix {
            space,
            mat: Array2::zeros((space.dim(), space.dim())),
            hermitian: true,
        }
    }

    pub fn identity(space: FockSpace) -> Self {
        OperatorMatrix {
            space,
            mat: Array2::eye(space.dim()),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Largest |M_ij - conj(M_ji)| over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let dev = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn verify_hermitian(&self) -> Result<()> {
        let tol = HERMITICITY_TOL * self.max_abs().max(f64::MIN_POSITIVE);
        let asym = self.max_asymmetry();
        if asym > tol {
            return Err(Error::NonHermitian {
                max_asymmetry: asym,
                tol,
            });
        }
        Ok(())
    }

    pub fn dagger(&self) -> OperatorMatrix {
        OperatorMatrix {
            space: self.space,
            mat: self.mat.t().mapv(|z| z.conj()),
            hermitian: self.hermitian,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector {
            space: psi.space,
            amps: self.mat.dot(&psi.amps),
        }
    }

    /// ⟨ψ|M|ψ⟩ for the given (not necessarily normalized) state.
    pub fn expectation(&self, psi: &StateVector) -> Complex64 {
        let m_psi = self.mat.dot(&psi.amps);
        psi.amps
            .iter()
            .zip(m_psi.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            space: self.space,
            mat: self.mat.dot(&other.mat),
            hermitian: false,
        }
    }

    pub fn add(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            space: self.space,
            mat: &self.mat + &other.mat,
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn sub(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            space: self.space,
            mat: &self.mat - &other.mat,
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn scale(&self, z: Complex64) -> OperatorMatrix {
        OperatorMatrix {
            space: self.space,
            mat: self.mat.mapv(|m| m * z),
            hermitian: self.hermitian && z.im == 0.0,
        }
    }

    pub fn scale_re(&self, x: f64) -> OperatorMatrix {
        self.scale(Complex64::new(x, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Matrix element ⟨n,k| M |n',k'⟩.
    pub fn element(&self, bra: (usize, usize), ket: (usize, usize)) -> Complex64 {
        self.mat[(
            self.space.index(bra.0, bra.1),
            self.space.index(ket.0, ket.1),
        )]
    }
}

/// Single-mode annihilation matrix with cutoff `dim`: a|n⟩ = √n |n−1⟩.
fn lowering_single(dim: usize) -> Array2<Complex64> {
    let mut m = Array2::zeros((dim, dim));
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    m
}

/// Kronecker product; row-major, left factor is the slow (cavity) index.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = aij * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Cavity annihilation operator a ⊗ I on the product space.
pub fn annihilation_cavity(space: &FockSpace) -> OperatorMatrix {
    let a = lowering_single(space.n_cav);
    let id = Array2::eye(space.n_mech);
    OperatorMatrix {
        space: *space,
        mat: kron(&a, &id),
        hermitian: false,
    }
}

/// Mechanical annihilation operator I ⊗ b on the product space.
pub fn annihilation_mech(space: &FockSpace) -> OperatorMatrix {
    let b = lowering_single(space.n_mech);
    let id = Array2::eye(space.n_cav);
    OperatorMatrix {
        space: *space,
        mat: kron(&id, &b),
        hermitian: false,
    }
}

/// Photon number operator a†a (diagonal).
pub fn number_cavity(space: &FockSpace) -> OperatorMatrix {
    let mut m = Array2::zeros((space.dim(), space.dim()));
    for i in 0..space.dim() {
        let (n, _) = space.occupation(i);
        m[(i, i)] = Complex64::new(n as f64, 0.0);
    }
    OperatorMatrix {
        space: *space,
        mat: m,
        hermitian: true,
    }
}

/// Phonon number operator b†b (diagonal).
pub fn number_mech(space: &FockSpace) -> OperatorMatrix {
    let mut m = Array2::zeros((space.dim(), space.dim()));
    for i in 0..space.dim() {
        let (_, k) = space.occupation(i);
        m[(i, i)] = Complex64::new(k as f64, 0.0);
    }
    OperatorMatrix {
        space: *space,
        mat: m,
        hermitian: true,
    }
}

// ---------------------------------------------------------------------------
// JSON layout: dims plus row-major [re, im] pairs.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    n_cav: usize,
    n_mech: usize,
    hermitian: bool,
    /// Row-major complex entries as [re, im] pairs.
    data: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    n_cav: usize,
    n_mech: usize,
    /// Photon-major complex amplitudes as [re, im] pairs.
    data: Vec<[f64; 2]>,
}

impl OperatorMatrix {
    pub fn to_json(&self) -> String {
        let data = self.mat.iter().map(|z| [z.re, z.im]).collect();
        serde_json::to_string(&OperatorJson {
            n_cav: self.space.n_cav,
            n_mech: self.space.n_mech,
            hermitian: self.hermitian,
            data,
        })
        .expect("operator serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: OperatorJson =
            serde_json::from_str(s).map_err(|e| Error::Invalid(format!("operator json: {e}")))?;
        let space = FockSpace::new(raw.n_cav, raw.n_mech)?;
        let d = space.dim();
        if raw.data.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "operator json has {} entries, expected {}",
                raw.data.len(),
                d * d
            )));
        }
        let mat = Array2::from_shape_vec(
            (d, d),
            raw.data
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        )
        .expect("shape checked above");
        OperatorMatrix::new(space, mat, raw.hermitian)
    }
}

impl StateVector {
    pub fn to_json(&self) -> String {
        let data = self.amps.iter().map(|z| [z.re, z.im]).collect();
        serde_json::to_string(&StateJson {
            n_cav: self.space.n_cav,
            n_mech: self.space.n_mech,
            data,
        })
        .expect("state serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: StateJson =
            serde_json::from_str(s).map_err(|e| Error::Invalid(format!("state json: {e}")))?;
        let space = FockSpace::new(raw.n_cav, raw.n_mech)?;
        if raw.data.len() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state json has {} amplitudes, expected {}",
                raw.data.len(),
                space.dim()
            )));
        }
        let amps = Array1::from_vec(
            raw.data
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        );
        StateVector::new(space, amps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space44() -> FockSpace {
        FockSpace::new(4, 4).unwrap()
    }

    #[test]
    fn basis_ordering_is_photon_major() {
        let s = space44();
        assert_eq!(s.index(0, 0), 0);
        assert_eq!(s.index(0, 3), 3);
        assert_eq!(s.index(1, 0), 4);
        assert_eq!(s.index(2, 1), 9);
        assert_eq!(s.occupation(9), (2, 1));
    }

    #[test]
    fn invalid_space_rejected() {
        assert!(FockSpace::new(0, 4).is_err());
        assert!(FockSpace::new(4, 0).is_err());
    }

    #[test]
    fn cavity_ladder_elements() {
        let s = space44();
        let a = annihilation_cavity(&s);
        // <0,0| a |1,0> = 1
        assert!((a.element((0, 0), (1, 0)) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        // <1,0| a |2,0> = sqrt(2)
        assert!((a.element((1, 0), (2, 0)).re - 2f64.sqrt()).abs() < 1e-15);
        // a |0,k> = 0 for all k
        for k in 0..4 {
            let v = a.apply(&s.basis_state(0, k).unwrap());
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn mech_ladder_elements() {
        let s = space44();
        let b = annihilation_mech(&s);
        // <0,2| b |0,3> = sqrt(3)
        assert!((b.element((0, 2), (0, 3)).re - 3f64.sqrt()).abs() < 1e-15);
        // b^3 |2,3> = sqrt(6) |2,0>
        let b3 = b.matmul(&b).matmul(&b);
        let v = b3.apply(&s.basis_state(2, 3).unwrap());
        let target = s.basis_state(2, 0).unwrap();
        let amp = target.inner(&v) / 6f64.sqrt();
        assert!((amp - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // b |n,0> = 0
        for n in 0..4 {
            let v = b.apply(&s.basis_state(n, 0).unwrap());
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn truncated_commutator_identity() {
        // [a, a†] = I − n_cav |n_cav−1><n_cav−1|_c ⊗ I_m, exactly.
        let s = space44();
        let a = annihilation_cavity(&s);
        let ad = a.dagger();
        let comm = a.matmul(&ad).sub(&ad.matmul(&a));
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                let (n, _) = s.occupation(i);
                let expected = if i != j {
                    0.0
                } else if n == s.n_cav - 1 {
                    1.0 - s.n_cav as f64
                } else {
                    1.0
                };
                assert!(
                    (comm.mat[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-12,
                    "commutator defect at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn different_tensor_factors_commute() {
        let s = space44();
        let a = annihilation_cavity(&s);
        let b = annihilation_mech(&s);
        let c = a.matmul(&b).sub(&b.matmul(&a));
        assert!(c.max_abs() == 0.0);
    }

    #[test]
    fn hermiticity_check_catches_asymmetry() {
        let s = FockSpace::new(2, 1).unwrap();
        let mut m = Array2::zeros((2, 2));
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let err = OperatorMatrix::new(s, m, true).unwrap_err();
        match err {
            Error::NonHermitian { max_asymmetry, .. } => {
                assert!((max_asymmetry - 1.0).abs() < 1e-15)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn json_layout_is_pinned() {
        // dims plus row-major [re, im] pairs; downstream tooling parses this
        let s = FockSpace::new(2, 1).unwrap();
        let a = annihilation_cavity(&s);
        assert_eq!(
            a.to_json(),
            r#"{"n_cav":2,"n_mech":1,"hermitian":false,"data":[[0.0,0.0],[1.0,0.0],[0.0,0.0],[0.0,0.0]]}"#
        );
        let psi = s.basis_state(1, 0).unwrap();
        assert_eq!(
            psi.to_json(),
            r#"{"n_cav":2,"n_mech":1,"data":[[0.0,0.0],[1.0,0.0]]}"#
        );
    }

    #[test]
    fn json_round_trip() {
        let s = space44();
        let a = annihilation_cavity(&s);
        let back = OperatorMatrix::from_json(&a.to_json()).unwrap();
        assert_eq!(back.space, s);
        assert!(a.sub(&back).max_abs() == 0.0);

        let psi = s.basis_state(2, 1).unwrap();
        let back = StateVector::from_json(&psi.to_json()).unwrap();
        assert!((psi.inner(&back).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn top_level_occupation_reports_leakage() {
        let s = space44();
        let psi = s.basis_state(3, 0).unwrap();
        let (top_n, top_k) = psi.top_level_occupation();
        assert!((top_n - 1.0).abs() < 1e-15);
        assert!(top_k.abs() < 1e-15);
    }
}
