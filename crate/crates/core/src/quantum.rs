// SPDX-License-Identifier: Apache-2.0

//! Dense state vectors, operators and exact propagators.
//!
//! Basis ordering is little-endian: bit `k` of a basis index is the state of
//! spin `k`. Spin 0 is the central (sensor) spin, spins `1..=n` are the dark
//! spins. Bit value 0 is `|0⟩` for the sensor and `|↑⟩` for a dark spin.
//!
//! Propagators are built from a Hermitian eigendecomposition, so
//! `exp(-iHt)` is exact up to rounding for any `t`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used for the normalization and hermiticity checks.
pub const TOLERANCE: f64 = 1e-12;

/// Pure state of `n_spins` two-level systems.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_spins: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Computational basis state `|index⟩`.
    pub fn basis(n_spins: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_spins;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { n_spins, amps })
    }

    /// Wraps raw amplitudes. The vector must have length `2^n_spins` and
    /// unit norm within `1e-10`.
    pub fn from_amplitudes(n_spins: usize, amps: Vec<C64>) -> Result<Self> {
        let dim = 1usize << n_spins;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { n_spins, amps })
    }

    pub(crate) fn from_raw(n_spins: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1usize << n_spins);
        Self { n_spins, amps }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Dense complex operator on the full Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps a matrix without asserting anything beyond squareness and a
    /// power-of-two side.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let dim = entries.nrows();
        check_dim(dim, entries.ncols())?;
        if !dim.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two(),
                found: dim,
            });
        }
        Ok(Self {
            entries,
            hermitian: false,
        })
    }

    /// Wraps a matrix and sets the hermitian flag after checking it.
    pub fn hermitian(entries: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(entries)?;
        let deviation = hermitian_deviation(&op.entries);
        let scale = op.entries.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if deviation > TOLERANCE * scale {
            return Err(Error::NotHermitian { deviation });
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    /// Operator product `self · rhs`; the result is not flagged hermitian.
    pub fn mul(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_dim(self.dim(), rhs.dim())?;
        Ok(OperatorMatrix {
            entries: &self.entries * &rhs.entries,
            hermitian: false,
        })
    }

    /// `self + scale · rhs`. Stays hermitian when both are and `scale` is real.
    pub fn add_scaled(&mut self, rhs: &OperatorMatrix, scale: f64) -> Result<()> {
        check_dim(self.dim(), rhs.dim())?;
        self.entries += &rhs.entries * C64::new(scale, 0.0);
        self.hermitian &= rhs.hermitian;
        Ok(())
    }

    /// Frobenius norm of `[self, rhs]`.
    pub fn commutator_norm(&self, rhs: &OperatorMatrix) -> Result<f64> {
        check_dim(self.dim(), rhs.dim())?;
        let c = &self.entries * &rhs.entries - &rhs.entries * &self.entries;
        Ok(c.norm())
    }
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Pauli matrices, `σ_x`, `σ_y`, `σ_z`.
pub fn pauli_x() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Matrix2<C64> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// Projector onto `|1⟩`.
pub fn projector_one() -> Matrix2<C64> {
    Matrix2::new(ZERO, ZERO, ZERO, ONE)
}

/// `identity ⊗ … ⊗ local_op ⊗ … ⊗ identity` with `local_op` on `site`.
pub fn embed_single_spin_op(
    local_op: &Matrix2<C64>,
    site: usize,
    n_spins: usize,
) -> Result<OperatorMatrix> {
    if site >= n_spins {
        return Err(Error::SiteOutOfRange {
            index: site,
            n_spins,
        });
    }
    let dim = 1usize << n_spins;
    let mask = 1usize << site;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let b = (col & mask != 0) as usize;
        for a in 0..2 {
            let v = local_op[(a, b)];
            if v != ZERO {
                let row = if a == 1 { col | mask } else { col & !mask };
                m[(row, col)] = v;
            }
        }
    }
    let hermitian = hermitian_deviation(&DMatrix::from_iterator(
        2,
        2,
        local_op.iter().copied(),
    )) <= TOLERANCE;
    Ok(OperatorMatrix {
        entries: m,
        hermitian,
    })
}

/// Which spins a pulse acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Central,
    /// Collective pulse on every dark spin.
    DarkAll,
    /// A single dark spin, zero-based among the dark spins (site `i + 1`).
    Dark(usize),
}

/// Rotation axis of an ideal pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
    MinusX,
    MinusY,
}

impl Axis {
    fn unit(self) -> (f64, f64, f64) {
        match self {
            Axis::X => (1.0, 0.0, 0.0),
            Axis::Y => (0.0, 1.0, 0.0),
            Axis::Z => (0.0, 0.0, 1.0),
            Axis::MinusX => (-1.0, 0.0, 0.0),
            Axis::MinusY => (0.0, -1.0, 0.0),
        }
    }
}

/// `exp(-i·angle·σ_axis/2)`.
pub fn rotation_matrix(axis: Axis, angle: f64) -> Matrix2<C64> {
    let (nx, ny, nz) = axis.unit();
    let (s, c) = (angle / 2.0).sin_cos();
    // cos(θ/2)·1 − i sin(θ/2)(n·σ)
    Matrix2::new(
        C64::new(c, -s * nz),
        C64::new(-s * ny, -s * nx),
        C64::new(s * ny, -s * nx),
        C64::new(c, s * nz),
    )
}

/// Applies a 2×2 unitary to `site` in place.
pub(crate) fn apply_local(amps: &mut [C64], site: usize, m: &Matrix2<C64>) {
    let mask = 1usize << site;
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    for i0 in 0..amps.len() {
        if i0 & mask != 0 {
            continue;
        }
        let i1 = i0 | mask;
        let (a0, a1) = (amps[i0], amps[i1]);
        amps[i0] = m00 * a0 + m01 * a1;
        amps[i1] = m10 * a0 + m11 * a1;
    }
}

/// Applies `m` to `site` only on the subspace where the central spin is `|1⟩`.
pub(crate) fn apply_controlled_local(amps: &mut [C64], site: usize, m: &Matrix2<C64>) {
    let mask = 1usize << site;
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    for i0 in 0..amps.len() {
        if i0 & mask != 0 || i0 & 1 == 0 {
            continue;
        }
        let i1 = i0 | mask;
        let (a0, a1) = (amps[i0], amps[i1]);
        amps[i0] = m00 * a0 + m01 * a1;
        amps[i1] = m10 * a0 + m11 * a1;
    }
}

pub(crate) fn target_sites(target: Target, n_spins: usize) -> Result<Vec<usize>> {
    match target {
        Target::Central => {
            if n_spins == 0 {
                return Err(Error::SiteOutOfRange { index: 0, n_spins });
            }
            Ok(vec![0])
        }
        Target::DarkAll => Ok((1..n_spins).collect()),
        Target::Dark(i) => {
            if i + 1 >= n_spins {
                return Err(Error::SiteOutOfRange {
                    index: i + 1,
                    n_spins,
                });
            }
            Ok(vec![i + 1])
        }
    }
}

/// Applies `exp(-i·angle·σ_axis/2)` to every targeted spin.
pub fn apply_rotation(
    state: &StateVector,
    target: Target,
    axis: Axis,
    angle: f64,
) -> Result<StateVector> {
    let sites = target_sites(target, state.n_spins)?;
    let m = rotation_matrix(axis, angle);
    let mut out = state.clone();
    for site in sites {
        apply_local(&mut out.amps, site, &m);
    }
    Ok(out)
}

/// Applies `exp(-i·angle·σ_axis/2)` to dark spin `dark` conditioned on the
/// central spin being in `|1⟩`.
pub fn apply_controlled_rotation(
    state: &StateVector,
    dark: usize,
    axis: Axis,
    angle: f64,
) -> Result<StateVector> {
    let site = dark + 1;
    if site >= state.n_spins {
        return Err(Error::SiteOutOfRange {
            index: site,
            n_spins: state.n_spins,
        });
    }
    let mut out = state.clone();
    apply_controlled_local(&mut out.amps, site, &rotation_matrix(axis, angle));
    Ok(out)
}

/// Probability of reading the central spin in `|1⟩`.
pub fn probability_central_one(state: &StateVector) -> f64 {
    let p: f64 = state
        .amps
        .iter()
        .enumerate()
        .filter(|(k, _)| k & 1 == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    p.clamp(0.0, 1.0)
}

/// `2·⟨1|ρ_c|0⟩`-style off-diagonal of the reduced central-spin state:
/// `2 Σ_d a(0,d)·conj(a(1,d))`. Equals 1 for `(|0⟩+|1⟩)/√2 ⊗ |d⟩`.
pub fn central_coherence(state: &StateVector) -> C64 {
    let mut c = ZERO;
    for k in (0..state.amps.len()).step_by(2) {
        c += state.amps[k] * state.amps[k + 1].conj();
    }
    c * 2.0
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

/// Eigendecomposition of a Hermitian operator, reused for any evolution time.
#[derive(Clone, Debug)]
pub struct Propagator {
    dim: usize,
    eigenvalues: Vec<f64>,
    /// `None` when the operator was already diagonal.
    eigenvectors: Option<DMatrix<C64>>,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        if !h.hermitian {
            return Err(Error::NotHermitian {
                deviation: hermitian_deviation(&h.entries),
            });
        }
        let m = &h.entries;
        let dim = m.nrows();
        let diagonal = (0..dim).all(|j| (0..dim).all(|i| i == j || m[(i, j)] == ZERO));
        if diagonal {
            return Ok(Self {
                dim,
                eigenvalues: (0..dim).map(|i| m[(i, i)].re).collect(),
                eigenvectors: None,
            });
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(m.clone());
        Ok(Self {
            dim,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: Some(eig.eigenvectors),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.eigenvalues
            .iter()
            .map(|&e| C64::from_polar(1.0, -e * t))
            .collect()
    }

    /// Dense `exp(-iHt)`.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let phases = self.phases(t);
        match &self.eigenvectors {
            None => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases)),
            Some(v) => {
                let mut scaled = v.clone();
                for (j, p) in phases.iter().enumerate() {
                    scaled.column_mut(j).scale_mut_complex(*p);
                }
                scaled * v.adjoint()
            }
        }
    }

    /// `exp(-iHt)|state⟩` without forming the dense unitary.
    pub fn apply(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        check_dim(self.dim, state.dim())?;
        let phases = self.phases(t);
        let amps = match &self.eigenvectors {
            None => state
                .amps
                .iter()
                .zip(&phases)
                .map(|(a, p)| a * p)
                .collect(),
            Some(v) => {
                let psi = nalgebra::DVector::from_column_slice(&state.amps);
                let mut coeffs = v.adjoint() * psi;
                for (c, p) in coeffs.iter_mut().zip(&phases) {
                    *c *= p;
                }
                (v * coeffs).iter().copied().collect()
            }
        };
        Ok(StateVector::from_raw(state.n_spins, amps))
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: C64);
}

impl<S> ScaleComplex for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_complex(&mut self, s: C64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

/// `exp(-iHt)|state⟩` for a time-independent Hermitian `h`.
pub fn evolve(state: &StateVector, h: &OperatorMatrix, t: f64) -> Result<StateVector> {
    check_dim(h.dim(), state.dim())?;
    Propagator::new(h)?.apply(state, t)
}

/// Dense matrix-vector product `out = m · v` over column-major storage.
pub(crate) fn matvec(m: &DMatrix<C64>, v: &[C64], out: &mut [C64]) {
    let n = v.len();
    let data = m.as_slice();
    out.iter_mut().for_each(|o| *o = ZERO);
    for (j, &vj) in v.iter().enumerate() {
        if vj == ZERO {
            continue;
        }
        let col = &data[j * n..(j + 1) * n];
        for (o, &mij) in out.iter_mut().zip(col) {
            *o += mij * vj;
        }
    }
}

/// Dense matrix of a sequence of single-site unitaries `(site, m)`, applied
/// in order, used when fusing pulses into cached propagators.
pub(crate) fn local_unitary_matrix(ops: &[(usize, Matrix2<C64>)], n_spins: usize) -> DMatrix<C64> {
    let dim = 1usize << n_spins;
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for col in 0..dim {
        let column = &mut u.as_mut_slice()[col * dim..(col + 1) * dim];
        for (site, m) in ops {
            apply_local(column, *site, m);
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn embed_identity_is_identity() {
        let id = Matrix2::identity();
        for site in 0..3 {
            let op = embed_single_spin_op(&id, site, 3).unwrap();
            assert_eq!(op.entries(), &DMatrix::<C64>::identity(8, 8));
        }
    }

    #[test]
    fn embed_half_sigma_z_single_spin() {
        let op = embed_single_spin_op(&(pauli_z() * c(0.5)), 0, 1).unwrap();
        assert_eq!(op.entries()[(0, 0)], c(0.5));
        assert_eq!(op.entries()[(1, 1)], c(-0.5));
        assert!(op.is_hermitian());
    }

    #[test]
    fn embed_product_eigenvalues() {
        // ZZ/4 on two spins: basis 00,01,10,11 → +,−,−,+ quarters
        let z = pauli_z() * c(0.5);
        let a = embed_single_spin_op(&z, 0, 2).unwrap();
        let b = embed_single_spin_op(&z, 1, 2).unwrap();
        let p = a.mul(&b).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| p.entries()[(i, i)].re).collect();
        assert_eq!(diag, vec![0.25, -0.25, -0.25, 0.25]);
        assert_eq!(diag.iter().filter(|&&d| d > 0.0).count(), 2);
    }

    #[test]
    fn embed_rejects_bad_site() {
        assert_eq!(
            embed_single_spin_op(&pauli_x(), 3, 3).unwrap_err(),
            Error::SiteOutOfRange {
                index: 3,
                n_spins: 3
            }
        );
    }

    #[test]
    fn little_endian_ordering() {
        // flipping spin 1 of |000⟩ lands on index 0b010
        let s = StateVector::basis(3, 0).unwrap();
        let out = apply_rotation(&s, Target::Dark(0), Axis::X, PI).unwrap();
        assert!((out.amplitudes()[0b010].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn evolve_zero_hamiltonian() {
        let s = StateVector::basis(2, 1).unwrap();
        let out = evolve(&s, &OperatorMatrix::zeros(4), 3.7).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn evolve_half_pi_sigma_x() {
        let h = OperatorMatrix::hermitian(
            DMatrix::from_iterator(2, 2, (pauli_x() * c(PI / 2.0)).iter().copied()),
        )
        .unwrap();
        let s = StateVector::basis(1, 0).unwrap();
        let out = evolve(&s, &h, 1.0).unwrap();
        let expected =
            StateVector::from_amplitudes(1, vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)]).unwrap();
        assert!((fidelity(&out, &expected).unwrap() - 1.0).abs() < 1e-12);
        assert!((out.amplitudes()[1] - C64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn evolve_rejects_non_hermitian() {
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        let h = OperatorMatrix::new(m).unwrap();
        let s = StateVector::basis(1, 0).unwrap();
        assert!(matches!(evolve(&s, &h, 1.0), Err(Error::NotHermitian { .. })));
        let big = OperatorMatrix::zeros(4);
        assert!(matches!(
            evolve(&s, &big, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rotation_zero_and_pi() {
        let s = StateVector::basis(2, 0).unwrap();
        let same = apply_rotation(&s, Target::Central, Axis::Y, 0.0).unwrap();
        assert_eq!(same, s);
        let flipped = apply_rotation(&s, Target::Central, Axis::X, PI).unwrap();
        assert!((probability_central_one(&flipped) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_half_pulses_make_a_pi_pulse() {
        let raw: Vec<C64> = (0..8)
            .map(|k| C64::new(k as f64 + 1.0, 0.5 * k as f64))
            .collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let s = StateVector::from_amplitudes(3, raw.iter().map(|z| z / norm).collect()).unwrap();
        let half = apply_rotation(&s, Target::DarkAll, Axis::Y, PI / 2.0).unwrap();
        let twice = apply_rotation(&half, Target::DarkAll, Axis::Y, PI / 2.0).unwrap();
        let once = apply_rotation(&s, Target::DarkAll, Axis::Y, PI).unwrap();
        for (a, b) in twice.amplitudes().iter().zip(once.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn bad_dark_index() {
        let s = StateVector::basis(2, 0).unwrap();
        assert!(apply_rotation(&s, Target::Dark(1), Axis::X, 1.0).is_err());
        assert!(apply_controlled_rotation(&s, 1, Axis::X, 1.0).is_err());
    }

    #[test]
    fn probability_and_coherence() {
        let s = StateVector::basis(3, 0b110).unwrap();
        assert_eq!(probability_central_one(&s), 0.0);
        let plus = apply_rotation(&StateVector::basis(3, 0).unwrap(), Target::Central, Axis::Y, PI / 2.0)
            .unwrap();
        assert!((probability_central_one(&plus) - 0.5).abs() < 1e-15);
        assert!((central_coherence(&plus) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn fidelity_basics() {
        let a = StateVector::basis(2, 0).unwrap();
        let b = StateVector::basis(2, 3).unwrap();
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        assert!(fidelity(&a, &StateVector::basis(1, 0).unwrap()).is_err());
    }

    #[test]
    fn controlled_rotation_leaves_zero_branch() {
        let s = StateVector::basis(2, 0).unwrap();
        let out = apply_controlled_rotation(&s, 0, Axis::X, PI).unwrap();
        assert_eq!(out, s);
        let s1 = StateVector::basis(2, 1).unwrap();
        let out1 = apply_controlled_rotation(&s1, 0, Axis::X, PI).unwrap();
        assert!((out1.amplitudes()[0b11].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fused_local_matrix_matches_in_place() {
        let m = rotation_matrix(Axis::MinusY, 0.7);
        let u = local_unitary_matrix(&[(1, m), (2, m)], 3);
        let s = StateVector::basis(3, 0b101).unwrap();
        let mut out = vec![ZERO; 8];
        matvec(&u, s.amplitudes(), &mut out);
        let direct = apply_rotation(&s, Target::DarkAll, Axis::MinusY, 0.7).unwrap();
        for (a, b) in out.iter().zip(direct.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
