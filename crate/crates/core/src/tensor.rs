//! Dense complex linear algebra over tensor-product Hilbert spaces.
//!
//! Subsystems are addressed by index into a [`HilbertLayout`]. The protocol
//! always uses the order (qubit, cavity, local magnon, remote magnon), and a
//! composite basis index is the row-major flattening of per-factor occupation
//! digits, first factor most significant: `|q c mL mR>` with all factors of
//! dimension 2 maps to `8q + 4c + 2mL + mR`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const QUBIT: usize = 0;
pub const CAVITY: usize = 1;
pub const MAGNON_L: usize = 2;
pub const MAGNON_R: usize = 3;

const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertLayout {
    dims: Vec<usize>,
}

impl HilbertLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(Error::InvalidLayout(format!(
                "expected 1 to 4 factors, got {}",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidLayout(format!("factor dimension {d} < 2")));
        }
        Ok(Self { dims })
    }

    /// Qubit followed by three bosonic modes truncated to `boson_levels`.
    pub fn standard(boson_levels: usize) -> Result<Self> {
        Self::new(vec![2, boson_levels, boson_levels, boson_levels])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Composite index of a product basis ket given per-factor digits.
    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: digits.len(),
            });
        }
        let mut idx = 0;
        for (&d, &n) in digits.iter().zip(&self.dims) {
            if d >= n {
                return Err(Error::InvalidLayout(format!("digit {d} exceeds level count {n}")));
            }
            idx = idx * n + d;
        }
        Ok(idx)
    }

    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for (slot, &n) in digits.iter_mut().zip(&self.dims).rev() {
            *slot = index % n;
            index /= n;
        }
        digits
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.dims.len() {
            return Err(Error::IndexOutOfRange { index, len: self.dims.len() });
        }
        Ok(())
    }
}

/// Square dense complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn diag_real(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|ket><bra|`
    pub fn outer(ket: &[C64], bra: &[C64]) -> Result<Self> {
        if ket.len() != bra.len() {
            return Err(Error::DimensionMismatch { expected: ket.len(), got: bra.len() });
        }
        Ok(Self::from_fn(ket.len(), |i, j| ket[i] * bra[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "matvec length mismatch");
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A B - B A`
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max entrywise `|m - m^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(m + m^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Restriction to the span of the given basis indices, in the given order.
    pub fn restrict(&self, basis: &[usize]) -> Self {
        Self::from_fn(basis.len(), |i, j| self[(basis[i], basis[j])])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in out.data[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Pure state on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: HilbertLayout,
    amps: Vec<C64>,
}

impl StateVector {
    /// Normalizes `amps`; rejects the zero vector.
    pub fn new(layout: HilbertLayout, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), got: amps.len() });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("state vector has zero or non-finite norm".into()));
        }
        Ok(Self { layout, amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    pub fn basis(layout: &HilbertLayout, digits: &[usize]) -> Result<Self> {
        let idx = layout.index_of(digits)?;
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { layout: layout.clone(), amps })
    }

    /// `(|a> + phase |b>) / sqrt(2)` for orthogonal basis kets `a`, `b`.
    pub fn bell(layout: &HilbertLayout, a: &[usize], b: &[usize], phase: C64) -> Result<Self> {
        let ia = layout.index_of(a)?;
        let ib = layout.index_of(b)?;
        if ia == ib {
            return Err(Error::InvalidParameter("Bell components must differ".into()));
        }
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amps[ia] = C64::new(1.0, 0.0);
        amps[ib] = phase;
        Self::new(layout.clone(), amps)
    }

    pub fn product(factors: &[(usize, Vec<C64>)]) -> Result<Self> {
        let layout = HilbertLayout::new(factors.iter().map(|(d, _)| *d).collect())?;
        let mut amps = vec![C64::new(1.0, 0.0)];
        for (d, v) in factors {
            if v.len() != *d {
                return Err(Error::DimensionMismatch { expected: *d, got: v.len() });
            }
            amps = amps.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        Self::new(layout, amps)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply(&self, op: &ComplexMatrix) -> Result<Vec<C64>> {
        if op.dim() != self.amps.len() {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), got: op.dim() });
        }
        Ok(op.matvec(&self.amps))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn from_matrix(layout: HilbertLayout, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.dim() != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), got: matrix.dim() });
        }
        Ok(Self { layout, matrix })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let amps = psi.amplitudes();
        Self {
            layout: psi.layout().clone(),
            matrix: ComplexMatrix::outer(amps, amps).expect("same length"),
        }
    }

    pub fn maximally_mixed(layout: &HilbertLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout: layout.clone(),
            matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
        }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.matrix.hermiticity_error()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    /// `<psi|rho|psi>`
    pub fn expectation_in(&self, psi: &StateVector) -> Result<f64> {
        if psi.layout() != &self.layout {
            return Err(Error::InvalidLayout("state and density matrix layouts differ".into()));
        }
        let v = self.matrix.matvec(psi.amplitudes());
        Ok(psi.amplitudes().iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<C64>().re)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigensystem(&self.matrix.hermitian_part())?.values[0])
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        partial_trace(self, keep)
    }

    /// Mixture `p self + (1 - p) other`.
    pub fn mix(&self, other: &Self, p: f64) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::InvalidLayout("cannot mix states on different layouts".into()));
        }
        Ok(Self {
            layout: self.layout.clone(),
            matrix: &self.matrix.scale_real(p) + &other.matrix.scale_real(1.0 - p),
        })
    }
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (n, m) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(n * m, |i, j| a[(i / m, j / m)] * b[(i % m, j % m)])
}

/// `I ⊗ .. ⊗ op ⊗ .. ⊗ I` with `op` on factor `subsystem`.
pub fn embed(op: &ComplexMatrix, subsystem: usize, layout: &HilbertLayout) -> Result<ComplexMatrix> {
    layout.check_index(subsystem)?;
    let local = layout.dims()[subsystem];
    if op.dim() != local {
        return Err(Error::DimensionMismatch { expected: local, got: op.dim() });
    }
    let left: usize = layout.dims()[..subsystem].iter().product();
    let right: usize = layout.dims()[subsystem + 1..].iter().product();
    let with_left = kron(&ComplexMatrix::identity(left), op);
    Ok(kron(&with_left, &ComplexMatrix::identity(right)))
}

/// Reduced state on the kept factors, in their original relative order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let layout = rho.layout();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != keep.len() {
        return Err(Error::InvalidLayout("duplicate subsystem in keep set".into()));
    }
    for &k in &kept {
        layout.check_index(k)?;
    }
    let traced: Vec<usize> = (0..layout.len()).filter(|i| !kept.contains(i)).collect();
    let reduced = HilbertLayout::new(kept.iter().map(|&k| layout.dims()[k]).collect())?;
    let rd = reduced.total_dim();
    let env = HilbertLayout::new(traced.iter().map(|&k| layout.dims()[k]).collect::<Vec<_>>())
        .ok();
    let env_dim = env.as_ref().map_or(1, |e| e.total_dim());

    let mut digits = vec![0usize; layout.len()];
    let mut full_index = |sys: &[usize], env_digits: &[usize]| -> usize {
        for (&k, &d) in kept.iter().zip(sys) {
            digits[k] = d;
        }
        for (&k, &d) in traced.iter().zip(env_digits) {
            digits[k] = d;
        }
        layout.index_of(&digits).expect("digits in range")
    };

    let sys_digits: Vec<Vec<usize>> = (0..rd).map(|i| reduced.digits_of(i)).collect();
    let env_digits: Vec<Vec<usize>> = (0..env_dim)
        .map(|e| env.as_ref().map_or_else(Vec::new, |l| l.digits_of(e)))
        .collect();
    // Full index of (system row, environment state), precomputed once.
    let mut table = vec![0usize; rd * env_dim];
    for (i, sd) in sys_digits.iter().enumerate() {
        for (e, ed) in env_digits.iter().enumerate() {
            table[i * env_dim + e] = full_index(sd, ed);
        }
    }

    let m = rho.matrix();
    let out = ComplexMatrix::from_fn(rd, |i, j| {
        (0..env_dim).map(|e| m[(table[i * env_dim + e], table[j * env_dim + e])]).sum()
    });
    DensityMatrix::from_matrix(reduced, out)
}

/// Transposes the indices of one factor of a bipartite state.
pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<ComplexMatrix> {
    let layout = rho.layout();
    if layout.len() != 2 {
        return Err(Error::NotBipartite(layout.len()));
    }
    layout.check_index(subsystem)?;
    let (da, db) = (layout.dims()[0], layout.dims()[1]);
    let m = rho.matrix();
    Ok(ComplexMatrix::from_fn(da * db, |r, c| {
        let (mut a, mut b) = (r / db, r % db);
        let (mut a2, mut b2) = (c / db, c % db);
        if subsystem == 0 {
            std::mem::swap(&mut a, &mut a2);
        } else {
            std::mem::swap(&mut b, &mut b2);
        }
        m[(a * db + b, a2 * db + b2)]
    }))
}

#[derive(Clone, Debug)]
pub struct Eigensystem {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, k)]).collect()
    }
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    let err = m.hermiticity_error();
    if err > HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian(err));
    }
    Ok(())
}

/// Eigenvalues ascending; each eigenvector's first non-negligible component is
/// made real and positive.
pub fn hermitian_eigensystem(m: &ComplexMatrix) -> Result<Eigensystem> {
    check_hermitian(m)?;
    let n = m.dim();
    let sym = m.hermitian_part().to_nalgebra();
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut vectors = ComplexMatrix::zeros(n);
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = v.iter().find(|z| z.norm() > 1e-10 * scale).copied().unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for i in 0..n {
            vectors[(i, col)] = v[i] * phase;
        }
    }
    Ok(Eigensystem { values, vectors })
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eigensystem(m)?.values.iter().map(|v| v.abs()).sum())
}

/// Standard single-mode operators. Qubit basis is ordered (g, e); bosonic
/// basis is the Fock ladder `|0>, |1>, ...`.
pub mod ops {
    use super::{ComplexMatrix, C64};

    pub fn annihilation(levels: usize) -> ComplexMatrix {
        let mut a = ComplexMatrix::zeros(levels);
        for n in 1..levels {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn creation(levels: usize) -> ComplexMatrix {
        annihilation(levels).adjoint()
    }

    pub fn number(levels: usize) -> ComplexMatrix {
        ComplexMatrix::diag_real(&(0..levels).map(|n| n as f64).collect::<Vec<_>>())
    }

    /// `|g><e|`
    pub fn sigma_minus() -> ComplexMatrix {
        annihilation(2)
    }

    /// `|e><g|`
    pub fn sigma_plus() -> ComplexMatrix {
        creation(2)
    }

    /// `|e><e| - |g><g|`
    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::diag_real(&[-1.0, 1.0])
    }

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, |i, j| if i != j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }
}
