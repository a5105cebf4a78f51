//! Fidelity, negativity and logical populations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_eigensystem, partial_transpose, DensityMatrix, HilbertLayout, StateVector, C64,
    MAGNON_L, MAGNON_R, QUBIT,
};

/// `<psi|rho|psi>`.
pub fn fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    rho.expectation_in(target)
}

/// `(|a> + phase |b>) / sqrt2` for two basis kets of a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct BellTarget {
    pub pair: (usize, usize),
    pub kets: ([usize; 4], [usize; 4]),
    pub relative_phase: C64,
}

impl BellTarget {
    pub fn new(pair: (usize, usize), kets: ([usize; 4], [usize; 4]), relative_phase: C64) -> Result<Self> {
        if (relative_phase.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "relative phase must have unit modulus, got {}",
                relative_phase.norm()
            )));
        }
        if kets.0 == kets.1 {
            return Err(Error::InvalidParameter("Bell components must differ".into()));
        }
        Ok(Self { pair, kets, relative_phase })
    }

    /// `(|e000> + phase |g010>) / sqrt2`, the qubit / local magnon pair.
    pub fn stage1(relative_phase: C64) -> Result<Self> {
        Self::new((QUBIT, MAGNON_L), ([1, 0, 0, 0], [0, 0, 1, 0]), relative_phase)
    }

    /// `(|e000> + phase |g001>) / sqrt2`, the qubit / remote magnon pair.
    pub fn stage2(relative_phase: C64) -> Result<Self> {
        Self::new((QUBIT, MAGNON_R), ([1, 0, 0, 0], [0, 0, 0, 1]), relative_phase)
    }

    pub fn with_phase(&self, relative_phase: C64) -> Result<Self> {
        Self::new(self.pair, self.kets, relative_phase)
    }

    pub fn state(&self, layout: &HilbertLayout) -> Result<StateVector> {
        StateVector::bell(layout, &self.kets.0, &self.kets.1, self.relative_phase)
    }

    fn indices(&self, layout: &HilbertLayout) -> Result<(usize, usize)> {
        Ok((layout.index_of(&self.kets.0)?, layout.index_of(&self.kets.1)?))
    }
}

pub fn bell_fidelity(rho: &DensityMatrix, target: &BellTarget) -> Result<f64> {
    fidelity(rho, &target.state(rho.layout())?)
}

/// Best fidelity over the target's relative phase, and the phase achieving it.
///
/// `F(phi) = (rho_aa + rho_bb)/2 + Re(e^{i phi} rho_ab)`, maximal when
/// `e^{i phi} rho_ab` is real and positive.
pub fn fidelity_up_to_phase(rho: &DensityMatrix, target: &BellTarget) -> Result<(f64, C64)> {
    let (a, b) = target.indices(rho.layout())?;
    let m = rho.matrix();
    let diag = 0.5 * (m[(a, a)].re + m[(b, b)].re);
    let coh = m[(a, b)];
    if coh.norm() <= 1e-300 {
        return Ok((diag, target.relative_phase));
    }
    Ok((diag + coh.norm(), coh.conj() / coh.norm()))
}

/// Negativity and how much was clipped off below zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Negativity {
    pub value: f64,
    pub clipped: f64,
}

/// `(||rho_AB^{T_A}||_1 - 1) / 2` on the reduced pair, unclipped.
pub fn negativity_raw(rho: &DensityMatrix, pair: (usize, usize)) -> Result<f64> {
    let (a, b) = pair;
    let n = rho.layout().len();
    for idx in [a, b] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if a == b {
        return Err(Error::InvalidParameter(format!("negativity pair needs two distinct subsystems, got ({a}, {b})")));
    }
    let reduced = if n == 2 { rho.clone() } else { rho.partial_trace(&[a, b])? };
    // partial_trace orders kept factors ascending; transpose the first pair member.
    let first = if a < b { 0 } else { 1 };
    let pt = partial_transpose(&reduced, first)?;
    let es = hermitian_eigensystem(&pt.hermitian_part())?;
    let norm: f64 = es.values.iter().map(|v| v.abs()).sum();
    Ok((norm - 1.0) / 2.0)
}

pub fn negativity(rho: &DensityMatrix, pair: (usize, usize)) -> Result<Negativity> {
    let raw = negativity_raw(rho, pair)?;
    Ok(Negativity { value: raw.max(0.0), clipped: (-raw).max(0.0) })
}

/// Populations of the four logical kets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogicalPopulations {
    pub e000: f64,
    pub g100: f64,
    pub g010: f64,
    pub g001: f64,
}

impl LogicalPopulations {
    pub fn as_array(&self) -> [f64; 4] {
        [self.e000, self.g100, self.g010, self.g001]
    }

    pub fn sum(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

pub const LOGICAL_KETS: [[usize; 4]; 4] = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]];

pub fn logical_populations(rho: &DensityMatrix) -> Result<LogicalPopulations> {
    let layout = rho.layout();
    if layout.len() != 4 {
        return Err(Error::InvalidLayout(format!("logical populations need the 4-mode layout, got {} factors", layout.len())));
    }
    let mut p = [0.0; 4];
    for (slot, ket) in p.iter_mut().zip(LOGICAL_KETS) {
        *slot = rho.population(layout.index_of(&ket)?);
    }
    Ok(LogicalPopulations { e000: p[0], g100: p[1], g010: p[2], g001: p[3] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{embed, ComplexMatrix};
    use proptest::prelude::*;

    fn layout() -> HilbertLayout {
        HilbertLayout::standard(2).unwrap()
    }

    fn pure(psi: &StateVector) -> DensityMatrix {
        DensityMatrix::from_pure(psi)
    }

    fn bell(phase: C64) -> DensityMatrix {
        pure(&BellTarget::stage2(phase).unwrap().state(&layout()).unwrap())
    }

    fn werner(p: f64) -> DensityMatrix {
        let two = HilbertLayout::new(vec![2, 2]).unwrap();
        let psi = StateVector::bell(&two, &[0, 1], &[1, 0], C64::new(-1.0, 0.0)).unwrap();
        pure(&psi).mix(&DensityMatrix::maximally_mixed(&two), p).unwrap()
    }

    #[test]
    fn fidelity_basics() {
        let l = layout();
        let a = StateVector::basis(&l, &[0, 1, 0, 0]).unwrap();
        let b = StateVector::basis(&l, &[0, 0, 1, 0]).unwrap();
        assert!((fidelity(&pure(&a), &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&pure(&a), &b).unwrap(), 0.0);
        let mixed = DensityMatrix::maximally_mixed(&l);
        assert!((fidelity(&mixed, &a).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn phase_audit_finds_minus_one() {
        let rho = bell(C64::new(-1.0, 0.0));
        let target = BellTarget::stage2(C64::new(1.0, 0.0)).unwrap();
        assert!(bell_fidelity(&rho, &target).unwrap().abs() < 1e-15);
        let (f, phase) = fidelity_up_to_phase(&rho, &target).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        assert!((phase - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_audit_on_dephased_state() {
        let rho = bell(C64::new(1.0, 0.0));
        let m = ComplexMatrix::from_fn(16, |i, j| if i == j { rho.matrix()[(i, j)] } else { C64::new(0.0, 0.0) });
        let rho = DensityMatrix::from_matrix(layout(), m).unwrap();
        let target = BellTarget::stage2(C64::new(0.0, 1.0)).unwrap();
        let (f, phase) = fidelity_up_to_phase(&rho, &target).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        assert!((phase.norm() - 1.0).abs() < 1e-15);
        assert!((bell_fidelity(&rho, &target).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bell_target_validation() {
        assert!(BellTarget::stage1(C64::new(0.5, 0.0)).is_err());
        assert!(BellTarget::new((0, 2), ([1, 0, 0, 0], [1, 0, 0, 0]), C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn negativity_unit_values() {
        let rho = bell(C64::new(1.0, 0.0));
        assert!((negativity(&rho, (QUBIT, MAGNON_R)).unwrap().value - 0.5).abs() < 1e-10);
        assert!(negativity(&rho, (QUBIT, MAGNON_L)).unwrap().value.abs() < 1e-12);
        let prod = StateVector::basis(&layout(), &[1, 0, 0, 1]).unwrap();
        assert!(negativity(&pure(&prod), (QUBIT, MAGNON_R)).unwrap().value.abs() < 1e-12);
        assert!(negativity(&werner(1.0 / 3.0), (0, 1)).unwrap().value.abs() < 1e-12);
        assert!((negativity(&werner(1.0), (0, 1)).unwrap().value - 0.5).abs() < 1e-12);
        // (3p - 1) / 4 above threshold.
        assert!((negativity(&werner(0.6), (0, 1)).unwrap().value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn negativity_errors() {
        let rho = bell(C64::new(1.0, 0.0));
        assert!(negativity(&rho, (QUBIT, QUBIT)).is_err());
        assert!(negativity(&rho, (QUBIT, 7)).is_err());
    }

    #[test]
    fn populations() {
        let l = layout();
        let start = StateVector::basis(&l, &[0, 1, 0, 0]).unwrap();
        let p = logical_populations(&pure(&start)).unwrap();
        assert_eq!(p.as_array(), [0.0, 1.0, 0.0, 0.0]);
        let p = logical_populations(&DensityMatrix::maximally_mixed(&l)).unwrap();
        for v in p.as_array() {
            assert!((v - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    fn random_state(re: &[f64], im: &[f64]) -> DensityMatrix {
        // Mix of two random pure states.
        let l = layout();
        let a: Vec<C64> = (0..16).map(|i| C64::new(re[i], im[i])).collect();
        let b: Vec<C64> = (0..16).map(|i| C64::new(im[i + 16], re[i + 16])).collect();
        let pa = pure(&StateVector::new(l.clone(), a).unwrap());
        let pb = pure(&StateVector::new(l, b).unwrap());
        pa.mix(&pb, 0.7).unwrap()
    }

    proptest! {
        #[test]
        fn negativity_properties(
            re in prop::collection::vec(-1.0..1.0f64, 32),
            im in prop::collection::vec(-1.0..1.0f64, 32),
            phi in 0.0..6.3f64,
        ) {
            prop_assume!(re.iter().take(16).map(|x| x * x).sum::<f64>() > 1e-3);
            prop_assume!(im.iter().skip(16).map(|x| x * x).sum::<f64>() > 1e-3);
            let rho = random_state(&re, &im);
            let ab = negativity_raw(&rho, (QUBIT, MAGNON_R)).unwrap();
            let ba = negativity_raw(&rho, (MAGNON_R, QUBIT)).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10);
            prop_assert!(negativity(&rho, (QUBIT, MAGNON_R)).unwrap().value <= 0.5 + 1e-12);

            // Local phase rotation on the remote magnon.
            let rot = ComplexMatrix::from_fn(2, |i, j| if i == j { C64::from_polar(1.0, phi * i as f64) } else { C64::new(0.0, 0.0) });
            let u = embed(&rot, MAGNON_R, rho.layout()).unwrap();
            let turned = &(&u * rho.matrix()) * &u.adjoint();
            let turned = DensityMatrix::from_matrix(layout(), turned).unwrap();
            let rotated = negativity_raw(&turned, (QUBIT, MAGNON_R)).unwrap();
            prop_assert!((rotated - ab).abs() <= 1e-10);

            let target = BellTarget::stage2(C64::from_polar(1.0, phi)).unwrap();
            let (best, phase) = fidelity_up_to_phase(&rho, &target).unwrap();
            prop_assert!(best + 1e-12 >= bell_fidelity(&rho, &target).unwrap());
            prop_assert!((phase.norm() - 1.0).abs() < 1e-12);
            prop_assert!(logical_populations(&rho).unwrap().sum() <= 1.0 + 1e-9);
        }
    }
}
