//! Physical model of the qubit / cavity / two-magnon system: interaction-frame
//! Hamiltonians for both stages, waveguide-mediated magnon dissipation and the
//! thermal Lindblad channels.
//!
//! Configuration values are cyclic (`f = omega / 2pi`): mode frequencies in GHz,
//! rates and couplings in MHz, times in microseconds. Everything handed to the
//! integrator is angular, in rad/us.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{embed, ops, ComplexMatrix, HilbertLayout, C64, CAVITY, MAGNON_L, MAGNON_R, QUBIT};

/// Planck constant, J s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K (exact, SI 2019).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Default waveguide decay scale g/2pi in MHz.
pub const DEFAULT_G_WG_MHZ: f64 = 400.0;
/// Stage-2 pulse amplitude as a fraction of g.
pub const DEFAULT_OMEGA_FRACTION: f64 = 0.15;
/// Stage-1 coupling g1/2pi in MHz used to pick the default T1.
pub const DEFAULT_STAGE1_COUPLING_MHZ: f64 = 2.5;
/// Default stage-2 length in units of 1/g (angular).
pub const DEFAULT_STAGE2_SPAN_OVER_G: f64 = 250.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// GHz
    pub omega_q: f64,
    pub omega_c: f64,
    #[serde(rename = "omega_mL")]
    pub omega_ml: f64,
    #[serde(rename = "omega_mR")]
    pub omega_mr: f64,
    /// MHz, cyclic
    pub gamma_q: f64,
    pub gamma_phi: f64,
    /// MHz; angular when `rates_are_angular`, cyclic otherwise
    pub kappa_c: f64,
    #[serde(rename = "kappa_mL")]
    pub kappa_ml: f64,
    #[serde(rename = "kappa_mR")]
    pub kappa_mr: f64,
    /// Kelvin
    #[serde(rename = "T_th")]
    pub t_th: f64,
    /// MHz, cyclic
    pub g_wg: f64,
    #[serde(rename = "Omega")]
    pub omega_pulse: f64,
    /// microseconds
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    /// Read the cavity and magnon decay rates as angular (no 2pi factor).
    pub rates_are_angular: bool,
    /// Fock levels kept per bosonic mode.
    pub boson_levels: usize,
}

/// Default stage-1 boundary: `T1 = sqrt2 pi / (4 g1)` with g1 angular.
pub fn default_t1() -> f64 {
    2f64.sqrt() * PI / (4.0 * 2.0 * PI * DEFAULT_STAGE1_COUPLING_MHZ)
}

pub fn default_t2(t1: f64, g_wg_mhz: f64) -> f64 {
    t1 + DEFAULT_STAGE2_SPAN_OVER_G / (2.0 * PI * g_wg_mhz)
}

impl Default for SystemParams {
    fn default() -> Self {
        let t1 = default_t1();
        Self {
            omega_q: 5.0,
            omega_c: 10.0,
            omega_ml: 5.0,
            omega_mr: 5.0,
            gamma_q: 0.01,
            gamma_phi: 0.1,
            kappa_c: 0.5,
            kappa_ml: 0.5,
            kappa_mr: 0.5,
            t_th: 0.05,
            g_wg: DEFAULT_G_WG_MHZ,
            omega_pulse: DEFAULT_OMEGA_FRACTION * DEFAULT_G_WG_MHZ,
            t1,
            t2: default_t2(t1, DEFAULT_G_WG_MHZ),
            rates_are_angular: true,
            boson_levels: 2,
        }
    }
}

/// The five dissipation rates that can be scanned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateParam {
    #[serde(rename = "gamma_q")]
    GammaQ,
    #[serde(rename = "gamma_phi")]
    GammaPhi,
    #[serde(rename = "kappa_c")]
    KappaC,
    #[serde(rename = "kappa_mL")]
    KappaML,
    #[serde(rename = "kappa_mR")]
    KappaMR,
}

impl RateParam {
    pub const ALL: [RateParam; 5] =
        [Self::GammaQ, Self::GammaPhi, Self::KappaC, Self::KappaML, Self::KappaMR];

    pub fn name(self) -> &'static str {
        match self {
            Self::GammaQ => "gamma_q",
            Self::GammaPhi => "gamma_phi",
            Self::KappaC => "kappa_c",
            Self::KappaML => "kappa_mL",
            Self::KappaMR => "kappa_mR",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name).ok_or_else(|| {
            let valid: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!(
                "unknown sweep axis \"{name}\"; valid axis names: {}",
                valid.join(", ")
            ))
        })
    }

    pub fn get(self, p: &SystemParams) -> f64 {
        match self {
            Self::GammaQ => p.gamma_q,
            Self::GammaPhi => p.gamma_phi,
            Self::KappaC => p.kappa_c,
            Self::KappaML => p.kappa_ml,
            Self::KappaMR => p.kappa_mr,
        }
    }

    pub fn set(self, p: &mut SystemParams, value: f64) {
        match self {
            Self::GammaQ => p.gamma_q = value,
            Self::GammaPhi => p.gamma_phi = value,
            Self::KappaC => p.kappa_c = value,
            Self::KappaML => p.kappa_ml = value,
            Self::KappaMR => p.kappa_mr = value,
        }
    }
}

/// Rates and couplings converted to rad/us.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngularRates {
    pub gamma_q: f64,
    pub gamma_phi: f64,
    pub kappa_c: f64,
    pub kappa_ml: f64,
    pub kappa_mr: f64,
    pub g_wg: f64,
    pub omega_pulse: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for p in RateParam::ALL {
            let v = p.get(self);
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{} must be a finite rate >= 0, got {v}", p.name()));
            }
        }
        for (name, v) in [
            ("omega_q", self.omega_q),
            ("omega_c", self.omega_c),
            ("omega_mL", self.omega_ml),
            ("omega_mR", self.omega_mr),
            ("T_th", self.t_th),
            ("g_wg", self.g_wg),
            ("Omega", self.omega_pulse),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.t1 > 0.0 && self.t1 < self.t2) || !self.t2.is_finite() {
            return bad(format!("need 0 < T1 < T2, got T1 = {}, T2 = {}", self.t1, self.t2));
        }
        if !(2..=4).contains(&self.boson_levels) {
            return bad(format!("boson_levels must be 2..=4, got {}", self.boson_levels));
        }
        Ok(())
    }

    pub fn angular(&self) -> AngularRates {
        let tau = 2.0 * PI;
        let kappa = if self.rates_are_angular { 1.0 } else { tau };
        AngularRates {
            gamma_q: tau * self.gamma_q,
            gamma_phi: tau * self.gamma_phi,
            kappa_c: kappa * self.kappa_c,
            kappa_ml: kappa * self.kappa_ml,
            kappa_mr: kappa * self.kappa_mr,
            g_wg: tau * self.g_wg,
            omega_pulse: tau * self.omega_pulse,
        }
    }

    /// Same schedule with every dissipation rate zeroed.
    pub fn closed(&self) -> Self {
        let mut p = self.clone();
        for r in RateParam::ALL {
            r.set(&mut p, 0.0);
        }
        p
    }

    pub fn layout(&self) -> Result<HilbertLayout> {
        HilbertLayout::standard(self.boson_levels)
    }
}

/// Mode operators embedded on a standard layout.
#[derive(Clone, Debug)]
pub struct ModeOperators {
    pub sigma_minus: ComplexMatrix,
    pub sigma_z: ComplexMatrix,
    pub c: ComplexMatrix,
    pub m_l: ComplexMatrix,
    pub m_r: ComplexMatrix,
}

impl ModeOperators {
    pub fn new(layout: &HilbertLayout) -> Result<Self> {
        require_standard(layout)?;
        let n = layout.dims()[CAVITY];
        Ok(Self {
            sigma_minus: embed(&ops::sigma_minus(), QUBIT, layout)?,
            sigma_z: embed(&ops::sigma_z(), QUBIT, layout)?,
            c: embed(&ops::annihilation(n), CAVITY, layout)?,
            m_l: embed(&ops::annihilation(layout.dims()[MAGNON_L]), MAGNON_L, layout)?,
            m_r: embed(&ops::annihilation(layout.dims()[MAGNON_R]), MAGNON_R, layout)?,
        })
    }

    /// `sigma+ sigma- + c'c + mL'mL + mR'mR`
    pub fn excitation_number(&self) -> ComplexMatrix {
        let mut n = &self.sigma_minus.adjoint() * &self.sigma_minus;
        for a in [&self.c, &self.m_l, &self.m_r] {
            n = &n + &(&a.adjoint() * a);
        }
        n
    }

    pub fn magnon(&self, side: MagnonSide) -> &ComplexMatrix {
        match side {
            MagnonSide::Local => &self.m_l,
            MagnonSide::Remote => &self.m_r,
        }
    }
}

fn require_standard(layout: &HilbertLayout) -> Result<()> {
    if layout.len() != 4 || layout.dims()[QUBIT] != 2 {
        return Err(Error::InvalidLayout(
            "expected (qubit, cavity, magnon L, magnon R) with a two-level qubit".into(),
        ));
    }
    Ok(())
}

/// Qubit-cavity exchange `sigma- c' + sigma+ c`.
pub fn qubit_cavity_exchange(layout: &HilbertLayout) -> Result<ComplexMatrix> {
    let m = ModeOperators::new(layout)?;
    let term = &m.sigma_minus * &m.c.adjoint();
    Ok(&term + &term.adjoint())
}

/// Cavity-magnon exchange `c mL' + c' mL`.
pub fn cavity_magnon_exchange(layout: &HilbertLayout) -> Result<ComplexMatrix> {
    let m = ModeOperators::new(layout)?;
    let term = &m.c * &m.m_l.adjoint();
    Ok(&term + &term.adjoint())
}

/// Stage-1 interaction Hamiltonian `g1 (sigma- c' + sigma+ c) + g2 (c mL' + c' mL)`.
pub fn h_stage1(g1: f64, g2: f64, layout: &HilbertLayout) -> Result<ComplexMatrix> {
    Ok(&qubit_cavity_exchange(layout)?.scale_real(g1) + &cavity_magnon_exchange(layout)?.scale_real(g2))
}

/// Stage-1 Hamiltonian on the logical basis (|e000>, |g100>, |g010>).
pub fn h_stage1_logical(g1: f64, g2: f64) -> ComplexMatrix {
    let z = C64::new(0.0, 0.0);
    let (a, b) = (C64::new(g1, 0.0), C64::new(g2, 0.0));
    ComplexMatrix::from_rows(&[&[z, a, z], &[a, z, b], &[z, b, z]]).expect("3x3")
}

/// `mR' mL` on the full space.
pub fn magnon_hop(layout: &HilbertLayout) -> Result<ComplexMatrix> {
    let m = ModeOperators::new(layout)?;
    Ok(&m.m_r.adjoint() * &m.m_l)
}

/// Stage-2 effective Hamiltonian `g_eff mR' mL + g_eff* mL' mR`.
pub fn h_stage2(g_eff: C64, layout: &HilbertLayout) -> Result<ComplexMatrix> {
    let hop = magnon_hop(layout)?;
    Ok(&hop.scale(g_eff) + &hop.adjoint().scale(g_eff.conj()))
}

/// `g_eff = 2i G_L G_R / g`
pub fn g_eff_from_pulses(g_l: f64, g_r: f64, g_wg: f64) -> Result<C64> {
    check_g(g_wg)?;
    Ok(C64::new(0.0, 2.0 * g_l * g_r / g_wg))
}

fn check_g(g_wg: f64) -> Result<()> {
    if !(g_wg > 0.0) || !g_wg.is_finite() {
        return Err(Error::InvalidParameter(format!("waveguide scale g must be > 0, got {g_wg}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MagnonSide {
    Local,
    Remote,
}

impl MagnonSide {
    pub const BOTH: [MagnonSide; 2] = [MagnonSide::Local, MagnonSide::Remote];

    fn idx(self) -> usize {
        match self {
            Self::Local => 0,
            Self::Remote => 1,
        }
    }
}

/// Coefficient matrix `[[S_LL, S_LR], [S_RL, S_RR]]` of the waveguide-mediated
/// magnon dissipator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stilde(pub [[C64; 2]; 2]);

impl Stilde {
    pub fn get(&self, j: MagnonSide, k: MagnonSide) -> C64 {
        self.0[j.idx()][k.idx()]
    }

    pub fn zero() -> Self {
        Self([[C64::new(0.0, 0.0); 2]; 2])
    }

    pub fn as_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, |i, j| self.0[i][j])
    }
}

/// Waveguide spectral coefficients `S_jk(omega_m)` for equal decay `g` and a
/// node spacing of whole wavelengths: `S_LL = S_RR = 2/g`, `S_RL = -4/g`,
/// `S_LR = 0`.
pub fn waveguide_spectra(g_wg: f64) -> Result<[[f64; 2]; 2]> {
    check_g(g_wg)?;
    Ok([[2.0 / g_wg, 0.0], [-4.0 / g_wg, 2.0 / g_wg]])
}

/// `S~_jk = (G_j* G_k / 2) [S_jk + S_kj*]` for real pulses.
pub fn stilde_coefficients(g_l: f64, g_r: f64, g_wg: f64) -> Result<Stilde> {
    let s = waveguide_spectra(g_wg)?;
    let pulses = [g_l, g_r];
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            out[j][k] = C64::new(pulses[j] * pulses[k] / 2.0 * (s[j][k] + s[k][j]), 0.0);
        }
    }
    Ok(Stilde(out))
}

/// Bose-Einstein occupation `1 / (exp(h f / kB T) - 1)` with `f` in GHz.
pub fn thermal_occupation(freq_ghz: f64, t_kelvin: f64) -> Result<f64> {
    if !(freq_ghz > 0.0) || !(t_kelvin > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation needs f > 0 and T > 0, got f = {freq_ghz} GHz, T = {t_kelvin} K"
        )));
    }
    let x = PLANCK * freq_ghz * 1e9 / (BOLTZMANN * t_kelvin);
    Ok(1.0 / x.exp_m1())
}

/// One `rate * L[op]` channel with `L[A]rho = A rho A' - {A'A, rho}/2`.
#[derive(Clone, Debug)]
pub struct DissipatorTerm {
    pub label: &'static str,
    pub operator: ComplexMatrix,
    /// rad/us
    pub rate: f64,
}

/// One of the four operator-ordered magnon terms
/// `S~_jk (2 m_k rho m_j' - m_j' m_k rho - rho m_j' m_k)`.
#[derive(Clone, Debug)]
pub struct CrossDissipator {
    pub j: MagnonSide,
    pub k: MagnonSide,
    pub op_j: ComplexMatrix,
    pub op_k: ComplexMatrix,
}

pub fn cross_dissipators(layout: &HilbertLayout) -> Result<Vec<CrossDissipator>> {
    let m = ModeOperators::new(layout)?;
    let mut out = Vec::with_capacity(4);
    for j in MagnonSide::BOTH {
        for k in MagnonSide::BOTH {
            out.push(CrossDissipator {
                j,
                k,
                op_j: m.magnon(j).clone(),
                op_k: m.magnon(k).clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermalOccupations {
    pub cavity: f64,
    pub magnon_l: f64,
    pub magnon_r: f64,
}

pub fn thermal_occupations(params: &SystemParams) -> Result<ThermalOccupations> {
    Ok(ThermalOccupations {
        cavity: thermal_occupation(params.omega_c, params.t_th)?,
        magnon_l: thermal_occupation(params.omega_ml, params.t_th)?,
        magnon_r: thermal_occupation(params.omega_mr, params.t_th)?,
    })
}

/// The diagonal Lindblad channels (zero-rate channels omitted) and the four
/// stage-2 magnon cross terms.
pub fn build_dissipators(
    params: &SystemParams,
    layout: &HilbertLayout,
) -> Result<(Vec<DissipatorTerm>, Vec<CrossDissipator>)> {
    params.validate()?;
    let m = ModeOperators::new(layout)?;
    let r = params.angular();
    let n = thermal_occupations(params)?;

    let candidates = [
        ("gamma_q L[sigma-]", m.sigma_minus.clone(), r.gamma_q),
        ("gamma_phi/2 L[sigma_z]", m.sigma_z.clone(), r.gamma_phi / 2.0),
        ("kappa_c (n_c + 1) L[c]", m.c.clone(), r.kappa_c * (n.cavity + 1.0)),
        ("kappa_c n_c L[c']", m.c.adjoint(), r.kappa_c * n.cavity),
        ("kappa_mL (n_mL + 1) L[mL]", m.m_l.clone(), r.kappa_ml * (n.magnon_l + 1.0)),
        ("kappa_mL n_mL L[mL']", m.m_l.adjoint(), r.kappa_ml * n.magnon_l),
        ("kappa_mR (n_mR + 1) L[mR]", m.m_r.clone(), r.kappa_mr * (n.magnon_r + 1.0)),
        ("kappa_mR n_mR L[mR']", m.m_r.adjoint(), r.kappa_mr * n.magnon_r),
    ];
    let terms = candidates
        .into_iter()
        .filter(|(_, _, rate)| *rate > 0.0)
        .map(|(label, operator, rate)| DissipatorTerm { label, operator, rate })
        .collect();
    Ok((terms, cross_dissipators(layout)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::StateVector;

    fn layout() -> HilbertLayout {
        HilbertLayout::standard(2).unwrap()
    }

    fn ket(d: [usize; 4]) -> StateVector {
        StateVector::basis(&layout(), &d).unwrap()
    }

    #[test]
    fn stage1_matrix_elements() {
        let (g1, g2) = (0.7, -1.3);
        let h = h_stage1(g1, g2, &layout()).unwrap();
        let l = layout();
        let idx = |d: [usize; 4]| l.index_of(&d).unwrap();
        assert_eq!(h[(idx([1, 0, 0, 0]), idx([0, 1, 0, 0]))], C64::new(g1, 0.0));
        assert_eq!(h[(idx([0, 1, 0, 0]), idx([0, 0, 1, 0]))], C64::new(g2, 0.0));
        assert_eq!(h[(0, 0)], C64::new(0.0, 0.0));
        assert!(ket([0, 0, 0, 0]).apply(&h).unwrap().iter().all(|z| z.norm() == 0.0));

        let basis = [idx([1, 0, 0, 0]), idx([0, 1, 0, 0]), idx([0, 0, 1, 0])];
        assert_eq!(h.restrict(&basis), h_stage1_logical(g1, g2));
    }

    #[test]
    fn stage2_matrix_elements() {
        let l = layout();
        let idx = |d: [usize; 4]| l.index_of(&d).unwrap();
        let ge = C64::new(0.3, -0.8);
        let h = h_stage2(ge, &l).unwrap();
        assert_eq!(h[(idx([0, 0, 0, 1]), idx([0, 0, 1, 0]))], ge);
        assert!(h.hermiticity_error() == 0.0);
        assert!(ket([0, 0, 0, 0]).apply(&h).unwrap().iter().all(|z| z.norm() == 0.0));

        // g_eff = i k: block [[0, -i k], [i k, 0]] has eigenvalues -k, +k.
        let k = 2.5;
        let h = h_stage2(C64::new(0.0, k), &l).unwrap();
        let block = h.restrict(&[idx([0, 0, 1, 0]), idx([0, 0, 0, 1])]);
        let es = crate::tensor::hermitian_eigensystem(&block).unwrap();
        assert!((es.values[0] + k).abs() < 1e-12 && (es.values[1] - k).abs() < 1e-12);
    }

    #[test]
    fn hamiltonians_conserve_excitations() {
        let l = layout();
        let n = ModeOperators::new(&l).unwrap().excitation_number();
        let h1 = h_stage1(1.1, -0.4, &l).unwrap();
        let h2 = h_stage2(C64::new(0.2, 0.9), &l).unwrap();
        assert!(h1.commutator(&n).max_abs() <= 1e-12);
        assert!(h2.commutator(&n).max_abs() <= 1e-12);
        assert_eq!(h1.hermiticity_error(), 0.0);

        let l3 = HilbertLayout::standard(3).unwrap();
        let n3 = ModeOperators::new(&l3).unwrap().excitation_number();
        assert!(h_stage1(0.5, 0.5, &l3).unwrap().commutator(&n3).max_abs() <= 1e-12);
    }

    #[test]
    fn effective_coupling() {
        let g = 3.0;
        let omega = 0.15 * g;
        let p = omega / 2f64.sqrt();
        let ge = g_eff_from_pulses(p, p, g).unwrap();
        assert!((ge.norm() - 0.0225 * g).abs() < 1e-15);
        assert_eq!(ge.re, 0.0);
        assert_eq!(g_eff_from_pulses(0.0, 1.0, g).unwrap(), C64::new(0.0, 0.0));
        assert!(g_eff_from_pulses(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn stilde_values() {
        let s = stilde_coefficients(1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.0, [[C64::new(2.0, 0.0), C64::new(-2.0, 0.0)], [C64::new(-2.0, 0.0), C64::new(2.0, 0.0)]]);
        let s = stilde_coefficients(0.8, 0.0, 2.0).unwrap();
        assert!((s.get(MagnonSide::Local, MagnonSide::Local) - C64::new(0.64, 0.0)).norm() < 1e-15);
        assert_eq!(s.get(MagnonSide::Remote, MagnonSide::Remote), C64::new(0.0, 0.0));
        assert_eq!(s.get(MagnonSide::Local, MagnonSide::Remote), C64::new(0.0, 0.0));
        assert!(stilde_coefficients(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn stilde_is_positive_semidefinite() {
        for (gl, gr, g) in [(0.3, 1.2, 2.0), (1.0, 0.0, 0.5), (0.7, 0.7, 7.0)] {
            let s = stilde_coefficients(gl, gr, g).unwrap().as_matrix();
            assert!(s.hermiticity_error() == 0.0);
            let es = crate::tensor::hermitian_eigensystem(&s).unwrap();
            assert!(es.values[0].abs() < 1e-14);
            assert!((es.values[1] - 2.0 * (gl * gl + gr * gr) / g).abs() < 1e-13);
        }
    }

    #[test]
    fn thermal_values() {
        // h f / kB T = 4.799 and 9.599 by hand.
        let n5 = thermal_occupation(5.0, 0.05).unwrap();
        assert!((n5 / 8.30e-3 - 1.0).abs() < 0.01, "{n5}");
        let n10 = thermal_occupation(10.0, 0.05).unwrap();
        assert!((n10 / 6.8e-5 - 1.0).abs() < 0.01, "{n10}");
        assert!(thermal_occupation(5.0, 1e-4).unwrap() < 1e-100);
        assert!(thermal_occupation(0.0, 0.05).is_err());
        assert!(thermal_occupation(5.0, -1.0).is_err());
        // monotone in T and f
        assert!(thermal_occupation(5.0, 0.06).unwrap() > n5);
        assert!(thermal_occupation(6.0, 0.05).unwrap() < n5);
    }

    #[test]
    fn dissipator_list() {
        let l = layout();
        let closed = SystemParams::default().closed();
        let (terms, cross) = build_dissipators(&closed, &l).unwrap();
        assert!(terms.is_empty());
        assert_eq!(cross.len(), 4);

        let p = SystemParams { rates_are_angular: true, ..SystemParams::default() };
        let (terms, _) = build_dissipators(&p, &l).unwrap();
        assert_eq!(terms.len(), 8);
        let thermal_c = terms.iter().find(|t| t.label == "kappa_c n_c L[c']").unwrap();
        let expected = 0.5 * thermal_occupation(10.0, 0.05).unwrap();
        assert!((thermal_c.rate - expected).abs() < 1e-18);
        assert!((thermal_c.rate / (0.5 * 6.8e-5) - 1.0).abs() < 0.01);
        let dephasing = terms.iter().find(|t| t.label == "gamma_phi/2 L[sigma_z]").unwrap();
        assert!((dephasing.rate - 2.0 * PI * 0.1 / 2.0).abs() < 1e-15);

        let cyclic = SystemParams { rates_are_angular: false, ..SystemParams::default() };
        let (terms, _) = build_dissipators(&cyclic, &l).unwrap();
        let decay_c = terms.iter().find(|t| t.label == "kappa_c (n_c + 1) L[c]").unwrap();
        assert!((decay_c.rate - 2.0 * PI * 0.5 * (1.0 + thermal_occupation(10.0, 0.05).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::default().validate().is_ok());
        let p = SystemParams { t2: default_t1(), ..SystemParams::default() };
        assert!(p.validate().is_err());
        let p = SystemParams { gamma_q: -1.0, ..SystemParams::default() };
        assert!(p.validate().is_err());
        assert!(RateParam::from_name("kappa_q").unwrap_err().to_string().contains("kappa_mL"));
    }
}
