//! Control design for both stages.
//!
//! Stage 1 uses a Lewis-Riesenfeld invariant on the three logical states
//! (|e000>, |g100>, |g010>) parameterized by two angles gamma(t), theta(t); the
//! couplings g1, g2 follow from the invariant condition. Stage 2 drives the
//! waveguide pulses G_L, G_R along a logistic profile at fixed total amplitude.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{g_eff_from_pulses, stilde_coefficients, SystemParams, Stilde};
use crate::tensor::{ComplexMatrix, C64};

/// Angles of the invariant and their time derivatives at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angles {
    pub gamma: f64,
    pub theta: f64,
    pub gamma_dot: f64,
    pub theta_dot: f64,
}

pub trait AngleProfile: Send + Sync + fmt::Debug {
    fn angles(&self, t: f64) -> Angles;

    /// Closed-form couplings when the profile admits them; bypasses the
    /// `cot(gamma)` evaluation.
    fn reduced_couplings(&self, _t: f64) -> Option<(f64, f64)> {
        None
    }
}

/// `gamma = pi t / (2 T1) - pi/2`, `theta = pi/4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearRamp {
    pub t1: f64,
}

impl AngleProfile for LinearRamp {
    fn angles(&self, t: f64) -> Angles {
        let rate = PI / (2.0 * self.t1);
        Angles { gamma: rate * t - FRAC_PI_2, theta: FRAC_PI_4, gamma_dot: rate, theta_dot: 0.0 }
    }

    fn reduced_couplings(&self, _t: f64) -> Option<(f64, f64)> {
        let g = 2f64.sqrt() * PI / (4.0 * self.t1);
        Some((g, -g))
    }
}

/// Angle profile from user-supplied closures.
#[derive(Clone)]
pub struct CustomProfile {
    pub angles: Arc<dyn Fn(f64) -> Angles + Send + Sync>,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomProfile")
    }
}

impl AngleProfile for CustomProfile {
    fn angles(&self, t: f64) -> Angles {
        (self.angles)(t)
    }
}

#[derive(Clone, Debug)]
pub struct InvariantSpec {
    /// Overall scale of the invariant; has no dynamical effect.
    pub omega0: f64,
    /// The invariant is defined on `[0, horizon]` (the stage-1 length).
    pub horizon: f64,
    pub profile: Arc<dyn AngleProfile>,
}

impl InvariantSpec {
    pub fn linear_ramp(t1: f64) -> Self {
        Self { omega0: 1.0, horizon: t1, profile: Arc::new(LinearRamp { t1 }) }
    }

    pub fn angles(&self, t: f64) -> Angles {
        self.profile.angles(t)
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The invariant `I(t)` on the logical basis (|e000>, |g100>, |g010>).
pub fn invariant_matrix(spec: &InvariantSpec, t: f64) -> ComplexMatrix {
    let Angles { gamma, theta, .. } = spec.angles(t);
    let (sg, cg) = gamma.sin_cos();
    let (st, ct) = theta.sin_cos();
    let o = spec.omega0;
    let z = c(0.0, 0.0);
    ComplexMatrix::from_rows(&[
        &[z, c(o * cg * st, 0.0), c(0.0, -o * sg)],
        &[c(o * cg * st, 0.0), z, c(o * cg * ct, 0.0)],
        &[c(0.0, o * sg), c(o * cg * ct, 0.0), z],
    ])
    .expect("3x3")
}

/// Analytic `dI/dt`.
pub fn invariant_matrix_derivative(spec: &InvariantSpec, t: f64) -> ComplexMatrix {
    let Angles { gamma, theta, gamma_dot, theta_dot } = spec.angles(t);
    let (sg, cg) = gamma.sin_cos();
    let (st, ct) = theta.sin_cos();
    let o = spec.omega0;
    // d(cos g sin th), d(cos g cos th), d(sin g)
    let d_cs = -sg * gamma_dot * st + cg * ct * theta_dot;
    let d_cc = -sg * gamma_dot * ct - cg * st * theta_dot;
    let d_s = cg * gamma_dot;
    let z = c(0.0, 0.0);
    ComplexMatrix::from_rows(&[
        &[z, c(o * d_cs, 0.0), c(0.0, -o * d_s)],
        &[c(o * d_cs, 0.0), z, c(o * d_cc, 0.0)],
        &[c(0.0, o * d_s), c(o * d_cc, 0.0), z],
    ])
    .expect("3x3")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum InvariantMode {
    Zero,
    Plus,
    Minus,
}

impl InvariantMode {
    pub const ALL: [InvariantMode; 3] = [Self::Zero, Self::Plus, Self::Minus];

    /// Eigenvalue of the invariant in units of `omega0`.
    pub fn eigenvalue(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }
}

pub type Vec3 = [C64; 3];

/// Closed-form eigenvector of `I(t)` for `mode`.
pub fn invariant_eigenstate(spec: &InvariantSpec, mode: InvariantMode, t: f64) -> Vec3 {
    let Angles { gamma, theta, .. } = spec.angles(t);
    let (sg, cg) = gamma.sin_cos();
    let (st, ct) = theta.sin_cos();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match mode {
        InvariantMode::Zero => [c(cg * ct, 0.0), c(0.0, -sg), c(-cg * st, 0.0)],
        InvariantMode::Plus => [c(h * sg * ct, h * st), c(0.0, h * cg), c(-h * sg * st, h * ct)],
        InvariantMode::Minus => [c(h * sg * ct, -h * st), c(0.0, h * cg), c(-h * sg * st, -h * ct)],
    }
}

/// The three eigenstates `[phi_0, phi_+, phi_-]`.
pub fn invariant_eigenstates(spec: &InvariantSpec, t: f64) -> [Vec3; 3] {
    InvariantMode::ALL.map(|m| invariant_eigenstate(spec, m, t))
}

/// Analytic time derivative of an eigenstate.
pub fn invariant_eigenstate_derivative(spec: &InvariantSpec, mode: InvariantMode, t: f64) -> Vec3 {
    let Angles { gamma, theta, gamma_dot: gd, theta_dot: td } = spec.angles(t);
    let (sg, cg) = gamma.sin_cos();
    let (st, ct) = theta.sin_cos();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match mode {
        InvariantMode::Zero => [
            c(-sg * gd * ct - cg * st * td, 0.0),
            c(0.0, -cg * gd),
            c(sg * gd * st - cg * ct * td, 0.0),
        ],
        InvariantMode::Plus | InvariantMode::Minus => {
            let s = if mode == InvariantMode::Plus { 1.0 } else { -1.0 };
            [
                c(h * (cg * gd * ct - sg * st * td), s * h * ct * td),
                c(0.0, -h * sg * gd),
                c(-h * (cg * gd * st + sg * ct * td), -s * h * st * td),
            ]
        }
    }
}

/// Couplings `(g1, g2)` realizing the invariant:
/// `g1 = th' cot(g) sin(th) + g' cos(th)`, `g2 = th' cot(g) cos(th) - g' sin(th)`.
pub fn sta_couplings(spec: &InvariantSpec, t: f64) -> Result<(f64, f64)> {
    if let Some(g) = spec.profile.reduced_couplings(t) {
        return Ok(g);
    }
    eq16_couplings(spec.angles(t), t)
}

fn eq16_couplings(a: Angles, t: f64) -> Result<(f64, f64)> {
    let (sg, cg) = a.gamma.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    if sg.abs() < 1e-12 {
        if a.theta_dot == 0.0 {
            return Ok((a.gamma_dot * ct, -a.gamma_dot * st));
        }
        return Err(Error::SingularCoupling { t });
    }
    let cot = cg / sg;
    Ok((a.theta_dot * cot * st + a.gamma_dot * ct, a.theta_dot * cot * ct - a.gamma_dot * st))
}

fn dot3(a: &Vec3, b: &Vec3) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn matvec3(m: &ComplexMatrix, v: &Vec3) -> Vec3 {
    let out = m.matvec(v);
    [out[0], out[1], out[2]]
}

/// Lewis-Riesenfeld phase `alpha_n(t) = int_0^t <phi_n| i d/dt' - H(t') |phi_n> dt'`
/// by composite trapezoid with step at most `horizon / 2000`.
pub fn lr_phase<H>(spec: &InvariantSpec, mode: InvariantMode, t: f64, h_fn: H) -> Result<f64>
where
    H: Fn(f64) -> ComplexMatrix,
{
    if !t.is_finite() || t < 0.0 || t > spec.horizon * (1.0 + 1e-12) || !(spec.horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "LR phase quadrature needs 0 <= t <= {} , got {t}",
            spec.horizon
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let n = ((2000.0 * t / spec.horizon).ceil() as usize).max(1);
    let step = t / n as f64;
    let integrand = |s: f64| {
        let phi = invariant_eigenstate(spec, mode, s);
        let dphi = invariant_eigenstate_derivative(spec, mode, s);
        let geometric = C64::new(0.0, 1.0) * dot3(&phi, &dphi);
        let energy = dot3(&phi, &matvec3(&h_fn(s), &phi));
        (geometric - energy).re
    };
    let mut sum = 0.5 * (integrand(0.0) + integrand(t));
    for k in 1..n {
        sum += integrand(k as f64 * step);
    }
    Ok(sum * step)
}

/// `sum_n c_n exp(i alpha_n(t)) phi_n(t)` with `c_n = <phi_n(0)|psi0>`.
pub fn reconstruct_state<H>(spec: &InvariantSpec, psi0: &Vec3, t: f64, h_fn: H) -> Result<Vec3>
where
    H: Fn(f64) -> ComplexMatrix,
{
    let mut out = [C64::new(0.0, 0.0); 3];
    for mode in InvariantMode::ALL {
        let amp = dot3(&invariant_eigenstate(spec, mode, 0.0), psi0);
        let alpha = lr_phase(spec, mode, t, &h_fn)?;
        let phase = C64::from_polar(1.0, alpha);
        for (o, p) in out.iter_mut().zip(invariant_eigenstate(spec, mode, t)) {
            *o += amp * phase * p;
        }
    }
    Ok(out)
}

/// `i dI/dt - [H, I]`, max entry, with H from the STA couplings.
pub fn invariant_residual(spec: &InvariantSpec, t: f64) -> Result<f64> {
    let (g1, g2) = sta_couplings(spec, t)?;
    let h = crate::model::h_stage1_logical(g1, g2);
    let i_mat = invariant_matrix(spec, t);
    let lhs = invariant_matrix_derivative(spec, t).scale(C64::new(0.0, 1.0));
    Ok(lhs.max_abs_diff(&h.commutator(&i_mat)))
}

/// Logistic switching factor `s(t) = (1 - e^x) / (1 + e^x)` with
/// `x = 4 Omega^2 (t - T1) / g - 10`, all angular.
pub fn switching_factor(omega: f64, g_wg: f64, t1: f64, t: f64) -> f64 {
    let x = 4.0 * omega * omega * (t - t1) / g_wg - 10.0;
    -(x / 2.0).tanh()
}

/// Stage-2 pulses `(G_L, G_R)` in rad/us; `G_L^2 + G_R^2 = Omega^2`.
pub fn stage2_pulses(params: &SystemParams, t: f64) -> (f64, f64) {
    let r = params.angular();
    pulses_from(r.omega_pulse, r.g_wg, params.t1, t)
}

fn pulses_from(omega: f64, g_wg: f64, t1: f64, t: f64) -> (f64, f64) {
    let s = switching_factor(omega, g_wg, t1, t);
    (omega * ((1.0 - s) / 2.0).sqrt(), omega * ((1.0 + s) / 2.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stage {
    Local,
    Transfer,
    Idle,
}

/// Both stages' couplings, gated to their intervals.
#[derive(Clone, Debug)]
pub struct ControlSchedule {
    pub t1: f64,
    pub t2: f64,
    pub invariant: InvariantSpec,
    /// rad/us
    pub omega: f64,
    /// rad/us
    pub g_wg: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleSample {
    pub t: f64,
    pub g1: f64,
    pub g2: f64,
    pub g_l: f64,
    pub g_r: f64,
    pub g_eff_im: f64,
}

impl ControlSchedule {
    pub fn stage(&self, t: f64) -> Stage {
        if (0.0..self.t1).contains(&t) {
            Stage::Local
        } else if (self.t1..self.t2).contains(&t) {
            Stage::Transfer
        } else {
            Stage::Idle
        }
    }

    /// Stage-1 couplings on the closed interval `[0, T1]`, ungated.
    pub fn stage1_couplings(&self, t: f64) -> Result<(f64, f64)> {
        sta_couplings(&self.invariant, t)
    }

    /// Stage-2 pulses on `[T1, T2]`, ungated.
    pub fn stage2_pulses(&self, t: f64) -> (f64, f64) {
        pulses_from(self.omega, self.g_wg, self.t1, t)
    }

    pub fn g1(&self, t: f64) -> Result<f64> {
        Ok(match self.stage(t) {
            Stage::Local => self.stage1_couplings(t)?.0,
            _ => 0.0,
        })
    }

    pub fn g2(&self, t: f64) -> Result<f64> {
        Ok(match self.stage(t) {
            Stage::Local => self.stage1_couplings(t)?.1,
            _ => 0.0,
        })
    }

    pub fn pulses(&self, t: f64) -> (f64, f64) {
        match self.stage(t) {
            Stage::Transfer => self.stage2_pulses(t),
            _ => (0.0, 0.0),
        }
    }

    pub fn g_eff(&self, t: f64) -> C64 {
        let (gl, gr) = self.pulses(t);
        g_eff_from_pulses(gl, gr, self.g_wg).expect("g_wg validated at construction")
    }

    pub fn stilde(&self, t: f64) -> Stilde {
        let (gl, gr) = self.pulses(t);
        stilde_coefficients(gl, gr, self.g_wg).expect("g_wg validated at construction")
    }

    /// Largest coupling or waveguide rate the schedule reaches, rad/us.
    pub fn max_coupling_rate(&self, samples: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..samples {
            let t = self.t1 * k as f64 / samples as f64;
            let (g1, g2) = self.stage1_couplings(t)?;
            worst = worst.max(g1.abs()).max(g2.abs());
        }
        // G_L G_R peaks at Omega^2/2; S~ diagonals peak at 2 Omega^2 / g.
        let o2 = self.omega * self.omega;
        worst = worst.max(o2 / self.g_wg).max(2.0 * o2 / self.g_wg);
        Ok(worst)
    }

    /// `per_stage` samples of every control on each stage, for manifests.
    pub fn samples(&self, per_stage: usize) -> Result<Vec<ScheduleSample>> {
        let mut out = Vec::with_capacity(2 * per_stage);
        let spans = [(0.0, self.t1), (self.t1, self.t2)];
        for (a, b) in spans {
            for k in 0..per_stage {
                let t = a + (b - a) * k as f64 / per_stage as f64;
                let (g_l, g_r) = self.pulses(t);
                out.push(ScheduleSample {
                    t,
                    g1: self.g1(t)?,
                    g2: self.g2(t)?,
                    g_l,
                    g_r,
                    g_eff_im: self.g_eff(t).im,
                });
            }
        }
        Ok(out)
    }
}

/// Default two-stage schedule: linear-ramp invariant on `[0, T1)`, logistic
/// pulses on `[T1, T2)`.
pub fn build_schedule(params: &SystemParams) -> Result<ControlSchedule> {
    params.validate()?;
    let r = params.angular();
    Ok(ControlSchedule {
        t1: params.t1,
        t2: params.t2,
        invariant: InvariantSpec::linear_ramp(params.t1),
        omega: r.omega_pulse,
        g_wg: r.g_wg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::h_stage1_logical;
    use proptest::prelude::*;

    fn custom(gamma: f64, theta: f64) -> InvariantSpec {
        InvariantSpec {
            omega0: 1.0,
            horizon: 1.0,
            profile: Arc::new(CustomProfile {
                angles: Arc::new(move |_| Angles { gamma, theta, gamma_dot: 0.0, theta_dot: 0.0 }),
            }),
        }
    }

    fn ramp_as_custom(t1: f64) -> InvariantSpec {
        let ramp = LinearRamp { t1 };
        InvariantSpec {
            omega0: 1.0,
            horizon: t1,
            profile: Arc::new(CustomProfile { angles: Arc::new(move |t| ramp.angles(t)) }),
        }
    }

    #[test]
    fn invariant_at_start_of_ramp() {
        let spec = InvariantSpec::linear_ramp(0.4);
        let i = invariant_matrix(&spec, 0.0);
        // gamma = -pi/2: entry (1,3) = -i sin(-pi/2) = i; cos(gamma) terms vanish.
        assert!((i[(0, 2)] - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(i[(0, 1)].norm() < 1e-15 && i[(1, 2)].norm() < 1e-15);
        let phi0 = invariant_eigenstate(&spec, InvariantMode::Zero, 0.0);
        // |g100> up to the phase i
        assert!((phi0[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn eigenstate_at_zero_angles() {
        let phi0 = invariant_eigenstate(&custom(0.0, 0.0), InvariantMode::Zero, 0.3);
        assert_eq!(phi0, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, -0.0)]);
    }

    #[test]
    fn ramp_couplings_are_constant() {
        let t1 = 0.25;
        let spec = InvariantSpec::linear_ramp(t1);
        let expect = 2f64.sqrt() * PI / (4.0 * t1);
        for k in 0..=50 {
            let (g1, g2) = sta_couplings(&spec, t1 * k as f64 / 50.0).unwrap();
            assert!((g1 - expect).abs() <= 1e-12 && (g2 + expect).abs() <= 1e-12);
        }
        let (g1, _) = sta_couplings(&InvariantSpec::linear_ramp(1.0), 0.5).unwrap();
        assert!((g1 - 1.110_720_734_539_59).abs() < 1e-12);

        // The general formula agrees away from the singular endpoint.
        let general = ramp_as_custom(t1);
        for k in 1..50 {
            let t = t1 * k as f64 / 50.0;
            let (a, b) = sta_couplings(&general, t).unwrap();
            assert!((a - expect).abs() < 1e-12 && (b + expect).abs() < 1e-12);
        }
    }

    #[test]
    fn static_angles_need_no_coupling() {
        assert_eq!(sta_couplings(&custom(0.7, 0.3), 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn singular_cotangent_is_rejected() {
        let spec = InvariantSpec {
            omega0: 1.0,
            horizon: 1.0,
            profile: Arc::new(CustomProfile {
                angles: Arc::new(|t| Angles { gamma: t - 0.5, theta: t, gamma_dot: 1.0, theta_dot: 1.0 }),
            }),
        };
        match sta_couplings(&spec, 0.5) {
            Err(Error::SingularCoupling { t }) => assert_eq!(t, 0.5),
            other => panic!("expected singular coupling error, got {other:?}"),
        }
        assert!(sta_couplings(&spec, 0.4).is_ok());
    }

    #[test]
    fn residual_vanishes_on_ramp() {
        let spec = InvariantSpec::linear_ramp(0.0707);
        for k in 0..=1000 {
            let t = spec.horizon * k as f64 / 1000.0;
            assert!(invariant_residual(&spec, t).unwrap() <= 1e-8 * spec.omega0);
        }
    }

    #[test]
    fn lr_phase_basics() {
        let t1 = 0.5;
        let spec = InvariantSpec::linear_ramp(t1);
        let (g1, g2) = sta_couplings(&spec, 0.0).unwrap();
        let h = |_: f64| h_stage1_logical(g1, g2);
        for m in InvariantMode::ALL {
            assert_eq!(lr_phase(&spec, m, 0.0, h).unwrap(), 0.0);
        }
        let shift = 3.3;
        let t = 0.37;
        for m in InvariantMode::ALL {
            let a = lr_phase(&spec, m, t, h).unwrap();
            let shifted = lr_phase(&spec, m, t, |s| {
                &h(s) + &ComplexMatrix::identity(3).scale_real(shift)
            })
            .unwrap();
            assert!((shifted - (a - shift * t)).abs() < 1e-12);
        }
        assert!(lr_phase(&spec, InvariantMode::Plus, -0.1, h).is_err());
        assert!(lr_phase(&spec, InvariantMode::Plus, 0.6, h).is_err());
    }

    #[test]
    fn eigenstate_derivatives_match_finite_differences() {
        let spec = ramp_as_custom(0.3);
        let wobble = InvariantSpec {
            omega0: 1.0,
            horizon: 1.0,
            profile: Arc::new(CustomProfile {
                angles: Arc::new(|t| Angles {
                    gamma: 0.3 + t * t,
                    theta: (2.0 * t).sin(),
                    gamma_dot: 2.0 * t,
                    theta_dot: 2.0 * (2.0 * t).cos(),
                }),
            }),
        };
        for s in [&spec, &wobble] {
            for m in InvariantMode::ALL {
                let t = 0.17;
                let h = 1e-6;
                let a = invariant_eigenstate(s, m, t + h);
                let b = invariant_eigenstate(s, m, t - h);
                let d = invariant_eigenstate_derivative(s, m, t);
                for i in 0..3 {
                    assert!(((a[i] - b[i]) / (2.0 * h) - d[i]).norm() < 1e-6);
                }
            }
            let (a, b) = (invariant_matrix(s, 0.17 + 1e-6), invariant_matrix(s, 0.17 - 1e-6));
            let fd = (&a - &b).scale_real(1.0 / 2e-6);
            assert!(fd.max_abs_diff(&invariant_matrix_derivative(s, 0.17)) < 1e-6);
        }
    }

    #[test]
    fn pulse_profile() {
        let p = SystemParams::default();
        let r = p.angular();
        let mid = p.t1 + 10.0 * r.g_wg / (4.0 * r.omega_pulse * r.omega_pulse);
        let (gl, gr) = stage2_pulses(&p, mid);
        let half = r.omega_pulse / 2f64.sqrt();
        assert!((gl - half).abs() < 1e-12 && (gr - half).abs() < 1e-12);

        // s(T1) = tanh(5)
        let (gl, gr) = stage2_pulses(&p, p.t1);
        let s = 5f64.tanh();
        assert!((gl / r.omega_pulse - ((1.0 - s) / 2.0).sqrt()).abs() < 1e-15);
        assert!((gl / r.omega_pulse - 6.7e-3).abs() < 1e-4);
        assert!((gr / r.omega_pulse - 0.99998).abs() < 1e-5);
    }

    #[test]
    fn schedule_gating() {
        let p = SystemParams::default();
        let s = build_schedule(&p).unwrap();
        let eps = 1e-9;
        assert_eq!(s.g1(p.t1 + eps).unwrap(), 0.0);
        assert_eq!(s.g2(p.t1).unwrap(), 0.0);
        assert!(s.g1(p.t1 - eps).unwrap() > 0.0);
        assert_eq!(s.pulses(p.t1 - eps), (0.0, 0.0));
        assert_eq!(s.pulses(p.t2), (0.0, 0.0));
        assert!(s.pulses(p.t1).1 > 0.0);
        let mid = p.t1 + 10.0 * s.g_wg / (4.0 * s.omega * s.omega);
        assert!((s.g_eff(mid).norm() - 0.0225 * s.g_wg).abs() < 1e-9);
        assert_eq!(s.samples(512).unwrap().len(), 1024);
    }

    proptest! {
        #[test]
        fn invariant_spectrum_and_basis(gamma in -3.2..3.2f64, theta in -3.2..3.2f64, t in 0.0..1.0f64) {
            let spec = custom(gamma, theta);
            let i = invariant_matrix(&spec, t);
            prop_assert!(i.hermiticity_error() == 0.0);
            let es = crate::tensor::hermitian_eigensystem(&i).unwrap();
            for (v, e) in es.values.iter().zip([-1.0, 0.0, 1.0]) {
                prop_assert!((v - e).abs() < 1e-12);
            }
            let basis = invariant_eigenstates(&spec, t);
            for (a, ma) in basis.iter().zip(InvariantMode::ALL) {
                let iv = matvec3(&i, a);
                for k in 0..3 {
                    prop_assert!((iv[k] - a[k] * ma.eigenvalue()).norm() < 1e-12);
                }
                for b in &basis {
                    let g = dot3(a, b);
                    let expect = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                    prop_assert!((g - C64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn pulses_keep_total_amplitude(t in 0.0..10.0f64) {
            let p = SystemParams::default();
            let (gl, gr) = stage2_pulses(&p, p.t1 + t * (p.t2 - p.t1));
            let o = p.angular().omega_pulse;
            prop_assert!(((gl * gl + gr * gr) - o * o).abs() <= 1e-12 * o * o);
        }
    }
}
