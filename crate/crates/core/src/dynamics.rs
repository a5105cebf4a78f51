//! Fixed-step RK4 for the Schrodinger and Lindblad equations.
//!
//! The Lindblad right-hand side is written as
//! `drho = A rho + rho B + sum_w w rho_bd |a><c|` where `A = -iH - N`,
//! `B = iH - N`, `N` collects the anticommutator pieces, and the jump terms are
//! expanded once into `(a, b, c, d, w)` tables. Each piece is a fixed sparse
//! pattern scaled by a time-dependent coefficient.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::control::{build_schedule, ControlSchedule, Stage};
use crate::error::{Error, Result};
use crate::metrics::{logical_populations, negativity, LogicalPopulations};
use crate::model::{
    build_dissipators, cavity_magnon_exchange, magnon_hop, qubit_cavity_exchange, CrossDissipator,
    DissipatorTerm, MagnonSide, Stilde, SystemParams,
};
use crate::tensor::{
    hermitian_eigensystem, ComplexMatrix, DensityMatrix, HilbertLayout, StateVector, C64,
    MAGNON_L, MAGNON_R, QUBIT,
};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Trace drift that aborts a run.
pub const TRACE_ABORT: f64 = 1e-6;
/// Trace drift that triggers renormalization.
pub const TRACE_RENORM: f64 = 1e-9;
pub const MAX_RENORMALIZATIONS: usize = 100;
pub const POSITIVITY_FLOOR: f64 = -1e-7;
/// Largest allowed `dt * max_rate`.
pub const STEP_RATE_BOUND: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Step in us; `None` picks [`default_dt`].
    pub dt: Option<f64>,
    pub record_stride: usize,
    pub method: Method,
    pub trace_tol: f64,
    pub herm_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: None, record_stride: 5, method: Method::Rk4, trace_tol: 1e-8, herm_tol: 1e-10 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
            }
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolved_dt(&self, params: &SystemParams) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(params))
    }
}

/// `min(T1 / 400, (T2 - T1) / 4000)`.
pub fn default_dt(params: &SystemParams) -> f64 {
    default_dt_for(params.t1, params.t2)
}

pub fn default_dt_for(t1: f64, t2: f64) -> f64 {
    (t1 / 400.0).min((t2 - t1) / 4000.0)
}

/// `n` equal steps covering `span`, no longer than `dt`.
pub fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

type Entries = Vec<(usize, usize, C64)>;

fn nonzeros(m: &ComplexMatrix) -> Entries {
    let d = m.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let v = m[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Several sparse matrices sharing one sparsity pattern.
#[derive(Clone, Debug)]
struct Combination {
    pattern: Vec<(usize, usize)>,
    /// Per component: (pattern slot, value).
    components: Vec<Vec<(usize, C64)>>,
}

impl Combination {
    fn new(mats: &[ComplexMatrix]) -> Self {
        let mut slots: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for m in mats {
            for (i, j, _) in nonzeros(m) {
                let n = slots.len();
                slots.entry((i, j)).or_insert(n);
            }
        }
        let mut pattern = vec![(0, 0); slots.len()];
        for (&pos, &slot) in &slots {
            pattern[slot] = pos;
        }
        let components = mats
            .iter()
            .map(|m| nonzeros(m).into_iter().map(|(i, j, v)| (slots[&(i, j)], v)).collect())
            .collect();
        Self { pattern, components }
    }

    fn evaluate(&self, coefs: &[C64], vals: &mut Vec<C64>) {
        vals.clear();
        vals.resize(self.pattern.len(), ZERO);
        for (comp, &c) in self.components.iter().zip(coefs) {
            if c == ZERO {
                continue;
            }
            for &(slot, v) in comp {
                vals[slot] += c * v;
            }
        }
    }
}

/// `out[a][c] += w rho[b][d]`, one table per coefficient.
#[derive(Clone, Debug)]
struct Sandwich {
    terms: Vec<(usize, usize, usize, usize, C64)>,
}

impl Sandwich {
    /// Terms of `scale * L rho K'`.
    fn of(l: &ComplexMatrix, k: &ComplexMatrix, scale: C64) -> Vec<(usize, usize, usize, usize, C64)> {
        let (le, ke) = (nonzeros(l), nonzeros(k));
        let mut out = Vec::with_capacity(le.len() * ke.len());
        for &(a, b, x) in &le {
            for &(c, d, y) in &ke {
                out.push((a, b, c, d, scale * x * y.conj()));
            }
        }
        out
    }

    fn merged(terms: impl IntoIterator<Item = (usize, usize, usize, usize, C64)>) -> Self {
        let mut acc: BTreeMap<(usize, usize, usize, usize), C64> = BTreeMap::new();
        for (a, b, c, d, w) in terms {
            *acc.entry((a, b, c, d)).or_insert(ZERO) += w;
        }
        Self {
            terms: acc.into_iter().filter(|(_, w)| *w != ZERO).map(|((a, b, c, d), w)| (a, b, c, d, w)).collect(),
        }
    }
}

// Coefficient slots of the left/right combinations.
const K_CONST: usize = 0;
const K_G1: usize = 1;
const K_G2: usize = 2;
const K_HOP: usize = 3;
const K_HOP_DAG: usize = 4;
const K_CROSS: usize = 5;
const N_COEFS: usize = 9;

/// Time-dependent Lindblad generator for the two-stage protocol.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    layout: HilbertLayout,
    schedule: ControlSchedule,
    left: Combination,
    right: Combination,
    jumps: Sandwich,
    cross_jumps: Vec<Sandwich>,
    channel_rates: Vec<f64>,
}

/// Scratch buffers reused across RHS evaluations.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    left: Vec<C64>,
    right: Vec<C64>,
}

impl LindbladGenerator {
    pub fn new(
        layout: &HilbertLayout,
        schedule: ControlSchedule,
        dissipators: &[DissipatorTerm],
        cross: &[CrossDissipator],
    ) -> Result<Self> {
        let d = layout.total_dim();
        let check = |m: &ComplexMatrix| {
            if m.dim() != d {
                Err(Error::DimensionMismatch { expected: d, got: m.dim() })
            } else {
                Ok(())
            }
        };
        let mut anti = ComplexMatrix::zeros(d);
        let mut jump_terms = Vec::new();
        for term in dissipators {
            check(&term.operator)?;
            let l = &term.operator;
            anti = &anti + &(&l.adjoint() * l).scale_real(-0.5 * term.rate);
            jump_terms.extend(Sandwich::of(l, l, C64::new(term.rate, 0.0)));
        }
        let a = qubit_cavity_exchange(layout)?;
        let b = cavity_magnon_exchange(layout)?;
        let hop = magnon_hop(layout)?;
        let hop_dag = hop.adjoint();

        let mut cross_sorted: Vec<&CrossDissipator> = cross.iter().collect();
        cross_sorted.sort_by_key(|c| cross_slot(c.j, c.k));
        // An empty set switches the waveguide terms off.
        if (!cross_sorted.is_empty() && cross_sorted.len() != 4) || cross_sorted.iter().enumerate().any(|(n, c)| cross_slot(c.j, c.k) != n) {
            return Err(Error::InvalidParameter("expected one cross dissipator per (j, k) pair".into()));
        }
        let mut cross_anti = Vec::with_capacity(4);
        let mut cross_jumps = Vec::with_capacity(4);
        for c in &cross_sorted {
            check(&c.op_j)?;
            check(&c.op_k)?;
            cross_anti.push((&c.op_j.adjoint() * &c.op_k).scale_real(-1.0));
            cross_jumps.push(Sandwich::merged(Sandwich::of(&c.op_k, &c.op_j, C64::new(2.0, 0.0))));
        }

        let build = |sign: f64| {
            let mut mats = vec![
                anti.clone(),
                a.scale(-sign * I),
                b.scale(-sign * I),
                hop.scale(-sign * I),
                hop_dag.scale(-sign * I),
            ];
            mats.extend(cross_anti.iter().cloned());
            mats.resize(N_COEFS, ComplexMatrix::zeros(d));
            Combination::new(&mats)
        };
        Ok(Self {
            layout: layout.clone(),
            schedule,
            left: build(1.0),
            right: build(-1.0),
            jumps: Sandwich::merged(jump_terms),
            cross_jumps,
            channel_rates: dissipators.iter().map(|t| t.rate).collect(),
        })
    }

    /// Generator for `params` with the default two-stage schedule.
    pub fn for_params(params: &SystemParams) -> Result<Self> {
        let layout = params.layout()?;
        let (terms, cross) = build_dissipators(params, &layout)?;
        Self::new(&layout, build_schedule(params)?, &terms, &cross)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn schedule(&self) -> &ControlSchedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    fn coefficients(&self, stage: Stage, t: f64) -> Result<([C64; N_COEFS], Stilde)> {
        let mut k = [ZERO; N_COEFS];
        k[K_CONST] = C64::new(1.0, 0.0);
        let mut st = Stilde::zero();
        match stage {
            Stage::Local => {
                let (g1, g2) = self.schedule.stage1_couplings(t)?;
                k[K_G1] = C64::new(g1, 0.0);
                k[K_G2] = C64::new(g2, 0.0);
            }
            Stage::Transfer => {
                let (gl, gr) = self.schedule.stage2_pulses(t);
                let g = crate::model::g_eff_from_pulses(gl, gr, self.schedule.g_wg)?;
                k[K_HOP] = g;
                k[K_HOP_DAG] = g.conj();
                st = crate::model::stilde_coefficients(gl, gr, self.schedule.g_wg)?;
                for j in MagnonSide::BOTH {
                    for kk in MagnonSide::BOTH {
                        k[K_CROSS + cross_slot(j, kk)] = st.get(j, kk);
                    }
                }
            }
            Stage::Idle => {}
        }
        Ok((k, st))
    }

    /// `drho/dt` with the generator of `stage` evaluated at `t`, written into `out`.
    pub fn rhs_into(&self, stage: Stage, t: f64, rho: &[C64], out: &mut [C64], ws: &mut Workspace) -> Result<()> {
        let d = self.dim();
        let (coefs, st) = self.coefficients(stage, t)?;
        self.left.evaluate(&coefs, &mut ws.left);
        self.right.evaluate(&coefs, &mut ws.right);
        out.fill(ZERO);
        for (&(i, k), &v) in self.left.pattern.iter().zip(&ws.left) {
            let (src, dst) = (&rho[k * d..k * d + d], i * d);
            for (j, &r) in src.iter().enumerate() {
                out[dst + j] += v * r;
            }
        }
        for (&(k, j), &v) in self.right.pattern.iter().zip(&ws.right) {
            for i in 0..d {
                out[i * d + j] += rho[i * d + k] * v;
            }
        }
        for &(a, b, c, dd, w) in &self.jumps.terms {
            out[a * d + c] += w * rho[b * d + dd];
        }
        if stage == Stage::Transfer && !self.cross_jumps.is_empty() {
            for j in MagnonSide::BOTH {
                for k in MagnonSide::BOTH {
                    let s = st.get(j, k);
                    if s == ZERO {
                        continue;
                    }
                    for &(a, b, c, dd, w) in &self.cross_jumps[cross_slot(j, k)].terms {
                        out[a * d + c] += s * w * rho[b * d + dd];
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest coupling or dissipation rate on the schedule, rad/us.
    pub fn max_rate(&self) -> Result<f64> {
        let mut worst = self.schedule.max_coupling_rate(512)?;
        for r in &self.channel_rates {
            worst = worst.max(*r);
        }
        Ok(worst)
    }
}

fn cross_slot(j: MagnonSide, k: MagnonSide) -> usize {
    let n = |s| match s {
        MagnonSide::Local => 0,
        MagnonSide::Remote => 1,
    };
    2 * n(j) + n(k)
}

/// `drho/dt` at `t`, with the stage picked by the schedule's gating.
pub fn lindblad_rhs(rho: &DensityMatrix, t: f64, generator: &LindbladGenerator) -> Result<ComplexMatrix> {
    if rho.layout() != generator.layout() {
        return Err(Error::DimensionMismatch { expected: generator.dim(), got: rho.matrix().dim() });
    }
    let d = generator.dim();
    let mut out = vec![ZERO; d * d];
    generator.rhs_into(generator.schedule.stage(t), t, rho.matrix().as_slice(), &mut out, &mut Workspace::default())?;
    ComplexMatrix::from_vec(d, out)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub populations: Vec<LogicalPopulations>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    pub trace_err: Vec<f64>,
    pub herm_err: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub renormalizations: usize,
    /// Largest amount a negativity was clipped up to zero.
    pub max_negativity_clip: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, rho: &DensityMatrix) -> Result<()> {
        let herm = rho.hermiticity_error();
        let tr = rho.trace();
        let min_eig = hermitian_eigensystem(&rho.matrix().hermitian_part())?.values[0];
        if min_eig < POSITIVITY_FLOOR {
            return Err(Error::PositivityViolation { t, value: min_eig });
        }
        let four_mode = rho.layout().len() == 4;
        if four_mode {
            self.populations.push(logical_populations(rho)?);
            let n1 = negativity(rho, (QUBIT, MAGNON_L))?;
            let n2 = negativity(rho, (QUBIT, MAGNON_R))?;
            self.max_negativity_clip = self.max_negativity_clip.max(n1.clipped).max(n2.clipped);
            self.n1.push(n1.value);
            self.n2.push(n2.value);
        }
        self.times.push(t);
        self.trace_err.push((tr - 1.0).norm());
        self.herm_err.push(herm);
        self.min_eig.push(min_eig);
        Ok(())
    }

    /// Append `other`, dropping its first sample when it repeats our last time.
    pub fn extend(&mut self, other: TrajectoryRecord) {
        let skip = match (self.times.last(), other.times.first()) {
            (Some(a), Some(b)) if b <= a => 1,
            _ => 0,
        };
        let has_pops = !other.populations.is_empty();
        self.times.extend(other.times.into_iter().skip(skip));
        if has_pops {
            self.populations.extend(other.populations.into_iter().skip(skip));
            self.n1.extend(other.n1.into_iter().skip(skip));
            self.n2.extend(other.n2.into_iter().skip(skip));
        }
        self.trace_err.extend(other.trace_err.into_iter().skip(skip));
        self.herm_err.extend(other.herm_err.into_iter().skip(skip));
        self.min_eig.extend(other.min_eig.into_iter().skip(skip));
        self.renormalizations += other.renormalizations;
        self.max_negativity_clip = self.max_negativity_clip.max(other.max_negativity_clip);
    }

    pub fn max_n1(&self) -> f64 {
        self.n1.iter().copied().fold(0.0, f64::max)
    }

    /// Largest N2 and the first time it is reached.
    pub fn max_n2(&self) -> (f64, f64) {
        let mut best = (0.0, self.times.first().copied().unwrap_or(0.0));
        for (&n, &t) in self.n2.iter().zip(&self.times) {
            if n > best.0 {
                best = (n, t);
            }
        }
        best
    }
}

fn axpy(out: &mut [C64], x: &[C64], a: f64, y: &[C64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * a;
    }
}

/// Evolve over `[ta, tb]` holding `stage`'s generator throughout.
pub fn evolve_segment(
    rho0: &DensityMatrix,
    (ta, tb): (f64, f64),
    stage: Stage,
    generator: &LindbladGenerator,
    dt: f64,
    record_stride: usize,
) -> Result<(DensityMatrix, TrajectoryRecord)> {
    if rho0.layout() != generator.layout() {
        return Err(Error::DimensionMismatch { expected: generator.dim(), got: rho0.matrix().dim() });
    }
    if !(tb >= ta) || !(dt > 0.0) || record_stride == 0 {
        return Err(Error::InvalidParameter(format!("bad span [{ta}, {tb}] or dt {dt}")));
    }
    let mut record = TrajectoryRecord::default();
    record.push(ta, rho0)?;
    if tb == ta {
        return Ok((rho0.clone(), record));
    }
    let d = generator.dim();
    let n = step_count(tb - ta, dt);
    let h = (tb - ta) / n as f64;
    let mut rho = rho0.matrix().as_slice().to_vec();
    let mut ws = Workspace::default();
    let mut k = [vec![ZERO; d * d], vec![ZERO; d * d], vec![ZERO; d * d], vec![ZERO; d * d]];
    let mut tmp = vec![ZERO; d * d];
    for step in 0..n {
        let t = ta + step as f64 * h;
        let t_next = if step + 1 == n { tb } else { ta + (step + 1) as f64 * h };
        generator.rhs_into(stage, t, &rho, &mut k[0], &mut ws)?;
        axpy(&mut tmp, &rho, h / 2.0, &k[0]);
        generator.rhs_into(stage, t + h / 2.0, &tmp, &mut k[1], &mut ws)?;
        axpy(&mut tmp, &rho, h / 2.0, &k[1]);
        generator.rhs_into(stage, t + h / 2.0, &tmp, &mut k[2], &mut ws)?;
        axpy(&mut tmp, &rho, h, &k[2]);
        generator.rhs_into(stage, t_next, &tmp, &mut k[3], &mut ws)?;
        for (idx, r) in rho.iter_mut().enumerate() {
            *r += (k[0][idx] + (k[1][idx] + k[2][idx]) * 2.0 + k[3][idx]) * (h / 6.0);
        }
        post_step(&mut rho, d, t_next, &mut record.renormalizations)?;
        if (step + 1) % record_stride == 0 || step + 1 == n {
            let state = DensityMatrix::from_matrix(rho0.layout().clone(), ComplexMatrix::from_vec(d, rho.clone())?)?;
            record.push(t_next, &state)?;
        }
    }
    let out = DensityMatrix::from_matrix(rho0.layout().clone(), ComplexMatrix::from_vec(d, rho)?)?;
    Ok((out, record))
}

/// Symmetrize, then check and if needed renormalize the trace.
fn post_step(rho: &mut [C64], d: usize, t: f64, renorms: &mut usize) -> Result<()> {
    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    for i in 0..d {
        for j in i..d {
            let avg = (rho[i * d + j] + rho[j * d + i].conj()) * 0.5;
            rho[i * d + j] = avg;
            rho[j * d + i] = avg.conj();
        }
    }
    let tr: f64 = (0..d).map(|i| rho[i * d + i].re).sum();
    let drift = (tr - 1.0).abs();
    if drift > TRACE_ABORT {
        return Err(Error::TraceDrift { t, drift });
    }
    if drift > TRACE_RENORM {
        for z in rho.iter_mut() {
            *z /= tr;
        }
        *renorms += 1;
        if *renorms > MAX_RENORMALIZATIONS {
            return Err(Error::TooManyRenormalizations(*renorms));
        }
    }
    Ok(())
}

/// Evolve over `t_span` with the generator of the stage containing the span's
/// midpoint, so a stage's couplings stay on at its closing endpoint.
pub fn evolve_lindblad(
    rho0: &DensityMatrix,
    t_span: (f64, f64),
    generator: &LindbladGenerator,
    config: &IntegratorConfig,
) -> Result<(DensityMatrix, TrajectoryRecord)> {
    config.validate()?;
    let s = &generator.schedule;
    let dt = config.dt.unwrap_or_else(|| default_dt_for(s.t1, s.t2));
    let stage = generator.schedule.stage(0.5 * (t_span.0 + t_span.1));
    evolve_segment(rho0, t_span, stage, generator, dt, config.record_stride)
}

#[derive(Clone, Debug)]
pub struct SchrodingerResult {
    pub state: StateVector,
    pub max_norm_drift: f64,
}

/// RK4 on `dpsi/dt = -i H(t) psi`, renormalizing every step.
pub fn evolve_schrodinger<H>(psi0: &StateVector, (ta, tb): (f64, f64), h_fn: H, dt: f64) -> Result<SchrodingerResult>
where
    H: Fn(f64) -> Result<ComplexMatrix>,
{
    if !(dt > 0.0) || !(tb >= ta) {
        return Err(Error::InvalidParameter(format!("bad span [{ta}, {tb}] or dt {dt}")));
    }
    let mut psi = psi0.amplitudes().to_vec();
    let mut max_norm_drift: f64 = 0.0;
    if tb > ta {
        let n = step_count(tb - ta, dt);
        let h = (tb - ta) / n as f64;
        let d = psi.len();
        let f = |t: f64, v: &[C64]| -> Result<Vec<C64>> {
            let m = h_fn(t)?;
            if m.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
            }
            Ok(m.matvec(v).into_iter().map(|z| -I * z).collect())
        };
        let mut tmp = vec![ZERO; d];
        for step in 0..n {
            let t = ta + step as f64 * h;
            let t_next = if step + 1 == n { tb } else { ta + (step + 1) as f64 * h };
            let k1 = f(t, &psi)?;
            axpy(&mut tmp, &psi, h / 2.0, &k1);
            let k2 = f(t + h / 2.0, &tmp)?;
            axpy(&mut tmp, &psi, h / 2.0, &k2);
            let k3 = f(t + h / 2.0, &tmp)?;
            axpy(&mut tmp, &psi, h, &k3);
            let k4 = f(t_next, &tmp)?;
            for i in 0..d {
                psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFinite { t: t_next });
            }
            max_norm_drift = max_norm_drift.max((norm - 1.0).abs());
            for z in psi.iter_mut() {
                *z /= norm;
            }
        }
    }
    Ok(SchrodingerResult { state: StateVector::new(psi0.layout().clone(), psi)?, max_norm_drift })
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub final_state: DensityMatrix,
    pub stage1_state: DensityMatrix,
    pub record: TrajectoryRecord,
    pub dt: f64,
    pub steps: (usize, usize),
}

/// `|g100><g100|` on the protocol layout.
pub fn initial_state(layout: &HilbertLayout) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_pure(&StateVector::basis(layout, &[0, 1, 0, 0])?))
}

/// Stage 1 on `[0, T1]`, then stage 2 on `[T1, T2]` from the same state.
pub fn run_protocol(params: &SystemParams, config: &IntegratorConfig) -> Result<ProtocolRun> {
    config.validate()?;
    let generator = LindbladGenerator::for_params(params)?;
    let dt = config.resolved_dt(params);
    let rho0 = initial_state(generator.layout())?;
    let (rho1, mut record) =
        evolve_segment(&rho0, (0.0, params.t1), Stage::Local, &generator, dt, config.record_stride)?;
    let (rho2, tail) =
        evolve_segment(&rho1, (params.t1, params.t2), Stage::Transfer, &generator, dt, config.record_stride)?;
    record.extend(tail);
    let steps = (step_count(params.t1, dt), step_count(params.t2 - params.t1, dt));
    Ok(ProtocolRun { final_state: rho2, stage1_state: rho1, record, dt, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{h_stage1, h_stage2, ModeOperators};
    use proptest::prelude::*;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    /// Dense reference generator written directly from the master equation.
    fn dense_rhs(rho: &ComplexMatrix, t: f64, p: &SystemParams) -> ComplexMatrix {
        let layout = p.layout().unwrap();
        let sched = build_schedule(p).unwrap();
        let (terms, cross) = build_dissipators(p, &layout).unwrap();
        let stage = sched.stage(t);
        let h = match stage {
            Stage::Local => {
                let (g1, g2) = sched.stage1_couplings(t).unwrap();
                h_stage1(g1, g2, &layout).unwrap()
            }
            Stage::Transfer => h_stage2(sched.g_eff(t), &layout).unwrap(),
            Stage::Idle => ComplexMatrix::zeros(layout.total_dim()),
        };
        let mut out = (&(&h * rho) - &(rho * &h)).scale(-I);
        for term in &terms {
            let l = &term.operator;
            let ld = l.adjoint();
            let ldl = &ld * l;
            let piece = &(&(l * rho) * &ld) - &(&(&ldl * rho) + &(rho * &ldl)).scale_real(0.5);
            out = &out + &piece.scale_real(term.rate);
        }
        let st = sched.stilde(t);
        for c in &cross {
            let s = st.get(c.j, c.k);
            let mjd = c.op_j.adjoint();
            let prod = &mjd * &c.op_k;
            let piece = &(&(&c.op_k * rho) * &mjd).scale_real(2.0) - &(&(&prod * rho) + &(rho * &prod));
            out = &out + &piece.scale(s);
        }
        out
    }

    fn random_rho(re: &[f64], im: &[f64]) -> DensityMatrix {
        let layout = HilbertLayout::standard(2).unwrap();
        let a: Vec<C64> = (0..16).map(|i| C64::new(re[i], im[i])).collect();
        let b: Vec<C64> = (0..16).map(|i| C64::new(im[i + 16], re[i + 16])).collect();
        let pa = DensityMatrix::from_pure(&StateVector::new(layout.clone(), a).unwrap());
        let pb = DensityMatrix::from_pure(&StateVector::new(layout, b).unwrap());
        pa.mix(&pb, 0.35).unwrap()
    }

    #[test]
    fn zero_generator_gives_zero_derivative() {
        let p = params().closed();
        let g = LindbladGenerator::for_params(&p).unwrap();
        let rho = initial_state(g.layout()).unwrap();
        let d = lindblad_rhs(&rho, p.t2 + 1.0, &g).unwrap();
        assert_eq!(d.max_abs(), 0.0);
        let (out, rec) = evolve_segment(&rho, (p.t2, p.t2 + 0.3), Stage::Idle, &g, 1e-3, 7).unwrap();
        assert_eq!(out, rho);
        assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*rec.times.last().unwrap(), p.t2 + 0.3);
    }

    #[test]
    fn amplitude_damping_matches_exponential() {
        let mut p = params().closed();
        p.gamma_q = 0.8;
        let rate = p.angular().gamma_q;
        let g = LindbladGenerator::for_params(&p).unwrap();
        let layout = g.layout().clone();
        let excited = DensityMatrix::from_pure(&StateVector::basis(&layout, &[1, 0, 0, 0]).unwrap());
        let t0 = p.t2;
        let mut rho = excited;
        for k in 1..=10 {
            let (next, _) = evolve_segment(&rho, (t0 + (k - 1) as f64 * 0.05, t0 + k as f64 * 0.05), Stage::Idle, &g, 1e-4, 100).unwrap();
            rho = next;
            let pe = rho.population(layout.index_of(&[1, 0, 0, 0]).unwrap());
            assert!((pe - (-rate * 0.05 * k as f64).exp()).abs() < 1e-8, "k = {k}: {pe}");
        }
    }

    #[test]
    fn closed_stage1_is_half_rabi() {
        let p = params().closed();
        let g = LindbladGenerator::for_params(&p).unwrap();
        let rho0 = initial_state(g.layout()).unwrap();
        let dt = default_dt(&p);
        let (half, _) = evolve_segment(&rho0, (0.0, p.t1 / 2.0), Stage::Local, &g, dt, 10).unwrap();
        let (end, rec) = evolve_segment(&half, (p.t1 / 2.0, p.t1), Stage::Local, &g, dt, 10).unwrap();
        let ph = logical_populations(&half).unwrap();
        assert!((ph.g100 - 0.5).abs() < 1e-4);
        let pe = logical_populations(&end).unwrap();
        assert!(pe.g100 <= 1e-6);
        assert!((pe.e000 - 0.5).abs() < 1e-4 && (pe.g010 - 0.5).abs() < 1e-4);
        assert!((rec.n1.last().unwrap() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn sparse_kernel_matches_dense_reference() {
        let p = params();
        let g = LindbladGenerator::for_params(&p).unwrap();
        let re: Vec<f64> = (0..32).map(|i| ((i * 37 % 17) as f64 - 8.0) / 9.0).collect();
        let im: Vec<f64> = (0..32).map(|i| ((i * 11 % 13) as f64 - 6.0) / 7.0).collect();
        let rho = random_rho(&re, &im);
        for t in [0.0, p.t1 * 0.3, p.t1 + 0.01, p.t1 + 0.05, p.t2 + 0.1] {
            let a = lindblad_rhs(&rho, t, &g).unwrap();
            let b = dense_rhs(rho.matrix(), t, &p);
            assert!(a.max_abs_diff(&b) < 1e-10 * (1.0 + b.max_abs()), "t = {t}");
        }
    }

    #[test]
    fn closed_evolution_conserves_excitations() {
        let p = params().closed();
        let layout = p.layout().unwrap();
        let g = LindbladGenerator::new(&layout, build_schedule(&p).unwrap(), &[], &[]).unwrap();
        let n_op = ModeOperators::new(g.layout()).unwrap().excitation_number();
        let rho0 = initial_state(g.layout()).unwrap();
        let dt = default_dt(&p);
        let (r1, _) = evolve_segment(&rho0, (0.0, p.t1), Stage::Local, &g, dt, 1000).unwrap();
        let (r2, _) = evolve_segment(&r1, (p.t1, p.t2), Stage::Transfer, &g, dt, 1000).unwrap();
        for r in [&r1, &r2] {
            let n = (&n_op * r.matrix()).trace().re;
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn schrodinger_oracles() {
        let layout = HilbertLayout::new(vec![3]).unwrap();
        let psi = StateVector::new(layout.clone(), vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO]).unwrap();
        let still = evolve_schrodinger(&psi, (0.0, 2.0), |_| Ok(ComplexMatrix::zeros(3)), 0.01).unwrap();
        assert_eq!(still.state.amplitudes(), psi.amplitudes());

        let h = crate::model::h_stage1_logical(0.9, -0.4);
        let es = hermitian_eigensystem(&h).unwrap();
        let v = StateVector::new(layout, es.vector(2)).unwrap();
        let t = 1.5;
        let out = evolve_schrodinger(&v, (0.0, t), |_| Ok(h.clone()), 1e-3).unwrap().state;
        let phase = C64::from_polar(1.0, -es.values[2] * t);
        for (a, b) in out.amplitudes().iter().zip(v.amplitudes()) {
            assert!((a - b * phase).norm() <= 1e-9 * t);
        }
    }

    #[test]
    fn record_extension_drops_duplicate_time() {
        let p = params();
        let run = run_protocol(&p, &IntegratorConfig { record_stride: 40, ..Default::default() }).unwrap();
        assert!(run.record.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(run.record.times.len(), run.record.n2.len());
        assert_eq!(run.record.times[0], 0.0);
        assert_eq!(*run.record.times.last().unwrap(), p.t2);
    }

    #[test]
    fn integrator_config_validation() {
        assert!(IntegratorConfig { dt: Some(0.0), ..Default::default() }.validate().is_err());
        assert!(IntegratorConfig { record_stride: 0, ..Default::default() }.validate().is_err());
        assert_eq!(step_count(1.0, 0.25), 4);
        assert_eq!(step_count(1.0, 0.3), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn generator_is_traceless_and_hermitian(
            re in prop::collection::vec(-1.0..1.0f64, 32),
            im in prop::collection::vec(-1.0..1.0f64, 32),
            frac in 0.0..1.0f64,
        ) {
            prop_assume!(re.iter().take(16).map(|x| x * x).sum::<f64>() > 1e-3);
            prop_assume!(im.iter().skip(16).map(|x| x * x).sum::<f64>() > 1e-3);
            let p = params();
            let g = LindbladGenerator::for_params(&p).unwrap();
            let rho = random_rho(&re, &im);
            let t = frac * p.t2;
            let d = lindblad_rhs(&rho, t, &g).unwrap();
            prop_assert!(d.trace().norm() <= 1e-12 * (1.0 + d.max_abs()));
            prop_assert!(d.hermiticity_error() <= 1e-12 * (1.0 + d.max_abs()));
        }
    }
}
