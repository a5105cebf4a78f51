//! Experiment orchestration: single runs, 2-D rate sweeps and the diagnostic
//! check suite, plus the files each one writes.

pub mod config;
pub mod output;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::control::{invariant_residual, reconstruct_state, sta_couplings, InvariantSpec};
use crate::dynamics::{
    default_dt, evolve_schrodinger, evolve_segment, initial_state, run_protocol, IntegratorConfig,
    LindbladGenerator, ProtocolRun, STEP_RATE_BOUND,
};
use crate::error::{Error, Result};
use crate::metrics::{bell_fidelity, fidelity_up_to_phase, logical_populations, negativity, BellTarget, LogicalPopulations};
use crate::model::{h_stage1_logical, thermal_occupation, thermal_occupations, RateParam, SystemParams};
use crate::tensor::{DensityMatrix, HilbertLayout, StateVector, C64, MAGNON_L, QUBIT};

use config::{ExperimentKind, OutputFormat, RunConfig, SweepMetric};
use output::{grid_csv, timeseries_csv, write_json, write_text};

pub const WORKERS_ENV: &str = "MAGNON_LINK_WORKERS";

/// Unit-modulus phase as JSON-friendly parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Phase {
    pub re: f64,
    pub im: f64,
    pub arg_over_pi: f64,
}

impl From<C64> for Phase {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im, arg_over_pi: z.arg() / PI }
    }
}

/// Relative phase of the stage-2 Bell state produced by the closed-system
/// protocol; the fidelity target for the dissipative runs.
pub fn audit_phase(params: &SystemParams, integrator: &IntegratorConfig) -> Result<C64> {
    let run = run_protocol(&params.closed(), integrator)?;
    let (_, phase) = fidelity_up_to_phase(&run.final_state, &BellTarget::stage2(C64::new(1.0, 0.0))?)?;
    Ok(phase)
}

/// `dt * max_rate`, which must stay below [`STEP_RATE_BOUND`].
pub fn step_rate_product(params: &SystemParams, integrator: &IntegratorConfig) -> Result<f64> {
    let g = LindbladGenerator::for_params(params)?;
    Ok(integrator.resolved_dt(params) * g.max_rate()?)
}

fn check_step_bound(params: &SystemParams, integrator: &IntegratorConfig) -> Result<f64> {
    let p = step_rate_product(params, integrator)?;
    if p > STEP_RATE_BOUND {
        return Err(Error::Config(format!(
            "dt * max_rate = {p:.3e} exceeds {STEP_RATE_BOUND}; lower integrator.dt"
        )));
    }
    Ok(p)
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub max_trace_err: f64,
    pub max_herm_err: f64,
    pub min_eig: f64,
    pub renormalizations: usize,
    pub max_negativity_clip: f64,
    pub dt: f64,
    pub steps_stage1: usize,
    pub steps_stage2: usize,
}

impl Diagnostics {
    fn of(run: &ProtocolRun) -> Self {
        let r = &run.record;
        Self {
            max_trace_err: r.trace_err.iter().copied().fold(0.0, f64::max),
            max_herm_err: r.herm_err.iter().copied().fold(0.0, f64::max),
            min_eig: r.min_eig.iter().copied().fold(f64::INFINITY, f64::min),
            renormalizations: r.renormalizations,
            max_negativity_clip: r.max_negativity_clip,
            dt: run.dt,
            steps_stage1: run.steps.0,
            steps_stage2: run.steps.1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    /// Fidelity to the phase-audited Bell target.
    #[serde(rename = "F")]
    pub f: f64,
    /// Fidelity to `(|e000> + |g001>)/sqrt2` as written.
    #[serde(rename = "F_literal")]
    pub f_literal: f64,
    /// Best fidelity over the relative phase for this state alone.
    #[serde(rename = "F_best")]
    pub f_best: f64,
    pub target_phase: Phase,
    #[serde(rename = "max_N1")]
    pub max_n1: f64,
    #[serde(rename = "max_N2")]
    pub max_n2: f64,
    #[serde(rename = "t_max_N2")]
    pub t_max_n2: f64,
    #[serde(rename = "N2_final")]
    pub n2_final: f64,
    pub final_populations: LogicalPopulations,
    pub diagnostics: Diagnostics,
}

pub fn summarize(run: &ProtocolRun, target_phase: C64) -> Result<RunSummary> {
    let literal = BellTarget::stage2(C64::new(1.0, 0.0))?;
    let audited = literal.with_phase(target_phase)?;
    let (f_best, _) = fidelity_up_to_phase(&run.final_state, &literal)?;
    let (max_n2, t_max_n2) = run.record.max_n2();
    Ok(RunSummary {
        f: bell_fidelity(&run.final_state, &audited)?,
        f_literal: bell_fidelity(&run.final_state, &literal)?,
        f_best,
        target_phase: target_phase.into(),
        max_n1: run.record.max_n1(),
        max_n2,
        t_max_n2,
        n2_final: negativity(&run.final_state, (QUBIT, crate::tensor::MAGNON_R))?.value,
        final_populations: logical_populations(&run.final_state)?,
        diagnostics: Diagnostics::of(run),
    })
}

/// One dissipative run scored against a given target phase.
pub fn evaluate(params: &SystemParams, integrator: &IntegratorConfig, target_phase: C64) -> Result<(ProtocolRun, RunSummary)> {
    check_step_bound(params, integrator)?;
    let run = run_protocol(params, integrator)?;
    let summary = summarize(&run, target_phase)?;
    Ok((run, summary))
}

pub fn run_single(cfg: &RunConfig) -> Result<(ProtocolRun, RunSummary)> {
    let phase = audit_phase(&cfg.system, &cfg.integrator)?;
    evaluate(&cfg.system, &cfg.integrator, phase)
}

/// Sweep parallelism from `MAGNON_LINK_WORKERS`, else the machine's.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got \"{v}\""))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[derive(Clone, Debug, Serialize)]
pub struct CellOutcome {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "N2max")]
    pub n2max: f64,
    pub error: Option<String>,
    pub diagnostics: Option<Diagnostics>,
}

impl CellOutcome {
    fn from_result(r: Result<(ProtocolRun, RunSummary)>) -> Self {
        match r {
            Ok((_, s)) => Self { f: s.f, n2max: s.max_n2, error: None, diagnostics: Some(s.diagnostics) },
            Err(e) => Self { f: f64::NAN, n2max: f64::NAN, error: Some(e.to_string()), diagnostics: None },
        }
    }

    pub fn metric(&self, m: SweepMetric) -> f64 {
        match m {
            SweepMetric::F => self.f,
            SweepMetric::N2max => self.n2max,
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Runs with `param` set to each value, everything else from `base`. The
/// target phase is audited once, since the rates do not enter the Hamiltonian.
pub fn line_scan(
    base: &SystemParams,
    settings: &[(RateParam, f64)],
    param: RateParam,
    values: &[f64],
    integrator: &IntegratorConfig,
    workers: usize,
) -> Result<Vec<CellOutcome>> {
    let phase = audit_phase(base, integrator)?;
    let mut fixed = base.clone();
    for &(p, v) in settings {
        p.set(&mut fixed, v);
    }
    parallel_map(values, workers, |&v| {
        let mut p = fixed.clone();
        param.set(&mut p, v);
        CellOutcome::from_result(evaluate(&p, integrator, phase))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub axis1: RateParam,
    pub axis2: RateParam,
    pub axis1_values: Vec<f64>,
    pub axis2_values: Vec<f64>,
    pub target_phase: Phase,
    /// Row-major, `axis1_values.len()` rows.
    pub cells: Vec<Vec<CellOutcome>>,
}

impl SweepResult {
    pub fn matrix(&self, m: SweepMetric) -> Vec<Vec<f64>> {
        self.cells.iter().map(|row| row.iter().map(|c| c.metric(m)).collect()).collect()
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().flatten().filter(|c| !c.ok()).count()
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }
}

pub fn run_sweep(cfg: &RunConfig, workers: usize) -> Result<SweepResult> {
    let spec = cfg.sweep()?;
    let [a1, a2] = &spec.axes;
    let (v1, v2) = (a1.values(), a2.values());
    let phase = audit_phase(&cfg.system, &cfg.integrator)?;
    let grid: Vec<(f64, f64)> = v1.iter().flat_map(|&x| v2.iter().map(move |&y| (x, y))).collect();
    let flat = parallel_map(&grid, workers, |&(x, y)| {
        let mut p = cfg.system.clone();
        a1.name.set(&mut p, x);
        a2.name.set(&mut p, y);
        CellOutcome::from_result(evaluate(&p, &cfg.integrator, phase))
    })?;
    let mut rows = Vec::with_capacity(v1.len());
    let mut it = flat.into_iter();
    for _ in 0..v1.len() {
        rows.push(it.by_ref().take(v2.len()).collect());
    }
    Ok(SweepResult {
        axis1: a1.name,
        axis2: a2.name,
        axis1_values: v1,
        axis2_values: v2,
        target_phase: phase.into(),
        cells: rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Checks(Vec<CheckResult>);

impl Checks {
    fn at_most(&mut self, name: &'static str, measured: f64, threshold: f64, detail: impl Into<String>) {
        self.0.push(CheckResult { name, passed: measured <= threshold, measured, threshold, detail: detail.into() });
    }

    fn at_least(&mut self, name: &'static str, measured: f64, threshold: f64, detail: impl Into<String>) {
        self.0.push(CheckResult { name, passed: measured >= threshold, measured, threshold, detail: detail.into() });
    }

    fn failed(&mut self, name: &'static str, err: &Error) {
        self.0.push(CheckResult { name, passed: false, measured: f64::NAN, threshold: f64::NAN, detail: format!("error: {err}") });
    }

    fn run(&mut self, name: &'static str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.failed(name, &e);
        }
    }
}

/// Overlap `|<a|b>|^2` of two kets.
fn overlap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// Every diagnostic check; failures are report content, not errors.
pub fn run_check(cfg: &RunConfig) -> CheckReport {
    let params = &cfg.system;
    let integ = &cfg.integrator;
    let mut c = Checks(Vec::new());
    let spec = InvariantSpec::linear_ramp(params.t1);

    c.run("invariant_condition", |c| {
        let mut worst: f64 = 0.0;
        for k in 0..=1000 {
            worst = worst.max(invariant_residual(&spec, params.t1 * k as f64 / 1000.0)?);
        }
        c.at_most("invariant_condition", worst, 1e-8 * spec.omega0, "max |i dI/dt - [H, I]| on 1001 points");
        Ok(())
    });

    c.run("lr_reconstruction", |c| {
        let (g1, g2) = sta_couplings(&spec, 0.0)?;
        let h = |t: f64| -> Result<_> {
            let (a, b) = sta_couplings(&spec, t)?;
            Ok(h_stage1_logical(a, b))
        };
        let three = HilbertLayout::new(vec![3])?;
        let psi0 = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let mut psi = StateVector::new(three, psi0.to_vec())?;
        let dt = params.t1 / 4000.0;
        let mut worst: f64 = 1.0;
        let mut t_prev = 0.0;
        for k in 1..=20 {
            let t = params.t1 * k as f64 / 20.0;
            psi = evolve_schrodinger(&psi, (t_prev, t), h, dt)?.state;
            t_prev = t;
            let lr = reconstruct_state(&spec, &psi0, t, |_| h_stage1_logical(g1, g2))?;
            worst = worst.min(overlap(&lr, psi.amplitudes()));
        }
        c.at_least("lr_reconstruction", worst, 1.0 - 1e-6, "min overlap at 20 checkpoints");
        Ok(())
    });

    let closed = params.closed();
    c.run("closed_stage1", |c| {
        let g = LindbladGenerator::for_params(&closed)?;
        let rho0 = initial_state(g.layout())?;
        let dt = integ.resolved_dt(&closed);
        let stage = crate::control::Stage::Local;
        let (half, _) = evolve_segment(&rho0, (0.0, params.t1 / 2.0), stage, &g, dt, usize::MAX)?;
        let (end, _) = evolve_segment(&half, (params.t1 / 2.0, params.t1), stage, &g, dt, usize::MAX)?;
        let ph = logical_populations(&half)?;
        let pe = logical_populations(&end)?;
        let n1 = negativity(&end, (QUBIT, MAGNON_L))?.value;
        c.at_most("closed_stage1_g100_at_T1", pe.g100, 1e-6, "P_g100(T1)");
        c.at_most("closed_stage1_e000_at_T1", (pe.e000 - 0.5).abs(), 1e-4, format!("|P_e000(T1) - 0.5|, P = {}", pe.e000));
        c.at_most("closed_stage1_g010_at_T1", (pe.g010 - 0.5).abs(), 1e-4, format!("|P_g010(T1) - 0.5|, P = {}", pe.g010));
        c.at_most("closed_stage1_g100_at_half", (ph.g100 - 0.5).abs(), 1e-4, format!("|P_g100(T1/2) - 0.5|, P = {}", ph.g100));
        c.at_most("closed_stage1_N1_at_T1", (n1 - 0.5).abs(), 1e-4, format!("|N1(T1) - 0.5|, N1 = {n1}"));
        Ok(())
    });

    c.run("closed_protocol", |c| {
        let run = run_protocol(&closed, integ)?;
        let stage1 = BellTarget::stage1(C64::new(1.0, 0.0))?;
        let stage2 = BellTarget::stage2(C64::new(1.0, 0.0))?;
        let (f1, p1) = fidelity_up_to_phase(&run.stage1_state, &stage1)?;
        let (f2, p2) = fidelity_up_to_phase(&run.final_state, &stage2)?;
        let lit1 = bell_fidelity(&run.stage1_state, &stage1)?;
        let lit2 = bell_fidelity(&run.final_state, &stage2)?;
        let n2 = negativity(&run.final_state, (QUBIT, crate::tensor::MAGNON_R))?.value;
        c.at_least("closed_protocol_fidelity", f2, 0.99, "F up to phase at T2, all rates zero");
        c.at_least("closed_protocol_N2_at_T2", n2, 0.49, "N2(T2), all rates zero");
        c.at_least(
            "bell_phase_audit_stage1",
            f1,
            0.999,
            format!(
                "produced relative phase {:+.6}{:+.6}i (arg/pi = {:.6}); fidelity to the +1 target {:.3e}",
                p1.re,
                p1.im,
                p1.arg() / PI,
                lit1
            ),
        );
        c.at_least(
            "bell_phase_audit_stage2",
            f2,
            0.99,
            format!(
                "produced relative phase {:+.6}{:+.6}i (arg/pi = {:.6}); fidelity to the +1 target {:.3e}",
                p2.re,
                p2.im,
                p2.arg() / PI,
                lit2
            ),
        );
        Ok(())
    });

    c.run("dt_bound", |c| {
        let p = step_rate_product(params, integ)?;
        c.at_most("dt_bound", p, STEP_RATE_BOUND, format!("dt * max_rate with dt = {:.4e} us", integ.resolved_dt(params)));
        Ok(())
    });

    c.run("generator_sanity", |c| {
        let phase = audit_phase(params, integ)?;
        let run = run_protocol(params, integ)?;
        let s = summarize(&run, phase)?;
        let d = &s.diagnostics;
        c.at_most("trace_preservation", d.max_trace_err, integ.trace_tol, "max |tr rho - 1| over samples");
        c.at_most("hermiticity", d.max_herm_err, integ.herm_tol, "max |rho - rho'| over samples");
        c.at_least("positivity", d.min_eig, -1e-7, "min eigenvalue over samples");
        c.at_most("renormalizations", d.renormalizations as f64, 100.0, "trace renormalizations");

        let half = IntegratorConfig { dt: Some(run.dt / 2.0), ..integ.clone() };
        let fine = run_protocol(params, &half)?;
        let f_half = summarize(&fine, phase)?.f;
        c.at_most(
            "step_halving",
            (s.f - f_half).abs(),
            1e-6,
            format!("|F(dt) - F(dt/2)|, F(dt) = {:.12}, dt = {:.4e} us", s.f, run.dt),
        );
        Ok(())
    });

    c.run("negativity_units", |c| {
        let two = HilbertLayout::new(vec![2, 2])?;
        let bell = DensityMatrix::from_pure(&StateVector::bell(&two, &[0, 0], &[1, 1], C64::new(1.0, 0.0))?);
        c.at_most("negativity_bell", (negativity(&bell, (0, 1))?.value - 0.5).abs(), 1e-10, "|N(Bell) - 0.5|");
        let prod = DensityMatrix::from_pure(&StateVector::basis(&two, &[1, 0])?);
        c.at_most("negativity_product", negativity(&prod, (0, 1))?.value, 1e-12, "N(product)");
        let werner = |p: f64| -> Result<f64> {
            crate::metrics::negativity_raw(&bell.mix(&DensityMatrix::maximally_mixed(&two), p)?, (0, 1))
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if werner(mid)? > 1e-13 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        c.at_most("negativity_werner_threshold", (p - 1.0 / 3.0).abs(), 1e-6, format!("bisected threshold p = {p:.9}"));
        Ok(())
    });

    c.run("thermal_occupation", |c| {
        let n5 = thermal_occupation(5.0, 0.05)?;
        let n10 = thermal_occupation(10.0, 0.05)?;
        c.at_most("thermal_5GHz_50mK", (n5 / 8.30e-3 - 1.0).abs(), 0.01, format!("n = {n5:.4e}"));
        c.at_most("thermal_10GHz_50mK", (n10 / 6.8e-5 - 1.0).abs(), 0.01, format!("n = {n10:.4e}"));
        Ok(())
    });

    let passed = c.0.iter().all(|r| r.passed);
    CheckReport { passed, checks: c.0 }
}

/// Exit status of a finished command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Failure,
    Partial,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::Failure => 1,
            Self::Partial => 2,
        }
    }
}

pub fn manifest(cfg: &RunConfig, command: &str, wall_clock_s: f64, extra: Value) -> Result<Value> {
    let p = &cfg.system;
    let schedule = crate::control::build_schedule(p)?;
    let g = LindbladGenerator::for_params(p)?;
    let dt = cfg.integrator.resolved_dt(p);
    let max_rate = g.max_rate()?;
    Ok(json!({
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "command": command,
        "config": cfg.to_value()?,
        "defaulted": cfg.defaulted,
        "units": {
            "frequencies": "GHz, cyclic",
            "rates_and_couplings": "MHz, cyclic (f = omega / 2pi)",
            "times": "us",
            "rates_are_angular": p.rates_are_angular,
            "rates_are_angular_applies_to": ["kappa_c", "kappa_mL", "kappa_mR"],
            "internal": "rad/us",
        },
        "derived": {
            "angular": {
                "gamma_q": p.angular().gamma_q,
                "gamma_phi": p.angular().gamma_phi,
                "kappa_c": p.angular().kappa_c,
                "kappa_mL": p.angular().kappa_ml,
                "kappa_mR": p.angular().kappa_mr,
                "g_wg": p.angular().g_wg,
                "Omega": p.angular().omega_pulse,
            },
            "thermal_occupations": thermal_occupations(p)?,
            "stage1_couplings": sta_couplings(&schedule.invariant, 0.0)?,
            "dt_us": dt,
            "default_dt_us": default_dt(p),
            "max_rate": max_rate,
            "dt_times_max_rate": dt * max_rate,
        },
        "interpretations": [
            "coherent term uses the active stage Hamiltonian in the interaction picture: stage 1 on [0, T1], stage 2 on [T1, T2]",
            "waveguide magnon terms act on the full four-mode density matrix and only during stage 2",
            "F is scored against the Bell target whose relative phase is taken from the closed-system run",
        ],
        "schedule_samples": schedule.samples(512)?,
        "wall_clock_s": wall_clock_s,
        "result": extra,
    }))
}

/// Outcome of a CLI command: exit status and lines for stdout.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub lines: Vec<String>,
}

fn write_common(cfg: &RunConfig, out: &Path, command: &str, start: Instant, result: Value) -> Result<()> {
    write_json(&out.join("resolved_config.json"), &cfg.to_value()?)?;
    let m = manifest(cfg, command, start.elapsed().as_secs_f64(), result)?;
    write_json(&out.join("manifest.json"), &m)
}

/// Run the configured experiment and write its files under `out`.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    match cfg.experiment.kind {
        ExperimentKind::Single => {
            let (status, lines, result) = match run_single(cfg) {
                Ok((run, s)) => {
                    if cfg.output.wants(OutputFormat::Csv) {
                        write_text(&out.join("timeseries.csv"), &timeseries_csv(&run.record))?;
                    }
                    let lines = vec![
                        format!("F = {:.6} (literal target {:.6}, best over phase {:.6})", s.f, s.f_literal, s.f_best),
                        format!("max N1 = {:.6}, max N2 = {:.6} at t = {:.6} us", s.max_n1, s.max_n2, s.t_max_n2),
                    ];
                    let v = json!({ "status": "ok", "summary": s });
                    (Status::Success, lines, v)
                }
                Err(e) => (Status::Failure, vec![format!("run failed: {e}")], json!({ "status": "failed", "error": e.to_string() })),
            };
            if cfg.output.wants(OutputFormat::Json) {
                write_json(&out.join("summary.json"), &result)?;
            }
            write_common(cfg, out, "run", start, result)?;
            Ok(Outcome { status, lines })
        }
        ExperimentKind::Sweep => {
            let spec = cfg.sweep()?.clone();
            let res = run_sweep(cfg, workers_from_env()?)?;
            let names = (res.axis1.name(), res.axis2.name());
            if cfg.output.wants(OutputFormat::Csv) {
                for m in &spec.metrics {
                    let csv = grid_csv(names.0, names.1, &res.axis1_values, &res.axis2_values, &res.matrix(*m));
                    write_text(&out.join(format!("sweep_{}.csv", m.name())), &csv)?;
                }
            }
            let failures = res.failures();
            let status = match failures {
                0 => Status::Success,
                n if n == res.total() => Status::Failure,
                _ => Status::Partial,
            };
            let result = json!({
                "status": match status { Status::Success => "ok", Status::Failure => "failed", Status::Partial => "partial" },
                "failed_cells": failures,
                "sweep": res,
            });
            if cfg.output.wants(OutputFormat::Json) {
                write_json(&out.join("sweep_summary.json"), &result)?;
            }
            write_common(cfg, out, "sweep", start, json!({ "status": result["status"], "failed_cells": failures }))?;
            Ok(Outcome {
                status,
                lines: vec![format!("{} x {} cells, {} failed", res.axis1_values.len(), res.axis2_values.len(), failures)],
            })
        }
        ExperimentKind::Check => {
            let report = run_check(cfg);
            write_json(&out.join("check_report.json"), &report)?;
            write_common(cfg, out, "check", start, json!({ "passed": report.passed }))?;
            let lines = report
                .checks
                .iter()
                .map(|r| {
                    format!(
                        "{} {:<32} measured {:.6e} threshold {:.3e}  {}",
                        if r.passed { "PASS" } else { "FAIL" },
                        r.name,
                        r.measured,
                        r.threshold,
                        r.detail
                    )
                })
                .collect();
            Ok(Outcome { status: if report.passed { Status::Success } else { Status::Failure }, lines })
        }
    }
}
