//! Direct numerical solution of the delay equation
//! `x'(t) = -x(t) + zeta f(x(t - h))`.
//!
//! The integrator is the method of steps: on each delay interval the equation
//! is an ODE whose forcing term samples the already-computed previous
//! interval, integrated with classical RK4 and stored as Hermite-cubic dense
//! output ([`Trajectory`]).  On top of it sit:
//!
//! - [`probe_global_stability`]: run an ensemble of initial histories and
//!   classify the long-time behaviour ([`Verdict`]);
//! - [`estimate_hc`] / [`estimate_hc_report`]: bisect in the delay for the
//!   empirical threshold where the ensemble stops converging to zero;
//! - [`ModelFamily`] / [`NamedModel`]: classical population models
//!   `x' = -x + G(x(t - h))` with a positive equilibrium, and
//!   [`normalize_model`], which shifts and rescales them into the normalized
//!   form above;
//! - [`voc_residual`]: check a nonlinear trajectory against its
//!   variation-of-constants representation built on the fundamental solution.

use crate::fundamental_solution::{fundamental_numeric, FundError};
use crate::piecewise::{integrate_interval, steps_per_interval, Block, PiecewiseCubic};
use crate::quasipoly::{dominant_root, QuasiPoly, SpectrumError};
use crate::scalar_maps::{FamilyTag, MapError, Nonlinearity};
use crate::stability_regions::to_mu_nu;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Amplitude beyond which a trajectory is declared divergent.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// Hard cap on the number of delay intervals a single integration may span.
const MAX_INTERVALS: usize = 1_000_000;

/// Decay budget `ln(amplitude / threshold)` used when sizing probe horizons:
/// `ln(5 / 1e-6)` plus a 25% safety margin.
const LOG_DECAY_BUDGET: f64 = 16.2 * 1.25;

/// Budget cap for automatically chosen probe horizons.
const T_END_CAP: f64 = 12_000.0;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
    #[error("assessment window {window} does not fit in the integration span {t_end}")]
    WindowTooLong { window: f64, t_end: f64 },
    #[error("bad bisection bracket: {what}")]
    BadBracket { what: String },
    #[error("no positive equilibrium exists for zeta = {zeta} (need zeta > 1)")]
    NoPositiveEquilibrium { zeta: f64 },
    #[error("cannot normalize model: {what}")]
    NonNormalizable { what: String },
    #[error("time step underflow: dt = {dt}")]
    StepUnderflow { dt: f64 },
    #[error("trajectory diverged near t = {t} (amplitude {amplitude:.3e})")]
    Diverged { t: f64, amplitude: f64 },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Fund(#[from] FundError),
}

fn invalid(what: String) -> SolveError {
    SolveError::InvalidParameter { what }
}

fn validate_common(zeta: f64, delay: f64, tol: f64) -> Result<(), SolveError> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(invalid(format!("zeta = {zeta}, need 0 < zeta < inf")));
    }
    if !(delay > 0.0) || !delay.is_finite() {
        return Err(invalid(format!("delay = {delay}, need 0 < delay < inf")));
    }
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(invalid(format!("tol = {tol}, need 0 < tol <= 0.1")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Initial histories
// ---------------------------------------------------------------------------

/// An initial history segment on `[-h, 0]`.  All variants are expressed in
/// units of the delay, so the same `History` value is usable at any `h`.
#[derive(Clone, Debug)]
pub enum History {
    /// `x(s) = value`.
    Constant(f64),
    /// Linear from `start` at `s = -h` to `end` at `s = 0`.
    Ramp { start: f64, end: f64 },
    /// `amplitude * cos(2 pi cycles s / h)`; equals `amplitude` at both ends.
    Sinusoid { amplitude: f64, cycles: u32 },
    /// Piecewise-linear through uniformly spaced samples on `[-h, 0]`
    /// (first sample at `s = -h`, last at `s = 0`; at least two samples).
    Sampled(Vec<f64>),
}

impl History {
    /// Validated constructor for [`History::Sampled`].
    pub fn sampled(values: Vec<f64>) -> Result<History, SolveError> {
        if values.len() < 2 {
            return Err(invalid(format!(
                "sampled history needs at least 2 nodes, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "sampled history contains non-finite value {bad}"
            )));
        }
        Ok(History::Sampled(values))
    }

    /// Evaluate at `s` for delay `h`; arguments outside `[-h, 0]` clamp to
    /// the nearest endpoint.
    pub fn eval(&self, h: f64, s: f64) -> f64 {
        let s = s.clamp(-h, 0.0);
        match self {
            History::Constant(c) => *c,
            History::Ramp { start, end } => start + (end - start) * (s + h) / h,
            History::Sinusoid { amplitude, cycles } => {
                amplitude * (2.0 * std::f64::consts::PI * f64::from(*cycles) * s / h).cos()
            }
            History::Sampled(values) => {
                let n = values.len();
                let u = (s + h) / h * (n - 1) as f64;
                let i = (u.floor() as usize).min(n - 2);
                let w = u - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }

    /// The history advanced by `frac` of the interval (clamping at the right
    /// end), resampled onto 257 uniform nodes.  Node positions are fractions
    /// of the interval, so the result is independent of the delay; use it to
    /// build phase-shifted ensemble variants.
    pub fn shifted(&self, frac: f64) -> History {
        const N: usize = 257;
        let h = 1.0;
        let values = (0..N)
            .map(|i| {
                let s = i as f64 / (N - 1) as f64 * h - h;
                self.eval(h, s + frac * h)
            })
            .collect();
        History::Sampled(values)
    }
}

// ---------------------------------------------------------------------------
// Trajectories and integration
// ---------------------------------------------------------------------------

/// A dense solution trajectory on `[0, t_end]` with its generating
/// parameters.  Dense output is Hermite-cubic between RK4 nodes; queries
/// outside the covered span clamp to the nearest endpoint.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub delay: f64,
    pub zeta: f64,
    pub family: FamilyTag,
    pub dense: PiecewiseCubic,
}

impl Trajectory {
    pub fn value(&self, t: f64) -> f64 {
        self.dense.value(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.dense.derivative(t)
    }

    pub fn t_end(&self) -> f64 {
        self.dense.t_end
    }
}

fn check_history(history: &History) -> Result<(), SolveError> {
    if let History::Sampled(values) = history {
        if values.len() < 2 {
            return Err(invalid(format!(
                "sampled history needs at least 2 nodes, got {}",
                values.len()
            )));
        }
    }
    Ok(())
}

/// Integrate `x' = -x + zeta f(x(t - delay))` from the given history on
/// `[0, t_end]`, taking `x(0)` from the history's right endpoint.
pub fn integrate(
    nl: &Nonlinearity,
    zeta: f64,
    delay: f64,
    history: &History,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory, SolveError> {
    validate_common(zeta, delay, tol)?;
    check_history(history)?;
    integrate_from(nl, zeta, delay, history, history.eval(delay, 0.0), t_end, tol)
}

/// Like [`integrate`] but with an explicit initial value `x0`, which may
/// differ from the history's right endpoint (the solution then has a jump at
/// `t = 0`; delayed samples on the first interval use the history, i.e. the
/// left-sided limit).
pub fn integrate_from(
    nl: &Nonlinearity,
    zeta: f64,
    delay: f64,
    history: &History,
    x0: f64,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory, SolveError> {
    validate_common(zeta, delay, tol)?;
    check_history(history)?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid(format!("t_end = {t_end}, need 0 < t_end < inf")));
    }
    if !x0.is_finite() {
        return Err(invalid(format!("x0 = {x0}, need a finite initial value")));
    }
    let n_int = (t_end / delay).ceil() as usize;
    if n_int > MAX_INTERVALS {
        return Err(invalid(format!(
            "integration spans {n_int} delay intervals (cap {MAX_INTERVALS}); \
             shorten t_end or increase the delay"
        )));
    }
    let n_per = steps_per_interval(delay, tol);
    if delay / (n_per as f64) < 1e-300 {
        return Err(SolveError::StepUnderflow {
            dt: delay / n_per as f64,
        });
    }
    let rhs = |_t: f64, x: f64, xd: f64| -x + zeta * nl.f(xd);

    let mut blocks: Vec<Block> = Vec::with_capacity(n_int);
    let mut x_cur = x0;
    for k in 0..n_int {
        let t0 = k as f64 * delay;
        let len = (t_end - t0).min(delay);
        // A partial final interval keeps the same step density as a full one.
        let n_k = if len >= delay {
            n_per
        } else {
            (((n_per as f64) * len / delay).ceil() as usize).max(16)
        };
        let block = {
            let delayed: Box<dyn Fn(f64) -> f64> = if k == 0 {
                Box::new(|t: f64| history.eval(delay, t - delay))
            } else {
                let prev = blocks.last().expect("k >= 1 implies a previous block");
                Box::new(move |t: f64| prev.eval(t - delay))
            };
            integrate_interval(t0, len, n_k, x_cur, &*delayed, &rhs)
        };
        let mut amp: f64 = 0.0;
        for &v in &block.x {
            amp = amp.max(v.abs());
        }
        if !amp.is_finite() || amp > DIVERGENCE_CAP {
            return Err(SolveError::Diverged {
                t: block.t_end(),
                amplitude: amp,
            });
        }
        x_cur = *block.x.last().expect("block has at least one node");
        blocks.push(block);
    }
    Ok(Trajectory {
        delay,
        zeta,
        family: nl.family_tag.clone(),
        dense: PiecewiseCubic {
            t_begin: 0.0,
            block_len: delay,
            blocks,
            t_end,
        },
    })
}

/// Integrate the delay-free reduction `x'(t) = -x(t) + zeta f(x(t))` with RK4
/// on `[0, t_end]`.  The returned trajectory stores `delay = 0`.
pub fn reduce_to_ode(
    nl: &Nonlinearity,
    zeta: f64,
    x0: f64,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory, SolveError> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(invalid(format!("zeta = {zeta}, need 0 < zeta < inf")));
    }
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(invalid(format!("tol = {tol}, need 0 < tol <= 0.1")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid(format!("t_end = {t_end}, need 0 < t_end < inf")));
    }
    if !x0.is_finite() {
        return Err(invalid(format!("x0 = {x0}, need a finite initial value")));
    }
    let n = steps_per_interval(t_end, tol);
    let dt = t_end / n as f64;
    if dt < 1e-300 {
        return Err(SolveError::StepUnderflow { dt });
    }
    let f = |x: f64| -x + zeta * nl.f(x);
    let mut x = Vec::with_capacity(n + 1);
    let mut dx = Vec::with_capacity(n + 1);
    let mut cur = x0;
    x.push(cur);
    dx.push(f(cur));
    for _ in 0..n {
        let k1 = f(cur);
        let k2 = f(cur + 0.5 * dt * k1);
        let k3 = f(cur + 0.5 * dt * k2);
        let k4 = f(cur + dt * k3);
        cur += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        x.push(cur);
        dx.push(f(cur));
        if !cur.is_finite() || cur.abs() > DIVERGENCE_CAP {
            return Err(SolveError::Diverged {
                t: dt * x.len() as f64,
                amplitude: cur.abs(),
            });
        }
    }
    Ok(Trajectory {
        delay: 0.0,
        zeta,
        family: nl.family_tag.clone(),
        dense: PiecewiseCubic {
            t_begin: 0.0,
            block_len: t_end,
            blocks: vec![Block { t0: 0.0, dt, x, dx }],
            t_end,
        },
    })
}

/// Whether the trajectory's final segment of length `window` stays within
/// `tol` of zero (sup-norm on a dense sample).
pub fn converged(traj: &Trajectory, window: f64, tol: f64) -> Result<bool, SolveError> {
    if !(window > 0.0) || !window.is_finite() {
        return Err(invalid(format!("window = {window}, need 0 < window < inf")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tol = {tol}, need tol > 0")));
    }
    let t_end = traj.dense.t_end;
    if window > t_end - traj.dense.t_begin {
        return Err(SolveError::WindowTooLong { window, t_end });
    }
    Ok(traj.dense.sup_abs(t_end - window, t_end, 4) <= tol)
}

// ---------------------------------------------------------------------------
// Stability probes
// ---------------------------------------------------------------------------

/// A deterministic 16-member family of initial histories used by the
/// global-stability probes: six constants, four ramps, four sinusoids, and
/// two seeded rough (piecewise-linear noise) histories at amplitudes 1 and 5.
pub fn default_ensemble(seed: u64) -> Vec<History> {
    let mut members = vec![
        History::Constant(0.1),
        History::Constant(-0.1),
        History::Constant(1.0),
        History::Constant(-1.0),
        History::Constant(5.0),
        History::Constant(-5.0),
        History::Ramp { start: 0.0, end: 1.0 },
        History::Ramp { start: 1.0, end: 0.0 },
        History::Ramp { start: -1.0, end: 1.0 },
        History::Ramp { start: 5.0, end: -5.0 },
        History::Sinusoid { amplitude: 1.0, cycles: 1 },
        History::Sinusoid { amplitude: 1.0, cycles: 3 },
        History::Sinusoid { amplitude: 5.0, cycles: 1 },
        History::Sinusoid { amplitude: 5.0, cycles: 3 },
    ];
    for (i, amp) in [(0u64, 1.0f64), (1, 5.0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
        let values: Vec<f64> = (0..33).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
        members.push(History::Sampled(values));
    }
    members
}

/// Length of the trailing window over which final amplitudes are measured.
fn probe_window(delay: f64) -> f64 {
    (2.0 * delay).max(10.0)
}

/// Suggest an integration horizon for a stability probe at `(zeta, delay)`:
/// long enough for an amplitude-5 history to decay below `1e-6` at the
/// predicted linear rate (or to saturate, if growing), within a budget cap of
/// 12 000 time units.  For `delay < 1` the spectral solver is skipped and a
/// generous fixed horizon is used.
pub fn recommended_t_end(zeta: f64, delay: f64) -> Result<f64, SolveError> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(invalid(format!("zeta = {zeta}, need 0 < zeta < inf")));
    }
    if !(delay > 0.0) || !delay.is_finite() {
        return Err(invalid(format!("delay = {delay}, need 0 < delay < inf")));
    }
    let w = probe_window(delay);
    let floor_t = (8.0 * w + delay + 20.0)
        .max(400.0)
        .max(30.0 * delay + 150.0);
    if delay < 1.0 {
        return Ok(floor_t);
    }
    let (sigma, _) = dominant_root(&QuasiPoly::new(delay, zeta))?;
    let t = if sigma <= -1e-4 {
        (LOG_DECAY_BUDGET / -sigma + 30.0 * delay + 60.0).min(T_END_CAP)
    } else if sigma >= 1e-4 {
        // Growing: just long enough to reach saturation from amplitude 0.1.
        (50.0f64.ln() / sigma + 30.0 * delay + 60.0).min(T_END_CAP)
    } else {
        // Effectively critical: use the whole budget.
        T_END_CAP
    };
    Ok(t.max(8.0 * w + delay + 20.0))
}

/// Outcome of an ensemble stability probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Every member's final window stayed within the convergence tolerance.
    AllConverged,
    /// At least one member blew up or persisted at finite amplitude.
    SomeDiverged,
    /// No member diverged, but at least one was still decaying at `t_end`.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::AllConverged => "AllConverged",
            Verdict::SomeDiverged => "SomeDiverged",
            Verdict::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

/// Result of [`probe_global_stability`].
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub zeta: f64,
    pub h: f64,
    pub mu: f64,
    pub nu: f64,
    /// Horizon actually integrated to.
    pub t_end: f64,
    pub ensemble_size: usize,
    pub n_converged: usize,
    /// Largest sup over the final window among all members (divergent
    /// members count as [`DIVERGENCE_CAP`]).
    pub max_final_amplitude: f64,
    pub verdict: Verdict,
}

enum MemberState {
    Converged(f64),
    Decaying(f64),
    Persisting(f64),
    Blowup,
}

/// Integrate every ensemble member to `t_end` (chosen automatically when
/// `None`) and classify the outcome.
///
/// A member is *converged* when its final window of length
/// `max(2 delay, 10)` stays within `tol` of zero; otherwise it is compared
/// against an earlier window to distinguish slow decay (still shrinking at
/// `t_end`; verdict [`Verdict::Inconclusive`]) from persistence or blow-up
/// (verdict [`Verdict::SomeDiverged`]).
pub fn probe_global_stability(
    nl: &Nonlinearity,
    zeta: f64,
    delay: f64,
    ensemble: &[History],
    t_end: Option<f64>,
    tol: f64,
) -> Result<ProbeReport, SolveError> {
    validate_common(zeta, delay, tol)?;
    if ensemble.is_empty() {
        return Err(invalid("ensemble is empty".to_string()));
    }
    let w = probe_window(delay);
    let t_end = match t_end {
        Some(t) => {
            let need = 8.0 * w + delay + 1.0;
            if !(t >= need) || !t.is_finite() {
                return Err(SolveError::WindowTooLong {
                    window: need,
                    t_end: t,
                });
            }
            t
        }
        None => recommended_t_end(zeta, delay)?,
    };
    // Integrate tighter than we classify so the verdict reflects the
    // dynamics, not integration error.
    let tol_int = (tol * 1e-3).clamp(1e-12, 1e-8);
    let states: Result<Vec<MemberState>, SolveError> = ensemble
        .par_iter()
        .map(|member| match integrate(nl, zeta, delay, member, t_end, tol_int) {
            Err(SolveError::Diverged { .. }) => Ok(MemberState::Blowup),
            Err(e) => Err(e),
            Ok(traj) => {
                let sup_final = traj.dense.sup_abs(t_end - w, t_end, 4);
                if sup_final <= tol {
                    Ok(MemberState::Converged(sup_final))
                } else {
                    let base = traj.dense.sup_abs(t_end - 8.0 * w, t_end - 7.0 * w, 4);
                    if sup_final < 0.998 * base {
                        Ok(MemberState::Decaying(sup_final))
                    } else {
                        Ok(MemberState::Persisting(sup_final))
                    }
                }
            }
        })
        .collect();
    let states = states?;

    let mut n_converged = 0usize;
    let mut max_amp: f64 = 0.0;
    let mut any_bad = false;
    let mut any_decaying = false;
    for s in &states {
        match s {
            MemberState::Converged(a) => {
                n_converged += 1;
                max_amp = max_amp.max(*a);
            }
            MemberState::Decaying(a) => {
                any_decaying = true;
                max_amp = max_amp.max(*a);
            }
            MemberState::Persisting(a) => {
                any_bad = true;
                max_amp = max_amp.max(*a);
            }
            MemberState::Blowup => {
                any_bad = true;
                max_amp = max_amp.max(DIVERGENCE_CAP);
            }
        }
    }
    let verdict = if any_bad {
        Verdict::SomeDiverged
    } else if any_decaying {
        Verdict::Inconclusive
    } else {
        Verdict::AllConverged
    };
    let point = to_mu_nu(zeta, delay).expect("zeta and delay validated above");
    Ok(ProbeReport {
        zeta,
        h: delay,
        mu: point.mu,
        nu: point.nu,
        t_end,
        ensemble_size: ensemble.len(),
        n_converged,
        max_final_amplitude: max_amp,
        verdict,
    })
}

/// One probe performed during a threshold bisection.
#[derive(Clone, Debug, Serialize)]
pub struct HcProbe {
    pub h: f64,
    pub verdict: Verdict,
}

/// Result of [`estimate_hc_report`].
#[derive(Clone, Debug, Serialize)]
pub struct HcReport {
    pub zeta: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    /// Midpoint of the final bracket.
    pub estimate: f64,
    /// Final `(converging, non-converging)` delay bracket.
    pub bracket: (f64, f64),
    pub n_bisect: usize,
    pub n_probes: usize,
    pub probes: Vec<HcProbe>,
    /// Human-readable notes, e.g. inconclusive probes treated as
    /// non-converging.
    pub anomalies: Vec<String>,
}

/// Bisect in the delay for the empirical threshold at which the ensemble
/// stops converging to zero, with a full audit trail.
///
/// `ensemble(h)` supplies the histories used at delay `h`.  Requires the
/// probe at `h_lo` to converge for every member and the probe at `h_hi` not
/// to; anything else is a [`SolveError::BadBracket`].  Inconclusive probes
/// are treated as "not converged" (pushing the bracket down) and recorded in
/// `anomalies`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_hc_report(
    nl: &Nonlinearity,
    zeta: f64,
    h_lo: f64,
    h_hi: f64,
    ensemble: &dyn Fn(f64) -> Vec<History>,
    t_end: Option<f64>,
    tol: f64,
    n_bisect: usize,
) -> Result<HcReport, SolveError> {
    if !(h_lo > 0.0) || !(h_hi > h_lo) || !h_hi.is_finite() {
        return Err(invalid(format!(
            "delay bracket [{h_lo}, {h_hi}], need 0 < h_lo < h_hi < inf"
        )));
    }
    if n_bisect > 60 {
        return Err(invalid(format!(
            "n_bisect = {n_bisect} exceeds f64 bisection resolution (max 60)"
        )));
    }
    let mut probes: Vec<HcProbe> = Vec::with_capacity(n_bisect + 2);
    let mut anomalies: Vec<String> = Vec::new();

    let run = |h: f64,
                   probes: &mut Vec<HcProbe>,
                   anomalies: &mut Vec<String>|
     -> Result<Verdict, SolveError> {
        let members = ensemble(h);
        let report = probe_global_stability(nl, zeta, h, &members, t_end, tol)?;
        if report.verdict == Verdict::Inconclusive {
            anomalies.push(format!(
                "h = {h}: still decaying at t_end = {}; treated as not converged",
                report.t_end
            ));
        }
        probes.push(HcProbe {
            h,
            verdict: report.verdict,
        });
        Ok(report.verdict)
    };

    let v_lo = run(h_lo, &mut probes, &mut anomalies)?;
    if v_lo != Verdict::AllConverged {
        return Err(SolveError::BadBracket {
            what: format!(
                "lower end h = {h_lo} must converge for every ensemble member, got {v_lo}"
            ),
        });
    }
    let v_hi = run(h_hi, &mut probes, &mut anomalies)?;
    if v_hi == Verdict::AllConverged {
        return Err(SolveError::BadBracket {
            what: format!("upper end h = {h_hi} must fail to converge, got {v_hi}"),
        });
    }

    let (mut lo, mut hi) = (h_lo, h_hi);
    for _ in 0..n_bisect {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket is at floating-point resolution
        }
        let v = run(mid, &mut probes, &mut anomalies)?;
        if v == Verdict::AllConverged {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n_probes = probes.len();
    Ok(HcReport {
        zeta,
        h_lo,
        h_hi,
        estimate: 0.5 * (lo + hi),
        bracket: (lo, hi),
        n_bisect,
        n_probes,
        probes,
        anomalies,
    })
}

/// Convenience wrapper around [`estimate_hc_report`] returning the estimate.
#[allow(clippy::too_many_arguments)]
pub fn estimate_hc(
    nl: &Nonlinearity,
    zeta: f64,
    h_lo: f64,
    h_hi: f64,
    ensemble: &dyn Fn(f64) -> Vec<History>,
    t_end: Option<f64>,
    tol: f64,
    n_bisect: usize,
) -> Result<f64, SolveError> {
    Ok(estimate_hc_report(nl, zeta, h_lo, h_hi, ensemble, t_end, tol, n_bisect)?.estimate)
}

// ---------------------------------------------------------------------------
// Population models and normalization
// ---------------------------------------------------------------------------

/// Classical population models `x'(t) = -x(t) + G(x(t - h))`, named by the
/// shape of the production term `G`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ModelFamily {
    /// `G(x) = zeta a^n / (a^n + x^n)`: decreasing sigmoid production.
    MackeyGlass { a: f64, n: f64 },
    /// `G(x) = zeta e^{-a x}`: exponentially decreasing production.
    LasotaWazewska { a: f64 },
    /// `G(x) = zeta x e^{-a x}`: hump-shaped production through the origin.
    Nicholson { a: f64 },
    /// `G(x) = zeta a^n x / (a^n + x^n)`: hump-shaped Hill-type production.
    MackeyGlassHill { a: f64, n: f64 },
}

/// A model instance together with its positive equilibrium `G(x) = x`.
#[derive(Clone, Debug, Serialize)]
pub struct NamedModel {
    pub family: ModelFamily,
    pub zeta: f64,
    pub delay: f64,
    pub equilibrium: f64,
}

/// `g(lo) > 0 > g(hi)` is assumed; 200 halvings reach f64 resolution.
fn bisect_root<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(G, G', G'', G''')` at `x`.  For the families whose production is only
/// meaningful for non-negative populations (`MackeyGlass`, `MackeyGlassHill`)
/// negative arguments clamp to the `x = 0` value with zero derivatives.
fn model_derivs(family: &ModelFamily, zeta: f64, x: f64) -> (f64, f64, f64, f64) {
    match family {
        ModelFamily::MackeyGlass { a, n } => {
            if x <= 0.0 {
                return (zeta, 0.0, 0.0, 0.0);
            }
            let n = *n;
            let an = a.powf(n);
            let u = x.powf(n);
            let d = an + u;
            let g = zeta * an / d;
            let g1 = -zeta * an * n * x.powf(n - 1.0) / (d * d);
            // With V = (n-1)(a^n + u) - 2n u and W = x^{n-2} V:
            // G'' = -zeta a^n n W / D^3,
            // G''' = -zeta a^n n (W' D - 3n x^{n-1} W) / D^4.
            let v = (n - 1.0) * an - (n + 1.0) * u;
            let w = x.powf(n - 2.0) * v;
            let g2 = -zeta * an * n * w / (d * d * d);
            let wp = (n - 2.0) * x.powf(n - 3.0) * v - n * (n + 1.0) * x.powf(2.0 * n - 3.0);
            let g3 = -zeta * an * n * (wp * d - 3.0 * n * x.powf(n - 1.0) * w) / (d * d * d * d);
            (g, g1, g2, g3)
        }
        ModelFamily::LasotaWazewska { a } => {
            let e = (-a * x).exp();
            (zeta * e, -a * zeta * e, a * a * zeta * e, -a * a * a * zeta * e)
        }
        ModelFamily::Nicholson { a } => {
            let e = (-a * x).exp();
            (
                zeta * x * e,
                zeta * e * (1.0 - a * x),
                -a * zeta * e * (2.0 - a * x),
                a * a * zeta * e * (3.0 - a * x),
            )
        }
        ModelFamily::MackeyGlassHill { a, n } => {
            if x <= 0.0 {
                return (0.0, 0.0, 0.0, 0.0);
            }
            let n = *n;
            let an = a.powf(n);
            let u = x.powf(n);
            let d = an + u;
            let g = zeta * an * x / d;
            let g1 = zeta * an * (an + (1.0 - n) * u) / (d * d);
            // With M = (1+n) a^n + (1-n) u:
            // G'' = -zeta a^n n x^{n-1} M / D^3,
            // G''' = -zeta a^n n x^{n-2} ((n-1)M + (1-n)n u - 3n u M / D) / D^3.
            let m = (1.0 + n) * an + (1.0 - n) * u;
            let g2 = -zeta * an * n * x.powf(n - 1.0) * m / (d * d * d);
            let g3 = -zeta * an * n * x.powf(n - 2.0)
                * ((n - 1.0) * m + (1.0 - n) * n * u - 3.0 * n * u * m / d)
                / (d * d * d);
            (g, g1, g2, g3)
        }
    }
}

impl NamedModel {
    /// Validate parameters and locate the positive equilibrium.
    pub fn new(family: ModelFamily, zeta: f64, delay: f64) -> Result<NamedModel, SolveError> {
        if !(zeta > 0.0) || !zeta.is_finite() {
            return Err(invalid(format!("zeta = {zeta}, need 0 < zeta < inf")));
        }
        if !(delay > 0.0) || !delay.is_finite() {
            return Err(invalid(format!("delay = {delay}, need 0 < delay < inf")));
        }
        match &family {
            ModelFamily::MackeyGlass { a, n } | ModelFamily::MackeyGlassHill { a, n } => {
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(invalid(format!("a = {a}, need 0 < a < inf")));
                }
                if !(*n >= 1.0) || !n.is_finite() {
                    return Err(invalid(format!("n = {n}, need 1 <= n < inf")));
                }
            }
            ModelFamily::LasotaWazewska { a } | ModelFamily::Nicholson { a } => {
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(invalid(format!("a = {a}, need 0 < a < inf")));
                }
            }
        }
        let equilibrium = match &family {
            // G decreasing, G(0) = zeta > 0 and G(zeta) < zeta: unique root
            // of G(x) - x in (0, zeta).
            ModelFamily::MackeyGlass { a, n } => {
                let an = a.powf(*n);
                bisect_root(|x: f64| zeta * an / (an + x.powf(*n)) - x, 0.0, zeta)
            }
            ModelFamily::LasotaWazewska { a } => {
                bisect_root(|x: f64| zeta * (-a * x).exp() - x, 0.0, zeta)
            }
            ModelFamily::Nicholson { a } => {
                if zeta <= 1.0 {
                    return Err(SolveError::NoPositiveEquilibrium { zeta });
                }
                zeta.ln() / a
            }
            ModelFamily::MackeyGlassHill { a, n } => {
                if zeta <= 1.0 {
                    return Err(SolveError::NoPositiveEquilibrium { zeta });
                }
                a * (zeta - 1.0).powf(1.0 / n)
            }
        };
        Ok(NamedModel {
            family,
            zeta,
            delay,
            equilibrium,
        })
    }

    /// Production `G` at `x` (negative `x` clamps per family).
    pub fn production(&self, x: f64) -> f64 {
        model_derivs(&self.family, self.zeta, x).0
    }
}

/// Shift a model to its positive equilibrium and rescale so the reduced
/// feedback is in normalized form: with `y = x - x_eq`,
///
/// `F(y) = (G(x_eq + y) - x_eq) / zeta_eff`, `zeta_eff = -G'(x_eq)`,
///
/// giving `y' = -y + zeta_eff F(y(t - h))` with `F(0) = 0`, `F'(0) = -1`.
/// Fails with [`SolveError::NonNormalizable`] when the feedback slope at the
/// equilibrium is not strictly negative.  The declared lower bound of the
/// reduced feedback, `-x_eq / zeta_eff`, is valid on the forward-invariant
/// region `x >= 0`.
pub fn normalize_model(model: &NamedModel) -> Result<(Nonlinearity, f64), SolveError> {
    let xbar = model.equilibrium;
    let (_, g1_at, _, _) = model_derivs(&model.family, model.zeta, xbar);
    if g1_at >= -1e-12 {
        return Err(SolveError::NonNormalizable {
            what: format!(
                "G'(x_eq) = {g1_at:.6e} at x_eq = {xbar:.6e}; need a strictly negative \
                 feedback slope"
            ),
        });
    }
    let zeta_eff = -g1_at;
    let lower_bound = -xbar / zeta_eff;

    let (tag, critical_point) = match &model.family {
        ModelFamily::MackeyGlass { a, n } => (FamilyTag::MackeyGlassShifted { a: *a, n: *n }, None),
        ModelFamily::LasotaWazewska { a } => (FamilyTag::LasotaWazewskaShifted { a: *a }, None),
        ModelFamily::Nicholson { a } => {
            (FamilyTag::NicholsonShifted { a: *a }, Some(1.0 / a - xbar))
        }
        ModelFamily::MackeyGlassHill { a, n } => (
            FamilyTag::MackeyGlassHillShifted { a: *a, n: *n },
            Some(a / (n - 1.0).powf(1.0 / n) - xbar),
        ),
    };

    let nl = match &model.family {
        // Exact closed form: F(y) = (e^{-a y} - 1) / a, free of the
        // cancellation in the generic (G - x_eq) path.
        ModelFamily::LasotaWazewska { a } => {
            let a = *a;
            Nonlinearity::custom_tagged(
                Arc::new(move |y: f64| ((-a * y).exp() - 1.0) / a),
                Arc::new(move |y: f64| -(-a * y).exp()),
                Arc::new(move |y: f64| a * (-a * y).exp()),
                Arc::new(move |y: f64| -a * a * (-a * y).exp()),
                lower_bound,
                critical_point,
                tag,
            )
        }
        family => {
            let fam_f = family.clone();
            let fam_1 = family.clone();
            let fam_2 = family.clone();
            let fam_3 = family.clone();
            let zeta = model.zeta;
            Nonlinearity::custom_tagged(
                Arc::new(move |y: f64| {
                    (model_derivs(&fam_f, zeta, xbar + y).0 - xbar) / zeta_eff
                }),
                Arc::new(move |y: f64| model_derivs(&fam_1, zeta, xbar + y).1 / zeta_eff),
                Arc::new(move |y: f64| model_derivs(&fam_2, zeta, xbar + y).2 / zeta_eff),
                Arc::new(move |y: f64| model_derivs(&fam_3, zeta, xbar + y).3 / zeta_eff),
                lower_bound,
                critical_point,
                tag,
            )
        }
    };
    Ok((nl, zeta_eff))
}

/// Integrate the model in its original coordinates,
/// `x' = -x + G(x(t - h))`, from the given history.
pub fn integrate_model(
    model: &NamedModel,
    history: &History,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory, SolveError> {
    let family = model.family.clone();
    let zeta = model.zeta;
    let raw = Nonlinearity::custom(
        Arc::new(move |x: f64| model_derivs(&family, zeta, x).0),
        Arc::new({
            let family = model.family.clone();
            move |x: f64| model_derivs(&family, zeta, x).1
        }),
        Arc::new({
            let family = model.family.clone();
            move |x: f64| model_derivs(&family, zeta, x).2
        }),
        Arc::new({
            let family = model.family.clone();
            move |x: f64| model_derivs(&family, zeta, x).3
        }),
        0.0,
        None,
    );
    // The production G plays the role of `zeta f`; pass gain 1 and record the
    // model's own parameters on the trajectory.
    let mut traj = integrate(&raw, 1.0, model.delay, history, t_end, tol)?;
    traj.zeta = model.zeta;
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Variation-of-constants check
// ---------------------------------------------------------------------------

/// Composite Simpson with `m` (rounded up to even) subintervals.
fn simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, m: usize) -> f64 {
    let m = m.max(2) + m % 2;
    let step = (hi - lo) / m as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * step);
    }
    sum * step / 3.0
}

/// Maximum absolute defect, over the checkpoints, of the
/// variation-of-constants representation
///
/// `x(t) = x0 v(t) + Int_0^t v(t - s) a(s) ds`,
/// `a(s) = zeta (f(x(s - h)) + x(s - h))`,
///
/// where `x` solves the nonlinear equation with zero history and initial
/// value `x0`, and `v` is the fundamental solution of the linearization
/// `v' = -v - zeta v(t - h)`.  The integrand is smooth except for derivative
/// kinks at multiples of `h` (in `s` and in `t - s`), so the quadrature is
/// composite Simpson on panels split at those points.
pub fn voc_residual(
    nl: &Nonlinearity,
    zeta: f64,
    delay: f64,
    x0: f64,
    checkpoints: &[f64],
    tol: f64,
) -> Result<f64, SolveError> {
    validate_common(zeta, delay, tol)?;
    if checkpoints.is_empty() {
        return Err(invalid("checkpoints are empty".to_string()));
    }
    for &t in checkpoints {
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid(format!("checkpoint t = {t}, need 0 < t < inf")));
        }
    }
    if !x0.is_finite() {
        return Err(invalid(format!("x0 = {x0}, need a finite initial value")));
    }
    let t_max = checkpoints.iter().cloned().fold(0.0, f64::max);
    let z = integrate_from(nl, zeta, delay, &History::Constant(0.0), x0, t_max, tol)?;
    let v = fundamental_numeric(delay, zeta, t_max, tol)?;

    // a(s) == 0 for s < delay (zero history and f(0) = 0), so integrate only
    // [delay, t]; at s = delay the integrand takes its right-sided value.
    let forcing = |s: f64| {
        let zd = z.dense.value(s - delay);
        zeta * (nl.f(zd) + zd)
    };
    let ds_z = z.dense.blocks[0].dt;
    let ds_v = v.cubic.blocks[0].dt;
    let ds_target = 0.5 * ds_z.min(ds_v);

    let mut worst: f64 = 0.0;
    for &t in checkpoints {
        let integral = if t <= delay {
            0.0
        } else {
            // Panel cuts: kinks of z(s - h) at s = j h and of v(t - s) at
            // s = t - j h.
            let mut cuts = vec![delay, t];
            let mut j = 2.0;
            while j * delay < t {
                cuts.push(j * delay);
                j += 1.0;
            }
            let mut j = 1.0;
            while t - j * delay > delay {
                cuts.push(t - j * delay);
                j += 1.0;
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).expect("cuts are finite"));
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let mut acc = 0.0;
            for pair in cuts.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let m = ((hi - lo) / ds_target).ceil() as usize;
                acc += simpson(&|s: f64| v.value(t - s) * forcing(s), lo, hi, m);
            }
            acc
        };
        let defect = (z.dense.value(t) - x0 * v.value(t) - integral).abs();
        worst = worst.max(defect);
    }
    Ok(worst)
}
