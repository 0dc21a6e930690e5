//! Numerical laboratory for the scalar delay differential equation
//!
//! ```text
//!     x'(t) = -x(t) + zeta * f(x(t - h)),       zeta > 0, h >= 0,
//! ```
//!
//! where `f` is a smooth, bounded-below, delayed negative feedback
//! (`x * f(x) < 0` away from the origin, normalized so `f'(0) = -1`).
//! The canonical example is `f = -tanh`; the classical population and
//! physiology models (Mackey-Glass, Lasota-Wazewska, Nicholson) reduce
//! to this shape after shifting their positive equilibrium to the origin.
//!
//! The crate is organized around five pillars:
//!
//! * [`scalar_maps`] — the one-dimensional map `x -> zeta * f(x)`: hypothesis
//!   checks (sign condition, lower bound, negative Schwarzian), Schwarzian
//!   derivative evaluation, the attracting 2-cycle interval `[a, b]`, and the
//!   `b / sqrt(zeta - 1) -> sqrt(3)` scaling of the cycle near `zeta = 1`.
//! * [`stability_regions`] — the `(mu, nu) = (1/zeta, e^{-h}/zeta)` parameter
//!   chart: the local stability boundary `nu_1`, the proved global-stability
//!   curves `nu_2`, `nu_3`, and region classification with precedence.
//! * [`quasipoly`] — the characteristic function `p(z) = z + 1 + zeta e^{-z h}`:
//!   winding-number root counting, strip-confined root finding with Newton
//!   refinement, the certified dominant root, and explicit lower bounds on
//!   `|p|` along near-axis vertical lines.
//! * [`fundamental_solution`] — the fundamental solution `v(t, h)` of the
//!   linearization `x' = -x - x(t - h)`: exact piecewise exponential-polynomial
//!   form (extended-precision coefficient recurrence), a method-of-steps
//!   integrator with dense output, an inverse-transform contour evaluation,
//!   and the sub-exponential decay envelope `|v| <= c h e^{-pi^2 t/(alpha h^3)}`.
//! * [`dde_solver`] — trajectories of the full nonlinear equation: histories,
//!   method-of-steps integration with dense output, convergence probes over
//!   history ensembles, bisection estimation of the global-stability delay
//!   threshold, reduction of named models to normalized feedback form, and a
//!   variation-of-constants self-check.
//!
//! The `dde-lab` binary (see [`cli`]) exposes the pillars as deterministic,
//! file-producing subcommands; every output file gets a sidecar recording the
//! fully resolved run configuration.

pub mod cli;
pub mod dd;
pub mod dde_solver;
pub mod format;
pub mod fundamental_solution;
pub mod piecewise;
pub mod quasipoly;
pub mod scalar_maps;
pub mod stability_regions;

pub use dde_solver::{
    converged, default_ensemble, estimate_hc, estimate_hc_report, integrate, integrate_from,
    integrate_model, normalize_model, probe_global_stability, recommended_t_end, reduce_to_ode,
    voc_residual, HcReport, History, ModelFamily, NamedModel, ProbeReport, SolveError, Trajectory,
    Verdict,
};
pub use fundamental_solution::{
    contour_value, decay_envelope, fundamental_exact, fundamental_numeric, EnvelopeReport,
    FundError, PiecewiseExpPoly, PiecewiseSolution,
};
pub use quasipoly::{
    asymptotic_ratio_table, count_roots_rect, dominant_root, roots_in_strips, sandwich_csv,
    verify_modulus_floor, verify_modulus_sandwich, BoundCheck, QuasiPoly, Rect, SandwichRow,
    Spectrum, SpectrumError, SpectrumRoot,
};
pub use scalar_maps::{
    attractor_interval, check_hypotheses, cycle_amplitude_scaling, iterate_map, schwarzian,
    AttractorInterval, FamilyTag, HypothesisReport, MapError, Nonlinearity, Witness,
};
pub use stability_regions::{
    chart, classify, classify_point, from_mu_nu, local_boundary_delay, nu1, nu2, nu2_boundary_delay,
    nu3, to_mu_nu, ChartRow, Classification, NearCriticalWedge, ParameterPoint, RegionError,
    RegionLabel,
};
