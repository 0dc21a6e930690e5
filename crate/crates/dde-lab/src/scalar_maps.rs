//! The one-dimensional feedback map `x -> zeta * f(x)` that governs the
//! large-delay dynamics of `x'(t) = -x(t) + zeta f(x(t-h))`.
//!
//! A [`Nonlinearity`] bundles the feedback function with its first three
//! derivatives (needed by the Schwarzian derivative), a global lower bound,
//! the location of its critical point if any, and a family tag. The module
//! checks the three structural hypotheses (sign condition and normalization,
//! boundedness below with at most one critical point, negative Schwarzian),
//! locates the attracting 2-cycle `{a, b}` of the map for `zeta > 1`, and
//! tabulates the near-critical amplitude scaling `b / sqrt(zeta - 1)`.

use serde::Serialize;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Shared real-valued function handle.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which analytic family a nonlinearity belongs to. Shifted variants are
/// model feedbacks recentred at their positive equilibrium and rescaled to
/// slope -1 at the origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FamilyTag {
    /// `f(x) = -tanh(x)`.
    Tanh,
    /// Shifted saturating decay `G(x) = zeta a^n / (a^n + x^n)`.
    MackeyGlassShifted { a: f64, n: f64 },
    /// Shifted exponential decay `G(x) = zeta e^{-a x}`.
    LasotaWazewskaShifted { a: f64 },
    /// Shifted unimodal `G(x) = zeta x e^{-a x}`.
    NicholsonShifted { a: f64 },
    /// Shifted unimodal rational `G(x) = zeta a^n x / (a^n + x^n)`.
    MackeyGlassHillShifted { a: f64, n: f64 },
    Custom,
}

/// A smooth scalar feedback with derivatives and structural metadata.
#[derive(Clone)]
pub struct Nonlinearity {
    eval: RealFn,
    d1: RealFn,
    d2: RealFn,
    d3: RealFn,
    /// Global infimum of `f` (finite for admissible feedbacks).
    pub lower_bound: f64,
    /// Unique zero of `f'`, if one exists.
    pub critical_point: Option<f64>,
    pub family_tag: FamilyTag,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Nonlinearity")
            .field("family_tag", &self.family_tag)
            .field("lower_bound", &self.lower_bound)
            .field("critical_point", &self.critical_point)
            .finish()
    }
}

impl Nonlinearity {
    /// The canonical odd feedback `f(x) = -tanh(x)`.
    pub fn tanh() -> Self {
        Nonlinearity {
            eval: Arc::new(|x: f64| -x.tanh()),
            // With t = tanh x: f' = t^2 - 1, f'' = 2t(1 - t^2), f''' = (2 - 6t^2)(1 - t^2).
            d1: Arc::new(|x: f64| {
                let t = x.tanh();
                t * t - 1.0
            }),
            d2: Arc::new(|x: f64| {
                let t = x.tanh();
                2.0 * t * (1.0 - t * t)
            }),
            d3: Arc::new(|x: f64| {
                let t = x.tanh();
                (2.0 - 6.0 * t * t) * (1.0 - t * t)
            }),
            lower_bound: -1.0,
            critical_point: None,
            family_tag: FamilyTag::Tanh,
        }
    }

    /// A user-supplied feedback with explicit derivative closures.
    pub fn custom(
        eval: RealFn,
        d1: RealFn,
        d2: RealFn,
        d3: RealFn,
        lower_bound: f64,
        critical_point: Option<f64>,
    ) -> Self {
        Nonlinearity {
            eval,
            d1,
            d2,
            d3,
            lower_bound,
            critical_point,
            family_tag: FamilyTag::Custom,
        }
    }

    /// Like [`Nonlinearity::custom`] but with an explicit family tag; used by
    /// the model-normalization machinery.
    pub fn custom_tagged(
        eval: RealFn,
        d1: RealFn,
        d2: RealFn,
        d3: RealFn,
        lower_bound: f64,
        critical_point: Option<f64>,
        family_tag: FamilyTag,
    ) -> Self {
        Nonlinearity {
            eval,
            d1,
            d2,
            d3,
            lower_bound,
            critical_point,
            family_tag,
        }
    }

    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }
    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }
    #[inline]
    pub fn d3(&self, x: f64) -> f64 {
        (self.d3)(x)
    }
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("Schwarzian derivative undefined: f'({x}) vanishes at a critical point")]
    DivisionByZeroAtCriticalPoint { x: f64 },
    #[error("no 2-cycle found for zeta = {zeta} scanning b in ({lo}, {hi}]")]
    NoCycleFound { zeta: f64, lo: f64, hi: f64 },
    #[error("cycle residual {residual:e} exceeds requested tolerance {tol:e}")]
    ToleranceNotReached { residual: f64, tol: f64 },
    #[error("map iterate became non-finite at step {step}")]
    NonFiniteValue { step: usize },
    #[error("gain zeta = {zeta} outside required range {required}")]
    GainOutOfRange { zeta: f64, required: &'static str },
}

/// Default sampling window for hypothesis checks.
pub const DEFAULT_WINDOW: (f64, f64) = (-10.0, 10.0);
/// Default sample count for hypothesis checks.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Scan interval for the positive cycle amplitude.
const CYCLE_SCAN_HI: f64 = 50.0;
const CYCLE_SCAN_POINTS: usize = 2_000;

/// Schwarzian derivative `S f = f'''/f' - (3/2) (f''/f')^2` at `x`.
///
/// Fails where `f'` is numerically indistinguishable from zero (at a
/// critical point of the feedback the quotient is undefined).
pub fn schwarzian(nl: &Nonlinearity, x: f64) -> Result<f64, MapError> {
    let d1 = nl.d1(x);
    if d1 == 0.0 || d1.abs() < 1e-280 {
        return Err(MapError::DivisionByZeroAtCriticalPoint { x });
    }
    let r3 = nl.d3(x) / d1;
    let r2 = nl.d2(x) / d1;
    Ok(r3 - 1.5 * r2 * r2)
}

/// A sampled violation of one of the structural hypotheses.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub x: f64,
    /// Which quantity violated its requirement (e.g. `"x*f(x)"`, `"Sf(x)"`).
    pub quantity: String,
    pub value: f64,
}

/// Result of sampling the three structural hypotheses over a window.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    /// Sign condition `x f(x) < 0` for `x != 0`, with `f(0) = 0`, `f'(0) = -1`.
    pub h1_ok: bool,
    /// Bounded below by the declared lower bound; `f'` has at most one zero.
    pub h2_ok: bool,
    /// Negative Schwarzian away from the critical point.
    pub h3_ok: bool,
    pub witnesses: Vec<Witness>,
    /// Human-readable description of the sampling grid.
    pub grid: String,
}

const MAX_WITNESSES_PER_KIND: usize = 32;

/// Sample the structural hypotheses on `n_samples + 1` uniform points of
/// `window`. Requires `window.0 < window.1` and `n_samples >= 100`.
pub fn check_hypotheses(
    nl: &Nonlinearity,
    window: (f64, f64),
    n_samples: usize,
) -> HypothesisReport {
    let (lo, hi) = window;
    assert!(
        lo.is_finite() && hi.is_finite() && lo < hi,
        "hypothesis window must be a finite nonempty interval, got [{lo}, {hi}]"
    );
    assert!(n_samples >= 100, "need at least 100 samples, got {n_samples}");

    let mut witnesses = Vec::new();
    let mut h1_ok = true;
    let mut h2_ok = true;
    let mut h3_ok = true;
    let push = |w: &mut Vec<Witness>, count: &mut usize, x: f64, q: &str, v: f64| {
        if *count < MAX_WITNESSES_PER_KIND {
            w.push(Witness {
                x,
                quantity: q.to_string(),
                value: v,
            });
        }
        *count += 1;
    };
    let (mut c_sign, mut c_norm, mut c_low, mut c_crit, mut c_schw) = (0, 0, 0, 0, 0);

    // Normalization at the origin.
    let f0 = nl.f(0.0);
    if f0.abs() > 1e-12 {
        h1_ok = false;
        push(&mut witnesses, &mut c_norm, 0.0, "f(0)", f0);
    }
    let d10 = nl.d1(0.0);
    if (d10 + 1.0).abs() > 1e-10 {
        h1_ok = false;
        push(&mut witnesses, &mut c_norm, 0.0, "f'(0)", d10);
    }

    if !nl.lower_bound.is_finite() {
        h2_ok = false;
        push(
            &mut witnesses,
            &mut c_low,
            lo,
            "lower bound not finite",
            nl.lower_bound,
        );
    }
    let low_slack = 1e-9 * nl.lower_bound.abs().max(1.0);

    let step = (hi - lo) / n_samples as f64;
    let mut prev_d1_sign: Option<i8> = None;
    let mut d1_sign_changes = 0usize;

    for i in 0..=n_samples {
        let x = if i == n_samples { hi } else { lo + step * i as f64 };
        let fx = nl.f(x);

        // H1: sign condition away from the origin.
        if x.abs() > 1e-9 {
            let q = x * fx;
            if !(q < 0.0) {
                h1_ok = false;
                push(&mut witnesses, &mut c_sign, x, "x*f(x)", q);
            }
        }

        // H2: declared lower bound actually holds on the window.
        if nl.lower_bound.is_finite() && fx < nl.lower_bound - low_slack {
            h2_ok = false;
            push(&mut witnesses, &mut c_low, x, "f(x) - lower_bound", fx - nl.lower_bound);
        }

        // H2: at most one zero of f' (count strict sign changes).
        let d1x = nl.d1(x);
        let s = if d1x > 0.0 {
            1i8
        } else if d1x < 0.0 {
            -1i8
        } else {
            0i8
        };
        if s != 0 {
            if let Some(p) = prev_d1_sign {
                if p != s {
                    d1_sign_changes += 1;
                    if d1_sign_changes > 1 {
                        h2_ok = false;
                        push(&mut witnesses, &mut c_crit, x, "extra zero of f'", d1x);
                    }
                }
            }
            prev_d1_sign = Some(s);
        }

        // H3: negative Schwarzian wherever it is computable.
        if d1x.abs() > 1e-12 {
            match schwarzian(nl, x) {
                Ok(s) if s.is_finite() && s < 0.0 => {}
                Ok(s) => {
                    h3_ok = false;
                    push(&mut witnesses, &mut c_schw, x, "Sf(x)", s);
                }
                Err(_) => {}
            }
        }
    }

    HypothesisReport {
        h1_ok,
        h2_ok,
        h3_ok,
        witnesses,
        grid: format!("{} uniform samples of [{lo}, {hi}]", n_samples + 1),
    }
}

/// The attracting 2-cycle interval `[a, b]` of `x -> zeta f(x)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AttractorInterval {
    pub a: f64,
    pub b: f64,
    pub zeta: f64,
    /// `max(|zeta f(a) - b|, |zeta f(b) - a|)` at the returned endpoints.
    pub residual: f64,
}

/// Locate the 2-cycle `{a, b}` of the map `phi(x) = zeta f(x)`:
/// `b` is the smallest positive fixed point of `phi \circ phi`, `a = phi(b)`.
///
/// For `zeta <= 1` the origin attracts everything and the degenerate
/// interval `[0, 0]` is returned.
pub fn attractor_interval(
    nl: &Nonlinearity,
    zeta: f64,
    tol: f64,
) -> Result<AttractorInterval, MapError> {
    assert!(zeta > 0.0 && zeta.is_finite(), "gain must be positive");
    assert!(tol > 0.0, "tolerance must be positive");
    if zeta <= 1.0 {
        return Ok(AttractorInterval {
            a: 0.0,
            b: 0.0,
            zeta,
            residual: 0.0,
        });
    }
    let phi = |x: f64| zeta * nl.f(x);
    let g = |b: f64| phi(phi(b)) - b;

    // Scan (0, CYCLE_SCAN_HI] for the first sign change of g. Near the
    // origin g > 0 because (phi o phi)'(0) = zeta^2 > 1.
    let mut lo = 1e-9;
    let mut g_lo = g(lo);
    let mut bracket = None;
    for i in 1..=CYCLE_SCAN_POINTS {
        let x = CYCLE_SCAN_HI * i as f64 / CYCLE_SCAN_POINTS as f64;
        let gx = g(x);
        if g_lo > 0.0 && gx <= 0.0 {
            bracket = Some((lo, x));
            break;
        }
        lo = x;
        g_lo = gx;
    }
    let (mut blo, mut bhi) = bracket.ok_or(MapError::NoCycleFound {
        zeta,
        lo: 0.0,
        hi: CYCLE_SCAN_HI,
    })?;

    for _ in 0..200 {
        let mid = 0.5 * (blo + bhi);
        if mid <= blo || mid >= bhi {
            break; // interval collapsed to adjacent floats
        }
        if g(mid) > 0.0 {
            blo = mid;
        } else {
            bhi = mid;
        }
    }
    let b = 0.5 * (blo + bhi);
    let a = phi(b);
    let residual = (phi(a) - b).abs().max((phi(b) - a).abs());
    if residual > tol {
        return Err(MapError::ToleranceNotReached { residual, tol });
    }
    Ok(AttractorInterval {
        a,
        b,
        zeta,
        residual,
    })
}

/// Iterate `x -> zeta f(x)` for `n` steps; returns the orbit including `x0`
/// (length `n + 1`).
pub fn iterate_map(
    nl: &Nonlinearity,
    zeta: f64,
    x0: f64,
    n: usize,
) -> Result<Vec<f64>, MapError> {
    let mut orbit = Vec::with_capacity(n + 1);
    let mut x = x0;
    orbit.push(x);
    for step in 1..=n {
        x = zeta * nl.f(x);
        if !x.is_finite() {
            return Err(MapError::NonFiniteValue { step });
        }
        orbit.push(x);
    }
    Ok(orbit)
}

/// For each gain, the positive cycle amplitude `b` and the scaled amplitude
/// `b / sqrt(zeta - 1)`, which approaches `sqrt(3)` as `zeta -> 1+` for
/// odd feedbacks normalized to slope -1.
pub fn cycle_amplitude_scaling(
    nl: &Nonlinearity,
    zetas: &[f64],
) -> Result<Vec<(f64, f64, f64)>, MapError> {
    let mut rows = Vec::with_capacity(zetas.len());
    for &zeta in zetas {
        if zeta <= 1.0 {
            return Err(MapError::GainOutOfRange {
                zeta,
                required: "(1, inf)",
            });
        }
        let cyc = attractor_interval(nl, zeta, 1e-10)?;
        rows.push((zeta, cyc.b, cyc.b / (zeta - 1.0).sqrt()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
        let denom = expected.abs().max(1e-300);
        let rel = (actual - expected).abs() / denom;
        assert!(
            rel <= tol,
            "{what}: got {actual:.17e}, want {expected:.17e} (rel err {rel:.3e} > {tol:e})"
        );
    }

    #[test]
    fn schwarzian_of_negative_tanh_is_minus_two() {
        let nl = Nonlinearity::tanh();
        for &x in &[0.0, 0.3, -1.7, 5.0, -9.9] {
            let s = schwarzian(&nl, x).expect("tanh has no critical point");
            assert_rel(s, -2.0, 1e-12, "S(-tanh)");
        }
    }

    /// Finite differences of f alone must reproduce the closed-form
    /// derivatives and the Schwarzian (Richardson-extrapolated central
    /// differences, step chosen for the f64 noise floor).
    fn fd_schwarzian(nl: &Nonlinearity, x: f64, delta: f64) -> f64 {
        let f = |t: f64| nl.f(t);
        let d1 = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let d3 =
            |h: f64| (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h);
        let richardson = |g: &dyn Fn(f64) -> f64| (4.0 * g(delta / 2.0) - g(delta)) / 3.0;
        let (g1, g2, g3) = (richardson(&d1), richardson(&d2), richardson(&d3));
        g3 / g1 - 1.5 * (g2 / g1) * (g2 / g1)
    }

    #[test]
    fn schwarzian_matches_finite_differences_at_random_points() {
        let nl = Nonlinearity::tanh();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-2.5..2.5);
            let exact = schwarzian(&nl, x).unwrap();
            let fd = fd_schwarzian(&nl, x, 1e-2);
            assert_rel(fd, exact, 1e-5, &format!("FD Schwarzian at x = {x}"));
        }
    }

    #[test]
    fn tanh_satisfies_all_three_hypotheses() {
        let nl = Nonlinearity::tanh();
        let rep = check_hypotheses(&nl, DEFAULT_WINDOW, DEFAULT_SAMPLES);
        assert!(rep.h1_ok, "sign/normalization: {:?}", rep.witnesses);
        assert!(rep.h2_ok, "boundedness: {:?}", rep.witnesses);
        assert!(rep.h3_ok, "Schwarzian: {:?}", rep.witnesses);
        assert!(rep.witnesses.is_empty());
    }

    #[test]
    fn identity_map_fails_the_sign_condition_with_witnesses() {
        let id: RealFn = Arc::new(|x| x);
        let one: RealFn = Arc::new(|_| 1.0);
        let zero: RealFn = Arc::new(|_| 0.0);
        let nl = Nonlinearity::custom(id, one, zero.clone(), zero, f64::NEG_INFINITY, None);
        let rep = check_hypotheses(&nl, (-1.0, 1.0), 200);
        assert!(!rep.h1_ok, "f(x) = x must fail the sign condition");
        assert!(
            rep.witnesses.iter().any(|w| w.quantity == "x*f(x)" && w.x != 0.0),
            "expected a sign-condition witness away from the origin"
        );
    }

    #[test]
    fn cubic_overshoot_fails_outside_unit_interval() {
        // f(x) = -x + x^3 satisfies f(0) = 0, f'(0) = -1, but x f(x) > 0 for |x| > 1.
        let f: RealFn = Arc::new(|x: f64| -x + x * x * x);
        let d1: RealFn = Arc::new(|x: f64| -1.0 + 3.0 * x * x);
        let d2: RealFn = Arc::new(|x: f64| 6.0 * x);
        let d3: RealFn = Arc::new(|_| 6.0);
        let nl = Nonlinearity::custom(f, d1, d2, d3, f64::NEG_INFINITY, None);
        let rep = check_hypotheses(&nl, (-2.0, 2.0), 400);
        assert!(!rep.h1_ok);
        assert!(rep
            .witnesses
            .iter()
            .any(|w| w.quantity == "x*f(x)" && w.x.abs() > 1.0));
    }

    #[test]
    fn subcritical_gain_gives_degenerate_interval() {
        let nl = Nonlinearity::tanh();
        let cyc = attractor_interval(&nl, 0.8, 1e-12).unwrap();
        assert_eq!((cyc.a, cyc.b), (0.0, 0.0));
        assert_eq!(cyc.residual, 0.0);
    }

    #[test]
    fn cycle_amplitudes_match_independently_computed_values() {
        // Positive solutions b of zeta*tanh(b) = b, found by 50-digit
        // root-finding, frozen here to full double precision.
        let cases = [
            (1.0001, 0.01732068128188298),
            (1.0025, 0.086624194492234363),
            (1.01, 0.17337839707212734),
            (1.04, 0.34779935083291465),
            (1.05, 0.38924101919842444),
            (1.1, 0.5532346324391058),
            (1.2, 0.79028359248690486),
            (2.0, 1.9150080481545375),
            (3.0, 2.9847045853578868),
        ];
        let nl = Nonlinearity::tanh();
        for &(zeta, b) in &cases {
            let cyc = attractor_interval(&nl, zeta, 1e-12).unwrap();
            assert_rel(cyc.b, b, 1e-12, &format!("b at zeta = {zeta}"));
            // Odd feedback: the cycle is symmetric.
            assert_rel(cyc.a, -b, 1e-12, &format!("a at zeta = {zeta}"));
            assert!(
                cyc.residual <= 1e-12,
                "residual {:e} at zeta = {zeta}",
                cyc.residual
            );
        }
    }

    #[test]
    fn residuals_stay_small_across_the_near_critical_range() {
        let nl = Nonlinearity::tanh();
        let tol = 1e-10;
        let mut total = 0.0;
        let mut count = 0;
        let mut zeta = 1.005;
        while zeta <= 1.2 + 1e-12 {
            let cyc = attractor_interval(&nl, zeta, tol).unwrap();
            total += cyc.residual;
            count += 1;
            zeta += 0.005;
        }
        assert!(count >= 39, "expected to cover (1, 1.2] densely");
        assert!(
            total <= 10.0 * tol,
            "summed residual {total:e} over {count} gains exceeds 10x tolerance"
        );
    }

    #[test]
    fn cycle_interval_grows_with_gain() {
        let nl = Nonlinearity::tanh();
        let mut prev_b = 0.0;
        for &zeta in &[1.01, 1.05, 1.1, 1.3, 1.7, 2.0, 2.5, 3.0] {
            let cyc = attractor_interval(&nl, zeta, 1e-10).unwrap();
            assert!(
                cyc.b > prev_b,
                "containment violated: b({zeta}) = {} <= previous {prev_b}",
                cyc.b
            );
            prev_b = cyc.b;
        }
    }

    #[test]
    fn orbits_are_absorbed_by_the_cycle_interval() {
        let nl = Nonlinearity::tanh();
        let zeta = 2.5;
        let cyc = attractor_interval(&nl, zeta, 1e-10).unwrap();
        for &x0 in &[0.01, -0.5, 4.0, -7.0, 30.0] {
            let orbit = iterate_map(&nl, zeta, x0, 300).unwrap();
            // Orbits started outside approach the interval from outside, the
            // excess shrinking by a factor |zeta sech^2 b| ~ 0.07 per step;
            // twelve steps push it below the 1e-9 slack used here.
            for (k, &x) in orbit.iter().enumerate().skip(12) {
                assert!(
                    x >= cyc.a - 1e-9 && x <= cyc.b + 1e-9,
                    "iterate {k} from x0 = {x0} escaped: {x} not in [{}, {}]",
                    cyc.a,
                    cyc.b
                );
            }
        }
    }

    #[test]
    fn iterates_of_superlinear_map_blow_up_with_step_report() {
        let f: RealFn = Arc::new(|x: f64| -x * x * x);
        let d1: RealFn = Arc::new(|x: f64| -3.0 * x * x);
        let d2: RealFn = Arc::new(|x: f64| -6.0 * x);
        let d3: RealFn = Arc::new(|_| -6.0);
        let nl = Nonlinearity::custom(f, d1, d2, d3, f64::NEG_INFINITY, None);
        let err = iterate_map(&nl, 2.0, 3.0, 10_000).unwrap_err();
        match err {
            MapError::NonFiniteValue { step } => assert!(step > 0),
            other => panic!("expected NonFiniteValue, got {other:?}"),
        }
    }

    #[test]
    fn scaled_amplitude_approaches_sqrt_three_near_critical_gain() {
        let nl = Nonlinearity::tanh();
        let zetas = [1.04, 1.01, 1.0025, 1.0001];
        let rows = cycle_amplitude_scaling(&nl, &zetas).unwrap();
        // Ratios computed independently at 50 digits.
        let expected = [
            1.7389967541645732,
            1.7337839707212734,
            1.7324838898446873,
            1.7320681281882980,
        ];
        for ((&(zeta, _b, ratio), &want), &z_in) in rows.iter().zip(&expected).zip(&zetas) {
            assert_eq!(zeta, z_in);
            assert_rel(ratio, want, 1e-9, &format!("scaled amplitude at {zeta}"));
        }
        let sqrt3 = 3.0f64.sqrt();
        let devs: Vec<f64> = rows.iter().map(|r| (r.2 - sqrt3).abs()).collect();
        for w in devs.windows(2) {
            assert!(w[1] < w[0], "deviation from sqrt(3) must shrink: {devs:?}");
        }
        assert!(
            devs[3] / sqrt3 < 5e-3,
            "final deviation {:.3e} not within 0.5%",
            devs[3]
        );
    }

    #[test]
    fn gain_at_or_below_one_is_rejected_for_scaling() {
        let nl = Nonlinearity::tanh();
        assert!(matches!(
            cycle_amplitude_scaling(&nl, &[1.1, 1.0]),
            Err(MapError::GainOutOfRange { .. })
        ));
    }
}
