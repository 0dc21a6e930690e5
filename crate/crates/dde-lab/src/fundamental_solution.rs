//! The fundamental solution `v` of `x'(t) = -x(t) - zeta x(t - h)`:
//! `v(t) = 0` on `[-h, 0)`, `v(0) = 1`, and the equation holds for `t > 0`.
//!
//! Three independent representations are implemented and cross-checked:
//!
//! * **Exact piecewise form** ([`PiecewiseExpPoly`]): on `[kh, (k+1)h)`,
//!   `v(kh + s) = e^{-s} P_k(s)` where `P_k` is a polynomial of degree `k`
//!   whose coefficients satisfy an exact convolution recurrence. The stored
//!   coefficients are the `e^{-kh}`-rescaled ones, so nothing overflows no
//!   matter how many pieces are built; they are kept in double-double
//!   precision because the terms of `P_k(s)` can cancel down from magnitude
//!   `e^{zeta s}` to order one. Evaluation tracks the cancellation and
//!   fails loudly with [`FundError::PrecisionLoss`] rather than return
//!   digits that are not there.
//! * **Numeric method of steps** ([`fundamental_numeric`]): interval-by-
//!   interval RK4 with dense output, usable past the exact cap.
//! * **Contour inversion** ([`contour_value`]): `v(t)` as the inverse
//!   transform `(1/pi) Re \int_0^inf e^{(c+is)t} / p(c+is) ds` along a
//!   vertical line right of the dominant characteristic root, with
//!   integration-by-parts tail corrections past the truncation point.

use crate::dd::{self, Dd};
use crate::piecewise::{integrate_interval, steps_per_interval, PiecewiseCubic};
use crate::quasipoly::{dominant_root, QuasiPoly};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Hard cap on exact pieces: degree-`k` coefficient sets stay cheap and
/// well-conditioned well past this, but every supported use fits below it.
pub const MAX_EXACT_PIECES: usize = 60;

/// Unit roundoff of an unevaluated double-double sum, `2^-106`.
const U_DD: f64 = 1.232595164407831e-32;

#[derive(Debug, Error)]
pub enum FundError {
    #[error("delay must be positive and finite, got {delay}")]
    InvalidDelay { delay: f64 },
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
    #[error("exact construction capped at {max} delay intervals, requested {requested}")]
    StepCapExceeded { requested: usize, max: usize },
    #[error("catastrophic cancellation at t = {t}: error estimate {estimate:e} against value {value:e}")]
    PrecisionLoss { t: f64, estimate: f64, value: f64 },
    #[error("integration step underflow (dt = {dt:e})")]
    StepUnderflow { dt: f64 },
    #[error("contour abscissa {abscissa} not strictly right of the dominant rate {sigma}")]
    AbscissaTooLow { abscissa: f64, sigma: f64 },
    #[error(transparent)]
    Spectrum(#[from] crate::quasipoly::SpectrumError),
}

/// Exact representation `v(kh + s) = e^{-s} P_k(s)`, `s in [0, h)`, with
/// the rescaled coefficients of every `P_k` held in double-double.
#[derive(Clone, Debug)]
pub struct PiecewiseExpPoly {
    pub delay: f64,
    pub gain: f64,
    /// `pieces[k][j]` is the coefficient of `s^j` in `P_k`.
    pieces: Vec<Vec<Dd>>,
}

/// Double-double Horner evaluation plus an `f64` companion sum of absolute
/// term magnitudes, used to estimate cancellation.
fn horner_dd(c: &[Dd], s: f64) -> (Dd, f64) {
    let mut acc = Dd::ZERO;
    let mut abs = 0.0f64;
    for j in (0..c.len()).rev() {
        acc = acc.mul_f64(s).add(c[j]);
        abs = abs * s + c[j].hi.abs();
    }
    (acc, abs)
}

impl PiecewiseExpPoly {
    /// Build `n_pieces` exact pieces by the convolution recurrence
    /// `P_k(0) = e^{-h} P_{k-1}(h)`, `P_k'` coefficient `j+1` equal to
    /// `-zeta P_{k-1}` coefficient `j` divided by `j+1`.
    pub fn build(delay: f64, gain: f64, n_pieces: usize) -> Result<Self, FundError> {
        if !(delay > 0.0 && delay.is_finite()) {
            return Err(FundError::InvalidDelay { delay });
        }
        if delay > 700.0 {
            return Err(FundError::InvalidParameter {
                what: format!("delay {delay} exceeds the exp-representable span 700"),
            });
        }
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(FundError::InvalidParameter {
                what: format!("gain must be positive and finite, got {gain}"),
            });
        }
        if n_pieces == 0 {
            return Err(FundError::InvalidParameter {
                what: "at least one piece is required".to_string(),
            });
        }
        if n_pieces > MAX_EXACT_PIECES {
            return Err(FundError::StepCapExceeded {
                requested: n_pieces,
                max: MAX_EXACT_PIECES,
            });
        }
        let eh = dd::exp_neg(delay);
        let mut pieces: Vec<Vec<Dd>> = Vec::with_capacity(n_pieces);
        pieces.push(vec![Dd::ONE]);
        for k in 1..n_pieces {
            let prev = &pieces[k - 1];
            let (p_at_h, _) = horner_dd(prev, delay);
            let mut c = Vec::with_capacity(prev.len() + 1);
            c.push(p_at_h.mul(eh));
            for (j, cj) in prev.iter().enumerate() {
                c.push(cj.mul_f64(-gain).div_f64((j + 1) as f64));
            }
            pieces.push(c);
        }
        Ok(PiecewiseExpPoly {
            delay,
            gain,
            pieces,
        })
    }

    pub fn n_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Last time the representation covers (inclusive, by continuity).
    pub fn t_end(&self) -> f64 {
        self.delay * self.pieces.len() as f64
    }

    /// Evaluate `v(t)`. Zero for `t < 0`; defined up to and including
    /// `t_end()`. Fails with [`FundError::PrecisionLoss`] if cancellation
    /// inside `P_k` leaves fewer than ~8 trustworthy digits.
    pub fn eval(&self, t: f64) -> Result<f64, FundError> {
        if !t.is_finite() {
            return Err(FundError::InvalidParameter {
                what: format!("non-finite evaluation time {t}"),
            });
        }
        if t < 0.0 {
            return Ok(0.0);
        }
        if t > self.t_end() * (1.0 + 1e-12) {
            return Err(FundError::InvalidParameter {
                what: format!("t = {t} beyond the built span {}", self.t_end()),
            });
        }
        let h = self.delay;
        let k = ((t / h).floor() as usize).min(self.pieces.len() - 1);
        let s = t - k as f64 * h;
        let coeffs = &self.pieces[k];
        let (p, abs_sum) = horner_dd(coeffs, s);
        let es = (-s).exp();
        let value = p.to_f64() * es;
        let estimate = (2.0 * coeffs.len() as f64 + 2.0) * U_DD * abs_sum * es;
        if estimate > 1e-8 * value.abs().max(f64::MIN_POSITIVE) {
            return Err(FundError::PrecisionLoss { t, estimate, value });
        }
        Ok(value)
    }

    /// Coefficients of the unscaled polynomial `Q_k` with
    /// `v(t) = e^{-t} Q_k(t - kh)` on piece `k`, when `e^{kh}` is
    /// representable; `None` for out-of-range `k` or overflow.
    pub fn unscaled_piece(&self, k: usize) -> Option<Vec<f64>> {
        if k >= self.pieces.len() {
            return None;
        }
        let kh = k as f64 * self.delay;
        if kh > 700.0 {
            return None;
        }
        let f = kh.exp();
        Some(self.pieces[k].iter().map(|c| c.to_f64() * f).collect())
    }
}

/// Exact fundamental solution covering `[0, t_max]` (piece count
/// `ceil(t_max / delay)`, capped at [`MAX_EXACT_PIECES`]).
pub fn fundamental_exact(
    delay: f64,
    gain: f64,
    t_max: f64,
) -> Result<PiecewiseExpPoly, FundError> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(FundError::InvalidParameter {
            what: format!("t_max must be positive and finite, got {t_max}"),
        });
    }
    if !(delay > 0.0 && delay.is_finite()) {
        return Err(FundError::InvalidDelay { delay });
    }
    let n = (t_max / delay).ceil().max(1.0) as usize;
    PiecewiseExpPoly::build(delay, gain, n)
}

/// Dense numeric fundamental solution from the method of steps.
#[derive(Clone, Debug)]
pub struct PiecewiseSolution {
    pub delay: f64,
    pub gain: f64,
    pub cubic: PiecewiseCubic,
}

impl PiecewiseSolution {
    /// `v(t)`; zero before the start, clamped to the final time after the
    /// covered span.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.cubic.value(t.min(self.cubic.t_end))
        }
    }

    pub fn t_end(&self) -> f64 {
        self.cubic.t_end
    }
}

/// Integrate the fundamental solution numerically out to `t_end` with the
/// step density implied by `tol` (fourth-order method of steps).
pub fn fundamental_numeric(
    delay: f64,
    gain: f64,
    t_end: f64,
    tol: f64,
) -> Result<PiecewiseSolution, FundError> {
    if !(delay > 0.0 && delay.is_finite()) {
        return Err(FundError::InvalidDelay { delay });
    }
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(FundError::InvalidParameter {
            what: format!("gain must be positive and finite, got {gain}"),
        });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FundError::InvalidParameter {
            what: format!("t_end must be positive and finite, got {t_end}"),
        });
    }
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(FundError::InvalidParameter {
            what: format!("tolerance must lie in (0, 0.1], got {tol}"),
        });
    }
    let n_int = (t_end / delay).ceil().max(1.0) as usize;
    if n_int > 1_000_000 {
        return Err(FundError::InvalidParameter {
            what: format!("span of {n_int} delay intervals is beyond the supported range"),
        });
    }
    let n = steps_per_interval(delay, tol);
    let dt = delay / n as f64;
    if dt < 1e-300 {
        return Err(FundError::StepUnderflow { dt });
    }
    let rhs = move |_t: f64, x: f64, xd: f64| -x - gain * xd;
    let mut blocks = Vec::with_capacity(n_int);
    let mut x0 = 1.0;
    for k in 0..n_int {
        let t0 = k as f64 * delay;
        let block = match blocks.last() {
            None => integrate_interval(t0, delay, n, x0, &|_| 0.0, &rhs),
            Some(prev) => {
                let prev: &crate::piecewise::Block = prev;
                integrate_interval(t0, delay, n, x0, &|t| prev.eval(t - delay), &rhs)
            }
        };
        x0 = *block.x.last().unwrap();
        blocks.push(block);
    }
    let t_cover = blocks.last().unwrap().t_end();
    Ok(PiecewiseSolution {
        delay,
        gain,
        cubic: PiecewiseCubic {
            t_begin: 0.0,
            block_len: delay,
            blocks,
            t_end: t_cover,
        },
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton on
/// the Legendre recurrence (machine precision, deterministic).
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `int_T^inf e^{i w s} / q(s)^m ds` for `q(s) = i s + (c+1)`, by four
/// levels of integration by parts (boundary terms only; the remainder is
/// `O(1 / (w T)^4)` relative to the leading term).
fn tail_parts(m: u32, t_big: f64, w: f64, c1: f64) -> Complex64 {
    let q = Complex64::new(c1, t_big);
    let phase = Complex64::new(0.0, w * t_big).exp();
    let iw = Complex64::new(0.0, w);
    // phi^{(n)}(s) = (-1)^n (m)_n i^n / q^{m+n} with rising factorial (m)_n.
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sign = 1.0;
    let mut rising = 1.0;
    let mut qpow = q.powu(m);
    let mut iwpow = iw;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut ipow = Complex64::new(1.0, 0.0);
    for n in 0..4u32 {
        // term_n = (-1)^n * phi^{(n)}(T) / (i w)^{n+1}
        let phi_n = ipow * (sign * rising) / qpow;
        sum += if n % 2 == 0 { -phi_n / iwpow } else { phi_n / iwpow };
        sign = -sign;
        rising *= (m + n) as f64;
        qpow *= q;
        iwpow *= iw;
        ipow *= i_unit;
    }
    phase * sum
}

/// `v(t)` from the inverse-transform contour along `Re z = abscissa`,
/// truncated at `Im z = s_max` with analytic tail corrections. Requires
/// the abscissa to sit strictly right of the dominant characteristic root
/// (checked; [`FundError::AbscissaTooLow`] otherwise) and `t >= 0.05`.
///
/// The truncation error after corrections is
/// `O(gain^2 e^{(t - 2h) max(abscissa, 0)} / s_max^2)` plus parts
/// remainders of order `(t s_max)^{-4}`.
pub fn contour_value(
    delay: f64,
    gain: f64,
    t: f64,
    abscissa: f64,
    s_max: f64,
) -> Result<f64, FundError> {
    if !(t >= 0.05 && t.is_finite()) {
        return Err(FundError::InvalidParameter {
            what: format!("contour evaluation needs t >= 0.05, got {t}"),
        });
    }
    if !(s_max >= 100.0 && s_max.is_finite()) {
        return Err(FundError::InvalidParameter {
            what: format!("truncation point must be >= 100, got {s_max}"),
        });
    }
    let p = QuasiPoly::new(delay, gain);
    let (sigma, _) = dominant_root(&p)?;
    if abscissa <= sigma + 1e-9 {
        return Err(FundError::AbscissaTooLow { abscissa, sigma });
    }

    let c = abscissa;
    let (nodes, weights) = gauss_legendre(16);
    // Panel width: both e^{ist} and the e^{-ish} inside p oscillate; keep
    // the combined phase advance per panel near a quarter turn.
    let width = 0.5 * PI / (t + delay + 1.0);
    let n_panels = (s_max / width).ceil() as usize;
    let mut integral = 0.0f64;
    for j in 0..n_panels {
        let a = s_max * j as f64 / n_panels as f64;
        let b = s_max * (j + 1) as f64 / n_panels as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let s = mid + half * x;
            let z = Complex64::new(c, s);
            let val = (Complex64::new(0.0, s * t)).exp() / p.eval(z);
            acc += w * val.re;
        }
        integral += acc * half;
    }

    // Tail beyond s_max: with q = is + c + 1 and r = gain e^{-ch} e^{-ish},
    // 1/p = 1/q - r/q^2 + r^2/(p q^2); the first two pieces get parts
    // corrections, the third is the quoted remainder. The oscillatory
    // correction carries phase rate t - h; when that phase barely turns
    // over the tail the parts series is invalid, and skipping the term
    // costs only O(gain e^{-ch} / s_max).
    let c1 = c + 1.0;
    let tail1 = tail_parts(1, s_max, t, c1);
    let w2 = t - delay;
    let tail2 = if w2.abs() * s_max >= 50.0 {
        tail_parts(2, s_max, w2, c1) * (gain * (-c * delay).exp())
    } else {
        Complex64::new(0.0, 0.0)
    };
    let tail = (tail1 - tail2).re;

    Ok((c * t).exp() / PI * (integral + tail))
}

/// Measured decay envelope of the fundamental solution against the
/// reference rate `w = pi^2 / (alpha h^3)`.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub delay: f64,
    pub gain: f64,
    pub alpha: f64,
    /// Envelope rate `pi^2 / (alpha delay^3)`.
    pub rate: f64,
    pub t_max: f64,
    /// `sup_{0 <= t <= t_max} |v(t)| e^{rate t} / delay`.
    pub c_hat: f64,
    pub t_at_sup: f64,
    /// `c_hat / ln(delay)` when `delay > 1`, else `None`.
    pub c_hat_over_log_delay: Option<f64>,
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..90 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Measure `sup |v(t)| e^{w t} / h` over `[0, t_max]` with
/// `w = pi^2 / (alpha h^3)`: 50 samples per delay interval (plus the exact
/// `t = 0` node) refined by golden-section search around the best sample.
pub fn decay_envelope(
    delay: f64,
    gain: f64,
    alpha: f64,
    t_max: f64,
    tol: f64,
) -> Result<EnvelopeReport, FundError> {
    if !(alpha > 2.0) {
        return Err(FundError::InvalidParameter {
            what: format!("alpha must exceed 2, got {alpha}"),
        });
    }
    let sol = fundamental_numeric(delay, gain, t_max, tol)?;
    let rate = PI * PI / (alpha * delay * delay * delay);
    let g = |t: f64| sol.value(t).abs() * (rate * t).exp();
    let t_hi = t_max.min(sol.t_end());
    let n_samples = ((t_hi / delay).ceil() as usize * 50).max(50);
    let mut best_t = 0.0;
    let mut best_g = g(0.0);
    for i in 1..=n_samples {
        let t = t_hi * i as f64 / n_samples as f64;
        let gt = g(t);
        if gt > best_g {
            best_g = gt;
            best_t = t;
        }
    }
    let span = t_hi / n_samples as f64;
    let (t_ref, g_ref) = golden_max(&g, (best_t - span).max(0.0), (best_t + span).min(t_hi));
    if g_ref > best_g {
        best_g = g_ref;
        best_t = t_ref;
    }
    let c_hat = best_g / delay;
    Ok(EnvelopeReport {
        delay,
        gain,
        alpha,
        rate,
        t_max,
        c_hat,
        t_at_sup: best_t,
        c_hat_over_log_delay: if delay > 1.0 {
            Some(c_hat / delay.ln())
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
        let denom = expected.abs().max(1e-300);
        let rel = (actual - expected).abs() / denom;
        assert!(
            rel <= tol,
            "{what}: got {actual:.17e}, want {expected:.17e} (rel err {rel:.3e} > {tol:e})"
        );
    }

    #[test]
    fn exact_values_match_frozen_references() {
        // Independently computed at 50 digits from the piecewise recurrence.
        let v11 = fundamental_exact(1.0, 1.0, 25.0).unwrap();
        assert_rel(v11.eval(1.0).unwrap(), 0.36787944117144232, 1e-14, "v(1), h = 1");
        assert_rel(v11.eval(2.0).unwrap(), -0.23254415793482963, 1e-14, "v(2), h = 1");
        assert_rel(
            v11.eval(2.5).unwrap(),
            -0.17679390913466677,
            1e-14,
            "v(2.5), h = 1",
        );
        assert_rel(
            v11.eval(10.0).unwrap(),
            -6.2462782918923922e-4,
            1e-13,
            "v(10), h = 1",
        );
        assert_rel(
            v11.eval(20.0).unwrap(),
            -4.6847293089357143e-6,
            1e-13,
            "v(20), h = 1",
        );
        let v2 = fundamental_exact(2.0, 1.0, 6.0).unwrap();
        assert_rel(v2.eval(5.0).unwrap(), 0.041316462481214799, 1e-14, "v(5), h = 2");
        let v5 = fundamental_exact(5.0, 1.0, 100.0).unwrap();
        assert_rel(
            v5.eval(100.0).unwrap(),
            -0.022473821839337961,
            1e-13,
            "v(100), h = 5",
        );
    }

    #[test]
    fn first_pieces_have_the_known_closed_forms() {
        // Q_0 = 1 and Q_1(s) = 1 - zeta e^h s.
        let v = fundamental_exact(1.0, 1.0, 3.0).unwrap();
        let q0 = v.unscaled_piece(0).unwrap();
        assert_eq!(q0, vec![1.0]);
        let q1 = v.unscaled_piece(1).unwrap();
        assert_rel(q1[0], 1.0, 1e-14, "Q_1 constant term");
        assert_rel(q1[1], -std::f64::consts::E, 1e-14, "Q_1 linear term");
    }

    #[test]
    fn exact_solution_is_continuous_at_knots() {
        let v = fundamental_exact(1.5, 1.3, 30.0).unwrap();
        for k in 1..v.n_pieces() {
            let t = k as f64 * 1.5;
            let left = v.eval(t - 1e-13).unwrap();
            let right = v.eval(t).unwrap();
            assert!(
                (left - right).abs() <= 1e-11 * (1.0 + right.abs()),
                "jump at knot {k}: {left} vs {right}"
            );
        }
    }

    #[test]
    fn exact_solution_satisfies_the_equation() {
        // Centered fourth-order finite difference of v' against
        // -v(t) - zeta v(t - h), away from knots.
        let (h, zeta) = (1.0, 1.0);
        let v = fundamental_exact(h, zeta, 12.0).unwrap();
        let d = 1e-4;
        for &t in &[1.3, 2.6, 4.1, 7.7, 10.4] {
            let vm2 = v.eval(t - 2.0 * d).unwrap();
            let vm1 = v.eval(t - d).unwrap();
            let vp1 = v.eval(t + d).unwrap();
            let vp2 = v.eval(t + 2.0 * d).unwrap();
            let deriv = (vm2 - 8.0 * vm1 + 8.0 * vp1 - vp2) / (12.0 * d);
            let rhs = -v.eval(t).unwrap() - zeta * v.eval(t - h).unwrap();
            assert!(
                (deriv - rhs).abs() < 1e-10,
                "equation residual {:e} at t = {t}",
                (deriv - rhs).abs()
            );
        }
    }

    #[test]
    fn numeric_solution_tracks_the_exact_one() {
        let exact = fundamental_exact(1.0, 1.0, 20.0).unwrap();
        let numeric = fundamental_numeric(1.0, 1.0, 20.0, 1e-10).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=2_000 {
            let t = 20.0 * i as f64 / 2_000.0;
            worst = worst.max((exact.eval(t).unwrap() - numeric.value(t)).abs());
        }
        assert!(worst < 1e-8, "exact/numeric split {worst:e}");
    }

    #[test]
    fn construction_rejects_bad_requests() {
        assert!(matches!(
            PiecewiseExpPoly::build(0.0, 1.0, 5),
            Err(FundError::InvalidDelay { .. })
        ));
        assert!(matches!(
            PiecewiseExpPoly::build(1.0, 1.0, MAX_EXACT_PIECES + 1),
            Err(FundError::StepCapExceeded { .. })
        ));
        let v = fundamental_exact(1.0, 1.0, 5.0).unwrap();
        assert!(matches!(
            v.eval(5.1),
            Err(FundError::InvalidParameter { .. })
        ));
        assert_eq!(v.eval(-3.0).unwrap(), 0.0, "zero before the start");
    }

    #[test]
    fn contour_inversion_reproduces_the_exact_value() {
        let got = contour_value(1.0, 1.0, 2.5, 0.0, 1e4).unwrap();
        let want = -0.17679390913466677;
        assert!(
            (got - want).abs() < 1e-4,
            "contour value {got:.10e} vs exact {want:.10e}"
        );
    }

    #[test]
    fn contour_rejects_abscissas_at_or_left_of_the_dominant_root() {
        // sigma(h = 1) = -0.605..., so c = -0.7 sits left of it.
        assert!(matches!(
            contour_value(1.0, 1.0, 2.5, -0.7, 1e4),
            Err(FundError::AbscissaTooLow { .. })
        ));
    }

    #[test]
    fn envelope_sup_sits_at_zero_when_the_rate_dominates() {
        // At h = 10 the dominant rate beats pi^2/(3 h^3): the weighted
        // envelope decays, so the sup is the exact t = 0 sample, 1/h.
        let rep = decay_envelope(10.0, 1.0, 3.0, 3_000.0, 1e-8).unwrap();
        assert!((rep.c_hat - 0.1).abs() < 1e-12, "c_hat = {}", rep.c_hat);
        assert!(rep.t_at_sup < 1e-3, "sup at t = {}", rep.t_at_sup);
        assert!(rep.c_hat_over_log_delay.is_some());
    }

    #[test]
    fn envelope_sup_moves_inward_when_the_rate_loses() {
        // At h = 5 the dominant rate -0.02133 is beaten by pi^2/(3 h^3)
        // = 0.02632, so the weighted envelope grows toward t_max.
        let rep = decay_envelope(5.0, 1.0, 3.0, 375.0, 1e-8).unwrap();
        assert!(
            rep.c_hat > 0.39 && rep.c_hat < 0.41,
            "c_hat = {}",
            rep.c_hat
        );
        assert!(
            rep.t_at_sup > 370.0 && rep.t_at_sup <= 375.0,
            "sup at t = {}",
            rep.t_at_sup
        );
    }
}
