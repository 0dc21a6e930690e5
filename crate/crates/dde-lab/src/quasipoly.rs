//! The characteristic function `p(z) = z + 1 + zeta e^{-z h}` of the
//! linearization `x'(t) = -x(t) - zeta x(t - h)`.
//!
//! Roots are located by argument-principle winding counts over rectangles
//! (adaptive boundary sampling keeps every phase increment below pi/2, so
//! the winding number is exact barring a root on the boundary, which is
//! reported), refined by Newton's method, and cross-validated by counting
//! roots per horizontal strip of height `2 pi / h`. [`dominant_root`]
//! additionally certifies that no root lies to the right of the returned
//! one by a final zero-count over the half-plane portion that could contain
//! competitors.
//!
//! The module also evaluates two explicit modulus bounds used by the decay
//! analysis of the fundamental solution, on the vertical segment
//! `Re z = -pi^2/(alpha h^3)`:
//!
//! * a floor: `min |p| >= pi^2 / (beta h^2)` with `beta = (2 alpha + 1)/(alpha - 2)`
//!   over `Im z in [0, 2 pi / h]` (valid once `h` is large enough);
//! * a sandwich: `max(s - 3, 0) < sqrt((1+a)^2 + s^2) - e^{-a h} <= |p(a + i s)| < s + 3`
//!   for `s >= 2 pi / h`.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::f64::consts::PI;
use thiserror::Error;

/// `p(z) = z + 1 + gain * exp(-z * delay)`.
#[derive(Clone, Copy, Debug)]
pub struct QuasiPoly {
    pub delay: f64,
    pub gain: f64,
}

impl QuasiPoly {
    pub fn new(delay: f64, gain: f64) -> Self {
        assert!(
            delay > 0.0 && delay.is_finite(),
            "delay must be positive and finite, got {delay}"
        );
        assert!(
            gain > 0.0 && gain.is_finite(),
            "gain must be positive and finite, got {gain}"
        );
        QuasiPoly { delay, gain }
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        z + 1.0 + (-z * self.delay).exp() * self.gain
    }

    #[inline]
    pub fn deriv(&self, z: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0) - (-z * self.delay).exp() * (self.gain * self.delay)
    }
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug)]
pub struct Rect {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl Rect {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Self {
        Rect {
            re_lo,
            re_hi,
            im_lo,
            im_hi,
        }
    }
    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_lo + self.re_hi),
            0.5 * (self.im_lo + self.im_hi),
        )
    }
    fn contains(&self, z: Complex64) -> bool {
        z.re > self.re_lo && z.re < self.re_hi && z.im > self.im_lo && z.im < self.im_hi
    }
    fn width(&self) -> f64 {
        self.re_hi - self.re_lo
    }
    fn height(&self) -> f64 {
        self.im_hi - self.im_lo
    }
}

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("characteristic root on or too close to the counting boundary at ({re}, {im}): |p| = {abs_p:e}")]
    RootOnBoundary { re: f64, im: f64, abs_p: f64 },
    #[error("Newton refinement diverged in strip {k}")]
    NewtonDiverged { k: usize },
    #[error("strip {k} holds {found} roots, expected {expected}")]
    MissedRoot {
        k: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
    #[error("numerical failure: {what}")]
    NumericalFailure { what: String },
}

/// One characteristic root with a derivative-scaled residual
/// `|p(z)| / (1 + |p'(z)|)`, a first-order bound on the root displacement.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectrumRoot {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

/// Roots found in the strips `0 <= Im z < (2 k_max + 2) pi / h`, together
/// with their complex conjugates, sorted by imaginary part.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub delay: f64,
    pub gain: f64,
    pub roots: Vec<SpectrumRoot>,
    /// Index into `roots` of the rightmost root (ties broken upward).
    pub dominant: usize,
}

impl Spectrum {
    pub fn dominant_pair(&self) -> (f64, f64) {
        let r = &self.roots[self.dominant];
        (r.re, r.im)
    }
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Dom {
            re: f64,
            im: f64,
        }
        let (re, im) = self.dominant_pair();
        let mut st = ser.serialize_struct("Spectrum", 4)?;
        st.serialize_field("h", &self.delay)?;
        st.serialize_field("zeta", &self.gain)?;
        st.serialize_field("roots", &self.roots)?;
        st.serialize_field("dominant", &Dom { re, im })?;
        st.end()
    }
}

/// Result of checking the modulus floor on the near-axis rectangle.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub alpha: f64,
    pub beta: f64,
    /// Description of the evaluation grid.
    pub grid: String,
    pub min_observed: f64,
    pub bound: f64,
    pub ok: bool,
}

/// One row of the modulus sandwich table at `a = -pi^2/(alpha h^3)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SandwichRow {
    pub s: f64,
    pub a: f64,
    pub abs_p: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

/// Inclusive uniform grid of `n >= 2` points from `lo` to `hi`, with the
/// endpoints exact (the convention of the reference tooling this module's
/// frozen test values were produced with).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    v[n - 1] = hi;
    v
}

const BOUNDARY_ABS_FLOOR: f64 = 1e-9;
const MAX_EDGE_DEPTH: u32 = 48;

/// Phase increment along one boundary edge, adaptively subdivided so that
/// no single increment exceeds pi/2. Tracks proximity of `p` to zero.
fn edge_phase(
    p: &QuasiPoly,
    z0: Complex64,
    z1: Complex64,
    p0: Complex64,
    p1: Complex64,
    depth: u32,
) -> Result<f64, SpectrumError> {
    let near = |z: Complex64, v: Complex64| v.norm() < BOUNDARY_ABS_FLOOR * (1.0 + z.norm());
    if near(z0, p0) {
        return Err(SpectrumError::RootOnBoundary {
            re: z0.re,
            im: z0.im,
            abs_p: p0.norm(),
        });
    }
    if near(z1, p1) {
        return Err(SpectrumError::RootOnBoundary {
            re: z1.re,
            im: z1.im,
            abs_p: p1.norm(),
        });
    }
    let d = (p1 * p0.conj()).arg();
    if d.abs() <= 0.5 * PI {
        return Ok(d);
    }
    if depth == 0 {
        // Phase cannot be pinned down: p winds too fast, i.e. a root sits
        // essentially on the segment.
        let zm = 0.5 * (z0 + z1);
        return Err(SpectrumError::RootOnBoundary {
            re: zm.re,
            im: zm.im,
            abs_p: p.eval(zm).norm(),
        });
    }
    let zm = 0.5 * (z0 + z1);
    let pm = p.eval(zm);
    Ok(edge_phase(p, z0, zm, p0, pm, depth - 1)? + edge_phase(p, zm, z1, pm, p1, depth - 1)?)
}

/// Count characteristic roots strictly inside `rect` by the argument
/// principle. A degenerate (empty) rectangle holds zero roots. Fails with
/// [`SpectrumError::RootOnBoundary`] when a root is on or numerically too
/// close to the boundary for the winding number to be trustworthy.
pub fn count_roots_rect(
    p: &QuasiPoly,
    rect: Rect,
    n_boundary: usize,
) -> Result<usize, SpectrumError> {
    if !(rect.re_lo < rect.re_hi) || !(rect.im_lo < rect.im_hi) {
        return Ok(0);
    }
    let n = n_boundary.max(1_000);
    let corners = [
        Complex64::new(rect.re_lo, rect.im_lo),
        Complex64::new(rect.re_hi, rect.im_lo),
        Complex64::new(rect.re_hi, rect.im_hi),
        Complex64::new(rect.re_lo, rect.im_hi),
    ];
    let perimeter = 2.0 * (rect.width() + rect.height());
    let mut total = 0.0;
    for e in 0..4 {
        let (z0, z1) = (corners[e], corners[(e + 1) % 4]);
        let len = (z1 - z0).norm();
        let m = ((n as f64 * len / perimeter).ceil() as usize).max(8);
        let mut za = z0;
        let mut pa = p.eval(za);
        for i in 1..=m {
            let t = i as f64 / m as f64;
            let zb = z0 + (z1 - z0) * t;
            let pb = p.eval(zb);
            total += edge_phase(p, za, zb, pa, pb, MAX_EDGE_DEPTH)?;
            za = zb;
            pa = pb;
        }
    }
    let winding = total / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.2 || rounded < -0.2 {
        return Err(SpectrumError::NumericalFailure {
            what: format!("winding number {winding} did not settle near a nonnegative integer"),
        });
    }
    Ok(rounded as usize)
}

/// Newton iteration for `p(z) = 0`: converges when the step drops below
/// `1e-13 (1 + |z|)`, gives up after 100 iterations or on overflow.
fn newton(p: &QuasiPoly, seed: Complex64) -> Option<Complex64> {
    let mut z = seed;
    for _ in 0..100 {
        let pv = p.eval(z);
        let dv = p.deriv(z);
        if dv.norm() == 0.0 {
            return None;
        }
        let dz = pv / dv;
        z -= dz;
        if !z.is_finite() {
            return None;
        }
        if dz.norm() < 1e-13 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Count roots, retrying with slightly inflated rectangles when a root sits
/// on the boundary (the inflation moves the edge off the root).
fn count_with_retry(p: &QuasiPoly, rect: Rect) -> Result<(usize, Rect), SpectrumError> {
    let mut last_err = None;
    for k in 0..4 {
        let pad_re = rect.width() * 1.3e-4 * k as f64;
        let pad_im = rect.height() * 0.9e-4 * k as f64;
        let r = Rect::new(
            rect.re_lo - pad_re,
            rect.re_hi + pad_re,
            rect.im_lo - pad_im,
            rect.im_hi + pad_im,
        );
        match count_roots_rect(p, r, 1_000) {
            Ok(c) => return Ok((c, r)),
            Err(e @ SpectrumError::RootOnBoundary { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// Enumerate all roots inside `rect` by recursive bisection on winding
/// counts, with Newton refinement once a rectangle holds a single root.
fn find_roots_in_rect(
    p: &QuasiPoly,
    rect: Rect,
    out: &mut Vec<Complex64>,
) -> Result<(), SpectrumError> {
    let (count, rect) = count_with_retry(p, rect)?;
    if count == 0 {
        return Ok(());
    }
    if count == 1 {
        if let Some(root) = newton(p, rect.center()) {
            if rect.contains(root) {
                out.push(root);
                return Ok(());
            }
        }
    }
    if rect.width() < 1e-9 && rect.height() < 1e-9 {
        return Err(SpectrumError::NumericalFailure {
            what: format!(
                "unresolved cluster of {count} roots near ({}, {})",
                rect.center().re,
                rect.center().im
            ),
        });
    }
    // Split the longer side; nudge the split line if a root lands on it.
    let jitters = [0.0, 0.0137, -0.0213, 0.0311, -0.0413];
    let vertical = rect.width() >= rect.height();
    for (i, j) in jitters.iter().enumerate() {
        let (a, b) = if vertical {
            let cut = 0.5 * (rect.re_lo + rect.re_hi) + j * rect.width();
            (
                Rect::new(rect.re_lo, cut, rect.im_lo, rect.im_hi),
                Rect::new(cut, rect.re_hi, rect.im_lo, rect.im_hi),
            )
        } else {
            let cut = 0.5 * (rect.im_lo + rect.im_hi) + j * rect.height();
            (
                Rect::new(rect.re_lo, rect.re_hi, rect.im_lo, cut),
                Rect::new(rect.re_lo, rect.re_hi, cut, rect.im_hi),
            )
        };
        match (find_roots_in_rect(p, a, out), i) {
            (Ok(()), _) => {
                find_roots_in_rect(p, b, out)?;
                return Ok(());
            }
            (Err(SpectrumError::RootOnBoundary { .. }), i) if i + 1 < jitters.len() => continue,
            (Err(e), _) => return Err(e),
        }
    }
    unreachable!("jitter loop returns or errors");
}

/// Left extent of the search/validation box for strips reaching up to
/// `im_top`: deep enough that every root with `Im <= im_top` lies inside,
/// in both the large-`h` regime (real parts scale like
/// `-pi^2 (2k+1)^2 / (2 h^3)` and `2k+1 <= im_top h / pi`, so
/// `|Re| <= im_top^2 / (2h)`) and the small-`h`/small-gain regime (a root
/// at depth `a < 0` satisfies `gain e^{-a h} = |z + 1| <= 2 + im_top + |a|`,
/// giving a logarithmic depth cap).
fn strip_left_extent(h: f64, gain: f64, im_top: f64) -> f64 {
    let cubic = 0.75 * im_top * im_top / h + 2.0;
    let log_regime = 2.0 / h * ((2.0 + im_top) / gain.min(1.0)).ln().max(0.0) + 3.0;
    cubic.max(log_regime).max(2.0)
}

/// Asymptotic seed for the root in strip `k` at critical gain:
/// `-pi^2 (1+2k)^2 / (2 h^3) + i pi (1+2k) / h`.
fn strip_seed(h: f64, k: usize) -> Complex64 {
    let m = (1 + 2 * k) as f64;
    Complex64::new(-PI * PI * m * m / (2.0 * h * h * h), PI * m / h)
}

fn scaled_residual(p: &QuasiPoly, z: Complex64) -> f64 {
    p.eval(z).norm() / (1.0 + p.deriv(z).norm())
}

/// Find the roots in strips `k = 0 ..= k_max` (heights `2 pi / h`) plus
/// conjugates, sorted by imaginary part. Requires `h >= 1`, where one root
/// per strip is the established regime. Each strip count is re-verified by
/// the argument principle; `tol` bounds the accepted derivative-scaled
/// residual of every refined root.
pub fn roots_in_strips(
    p: &QuasiPoly,
    k_max: usize,
    tol: f64,
) -> Result<Spectrum, SpectrumError> {
    if p.delay < 1.0 {
        return Err(SpectrumError::InvalidParameter {
            what: format!(
                "strip enumeration requires delay >= 1, got {}",
                p.delay
            ),
        });
    }
    let h = p.delay;
    let critical_gain = (p.gain - 1.0).abs() < 1e-12;
    let mut ups: Vec<Complex64> = Vec::with_capacity(k_max + 1);

    if critical_gain {
        for k in 0..=k_max {
            let seed = strip_seed(h, k);
            let strip_top = (2 * k + 2) as f64 * PI / h;
            let left = strip_left_extent(h, p.gain, strip_top);
            let root = match newton(p, seed) {
                Some(r) if r.im > 0.0 => r,
                _ => bisect_strip_for_root(p, k, left)?,
            };
            let res = scaled_residual(p, root);
            if res > tol {
                return Err(SpectrumError::NewtonDiverged { k });
            }
            ups.push(root);
        }
    } else {
        let im_top = (2 * k_max + 2) as f64 * PI / h;
        let left = strip_left_extent(h, p.gain, im_top);
        let band = 1e-3 * PI / h; // capture real roots without grazing conjugates
        let rect = Rect::new(-left, p.gain.max(1.0) + 1.0, -band, im_top);
        let mut found = Vec::new();
        find_roots_in_rect(p, rect, &mut found)?;
        for r in &found {
            let res = scaled_residual(p, *r);
            if res > tol {
                return Err(SpectrumError::NumericalFailure {
                    what: format!("root ({}, {}) residual {res:e} exceeds {tol:e}", r.re, r.im),
                });
            }
        }
        ups = found;
        ups.sort_by(|a, b| a.im.total_cmp(&b.im));
        ups.dedup_by(|a, b| (*a - *b).norm() < 1e-8);
    }

    // Strip-count validation against the argument principle.
    for k in 0..=k_max {
        let (lo, hi) = (2.0 * k as f64 * PI / h, (2 * k + 2) as f64 * PI / h);
        let in_strip = ups
            .iter()
            .filter(|r| r.im >= lo - 1e-12 && r.im < hi)
            .count();
        let left = strip_left_extent(h, p.gain, hi);
        let band = 1e-3 * PI / h;
        let rect = Rect::new(
            -left,
            p.gain.max(1.0) + 1.0,
            if k == 0 { -band } else { lo },
            hi,
        );
        let (counted, _) = count_with_retry(p, rect)?;
        if counted != in_strip {
            return Err(SpectrumError::MissedRoot {
                k,
                expected: counted,
                found: in_strip,
            });
        }
    }

    // Assemble with conjugates, sorted by imaginary part (ties by real part).
    let mut all: Vec<Complex64> = Vec::with_capacity(2 * ups.len());
    for r in &ups {
        if r.im.abs() < 1e-12 {
            all.push(Complex64::new(r.re, 0.0));
        } else {
            all.push(*r);
            all.push(r.conj());
        }
    }
    all.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let roots: Vec<SpectrumRoot> = all
        .iter()
        .map(|z| SpectrumRoot {
            re: z.re,
            im: z.im,
            residual: scaled_residual(p, *z),
        })
        .collect();
    let dominant = roots
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)))
        .map(|(i, _)| i)
        .ok_or_else(|| SpectrumError::NumericalFailure {
            what: "no roots found".to_string(),
        })?;
    Ok(Spectrum {
        delay: p.delay,
        gain: p.gain,
        roots,
        dominant,
    })
}

/// Fallback when Newton from the asymptotic seed fails: bisect the strip on
/// winding counts until the root is pinned, then polish.
fn bisect_strip_for_root(
    p: &QuasiPoly,
    k: usize,
    left: f64,
) -> Result<Complex64, SpectrumError> {
    let h = p.delay;
    let (lo, hi) = (2.0 * k as f64 * PI / h, (2 * k + 2) as f64 * PI / h);
    let pad = 1e-6 * PI / h;
    let mut rect = Rect::new(-left, p.gain.max(1.0) + 1.0, lo + pad, hi - pad);
    let (c, r0) = count_with_retry(p, rect)?;
    if c != 1 {
        return Err(SpectrumError::MissedRoot {
            k,
            expected: 1,
            found: c,
        });
    }
    rect = r0;
    for _ in 0..64 {
        if rect.width() < 1e-10 && rect.height() < 1e-10 {
            break;
        }
        let vertical = rect.width() >= rect.height();
        let (a, b) = if vertical {
            let cut = 0.5 * (rect.re_lo + rect.re_hi);
            (
                Rect::new(rect.re_lo, cut, rect.im_lo, rect.im_hi),
                Rect::new(cut, rect.re_hi, rect.im_lo, rect.im_hi),
            )
        } else {
            let cut = 0.5 * (rect.im_lo + rect.im_hi);
            (
                Rect::new(rect.re_lo, rect.re_hi, rect.im_lo, cut),
                Rect::new(rect.re_lo, rect.re_hi, cut, rect.im_hi),
            )
        };
        let (ca, ra) = count_with_retry(p, a)?;
        rect = if ca == 1 { ra } else { b };
        if let Some(root) = newton(p, rect.center()) {
            if root.im > 0.0 {
                return Ok(root);
            }
        }
    }
    newton(p, rect.center())
        .filter(|r| r.im > 0.0)
        .ok_or(SpectrumError::NewtonDiverged { k })
}

/// Rightmost-root certification margin: the returned root is guaranteed to
/// be rightmost up to this gap in the real part.
pub const DOMINANT_MARGIN: f64 = 2e-6;

/// The rightmost characteristic root `(sigma, omega)` with `omega >= 0`.
///
/// At critical gain with `h >= 1` the strip-0 root is refined from its
/// asymptotic seed; otherwise all roots in an initial low box are
/// enumerated by winding counts. Either way the result is certified by a
/// zero winding count over the region right of `sigma + 2e-6` that could
/// hold competitors (any root with `Re z >= sigma` satisfies
/// `|Im z| <= |z + 1| = zeta e^{-h Re z}`).
pub fn dominant_root(p: &QuasiPoly) -> Result<(f64, f64), SpectrumError> {
    let h = p.delay;
    let critical_gain = (p.gain - 1.0).abs() < 1e-12;
    let band = 1e-3 * PI / h;

    let mut candidate: Option<Complex64> = None;
    if critical_gain && h >= 1.0 {
        let spec = roots_in_strips(p, 0, 1e-9)?;
        let (re, im) = spec.dominant_pair();
        candidate = Some(Complex64::new(re, im));
    } else {
        let mut im_top = 2.0 * PI / h + p.gain + 1.0;
        for _ in 0..6 {
            let left = strip_left_extent(h, p.gain, im_top);
            let rect = Rect::new(-left, p.gain.max(1.0) + 1.0, -band, im_top);
            let mut found = Vec::new();
            find_roots_in_rect(p, rect, &mut found)?;
            if let Some(best) = found.iter().max_by(|a, b| a.re.total_cmp(&b.re)) {
                candidate = Some(*best);
                break;
            }
            im_top *= 2.0;
        }
    }
    let mut best = candidate.ok_or_else(|| SpectrumError::NumericalFailure {
        what: "no root found in the initial search region".to_string(),
    })?;

    // Certify: no roots strictly right of best.re + margin. The left edge
    // is only ever nudged rightward (further from the candidate), so the
    // candidate itself can never leak into the counting box.
    for _ in 0..4 {
        let sigma = best.re;
        let im_cap = p.gain * (-sigma * h).exp() + 1.0;
        let mut counted = None;
        for widen in 0..4 {
            let cert = Rect::new(
                sigma + DOMINANT_MARGIN * (1.0 + widen as f64),
                p.gain.max(1.0) + 1.0,
                -band,
                im_cap + 0.7e-4 * widen as f64,
            );
            match count_roots_rect(p, cert, 1_000) {
                Ok(c) => {
                    counted = Some((c, cert));
                    break;
                }
                Err(SpectrumError::RootOnBoundary { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        let (c, cert) = counted.ok_or_else(|| SpectrumError::NumericalFailure {
            what: "certification boundary kept grazing a root".to_string(),
        })?;
        if c == 0 {
            let omega = if best.im.abs() < 1e-10 { 0.0 } else { best.im.abs() };
            return Ok((sigma, omega));
        }
        // A more dominant root exists: pull it out and re-certify.
        let mut found = Vec::new();
        find_roots_in_rect(p, cert, &mut found)?;
        found.retain(|r| r.re > cert.re_lo);
        let better = found
            .iter()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .copied()
            .ok_or_else(|| SpectrumError::NumericalFailure {
                what: "certification count positive but enumeration empty".to_string(),
            })?;
        best = better;
    }
    Err(SpectrumError::NumericalFailure {
        what: "dominant-root certification did not stabilize".to_string(),
    })
}

/// Check the floor `min |p| >= pi^2/(beta h^2)` over the rectangle grid
/// `Re z in [-pi^2/(alpha h^3), 0] x Im z in [0, 2 pi/h]` at critical gain,
/// with `n_s x n_a` inclusive grid points. Requires `alpha > 2`, `h >= 1`.
pub fn verify_modulus_floor(
    h: f64,
    alpha: f64,
    n_s: usize,
    n_a: usize,
) -> Result<BoundCheck, SpectrumError> {
    if !(alpha > 2.0) {
        return Err(SpectrumError::InvalidParameter {
            what: format!("alpha must exceed 2, got {alpha}"),
        });
    }
    if !(h >= 1.0) {
        return Err(SpectrumError::InvalidParameter {
            what: format!("delay must be >= 1, got {h}"),
        });
    }
    if n_s < 2 || n_a < 2 {
        return Err(SpectrumError::InvalidParameter {
            what: "grid needs at least 2 points per axis".to_string(),
        });
    }
    let p = QuasiPoly::new(h, 1.0);
    let beta = (2.0 * alpha + 1.0) / (alpha - 2.0);
    let bound = PI * PI / (beta * h * h);
    let a_left = -PI * PI / (alpha * h * h * h);
    let s_grid = linspace(0.0, 2.0 * PI / h, n_s);
    let a_grid = linspace(a_left, 0.0, n_a);
    let mut min_observed = f64::INFINITY;
    for &a in &a_grid {
        for &s in &s_grid {
            let v = p.eval(Complex64::new(a, s)).norm();
            if v < min_observed {
                min_observed = v;
            }
        }
    }
    Ok(BoundCheck {
        alpha,
        beta,
        grid: format!(
            "{n_s}x{n_a} inclusive grid, s in [0, 2pi/h], a in [{a_left:e}, 0]"
        ),
        min_observed,
        bound,
        ok: min_observed >= bound,
    })
}

/// Evaluate the modulus sandwich at `a = -pi^2/(alpha h^3)` for each
/// `s >= 2 pi / h` in `s_grid`:
/// `max(s-3, 0) < sqrt((1+a)^2 + s^2) - e^{-a h} <= |p(a+is)| < s + 3`.
pub fn verify_modulus_sandwich(
    h: f64,
    alpha: f64,
    s_grid: &[f64],
) -> Result<Vec<SandwichRow>, SpectrumError> {
    if !(alpha > 2.0) {
        return Err(SpectrumError::InvalidParameter {
            what: format!("alpha must exceed 2, got {alpha}"),
        });
    }
    if !(h >= 1.0) {
        return Err(SpectrumError::InvalidParameter {
            what: format!("delay must be >= 1, got {h}"),
        });
    }
    let p = QuasiPoly::new(h, 1.0);
    let a = -PI * PI / (alpha * h * h * h);
    let s_min = 2.0 * PI / h;
    let mut rows = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if s < s_min - 1e-12 {
            return Err(SpectrumError::InvalidParameter {
                what: format!("s = {s} below the sandwich domain s >= 2pi/h = {s_min}"),
            });
        }
        let abs_p = p.eval(Complex64::new(a, s)).norm();
        let lower = ((1.0 + a) * (1.0 + a) + s * s).sqrt() - (-a * h).exp();
        let upper = s + 3.0;
        let ok = (s - 3.0).max(0.0) < lower && lower <= abs_p && abs_p < upper;
        rows.push(SandwichRow {
            s,
            a,
            abs_p,
            lower,
            upper,
            ok,
        });
    }
    Ok(rows)
}

/// CSV rendering of sandwich rows (header `s,a,abs_p,lower,upper,ok`).
pub fn sandwich_csv(rows: &[SandwichRow]) -> String {
    let mut out = String::from("s,a,abs_p,lower,upper,ok\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            crate::format::sig15(r.s),
            crate::format::sig15(r.a),
            crate::format::sig15(r.abs_p),
            crate::format::sig15(r.lower),
            crate::format::sig15(r.upper),
            r.ok
        ));
    }
    out
}

/// For each delay (ascending, all `>= 5`), the dominant decay rate
/// `sigma(h)` at critical gain and the ratio `sigma * 2 h^3 / pi^2`, which
/// approaches -1 as `h` grows.
pub fn asymptotic_ratio_table(h_grid: &[f64]) -> Result<Vec<(f64, f64, f64)>, SpectrumError> {
    if h_grid.windows(2).any(|w| w[0] >= w[1]) || h_grid.iter().any(|&h| h < 5.0) {
        return Err(SpectrumError::InvalidParameter {
            what: "delay grid must be ascending with every h >= 5".to_string(),
        });
    }
    let mut rows = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let (sigma, _) = dominant_root(&QuasiPoly::new(h, 1.0))?;
        rows.push((h, sigma, sigma * 2.0 * h * h * h / (PI * PI)));
    }
    Ok(rows)
}
