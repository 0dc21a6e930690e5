//! Minimal double-double ("compensated") arithmetic.
//!
//! A [`Dd`] represents an unevaluated sum `hi + lo` of two `f64` values with
//! `|lo| <= ulp(hi) / 2`, giving roughly 31 significant decimal digits. Only
//! the operations needed by the exact piecewise representation of the
//! fundamental solution are implemented: addition, multiplication, division
//! by a double, and `exp(-x)` for moderate `x >= 0`.
//!
//! Products use `f64::mul_add` for the exact low part, so this module relies
//! on a correctly rounded fused multiply-add (hardware FMA on all supported
//! targets).

/// Double-double number: value is `hi + lo`, normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Error-free sum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free sum assuming `|a| >= |b|`.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Error-free product: returns `(p, e)` with `p = fl(a * b)` and `a * b = p + e`.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Normalizing constructor: `hi` and `lo` may overlap.
    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        let (s1, mut e1) = two_sum(self.hi, rhs.hi);
        let (s2, e2) = two_sum(self.lo, rhs.lo);
        e1 += s2;
        let (s1, mut e1) = quick_two_sum(s1, e1);
        e1 += e2;
        let (hi, lo) = quick_two_sum(s1, e1);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn mul(self, rhs: Dd) -> Dd {
        let (p, e0) = two_prod(self.hi, rhs.hi);
        let (c1, e1) = two_prod(self.hi, rhs.lo);
        let (c2, e2) = two_prod(self.lo, rhs.hi);
        // Accumulate the cross terms with error-free sums so that clean
        // low-order bits (e.g. lo * lo when everything else is exact)
        // survive into the result instead of being rounded away.
        let (s, f1) = two_sum(c1, c2);
        let (e, f2) = two_sum(e0, s);
        let tail = self.lo * rhs.lo + e1 + e2 + f1 + f2;
        let (hi, lo) = quick_two_sum(p, e);
        let (hi, lo) = quick_two_sum(hi, lo + tail);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, rhs: f64) -> Dd {
        let (p, mut e) = two_prod(self.hi, rhs);
        e += self.lo * rhs;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    /// Division by an ordinary double, with one Newton correction step.
    #[inline]
    pub fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = ((self.hi - p) - e) + self.lo;
        let q2 = r / d;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }
}

/// `exp(-x)` in double-double precision for `0 <= x <= 745`.
///
/// Argument reduction `exp(-x) = exp(-x / 2^m)^(2^m)` with `x / 2^m <= 1/64`,
/// Taylor series on the reduced argument, then `m` double-double squarings.
/// Accuracy is a few units in the 2^-104 place, far beyond what the
/// coefficient recurrence consuming it can observe.
pub fn exp_neg(x: f64) -> Dd {
    assert!(
        (0.0..=745.0).contains(&x),
        "exp_neg: argument {x} outside [0, 745]"
    );
    if x == 0.0 {
        return Dd::ONE;
    }
    // Reduce until |x| / 2^m <= 1/64.
    let mut m = 0u32;
    let mut scale = 1.0f64;
    while x * scale > 1.0 / 64.0 {
        scale *= 0.5;
        m += 1;
    }
    let r = Dd::from_f64(-x).mul_f64(scale);
    // Taylor sum of exp(r): terms fall below 2^-110 after ~14 terms at |r| <= 1/64.
    let mut sum = Dd::ONE;
    let mut term = Dd::ONE;
    for k in 1..=18 {
        term = term.mul(r).div_f64(k as f64);
        sum = sum.add(term);
    }
    for _ in 0..m {
        sum = sum.mul(sum);
    }
    sum
}
