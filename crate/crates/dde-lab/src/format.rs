//! Deterministic numeric formatting for machine-readable outputs.
//!
//! Every float written to a CSV or JSON artifact goes through [`sig15`]:
//! 15 significant digits in lowercase scientific notation. The formatting
//! is platform-independent (pure binary-to-decimal conversion, no locale),
//! so reruns with identical inputs produce byte-identical files.

/// Render `x` with 15 significant digits, e.g. `-3.71355113482000e-5`.
/// Negative zero is normalized to positive zero.
pub fn sig15(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.14e}")
}
