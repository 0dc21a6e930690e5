//! The `(mu, nu)` stability chart for `x'(t) = -x(t) + zeta f(x(t-h))`
//! with normalized feedback (`f'(0) = -1`).
//!
//! Coordinates: `mu = 1/zeta`, `nu = e^{-h}/zeta`, so `0 < nu <= mu` with
//! `nu = mu` on the zero-delay axis. Three curves organize the chart:
//!
//! * `nu1(mu)` — the local-stability boundary of the zero equilibrium:
//!   below it the linearization has a root in the open right half plane.
//! * `nu2(mu)` — above this curve global attraction of the origin is proved
//!   by a contraction argument (`nu2 = (mu - mu^2)/(1 + mu^2)`).
//! * `nu3(mu)` — a logarithmic strengthening, `nu3 = ln(1 + nu2)`, proved
//!   global by a refined estimate; `nu3 <= nu2` pointwise, so `nu2` decides
//!   first in the classification precedence below.
//!
//! Classification precedence (first match wins): absolute stability
//! (`mu >= 1`, i.e. `zeta <= 1`), proved-global above `nu2`, proved-global
//! above `nu3`, proved-global in the near-critical wedge (gain within
//! `epsilon` of 1 and delay below `K (zeta-1)^{-1/8}`), locally stable but
//! unresolved (above `nu1`), locally unstable (at or below `nu1`).

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("invalid chart coordinates: mu = {mu}, nu = {nu} (need 0 < nu <= mu)")]
    InvalidCoordinates { mu: f64, nu: f64 },
    #[error("{param} = {value} outside domain {domain}")]
    OutOfDomain {
        param: &'static str,
        value: f64,
        domain: &'static str,
    },
}

/// A point of parameter space carried in both native and chart coordinates.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParameterPoint {
    pub zeta: f64,
    pub delay: f64,
    pub mu: f64,
    pub nu: f64,
}

/// Stability classification of a parameter point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    /// `zeta <= 1`: globally stable for every delay.
    AbsolutelyStable,
    /// `nu >= nu2(mu)`: globally stable by the contraction estimate.
    #[serde(rename = "ProvedGlobal_Nu2")]
    ProvedGlobalNu2,
    /// `nu > nu3(mu)`: globally stable by the logarithmic estimate.
    #[serde(rename = "ProvedGlobal_Nu3")]
    ProvedGlobalNu3,
    /// Near-critical gain with delay below `K (zeta-1)^{-1/8}`: globally
    /// stable by the near-critical theory.
    #[serde(rename = "ProvedGlobal_NearCritical")]
    ProvedGlobalNearCritical,
    /// Above the local boundary but in no proved-global region.
    LocallyStableUnresolved,
    /// At or below the local stability boundary.
    LocallyUnstable,
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegionLabel::AbsolutelyStable => "AbsolutelyStable",
            RegionLabel::ProvedGlobalNu2 => "ProvedGlobal_Nu2",
            RegionLabel::ProvedGlobalNu3 => "ProvedGlobal_Nu3",
            RegionLabel::ProvedGlobalNearCritical => "ProvedGlobal_NearCritical",
            RegionLabel::LocallyStableUnresolved => "LocallyStableUnresolved",
            RegionLabel::LocallyUnstable => "LocallyUnstable",
        };
        f.write_str(s)
    }
}

/// Parameters of the near-critical proved-global wedge: gain within
/// `epsilon` of critical and delay below `scale_k * (zeta - 1)^{-1/8}`.
#[derive(Clone, Copy, Debug)]
pub struct NearCriticalWedge {
    pub scale_k: f64,
    pub epsilon: f64,
}

impl Default for NearCriticalWedge {
    fn default() -> Self {
        NearCriticalWedge {
            scale_k: 1.0,
            epsilon: 0.05,
        }
    }
}

/// Map native parameters to chart coordinates.
pub fn to_mu_nu(zeta: f64, delay: f64) -> Result<ParameterPoint, RegionError> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(RegionError::OutOfDomain {
            param: "zeta",
            value: zeta,
            domain: "(0, inf)",
        });
    }
    if !(delay >= 0.0) || !delay.is_finite() {
        return Err(RegionError::OutOfDomain {
            param: "delay",
            value: delay,
            domain: "[0, inf)",
        });
    }
    Ok(ParameterPoint {
        zeta,
        delay,
        mu: 1.0 / zeta,
        nu: (-delay).exp() / zeta,
    })
}

/// Invert chart coordinates; requires `0 < nu <= mu`.
pub fn from_mu_nu(mu: f64, nu: f64) -> Result<ParameterPoint, RegionError> {
    if !(nu > 0.0) || !(nu <= mu) || !mu.is_finite() {
        return Err(RegionError::InvalidCoordinates { mu, nu });
    }
    Ok(ParameterPoint {
        zeta: 1.0 / mu,
        delay: (mu / nu).ln(),
        mu,
        nu,
    })
}

/// Local stability boundary `nu1(mu) = mu exp(-mu arccos(-mu)/sqrt(1-mu^2))`
/// on `0 <= mu < 1`. Points with `nu > nu1` have all characteristic roots in
/// the open left half plane.
pub fn nu1(mu: f64) -> Result<f64, RegionError> {
    if !(0.0..1.0).contains(&mu) {
        return Err(RegionError::OutOfDomain {
            param: "mu",
            value: mu,
            domain: "[0, 1)",
        });
    }
    let s = (1.0 - mu * mu).sqrt();
    Ok(mu * (-mu * (-mu).acos() / s).exp())
}

/// Proved-global curve `nu2(mu) = (mu - mu^2)/(1 + mu^2)` on `[0, 1]`.
pub fn nu2(mu: f64) -> Result<f64, RegionError> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(RegionError::OutOfDomain {
            param: "mu",
            value: mu,
            domain: "[0, 1]",
        });
    }
    Ok((mu - mu * mu) / (1.0 + mu * mu))
}

/// Proved-global curve `nu3(mu) = ln((1 + mu)/(1 + mu^2)) = ln(1 + nu2(mu))`.
pub fn nu3(mu: f64) -> Result<f64, RegionError> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(RegionError::OutOfDomain {
            param: "mu",
            value: mu,
            domain: "[0, 1]",
        });
    }
    Ok(((1.0 + mu) / (1.0 + mu * mu)).ln())
}

/// Classify a parameter point. Precedence: absolute stability, then the
/// proved-global certificates (nu2, nu3, near-critical wedge), then local
/// stability, then instability.
pub fn classify(p: &ParameterPoint, wedge: &NearCriticalWedge) -> RegionLabel {
    if p.mu >= 1.0 {
        return RegionLabel::AbsolutelyStable;
    }
    // Here 0 < mu < 1 (zeta > 1).
    let n2 = nu2(p.mu).expect("mu in (0,1)");
    if p.nu >= n2 {
        return RegionLabel::ProvedGlobalNu2;
    }
    let n3 = nu3(p.mu).expect("mu in (0,1)");
    if p.nu > n3 {
        return RegionLabel::ProvedGlobalNu3;
    }
    let excess = p.zeta - 1.0;
    if excess <= wedge.epsilon && p.delay < wedge.scale_k * excess.powf(-0.125) {
        return RegionLabel::ProvedGlobalNearCritical;
    }
    let n1 = nu1(p.mu).expect("mu in (0,1)");
    if p.nu > n1 {
        return RegionLabel::LocallyStableUnresolved;
    }
    RegionLabel::LocallyUnstable
}

/// A point classification in both coordinate systems, as written to disk.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Classification {
    pub zeta: f64,
    pub h: f64,
    pub mu: f64,
    pub nu: f64,
    pub label: RegionLabel,
}

/// Classify native parameters with the default near-critical wedge.
pub fn classify_point(zeta: f64, delay: f64) -> Result<Classification, RegionError> {
    let p = to_mu_nu(zeta, delay)?;
    Ok(Classification {
        zeta,
        h: delay,
        mu: p.mu,
        nu: p.nu,
        label: classify(&p, &NearCriticalWedge::default()),
    })
}

/// One row of the chart table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChartRow {
    pub mu: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
}

/// Tabulate the three curves over a grid of `mu` values in `[0, 1)`.
pub fn chart(mu_grid: &[f64]) -> Result<Vec<ChartRow>, RegionError> {
    mu_grid
        .iter()
        .map(|&mu| {
            Ok(ChartRow {
                mu,
                nu1: nu1(mu)?,
                nu2: nu2(mu)?,
                nu3: nu3(mu)?,
            })
        })
        .collect()
}

/// The delay at which the zero equilibrium loses local stability for a
/// given `zeta > 1`: `h*(zeta) = arccos(-1/zeta)/sqrt(zeta^2 - 1)`. At this
/// delay the characteristic function has the conjugate pair
/// `+/- i sqrt(zeta^2 - 1)` on the imaginary axis.
pub fn local_boundary_delay(zeta: f64) -> Result<f64, RegionError> {
    if !(zeta > 1.0) || !zeta.is_finite() {
        return Err(RegionError::OutOfDomain {
            param: "zeta",
            value: zeta,
            domain: "(1, inf)",
        });
    }
    Ok((-1.0 / zeta).acos() / (zeta * zeta - 1.0).sqrt())
}

/// The delay below which the contraction certificate applies for `zeta > 1`:
/// the solution of `nu(zeta, h) = nu2(1/zeta)`, in closed form
/// `ln(zeta + 1/zeta) - ln(zeta - 1)`.
pub fn nu2_boundary_delay(zeta: f64) -> Result<f64, RegionError> {
    if !(zeta > 1.0) || !zeta.is_finite() {
        return Err(RegionError::OutOfDomain {
            param: "zeta",
            value: zeta,
            domain: "(1, inf)",
        });
    }
    Ok((zeta + 1.0 / zeta).ln() - (zeta - 1.0).ln())
}
