//! Numerical machinery for constant-mean-curvature hypersurfaces of revolution
//! in `R^n` and for double bubbles built from them.
//!
//! The library works with generating curves in the upper half plane: a curve
//! `(x(t), y(t))` parameterized by arc length, with `theta(t)` the tangent
//! angle above the horizontal, traced out by the Delaunay ODE system. Rotating
//! such a curve about the axis `y = 0` produces a hypersurface whose mean
//! curvature `H` (average of principal curvatures, so a sphere of radius `r`
//! has `H = 1/r`) is constant. Modules:
//!
//! - [`delaunay`]: the ODE system, the conserved force, curve classification,
//!   and adaptive tracing with event detection.
//! - [`axis_map`]: the map sending a curve point to the axis intersection of
//!   its normal line, preimage/separating-set audits, and vertex rotation
//!   notches.
//! - [`junctions`]: triple-junction residuals (120 degree meeting, curvature
//!   cocycle, force balance) and outer-boundary consistency.
//! - [`standard_bubble`]: spherical-cap measures by quadrature and the
//!   standard double bubble solver for arbitrary dimension and volumes.
//! - [`lemma_lab`]: randomized numerical verification of the geometric
//!   comparison lemmas used in double-bubble instability arguments.
//! - [`config_audit`]: tree-of-bands configurations, realization by shooting,
//!   and the combined instability audit.

pub mod axis_map;
pub mod config_audit;
pub mod delaunay;
pub mod junctions;
pub mod lemma_lab;
pub mod newton;
pub mod ode;
pub mod quad;
pub mod standard_bubble;

pub use axis_map::{AxisPoint, AxisProfile};
pub use config_audit::{AuditReport, ConfigTree, Configuration};
pub use delaunay::{
    CurveState, DelaunayClass, DelaunayParams, GeneratingCurve, StopSpec, TraceOptions,
};
pub use junctions::{RegionPressures, VertexGeometry};
pub use lemma_lab::{LemmaReport, SuiteConfig};
pub use standard_bubble::{CapGeometry, StandardBubble};

/// Wrap an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi);
    if r == 0.0 {
        std::f64::consts::PI
    } else {
        r - std::f64::consts::PI
    }
}

#[cfg(test)]
mod tests {
    use super::wrap_angle;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(2.5 * PI) - 0.5 * PI).abs() < 1e-12);
        assert!((wrap_angle(-2.5 * PI) + 0.5 * PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
        assert_eq!(wrap_angle(-2.0), -2.0);
    }
}
