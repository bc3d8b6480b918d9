//! The standard double bubble in `R^n`: three spherical caps meeting at 120
//! degrees along an `(n-2)`-sphere, solved for prescribed volumes.
//!
//! Parameterization: put the junction at `(0, rho)`. The three generating
//! arcs are circles with centers on the axis; their tangent directions at the
//! junction, pointing away from it, are
//!
//! ```text
//!   left cap:   5 pi/6 + beta
//!   interface:  -pi/2  + beta
//!   right cap:   pi/6  + beta
//! ```
//!
//! so the 120 degree angles hold exactly by construction and `(rho, beta)`
//! are the only unknowns; Newton drives the two enclosed volumes to their
//! targets. `beta = 0` gives the flat interface; the curvature relation
//! `1/r0 = 1/r1 - 1/r2` then emerges as `sin(beta)/rho` on both sides.

use crate::junctions::RegionPressures;
use crate::newton::{newton_damped, NewtonError, NewtonOptions};
use crate::quad::{sin_power_integral, unit_ball_volume, unit_sphere_area, QuadError};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use std::f64::consts::PI;

/// Relative thickness of `1/r0` against `1/r1` below which the interface is
/// represented exactly as a flat disk.
pub const FLAT_SWITCH: f64 = 1e-9;

/// Quadrature tolerance for cap measures.
pub const QUAD_REL_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum BubbleError {
    #[error("volumes must be positive, got v1 = {v1}, v2 = {v2}")]
    NonPositiveVolume { v1: f64, v2: f64 },
    #[error("cap parameters out of range: n = {n}, r = {r}, alpha = {alpha}")]
    BadCap { n: u32, r: f64, alpha: f64 },
    #[error("dimension n = {0} is below 3")]
    Dimension(u32),
    #[error("quadrature failure: {0}")]
    Quad(#[from] QuadError),
    #[error("volume solve failed: {0}")]
    Solve(#[from] NewtonError),
}

/// Lateral area and enclosed slab volume of a spherical cap in `R^n`.
///
/// For a sphere of radius `r` and polar half-angle `alpha` about the cap
/// pole, the cap hypersurface measures
/// `sigma_{n-2} r^(n-1) int_0^alpha sin^(n-2)` and the solid it bounds
/// against the cutting hyperplane measures `v_{n-1} r^n int_0^alpha sin^n`.
pub fn cap_measures(n: u32, r: f64, alpha: f64) -> Result<(f64, f64), BubbleError> {
    if n < 3 {
        return Err(BubbleError::Dimension(n));
    }
    if !(r > 0.0) || !(alpha > 0.0) || alpha > PI + 1e-12 {
        return Err(BubbleError::BadCap { n, r, alpha });
    }
    let alpha = alpha.min(PI);
    let lateral =
        unit_sphere_area(n - 2) * r.powi(n as i32 - 1) * sin_power_integral(n - 2, alpha, QUAD_REL_TOL)?;
    let slab =
        unit_ball_volume(n - 1) * r.powi(n as i32) * sin_power_integral(n, alpha, QUAD_REL_TOL)?;
    Ok((lateral, slab))
}

/// One cap of a standard bubble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CapGeometry {
    Spherical {
        r: f64,
        /// Polar half-angle about the pole on the axis.
        alpha: f64,
        /// Axis position of the sphere center.
        center_x: f64,
        /// Hypersurface measure of the cap.
        area: f64,
    },
    /// Equal-volume interface: an (n-1)-disk of the junction radius.
    FlatDisk { radius: f64, area: f64 },
}

impl CapGeometry {
    pub fn area(&self) -> f64 {
        match self {
            CapGeometry::Spherical { area, .. } => *area,
            CapGeometry::FlatDisk { area, .. } => *area,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, CapGeometry::FlatDisk { .. })
    }

    /// Signed curvature `1/r`, zero for the flat disk.
    pub fn curvature_magnitude(&self) -> f64 {
        match self {
            CapGeometry::Spherical { r, .. } => 1.0 / r,
            CapGeometry::FlatDisk { .. } => 0.0,
        }
    }
}

/// A solved standard double bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardBubble {
    pub n: u32,
    /// Junction (n-2)-sphere radius.
    pub rho: f64,
    /// Junction tilt; zero exactly when the volumes agree.
    pub beta: f64,
    /// Left exterior cap, interface, right exterior cap.
    pub caps: [CapGeometry; 3],
    pub pressures: RegionPressures,
    /// Achieved volumes `(v1, v2)`.
    pub volumes: (f64, f64),
    pub total_area: f64,
    /// `|1/r0 - (1/r1 - 1/r2)|` with the interface curvature signed toward
    /// region 2; a consistency check of the construction, not imposed.
    pub cocycle_residual: f64,
    /// Relative volume residuals against the targets.
    pub volume_residuals: (f64, f64),
    pub iterations: usize,
}

/// Geometry of the `(rho, beta)` construction, before volume matching.
struct Shape {
    r1: f64,
    alpha1: f64,
    c1: f64,
    r2: f64,
    alpha2: f64,
    c2: f64,
    /// `None` for the flat interface.
    interface: Option<(f64, f64, f64)>, // (r0, alpha0, c0)
    v1: f64,
    v2: f64,
}

fn shape(n: u32, rho: f64, beta: f64) -> Result<Shape, BubbleError> {
    let t1 = 5.0 * PI / 6.0 + beta;
    let t2 = PI / 6.0 + beta;
    // Radii from the tangent directions: the normal line at the junction
    // crosses the axis at the cap center.
    let r1 = rho / t1.cos().abs();
    let c1 = rho * t1.tan();
    let r2 = rho / t2.cos().abs();
    let c2 = rho * t2.tan();
    let alpha1 = (c1 / r1).clamp(-1.0, 1.0).acos();
    let alpha2 = (-c2 / r2).clamp(-1.0, 1.0).acos();

    let (_, slab1) = cap_measures(n, r1, alpha1)?;
    let (_, slab2) = cap_measures(n, r2, alpha2)?;

    let h1 = (beta - PI / 6.0).cos() / rho;
    let flat = beta.sin().abs() / rho < FLAT_SWITCH * h1;
    let (interface, bulge_signed) = if flat {
        (None, 0.0)
    } else {
        let r0 = rho / beta.sin().abs();
        let alpha0 = beta.abs();
        let c0 = -rho / beta.tan();
        let (_, bulge) = cap_measures(n, r0, alpha0)?;
        (Some((r0, alpha0, c0)), beta.signum() * bulge)
    };

    Ok(Shape {
        r1,
        alpha1,
        c1,
        r2,
        alpha2,
        c2,
        interface,
        v1: slab1 + bulge_signed,
        v2: slab2 - bulge_signed,
    })
}

/// Solve the standard double bubble enclosing volumes `(v1, v2)` in `R^n`.
pub fn solve_standard(n: u32, v1: f64, v2: f64, tol: f64) -> Result<StandardBubble, BubbleError> {
    if n < 3 {
        return Err(BubbleError::Dimension(n));
    }
    if !(v1 > 0.0) || !(v2 > 0.0) {
        return Err(BubbleError::NonPositiveVolume { v1, v2 });
    }

    // Initial guess: one round ball of the total volume split by a diameter
    // plane; the junction radius starts at the ball radius.
    let total = v1 + v2;
    let ball_r = (total / unit_ball_volume(n)).powf(1.0 / f64::from(n));
    let x0 = [ball_r, 0.0];

    let beta_cap = PI / 3.0 - 1e-9;
    let residual = |x: &[f64]| -> Result<Vec<f64>, String> {
        let (rho, beta) = (x[0], x[1]);
        if !(rho > 0.0) || beta.abs() >= beta_cap {
            return Err(format!("outside parameter domain: rho = {rho}, beta = {beta}"));
        }
        let s = shape(n, rho, beta).map_err(|e| e.to_string())?;
        Ok(vec![(s.v1 - v1) / v1, (s.v2 - v2) / v2])
    };

    let opts = NewtonOptions { tol, max_iter: 100, ..Default::default() };
    let sol = newton_damped(residual, &x0, &opts)?;
    let (rho, beta) = (sol.x[0], sol.x[1]);
    let s = shape(n, rho, beta)?;

    let (lat1, _) = cap_measures(n, s.r1, s.alpha1)?;
    let (lat2, _) = cap_measures(n, s.r2, s.alpha2)?;
    let cap1 = CapGeometry::Spherical { r: s.r1, alpha: s.alpha1, center_x: s.c1, area: lat1 };
    let cap2 = CapGeometry::Spherical { r: s.r2, alpha: s.alpha2, center_x: s.c2, area: lat2 };
    let interface = match s.interface {
        None => CapGeometry::FlatDisk {
            radius: rho,
            area: unit_ball_volume(n - 1) * rho.powi(n as i32 - 1),
        },
        Some((r0, alpha0, c0)) => {
            let (lat0, _) = cap_measures(n, r0, alpha0)?;
            CapGeometry::Spherical { r: r0, alpha: alpha0, center_x: c0, area: lat0 }
        }
    };

    let h1 = (beta - PI / 6.0).cos() / rho;
    let h2 = (beta + PI / 6.0).cos() / rho;
    let pressures = RegionPressures::new(h1, h2).expect("positive pressures inside beta domain");

    // Interface curvature signed toward region 2 must match H1 - H2.
    let k0_signed = match s.interface {
        None => 0.0,
        Some((r0, _, _)) => beta.signum() / r0,
    };
    let cocycle_residual = (k0_signed - (h1 - h2)).abs();

    let total_area = cap1.area() + cap2.area() + interface.area();

    Ok(StandardBubble {
        n,
        rho,
        beta,
        caps: [cap1, interface, cap2],
        pressures,
        volumes: (s.v1, s.v2),
        total_area,
        cocycle_residual,
        volume_residuals: ((s.v1 - v1) / v1, (s.v2 - v2) / v2),
        iterations: sol.iterations,
    })
}

/// Closed-form equal-volume standard bubble in `R^3`: outer caps of radius
/// `r` spanning polar angle `2 pi/3`, flat disk of radius `r sqrt(3)/2`.
/// Returns `(r, rho, total_area)` for region volume `v` each.
pub fn equal_volume_r3_oracle(v: f64) -> (f64, f64, f64) {
    // Cap solid volume pi h^2 (3r - h)/3 with h = 3r/2 equals 9 pi r^3 / 8.
    let r = (8.0 * v / (9.0 * PI)).powf(1.0 / 3.0);
    let rho = r * 3.0_f64.sqrt() / 2.0;
    let total_area = 27.0 * PI / 4.0 * r * r;
    (r, rho, total_area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{unit_ball_volume, unit_sphere_area};
    use approx::assert_relative_eq;

    #[test]
    fn full_sphere_measures() {
        let (area, vol) = cap_measures(3, 1.0, PI).unwrap();
        assert_relative_eq!(area, 4.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(vol, 4.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn hemisphere_measures() {
        let (area, vol) = cap_measures(3, 1.0, PI / 2.0).unwrap();
        assert_relative_eq!(area, 2.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(vol, 2.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn full_ball_matches_gamma_formulas() {
        for n in 3..=10u32 {
            for r in [0.7, 1.0, 1.9] {
                let (area, vol) = cap_measures(n, r, PI).unwrap();
                let exact_area = unit_sphere_area(n - 1) * r.powi(n as i32 - 1);
                let exact_vol = unit_ball_volume(n) * r.powi(n as i32);
                assert_relative_eq!(area, exact_area, max_relative = 1e-12);
                assert_relative_eq!(vol, exact_vol, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn r3_slab_volume_closed_form() {
        // pi h^2 (3r - h) / 3 with h = r (1 - cos alpha).
        for (r, alpha) in [(1.0, 0.8), (2.3, 2.0), (0.5, 2.9)] {
            let (_, vol) = cap_measures(3, r, alpha).unwrap();
            let h = r * (1.0 - alpha.cos());
            assert_relative_eq!(vol, PI * h * h * (3.0 * r - h) / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_caps() {
        assert!(cap_measures(2, 1.0, 1.0).is_err());
        assert!(cap_measures(3, 0.0, 1.0).is_err());
        assert!(cap_measures(3, 1.0, 0.0).is_err());
        assert!(cap_measures(3, 1.0, 4.0).is_err());
    }

    #[test]
    fn equal_volumes_r3_closed_form() {
        // Verify the oracle itself by quadrature before using it: the outer
        // cap of the equal-volume bubble spans polar angle 2 pi/3 and its
        // solid slab is the region volume.
        let (r, rho, total_area) = equal_volume_r3_oracle(1.0);
        let (lat, slab) = cap_measures(3, r, 2.0 * PI / 3.0).unwrap();
        assert_relative_eq!(slab, 1.0, max_relative = 1e-12);

        let disk_area = PI * rho * rho;
        assert_relative_eq!(2.0 * lat + disk_area, total_area, max_relative = 1e-12);

        let b = solve_standard(3, 1.0, 1.0, 1e-12).unwrap();
        assert!(b.caps[1].is_flat(), "equal volumes must give a flat interface");
        assert_relative_eq!(b.rho, rho, max_relative = 1e-9);
        match (b.caps[0], b.caps[2]) {
            (CapGeometry::Spherical { r: r1, alpha: a1, .. }, CapGeometry::Spherical { r: r2, alpha: a2, .. }) => {
                assert_relative_eq!(r1, r, max_relative = 1e-9);
                assert_relative_eq!(r2, r, max_relative = 1e-9);
                assert_relative_eq!(a1, 2.0 * PI / 3.0, max_relative = 1e-9);
                assert_relative_eq!(a2, 2.0 * PI / 3.0, max_relative = 1e-9);
            }
            _ => panic!("outer caps must be spherical"),
        }
        assert_relative_eq!(b.total_area, total_area, max_relative = 1e-9);
        assert!(b.beta.abs() < 1e-10);
    }

    #[test]
    fn unequal_volumes_pressure_ordering() {
        let b = solve_standard(3, 1.0, 2.0, 1e-10).unwrap();
        assert!(
            b.pressures.h1() > b.pressures.h2(),
            "smaller region must have larger pressure"
        );
        assert!(b.volume_residuals.0.abs() < 1e-8);
        assert!(b.volume_residuals.1.abs() < 1e-8);
        assert!(b.cocycle_residual < 1e-9);
        assert!(!b.caps[1].is_flat());
    }

    #[test]
    fn scaling_covariance() {
        let a = solve_standard(3, 1.0, 1.0, 1e-11).unwrap();
        let b = solve_standard(3, 8.0, 8.0, 1e-11).unwrap();
        assert_relative_eq!(b.rho, 2.0 * a.rho, max_relative = 1e-8);
        assert_relative_eq!(b.total_area, 4.0 * a.total_area, max_relative = 1e-8);
        match (a.caps[0], b.caps[0]) {
            (CapGeometry::Spherical { r: ra, .. }, CapGeometry::Spherical { r: rb, .. }) => {
                assert_relative_eq!(rb, 2.0 * ra, max_relative = 1e-8);
            }
            _ => panic!("outer caps must be spherical"),
        }
    }

    #[test]
    fn higher_dimensions_solve() {
        for n in 4..=8u32 {
            let b = solve_standard(n, 1.0, 3.0, 1e-10).unwrap();
            assert!(b.volume_residuals.0.abs() < 1e-8, "n = {n}");
            assert!(b.pressures.h1() > b.pressures.h2());
            assert!(b.cocycle_residual < 1e-9);
        }
    }

    #[test]
    fn junction_tangents_meet_at_120_degrees() {
        let b = solve_standard(4, 1.0, 2.5, 1e-10).unwrap();
        // Tangent directions away from the junction by construction.
        let t1 = 5.0 * PI / 6.0 + b.beta;
        let t0 = -PI / 2.0 + b.beta;
        let t2 = PI / 6.0 + b.beta;
        let r = crate::junctions::triple_angle_residual([
            crate::wrap_angle(t1),
            crate::wrap_angle(t0),
            crate::wrap_angle(t2),
        ]);
        assert!(r < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_volumes() {
        assert!(matches!(
            solve_standard(3, 0.0, 1.0, 1e-10),
            Err(BubbleError::NonPositiveVolume { .. })
        ));
    }
}
