//! Triple-junction validation: 120 degree meeting angles, the curvature
//! cocycle, force balancing, and outer-boundary consistency.
//!
//! Sign bookkeeping is the hazard here. Every arc carries its own tangent
//! angle and its curvature `H` with respect to its own normal
//! `N = (sin theta, -cos theta)`, which points to the right of the direction
//! of travel. At a vertex, quantities are re-signed into a common frame of
//! rays leaving the vertex: an arc that starts at the vertex keeps `(H, F)`,
//! an arc that ends there flips both. In that frame the normals turn
//! consistently about the vertex, the three curvatures of a valid junction
//! sum to zero, and the three forces then sum to zero as well.

use crate::delaunay::DelaunayParams;
use crate::wrap_angle;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use std::f64::consts::PI;

/// Which end of an arc sits at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcEnd {
    Start,
    Finish,
}

/// Sign of the limiting axis-map value along a vertical arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisSign {
    PlusInfinity,
    MinusInfinity,
}

/// Whether a vertex is the left or right attachment point of its boundary;
/// fixes the reference frame for rotation notches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexSide {
    Left,
    Right,
}

/// One arc's record at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentArc {
    /// Arc index in the owning configuration (informational for synthetic vertices).
    pub arc: usize,
    pub end: ArcEnd,
    /// The arc's own tangent angle at the vertex (direction of travel).
    pub tangent: f64,
    /// Mean curvature with respect to the arc's own normal.
    pub curvature: f64,
    /// Where this arc's end actually sits.
    pub endpoint: (f64, f64),
    /// Limiting axis-map sign when the arc is vertical at the vertex.
    pub limit_f: Option<AxisSign>,
}

impl IncidentArc {
    /// Direction of the ray leaving the vertex along this arc.
    pub fn outgoing_ray(&self) -> f64 {
        match self.end {
            ArcEnd::Start => wrap_angle(self.tangent),
            ArcEnd::Finish => wrap_angle(self.tangent + PI),
        }
    }

    /// Curvature re-signed into the outgoing-ray frame.
    pub fn curvature_outgoing(&self) -> f64 {
        match self.end {
            ArcEnd::Start => self.curvature,
            ArcEnd::Finish => -self.curvature,
        }
    }
}

/// A triple junction: position, the three incident arcs, and which side of
/// its boundary the vertex sits on. `incident[0]` is the reference arc (the
/// one continuing toward the root of the configuration).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexGeometry {
    pub position: (f64, f64),
    pub incident: [IncidentArc; 3],
    pub side: VertexSide,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MalformedVertex {
    #[error("arc {arc} endpoint ({x:.6}, {y:.6}) is {dist:.3e} away from the vertex")]
    PositionMismatch { arc: usize, x: f64, y: f64, dist: f64 },
    #[error("tangent rays are not mutually 120 degrees apart (residual {residual:.3e})")]
    NotTriple { residual: f64 },
    #[error("vertex below the axis: y = {0}")]
    BelowAxis(f64),
    #[error("arcs disagree on the ambient dimension")]
    MixedDimensions,
    #[error("vertical arc at a notch boundary carries no limiting axis sign")]
    AmbiguousVertical,
}

/// Residuals of the junction laws at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionResidual {
    /// Max deviation of the pairwise ray separations from 2 pi / 3.
    pub angle: f64,
    /// `|H_0 + H_1 + H_2|` in the outgoing frame.
    pub curvature: f64,
    /// `|F_0 + F_1 + F_2|` in the outgoing frame.
    pub force: f64,
}

/// Default tolerance for endpoint agreement at a vertex.
pub const POSITION_TOL: f64 = 1e-9;

/// Max deviation of the consecutive ray separations from 2 pi / 3.
///
/// With the rays sorted, the two ascending gaps both being 2 pi / 3 forces
/// the wrap-around gap as well, so this vanishes exactly on valid junctions.
pub fn triple_angle_residual(rays: [f64; 3]) -> f64 {
    let mut r = rays.map(wrap_angle);
    r.sort_by(f64::total_cmp);
    let gaps = [r[1] - r[0], r[2] - r[1]];
    gaps.iter()
        .map(|g| (g - 2.0 * PI / 3.0).abs())
        .fold(0.0, f64::max)
}

/// Evaluate angle, curvature-cocycle, and force-balance residuals at a vertex.
///
/// Forces are evaluated from the conserved-force formula at the vertex height
/// in the outgoing frame, so the force residual vanishes automatically when
/// the angle and cocycle residuals do.
pub fn junction_residual(
    v: &VertexGeometry,
    params: &[DelaunayParams; 3],
) -> Result<JunctionResidual, MalformedVertex> {
    let (px, py) = v.position;
    if !(py > 0.0) {
        return Err(MalformedVertex::BelowAxis(py));
    }
    let n = params[0].n();
    if params.iter().any(|p| p.n() != n) {
        return Err(MalformedVertex::MixedDimensions);
    }
    for inc in &v.incident {
        let (ex, ey) = inc.endpoint;
        let dist = ((ex - px).powi(2) + (ey - py).powi(2)).sqrt();
        if dist > POSITION_TOL {
            return Err(MalformedVertex::PositionMismatch { arc: inc.arc, x: ex, y: ey, dist });
        }
    }

    let rays = [
        v.incident[0].outgoing_ray(),
        v.incident[1].outgoing_ray(),
        v.incident[2].outgoing_ray(),
    ];
    let angle = triple_angle_residual(rays);

    let y_pow = py.powi(n as i32 - 2);
    let mut h_sum = 0.0;
    let mut f_sum = 0.0;
    for (inc, ray) in v.incident.iter().zip(rays) {
        let h_out = inc.curvature_outgoing();
        h_sum += h_out;
        f_sum += y_pow * (ray.cos() - h_out * py);
    }

    Ok(JunctionResidual { angle, curvature: h_sum.abs(), force: f_sum.abs() })
}

/// Pressures of the two enclosed regions and of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPressures {
    h1: f64,
    h2: f64,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("region pressures must be positive, got H1 = {h1}, H2 = {h2}")]
pub struct NonPositivePressure {
    pub h1: f64,
    pub h2: f64,
}

impl RegionPressures {
    pub fn new(h1: f64, h2: f64) -> Result<Self, NonPositivePressure> {
        if h1 > 0.0 && h2 > 0.0 {
            Ok(Self { h1, h2 })
        } else {
            Err(NonPositivePressure { h1, h2 })
        }
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// Interface pressure difference, `H1 - H2` exactly.
    pub fn h0(&self) -> f64 {
        self.h1 - self.h2
    }
}

/// Outcome of the shared-outer-boundary check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterBoundaryCheck {
    pub ok: bool,
    /// First offending pair of arc indices, with the mismatched quantity.
    pub witness: Option<OuterBoundaryWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterBoundaryWitness {
    pub first: usize,
    pub second: usize,
    pub quantity: String,
    pub values: (f64, f64),
}

/// All outer arcs of one component must share `(H, F)` within `tol`: they
/// are then parts of the same Delaunay hypersurface up to translation.
pub fn outer_boundary_check(arcs: &[(f64, f64)], tol: f64) -> OuterBoundaryCheck {
    if let Some(&(h0, f0)) = arcs.first() {
        for (i, &(h, f)) in arcs.iter().enumerate().skip(1) {
            if (h - h0).abs() > tol {
                return OuterBoundaryCheck {
                    ok: false,
                    witness: Some(OuterBoundaryWitness {
                        first: 0,
                        second: i,
                        quantity: "H".into(),
                        values: (h0, h),
                    }),
                };
            }
            if (f - f0).abs() > tol {
                return OuterBoundaryCheck {
                    ok: false,
                    witness: Some(OuterBoundaryWitness {
                        first: 0,
                        second: i,
                        quantity: "F".into(),
                        values: (f0, f),
                    }),
                };
            }
        }
    }
    OuterBoundaryCheck { ok: true, witness: None }
}

/// Convenience constructor for a synthetic vertex whose three arcs all start
/// at the vertex with the given tangents and curvatures.
pub fn synthetic_vertex(
    position: (f64, f64),
    tangents: [f64; 3],
    curvatures: [f64; 3],
) -> VertexGeometry {
    let mk = |i: usize| IncidentArc {
        arc: i,
        end: ArcEnd::Start,
        tangent: tangents[i],
        curvature: curvatures[i],
        endpoint: position,
        limit_f: None,
    };
    VertexGeometry {
        position,
        incident: [mk(0), mk(1), mk(2)],
        side: VertexSide::Left,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn dims(n: u32) -> [DelaunayParams; 3] {
        [
            DelaunayParams::new(n, 0.0).unwrap(),
            DelaunayParams::new(n, 0.0).unwrap(),
            DelaunayParams::new(n, 0.0).unwrap(),
        ]
    }

    #[test]
    fn balanced_junction_has_zero_residuals() {
        let v = synthetic_vertex(
            (0.0, 1.0),
            [FRAC_PI_2, FRAC_PI_2 + 2.0 * PI / 3.0, FRAC_PI_2 - 2.0 * PI / 3.0],
            [1.0, -0.4, -0.6],
        );
        let r = junction_residual(&v, &dims(3)).unwrap();
        assert_abs_diff_eq!(r.angle, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.curvature, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.force, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn balanced_junction_dimension_four() {
        let v = synthetic_vertex(
            (0.0, 1.0),
            [0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0],
            [1.0, -1.0, 0.0],
        );
        let r = junction_residual(&v, &dims(4)).unwrap();
        assert_abs_diff_eq!(r.angle, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.curvature, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.force, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn flags_non_triple_angles() {
        let v = synthetic_vertex((0.0, 1.0), [0.0, FRAC_PI_2, PI], [0.0, 0.0, 0.0]);
        let r = junction_residual(&v, &dims(3)).unwrap();
        assert_abs_diff_eq!(r.angle, PI / 6.0, epsilon = 1e-12);
        assert!(r.angle > 0.1);
    }

    #[test]
    fn finishing_arc_is_resigned() {
        // Same geometry as the balanced vertex, but the first arc recorded as
        // ending at the vertex: tangent points into the vertex, curvature flips.
        let base = synthetic_vertex(
            (0.0, 1.0),
            [FRAC_PI_2, FRAC_PI_2 + 2.0 * PI / 3.0, FRAC_PI_2 - 2.0 * PI / 3.0],
            [1.0, -0.4, -0.6],
        );
        let mut v = base;
        v.incident[0].end = ArcEnd::Finish;
        v.incident[0].tangent = FRAC_PI_2 + PI;
        v.incident[0].curvature = -1.0;
        let r = junction_residual(&v, &dims(3)).unwrap();
        assert_abs_diff_eq!(r.angle, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.curvature, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.force, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn position_mismatch_detected() {
        let mut v = synthetic_vertex((0.0, 1.0), [0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0], [0.0; 3]);
        v.incident[2].endpoint = (1e-3, 1.0);
        assert!(matches!(
            junction_residual(&v, &dims(3)),
            Err(MalformedVertex::PositionMismatch { arc: 2, .. })
        ));
    }

    #[test]
    fn randomized_junctions_balance_forces() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let n = rng.gen_range(3..=8u32);
            let y = rng.gen_range(0.2..2.0);
            let phi = rng.gen_range(-PI..PI);
            let h0 = rng.gen_range(-3.0..3.0);
            let h1 = rng.gen_range(-3.0..3.0);
            let v = synthetic_vertex(
                (rng.gen_range(-5.0..5.0), y),
                [phi, phi + 2.0 * PI / 3.0, phi - 2.0 * PI / 3.0],
                [h0, h1, -(h0 + h1)],
            );
            let r = junction_residual(&v, &dims(n)).unwrap();
            assert!(r.force < 1e-10, "force residual {} at n={n}", r.force);
        }
    }

    #[test]
    fn outer_boundary_consistency() {
        let same = [(1.0, 0.2), (1.0, 0.2)];
        assert!(outer_boundary_check(&same, 1e-9).ok);

        let diff = [(1.0, 0.2), (1.0, 0.3)];
        let check = outer_boundary_check(&diff, 1e-9);
        assert!(!check.ok);
        let w = check.witness.unwrap();
        assert_eq!((w.first, w.second), (0, 1));
        assert_eq!(w.quantity, "F");
    }

    #[test]
    fn pressures_require_positivity() {
        assert!(RegionPressures::new(1.0, 0.5).is_ok());
        assert!(RegionPressures::new(0.0, 0.5).is_err());
        let p = RegionPressures::new(1.5, 0.5).unwrap();
        assert_eq!(p.h0(), 1.0);
    }
}
