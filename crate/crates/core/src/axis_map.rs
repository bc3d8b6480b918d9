//! The normal-to-axis map and its machinery: per-arc profiles, preimage
//! root-finding, separating-set audits, and vertex rotation notches.
//!
//! For a curve point `p = (x, y)` with tangent angle `theta`, the normal line
//! through `p` meets the axis at `x + y tan(theta)`; vertical tangents map to
//! the single point at infinity of the compactified axis. Along an arc the
//! derivative of the map is `(n-1) F / (y^(n-2) cos^2 theta)`, so the map is
//! monotone with the sign of the force between vertical crossings, constant
//! exactly on sphere arcs, and identically infinite on vertical lines.

use crate::config_audit::{Attachment, Configuration};
use crate::delaunay::{CurveState, DelaunayClass, DelaunayParams, GeneratingCurve};
use crate::junctions::{AxisSign, MalformedVertex, VertexGeometry, VertexSide};
use crate::wrap_angle;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use std::f64::consts::{FRAC_PI_2, PI};

/// `|cos theta|` at or below this maps to the point at infinity.
pub const VERTICAL_TOL: f64 = 1e-10;

/// A point of the compactified axis `L ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisPoint {
    Finite(f64),
    Infinity,
}

impl AxisPoint {
    pub fn finite(&self) -> Option<f64> {
        match self {
            AxisPoint::Finite(x) => Some(*x),
            AxisPoint::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, AxisPoint::Infinity)
    }
}

impl std::fmt::Display for AxisPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AxisPoint::Finite(x) => write!(f, "{x}"),
            AxisPoint::Infinity => f.write_str("inf"),
        }
    }
}

/// Axis intersection of the normal line at a state.
pub fn axis_point(state: &CurveState) -> AxisPoint {
    axis_point_of(state.x, state.y, state.theta)
}

/// Axis intersection of the normal line through `(x, y)` for a tangent at
/// angle `theta`.
pub fn axis_point_of(x: f64, y: f64, theta: f64) -> AxisPoint {
    if theta.cos().abs() <= VERTICAL_TOL {
        AxisPoint::Infinity
    } else {
        AxisPoint::Finite(x + y * theta.tan())
    }
}

/// Closed-form derivative of the axis map along a curve:
/// `(n-1) F / (y^(n-2) cos^2 theta)`.
pub fn f_derivative(state: &CurveState, params: &DelaunayParams) -> Option<f64> {
    let cos_t = state.theta.cos();
    if cos_t.abs() <= VERTICAL_TOL || state.y <= 0.0 {
        return None;
    }
    let f = crate::delaunay::force(state, params).ok()?;
    let n = f64::from(params.n());
    Some((n - 1.0) * f / (state.y.powi(params.n() as i32 - 2) * cos_t * cos_t))
}

/// Limit of the axis map at a monotone-segment boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisLimit {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl AxisLimit {
    fn cmp_to(&self, x: f64) -> std::cmp::Ordering {
        match self {
            AxisLimit::Finite(v) => v.total_cmp(&x),
            AxisLimit::PlusInfinity => std::cmp::Ordering::Greater,
            AxisLimit::MinusInfinity => std::cmp::Ordering::Less,
        }
    }
}

/// A span between vertical crossings on which the axis map is monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSegment {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Sign of `df/dt` on the span: the sign of the force.
    pub direction: i8,
    pub lim_lo: AxisLimit,
    pub lim_hi: AxisLimit,
}

/// A vertical tangent crossing inside an arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalCrossing {
    pub t: f64,
    pub state: CurveState,
    /// Moving downward (`sin theta < 0`) while crossing the vertical.
    pub downward: bool,
    /// Strictly inside the arc (not at either endpoint).
    pub interior: bool,
}

/// Sampled axis-map data along one arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisProfile {
    pub samples: Vec<(f64, AxisPoint)>,
    pub monotone_segments: Vec<MonotoneSegment>,
    pub verticals: Vec<VerticalCrossing>,
    /// The constant value for Sphere-class arcs.
    pub constant: Option<f64>,
    pub is_vertical_line: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolutionError {
    #[error(
        "arc {arc} is too coarsely sampled for root bracketing: max tangent swing {max_dtheta:.3} rad per sample, need max step <= {required_max_step:.3e}"
    )]
    TooCoarse { arc: usize, max_dtheta: f64, required_max_step: f64 },
    #[error("candidate grid would need {points} points; increase the resolution spacing")]
    GridTooLarge { points: usize },
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
}

/// Largest tangent swing per sample for which vertical crossings are tracked
/// reliably.
const MAX_DTHETA: f64 = PI / 4.0;

/// Scale-normalized force threshold for treating an arc as a sphere (or a
/// vertical line) during audits. Realized configurations close only to the
/// shooting tolerance, so their sphere caps carry forces of that size; the
/// trace-time classification threshold of 1e-12 would misread them and the
/// runaway of the axis map near the axis tail would then fabricate preimage
/// points.
pub const AUDIT_CLASS_TOL: f64 = 1e-8;

/// Delaunay class at audit tolerance: `H` and `F` normalized by the starting
/// height before comparing against [`AUDIT_CLASS_TOL`].
pub fn audit_class(curve: &GeneratingCurve) -> DelaunayClass {
    let y0 = curve.first().y.max(1e-12);
    crate::delaunay::classify(
        curve.params.n(),
        curve.params.h() * y0,
        curve.force / y0.powi(curve.params.n() as i32 - 2),
        AUDIT_CLASS_TOL,
    )
}

/// Relative (to arc length) margin inside which a point counts as an
/// endpoint rather than an interior point.
const INTERIOR_MARGIN: f64 = 1e-6;

impl AxisProfile {
    pub fn new(curve: &GeneratingCurve) -> Result<Self, ResolutionError> {
        Self::build(curve, usize::MAX)
    }

    fn build(curve: &GeneratingCurve, arc_index: usize) -> Result<Self, ResolutionError> {
        let states = &curve.states;
        let samples: Vec<(f64, AxisPoint)> =
            states.iter().map(|s| (s.t, axis_point(s))).collect();

        let class = audit_class(curve);
        let is_vertical_line = class == DelaunayClass::VerticalHyperplane;
        if is_vertical_line {
            return Ok(Self {
                samples,
                monotone_segments: Vec::new(),
                verticals: Vec::new(),
                constant: None,
                is_vertical_line: true,
            });
        }

        let mut max_dtheta: f64 = 0.0;
        let mut max_dt: f64 = 0.0;
        for w in states.windows(2) {
            max_dtheta = max_dtheta.max((w[1].theta - w[0].theta).abs());
            max_dt = max_dt.max(w[1].t - w[0].t);
        }
        if max_dtheta > MAX_DTHETA {
            return Err(ResolutionError::TooCoarse {
                arc: arc_index,
                max_dtheta,
                required_max_step: 0.9 * max_dt * MAX_DTHETA / max_dtheta,
            });
        }

        let constant = if class == DelaunayClass::Sphere {
            // Robust center: median of the finite sample values.
            let mut vals: Vec<f64> = samples
                .iter()
                .filter_map(|(_, p)| p.finite())
                .collect();
            vals.sort_by(f64::total_cmp);
            vals.get(vals.len() / 2).copied()
        } else {
            None
        };

        let t0 = states[0].t;
        let t1 = states[states.len() - 1].t;
        let len = t1 - t0;
        let margin = INTERIOR_MARGIN * len.max(1e-9);

        // Vertical crossings: theta passes a half-integer multiple of pi.
        let mut verticals = Vec::new();
        for w in states.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let ka = ((a.theta - FRAC_PI_2) / PI).floor();
            let kb = ((b.theta - FRAC_PI_2) / PI).floor();
            if ka == kb {
                continue;
            }
            let k = ka.max(kb); // exactly one boundary crossed per sample step
            let target = FRAC_PI_2 + k * PI;
            let t_cross = bisect_theta(curve, a.t, b.t, target);
            let state = curve.state_at(t_cross);
            verticals.push(VerticalCrossing {
                t: t_cross,
                state,
                downward: state.theta.sin() < 0.0,
                interior: t_cross > t0 + margin && t_cross < t1 - margin,
            });
        }

        // Monotone segments between verticals; f runs to +/- infinity at each
        // vertical boundary according to the approach side.
        let direction = if curve.force > 0.0 { 1 } else if curve.force < 0.0 { -1 } else { 0 };
        let mut cut_ts: Vec<f64> = vec![t0];
        cut_ts.extend(verticals.iter().map(|v| v.t));
        cut_ts.push(t1);
        let mut monotone_segments = Vec::new();
        for w in cut_ts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo <= 2.0 * f64::EPSILON * (1.0 + hi.abs()) {
                continue;
            }
            let lim_at = |t_bound: f64, from_above: bool| -> AxisLimit {
                let is_vertical = verticals.iter().any(|v| v.t == t_bound);
                if is_vertical {
                    // f is monotone with the force sign, so it runs away from
                    // the vertical with that sign: an increasing f climbs out
                    // of -inf at a segment start and into +inf at a segment
                    // end, and conversely for a decreasing f.
                    match (direction, from_above) {
                        (1, false) => AxisLimit::MinusInfinity,
                        (1, true) => AxisLimit::PlusInfinity,
                        (-1, false) => AxisLimit::PlusInfinity,
                        (-1, true) => AxisLimit::MinusInfinity,
                        _ => AxisLimit::Finite(well_conditioned_f(curve, t_bound, from_above)),
                    }
                } else {
                    AxisLimit::Finite(well_conditioned_f(curve, t_bound, from_above))
                }
            };
            monotone_segments.push(MonotoneSegment {
                t_lo: lo,
                t_hi: hi,
                direction,
                lim_lo: lim_at(lo, false),
                lim_hi: lim_at(hi, true),
            });
        }

        Ok(Self {
            samples,
            monotone_segments,
            verticals,
            constant,
            is_vertical_line: false,
        })
    }
}

fn bisect_theta(curve: &GeneratingCurve, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    let sign_lo = (curve.state_at(lo).theta - target).signum();
    for _ in 0..100 {
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = curve.state_at(mid).theta - target;
        if v == 0.0 {
            return mid;
        }
        if v.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Axis value at (or just inside of) a segment boundary, stepping inward past
/// ill-conditioned near-vertical samples.
fn well_conditioned_f(curve: &GeneratingCurve, t_bound: f64, from_above: bool) -> f64 {
    let len = curve.length().max(1e-9);
    let mut offset = 0.0;
    for _ in 0..40 {
        let t = if from_above { t_bound - offset } else { t_bound + offset };
        let s = curve.state_at(t);
        if s.theta.cos().abs() > 1e-4 {
            if let AxisPoint::Finite(v) = axis_point(&s) {
                return v;
            }
        }
        offset = if offset == 0.0 { 1e-6 * len } else { offset * 2.0 };
    }
    let s = curve.state_at(t_bound);
    s.x + s.y * s.theta.tan()
}

// ---------------------------------------------------------------------------
// Rotation notches
// ---------------------------------------------------------------------------

/// Tolerance on the mutual 120 degree separation of the incident rays.
pub const NOTCH_ANGLE_TOL: f64 = 1e-6;
/// Angular distance to a notch boundary below which the vertical-limit rule
/// applies.
pub const NOTCH_BOUNDARY_TOL: f64 = 1e-9;

/// Rotation notch of a vertex, in counterclockwise pi/3 sectors relative to
/// the all-graphs reference position.
///
/// The reference arc is `incident[0]`; for a `Left` vertex its ray leaves
/// roughly leftward in the reference position, for a `Right` vertex roughly
/// rightward. An arc exactly at the vertical resolves by its limiting axis
/// value: `+inf` (or a vertical line) takes the smaller notch, `-inf` the
/// larger.
pub fn vertex_notch(v: &VertexGeometry) -> Result<i32, MalformedVertex> {
    let rays = [
        v.incident[0].outgoing_ray(),
        v.incident[1].outgoing_ray(),
        v.incident[2].outgoing_ray(),
    ];
    let residual = crate::junctions::triple_angle_residual(rays);
    if residual > NOTCH_ANGLE_TOL {
        return Err(MalformedVertex::NotTriple { residual });
    }

    let delta = match v.side {
        VertexSide::Left => wrap_angle(rays[0] - PI),
        VertexSide::Right => wrap_angle(rays[0]),
    };
    let r = (delta + PI / 6.0) / (PI / 3.0);
    let nearest = r.round();
    if (r - nearest).abs() * (PI / 3.0) < NOTCH_BOUNDARY_TOL {
        // A boundary position: exactly one incident arc is vertical.
        let vertical = v
            .incident
            .iter()
            .find(|inc| inc.outgoing_ray().cos().abs() < 1e-7);
        let sign = vertical.and_then(|inc| inc.limit_f);
        return match sign {
            Some(AxisSign::PlusInfinity) => Ok(nearest as i32 - 1),
            Some(AxisSign::MinusInfinity) => Ok(nearest as i32),
            None => Err(MalformedVertex::AmbiguousVertical),
        };
    }
    Ok(r.floor() as i32)
}

// ---------------------------------------------------------------------------
// Separating-set audit
// ---------------------------------------------------------------------------

/// A preimage point of one candidate axis value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreimagePoint {
    pub arc: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub interior: bool,
}

/// An arc wholly contained in a preimage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholeArcPreimage {
    pub arc: usize,
    /// Exemption reason when the separation theorem's conclusion covers the
    /// arc; `None` means the arc counts toward the separating set.
    pub exempt: Option<String>,
}

/// Result of sweeping one candidate axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub x: AxisPoint,
    pub preimages: Vec<PreimagePoint>,
    pub whole_arcs: Vec<WholeArcPreimage>,
    /// Whether removing the interior preimage points (and non-exempt whole
    /// arcs) disconnects the union of closed arcs.
    pub disconnects: bool,
}

/// A violated separating-set rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum SeparatingViolation {
    /// An arc that turns downward past the vertical carries two interior
    /// points with the same axis value.
    DownwardVerticalPair { arc: usize, x: f64, t1: f64, t2: f64 },
    /// An arc that is not part of a vertical line goes vertical twice with at
    /// least one interior vertical.
    TwiceVertical {
        arc: usize,
        verticals: Vec<f64>,
        witness_x: Option<f64>,
        witness_pair: Option<(f64, f64)>,
    },
    /// A same-value point set spanning several arc interiors, not confined
    /// to two circular caps, that separates the diagram. Candidates hitting
    /// the same arc set are merged; `occurrences` counts them.
    CrossArcSeparating { x: AxisPoint, points: Vec<PreimagePoint>, occurrences: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatingReport {
    pub resolution: f64,
    pub candidates: Vec<CandidateReport>,
    pub violations: Vec<SeparatingViolation>,
}

/// Sweep candidate axis values and audit the configuration's preimage sets.
pub fn separating_audit(
    config: &Configuration,
    resolution: f64,
) -> Result<SeparatingReport, ResolutionError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(ResolutionError::BadResolution(resolution));
    }

    let profiles: Vec<AxisProfile> = config
        .arcs
        .iter()
        .enumerate()
        .map(|(i, a)| AxisProfile::build(&a.curve, i))
        .collect::<Result<_, _>>()?;

    let scale = config.scale();
    let sphere_tol = 1e-6 * scale;

    // Critical values: well-conditioned endpoint values, sphere constants.
    let mut criticals: Vec<f64> = Vec::new();
    for (arc, profile) in profiles.iter().enumerate() {
        if let Some(c) = profile.constant {
            criticals.push(c);
            continue;
        }
        if profile.is_vertical_line {
            continue;
        }
        let curve = &config.arcs[arc].curve;
        for (t_bound, from_above) in [(curve.first().t, false), (curve.last().t, true)] {
            let v = well_conditioned_f(curve, t_bound, from_above);
            if v.is_finite() {
                criticals.push(v);
            }
        }
    }

    let (lo, hi) = if criticals.is_empty() {
        (-scale, scale)
    } else {
        let min = criticals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = criticals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = resolution.max(0.05 * (max - min)).max(0.5 * scale);
        (min - pad, max + pad)
    };
    let n_grid = ((hi - lo) / resolution).ceil() as usize + 1;
    if n_grid > 200_000 {
        return Err(ResolutionError::GridTooLarge { points: n_grid });
    }
    let mut values = criticals;
    for i in 0..n_grid {
        values.push(lo + resolution * i as f64);
    }
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())));

    let attachments = config.attachments();
    let base_components = component_count(config, &attachments, &Default::default());

    let mut candidates = Vec::new();
    let mut violations: Vec<SeparatingViolation> = Vec::new();
    let mut downward_flagged: std::collections::BTreeSet<usize> = Default::default();
    // Arc set -> index of the merged cross-arc violation.
    let mut cross_arc_seen: std::collections::BTreeMap<Vec<usize>, usize> = Default::default();
    // Arc -> first interior same-value pair seen, for twice-vertical witnesses.
    let mut pair_witness: std::collections::BTreeMap<usize, (f64, f64, f64)> = Default::default();

    let candidate_points: Vec<AxisPoint> = values
        .into_iter()
        .map(AxisPoint::Finite)
        .chain(std::iter::once(AxisPoint::Infinity))
        .collect();

    for cand in candidate_points {
        let mut preimages: Vec<PreimagePoint> = Vec::new();
        let mut whole_arcs: Vec<WholeArcPreimage> = Vec::new();

        for (arc, profile) in profiles.iter().enumerate() {
            let curve = &config.arcs[arc].curve;
            match cand {
                AxisPoint::Finite(xv) => {
                    if let Some(c) = profile.constant {
                        if (c - xv).abs() <= sphere_tol {
                            whole_arcs.push(WholeArcPreimage {
                                arc,
                                exempt: Some("sphere-centered-at-value".into()),
                            });
                        }
                        continue;
                    }
                    if profile.is_vertical_line {
                        continue;
                    }
                    for seg in &profile.monotone_segments {
                        if let Some(t) = segment_root(curve, seg, xv) {
                            let s = curve.state_at(t);
                            let len = curve.length().max(1e-9);
                            let interior = t > curve.first().t + INTERIOR_MARGIN * len
                                && t < curve.last().t - INTERIOR_MARGIN * len;
                            preimages.push(PreimagePoint { arc, t, x: s.x, y: s.y, interior });
                        }
                    }
                }
                AxisPoint::Infinity => {
                    if profile.is_vertical_line {
                        whole_arcs.push(WholeArcPreimage {
                            arc,
                            exempt: Some("hyperplane-at-infinity".into()),
                        });
                        continue;
                    }
                    for v in &profile.verticals {
                        preimages.push(PreimagePoint {
                            arc,
                            t: v.t,
                            x: v.state.x,
                            y: v.state.y,
                            interior: v.interior,
                        });
                    }
                }
            }
        }

        // Removal set: interior points plus non-exempt whole arcs.
        let mut cuts: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for p in preimages.iter().filter(|p| p.interior) {
            cuts.entry(p.arc).or_default().push(p.t);
        }
        let removed_whole: Vec<usize> = whole_arcs
            .iter()
            .filter(|w| w.exempt.is_none())
            .map(|w| w.arc)
            .collect();
        let disconnects = if cuts.is_empty() && removed_whole.is_empty() {
            false
        } else {
            let mut removal = Removal { cuts, whole: removed_whole };
            for v in removal.cuts.values_mut() {
                v.sort_by(f64::total_cmp);
            }
            component_count(config, &attachments, &removal) > base_components
        };

        // Rule: internal pair on an arc that turns (downward, for the
        // traversal that makes it so) past the vertical.
        for (arc, profile) in profiles.iter().enumerate() {
            let has_downward_interior = profile.verticals.iter().any(|v| v.interior);
            let interior_here: Vec<&PreimagePoint> = preimages
                .iter()
                .filter(|p| p.arc == arc && p.interior)
                .collect();
            if interior_here.len() >= 2 {
                if let AxisPoint::Finite(xv) = cand {
                    pair_witness
                        .entry(arc)
                        .or_insert((xv, interior_here[0].t, interior_here[1].t));
                    if has_downward_interior && downward_flagged.insert(arc) {
                        violations.push(SeparatingViolation::DownwardVerticalPair {
                            arc,
                            x: xv,
                            t1: interior_here[0].t,
                            t2: interior_here[1].t,
                        });
                    }
                }
            }
        }

        // Rule: cross-arc separating set beyond the cap exemptions.
        let interior_arcs: std::collections::BTreeSet<usize> = preimages
            .iter()
            .filter(|p| p.interior)
            .map(|p| p.arc)
            .collect();
        if interior_arcs.len() >= 2 && disconnects {
            let key: Vec<usize> = interior_arcs.iter().copied().collect();
            match cross_arc_seen.get(&key) {
                Some(&idx) => {
                    if let SeparatingViolation::CrossArcSeparating { occurrences, .. } =
                        &mut violations[idx]
                    {
                        *occurrences += 1;
                    }
                }
                None => {
                    cross_arc_seen.insert(key, violations.len());
                    violations.push(SeparatingViolation::CrossArcSeparating {
                        x: cand,
                        points: preimages.iter().filter(|p| p.interior).cloned().collect(),
                        occurrences: 1,
                    });
                }
            }
        }

        candidates.push(CandidateReport { x: cand, preimages, whole_arcs, disconnects });
    }

    // Rule: twice vertical with an interior vertical.
    for (arc, profile) in profiles.iter().enumerate() {
        if profile.is_vertical_line {
            continue;
        }
        if profile.verticals.len() >= 2 && profile.verticals.iter().any(|v| v.interior) {
            let witness = pair_witness.get(&arc);
            violations.push(SeparatingViolation::TwiceVertical {
                arc,
                verticals: profile.verticals.iter().map(|v| v.t).collect(),
                witness_x: witness.map(|w| w.0),
                witness_pair: witness.map(|w| (w.1, w.2)),
            });
        }
    }

    violations.sort_by(|a, b| violation_key(a).cmp(&violation_key(b)));

    Ok(SeparatingReport { resolution, candidates, violations })
}

fn violation_key(v: &SeparatingViolation) -> (u8, usize) {
    match v {
        SeparatingViolation::DownwardVerticalPair { arc, .. } => (0, *arc),
        SeparatingViolation::TwiceVertical { arc, .. } => (1, *arc),
        SeparatingViolation::CrossArcSeparating { .. } => (2, 0),
    }
}

/// Root of `f(t) = x` on a monotone segment, if the value lies strictly
/// inside the segment's range.
fn segment_root(curve: &GeneratingCurve, seg: &MonotoneSegment, x: f64) -> Option<f64> {
    if seg.direction == 0 {
        return None;
    }
    let (below, above) = if seg.direction > 0 {
        (seg.lim_lo, seg.lim_hi)
    } else {
        (seg.lim_hi, seg.lim_lo)
    };
    if below.cmp_to(x) != std::cmp::Ordering::Less || above.cmp_to(x) != std::cmp::Ordering::Greater
    {
        return None;
    }

    let f_at = |t: f64| -> f64 {
        let s = curve.state_at(t);
        s.x + s.y * s.theta.tan()
    };
    let (mut lo, mut hi) = (seg.t_lo, seg.t_hi);
    // Sign of g = f - x at the lower end of the bracket.
    let mut sign_lo = match seg.lim_lo {
        AxisLimit::Finite(v) => (v - x).signum(),
        AxisLimit::PlusInfinity => 1.0,
        AxisLimit::MinusInfinity => -1.0,
    };
    if sign_lo == 0.0 {
        return Some(lo);
    }
    for _ in 0..100 {
        if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g = f_at(mid) - x;
        if g == 0.0 {
            return Some(mid);
        }
        if g.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        let _ = &mut sign_lo;
    }
    Some(0.5 * (lo + hi))
}

#[derive(Default)]
struct Removal {
    cuts: std::collections::BTreeMap<usize, Vec<f64>>,
    whole: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let r = self.find(self.parent[i]);
            self.parent[i] = r;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Number of connected components of the arc material after removing the
/// given cut neighborhoods. Attachment nodes (vertices, clustered axis
/// points) connect arc-end pieces but carry no material themselves.
fn component_count(
    config: &Configuration,
    attachments: &[(Attachment, Attachment)],
    removal: &Removal,
) -> usize {
    let n_arcs = config.arcs.len();
    let mut n_attach = 0usize;
    let mut attach_id = std::collections::BTreeMap::new();
    for (s, e) in attachments {
        for a in [s, e] {
            match a {
                Attachment::Vertex(v) => {
                    attach_id.entry(("v", *v)).or_insert_with(|| {
                        n_attach += 1;
                        n_attach - 1
                    });
                }
                Attachment::Axis(c) => {
                    attach_id.entry(("a", *c)).or_insert_with(|| {
                        n_attach += 1;
                        n_attach - 1
                    });
                }
                Attachment::Free => {}
            }
        }
    }

    // Nodes: attachments first, then one node per arc piece.
    let mut piece_nodes: Vec<Vec<(f64, f64, usize)>> = Vec::with_capacity(n_arcs);
    let mut next = n_attach;
    for (arc, ca) in config.arcs.iter().enumerate() {
        let mut pieces = Vec::new();
        if !removal.whole.contains(&arc) {
            let t0 = ca.curve.first().t;
            let t1 = ca.curve.last().t;
            let radius = ca
                .curve
                .states
                .windows(2)
                .map(|w| w[1].t - w[0].t)
                .fold(0.0, f64::max)
                .max(1e-12);
            let cuts = removal.cuts.get(&arc).cloned().unwrap_or_default();
            let mut bounds = vec![t0];
            for c in cuts {
                bounds.push((c - radius).max(t0));
                bounds.push((c + radius).min(t1));
            }
            bounds.push(t1);
            for pair in bounds.chunks(2) {
                let (lo, hi) = (pair[0], pair[1]);
                if hi - lo > 1e-12 {
                    pieces.push((lo, hi, next));
                    next += 1;
                }
            }
        }
        piece_nodes.push(pieces);
    }

    let mut uf = UnionFind::new(next);
    for (arc, pieces) in piece_nodes.iter().enumerate() {
        if pieces.is_empty() {
            continue;
        }
        let (start_att, end_att) = attachments[arc];
        let t0 = config.arcs[arc].curve.first().t;
        let t1 = config.arcs[arc].curve.last().t;
        let first = &pieces[0];
        let last = &pieces[pieces.len() - 1];
        if first.0 <= t0 + 1e-12 {
            if let Some(id) = attach_node_id(&attach_id, start_att) {
                uf.union(first.2, id);
            }
        }
        if last.1 >= t1 - 1e-12 {
            if let Some(id) = attach_node_id(&attach_id, end_att) {
                uf.union(last.2, id);
            }
        }
    }

    // Count classes that contain at least one piece.
    let mut roots = std::collections::BTreeSet::new();
    for pieces in &piece_nodes {
        for p in pieces {
            let r = uf.find(p.2);
            roots.insert(r);
        }
    }
    roots.len()
}

fn attach_node_id(
    ids: &std::collections::BTreeMap<(&'static str, usize), usize>,
    att: Attachment,
) -> Option<usize> {
    match att {
        Attachment::Vertex(v) => ids.get(&("v", v)).copied(),
        Attachment::Axis(c) => ids.get(&("a", c)).copied(),
        Attachment::Free => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay::{
        state_from_invariants, trace, CurveState, DelaunayParams, EventKind, StopSpec,
    };
    use crate::junctions::{ArcEnd, IncidentArc};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(n: u32, h: f64) -> DelaunayParams {
        DelaunayParams::new(n, h).unwrap()
    }

    #[test]
    fn axis_point_cases() {
        assert_eq!(axis_point(&CurveState::new(2.0, 1.0, 0.0)), AxisPoint::Finite(2.0));
        match axis_point(&CurveState::new(0.0, 1.0, PI / 4.0)) {
            AxisPoint::Finite(x) => assert_relative_eq!(x, 1.0, epsilon = 1e-12),
            _ => panic!("finite expected"),
        }
        assert!(axis_point(&CurveState::new(5.0, 3.0, FRAC_PI_2)).is_infinity());
    }

    #[test]
    fn f_derivative_matches_finite_differences() {
        let p = params(4, 1.0);
        let start = state_from_invariants(&p, 0.08, 0.8, true).unwrap();
        let curve = trace(start, p, &StopSpec::length(3.0)).unwrap();
        let delta = 1e-3;
        let mut checked = 0;
        for s in curve.states.iter().step_by(23) {
            if s.t < 2.0 * delta || s.t > curve.last().t - 2.0 * delta {
                continue;
            }
            if s.theta.cos().abs() < 0.2 {
                continue;
            }
            let f_of = |t: f64| {
                let st = curve.state_at(t);
                st.x + st.y * st.theta.tan()
            };
            let fd = (-f_of(s.t + 2.0 * delta) + 8.0 * f_of(s.t + delta)
                - 8.0 * f_of(s.t - delta)
                + f_of(s.t - 2.0 * delta))
                / (12.0 * delta);
            let exact = f_derivative(s, &p).unwrap();
            assert_relative_eq!(fd, exact, max_relative = 1e-6);
            assert_eq!(exact.signum(), curve.force.signum());
            checked += 1;
        }
        assert!(checked > 3);
    }

    #[test]
    fn sphere_profile_is_constant() {
        let p = params(3, 0.5);
        let stop = StopSpec::length(10.0).stop_at(EventKind::AxisApproach);
        let curve = trace(CurveState::new(1.0, 2.0, 0.0), p, &stop).unwrap();
        assert_eq!(curve.class, crate::delaunay::DelaunayClass::Sphere);
        let profile = AxisProfile::new(&curve).unwrap();
        let c = profile.constant.expect("sphere arcs have a constant axis value");
        assert_relative_eq!(c, 1.0, epsilon = 1e-6);
        // Away from the near-vertical tail every sample sits at the center.
        for (t, pt) in &profile.samples {
            let s = curve.state_at(*t);
            if s.theta.cos().abs() > 1e-3 {
                if let AxisPoint::Finite(v) = pt {
                    assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn vertical_line_profile() {
        let p = params(3, 0.0);
        let curve = trace(CurveState::new(0.5, 1.0, FRAC_PI_2), p, &StopSpec::length(2.0)).unwrap();
        let profile = AxisProfile::new(&curve).unwrap();
        assert!(profile.is_vertical_line);
        assert!(profile.samples.iter().all(|(_, pt)| pt.is_infinity()));
    }

    #[test]
    fn nodoid_profile_detects_verticals() {
        let p = params(3, 1.0);
        let start = state_from_invariants(&p, -0.5, 1.0, true).unwrap();
        let curve = trace(start, p, &StopSpec::length(8.0)).unwrap();
        let profile = AxisProfile::new(&curve).unwrap();
        assert!(profile.verticals.len() >= 2, "nodoid winds past vertical twice per turn");
        for v in &profile.verticals {
            assert!(v.state.theta.cos().abs() < 1e-8);
        }
        // Segments alternate and carry the force sign.
        for seg in &profile.monotone_segments {
            assert_eq!(seg.direction, -1);
        }
    }

    // Notch fixtures: a left vertex whose reference arc arrives from the
    // left with forward tangent `theta1` (outgoing ray `theta1 + pi`).
    fn left_vertex(theta1: f64) -> VertexGeometry {
        let rays = [theta1 + PI, theta1 + PI / 3.0, theta1 - PI / 3.0];
        let mk = |i: usize| IncidentArc {
            arc: i,
            end: ArcEnd::Start,
            tangent: rays[i],
            curvature: 0.0,
            endpoint: (0.0, 1.0),
            limit_f: None,
        };
        VertexGeometry { position: (0.0, 1.0), incident: [mk(0), mk(1), mk(2)], side: VertexSide::Left }
    }

    #[test]
    fn notch_baseline_and_rotations() {
        assert_eq!(vertex_notch(&left_vertex(0.0)).unwrap(), 0);
        assert_eq!(vertex_notch(&left_vertex(0.4)).unwrap(), 0);
        assert_eq!(vertex_notch(&left_vertex(-0.4)).unwrap(), 0);
        assert_eq!(vertex_notch(&left_vertex(0.4 + PI / 3.0)).unwrap(), 1);
        assert_eq!(vertex_notch(&left_vertex(0.4 + 2.0 * PI / 3.0)).unwrap(), 2);
        assert_eq!(vertex_notch(&left_vertex(-0.4 - PI / 3.0)).unwrap(), -1);
        assert_eq!(vertex_notch(&left_vertex(-0.4 - 2.0 * PI / 3.0)).unwrap(), -2);
    }

    #[test]
    fn notch_boundary_resolves_by_limit() {
        // theta1 = pi/6 puts one outgoing ray exactly vertical.
        let mut v = left_vertex(PI / 6.0);
        let vertical_idx = v
            .incident
            .iter()
            .position(|inc| inc.outgoing_ray().cos().abs() < 1e-12)
            .expect("one arc is vertical");
        v.incident[vertical_idx].limit_f = Some(AxisSign::MinusInfinity);
        assert_eq!(vertex_notch(&v).unwrap(), 1, "limit -inf takes the larger notch");
        v.incident[vertical_idx].limit_f = Some(AxisSign::PlusInfinity);
        assert_eq!(vertex_notch(&v).unwrap(), 0, "limit +inf takes the smaller notch");
        v.incident[vertical_idx].limit_f = None;
        assert!(vertex_notch(&v).is_err());
    }

    #[test]
    fn notch_mirror_negates() {
        // Horizontal mirror of the notch-1 left vertex is a notch -1 right vertex.
        let theta1 = 0.3 + PI / 3.0;
        let v = left_vertex(theta1);
        assert_eq!(vertex_notch(&v).unwrap(), 1);
        let mut m = v;
        for inc in &mut m.incident {
            inc.tangent = PI - inc.tangent;
            inc.endpoint = (-inc.endpoint.0, inc.endpoint.1);
        }
        m.position = (-m.position.0, m.position.1);
        m.side = VertexSide::Right;
        assert_eq!(vertex_notch(&m).unwrap(), -1);
    }

    #[test]
    fn notch_rejects_malformed_triple() {
        let mut v = left_vertex(0.0);
        v.incident[1].tangent += 0.3;
        assert!(matches!(vertex_notch(&v), Err(MalformedVertex::NotTriple { .. })));
    }

    #[test]
    fn lone_circle_arc_is_exempt() {
        let p = params(3, 0.5);
        let stop = StopSpec::length(13.0).stop_at(EventKind::AxisApproach);
        let curve = trace(CurveState::new(2.0, 2.0, 0.0), p, &stop).unwrap();
        let config = Configuration::single_arc(curve);
        let report = separating_audit(&config, 0.25).unwrap();
        assert!(report.violations.is_empty(), "violations: {:?}", report.violations);
        // At the center the whole arc is the preimage and is exempt.
        let center_report = report
            .candidates
            .iter()
            .find(|c| matches!(c.x, AxisPoint::Finite(x) if (x - 2.0).abs() < 1e-5))
            .expect("center is a critical candidate");
        assert_eq!(center_report.whole_arcs.len(), 1);
        assert!(center_report.whole_arcs[0].exempt.is_some());
        assert!(!center_report.disconnects);
    }

    #[test]
    fn nodoid_loop_flags_twice_vertical_with_internal_pair() {
        let p = params(3, 1.0);
        let start = state_from_invariants(&p, -0.5, 1.0, true).unwrap();
        let curve = trace(start, p, &StopSpec::length(6.0)).unwrap();
        let config = Configuration::single_arc(curve);
        let report = separating_audit(&config, 0.25).unwrap();
        let twice = report
            .violations
            .iter()
            .find_map(|v| match v {
                SeparatingViolation::TwiceVertical { arc, verticals, witness_pair, .. } => {
                    Some((*arc, verticals.clone(), *witness_pair))
                }
                _ => None,
            })
            .expect("twice-vertical must be flagged");
        assert_eq!(twice.0, 0);
        assert!(twice.1.len() >= 2);
        let (t1, t2) = twice.2.expect("an internal pair witness at some large |x|");
        assert!(t1 != t2);
        // Downward-past-vertical internal pair is the Cor 4.2 pattern.
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, SeparatingViolation::DownwardVerticalPair { .. })));
    }

    #[test]
    fn disjoint_ranges_never_separate() {
        // Two unduloid pieces with disjoint axis ranges joined at one vertex:
        // no common candidate value can hit both interiors.
        let p = params(3, 1.0);
        let f = 0.2;
        let (y_lo, _) = crate::delaunay::unduloid_heights_at_angle(&p, f, 0.0).unwrap();
        let s0 = state_from_invariants(&p, f, y_lo * 1.001, true).unwrap();
        let c0 = trace(s0, p, &StopSpec::length(0.4)).unwrap();
        let mut s1 = state_from_invariants(&p, f, y_lo * 1.001, true).unwrap();
        let shift = 40.0;
        s1.x += shift;
        let c1 = trace(s1, p, &StopSpec::length(0.4)).unwrap();

        let end0 = *c0.last();
        let arcs = vec![
            super::super::config_audit::ConfigArc {
                curve: c0,
                left: RegionLabel::Exterior,
                right: RegionLabel::Region1,
            },
            super::super::config_audit::ConfigArc {
                curve: c1,
                left: RegionLabel::Exterior,
                right: RegionLabel::Region1,
            },
        ];
        use crate::config_audit::RegionLabel;
        let vertex = VertexGeometry {
            position: (end0.x, end0.y),
            incident: [
                IncidentArc {
                    arc: 0,
                    end: ArcEnd::Finish,
                    tangent: end0.theta,
                    curvature: 1.0,
                    endpoint: (end0.x, end0.y),
                    limit_f: None,
                },
                IncidentArc {
                    arc: 1,
                    end: ArcEnd::Start,
                    tangent: end0.theta + 2.0 * PI / 3.0,
                    curvature: -1.0,
                    endpoint: (end0.x, end0.y),
                    limit_f: None,
                },
                IncidentArc {
                    arc: 1,
                    end: ArcEnd::Start,
                    tangent: end0.theta - 2.0 * PI / 3.0,
                    curvature: 0.0,
                    endpoint: (end0.x, end0.y),
                    limit_f: None,
                },
            ],
            side: VertexSide::Left,
        };
        let config = Configuration {
            arcs,
            vertices: vec![vertex],
            pressures: None,
            axis_endpoints: vec![],
        };
        let report = separating_audit(&config, 0.5).unwrap();
        assert!(report
            .violations
            .iter()
            .all(|v| !matches!(v, SeparatingViolation::CrossArcSeparating { .. })));
    }
}
