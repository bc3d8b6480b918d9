//! Realize a configuration tree as a generating diagram by shooting.
//!
//! The gauge puts the left cap's center at the origin, so the free unknowns
//! are purely geometric: the polar position of the first vertex on the left
//! cap and the arc lengths of the interface and outer-boundary pieces. Each
//! band contributes three closure residuals at its right vertex (two for
//! position, one for the 120 degree meeting); curvatures are fixed by the
//! region pressures, and force balance then propagates on its own, which is
//! what makes the two caps come out spherical.
//!
//! A single-node tree denotes the standard double bubble, which is built in
//! closed form from the pressures and only traced.

use super::{AxisEndpoint, ConfigArc, ConfigTree, Configuration, RegionLabel, TreeError};
use crate::axis_map;
use crate::delaunay::{
    trace_with, CurveState, DelaunayParams, EventKind, GeneratingCurve, StopSpec, TraceError,
    TraceOptions,
};
use crate::junctions::{
    triple_angle_residual, ArcEnd, AxisSign, IncidentArc, RegionPressures, VertexGeometry,
    VertexSide,
};
use crate::newton::{newton_damped, NewtonError, NewtonOptions};
use crate::wrap_angle;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

/// Pressures as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureSpec {
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(rename = "H2")]
    pub h2: f64,
}

/// A boundary record: which components share a boundary and where extra
/// stacks attach along it (reserved; chains need no explicit attachments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BoundarySpec {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub attachments: Vec<String>,
}

/// Initial shooting data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ShootingInit {
    /// Polar angle of the first vertex on the left cap, from the left pole.
    pub cap_omega: Option<f64>,
    /// Initial arc lengths keyed by arc name (`i1`, `o1`, `o1l`, `o1r`, ...).
    #[serde(default)]
    pub arc_lengths: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ShootingSpec {
    #[serde(default)]
    pub initial: ShootingInit,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// A configuration file: tree, pressures, boundaries, shooting data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizeSpec {
    pub tree: ConfigTree,
    pub pressures: PressureSpec,
    #[serde(default)]
    pub boundaries: Vec<BoundarySpec>,
    #[serde(default)]
    pub shooting: ShootingSpec,
    /// Ambient dimension; 3 when omitted.
    #[serde(default = "default_dim")]
    pub dim: u32,
}

fn default_dim() -> u32 {
    3
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub trace: TraceOptions,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 80, trace: TraceOptions::default() }
    }
}

/// Closure and consistency residuals of a realized configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub converged: bool,
    pub newton_residual: f64,
    pub iterations: usize,
    /// Max endpoint mismatch over vertices.
    pub vertex_position: f64,
    /// Max deviation of vertex rays from mutual 120 degrees.
    pub vertex_angle: f64,
    /// Max curvature-cocycle residual over vertices.
    pub cocycle: f64,
    /// Max force-balance residual over vertices.
    pub force_balance: f64,
    /// Max `|cos theta|` at axis events.
    pub axis_cos: f64,
    /// Max `|F|` of the axis-terminating caps (sphere pieces have zero force).
    pub cap_force: f64,
    /// Max conserved-force drift over traced arcs.
    pub force_drift: f64,
    /// Headline closure number: max of position (scale-normalized) and angle.
    pub closure: f64,
}

/// A realized configuration with its residuals. `residuals.converged` is
/// false for partial realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realized {
    pub configuration: Configuration,
    pub residuals: ResidualReport,
}

#[derive(Debug, Error)]
pub enum RealizeError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("pressures must be positive: H1 = {0}, H2 = {1}")]
    BadPressures(f64, f64),
    #[error("dimension n = {0} is below 3")]
    Dimension(u32),
    #[error("trees with branching bands are not supported; realize chains only")]
    NotAChain,
    #[error("trace failed while assembling: {0}")]
    Trace(#[from] TraceError),
    #[error("shooting failed before any geometry could be assembled: {0}")]
    Shooting(String),
}

/// Realize a configuration tree. Partial realizations (shooting that fails
/// to close) are returned with `converged = false` and their best residuals.
pub fn realize(spec: &RealizeSpec, opts: &ShootingOptions) -> Result<Realized, RealizeError> {
    spec.tree.validate()?;
    if spec.dim < 3 {
        return Err(RealizeError::Dimension(spec.dim));
    }
    let pressures = RegionPressures::new(spec.pressures.h1, spec.pressures.h2)
        .map_err(|e| RealizeError::BadPressures(e.h1, e.h2))?;
    let chain = spec.tree.chain().ok_or(RealizeError::NotAChain)?;

    if chain.len() == 1 {
        return standard_configuration(spec.dim, &pressures, &opts.trace);
    }

    let regions: Vec<RegionLabel> = chain
        .iter()
        .map(|id| match spec.tree.node(*id).map(|n| n.region) {
            Some(1) => RegionLabel::Region1,
            _ => RegionLabel::Region2,
        })
        .collect();

    let shooter = ChainShooter {
        n: spec.dim,
        pressures,
        regions: regions.clone(),
        trace_opts: thin_trace_options(&opts.trace),
    };

    let x0 = shooter.initial_guess(&spec.shooting.initial);
    let newton_opts = NewtonOptions {
        tol: spec.shooting.tol.unwrap_or(opts.tol),
        max_iter: spec.shooting.max_iter.unwrap_or(opts.max_iter),
        ..Default::default()
    };
    let residual_fn = |x: &[f64]| shooter.residuals(x);

    let (x_best, rnorm, iters, converged) = match newton_damped(residual_fn, &x0, &newton_opts) {
        Ok(res) => (res.x, res.residual_norm, res.iterations, true),
        Err(NewtonError::NoConvergence { best_x, best_residual, iterations, .. }) => {
            (best_x, best_residual, iterations, false)
        }
        Err(other) => return Err(RealizeError::Shooting(other.to_string())),
    };

    let mut realized = shooter.assemble(&x_best, &opts.trace)?;
    realized.residuals.converged = converged;
    realized.residuals.newton_residual = rnorm;
    realized.residuals.iterations = iters;
    Ok(realized)
}

/// Loosened trace options for the shooting iterations; the final assembly
/// re-traces at full accuracy.
fn thin_trace_options(base: &TraceOptions) -> TraceOptions {
    TraceOptions { rtol: base.rtol.max(1e-9), max_step: base.max_step.max(0.02), ..*base }
}

// ---------------------------------------------------------------------------
// Standard double bubble (single-node tree)
// ---------------------------------------------------------------------------

/// Junction data of a standard double bubble with the given pressures:
/// `(rho, beta)` with the junction at `(0, rho)`.
pub fn standard_junction(p: &RegionPressures) -> (f64, f64) {
    let beta = (3.0_f64.sqrt() * (p.h1() - p.h2()) / (p.h1() + p.h2())).atan();
    let rho = 3.0_f64.sqrt() * beta.cos() / (p.h1() + p.h2());
    (rho, beta)
}

/// Build the standard double bubble diagram for the given pressures by
/// tracing its three arcs from the junction to the axis.
pub fn standard_configuration(
    n: u32,
    pressures: &RegionPressures,
    trace_opts: &TraceOptions,
) -> Result<Realized, RealizeError> {
    if n < 3 {
        return Err(RealizeError::Dimension(n));
    }
    let (rho, beta) = standard_junction(pressures);
    let junction = (0.0, rho);
    let (h1, h2, h0) = (pressures.h1(), pressures.h2(), pressures.h0());

    // Tangent directions away from the junction and curvature parameters in
    // each arc's own orientation.
    let t_left = 5.0 * PI / 6.0 + beta;
    let t_mid = -FRAC_PI_2 + beta;
    let t_right = PI / 6.0 + beta;

    let max_len = 2.0 * PI / h1.min(h2) + 2.0 * rho;
    let mut arcs = Vec::new();
    for (tangent, h_param, left, right) in [
        (t_left, -h1, RegionLabel::Region1, RegionLabel::Exterior),
        (t_mid, h0, RegionLabel::Region2, RegionLabel::Region1),
        (t_right, h2, RegionLabel::Region2, RegionLabel::Exterior),
    ] {
        let params =
            DelaunayParams::new(n, h_param).map_err(|_| RealizeError::Dimension(n))?;
        let start = CurveState::new(junction.0, junction.1, tangent);
        let stop = StopSpec::length(max_len).stop_at(EventKind::AxisApproach);
        let curve = trace_with(start, params, &stop, trace_opts)?;
        // The normal points into the right region in trace orientation; the
        // left/right labels above are already given in that orientation for
        // the left cap and swapped for the other two, fix them here.
        let (l, r) = match arcs.len() {
            0 => (left, right),                       // left cap: N into exterior
            1 => (RegionLabel::Region2, RegionLabel::Region1), // interface: N into region 1
            _ => (RegionLabel::Exterior, RegionLabel::Region2), // right cap: N into region 2
        };
        arcs.push(ConfigArc { curve, left: l, right: r });
        let _ = (left, right);
    }

    let vertex = VertexGeometry {
        position: junction,
        incident: [
            incident_from_start(0, &arcs[0].curve),
            incident_from_start(1, &arcs[1].curve),
            incident_from_start(2, &arcs[2].curve),
        ],
        side: VertexSide::Left,
    };

    let configuration = assemble_configuration(arcs, vec![vertex], Some(*pressures));
    let residuals = measure_residuals(&configuration, true, 0.0, 0);
    Ok(Realized { configuration, residuals })
}

fn incident_from_start(arc: usize, curve: &GeneratingCurve) -> IncidentArc {
    let s = curve.first();
    IncidentArc {
        arc,
        end: ArcEnd::Start,
        tangent: s.theta,
        curvature: curve.params.h(),
        endpoint: (s.x, s.y),
        limit_f: limit_sign(curve, ArcEnd::Start),
    }
}

fn incident_from_finish(arc: usize, curve: &GeneratingCurve) -> IncidentArc {
    let s = curve.last();
    IncidentArc {
        arc,
        end: ArcEnd::Finish,
        tangent: s.theta,
        curvature: curve.params.h(),
        endpoint: (s.x, s.y),
        limit_f: limit_sign(curve, ArcEnd::Finish),
    }
}

/// Limiting axis-map sign at a vertical arc end; `None` when not vertical.
fn limit_sign(curve: &GeneratingCurve, end: ArcEnd) -> Option<AxisSign> {
    let (state, inward) = match end {
        ArcEnd::Start => (curve.first(), 1.0),
        ArcEnd::Finish => (curve.last(), -1.0),
    };
    if state.theta.cos().abs() > 1e-7 {
        return None;
    }
    if curve.class == crate::delaunay::DelaunayClass::VerticalHyperplane {
        return Some(AxisSign::PlusInfinity);
    }
    let len = curve.length().max(1e-9);
    for k in 1..=20 {
        let t = state.t + inward * (k as f64) * 1e-3 * len;
        let s = curve.state_at(t);
        if s.theta.cos().abs() > 1e-5 {
            let f = s.x + s.y * s.theta.tan();
            return Some(if f >= s.x {
                AxisSign::PlusInfinity
            } else {
                AxisSign::MinusInfinity
            });
        }
    }
    Some(AxisSign::PlusInfinity)
}

// ---------------------------------------------------------------------------
// Chain shooting
// ---------------------------------------------------------------------------

struct ChainShooter {
    n: u32,
    pressures: RegionPressures,
    /// Region labels along the chain, root first.
    regions: Vec<RegionLabel>,
    trace_opts: TraceOptions,
}

/// Traced pieces of one walk, in construction order with their names.
struct WalkOutput {
    arcs: Vec<(String, GeneratingCurve, RegionLabel, RegionLabel)>,
    residuals: Vec<f64>,
    /// State of the continuation ray at the root's right vertex.
    right_cap_start: CurveState,
}

impl ChainShooter {
    fn root_region(&self) -> RegionLabel {
        self.regions[0]
    }

    fn pressure_of(&self, r: RegionLabel) -> f64 {
        r.pressure(&self.pressures)
    }

    fn r_root(&self) -> f64 {
        1.0 / self.pressure_of(self.root_region())
    }

    fn bands(&self) -> usize {
        self.regions.len() - 1
    }

    fn unknown_count(&self) -> usize {
        3 * self.bands()
    }

    /// Unknowns: `[omega_p, I_1, (O_1 | O_1L, ..., O_1R), ...]` as produced
    /// by the recursive walk.
    fn initial_guess(&self, init: &ShootingInit) -> Vec<f64> {
        let r = self.r_root();
        let omega = init.cap_omega.unwrap_or(PI / 3.0);
        let mut x = vec![omega];
        let span = r * (PI - 2.0 * omega).max(0.6);
        self.push_band_guess(1, span, init, &mut x);
        assert_eq!(x.len(), self.unknown_count());
        x
    }

    fn push_band_guess(&self, band: usize, span: f64, init: &ShootingInit, x: &mut Vec<f64>) {
        let leaf = band == self.bands();
        let name_i = format!("i{band}");
        let len_i = init.arc_lengths.get(&name_i).copied().unwrap_or(span);
        x.push(len_i);
        if leaf {
            let name_o = format!("o{band}");
            let len_o = init.arc_lengths.get(&name_o).copied().unwrap_or(1.3 * span);
            x.push(len_o);
        } else {
            let name_l = format!("o{band}l");
            let name_r = format!("o{band}r");
            let len_l = init.arc_lengths.get(&name_l).copied().unwrap_or(0.35 * span);
            x.push(len_l);
            self.push_band_guess(band + 1, 0.7 * span, init, x);
            let len_r = init.arc_lengths.get(&name_r).copied().unwrap_or(0.35 * span);
            x.push(len_r);
        }
    }

    /// Position and forward tangent of the left-cap point at polar angle
    /// `omega` from the left pole; cap center at the origin.
    fn cap_point(&self, omega: f64) -> CurveState {
        let r = self.r_root();
        CurveState::new(-r * omega.cos(), r * omega.sin(), FRAC_PI_2 - omega)
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>, String> {
        Ok(self.walk(x, false)?.residuals)
    }

    /// Walk the chain: place the first vertex on the cap, trace interfaces
    /// and outer pieces at the prescribed lengths, and collect closure
    /// residuals at each right vertex.
    fn walk(&self, x: &[f64], keep_arcs: bool) -> Result<WalkOutput, String> {
        let omega = x[0];
        if !(omega > 1e-3 && omega < PI - 1e-3) {
            return Err(format!("cap angle out of range: {omega}"));
        }
        let p1 = self.cap_point(omega);
        let back_ray = p1.theta + PI;
        let mut out = WalkOutput {
            arcs: Vec::new(),
            residuals: Vec::new(),
            right_cap_start: p1,
        };
        let mut cursor = 1usize;
        let exit = self.walk_band(1, p1, back_ray, x, &mut cursor, keep_arcs, &mut out)?;
        debug_assert_eq!(cursor, x.len());
        out.right_cap_start = exit;
        Ok(out)
    }

    /// Returns the start state of the parent's continuation arc at the
    /// band's right vertex.
    #[allow(clippy::too_many_arguments)]
    fn walk_band(
        &self,
        band: usize,
        p: CurveState,
        back_ray: f64,
        x: &[f64],
        cursor: &mut usize,
        keep_arcs: bool,
        out: &mut WalkOutput,
    ) -> Result<CurveState, String> {
        let scale = self.r_root();
        let parent_region = self.regions[band - 1];
        let band_region = self.regions[band];
        let h_i = self.pressure_of(parent_region) - self.pressure_of(band_region);
        let h_o = self.pressure_of(band_region);
        let leaf = band == self.bands();

        let len_i = x[*cursor];
        *cursor += 1;
        if !(len_i > 1e-6) {
            return Err(format!("interface length i{band} must be positive, got {len_i}"));
        }

        let ray_i = wrap_angle(back_ray + 2.0 * PI / 3.0);
        let ray_o = wrap_angle(back_ray - 2.0 * PI / 3.0);
        let start_i = CurveState::new(p.x, p.y, ray_i);
        let start_o = CurveState::new(p.x, p.y, ray_o);

        let curve_i = self.trace_piece(start_i, h_i, len_i)?;
        let end_i = *curve_i.last();

        // Outer boundary: a single piece for a leaf, otherwise left piece,
        // the child's whole subtree, then the right piece.
        let (curve_o_first, end_o, o_pieces) = if leaf {
            let len_o = x[*cursor];
            *cursor += 1;
            if !(len_o > 1e-6) {
                return Err(format!("outer length o{band} must be positive, got {len_o}"));
            }
            let curve_o = self.trace_piece(start_o, h_o, len_o)?;
            let end = *curve_o.last();
            (curve_o.clone(), end, vec![(format!("o{band}"), curve_o)])
        } else {
            let len_l = x[*cursor];
            *cursor += 1;
            if !(len_l > 1e-6) {
                return Err(format!("outer length o{band}l must be positive, got {len_l}"));
            }
            let curve_l = self.trace_piece(start_o, h_o, len_l)?;
            let p_child = *curve_l.last();
            let child_back = p_child.theta + PI;
            let cont = self.walk_band(band + 1, p_child, child_back, x, cursor, keep_arcs, out)?;
            let len_r = x[*cursor];
            *cursor += 1;
            if !(len_r > 1e-6) {
                return Err(format!("outer length o{band}r must be positive, got {len_r}"));
            }
            let curve_r = self.trace_piece(cont, h_o, len_r)?;
            let end = *curve_r.last();
            (
                curve_l.clone(),
                end,
                vec![
                    (format!("o{band}l"), curve_l),
                    (format!("o{band}r"), curve_r),
                ],
            )
        };
        let _ = curve_o_first;

        // Closure at the right vertex: ends meet, rays 120 degrees apart.
        let back_i = end_i.theta + PI;
        let back_o = end_o.theta + PI;
        out.residuals.push((end_i.x - end_o.x) / scale);
        out.residuals.push((end_i.y - end_o.y) / scale);
        out.residuals.push(wrap_angle(back_o - back_i + 2.0 * PI / 3.0));

        if keep_arcs {
            out.arcs.push((format!("i{band}"), curve_i, band_region, parent_region));
            for (name, curve) in o_pieces {
                out.arcs.push((name, curve, RegionLabel::Exterior, band_region));
            }
        }

        // Continuation ray of the parent's boundary at the right vertex.
        let ray_next = wrap_angle(back_i + 2.0 * PI / 3.0);
        Ok(CurveState::new(end_i.x, end_i.y, ray_next))
    }

    fn trace_piece(&self, start: CurveState, h: f64, len: f64) -> Result<GeneratingCurve, String> {
        let params = DelaunayParams::new(self.n, h).map_err(|e| e.to_string())?;
        let stop = StopSpec::length(len).stop_at(EventKind::AxisApproach);
        trace_with(start, params, &stop, &self.trace_opts).map_err(|e| e.to_string())
    }

    /// Final assembly at full trace accuracy: caps traced to the axis,
    /// vertices with incident records, labels, and residual measurement.
    fn assemble(&self, x: &[f64], trace_opts: &TraceOptions) -> Result<Realized, RealizeError> {
        let fine = Self { trace_opts: *trace_opts, ..self.clone_shallow() };
        let walk = fine.walk(x, true).map_err(RealizeError::Shooting)?;

        let h_root = self.pressure_of(self.root_region());
        let r = 1.0 / h_root;
        let cap_len = 2.0 * PI * r;

        let omega = x[0];
        let p1 = self.cap_point(omega);
        let left_cap_start = CurveState::new(p1.x, p1.y, p1.theta + PI);
        let left_cap = trace_with(
            left_cap_start,
            DelaunayParams::new(self.n, -h_root).map_err(|_| RealizeError::Dimension(self.n))?,
            &StopSpec::length(cap_len).stop_at(EventKind::AxisApproach),
            trace_opts,
        )?;
        let right_cap = trace_with(
            walk.right_cap_start,
            DelaunayParams::new(self.n, h_root).map_err(|_| RealizeError::Dimension(self.n))?,
            &StopSpec::length(cap_len).stop_at(EventKind::AxisApproach),
            trace_opts,
        )?;

        // Arc table: left cap, walk arcs in construction order, right cap.
        let root_label = self.root_region();
        let mut arcs = Vec::new();
        arcs.push(ConfigArc {
            curve: left_cap,
            left: root_label,
            right: RegionLabel::Exterior,
        });
        let mut name_to_index: BTreeMap<String, usize> = BTreeMap::new();
        name_to_index.insert("cap_l".into(), 0);
        for (name, curve, left, right) in walk.arcs {
            name_to_index.insert(name, arcs.len());
            arcs.push(ConfigArc { curve, left, right });
        }
        name_to_index.insert("cap_r".into(), arcs.len());
        arcs.push(ConfigArc {
            curve: right_cap,
            left: root_label,
            right: RegionLabel::Exterior,
        });

        // Vertices: per band, the left vertex joins the parent-side arc, the
        // interface, and the first outer piece; the right vertex joins the
        // parent continuation, the interface, and the last outer piece.
        let mut vertices = Vec::new();
        for band in 1..=self.bands() {
            let parent_left: String = if band == 1 { "cap_l".into() } else { format!("o{}l", band - 1) };
            let parent_right: String = if band == 1 { "cap_r".into() } else { format!("o{}r", band - 1) };
            let interface = format!("i{band}");
            let leaf = band == self.bands();
            let (outer_first, outer_last) = if leaf {
                (format!("o{band}"), format!("o{band}"))
            } else {
                (format!("o{band}l"), format!("o{band}r"))
            };
            let idx = |name: &str| -> usize { name_to_index[name] };

            // Parent-side arc at the left vertex: the cap and the left outer
            // pieces START at their band vertex in trace orientation.
            let pl = idx(&parent_left);
            let pl_inc = if band == 1 || parent_left.starts_with("cap") {
                incident_from_start(pl, &arcs[pl].curve)
            } else {
                incident_from_finish(pl, &arcs[pl].curve)
            };
            let i_idx = idx(&interface);
            let of_idx = idx(&outer_first);
            let left_vertex = VertexGeometry {
                position: (arcs[i_idx].curve.first().x, arcs[i_idx].curve.first().y),
                incident: [
                    pl_inc,
                    incident_from_start(i_idx, &arcs[i_idx].curve),
                    incident_from_start(of_idx, &arcs[of_idx].curve),
                ],
                side: VertexSide::Left,
            };
            vertices.push(left_vertex);

            let pr = idx(&parent_right);
            let pr_inc = incident_from_start(pr, &arcs[pr].curve);
            let ol_idx = idx(&outer_last);
            let right_vertex = VertexGeometry {
                position: (arcs[i_idx].curve.last().x, arcs[i_idx].curve.last().y),
                incident: [
                    pr_inc,
                    incident_from_finish(i_idx, &arcs[i_idx].curve),
                    incident_from_finish(ol_idx, &arcs[ol_idx].curve),
                ],
                side: VertexSide::Right,
            };
            vertices.push(right_vertex);
        }

        let configuration = assemble_configuration(arcs, vertices, Some(self.pressures));
        let residuals = measure_residuals(&configuration, false, 0.0, 0);
        Ok(Realized { configuration, residuals })
    }

    fn clone_shallow(&self) -> Self {
        Self {
            n: self.n,
            pressures: self.pressures,
            regions: self.regions.clone(),
            trace_opts: self.trace_opts,
        }
    }
}

/// Collect axis endpoints from trace events and build the configuration.
fn assemble_configuration(
    arcs: Vec<ConfigArc>,
    vertices: Vec<VertexGeometry>,
    pressures: Option<RegionPressures>,
) -> Configuration {
    let mut axis_endpoints = Vec::new();
    for (i, a) in arcs.iter().enumerate() {
        for ev in &a.curve.events {
            if ev.kind == EventKind::AxisApproach {
                axis_endpoints.push(AxisEndpoint {
                    arc: i,
                    end: ArcEnd::Finish,
                    x: ev.state.x,
                    cos_theta_residual: ev.state.theta.cos().abs(),
                });
            }
        }
    }
    Configuration { arcs, vertices, pressures, axis_endpoints }
}

/// Re-measure all residuals on an assembled configuration.
pub fn measure_residuals(
    config: &Configuration,
    converged: bool,
    newton_residual: f64,
    iterations: usize,
) -> ResidualReport {
    let scale = config.scale();
    let mut vertex_position = 0.0_f64;
    let mut vertex_angle = 0.0_f64;
    let mut cocycle = 0.0_f64;
    let mut force_balance = 0.0_f64;

    for v in &config.vertices {
        let rays = [
            v.incident[0].outgoing_ray(),
            v.incident[1].outgoing_ray(),
            v.incident[2].outgoing_ray(),
        ];
        vertex_angle = vertex_angle.max(triple_angle_residual(rays));
        let mut h_sum = 0.0;
        let mut f_sum = 0.0;
        for inc in &v.incident {
            let (ex, ey) = inc.endpoint;
            let d = ((ex - v.position.0).powi(2) + (ey - v.position.1).powi(2)).sqrt();
            vertex_position = vertex_position.max(d);
            let h_out = inc.curvature_outgoing();
            h_sum += h_out;
            if let Some(arc) = config.arcs.get(inc.arc) {
                let n = arc.curve.params.n();
                let y = v.position.1;
                f_sum += y.powi(n as i32 - 2) * (inc.outgoing_ray().cos() - h_out * y);
            }
        }
        cocycle = cocycle.max(h_sum.abs());
        force_balance = force_balance.max(f_sum.abs());
    }

    let axis_cos = config
        .axis_endpoints
        .iter()
        .map(|e| e.cos_theta_residual)
        .fold(0.0, f64::max);

    // The axis-terminating arcs must be force-free sphere pieces.
    let mut cap_force = 0.0_f64;
    for ep in &config.axis_endpoints {
        if let Some(arc) = config.arcs.get(ep.arc) {
            let n = arc.curve.params.n();
            cap_force = cap_force.max(arc.curve.force.abs() / scale.powi(n as i32 - 2));
        }
    }

    let force_drift = config
        .arcs
        .iter()
        .map(|a| a.curve.force_drift)
        .fold(0.0, f64::max);

    let closure = (vertex_position / scale).max(vertex_angle);

    ResidualReport {
        converged,
        newton_residual,
        iterations,
        vertex_position,
        vertex_angle,
        cocycle,
        force_balance,
        axis_cos,
        cap_force,
        force_drift,
        closure,
    }
}

/// Axis-map value of an incident ray at a vertex (used in audits).
pub fn incident_axis_value(v: &VertexGeometry, which: usize) -> axis_map::AxisPoint {
    let inc = &v.incident[which];
    axis_map::axis_point_of(v.position.0, v.position.1, inc.outgoing_ray())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis_map::separating_audit;
    use crate::config_audit::TreeNode;
    use crate::delaunay::DelaunayClass;
    use approx::assert_relative_eq;

    fn tree(nodes: Vec<TreeNode>) -> ConfigTree {
        ConfigTree { nodes }
    }

    fn node(id: usize, region: u8, parent: Option<usize>, children: Vec<usize>) -> TreeNode {
        TreeNode { id, region, parent, children }
    }

    #[test]
    fn standard_equal_pressures_has_flat_interface() {
        let p = RegionPressures::new(1.5, 1.5).unwrap();
        let realized = standard_configuration(3, &p, &TraceOptions::default()).unwrap();
        let config = &realized.configuration;
        assert_eq!(config.arcs.len(), 3);
        assert_eq!(config.arcs[0].curve.class, DelaunayClass::Sphere);
        assert_eq!(config.arcs[1].curve.class, DelaunayClass::VerticalHyperplane);
        assert_eq!(config.arcs[2].curve.class, DelaunayClass::Sphere);
        assert!(realized.residuals.closure < 1e-8, "closure {}", realized.residuals.closure);
        // The tangent residual at the axis guard is the force drift amplified
        // by 1/eps_axis^(n-2); the sphere-ness of the caps is the force.
        assert!(realized.residuals.axis_cos < 1e-3);
        assert!(realized.residuals.cap_force < 1e-9);
        assert_eq!(config.axis_endpoints.len(), 3);
    }

    #[test]
    fn standard_junction_matches_solver() {
        let b = crate::standard_bubble::solve_standard(3, 1.0, 2.0, 1e-11).unwrap();
        let (rho, beta) = standard_junction(&b.pressures);
        assert_relative_eq!(rho, b.rho, max_relative = 1e-8);
        assert_relative_eq!(beta, b.beta, max_relative = 1e-8);
    }

    #[test]
    fn standard_configuration_passes_separating_audit() {
        for (h1, h2) in [(1.0, 1.0), (1.3, 0.9)] {
            let p = RegionPressures::new(h1, h2).unwrap();
            let realized = standard_configuration(3, &p, &TraceOptions::default()).unwrap();
            let report = separating_audit(&realized.configuration, 0.1).unwrap();
            assert!(
                report.violations.is_empty(),
                "standard bubble must audit clean, got {:?}",
                report.violations
            );
        }
    }

    #[test]
    fn realize_trivial_tree_is_standard() {
        let spec = RealizeSpec {
            tree: tree(vec![node(0, 1, None, vec![])]),
            pressures: PressureSpec { h1: 1.0, h2: 0.8 },
            boundaries: vec![],
            shooting: ShootingSpec::default(),
            dim: 4,
        };
        let realized = realize(&spec, &ShootingOptions::default()).unwrap();
        assert!(realized.residuals.converged);
        assert!(realized.residuals.closure < 1e-8);
        assert_eq!(realized.configuration.arcs.len(), 3);
    }

    #[test]
    fn realize_rejects_branching_root() {
        let spec = RealizeSpec {
            tree: tree(vec![
                node(0, 1, None, vec![1, 2]),
                node(1, 2, Some(0), vec![]),
                node(2, 2, Some(0), vec![]),
            ]),
            pressures: PressureSpec { h1: 1.0, h2: 0.8 },
            boundaries: vec![],
            shooting: ShootingSpec::default(),
            dim: 3,
        };
        assert!(matches!(
            realize(&spec, &ShootingOptions::default()),
            Err(RealizeError::Tree(TreeError::RootBranching(2)))
        ));
    }
}
