//! The generating-curve ODE system for constant-mean-curvature hypersurfaces
//! of revolution, its conserved force, curve classification, and adaptive
//! tracing with event detection.
//!
//! A curve `(x(t), y(t))` in the upper half plane, parameterized by arc
//! length with tangent angle `theta`, generates a CMC hypersurface when
//!
//! ```text
//!   dx/dt     = cos(theta)
//!   dy/dt     = sin(theta)
//!   dtheta/dt = -(n-1) H + (n-2) cos(theta) / y
//! ```
//!
//! where `H` is the mean curvature with respect to the normal
//! `N = (sin theta, -cos theta)`. Along any solution the force
//!
//! ```text
//!   F = y^(n-2) (cos(theta) - H y)
//! ```
//!
//! is a first integral, and the pair `(H, F)` determines the curve up to
//! horizontal translation.

use crate::ode::{bisect_event, try_step, OdeSystem, StepAttempt, StepControl};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point on a generating curve.
///
/// `theta` is stored unwrapped (continuous along a trace, not reduced mod
/// 2 pi) so that winding past the vertical stays observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub t: f64,
}

impl CurveState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta, t: 0.0 }
    }
}

/// Ambient dimension and mean curvature; determines the curve family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaunayParams {
    n: u32,
    h: f64,
}

impl DelaunayParams {
    /// Dimension must be at least 3; the planar case is rejected.
    pub fn new(n: u32, h: f64) -> Result<Self, DomainError> {
        if n < 3 {
            return Err(DomainError::Dimension(n));
        }
        if !h.is_finite() {
            return Err(DomainError::NotFinite);
        }
        Ok(Self { n, h })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Same dimension, opposite normal orientation.
    pub fn flipped(&self) -> Self {
        Self { n: self.n, h: -self.h }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DomainError {
    #[error("dimension n = {0} is below 3")]
    Dimension(u32),
    #[error("curve point has y = {0}, outside the open upper half plane")]
    Height(f64),
    #[error("non-finite input")]
    NotFinite,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("no point at height y = {y}: cos(theta) would be {cos_theta}")]
pub struct NoSuchPoint {
    pub y: f64,
    pub cos_theta: f64,
}

/// Delaunay class by the signs of `(H, F)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelaunayClass {
    CatenoidType,
    Nodoid,
    UnduloidOrCylinder,
    VerticalHyperplane,
    Sphere,
    Cylinder,
}

impl std::fmt::Display for DelaunayClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            DelaunayClass::CatenoidType => "CatenoidType",
            DelaunayClass::Nodoid => "Nodoid",
            DelaunayClass::UnduloidOrCylinder => "UnduloidOrCylinder",
            DelaunayClass::VerticalHyperplane => "VerticalHyperplane",
            DelaunayClass::Sphere => "Sphere",
            DelaunayClass::Cylinder => "Cylinder",
        };
        f.write_str(name)
    }
}

/// Derivatives of the generating-curve system at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeDerivatives {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
    pub ddtheta: f64,
}

/// Evaluate the ODE right-hand side and the tangent-angle acceleration.
pub fn evaluate_ode(
    state: &CurveState,
    params: &DelaunayParams,
) -> Result<OdeDerivatives, DomainError> {
    if !(state.y > 0.0) {
        return Err(DomainError::Height(state.y));
    }
    let n = f64::from(params.n);
    let (sin_t, cos_t) = state.theta.sin_cos();
    let f = force_unchecked(state, params);
    Ok(OdeDerivatives {
        dx: cos_t,
        dy: sin_t,
        dtheta: -(n - 1.0) * params.h + (n - 2.0) * cos_t / state.y,
        ddtheta: -(n - 1.0) * (n - 2.0) * f * sin_t / state.y.powi(params.n as i32),
    })
}

fn force_unchecked(state: &CurveState, params: &DelaunayParams) -> f64 {
    state.y.powi(params.n as i32 - 2) * (state.theta.cos() - params.h * state.y)
}

/// The conserved force `y^(n-2) (cos(theta) - H y)`.
pub fn force(state: &CurveState, params: &DelaunayParams) -> Result<f64, DomainError> {
    if !(state.y > 0.0) {
        return Err(DomainError::Height(state.y));
    }
    Ok(force_unchecked(state, params))
}

/// Force of the cylinder solution for curvature magnitude `h_abs`, which is
/// the largest force any `(|H|, F)` curve with `H F > 0` can carry.
pub fn cylinder_force(n: u32, h_abs: f64) -> f64 {
    let nf = f64::from(n);
    let y_cyl = (nf - 2.0) / ((nf - 1.0) * h_abs);
    y_cyl.powi(n as i32 - 2) / (nf - 1.0)
}

/// Height of the cylinder solution for curvature magnitude `h_abs`.
pub fn cylinder_height(n: u32, h_abs: f64) -> f64 {
    let nf = f64::from(n);
    (nf - 2.0) / ((nf - 1.0) * h_abs)
}

/// Classify a curve family by the signs of `(H, F)`.
///
/// `zero_tol` is the absolute threshold below which `H` or `F` counts as
/// zero; callers should normalize by the curve scale first (multiply `H` by a
/// reference height `y0` and divide `F` by `y0^(n-2)`).
pub fn classify(n: u32, h: f64, f: f64, zero_tol: f64) -> DelaunayClass {
    let h_zero = h.abs() <= zero_tol;
    let f_zero = f.abs() <= zero_tol;
    match (h_zero, f_zero) {
        (true, true) => DelaunayClass::VerticalHyperplane,
        (true, false) => DelaunayClass::CatenoidType,
        (false, true) => DelaunayClass::Sphere,
        (false, false) => {
            if h * f < 0.0 {
                DelaunayClass::Nodoid
            } else {
                let f_cyl = cylinder_force(n, h.abs());
                if (f.abs() - f_cyl).abs() <= zero_tol * (1.0 + f_cyl) {
                    DelaunayClass::Cylinder
                } else {
                    DelaunayClass::UnduloidOrCylinder
                }
            }
        }
    }
}

/// `cos(theta)` forced by the invariants `(H, F)` at height `y`.
pub fn cos_theta_at(params: &DelaunayParams, f: f64, y: f64) -> f64 {
    f * y.powi(2 - params.n as i32) + params.h * y
}

/// Construct the state at height `y` on the `(H, F)` curve, with `x = t = 0`
/// (curves are determined only up to horizontal translation).
///
/// `ascending` selects the branch with `sin(theta) >= 0`.
pub fn state_from_invariants(
    params: &DelaunayParams,
    f: f64,
    y: f64,
    ascending: bool,
) -> Result<CurveState, NoSuchPoint> {
    let c = cos_theta_at(params, f, y);
    if c.abs() > 1.0 + 1e-12 {
        return Err(NoSuchPoint { y, cos_theta: c });
    }
    let theta = c.clamp(-1.0, 1.0).acos();
    Ok(CurveState {
        x: 0.0,
        y,
        theta: if ascending { theta } else { -theta },
        t: 0.0,
    })
}

/// For an unduloid family (`H F > 0`) the angle never exceeds this bound;
/// `None` when `(H, F)` does not define an unduloid with an interior point.
pub fn unduloid_max_angle(params: &DelaunayParams, f: f64) -> Option<f64> {
    let (h_abs, f_abs) = (params.h.abs(), f.abs());
    if params.h * f <= 0.0 {
        return None;
    }
    let nf = f64::from(params.n);
    let y_star = ((nf - 2.0) * f_abs / h_abs).powf(1.0 / (nf - 1.0));
    let c = f_abs * y_star.powi(2 - params.n as i32) + h_abs * y_star;
    if c > 1.0 {
        None
    } else {
        Some(c.acos())
    }
}

/// Heights at which an unduloid (`H > 0`, `F > 0`) attains tangent angle
/// `theta`: the root below the waist of `cos_theta_at` and the root above.
pub fn unduloid_heights_at_angle(
    params: &DelaunayParams,
    f: f64,
    theta: f64,
) -> Option<(f64, f64)> {
    if params.h <= 0.0 || f <= 0.0 {
        return None;
    }
    let target = theta.cos();
    let nf = f64::from(params.n);
    let y_star = ((nf - 2.0) * f / params.h).powf(1.0 / (nf - 1.0));
    let c = |y: f64| cos_theta_at(params, f, y) - target;
    if c(y_star) > 0.0 {
        return None;
    }
    // Lower bracket: c -> +inf as y -> 0 (F > 0).
    let mut lo = y_star;
    while c(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return None;
        }
    }
    let y_low = bisect(&c, lo, y_star);
    // Upper bracket: c -> +inf as y -> inf (H > 0).
    let mut hi = y_star;
    while c(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    let y_high = bisect(&c, y_star, hi);
    Some((y_low, y_high))
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

// ---------------------------------------------------------------------------
// Tracing
// ---------------------------------------------------------------------------

/// Kind of trace event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// `y` drops below the axis guard `eps_axis`.
    AxisApproach,
    /// `cos(theta)` crosses zero.
    VerticalCrossing,
    /// `theta` crosses the given value.
    AngleReaches(f64),
    /// `y` crosses the given value.
    HeightReaches(f64),
    /// `x` leaves the interval `[min, max]`.
    XBound { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventAction {
    /// Terminate the trace at the event point.
    Stop,
    /// Record the event point and continue.
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub action: EventAction,
}

/// Arc-length budget plus the events to watch for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSpec {
    pub max_length: f64,
    pub events: Vec<EventSpec>,
}

impl StopSpec {
    pub fn length(max_length: f64) -> Self {
        Self { max_length, events: Vec::new() }
    }

    pub fn stop_at(mut self, kind: EventKind) -> Self {
        self.events.push(EventSpec { kind, action: EventAction::Stop });
        self
    }

    pub fn record(mut self, kind: EventKind) -> Self {
        self.events.push(EventSpec { kind, action: EventAction::Record });
        self
    }
}

/// A recorded trace event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub state: CurveState,
}

/// Integration and classification tolerances for [`trace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest arc-length gap between stored states.
    pub max_step: f64,
    /// Axis guard: the trace stops (axis event) before `y` reaches zero.
    pub eps_axis: f64,
    /// Arc-length tolerance for event localization.
    pub event_t_tol: f64,
    /// Scale-normalized threshold for classifying `H` or `F` as zero.
    pub zero_tol: f64,
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.01,
            eps_axis: 1e-9,
            event_t_tol: 1e-12,
            zero_tol: 1e-12,
            max_steps: 4_000_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("integrator could not meet tolerance at t = {t} (step size {h:.3e})")]
    StepFailure { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

/// A traced arc: dense states, invariants, events, classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingCurve {
    pub params: DelaunayParams,
    pub states: Vec<CurveState>,
    /// Force evaluated at the initial state.
    pub force: f64,
    /// Max deviation of the recomputed force from `force` over stored states.
    pub force_drift: f64,
    pub events: Vec<TraceEvent>,
    pub class: DelaunayClass,
}

impl GeneratingCurve {
    pub fn first(&self) -> &CurveState {
        self.states.first().expect("traced curve has states")
    }

    pub fn last(&self) -> &CurveState {
        self.states.last().expect("traced curve has states")
    }

    pub fn length(&self) -> f64 {
        self.last().t - self.first().t
    }

    /// State at arc length `t` by cubic Hermite interpolation between the
    /// stored samples, using the ODE for endpoint derivatives.
    pub fn state_at(&self, t: f64) -> CurveState {
        let states = &self.states;
        if t <= states[0].t {
            return states[0];
        }
        if t >= states[states.len() - 1].t {
            return states[states.len() - 1];
        }
        let hi = states.partition_point(|s| s.t <= t);
        let (a, b) = (&states[hi - 1], &states[hi]);
        let h = b.t - a.t;
        if h <= 0.0 {
            return *a;
        }
        let da = evaluate_ode(a, &self.params).expect("stored state in domain");
        let db = evaluate_ode(b, &self.params).expect("stored state in domain");
        let s = (t - a.t) / h;
        let hermite = |va: f64, vb: f64, ma: f64, mb: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            va * (2.0 * s3 - 3.0 * s2 + 1.0)
                + ma * h * (s3 - 2.0 * s2 + s)
                + vb * (-2.0 * s3 + 3.0 * s2)
                + mb * h * (s3 - s2)
        };
        CurveState {
            x: hermite(a.x, b.x, da.dx, db.dx),
            y: hermite(a.y, b.y, da.dy, db.dy),
            theta: hermite(a.theta, b.theta, da.dtheta, db.dtheta),
            t,
        }
    }
}

struct CurveSystem {
    params: DelaunayParams,
}

impl OdeSystem<3> for CurveSystem {
    fn rhs(&self, _t: f64, y: &[f64; 3]) -> Option<[f64; 3]> {
        if y[1] <= 0.0 {
            return None;
        }
        let n = f64::from(self.params.n);
        let (sin_t, cos_t) = y[2].sin_cos();
        Some([
            cos_t,
            sin_t,
            -(n - 1.0) * self.params.h + (n - 2.0) * cos_t / y[1],
        ])
    }
}

fn event_value(kind: &EventKind, eps_axis: f64, y: &[f64; 3]) -> f64 {
    match kind {
        EventKind::AxisApproach => y[1] - eps_axis,
        EventKind::VerticalCrossing => y[2].cos(),
        EventKind::AngleReaches(phi) => y[2] - phi,
        EventKind::HeightReaches(target) => y[1] - target,
        EventKind::XBound { min, max } => (y[0] - min).min(max - y[0]),
    }
}

fn state_of(t: f64, y: &[f64; 3]) -> CurveState {
    CurveState { x: y[0], y: y[1], theta: y[2], t }
}

/// Trace the generating curve from `initial` until the first stopping event
/// or the arc-length budget.
pub fn trace(
    initial: CurveState,
    params: DelaunayParams,
    stop: &StopSpec,
) -> Result<GeneratingCurve, TraceError> {
    trace_with(initial, params, stop, &TraceOptions::default())
}

pub fn trace_with(
    initial: CurveState,
    params: DelaunayParams,
    stop: &StopSpec,
    opts: &TraceOptions,
) -> Result<GeneratingCurve, TraceError> {
    if !(initial.y > 0.0) {
        return Err(DomainError::Height(initial.y).into());
    }
    if !initial.x.is_finite() || !initial.y.is_finite() || !initial.theta.is_finite() {
        return Err(DomainError::NotFinite.into());
    }

    let sys = CurveSystem { params };
    let ctrl = StepControl {
        rtol: opts.rtol,
        atol: opts.atol,
        ..StepControl::default()
    };

    let t_end = initial.t + stop.max_length.max(0.0);
    let mut t = initial.t;
    let mut y = [initial.x, initial.y, initial.theta];
    let mut k = sys
        .rhs(t, &y)
        .ok_or(DomainError::Height(initial.y))?;

    let mut states = vec![initial];
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut prev_g: Vec<f64> = stop
        .events
        .iter()
        .map(|ev| event_value(&ev.kind, opts.eps_axis, &y))
        .collect();

    let mut h = opts.max_step.min(1e-4 * (1.0 + initial.y));
    let mut steps = 0usize;
    let mut stopped = false;

    while t < t_end && !stopped {
        steps += 1;
        if steps > opts.max_steps {
            return Err(TraceError::TooManySteps(opts.max_steps));
        }
        // Keep stage evaluations inside the upper half plane.
        let axis_cap = if y[2].sin() < 0.0 {
            0.5 * y[1] / (-y[2].sin()).max(0.25)
        } else {
            2.0 * y[1]
        };
        h = h.min(opts.max_step).min(t_end - t).min(axis_cap).max(1e-300);
        if h < 1e-13 * t.abs().max(1.0) && t_end - t > 1e-12 {
            // The axis guard shrinks steps geometrically near y -> 0; a step
            // this small without an armed axis event is a genuine failure.
            if y[1] > 2.0 * opts.eps_axis {
                return Err(TraceError::StepFailure { t, h });
            }
        }

        let attempt = try_step(&sys, t, &y, &k, h, &ctrl);
        let (step, k_end, h_next) = match attempt {
            StepAttempt::Accepted { step, k_end, h_next } => (step, k_end, h_next),
            StepAttempt::Rejected { h_retry } => {
                if h_retry < 1e-14 * t.abs().max(1.0) {
                    return Err(TraceError::StepFailure { t, h: h_retry });
                }
                h = h_retry;
                continue;
            }
        };

        // Event scan over the dense step: earliest crossing wins.
        let mut hit: Option<(usize, f64)> = None;
        for (idx, ev) in stop.events.iter().enumerate() {
            let g0 = prev_g[idx];
            let mut t_lo = step.t0;
            let mut g_lo = g0;
            const SUBS: usize = 8;
            for sub in 1..=SUBS {
                let t_hi = step.t0 + (step.t1 - step.t0) * (sub as f64) / (SUBS as f64);
                let g_hi = event_value(&ev.kind, opts.eps_axis, &step.eval(t_hi));
                if g_lo != 0.0 && g_lo.signum() != g_hi.signum() {
                    let g = |_tt: f64, yy: &[f64; 3]| event_value(&ev.kind, opts.eps_axis, yy);
                    let t_ev = bisect_event(&step, &g, t_lo, t_hi, g_lo, opts.event_t_tol);
                    if hit.map_or(true, |(_, tb)| t_ev < tb) {
                        hit = Some((idx, t_ev));
                    }
                    break;
                }
                t_lo = t_hi;
                g_lo = g_hi;
            }
        }

        if let Some((idx, t_ev)) = hit {
            let ev = &stop.events[idx];
            let y_ev = step.eval(t_ev);
            let ev_state = state_of(t_ev, &y_ev);
            match ev.action {
                EventAction::Stop => {
                    states.push(ev_state);
                    events.push(TraceEvent { kind: ev.kind, state: ev_state });
                    stopped = true;
                }
                EventAction::Record => {
                    events.push(TraceEvent { kind: ev.kind, state: ev_state });
                    states.push(ev_state);
                    t = step.t1;
                    y = step.y1;
                    k = k_end;
                    states.push(state_of(t, &y));
                    h = h_next;
                    for (gi, evs) in stop.events.iter().enumerate() {
                        prev_g[gi] = event_value(&evs.kind, opts.eps_axis, &y);
                    }
                }
            }
            continue;
        }

        t = step.t1;
        y = step.y1;
        k = k_end;
        h = h_next;
        states.push(state_of(t, &y));
        for (gi, evs) in stop.events.iter().enumerate() {
            prev_g[gi] = event_value(&evs.kind, opts.eps_axis, &y);
        }
    }

    let force0 = force_unchecked(&initial, &params);
    let mut drift = 0.0_f64;
    for s in &states {
        if s.y > 0.0 {
            drift = drift.max((force_unchecked(s, &params) - force0).abs());
        }
    }

    // Classification thresholds are scale-normalized by the starting height.
    let y0 = initial.y;
    let class = classify(
        params.n,
        params.h * y0,
        force0 / y0.powi(params.n as i32 - 2),
        opts.zero_tol,
    );

    Ok(GeneratingCurve {
        params,
        states,
        force: force0,
        force_drift: drift,
        events,
        class,
    })
}
