//! Randomized numerical verification of the comparison lemmas for
//! constant-mean-curvature generating curves: the undulary ray bound, the
//! chord-above-the-curve bound for segments with decelerating tangent angle,
//! the companion-normal axis-point inequalities at 120 degree vertices, and
//! the two-line spread identity.
//!
//! Every check is a strict inequality, so outcomes carry a margin: clear
//! passes and failures are separated by a strictness band scaled to the
//! integrator tolerance, and near-tangency inside the band reports as
//! inconclusive rather than as a counterexample.

use crate::delaunay::{
    classify, cos_theta_at, cylinder_force, evaluate_ode, state_from_invariants, trace_with,
    unduloid_heights_at_angle, unduloid_max_angle, CurveState, DelaunayClass, DelaunayParams,
    EventKind, GeneratingCurve, StopSpec, TraceOptions,
};
use crate::wrap_angle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};

/// Strictness band: inequalities closer than this to equality are
/// inconclusive. Ten times the default integrator tolerance, scaled locally.
fn strict_tol(scale: f64) -> f64 {
    10.0 * (1e-10 * scale + 1e-12)
}

/// A concrete point where a strict inequality failed or became marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CheckOutcome {
    Pass,
    /// Within the strictness band of equality; not counted as a failure.
    Inconclusive(Witness),
    Fail(Witness),
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CheckOutcome::Pass)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("precondition violated: {0}")]
pub struct PreconditionError(pub String);

// ---------------------------------------------------------------------------
// Undulary ray
// ---------------------------------------------------------------------------

/// The ray going back down from an unduloid point at angle `psi` with the
/// curve passes completely beneath the unduloid to the left of the point.
///
/// The contact point is placed at a height solving the invariant relation;
/// both heights attaining `theta_p` are checked.
pub fn check_undulary_ray(
    n: u32,
    h: f64,
    f: f64,
    theta_p: f64,
    psi: f64,
) -> Result<CheckOutcome, PreconditionError> {
    let params = DelaunayParams::new(n, h).map_err(|e| PreconditionError(e.to_string()))?;
    if classify(n, h, f, 1e-12) != DelaunayClass::UnduloidOrCylinder {
        return Err(PreconditionError(format!(
            "(H, F) = ({h}, {f}) is not an unduloid family"
        )));
    }
    if !(psi > 0.0 && psi < PI / 4.0) {
        return Err(PreconditionError(format!("psi = {psi} outside (0, pi/4)")));
    }
    if !(theta_p >= FRAC_PI_2 - 2.0 * psi && theta_p < FRAC_PI_2) {
        return Err(PreconditionError(format!(
            "theta_p = {theta_p} outside [pi/2 - 2 psi, pi/2)"
        )));
    }
    // Normalize the orientation so H > 0, F > 0.
    let (params, f) = if h > 0.0 { (params, f) } else { (params.flipped(), -f) };

    let theta_max = unduloid_max_angle(&params, f)
        .ok_or_else(|| PreconditionError("degenerate unduloid (cylinder)".into()))?;
    if theta_p >= theta_max {
        return Err(PreconditionError(format!(
            "the unduloid peaks at angle {theta_max:.6} < theta_p"
        )));
    }
    let (y_below, y_above) = unduloid_heights_at_angle(&params, f, theta_p)
        .ok_or_else(|| PreconditionError("angle unreachable on this unduloid".into()))?;

    for y_p in [y_below, y_above] {
        match ray_below_curve(&params, f, y_p, theta_p, psi)? {
            CheckOutcome::Pass => {}
            other => return Ok(other),
        }
    }
    Ok(CheckOutcome::Pass)
}

fn ray_below_curve(
    params: &DelaunayParams,
    f: f64,
    y_p: f64,
    theta_p: f64,
    psi: f64,
) -> Result<CheckOutcome, PreconditionError> {
    let ray_dir = theta_p + PI + psi;
    if ray_dir.cos() >= 0.0 {
        // The ray leaves heading rightward; nothing of it lies left of p.
        return Ok(CheckOutcome::Pass);
    }
    // Ray from (0, y_p): hits the axis at x0 < 0.
    let slope = ray_dir.tan();
    let x0 = -y_p / slope;

    // Trace the unduloid leftward from the point by reversing orientation.
    let rev = params.flipped();
    let start = CurveState::new(0.0, y_p, theta_p + PI);
    let (_, y_hi) = unduloid_heights_at_angle(params, f, 0.0)
        .ok_or_else(|| PreconditionError("unduloid heights unavailable".into()))?;
    let span = (x0.abs() + y_hi) * 4.0 + 1.0;
    let stop = StopSpec::length(40.0 * span)
        .stop_at(EventKind::XBound { min: x0 - 0.02 * y_p, max: f64::INFINITY });
    let opts = TraceOptions::default();
    let curve = trace_with(start, rev, &stop, &opts)
        .map_err(|e| PreconditionError(format!("trace failed: {e}")))?;

    let tol = strict_tol(y_p.max(y_hi));
    let mut worst: Option<Witness> = None;
    for s in &curve.states {
        if s.x >= -1e-12 || s.x < x0 {
            continue;
        }
        let ray_y = y_p + slope * s.x;
        let margin = s.y - ray_y;
        if margin < tol {
            let w = Witness {
                x: s.x,
                y: s.y,
                t: s.t,
                lhs: ray_y,
                rhs: s.y,
                message: "ray reaches the curve left of the contact point".into(),
            };
            if margin < -tol {
                return Ok(CheckOutcome::Fail(w));
            }
            worst = Some(w);
        }
    }
    Ok(match worst {
        Some(w) => CheckOutcome::Inconclusive(w),
        None => CheckOutcome::Pass,
    })
}

// ---------------------------------------------------------------------------
// Chord bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChordOutcome {
    Pass,
    Inconclusive(Witness),
    Fail(Witness),
    /// A hypothesis does not hold on the segment; names which one.
    PreconditionFail(String),
}

impl ChordOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, ChordOutcome::Pass)
    }
}

/// For a segment whose tangent angle rises by at most pi/3 while strictly
/// decelerating, the line through the far end at angle pi/6 clockwise from
/// the curve passes above the whole segment.
///
/// Checked in the frame rotated so the segment starts horizontally.
pub fn check_chord(curve: &GeneratingCurve, t_p: f64, t_q: f64) -> ChordOutcome {
    let (t0, t1) = (curve.first().t, curve.last().t);
    if !(t_p >= t0 && t_q <= t1 && t_p < t_q) {
        return ChordOutcome::PreconditionFail(format!(
            "segment [{t_p}, {t_q}] outside the traced range"
        ));
    }
    let p = curve.state_at(t_p);
    let q = curve.state_at(t_q);
    let (theta_p, theta_q) = (p.theta, q.theta);
    if !(theta_q >= theta_p && theta_q <= theta_p + FRAC_PI_3 + 1e-12) {
        return ChordOutcome::PreconditionFail(format!(
            "angle window violated: theta rises by {}",
            theta_q - theta_p
        ));
    }

    let samples: Vec<CurveState> = segment_samples(curve, t_p, t_q);
    for s in &samples {
        let d = match evaluate_ode(s, &curve.params) {
            Ok(d) => d,
            Err(e) => return ChordOutcome::PreconditionFail(e.to_string()),
        };
        if d.ddtheta >= 0.0 {
            return ChordOutcome::PreconditionFail(format!(
                "theta acceleration {:.3e} >= 0 at t = {}",
                d.ddtheta, s.t
            ));
        }
        if !(s.theta >= theta_p - 1e-12 && s.theta <= theta_q + 1e-12) {
            return ChordOutcome::PreconditionFail(format!(
                "theta leaves [theta_p, theta_q] at t = {}",
                s.t
            ));
        }
    }

    // Rotate about p so the start is horizontal; the line through q' at
    // angle theta'_q - pi/6 must stay above the segment.
    let (sin_r, cos_r) = (-theta_p).sin_cos();
    let rot = |s: &CurveState| -> (f64, f64) {
        let (dx, dy) = (s.x - p.x, s.y - p.y);
        (dx * cos_r - dy * sin_r, dx * sin_r + dy * cos_r)
    };
    let (qx, qy) = rot(&q);
    let line_slope = (theta_q - theta_p - FRAC_PI_6).tan();
    let scale = samples.iter().map(|s| s.y).fold(0.0, f64::max);
    let tol = strict_tol(scale);
    let sample_dt = (t_q - t_p) / samples.len() as f64;

    let mut worst: Option<Witness> = None;
    for s in &samples {
        if s.t > t_q - 0.5 * sample_dt {
            continue; // the line passes through q itself
        }
        let (x, y) = rot(s);
        let line_y = qy + line_slope * (x - qx);
        let margin = line_y - y;
        if margin < tol {
            let w = Witness {
                x: s.x,
                y: s.y,
                t: s.t,
                lhs: y,
                rhs: line_y,
                message: "segment point reaches the clockwise chord line".into(),
            };
            if margin < -tol {
                return ChordOutcome::Fail(w);
            }
            worst = Some(w);
        }
    }
    match worst {
        Some(w) => ChordOutcome::Inconclusive(w),
        None => ChordOutcome::Pass,
    }
}

fn segment_samples(curve: &GeneratingCurve, t_p: f64, t_q: f64) -> Vec<CurveState> {
    let mut out = vec![curve.state_at(t_p)];
    out.extend(curve.states.iter().filter(|s| s.t > t_p && s.t < t_q).copied());
    out.push(curve.state_at(t_q));
    out
}

// ---------------------------------------------------------------------------
// Companion axis points
// ---------------------------------------------------------------------------

/// Which companion inequality to check at the segment ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompanionSide {
    /// Rising segment: the companion normal at the far end meets the axis
    /// strictly left of the one at the near end.
    LeftInequality,
    /// The other companion pairing: far end strictly right of the near end.
    RightInequality,
}

/// Axis intersection of the companion normal line tilted `sigma * pi/6` from
/// the curve normal, i.e. of the 120 degree neighbor whose tangent line lies
/// at `theta + sigma * pi/3`.
pub fn companion_axis_value(state: &CurveState, sigma: f64) -> Option<f64> {
    let ang = state.theta + sigma * FRAC_PI_3;
    if ang.cos().abs() <= 1e-9 {
        return None;
    }
    Some(state.x + state.y * ang.tan())
}

/// Check a companion-normal inequality over a traced segment.
pub fn check_companions(
    curve: &GeneratingCurve,
    t_p: f64,
    t_q: f64,
    side: CompanionSide,
) -> Result<CheckOutcome, PreconditionError> {
    let (t0, t1) = (curve.first().t, curve.last().t);
    if !(t_p >= t0 && t_q <= t1 && t_p < t_q) {
        return Err(PreconditionError("segment outside the traced range".into()));
    }
    let p = curve.state_at(t_p);
    let q = curve.state_at(t_q);
    let samples = segment_samples(curve, t_p, t_q);

    match side {
        CompanionSide::LeftInequality => {
            for w in samples.windows(2) {
                if w[1].y <= w[0].y {
                    return Err(PreconditionError(format!(
                        "segment not strictly increasing at t = {}",
                        w[0].t
                    )));
                }
            }
            if !(p.theta >= 0.0 && p.theta < FRAC_PI_2) {
                return Err(PreconditionError(format!(
                    "theta at the near end is {}, outside [0, pi/2)",
                    p.theta
                )));
            }
            let lo = FRAC_PI_6.max(p.theta);
            let hi = FRAC_PI_2.min(p.theta + FRAC_PI_3);
            if !(q.theta > lo && q.theta <= hi) {
                return Err(PreconditionError(format!(
                    "theta at the far end is {}, outside ({lo}, {hi}]",
                    q.theta
                )));
            }
            let f4_q = companion_axis_value(&q, 1.0);
            let f2_p = companion_axis_value(&p, -1.0);
            compare(f4_q, f2_p, &q, "far companion must land left of the near one")
        }
        CompanionSide::RightInequality => {
            if !(q.theta >= FRAC_PI_6 && q.theta < FRAC_PI_2) {
                return Err(PreconditionError(format!(
                    "theta at the far end is {}, outside [pi/6, pi/2)",
                    q.theta
                )));
            }
            if !(p.theta >= FRAC_PI_6 && p.theta <= q.theta + FRAC_PI_3) {
                return Err(PreconditionError(format!(
                    "theta at the near end is {}, outside [pi/6, theta_q + pi/3]",
                    p.theta
                )));
            }
            for s in &samples {
                if wrap_angle(s.theta - PI).abs() < 1e-9 {
                    return Err(PreconditionError(format!(
                        "tangent passes pi at t = {}",
                        s.t
                    )));
                }
            }
            let f5_q = companion_axis_value(&q, -1.0);
            let f1_p = companion_axis_value(&p, 1.0);
            compare(f1_p, f5_q, &q, "near companion must land left of the far one")
        }
    }
}

fn compare(
    smaller: Option<f64>,
    larger: Option<f64>,
    at: &CurveState,
    message: &str,
) -> Result<CheckOutcome, PreconditionError> {
    let (Some(s), Some(l)) = (smaller, larger) else {
        return Ok(CheckOutcome::Inconclusive(Witness {
            x: at.x,
            y: at.y,
            t: at.t,
            lhs: f64::NAN,
            rhs: f64::NAN,
            message: "companion normal nearly parallel to the axis".into(),
        }));
    };
    let tol = strict_tol(at.y.abs().max(1.0));
    let gap = l - s;
    let witness = Witness { x: at.x, y: at.y, t: at.t, lhs: s, rhs: l, message: message.into() };
    if gap > tol {
        Ok(CheckOutcome::Pass)
    } else if gap < -tol {
        Ok(CheckOutcome::Fail(witness))
    } else {
        Ok(CheckOutcome::Inconclusive(witness))
    }
}

// ---------------------------------------------------------------------------
// Two-line spread
// ---------------------------------------------------------------------------

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum CapSpreadError {
    #[error("height must be positive, got {0}")]
    Height(f64),
    #[error("angle {0} outside [0, pi/6)")]
    Angle(f64),
}

/// Horizontal spread on the axis between lines dropped from height `y` at
/// angles `phi` and `phi + pi/3` from the vertical:
/// `y (tan(phi + pi/3) - tan(phi))`, strictly increasing in both arguments.
pub fn cap_spread(y: f64, phi: f64) -> Result<f64, CapSpreadError> {
    if !(y > 0.0) {
        return Err(CapSpreadError::Height(y));
    }
    if !(0.0..FRAC_PI_6).contains(&phi) {
        return Err(CapSpreadError::Angle(phi));
    }
    Ok(y * ((phi + FRAC_PI_3).tan() - phi.tan()))
}

/// The closed-form equivalent used as the identity cross-check.
pub fn cap_spread_identity(y: f64, phi: f64) -> f64 {
    y * FRAC_PI_3.tan() / (0.5 + (2.0 * phi + FRAC_PI_3).cos())
}

// ---------------------------------------------------------------------------
// The suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub dims: Vec<u32>,
    pub samples_per_lemma: usize,
    /// Relative tolerance for the spread identity.
    pub tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, dims: vec![3, 4, 5, 6, 7, 8], samples_per_lemma: 1000, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub params: BTreeMap<String, f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub dim: u32,
    pub attempted: u64,
    pub admissible: u64,
    pub passed: u64,
    pub failed: u64,
    pub inconclusive: u64,
    pub tolerance: f64,
    pub seed: u64,
    pub first_counterexample: Option<Counterexample>,
}

impl LemmaReport {
    fn new(lemma: &str, dim: u32, tolerance: f64, seed: u64) -> Self {
        Self {
            lemma: lemma.into(),
            dim,
            attempted: 0,
            admissible: 0,
            passed: 0,
            failed: 0,
            inconclusive: 0,
            tolerance,
            seed,
            first_counterexample: None,
        }
    }

    fn record(&mut self, outcome: &CheckOutcome, params: &BTreeMap<String, f64>) {
        self.admissible += 1;
        match outcome {
            CheckOutcome::Pass => self.passed += 1,
            CheckOutcome::Inconclusive(_) => self.inconclusive += 1,
            CheckOutcome::Fail(w) => {
                self.failed += 1;
                if self.first_counterexample.is_none() {
                    self.first_counterexample = Some(Counterexample {
                        params: params.clone(),
                        message: format!(
                            "{} at (x, y, t) = ({:.9}, {:.9}, {:.6}); lhs {:.12}, rhs {:.12}",
                            w.message, w.x, w.y, w.t, w.lhs, w.rhs
                        ),
                    });
                }
            }
        }
    }
}

fn lemma_rng(seed: u64, lemma_index: u64, dim: u32) -> ChaCha8Rng {
    // Splitmix-style mixing keeps the streams independent per (lemma, dim).
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(lemma_index + 1))
        .wrapping_add(u64::from(dim) << 32);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Run every lemma check over randomized admissible samples. Deterministic
/// for a fixed configuration; sampling is rejection on the preconditions.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<LemmaReport>, PreconditionError> {
    if cfg.samples_per_lemma < 1 {
        return Err(PreconditionError("samples_per_lemma must be at least 1".into()));
    }
    if cfg.dims.is_empty() || cfg.dims.iter().any(|&n| n < 3) {
        return Err(PreconditionError("dimensions must be given and at least 3".into()));
    }
    let mut reports = Vec::new();
    for &dim in &cfg.dims {
        reports.push(run_undulary_ray(cfg, dim));
        reports.push(run_chord(cfg, dim));
        reports.push(run_companions(cfg, dim, CompanionSide::LeftInequality));
        reports.push(run_companions(cfg, dim, CompanionSide::RightInequality));
        reports.push(run_cap_spread(cfg, dim));
    }
    Ok(reports)
}

/// True when no lemma reported a counterexample.
pub fn suite_clean(reports: &[LemmaReport]) -> bool {
    reports.iter().all(|r| r.failed == 0)
}

fn run_undulary_ray(cfg: &SuiteConfig, dim: u32) -> LemmaReport {
    let mut rng = lemma_rng(cfg.seed, 0, dim);
    let mut report = LemmaReport::new("undulary-ray", dim, cfg.tol, cfg.seed);
    let budget = 400 * cfg.samples_per_lemma as u64;
    while report.admissible < cfg.samples_per_lemma as u64 && report.attempted < budget {
        report.attempted += 1;
        let h = log_uniform(&mut rng, 0.1, 10.0);
        let f = cylinder_force(dim, h) * log_uniform(&mut rng, 1e-4, 0.999);
        let psi = rng.gen_range(0.01..(PI / 4.0 - 0.01));
        let theta_p = rng.gen_range((FRAC_PI_2 - 2.0 * psi).max(1e-3)..(FRAC_PI_2 - 1e-4));
        let params = BTreeMap::from([
            ("n".into(), f64::from(dim)),
            ("H".into(), h),
            ("F".into(), f),
            ("theta_p".into(), theta_p),
            ("psi".into(), psi),
        ]);
        if let Ok(outcome) = check_undulary_ray(dim, h, f, theta_p, psi) {
            report.record(&outcome, &params);
        }
    }
    report
}

/// Trace an unduloid ascent (neck upward) for window sampling.
fn sample_unduloid_ascent<R: Rng>(
    rng: &mut R,
    dim: u32,
    periods: f64,
) -> Option<(GeneratingCurve, DelaunayParams)> {
    let h = log_uniform(rng, 0.2, 5.0);
    let f = cylinder_force(dim, h) * log_uniform(rng, 1e-3, 0.9);
    let params = DelaunayParams::new(dim, h).ok()?;
    let (y_neck, y_bulge) = unduloid_heights_at_angle(&params, f, 0.0)?;
    let start = state_from_invariants(&params, f, y_neck * (1.0 + 1e-9), true).ok()?;
    let length = periods * 4.0 * (y_bulge - y_neck + 0.5 * y_bulge);
    let opts = TraceOptions { max_step: 0.02, ..Default::default() };
    trace_with(start, params, &StopSpec::length(length), &opts)
        .ok()
        .map(|c| (c, params))
}

/// Trace a nodoid in the orientation with rising tangent angle.
fn sample_rising_nodoid<R: Rng>(
    rng: &mut R,
    dim: u32,
) -> Option<(GeneratingCurve, DelaunayParams)> {
    let h = log_uniform(rng, 0.2, 5.0);
    let f = log_uniform(rng, 0.05, 5.0);
    // H < 0, F > 0: a nodoid whose tangent angle increases along the trace.
    let params = DelaunayParams::new(dim, -h).ok()?;
    // cos(theta) runs monotonically from +1 to -1 across the nodoid's height
    // range; bisect to a midheight starting point.
    let c = |y: f64| cos_theta_at(&params, f, y);
    let (mut lo, mut hi) = (1e-3, 1e3);
    if c(lo) < 0.9 || c(hi) > -0.9 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if c(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y_mid = 0.5 * (lo + hi);
    let start = state_from_invariants(&params, f, y_mid, true).ok()?;
    let opts = TraceOptions { max_step: 0.02, ..Default::default() };
    let stop = StopSpec::length(8.0 * y_mid + 4.0).stop_at(EventKind::AxisApproach);
    trace_with(start, params, &stop, &opts).ok().map(|c| (c, params))
}

fn run_chord(cfg: &SuiteConfig, dim: u32) -> LemmaReport {
    let mut rng = lemma_rng(cfg.seed, 1, dim);
    let mut report = LemmaReport::new("chord", dim, cfg.tol, cfg.seed);
    let budget = 400 * cfg.samples_per_lemma as u64;
    'outer: while report.admissible < cfg.samples_per_lemma as u64 && report.attempted < budget {
        let use_nodoid = rng.gen_bool(0.4);
        let curve = if use_nodoid {
            sample_rising_nodoid(&mut rng, dim)
        } else {
            sample_unduloid_ascent(&mut rng, dim, 0.55)
        };
        let Some((curve, params)) = curve else {
            report.attempted += 1;
            continue;
        };
        for _ in 0..24 {
            if report.admissible >= cfg.samples_per_lemma as u64 {
                break 'outer;
            }
            report.attempted += 1;
            let n_states = curve.states.len();
            if n_states < 8 {
                break;
            }
            let i = rng.gen_range(0..n_states - 4);
            let dtheta = rng.gen_range(0.03..FRAC_PI_3 * 0.98);
            let theta_target = curve.states[i].theta + dtheta;
            let Some(j) = curve.states[i..].iter().position(|s| s.theta >= theta_target) else {
                continue;
            };
            let (t_p, t_q) = (curve.states[i].t, curve.states[i + j].t);
            let sample_params = BTreeMap::from([
                ("n".into(), f64::from(dim)),
                ("H".into(), params.h()),
                ("F".into(), curve.force),
                ("t_p".into(), t_p),
                ("t_q".into(), t_q),
            ]);
            match check_chord(&curve, t_p, t_q) {
                ChordOutcome::Pass => report.record(&CheckOutcome::Pass, &sample_params),
                ChordOutcome::Inconclusive(w) => {
                    report.record(&CheckOutcome::Inconclusive(w), &sample_params)
                }
                ChordOutcome::Fail(w) => report.record(&CheckOutcome::Fail(w), &sample_params),
                ChordOutcome::PreconditionFail(_) => {}
            }
        }
    }
    report
}

fn run_companions(cfg: &SuiteConfig, dim: u32, side: CompanionSide) -> LemmaReport {
    let (name, stream) = match side {
        CompanionSide::LeftInequality => ("companions-left", 2),
        CompanionSide::RightInequality => ("companions-right", 3),
    };
    let mut rng = lemma_rng(cfg.seed, stream, dim);
    let mut report = LemmaReport::new(name, dim, cfg.tol, cfg.seed);
    let budget = 600 * cfg.samples_per_lemma as u64;
    'outer: while report.admissible < cfg.samples_per_lemma as u64 && report.attempted < budget {
        let periods = if side == CompanionSide::RightInequality && rng.gen_bool(0.5) {
            1.6 // allow windows across a minimum
        } else {
            0.55
        };
        let curve = if side == CompanionSide::RightInequality && rng.gen_bool(0.3) {
            sample_rising_nodoid(&mut rng, dim)
        } else {
            sample_unduloid_ascent(&mut rng, dim, periods)
        };
        let Some((curve, params)) = curve else {
            report.attempted += 1;
            continue;
        };
        for _ in 0..24 {
            if report.admissible >= cfg.samples_per_lemma as u64 {
                break 'outer;
            }
            report.attempted += 1;
            let n_states = curve.states.len();
            if n_states < 8 {
                break;
            }
            let i = rng.gen_range(0..n_states - 4);
            let j = rng.gen_range(i + 2..n_states);
            let (t_p, t_q) = (curve.states[i].t, curve.states[j].t);
            let sample_params = BTreeMap::from([
                ("n".into(), f64::from(dim)),
                ("H".into(), params.h()),
                ("F".into(), curve.force),
                ("t_p".into(), t_p),
                ("t_q".into(), t_q),
            ]);
            if let Ok(outcome) = check_companions(&curve, t_p, t_q, side) {
                report.record(&outcome, &sample_params);
            }
        }
    }
    report
}

fn run_cap_spread(cfg: &SuiteConfig, dim: u32) -> LemmaReport {
    let mut rng = lemma_rng(cfg.seed, 4, dim);
    let mut report = LemmaReport::new("cap-spread", dim, cfg.tol, cfg.seed);

    let identity_outcome = |y: f64, phi: f64, spread: f64| -> Option<CheckOutcome> {
        let ident = cap_spread_identity(y, phi);
        let rel = (spread - ident).abs() / spread.abs().max(1.0);
        (rel > cfg.tol).then(|| {
            CheckOutcome::Fail(Witness {
                x: phi,
                y,
                t: 0.0,
                lhs: spread,
                rhs: ident,
                message: "spread identity residual exceeds tolerance".into(),
            })
        })
    };

    // Fixed monotonicity grids: 51 angle points, heights {0.1, 1, 10}.
    for &y in &[0.1, 1.0, 10.0] {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..51 {
            report.attempted += 1;
            let phi = (FRAC_PI_6 - 1e-3) * (k as f64) / 50.0;
            let spread = cap_spread(y, phi).expect("grid inside the domain");
            let params = BTreeMap::from([("y".into(), y), ("phi".into(), phi)]);
            let outcome = identity_outcome(y, phi, spread).unwrap_or(if spread > prev {
                CheckOutcome::Pass
            } else {
                CheckOutcome::Fail(Witness {
                    x: phi,
                    y,
                    t: 0.0,
                    lhs: spread,
                    rhs: prev,
                    message: "spread not strictly increasing along the angle grid".into(),
                })
            });
            report.record(&outcome, &params);
            prev = spread;
        }
    }
    // Monotonicity in the height at fixed angles.
    for k in 0..17 {
        report.attempted += 1;
        let phi = (FRAC_PI_6 - 1e-3) * (k as f64) / 16.0;
        let (a, b, c) = (
            cap_spread(0.1, phi).unwrap(),
            cap_spread(1.0, phi).unwrap(),
            cap_spread(10.0, phi).unwrap(),
        );
        let params = BTreeMap::from([("phi".into(), phi)]);
        let outcome = if a < b && b < c {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail(Witness {
                x: phi,
                y: 1.0,
                t: 0.0,
                lhs: a,
                rhs: c,
                message: "spread not strictly increasing in the height".into(),
            })
        };
        report.record(&outcome, &params);
    }

    // Randomized identity samples up to the per-lemma budget.
    while report.admissible < cfg.samples_per_lemma as u64 {
        report.attempted += 1;
        let y = log_uniform(&mut rng, 0.1, 10.0);
        let phi = rng.gen_range(0.0..(FRAC_PI_6 - 1e-3));
        let spread = cap_spread(y, phi).expect("sample inside the domain");
        let params = BTreeMap::from([("y".into(), y), ("phi".into(), phi)]);
        let outcome = identity_outcome(y, phi, spread).unwrap_or(CheckOutcome::Pass);
        report.record(&outcome, &params);
    }
    let _ = dim;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cap_spread_values() {
        let s3 = 3.0_f64.sqrt();
        assert_relative_eq!(cap_spread(1.0, 0.0).unwrap(), s3, max_relative = 1e-15);
        assert_relative_eq!(cap_spread(1.0, PI / 12.0).unwrap(), 2.0 * s3, max_relative = 1e-13);
        assert_relative_eq!(cap_spread(2.0, 0.0).unwrap(), 2.0 * s3, max_relative = 1e-15);
        assert!(cap_spread(0.0, 0.1).is_err());
        assert!(cap_spread(1.0, FRAC_PI_6).is_err());
    }

    #[test]
    fn cap_spread_identity_residual() {
        for k in 0..51 {
            let phi = (FRAC_PI_6 - 1e-3) * (k as f64) / 50.0;
            for y in [0.1, 1.0, 10.0] {
                let spread = cap_spread(y, phi).unwrap();
                let ident = cap_spread_identity(y, phi);
                let rel = (spread - ident).abs() / spread.abs().max(1.0);
                assert!(rel < 1e-12, "residual {rel} at y={y}, phi={phi}");
            }
        }
    }

    #[test]
    fn undulary_ray_trivial_branch() {
        // theta_p in [pi/2 - psi, pi/2): the ray heads rightward.
        let out = check_undulary_ray(3, 1.0, 0.05, FRAC_PI_2 - 0.1, 0.2).unwrap();
        assert!(out.passed());
    }

    #[test]
    fn undulary_ray_spec_example() {
        let out = check_undulary_ray(3, 1.0, 0.2, FRAC_PI_2 - PI / 4.0, FRAC_PI_6).unwrap();
        assert!(out.passed(), "got {out:?}");
    }

    #[test]
    fn undulary_ray_rejects_nodoid() {
        assert!(check_undulary_ray(3, 1.0, -0.2, 1.0, 0.5).is_err());
    }

    #[test]
    fn chord_rejects_straight_segment() {
        // A cylinder has theta'' = 0 everywhere.
        let params = DelaunayParams::new(3, 0.5).unwrap();
        let curve = trace_with(
            CurveState::new(0.0, 1.0, 0.0),
            params,
            &StopSpec::length(2.0),
            &TraceOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            check_chord(&curve, 0.0, 1.5),
            ChordOutcome::PreconditionFail(_)
        ));
    }

    #[test]
    fn chord_passes_on_rising_unduloid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (curve, _) = sample_unduloid_ascent(&mut rng, 3, 0.5).unwrap();
        // A window in the rising-theta part.
        let i = curve.states.len() / 10;
        let theta_i = curve.states[i].theta;
        let j = curve
            .states
            .iter()
            .position(|s| s.theta >= theta_i + 0.25)
            .expect("window exists");
        let out = check_chord(&curve, curve.states[i].t, curve.states[j].t);
        assert!(out.passed(), "got {out:?}");
    }

    #[test]
    fn companions_spec_example() {
        // Rising unduloid, theta from ~0.1 to ~0.9.
        let params = DelaunayParams::new(3, 1.0).unwrap();
        let f = 0.2;
        let (y1, _) = unduloid_heights_at_angle(&params, f, 0.1).unwrap();
        let start = state_from_invariants(&params, f, y1, true).unwrap();
        let stop = StopSpec::length(10.0).stop_at(EventKind::AngleReaches(0.9));
        let curve = trace_with(start, params, &stop, &TraceOptions::default()).unwrap();
        assert!(curve.last().theta >= 0.9 - 1e-9);
        let out = check_companions(
            &curve,
            0.0,
            curve.last().t,
            CompanionSide::LeftInequality,
        )
        .unwrap();
        assert!(out.passed(), "got {out:?}");
    }

    #[test]
    fn companions_window_violation_is_precondition() {
        let params = DelaunayParams::new(3, 1.0).unwrap();
        let f = 0.2;
        let (y1, _) = unduloid_heights_at_angle(&params, f, 0.1).unwrap();
        let start = state_from_invariants(&params, f, y1, true).unwrap();
        let curve = trace_with(
            start,
            params,
            &StopSpec::length(0.001),
            &TraceOptions::default(),
        )
        .unwrap();
        // theta barely moves: the strict window fails.
        assert!(check_companions(&curve, 0.0, curve.last().t, CompanionSide::LeftInequality)
            .is_err());
    }

    #[test]
    fn suite_small_run_is_deterministic_and_clean() {
        let cfg = SuiteConfig { seed: 42, dims: vec![3, 5], samples_per_lemma: 25, tol: 1e-12 };
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(suite_clean(&a), "counterexamples: {:#?}", a.iter().filter(|r| r.failed > 0).collect::<Vec<_>>());
        for r in &a {
            assert!(r.admissible >= 25, "{} n={} admissible {}", r.lemma, r.dim, r.admissible);
            assert!(r.attempted >= r.admissible);
        }
    }

    #[test]
    fn suite_rejects_zero_samples() {
        let cfg = SuiteConfig { samples_per_lemma: 0, ..Default::default() };
        assert!(run_suite(&cfg).is_err());
    }

    #[test]
    fn checks_are_translation_invariant() {
        let params = DelaunayParams::new(3, 1.0).unwrap();
        let f = 0.2;
        let (y1, _) = unduloid_heights_at_angle(&params, f, 0.1).unwrap();
        let start = state_from_invariants(&params, f, y1, true).unwrap();
        let mut shifted = start;
        shifted.x += 17.3;
        let stop = StopSpec::length(10.0).stop_at(EventKind::AngleReaches(0.8));
        let c0 = trace_with(start, params, &stop, &TraceOptions::default()).unwrap();
        let c1 = trace_with(shifted, params, &stop, &TraceOptions::default()).unwrap();
        let out0 = check_companions(&c0, 0.0, c0.last().t, CompanionSide::LeftInequality).unwrap();
        let out1 = check_companions(&c1, 0.0, c1.last().t, CompanionSide::LeftInequality).unwrap();
        assert_eq!(out0.passed(), out1.passed());
        let ch0 = check_chord(&c0, 0.0, c0.last().t);
        let ch1 = check_chord(&c1, 0.0, c1.last().t);
        assert_eq!(ch0.passed(), ch1.passed());
    }
}
