//! Embedded Runge-Kutta integration: the Dormand-Prince 5(4) pair with a
//! fourth-order continuous extension.
//!
//! The stepper is deliberately small: one attempted step at a time, with the
//! caller owning the step-acceptance loop, event detection, and output
//! storage. Systems report domain violations (here: a curve leaving the upper
//! half plane) by returning `None` from the right-hand side, which the caller
//! treats as a rejected step.

/// Right-hand side of an autonomous-in-`t` ODE system of dimension `N`.
pub trait OdeSystem<const N: usize> {
    /// Evaluate `dy/dt`; `None` marks the state as outside the domain.
    fn rhs(&self, t: f64, y: &[f64; N]) -> Option<[f64; N]>;
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N]) -> Option<[f64; N]>,
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> Option<[f64; N]> {
        self(t, y)
    }
}

// Dormand-Prince coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Error coefficients: 5th-order weights minus the embedded 4th-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];
/// Dense-output coefficients (Hairer-Norsett-Wanner DOPRI5 interpolant).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// An accepted integration step with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Evaluate the interpolant at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let s1 = 1.0 - s;
        let mut out = [0.0_f64; N];
        for i in 0..N {
            out[i] = self.cont[0][i]
                + s * (self.cont[1][i]
                    + s1 * (self.cont[2][i] + s * (self.cont[3][i] + s1 * self.cont[4][i])));
        }
        out
    }
}

/// Outcome of one attempted step.
pub enum StepAttempt<const N: usize> {
    /// Step accepted; contains the dense step, the derivative at `t1`
    /// (FSAL stage, reusable), and the suggested next step size.
    Accepted {
        step: DenseStep<N>,
        k_end: [f64; N],
        h_next: f64,
    },
    /// Error too large or domain violation; retry with the suggested size.
    Rejected { h_retry: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            safety: 0.9,
            min_factor: 0.2,
            max_factor: 5.0,
        }
    }
}

/// Attempt one DOPRI5 step of size `h > 0` from `(t, y)`.
///
/// `k1` must hold the derivative at `(t, y)`; on acceptance the returned
/// `k_end` is the derivative at the new point (first-same-as-last).
pub fn try_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    ctrl: &StepControl,
) -> StepAttempt<N> {
    let mut k = [[0.0_f64; N]; 7];
    k[0] = *k1;
    for stage in 1..7 {
        let mut ys = *y;
        for i in 0..N {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(stage) {
                acc += A[stage][j] * kj[i];
            }
            ys[i] += h * acc;
        }
        match sys.rhs(t + C[stage] * h, &ys) {
            Some(f) => k[stage] = f,
            None => {
                return StepAttempt::Rejected { h_retry: 0.5 * h };
            }
        }
    }

    // 5th-order solution (stage-7 state is exactly the A[6] combination).
    let mut y1 = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for j in 0..6 {
            acc += A[6][j] * k[j][i];
        }
        y1[i] += h * acc;
    }

    // Error norm: RMS of componentwise scaled error.
    let mut err_sq = 0.0;
    for i in 0..N {
        let mut e = 0.0;
        for j in 0..7 {
            e += E[j] * k[j][i];
        }
        e *= h;
        let scale = ctrl.atol + ctrl.rtol * y[i].abs().max(y1[i].abs());
        err_sq += (e / scale) * (e / scale);
    }
    let err = (err_sq / N as f64).sqrt();

    if !err.is_finite() {
        return StepAttempt::Rejected { h_retry: 0.5 * h };
    }
    let factor = if err == 0.0 {
        ctrl.max_factor
    } else {
        (ctrl.safety * err.powf(-0.2)).clamp(ctrl.min_factor, ctrl.max_factor)
    };
    if err > 1.0 {
        return StepAttempt::Rejected {
            h_retry: h * factor.min(1.0),
        };
    }

    let mut cont = [[0.0_f64; N]; 5];
    for i in 0..N {
        let ydiff = y1[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        cont[0][i] = y[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k[6][i] - bspl;
        let mut dsum = 0.0;
        for j in 0..7 {
            dsum += D[j] * k[j][i];
        }
        cont[4][i] = h * dsum;
    }

    StepAttempt::Accepted {
        step: DenseStep {
            t0: t,
            t1: t + h,
            y0: *y,
            y1,
            cont,
        },
        k_end: k[6],
        h_next: h * factor,
    }
}

/// Locate a sign change of `g` inside a dense step by bisection.
///
/// Returns `t` with `|bracket|` narrowed below `t_tol`, given `g(step.t0)` and
/// `g(t_hi)` of opposite (non-zero crossing) sign.
pub fn bisect_event<const N: usize, G: Fn(f64, &[f64; N]) -> f64>(
    step: &DenseStep<N>,
    g: &G,
    mut lo: f64,
    mut hi: f64,
    g_lo: f64,
    t_tol: f64,
) -> f64 {
    let mut sign_lo = g_lo.signum();
    for _ in 0..200 {
        if (hi - lo).abs() <= t_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid, &step.eval(mid));
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == sign_lo {
            lo = mid;
            sign_lo = gm.signum();
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    struct Circle;
    impl OdeSystem<2> for Circle {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> Option<[f64; 2]> {
            Some([-y[1], y[0]])
        }
    }

    fn drive<const N: usize, S: OdeSystem<N>>(
        sys: &S,
        mut t: f64,
        mut y: [f64; N],
        t_end: f64,
        ctrl: &StepControl,
    ) -> ([f64; N], Vec<DenseStep<N>>) {
        let mut k = sys.rhs(t, &y).unwrap();
        let mut h: f64 = 1e-4;
        let mut steps = Vec::new();
        while t < t_end {
            h = h.min(t_end - t).min(0.05);
            match try_step(sys, t, &y, &k, h, ctrl) {
                StepAttempt::Accepted { step, k_end, h_next } => {
                    t = step.t1;
                    y = step.y1;
                    k = k_end;
                    h = h_next;
                    steps.push(step);
                }
                StepAttempt::Rejected { h_retry } => h = h_retry,
            }
        }
        (y, steps)
    }

    #[test]
    fn circle_integration_accuracy() {
        let ctrl = StepControl::default();
        let (y, _) = drive(&Circle, 0.0, [1.0, 0.0], 2.0 * PI, &ctrl);
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-9);
        assert!(y[1].abs() < 1e-9);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let ctrl = StepControl::default();
        let (_, steps) = drive(&Circle, 0.0, [1.0, 0.0], 1.0, &ctrl);
        for step in &steps {
            for frac in [0.1, 0.37, 0.5, 0.82] {
                let t = step.t0 + frac * (step.t1 - step.t0);
                let y = step.eval(t);
                assert_relative_eq!(y[0], t.cos(), epsilon = 1e-10);
                assert_relative_eq!(y[1], t.sin(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn domain_violation_rejects_step() {
        // y' = -1 with domain y > 0: stepping across zero must be rejected.
        let sys = |_t: f64, y: &[f64; 1]| {
            if y[0] > 0.0 {
                Some([-1.0])
            } else {
                None
            }
        };
        let k = [-1.0];
        match try_step(&sys, 0.0, &[0.5], &k, 10.0, &StepControl::default()) {
            StepAttempt::Rejected { h_retry } => assert!(h_retry < 10.0),
            StepAttempt::Accepted { .. } => panic!("step through the domain boundary accepted"),
        }
    }

    #[test]
    fn event_bisection_finds_crossing() {
        let ctrl = StepControl::default();
        let (_, steps) = drive(&Circle, 0.0, [1.0, 0.0], 2.0, &ctrl);
        // Event: y[0] = 0 at t = pi/2.
        let g = |_t: f64, y: &[f64; 2]| y[0];
        for step in &steps {
            let g0 = g(step.t0, &step.y0);
            let g1 = g(step.t1, &step.y1);
            if g0 > 0.0 && g1 <= 0.0 {
                let t_ev = bisect_event(step, &g, step.t0, step.t1, g0, 1e-13);
                assert_relative_eq!(t_ev, PI / 2.0, epsilon = 1e-11);
                return;
            }
        }
        panic!("no crossing found");
    }
}
