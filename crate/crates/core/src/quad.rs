//! Adaptive quadrature and closed-form measures of spheres and balls.
//!
//! The integrator is a globally adaptive Gauss-Kronrod 7(15) scheme: each
//! panel is estimated with the 15-point Kronrod rule, the error with the
//! difference against the embedded 7-point Gauss rule, and the panel with the
//! largest error is bisected until the requested tolerance is met.

use thiserror::Error;

/// Kronrod abscissae on `[-1, 1]` (symmetric; only the non-negative half).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss weights for the embedded 7-point rule (abscissae `XGK[1], XGK[3], XGK[5], XGK[7]`).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature failed to converge: estimated error {error:.3e} after {panels} panels")]
    NoConvergence { error: f64, panels: usize },
    #[error("invalid integration bounds [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

/// One Gauss-Kronrod 7(15) evaluation over `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kronrod = WGK[7] * f(mid);
    let mut gauss = WG[3] * f(mid);
    for i in 0..7 {
        let dx = half * XGK[i];
        let fsum = f(mid - dx) + f(mid + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Integrate `f` over `[a, b]` to the requested relative/absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64, QuadError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(QuadError::BadInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }

    const MAX_PANELS: usize = 4096;
    // (neg_error, lo, hi, value) max-heap by error via sorted insertion.
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    panels.push((e, a, b, v));

    loop {
        let total: f64 = panels.iter().map(|p| p.3).sum();
        let err: f64 = panels.iter().map(|p| p.0).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(QuadError::NoConvergence {
                error: err,
                panels: panels.len(),
            });
        }
        // Split the panel with the largest error estimate.
        let (worst_idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .expect("non-empty panel list");
        let (_, lo, hi, _) = panels.swap_remove(worst_idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((e1, lo, mid, v1));
        panels.push((e2, mid, hi, v2));
    }
}

/// `Gamma(k/2)` for positive integer `k`, exact to machine precision.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1, "gamma_half needs k >= 1");
    match k {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (f64::from(k) / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Surface measure of the unit `m`-sphere embedded in `R^{m+1}`.
pub fn unit_sphere_area(m: u32) -> f64 {
    2.0 * std::f64::consts::PI.powf(f64::from(m + 1) / 2.0) / gamma_half(m + 1)
}

/// Volume of the unit `m`-ball.
pub fn unit_ball_volume(m: u32) -> f64 {
    std::f64::consts::PI.powf(f64::from(m) / 2.0) / gamma_half(m + 2)
}

/// `\int_0^alpha sin^k(phi) dphi` by adaptive quadrature.
pub fn sin_power_integral(k: u32, alpha: f64, rel_tol: f64) -> Result<f64, QuadError> {
    integrate(|phi| phi.sin().powi(k as i32), 0.0, alpha, rel_tol, 1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn single_panel_is_exact_for_high_degree_polynomials() {
        // Kronrod 15 integrates polynomials through degree 22 exactly;
        // a weight typo would show up immediately here.
        for deg in [5_i32, 10, 15, 20, 22] {
            let (v, _) = gk15(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert_relative_eq!(v, 1.0 / f64::from(deg + 1), max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // int_0^1 1/sqrt(x) dx = 2, endpoint singularity.
        let v = integrate(|x: f64| 1.0 / x.max(1e-300).sqrt(), 1e-12, 1.0, 1e-10, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-5);

        let v = integrate(|x: f64| (-(x * x)).exp(), -8.0, 8.0, 1e-13, 1e-15).unwrap();
        assert_relative_eq!(v, PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn gamma_half_values() {
        assert_relative_eq!(gamma_half(1), PI.sqrt(), max_relative = 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert_relative_eq!(gamma_half(3), PI.sqrt() / 2.0, max_relative = 1e-15);
        assert_eq!(gamma_half(4), 1.0);
        assert_eq!(gamma_half(8), 6.0);
        assert_relative_eq!(gamma_half(7), 15.0 / 8.0 * PI.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn sphere_and_ball_measures() {
        assert_relative_eq!(unit_sphere_area(1), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(2), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        // 4-ball: pi^2/2, 3-sphere: 2 pi^2.
        assert_relative_eq!(unit_ball_volume(4), PI * PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(3), 2.0 * PI * PI, max_relative = 1e-15);
    }

    #[test]
    fn sin_power_against_wallis() {
        // int_0^pi sin^k = sqrt(pi) Gamma((k+1)/2) / Gamma(k/2 + 1)
        for k in 1..=12u32 {
            let exact = PI.sqrt() * gamma_half(k + 1) / gamma_half(k + 2);
            let v = sin_power_integral(k, PI, 1e-13).unwrap();
            assert_relative_eq!(v, exact, max_relative = 1e-13);
        }
    }
}
