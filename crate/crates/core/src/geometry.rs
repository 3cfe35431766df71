//! Detection-rate geometry: closed-form volumes of the prior ball, its
//! spherical caps and the undetectable cylinder, plus two independent
//! numerical oracles (cross-section quadrature and Monte Carlo).
//!
//! The detection rate is the fraction of the prior ball whose orthogonal
//! projection onto the fair hyperplane falls outside the disc where the
//! ball meets the hyperplane. All special functions are built from
//! recurrences so they stay finite for dimensions up to a few thousand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be at least 2 for the hyperplane geometry, got {0}")]
    DegenerateDimension(usize),
    #[error("angle {0} outside [0, pi/2]")]
    AngleOutOfRange(f64),
    #[error("invalid parameters: n={n}, tau={tau}, delta={delta} ({reason})")]
    InvalidParams {
        n: usize,
        tau: f64,
        delta: f64,
        reason: &'static str,
    },
    #[error("lower bound corollary requires even n, got {0}")]
    OddDimension(usize),
}

/// Ambient dimension (the audit budget), prior-ball radius and the
/// distance of the ground truth to the fair hyperplane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    n: usize,
    tau: f64,
    delta: f64,
}

impl GeometryParams {
    /// Requires `n >= 1`, `tau > 0` and `0 <= delta <= tau` (the first
    /// auditing axiom forces the ground truth inside the ball).
    pub fn new(n: usize, tau: f64, delta: f64) -> Result<Self, GeometryError> {
        if n < 1 {
            return Err(GeometryError::InvalidParams {
                n,
                tau,
                delta,
                reason: "n must be >= 1",
            });
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(GeometryError::InvalidParams {
                n,
                tau,
                delta,
                reason: "tau must be a positive finite real",
            });
        }
        if !(0.0..=tau).contains(&delta) {
            return Err(GeometryError::InvalidParams {
                n,
                tau,
                delta,
                reason: "delta must satisfy 0 <= delta <= tau",
            });
        }
        Ok(Self { n, tau, delta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The ratio delta/tau; the detection rate depends on (n, this) only.
    pub fn ratio(&self) -> f64 {
        self.delta / self.tau
    }
}

/// Ball, cap, cylinder and intersection volumes together with the
/// detection rate they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeReport {
    pub ball: f64,
    pub cap: f64,
    pub cylinder: f64,
    pub intersection: f64,
    pub p_uf: f64,
}

/// Wallis integral W_n = int_0^{pi/2} sin^n(theta) dtheta via the
/// recurrence W_n = (n-1)/n * W_{n-2}, W_0 = pi/2, W_1 = 1.
pub fn wallis(n: usize) -> f64 {
    let mut w = if n % 2 == 0 { FRAC_PI_2 } else { 1.0 };
    let start = if n % 2 == 0 { 2 } else { 3 };
    let mut k = start;
    while k <= n {
        w *= (k - 1) as f64 / k as f64;
        k += 2;
    }
    w
}

/// I_n(phi) = int_0^phi sin^n(theta) dtheta on [0, pi/2], by the
/// recurrence I_n = (-cos(phi) sin^{n-1}(phi) + (n-1) I_{n-2}) / n.
pub fn incomplete_sine_integral(n: usize, phi: f64) -> Result<f64, GeometryError> {
    if !(0.0..=FRAC_PI_2 + 1e-12).contains(&phi) {
        return Err(GeometryError::AngleOutOfRange(phi));
    }
    let (s, c) = (phi.sin(), phi.cos());
    let mut value = if n % 2 == 0 { phi } else { 1.0 - c };
    let start = if n % 2 == 0 { 2 } else { 3 };
    // sin^{k-1}(phi) carried along to avoid re-exponentiation
    let mut sin_pow = if n % 2 == 0 { s } else { s * s };
    let mut k = start;
    while k <= n {
        value = (-c * sin_pow + (k - 1) as f64 * value) / k as f64;
        sin_pow *= s * s;
        k += 2;
    }
    Ok(value)
}

/// Volume of the n-ball of radius r via V_n = (2 pi r^2 / n) V_{n-2},
/// V_0 = 1, V_1 = 2r.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 * r };
    let start = if n % 2 == 0 { 2 } else { 3 };
    let mut k = start;
    while k <= n {
        v *= 2.0 * PI * r * r / k as f64;
        k += 2;
    }
    v
}

/// Volume of one spherical cap of the prior ball above height delta.
pub fn cap_volume(g: &GeometryParams) -> f64 {
    let phi = (g.ratio()).min(1.0).acos();
    let integral = incomplete_sine_integral(g.n, phi).expect("phi in [0, pi/2] by construction");
    // pi^{(n-1)/2} / Gamma((n+1)/2) is the unit (n-1)-ball volume
    ball_volume(g.n - 1, 1.0) * g.tau.powi(g.n as i32) * integral
}

/// Volume of the solid cylinder of height 2*delta whose base is the disc
/// where the ball meets the fair hyperplane.
pub fn cylinder_volume(g: &GeometryParams) -> f64 {
    let base_radius = (g.tau * g.tau - g.delta * g.delta).max(0.0).sqrt();
    2.0 * g.delta * ball_volume(g.n - 1, base_radius)
}

/// All four volumes of the decomposition plus the resulting detection rate.
pub fn volume_report(g: &GeometryParams) -> Result<VolumeReport, GeometryError> {
    if g.n < 2 {
        return Err(GeometryError::DegenerateDimension(g.n));
    }
    let ball = ball_volume(g.n, g.tau);
    let cap = cap_volume(g);
    let cylinder = cylinder_volume(g);
    let intersection = cylinder + 2.0 * cap;
    Ok(VolumeReport {
        ball,
        cap,
        cylinder,
        intersection,
        p_uf: detection_rate(g)?,
    })
}

/// Detection rate from the ball/cap/cylinder decomposition,
/// P_uf = (ball - cylinder - 2 caps) / ball, evaluated in ratio form so
/// it stays finite for large n:
/// 1 - (I_n(arccos(d/t)) + (d/t)(1 - d^2/t^2)^{(n-1)/2}) / W_n.
pub fn detection_rate(g: &GeometryParams) -> Result<f64, GeometryError> {
    if g.n < 2 {
        return Err(GeometryError::DegenerateDimension(g.n));
    }
    let x = g.ratio();
    // exact endpoint branches sidestep arccos rounding
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let phi = x.acos();
    let integral = incomplete_sine_integral(g.n, phi).expect("phi in [0, pi/2]");
    let cylinder_term = x * (1.0 - x * x).powf((g.n as f64 - 1.0) / 2.0);
    let p = 1.0 - (integral + cylinder_term) / wallis(g.n);
    Ok(p.clamp(0.0, 1.0))
}

/// The detection-rate formula exactly as stated in the source theorem,
/// with a minus sign between the two inner terms. Kept for side-by-side
/// comparison with [`detection_rate`]; exceeds 1 on interior points.
pub fn detection_rate_printed(g: &GeometryParams) -> Result<f64, GeometryError> {
    if g.n < 2 {
        return Err(GeometryError::DegenerateDimension(g.n));
    }
    let x = g.ratio();
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let phi = x.acos();
    let integral = incomplete_sine_integral(g.n, phi).expect("phi in [0, pi/2]");
    let cylinder_term = x * (1.0 - x * x).powf((g.n as f64 - 1.0) / 2.0);
    Ok(1.0 - (integral - cylinder_term) / wallis(g.n))
}

/// Lower bound (1/W_n)(d/t)(1 - d^2/t^2)^{(n-1)/2}, stated for even n.
pub fn detection_rate_lower_bound(g: &GeometryParams) -> Result<f64, GeometryError> {
    if g.n % 2 != 0 {
        return Err(GeometryError::OddDimension(g.n));
    }
    let x = g.ratio();
    Ok(x * (1.0 - x * x).max(0.0).powf((g.n as f64 - 1.0) / 2.0) / wallis(g.n))
}

/// Interior stationary point gamma = (sqrt(n+3) - sqrt(n-1))/2 of the
/// lower bound as a function of delta/tau.
pub fn lower_bound_extremum(n: usize) -> f64 {
    ((n as f64 + 3.0).sqrt() - (n as f64 - 1.0).sqrt()) / 2.0
}

/// Monte Carlo oracle for the detection rate. Draws points uniformly in
/// the n-ball of radius tau (normalized Gaussian direction, radius
/// tau * U^{1/n}); a point is detected iff its component orthogonal to
/// the hyperplane normal exceeds sqrt(tau^2 - delta^2). Returns the
/// detected fraction and its binomial standard error. Deterministic for
/// a fixed seed.
pub fn monte_carlo_detection_rate(
    g: &GeometryParams,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), GeometryError> {
    if g.n < 2 {
        return Err(GeometryError::DegenerateDimension(g.n));
    }
    if samples < 1000 {
        return Err(GeometryError::InvalidParams {
            n: g.n,
            tau: g.tau,
            delta: g.delta,
            reason: "samples must be >= 1000",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc_radius_sq = (g.tau * g.tau - g.delta * g.delta).max(0.0);
    let mut detected = 0usize;
    let inv_n = 1.0 / g.n as f64;
    for _ in 0..samples {
        let mut norm_sq = 0.0;
        let mut axis = 0.0;
        for i in 0..g.n {
            let z: f64 = rng.sample(StandardNormal);
            norm_sq += z * z;
            if i == 0 {
                axis = z;
            }
        }
        let u: f64 = rng.gen();
        let r = g.tau * u.powf(inv_n);
        // squared norm of the projection onto the fair hyperplane
        let perp_sq = r * r * (1.0 - axis * axis / norm_sq);
        if perp_sq > disc_radius_sq {
            detected += 1;
        }
    }
    let estimate = detected as f64 / samples as f64;
    let std_error = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    Ok((estimate, std_error))
}

/// Quadrature oracle: the ball/cylinder intersection volume as a 1-D
/// integral over cross sections, int_{-tau}^{tau} V_{n-1}(min(sqrt(tau^2
/// - t^2), sqrt(tau^2 - delta^2))) dt, then (ball - intersection)/ball.
/// Adaptive Simpson with |t| = delta as a split point.
pub fn quadrature_detection_rate(g: &GeometryParams) -> Result<f64, GeometryError> {
    if g.n < 2 {
        return Err(GeometryError::DegenerateDimension(g.n));
    }
    let disc_radius = (g.tau * g.tau - g.delta * g.delta).max(0.0).sqrt();
    let cross_section = |t: f64| {
        let ball_radius = (g.tau * g.tau - t * t).max(0.0).sqrt();
        ball_volume(g.n - 1, ball_radius.min(disc_radius))
    };
    // integrand is constant on [-delta, delta]; symmetric overall
    let middle = 2.0 * g.delta * ball_volume(g.n - 1, disc_radius);
    let caps = 2.0 * adaptive_simpson(&cross_section, g.delta, g.tau, 1e-8);
    let intersection = middle + caps;
    let ball = ball_volume(g.n, g.tau);
    Ok(((ball - intersection) / ball).clamp(0.0, 1.0))
}

/// Adaptive Simpson quadrature with interval bisection to the given
/// relative tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = whole.abs().max(1e-300);
    simpson_recurse(f, a, b, fa, fm, fb, whole, rel_tol * scale, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}
