//! Fundamental solutions of `-Δ + 1` and `-Δ + 1/4`, and the angular
//! averages of the Riesz and Green kernels that turn the `N`-dimensional
//! operators into one-dimensional radial integrals.
//!
//! For radial `f`,
//!
//! ```text
//! I_alpha[f](r) = ∫_0^∞ f(s) s^{N-1} riesz_angular(N, alpha, r, s) ds
//! G[f](r)       = ∫_0^∞ f(s) s^{N-1} green_angular(N, r, s) ds
//! ```
//!
//! The Riesz kernel is the bare `|x - y|^{alpha - N}` (no normalizing
//! constant).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{gauss16, integrate_adaptive};
use crate::special::{bessel_ik_scaled, bessel_k_scaled, gamma, sphere_area, SpecialError};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KernelError {
    #[error("radius must be positive (got {0})")]
    NonPositiveRadius(f64),
    #[error("alpha must lie in (0, N) (got alpha = {alpha}, N = {n})")]
    AlphaOutOfRange { alpha: f64, n: u32 },
    #[error("Riesz kernel with alpha = {0} <= 1 is not finite on the diagonal r = s")]
    DiagonalSingular(f64),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// `c_N = Gamma(N/2 - 1) / (4 pi^{N/2})`, the limit of `r^{N-2} Gamma_0(r)`.
pub fn c_n(n: u32) -> f64 {
    gamma(n as f64 / 2.0 - 1.0) / (4.0 * PI.powf(n as f64 / 2.0))
}

fn check_radius(r: f64) -> Result<(), KernelError> {
    if r > 0.0 {
        Ok(())
    } else {
        Err(KernelError::NonPositiveRadius(r))
    }
}

/// Fundamental solution of `-Δ + 1` in `R^N`:
/// `(2 pi)^{-N/2} r^{1 - N/2} K_{N/2 - 1}(r)`.
pub fn gamma0(n: u32, r: f64) -> Result<f64, KernelError> {
    check_radius(r)?;
    let nu = n as f64 / 2.0 - 1.0;
    let k = bessel_k_scaled(nu, r)?;
    Ok((2.0 * PI).powf(-(n as f64) / 2.0) * r.powf(-nu) * k * (-r).exp())
}

/// Fundamental solution of `-Δ + 1/4`, `2^{2-N} Gamma_0(r/2)`.
pub fn phi0(n: u32, r: f64) -> Result<f64, KernelError> {
    check_radius(r)?;
    Ok(2f64.powi(2 - n as i32) * gamma0(n, r / 2.0)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mass {
    /// `-Δ + 1`
    One,
    /// `-Δ + 1/4`
    Half,
}

/// Fundamental solution of `-Δ + m^2` for `m` in `{1, 1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YukawaKernel {
    pub n: u32,
    pub mass: Mass,
}

impl YukawaKernel {
    pub fn gamma0(n: u32) -> Self {
        Self { n, mass: Mass::One }
    }

    pub fn phi0(n: u32) -> Self {
        Self { n, mass: Mass::Half }
    }

    pub fn decay_rate(&self) -> f64 {
        match self.mass {
            Mass::One => 1.0,
            Mass::Half => 0.5,
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64, KernelError> {
        match self.mass {
            Mass::One => gamma0(self.n, r),
            Mass::Half => phi0(self.n, r),
        }
    }
}

/// Relative residual of the radial equation `-u'' - (N-1)/r u' + u = 0`
/// for `Gamma_0`, using a five-point stencil of width `1e-3 r`.
pub fn gamma0_residual(n: u32, r: f64) -> Result<f64, KernelError> {
    check_radius(r)?;
    let h = 1e-3 * r;
    let f = |x: f64| gamma0(n, x);
    let (fm2, fm1, f0, fp1, fp2) = (f(r - 2.0 * h)?, f(r - h)?, f(r)?, f(r + h)?, f(r + 2.0 * h)?);
    let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    let drift = (n as f64 - 1.0) / r * d1;
    let residual = -d2 - drift + f0;
    Ok(residual.abs() / (d2.abs() + drift.abs() + f0.abs()))
}

/// `|S^{N-2}| ∫_0^π g(|x - y|) sin^{N-2}θ dθ` for `|x| = r`, `|y| = s`.
///
/// The integrand peaks at `θ = 0` on the scale `|r - s|/sqrt(rs)`, so the
/// range is split into panels doubling from that scale.
fn angular_average<G: Fn(f64) -> f64>(n: u32, r: f64, s: f64, g: G) -> f64 {
    angular_average_diff(n, r, s, r - s, g)
}

/// As [`angular_average`] with `r - s` supplied separately, so callers that
/// know it more accurately than the floating-point difference can pass it.
fn angular_average_diff<G: Fn(f64) -> f64>(n: u32, r: f64, s: f64, diff: f64, g: G) -> f64 {
    let rule = gauss16();
    let rs = r * s;
    let diff2 = diff * diff;
    let integrand = |theta: f64| {
        let half = (0.5 * theta).sin();
        let dist = (diff2 + 4.0 * rs * half * half).sqrt();
        g(dist) * theta.sin().powi(n as i32 - 2)
    };
    let scale = diff.abs() / rs.sqrt();
    let mut total = 0.0;
    if scale >= 0.5 {
        let panels = 8;
        let w = PI / panels as f64;
        for k in 0..panels {
            total += rule.integrate(integrand, k as f64 * w, (k + 1) as f64 * w);
        }
    } else {
        let mut lo = 0.0;
        let mut hi = scale;
        while lo < PI {
            total += rule.integrate(integrand, lo, hi);
            lo = hi;
            hi = (2.0 * hi).min(PI);
        }
    }
    sphere_area(n - 1) * total
}

fn check_alpha(n: u32, alpha: f64) -> Result<(), KernelError> {
    if alpha > 0.0 && alpha < n as f64 {
        Ok(())
    } else {
        Err(KernelError::AlphaOutOfRange { alpha, n })
    }
}

/// Gauss hypergeometric series `2F1(a, b; c; z)` for `|z| <= 0.36`.
fn hyp2f1_small(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..400 {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

const SERIES_RATIO: f64 = 0.6;

/// Angular average of `|x - y|^{alpha - N}` over the sphere `|y| = s`,
/// scaled by `|S^{N-1}|`.
///
/// Uses the hypergeometric representation
/// `|S^{N-1}| max^{alpha-N} 2F1((N-alpha)/2, 1-alpha/2; N/2; (min/max)^2)`
/// when `min/max <= 0.6`, and direct angular quadrature otherwise.
pub fn riesz_angular(n: u32, alpha: f64, r: f64, s: f64) -> Result<f64, KernelError> {
    check_radius(r)?;
    check_radius(s)?;
    check_alpha(n, alpha)?;
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    let rho = lo / hi;
    if rho <= SERIES_RATIO {
        let nf = n as f64;
        let f = hyp2f1_small((nf - alpha) / 2.0, 1.0 - alpha / 2.0, nf / 2.0, rho * rho);
        return Ok(sphere_area(n) * hi.powf(alpha - nf) * f);
    }
    riesz_angular_quadrature(n, alpha, r, s)
}

/// Direct angular quadrature of the Riesz kernel, valid for all `r, s`
/// except `r = s` with `alpha <= 1`.
pub fn riesz_angular_quadrature(n: u32, alpha: f64, r: f64, s: f64) -> Result<f64, KernelError> {
    check_radius(r)?;
    check_radius(s)?;
    check_alpha(n, alpha)?;
    let expo = alpha - n as f64;
    if r != s {
        return Ok(angular_average(n, r, s, |d| d.powf(expo)));
    }
    if alpha <= 1.0 {
        return Err(KernelError::DiagonalSingular(alpha));
    }
    // |x - y| = 2r sin(θ/2); integrand ~ θ^{alpha-2}. Substitute θ = π u^g.
    let g = (2.0 / (alpha - 1.0)).ceil().clamp(1.0, 20.0);
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let theta = PI * u.powf(g);
        let jac = PI * g * u.powf(g - 1.0);
        let d = 2.0 * r * (0.5 * theta).sin();
        d.powf(expo) * theta.sin().powi(n as i32 - 2) * jac
    };
    Ok(sphere_area(n - 1) * integrate_adaptive(integrand, 0.0, 1.0, 1e-13))
}

/// Riesz angular kernel at `r = 1`, `s = e^u`. By homogeneity
/// `riesz_angular(N, alpha, r, s) = r^{alpha-N} riesz_log(N, alpha, ln(s/r))`.
///
/// The difference `1 - s` is formed with `expm1`, which keeps full relative
/// accuracy as `u -> 0`.
pub fn riesz_log(n: u32, alpha: f64, u: f64) -> Result<f64, KernelError> {
    check_alpha(n, alpha)?;
    if u == 0.0 {
        return riesz_angular_quadrature(n, alpha, 1.0, 1.0);
    }
    let s = u.exp();
    if (-u.abs()).exp() <= SERIES_RATIO {
        return riesz_angular(n, alpha, 1.0, s);
    }
    let expo = alpha - n as f64;
    Ok(angular_average_diff(n, 1.0, s, -u.exp_m1(), |d| d.powf(expo)))
}

/// Angular average of `Gamma_0(|x - y|)` over `|y| = s`, by direct
/// quadrature. This is the definitional route; [`GreenKernel`] evaluates
/// the same quantity in closed form.
pub fn green_angular(n: u32, r: f64, s: f64) -> Result<f64, KernelError> {
    check_radius(r)?;
    check_radius(s)?;
    if r == s {
        // |x - y|^{2-N} sin^{N-2} stays bounded; an endpoint-refining rule suffices.
        let integrand = |theta: f64| {
            let d = 2.0 * r * (0.5 * theta).sin();
            if d <= 0.0 {
                // limit of d^{2-N} sin^{N-2} θ times c_N
                return c_n(n) * r.powi(2 - n as i32);
            }
            gamma0(n, d).unwrap_or(0.0) * theta.sin().powi(n as i32 - 2)
        };
        return Ok(sphere_area(n - 1) * integrate_adaptive(integrand, 0.0, PI, 1e-13));
    }
    Ok(angular_average(n, r, s, |d| gamma0(n, d).unwrap_or(0.0)))
}

/// Closed form of the radial Green kernel,
/// `(rs)^{-nu} I_nu(min(r,s)) K_nu(max(r,s))` with `nu = N/2 - 1`,
/// factored as `a(min) b(max) e^{min - max}` so that no factor overflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreenKernel {
    pub n: u32,
}

impl GreenKernel {
    pub fn new(n: u32) -> Self {
        Self { n }
    }

    fn nu(&self) -> f64 {
        self.n as f64 / 2.0 - 1.0
    }

    /// `x^{-nu} I_nu(x) e^{-x}`.
    pub fn inner_factor(&self, x: f64) -> Result<f64, KernelError> {
        check_radius(x)?;
        let nu = self.nu();
        if x < 2.0 {
            // x^{-nu} I_nu(x) = 2^{-nu} Σ (x²/4)^k / (k! Γ(nu + k + 1)),
            // all terms positive
            let y = 0.25 * x * x;
            let mut term = 1.0 / (2f64.powf(nu) * gamma(nu + 1.0));
            let mut sum = term;
            for k in 1..60 {
                term *= y / (k as f64 * (nu + k as f64));
                sum += term;
                if term < 1e-17 * sum {
                    break;
                }
            }
            return Ok(sum * (-x).exp());
        }
        let (i, _) = bessel_ik_scaled(nu, x)?;
        Ok(x.powf(-nu) * i)
    }

    /// `x^{-nu} K_nu(x) e^{x}`.
    pub fn outer_factor(&self, x: f64) -> Result<f64, KernelError> {
        check_radius(x)?;
        let nu = self.nu();
        Ok(x.powf(-nu) * bessel_k_scaled(nu, x)?)
    }

    pub fn eval(&self, r: f64, s: f64) -> Result<f64, KernelError> {
        let (lo, hi) = if r < s { (r, s) } else { (s, r) };
        Ok(self.inner_factor(lo)? * self.outer_factor(hi)? * (lo - hi).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma0_three_dimensional_closed_form() {
        for i in 0..=200 {
            let r = 1e-3 * (20.0f64 / 1e-3).powf(i as f64 / 200.0);
            let exact = (-r).exp() / (4.0 * PI * r);
            assert!(rel(gamma0(3, r).unwrap(), exact) < 1e-12, "r={r}");
        }
        assert!((gamma0(3, 1.0).unwrap() - 0.029_274_9).abs() < 1e-7);
    }

    #[test]
    fn gamma0_flux_normalization_three_dimensions() {
        // -∫_{|x|=eps} d_r Gamma_0 dS = (1 + eps) e^{-eps} -> 1
        for &eps in &[1e-3, 1e-5] {
            let h = 1e-4 * eps;
            let d = (gamma0(3, eps + h).unwrap() - gamma0(3, eps - h).unwrap()) / (2.0 * h);
            let flux = -d * 4.0 * PI * eps * eps;
            assert!((flux - 1.0).abs() < 2.0 * eps, "eps={eps}: {flux}");
        }
    }

    #[test]
    fn c_n_values() {
        assert!(rel(c_n(3), 1.0 / (4.0 * PI)) < 1e-15);
        assert!((c_n(3) - 0.0795775).abs() < 1e-7);
        assert!(rel(c_n(4), 1.0 / (4.0 * PI * PI)) < 1e-15);
        assert!(rel(c_n(5), 1.0 / (8.0 * PI * PI)) < 1e-15);
        assert!((c_n(5) - 0.0126651).abs() < 1e-7);
    }

    #[test]
    fn c_n_matches_small_r_limit() {
        // oracle: Richardson extrapolation of r^{N-2} Gamma_0(r) to r = 0
        for n in 3..=6u32 {
            let g = |r: f64| r.powi(n as i32 - 2) * gamma0(n, r).unwrap();
            let (r1, r2) = (1e-4, 5e-5);
            let limit = if n == 3 {
                2.0 * g(r2) - g(r1)
            } else {
                (4.0 * g(r2) - g(r1)) / 3.0
            };
            assert!(rel(limit, c_n(n)) < 1e-6, "N={n}: {limit} vs {}", c_n(n));
        }
    }

    #[test]
    fn radial_ode_residual_small() {
        for n in 3..=6u32 {
            for i in 0..=60 {
                let r = 1e-3 * (20.0f64 / 1e-3).powf(i as f64 / 60.0);
                let res = gamma0_residual(n, r).unwrap();
                assert!(res < 1e-8, "N={n} r={r} residual {res}");
            }
        }
    }

    #[test]
    fn phi0_dominates_gamma0() {
        for n in 3..=6u32 {
            let mut prev_ratio = 1.0;
            for i in 0..=100 {
                let r = 1e-4 * (40.0f64 / 1e-4).powf(i as f64 / 100.0);
                let g = gamma0(n, r).unwrap();
                let p = phi0(n, r).unwrap();
                assert!(g <= p);
                let ratio = g / p;
                assert!(ratio <= prev_ratio + 1e-15);
                prev_ratio = ratio;
                if i == 0 {
                    assert!(ratio > 0.999);
                }
            }
            assert!(prev_ratio < 1e-7);
        }
        // N = 3: ratio phi0/gamma0 = e^{r/2}
        let r = 3.7;
        assert!(rel(phi0(3, r).unwrap() / gamma0(3, r).unwrap(), (r / 2.0).exp()) < 1e-13);
    }

    #[test]
    fn phi0_tail_product_is_constant() {
        for n in 3..=5u32 {
            let prod = |r: f64| phi0(n, r).unwrap() * r.powf((n as f64 - 1.0) / 2.0) * (r / 2.0).exp();
            let a = prod(400.0);
            let b = prod(800.0);
            assert!(rel(a, b) < 5e-3, "N={n}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(gamma0(3, 0.0), Err(KernelError::NonPositiveRadius(_))));
        assert!(matches!(phi0(3, -1.0), Err(KernelError::NonPositiveRadius(_))));
        assert!(matches!(riesz_angular(3, 3.0, 1.0, 2.0), Err(KernelError::AlphaOutOfRange { .. })));
        assert!(matches!(
            riesz_angular(3, 0.5, 1.0, 1.0),
            Err(KernelError::DiagonalSingular(_))
        ));
    }

    #[test]
    fn riesz_three_dimensional_alpha_two() {
        // 4π / max(r, s)
        assert!(rel(riesz_angular(3, 2.0, 1.0, 2.0).unwrap(), 2.0 * PI) < 1e-14);
        assert!(rel(riesz_angular(3, 2.0, 1.0, 1.2).unwrap(), 4.0 * PI / 1.2) < 1e-10);
        assert!(rel(riesz_angular(3, 2.0, 1.0, 1.0).unwrap(), 4.0 * PI) < 1e-9);
    }

    #[test]
    fn riesz_series_and_quadrature_agree() {
        for &(n, alpha) in &[(3u32, 0.5), (3, 1.5), (4, 1.0), (5, 2.0), (5, 3.3), (6, 0.7)] {
            for &rho in &[0.05, 0.3, 0.5, 0.6] {
                let a = riesz_angular(n, alpha, 2.0, 2.0 * rho).unwrap();
                let b = riesz_angular_quadrature(n, alpha, 2.0, 2.0 * rho).unwrap();
                assert!(rel(a, b) < 1e-11, "N={n} alpha={alpha} rho={rho}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn riesz_quadrature_against_adaptive_oracle() {
        for &(n, alpha) in &[(3u32, 0.5), (4, 1.5), (5, 2.5)] {
            for &s in &[0.9, 0.99, 0.999_9, 1.001, 1.3] {
                let r = 1.0;
                let f = |t: f64| {
                    // 1 - cos t written as 2 sin^2(t/2) to avoid cancellation
                    let d2 = (r - s) * (r - s) + 4.0 * r * s * (t / 2.0).sin().powi(2);
                    d2.powf((alpha - n as f64) / 2.0) * t.sin().powi(n as i32 - 2)
                };
                let breaks = [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, PI];
                let oracle = sphere_area(n - 1)
                    * breaks
                        .windows(2)
                        .map(|w| integrate_adaptive(f, w[0], w[1], 1e-14))
                        .sum::<f64>();
                let v = riesz_angular(n, alpha, r, s).unwrap();
                assert!(rel(v, oracle) < 1e-9, "N={n} alpha={alpha} s={s}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn riesz_log_matches_direct_evaluation() {
        for &(n, alpha) in &[(3u32, 0.5), (4, 1.5), (5, 2.0)] {
            for &u in &[-3.0, -0.4, -1e-3, 1e-6, 0.2, 2.5] {
                let a = riesz_log(n, alpha, u).unwrap();
                let b = riesz_angular(n, alpha, 1.0, u.exp()).unwrap();
                assert!(rel(a, b) < 1e-9, "N={n} alpha={alpha} u={u}");
            }
        }
        // N = 3, alpha = 2 exact: 4π / max(1, e^u)
        for &u in &[-1e-12, 1e-12, -1e-7, 3e-5] {
            let v = riesz_log(3, 2.0, u).unwrap();
            assert!(rel(v, 4.0 * PI / u.exp().max(1.0)) < 1e-12, "u={u}");
        }
    }

    #[test]
    fn riesz_origin_limit_and_homogeneity() {
        for &(n, alpha) in &[(3u32, 2.0), (4, 1.5), (5, 0.8)] {
            let v = riesz_angular(n, alpha, 1.7, 1e-9).unwrap();
            assert!(rel(v, sphere_area(n) * 1.7f64.powf(alpha - n as f64)) < 1e-12);
            for &lambda in &[0.5, 2.0, 10.0] {
                for &(r, s) in &[(1.0, 0.3), (1.0, 0.9), (0.5, 0.52), (2.0, 7.0)] {
                    let a = riesz_angular(n, alpha, lambda * r, lambda * s).unwrap();
                    let b = lambda.powf(alpha - n as f64) * riesz_angular(n, alpha, r, s).unwrap();
                    assert!(rel(a, b) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn green_three_dimensional_closed_form() {
        let exact = |r: f64, s: f64| -(-(r - s).abs()).exp() * (-2.0 * r.min(s)).exp_m1() / (2.0 * r * s);
        for &(r, s) in &[(1.0, 2.0), (0.1, 0.11), (3.0, 0.5), (1e-3, 5.0), (2.0, 2.0)] {
            let q = green_angular(3, r, s).unwrap();
            let c = GreenKernel::new(3).eval(r, s).unwrap();
            assert!(rel(q, exact(r, s)) < 1e-9, "quadrature r={r} s={s}");
            assert!(rel(c, exact(r, s)) < 1e-13, "closed r={r} s={s}: {}", rel(c, exact(r, s)));
        }
    }

    #[test]
    fn green_closed_form_matches_angular_quadrature() {
        for n in 4..=6u32 {
            let k = GreenKernel::new(n);
            for &(r, s) in &[(1.0, 2.0), (0.2, 0.25), (3.0, 0.5), (0.05, 4.0), (1.0, 1.01)] {
                let a = green_angular(n, r, s).unwrap();
                let b = k.eval(r, s).unwrap();
                assert!(rel(a, b) < 1e-8, "N={n} r={r} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn angular_kernels_symmetric_positive() {
        let g = GreenKernel::new(4);
        for i in 0..100 {
            for j in 0..100 {
                let r = 1e-2 * 1.07f64.powi(i);
                let s = 1e-2 * 1.07f64.powi(j);
                if i == j {
                    continue;
                }
                let a = riesz_angular(4, 1.5, r, s).unwrap();
                let b = riesz_angular(4, 1.5, s, r).unwrap();
                assert!(a > 0.0 && rel(a, b) < 1e-13);
                let a = g.eval(r, s).unwrap();
                let b = g.eval(s, r).unwrap();
                assert!(a > 0.0 && a == b);
            }
        }
    }

    #[test]
    fn green_exponential_tail_bound() {
        let g = GreenKernel::new(5);
        for &r in &[0.1, 1.0, 3.0] {
            let s0 = 2.0 * r + 2.0;
            let c = g.eval(r, s0).unwrap() * (s0 / 2.0).exp();
            for i in 0..50 {
                let s = s0 + 0.7 * i as f64;
                assert!(g.eval(r, s).unwrap() <= c * (-s / 2.0).exp() * (1.0 + 1e-12));
            }
        }
    }
}
