//! Gamma and modified Bessel functions.
//!
//! `K_nu` and `I_nu` use Temme's series for `x < 2` and Steed's continued
//! fraction above, with `I_nu` recovered from the Wronskian. Half-integer
//! orders of `K` short-circuit to the terminating closed form.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialError {
    #[error("argument must be positive (got {0})")]
    NonPositiveArgument(f64),
    #[error("order must be non-negative (got {0})")]
    NegativeOrder(f64),
    #[error("series failed to converge for nu = {nu}, x = {x}")]
    NoConvergence { nu: f64, x: f64 },
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_integer(x: f64) -> bool {
    x == x.round()
}

/// Gamma function. Integer and half-integer arguments use exact products.
pub fn gamma(x: f64) -> f64 {
    if x > 0.0 && x <= 171.0 && is_integer(x) {
        return (1..x as u64).map(|k| k as f64).product();
    }
    if x > 0.0 && x <= 171.0 && is_integer(x - 0.5) {
        // Gamma(n + 1/2) = sqrt(pi) (2n-1)!! / 2^n
        let n = (x - 0.5) as u64;
        let mut v = PI.sqrt();
        for k in 0..n {
            v *= k as f64 + 0.5;
        }
        return v;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: u32) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

// Taylor coefficients of 1/Gamma(z) = sum_k C_k z^k, k = 1..26.
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// `(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))` for `|mu| <= 1/2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    let mut gampl = 0.0;
    let mut gammi = 0.0;
    // 1/Gamma(1+mu) = sum_k C_k mu^{k-1}
    let mut pw = 1.0;
    for (i, c) in RECIP_GAMMA.iter().enumerate() {
        let k = i + 1;
        gampl += c * pw;
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        gammi += c * pw * sign;
        if k % 2 == 0 {
            // mu^{k-2}
            gam1 -= c * pw / if mu == 0.0 { 1.0 } else { mu };
        } else {
            gam2 += c * pw;
        }
        pw *= mu;
    }
    if mu == 0.0 {
        gam1 = -RECIP_GAMMA[1];
    }
    (gam1, gam2, gampl, gammi)
}

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAXIT: usize = 100_000;

/// Exponentially scaled `(I_nu(x) e^{-x}, K_nu(x) e^{x})`.
pub fn bessel_ik_scaled(nu: f64, x: f64) -> Result<(f64, f64), SpecialError> {
    if !(x > 0.0) {
        return Err(SpecialError::NonPositiveArgument(x));
    }
    if nu < 0.0 {
        return Err(SpecialError::NegativeOrder(nu));
    }
    let nl = (nu + 0.5).floor() as usize;
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    // CF1 for I'_nu / I_nu.
    let mut h = (nu * xi).max(FPMIN);
    let mut b = xi2 * nu;
    let mut d = 0.0;
    let mut c = h;
    let mut converged = false;
    for _ in 0..MAXIT {
        b += xi2;
        d = 1.0 / (b + d);
        c = b + 1.0 / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SpecialError::NoConvergence { nu, x });
    }
    let mut ril = FPMIN;
    let mut ripl = h * ril;
    let ril1 = ril;
    let mut fact = nu * xi;
    for _ in (1..=nl).rev() {
        let ritemp = fact * ril + ripl;
        fact -= xi;
        ripl = fact * ritemp + ril;
        ril = ritemp;
    }
    let f = ripl / ril;

    // K_mu and K_{mu+1}, scaled by e^x.
    let (rkmu, rk1) = if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut done = false;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= dd / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * ff;
            sum += del;
            let del1 = c * (p - fi * ff);
            sum1 += del1;
            if del.abs() < sum.abs() * EPS {
                done = true;
                break;
            }
        }
        if !done {
            return Err(SpecialError::NoConvergence { nu, x });
        }
        let scale = x.exp();
        (sum * scale, sum1 * xi2 * scale)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut done = false;
        for i in 1..MAXIT {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                done = true;
                break;
            }
        }
        if !done {
            return Err(SpecialError::NoConvergence { nu, x });
        }
        let h = a1 * h;
        let rkmu = (PI / (2.0 * x)).sqrt() / s;
        (rkmu, rkmu * (xmu + x + 0.5 - h) * xi)
    };

    let rkmup = xmu * xi * rkmu - rk1;
    let rimu = xi / (f * rkmu - rkmup);
    let ri = rimu * ril1 / ril;

    let mut kmu = rkmu;
    let mut k1 = rk1;
    for i in 1..=nl {
        let next = (xmu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    Ok((ri, kmu))
}

/// `K_nu(x) e^x` for half-integer `nu = n + 1/2`:
/// `sqrt(pi/(2x)) sum_k (n+k)!/(k!(n-k)!) (2x)^{-k}`.
fn bessel_k_half_integer_scaled(n: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=n {
        let k = k as f64;
        let nf = n as f64;
        term *= (nf + k) * (nf - k + 1.0) / (k * 2.0 * x);
        sum += term;
    }
    (PI / (2.0 * x)).sqrt() * sum
}

/// `K_nu(x) e^x`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64, SpecialError> {
    if !(x > 0.0) {
        return Err(SpecialError::NonPositiveArgument(x));
    }
    if nu < 0.0 {
        return Err(SpecialError::NegativeOrder(nu));
    }
    if is_integer(nu - 0.5) && nu < 64.0 {
        return Ok(bessel_k_half_integer_scaled((nu - 0.5) as u32, x));
    }
    bessel_ik_scaled(nu, x).map(|(_, k)| k)
}

/// Modified Bessel function of the second kind `K_nu(x)`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64, SpecialError> {
    Ok(bessel_k_scaled(nu, x)? * (-x).exp())
}

/// Modified Bessel function of the first kind `I_nu(x)`.
pub fn bessel_i(nu: f64, x: f64) -> Result<f64, SpecialError> {
    Ok(bessel_ik_scaled(nu, x)?.0 * x.exp())
}
