//! Special functions: normal tails through `erfc`, Poisson probabilities through the
//! saddle-point pmf and the regularized incomplete gamma function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `1 - Phi(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln(1 - Phi(x))`, finite for every finite `x`.
pub fn ln_normal_sf(x: f64) -> f64 {
    if x < 30.0 {
        return normal_sf(x).ln();
    }
    // Laplace continued fraction for the Mills ratio, evaluated bottom-up.
    let mut cf = x;
    for k in (1..=60).rev() {
        cf = x + k as f64 / cf;
    }
    -0.5 * x * x - LN_SQRT_2PI - cf.ln()
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Stirling series remainder `ln Gamma(x+1) - (x+1/2) ln x + x - ln sqrt(2 pi)`.
fn stirling_error(x: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if x <= 15.0 {
        return ln_gamma(x + 1.0) - (x + 0.5) * x.ln() + x - LN_SQRT_2PI;
    }
    let x2 = x * x;
    (S0 - (S1 - (S2 - (S3 - S4 / x2) / x2) / x2) / x2) / x
}

/// Deviance term `x ln(x/np) + np - x`, accurate when `x` is close to `np`.
fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln( lambda^x e^{-lambda} / Gamma(x+1) )` for real `x >= 0`.
pub fn ln_poisson_pmf_real(x: f64, lambda: f64) -> f64 {
    if x == 0.0 {
        return -lambda;
    }
    -stirling_error(x) - deviance(x, lambda) - 0.5 * (2.0 * PI * x).ln()
}

/// `ln P(Y = k)` for `Y ~ Poisson(lambda)`.
pub fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    ln_poisson_pmf_real(k as f64, lambda)
}

/// `P(Y = k)` for `Y ~ Poisson(lambda)`.
pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    ln_poisson_pmf(k, lambda).exp()
}

fn max_iterations(a: f64) -> usize {
    200 + (40.0 * a.sqrt()) as usize
}

/// Lower regularized incomplete gamma `P(a, x)` by its power series, or `None` if the
/// series has not converged.
fn gamma_p_series(a: f64, x: f64) -> Option<f64> {
    let prefactor = ln_poisson_pmf_real(a, x).exp();
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..max_iterations(a) {
        term *= x / (a + n as f64);
        sum += term;
        if term < sum * 1e-17 {
            return Some(prefactor * sum);
        }
    }
    None
}

/// Upper regularized incomplete gamma `Q(a, x)` by modified Lentz continued fraction.
fn gamma_q_fraction(a: f64, x: f64) -> Option<f64> {
    const TINY: f64 = 1e-300;
    // x^a e^{-x} / Gamma(a) = a * (x^a e^{-x} / Gamma(a+1))
    let prefactor = a * ln_poisson_pmf_real(a, x).exp();
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..max_iterations(a) {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            return Some(prefactor * h);
        }
    }
    None
}

/// Regularized incomplete gamma pair `(P(a,x), Q(a,x))`, or `None` on non-convergence.
pub fn regularized_gamma(a: f64, x: f64) -> Option<(f64, f64)> {
    if x <= 0.0 {
        return Some((0.0, 1.0));
    }
    if x < a + 1.0 {
        let p = gamma_p_series(a, x)?;
        Some((p, 1.0 - p))
    } else {
        let q = gamma_q_fraction(a, x)?;
        Some((1.0 - q, q))
    }
}

/// `P(Y >= j)` by summing the pmf outward from `j`, using the complement when `j` is
/// below the mean.
pub fn poisson_sf_by_summation(j: u64, lambda: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    if (j as f64) > lambda {
        // upward: pmf(k+1) = pmf(k) * lambda / (k+1)
        let mut term = poisson_pmf(j, lambda);
        let mut sum = crate::sum::CompensatedSum::new();
        let mut k = j;
        while term > 0.0 {
            sum.add(term);
            if term < 1e-18 * sum.value() {
                break;
            }
            k += 1;
            term *= lambda / k as f64;
        }
        sum.value()
    } else {
        // downward over k < j: pmf(k-1) = pmf(k) * k / lambda
        let mut k = j - 1;
        let mut term = poisson_pmf(k, lambda);
        let mut sum = crate::sum::CompensatedSum::new();
        loop {
            sum.add(term);
            if k == 0 || term < 1e-18 * sum.value() {
                break;
            }
            term *= k as f64 / lambda;
            k -= 1;
        }
        1.0 - sum.value()
    }
}

/// `P(Y >= j)` for `Y ~ Poisson(lambda)`: `P(j, lambda)` by the incomplete gamma
/// identity, falling back to pmf summation when the expansion fails to converge.
pub fn poisson_sf(j: u64, lambda: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    match regularized_gamma(j as f64, lambda) {
        Some((p, _)) => p.clamp(0.0, 1.0),
        None => poisson_sf_by_summation(j, lambda).clamp(0.0, 1.0),
    }
}

/// `P(Y <= k)` for `Y ~ Poisson(lambda)`.
pub fn poisson_cdf(k: u64, lambda: f64) -> f64 {
    match regularized_gamma(k as f64 + 1.0, lambda) {
        Some((_, q)) => q.clamp(0.0, 1.0),
        None => (1.0 - poisson_sf_by_summation(k + 1, lambda)).clamp(0.0, 1.0),
    }
}
