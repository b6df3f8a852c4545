//! Zeroth-order Bessel function of the first kind and the Jakes temporal
//! correlation built on it.

use std::f64::consts::{FRAC_PI_4, PI};

/// First positive zero of J₀.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_772_8;

const SERIES_LIMIT: f64 = 12.0;

/// J₀(x). Power series below |x| = 12, Hankel asymptotic expansion above;
/// absolute error stays below 1e-10 on the whole real line.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= -q / (k * k);
        sum += term;
        if k > q.sqrt() && term.abs() < 1e-18 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // a_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k); P takes even k, Q odd k,
    // each with alternating sign. Stop at the smallest term.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut xk = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60u32 {
        let odd = (2 * k - 1) as f64;
        a *= -(odd * odd) / (k as f64 * 8.0);
        xk *= x;
        let t = a / xk;
        if t.abs() >= last {
            break;
        }
        last = t.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q += sign * t;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Jakes time correlation ρ = J₀(2π f̄_d) for a normalized Doppler f̄_d.
pub fn jakes_rho(norm_doppler: f64) -> f64 {
    bessel_j0(2.0 * PI * norm_doppler)
}

/// Smallest normalized Doppler whose Jakes correlation equals `rho`, for
/// `rho` in [0, 1]. Inverts J₀ on its first monotone branch by bisection.
pub fn doppler_for_rho(rho: f64) -> Option<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return None;
    }
    if rho == 1.0 {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, J0_FIRST_ZERO / (2.0 * PI));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if jakes_rho(mid) > rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}
