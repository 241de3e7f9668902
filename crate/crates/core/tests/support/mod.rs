//! Independent reference calculations shared by the integration suites.
//!
//! Nothing here calls into the simulator's signal path.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule over `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Exponentially scaled modified Bessel function `exp(-z) I0(z)`, from
/// `I0(z) = (1/pi) int_0^pi exp(z cos t) dt`.
pub fn bessel_i0e(z: f64) -> f64 {
    simpson(|t| (z * (t.cos() - 1.0)).exp(), 0.0, PI, 4000) / PI
}

/// Noncoherent `M`-ary orthogonal symbol error probability at `Es/N0`,
/// by quadrature over the Rician envelope of the signal bin:
///
/// `P_e = int f_Rice(x; nu) [1 - (1 - exp(-x^2/2))^(M-1)] dx`, `nu = sqrt(2 Es/N0)`.
pub fn noncoherent_ser(m: usize, es_n0: f64) -> f64 {
    let nu = (2.0 * es_n0).sqrt();
    let lo = (nu - 12.0).max(0.0);
    let hi = nu + 12.0;
    let integrand = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let rice = x * (-(x - nu) * (x - nu) / 2.0).exp() * bessel_i0e(x * nu);
        let ln_noise_below = ((m - 1) as f64) * (-(-x * x / 2.0).exp()).ln_1p();
        rice * -ln_noise_below.exp_m1()
    };
    simpson(integrand, lo, hi, 4000)
}

/// The alternating closed form
/// `sum_{k=1}^{M-1} (-1)^{k+1} C(M-1, k) / (k+1) exp(-k/(k+1) Es/N0)`.
/// Only numerically usable for small `M`.
pub fn noncoherent_ser_closed_form(m: usize, es_n0: f64) -> f64 {
    let mut binom = 1.0;
    let mut total = 0.0;
    for k in 1..m {
        binom *= (m - k) as f64 / k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let kf = k as f64;
        total += sign * binom / (kf + 1.0) * (-(kf / (kf + 1.0)) * es_n0).exp();
    }
    total
}

/// `Es/N0 = M / sigma^2` with `sigma^2 = 1 / (S 10^(snr/10))`.
pub fn es_n0(spreading_factor: u32, snr_db: f64) -> f64 {
    let m = (1u64 << spreading_factor) as f64;
    m * spreading_factor as f64 * 10f64.powf(snr_db / 10.0)
}

/// Mean and standard error of the mean of iid samples.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error of a binomial proportion.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Prints one acceptance line and returns `pass`.
pub fn report(name: &str, pass: bool, detail: &str) -> bool {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
