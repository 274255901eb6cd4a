//! Gamma function and the handful of combinatorial helpers used by the
//! Mittag-Leffler machinery.
//!
//! Lanczos approximation (g = 7, 9 coefficients) with reflection for
//! `x < 1/2`; exact factorials for small positive integers. `ln_gamma`
//! switches to the Stirling series for large arguments so that it stays
//! accurate where `gamma` itself overflows.

use std::f64::consts::PI;

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

/// `ln(2π)/2`
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Largest argument for which `gamma` is finite.
pub const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

fn factorial_table() -> &'static [f64; 171] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; 171]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; 171];
        for n in 1..171 {
            t[n] = t[n - 1] * n as f64;
        }
        t
    })
}

/// `n!` as f64 (infinite for n > 170).
pub fn factorial(n: usize) -> f64 {
    if n <= 170 {
        factorial_table()[n]
    } else {
        f64::INFINITY
    }
}

/// Binomial coefficient `C(n, k)` in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    // below 2^53 the product is an integer up to rounding noise
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (Γ(x+1))
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) for real x. Returns ±∞ at the poles and for overflowing arguments.
pub fn gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if is_nonpositive_integer(x) {
        return f64::INFINITY;
    }
    if x == x.floor() && x > 0.0 && x <= 171.0 {
        return factorial(x as usize - 1);
    }
    if x < 0.5 {
        // reflection; sin(πx) evaluated on a reduced argument
        let s = sin_pi(x);
        return PI / (s * gamma(1.0 - x));
    }
    if x > GAMMA_MAX_ARG {
        return f64::INFINITY;
    }
    if x > 140.0 {
        // split the power to keep intermediates finite
        let xm = x - 1.0;
        let t = xm + LANCZOS_G + 0.5;
        let p = t.powf(0.5 * (xm + 0.5));
        return (2.0 * PI).sqrt() * p * (p * (-t).exp()) * lanczos_sum(xm);
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(xm + 0.5) * (-t).exp() * lanczos_sum(xm)
}

/// `sin(πx)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).floor(); // r in [0, 2)
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r == 0.5 {
        return 1.0;
    }
    if r == 1.5 {
        return -1.0;
    }
    (PI * r).sin()
}

/// 1/Γ(x), zero at the poles and finite (possibly underflowing to zero)
/// for large arguments.
pub fn rgamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > GAMMA_MAX_ARG - 1.0 {
        return (-ln_gamma(x)).exp();
    }
    if x < -GAMMA_MAX_ARG + 1.0 {
        // 1/Γ(x) = sin(πx) Γ(1-x) / π
        let lg = ln_gamma(1.0 - x);
        return sin_pi(x) / PI * lg.exp();
    }
    1.0 / gamma(x)
}

/// ln|Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if is_nonpositive_integer(x) {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return (PI / sin_pi(x).abs()).ln() - ln_gamma(1.0 - x);
    }
    if x >= 15.0 {
        // Stirling series
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series = inv
            * (1.0 / 12.0
                - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0)))));
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + series;
    }
    gamma(x).abs().ln()
}

/// Sign of Γ(x) (0 at poles).
pub fn gamma_sign(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > 0.0 {
        return 1.0;
    }
    // Γ is negative on (-1,0), (-3,-2), ...
    if (x.floor() as i64).rem_euclid(2) == 1 {
        -1.0
    } else {
        1.0
    }
}
