//! Hurwitz zeta function for real arguments.

pub use statrs::consts::EULER_MASCHERONI as EULER_GAMMA;
pub use statrs::function::gamma::digamma;

/// `B₂, B₄, …, B₂₀`.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174_611.0 / 330.0,
];

/// `ζ(s, a) = Σ_{n≥0} (n + a)^{−s}`, analytically continued in `s ≠ 1`,
/// for `a > 0`. Euler–Maclaurin after `N` explicit terms.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(a > 0.0, "hurwitz_zeta needs a > 0, got {a}");
    assert!(s != 1.0, "hurwitz_zeta has a pole at s = 1");
    let n = 24 + s.abs().ceil() as usize;
    let mut sum = 0.0;
    for k in 0..n {
        sum += (k as f64 + a).powf(-s);
    }
    let x = n as f64 + a;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // s(s+1)…(s+2k−2) / (2k)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = x.powf(-s - 1.0);
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b * rising / fact * power;
        sum += term;
        let k2 = 2.0 * (k + 1) as f64;
        rising *= (s + k2 - 1.0) * (s + k2);
        fact *= (k2 + 1.0) * (k2 + 2.0);
        power /= x * x;
    }
    sum
}

/// `binom(w, k)` for real `w`.
pub fn binomial(w: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (w - i as f64) / (i + 1) as f64)
}
