//! Independent oracles used by the integration suites. Everything here is
//! deliberately written from first principles (Racah formulas, elementary
//! quadrature, a literal Markov chain) so it shares no code path with the
//! library it checks.

#![allow(dead_code)]

/// Exact factorial for small n.
pub fn factorial(n: i64) -> f64 {
    assert!((0..=40).contains(&n), "factorial argument {n}");
    (1..=n).map(|k| k as f64).product()
}

/// Triangle coefficient Δ(a,b,c) of angular momenta given as doubled
/// integers (a = 2j_a, etc.).
fn triangle(a2: i64, b2: i64, c2: i64) -> f64 {
    let f = |x2: i64| -> f64 {
        assert!(x2 % 2 == 0 && x2 >= 0, "non-integer factorial argument {x2}/2");
        factorial(x2 / 2)
    };
    (f(a2 + b2 - c2) * f(a2 - b2 + c2) * f(-a2 + b2 + c2) / f(a2 + b2 + c2 + 2)).sqrt()
}

/// Wigner 3j symbol via the Racah sum. All angular momenta and projections
/// are passed doubled (2j, 2m) so half-integers stay exact.
pub fn wigner_3j(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if m1 + m2 + m3 != 0 {
        return 0.0;
    }
    if j3 < (j1 - j2).abs() || j3 > j1 + j2 {
        return 0.0;
    }
    if m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    let f = |x2: i64| -> f64 {
        assert!(x2 % 2 == 0, "non-integer factorial argument {x2}/2");
        factorial(x2 / 2)
    };
    let t_min = 0i64
        .max(j2 - j3 - m1)
        .max(j1 - j3 + m2);
    let t_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    let mut t2 = t_min;
    while t2 <= t_max {
        assert!(t2 % 2 == 0);
        let sign = if (t2 / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let denom = f(t2)
            * f(j3 - j2 + m1 + t2)
            * f(j3 - j1 - m2 + t2)
            * f(j1 + j2 - j3 - t2)
            * f(j1 - m1 - t2)
            * f(j2 + m2 - t2);
        sum += sign / denom;
        t2 += 2;
    }
    let prefactor = triangle(j1, j2, j3)
        * (f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j3 + m3) * f(j3 - m3)).sqrt();
    let phase = if ((j1 - j2 - m3) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    phase * prefactor * sum
}

/// Wigner 6j symbol via the Racah formula, arguments doubled.
pub fn wigner_6j(j1: i64, j2: i64, j3: i64, j4: i64, j5: i64, j6: i64) -> f64 {
    let triads = [
        (j1, j2, j3),
        (j1, j5, j6),
        (j4, j2, j6),
        (j4, j5, j3),
    ];
    for (a, b, c) in triads {
        if c < (a - b).abs() || c > a + b || (a + b + c) % 2 != 0 {
            return 0.0;
        }
    }
    let f = |x2: i64| -> f64 {
        assert!(x2 % 2 == 0, "non-integer factorial argument {x2}/2");
        factorial(x2 / 2)
    };
    let prefactor = triangle(j1, j2, j3) * triangle(j1, j5, j6) * triangle(j4, j2, j6)
        * triangle(j4, j5, j3);
    let a1 = j1 + j2 + j3;
    let a2 = j1 + j5 + j6;
    let a3 = j4 + j2 + j6;
    let a4 = j4 + j5 + j3;
    let b1 = j1 + j2 + j4 + j5;
    let b2 = j2 + j3 + j5 + j6;
    let b3 = j3 + j1 + j6 + j4;
    let t_min = a1.max(a2).max(a3).max(a4);
    let t_max = b1.min(b2).min(b3);
    let mut sum = 0.0;
    let mut t = t_min;
    while t <= t_max {
        let sign = if (t / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let num = f(t + 2);
        let denom = f(t - a1) * f(t - a2) * f(t - a3) * f(t - a4) * f(b1 - t) * f(b2 - t)
            * f(b3 - t);
        sum += sign * num / denom;
        t += 2;
    }
    prefactor * sum
}

/// Hyperfine decay branching fraction oracle for J'=1/2 → J=1/2, I=1/2:
/// b ∝ (2F+1)(2F'+1) {J J' 1; F' F I}² (3j(F 1 F'; -mF q mF'))²,
/// normalized over all destinations of the upper level. Arguments are
/// plain quantum numbers; q is the spherical dipole component mF - mF'.
pub fn branching_oracle(f_upper: i64, m_upper: i64) -> Vec<(i64, i64, f64)> {
    let (j2, i2) = (1i64, 1i64); // doubled J = I = 1/2
    let mut raw: Vec<(i64, i64, f64)> = Vec::new();
    for f_lower in 0..=1i64 {
        let sixj = wigner_6j(j2, j2, 2, 2 * f_upper, 2 * f_lower, i2);
        for m_lower in -f_lower..=f_lower {
            let q = m_lower - m_upper;
            if q.abs() > 1 {
                continue;
            }
            let threej =
                wigner_3j(2 * f_lower, 2, 2 * f_upper, -2 * m_lower, 2 * q, 2 * m_upper);
            let b = (2 * f_lower + 1) as f64
                * (2 * f_upper + 1) as f64
                * sixj
                * sixj
                * threej
                * threej;
            if b > 1e-14 {
                raw.push((f_lower, m_lower, b));
            }
        }
    }
    let total: f64 = raw.iter().map(|(_, _, b)| b).sum();
    raw.into_iter().map(|(f, m, b)| (f, m, b / total)).collect()
}

/// Composite Simpson rule, a different quadrature family from the library's
/// Gauss-Legendre.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Nested Simpson over a rectangle.
pub fn simpson_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    n: usize,
) -> f64 {
    simpson(|x| simpson(|y| f(x, y), y0, y1, n), x0, x1, n)
}

/// Absorbing Markov chain for the optical cycling limit: from the driven
/// ground state each excitation/decay cycle moves 1/3 of the remaining
/// population to each of the two dark states and returns 1/3.
pub struct CyclingChain {
    pub remaining: f64,
    pub dark_nu1: f64,
    pub dark_nu0: f64,
}

impl CyclingChain {
    pub fn run(cycles: usize) -> Self {
        let mut s = Self { remaining: 1.0, dark_nu1: 0.0, dark_nu0: 0.0 };
        for _ in 0..cycles {
            let moved = s.remaining / 3.0;
            s.dark_nu1 += moved;
            s.dark_nu0 += moved;
            s.remaining -= 2.0 * moved;
        }
        s
    }
}

/// Pearson chi-squared statistic for a two-sample homogeneity test over
/// the four correlation cells. Compare against the dof=3 critical value.
pub fn chi2_two_sample(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let na: f64 = a.iter().sum();
    let nb: f64 = b.iter().sum();
    let mut chi2 = 0.0;
    for i in 0..4 {
        let pooled = (a[i] + b[i]) / (na + nb);
        for (obs, n) in [(a[i], na), (b[i], nb)] {
            let expect = pooled * n;
            if expect > 0.0 {
                chi2 += (obs - expect).powi(2) / expect;
            }
        }
    }
    chi2
}

/// Critical value of chi-squared with 3 dof at p = 0.01.
pub const CHI2_DOF3_P01: f64 = 11.345;
