//! Statistical test helpers used by the emission analysis and the
//! verification suites: Kolmogorov-Smirnov tests, chi-square homogeneity,
//! and binomial error bars.

/// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sqrt_n = n_eff.sqrt();
    kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

/// One-sample KS test of `samples` against Exp(rate). Returns (D, p).
pub fn ks_test_exponential(samples: &[f64], rate: f64) -> (f64, f64) {
    assert!(!samples.is_empty() && rate > 0.0);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    (d, ks_p_value(d, n))
}

/// Two-sample KS test. Returns (D, p).
pub fn ks_test_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).expect("finite samples"));
    ys.sort_by(|u, v| u.partial_cmp(v).expect("finite samples"));
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let n_eff = (n as f64 * m as f64) / (n as f64 + m as f64);
    (d, ks_p_value(d, n_eff))
}

/// Regularized lower incomplete gamma P(a, x).
fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series expansion
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) by continued fraction (x ≥ a+1).
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let fpmin = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / fpmin;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = b + an / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos log-gamma.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Survival function of the chi-square distribution with `dof` degrees of
/// freedom: P(X ≥ x).
pub fn chi2_survival(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let a = dof as f64 / 2.0;
    let half = x / 2.0;
    if half < a + 1.0 {
        (1.0 - gamma_p(a, half)).clamp(0.0, 1.0)
    } else {
        gamma_q_cf(a, half).clamp(0.0, 1.0)
    }
}

/// Chi-square homogeneity test of an r×2 table of (successes, failures) per
/// group. Returns (chi2, dof, p).
pub fn chi2_homogeneity(table: &[(usize, usize)]) -> (f64, usize, f64) {
    assert!(table.len() >= 2);
    let total: usize = table.iter().map(|(s, f)| s + f).sum();
    let total_s: usize = table.iter().map(|(s, _)| *s).sum();
    assert!(total > 0);
    let p_hat = total_s as f64 / total as f64;
    let mut chi2 = 0.0;
    for &(s, f) in table {
        let n = (s + f) as f64;
        let e_s = n * p_hat;
        let e_f = n * (1.0 - p_hat);
        if e_s > 0.0 {
            chi2 += (s as f64 - e_s).powi(2) / e_s;
        }
        if e_f > 0.0 {
            chi2 += (f as f64 - e_f).powi(2) / e_f;
        }
    }
    let dof = table.len() - 1;
    (chi2, dof, chi2_survival(chi2, dof))
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0);
    var.sqrt()
}
