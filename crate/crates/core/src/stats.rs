//! Distribution helpers: chi-square quantiles, exact binomial intervals,
//! a one-sample Kolmogorov–Smirnov test and seed derivation.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

pub fn chi2_cdf(dof: u32, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    gamma_lr(0.5 * dof as f64, 0.5 * z)
}

pub fn chi2_sf(dof: u32, z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    gamma_ur(0.5 * dof as f64, 0.5 * z)
}

fn chi2_pdf(dof: u32, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let k = 0.5 * dof as f64;
    ((k - 1.0) * z.ln() - 0.5 * z - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Returns `z` with `P(chi2_dof <= z) = prob`.
///
/// Safeguarded Newton on the regularized incomplete gamma; the upper tail is
/// used when `prob > 0.5` so that small upper-tail masses keep full relative
/// precision.
pub fn chi2_quantile(dof: u32, prob: f64) -> f64 {
    assert!(dof >= 1, "chi2_quantile: dof must be positive");
    assert!(prob > 0.0 && prob < 1.0, "chi2_quantile: prob must be in (0,1)");
    if prob > 0.5 {
        solve_chi2(dof, 1.0 - prob, true)
    } else {
        solve_chi2(dof, prob, false)
    }
}

/// Returns `z` with `P(chi2_dof > z) = tail`, i.e. the upper-`tail` quantile
/// written `chi2_{dof, tail}` in the interval constructions.
pub fn chi2_upper_quantile(dof: u32, tail: f64) -> f64 {
    assert!(dof >= 1, "chi2_upper_quantile: dof must be positive");
    assert!(tail > 0.0 && tail < 1.0, "chi2_upper_quantile: tail must be in (0,1)");
    if tail < 0.5 {
        solve_chi2(dof, tail, true)
    } else {
        solve_chi2(dof, 1.0 - tail, false)
    }
}

fn solve_chi2(dof: u32, target: f64, upper: bool) -> f64 {
    // f(z) is increasing in z in both branches.
    let f = |z: f64| {
        if upper {
            target - chi2_sf(dof, z)
        } else {
            chi2_cdf(dof, z) - target
        }
    };
    let mut lo = 0.0;
    let mut hi = (dof as f64).max(1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fz = f(z);
        if fz == 0.0 {
            return z;
        }
        if fz < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let d = chi2_pdf(dof, z);
        let mut next = if d > 0.0 { z - fz / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 1e-15 * z.max(1e-300) || hi - lo <= 1e-15 * hi {
            return next;
        }
        z = next;
    }
    z
}

/// Exact (Clopper–Pearson) two-sided interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    assert!(level > 0.0 && level < 1.0);
    let tail = 0.5 * (1.0 - level);
    let s = successes as f64;
    let n = trials as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        beta_quantile(s, n - s + 1.0, tail)
    };
    let hi = if successes == trials {
        1.0
    } else {
        beta_quantile(s + 1.0, n - s, 1.0 - tail)
    };
    (lo, hi)
}

fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Result of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `data` against the continuous CDF `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> KsResult {
    assert!(!data.is_empty());
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    }
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit stream seed from a master seed and an index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Mean and standard error of the mean.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
