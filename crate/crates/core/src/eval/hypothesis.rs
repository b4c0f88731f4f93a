//! Normality and paired-difference tests.
//!
//! Shapiro–Wilk follows Royston's AS R94 algorithm (as in R's `swilk.c`);
//! the Wilcoxon signed-rank test follows R's `wilcox.test` conventions:
//! zeros dropped, mid-ranks for ties, exact null distribution for n < 50
//! without ties or zeros, otherwise the tie-corrected normal approximation
//! with continuity correction.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::EvalError;

/// Significance level gating the normality check.
pub const NORMALITY_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

/// Which paired test produced a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairedTest {
    PairedT,
    WilcoxonExact,
    WilcoxonApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedOutcome {
    pub test: PairedTest,
    pub statistic: f64,
    pub p_value: f64,
}

fn poly(cc: &[f64], x: f64) -> f64 {
    cc.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Shapiro–Wilk W and p-value. Valid for 3 ≤ n ≤ 5000.
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk, EvalError> {
    const G: [f64; 2] = [-2.273, 0.459];
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(EvalError::InsufficientCases { needed: 3, got: n });
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range < 1e-19 {
        return Err(EvalError::ZeroVariance);
    }

    let an = n as f64;
    let half = n / 2;
    // Half-vector of coefficients, largest first.
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let std_normal = Normal::standard();
        let m: Vec<f64> = (1..=half).map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25))).collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first_free, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in first_free..half {
            a[i] = -m[i] / fac;
        }
    }

    // Full antisymmetric coefficient vector against sorted data.
    let coef: Vec<f64> = (0..n)
        .map(|i| {
            let j = n - 1 - i;
            if i < j {
                -a[i]
            } else if i > j {
                a[j]
            } else {
                0.0
            }
        })
        .collect();
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let mean_a = coef.iter().sum::<f64>() / an;
    let mean_x = xs.iter().sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (ca, cx) in coef.iter().zip(&xs) {
        let da = ca - mean_a;
        let dx = cx - mean_x;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::PI / 3.0;
        let p = (pi6 * (w.sqrt().asin() - stqr)).max(0.0);
        return Ok(ShapiroWilk { w, p_value: p });
    }

    let mut y = w1.ln();
    let (mean, sd) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return Ok(ShapiroWilk { w, p_value: 1e-99 });
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let ln_n = an.ln();
        (poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    let p = Normal::new(mean, sd).expect("positive sd").sf(y);
    Ok(ShapiroWilk { w, p_value: p })
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sided one-sample t-test of the differences against zero.
pub fn paired_t(differences: &[f64]) -> Result<PairedOutcome, EvalError> {
    let n = differences.len();
    if n < 2 {
        return Err(EvalError::InsufficientCases { needed: 2, got: n });
    }
    let (mean, sd) = mean_sd(differences);
    if sd == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df > 0");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedOutcome { test: PairedTest::PairedT, statistic: t, p_value: p })
}

/// Mid-ranks of `values` (1-based).
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Number of subsets of {1..n} for each rank sum 0..=n(n+1)/2.
fn signed_rank_counts(n: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0.0; max + 1];
    counts[0] = 1.0;
    for k in 1..=n {
        for s in (k..=max).rev() {
            counts[s] += counts[s - k];
        }
    }
    counts
}

/// Two-sided Wilcoxon signed-rank test on paired differences.
pub fn wilcoxon_signed_rank(differences: &[f64]) -> Result<PairedOutcome, EvalError> {
    let nonzero: Vec<f64> = differences.iter().copied().filter(|d| *d != 0.0).collect();
    let had_zeros = nonzero.len() != differences.len();
    let n = nonzero.len();
    if n == 0 {
        return Err(EvalError::ZeroVariance);
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&abs);
    let v: f64 = ranks.iter().zip(&nonzero).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();

    let mut tie_sizes = Vec::new();
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        tie_sizes.push((j - i) as f64);
        i = j;
    }
    let has_ties = tie_sizes.iter().any(|t| *t > 1.0);
    let nf = n as f64;

    if n < 50 && !has_ties && !had_zeros {
        let counts = signed_rank_counts(n);
        let total = 2f64.powi(n as i32);
        let stat = v.round() as usize;
        let lower = stat.min(counts.len() - 1 - stat);
        let tail: f64 = counts[..=lower].iter().sum::<f64>() / total;
        return Ok(PairedOutcome { test: PairedTest::WilcoxonExact, statistic: v, p_value: (2.0 * tail).min(1.0) });
    }

    let z0 = v - nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|t| t * t * t - t).sum::<f64>() / 48.0;
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let z = (z0 - 0.5 * z0.signum()) / sigma;
    let std_normal = Normal::standard();
    let p = (2.0 * std_normal.cdf(z).min(std_normal.sf(z))).min(1.0);
    Ok(PairedOutcome { test: PairedTest::WilcoxonApprox, statistic: v, p_value: p })
}

/// Shapiro–Wilk-gated paired test. Returns `None` (reported as n/a) when the
/// differences have zero variance. Samples too small for Shapiro–Wilk
/// (n = 2) go straight to the Wilcoxon test.
pub fn test_paired(differences: &[f64]) -> Result<Option<PairedOutcome>, EvalError> {
    let n = differences.len();
    if n < 2 {
        return Err(EvalError::InsufficientCases { needed: 2, got: n });
    }
    let first = differences[0];
    if differences.iter().all(|d| *d == first) {
        return Ok(None);
    }
    if n >= 3 {
        let sw = shapiro_wilk(differences)?;
        if sw.p_value >= NORMALITY_ALPHA {
            return paired_t(differences).map(Some);
        }
    }
    wilcoxon_signed_rank(differences).map(Some)
}
