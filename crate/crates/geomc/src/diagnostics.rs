//! Chain quality diagnostics: effective sample size, Kolmogorov-Smirnov
//! distribution comparisons, and standardized moment checks.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{GmcError, Result};

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Standardized differences between the first and second sample moments of two
/// sample sets. `second` stores the upper triangle of the second-moment matrix
/// in row-major order, diagonal included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentDeltas {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl MomentDeltas {
    /// Largest absolute standardized difference across all moments.
    pub fn max_abs(&self) -> f64 {
        self.first
            .iter()
            .chain(&self.second)
            .fold(0.0f64, |m, &z| m.max(z.abs()))
    }
}

/// Per-coordinate summary of a single chain, as written to diagnostics files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub accept_rate: f64,
    /// Effective sample size per coordinate series.
    pub ess: Vec<f64>,
    /// Integrated autocorrelation time per coordinate series.
    pub act: Vec<f64>,
    /// First-half versus second-half test per coordinate.
    pub ks_split_half: Vec<KsResult>,
    /// First-half versus second-half standardized moment differences.
    pub moment_deltas_split_half: MomentDeltas,
}

/// Integrated autocorrelation time via the initial-positive-sequence rule:
/// sum adjacent autocorrelation pairs while they stay positive.
///
/// Anticorrelated chains legitimately give times below 1 (so the effective
/// sample size can exceed the series length); a nonpositive estimate means the
/// estimator broke down and is reported as an error.
pub fn integrated_autocorr_time(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 10 {
        return Err(GmcError::DegenerateSeries(format!(
            "need at least 10 points, got {n}"
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(GmcError::Numeric(
            "autocorrelation input contains non-finite values".to_string(),
        ));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let gamma = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (series[i] - mean) * (series[i + lag] - mean);
        }
        s / n as f64
    };
    let g0 = gamma(0);
    if g0 <= 0.0 || g0 < 1e-14 * mean.abs().max(1.0).powi(2) {
        return Err(GmcError::DegenerateSeries(
            "series is constant; autocorrelation time is undefined".to_string(),
        ));
    }

    let max_lag = n / 2;
    let mut pair_sum = 0.0;
    let mut m = 0;
    loop {
        let even = 2 * m;
        let odd = even + 1;
        if odd > max_lag {
            break;
        }
        let pair = if even == 0 {
            1.0 + gamma(1) / g0
        } else {
            gamma(even) / g0 + gamma(odd) / g0
        };
        if pair <= 0.0 {
            break;
        }
        pair_sum += pair;
        m += 1;
    }
    let tau = 2.0 * pair_sum - 1.0;
    if tau <= 0.0 {
        return Err(GmcError::DegenerateSeries(format!(
            "autocorrelation time estimate {tau:.3e} is not positive"
        )));
    }
    Ok(tau)
}

/// Effective sample size `n / tau` of a scalar series.
pub fn ess(series: &[f64]) -> Result<f64> {
    let tau = integrated_autocorr_time(series)?;
    Ok(series.len() as f64 / tau)
}

/// Asymptotic survival function of the Kolmogorov distribution evaluated at
/// `lambda`, with the usual small-argument fallback to 1.
fn ks_survival(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 * sum.abs().max(1e-300) {
            return (2.0 * sum).clamp(0.0, 1.0);
        }
        sign = -sign;
    }
    1.0
}

fn checked_sorted(sample: &[f64], label: &str) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(GmcError::EmptyInput(format!("{label} sample is empty")));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(GmcError::Numeric(format!("{label} sample contains NaN")));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    let xs = checked_sorted(xs, "first")?;
    let ys = checked_sorted(ys, "second")?;
    let (n, m) = (xs.len(), ys.len());

    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
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

    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok(KsResult { statistic: d, p_value: ks_survival(lambda) })
}

/// One-sample Kolmogorov-Smirnov test of `sample` against the distribution
/// whose CDF is `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    let xs = checked_sorted(sample, "test")?;
    let n = xs.len();
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(GmcError::Numeric(format!(
                "reference CDF returned {f} outside [0, 1]"
            )));
        }
        d = d.max(f - i as f64 / n as f64);
        d = d.max((i + 1) as f64 / n as f64 - f);
    }
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(KsResult { statistic: d, p_value: ks_survival(lambda) })
}

fn column(samples: &[DVector<f64>], i: usize) -> Vec<f64> {
    samples.iter().map(|s| s[i]).collect()
}

fn standardized_delta(a: &[f64], b: &[f64]) -> f64 {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (na - 1.0).max(1.0);
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (nb - 1.0).max(1.0);
    let se = (va / na + vb / nb).sqrt();
    let delta = ma - mb;
    if se == 0.0 {
        if delta == 0.0 {
            0.0
        } else {
            f64::INFINITY * delta.signum()
        }
    } else {
        delta / se
    }
}

/// Standardized first- and second-moment differences between two sample sets
/// of equal dimension. Each entry is (mean difference) / (standard error of
/// the difference), so values of a few units are compatible with sampling
/// noise.
pub fn moment_compare(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<MomentDeltas> {
    if a.is_empty() || b.is_empty() {
        return Err(GmcError::EmptyInput(
            "moment comparison needs samples on both sides".to_string(),
        ));
    }
    let d = a[0].len();
    if b[0].len() != d || a.iter().any(|s| s.len() != d) || b.iter().any(|s| s.len() != d) {
        return Err(GmcError::DimensionMismatch(
            "sample sets must share one dimension".to_string(),
        ));
    }
    let mut first = Vec::with_capacity(d);
    for i in 0..d {
        first.push(standardized_delta(&column(a, i), &column(b, i)));
    }
    let mut second = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let pa: Vec<f64> = a.iter().map(|s| s[i] * s[j]).collect();
            let pb: Vec<f64> = b.iter().map(|s| s[i] * s[j]).collect();
            second.push(standardized_delta(&pa, &pb));
        }
    }
    Ok(MomentDeltas { first, second })
}

/// One-call summary of a chain: per-coordinate effective sample sizes and
/// autocorrelation times plus split-half stationarity checks.
pub fn summarize_chain(samples: &[DVector<f64>], accept_rate: f64) -> Result<DiagnosticsSummary> {
    if samples.len() < 20 {
        return Err(GmcError::EmptyInput(format!(
            "need at least 20 samples to summarize, got {}",
            samples.len()
        )));
    }
    let d = samples[0].len();
    let half = samples.len() / 2;
    let (front, back) = (&samples[..half], &samples[half..]);

    let mut ess_all = Vec::with_capacity(d);
    let mut act_all = Vec::with_capacity(d);
    let mut ks_all = Vec::with_capacity(d);
    for i in 0..d {
        let series = column(samples, i);
        match integrated_autocorr_time(&series) {
            Ok(tau) => {
                act_all.push(tau);
                ess_all.push(series.len() as f64 / tau);
            }
            // A frozen coordinate (zero variance) is reported as zero
            // effective draws rather than failing the whole summary.
            Err(GmcError::DegenerateSeries(_)) => {
                act_all.push(f64::INFINITY);
                ess_all.push(0.0);
            }
            Err(e) => return Err(e),
        }
        ks_all.push(ks_two_sample(&column(front, i), &column(back, i))?);
    }
    Ok(DiagnosticsSummary {
        accept_rate,
        ess: ess_all,
        act: act_all,
        ks_split_half: ks_all,
        moment_deltas_split_half: moment_compare(front, back)?,
    })
}

impl DiagnosticsSummary {
    /// Header and row of a flat CSV rendering, fields in a fixed order.
    pub fn csv_header_and_row(&self) -> (String, String) {
        let mut header = vec!["accept_rate".to_string()];
        let mut row = vec![format!("{:.17e}", self.accept_rate)];
        for (i, v) in self.ess.iter().enumerate() {
            header.push(format!("ess_{i}"));
            row.push(format!("{v:.17e}"));
        }
        for (i, v) in self.act.iter().enumerate() {
            header.push(format!("act_{i}"));
            row.push(format!("{v:.17e}"));
        }
        for (i, k) in self.ks_split_half.iter().enumerate() {
            header.push(format!("ks_stat_{i}"));
            row.push(format!("{:.17e}", k.statistic));
            header.push(format!("ks_p_{i}"));
            row.push(format!("{:.17e}", k.p_value));
        }
        for (i, v) in self.moment_deltas_split_half.first.iter().enumerate() {
            header.push(format!("m1_{i}"));
            row.push(format!("{v:.17e}"));
        }
        for (i, v) in self.moment_deltas_split_half.second.iter().enumerate() {
            header.push(format!("m2_{i}"));
            row.push(format!("{v:.17e}"));
        }
        (header.join(","), row.join(","))
    }
}
