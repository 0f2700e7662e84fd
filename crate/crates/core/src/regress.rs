//! Simple linear regression with slope inference, Student t and Pearson r.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::{beta_inc, gamma_q};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub slope_se: f64,
    /// `None` when the slope standard error is zero.
    #[serde(rename = "t")]
    pub t_stat: Option<f64>,
    pub df: i64,
    #[serde(rename = "p")]
    pub p_two_tailed: f64,
    pub degenerate: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least-squares fit of `y` on `x` with a two-tailed slope test on n - 2 df.
///
/// Degenerate inputs (n = 2, a constant `y`, or an exact line) still return a
/// fit, flagged `degenerate`, with `p = 1` and no t statistic.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    if x.len() != y.len() {
        return domain(format!("x has {} values, y has {}", x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return domain(format!("regression needs at least 2 points, got {n}"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return domain("regression input contains a non-finite value");
    }
    if x.iter().all(|v| *v == x[0]) {
        return domain("all x values are equal");
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let df = n as i64 - 2;

    let flat = ss_tot == 0.0;
    let r_squared = if flat {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let scale: f64 = y.iter().map(|v| v * v).sum();
    let exact = ss_res <= 1e-24 * scale;
    if n == 2 || flat || exact {
        return Ok(RegressionFit {
            n,
            slope,
            intercept,
            r_squared: if exact && !flat { 1.0 } else { r_squared },
            slope_se: 0.0,
            t_stat: None,
            df,
            p_two_tailed: 1.0,
            degenerate: true,
        });
    }
    let slope_se = (ss_res / df as f64).sqrt() / sxx.sqrt();
    let t = slope / slope_se;
    let p = p_two_tailed(t, df as u32)?.max(f64::MIN_POSITIVE);
    Ok(RegressionFit {
        n,
        slope,
        intercept,
        r_squared,
        slope_se,
        t_stat: Some(t),
        df,
        p_two_tailed: p,
        degenerate: false,
    })
}

/// Student t CDF, via I_x(df/2, 1/2) with x = df / (df + t^2).
pub fn t_cdf(t: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return domain("t distribution needs df >= 1");
    }
    if t.is_nan() {
        return domain("t is NaN");
    }
    let tail = 0.5 * t_tail_mass(t, df)?;
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Two-tailed p-value `2 (1 - F(|t|))`.
pub fn p_two_tailed(t: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return domain("t distribution needs df >= 1");
    }
    if t.is_nan() {
        return domain("t is NaN");
    }
    t_tail_mass(t, df)
}

/// P(|T| >= |t|).
fn t_tail_mass(t: f64, df: u32) -> Result<f64> {
    if t.is_infinite() {
        return Ok(0.0);
    }
    let nu = f64::from(df);
    beta_inc(0.5 * nu, 0.5, nu / (nu + t * t))
}

/// Sample Pearson correlation.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return domain(format!(
            "series lengths differ ({} vs {})",
            a.len(),
            b.len()
        ));
    }
    if a.len() < 2 {
        return domain("correlation needs at least 2 pairs");
    }
    let (ma, mb) = (mean(a), mean(b));
    let saa: f64 = a.iter().map(|v| (v - ma) * (v - ma)).sum();
    let sbb: f64 = b.iter().map(|v| (v - mb) * (v - mb)).sum();
    if saa == 0.0 || sbb == 0.0 {
        return domain("correlation undefined for a constant series");
    }
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(stat: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return domain("chi-square needs df >= 1");
    }
    gamma_q(0.5 * f64::from(df), 0.5 * stat.max(0.0))
}
