//! Numerical inversion of exponent curves and the check
//! `tau(q) = -theta^{-1}(-q)`, `theta(p) = -tau^{-1}(-p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::ExponentCurve;

/// Below this coverage an inversion report is flagged unreliable.
pub const MIN_RELIABLE_COVERAGE: f64 = 0.3;
/// Agreement means `|diff| <= ERROR_BAR_FACTOR * combined stderr`.
pub const ERROR_BAR_FACTOR: f64 = 2.0;
const MIN_INTERP_TOL: f64 = 1e-9;

/// Pool-adjacent-violators fit of a nondecreasing sequence (unit weights).
///
/// Already nondecreasing input is returned unchanged.
pub fn isotonic_increasing(values: &[f64]) -> Vec<f64> {
    // (sum, count) per pooled block.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 <= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    let mut start = 0;
    for (sum, n) in blocks {
        if n == 1 {
            out.push(values[start]);
        } else {
            out.extend(std::iter::repeat_n(sum / n as f64, n));
        }
        start += n;
    }
    out
}

/// Order `x` at which a curve reaches a target value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvertedPoint {
    pub target: f64,
    /// `None` when the target lies outside the attained values.
    pub value: Option<f64>,
    pub stderr: Option<f64>,
}

/// Inverts a curve by linear interpolation after isotonic repair.
///
/// The error of each inverted value is the source error divided by the
/// local slope, floored at the linear-interpolation error bound.
pub fn invert_exponent_curve(curve: &ExponentCurve, targets: &[f64]) -> Result<Vec<InvertedPoint>> {
    let x = &curve.orders;
    let y = isotonic_increasing(&curve.exponents);
    let n = y.len();
    if n < 2 || y[n - 1] <= y[0] {
        return Err(Error::Inversion(
            "curve is flat after monotone repair; it cannot be inverted".into(),
        ));
    }
    let se = &curve.stderrs;

    // Linear interpolation error bound per node, in y units.
    let curvature: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return 0.0;
            }
            let left = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            let right = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
            (2.0 * (right - left) / (x[i + 1] - x[i - 1])).abs()
        })
        .collect();
    let segment_slope = |j: usize| (y[j] - y[j - 1]) / (x[j] - x[j - 1]);
    let segment_tol = |j: usize| {
        let h = x[j] - x[j - 1];
        h * h / 8.0 * curvature[j - 1].max(curvature[j])
    };

    Ok(targets
        .iter()
        .map(|&t| {
            if !(t >= y[0] && t <= y[n - 1]) {
                return InvertedPoint { target: t, value: None, stderr: None };
            }
            let j = y.partition_point(|&v| v < t);
            let (value, source_se, seg) = if y[j] == t {
                // Exact node hit; use an adjacent rising segment for the slope.
                let seg = if j > 0 && y[j] > y[j - 1] {
                    j
                } else {
                    (j + 1..n).find(|&k| y[k] > y[k - 1]).unwrap_or(j)
                };
                (x[j], se[j], seg)
            } else {
                let w = (t - y[j - 1]) / (y[j] - y[j - 1]);
                let value = x[j - 1] + w * (x[j] - x[j - 1]);
                (value, se[j - 1] + w * (se[j] - se[j - 1]), j)
            };
            let slope = if seg >= 1 { segment_slope(seg) } else { 0.0 };
            let stderr = if slope > 0.0 {
                let floor = (segment_tol(seg) / slope).max(MIN_INTERP_TOL);
                (source_se / slope).max(floor)
            } else {
                // Pooled plateau: the preimage is the whole plateau.
                let lo = y.partition_point(|&v| v < t);
                let hi = y.partition_point(|&v| v <= t).max(lo + 1) - 1;
                (0.5 * (x[hi] - x[lo])).max(MIN_INTERP_TOL)
            };
            InvertedPoint { target: t, value: Some(value), stderr: Some(stderr) }
        })
        .collect())
}

/// One direction of the inversion check on the measured curve's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub relation: String,
    pub grid: Vec<f64>,
    pub lhs: Vec<f64>,
    pub lhs_stderr: Vec<f64>,
    pub rhs: Vec<Option<f64>>,
    pub rhs_stderr: Vec<Option<f64>>,
    pub diff: Vec<Option<f64>>,
    pub max_abs_diff: f64,
    pub within_error_bars: bool,
    pub coverage: f64,
}

/// Both directions of the check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionCheck {
    /// `tau(q)` against `-theta^{-1}(-q)` on the direct grid.
    pub direct: InversionReport,
    /// `theta(p)` against `-tau^{-1}(-p)` on the inverse grid.
    pub inverse: InversionReport,
    pub max_abs_diff: f64,
    pub within_error_bars: bool,
    pub coverage: f64,
    pub unreliable: bool,
}

fn one_direction(measured: &ExponentCurve, other: &ExponentCurve, relation: &str) -> Result<InversionReport> {
    let targets: Vec<f64> = measured.orders.iter().map(|o| -o).collect();
    let inverted = invert_exponent_curve(other, &targets)?;
    let rhs: Vec<Option<f64>> = inverted.iter().map(|p| p.value.map(|v| -v)).collect();
    let rhs_stderr: Vec<Option<f64>> = inverted.iter().map(|p| p.stderr).collect();
    let diff: Vec<Option<f64>> = measured
        .exponents
        .iter()
        .zip(&rhs)
        .map(|(l, r)| r.map(|r| l - r))
        .collect();

    let computable = diff.iter().filter(|d| d.is_some()).count();
    if computable == 0 {
        return Err(Error::Inversion(format!(
            "{relation}: the curves share no overlapping range"
        )));
    }
    let coverage = computable as f64 / diff.len() as f64;
    let max_abs_diff = diff.iter().flatten().map(|d| d.abs()).fold(0.0, f64::max);
    let within_error_bars = diff
        .iter()
        .zip(&measured.stderrs)
        .zip(&rhs_stderr)
        .all(|((d, lse), rse)| match (d, rse) {
            (Some(d), Some(rse)) => d.abs() <= ERROR_BAR_FACTOR * (lse * lse + rse * rse).sqrt(),
            _ => true,
        });
    Ok(InversionReport {
        relation: relation.to_string(),
        grid: measured.orders.clone(),
        lhs: measured.exponents.clone(),
        lhs_stderr: measured.stderrs.clone(),
        rhs,
        rhs_stderr,
        diff,
        max_abs_diff,
        within_error_bars,
        coverage,
    })
}

/// Compares the direct and inverse exponent curves in both directions.
pub fn inversion_check(direct: &ExponentCurve, inverse: &ExponentCurve) -> Result<InversionCheck> {
    let forward = one_direction(direct, inverse, "tau(q) = -theta^-1(-q)")?;
    let backward = one_direction(inverse, direct, "theta(p) = -tau^-1(-p)")?;
    let coverage = forward.coverage.min(backward.coverage);
    Ok(InversionCheck {
        max_abs_diff: forward.max_abs_diff.max(backward.max_abs_diff),
        within_error_bars: forward.within_error_bars && backward.within_error_bars,
        unreliable: coverage < MIN_RELIABLE_COVERAGE,
        coverage,
        direct: forward,
        inverse: backward,
    })
}
