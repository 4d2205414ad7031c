//! Log-log regression of partition curves, scaling-range detection and the
//! exponent curves `tau(q)` / `theta(p)`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::linear_fit;
use crate::partition::{CurveKind, PartitionCurve};

pub const MIN_FIT_POINTS: usize = 5;
pub const MIN_DETECT_SCALES: usize = MIN_FIT_POINTS + 1;
pub const DEFAULT_ANCHORS: [f64; 4] = [-2.0, 0.0, 2.0, 4.0];
/// Consistency band for `dv / (s * v_mean)`.
pub const RANGE_RATIO_BAND: (f64, f64) = (1.0 / 3.0, 3.0);

const SCALE_SLACK: f64 = 1e-9;

/// One power-law fit `ln chi = slope * ln scale + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub order: f64,
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Smallest and largest scale actually used.
    pub range: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

fn in_range(scale: f64, range: Option<(f64, f64)>) -> bool {
    match range {
        None => true,
        Some((lo, hi)) => scale >= lo * (1.0 - SCALE_SLACK) && scale <= hi * (1.0 + SCALE_SLACK),
    }
}

/// OLS of `ln chi` on `ln scale` for one order, over an optional range.
pub fn fit_power_law(curve: &PartitionCurve, order: f64, range: Option<(f64, f64)>) -> Result<ScalingFit> {
    let oi = curve
        .order_index(order)
        .ok_or_else(|| Error::Fit(format!("order {order} is not on the curve's grid")))?;
    fit_row(curve, oi, range, 0, curve.scales.len())
}

fn fit_row(
    curve: &PartitionCurve,
    oi: usize,
    range: Option<(f64, f64)>,
    from: usize,
    to: usize,
) -> Result<ScalingFit> {
    let order = curve.orders[oi];
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for si in from..to {
        let s = curve.scales[si];
        if let (true, Some(v)) = (in_range(s, range), curve.log_values[oi][si]) {
            x.push(s.ln());
            y.push(v);
        }
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "order {order}: {} usable points, need {MIN_FIT_POINTS}",
            x.len()
        )));
    }
    let fit = linear_fit(&x, &y)
        .ok_or_else(|| Error::Fit(format!("order {order}: degenerate scale range")))?;
    Ok(ScalingFit {
        order,
        slope: fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        range: (x[0].exp(), x[x.len() - 1].exp()),
        r_squared: fit.r_squared,
        n_points: fit.n,
    })
}

/// Knobs of the sliding-window range search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub min_decades: f64,
    /// Minimum mean R^2 a window must reach.
    pub r2_floor: f64,
    /// Windows whose unexplained variance `1 - R^2` is within this factor
    /// of the best window's count as tied.
    pub tie_factor: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            min_decades: 1.5,
            r2_floor: 0.95,
            tie_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedRange {
    pub lo: f64,
    pub hi: f64,
    pub mean_r_squared: f64,
}

/// Scaling range with the default configuration.
pub fn detect_scaling_range(curve: &PartitionCurve, anchor_orders: &[f64]) -> Result<(f64, f64)> {
    detect_scaling_range_with(curve, anchor_orders, &DetectionConfig::default()).map(|r| (r.lo, r.hi))
}

/// Searches contiguous windows spanning at least `min_decades` and returns
/// the one with the highest mean R^2 across the anchor orders. Ties go to
/// the wider window, then to the lower one.
pub fn detect_scaling_range_with(
    curve: &PartitionCurve,
    anchor_orders: &[f64],
    config: &DetectionConfig,
) -> Result<DetectedRange> {
    if curve.scales.len() < MIN_DETECT_SCALES {
        return Err(Error::Detection(format!(
            "{} scales available, need {MIN_DETECT_SCALES}",
            curve.scales.len()
        )));
    }
    let anchors: Vec<usize> = anchor_orders
        .iter()
        .filter_map(|&a| curve.order_index(a))
        .collect();
    if anchors.is_empty() {
        return Err(invalid("none of the anchor orders is on the curve's grid"));
    }
    let present = |si: usize| anchors.iter().all(|&oi| curve.log_values[oi][si].is_some());
    let min_width = config.min_decades * std::f64::consts::LN_10 * (1.0 - SCALE_SLACK);

    // (mean R^2, log width, lo index, hi index)
    let mut windows: Vec<(f64, f64, usize, usize)> = Vec::new();
    let n = curve.scales.len();
    for lo in (0..n).filter(|&i| present(i)) {
        for hi in (lo + 1..n).filter(|&j| present(j)) {
            let width = (curve.scales[hi] / curve.scales[lo]).ln();
            if width < min_width {
                continue;
            }
            let fits: Result<Vec<ScalingFit>> = anchors
                .iter()
                .map(|&oi| fit_row(curve, oi, None, lo, hi + 1))
                .collect();
            if let Ok(fits) = fits {
                let mean = fits.iter().map(|f| f.r_squared).sum::<f64>() / fits.len() as f64;
                windows.push((mean, width, lo, hi));
            }
        }
    }
    let best = windows
        .iter()
        .map(|w| w.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if windows.is_empty() || best < config.r2_floor {
        return Err(Error::Detection(format!(
            "no window of {} decades reaches mean R^2 >= {} (best {best:.4}); set the range manually",
            config.min_decades, config.r2_floor
        )));
    }
    let band = config.tie_factor * (1.0 - best) + 1e-12;
    let chosen = windows
        .iter()
        .filter(|w| 1.0 - w.0 <= band)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
        .expect("best window is always in the band");
    Ok(DetectedRange {
        lo: curve.scales[chosen.2],
        hi: curve.scales[chosen.3],
        mean_r_squared: chosen.0,
    })
}

/// Estimated `tau(q)` or `theta(p)` with per-order standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentCurve {
    pub kind: CurveKind,
    pub orders: Vec<f64>,
    pub exponents: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub range_used: (f64, f64),
    /// Orders whose fit failed.
    pub dropped: Vec<f64>,
}

impl ExponentCurve {
    /// Builds a curve from known values, e.g. analytic exponents.
    pub fn from_values(kind: CurveKind, orders: Vec<f64>, exponents: Vec<f64>, stderrs: Vec<f64>) -> Result<Self> {
        if orders.is_empty() || orders.len() != exponents.len() || orders.len() != stderrs.len() {
            return Err(invalid("exponent curve columns must be non-empty and of equal length"));
        }
        if !orders.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("exponent curve orders must be strictly increasing"));
        }
        if exponents.iter().chain(&stderrs).any(|v| !v.is_finite()) || stderrs.iter().any(|s| *s < 0.0) {
            return Err(invalid("exponent curve values must be finite with nonnegative errors"));
        }
        Ok(Self {
            kind,
            orders,
            exponents,
            stderrs,
            range_used: (f64::NAN, f64::NAN),
            dropped: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Exponent at an order on the grid.
    pub fn at(&self, order: f64) -> Option<f64> {
        self.orders
            .iter()
            .position(|&o| (o - order).abs() <= 1e-9)
            .map(|i| self.exponents[i])
    }
}

/// Fits every order over a common range; failing orders are dropped.
pub fn exponent_curve(curve: &PartitionCurve, range: (f64, f64)) -> Result<ExponentCurve> {
    if !(range.0 < range.1) {
        return Err(invalid(format!("range ({}, {}) is empty", range.0, range.1)));
    }
    let mut out = ExponentCurve {
        kind: curve.kind,
        orders: Vec::new(),
        exponents: Vec::new(),
        stderrs: Vec::new(),
        range_used: range,
        dropped: Vec::new(),
    };
    for oi in 0..curve.orders.len() {
        match fit_row(curve, oi, Some(range), 0, curve.scales.len()) {
            Ok(fit) if fit.slope.is_finite() && fit.stderr.is_finite() => {
                out.orders.push(fit.order);
                out.exponents.push(fit.slope);
                out.stderrs.push(fit.stderr);
            }
            Ok(_) => out.dropped.push(curve.orders[oi]),
            Err(e) => {
                warn!("dropping order {}: {e}", curve.orders[oi]);
                out.dropped.push(curve.orders[oi]);
            }
        }
    }
    if out.orders.is_empty() {
        return Err(Error::Fit(format!(
            "no order could be fitted over ({}, {})",
            range.0, range.1
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeConsistency {
    /// `dv_1 / (s_1 * v_mean)`.
    pub lower_ratio: f64,
    /// `dv_2 / (s_2 * v_mean)`.
    pub upper_ratio: f64,
    pub consistent: bool,
}

/// Compares inverse thresholds with direct box sizes through `dv = s * v_mean`.
pub fn check_range_consistency(direct_range: (f64, f64), inverse_range: (f64, f64), v_mean: f64) -> RangeConsistency {
    let lower_ratio = inverse_range.0 / (direct_range.0 * v_mean);
    let upper_ratio = inverse_range.1 / (direct_range.1 * v_mean);
    let (lo, hi) = RANGE_RATIO_BAND;
    let ok = |r: f64| r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12);
    RangeConsistency {
        lower_ratio,
        upper_ratio,
        consistent: ok(lower_ratio) && ok(upper_ratio),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub order: f64,
    pub alpha: f64,
    pub f_alpha: f64,
}

/// Legendre transform `alpha = d tau / dq`, `f = q alpha - tau`, with
/// central differences inside the grid and one-sided ones at the ends.
pub fn legendre_spectrum(curve: &ExponentCurve) -> Result<Vec<SpectrumPoint>> {
    let n = curve.len();
    if n < 2 {
        return Err(invalid("the Legendre transform needs at least two orders"));
    }
    let (q, t) = (&curve.orders, &curve.exponents);
    Ok((0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            let alpha = (t[b] - t[a]) / (q[b] - q[a]);
            SpectrumPoint {
                order: q[i],
                alpha,
                f_alpha: q[i] * alpha - t[i],
            }
        })
        .collect())
}
