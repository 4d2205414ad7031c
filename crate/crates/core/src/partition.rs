//! Direct partition functions over box sizes and inverse partition
//! functions over exit-time thresholds.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{MAX_ABS_ORDER, MIN_BOXES, SIGNIFICANT_ORDERS};
use crate::measure::{box_measure, VolatilitySeries};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// Box-counted measure, scales are box sizes in samples.
    Direct,
    /// Exit times, scales are thresholds in volatility units.
    Inverse,
}

/// `ln chi` sampled on an (order, scale) grid. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCurve {
    pub kind: CurveKind,
    pub orders: Vec<f64>,
    pub scales: Vec<f64>,
    /// Indexed `[order][scale]`.
    pub log_values: Vec<Vec<Option<f64>>>,
    /// Number of boxes (direct) or exit times (inverse) per scale.
    pub counts: Vec<usize>,
    pub warnings: Vec<String>,
}

impl PartitionCurve {
    /// Assembles a curve from precomputed values.
    pub fn from_parts(
        kind: CurveKind,
        orders: Vec<f64>,
        scales: Vec<f64>,
        log_values: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        validate_orders(&orders)?;
        if !scales.windows(2).all(|w| w[0] < w[1]) || scales.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("scales must be positive and strictly increasing"));
        }
        if log_values.len() != orders.len() || log_values.iter().any(|r| r.len() != scales.len()) {
            return Err(invalid("value matrix does not match the (order, scale) grid"));
        }
        let log_values = log_values
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.filter(|x| x.is_finite())).collect())
            .collect();
        let counts = vec![0; scales.len()];
        Ok(Self {
            kind,
            orders,
            scales,
            log_values,
            counts,
            warnings: Vec::new(),
        })
    }

    /// Index of an order, matched to within 1e-9.
    pub fn order_index(&self, order: f64) -> Option<usize> {
        self.orders.iter().position(|&o| (o - order).abs() <= 1e-9)
    }

    pub fn row(&self, order_index: usize) -> &[Option<f64>] {
        &self.log_values[order_index]
    }

    pub fn is_missing(&self, order_index: usize, scale_index: usize) -> bool {
        self.log_values[order_index][scale_index].is_none()
    }
}

fn validate_orders(orders: &[f64]) -> Result<()> {
    if orders.is_empty() {
        return Err(invalid("order grid is empty"));
    }
    if let Some(o) = orders.iter().find(|o| !o.is_finite() || o.abs() > MAX_ABS_ORDER) {
        return Err(invalid(format!("order {o} is outside [-{MAX_ABS_ORDER}, {MAX_ABS_ORDER}]")));
    }
    if !orders.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("orders must be strictly increasing"));
    }
    Ok(())
}

fn significance_warning(orders: &[f64]) -> Option<String> {
    let (lo, hi) = SIGNIFICANT_ORDERS;
    orders.iter().any(|&o| o < lo || o > hi).then(|| {
        format!(
            "orders outside [{lo}, {hi}] are dominated by a handful of boxes; \
             their partition sums are statistically weak"
        )
    })
}

/// `ln sum_n w_n^q`, evaluated relative to the dominant term so that
/// neither tiny weights nor large |q| underflow or overflow.
///
/// The pivot is the largest weight for `q > 0` and the smallest for `q < 0`.
/// For `q = 0` every box counts, giving `ln N`.
pub fn log_moment_sum(weights: &[f64], q: f64) -> Result<f64> {
    if weights.is_empty() {
        return Err(invalid("cannot sum moments of an empty measure"));
    }
    if !q.is_finite() {
        return Err(invalid(format!("order {q} is not finite")));
    }
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, &w)| !(w >= 0.0 && w.is_finite()))
    {
        return Err(invalid(format!("weight at index {i} is invalid: {w}")));
    }
    if q == 0.0 {
        return Ok((weights.len() as f64).ln());
    }
    let pivot = if q < 0.0 {
        if let Some(index) = weights.iter().position(|&w| w == 0.0) {
            return Err(Error::ZeroWeight { order: q, index });
        }
        weights.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        weights.iter().copied().fold(0.0, f64::max)
    };
    if pivot == 0.0 {
        return Err(invalid("all weights are zero"));
    }
    let mut acc = CompensatedSum::new();
    for &w in weights {
        if w > 0.0 {
            acc.add((w / pivot).powf(q));
        }
    }
    Ok(acc.value().ln() + q * pivot.ln())
}

fn log_moments(weights: &[f64], orders: &[f64]) -> Vec<Option<f64>> {
    orders
        .iter()
        .map(|&q| log_moment_sum(weights, q).ok().filter(|v| v.is_finite()))
        .collect()
}

fn transpose(columns: Vec<Vec<Option<f64>>>, n_orders: usize) -> Vec<Vec<Option<f64>>> {
    (0..n_orders)
        .map(|oi| columns.iter().map(|col| col[oi]).collect())
        .collect()
}

/// `ln chi_q(s)` for every box size and order. Cells where an empty box
/// meets a negative order are left missing.
pub fn direct_partition(vol: &VolatilitySeries, box_sizes: &[usize], q_grid: &[f64]) -> Result<PartitionCurve> {
    validate_orders(q_grid)?;
    if box_sizes.is_empty() {
        return Err(invalid("no box sizes given"));
    }
    if !box_sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("box sizes must be strictly increasing"));
    }
    let mut warnings: Vec<String> = significance_warning(q_grid).into_iter().collect();

    let columns: Vec<(usize, Vec<Option<f64>>)> = box_sizes
        .par_iter()
        .map(|&s| {
            let measure = box_measure(vol, s)?;
            Ok((measure.len(), log_moments(measure.weights(), q_grid)))
        })
        .collect::<Result<_>>()?;

    let counts: Vec<usize> = columns.iter().map(|c| c.0).collect();
    let n_missing = columns
        .iter()
        .map(|c| c.1.iter().filter(|v| v.is_none()).count())
        .sum::<usize>();
    if n_missing > 0 {
        warnings.push(format!(
            "{n_missing} (order, box size) cells left missing: empty boxes with negative orders"
        ));
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(PartitionCurve {
        kind: CurveKind::Direct,
        orders: q_grid.to_vec(),
        scales: box_sizes.iter().map(|&s| s as f64).collect(),
        log_values: transpose(columns.into_iter().map(|c| c.1).collect(), q_grid.len()),
        counts,
        warnings,
    })
}

/// Exit times `s_j` for one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeSequence {
    pub threshold: f64,
    pub times: Vec<f64>,
    /// Length `T` of the underlying series, used to normalize.
    pub series_len: usize,
}

impl ExitTimeSequence {
    /// Wraps externally produced exit times, e.g. synthetic samples.
    pub fn from_samples(threshold: f64, times: Vec<f64>, series_len: usize) -> Result<Self> {
        if let Some((i, t)) = times.iter().enumerate().find(|(_, &t)| !(t > 0.0 && t.is_finite())) {
            return Err(invalid(format!("exit time {i} is not positive: {t}")));
        }
        Ok(Self {
            threshold,
            times,
            series_len,
        })
    }

    /// `J`.
    pub fn count(&self) -> usize {
        self.times.len()
    }

    /// Inverse measure `mu*_j = s_j / T`.
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.series_len as f64;
        self.times.iter().map(|s| s / t).collect()
    }

    pub fn mean(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        self.times.iter().for_each(|&s| acc.add(s));
        acc.value() / self.times.len() as f64
    }
}

/// Successive times for the integral of the piecewise-constant series to
/// grow by `threshold`. Emits exactly `floor(V / threshold)` values.
pub fn exit_times(vol: &VolatilitySeries, threshold: f64) -> Result<ExitTimeSequence> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(invalid(format!("threshold must be positive, got {threshold}")));
    }
    let total = vol.total();
    if threshold > total {
        return Err(invalid(format!(
            "threshold {threshold} exceeds the integrated volatility {total}; no exit occurs"
        )));
    }
    let values = vol.values();
    let len = values.len();
    let count = (total / threshold).floor() as usize;

    let mut times = Vec::with_capacity(count);
    let mut cum = CompensatedSum::new();
    let mut below = 0.0;
    let mut k = 0usize;
    let mut previous = 0.0;
    for j in 1..=count {
        let level = j as f64 * threshold;
        let crossing = loop {
            if k >= len {
                // Rounding can push the last level past the final sum.
                break len as f64;
            }
            let v = values[k];
            let mut next = cum;
            next.add(v);
            let above = next.value();
            if v > 0.0 && above >= level {
                break k as f64 + ((level - below) / v).clamp(0.0, 1.0);
            }
            cum = next;
            below = above;
            k += 1;
        };
        times.push(crossing - previous);
        previous = crossing;
    }
    Ok(ExitTimeSequence {
        threshold,
        times,
        series_len: len,
    })
}

/// `ln chi*_p(dv)` over thresholds. Thresholds yielding fewer than ten
/// exit times are left missing.
pub fn inverse_partition(vol: &VolatilitySeries, thresholds: &[f64], p_grid: &[f64]) -> Result<PartitionCurve> {
    validate_orders(p_grid)?;
    if thresholds.is_empty() {
        return Err(invalid("no thresholds given"));
    }
    if thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) || !thresholds.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("thresholds must be positive and strictly increasing"));
    }
    let mut warnings: Vec<String> = significance_warning(p_grid).into_iter().collect();
    let total = vol.total();

    let columns: Vec<(usize, Option<Vec<Option<f64>>>)> = thresholds
        .par_iter()
        .map(|&dv| {
            let expected = (total / dv).floor();
            if expected < MIN_BOXES as f64 {
                return Ok((expected as usize, None));
            }
            let exits = exit_times(vol, dv)?;
            let mu = exits.normalized();
            Ok((exits.count(), Some(log_moments(&mu, p_grid))))
        })
        .collect::<Result<_>>()?;

    for (dv, (count, col)) in thresholds.iter().zip(&columns) {
        if col.is_none() {
            warnings.push(format!(
                "threshold {dv:e} gives only {count} exit times (< {MIN_BOXES}); column left missing"
            ));
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    let counts = columns.iter().map(|c| c.0).collect();
    let filled = columns
        .into_iter()
        .map(|(_, col)| col.unwrap_or_else(|| vec![None; p_grid.len()]))
        .collect();
    Ok(PartitionCurve {
        kind: CurveKind::Inverse,
        orders: p_grid.to_vec(),
        scales: thresholds.to_vec(),
        log_values: transpose(filled, p_grid.len()),
        counts,
        warnings,
    })
}
