//! Conservative measures built from price series, and their discrete inverses.

use serde::{Deserialize, Serialize};

use crate::cascade::GeneratedMeasure;
use crate::error::{invalid, Result};
use crate::numeric::{stable_sum, CompensatedSum};

const CONSERVATION_TOL: f64 = 1e-9;

/// Strictly positive prices sampled on a uniform step.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    values: Vec<f64>,
}

impl PriceSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!(
                "price series needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some((i, p)) = values
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
        {
            return Err(invalid(format!("price at index {i} is not strictly positive: {p}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Log returns `ln(I(t) / I(t-1))`; one shorter than the input.
pub fn compute_returns(prices: &PriceSeries) -> Vec<f64> {
    prices
        .values
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect()
}

/// Drops returns whose magnitude exceeds `max_abs`, e.g. overnight gaps.
pub fn filter_returns(returns: &[f64], max_abs: f64) -> Vec<f64> {
    returns.iter().copied().filter(|r| r.abs() <= max_abs).collect()
}

/// Nonnegative activity series `v(t)` with its total and time average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilitySeries {
    values: Vec<f64>,
    total: f64,
    mean: f64,
}

impl VolatilitySeries {
    /// Wraps an already nonnegative series, e.g. cascade weights.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("volatility series is empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= 0.0 && v.is_finite()))
        {
            return Err(invalid(format!("volatility at index {i} is negative or not finite: {v}")));
        }
        let total = stable_sum(&values);
        if total <= 0.0 {
            return Err(invalid("volatility series sums to zero; the measure is undefined"));
        }
        let mean = total / values.len() as f64;
        Ok(Self { values, total, mean })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V`, the integral of the series.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// `v_mean = V / T`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `len` samples.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.values.len() {
            return Err(invalid(format!(
                "cannot truncate a series of {} samples to {len}",
                self.values.len()
            )));
        }
        if len == self.values.len() {
            return Ok(self.clone());
        }
        Self::new(self.values[..len].to_vec())
    }
}

/// Absolute returns as the volatility proxy.
pub fn volatility_from_returns(returns: &[f64]) -> Result<VolatilitySeries> {
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(invalid(format!("return at index {i} is not finite")));
    }
    VolatilitySeries::new(returns.iter().map(|r| r.abs()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureOrigin {
    Volatility,
    Cascade,
    Inverse,
}

/// Nonnegative box masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservativeMeasure {
    weights: Vec<f64>,
    box_size: Option<usize>,
    /// Samples actually covered when the series length was not a multiple
    /// of the box size.
    covered_len: Option<usize>,
    origin: MeasureOrigin,
}

impl ConservativeMeasure {
    /// Checks nonnegativity and conservation.
    pub fn new(weights: Vec<f64>, origin: MeasureOrigin) -> Result<Self> {
        validate_weights(&weights)?;
        Ok(Self {
            weights,
            box_size: None,
            covered_len: None,
            origin,
        })
    }

    /// Regular-grid cascade masses. Unequal-ratio cascades have no common
    /// grid and are rejected.
    pub fn from_cascade(cascade: &GeneratedMeasure) -> Result<Self> {
        if cascade.widths.is_some() {
            return Err(invalid(
                "unequal-ratio cascades have no regular grid; use the (weight, width) pairs",
            ));
        }
        Self::new(cascade.weights.clone(), MeasureOrigin::Cascade)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn box_size(&self) -> Option<usize> {
        self.box_size
    }

    pub fn covered_len(&self) -> Option<usize> {
        self.covered_len
    }

    pub fn origin(&self) -> MeasureOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(invalid("measure has no boxes"));
    }
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, &w)| !(w >= 0.0 && w.is_finite()))
    {
        return Err(invalid(format!("box {i} has invalid mass {w}")));
    }
    let total = stable_sum(weights);
    if (total - 1.0).abs() > CONSERVATION_TOL {
        return Err(invalid(format!("box masses sum to {total}, expected 1")));
    }
    Ok(())
}

/// Sums of consecutive blocks of `size` samples, dropping a partial tail.
pub(crate) fn box_sums(values: &[f64], size: usize) -> Vec<f64> {
    values
        .chunks_exact(size)
        .map(|chunk| {
            let mut acc = CompensatedSum::new();
            chunk.iter().for_each(|&v| acc.add(v));
            acc.value()
        })
        .collect()
}

/// Covers the series with boxes of `box_size` samples and normalizes.
///
/// When the length is not a multiple of `box_size` the tail is dropped so
/// every box is complete; the covered length is recorded.
pub fn box_measure(vol: &VolatilitySeries, box_size: usize) -> Result<ConservativeMeasure> {
    if box_size == 0 {
        return Err(invalid("box size must be positive"));
    }
    if box_size > vol.len() {
        return Err(invalid(format!(
            "box size {box_size} exceeds series length {}",
            vol.len()
        )));
    }
    let sums = box_sums(vol.values(), box_size);
    let covered = sums.len() * box_size;
    let total = stable_sum(&sums);
    if total <= 0.0 {
        return Err(invalid("covered part of the series has zero mass"));
    }
    let weights: Vec<f64> = sums.iter().map(|s| s / total).collect();
    Ok(ConservativeMeasure {
        weights,
        box_size: Some(box_size),
        covered_len: Some(covered),
        origin: MeasureOrigin::Volatility,
    })
}

/// Discrete inverse measure on `grid_count` equal mass levels.
///
/// The cumulative mass `M` is linear inside each box. The j-th output weight
/// is the length of `[M*((j-1)/G), M*(j/G)]` with
/// `M*(b) = inf { a : M(a) > b }`, in units of the measure's support.
pub fn invert_measure(measure: &ConservativeMeasure, grid_count: usize) -> Result<ConservativeMeasure> {
    if grid_count == 0 {
        return Err(invalid("grid count must be positive"));
    }
    let w = measure.weights();
    let n = w.len();
    let total = stable_sum(w);
    let level_step = total / grid_count as f64;

    let mut edges = Vec::with_capacity(grid_count + 1);
    edges.push(0.0);
    let mut k = 0usize;
    let mut cum = CompensatedSum::new();
    let mut below = 0.0;
    let mut above = w[0];
    for j in 1..grid_count {
        let level = j as f64 * level_step;
        // First box whose upper cumulative value exceeds the level.
        while above <= level && k + 1 < n {
            cum.add(w[k]);
            k += 1;
            below = cum.value();
            above = below + w[k];
        }
        let frac = if w[k] > 0.0 {
            ((level - below) / w[k]).clamp(0.0, 1.0)
        } else {
            1.0
        };
        edges.push((k as f64 + frac) / n as f64);
    }
    edges.push(1.0);

    let lengths: Vec<f64> = edges.windows(2).map(|e| (e[1] - e[0]).max(0.0)).collect();
    let support = stable_sum(&lengths);
    let weights = lengths.iter().map(|l| l / support).collect();
    Ok(ConservativeMeasure {
        weights,
        box_size: None,
        covered_len: None,
        origin: MeasureOrigin::Inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(v: &[f64]) -> VolatilitySeries {
        VolatilitySeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn returns_examples() {
        let flat = PriceSeries::new(vec![100.0, 100.0, 100.0]).unwrap();
        assert_eq!(compute_returns(&flat), vec![0.0, 0.0]);
        let up = PriceSeries::new(vec![100.0, 110.0]).unwrap();
        assert!((compute_returns(&up)[0] - 0.0953102).abs() < 1e-7);
        let e = std::f64::consts::E;
        let r = compute_returns(&PriceSeries::new(vec![1.0, e, e * e]).unwrap());
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_prices_name_the_index() {
        let err = PriceSeries::new(vec![1.0, 2.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("index 2"));
        assert!(PriceSeries::new(vec![1.0]).is_err());
        assert!(PriceSeries::new(vec![1.0, -3.0]).is_err());
    }

    #[test]
    fn volatility_examples() {
        let v = volatility_from_returns(&[-0.2, 0.1]).unwrap();
        assert_eq!(v.values(), &[0.2, 0.1]);
        assert!((v.total() - 0.3).abs() < 1e-15);
        assert!((v.mean() - 0.15).abs() < 1e-15);
        assert_eq!(volatility_from_returns(&[0.0, -1.0]).unwrap().values(), &[0.0, 1.0]);
        assert!(volatility_from_returns(&[0.0, 0.0]).is_err());
        assert!(volatility_from_returns(&[]).is_err());
    }

    #[test]
    fn box_measure_examples() {
        assert_eq!(box_measure(&vol(&[1.0; 4]), 2).unwrap().weights(), &[0.5, 0.5]);
        let m = box_measure(&vol(&[3.0, 1.0, 1.0, 1.0]), 2).unwrap();
        assert!((m.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.weights()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(box_measure(&vol(&[1.0; 4]), 5).is_err());
        assert_eq!(box_measure(&vol(&[1.0, 2.0, 3.0]), 3).unwrap().weights(), &[1.0]);
    }

    #[test]
    fn non_divisor_truncates() {
        let m = box_measure(&vol(&[1.0, 1.0, 1.0, 1.0, 1.0, 7.0, 9.0]), 3).unwrap();
        assert_eq!(m.covered_len(), Some(6));
        assert_eq!(m.len(), 2);
        assert!((m.weights()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn uniform_is_self_inverse() {
        let m = ConservativeMeasure::new(vec![0.25; 4], MeasureOrigin::Cascade).unwrap();
        let inv = invert_measure(&m, 4).unwrap();
        for w in inv.weights() {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert_eq!(inv.origin(), MeasureOrigin::Inverse);
    }

    #[test]
    fn inversion_by_hand() {
        // M rises 0.75 over the first half, 0.25 over the second.
        let m = ConservativeMeasure::new(vec![0.75, 0.25], MeasureOrigin::Cascade).unwrap();
        let inv = invert_measure(&m, 4).unwrap();
        let expect = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5];
        for (w, e) in inv.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15, "{w} vs {e}");
        }
    }

    #[test]
    fn zero_boxes_are_jumped() {
        let m = ConservativeMeasure::new(vec![0.5, 0.0, 0.5], MeasureOrigin::Volatility).unwrap();
        let inv = invert_measure(&m, 2).unwrap();
        // M*(1/2) = inf{a : M(a) > 1/2} is the right end of the flat box.
        assert!((inv.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((inv.weights()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn measure_validation() {
        assert!(ConservativeMeasure::new(vec![0.5, 0.4], MeasureOrigin::Cascade).is_err());
        assert!(ConservativeMeasure::new(vec![1.5, -0.5], MeasureOrigin::Cascade).is_err());
        assert!(ConservativeMeasure::new(vec![], MeasureOrigin::Cascade).is_err());
    }

    #[test]
    fn filter_drops_large_moves() {
        assert_eq!(filter_returns(&[0.01, -0.2, 0.03], 0.1), vec![0.01, 0.03]);
    }
}
