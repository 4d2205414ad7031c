//! Densities of exit times normalized by their standard deviation,
//! `rho(x) = sigma f(x sigma)` with `x = s / sigma`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{stable_sum, CompensatedSum};
use crate::partition::ExitTimeSequence;

pub const DEFAULT_BINS: usize = 40;
/// Below this many samples an estimate is produced with a warning.
pub const MIN_RECOMMENDED_SAMPLES: usize = 100;
/// Overlay thresholds as multiples of `v_mean`.
pub const DEFAULT_OVERLAY_FACTORS: [f64; 3] = [0.5, 1.0, 2.0];
/// Minimum R^2 gap before a tail gets a label.
pub const TAIL_R2_MARGIN: f64 = 0.02;
pub const PLATEAU_MAX_VARIATION: f64 = 0.2;
const TAIL_MIN_COUNT: u64 = 5;
const TAIL_MIN_BINS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    Linear,
    #[default]
    Log,
}

impl std::str::FromStr for Binning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Binning::Linear),
            "log" => Ok(Binning::Log),
            _ => Err(invalid(format!("unknown binning '{s}' (expected linear or log)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfEstimate {
    pub threshold: f64,
    pub sigma: f64,
    pub binning: Binning,
    pub bin_edges: Vec<f64>,
    /// Arithmetic midpoints for linear bins, geometric for log bins.
    pub bin_centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
}

impl PdfEstimate {
    pub fn bin_widths(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `sum density * width`; one up to rounding.
    pub fn integral(&self) -> f64 {
        let terms: Vec<f64> = self
            .densities
            .iter()
            .zip(self.bin_widths())
            .map(|(d, w)| d * w)
            .collect();
        stable_sum(&terms)
    }
}

/// Sums over a sorted copy so the result does not depend on sample order.
fn sample_std(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = stable_sum(&sorted) / n;
    let mut acc = CompensatedSum::new();
    for v in &sorted {
        acc.add((v - mean) * (v - mean));
    }
    (acc.value() / (n - 1.0)).sqrt()
}

/// Histogram of `x = s / sigma` with `density = count / (J * width)`.
/// Empty bins are kept with density zero.
pub fn estimate_pdf(exits: &ExitTimeSequence, binning: Binning, bins: usize) -> Result<PdfEstimate> {
    let j = exits.times.len();
    if j < 2 {
        return Err(invalid(format!(
            "{j} exit times at threshold {}; the standard deviation needs at least 2",
            exits.threshold
        )));
    }
    if bins == 0 {
        return Err(invalid("bin count must be positive"));
    }
    if j < MIN_RECOMMENDED_SAMPLES {
        warn!("only {j} exit times at threshold {}; the density is noisy", exits.threshold);
    }
    let sigma = sample_std(&exits.times);
    if !(sigma > 0.0) {
        return Err(Error::Degenerate(format!(
            "all {j} exit times at threshold {} are equal",
            exits.threshold
        )));
    }
    let x: Vec<f64> = exits.times.iter().map(|s| s / sigma).collect();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let edges: Vec<f64> = match binning {
        Binning::Linear => (0..=bins)
            .map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 })
            .collect(),
        Binning::Log => {
            if !(lo > 0.0) {
                return Err(invalid("log binning needs strictly positive exit times"));
            }
            let span = (hi / lo).ln();
            (0..=bins)
                .map(|i| if i == bins { hi } else { lo * (span * i as f64 / bins as f64).exp() })
                .collect()
        }
    };
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(format!(
            "exit times at threshold {} span too little for {bins} bins",
            exits.threshold
        )));
    }

    let mut counts = vec![0u64; bins];
    for &v in &x {
        // Last edge is closed; everything else is [lo, hi).
        let k = edges[1..].partition_point(|&e| e <= v).min(bins - 1);
        counts[k] += 1;
    }
    let centers = edges
        .windows(2)
        .map(|w| match binning {
            Binning::Linear => 0.5 * (w[0] + w[1]),
            Binning::Log => (w[0] * w[1]).sqrt(),
        })
        .collect();
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (j as f64 * (w[1] - w[0])))
        .collect();
    Ok(PdfEstimate {
        threshold: exits.threshold,
        sigma,
        binning,
        bin_edges: edges,
        bin_centers: centers,
        densities,
        counts,
        n_samples: j,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClass {
    /// Exponential or faster decay.
    Exponential,
    PowerLaw,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub left_plateau: bool,
    /// Relative difference of pooled densities across the lowest decade.
    pub left_variation: Option<f64>,
    pub right_tail: TailClass,
    pub semilog_r_squared: Option<f64>,
    pub loglog_r_squared: Option<f64>,
    /// Slope of `ln rho` against `x`.
    pub semilog_slope: Option<f64>,
    pub tail_bins: usize,
}

/// Lower edge of the first bin whose cumulative count reaches `frac`.
fn quantile_edge(pdf: &PdfEstimate, frac: f64) -> f64 {
    let target = frac * pdf.n_samples as f64;
    let mut acc = 0u64;
    for (i, &c) in pdf.counts.iter().enumerate() {
        acc += c;
        if acc as f64 >= target {
            return pdf.bin_edges[i];
        }
    }
    pdf.bin_edges[pdf.bin_edges.len() - 1]
}

fn pooled_density(pdf: &PdfEstimate, lo: f64, hi: f64) -> Option<f64> {
    let mut count = 0u64;
    let mut width = 0.0;
    for (i, c) in pdf.bin_centers.iter().enumerate() {
        if *c >= lo && *c < hi {
            count += pdf.counts[i];
            width += pdf.bin_edges[i + 1] - pdf.bin_edges[i];
        }
    }
    (width > 0.0).then(|| count as f64 / (pdf.n_samples as f64 * width))
}

/// Weighted least squares; returns (slope, R^2).
fn weighted_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((slope, r2))
}

/// Left-plateau flag and right-tail classification.
///
/// The lowest decade starts at the 1% quantile; its two half-decades are
/// compared by pooled density. The right tail uses bins above the median
/// with at least 5 counts, fitted with count weights on semilog and
/// log-log axes.
pub fn tail_diagnostics(pdf: &PdfEstimate) -> TailReport {
    let anchor = quantile_edge(pdf, 0.01).max(pdf.bin_edges[0]);
    let left_variation = if anchor > 0.0 {
        let mid = anchor * 10f64.sqrt();
        match (pooled_density(pdf, anchor, mid), pooled_density(pdf, mid, 10.0 * anchor)) {
            (Some(a), Some(b)) if a + b > 0.0 => Some((a - b).abs() / (0.5 * (a + b))),
            _ => None,
        }
    } else {
        None
    };
    let left_plateau = left_variation.is_some_and(|v| v < PLATEAU_MAX_VARIATION);

    let median = quantile_edge(pdf, 0.5);
    let tail: Vec<usize> = (0..pdf.counts.len())
        .filter(|&i| pdf.bin_edges[i] >= median && pdf.counts[i] >= TAIL_MIN_COUNT)
        .collect();
    let x: Vec<f64> = tail.iter().map(|&i| pdf.bin_centers[i]).collect();
    let y: Vec<f64> = tail.iter().map(|&i| pdf.densities[i].ln()).collect();
    let w: Vec<f64> = tail.iter().map(|&i| pdf.counts[i] as f64).collect();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();

    let (semi, loglog) = if tail.len() >= TAIL_MIN_BINS && x[0] > 0.0 {
        (weighted_fit(&x, &y, &w), weighted_fit(&lx, &y, &w))
    } else {
        (None, None)
    };
    let right_tail = match (semi, loglog) {
        (Some((_, rs)), Some((_, rl))) if rs - rl >= TAIL_R2_MARGIN => TailClass::Exponential,
        (Some((_, rs)), Some((_, rl))) if rl - rs >= TAIL_R2_MARGIN => TailClass::PowerLaw,
        _ => TailClass::Indeterminate,
    };
    TailReport {
        left_plateau,
        left_variation,
        right_tail,
        semilog_r_squared: semi.map(|f| f.1),
        loglog_r_squared: loglog.map(|f| f.1),
        semilog_slope: semi.map(|f| f.0),
        tail_bins: tail.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(times: Vec<f64>) -> ExitTimeSequence {
        let n = times.len();
        ExitTimeSequence::from_samples(1.0, times, n * 10).unwrap()
    }

    #[test]
    fn equal_times_are_degenerate() {
        let e = estimate_pdf(&seq(vec![2.0; 50]), Binning::Log, 10);
        assert!(matches!(e, Err(Error::Degenerate(_))));
        assert!(estimate_pdf(&seq(vec![2.0]), Binning::Log, 10).is_err());
    }

    #[test]
    fn counts_and_normalization() {
        let p = estimate_pdf(&seq(vec![1.0, 2.0, 3.0, 4.0]), Binning::Linear, 3).unwrap();
        assert_eq!(p.counts, vec![1, 1, 2]);
        assert_eq!(p.counts.iter().sum::<u64>(), 4);
        assert!((p.integral() - 1.0).abs() < 1e-12);
        assert!((p.sigma - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_bins_are_kept() {
        let p = estimate_pdf(&seq(vec![1.0, 1.0, 100.0]), Binning::Log, 8).unwrap();
        assert_eq!(p.densities.len(), 8);
        assert!(p.densities.iter().filter(|d| **d == 0.0).count() >= 6);
        assert!(p.bin_edges.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn binning_names() {
        assert_eq!("log".parse::<Binning>().unwrap(), Binning::Log);
        assert!("cubic".parse::<Binning>().is_err());
        assert_eq!(Binning::default(), Binning::Log);
    }
}
