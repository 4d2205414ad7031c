//! End-to-end runs: grids, partition sums, range selection and exponents.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{self, box_size_grid, exit_threshold_grid};
use crate::inversion::{inversion_check, InversionCheck};
use crate::measure::VolatilitySeries;
use crate::partition::{direct_partition, inverse_partition, PartitionCurve};
use crate::scaling::{
    check_range_consistency, detect_scaling_range_with, exponent_curve, DetectedRange, DetectionConfig,
    ExponentCurve, RangeConsistency, DEFAULT_ANCHORS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectOptions {
    pub orders: Vec<f64>,
    pub points_per_decade: usize,
    pub min_boxes: usize,
    /// Explicit box sizes; the grid is derived from the series otherwise.
    pub box_sizes: Option<Vec<usize>>,
    /// Fit range in box sizes; detected when absent.
    pub range: Option<(f64, f64)>,
    pub anchors: Vec<f64>,
    pub detection: DetectionConfig,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            orders: grid::order_grid(grid::DEFAULT_ORDER_MIN, grid::DEFAULT_ORDER_MAX, grid::DEFAULT_ORDER_STEP)
                .expect("default grid is valid"),
            points_per_decade: grid::DEFAULT_POINTS_PER_DECADE,
            min_boxes: grid::MIN_BOXES,
            box_sizes: None,
            range: None,
            anchors: DEFAULT_ANCHORS.to_vec(),
            detection: DetectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectRun {
    pub covered_len: usize,
    pub partition: PartitionCurve,
    pub detected: Option<DetectedRange>,
    pub range: (f64, f64),
    pub curve: ExponentCurve,
}

pub fn run_direct(vol: &VolatilitySeries, opts: &DirectOptions) -> Result<DirectRun> {
    let (series, sizes) = match &opts.box_sizes {
        Some(sizes) => (vol.clone(), sizes.clone()),
        None => {
            let g = box_size_grid(vol.len(), opts.points_per_decade, opts.min_boxes)?;
            (vol.truncated(g.covered_len)?, g.sizes)
        }
    };
    let partition = direct_partition(&series, &sizes, &opts.orders)?;
    let (detected, range) = select_range(&partition, opts.range, &opts.anchors, &opts.detection)?;
    let curve = exponent_curve(&partition, range)?;
    Ok(DirectRun {
        covered_len: series.len(),
        partition,
        detected,
        range,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseOptions {
    pub orders: Vec<f64>,
    pub points_per_decade: usize,
    pub min_exits: usize,
    /// Explicit thresholds; mirrors of the box grid otherwise.
    pub thresholds: Option<Vec<f64>>,
    /// Fit range in thresholds; detected when absent.
    pub range: Option<(f64, f64)>,
    pub anchors: Vec<f64>,
    pub detection: DetectionConfig,
}

impl Default for InverseOptions {
    fn default() -> Self {
        let d = DirectOptions::default();
        Self {
            orders: d.orders,
            points_per_decade: d.points_per_decade,
            min_exits: grid::MIN_BOXES,
            thresholds: None,
            range: None,
            anchors: d.anchors,
            detection: d.detection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseRun {
    pub v_mean: f64,
    pub partition: PartitionCurve,
    pub detected: Option<DetectedRange>,
    pub range: (f64, f64),
    pub curve: ExponentCurve,
}

pub fn run_inverse(vol: &VolatilitySeries, opts: &InverseOptions) -> Result<InverseRun> {
    let v_mean = vol.mean();
    let thresholds = match &opts.thresholds {
        Some(t) => t.clone(),
        None => {
            if opts.min_exits == 0 {
                return Err(invalid("minimum exit count must be positive"));
            }
            exit_threshold_grid(vol.total(), vol.len(), opts.points_per_decade, opts.min_exits)?
        }
    };
    let partition = inverse_partition(vol, &thresholds, &opts.orders)?;
    let (detected, range) = select_range(&partition, opts.range, &opts.anchors, &opts.detection)?;
    let curve = exponent_curve(&partition, range)?;
    Ok(InverseRun {
        v_mean,
        partition,
        detected,
        range,
        curve,
    })
}

fn select_range(
    curve: &PartitionCurve,
    fixed: Option<(f64, f64)>,
    anchors: &[f64],
    config: &DetectionConfig,
) -> Result<(Option<DetectedRange>, (f64, f64))> {
    match fixed {
        Some(r) => Ok((None, r)),
        None => {
            let d = detect_scaling_range_with(curve, anchors, config)?;
            Ok((Some(d), (d.lo, d.hi)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRun {
    pub direct: DirectRun,
    pub inverse: InverseRun,
    pub consistency: RangeConsistency,
    pub check: InversionCheck,
}

/// Runs both pipelines and compares their exponents. The two series are
/// normally the same; distinct series serve as a negative control.
pub fn run_invert_check(
    direct_vol: &VolatilitySeries,
    inverse_vol: &VolatilitySeries,
    direct_opts: &DirectOptions,
    inverse_opts: &InverseOptions,
) -> Result<CheckRun> {
    let direct = run_direct(direct_vol, direct_opts)?;
    let inverse = run_inverse(inverse_vol, inverse_opts)?;
    let consistency = check_range_consistency(direct.range, inverse.range, inverse.v_mean);
    let check = inversion_check(&direct.curve, &inverse.curve)?;
    Ok(CheckRun {
        direct,
        inverse,
        consistency,
        check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_uniform() {
        let vol = VolatilitySeries::new(vec![0.5; 3600]).unwrap();
        let d = run_direct(&vol, &DirectOptions::default()).unwrap();
        for (q, t) in d.curve.orders.iter().zip(&d.curve.exponents) {
            assert!((t - (q - 1.0)).abs() < 1e-9, "tau({q}) = {t}");
        }
        let opts = InverseOptions {
            thresholds: Some((0..12).map(|k| 0.5 * 2f64.powi(k)).collect()),
            ..Default::default()
        };
        let vol = VolatilitySeries::new(vec![0.5; 4096]).unwrap();
        let i = run_inverse(&vol, &opts).unwrap();
        for (p, t) in i.curve.orders.iter().zip(&i.curve.exponents) {
            assert!((t - (p - 1.0)).abs() < 1e-9, "theta({p}) = {t}");
        }
    }

    #[test]
    fn fixed_range_skips_detection() {
        let vol = VolatilitySeries::new(vec![1.0; 1000]).unwrap();
        let opts = DirectOptions {
            range: Some((2.0, 50.0)),
            ..Default::default()
        };
        let d = run_direct(&vol, &opts).unwrap();
        assert!(d.detected.is_none());
        assert_eq!(d.range, (2.0, 50.0));
    }
}
