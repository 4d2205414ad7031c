//! Direct and inverse multifractal analysis of conservative measures,
//! with exit-time statistics and the inversion check between the two.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod cli;
pub mod error;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod measure;
pub mod numeric;
pub mod partition;
pub mod pdf;
pub mod pipeline;
pub mod scaling;

pub use cascade::{analytic_tau, analytic_theta, generate_cascade, CascadeSpec, GeneratedMeasure};
pub use error::{Error, Result};
pub use inversion::{inversion_check, invert_exponent_curve, isotonic_increasing, InversionCheck, InversionReport};
pub use measure::{box_measure, invert_measure, ConservativeMeasure, PriceSeries, VolatilitySeries};
pub use partition::{direct_partition, exit_times, inverse_partition, CurveKind, ExitTimeSequence, PartitionCurve};
pub use scaling::{detect_scaling_range, exponent_curve, fit_power_law, legendre_spectrum, ExponentCurve, ScalingFit};
pub use pdf::{estimate_pdf, tail_diagnostics, Binning, PdfEstimate, TailClass};
pub use pipeline::{run_direct, run_inverse, run_invert_check, DirectOptions, InverseOptions};
