//! `mfinv` command-line front end.
//!
//! Settings resolve as flags, then the `--config` JSON file, then defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::cascade::{analytic_tau, analytic_theta, generate_cascade, CascadeSpec};
use crate::error::{invalid, Error, Result};
use crate::grid::{self, order_grid};
use crate::io::{self, config_hash, write_summary, write_table, Format, Meta, Table};
use crate::measure::{compute_returns, filter_returns, volatility_from_returns, VolatilitySeries};
use crate::partition::{exit_times, PartitionCurve};
use crate::pdf::{estimate_pdf, tail_diagnostics, Binning, DEFAULT_BINS, DEFAULT_OVERLAY_FACTORS};
use crate::pipeline::{run_direct, run_inverse, run_invert_check, DirectOptions, DirectRun, InverseOptions, InverseRun};
use crate::scaling::legendre_spectrum;

pub const OUT_DIR_ENV: &str = "MFINV_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "mfinv-out";

/// Exit status when invert-check ran but the curves disagree.
pub const EXIT_DISAGREE: i32 = 3;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mfinv", version, about = "Direct and inverse multifractal analysis of volatility series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a cascade measure and its analytic exponents.
    Cascade(CommonArgs),
    /// Box-counting partition sums and tau(q).
    Direct(CommonArgs),
    /// Exit-time partition sums and theta(p).
    Inverse(CommonArgs),
    /// Run both pipelines and test tau(q) = -theta^-1(-q).
    InvertCheck(CheckArgs),
    /// Densities of normalized exit times.
    Pdf(PdfArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CommonArgs {
    /// JSON file with any of these settings (flags take precedence).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Price or volatility CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// How to read --input: price (default) or volatility.
    #[arg(long)]
    pub input_kind: Option<InputKind>,
    /// Drop returns with absolute value above this before building volatility.
    #[arg(long)]
    pub drop_returns_above: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    pub cascade_weights: Option<Vec<f64>>,
    /// Defaults to equal ratios.
    #[arg(long, value_delimiter = ',')]
    pub cascade_ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub depth: Option<u32>,
    /// Shuffle branch order per node with this seed.
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, allow_hyphen_values = true)]
    pub q_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_max: Option<f64>,
    #[arg(long)]
    pub q_step: Option<f64>,
    /// Inverse orders; default to the q grid.
    #[arg(long, allow_hyphen_values = true)]
    pub p_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p_max: Option<f64>,
    #[arg(long)]
    pub p_step: Option<f64>,
    #[arg(long)]
    pub points_per_decade: Option<usize>,

    /// Fit range lower end (box size for direct, threshold for inverse).
    #[arg(long)]
    pub range_lo: Option<f64>,
    #[arg(long)]
    pub range_hi: Option<f64>,
    /// Inverse fit range for invert-check, in thresholds.
    #[arg(long)]
    pub inverse_range_lo: Option<f64>,
    #[arg(long)]
    pub inverse_range_hi: Option<f64>,

    /// Output directory [env: MFINV_OUT_DIR, default: mfinv-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    #[default]
    Price,
    Volatility,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct InverseSourceArgs {
    /// Separate input for the inverse pipeline (negative control).
    #[arg(long)]
    pub inverse_input: Option<PathBuf>,
    #[arg(long)]
    pub inverse_input_kind: Option<InputKind>,
    #[arg(long, value_delimiter = ',')]
    pub inverse_cascade_weights: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub inverse_cascade_ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub inverse_depth: Option<u32>,
    #[arg(long)]
    pub inverse_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub inverse: InverseSourceArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PdfSettings {
    /// Thresholds as multiples of v_mean [default: 0.5,1,2].
    #[arg(long, value_delimiter = ',')]
    pub threshold_factors: Option<Vec<f64>>,
    /// Absolute thresholds; override --threshold-factors.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// log (default) or linear.
    #[arg(long)]
    pub binning: Option<Binning>,
}

#[derive(Debug, Clone, Args)]
pub struct PdfArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pdf: PdfSettings,
}

/// Shape of the `--config` file: the union of all settings.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    #[serde(flatten)]
    common: CommonArgs,
    #[serde(flatten)]
    inverse: InverseSourceArgs,
    #[serde(flatten)]
    pdf: PdfSettings,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr; $($f:ident),*) => { $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )* };
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    let known = serde_json::to_value(FileConfig::default())?;
    if let (Some(obj), Some(known)) = (value.as_object(), known.as_object()) {
        if let Some(k) = obj.keys().find(|k| !known.contains_key(*k)) {
            return Err(invalid(format!("config {}: unknown setting '{k}'", path.display())));
        }
    }
    serde_json::from_value(value).map_err(|e| invalid(format!("config {}: {e}", path.display())))
}

fn merge_common(a: &mut CommonArgs, b: &CommonArgs) {
    merge_fields!(a, b; input, input_kind, drop_returns_above, cascade_weights, cascade_ratios,
        depth, seed, q_min, q_max, q_step, p_min, p_max, p_step, points_per_decade,
        range_lo, range_hi, inverse_range_lo, inverse_range_hi, out, format);
}

/// Where the series comes from, after validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Price { path: PathBuf, drop_returns_above: Option<f64> },
    Volatility { path: PathBuf },
    Cascade { spec: CascadeSpec, depth: u32, seed: Option<u64> },
}

/// Fully resolved settings; hashed into every output header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub source: Source,
    pub inverse_source: Option<Source>,
    pub q_grid: (f64, f64, f64),
    pub p_grid: (f64, f64, f64),
    pub points_per_decade: usize,
    pub range: Option<(f64, f64)>,
    pub inverse_range: Option<(f64, f64)>,
    pub format: Format,
    pub pdf: Option<PdfConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfConfig {
    pub threshold_factors: Vec<f64>,
    pub thresholds: Option<Vec<f64>>,
    pub bins: usize,
    pub binning: Binning,
}

fn cascade_spec(weights: &[f64], ratios: Option<&Vec<f64>>) -> Result<CascadeSpec> {
    let ratios = match ratios {
        Some(r) => r.clone(),
        None => vec![1.0 / weights.len() as f64; weights.len()],
    };
    CascadeSpec::new(weights.to_vec(), ratios)
}

#[allow(clippy::too_many_arguments)]
fn resolve_source(
    input: Option<&PathBuf>,
    kind: Option<InputKind>,
    drop_above: Option<f64>,
    weights: Option<&Vec<f64>>,
    ratios: Option<&Vec<f64>>,
    depth: Option<u32>,
    seed: Option<u64>,
    label: &str,
) -> Result<Source> {
    match (input, weights) {
        (Some(_), Some(_)) => Err(invalid(format!(
            "{label}: give either an input file or cascade weights, not both"
        ))),
        (None, None) => Err(invalid(format!("{label}: no input (use --input or --cascade-weights)"))),
        (Some(path), None) => Ok(match kind.unwrap_or_default() {
            InputKind::Price => Source::Price {
                path: path.clone(),
                drop_returns_above: drop_above,
            },
            InputKind::Volatility => Source::Volatility { path: path.clone() },
        }),
        (None, Some(w)) => Ok(Source::Cascade {
            spec: cascade_spec(w, ratios)?,
            depth: depth.ok_or_else(|| invalid(format!("{label}: cascade input needs --depth")))?,
            seed,
        }),
    }
}

fn order_settings(min: Option<f64>, max: Option<f64>, step: Option<f64>) -> Result<(f64, f64, f64)> {
    let g = (
        min.unwrap_or(grid::DEFAULT_ORDER_MIN),
        max.unwrap_or(grid::DEFAULT_ORDER_MAX),
        step.unwrap_or(grid::DEFAULT_ORDER_STEP),
    );
    order_grid(g.0, g.1, g.2)?;
    if g.0.abs().max(g.1.abs()) > grid::MAX_ABS_ORDER {
        return Err(invalid(format!("orders beyond +-{} are not supported", grid::MAX_ABS_ORDER)));
    }
    Ok(g)
}

fn pair(lo: Option<f64>, hi: Option<f64>, what: &str) -> Result<Option<(f64, f64)>> {
    match (lo, hi) {
        (None, None) => Ok(None),
        (Some(l), Some(h)) if l > 0.0 && h > l => Ok(Some((l, h))),
        (Some(l), Some(h)) => Err(invalid(format!("{what} ({l}, {h}) must satisfy 0 < lo < hi"))),
        _ => Err(invalid(format!("{what} needs both ends"))),
    }
}

impl RunConfig {
    fn build(
        command: &str,
        common: &CommonArgs,
        inverse: Option<&InverseSourceArgs>,
        pdf: Option<&PdfSettings>,
    ) -> Result<Self> {
        let c = common;
        let source = resolve_source(
            c.input.as_ref(),
            c.input_kind,
            c.drop_returns_above,
            c.cascade_weights.as_ref(),
            c.cascade_ratios.as_ref(),
            c.depth,
            c.seed,
            "input",
        )?;
        if command == "cascade" && !matches!(source, Source::Cascade { .. }) {
            return Err(invalid("cascade needs --cascade-weights and --depth"));
        }
        let inverse_source = match inverse {
            Some(i) if i.inverse_input.is_some() || i.inverse_cascade_weights.is_some() => Some(resolve_source(
                i.inverse_input.as_ref(),
                i.inverse_input_kind,
                c.drop_returns_above,
                i.inverse_cascade_weights.as_ref(),
                i.inverse_cascade_ratios.as_ref(),
                i.inverse_depth.or(c.depth),
                i.inverse_seed,
                "inverse input",
            )?),
            _ => None,
        };
        let q_grid = order_settings(c.q_min, c.q_max, c.q_step)?;
        let p_grid = order_settings(c.p_min.or(c.q_min), c.p_max.or(c.q_max), c.p_step.or(c.q_step))?;
        let pdf = pdf
            .map(|p| -> Result<PdfConfig> {
                let factors = p.threshold_factors.clone().unwrap_or_else(|| DEFAULT_OVERLAY_FACTORS.to_vec());
                if factors.is_empty() || factors.iter().any(|f| !(*f > 0.0)) {
                    return Err(invalid("threshold factors must be positive"));
                }
                Ok(PdfConfig {
                    threshold_factors: factors,
                    thresholds: p.thresholds.clone(),
                    bins: p.bins.unwrap_or(DEFAULT_BINS),
                    binning: p.binning.unwrap_or_default(),
                })
            })
            .transpose()?;
        Ok(Self {
            command: command.to_string(),
            source,
            inverse_source,
            q_grid,
            p_grid,
            points_per_decade: c.points_per_decade.unwrap_or(grid::DEFAULT_POINTS_PER_DECADE),
            range: pair(c.range_lo, c.range_hi, "--range-lo/--range-hi")?,
            inverse_range: pair(c.inverse_range_lo, c.inverse_range_hi, "--inverse-range-lo/--inverse-range-hi")?,
            format: c.format.unwrap_or_default(),
            pdf,
        })
    }

    fn q_orders(&self) -> Vec<f64> {
        order_grid(self.q_grid.0, self.q_grid.1, self.q_grid.2).expect("validated")
    }

    fn p_orders(&self) -> Vec<f64> {
        order_grid(self.p_grid.0, self.p_grid.1, self.p_grid.2).expect("validated")
    }

    fn direct_options(&self) -> DirectOptions {
        DirectOptions {
            orders: self.q_orders(),
            points_per_decade: self.points_per_decade,
            range: self.range,
            ..Default::default()
        }
    }

    fn inverse_options(&self, range: Option<(f64, f64)>) -> InverseOptions {
        InverseOptions {
            orders: self.p_orders(),
            points_per_decade: self.points_per_decade,
            range,
            ..Default::default()
        }
    }
}

/// Loads or generates the volatility series for a source.
pub fn load_source(source: &Source) -> Result<VolatilitySeries> {
    match source {
        Source::Price { path, drop_returns_above } => {
            let prices = io::read_price_csv(path)?;
            let mut returns = compute_returns(&prices);
            if let Some(limit) = drop_returns_above {
                let before = returns.len();
                returns = filter_returns(&returns, *limit);
                info!("dropped {} returns above {limit}", before - returns.len());
            }
            volatility_from_returns(&returns)
        }
        Source::Volatility { path } => io::read_volatility_csv(path),
        Source::Cascade { spec, depth, seed } => {
            if !spec.is_regular() {
                return Err(invalid(
                    "a cascade used as a volatility series must have equal ratios",
                ));
            }
            let m = generate_cascade(spec, *depth, *seed)?;
            VolatilitySeries::new(m.weights)
        }
    }
}

struct Output<'a> {
    dir: PathBuf,
    format: Format,
    meta: Meta,
    written: &'a mut Vec<PathBuf>,
}

impl Output<'_> {
    fn table(&mut self, stem: &str, table: &Table) -> Result<()> {
        let p = write_table(&self.dir, stem, table, &self.meta, self.format)?;
        self.written.push(p);
        Ok(())
    }

    fn summary<T: Serialize>(&mut self, stem: &str, body: &T) -> Result<()> {
        let p = write_summary(&self.dir, stem, body, &self.meta)?;
        self.written.push(p);
        Ok(())
    }
}

fn partition_table(curve: &PartitionCurve) -> Table {
    let mut t = Table::new(&["order", "scale", "log_value", "missing"]);
    for (oi, q) in curve.orders.iter().enumerate() {
        for (si, s) in curve.scales.iter().enumerate() {
            let v = curve.log_values[oi][si];
            t.push(vec![(*q).into(), (*s).into(), v.into(), v.is_none().into()]);
        }
    }
    t
}

/// Plot data: `ln chi / (q - 1)` against `ln scale`, so that all orders
/// share the slope of a uniform measure. `q = 1` is omitted.
fn plot_table(curve: &PartitionCurve) -> Table {
    let mut t = Table::new(&["order", "scale", "log_scale", "normalized_log_value"]);
    for (oi, q) in curve.orders.iter().enumerate() {
        if (q - 1.0).abs() < 1e-12 {
            continue;
        }
        for (si, s) in curve.scales.iter().enumerate() {
            let v = curve.log_values[oi][si].map(|v| v / (q - 1.0));
            t.push(vec![(*q).into(), (*s).into(), s.ln().into(), v.into()]);
        }
    }
    t
}

fn exponent_table(orders: &[f64], exponents: &[f64], stderrs: &[f64]) -> Table {
    let mut t = Table::new(&["order", "exponent", "stderr"]);
    for i in 0..orders.len() {
        t.push(vec![orders[i].into(), exponents[i].into(), stderrs[i].into()]);
    }
    t
}

fn write_direct(out: &mut Output, run: &DirectRun, prefix: &str) -> Result<()> {
    out.table(&format!("{prefix}partition"), &partition_table(&run.partition))?;
    out.table(&format!("{prefix}plot"), &plot_table(&run.partition))?;
    let c = &run.curve;
    out.table(&format!("{prefix}exponents"), &exponent_table(&c.orders, &c.exponents, &c.stderrs))?;
    let mut spec = Table::new(&["order", "alpha", "f_alpha"]);
    for p in legendre_spectrum(c)? {
        spec.push(vec![p.order.into(), p.alpha.into(), p.f_alpha.into()]);
    }
    out.table(&format!("{prefix}spectrum"), &spec)?;
    out.summary(
        &format!("{prefix}summary"),
        &serde_json::json!({
            "covered_len": run.covered_len,
            "range": run.range,
            "detected": run.detected,
            "dropped_orders": c.dropped,
            "warnings": run.partition.warnings,
        }),
    )
}

fn write_inverse(out: &mut Output, vol: &VolatilitySeries, run: &InverseRun, prefix: &str) -> Result<()> {
    let mut stats = Table::new(&["threshold", "count", "mean", "std"]);
    for &dv in &run.partition.scales {
        let e = exit_times(vol, dv)?;
        let mean = e.mean();
        let std = if e.count() > 1 {
            let ss: f64 = e.times.iter().map(|s| (s - mean) * (s - mean)).sum();
            Some((ss / (e.count() - 1) as f64).sqrt())
        } else {
            None
        };
        stats.push(vec![dv.into(), e.count().into(), mean.into(), std.into()]);
    }
    out.table(&format!("{prefix}exit_stats"), &stats)?;
    out.table(&format!("{prefix}partition"), &partition_table(&run.partition))?;
    out.table(&format!("{prefix}plot"), &plot_table(&run.partition))?;
    let c = &run.curve;
    out.table(&format!("{prefix}exponents"), &exponent_table(&c.orders, &c.exponents, &c.stderrs))?;
    out.summary(
        &format!("{prefix}summary"),
        &serde_json::json!({
            "v_mean": run.v_mean,
            "range": run.range,
            "detected": run.detected,
            "dropped_orders": c.dropped,
            "warnings": run.partition.warnings,
        }),
    )
}

/// Outcome of a command: files written and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub exit_code: i32,
}

fn out_dir(flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let (name, common, inverse, pdf) = match &cli.command {
        Command::Cascade(c) => ("cascade", c, None, None),
        Command::Direct(c) => ("direct", c, None, None),
        Command::Inverse(c) => ("inverse", c, None, None),
        Command::InvertCheck(a) => ("invert-check", &a.common, Some(&a.inverse), None),
        Command::Pdf(a) => ("pdf", &a.common, None, Some(&a.pdf)),
    };
    let file = load_file_config(common.config.as_deref())?;
    let mut common = common.clone();
    merge_common(&mut common, &file.common);
    let inverse = inverse.map(|i| {
        let mut i = i.clone();
        merge_fields!(i, file.inverse; inverse_input, inverse_input_kind, inverse_cascade_weights,
            inverse_cascade_ratios, inverse_depth, inverse_seed);
        i
    });
    let pdf = pdf.map(|p| {
        let mut p = p.clone();
        merge_fields!(p, file.pdf; threshold_factors, thresholds, bins, binning);
        p
    });
    let config = RunConfig::build(name, &common, inverse.as_ref(), pdf.as_ref())?;
    let dir = out_dir(common.out.as_ref());
    std::fs::create_dir_all(&dir)
        .map_err(|e| invalid(format!("cannot create output directory {}: {e}", dir.display())))?;
    execute(&config, &dir)
}

/// Executes a resolved configuration, writing into `dir`.
pub fn execute(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let meta = Meta::new(&config.command, config_hash(config)?)
        .grid("q", &config.q_orders())
        .grid("p", &config.p_orders());
    let mut written = Vec::new();
    let mut out = Output {
        dir: dir.to_path_buf(),
        format: config.format,
        meta,
        written: &mut written,
    };
    let mut exit_code = 0;
    match config.command.as_str() {
        "cascade" => cmd_cascade(config, &mut out)?,
        "direct" => {
            let vol = load_source(&config.source)?;
            let run = run_direct(&vol, &config.direct_options())?;
            write_direct(&mut out, &run, "")?;
        }
        "inverse" => {
            let vol = load_source(&config.source)?;
            let run = run_inverse(&vol, &config.inverse_options(config.range))?;
            write_inverse(&mut out, &vol, &run, "")?;
        }
        "invert-check" => {
            if !cmd_invert_check(config, &mut out)? {
                exit_code = EXIT_DISAGREE;
            }
        }
        "pdf" => cmd_pdf(config, &mut out)?,
        other => return Err(invalid(format!("unknown command {other}"))),
    }
    Ok(Outcome { written, exit_code })
}

fn cmd_cascade(config: &RunConfig, out: &mut Output) -> Result<()> {
    let Source::Cascade { spec, depth, seed } = &config.source else {
        return Err(invalid("cascade needs a cascade source"));
    };
    let m = generate_cascade(spec, *depth, *seed)?;
    let mut t = Table::new(&["index", "left", "width", "weight"]);
    let n = m.weights.len();
    let mut left = 0.0;
    for i in 0..n {
        let w = m.widths.as_ref().map_or(1.0 / n as f64, |w| w[i]);
        t.push(vec![i.into(), left.into(), w.into(), m.weights[i].into()]);
        left += w;
    }
    out.table("measure", &t)?;
    let mut a = Table::new(&["order", "tau", "theta"]);
    for q in config.q_orders() {
        a.push(vec![q.into(), analytic_tau(spec, q)?.into(), analytic_theta(spec, q)?.into()]);
    }
    out.table("analytic", &a)?;
    out.summary(
        "summary",
        &serde_json::json!({ "spec": spec, "depth": depth, "seed": seed, "boxes": n }),
    )
}

fn cmd_invert_check(config: &RunConfig, out: &mut Output) -> Result<bool> {
    let direct_vol = load_source(&config.source)?;
    let inverse_vol = match &config.inverse_source {
        Some(s) => load_source(s)?,
        None => direct_vol.clone(),
    };
    let run = run_invert_check(
        &direct_vol,
        &inverse_vol,
        &config.direct_options(),
        &config.inverse_options(config.inverse_range),
    )?;
    write_direct(out, &run.direct, "direct_")?;
    write_inverse(out, &inverse_vol, &run.inverse, "inverse_")?;

    let mut t = Table::new(&["direction", "grid", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "diff"]);
    for (label, r) in [("q", &run.check.direct), ("p", &run.check.inverse)] {
        for i in 0..r.grid.len() {
            t.push(vec![
                label.into(),
                r.grid[i].into(),
                r.lhs[i].into(),
                r.lhs_stderr[i].into(),
                r.rhs[i].into(),
                r.rhs_stderr[i].into(),
                r.diff[i].into(),
            ]);
        }
    }
    out.table("inversion", &t)?;
    if !run.consistency.consistent {
        warn!(
            "scaling ranges disagree: ratios {:.3} and {:.3}",
            run.consistency.lower_ratio, run.consistency.upper_ratio
        );
    }
    if run.check.unreliable {
        warn!("inversion overlap covers only {:.0}% of the grid", 100.0 * run.check.coverage);
    }
    out.summary(
        "inversion_summary",
        &serde_json::json!({
            "within_error_bars": run.check.within_error_bars,
            "max_abs_diff": run.check.max_abs_diff,
            "max_abs_diff_q": run.check.direct.max_abs_diff,
            "max_abs_diff_p": run.check.inverse.max_abs_diff,
            "coverage": run.check.coverage,
            "unreliable": run.check.unreliable,
            "range_consistency": run.consistency,
            "direct_range": run.direct.range,
            "inverse_range": run.inverse.range,
        }),
    )?;
    Ok(run.check.within_error_bars)
}

fn cmd_pdf(config: &RunConfig, out: &mut Output) -> Result<()> {
    let pdf = config.pdf.as_ref().ok_or_else(|| invalid("pdf settings missing"))?;
    let vol = load_source(&config.source)?;
    let thresholds = match &pdf.thresholds {
        Some(t) => t.clone(),
        None => pdf.threshold_factors.iter().map(|f| f * vol.mean()).collect(),
    };
    let mut t = Table::new(&["threshold", "bin_lo", "bin_hi", "bin_center", "density", "count"]);
    let mut reports = Vec::new();
    for &dv in &thresholds {
        let est = estimate_pdf(&exit_times(&vol, dv)?, pdf.binning, pdf.bins)?;
        for i in 0..est.densities.len() {
            t.push(vec![
                dv.into(),
                est.bin_edges[i].into(),
                est.bin_edges[i + 1].into(),
                est.bin_centers[i].into(),
                est.densities[i].into(),
                est.counts[i].into(),
            ]);
        }
        reports.push(serde_json::json!({
            "threshold": dv,
            "sigma": est.sigma,
            "n_samples": est.n_samples,
            "integral": est.integral(),
            "tails": tail_diagnostics(&est),
        }));
    }
    out.table("pdf", &t)?;
    out.summary("pdf_summary", &serde_json::json!({ "v_mean": vol.mean(), "estimates": reports }))
}

/// Machine-readable error document.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}
