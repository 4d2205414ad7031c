//! Multinomial multiplicative cascades and their exact scaling exponents.
//!
//! A cascade splits the mass of every interval into fractions `weights[i]`
//! carried by subintervals of relative width `ratios[i]`. Its mass exponent
//! `tau(q)` is the root of `sum_i m_i^q r_i^(-tau) = 1`. The inverse measure
//! (the measure of the inverse cumulative function) is again a cascade with
//! the roles of weights and ratios exchanged, which gives `theta(p)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Upper bound on the number of finest-level boxes a generator may emit.
pub const MAX_BOXES: usize = 1 << 26;

const SUM_TOL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;
const NEWTON_BOUND: f64 = 100.0;

/// Parameters of a self-similar multinomial measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub weights: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl CascadeSpec {
    /// Builds a spec and checks it can be solved analytically.
    pub fn new(weights: Vec<f64>, ratios: Vec<f64>) -> Result<Self> {
        let spec = Self { weights, ratios };
        spec.validate()?;
        Ok(spec)
    }

    /// Equal-ratio binomial cascade `(m, 1 - m)` on halves.
    pub fn binomial(m: f64) -> Result<Self> {
        Self::new(vec![m, 1.0 - m], vec![0.5, 0.5])
    }

    pub fn branches(&self) -> usize {
        self.weights.len()
    }

    /// Checks the invariants needed by the exponent solvers.
    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n < 2 {
            return Err(invalid(format!("cascade needs at least 2 branches, got {n}")));
        }
        if self.ratios.len() != n {
            return Err(invalid(format!(
                "cascade has {n} weights but {} ratios",
                self.ratios.len()
            )));
        }
        for (i, &m) in self.weights.iter().enumerate() {
            if !(m > 0.0 && m < 1.0) {
                return Err(invalid(format!("weight m[{i}] = {m} is outside (0, 1)")));
            }
        }
        for (i, &r) in self.ratios.iter().enumerate() {
            if !(r > 0.0 && r < 1.0) {
                return Err(invalid(format!("ratio r[{i}] = {r} is outside (0, 1)")));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Additionally requires the ratios to tile the unit interval.
    pub fn validate_for_generation(&self) -> Result<()> {
        self.validate()?;
        let total: f64 = self.ratios.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!(
                "ratios sum to {total}; generation requires them to tile [0, 1]"
            )));
        }
        Ok(())
    }

    /// Common ratio when every branch has the same width.
    pub fn common_ratio(&self) -> Option<f64> {
        let r0 = self.ratios[0];
        self.ratios
            .iter()
            .all(|&r| (r - r0).abs() <= 1e-15 * r0.max(1.0))
            .then_some(r0)
    }

    /// Whether the cascade lives on the regular `n^d` grid.
    pub fn is_regular(&self) -> bool {
        let n = self.branches() as f64;
        self.ratios.iter().all(|&r| (r - 1.0 / n).abs() <= SUM_TOL)
    }

    /// Mass exponent `tau(q)`.
    pub fn tau(&self, q: f64) -> Result<f64> {
        analytic_tau(self, q)
    }

    /// Inverse-measure exponent `theta(p)`.
    pub fn theta(&self, p: f64) -> Result<f64> {
        analytic_theta(self, p)
    }
}

/// Solves `sum_i m_i^q r_i^(-tau) = 1` for `tau`.
pub fn analytic_tau(spec: &CascadeSpec, q: f64) -> Result<f64> {
    spec.validate()?;
    solve_exponent(&spec.weights, &spec.ratios, q)
}

/// Solves the same equation on the swapped spec: probabilities `r_i`,
/// ratios `m_i`.
pub fn analytic_theta(spec: &CascadeSpec, p: f64) -> Result<f64> {
    spec.validate()?;
    solve_exponent(&spec.ratios, &spec.weights, p)
}

fn solve_exponent(probs: &[f64], ratios: &[f64], order: f64) -> Result<f64> {
    if !order.is_finite() {
        return Err(invalid(format!("order {order} is not finite")));
    }
    let log_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let log_r: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();

    let r0 = log_r[0];
    if log_r.iter().all(|&l| (l - r0).abs() <= 1e-15 * r0.abs()) {
        // tau = ln(sum p^q) / ln r, with the sum taken in log space.
        let terms: Vec<f64> = log_p.iter().map(|l| order * l).collect();
        return Ok(log_sum_exp(&terms) / r0);
    }

    let residual = |t: f64| -> (f64, f64) {
        let mut g = -1.0;
        let mut dg = 0.0;
        for (lp, lr) in log_p.iter().zip(&log_r) {
            let term = (order * lp - t * lr).exp();
            g += term;
            dg -= term * lr;
        }
        (g, dg)
    };

    let start = order - 1.0;
    let mut t = start;
    for _ in 0..MAX_ITER {
        let (g, dg) = residual(t);
        if g.abs() <= ROOT_TOL {
            return Ok(t);
        }
        let next = t - g / dg;
        if !next.is_finite() || next.abs() > NEWTON_BOUND {
            return bisect(&residual, start, order);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            if g.abs() <= 1e3 * ROOT_TOL {
                return Ok(next);
            }
            break;
        }
        t = next;
    }
    bisect(&residual, start, order)
}

fn bisect(residual: &dyn Fn(f64) -> (f64, f64), start: f64, order: f64) -> Result<f64> {
    // g is increasing in tau, so widen until the signs bracket the root.
    let mut width = 1.0;
    let mut lo = start - width;
    let mut hi = start + width;
    while residual(lo).0 > 0.0 {
        width *= 2.0;
        lo = start - width;
        if width > 1e6 {
            return Err(Error::NonConvergence { order, residual: residual(lo).0 });
        }
    }
    width = 1.0;
    while residual(hi).0 < 0.0 {
        width *= 2.0;
        hi = start + width;
        if width > 1e6 {
            return Err(Error::NonConvergence { order, residual: residual(hi).0 });
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        mid = 0.5 * (lo + hi);
        let g = residual(mid).0;
        if g.abs() <= ROOT_TOL {
            return Ok(mid);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    let g = residual(mid).0;
    if g.abs() <= 1e3 * ROOT_TOL {
        Ok(mid)
    } else {
        Err(Error::NonConvergence { order, residual: g })
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Finest-level masses of a generated cascade, in left-to-right order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedMeasure {
    pub weights: Vec<f64>,
    /// Interval widths, present only when the ratios are unequal.
    pub widths: Option<Vec<f64>>,
    pub depth: u32,
    pub spec: CascadeSpec,
    pub shuffled: bool,
    pub seed: Option<u64>,
}

impl GeneratedMeasure {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Builds a cascade of the given depth.
///
/// With a seed, the `(m_i, r_i)` pairs are permuted independently at every
/// node, so the result is a random cascade with the same exponents.
pub fn generate_cascade(spec: &CascadeSpec, depth: u32, seed: Option<u64>) -> Result<GeneratedMeasure> {
    spec.validate_for_generation()?;
    if depth == 0 {
        return Err(invalid("cascade depth must be positive"));
    }
    let n = spec.branches();
    let count = n
        .checked_pow(depth)
        .filter(|&c| c <= MAX_BOXES)
        .ok_or_else(|| {
            Error::Resource(format!(
                "{n}^{depth} boxes exceeds the limit of {MAX_BOXES}"
            ))
        })?;

    let regular = spec.is_regular();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut order: Vec<usize> = (0..n).collect();

    let mut weights = vec![1.0];
    let mut widths = vec![1.0];
    for level in 0..depth {
        let size = n.pow(level + 1);
        let mut next_w = Vec::with_capacity(size);
        let mut next_r = Vec::with_capacity(if regular { 0 } else { size });
        for (k, &w) in weights.iter().enumerate() {
            if let Some(rng) = rng.as_mut() {
                order.shuffle(rng);
            }
            for &i in &order {
                next_w.push(w * spec.weights[i]);
                if !regular {
                    next_r.push(widths[k] * spec.ratios[i]);
                }
            }
        }
        weights = next_w;
        widths = next_r;
    }
    debug_assert_eq!(weights.len(), count);

    Ok(GeneratedMeasure {
        weights,
        widths: (!regular).then_some(widths),
        depth,
        spec: spec.clone(),
        shuffled: seed.is_some(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_cascade_is_flat() {
        let g = generate_cascade(&CascadeSpec::binomial(0.5).unwrap(), 3, None).unwrap();
        assert_eq!(g.weights, vec![0.125; 8]);
        assert!(g.widths.is_none());
    }

    #[test]
    fn depth_two_product_expansion() {
        let g = generate_cascade(&CascadeSpec::binomial(0.6).unwrap(), 2, None).unwrap();
        let expect = [0.36, 0.24, 0.24, 0.16];
        for (w, e) in g.weights.iter().zip(expect) {
            assert!(close(*w, e, 1e-15));
        }
    }

    #[test]
    fn deep_cascade_is_normalized() {
        let g = generate_cascade(&CascadeSpec::binomial(0.7).unwrap(), 14, None).unwrap();
        assert_eq!(g.len(), 16384);
        assert!(g.weights.iter().all(|&w| w > 0.0));
        assert!(close(g.weights.iter().sum::<f64>(), 1.0, 1e-9));
    }

    /// Every finest box is the product of the weights along its path.
    #[test]
    fn matches_path_enumeration() {
        let spec = CascadeSpec::new(vec![0.5, 0.3, 0.2], vec![1.0 / 3.0; 3]).unwrap();
        for depth in 1..=6u32 {
            let g = generate_cascade(&spec, depth, None).unwrap();
            for (k, w) in g.weights.iter().enumerate() {
                let mut idx = k;
                let mut digits = Vec::new();
                for _ in 0..depth {
                    digits.push(idx % 3);
                    idx /= 3;
                }
                let prod: f64 = digits.iter().map(|&d| spec.weights[d]).product();
                assert!(close(*w, prod, 1e-15));
            }
        }
    }

    #[test]
    fn unequal_ratios_emit_widths() {
        let spec = CascadeSpec::new(vec![0.6, 0.4], vec![0.3, 0.7]).unwrap();
        let g = generate_cascade(&spec, 3, None).unwrap();
        let widths = g.widths.unwrap();
        assert_eq!(widths.len(), 8);
        assert!(close(widths.iter().sum::<f64>(), 1.0, 1e-12));
        assert!(close(widths[0], 0.027, 1e-15));
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(CascadeSpec::new(vec![1.0], vec![0.5]).is_err());
        assert!(CascadeSpec::new(vec![0.6, 0.5], vec![0.5, 0.5]).is_err());
        assert!(CascadeSpec::new(vec![0.6, 0.4], vec![0.5, 1.0]).is_err());
        assert!(CascadeSpec::new(vec![0.6, 0.4], vec![0.5]).is_err());
        let err = CascadeSpec::new(vec![0.6, 0.4], vec![0.5, 0.6]).unwrap();
        assert!(err.validate_for_generation().is_err());
        assert!(generate_cascade(&err, 3, None).is_err());
    }

    #[test]
    fn box_limit_is_a_resource_error() {
        let spec = CascadeSpec::binomial(0.6).unwrap();
        assert!(matches!(generate_cascade(&spec, 27, None), Err(Error::Resource(_))));
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = CascadeSpec::binomial(0.7).unwrap();
        let a = generate_cascade(&spec, 10, Some(7)).unwrap();
        let b = generate_cascade(&spec, 10, Some(7)).unwrap();
        let c = generate_cascade(&spec, 10, Some(8)).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_ne!(a.weights, c.weights);
        assert!(a.shuffled);
    }

    #[test]
    fn closed_form_examples() {
        let uniform = CascadeSpec::binomial(0.5).unwrap();
        assert!(close(analytic_tau(&uniform, 3.0).unwrap(), 2.0, 1e-14));
        assert!(close(analytic_theta(&uniform, 3.0).unwrap(), 2.0, 1e-12));
        assert!(close(analytic_tau(&uniform, 0.0).unwrap(), -1.0, 1e-14));

        let b = CascadeSpec::binomial(0.6).unwrap();
        assert!(close(analytic_tau(&b, 2.0).unwrap(), -(0.52f64).log2(), 1e-14));
        assert!(close(analytic_tau(&b, 2.0).unwrap(), 0.943416, 1e-6));
        assert!(close(analytic_tau(&b, 1.0).unwrap(), 0.0, 1e-12));
        assert!(close(analytic_theta(&b, 1.0).unwrap(), 0.0, 1e-12));
        let t2 = analytic_tau(&b, 2.0).unwrap();
        assert!(close(analytic_theta(&b, -t2).unwrap(), -2.0, 1e-9));
    }

    #[test]
    fn tau_at_zero_is_log_n_over_log_r() {
        let spec = CascadeSpec::new(vec![0.5, 0.3, 0.2], vec![0.25; 3]).unwrap();
        let expect = 3f64.ln() / 0.25f64.ln();
        assert!(close(analytic_tau(&spec, 0.0).unwrap(), expect, 1e-14));
    }

    /// Newton and the closed form must agree when ratios are only nearly equal.
    #[test]
    fn newton_matches_closed_form_limit() {
        let exact = CascadeSpec::binomial(0.7).unwrap();
        let perturbed = CascadeSpec::new(vec![0.7, 0.3], vec![0.5, 0.5 + 1e-9]).unwrap();
        for q in [-8.0, -2.0, 0.5, 4.0, 12.0] {
            let a = analytic_tau(&exact, q).unwrap();
            let b = analytic_tau(&perturbed, q).unwrap();
            assert!(close(a, b, 1e-6), "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn unequal_ratio_root_satisfies_equation() {
        let spec = CascadeSpec::new(vec![0.2, 0.8], vec![0.7, 0.3]).unwrap();
        for q in [-8.0, -3.5, 0.0, 1.0, 2.5, 12.0] {
            let t = analytic_tau(&spec, q).unwrap();
            let g: f64 = spec
                .weights
                .iter()
                .zip(&spec.ratios)
                .map(|(m, r)| m.powf(q) * r.powf(-t))
                .sum::<f64>()
                - 1.0;
            assert!(g.abs() <= 1e-12, "q={q}: residual {g}");
        }
        assert!(close(analytic_tau(&spec, 1.0).unwrap(), 0.0, 1e-12));
        assert!(close(analytic_theta(&spec, 1.0).unwrap(), 0.0, 1e-12));
    }

    #[test]
    fn spec_json_shape() {
        let spec: CascadeSpec =
            serde_json::from_str(r#"{"weights": [0.6, 0.4], "ratios": [0.5, 0.5]}"#).unwrap();
        assert_eq!(spec, CascadeSpec::binomial(0.6).unwrap());
    }
}
