use mfinv_core::cascade::{analytic_tau, generate_cascade, CascadeSpec};
use mfinv_core::inversion::isotonic_increasing;
use mfinv_core::measure::{box_measure, invert_measure, ConservativeMeasure, MeasureOrigin, VolatilitySeries};
use mfinv_core::partition::{direct_partition, exit_times, log_moment_sum};
use mfinv_core::pdf::{estimate_pdf, Binning};
use mfinv_core::ExitTimeSequence;
use proptest::prelude::*;

fn series(min_len: usize, max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 1e-6f64..10.0], min_len..max_len)
        .prop_filter("needs mass", |v| v.iter().any(|x| *x > 0.0))
}

fn positive_series(min_len: usize, max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..10.0, min_len..max_len)
}

fn spec() -> impl Strategy<Value = CascadeSpec> {
    (2usize..5)
        .prop_flat_map(|n| (prop::collection::vec(0.05f64..1.0, n), prop::collection::vec(0.05f64..1.0, n)))
        .prop_map(|(w, r)| {
            let (sw, sr): (f64, f64) = (w.iter().sum(), r.iter().sum());
            let mut w: Vec<f64> = w.iter().map(|x| x / sw).collect();
            let r: Vec<f64> = r.iter().map(|x| x / sr).collect();
            let last = w.len() - 1;
            w[last] = 1.0 - w[..last].iter().sum::<f64>();
            CascadeSpec::new(w, r).unwrap()
        })
}

/// Exit times by bisection on the cumulative sum, independent of the
/// single-pass implementation.
fn exit_oracle(v: &[f64], dv: f64) -> Vec<f64> {
    let mut cum = vec![0.0];
    for x in v {
        cum.push(cum.last().unwrap() + x);
    }
    let total = *cum.last().unwrap();
    let j = (total / dv).floor() as usize;
    let crossing = |level: f64| {
        let k = cum.partition_point(|c| *c < level).clamp(1, v.len()) - 1;
        if v[k] == 0.0 {
            return (k + 1) as f64;
        }
        (k as f64 + (level - cum[k]) / v[k]).min(v.len() as f64)
    };
    let mut out = Vec::with_capacity(j);
    let mut prev = 0.0;
    for i in 1..=j {
        let t = crossing(i as f64 * dv);
        out.push(t - prev);
        prev = t;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exit_count_is_floor(v in series(1, 300), frac in 0.001f64..1.0) {
        let vol = VolatilitySeries::new(v).unwrap();
        let dv = frac * vol.total();
        let e = exit_times(&vol, dv).unwrap();
        prop_assert_eq!(e.count(), (vol.total() / dv).floor() as usize);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exit_times_match_bisection(v in series(2, 200), frac in 0.005f64..0.5) {
        let vol = VolatilitySeries::new(v.clone()).unwrap();
        let dv = frac * vol.total();
        let e = exit_times(&vol, dv).unwrap();
        let oracle = exit_oracle(&v, dv);
        prop_assert_eq!(e.times.len(), oracle.len());
        for (a, b) in e.times.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{} vs {}", a, b);
        }
        let sum: f64 = e.times.iter().sum();
        prop_assert!(sum <= v.len() as f64 + 1e-9);
    }

    #[test]
    fn box_measure_matches_prefix_sums(v in series(1, 300), s in 1usize..20) {
        prop_assume!(v.len() >= s);
        let vol = VolatilitySeries::new(v.clone()).unwrap();
        let n = v.len() / s;
        let covered: f64 = v[..n * s].iter().sum();
        prop_assume!(covered > 0.0);
        let m = box_measure(&vol, s).unwrap();
        let mut prefix = vec![0.0];
        for x in &v {
            prefix.push(prefix.last().unwrap() + x);
        }
        for (k, w) in m.weights().iter().enumerate() {
            let expect = (prefix[(k + 1) * s] - prefix[k * s]) / covered;
            prop_assert!((w - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn conservation_at_q0_and_q1(v in positive_series(64, 512)) {
        let vol = VolatilitySeries::new(v).unwrap();
        let c = direct_partition(&vol, &[1, 2, 4, 8], &[0.0, 1.0]).unwrap();
        for si in 0..c.scales.len() {
            let n = (vol.len() / c.scales[si] as usize) as f64;
            prop_assert!((c.log_values[0][si].unwrap() - n.ln()).abs() < 1e-9);
            prop_assert!(c.log_values[1][si].unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn shuffled_cascade_is_a_permutation(m in 0.05f64..0.95, depth in 1u32..10, seed in any::<u64>()) {
        let spec = CascadeSpec::binomial(m).unwrap();
        let mut a = generate_cascade(&spec, depth, None).unwrap().weights;
        let mut b = generate_cascade(&spec, depth, Some(seed)).unwrap().weights;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tau_is_increasing_and_concave(spec in spec()) {
        let qs: Vec<f64> = (0..=48).map(|i| -4.0 + 0.25 * i as f64).collect();
        let t: Vec<f64> = qs.iter().map(|q| analytic_tau(&spec, *q).unwrap()).collect();
        prop_assert!(t.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(t.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] <= 1e-9));
        prop_assert!(analytic_tau(&spec, 1.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn measure_and_exit_routes_agree(v in positive_series(8, 200), g in 4usize..64) {
        let vol = VolatilitySeries::new(v.clone()).unwrap();
        let total = vol.total();
        let mu = ConservativeMeasure::new(v.iter().map(|x| x / total).collect(), MeasureOrigin::Volatility).unwrap();
        let inv = invert_measure(&mu, g).unwrap();
        let e = exit_times(&vol, total / g as f64).unwrap();
        let t = v.len() as f64;
        // Rounding may lose the last exit.
        prop_assert!(e.count() + 1 >= g);
        for (a, s) in inv.weights().iter().zip(&e.times) {
            prop_assert!((a - s / t).abs() < 1e-9, "{} vs {}", a, s / t);
        }
    }

    #[test]
    fn log_moment_matches_naive(w in prop::collection::vec(1e-3f64..1.0, 1..200), q in -4.0f64..8.0) {
        let naive: f64 = w.iter().map(|x| x.powf(q)).sum::<f64>().ln();
        let got = log_moment_sum(&w, q).unwrap();
        prop_assert!((got - naive).abs() <= 1e-10 * naive.abs().max(1.0));
    }

    #[test]
    fn isotonic_is_monotone_and_mean_preserving(v in prop::collection::vec(-10.0f64..10.0, 1..60)) {
        let y = isotonic_increasing(&v);
        prop_assert!(y.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let (a, b): (f64, f64) = (v.iter().sum(), y.iter().sum());
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert_eq!(isotonic_increasing(&y).len(), y.len());
    }

    #[test]
    fn pdf_is_normalized_and_order_free(t in prop::collection::vec(0.01f64..100.0, 3..400), log in any::<bool>(), bins in 1usize..60) {
        let binning = if log { Binning::Log } else { Binning::Linear };
        let n = t.len();
        let a = ExitTimeSequence::from_samples(1.0, t.clone(), n).unwrap();
        let Ok(pa) = estimate_pdf(&a, binning, bins) else { return Ok(()) };
        prop_assert!((pa.integral() - 1.0).abs() <= 0.01);
        prop_assert!(pa.densities.iter().all(|d| *d >= 0.0));
        let mut r = t.clone();
        r.reverse();
        let pb = estimate_pdf(&ExitTimeSequence::from_samples(1.0, r, n).unwrap(), binning, bins).unwrap();
        prop_assert_eq!(&pa.counts, &pb.counts);
    }

    #[test]
    fn pdf_is_scale_equivariant(t in prop::collection::vec(0.01f64..100.0, 3..400), k in -20i32..20, bins in 1usize..60) {
        let c = 2f64.powi(k);
        let n = t.len();
        let a = ExitTimeSequence::from_samples(1.0, t.clone(), n).unwrap();
        let b = ExitTimeSequence::from_samples(c, t.iter().map(|s| s * c).collect(), n).unwrap();
        let (Ok(pa), Ok(pb)) = (estimate_pdf(&a, Binning::Log, bins), estimate_pdf(&b, Binning::Log, bins)) else {
            return Ok(());
        };
        prop_assert_eq!(pa.bin_centers, pb.bin_centers);
        prop_assert_eq!(pa.densities, pb.densities);
        prop_assert_eq!(pb.sigma, pa.sigma * c);
    }
}
