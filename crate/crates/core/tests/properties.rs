use proptest::collection::vec;
use proptest::prelude::*;

use spectral_relevance::eval::{auc_points, localization_values, AxisScaling, DomainSpec, Flipper};
use spectral_relevance::inspection::{dft_lrp, fold_symmetric, stdft_lrp, InspectionOptions};
use spectral_relevance::net::Network;
use spectral_relevance::spectral::{dft, idft, istdft_wola, stdft, Signal, WindowShape, WindowSpec};
use spectral_relevance::synth::{decode_label, encode_subset};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Signals bounded away from zero so that `R_n / x_n` never hits the floor.
fn nonzero_signal(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    vec((0.05f64..5.0, any::<bool>()), len).prop_map(|v| v.into_iter().map(|(m, s)| if s { m } else { -m }).collect())
}

fn window() -> impl Strategy<Value = WindowSpec> {
    (0usize..3, prop::sample::select(vec![4usize, 8, 16]), 0u32..3).prop_map(|(s, h, o)| {
        let shape = [WindowShape::Rectangular, WindowShape::HalfSine, WindowShape::Hann][s];
        WindowSpec::new(shape, h, h >> o).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_is_unitary_and_invertible(x in vec(-10.0f64..10.0, 2..80)) {
        let s = Signal::new(x.clone()).unwrap();
        let y = dft(&s);
        prop_assert!(close(y.energy(), s.energy(), 1e-10));
        let back = idft(&y).unwrap();
        for (a, b) in back.samples().iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn wola_inverts_stdft(x in vec(-10.0f64..10.0, 16..120), w in window()) {
        let spec = stdft(&Signal::new(x.clone()).unwrap(), &w).unwrap();
        let back = istdft_wola(&spec).unwrap();
        for (a, b) in back.samples().iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dft_lrp_conserves_and_is_symmetric((x, r) in (4usize..64).prop_flat_map(|n| (nonzero_signal(n..n + 1), vec(-3.0f64..3.0, n)))) {
        let s = Signal::new(x.clone()).unwrap();
        let map = dft_lrp(&r, &x, &dft(&s), &InspectionOptions::default()).unwrap();
        let want: f64 = r.iter().sum();
        prop_assert!((map.total() - want).abs() <= 1e-8 * r.iter().map(|v| v.abs()).sum::<f64>().max(1e-12));
        let n = x.len();
        for k in 1..n {
            prop_assert!((map.values[k] - map.values[n - k]).abs() < 1e-9);
        }
        prop_assert!(fold_symmetric(&map).is_ok());
    }

    #[test]
    fn stdft_lrp_conserves((x, r) in (16usize..96).prop_flat_map(|n| (nonzero_signal(n..n + 1), vec(-3.0f64..3.0, n))), w in window()) {
        let s = Signal::new(x.clone()).unwrap();
        let map = stdft_lrp(&r, &x, &stdft(&s, &w).unwrap(), &InspectionOptions::default()).unwrap();
        let want: f64 = r.iter().sum();
        prop_assert!((map.total() - want).abs() <= 1e-8 * r.iter().map(|v| v.abs()).sum::<f64>().max(1e-12));
    }

    #[test]
    fn localization_is_a_fraction_and_scale_invariant(
        values in vec(-5.0f64..5.0, 1..50),
        picks in vec(any::<prop::sample::Index>(), 0..8),
        c in 0.01f64..100.0,
    ) {
        let truth: Vec<usize> = picks.iter().map(|i| i.index(values.len())).collect();
        let l = localization_values(&values, &truth).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&l));
        let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
        prop_assert!((localization_values(&scaled, &truth).unwrap() - l).abs() < 1e-12);
    }

    #[test]
    fn auc_is_monotone_in_the_curve(
        p in vec(0.0f64..1.0, 2..30),
        lift in vec(0.0f64..1.0, 30),
        sqrt in any::<bool>(),
    ) {
        let scaling = if sqrt { AxisScaling::Sqrt } else { AxisScaling::Linear };
        let n = p.len();
        let lo: Vec<(f64, f64)> = p.iter().enumerate().map(|(i, &v)| (i as f64 / (n - 1) as f64, v)).collect();
        let hi: Vec<(f64, f64)> = lo.iter().zip(&lift).map(|(&(f, v), d)| (f, (v + d).min(1.0))).collect();
        let (a, b) = (auc_points(&lo, scaling), auc_points(&hi, scaling));
        prop_assert!(a <= b + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn flipping_nothing_or_everything_hits_the_endpoints(
        x in vec(-2.0f64..2.0, 40),
        domain in prop::sample::select(vec![
            DomainSpec::Time,
            DomainSpec::Frequency,
            DomainSpec::TimeFrequency { window: WindowSpec::rectangular(8).unwrap() },
            DomainSpec::TimeFrequency { window: WindowSpec::rectangular(10).unwrap() },
        ]),
    ) {
        let net = Network::mlp(40, &[4], 2, 0).unwrap();
        let flipper = Flipper::new(&net, &x, domain).unwrap();
        let f = flipper.features();
        let full = flipper.reconstruct(&vec![true; f]);
        for (a, b) in full.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!(flipper.reconstruct(&vec![false; f]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn label_codec_round_trips(k_star in prop::sample::subsequence(vec![1usize, 3, 5, 8, 13, 21], 1..6), seed in any::<usize>()) {
        let label = seed % (1 << k_star.len());
        let subset = decode_label(label, &k_star).unwrap();
        prop_assert_eq!(subset.len(), label.count_ones() as usize);
        prop_assert_eq!(encode_subset(&subset, &k_star).unwrap(), label);
    }
}
