//! Randomized invariants of the model primitives and the chain.

use std::f64::consts::{PI, TAU};

use dtn_core::chain::DirectCheck;
use dtn_core::model::{wrap_angle, Boundary, CostSpec, DirectionDensity, PotentialSpec};
use dtn_core::{analyze, AnalysisOptions, ModelConfig, Resolution};
use proptest::prelude::*;

proptest! {
    #[test]
    fn wrap_lands_in_range(x in -100.0f64..100.0) {
        let w = wrap_angle(x);
        prop_assert!((-PI..PI).contains(&w));
        let turns = (x - w) / TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn four_window_sampling_inverts_cdf(tw in 0.05f64..FRAC_PI_2_MAX, u in 0.0f64..1.0) {
        let d = DirectionDensity::four_window(tw).unwrap();
        prop_assert!((d.cdf(PI) - 1.0).abs() < 1e-12);
        let x = d.sample_from_uniform(u);
        prop_assert!((d.cdf(x) - u).abs() < 1e-9);
        prop_assert!(d.value(x) > 0.0 || u == 0.0);
    }

    #[test]
    fn ellipse_boundary_is_a_focal_ellipse(a in 0.2f64..5.0, e in 0.0f64..0.95, phi in -PI..PI) {
        let b = Boundary::ellipse(a, e).unwrap();
        let r = b.radius(phi);
        let (x, y) = (r * phi.cos() - a * e, r * phi.sin());
        let minor = a * (1.0 - e * e).sqrt();
        prop_assert!(((x / a).powi(2) + (y / minor).powi(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn config_json_round_trips(
        lambda in 0.01f64..10.0,
        tw in 0.1f64..1.5,
        kappa in 0.0f64..3.0,
        exponent in 1.0f64..4.0,
    ) {
        let cfg = ModelConfig {
            lambda,
            theta_w: tw,
            potential: PotentialSpec::ExpProgress { kappa },
            cost: CostSpec::Power { exponent },
            ..Default::default()
        };
        prop_assert_eq!(ModelConfig::from_json_str(&cfg.to_json()).unwrap(), cfg);
    }
}

const FRAC_PI_2_MAX: f64 = std::f64::consts::FRAC_PI_2;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chain_is_a_probability_model(
        lambda in 0.5f64..3.0,
        a in 0.7f64..1.5,
        e in 0.0f64..0.8,
        v0 in 0.5f64..2.0,
    ) {
        let cfg = ModelConfig { lambda, a, eccentricity: e, v0, ..Default::default() };
        let opts = AnalysisOptions {
            resolution: Resolution::new(12, 9),
            direct_check: DirectCheck::Always,
            keep_kernel: true,
        };
        let r = analyze(&cfg.to_params().unwrap(), &opts).unwrap();
        let k = r.kernel.as_ref().unwrap();
        for s in 0..k.dimension() {
            let (_, vals) = k.row(s);
            prop_assert!(vals.iter().all(|&v| v >= 0.0));
            prop_assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let st = &r.stationary;
        prop_assert!((st.buffering_mass() + st.transmission_mass() - 1.0).abs() < 1e-12);
        prop_assert!(st.direct_gap.unwrap() < 1e-10);
        prop_assert!(r.metrics.v_p.is_finite());
        prop_assert!(r.metrics.c_p.unwrap() > 0.0);
    }
}
