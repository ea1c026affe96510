//! Full analytic pipeline: frozen values and exact scaling.

use dtn_core::model::PotentialSpec;
use dtn_core::{analyze, Analysis, AnalysisOptions, ModelConfig, Resolution};

fn run(cfg: &ModelConfig, res: Resolution) -> Analysis {
    let opts = AnalysisOptions {
        resolution: res,
        ..Default::default()
    };
    analyze(&cfg.to_params().unwrap(), &opts).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn defaults_are_frozen() {
    let a = run(&ModelConfig::default(), Resolution::default());
    assert_eq!(a.diagnostics.dimension, 3132);
    assert_eq!(a.diagnostics.retained_points, 86);
    assert!(close(a.metrics.v_p, 1.609341586, 1e-8), "{}", a.metrics.v_p);
    assert!(close(a.metrics.c_p.unwrap(), 0.708247640, 1e-8), "{:?}", a.metrics.c_p);
    let c = &a.metrics.components;
    assert!(close(a.metrics.v_p, (c.e_xw + c.e_xb) / c.e_delta, 1e-12));
}

#[test]
fn location_dependent_potential_is_frozen() {
    let cfg = ModelConfig {
        potential: PotentialSpec::ExpProgress { kappa: 1.0 },
        ..Default::default()
    };
    let a = run(&cfg, Resolution::new(24, 15));
    assert_eq!(a.diagnostics.dimension, 1152);
    assert_eq!(a.diagnostics.retained_points, 47);
    assert!(close(a.metrics.v_p, 6.174055433, 1e-8), "{}", a.metrics.v_p);
    assert!(close(a.metrics.c_p.unwrap(), 1.279359107, 1e-8), "{:?}", a.metrics.c_p);
}

#[test]
fn speed_scales_with_time_units() {
    let res = Resolution::new(16, 11);
    let base = ModelConfig::default();
    let fast = ModelConfig {
        v0: 2.0,
        r0: 2.0,
        ..base.clone()
    };
    let (a, b) = (run(&base, res), run(&fast, res));
    assert!(close(b.metrics.v_p, 2.0 * a.metrics.v_p, 1e-9));
    assert!(close(b.metrics.c_p.unwrap(), a.metrics.c_p.unwrap(), 1e-9));
}

#[test]
fn speed_and_cost_scale_with_length_units() {
    // lengths ×2 with fixed nodes per region: speed ×2, quadratic cost per unit progress ×2
    let res = Resolution::new(16, 11);
    let base = ModelConfig::default();
    let big = ModelConfig {
        lambda: base.lambda / 4.0,
        a: 2.0 * base.a,
        v0: 2.0 * base.v0,
        ..base.clone()
    };
    let (a, b) = (run(&base, res), run(&big, res));
    assert!(
        close(b.metrics.v_p, 2.0 * a.metrics.v_p, 1e-9),
        "{} {}",
        a.metrics.v_p,
        b.metrics.v_p
    );
    assert!(close(b.metrics.c_p.unwrap(), 2.0 * a.metrics.c_p.unwrap(), 1e-9));
}

#[test]
fn refinement_converges() {
    let cfg = ModelConfig::default();
    let v: Vec<f64> = [(16, 11), (24, 15), (36, 21)]
        .iter()
        .map(|&(n, l)| run(&cfg, Resolution::new(n, l)).metrics.v_p)
        .collect();
    assert!((v[2] - v[1]).abs() < (v[1] - v[0]).abs(), "{v:?}");
}
