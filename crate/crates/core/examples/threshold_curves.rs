// Threshold curves of a location-dependent potential and their crossing flux.

use std::f64::consts::PI;

use dtn_core::model::{default_params, Potential};
use dtn_core::stage::Resolution;
use dtn_core::StageModel;

fn run_example() -> dtn_core::Result<()> {
    let params = default_params().with_potential(Potential::ExpProgress { kappa: 1.0 });
    let stage = StageModel::new(params, Resolution::default())?;
    for (theta, theta_p) in [(0.3, 0.0), (PI / 2.0, PI / 4.0), (2.5, -1.0), (0.0, 0.3)] {
        let curve = stage.threshold_curve(theta, theta_p)?;
        if curve.is_empty() {
            println!("θ = {theta:.3}, θ' = {theta_p:.3}: empty");
            continue;
        }
        let w = [theta.cos() - theta_p.cos(), theta.sin() - theta_p.sin()];
        let flux: f64 = curve.interval_flux(w).iter().sum();
        let p = curve.point(0.5)?;
        println!(
            "θ = {theta:.3}, θ' = {theta_p:.3}: {:?}, length {:.4}, loops {}, b(½) = ({:.3}, {:.3}), flux {flux:.4}",
            curve.kind, curve.total_length, curve.loops, p[0], p[1]
        );
        let mass: f64 = stage.relocate_rate_d(theta, theta_p, &curve).iter().sum::<f64>() * stage.grid.delta_a;
        println!("    relocated r_D mass {mass:.5}");
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
