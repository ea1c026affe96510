// A user-defined potential: validated first, then analysed.

use std::f64::consts::PI;

use dtn_core::model::{default_params, validate_rule, Potential, RoutingRule};
use dtn_core::stage::Resolution;
use dtn_core::{analyze, AnalysisOptions, StageModel};

fn run_example() -> dtn_core::Result<()> {
    let base = default_params();

    // prefers good directions, then nodes ahead and slightly to the left
    let good = Potential::custom("tilted_exp", false, |t, r| {
        (PI - t.abs()) * (0.5 * r[0] + 0.2 * r[1]).exp()
    });
    let params = base.clone().with_potential(good);
    let opts = AnalysisOptions {
        resolution: Resolution::new(16, 15),
        ..Default::default()
    };
    let a = analyze(&params, &opts)?;
    println!(
        "{}: V_p = {:.4}, C_p = {:?}",
        params.rule.potential.name(),
        a.metrics.v_p,
        a.metrics.c_p
    );

    // not monotone in |θ|: rejected before any table is built
    let bad = RoutingRule::new(
        base.rule.boundary.clone(),
        Potential::custom("cosine", true, |t, _| t.cos().powi(2)),
    );
    let stage = StageModel::new(base.with_potential(bad.potential.clone()), Resolution::new(12, 11))?;
    let report = validate_rule(&bad, &stage.grid);
    for c in report.failures() {
        println!("rejected: {} ({})", c.name, c.detail);
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
