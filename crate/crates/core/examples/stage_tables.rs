// Better-node counts, escape probabilities and the four event families.

use std::f64::consts::PI;

use dtn_core::StageModel;

fn run_example() -> dtn_core::Result<()> {
    let stage = StageModel::defaults()?;
    let p = &stage.params;
    println!(
        "grid: N = {}, M = {}, δA = {:.5}",
        stage.grid.n,
        stage.grid.m(),
        stage.grid.delta_a
    );

    for (theta, r) in [(PI - 0.01, [1.0, 0.0]), (1.0, [0.5, 0.2]), (0.2, [1.5, 0.0])] {
        println!(
            "θ = {theta:.2}, r = {r:?}: E(N) = {:.4}, P_E = {:.4}",
            stage.expected_better_count(theta, r)?,
            stage.escape_probability(theta, r)?
        );
    }
    println!("r_A(π/4, 3π/4) = {:.5}", stage.rate_a(PI / 4.0, 3.0 * PI / 4.0));
    println!(
        "r_B(π/2, 3π/4, (0.5, 0)) = {:.5}",
        stage.rate_b(PI / 2.0, 3.0 * PI / 4.0, [0.5, 0.0])?
    );
    println!(
        "r_C(π/2, 0, (0.3, 0.1)) = {:.5}",
        stage.rate_c(PI / 2.0, 0.0, [0.3, 0.1])?
    );

    let rates = stage.rate_tables()?;
    println!(" i      θ_i     r_A     r_B     r_C     r_D    r(θ)   mean sojourn");
    for i in (0..stage.grid.n).step_by(6) {
        let (_, sojourn) = rates.conditional_event_probabilities(i)?;
        println!(
            "{i:>2} {:>8.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>8.4}",
            stage.grid.theta[i],
            rates.agg_a[i],
            rates.agg_b[i],
            rates.agg_c[i],
            rates.agg_d[i],
            rates.total[i],
            sojourn
        );
    }
    let worst = rates.identity_defects(p.r0).into_iter().fold(0.0, f64::max);
    println!("max |r_A + r_B - r0|/r0 = {worst:.2e}");
    let bounds = stage.check_bounds(&rates);
    println!(
        "{} bound checks, {} violations",
        bounds.checked,
        bounds.violations.len()
    );
    Ok(())
}

fn main() {
    run_example().unwrap();
}
