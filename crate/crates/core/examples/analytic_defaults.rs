// Packet speed and cost at the default parameters, with solver diagnostics.

use dtn_core::{analyze, default_params, AnalysisOptions};

fn run_example() -> dtn_core::Result<()> {
    let a = analyze(&default_params(), &AnalysisOptions::default())?;
    let m = &a.metrics;
    let d = &a.diagnostics;
    println!("V_p = {:.6}", m.v_p);
    match m.c_p {
        Some(c) => println!("C_p = {c:.6}"),
        None => println!("C_p undefined"),
    }
    println!("{:?}", m.components);
    println!(
        "states {} (M = {}), row defect {:.2e}, doeblin {:.4}, residual {:.1e}, direct gap {:?}",
        d.dimension, d.retained_points, d.max_row_defect, d.doeblin_mass, d.residual, d.direct_gap
    );
    println!("{}", d.validation.summary());
    Ok(())
}

fn main() {
    run_example().unwrap();
}
