// Analytic metrics next to a simulation of the same network.

use dtn_core::sweep::{run_point, Mode, RunOptions};
use dtn_core::ModelConfig;

fn run_example() -> dtn_core::Result<()> {
    let config = ModelConfig {
        lambda: 2.0,
        ..Default::default()
    };
    let opts = RunOptions {
        replicas: 4,
        horizon_turns: 300.0,
        ..Default::default()
    };
    let r = run_point(&config, Mode::Both, &opts)?.record;
    println!("analytic  V_p {:.4}  C_p {:?}", r.v_p.unwrap(), r.c_p);
    println!(
        "simulated V_p {:.4} ± {:.4}  C_p {:?}",
        r.v_p_sim.unwrap(),
        r.v_p_sim_hw.unwrap(),
        r.c_p_sim
    );
    println!("relative gaps: V_p {:.3}  C_p {:?}", r.v_p_gap.unwrap(), r.c_p_gap);
    Ok(())
}

fn main() {
    run_example().unwrap();
}
