// Monte Carlo estimate of packet speed and cost on a short horizon.

use dtn_core::sim::{ks_critical_5pct, ks_distance};
use dtn_core::{default_params, estimate, SimConfig};

fn run_example() -> dtn_core::Result<()> {
    let cfg = SimConfig::new(default_params())
        .with_replicas(4)
        .with_horizon(300.0)
        .with_seed(42);
    let e = estimate(&cfg)?;
    println!("V_p = {:.4} ± {:.4}", e.v_p, e.v_p_half_width);
    if let Some(c) = e.c_p {
        println!("C_p = {c:.4} ± {:.4}", e.c_p_half_width);
    }
    println!("{} stages, {} transmissions", e.stages, e.transmissions);
    for r in &e.replicas {
        println!(
            "  seed {:>20}  nodes {:>5}  speed {:.4}  cost/progress {:?}",
            r.seed,
            r.node_count,
            r.speed(),
            r.normalized_cost()
        );
    }
    let dirs: Vec<f64> = e
        .replicas
        .iter()
        .flat_map(|r| r.final_directions.iter().copied())
        .collect();
    println!(
        "direction KS distance {:.4} (5% critical {:.4})",
        ks_distance(&dirs, &cfg.params),
        ks_critical_5pct(dirs.len())
    );
    Ok(())
}

fn main() {
    run_example().unwrap();
}
