// Configuration from JSON, edited by key and turned into model parameters.

use dtn_core::stage::Resolution;
use dtn_core::{analyze, AnalysisOptions, ModelConfig};

fn run_example() -> dtn_core::Result<()> {
    let mut config = ModelConfig::from_json_str(
        r#"{
            "lambda": 2.0,
            "eccentricity": 0.6,
            "cost": {"power": {"exponent": 3}},
            "potential": "neg_abs_theta"
        }"#,
    )?;
    config.set("r0", 0.5)?;
    println!("{}", config.to_json());

    let params = config.to_params()?;
    let opts = AnalysisOptions {
        resolution: Resolution::new(24, 15),
        ..Default::default()
    };
    let m = analyze(&params, &opts)?.metrics;
    println!("V_p = {:.4}, C_p = {:?}", m.v_p, m.c_p);

    for bad in [r#"{"lambda": -1}"#, r#"{"speed": 2}"#] {
        let err = ModelConfig::from_json_str(bad).and_then(|c| c.to_params().map(|_| c));
        println!("{bad}: {}", err.unwrap_err());
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
