// A density sweep on a coarse grid, written as CSV to standard output.

use dtn_core::stage::Resolution;
use dtn_core::sweep::{run_sweep, write_records, Axis, Mode, RunOptions, SweepSpec};

fn run_example() -> dtn_core::Result<()> {
    let spec = SweepSpec::new(
        Axis {
            name: "lambda".into(),
            values: vec![0.5, 1.0, 2.0],
        },
        Some(Axis {
            name: "a".into(),
            values: vec![0.5, 1.0],
        }),
        Mode::Analytic,
    )?;
    let opts = RunOptions {
        resolution: Resolution::new(16, 13),
        ..Default::default()
    };
    let rows = run_sweep(&spec, &opts)?;
    write_records(&rows, std::io::stdout().lock())?;

    // the built-in presets
    for name in dtn_core::sweep::PRESETS {
        println!("{name}: {} points", SweepSpec::preset(name)?.points()?.len());
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
