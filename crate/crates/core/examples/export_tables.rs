// Rate tables, stationary masses and the kernel written to disk.

use dtn_core::export::{write_kernel, write_stationary, write_tables};
use dtn_core::stage::Resolution;
use dtn_core::{analyze, default_params, AnalysisOptions};

fn run_example() -> dtn_core::Result<()> {
    let dir = tempfile::tempdir()?;
    let opts = AnalysisOptions {
        resolution: Resolution::new(12, 11),
        keep_kernel: true,
        ..Default::default()
    };
    let a = analyze(&default_params(), &opts)?;
    write_tables(dir.path(), &a.stage, &a.rates, &a.transmission)?;
    write_stationary(&dir.path().join("stationary.csv"), &a)?;
    if let Some(k) = &a.kernel {
        write_kernel(k, std::fs::File::create(dir.path().join("kernel.txt"))?)?;
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for name in names {
        let len = std::fs::metadata(dir.path().join(&name))?.len();
        println!("{name:<18} {len:>9} bytes");
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
