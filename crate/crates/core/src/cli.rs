//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::Parser;

use crate::error::{DtnError, Result};
use crate::export;
use crate::model::ModelConfig;
use crate::stage::Resolution;
use crate::sweep::{run_point, run_sweep, write_records, write_records_to_path, Mode, RunOptions, SweepSpec};

/// Packet speed and cost of potential-based routing in a mobile network.
#[derive(Debug, Clone, Parser)]
#[command(name = "dtn", version)]
pub struct Args {
    /// JSON model configuration; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    pub mode: Mode,
    /// Preset name (fig4, fig5, fig6) or path of a JSON sweep file.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::quadrature::DEFAULT_N)]
    pub grid_n: usize,
    #[arg(long, default_value_t = crate::quadrature::DEFAULT_L)]
    pub grid_l: usize,
    #[arg(long, default_value_t = 8)]
    pub replicas: usize,
    /// Simulated time in units of 1/r0.
    #[arg(long, default_value_t = 1e4)]
    pub horizon: f64,
    /// Write rate tables, stationary masses and the kernel next to the output.
    #[arg(long)]
    pub dump_tables: bool,
    /// Write the event trace of the first replica next to the output.
    #[arg(long)]
    pub trace: bool,
}

/// Cap the worker pool at `DTN_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DTN_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| DtnError::Config(format!("DTN_THREADS = `{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(DtnError::Config("DTN_THREADS must be at least 1".into()));
        }
        // a pool set up earlier in the process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn sibling(out: Option<&Path>, suffix: &str) -> PathBuf {
    match out {
        Some(p) => {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            p.with_file_name(format!("{stem}_{suffix}"))
        }
        None => PathBuf::from(format!("dtn_{suffix}")),
    }
}

pub fn run(args: &Args) -> Result<()> {
    let opts = RunOptions {
        resolution: Resolution::new(args.grid_n, args.grid_l),
        seed: args.seed,
        replicas: args.replicas,
        horizon_turns: args.horizon,
        trace: args.trace,
        keep_kernel: args.dump_tables,
        ..Default::default()
    };
    let base = match &args.config {
        Some(p) => ModelConfig::from_path(p)?,
        None => ModelConfig::default(),
    };

    if let Some(name) = &args.sweep {
        let mut spec = SweepSpec::load(name)?;
        if args.config.is_some() {
            spec.base = base;
        }
        if args.mode != Mode::Analytic {
            spec.mode = args.mode;
        }
        let records = run_sweep(&spec, &opts)?;
        let out = args.out.clone().or(spec.output.as_ref().map(PathBuf::from));
        return match out {
            Some(p) => write_records_to_path(&records, p),
            None => write_records(&records, std::io::stdout().lock()),
        };
    }

    let result = run_point(&base, args.mode, &opts)?;
    match &args.out {
        Some(p) => write_records_to_path(std::slice::from_ref(&result.record), p)?,
        None => write_records(std::slice::from_ref(&result.record), std::io::stdout().lock())?,
    }
    let out = args.out.as_deref();
    if args.dump_tables {
        if let Some(a) = &result.analysis {
            let dir = sibling(out, "tables");
            export::write_tables(&dir, &a.stage, &a.rates, &a.transmission)?;
            export::write_stationary(&dir.join("stationary.csv"), a)?;
            if let Some(k) = &a.kernel {
                export::write_kernel(k, std::fs::File::create(dir.join("kernel.txt"))?)?;
            }
        }
    }
    if args.trace {
        if let Some(s) = &result.simulation {
            export::write_trace(&sibling(out, "trace.csv"), &s.replicas[0].trace)?;
        }
    }
    Ok(())
}
