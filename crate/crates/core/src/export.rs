//! CSV dumps of tables, stationary masses and the kernel.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::chain::{Analysis, KernelMatrix};
use crate::error::Result;
use crate::sim::TraceEvent;
use crate::stage::{RateTables, StageModel, TransmissionTables};

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Write `transmission.csv`, `rates_a.csv`, `rates_bcd.csv` and `aggregates.csv` into `dir`.
pub fn write_tables(dir: &Path, stage: &StageModel, rates: &RateTables, tx: &TransmissionTables) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let g = &stage.grid;
    let n = g.n;

    let mut w = create(&dir.join("transmission.csv"))?;
    w.write_record(["i", "k", "theta", "x", "y", "expected_better", "escape_probability"])?;
    for (k, p) in g.points.iter().enumerate() {
        for i in 0..n {
            w.serialize((i, k, g.theta[i], p[0], p[1], tx.en(i, k), tx.pe(i, k)))?;
        }
    }
    w.flush()?;

    let mut w = create(&dir.join("rates_a.csv"))?;
    w.write_record(["i", "j", "theta", "theta_prime", "r_a"])?;
    for i in 0..n {
        for j in 0..n {
            w.serialize((i, j, g.theta[i], g.theta[j], rates.ra[i * n + j]))?;
        }
    }
    w.flush()?;

    let mut w = create(&dir.join("rates_bcd.csv"))?;
    w.write_record(["i", "j", "l", "theta", "theta_prime", "x", "y", "r_b", "r_c", "r_d"])?;
    for i in 0..n {
        for j in 0..n {
            for (l, p) in g.points.iter().enumerate() {
                let x = rates.idx3(i, j, l);
                let (b, c, d) = (rates.rb[x], rates.rc[x], rates.rdhat[x]);
                if b != 0.0 || c != 0.0 || d != 0.0 {
                    w.serialize((i, j, l, g.theta[i], g.theta[j], p[0], p[1], b, c, d))?;
                }
            }
        }
    }
    w.flush()?;

    let mut w = create(&dir.join("aggregates.csv"))?;
    w.write_record(["i", "theta", "r_a", "r_b", "r_c", "r_d", "r_total", "r0_plus_c_plus_d"])?;
    for i in 0..n {
        w.serialize((
            i,
            g.theta[i],
            rates.agg_a[i],
            rates.agg_b[i],
            rates.agg_c[i],
            rates.agg_d[i],
            rates.total[i],
            rates.alt_total[i],
        ))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per state: kind, indices, coordinates and stationary mass.
pub fn write_stationary(path: &Path, a: &Analysis) -> Result<()> {
    let g = &a.stage.grid;
    let mut w = create(path)?;
    w.write_record(["state", "kind", "i", "k", "theta", "x", "y", "mass"])?;
    for i in 0..g.n {
        w.serialize((i, "buffering", i, "", g.theta[i], "", "", a.stationary.psi_b(i)))?;
    }
    for (k, p) in g.points.iter().enumerate() {
        for i in 0..g.n {
            let s = g.transmission_index(i, k);
            w.serialize((
                s,
                "transmission",
                i,
                k,
                g.theta[i],
                p[0],
                p[1],
                a.stationary.psi_w(i, k),
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Kernel in `row col value` coordinate text format.
pub fn write_kernel<W: Write>(k: &KernelMatrix, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{} {} {}", k.dimension(), k.dimension(), k.nnz())?;
    for (r, c, v) in k.entries() {
        writeln!(out, "{r} {c} {v:e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, events: &[TraceEvent]) -> Result<()> {
    let mut w = create(path)?;
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{analyze, AnalysisOptions};
    use crate::model::default_params;
    use crate::stage::Resolution;

    #[test]
    fn dumps_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let opts = AnalysisOptions {
            resolution: Resolution::new(8, 7),
            keep_kernel: true,
            ..Default::default()
        };
        let a = analyze(&default_params(), &opts).unwrap();
        write_tables(dir.path(), &a.stage, &a.rates, &a.transmission).unwrap();
        let agg = std::fs::read_to_string(dir.path().join("aggregates.csv")).unwrap();
        assert_eq!(agg.lines().count(), 9);

        let path = dir.path().join("psi.csv");
        write_stationary(&path, &a).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        let total: f64 = r.records().map(|x| x.unwrap()[7].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let k = a.kernel.as_ref().unwrap();
        let mut buf = Vec::new();
        write_kernel(k, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut sum0 = 0.0;
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(' ').collect();
            if f[0] == "0" {
                sum0 += f[2].parse::<f64>().unwrap();
            }
        }
        assert!((sum0 - 1.0).abs() < 1e-12);
        assert_eq!(text.lines().count(), k.nnz() + 1);
    }
}
