//! Kernel assembly, stationary distribution and long-run metrics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{DtnError, Result};
use crate::model::{validate_rule, ModelParams, ValidationReport};
use crate::stage::{RateTables, Resolution, StageModel, TransmissionTables};

/// Largest tolerated pre-normalization row defect.
pub const ROW_DEFECT_LIMIT: f64 = 0.05;
/// Largest dimension for which the direct solve cross-check runs by default.
pub const DIRECT_SOLVE_MAX_DIM: usize = 4000;
const MAX_ITERATIONS: usize = 100_000;
const STEP_TOLERANCE: f64 = 1e-14;

/// Row-stochastic transition matrix over buffering and transmission states.
///
/// Rows keep only their nonzero entries.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    m: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// `|Σ_t K[s, t] - 1|` before renormalization.
    pub row_defects: Vec<f64>,
}

impl KernelMatrix {
    pub fn dimension(&self) -> usize {
        self.n * (self.m + 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, s: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[s]..self.row_ptr[s + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        let (c, v) = self.row(s);
        match c.binary_search(&(t as u32)) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    /// Largest pre-normalization defect and the row where it occurs.
    pub fn max_defect(&self) -> (f64, usize) {
        self.row_defects
            .iter()
            .enumerate()
            .fold((0.0, 0), |acc, (s, &d)| if d > acc.0 { (d, s) } else { acc })
    }

    /// Human-readable name of state `s`.
    pub fn state_label(&self, s: usize) -> String {
        if s < self.n {
            format!("B(i={s})")
        } else {
            let t = s - self.n;
            format!("W(i={}, k={})", t % self.n, t / self.n)
        }
    }

    /// `out = ψ K`.
    pub fn left_multiply(&self, psi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, &p) in psi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (c, v) = self.row(s);
            for (&t, &k) in c.iter().zip(v) {
                out[t as usize] += p * k;
            }
        }
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dimension();
        let mut a = DMatrix::zeros(d, d);
        for s in 0..d {
            let (c, v) = self.row(s);
            for (&t, &k) in c.iter().zip(v) {
                a[(s, t as usize)] = k;
            }
        }
        a
    }

    /// All `(row, col, value)` entries in row order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dimension()).flat_map(move |s| {
            let (c, v) = self.row(s);
            c.iter().zip(v).map(move |(&t, &k)| (s, t as usize, k))
        })
    }

    fn check_gate(&self, limit: f64) -> Result<()> {
        let (defect, s) = self.max_defect();
        if defect > limit {
            return Err(DtnError::GridTooCoarse {
                what: "kernel row",
                defect,
                limit,
                location: self.state_label(s),
            });
        }
        Ok(())
    }
}

struct RowBuf {
    cols: Vec<u32>,
    vals: Vec<f64>,
    defect: f64,
}

fn finish_row(mut cols: Vec<u32>, mut vals: Vec<f64>) -> RowBuf {
    let mut order: Vec<usize> = (0..cols.len()).collect();
    order.sort_by_key(|&k| cols[k]);
    cols = order.iter().map(|&k| cols[k]).collect();
    vals = order.iter().map(|&k| vals[k]).collect();
    let sum: f64 = vals.iter().sum();
    vals.iter_mut().for_each(|v| *v /= sum);
    RowBuf {
        cols,
        vals,
        defect: (sum - 1.0).abs(),
    }
}

/// Assemble the kernel without applying the row-defect gate.
pub fn assemble_kernel_unchecked(
    stage: &StageModel,
    rates: &RateTables,
    tx: &TransmissionTables,
) -> Result<KernelMatrix> {
    let n = stage.grid.n;
    let m = stage.grid.m();
    let da = stage.grid.delta_a;
    let mut rows: Vec<RowBuf> = Vec::with_capacity(n * (m + 1));

    for i in 0..n {
        let r = rates.total[i];
        if !(r > 0.0 && r.is_finite()) {
            return Err(DtnError::NonFinite(format!("aggregate rate r(θ_{i}) = {r}")));
        }
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for j in 0..n {
            let v = rates.ra[i * n + j] / r;
            if v > 0.0 {
                cols.push(j as u32);
                vals.push(v);
            }
        }
        for j in 0..n {
            for l in 0..m {
                let x = rates.idx3(i, j, l);
                let v = (rates.rb[x] + rates.rc[x] + rates.rdhat[x]) * da / r;
                if v > 0.0 {
                    cols.push(stage.grid.transmission_index(j, l) as u32);
                    vals.push(v);
                }
            }
        }
        rows.push(finish_row(cols, vals));
    }

    let blocks: Vec<Vec<RowBuf>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let f = stage.forward_factors(k);
            let mut out = vec![0.0; n * m];
            (0..n)
                .map(|i| {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    stage.forward_row(i, &f, &mut out);
                    let mut cols = vec![i as u32];
                    let mut vals = vec![tx.pe(i, k)];
                    for (x, &v) in out.iter().enumerate() {
                        if v > 0.0 {
                            cols.push((n + x) as u32);
                            vals.push(v);
                        }
                    }
                    finish_row(cols, vals)
                })
                .collect()
        })
        .collect();
    rows.extend(blocks.into_iter().flatten());

    let mut kernel = KernelMatrix {
        n,
        m,
        row_ptr: Vec::with_capacity(rows.len() + 1),
        cols: Vec::new(),
        vals: Vec::new(),
        row_defects: Vec::with_capacity(rows.len()),
    };
    kernel.row_ptr.push(0);
    for row in rows {
        if row.vals.iter().any(|v| !v.is_finite()) {
            return Err(DtnError::NonFinite(format!("kernel row {}", kernel.row_defects.len())));
        }
        kernel.cols.extend(row.cols);
        kernel.vals.extend(row.vals);
        kernel.row_ptr.push(kernel.cols.len());
        kernel.row_defects.push(row.defect);
    }
    Ok(kernel)
}

/// Assemble the kernel; a row defect above 5% is an error.
pub fn assemble_kernel(stage: &StageModel, rates: &RateTables, tx: &TransmissionTables) -> Result<KernelMatrix> {
    let k = assemble_kernel_unchecked(stage, rates, tx)?;
    k.check_gate(ROW_DEFECT_LIMIT)?;
    Ok(k)
}

/// Stationary masses in the layout of the kernel's states.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    n: usize,
    pub psi: Vec<f64>,
    /// `‖ψ - ψK‖∞`.
    pub residual: f64,
    pub iterations: usize,
    /// `‖ψ_power - ψ_direct‖∞` when the direct solve ran.
    pub direct_gap: Option<f64>,
}

impl StationaryDistribution {
    pub fn psi_b(&self, i: usize) -> f64 {
        self.psi[i]
    }

    pub fn psi_w(&self, i: usize, k: usize) -> f64 {
        self.psi[self.n + k * self.n + i]
    }

    pub fn buffering_mass(&self) -> f64 {
        self.psi[..self.n].iter().sum()
    }

    pub fn transmission_mass(&self) -> f64 {
        self.psi[self.n..].iter().sum()
    }
}

fn residual(k: &KernelMatrix, psi: &[f64]) -> f64 {
    let mut out = vec![0.0; psi.len()];
    k.left_multiply(psi, &mut out);
    psi.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Left fixed point by power iteration.
pub fn power_iteration(k: &KernelMatrix) -> Result<(Vec<f64>, usize)> {
    let d = k.dimension();
    let mut psi = vec![1.0 / d as f64; d];
    let mut next = vec![0.0; d];
    let mut diff = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        k.left_multiply(&psi, &mut next);
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= sum);
        diff = psi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut psi, &mut next);
        if diff <= STEP_TOLERANCE {
            return Ok((psi, it));
        }
    }
    Err(DtnError::NonConvergence {
        iterations: MAX_ITERATIONS,
        residual: diff,
    })
}

/// Solve `ψ(K - I) = 0`, `Σψ = 1` by LU factorization.
pub fn direct_solve(k: &KernelMatrix) -> Result<Vec<f64>> {
    let d = k.dimension();
    let mut a = k.to_dense().transpose();
    for s in 0..d {
        a[(s, s)] -= 1.0;
    }
    for t in 0..d {
        a[(d - 1, t)] = 1.0;
    }
    let mut b = DVector::zeros(d);
    b[d - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| DtnError::NonFinite("singular balance system".into()))?;
    Ok(x.iter().copied().collect())
}

/// Stationary distribution by power iteration, cross-checked by a direct solve
/// when `direct` is set.
pub fn stationary_distribution_with(k: &KernelMatrix, direct: bool) -> Result<StationaryDistribution> {
    let (mut psi, iterations) = power_iteration(k)?;
    psi.iter_mut().for_each(|v| *v = v.max(0.0));
    let sum: f64 = psi.iter().sum();
    psi.iter_mut().for_each(|v| *v /= sum);
    let direct_gap = if direct {
        let x = direct_solve(k)?;
        Some(psi.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(StationaryDistribution {
        n: k.n,
        residual: residual(k, &psi),
        psi,
        iterations,
        direct_gap,
    })
}

/// Stationary distribution; the direct cross-check runs up to `DIRECT_SOLVE_MAX_DIM` states.
pub fn stationary_distribution(k: &KernelMatrix) -> Result<StationaryDistribution> {
    stationary_distribution_with(k, k.dimension() <= DIRECT_SOLVE_MAX_DIM)
}

/// `min_s Σ_{t buffering} (K²)[s, t]`.
pub fn doeblin_mass(k: &KernelMatrix) -> f64 {
    let n = k.n;
    let d = k.dimension();
    let back: Vec<f64> = (0..d)
        .map(|t| {
            let (c, v) = k.row(t);
            c.iter()
                .zip(v)
                .filter(|(&c, _)| (c as usize) < n)
                .map(|(_, &v)| v)
                .sum()
        })
        .collect();
    (0..d)
        .map(|s| {
            let (c, v) = k.row(s);
            c.iter().zip(v).map(|(&t, &x)| x * back[t as usize]).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Stationary expectations per stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub e_xw: f64,
    pub e_cost: f64,
    pub e_delta: f64,
    pub e_xb: f64,
}

pub fn expectations(
    psi: &StationaryDistribution,
    params: &ModelParams,
    rates: &RateTables,
    stage: &StageModel,
) -> Components {
    let n = stage.grid.n;
    let mut c = Components {
        e_xw: 0.0,
        e_cost: 0.0,
        e_delta: 0.0,
        e_xb: 0.0,
    };
    for i in 0..n {
        let w = psi.psi_b(i) / rates.total[i];
        c.e_delta += w;
        c.e_xb += w * params.v0 * stage.grid.theta[i].cos();
    }
    for (k, &p) in stage.grid.points.iter().enumerate() {
        let cost = params.cost.eval(p);
        for i in 0..n {
            let w = psi.psi_w(i, k);
            c.e_xw += w * p[0];
            c.e_cost += w * cost;
        }
    }
    c
}

/// Packet speed and normalized cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub v_p: f64,
    /// `None` when the mean progress per stage vanishes.
    pub c_p: Option<f64>,
    pub components: Components,
}

/// Progress below which the cost per unit progress is reported as undefined.
pub const PROGRESS_FLOOR: f64 = 1e-9;

pub fn performance_metrics(c: Components) -> Metrics {
    let progress = c.e_xw + c.e_xb;
    Metrics {
        v_p: progress / c.e_delta,
        c_p: (progress.abs() >= PROGRESS_FLOOR).then(|| c.e_cost / progress),
        components: c,
    }
}

/// When to run the dense direct-solve cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectCheck {
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub resolution: Resolution,
    pub direct_check: DirectCheck,
    /// Keep the assembled kernel in the result.
    pub keep_kernel: bool,
}

/// Numerical health of one analytic run.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub dimension: usize,
    pub retained_points: usize,
    pub max_row_defect: f64,
    pub doeblin_mass: f64,
    pub max_identity_defect: f64,
    pub max_total_defect: f64,
    pub bound_checks: usize,
    pub bound_violations: Vec<String>,
    pub residual: f64,
    pub iterations: usize,
    pub direct_gap: Option<f64>,
    pub validation: ValidationReport,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub stage: StageModel,
    pub rates: RateTables,
    pub transmission: TransmissionTables,
    pub kernel: Option<KernelMatrix>,
    pub stationary: StationaryDistribution,
    pub metrics: Metrics,
    pub diagnostics: Diagnostics,
}

/// Validate, discretize, assemble, solve and reduce to metrics.
pub fn analyze(params: &ModelParams, opts: &AnalysisOptions) -> Result<Analysis> {
    let stage = StageModel::new(params.clone(), opts.resolution)?;
    let validation = validate_rule(&params.rule, &stage.grid);
    if !validation.all_passed() {
        return Err(DtnError::Validation(
            validation
                .failures()
                .iter()
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let rates = stage.rate_tables()?;
    let transmission = stage.transmission_tables();
    let kernel = assemble_kernel(&stage, &rates, &transmission)?;
    let direct = match opts.direct_check {
        DirectCheck::Auto => kernel.dimension() <= DIRECT_SOLVE_MAX_DIM,
        DirectCheck::Always => true,
        DirectCheck::Never => false,
    };
    let stationary = stationary_distribution_with(&kernel, direct)?;
    let metrics = performance_metrics(expectations(&stationary, params, &rates, &stage));
    let bounds = stage.check_bounds(&rates);
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let diagnostics = Diagnostics {
        dimension: kernel.dimension(),
        retained_points: stage.grid.m(),
        max_row_defect: kernel.max_defect().0,
        doeblin_mass: doeblin_mass(&kernel),
        max_identity_defect: max(rates.identity_defects(params.r0)),
        max_total_defect: max(rates.total_defects()),
        bound_checks: bounds.checked,
        bound_violations: bounds.violations,
        residual: stationary.residual,
        iterations: stationary.iterations,
        direct_gap: stationary.direct_gap,
        validation,
    };
    Ok(Analysis {
        stage,
        rates,
        transmission,
        kernel: opts.keep_kernel.then_some(kernel),
        stationary,
        metrics,
        diagnostics,
    })
}
