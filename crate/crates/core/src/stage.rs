//! Stage analysis: better-node counts, escape probabilities, forward densities,
//! the four buffering-termination rate families and their aggregates.

use rayon::prelude::*;

use crate::error::{DtnError, Result};
use crate::geometry::{
    boundary_curve, dot, threshold_curve, ContourLattice, ForwardingRegion, ThresholdCurve, DEFAULT_CURVE_RESOLUTION,
};
use crate::model::ModelParams;
use crate::quadrature::{
    g_members, step, DirectionQuadrature, Grid, SpeedupTables, DEFAULT_L, DEFAULT_N, DEFAULT_SUBDIVISIONS,
};

/// Discretization settings for the analytic pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub n: usize,
    pub l: usize,
    pub subdivisions: usize,
    pub curve_resolution: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            n: DEFAULT_N,
            l: DEFAULT_L,
            subdivisions: DEFAULT_SUBDIVISIONS,
            curve_resolution: DEFAULT_CURVE_RESOLUTION,
        }
    }
}

impl Resolution {
    pub fn new(n: usize, l: usize) -> Self {
        Resolution {
            n,
            l,
            ..Default::default()
        }
    }
}

/// Values with weights, sorted for tie-split threshold sums.
#[derive(Debug, Clone)]
struct SortedWeights {
    vals: Vec<f64>,
    prefix: Vec<f64>,
}

impl SortedWeights {
    fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prefix = Vec::with_capacity(pairs.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &(_, w) in &pairs {
            acc += w;
            prefix.push(acc);
        }
        SortedWeights {
            vals: pairs.into_iter().map(|p| p.0).collect(),
            prefix,
        }
    }

    #[inline]
    fn band(&self, x: f64) -> (usize, usize) {
        let tol = 1e-12 * x.abs().max(1.0);
        let lo = self.vals.partition_point(|&v| v < x - tol);
        let hi = self.vals.partition_point(|&v| v <= x + tol);
        (lo, hi)
    }

    /// `Σ w·H(v - x)`.
    #[inline]
    fn above(&self, x: f64) -> f64 {
        let (lo, hi) = self.band(x);
        let total = *self.prefix.last().unwrap();
        total - self.prefix[hi] + 0.5 * (self.prefix[hi] - self.prefix[lo])
    }

    /// `Σ w·H(x - v)`.
    #[inline]
    fn below(&self, x: f64) -> f64 {
        let (lo, hi) = self.band(x);
        self.prefix[lo] + 0.5 * (self.prefix[hi] - self.prefix[lo])
    }
}

/// Expected better-node counts and escape probabilities on the transmission grid.
#[derive(Debug, Clone)]
pub struct TransmissionTables {
    n: usize,
    /// `E(N)` at `[i + k * N]`.
    pub en: Vec<f64>,
    /// `P_E = exp(-E(N))`.
    pub pe: Vec<f64>,
}

impl TransmissionTables {
    #[inline]
    pub fn en(&self, i: usize, k: usize) -> f64 {
        self.en[i + k * self.n]
    }

    #[inline]
    pub fn pe(&self, i: usize, k: usize) -> f64 {
        self.pe[i + k * self.n]
    }
}

/// Transition rates out of buffering states, integrated over target direction cells.
///
/// `ra[i*N + j]` is a rate; `rb`, `rc`, `rdhat` at `[(i*N + j)*M + l]` are rates per unit area.
#[derive(Debug, Clone)]
pub struct RateTables {
    pub n: usize,
    pub m: usize,
    pub ra: Vec<f64>,
    pub rb: Vec<f64>,
    pub rc: Vec<f64>,
    pub rdhat: Vec<f64>,
    pub agg_a: Vec<f64>,
    pub agg_b: Vec<f64>,
    pub agg_c: Vec<f64>,
    pub agg_d: Vec<f64>,
    /// `r(θ_i)`: sum of the four aggregates.
    pub total: Vec<f64>,
    /// `r0 + r_C + r_D`.
    pub alt_total: Vec<f64>,
    /// Largest per-interval mean of `max{0, (e^{jθ} - e^{jθ'})·t}|b'|` over all curves.
    pub max_flux_density: f64,
    /// Non-convexity warnings from contoured threshold curves.
    pub curve_warnings: Vec<String>,
}

impl RateTables {
    #[inline]
    pub fn idx3(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.m + l
    }

    /// `|r_A(θ_i) + r_B(θ_i) - r0| / r0`.
    pub fn identity_defects(&self, r0: f64) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.agg_a[i] + self.agg_b[i] - r0).abs() / r0)
            .collect()
    }

    /// Relative gap between `r(θ)` and `r0 + r_C(θ) + r_D(θ)`.
    pub fn total_defects(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.total[i] - self.alt_total[i]).abs() / self.total[i])
            .collect()
    }

    /// Family masses `(A, B, C, D)` and mean sojourn `1/r(θ_i)`.
    pub fn conditional_event_probabilities(&self, i: usize) -> Result<([f64; 4], f64)> {
        let r = self.total[i];
        if !(r > 0.0) {
            return Err(DtnError::NonFinite(format!("aggregate rate r(θ_{i}) = {r}")));
        }
        Ok((
            [
                self.agg_a[i] / r,
                self.agg_b[i] / r,
                self.agg_c[i] / r,
                self.agg_d[i] / r,
            ],
            1.0 / r,
        ))
    }
}

/// Violations of the transition-rate bounds.
#[derive(Debug, Clone, Default)]
pub struct BoundReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

/// Discretized model with all potential values cached on the grid.
#[derive(Debug, Clone)]
pub struct StageModel {
    pub params: ModelParams,
    pub resolution: Resolution,
    pub fr: ForwardingRegion,
    pub grid: Grid,
    pub quad: DirectionQuadrature,
    pub lattice: ContourLattice,
    pub speedup: Option<SpeedupTables>,
    /// Point indices of `G(r_k)`.
    pub g_members: Vec<Vec<usize>>,
    /// `U(θ_i, 0)`.
    pub u_cell: Vec<f64>,
    /// `U(q, 0)` for target sub-points.
    pub u_sub: Vec<f64>,
    /// `U(q, r_l)` at `[q * M + l]`; empty when the potential ignores location.
    u_pts: Vec<f64>,
    /// All `(U(q, r_l), m_q δA)` over `F`.
    field_all: SortedWeights,
    /// All `(U(q, 0), m_q)`.
    dir_origin: SortedWeights,
}

impl StageModel {
    pub fn new(params: ModelParams, resolution: Resolution) -> Result<Self> {
        params.validate()?;
        let fr = ForwardingRegion::from_rule(&params.rule);
        let grid = Grid::build(&fr, resolution.n, resolution.l)?;
        let quad = DirectionQuadrature::new(&grid, &params.direction_density, resolution.subdivisions)?;
        let lattice = ContourLattice::for_box(fr.half_width(), resolution.l);
        let pot = &params.rule.potential;
        let u_cell: Vec<f64> = grid.theta.iter().map(|&t| pot.eval(t, [0.0, 0.0])).collect();
        let u_sub: Vec<f64> = quad.sub_theta.iter().map(|&t| pot.eval(t, [0.0, 0.0])).collect();
        let (speedup, members, u_pts) = if params.rule.location_independent() {
            let t = SpeedupTables::build(&params.rule, &params.direction_density, &grid, &quad, &fr)?;
            let members = t.g_members.clone();
            (Some(t), members, Vec::new())
        } else {
            let m = grid.m();
            let mut u = vec![0.0; quad.len() * m];
            for (q, &t) in quad.sub_theta.iter().enumerate() {
                for (l, &p) in grid.points.iter().enumerate() {
                    u[q * m + l] = pot.eval(t, p);
                }
            }
            (None, g_members(&grid, &fr), u)
        };
        let check = |v: &[f64], what: &str| -> Result<()> {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DtnError::NonFinite(format!("potential values ({what})")));
            }
            Ok(())
        };
        check(&u_cell, "grid directions")?;
        check(&u_sub, "sub-directions")?;
        check(&u_pts, "grid points")?;
        let mut model = StageModel {
            params,
            resolution,
            fr,
            grid,
            quad,
            lattice,
            speedup,
            g_members: members,
            u_cell,
            u_sub,
            u_pts,
            field_all: SortedWeights::new(Vec::new()),
            dir_origin: SortedWeights::new(Vec::new()),
        };
        let da = model.grid.delta_a;
        let mut all = Vec::with_capacity(model.quad.len() * model.grid.m());
        for q in 0..model.quad.len() {
            for l in 0..model.grid.m() {
                all.push((model.u_at(q, l), model.quad.sub_mass[q] * da));
            }
        }
        model.field_all = SortedWeights::new(all);
        model.dir_origin = SortedWeights::new(
            model
                .u_sub
                .iter()
                .copied()
                .zip(model.quad.sub_mass.iter().copied())
                .collect(),
        );
        Ok(model)
    }

    pub fn defaults() -> Result<Self> {
        Self::new(ModelParams::default(), Resolution::default())
    }

    #[inline]
    fn u_at(&self, q: usize, l: usize) -> f64 {
        if self.u_pts.is_empty() {
            self.u_sub[q]
        } else {
            self.u_pts[q * self.grid.m() + l]
        }
    }

    fn require_in_f(&self, r: [f64; 2], what: &'static str) -> Result<()> {
        if !self.fr.contains(r) {
            return Err(DtnError::Domain {
                what,
                value: r[0].hypot(r[1]),
                expected: "a point of the forwarding region",
            });
        }
        Ok(())
    }

    fn g_points(&self, r: [f64; 2]) -> Vec<usize> {
        (0..self.grid.m())
            .filter(|&l| self.fr.in_g_region(self.grid.points[l], r))
            .collect()
    }

    fn pot(&self, theta: f64, r: [f64; 2]) -> f64 {
        self.params.rule.potential.eval(theta, r)
    }

    /// `E(N; θ, r)` by the direct sum over sub-directions and points of `G(r)`.
    pub fn expected_better_count_direct(&self, theta: f64, r: [f64; 2]) -> Result<f64> {
        self.require_in_f(r, "r")?;
        let u0 = self.pot(theta, [0.0, 0.0]);
        let da = self.grid.delta_a;
        let pot = &self.params.rule.potential;
        let mut total = 0.0;
        for l in self.g_points(r) {
            let p = self.grid.points[l];
            for (q, &t) in self.quad.sub_theta.iter().enumerate() {
                total += self.quad.sub_mass[q] * da * step(pot.eval(t, p), u0);
            }
        }
        Ok(self.params.lambda * total)
    }

    /// `E(N; θ, r)`; factorized as `λ I1(θ) I2(r)` when the potential ignores location.
    pub fn expected_better_count(&self, theta: f64, r: [f64; 2]) -> Result<f64> {
        if self.speedup.is_none() {
            return self.expected_better_count_direct(theta, r);
        }
        self.require_in_f(r, "r")?;
        let i1 = self.quad.mass_above(&self.u_sub, self.pot(theta, [0.0, 0.0]));
        let i2 = self.g_points(r).len() as f64 * self.grid.delta_a;
        Ok(self.params.lambda * i1 * i2)
    }

    pub fn escape_probability(&self, theta: f64, r: [f64; 2]) -> Result<f64> {
        Ok((-self.expected_better_count(theta, r)?).exp())
    }

    /// Density of the next transmission landing at `(θ_p, r_p)` from transmission state `(θ, r)`.
    pub fn forward_density(&self, theta_p: f64, r_p: [f64; 2], theta: f64, r: [f64; 2]) -> Result<f64> {
        self.require_in_f(r, "r")?;
        self.require_in_f(r_p, "r_p")?;
        let up = self.pot(theta_p, r_p);
        if !(self.pot(theta, [0.0, 0.0]) < up) || !self.fr.in_g_region(r_p, r) {
            return Ok(0.0);
        }
        let da = self.grid.delta_a;
        let pot = &self.params.rule.potential;
        let mut inner = 0.0;
        for l in self.g_points(r) {
            let p = self.grid.points[l];
            for (q, &t) in self.quad.sub_theta.iter().enumerate() {
                inner += self.quad.sub_mass[q] * da * step(pot.eval(t, p), up);
            }
        }
        let lambda = self.params.lambda;
        Ok(lambda * self.params.direction_density.value(theta_p) * (-lambda * inner).exp())
    }

    /// `∫∫ f_D 1[U(θ,0) >= U(θ'', r'') > u]` over directions and `F`.
    #[inline]
    fn band_mass(&self, u_theta: f64, u: f64) -> f64 {
        (self.field_all.above(u) - self.field_all.above(u_theta)).max(0.0)
    }

    /// `r_A(θ, θ')`.
    pub fn rate_a(&self, theta: f64, theta_p: f64) -> f64 {
        let p = &self.params;
        let j = self.band_mass(self.pot(theta, [0.0, 0.0]), self.pot(theta_p, [0.0, 0.0]));
        p.r0 * p.direction_density.value(theta_p) * (-p.lambda * j).exp()
    }

    /// `r_B(θ, θ', r')`.
    pub fn rate_b(&self, theta: f64, theta_p: f64, r_p: [f64; 2]) -> Result<f64> {
        self.require_in_f(r_p, "r_p")?;
        let p = &self.params;
        let u0 = self.pot(theta, [0.0, 0.0]);
        let up = self.pot(theta_p, r_p);
        if !(u0 >= up) {
            return Ok(0.0);
        }
        let worse = self.dir_origin.below(up);
        let j = self.band_mass(u0, up);
        Ok(p.r0 * p.lambda * p.direction_density.value(theta_p) * worse * (-p.lambda * j).exp())
    }

    /// `r_C(θ, θ', r')`.
    pub fn rate_c(&self, theta: f64, theta_p: f64, r_p: [f64; 2]) -> Result<f64> {
        self.require_in_f(r_p, "r_p")?;
        let p = &self.params;
        let u0 = self.pot(theta, [0.0, 0.0]);
        if !(self.pot(theta_p, r_p) > u0) {
            return Ok(0.0);
        }
        let pot = &p.rule.potential;
        let worse: f64 = self
            .quad
            .sub_theta
            .iter()
            .zip(&self.quad.sub_mass)
            .map(|(&t, &m)| m * step(u0, pot.eval(t, r_p)))
            .sum();
        Ok(p.lambda * p.r0 * p.direction_density.value(theta_p) * worse)
    }

    /// Threshold curve for `(θ, θ')` at the configured resolution.
    pub fn threshold_curve(&self, theta: f64, theta_p: f64) -> Result<ThresholdCurve> {
        threshold_curve(
            theta,
            theta_p,
            &self.params.rule,
            &self.fr,
            &self.lattice,
            self.resolution.curve_resolution,
        )
    }

    /// `r_D(θ, θ', s)` on the given curve.
    pub fn rate_d(&self, theta: f64, theta_p: f64, s: f64, curve: &ThresholdCurve) -> Result<f64> {
        if curve.is_empty() {
            return Ok(0.0);
        }
        let (speed, t) = curve.speed_and_normal(s)?;
        let w = [theta.cos() - theta_p.cos(), theta.sin() - theta_p.sin()];
        let p = &self.params;
        Ok(p.lambda * p.v0 * p.direction_density.value(theta_p) * dot(w, t).max(0.0) * speed)
    }

    /// `r̂_D(θ, θ', r_k)` for every grid point: each `s` interval is relocated to the
    /// grid point nearest its midpoint, weighted by `1/δA`.
    pub fn relocate_rate_d(&self, theta: f64, theta_p: f64, curve: &ThresholdCurve) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.m()];
        if curve.is_empty() {
            return out;
        }
        let p = &self.params;
        let w = [theta.cos() - theta_p.cos(), theta.sin() - theta_p.sin()];
        let scale = p.lambda * p.v0 * p.direction_density.value(theta_p) / self.grid.delta_a;
        for (sample, flux) in curve.samples.iter().zip(curve.interval_flux(w)) {
            out[self.grid.nearest_point(sample.point)] += scale * flux;
        }
        out
    }

    /// Expected better-node counts and escape probabilities on the grid.
    pub fn transmission_tables(&self) -> TransmissionTables {
        let n = self.grid.n;
        let m = self.grid.m();
        let lambda = self.params.lambda;
        let mut en = vec![0.0; n * m];
        for k in 0..m {
            match &self.speedup {
                Some(t) => {
                    for i in 0..n {
                        en[i + k * n] = lambda * t.i1[i] * t.i2[k];
                    }
                }
                None => {
                    let sw = self.g_weights(k);
                    for i in 0..n {
                        en[i + k * n] = lambda * sw.above(self.u_cell[i]);
                    }
                }
            }
        }
        let pe = en.iter().map(|e| (-e).exp()).collect();
        TransmissionTables { n, en, pe }
    }

    /// `(U(q, r_l), m_q δA)` over `l ∈ G(r_k)`.
    fn g_weights(&self, k: usize) -> SortedWeights {
        let da = self.grid.delta_a;
        let mut pairs = Vec::with_capacity(self.g_members[k].len() * self.quad.len());
        for &l in &self.g_members[k] {
            for q in 0..self.quad.len() {
                pairs.push((self.u_at(q, l), self.quad.sub_mass[q] * da));
            }
        }
        SortedWeights::new(pairs)
    }

    /// Per-`k` cell masses of the next carrier: the probability that the best node of
    /// `G(r_k)` sits at each atom `(q, r_l)` of the discretized field.
    pub fn forward_factors(&self, k: usize) -> ForwardFactors {
        let lambda = self.params.lambda;
        let nq = self.quad.len();
        match &self.speedup {
            Some(t) => {
                let counts: Vec<f64> = (0..nq).map(|q| lambda * self.quad.sub_mass[q] * t.i2[k]).collect();
                let share = 1.0 / self.g_members[k].len().max(1) as f64;
                let e = best_atom_probabilities(&self.u_sub, &counts)
                    .into_iter()
                    .map(|p| p * share)
                    .collect();
                ForwardFactors { k, per_point: false, e }
            }
            None => {
                let members = &self.g_members[k];
                let nm = members.len();
                let mut u = vec![0.0; nq * nm];
                let mut counts = vec![0.0; nq * nm];
                let da = self.grid.delta_a;
                for q in 0..nq {
                    for (a, &l) in members.iter().enumerate() {
                        u[q * nm + a] = self.u_at(q, l);
                        counts[q * nm + a] = lambda * self.quad.sub_mass[q] * da;
                    }
                }
                ForwardFactors {
                    k,
                    per_point: true,
                    e: best_atom_probabilities(&u, &counts),
                }
            }
        }
    }

    /// Cell masses of the next transmission out of state `(θ_i, r_k)`, written to
    /// `out[l * N + j]` (`out` must be zeroed and of length `N·M`).
    pub fn forward_row(&self, i: usize, f: &ForwardFactors, out: &mut [f64]) {
        let n = self.grid.n;
        let s = self.quad.subdivisions;
        let ui = self.u_cell[i];
        let members = &self.g_members[f.k];
        if !f.per_point {
            let mut v = vec![0.0; n];
            for (q, &e) in f.e.iter().enumerate() {
                if e != 0.0 {
                    v[q / s] += e * step(self.u_sub[q], ui);
                }
            }
            for &l in members {
                out[l * n..(l + 1) * n].copy_from_slice(&v);
            }
        } else {
            let nm = members.len();
            for q in 0..self.quad.len() {
                let j = q / s;
                for (a, &l) in members.iter().enumerate() {
                    let e = f.e[q * nm + a];
                    if e != 0.0 {
                        out[l * n + j] += e * step(self.u_at(q, l), ui);
                    }
                }
            }
        }
    }

    /// Build every rate table and aggregate.
    pub fn rate_tables(&self) -> Result<RateTables> {
        let n = self.grid.n;
        let m = self.grid.m();
        let nq = self.quad.len();
        let s = self.quad.subdivisions;
        let p = &self.params;
        let (lambda, r0, v0) = (p.lambda, p.r0, p.v0);
        let da = self.grid.delta_a;

        let shared_curve = if self.params.rule.location_independent() {
            let c = boundary_curve(0.0, 0.0, &self.fr, self.resolution.curve_resolution);
            let map: Vec<usize> = c.samples.iter().map(|x| self.grid.nearest_point(x.point)).collect();
            Some((c, map))
        } else {
            None
        };

        // per-(i, q, l) quantities that do not depend on i
        let worse_origin: Vec<f64> = (0..nq * m)
            .map(|ql| self.dir_origin.below(self.u_at(ql / m, ql % m)))
            .collect();
        // per-point sorted potentials for the inner integral of r_C
        let per_point: Vec<SortedWeights> = if self.u_pts.is_empty() {
            vec![self.dir_origin.clone()]
        } else {
            (0..m)
                .map(|l| SortedWeights::new((0..nq).map(|q| (self.u_at(q, l), self.quad.sub_mass[q])).collect()))
                .collect()
        };

        struct Row {
            ra: Vec<f64>,
            rb: Vec<f64>,
            rc: Vec<f64>,
            rd: Vec<f64>,
            max_flux: f64,
            warnings: Vec<String>,
            error: Option<DtnError>,
        }

        let rows: Vec<Row> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ui = self.u_cell[i];
                let ti = self.grid.theta[i];
                let mut row = Row {
                    ra: vec![0.0; n],
                    rb: vec![0.0; n * m],
                    rc: vec![0.0; n * m],
                    rd: vec![0.0; n * m],
                    max_flux: 0.0,
                    warnings: Vec::new(),
                    error: None,
                };
                let s_ui = self.field_all.above(ui);
                let worse_than_i: Vec<f64> = per_point.iter().map(|sw| sw.below(ui)).collect();
                for q in 0..nq {
                    let mq = self.quad.sub_mass[q];
                    if mq == 0.0 {
                        continue;
                    }
                    let j = q / s;
                    let uq0 = self.u_sub[q];
                    let band = (self.field_all.above(uq0) - s_ui).max(0.0);
                    row.ra[j] += r0 * mq * (-lambda * band).exp();
                    for l in 0..m {
                        let u = self.u_at(q, l);
                        let below = step(ui, u);
                        if below > 0.0 {
                            let band = (self.field_all.above(u) - s_ui).max(0.0);
                            row.rb[j * m + l] +=
                                r0 * lambda * mq * below * worse_origin[q * m + l] * (-lambda * band).exp();
                        }
                        let above = step(u, ui);
                        if above > 0.0 {
                            let inner = worse_than_i[if per_point.len() == 1 { 0 } else { l }];
                            row.rc[j * m + l] += lambda * r0 * mq * above * inner;
                        }
                    }
                    // boundary crossings
                    let tq = self.quad.sub_theta[q];
                    let w = [ti.cos() - tq.cos(), ti.sin() - tq.sin()];
                    let scale = lambda * v0 * mq / da;
                    match &shared_curve {
                        Some((curve, map)) => {
                            let weight = step(uq0, ui);
                            if weight == 0.0 {
                                continue;
                            }
                            for ((flux, &l), smp) in curve.interval_flux(w).into_iter().zip(map).zip(&curve.samples) {
                                row.rd[j * m + l] += scale * weight * flux;
                                row.max_flux = row.max_flux.max(flux / smp.ds);
                            }
                        }
                        None => match self.threshold_curve(ti, tq) {
                            Ok(curve) => {
                                for (flux, smp) in curve.interval_flux(w).into_iter().zip(&curve.samples) {
                                    let l = self.grid.nearest_point(smp.point);
                                    row.rd[j * m + l] += scale * flux;
                                    row.max_flux = row.max_flux.max(flux / smp.ds);
                                }
                                row.warnings.extend(curve.warnings);
                            }
                            Err(e) => {
                                row.error.get_or_insert(e);
                            }
                        },
                    }
                }
                row
            })
            .collect();

        let mut t = RateTables {
            n,
            m,
            ra: vec![0.0; n * n],
            rb: vec![0.0; n * n * m],
            rc: vec![0.0; n * n * m],
            rdhat: vec![0.0; n * n * m],
            agg_a: vec![0.0; n],
            agg_b: vec![0.0; n],
            agg_c: vec![0.0; n],
            agg_d: vec![0.0; n],
            total: vec![0.0; n],
            alt_total: vec![0.0; n],
            max_flux_density: 0.0,
            curve_warnings: Vec::new(),
        };
        for (i, row) in rows.into_iter().enumerate() {
            if let Some(e) = row.error {
                return Err(e);
            }
            t.ra[i * n..(i + 1) * n].copy_from_slice(&row.ra);
            let span = i * n * m..(i + 1) * n * m;
            t.rb[span.clone()].copy_from_slice(&row.rb);
            t.rc[span.clone()].copy_from_slice(&row.rc);
            t.rdhat[span].copy_from_slice(&row.rd);
            t.agg_a[i] = row.ra.iter().sum();
            t.agg_b[i] = da * row.rb.iter().sum::<f64>();
            t.agg_c[i] = da * row.rc.iter().sum::<f64>();
            t.agg_d[i] = da * row.rd.iter().sum::<f64>();
            t.total[i] = t.agg_a[i] + t.agg_b[i] + t.agg_c[i] + t.agg_d[i];
            t.alt_total[i] = r0 + t.agg_c[i] + t.agg_d[i];
            t.max_flux_density = t.max_flux_density.max(row.max_flux);
            t.curve_warnings.extend(row.warnings);
        }
        for v in t.ra.iter().chain(&t.rb).chain(&t.rc).chain(&t.rdhat) {
            if !v.is_finite() || *v < 0.0 {
                return Err(DtnError::NonFinite("transition rate table".into()));
            }
        }
        Ok(t)
    }

    /// Check every transition-rate bound (densities are cell averages).
    pub fn check_bounds(&self, t: &RateTables) -> BoundReport {
        let p = &self.params;
        let n = self.grid.n;
        let m = self.grid.m();
        let dth = self.grid.delta_theta;
        let area = self.grid.discrete_area();
        let eps = self.quad.epsilon_eff;
        let m_b = p.rule.m_b;
        let tol = 1e-9;
        let mut rep = BoundReport::default();
        let fail = |rep: &mut BoundReport, ok: bool, msg: String| {
            rep.checked += 1;
            if !ok {
                rep.violations.push(msg);
            }
        };
        for i in 0..n {
            for j in 0..n {
                let f = self.quad.cell_mass[j] / dth;
                if f == 0.0 {
                    continue;
                }
                let ra = t.ra[i * n + j] / dth;
                let lo = p.r0 * eps * (-p.lambda * area).exp();
                fail(
                    &mut rep,
                    ra >= lo * (1.0 - tol),
                    format!("r_A({i},{j}) = {ra:e} below {lo:e}"),
                );
                fail(
                    &mut rep,
                    ra <= p.r0 * f * (1.0 + tol),
                    format!("r_A({i},{j}) = {ra:e} above r0 f_D"),
                );
                let cap = p.r0 * p.lambda * f * (1.0 + tol);
                for l in 0..m {
                    let rb = t.rb[t.idx3(i, j, l)] / dth;
                    let rc = t.rc[t.idx3(i, j, l)] / dth;
                    fail(&mut rep, rb <= cap, format!("r_B({i},{j},{l}) = {rb:e} above r0 λ f_D"));
                    fail(&mut rep, rc <= cap, format!("r_C({i},{j},{l}) = {rc:e} above r0 λ f_D"));
                }
            }
            let bound = p.r0 + p.r0 * p.lambda * area + 2.0 * m_b * p.lambda * p.v0;
            fail(
                &mut rep,
                t.total[i] <= bound * (1.0 + tol),
                format!("r(θ_{i}) = {} above {bound}", t.total[i]),
            );
        }
        fail(
            &mut rep,
            t.max_flux_density <= 2.0 * m_b * (1.0 + tol),
            format!("r_D flux density {} above 2 M_b = {}", t.max_flux_density, 2.0 * m_b),
        );
        rep
    }
}

/// For a Poisson field with expected atom counts `counts`, the probability that the
/// atom of highest potential `u` is occupied while every better atom is empty.
/// Atoms of equal potential share their group's probability in proportion to count.
fn best_atom_probabilities(u: &[f64], counts: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..u.len()).filter(|&a| counts[a] > 0.0).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]));
    let mut p = vec![0.0; u.len()];
    let mut above = 0.0_f64;
    let mut g = 0;
    while g < order.len() {
        let head = u[order[g]];
        let tol = 1e-12 * head.abs().max(1.0);
        let mut end = g;
        let mut total = 0.0_f64;
        while end < order.len() && head - u[order[end]] <= tol {
            total += counts[order[end]];
            end += 1;
        }
        let group = (-above).exp() * -(-total).exp_m1();
        for &a in &order[g..end] {
            p[a] = group * counts[a] / total;
        }
        above += total;
        g = end;
    }
    p
}

/// Next-carrier atom probabilities for one spatial index `k`.
#[derive(Debug, Clone)]
pub struct ForwardFactors {
    k: usize,
    per_point: bool,
    e: Vec<f64>,
}
