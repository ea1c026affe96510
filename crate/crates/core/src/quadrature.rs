//! State-space discretization: direction grid, spatial grid inside `F`, cell
//! measures and the precomputed direction integrals.

use std::f64::consts::{PI, TAU};

use crate::error::{DtnError, Result};
use crate::geometry::ForwardingRegion;
use crate::model::{DirectionDensity, DirectionKind, Potential, RoutingRule};

/// Default direction count.
pub const DEFAULT_N: usize = 36;
/// Default linear spatial resolution.
pub const DEFAULT_L: usize = 21;
/// Default number of target-direction sub-intervals per direction cell.
pub const DEFAULT_SUBDIVISIONS: usize = 8;

/// Tie-split step `H(a - b)`: 1 above, 0 below, ½ on a tie.
#[inline]
pub fn step(a: f64, b: f64) -> f64 {
    let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
    if a > b + tol {
        1.0
    } else if a < b - tol {
        0.0
    } else {
        0.5
    }
}

/// Tie-split weight of the interval indicator `1[hi >= u > lo]`.
#[inline]
pub fn interval_step(u: f64, hi: f64, lo: f64) -> f64 {
    (step(u, lo) - step(u, hi)).max(0.0)
}

/// Mirror-symmetric cell centres: `c_i = -π + (π/n)(2i - 1)`, `i = 1..n`, with `c_{n+1-i} = -c_i` exactly.
fn symmetric_centres(n: usize, lo: f64, width: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n / 2 {
        let c = lo + width * (i as f64 + 0.5);
        out[i] = c;
        out[n - 1 - i] = -c;
    }
    out
}

/// Grid of directions and of retained spatial points.
#[derive(Debug, Clone)]
pub struct Grid {
    pub n: usize,
    pub l: usize,
    pub half_width: f64,
    pub theta: Vec<f64>,
    pub delta_theta: f64,
    pub points: Vec<[f64; 2]>,
    pub delta_a: f64,
    pub v_d: f64,
    /// Lattice cell `(k1, k2)` at `k2 * l + k1` maps to its retained point index.
    lattice: Vec<Option<usize>>,
    lattice_x: Vec<f64>,
}

impl Grid {
    pub fn build(fr: &ForwardingRegion, n: usize, l: usize) -> Result<Grid> {
        if n < 4 {
            return Err(DtnError::invalid("grid_n", "need N >= 4"));
        }
        if l < 4 {
            return Err(DtnError::invalid("grid_l", "need L >= 4"));
        }
        if !(fr.area() > 0.0) {
            return Err(DtnError::invalid("boundary", "forwarding region has zero area"));
        }
        let b = fr.half_width();
        let theta = symmetric_centres(n, -PI, TAU / n as f64);
        let xs = symmetric_centres(l, -b, 2.0 * b / l as f64);
        let mut points = Vec::new();
        let mut lattice = vec![None; l * l];
        for (k2, &y) in xs.iter().enumerate() {
            for (k1, &x) in xs.iter().enumerate() {
                if fr.contains([x, y]) {
                    lattice[k2 * l + k1] = Some(points.len());
                    points.push([x, y]);
                }
            }
        }
        if points.is_empty() {
            return Err(DtnError::invalid("grid_l", "no grid point falls inside F"));
        }
        let delta_theta = TAU / n as f64;
        let delta_a = (2.0 * b / l as f64).powi(2);
        Ok(Grid {
            n,
            l,
            half_width: b,
            theta,
            delta_theta,
            points,
            delta_a,
            v_d: 8.0 * PI * b * b / (n * l * l) as f64,
            lattice,
            lattice_x: xs,
        })
    }

    /// Number of retained spatial points `M`.
    pub fn m(&self) -> usize {
        self.points.len()
    }

    /// Discrete area `M·δA`.
    pub fn discrete_area(&self) -> f64 {
        self.m() as f64 * self.delta_a
    }

    /// Lower edge of direction cell `i`.
    pub fn cell_lo(&self, i: usize) -> f64 {
        -PI + self.delta_theta * i as f64
    }

    /// Direction cell containing `x ∈ [-π, π)`.
    pub fn cell_of(&self, x: f64) -> usize {
        (((x + PI) / self.delta_theta).floor() as usize).min(self.n - 1)
    }

    /// Index of the retained point nearest to `p`.
    pub fn nearest_point(&self, p: [f64; 2]) -> usize {
        let h = 2.0 * self.half_width / self.l as f64;
        let k1 = ((p[0] + self.half_width) / h).floor();
        let k2 = ((p[1] + self.half_width) / h).floor();
        if k1 >= 0.0 && k2 >= 0.0 && (k1 as usize) < self.l && (k2 as usize) < self.l {
            if let Some(j) = self.lattice[k2 as usize * self.l + k1 as usize] {
                return j;
            }
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, q) in self.points.iter().enumerate() {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// Lattice coordinates (before the membership filter).
    pub fn lattice_coords(&self) -> &[f64] {
        &self.lattice_x
    }

    /// Index of a buffering state.
    #[inline]
    pub fn buffering_index(&self, i: usize) -> usize {
        i
    }

    /// Index of transmission state `(θ_i, r_j)`.
    #[inline]
    pub fn transmission_index(&self, i: usize, j: usize) -> usize {
        self.n + j * self.n + i
    }

    /// Total chain dimension `N(M + 1)`.
    pub fn dimension(&self) -> usize {
        self.n * (self.m() + 1)
    }
}

/// `V_d Σ_{i,j} f(θ_i, r_j)`.
pub fn integrate_cells<F>(f: F, grid: &Grid) -> Result<f64>
where
    F: Fn(f64, [f64; 2]) -> f64,
{
    let mut total = 0.0;
    for &t in &grid.theta {
        for &p in &grid.points {
            let v = f(t, p);
            if !v.is_finite() {
                return Err(DtnError::NonFinite(format!(
                    "integrand at theta = {t:.6}, r = ({:.6}, {:.6})",
                    p[0], p[1]
                )));
            }
            total += v;
        }
    }
    Ok(grid.v_d * total)
}

/// Sub-interval quadrature for target directions: exact `f_D` mass per sub-interval,
/// evaluated at mirror-symmetric sub-interval midpoints.
#[derive(Debug, Clone)]
pub struct DirectionQuadrature {
    pub subdivisions: usize,
    /// `sub_theta[i * S + k]` lies in direction cell `i`.
    pub sub_theta: Vec<f64>,
    pub sub_mass: Vec<f64>,
    pub cell_mass: Vec<f64>,
    /// Smallest positive cell-average density, capped by the family's own bound.
    pub epsilon_eff: f64,
}

impl DirectionQuadrature {
    pub fn new(grid: &Grid, d: &DirectionDensity, subdivisions: usize) -> Result<Self> {
        if subdivisions == 0 {
            return Err(DtnError::invalid("subdivisions", "must be >= 1"));
        }
        let total = grid.n * subdivisions;
        let width = TAU / total as f64;
        let sub_theta = symmetric_centres(total, -PI, width);
        let sub_mass: Vec<f64> = (0..total)
            .map(|q| {
                let lo = -PI + width * q as f64;
                let hi = if q + 1 == total {
                    PI
                } else {
                    -PI + width * (q + 1) as f64
                };
                d.mass(lo, hi)
            })
            .collect();
        let cell_mass: Vec<f64> = (0..grid.n)
            .map(|i| sub_mass[i * subdivisions..(i + 1) * subdivisions].iter().sum())
            .collect();
        let min_avg = cell_mass
            .iter()
            .filter(|&&m| m > 1e-15)
            .map(|m| m / grid.delta_theta)
            .fold(f64::INFINITY, f64::min);
        Ok(DirectionQuadrature {
            subdivisions,
            sub_theta,
            sub_mass,
            cell_mass,
            epsilon_eff: d.epsilon_d().min(min_avg),
        })
    }

    pub fn len(&self) -> usize {
        self.sub_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sub_theta.is_empty()
    }

    /// Direction cell of sub-point `q`.
    #[inline]
    pub fn cell(&self, q: usize) -> usize {
        q / self.subdivisions
    }

    /// `Σ_q m_q H(U(q) - u)`: mass of directions strictly better than `u` (ties split).
    pub fn mass_above(&self, u_sub: &[f64], u: f64) -> f64 {
        u_sub.iter().zip(&self.sub_mass).map(|(&uq, &m)| m * step(uq, u)).sum()
    }

    /// `Σ_q m_q H(u - U(q))`: mass of directions strictly worse than `u`.
    pub fn mass_below(&self, u_sub: &[f64], u: f64) -> f64 {
        u_sub.iter().zip(&self.sub_mass).map(|(&uq, &m)| m * step(u, uq)).sum()
    }

    /// `Σ_q m_q 1[hi >= U(q) > lo]`.
    pub fn mass_between(&self, u_sub: &[f64], hi: f64, lo: f64) -> f64 {
        u_sub
            .iter()
            .zip(&self.sub_mass)
            .map(|(&uq, &m)| m * interval_step(uq, hi, lo))
            .sum()
    }
}

/// Direction integrals for location-independent potentials.
#[derive(Debug, Clone)]
pub struct SpeedupTables {
    /// `I1(θ_i)`: mass of strictly better directions.
    pub i1: Vec<f64>,
    /// `I1` at every target sub-point.
    pub i1_sub: Vec<f64>,
    /// `I2(r_j) = |G(r_j)|` on the grid.
    pub i2: Vec<f64>,
    /// `I3(θ_i)`: mass of strictly worse directions.
    pub i3: Vec<f64>,
    pub i3_sub: Vec<f64>,
    /// `I4(θ_i, q)` for source cell `i` and target sub-point `q`, row-major.
    pub i4_sub: Vec<f64>,
    /// `I4(θ_i, θ_j)` at cell centres.
    pub i4: Vec<f64>,
    /// Point indices of `G(r_j)` for each `j`.
    pub g_members: Vec<Vec<usize>>,
    n: usize,
    nq: usize,
}

impl SpeedupTables {
    pub fn build(
        rule: &RoutingRule,
        d: &DirectionDensity,
        grid: &Grid,
        quad: &DirectionQuadrature,
        fr: &ForwardingRegion,
    ) -> Result<Self> {
        if !rule.location_independent() {
            return Err(DtnError::Unsupported(
                "speedup tables need a location-independent potential".into(),
            ));
        }
        let u = |t: f64| rule.potential.eval(t, [0.0, 0.0]);
        let u_cell: Vec<f64> = grid.theta.iter().map(|&t| u(t)).collect();
        let u_sub: Vec<f64> = quad.sub_theta.iter().map(|&t| u(t)).collect();
        let closed_form = matches!(rule.potential, Potential::NegAbsTheta)
            && matches!(d.kind(), DirectionKind::Uniform)
            && quad.subdivisions.is_multiple_of(2);
        let i1: Vec<f64> = if closed_form {
            grid.theta.iter().map(|t| t.abs() / PI).collect()
        } else {
            u_cell.iter().map(|&ui| quad.mass_above(&u_sub, ui)).collect()
        };
        let i1_sub = u_sub.iter().map(|&uq| quad.mass_above(&u_sub, uq)).collect();
        let i3 = u_cell.iter().map(|&ui| quad.mass_below(&u_sub, ui)).collect();
        let i3_sub = u_sub.iter().map(|&uq| quad.mass_below(&u_sub, uq)).collect();
        let nq = quad.len();
        let mut i4_sub = vec![0.0; grid.n * nq];
        let mut i4 = vec![0.0; grid.n * grid.n];
        for (i, &ui) in u_cell.iter().enumerate() {
            for (q, &uq) in u_sub.iter().enumerate() {
                i4_sub[i * nq + q] = quad.mass_between(&u_sub, ui, uq);
            }
            for (j, &uj) in u_cell.iter().enumerate() {
                i4[i * grid.n + j] = quad.mass_between(&u_sub, ui, uj);
            }
        }
        let g_members = g_members(grid, fr);
        let i2 = g_members.iter().map(|g| g.len() as f64 * grid.delta_a).collect();
        Ok(SpeedupTables {
            i1,
            i1_sub,
            i2,
            i3,
            i3_sub,
            i4_sub,
            i4,
            g_members,
            n: grid.n,
            nq,
        })
    }

    #[inline]
    pub fn i4_sub(&self, i: usize, q: usize) -> f64 {
        self.i4_sub[i * self.nq + q]
    }

    #[inline]
    pub fn i4(&self, i: usize, j: usize) -> f64 {
        self.i4[i * self.n + j]
    }
}

/// Point indices of `G(r_j)` on the grid.
pub fn g_members(grid: &Grid, fr: &ForwardingRegion) -> Vec<Vec<usize>> {
    grid.points
        .iter()
        .map(|&r| {
            grid.points
                .iter()
                .enumerate()
                .filter(|(_, &p)| fr.in_g_region(p, r))
                .map(|(l, _)| l)
                .collect()
        })
        .collect()
}
