//! Monte Carlo simulation of the unapproximated network: a Poisson node field on a
//! torus, random-waypoint mobility and the potential-based forwarding rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DtnError, Result};
use crate::geometry::ForwardingRegion;
use crate::model::ModelParams;

const HOP_CAP: usize = 1_000_000;
const REBUILD_INTERVAL: f64 = 0.25;

/// Simulation settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: ModelParams,
    /// Half side of the square torus.
    pub world_half_width: f64,
    pub time_step: f64,
    pub horizon: f64,
    pub min_stages: u64,
    pub seed: u64,
    pub replicas: usize,
    /// Record every turn of the carrier and every transmission.
    pub trace: bool,
    /// Put a single carrier node in an otherwise empty field.
    pub empty_field: bool,
}

impl SimConfig {
    /// Defaults: half-width `10 B`, the largest allowed step, horizon `10⁴/r0`, 8 replicas.
    pub fn new(params: ModelParams) -> Self {
        let b = params.rule.boundary.max_radius();
        let time_step = Self::max_time_step(&params);
        SimConfig {
            world_half_width: 10.0 * b,
            time_step,
            horizon: 1e4 / params.r0,
            min_stages: 1000,
            seed: 1,
            replicas: 8,
            trace: false,
            empty_field: false,
            params,
        }
    }

    pub fn max_time_step(params: &ModelParams) -> f64 {
        (0.01 / params.r0).min(0.01 * params.rule.boundary.scale() / params.v0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let b = self.params.rule.boundary.max_radius();
        if !(self.world_half_width >= 10.0 * b) {
            return Err(DtnError::Config(format!(
                "torus half-width {} is below 10 × FR extent ({})",
                self.world_half_width,
                10.0 * b
            )));
        }
        let dt_max = Self::max_time_step(&self.params);
        if !(self.time_step > 0.0 && self.time_step <= dt_max * (1.0 + 1e-12)) {
            return Err(DtnError::Config(format!(
                "time step {} must lie in (0, {dt_max}]",
                self.time_step
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(DtnError::Config("horizon must be positive".into()));
        }
        if self.replicas == 0 {
            return Err(DtnError::Config("at least one replica is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Turn,
    Transmission,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: EventKind,
    pub carrier_theta: f64,
    pub dx: f64,
    pub dy: f64,
    pub cost: f64,
}

/// Totals of one replica.
#[derive(Debug, Clone)]
pub struct ReplicaTotals {
    pub seed: u64,
    pub node_count: usize,
    pub time: f64,
    pub buffering_progress: f64,
    pub transmission_progress: f64,
    pub cost: f64,
    pub buffering_stages: u64,
    pub transmissions: u64,
    /// Directions of all nodes at the end of the run.
    pub final_directions: Vec<f64>,
    pub trace: Vec<TraceEvent>,
}

impl ReplicaTotals {
    pub fn progress(&self) -> f64 {
        self.buffering_progress + self.transmission_progress
    }

    pub fn stages(&self) -> u64 {
        self.buffering_stages + self.transmissions
    }

    pub fn speed(&self) -> f64 {
        self.progress() / self.time
    }

    pub fn normalized_cost(&self) -> Option<f64> {
        let x = self.progress();
        (x != 0.0).then(|| self.cost / x)
    }
}

struct Node {
    pos: [f64; 2],
    theta: f64,
    t_last: f64,
    next_turn: f64,
    turns: u64,
    rng: ChaCha8Rng,
}

struct World<'a> {
    params: &'a ModelParams,
    side: f64,
    turn: Exp<f64>,
    nodes: Vec<Node>,
}

impl World<'_> {
    fn wrap(&self, x: f64) -> f64 {
        x.rem_euclid(self.side)
    }

    /// Process all turns of node `k` up to time `t`.
    fn advance(&mut self, k: usize, t: f64) {
        let v0 = self.params.v0;
        let side = self.side;
        let node = &mut self.nodes[k];
        while node.next_turn <= t {
            let dt = node.next_turn - node.t_last;
            node.pos = [
                (node.pos[0] + v0 * node.theta.cos() * dt).rem_euclid(side),
                (node.pos[1] + v0 * node.theta.sin() * dt).rem_euclid(side),
            ];
            node.t_last = node.next_turn;
            node.theta = self.params.direction_density.sample_from_uniform(node.rng.random());
            node.next_turn += self.turn.sample(&mut node.rng);
            node.turns += 1;
        }
    }

    fn position(&self, k: usize, t: f64) -> [f64; 2] {
        let n = &self.nodes[k];
        let dt = t - n.t_last;
        let v0 = self.params.v0;
        [
            self.wrap(n.pos[0] + v0 * n.theta.cos() * dt),
            self.wrap(n.pos[1] + v0 * n.theta.sin() * dt),
        ]
    }

    fn displacement(&self, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
        let h = 0.5 * self.side;
        let d = |a: f64, b: f64| {
            let mut x = b - a;
            if x > h {
                x -= self.side;
            } else if x < -h {
                x += self.side;
            }
            x
        };
        [d(from[0], to[0]), d(from[1], to[1])]
    }
}

struct SpatialHash {
    cells: usize,
    cell_size: f64,
    buckets: Vec<Vec<u32>>,
}

impl SpatialHash {
    fn new(side: f64, min_cell: f64) -> Self {
        let cells = ((side / min_cell).floor() as usize).max(1);
        SpatialHash {
            cells,
            cell_size: side / cells as f64,
            buckets: vec![Vec::new(); cells * cells],
        }
    }

    fn cell(&self, x: f64) -> usize {
        ((x / self.cell_size) as usize).min(self.cells - 1)
    }

    fn rebuild(&mut self, world: &World, t: f64) {
        self.buckets.iter_mut().for_each(|b| b.clear());
        for k in 0..world.nodes.len() {
            let p = world.position(k, t);
            let c = self.cell(p[1]) * self.cells + self.cell(p[0]);
            self.buckets[c].push(k as u32);
        }
    }

    fn query(&self, p: [f64; 2], out: &mut Vec<u32>) {
        out.clear();
        let n = self.cells as isize;
        let (cx, cy) = (self.cell(p[0]) as isize, self.cell(p[1]) as isize);
        let mut seen: Vec<usize> = Vec::with_capacity(9);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let c = ((cy + dy).rem_euclid(n) * n + (cx + dx).rem_euclid(n)) as usize;
                if !seen.contains(&c) {
                    seen.push(c);
                    out.extend_from_slice(&self.buckets[c]);
                }
            }
        }
    }
}

/// Seed of replica `r`.
pub fn replica_seed(seed: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut s = 0;
    for _ in 0..=r {
        s = rng.random();
    }
    s
}

/// Node count of the initial field for a given replica seed.
pub fn initial_node_count(cfg: &SimConfig, seed: u64) -> Result<usize> {
    let mut field = ChaCha8Rng::seed_from_u64(seed);
    draw_count(cfg, &mut field)
}

fn draw_count(cfg: &SimConfig, field: &mut ChaCha8Rng) -> Result<usize> {
    if cfg.empty_field {
        return Ok(0);
    }
    let side = 2.0 * cfg.world_half_width;
    let mean = cfg.params.lambda * side * side;
    let poisson = Poisson::new(mean).map_err(|e| DtnError::Config(format!("node count: {e}")))?;
    Ok(poisson.sample(field) as usize)
}

/// Simulate one replica.
pub fn run_replica(cfg: &SimConfig, seed: u64) -> Result<ReplicaTotals> {
    cfg.validate()?;
    let p = &cfg.params;
    let fr = ForwardingRegion::from_rule(&p.rule);
    let b = fr.half_width();
    let side = 2.0 * cfg.world_half_width;
    let turn = Exp::new(p.r0).map_err(|e| DtnError::Config(format!("turn rate: {e}")))?;

    let mut field = ChaCha8Rng::seed_from_u64(seed);
    let mut count = draw_count(cfg, &mut field)?;
    if count == 0 {
        count = 1;
    }
    let mut nodes = Vec::with_capacity(count);
    for k in 0..count {
        let pos = [field.random::<f64>() * side, field.random::<f64>() * side];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let theta = p.direction_density.sample_from_uniform(rng.random());
        let next_turn = turn.sample(&mut rng);
        nodes.push(Node {
            pos,
            theta,
            t_last: 0.0,
            next_turn,
            turns: 0,
            rng,
        });
    }
    let mut world = World {
        params: p,
        side,
        turn,
        nodes,
    };

    let centre = [0.5 * side, 0.5 * side];
    let mut carrier = (0..count)
        .min_by(|&a, &b| {
            let da = world.displacement(centre, world.nodes[a].pos);
            let db = world.displacement(centre, world.nodes[b].pos);
            (da[0].hypot(da[1])).total_cmp(&db[0].hypot(db[1]))
        })
        .unwrap_or(0);

    let rebuild = REBUILD_INTERVAL.min(0.5 * b / p.v0);
    let mut hash = SpatialHash::new(side, b + 2.0 * p.v0 * (rebuild + cfg.time_step));
    let mut next_rebuild = 0.0;
    let mut near = Vec::new();

    let pot = &p.rule.potential;
    let mut totals = ReplicaTotals {
        seed,
        node_count: count,
        time: 0.0,
        buffering_progress: 0.0,
        transmission_progress: 0.0,
        cost: 0.0,
        buffering_stages: 0,
        transmissions: 0,
        final_directions: Vec::new(),
        trace: Vec::new(),
    };
    let mut displacements: Vec<[f64; 2]> = Vec::new();
    let mut t = 0.0;
    let mut carrier_turns = world.nodes[carrier].turns;

    while t < cfg.horizon || totals.stages() < cfg.min_stages {
        if t >= next_rebuild {
            for k in 0..world.nodes.len() {
                world.advance(k, t);
            }
            hash.rebuild(&world, t);
            next_rebuild = t + rebuild;
        }
        world.advance(carrier, t);
        let turned = world.nodes[carrier].turns != carrier_turns;
        if turned && cfg.trace {
            totals.trace.push(TraceEvent {
                time: t,
                kind: EventKind::Turn,
                carrier_theta: world.nodes[carrier].theta,
                dx: 0.0,
                dy: 0.0,
                cost: 0.0,
            });
        }

        // chain of instantaneous transmissions
        let mut hops = 0usize;
        let mut step_end = (t + cfg.time_step).min(world.nodes[carrier].next_turn);
        loop {
            let cpos = world.position(carrier, t);
            let u_carrier = pot.eval(world.nodes[carrier].theta, [0.0, 0.0]);
            hash.query(cpos, &mut near);
            let mut best: Option<(usize, f64, [f64; 2])> = None;
            for &k in &near {
                let k = k as usize;
                if k == carrier {
                    continue;
                }
                world.advance(k, t);
                let d = world.displacement(cpos, world.position(k, t));
                if d[0].abs() > b || d[1].abs() > b {
                    continue;
                }
                step_end = step_end.min(world.nodes[k].next_turn);
                if !fr.contains(d) {
                    continue;
                }
                let u = pot.eval(world.nodes[k].theta, d);
                if u > u_carrier && best.is_none_or(|(_, ub, _)| u > ub) {
                    best = Some((k, u, d));
                }
            }
            let Some((k, u, d)) = best else { break };
            if !(u > u_carrier) {
                return Err(DtnError::SimInvariant(format!(
                    "transmission at t = {t} does not increase the potential ({u_carrier} -> {u})"
                )));
            }
            if !fr.contains(d) {
                return Err(DtnError::SimInvariant(format!(
                    "transmission at t = {t} leaves the forwarding region: ({}, {})",
                    d[0], d[1]
                )));
            }
            let c = p.cost.eval(d);
            totals.cost += c;
            totals.transmission_progress += d[0];
            totals.transmissions += 1;
            displacements.push(d);
            if cfg.trace {
                totals.trace.push(TraceEvent {
                    time: t,
                    kind: EventKind::Transmission,
                    carrier_theta: world.nodes[k].theta,
                    dx: d[0],
                    dy: d[1],
                    cost: c,
                });
            }
            carrier = k;
            hops += 1;
            step_end = step_end.min(world.nodes[carrier].next_turn);
            if hops >= HOP_CAP {
                return Err(DtnError::SimInvariant(format!("more than {HOP_CAP} hops at t = {t}")));
            }
        }
        if turned || hops > 0 {
            totals.buffering_stages += 1;
        }
        carrier_turns = world.nodes[carrier].turns;

        let step_end = step_end.max(t);
        let dt = step_end - t;
        totals.buffering_progress += p.v0 * world.nodes[carrier].theta.cos() * dt;
        t = step_end;
        if dt == 0.0 {
            // a turn exactly at t: process it on the next pass
            t = next_after(t);
        }
    }
    totals.time = t;

    let recomputed: f64 = displacements.iter().map(|&d| p.cost.eval(d)).sum();
    if recomputed != totals.cost {
        return Err(DtnError::SimInvariant(format!(
            "accrued cost {} differs from recomputed {recomputed}",
            totals.cost
        )));
    }
    for k in 0..world.nodes.len() {
        world.advance(k, t);
    }
    totals.final_directions = world.nodes.iter().map(|n| n.theta).collect();
    Ok(totals)
}

fn next_after(t: f64) -> f64 {
    f64::from_bits(t.to_bits() + 1)
}

/// Replica means with normal-approximation 95% half-widths.
#[derive(Debug, Clone)]
pub struct SimEstimate {
    pub v_p: f64,
    pub c_p: Option<f64>,
    pub v_p_half_width: f64,
    pub c_p_half_width: f64,
    pub stages: u64,
    pub transmissions: u64,
    /// Replicas without progress, left out of the cost estimate.
    pub excluded: usize,
    pub replicas: Vec<ReplicaTotals>,
}

fn mean_and_half_width(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Run all replicas in parallel and combine them in replica order.
pub fn estimate(cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    if cfg.replicas < 2 {
        return Err(DtnError::Config("an estimate needs at least two replicas".into()));
    }
    let replicas: Vec<ReplicaTotals> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, replica_seed(cfg.seed, r)))
        .collect::<Result<_>>()?;
    let speeds: Vec<f64> = replicas.iter().map(|r| r.speed()).collect();
    let costs: Vec<f64> = replicas.iter().filter_map(|r| r.normalized_cost()).collect();
    let (v_p, v_hw) = mean_and_half_width(&speeds);
    let (c_p, c_hw) = if costs.is_empty() {
        (None, f64::NAN)
    } else {
        let (m, h) = mean_and_half_width(&costs);
        (Some(m), h)
    };
    Ok(SimEstimate {
        v_p,
        c_p,
        v_p_half_width: v_hw,
        c_p_half_width: c_hw,
        stages: replicas.iter().map(|r| r.stages()).sum(),
        transmissions: replicas.iter().map(|r| r.transmissions).sum(),
        excluded: replicas.len() - costs.len(),
        replicas,
    })
}

/// Kolmogorov–Smirnov distance between samples and the direction density.
pub fn ks_distance(samples: &[f64], params: &ModelParams) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(k, &v)| {
            let f = params.direction_density.cdf(v);
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical KS distance at the 5% level.
pub fn ks_critical_5pct(n: usize) -> f64 {
    1.358 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_params, DirectionDensity};

    fn short(params: ModelParams, horizon: f64) -> SimConfig {
        SimConfig::new(params).with_horizon(horizon)
    }

    #[test]
    fn config_checks() {
        let mut c = SimConfig::new(default_params());
        assert!(c.validate().is_ok());
        c.world_half_width = 5.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::new(default_params());
        c.time_step = 0.02;
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let c = short(default_params(), 50.0);
        let a = run_replica(&c, 7).unwrap();
        let b = run_replica(&c, 7).unwrap();
        assert_eq!(a.progress().to_bits(), b.progress().to_bits());
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        assert_eq!(a.transmissions, b.transmissions);
        assert!(a.transmissions > 0);
    }

    #[test]
    fn empty_field_never_transmits() {
        let mut c = short(default_params(), 100.0);
        c.empty_field = true;
        let r = run_replica(&c, 3).unwrap();
        assert_eq!(r.transmissions, 0);
        assert_eq!(r.node_count, 1);
        assert!(r.buffering_stages > 0);
    }

    #[test]
    fn node_count_is_poisson() {
        let mut c = SimConfig::new(default_params().with_lambda(0.5));
        c.world_half_width = 20.0;
        let mean = 0.5 * 40.0 * 40.0;
        let draws: Vec<f64> = (0..200).map(|s| initial_node_count(&c, s).unwrap() as f64).collect();
        let m = draws.iter().sum::<f64>() / 200.0;
        assert!((m - mean).abs() <= 3.0 * (mean / 200.0).sqrt(), "{m} vs {mean}");
    }

    #[test]
    fn directions_follow_density() {
        let p = default_params().with_density(DirectionDensity::four_window(std::f64::consts::PI / 8.0).unwrap());
        let c = short(p.clone(), 20.0);
        let r = run_replica(&c, 11).unwrap();
        let d = ks_distance(&r.final_directions, &p);
        assert!(d <= ks_critical_5pct(r.final_directions.len()), "{d}");
    }

    #[test]
    fn trace_matches_totals() {
        let mut c = short(default_params(), 30.0);
        c.trace = true;
        let r = run_replica(&c, 5).unwrap();
        let tx: Vec<_> = r.trace.iter().filter(|e| e.kind == EventKind::Transmission).collect();
        assert_eq!(tx.len() as u64, r.transmissions);
        let cost: f64 = tx.iter().map(|e| e.cost).sum();
        assert_eq!(cost, r.cost);
    }

    #[test]
    fn replica_seeds_differ() {
        assert_ne!(replica_seed(1, 0), replica_seed(1, 1));
        assert_eq!(replica_seed(9, 3), replica_seed(9, 3));
    }
}
