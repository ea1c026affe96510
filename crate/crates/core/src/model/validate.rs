use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RoutingRule;
use crate::geometry::{threshold_curve, ContourLattice, ForwardingRegion, DEFAULT_CURVE_RESOLUTION};
use crate::quadrature::Grid;

/// Outcome of one sampled assumption check.
#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub detail: String,
}

/// Sampled validation of a routing rule on a grid.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    /// Largest `|b'(s)|` met on any threshold curve between grid directions.
    pub max_curve_speed: f64,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn summary(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

const ANGLES: usize = 181;
const TRIPLES: usize = 2000;

/// Check the four structural assumptions on the potential and the region by dense sampling.
pub fn validate_rule(rule: &RoutingRule, grid: &Grid) -> ValidationReport {
    let fr = ForwardingRegion::from_rule(rule);
    let pot = &rule.potential;
    let mut positions: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    positions.extend_from_slice(&grid.points);
    let angles: Vec<f64> = (0..ANGLES)
        .map(|k| -PI + 2.0 * PI * k as f64 / (ANGLES - 1) as f64)
        .collect();

    // strict decrease in |θ| at every sampled location
    let mut a1_fail = None;
    let mut a1_samples = 0;
    'outer: for &r in &positions {
        let mut pairs: Vec<(f64, f64)> = angles.iter().map(|&t| (t.abs(), pot.eval(t, r))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            a1_samples += 1;
            let ((t0, u0), (t1, u1)) = (w[0], w[1]);
            if t1 - t0 > 1e-12 && !(u1 < u0) {
                a1_fail = Some(format!(
                    "U(|θ|={t1:.4}) = {u1:.6} not below U(|θ|={t0:.4}) = {u0:.6} at r = ({:.3}, {:.3})",
                    r[0], r[1]
                ));
                break 'outer;
            }
        }
    }

    // order preserved under a common translation that keeps both points in F
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    let b = fr.half_width();
    let random_point = |rng: &mut ChaCha8Rng| loop {
        let p = [rng.random_range(-b..b), rng.random_range(-b..b)];
        if fr.contains(p) {
            return p;
        }
    };
    let mut a2_fail = None;
    let mut a2_samples = 0;
    let mut attempts = 0;
    while a2_samples < TRIPLES && attempts < 50 * TRIPLES {
        attempts += 1;
        let r1 = random_point(&mut rng);
        let r2 = random_point(&mut rng);
        let r3 = random_point(&mut rng);
        let s1 = [r1[0] - r3[0], r1[1] - r3[1]];
        let s2 = [r2[0] - r3[0], r2[1] - r3[1]];
        if !fr.contains(s1) || !fr.contains(s2) {
            continue;
        }
        let t1 = rng.random_range(-PI..PI);
        let t2 = rng.random_range(-PI..PI);
        a2_samples += 1;
        let (u1, u2) = (pot.eval(t1, r1), pot.eval(t2, r2));
        let (v1, v2) = (pot.eval(t1, s1), pot.eval(t2, s2));
        let tol = 1e-12 * v1.abs().max(v2.abs()).max(1.0);
        let broken = (u1 < u2 && v1 > v2 + tol) || (u2 < u1 && v2 > v1 + tol);
        if broken && a2_fail.is_none() {
            a2_fail = Some(format!(
                "order of (θ={t1:.3}, r1) and (θ={t2:.3}, r2) flips after translation by ({:.3}, {:.3})",
                r3[0], r3[1]
            ));
        }
    }

    // convex eligibility regions with bounded threshold curves
    let mut warnings = Vec::new();
    let mut a3_fail = None;
    let mut max_speed: f64 = 0.0;
    let mut a3_samples = 0;
    if !polygon_is_convex(&fr.boundary_polyline(2048)) {
        a3_fail = Some("forwarding region is not convex".to_string());
    }
    if rule.location_independent() {
        max_speed = rule.m_b;
        a3_samples = 1;
    } else {
        let lattice = ContourLattice::for_box(b, grid.l);
        for &t in &grid.theta {
            for &tp in &grid.theta {
                a3_samples += 1;
                match threshold_curve(t, tp, rule, &fr, &lattice, DEFAULT_CURVE_RESOLUTION) {
                    Ok(c) => {
                        max_speed = max_speed.max(c.total_length);
                        let empty = c.is_empty();
                        warnings.extend(c.warnings);
                        if !empty && !region_is_convex(rule, &fr, t, tp, grid) {
                            a3_fail
                                .get_or_insert_with(|| format!("K({t:.4}, {tp:.4}) fails the midpoint convexity test"));
                        }
                    }
                    Err(e) => {
                        a3_fail.get_or_insert_with(|| e.to_string());
                    }
                }
            }
        }
    }

    // constant potential in the worst direction
    let k = rule.potential_floor_k;
    let mut a4_fail = None;
    for &r in &positions {
        let v = pot.eval(-PI, r);
        if (v - k).abs() > 1e-12 * k.abs().max(1.0) {
            a4_fail = Some(format!("U(-π, ({:.3}, {:.3})) = {v} differs from K = {k}", r[0], r[1]));
            break;
        }
    }

    let check = |name, fail: Option<String>, samples, ok: String| AssumptionCheck {
        name,
        passed: fail.is_none(),
        samples,
        detail: fail.unwrap_or(ok),
    };
    ValidationReport {
        checks: vec![
            check(
                "monotone in |θ|",
                a1_fail,
                a1_samples,
                format!("{a1_samples} ordered pairs"),
            ),
            check(
                "translation consistency",
                a2_fail,
                a2_samples,
                format!("{a2_samples} triples"),
            ),
            check(
                "convex K, bounded |b'|",
                a3_fail,
                a3_samples,
                format!("M_b = {:.4}, max |b'| = {max_speed:.4}", rule.m_b),
            ),
            check("constant floor U(-π, r)", a4_fail, positions.len(), format!("K = {k}")),
        ],
        max_curve_speed: max_speed,
        warnings,
    }
}

fn polygon_is_convex(pts: &[[f64; 2]]) -> bool {
    let n = pts.len();
    (0..n).all(|k| {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        let c = pts[(k + 2) % n];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        cross >= -1e-12
    })
}

/// Midpoints of pairs of grid points in `K` must stay in `K`.
fn region_is_convex(rule: &RoutingRule, fr: &ForwardingRegion, theta: f64, theta_p: f64, grid: &Grid) -> bool {
    let u0 = rule.potential.eval(theta, [0.0, 0.0]);
    let inside = |p: [f64; 2]| fr.contains(p) && rule.potential.eval(theta_p, p) > u0;
    let members: Vec<[f64; 2]> = grid.points.iter().copied().filter(|&p| inside(p)).collect();
    let stride = (members.len() / 24).max(1);
    for a in members.iter().step_by(stride) {
        for b in members.iter().step_by(stride) {
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let tol_ok = rule.potential.eval(theta_p, m) > u0 - 1e-12 * u0.abs().max(1.0);
            if !(fr.contains(m) && tol_ok) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_params, Boundary, Potential, RoutingRule};

    fn grid_for(rule: &RoutingRule, n: usize, l: usize) -> Grid {
        Grid::build(&ForwardingRegion::from_rule(rule), n, l).unwrap()
    }

    #[test]
    fn default_rule_passes() {
        let p = default_params();
        let g = grid_for(&p.rule, 36, 21);
        let rep = validate_rule(&p.rule, &g);
        assert!(rep.all_passed(), "{}", rep.summary());
        assert!(rep.max_curve_speed.is_finite());
    }

    #[test]
    fn step_potential_fails_monotonicity() {
        let rule = RoutingRule::new(
            Boundary::ellipse(1.0, 0.7).unwrap(),
            Potential::custom("floor", true, |t, _| -(t.abs().floor())),
        );
        let g = grid_for(&rule, 12, 9);
        let rep = validate_rule(&rule, &g);
        assert!(!rep.checks[0].passed);
        assert!(!rep.all_passed());
    }

    #[test]
    fn exp_progress_passes() {
        let rule = RoutingRule::new(
            Boundary::ellipse(1.0, 0.7).unwrap(),
            Potential::ExpProgress { kappa: 0.7 },
        );
        let g = grid_for(&rule, 12, 21);
        let rep = validate_rule(&rule, &g);
        assert!(rep.all_passed(), "{}", rep.summary());
        assert!(rep.max_curve_speed <= rule.m_b * 1.05);
    }

    #[test]
    fn location_dependent_floor_fails() {
        let rule = RoutingRule::new(
            Boundary::ellipse(1.0, 0.7).unwrap(),
            Potential::custom("tilted", false, |t, r| -t.abs() + 0.01 * r[0]),
        );
        let g = grid_for(&rule, 12, 9);
        let rep = validate_rule(&rule, &g);
        assert!(!rep.checks[3].passed);
    }
}
