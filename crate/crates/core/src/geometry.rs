//! Planar geometry: forwarding-region membership, the set `G(r)`, eligibility regions
//! and their threshold curves.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use crate::error::{DtnError, Result};
use crate::model::{Boundary, RoutingRule};

/// Number of polyline vertices used to represent the FR boundary as a curve.
pub const BOUNDARY_VERTICES: usize = 4096;

/// Default number of `s` intervals per threshold curve.
pub const DEFAULT_CURVE_RESOLUTION: usize = 256;

/// Relative tolerance used by inclusive membership tests.
const MEMBERSHIP_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// The forwarding region `F = {r : |r| <= b(angle(r))}` of a carrier at the origin.
#[derive(Debug, Clone)]
pub struct ForwardingRegion {
    boundary: Boundary,
    half_width: f64,
    area: f64,
}

impl ForwardingRegion {
    pub fn new(boundary: Boundary) -> Self {
        let half_width = boundary.max_radius();
        let area = boundary.area();
        ForwardingRegion {
            boundary,
            half_width,
            area,
        }
    }

    pub fn from_rule(rule: &RoutingRule) -> Self {
        Self::new(rule.boundary.clone())
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    /// `B = max_φ b(φ)`, so that `F ⊂ [-B, B]²`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Inclusive membership test.
    #[inline]
    pub fn contains(&self, r: [f64; 2]) -> bool {
        let d = norm(r);
        if d == 0.0 {
            return true;
        }
        d <= self.boundary.radius(r[1].atan2(r[0])) * (1.0 + MEMBERSHIP_TOL)
    }

    /// `r' ∈ G(r) = F(A) ∩ F(B)^c`, where `A` sits at `r` relative to `B`.
    #[inline]
    pub fn in_g_region(&self, r_prime: [f64; 2], r: [f64; 2]) -> bool {
        self.contains(r_prime) && !self.contains([r_prime[0] + r[0], r_prime[1] + r[1]])
    }

    /// Boundary point at polar angle `φ`.
    pub fn boundary_point(&self, phi: f64) -> [f64; 2] {
        let b = self.boundary.radius(phi);
        [b * phi.cos(), b * phi.sin()]
    }

    /// Closed polyline through `n` boundary points at uniformly spaced angles from `-π`.
    pub fn boundary_polyline(&self, n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|k| self.boundary_point(-PI + TAU * k as f64 / n as f64))
            .collect()
    }

    /// Length of the closed boundary polyline with `n` vertices.
    pub fn perimeter(&self, n: usize) -> f64 {
        polygon_length(&self.boundary_polyline(n))
    }
}

fn polygon_length(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|k| {
            let a = pts[k];
            let b = pts[(k + 1) % n];
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum()
}

/// Which region a threshold curve bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// `K(θ, θ')` is empty.
    Empty,
    /// `K(θ, θ') = F`: the curve is the FR boundary with `φ = -π + 2πs`.
    FrBoundary,
    /// Extracted level set, parametrized by normalized arc length.
    Contour,
}

/// One straight piece of a threshold curve with its outward unit normal.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    pub normal: [f64; 2],
    pub s0: f64,
    pub s1: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.p1[0] - self.p0[0]).hypot(self.p1[1] - self.p0[1])
    }
}

/// Sample of a threshold curve at the midpoint of an `s` interval.
#[derive(Debug, Clone, Copy)]
pub struct CurveSample {
    pub s: f64,
    pub ds: f64,
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub speed: f64,
}

/// Boundary between the eligibility region `K(θ, θ')` and its complement.
#[derive(Debug, Clone)]
pub struct ThresholdCurve {
    pub theta: f64,
    pub theta_prime: f64,
    pub kind: CurveKind,
    pub segments: Vec<Segment>,
    pub samples: Vec<CurveSample>,
    pub total_length: f64,
    pub loops: usize,
    pub warnings: Vec<String>,
    boundary: Option<Boundary>,
}

impl ThresholdCurve {
    fn empty(theta: f64, theta_prime: f64) -> Self {
        ThresholdCurve {
            theta,
            theta_prime,
            kind: CurveKind::Empty,
            segments: Vec::new(),
            samples: Vec::new(),
            total_length: 0.0,
            loops: 0,
            warnings: Vec::new(),
            boundary: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kind == CurveKind::Empty
    }

    /// Point `b(s)`.
    pub fn point(&self, s: f64) -> Result<[f64; 2]> {
        check_s(s)?;
        if let (CurveKind::FrBoundary, Some(b)) = (self.kind, &self.boundary) {
            let phi = -PI + TAU * s;
            let r = b.radius(phi);
            return Ok([r * phi.cos(), r * phi.sin()]);
        }
        let seg = self
            .segment_at(s)
            .ok_or_else(|| DtnError::Unsupported("empty curve".into()))?;
        let t = if seg.s1 > seg.s0 {
            (s - seg.s0) / (seg.s1 - seg.s0)
        } else {
            0.0
        };
        Ok([
            seg.p0[0] + t * (seg.p1[0] - seg.p0[0]),
            seg.p0[1] + t * (seg.p1[1] - seg.p0[1]),
        ])
    }

    fn segment_at(&self, s: f64) -> Option<&Segment> {
        if self.segments.is_empty() {
            return None;
        }
        let idx = self.segments.partition_point(|g| g.s1 <= s);
        Some(&self.segments[idx.min(self.segments.len() - 1)])
    }

    /// `(|b'(s)|, t(s))`: analytic on the FR boundary, piecewise constant on contours.
    pub fn speed_and_normal(&self, s: f64) -> Result<(f64, [f64; 2])> {
        check_s(s)?;
        match (self.kind, &self.boundary) {
            (CurveKind::Empty, _) => Err(DtnError::Unsupported("empty curve has no normal".into())),
            (CurveKind::FrBoundary, Some(b)) => {
                let phi = -PI + TAU * s;
                Ok((b.speed(phi), b.outward_normal(phi)))
            }
            _ => {
                let seg = self.segment_at(s).expect("contour has segments");
                Ok((self.total_length, seg.normal))
            }
        }
    }

    /// Exact integral of `max{0, w·t(s)}|b'(s)|` over each sample interval, taken
    /// along the polyline representation of the curve.
    pub fn interval_flux(&self, w: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.samples.len()];
        if out.is_empty() {
            return out;
        }
        let r = out.len() as f64;
        for seg in &self.segments {
            let flux = dot(w, seg.normal);
            if flux <= 0.0 {
                continue;
            }
            let len = seg.length();
            let span = seg.s1 - seg.s0;
            if span <= 0.0 {
                continue;
            }
            let first = ((seg.s0 * r).floor() as usize).min(out.len() - 1);
            let last = ((seg.s1 * r).ceil() as usize).min(out.len());
            for (i, slot) in out.iter_mut().enumerate().take(last).skip(first) {
                let lo = (i as f64 / r).max(seg.s0);
                let hi = ((i + 1) as f64 / r).min(seg.s1);
                if hi > lo {
                    *slot += flux * len * (hi - lo) / span;
                }
            }
        }
        out
    }

    /// Polyline length.
    pub fn polyline_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(DtnError::Domain {
            what: "curve parameter s",
            value: s,
            expected: "[0, 1]",
        });
    }
    Ok(())
}

/// Vertex lattice used for marching squares: spacing `2B/L`, padded by one cell.
#[derive(Debug, Clone, Copy)]
pub struct ContourLattice {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl ContourLattice {
    pub fn for_box(half_width: f64, l: usize) -> Self {
        let spacing = 2.0 * half_width / l as f64;
        ContourLattice {
            origin: -half_width - spacing,
            spacing,
            count: l + 3,
        }
    }

    #[inline]
    fn coord(&self, k: usize) -> f64 {
        self.origin + self.spacing * k as f64
    }
}

type RawSegment = ([f64; 2], [f64; 2], [f64; 2], f64);

/// Build the threshold curve of `K(θ, θ') = {r ∈ F : U(θ', r) > U(θ, 0)}`.
pub fn threshold_curve(
    theta: f64,
    theta_prime: f64,
    rule: &RoutingRule,
    fr: &ForwardingRegion,
    lattice: &ContourLattice,
    resolution: usize,
) -> Result<ThresholdCurve> {
    let u0 = rule.potential.eval(theta, [0.0, 0.0]);
    if rule.location_independent() {
        let u1 = rule.potential.eval(theta_prime, [0.0, 0.0]);
        if u1 > u0 {
            return Ok(boundary_curve(theta, theta_prime, fr, resolution));
        }
        return Ok(ThresholdCurve::empty(theta, theta_prime));
    }
    let pot = &rule.potential;
    let field = |p: [f64; 2]| -> f64 {
        let d = norm(p);
        let phi = p[1].atan2(p[0]);
        let inside = fr.boundary().radius(phi) - d;
        (pot.eval(theta_prime, p) - u0).min(inside)
    };
    let loops = marching_squares(&field, lattice);
    if loops.is_empty() {
        return Ok(ThresholdCurve::empty(theta, theta_prime));
    }
    let mut curve = contour_curve(theta, theta_prime, loops, &field, fr.half_width(), resolution);
    if curve.total_length > rule.m_b * 1.05 {
        return Err(DtnError::Validation(format!(
            "threshold curve ({theta:.4}, {theta_prime:.4}) has |b'| = {:.4} above M_b = {:.4}",
            curve.total_length, rule.m_b
        )));
    }
    if curve.segments.is_empty() {
        curve.kind = CurveKind::Empty;
        curve.samples.clear();
    }
    Ok(curve)
}

/// FR boundary as a threshold curve, uniform-angle parametrization.
pub fn boundary_curve(theta: f64, theta_prime: f64, fr: &ForwardingRegion, resolution: usize) -> ThresholdCurve {
    let n = BOUNDARY_VERTICES;
    let pts = fr.boundary_polyline(n);
    let segments: Vec<Segment> = (0..n)
        .map(|k| {
            let p0 = pts[k];
            let p1 = pts[(k + 1) % n];
            let d = [p1[0] - p0[0], p1[1] - p0[1]];
            let len = norm(d);
            // counter-clockwise traversal, so the outward normal is the chord rotated by -90°
            Segment {
                p0,
                p1,
                normal: [d[1] / len, -d[0] / len],
                s0: k as f64 / n as f64,
                s1: (k + 1) as f64 / n as f64,
            }
        })
        .collect();
    let b = fr.boundary().clone();
    let samples = (0..resolution)
        .map(|i| {
            let s = (i as f64 + 0.5) / resolution as f64;
            let phi = -PI + TAU * s;
            let r = b.radius(phi);
            CurveSample {
                s,
                ds: 1.0 / resolution as f64,
                point: [r * phi.cos(), r * phi.sin()],
                normal: b.outward_normal(phi),
                speed: b.speed(phi),
            }
        })
        .collect();
    let total_length = polygon_length(&pts);
    ThresholdCurve {
        theta,
        theta_prime,
        kind: CurveKind::FrBoundary,
        segments,
        samples,
        total_length,
        loops: 1,
        warnings: Vec::new(),
        boundary: Some(b),
    }
}

fn contour_curve(
    theta: f64,
    theta_prime: f64,
    loops: Vec<Vec<[f64; 2]>>,
    field: &dyn Fn([f64; 2]) -> f64,
    half_width: f64,
    resolution: usize,
) -> ThresholdCurve {
    let mut warnings = Vec::new();
    if loops.len() > 1 {
        warnings.push(format!(
            "K({theta:.4}, {theta_prime:.4}) has {} components; region is not convex",
            loops.len()
        ));
    }
    let probe = 1e-6 * half_width;
    // (p0, p1, outward normal, length)
    let mut raw: Vec<RawSegment> = Vec::new();
    for lp in &loops {
        let n = lp.len();
        for k in 0..n {
            let p0 = lp[k];
            let p1 = lp[(k + 1) % n];
            let d = [p1[0] - p0[0], p1[1] - p0[1]];
            let len = norm(d);
            if len <= 1e-14 * half_width {
                continue;
            }
            let mut nrm = [d[1] / len, -d[0] / len];
            let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])];
            let plus = field([mid[0] + probe * nrm[0], mid[1] + probe * nrm[1]]);
            let minus = field([mid[0] - probe * nrm[0], mid[1] - probe * nrm[1]]);
            if plus > minus {
                nrm = [-nrm[0], -nrm[1]];
            }
            raw.push((p0, p1, nrm, len));
        }
        if loops.len() == 1 && !is_convex_polygon(lp) {
            warnings.push(format!(
                "K({theta:.4}, {theta_prime:.4}) appears nonconvex on the contour lattice"
            ));
        }
    }
    let total: f64 = raw.iter().map(|r| r.3).sum();
    let mut acc = 0.0;
    let segments: Vec<Segment> = raw
        .iter()
        .map(|&(p0, p1, normal, len)| {
            let s0 = acc / total;
            acc += len;
            Segment {
                p0,
                p1,
                normal,
                s0,
                s1: (acc / total).min(1.0),
            }
        })
        .collect();
    let mut curve = ThresholdCurve {
        theta,
        theta_prime,
        kind: CurveKind::Contour,
        segments,
        samples: Vec::new(),
        total_length: total,
        loops: loops.len(),
        warnings,
        boundary: None,
    };
    if let Some(last) = curve.segments.last_mut() {
        last.s1 = 1.0;
    }
    curve.samples = (0..resolution)
        .map(|i| {
            let s = (i as f64 + 0.5) / resolution as f64;
            let point = curve.point(s).expect("s in range");
            let seg = curve.segment_at(s).expect("nonempty");
            CurveSample {
                s,
                ds: 1.0 / resolution as f64,
                point,
                normal: seg.normal,
                speed: total,
            }
        })
        .collect();
    curve
}

fn is_convex_polygon(pts: &[[f64; 2]]) -> bool {
    let n = pts.len();
    if n < 4 {
        return true;
    }
    let mut pos = 0usize;
    let mut neg = 0usize;
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        let c = pts[(k + 2) % n];
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - b[0], c[1] - b[1]];
        let cross = e1[0] * e2[1] - e1[1] * e2[0];
        let scale = norm(e1) * norm(e2);
        if scale == 0.0 {
            continue;
        }
        if cross > 1e-6 * scale {
            pos += 1;
        } else if cross < -1e-6 * scale {
            neg += 1;
        }
    }
    pos == 0 || neg == 0
}

/// Zero level set of `field` as closed loops, by marching squares with linear
/// interpolation along lattice edges. The field must be negative on the lattice border.
pub fn marching_squares(field: &dyn Fn([f64; 2]) -> f64, lattice: &ContourLattice) -> Vec<Vec<[f64; 2]>> {
    let n = lattice.count;
    let mut vals = vec![0.0; n * n];
    for iy in 0..n {
        for ix in 0..n {
            vals[iy * n + ix] = field([lattice.coord(ix), lattice.coord(iy)]);
        }
    }
    let at = |ix: usize, iy: usize| vals[iy * n + ix];
    // edge ids: horizontal edge from (ix, iy) is 2*(iy*n+ix), vertical is 2*(iy*n+ix)+1
    let h_edge = |ix: usize, iy: usize| 2 * (iy * n + ix);
    let v_edge = |ix: usize, iy: usize| 2 * (iy * n + ix) + 1;
    let crossing = |edge: usize| -> [f64; 2] {
        let cell = edge / 2;
        let (ix, iy) = (cell % n, cell / n);
        let (jx, jy) = if edge.is_multiple_of(2) {
            (ix + 1, iy)
        } else {
            (ix, iy + 1)
        };
        let a = at(ix, iy);
        let b = at(jx, jy);
        let t = if a == b { 0.5 } else { (a / (a - b)).clamp(0.0, 1.0) };
        let (x0, y0) = (lattice.coord(ix), lattice.coord(iy));
        let (x1, y1) = (lattice.coord(jx), lattice.coord(jy));
        [x0 + t * (x1 - x0), y0 + t * (y1 - y0)]
    };
    let mut segs: Vec<(usize, usize)> = Vec::new();
    for iy in 0..n - 1 {
        for ix in 0..n - 1 {
            let v0 = at(ix, iy) > 0.0;
            let v1 = at(ix + 1, iy) > 0.0;
            let v2 = at(ix + 1, iy + 1) > 0.0;
            let v3 = at(ix, iy + 1) > 0.0;
            let case = (v0 as u8) | (v1 as u8) << 1 | (v2 as u8) << 2 | (v3 as u8) << 3;
            let bottom = h_edge(ix, iy);
            let right = v_edge(ix + 1, iy);
            let top = h_edge(ix, iy + 1);
            let left = v_edge(ix, iy);
            let centre_inside = 0.25 * (at(ix, iy) + at(ix + 1, iy) + at(ix + 1, iy + 1) + at(ix, iy + 1)) > 0.0;
            match case {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 => {
                    if centre_inside {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    } else {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    }
                }
                10 => {
                    if centre_inside {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    } else {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segs.iter().enumerate() {
        adjacency.entry(a).or_default().push(k);
        adjacency.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut loops = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut current) = segs[start];
        let mut edges = vec![first];
        while current != first {
            edges.push(current);
            let next = adjacency
                .get(&current)
                .and_then(|v| v.iter().copied().find(|&k| !used[k]));
            match next {
                Some(k) => {
                    used[k] = true;
                    let (a, b) = segs[k];
                    current = if a == current { b } else { a };
                }
                None => break,
            }
        }
        let pts: Vec<[f64; 2]> = edges.into_iter().map(crossing).collect();
        if pts.len() >= 3 {
            loops.push(pts);
        }
    }
    loops
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, Potential};

    fn default_fr() -> ForwardingRegion {
        ForwardingRegion::new(Boundary::ellipse(1.0, 0.7).unwrap())
    }

    #[test]
    fn membership_examples() {
        let fr = default_fr();
        assert!(fr.contains([1.69, 0.0]));
        assert!(!fr.contains([-0.31, 0.0]));
        assert!(fr.contains([0.0, 0.0]));
        let circle = ForwardingRegion::new(Boundary::circle(1.0).unwrap());
        for k in 0..100 {
            let phi = -PI + TAU * k as f64 / 100.0;
            assert!(circle.contains([phi.cos(), phi.sin()]));
        }
    }

    #[test]
    fn areas() {
        assert!((ForwardingRegion::new(Boundary::circle(1.0).unwrap()).area() - PI).abs() < 1e-14);
        assert!((default_fr().area() - 2.2434).abs() < 2e-4);
    }

    #[test]
    fn g_region_examples() {
        let fr = default_fr();
        assert!(!fr.in_g_region([0.5, 0.1], [0.0, 0.0]));
        assert!(fr.in_g_region([1.5, 0.0], [1.5, 0.0]));
        assert!(!fr.in_g_region([5.0, 0.0], [1.5, 0.0]));
    }

    #[test]
    fn g_region_matches_two_membership_tests() {
        use rand::{Rng, SeedableRng};
        let fr = default_fr();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = [0.8, -0.2];
        for _ in 0..10_000 {
            let p: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let in_a = (p[0].powi(2) + p[1].powi(2)).sqrt() <= 0.51 / (1.0 - 0.7 * p[1].atan2(p[0]).cos());
            let q: [f64; 2] = [p[0] + r[0], p[1] + r[1]];
            let in_b = (q[0].powi(2) + q[1].powi(2)).sqrt() <= 0.51 / (1.0 - 0.7 * q[1].atan2(q[0]).cos());
            assert_eq!(fr.in_g_region(p, r), in_a && !in_b);
        }
    }

    #[test]
    fn default_perimeter() {
        // Ramanujan's second approximation for a = 1, b = sqrt(0.51)
        let (a, b) = (1.0f64, 0.51f64.sqrt());
        let h = ((a - b) / (a + b)).powi(2);
        let ram = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        let p = default_fr().perimeter(1 << 16);
        assert!((p - ram).abs() < 1e-6, "{p} vs {ram}");
        assert!((p - 5.4226).abs() < 1e-4);
    }

    fn lattice() -> ContourLattice {
        ContourLattice::for_box(1.7, 21)
    }

    #[test]
    fn location_independent_curves() {
        let rule = RoutingRule::new(Boundary::ellipse(1.0, 0.7).unwrap(), Potential::NegAbsTheta);
        let fr = ForwardingRegion::from_rule(&rule);
        let c = threshold_curve(0.0, PI / 2.0, &rule, &fr, &lattice(), 256).unwrap();
        assert!(c.is_empty());
        let c = threshold_curve(0.7, 0.7, &rule, &fr, &lattice(), 256).unwrap();
        assert!(c.is_empty());
        let c = threshold_curve(PI / 2.0, 0.0, &rule, &fr, &lattice(), 256).unwrap();
        assert_eq!(c.kind, CurveKind::FrBoundary);
        assert!((c.total_length - 5.4226).abs() < 1e-3);
        assert!(c.total_length <= rule.m_b);
    }

    #[test]
    fn circle_speed_and_normal() {
        let rule = RoutingRule::new(Boundary::circle(1.0).unwrap(), Potential::NegAbsTheta);
        let fr = ForwardingRegion::from_rule(&rule);
        let c = boundary_curve(PI / 2.0, 0.0, &fr, 64);
        for s in [0.0, 0.1, 0.37, 0.5, 0.99] {
            let (speed, t) = c.speed_and_normal(s).unwrap();
            assert!((speed - TAU).abs() < 1e-12);
            let p = c.point(s).unwrap();
            assert!((t[0] - p[0]).abs() < 1e-12 && (t[1] - p[1]).abs() < 1e-12);
        }
        assert!(c.speed_and_normal(1.5).is_err());
    }

    #[test]
    fn ellipse_speed_at_quarter_turn() {
        // s = 3/4 is φ = π/2; compare with a finite difference of the boundary point
        let fr = default_fr();
        let c = boundary_curve(PI / 2.0, 0.0, &fr, 64);
        let (speed, t) = c.speed_and_normal(0.75).unwrap();
        let h = 1e-6;
        let p0 = c.point(0.75 - h).unwrap();
        let p1 = c.point(0.75 + h).unwrap();
        let fd = (p1[0] - p0[0]).hypot(p1[1] - p0[1]) / (2.0 * h);
        assert!((speed - fd).abs() < 1e-5);
        assert!((speed - 3.9114986).abs() < 1e-6, "{speed}");
        assert!((norm(t) - 1.0).abs() < 1e-12);
        let c0 = c.speed_and_normal(0.5).unwrap().1;
        assert!((c0[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flux_integrates_projected_width() {
        // ∫ max(0, w·t)|b'| ds over a closed convex curve is |w| times the width of F across w
        let fr = ForwardingRegion::new(Boundary::circle(1.0).unwrap());
        let c = boundary_curve(1.0, 0.0, &fr, 256);
        let w = [-2.0, 0.0];
        let total: f64 = c.interval_flux(w).iter().sum();
        // the polyline has vertices at φ = ±π/2, so its height across w is exactly 2
        assert!((total - 4.0).abs() < 1e-9, "{total}");
        let c2 = boundary_curve(1.0, 0.0, &fr, 512);
        let total2: f64 = c2.interval_flux(w).iter().sum();
        assert!((total - total2).abs() < 1e-12);
    }

    #[test]
    fn exp_progress_contour_is_clipped_ellipse() {
        let rule = RoutingRule::new(
            Boundary::ellipse(1.0, 0.7).unwrap(),
            Potential::ExpProgress { kappa: 1.0 },
        );
        let fr = ForwardingRegion::from_rule(&rule);
        // K = F ∩ {x > ln((π-|θ|)/(π-|θ'|))/κ}
        let theta = 0.3;
        let theta_p = 0.0;
        let c = threshold_curve(theta, theta_p, &rule, &fr, &lattice(), 256).unwrap();
        assert_eq!(c.kind, CurveKind::Contour);
        assert_eq!(c.loops, 1);
        let x_cut = ((PI - theta) / PI).ln();
        let h = 2.0 * 1.7 / 21.0;
        for seg in &c.segments {
            assert!(seg.p0[0] >= x_cut - 0.02);
            assert!(fr.contains(seg.p0) || norm(seg.p0) < 1.7 + h);
        }
        assert!(c.segments.iter().any(|g| (g.p0[0] - x_cut).abs() < 0.02));
        assert!(c.warnings.is_empty(), "{:?}", c.warnings);
        // normals point toward lower values of min(U(θ', r) - U(θ, 0), b(φ) - |r|)
        let u0 = rule.potential.eval(theta, [0.0, 0.0]);
        let h =
            |p: [f64; 2]| (rule.potential.eval(theta_p, p) - u0).min(fr.boundary().radius(p[1].atan2(p[0])) - norm(p));
        for sample in &c.samples {
            let (p, n) = (sample.point, sample.normal);
            let d = 1e-3;
            assert!(h([p[0] + d * n[0], p[1] + d * n[1]]) < h([p[0] - d * n[0], p[1] - d * n[1]]));
        }
    }
}
