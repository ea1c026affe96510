//! Model quantities: node field, mobility, routing rule and transmission cost.

pub mod config;
pub mod density;
mod validate;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

pub use config::{CostSpec, ModelConfig, PotentialSpec, CONFIG_KEYS};
pub use density::{wrap_angle, DirectionDensity, DirectionKind};
pub use validate::{validate_rule, AssumptionCheck, ValidationReport};

use crate::error::{DtnError, Result};

/// Boundary function `b(φ)` of the forwarding region, in polar form around the carrier.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// `b(φ) = a(1-ε²)/(1-ε cos φ)`: an ellipse with one focus at the carrier.
    Ellipse { a: f64, eccentricity: f64 },
    /// Periodic piecewise-linear interpolation of `values` at `φ_k = -π + 2πk/n`.
    Tabulated { values: Vec<f64> },
}

impl Boundary {
    pub fn ellipse(a: f64, eccentricity: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(DtnError::invalid("a", "half-axis length must be finite and > 0"));
        }
        if !(0.0..1.0).contains(&eccentricity) {
            return Err(DtnError::invalid("eccentricity", "must lie in [0, 1)"));
        }
        Ok(Boundary::Ellipse { a, eccentricity })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Boundary::ellipse(radius, 0.0)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(DtnError::invalid("boundary", "need at least 3 samples"));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(DtnError::invalid("boundary", "samples must be finite and > 0"));
        }
        Ok(Boundary::Tabulated { values })
    }

    /// `b(φ)` for any angle (wrapped into `[-π, π)`).
    pub fn radius(&self, phi: f64) -> f64 {
        match self {
            Boundary::Ellipse { a, eccentricity: e } => a * (1.0 - e * e) / (1.0 - e * phi.cos()),
            Boundary::Tabulated { values } => {
                let n = values.len();
                let pos = (wrap_angle(phi) + PI) / TAU * n as f64;
                let k = (pos.floor() as usize).min(n - 1);
                let t = pos - k as f64;
                values[k] * (1.0 - t) + values[(k + 1) % n] * t
            }
        }
    }

    /// `db/dφ`: analytic for the ellipse, central difference otherwise.
    pub fn radius_derivative(&self, phi: f64) -> f64 {
        match self {
            Boundary::Ellipse { a, eccentricity: e } => {
                let den = 1.0 - e * phi.cos();
                -a * (1.0 - e * e) * e * phi.sin() / (den * den)
            }
            Boundary::Tabulated { .. } => {
                let h = TAU * 1e-6;
                (self.radius(phi + h) - self.radius(phi - h)) / (2.0 * h)
            }
        }
    }

    /// Length scale used for simulation step sizes: `a` for the ellipse, mean radius otherwise.
    pub fn scale(&self) -> f64 {
        match self {
            Boundary::Ellipse { a, .. } => *a,
            Boundary::Tabulated { values } => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    /// Largest `b(φ)`; exact for the ellipse.
    pub fn max_radius(&self) -> f64 {
        match self {
            Boundary::Ellipse { a, eccentricity } => a * (1.0 + eccentricity),
            Boundary::Tabulated { values } => values.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// `|F| = ½∫b(φ)²dφ`; closed form for the ellipse.
    pub fn area(&self) -> f64 {
        match self {
            Boundary::Ellipse { a, eccentricity: e } => PI * a * a * (1.0 - e * e).sqrt(),
            Boundary::Tabulated { .. } => {
                let n = 100_000;
                let h = TAU / n as f64;
                (0..n)
                    .map(|k| {
                        let b = self.radius(-PI + (k as f64 + 0.5) * h);
                        0.5 * b * b * h
                    })
                    .sum()
            }
        }
    }

    /// Speed `|d/ds b(φ(s))|` of the uniform-angle parametrization `φ = -π + 2πs`.
    pub fn speed(&self, phi: f64) -> f64 {
        let b = self.radius(phi);
        let db = self.radius_derivative(phi);
        TAU * (b * b + db * db).sqrt()
    }

    /// Outward unit normal at the boundary point with polar angle `φ`.
    pub fn outward_normal(&self, phi: f64) -> [f64; 2] {
        let b = self.radius(phi);
        let db = self.radius_derivative(phi);
        let (s, c) = phi.sin_cos();
        let nx = db * s + b * c;
        let ny = -db * c + b * s;
        let len = (nx * nx + ny * ny).sqrt();
        [nx / len, ny / len]
    }

    /// Max of [`Boundary::speed`] over a dense grid of angles.
    pub fn max_speed(&self) -> f64 {
        let n = 1 << 16;
        (0..n)
            .map(|k| self.speed(-PI + TAU * k as f64 / n as f64))
            .fold(0.0, f64::max)
    }
}

/// Potential `U(θ, r)` ranking candidate carriers.
#[derive(Clone)]
pub enum Potential {
    /// `U = -|θ|`.
    NegAbsTheta,
    /// `U = (π - |θ|)·exp(κx)`: prefers good directions, then nodes farther ahead.
    ExpProgress { kappa: f64 },
    /// User-supplied potential. It must be evaluable on the whole plane, not only on `F`.
    Custom {
        name: String,
        location_independent: bool,
        f: Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::NegAbsTheta => write!(f, "NegAbsTheta"),
            Potential::ExpProgress { kappa } => write!(f, "ExpProgress {{ kappa: {kappa} }}"),
            Potential::Custom {
                name,
                location_independent,
                ..
            } => {
                write!(
                    f,
                    "Custom {{ name: {name:?}, location_independent: {location_independent} }}"
                )
            }
        }
    }
}

impl Potential {
    pub fn custom<F>(name: impl Into<String>, location_independent: bool, f: F) -> Self
    where
        F: Fn(f64, [f64; 2]) -> f64 + Send + Sync + 'static,
    {
        Potential::Custom {
            name: name.into(),
            location_independent,
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, theta: f64, r: [f64; 2]) -> f64 {
        match self {
            Potential::NegAbsTheta => -theta.abs(),
            Potential::ExpProgress { kappa } => (PI - theta.abs()) * (kappa * r[0]).exp(),
            Potential::Custom { f, .. } => f(theta, r),
        }
    }

    pub fn location_independent(&self) -> bool {
        match self {
            Potential::NegAbsTheta => true,
            Potential::ExpProgress { kappa } => *kappa == 0.0,
            Potential::Custom {
                location_independent, ..
            } => *location_independent,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Potential::NegAbsTheta => "neg_abs_theta".into(),
            Potential::ExpProgress { kappa } => format!("exp_progress(kappa={kappa})"),
            Potential::Custom { name, .. } => name.clone(),
        }
    }
}

/// Transmission cost `C(r)` as a function of the hop displacement.
#[derive(Debug, Clone, PartialEq)]
pub enum CostFunction {
    /// `|r|²`.
    Quadratic,
    /// `|r|^α`.
    Power { exponent: f64 },
    /// Piecewise-constant in `|r|` on equal bins over `[0, max_radius]`; clamps beyond.
    Radial { max_radius: f64, values: Vec<f64> },
}

impl CostFunction {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return Err(DtnError::invalid("cost", "exponent must be finite and >= 0"));
        }
        Ok(CostFunction::Power { exponent })
    }

    pub fn radial(max_radius: f64, values: Vec<f64>) -> Result<Self> {
        if !(max_radius > 0.0) || values.is_empty() {
            return Err(DtnError::invalid(
                "cost",
                "radial table needs max_radius > 0 and values",
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DtnError::invalid("cost", "table values must be finite and >= 0"));
        }
        Ok(CostFunction::Radial { max_radius, values })
    }

    #[inline]
    pub fn eval(&self, r: [f64; 2]) -> f64 {
        let d2 = r[0] * r[0] + r[1] * r[1];
        match self {
            CostFunction::Quadratic => d2,
            CostFunction::Power { exponent } => d2.sqrt().powf(*exponent),
            CostFunction::Radial { max_radius, values } => {
                let n = values.len();
                let k = ((d2.sqrt() / max_radius * n as f64) as usize).min(n - 1);
                values[k]
            }
        }
    }
}

/// Forwarding region plus potential, with the constants derived from them.
#[derive(Debug, Clone)]
pub struct RoutingRule {
    pub boundary: Boundary,
    pub potential: Potential,
    /// Bound on `|b'(s)|` over all threshold curves.
    pub m_b: f64,
    /// `U(-π, r)`, constant over `F` for admissible potentials.
    pub potential_floor_k: f64,
}

impl RoutingRule {
    pub fn new(boundary: Boundary, potential: Potential) -> Self {
        // Every threshold region is a convex subset of F, so its perimeter is at most
        // the FR perimeter, which the maximum boundary speed already dominates.
        let m_b = boundary.max_speed();
        let potential_floor_k = potential.eval(-PI, [0.0, 0.0]);
        RoutingRule {
            boundary,
            potential,
            m_b,
            potential_floor_k,
        }
    }

    pub fn location_independent(&self) -> bool {
        self.potential.location_independent()
    }
}

/// All physical and protocol quantities of the network model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub lambda: f64,
    pub v0: f64,
    pub r0: f64,
    pub direction_density: DirectionDensity,
    pub cost: CostFunction,
    pub rule: RoutingRule,
}

impl Default for ModelParams {
    fn default() -> Self {
        default_params()
    }
}

/// λ = v0 = r0 = 1, uniform directions, `|r|²` cost, ellipse `a = 1, ε = 0.7`, `U = -|θ|`.
pub fn default_params() -> ModelParams {
    ModelParams {
        lambda: 1.0,
        v0: 1.0,
        r0: 1.0,
        direction_density: DirectionDensity::uniform(),
        cost: CostFunction::Quadratic,
        rule: RoutingRule::new(
            Boundary::Ellipse {
                a: 1.0,
                eccentricity: 0.7,
            },
            Potential::NegAbsTheta,
        ),
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("v0", self.v0), ("r0", self.r0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DtnError::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let n = 10_000;
        let h = TAU / n as f64;
        let d = &self.direction_density;
        let total: f64 = (0..n)
            .map(|k| {
                let x0 = -PI + k as f64 * h;
                // the right endpoint π wraps to -π, which carries the same value on a periodic density
                0.5 * (d.value(x0) + d.value(x0 + h)) * h
            })
            .sum();
        let exact = d.cdf(PI);
        if (exact - 1.0).abs() > 1e-9 || (total - 1.0).abs() > 5e-3 {
            return Err(DtnError::invalid(
                "direction_density",
                format!("integrates to {total} (cdf {exact}), expected 1"),
            ));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_speed(mut self, v0: f64) -> Self {
        self.v0 = v0;
        self
    }

    pub fn with_turn_rate(mut self, r0: f64) -> Self {
        self.r0 = r0;
        self
    }

    pub fn with_density(mut self, d: DirectionDensity) -> Self {
        self.direction_density = d;
        self
    }

    pub fn with_boundary(mut self, b: Boundary) -> Self {
        self.rule = RoutingRule::new(b, self.rule.potential.clone());
        self
    }

    pub fn with_potential(mut self, p: Potential) -> Self {
        self.rule = RoutingRule::new(self.rule.boundary.clone(), p);
        self
    }

    pub fn with_cost(mut self, c: CostFunction) -> Self {
        self.cost = c;
        self
    }
}
