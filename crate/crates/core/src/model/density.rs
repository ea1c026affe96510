use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{DtnError, Result};

/// Family of the node travel-direction density on `[-π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionKind {
    Uniform,
    /// Constant `1/(4Θ_w)` on the four windows `|x - kπ/2| < Θ_w/2`, zero elsewhere.
    FourWindow {
        theta_w: f64,
    },
    /// Piecewise-constant on `bins.len()` equal bins covering `[-π, π)`.
    Tabulated {
        bins: Vec<f64>,
    },
}

/// Direction density `f_D` together with its positive lower bound on the support.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionDensity {
    kind: DirectionKind,
    epsilon_d: f64,
}

impl DirectionDensity {
    pub fn uniform() -> Self {
        DirectionDensity {
            kind: DirectionKind::Uniform,
            epsilon_d: 1.0 / TAU,
        }
    }

    pub fn four_window(theta_w: f64) -> Result<Self> {
        if !(theta_w > 0.0 && theta_w <= FRAC_PI_2 + 1e-15) {
            return Err(DtnError::invalid("theta_w", "window width must lie in (0, π/2]"));
        }
        let theta_w = theta_w.min(FRAC_PI_2);
        Ok(DirectionDensity {
            kind: DirectionKind::FourWindow { theta_w },
            epsilon_d: 1.0 / (4.0 * theta_w),
        })
    }

    /// Tabulated density; `bins` are rescaled to unit mass. Every positive bin
    /// must stay at or above `epsilon_d` after rescaling.
    pub fn tabulated(bins: Vec<f64>, epsilon_d: f64) -> Result<Self> {
        if bins.is_empty() {
            return Err(DtnError::invalid("direction_density", "no bins"));
        }
        if bins.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DtnError::invalid("direction_density", "bins must be finite and >= 0"));
        }
        let width = TAU / bins.len() as f64;
        let mass: f64 = bins.iter().sum::<f64>() * width;
        if mass <= 0.0 {
            return Err(DtnError::invalid("direction_density", "zero total mass"));
        }
        let bins: Vec<f64> = bins.iter().map(|v| v / mass).collect();
        if !(epsilon_d > 0.0) {
            return Err(DtnError::invalid("epsilon_d", "must be strictly positive"));
        }
        if bins.iter().any(|&v| v > 0.0 && v < epsilon_d) {
            return Err(DtnError::invalid(
                "direction_density",
                "density takes values in (0, epsilon_d)",
            ));
        }
        Ok(DirectionDensity {
            kind: DirectionKind::Tabulated { bins },
            epsilon_d,
        })
    }

    pub fn kind(&self) -> &DirectionKind {
        &self.kind
    }

    pub fn epsilon_d(&self) -> f64 {
        self.epsilon_d
    }

    /// Window width for the built-in families (`π/2` for the uniform density).
    pub fn theta_w(&self) -> Option<f64> {
        match self.kind {
            DirectionKind::Uniform => Some(FRAC_PI_2),
            DirectionKind::FourWindow { theta_w } => Some(theta_w),
            DirectionKind::Tabulated { .. } => None,
        }
    }

    /// `f_D(x)` for `x ∈ [-π, π)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(-PI..PI).contains(&x) {
            return Err(DtnError::Domain {
                what: "direction",
                value: x,
                expected: "[-π, π)",
            });
        }
        Ok(self.value(x))
    }

    /// Density at any angle; the argument is wrapped into `[-π, π)`.
    pub fn value(&self, x: f64) -> f64 {
        let x = wrap_angle(x);
        match &self.kind {
            DirectionKind::Uniform => 1.0 / TAU,
            DirectionKind::FourWindow { theta_w } => {
                let k = (x / FRAC_PI_2).round();
                if (x - k * FRAC_PI_2).abs() < theta_w / 2.0 {
                    1.0 / (4.0 * theta_w)
                } else {
                    0.0
                }
            }
            DirectionKind::Tabulated { bins } => {
                let width = TAU / bins.len() as f64;
                let idx = (((x + PI) / width) as usize).min(bins.len() - 1);
                bins[idx]
            }
        }
    }

    /// `∫_{-π}^{x} f_D`, exact for every family, for `x ∈ [-π, π]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(-PI, PI);
        match &self.kind {
            DirectionKind::Uniform => (x + PI) / TAU,
            DirectionKind::FourWindow { theta_w } => {
                let h = theta_w / 2.0;
                let windows = [
                    (-PI, -PI + h),
                    (-FRAC_PI_2 - h, -FRAC_PI_2 + h),
                    (-h, h),
                    (FRAC_PI_2 - h, FRAC_PI_2 + h),
                    (PI - h, PI),
                ];
                let covered: f64 = windows.iter().map(|&(lo, hi)| (x.min(hi) - lo).max(0.0)).sum();
                covered / (4.0 * theta_w)
            }
            DirectionKind::Tabulated { bins } => {
                let width = TAU / bins.len() as f64;
                let pos = (x + PI) / width;
                let full = (pos.floor() as usize).min(bins.len());
                let mut acc: f64 = bins[..full].iter().sum::<f64>() * width;
                if full < bins.len() {
                    acc += bins[full] * (pos - full as f64) * width;
                }
                acc
            }
        }
    }

    /// Probability mass on `[lo, hi]` (with `-π <= lo <= hi <= π`).
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// True when `f_D(x) = f_D(-x)` for every `x`.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            DirectionKind::Uniform | DirectionKind::FourWindow { .. } => true,
            DirectionKind::Tabulated { bins } => {
                let n = bins.len();
                (0..n).all(|i| (bins[i] - bins[n - 1 - i]).abs() <= 1e-12 * bins[i].abs().max(1.0))
            }
        }
    }

    /// Inverse-CDF sample from a uniform variate `u ∈ [0, 1)`.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        match &self.kind {
            DirectionKind::Uniform => -PI + TAU * u,
            _ => {
                // bisection on the exact cdf; 60 halvings reach f64 resolution on [-π, π]
                let (mut lo, mut hi) = (-PI, PI);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let x = 0.5 * (lo + hi);
                if x >= PI {
                    -PI
                } else {
                    x
                }
            }
        }
    }
}

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_window_values() {
        let d = DirectionDensity::four_window(PI / 4.0).unwrap();
        assert!((d.eval(0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert_eq!(d.eval(PI / 4.0).unwrap(), 0.0);
        assert!((d.eval(PI / 2.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((d.eval(-PI).unwrap() - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn uniform_value() {
        let d = DirectionDensity::uniform();
        assert!((d.eval(1.3).unwrap() - 1.0 / TAU).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_out_of_range() {
        let d = DirectionDensity::uniform();
        assert!(d.eval(PI).is_err());
        assert!(d.eval(-3.2).is_err());
        assert!(d.eval(-PI).is_ok());
    }

    #[test]
    fn window_width_is_checked() {
        assert!(DirectionDensity::four_window(0.0).is_err());
        assert!(DirectionDensity::four_window(2.0).is_err());
        assert!(DirectionDensity::four_window(FRAC_PI_2).is_ok());
    }

    #[test]
    fn half_pi_window_is_uniform() {
        let d = DirectionDensity::four_window(FRAC_PI_2).unwrap();
        for k in 0..50 {
            let x = -PI + 0.1 + 0.12 * k as f64;
            if (x.abs() - PI / 4.0).abs() > 1e-9 && (x.abs() - 3.0 * PI / 4.0).abs() > 1e-9 {
                assert!((d.value(x) - 1.0 / TAU).abs() < 1e-15);
            }
        }
        assert!((d.cdf(0.3) - (0.3 + PI) / TAU).abs() < 1e-14);
    }

    #[test]
    fn cdf_is_total_mass_one() {
        for d in [
            DirectionDensity::uniform(),
            DirectionDensity::four_window(0.3).unwrap(),
            DirectionDensity::tabulated(vec![1.0, 2.0, 3.0, 2.0], 0.01).unwrap(),
        ] {
            assert!((d.cdf(PI) - 1.0).abs() < 1e-12);
            assert_eq!(d.cdf(-PI), 0.0);
        }
    }

    #[test]
    fn tabulated_rejects_small_values() {
        assert!(DirectionDensity::tabulated(vec![1.0, 1e-6, 1.0], 0.05).is_err());
        assert!(DirectionDensity::tabulated(vec![1.0, 0.0, 1.0], 0.05).is_ok());
    }

    #[test]
    fn sampling_inverts_cdf() {
        let d = DirectionDensity::four_window(0.5).unwrap();
        for u in [0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = d.sample_from_uniform(u);
            assert!((d.cdf(x) - u).abs() < 1e-9);
            assert!(d.value(x) > 0.0);
        }
    }

    #[test]
    fn wrap() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.5), 0.5);
    }
}
