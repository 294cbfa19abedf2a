//! Gaussian kernel density estimation of posterior samples.

use super::InverseError;
use crate::vecops::quantile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule: `0.9 min(std, IQR/1.34) n^{-1/5}`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

const GRID_POINTS: usize = 512;

/// Gaussian KDE on a 512-point grid spanning the sample range plus
/// three bandwidths each side. Automatic bandwidth needs at least 10
/// samples; a fixed bandwidth works from a single point.
pub fn kde(samples: &[f64], bandwidth: Bandwidth) -> Result<DensityCurve, InverseError> {
    let h = match bandwidth {
        Bandwidth::Fixed(h) => {
            if samples.is_empty() {
                return Err(InverseError::InsufficientSamples { needed: 1, got: 0 });
            }
            if !(h > 0.0) {
                return Err(InverseError::InvalidConfig(format!("bandwidth must be positive, got {h}")));
            }
            h
        }
        Bandwidth::Auto => {
            if samples.len() < 10 {
                return Err(InverseError::InsufficientSamples { needed: 10, got: samples.len() });
            }
            let std = crate::vecops::sample_std(samples);
            let iqr = quantile(samples, 0.75) - quantile(samples, 0.25);
            let spread = std.min(iqr / 1.34);
            let h = 0.9 * spread * (samples.len() as f64).powf(-0.2);
            if !(h > 0.0) {
                return Err(InverseError::InvalidConfig(
                    "samples have no spread; supply a fixed bandwidth".into(),
                ));
            }
            h
        }
    };

    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let inv_norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());

    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&g| {
            samples
                .iter()
                .map(|&s| {
                    let u = (g - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * inv_norm
        })
        .collect();

    Ok(DensityCurve { grid, values, bandwidth: h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn integrate(curve: &DensityCurve, f: impl Fn(f64, f64) -> f64) -> f64 {
        let step = curve.grid[1] - curve.grid[0];
        curve
            .grid
            .iter()
            .zip(&curve.values)
            .map(|(&g, &v)| f(g, v))
            .sum::<f64>()
            * step
    }

    #[test]
    fn single_point_fixed_bandwidth_is_a_unit_gaussian() {
        let curve = kde(&[2.0], Bandwidth::Fixed(1.0)).unwrap();
        assert_eq!(curve.bandwidth, 1.0);
        for (&g, &v) in curve.grid.iter().zip(&curve.values) {
            let want = (-0.5 * (g - 2.0) * (g - 2.0)).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn two_symmetric_points_centre_at_midpoint() {
        let curve = kde(&[-1.0, 1.0], Bandwidth::Fixed(0.5)).unwrap();
        let mass = integrate(&curve, |_, v| v);
        let mean = integrate(&curve, |g, v| g * v);
        // the grid stops 3 bandwidths out, truncating 2 Phi(-3) of mass
        assert!((mass - 1.0).abs() < 3e-3, "mass {mass}");
        assert!(mean.abs() < 1e-10, "mean {mean}");
        // symmetric grid implies symmetric values
        let n = curve.values.len();
        for i in 0..n / 2 {
            assert!((curve.values[i] - curve.values[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_normal_samples_recover_the_density() {
        let mut rng = RngStream::new(400, 0);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let curve = kde(&samples, Bandwidth::Auto).unwrap();
        let ise = integrate(&curve, |g, v| {
            let phi = (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt();
            (v - phi) * (v - phi)
        });
        assert!(ise < 0.01, "integrated squared error {ise}");
    }

    #[test]
    fn auto_bandwidth_needs_samples() {
        assert!(matches!(
            kde(&[1.0, 2.0], Bandwidth::Auto),
            Err(InverseError::InsufficientSamples { needed: 10, .. })
        ));
        assert!(matches!(
            kde(&[], Bandwidth::Fixed(1.0)),
            Err(InverseError::InsufficientSamples { .. })
        ));
        assert!(kde(&[1.0; 20], Bandwidth::Auto).is_err()); // zero spread
    }
}
