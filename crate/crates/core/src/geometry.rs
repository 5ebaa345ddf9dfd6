//! Cell geometry and large-scale channel gains.
//!
//! UEs are dropped uniformly over the annulus between the minimum distance
//! and the cell radius. Gains follow a pure power law normalised so that a
//! UE at the cell edge sees 0 dB SNR at unit transmit power.

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::DomainError;

/// Geometry and path-loss parameters.
///
/// Built from a validated [`SystemConfig`], or directly for degenerate
/// settings (for example a zero-width annulus) that validation rejects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub cell_radius: f64,
    pub min_distance: f64,
    pub pathloss_exp: f64,
    pub noise_var: f64,
}

impl From<&SystemConfig> for CellGeometry {
    fn from(cfg: &SystemConfig) -> Self {
        Self {
            cell_radius: cfg.cell_radius,
            min_distance: cfg.min_distance,
            pathloss_exp: cfg.pathloss_exp,
            noise_var: cfg.noise_var,
        }
    }
}

/// One UE's placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeRecord {
    pub distance: f64,
    pub large_scale_gain: f64,
}

impl CellGeometry {
    /// Distance drawn uniformly over the annulus area, by inverting
    /// `F(r) = (r² - r_min²) / (R² - r_min²)`.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lo2 = self.min_distance * self.min_distance;
        let hi2 = self.cell_radius * self.cell_radius;
        if hi2 <= lo2 {
            return self.cell_radius;
        }
        let u: f64 = rng.random();
        (lo2 + u * (hi2 - lo2)).sqrt().clamp(self.min_distance, self.cell_radius)
    }

    /// `sigma2 * (R / d)^gamma`.
    pub fn large_scale_gain(&self, distance: f64) -> Result<f64, DomainError> {
        if !(distance >= self.min_distance && distance <= self.cell_radius) {
            return Err(DomainError {
                what: "distance",
                value: distance,
                lo: self.min_distance,
                hi: self.cell_radius,
            });
        }
        Ok(self.noise_var * (self.cell_radius / distance).powf(self.pathloss_exp))
    }

    pub fn sample_ue<R: Rng + ?Sized>(&self, rng: &mut R) -> UeRecord {
        let distance = self.sample_position(rng);
        let large_scale_gain = self
            .large_scale_gain(distance)
            .expect("sampled distance lies inside the annulus");
        UeRecord {
            distance,
            large_scale_gain,
        }
    }
}
