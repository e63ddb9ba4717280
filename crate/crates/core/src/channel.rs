//! Line-of-sight Lambertian channel between a ceiling access point and a
//! user photodetector.
//!
//! Orientation is fixed: LEDs emit straight down and photodetectors face
//! straight up, so the irradiance and incidence angles coincide. Both angles
//! are still carried separately in [`LinkGeometry`].

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the room, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// How physical channel gains enter the rate model.
///
/// `Normalized` multiplies gains by 10⁴, i.e. a gain written as
/// `0.293 × 10⁻⁴` is used as `0.293`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainScale {
    Physical,
    #[default]
    Normalized,
}

impl GainScale {
    pub fn factor(self) -> f64 {
        match self {
            GainScale::Physical => 1.0,
            GainScale::Normalized => 1e4,
        }
    }
}

/// Lambertian emission order for a transmitter half-power semiangle.
pub fn lambertian_order(half_power_semiangle_rad: f64) -> Result<f64> {
    if !(half_power_semiangle_rad > 0.0 && half_power_semiangle_rad < FRAC_PI_2) {
        return Err(Error::domain(format!(
            "half-power semiangle {half_power_semiangle_rad} rad outside (0, pi/2)"
        )));
    }
    Ok(-LN_2 / half_power_semiangle_rad.cos().ln())
}

/// Transmitter and receiver optics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    detector_area_m2: f64,
    filter_gain: f64,
    refractive_index: f64,
    fov_semiangle_rad: f64,
    half_power_semiangle_rad: f64,
    lambertian_order: f64,
}

impl ChannelParams {
    pub fn new(
        detector_area_m2: f64,
        filter_gain: f64,
        refractive_index: f64,
        fov_semiangle_rad: f64,
        half_power_semiangle_rad: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("detector_area_m2", detector_area_m2),
            ("filter_gain", filter_gain),
            ("refractive_index", refractive_index),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(fov_semiangle_rad > 0.0 && fov_semiangle_rad < FRAC_PI_2) {
            return Err(Error::domain(format!(
                "FOV semiangle {fov_semiangle_rad} rad outside (0, pi/2)"
            )));
        }
        let lambertian_order = lambertian_order(half_power_semiangle_rad)?;
        Ok(Self {
            detector_area_m2,
            filter_gain,
            refractive_index,
            fov_semiangle_rad,
            half_power_semiangle_rad,
            lambertian_order,
        })
    }

    /// The simulation defaults: 1 cm² detector, unit filter gain, n = 1.5,
    /// 32° FOV and 60° half-power semiangle.
    pub fn table_defaults() -> Self {
        Self::new(1e-4, 1.0, 1.5, 32f64.to_radians(), 60f64.to_radians())
            .expect("default optics are valid")
    }

    pub fn detector_area_m2(&self) -> f64 {
        self.detector_area_m2
    }
    pub fn filter_gain(&self) -> f64 {
        self.filter_gain
    }
    pub fn refractive_index(&self) -> f64 {
        self.refractive_index
    }
    pub fn fov_semiangle_rad(&self) -> f64 {
        self.fov_semiangle_rad
    }
    pub fn half_power_semiangle_rad(&self) -> f64 {
        self.half_power_semiangle_rad
    }
    pub fn lambertian_order(&self) -> f64 {
        self.lambertian_order
    }
}

/// Gain of the non-imaging concentrator; zero outside the field of view.
pub fn concentrator_gain(incidence_angle_rad: f64, params: &ChannelParams) -> Result<f64> {
    if !(0.0..=FRAC_PI_2).contains(&incidence_angle_rad) {
        return Err(Error::domain(format!(
            "incidence angle {incidence_angle_rad} rad outside [0, pi/2]"
        )));
    }
    if incidence_angle_rad <= params.fov_semiangle_rad {
        let n = params.refractive_index;
        Ok(n * n / params.fov_semiangle_rad.sin().powi(2))
    } else {
        Ok(0.0)
    }
}

/// Geometry of one access-point to user link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub vap_position: Position,
    pub user_position: Position,
    distance_m: f64,
    irradiance_angle_rad: f64,
    incidence_angle_rad: f64,
}

impl LinkGeometry {
    pub fn new(vap_position: Position, user_position: Position) -> Result<Self> {
        let distance_m = vap_position.distance(&user_position);
        if !(distance_m > 0.0) {
            return Err(Error::domain("access point and user coincide"));
        }
        let drop = vap_position.z - user_position.z;
        if !(drop > 0.0) {
            return Err(Error::domain(format!(
                "access point (z = {}) must be above the user (z = {})",
                vap_position.z, user_position.z
            )));
        }
        let angle = (drop / distance_m).clamp(-1.0, 1.0).acos();
        Ok(Self {
            vap_position,
            user_position,
            distance_m,
            irradiance_angle_rad: angle,
            incidence_angle_rad: angle,
        })
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }
    pub fn irradiance_angle_rad(&self) -> f64 {
        self.irradiance_angle_rad
    }
    pub fn incidence_angle_rad(&self) -> f64 {
        self.incidence_angle_rad
    }
}

/// DC gain of the LOS optical link.
pub fn channel_gain(geom: &LinkGeometry, params: &ChannelParams) -> Result<f64> {
    let d = geom.distance_m;
    if !(d > 0.0) {
        return Err(Error::domain("zero link distance"));
    }
    let psi = geom.incidence_angle_rad;
    let g = concentrator_gain(psi, params)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let m = params.lambertian_order;
    let spread = params.detector_area_m2 * (m + 1.0) / (2.0 * PI * d * d);
    Ok(spread * geom.irradiance_angle_rad.cos().powf(m) * params.filter_gain * g * psi.cos())
}
