//! Deterministic power-budget losses of an underwater optical path and the
//! stochastic fading applied on top of them.
//!
//! All losses are positive dB. The spot is a uniform ("top-hat") disc whose
//! diameter grows linearly with distance; collected power is an area ratio.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// dB per neper of optical power: 10 / ln(10).
pub const DB_PER_NEPER: f64 = std::f64::consts::LOG10_E * 10.0;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be non-negative, got {0} m")]
    NegativeDistance(f64),
    #[error("invalid water optics: {0}")]
    Water(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("geometry constant k is singular at zero distance")]
    SingularK,
    #[error("reflectance must lie in [0, 1], got {0}")]
    Reflectance(f64),
    #[error("invalid fading: {0}")]
    Fading(String),
    #[error("no light reaches the detector ({0})")]
    LinkDark(&'static str),
}

/// Diffuse attenuation coefficient, kept in both natural and dB units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterOptics {
    c_per_m: f64,
    c_db_per_m: f64,
}

impl WaterOptics {
    /// Accepts a rounded pair as long as the two forms agree to within 1%.
    pub fn new(c_per_m: f64, c_db_per_m: f64) -> Result<Self, ChannelError> {
        if !(c_per_m >= 0.0 && c_db_per_m >= 0.0) || !c_per_m.is_finite() || !c_db_per_m.is_finite() {
            return Err(ChannelError::Water(format!("coefficients must be finite and >= 0 ({c_per_m}, {c_db_per_m})")));
        }
        let implied = c_per_m * DB_PER_NEPER;
        if (implied - c_db_per_m).abs() > 0.01 * c_db_per_m.max(implied) {
            return Err(ChannelError::Water(format!(
                "{c_per_m}/m is {implied:.4} dB/m, inconsistent with {c_db_per_m} dB/m"
            )));
        }
        Ok(Self { c_per_m, c_db_per_m })
    }

    pub fn from_per_m(c_per_m: f64) -> Result<Self, ChannelError> {
        Self::new(c_per_m, c_per_m * DB_PER_NEPER)
    }

    pub fn from_db_per_m(c_db_per_m: f64) -> Result<Self, ChannelError> {
        Self::new(c_db_per_m / DB_PER_NEPER, c_db_per_m)
    }

    /// Deep-sea sample at 525 nm: 0.082 /m, 0.358 dB/m.
    pub fn deep_sea_green() -> Self {
        Self { c_per_m: 0.082, c_db_per_m: 0.358 }
    }

    /// Deep-sea sample at 450 nm: 0.069 /m, 0.298 dB/m.
    pub fn deep_sea_blue() -> Self {
        Self { c_per_m: 0.069, c_db_per_m: 0.298 }
    }

    pub fn c_per_m(&self) -> f64 {
        self.c_per_m
    }

    pub fn c_db_per_m(&self) -> f64 {
        self.c_db_per_m
    }
}

/// Transmitter/receiver geometry of one directed path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub distance_m: f64,
    pub half_angle_deg: f64,
    pub tx_exit_diameter_m: f64,
    pub rx_aperture_m: f64,
    pub pointing_offset_m: f64,
    /// Calibrated constant of the inverse-square geometric loss (m²). When
    /// set it replaces the aperture/divergence model.
    pub k_override: Option<f64>,
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: String| Err(ChannelError::Geometry(msg));
        if !(self.distance_m >= 0.0) || !self.distance_m.is_finite() {
            return bad(format!("distance_m = {}", self.distance_m));
        }
        if !(self.half_angle_deg > 0.0 && self.half_angle_deg < 90.0) {
            return bad(format!("half_angle_deg = {} not in (0, 90)", self.half_angle_deg));
        }
        if !(self.tx_exit_diameter_m > 0.0) || !(self.rx_aperture_m > 0.0) {
            return bad("apertures must be > 0".into());
        }
        if !(self.pointing_offset_m >= 0.0) {
            return bad(format!("pointing_offset_m = {}", self.pointing_offset_m));
        }
        if let Some(k) = self.k_override {
            if !(k > 0.0) || !k.is_finite() {
                return bad(format!("k_override = {k}"));
            }
        }
        Ok(())
    }

    pub fn at_distance(&self, distance_m: f64) -> Self {
        Self { distance_m, ..*self }
    }

    /// Far-field equivalent of the aperture/divergence model as an
    /// inverse-square constant: (aperture / (2 tan φ))².
    pub fn far_field_k(&self) -> f64 {
        let r = self.rx_aperture_m / (2.0 * self.half_angle_deg.to_radians().tan());
        r * r
    }
}

/// Seabed-bounce path used in place of the direct line of sight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlosPath {
    pub reflectance: f64,
    pub unfolded_distance_m: f64,
}

/// A loss that is either a number of dB or total darkness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossDb {
    Finite(f64),
    Dark,
}

impl LossDb {
    pub fn finite(self) -> Option<f64> {
        match self {
            LossDb::Finite(v) => Some(v),
            LossDb::Dark => None,
        }
    }

    pub fn is_dark(self) -> bool {
        matches!(self, LossDb::Dark)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub attenuation_db: f64,
    pub geometric_db: f64,
    pub pointing_db: f64,
    pub nlos_excess_db: f64,
    pub fading_db: f64,
    pub total_db: f64,
}

pub fn attenuation_db(water: &WaterOptics, distance_m: f64) -> Result<f64, ChannelError> {
    if !(distance_m >= 0.0) {
        return Err(ChannelError::NegativeDistance(distance_m));
    }
    Ok(water.c_db_per_m * distance_m)
}

pub fn spot_diameter_m(g: &LinkGeometry) -> f64 {
    g.tx_exit_diameter_m + 2.0 * g.distance_m * g.half_angle_deg.to_radians().tan()
}

pub fn geometric_loss_db(g: &LinkGeometry) -> Result<f64, ChannelError> {
    g.validate()?;
    if let Some(k) = g.k_override {
        if g.distance_m == 0.0 {
            return Err(ChannelError::SingularK);
        }
        return Ok((10.0 * (g.distance_m * g.distance_m / k).log10()).max(0.0));
    }
    let ratio = g.rx_aperture_m / spot_diameter_m(g);
    let fraction = (ratio * ratio).min(1.0);
    Ok(-10.0 * fraction.log10())
}

/// Area of the intersection of two discs with radii `r1`, `r2` whose centers
/// are `d` apart.
pub fn disc_overlap_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let small = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return std::f64::consts::PI * small * small;
    }
    let a1 = r1 * r1 * ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = r2 * r2 * ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    a1 + a2 - 0.5 * k.max(0.0).sqrt()
}

/// Overlap of the aperture and spot discs relative to the smaller of the two,
/// so that geometric × pointing gives the intercepted share of the spot.
pub fn pointing_overlap_fraction(g: &LinkGeometry) -> f64 {
    let spot_r = spot_diameter_m(g) / 2.0;
    let ap_r = g.rx_aperture_m / 2.0;
    let small = spot_r.min(ap_r);
    let area = disc_overlap_area(spot_r, ap_r, g.pointing_offset_m);
    (area / (std::f64::consts::PI * small * small)).clamp(0.0, 1.0)
}

pub fn pointing_loss_db(g: &LinkGeometry) -> Result<LossDb, ChannelError> {
    g.validate()?;
    let fraction = pointing_overlap_fraction(g);
    if fraction <= 0.0 {
        return Ok(LossDb::Dark);
    }
    Ok(LossDb::Finite(-10.0 * fraction.log10()))
}

/// Extra loss of a single Lambertian seabed bounce relative to the direct
/// path: the reflection penalty plus any geometric loss the longer unfolded
/// path adds over `los`.
pub fn nlos_excess_loss_db(
    reflectance: f64,
    unfolded: &LinkGeometry,
    los: &LinkGeometry,
) -> Result<LossDb, ChannelError> {
    if !(0.0..=1.0).contains(&reflectance) {
        return Err(ChannelError::Reflectance(reflectance));
    }
    if reflectance == 0.0 {
        return Ok(LossDb::Dark);
    }
    let extra_geo = (geometric_loss_db(unfolded)? - geometric_loss_db(los)?).max(0.0);
    Ok(LossDb::Finite(-10.0 * reflectance.log10() + extra_geo))
}

/// Sum of all loss terms for one path. With `nlos` present, water attenuation
/// and pointing are taken over the unfolded path.
pub fn total_loss_db(
    g: &LinkGeometry,
    water: &WaterOptics,
    nlos: Option<&NlosPath>,
    fading_db: f64,
) -> Result<LossBreakdown, ChannelError> {
    g.validate()?;
    let geometric_db = geometric_loss_db(g)?;
    let (path, nlos_excess_db) = match nlos {
        None => (*g, 0.0),
        Some(n) => {
            if !(n.unfolded_distance_m >= g.distance_m) {
                return Err(ChannelError::Geometry(format!(
                    "unfolded NLOS path {} m is shorter than the direct path {} m",
                    n.unfolded_distance_m, g.distance_m
                )));
            }
            let unfolded = g.at_distance(n.unfolded_distance_m);
            let excess = nlos_excess_loss_db(n.reflectance, &unfolded, g)?
                .finite()
                .ok_or(ChannelError::LinkDark("zero seabed reflectance"))?;
            (unfolded, excess)
        }
    };
    let attenuation_db = attenuation_db(water, path.distance_m)?;
    let pointing_db = pointing_loss_db(&path)?
        .finite()
        .ok_or(ChannelError::LinkDark("spot misses the aperture"))?;
    Ok(LossBreakdown {
        attenuation_db,
        geometric_db,
        pointing_db,
        nlos_excess_db,
        fading_db,
        total_db: attenuation_db + geometric_db + pointing_db + nlos_excess_db + fading_db,
    })
}

/// Log-normal fading with rare deep bursts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingSpec {
    pub sigma_db: f64,
    /// Chance that a given second contains a burst.
    pub burst_probability: f64,
    pub burst_depth_db: f64,
    /// Length of a burst. `None` means the burst covers the whole second.
    pub burst_duration_s: Option<f64>,
}

impl FadingSpec {
    pub const NONE: FadingSpec =
        FadingSpec { sigma_db: 0.0, burst_probability: 0.0, burst_depth_db: 0.0, burst_duration_s: None };

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.sigma_db >= 0.0) {
            return Err(ChannelError::Fading(format!("sigma_db = {}", self.sigma_db)));
        }
        if !(0.0..=1.0).contains(&self.burst_probability) {
            return Err(ChannelError::Fading(format!("burst_probability = {}", self.burst_probability)));
        }
        if !(self.burst_depth_db >= 0.0) {
            return Err(ChannelError::Fading(format!("burst_depth_db = {}", self.burst_depth_db)));
        }
        if let Some(d) = self.burst_duration_s {
            if !(d > 0.0 && d <= 1.0) {
                return Err(ChannelError::Fading(format!("burst_duration_s = {d} not in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// One draw of the fading process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FadeSample {
    /// Slow log-normal component, signed dB (positive = extra loss).
    pub gaussian_db: f64,
    pub burst: bool,
}

impl FadeSample {
    pub fn total_db(&self, f: &FadingSpec) -> f64 {
        self.gaussian_db + if self.burst { f.burst_depth_db } else { 0.0 }
    }
}

/// Draws one sample. Always consumes one normal and one uniform variate so
/// the stream position does not depend on the spec values.
pub fn sample_fading<R: Rng + ?Sized>(f: &FadingSpec, rng: &mut R) -> FadeSample {
    let z: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    FadeSample { gaussian_db: f.sigma_db * z, burst: u < f.burst_probability }
}

pub fn sample_fading_db<R: Rng + ?Sized>(f: &FadingSpec, rng: &mut R) -> f64 {
    sample_fading(f, rng).total_db(f)
}
