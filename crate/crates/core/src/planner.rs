//! Link-budget planning: margin at distance, maximum range with and without
//! geometric loss, loss-vs-distance curves, and recovery of the inverse-square
//! geometry constant from a known range.

use serde::{Deserialize, Serialize};

use crate::channel::{attenuation_db, geometric_loss_db, spot_diameter_m, ChannelError, LinkGeometry, WaterOptics};
use crate::link::LinkSpec;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("budget must be positive, got {0} dB")]
    Budget(f64),
    #[error("no root in [{lo} m, {hi} m]: loss goes from {f_lo:.6} to {f_hi:.6} dB against a {budget} dB budget")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64, budget: f64 },
    #[error("water attenuation alone ({attenuation_db:.3} dB) exceeds the {budget_db} dB budget at {distance_m} m")]
    AttenuationExceedsBudget { distance_m: f64, attenuation_db: f64, budget_db: f64 },
    #[error("without geometric loss the range is unbounded in clear water (c = 0)")]
    Unbounded,
    #[error("curve needs z_min < z_max and at least 2 points")]
    CurveSpec,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    WithGeometry,
    WithoutGeometry,
}

/// Which geometric loss model produced a with-geometry result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryModel {
    None,
    Physical,
    CalibratedK,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSolution {
    pub max_distance_m: f64,
    pub residual_db: f64,
    pub mode: RangeMode,
    pub geometry_model: GeometryModel,
    pub k_used: Option<f64>,
    pub budget_db: f64,
}

/// Root of a continuous function with a sign change on `[lo, hi]`, found
/// by bisection until `|f| < f_tol` or the bracket stops shrinking.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, f_tol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() < f_tol || mid == lo || mid == hi {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Aligned path loss at `z` under `mode` (pointing ignored).
pub fn path_loss_db(water: &WaterOptics, geometry: &LinkGeometry, z: f64, mode: RangeMode) -> Result<f64, PlanError> {
    let att = attenuation_db(water, z)?;
    Ok(match mode {
        RangeMode::WithoutGeometry => att,
        RangeMode::WithGeometry => att + geometric_loss_db(&geometry.at_distance(z))?,
    })
}

pub fn link_margin_db(spec: &LinkSpec, z: f64) -> Result<f64, PlanError> {
    let loss = spec.loss_at_distance(z, 0.0)?;
    Ok(spec.budget_db - loss.total_db)
}

pub fn max_distance_m(
    budget_db: f64,
    water: &WaterOptics,
    geometry: &LinkGeometry,
    mode: RangeMode,
) -> Result<RangeSolution, PlanError> {
    if !(budget_db > 0.0) {
        return Err(PlanError::Budget(budget_db));
    }
    let c = water.c_db_per_m();
    let geometry_model = match mode {
        RangeMode::WithoutGeometry => GeometryModel::None,
        RangeMode::WithGeometry if geometry.k_override.is_some() => GeometryModel::CalibratedK,
        RangeMode::WithGeometry => GeometryModel::Physical,
    };
    let k_used = match geometry_model {
        GeometryModel::CalibratedK => geometry.k_override,
        _ => None,
    };
    if mode == RangeMode::WithoutGeometry {
        if c <= 0.0 {
            return Err(PlanError::Unbounded);
        }
        let z = budget_db / c;
        return Ok(RangeSolution {
            max_distance_m: z,
            residual_db: attenuation_db(water, z)? - budget_db,
            mode,
            geometry_model,
            k_used,
            budget_db,
        });
    }
    let lo = 1e-3;
    let mut hi = if c > 0.0 { budget_db / c + 1.0 } else { 1.0 };
    let f = |z: f64| path_loss_db(water, geometry, z, mode).map(|l| l - budget_db);
    if c <= 0.0 {
        // Geometric loss alone bounds the range; grow the bracket until it does.
        while f(hi)? < 0.0 && hi < 1e12 {
            hi *= 2.0;
        }
    }
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Err(PlanError::NoSignChange {
            lo,
            hi,
            f_lo: f_lo + budget_db,
            f_hi: f_hi + budget_db,
            budget: budget_db,
        });
    }
    // Inputs are validated above, so the closure cannot fail inside the search.
    let z = bisect(|z| f(z).unwrap_or(f64::NAN), lo, hi, 1e-9).ok_or(PlanError::NoSignChange {
        lo,
        hi,
        f_lo: f_lo + budget_db,
        f_hi: f_hi + budget_db,
        budget: budget_db,
    })?;
    Ok(RangeSolution { max_distance_m: z, residual_db: f(z)?, mode, geometry_model, k_used, budget_db })
}

/// Inverse-square constant that places the with-geometry range exactly at
/// `target_distance_m`: k = Z² · 10^(-(budget - c·Z)/10).
pub fn back_solve_k(budget_db: f64, c_db_per_m: f64, target_distance_m: f64) -> Result<f64, PlanError> {
    if !(budget_db > 0.0) {
        return Err(PlanError::Budget(budget_db));
    }
    let z = target_distance_m;
    let attenuation = c_db_per_m * z;
    if !(attenuation < budget_db) {
        return Err(PlanError::AttenuationExceedsBudget {
            distance_m: z,
            attenuation_db: attenuation,
            budget_db,
        });
    }
    Ok(z * z * 10f64.powf(-(budget_db - attenuation) / 10.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub z_m: f64,
    pub loss_db_with_geometry: f64,
    pub loss_db_without: f64,
    pub budget_db: f64,
}

/// Evenly spaced loss samples over `[z_min, z_max]` in both modes.
pub fn distance_curve(
    budget_db: f64,
    water: &WaterOptics,
    geometry: &LinkGeometry,
    z_min: f64,
    z_max: f64,
    n_points: usize,
) -> Result<Vec<CurvePoint>, PlanError> {
    if !(z_min < z_max) || n_points < 2 {
        return Err(PlanError::CurveSpec);
    }
    (0..n_points)
        .map(|i| {
            let z = if i == n_points - 1 {
                z_max
            } else {
                z_min + (z_max - z_min) * i as f64 / (n_points - 1) as f64
            };
            Ok(CurvePoint {
                z_m: z,
                loss_db_with_geometry: path_loss_db(water, geometry, z, RangeMode::WithGeometry)?,
                loss_db_without: path_loss_db(water, geometry, z, RangeMode::WithoutGeometry)?,
                budget_db,
            })
        })
        .collect()
}

/// Everything `plan` reports for one link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub budget_db: f64,
    pub c_db_per_m: f64,
    pub distance_m: f64,
    pub spot_diameter_m: f64,
    pub margin_db: f64,
    pub without_geometry: RangeSolution,
    pub physical_geometry: RangeSolution,
    /// Present when the spec carries a k or a target range was given.
    pub calibrated_geometry: Option<RangeSolution>,
    pub back_solved_k: Option<f64>,
}

/// Ranges in every geometry model. With `target_distance_m`, k is
/// back-solved from it and used for the calibrated range; otherwise the
/// spec's own k (if any) is used.
pub fn plan_link(spec: &LinkSpec, seed: u64, target_distance_m: Option<f64>) -> Result<PlanReport, PlanError> {
    let water = &spec.water;
    let physical = LinkGeometry { k_override: None, ..spec.geometry };
    let back_solved_k = target_distance_m
        .map(|z| back_solve_k(spec.budget_db, water.c_db_per_m(), z))
        .transpose()?;
    let calibrated_geometry = back_solved_k
        .or(spec.geometry.k_override)
        .map(|k| {
            let g = LinkGeometry { k_override: Some(k), ..spec.geometry };
            max_distance_m(spec.budget_db, water, &g, RangeMode::WithGeometry)
        })
        .transpose()?;
    Ok(PlanReport {
        name: spec.name.clone(),
        seed,
        config_hash: spec.config_hash(),
        budget_db: spec.budget_db,
        c_db_per_m: water.c_db_per_m(),
        distance_m: spec.geometry.distance_m,
        spot_diameter_m: spot_diameter_m(&spec.geometry),
        margin_db: link_margin_db(spec, spec.geometry.distance_m)?,
        without_geometry: max_distance_m(spec.budget_db, water, &physical, RangeMode::WithoutGeometry)?,
        physical_geometry: max_distance_m(spec.budget_db, water, &physical, RangeMode::WithGeometry)?,
        calibrated_geometry,
        back_solved_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn green_geo() -> LinkGeometry {
        presets::green_125m().geometry
    }

    fn blue_geo() -> LinkGeometry {
        presets::blue_6m25().geometry
    }

    #[test]
    fn plan_report_models() {
        let r = plan_link(&presets::green_125m(), 7, Some(117.7)).unwrap();
        assert!((r.without_geometry.max_distance_m - 231.2).abs() < 0.05);
        assert!((r.back_solved_k.unwrap() - 1.198).abs() < 1e-3);
        let cal = r.calibrated_geometry.unwrap();
        assert!((cal.max_distance_m - 117.7).abs() < 1e-3);
        assert_eq!(r.physical_geometry.geometry_model, GeometryModel::Physical);
        assert!((r.spot_diameter_m - 0.5551).abs() < 1e-3);
        assert_eq!(r.seed, 7);
        assert!(plan_link(&presets::blue_6m25(), 0, None).unwrap().calibrated_geometry.is_none());
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9).is_none());
    }

    #[test]
    fn ranges_without_geometry() {
        let g = max_distance_m(82.77, &WaterOptics::deep_sea_green(), &green_geo(), RangeMode::WithoutGeometry).unwrap();
        assert!((g.max_distance_m - 231.2).abs() < 0.05);
        assert!((g.max_distance_m - 231.6).abs() / 231.6 < 0.005);
        let b = max_distance_m(100.54, &WaterOptics::deep_sea_blue(), &blue_geo(), RangeMode::WithoutGeometry).unwrap();
        assert!((b.max_distance_m - 337.4).abs() < 0.05);
        assert!((b.max_distance_m - 337.5).abs() / 337.5 < 0.005);
        assert_eq!(b.geometry_model, GeometryModel::None);
    }

    #[test]
    fn solver_agrees_with_closed_form() {
        // With geometric loss pinned to 0 (k huge), bisection reproduces budget / c.
        let geo = LinkGeometry { k_override: Some(1e12), ..green_geo() };
        let w = WaterOptics::deep_sea_green();
        let s = max_distance_m(82.77, &w, &geo, RangeMode::WithGeometry).unwrap();
        assert!((s.max_distance_m - 82.77 / 0.358).abs() < 1e-6);
    }

    #[test]
    fn back_solved_k_values_and_roundtrip() {
        let kg = back_solve_k(82.77, 0.358, 117.7).unwrap();
        assert!((kg - 1.198).abs() < 1e-3, "{kg}");
        let kb = back_solve_k(100.54, 0.298, 128.3).unwrap();
        assert!((kb - 9.67e-3).abs() < 1e-5, "{kb}");
        for (budget, w, geo, k, z) in [
            (82.77, WaterOptics::deep_sea_green(), green_geo(), kg, 117.7),
            (100.54, WaterOptics::deep_sea_blue(), blue_geo(), kb, 128.3),
        ] {
            let geo = LinkGeometry { k_override: Some(k), ..geo };
            let s = max_distance_m(budget, &w, &geo, RangeMode::WithGeometry).unwrap();
            assert!((s.max_distance_m - z).abs() < 1e-3);
            assert!(s.residual_db.abs() < 1e-6);
            assert_eq!(s.geometry_model, GeometryModel::CalibratedK);
            assert_eq!(s.k_used, Some(k));
        }
        assert!(matches!(back_solve_k(82.77, 0.358, 300.0), Err(PlanError::AttenuationExceedsBudget { .. })));
    }

    #[test]
    fn physical_geometry_range_is_labelled() {
        let s = max_distance_m(82.77, &WaterOptics::deep_sea_green(), &green_geo(), RangeMode::WithGeometry).unwrap();
        assert_eq!(s.geometry_model, GeometryModel::Physical);
        assert!(s.residual_db.abs() < 1e-6);
        assert!(s.max_distance_m > 30.0 && s.max_distance_m < 231.2);
    }

    #[test]
    fn no_sign_change_reported() {
        // Budget smaller than the geometric loss right at the lower bracket.
        let geo = LinkGeometry { k_override: Some(1e-12), ..green_geo() };
        let e = max_distance_m(1.0, &WaterOptics::deep_sea_green(), &geo, RangeMode::WithGeometry).unwrap_err();
        assert!(matches!(e, PlanError::NoSignChange { .. }), "{e}");
    }

    #[test]
    fn margin_examples() {
        let spec = presets::green_125m();
        let m30 = link_margin_db(&spec, 30.0).unwrap();
        assert!((m30 - 50.40).abs() < 0.01, "{m30}");
        let zero = LinkSpec {
            geometry: LinkGeometry { tx_exit_diameter_m: 0.01, ..spec.geometry },
            ..spec.clone()
        };
        assert_eq!(link_margin_db(&zero, 0.0).unwrap(), spec.budget_db);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let m = link_margin_db(&spec, i as f64 * 2.0).unwrap();
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn curve_brackets_solver() {
        let w = WaterOptics::deep_sea_green();
        let curve = distance_curve(82.77, &w, &green_geo(), 1.0, 300.0, 300).unwrap();
        let z = 82.77 / 0.358;
        let i = curve.iter().position(|p| p.loss_db_without > 82.77).unwrap();
        assert!(curve[i - 1].z_m <= z && curve[i].z_m >= z);
        let two = distance_curve(82.77, &w, &green_geo(), 1.0, 300.0, 2).unwrap();
        assert_eq!((two[0].z_m, two[1].z_m), (1.0, 300.0));
        for p in &curve {
            if crate::channel::spot_diameter_m(&green_geo().at_distance(p.z_m)) > green_geo().rx_aperture_m {
                assert!(p.loss_db_with_geometry > p.loss_db_without);
            }
        }
        assert!(distance_curve(82.77, &w, &green_geo(), 5.0, 5.0, 10).is_err());
    }

    proptest! {
        #[test]
        fn range_monotone_in_budget_and_c(budget in 20.0f64..150.0, db in 0.1f64..20.0, c in 0.05f64..1.0, dc in 0.001f64..0.5) {
            let geo = green_geo();
            let w1 = WaterOptics::from_db_per_m(c).unwrap();
            let w2 = WaterOptics::from_db_per_m(c + dc).unwrap();
            for mode in [RangeMode::WithGeometry, RangeMode::WithoutGeometry] {
                let base = max_distance_m(budget, &w1, &geo, mode);
                let bigger = max_distance_m(budget + db, &w1, &geo, mode);
                let murkier = max_distance_m(budget, &w2, &geo, mode);
                if let (Ok(a), Ok(b), Ok(m)) = (base, bigger, murkier) {
                    prop_assert!(b.max_distance_m > a.max_distance_m);
                    prop_assert!(m.max_distance_m < a.max_distance_m);
                }
            }
        }

        #[test]
        fn back_solve_then_solve_is_identity(z in 5.0f64..200.0, c in 0.1f64..0.4) {
            let budget = 90.0;
            prop_assume!(c * z < budget - 1.0);
            let k = back_solve_k(budget, c, z).unwrap();
            let geo = LinkGeometry { k_override: Some(k), ..green_geo() };
            // Only meaningful where the clamp at 0 dB is inactive: Z² > k.
            prop_assume!(z * z > k);
            let s = max_distance_m(budget, &WaterOptics::from_db_per_m(c).unwrap(), &geo, RangeMode::WithGeometry).unwrap();
            prop_assert!((s.max_distance_m - z).abs() < 1e-3);
        }
    }
}
