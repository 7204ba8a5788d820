//! Shadow-triangle geometry.
//!
//! Under parallel light a limb `P1 → P2` standing on the ground casts a
//! shadow `P2 → P3` whose length is the limb length divided by a single
//! coefficient `K ≈ tan θ`, with `θ` the light elevation. This module
//! extracts the triangle `{A, B, C}` (object top, object base, far shadow
//! tip) from masks, converts between `K` and `θ`, projects limb endpoints
//! and checks that every limb of a body agrees on `K`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::contour::{convex_hull, largest_component, BoundingBox};
use crate::geometry::Point2;
use crate::mask::{BinaryMask, MaskError};

/// Limb used as the reference when comparing per-limb coefficients.
pub const REFERENCE_LIMB: &str = "Head";
/// Candidates for the shadow tip lie strictly below this fraction of the
/// bounding-box height.
pub const BOTTOM_FRACTION: f64 = 0.8;
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StaError {
    #[error("mask has no foreground contours")]
    NoContours,
    #[error("input is not a binary mask: {0}")]
    NonBinaryInput(#[from] MaskError),
    #[error("shadow endpoint coincides with the limb base; K is undefined")]
    ZeroShadow,
    #[error("limb endpoints coincide")]
    ZeroLimb,
    #[error("value {0} is outside the valid range")]
    OutOfRange(f64),
    #[error("K must be positive, got {0}")]
    NonPositiveK(f64),
    #[error("azimuth ({0}, {1}) is not a unit vector")]
    NonUnitAzimuth(f64, f64),
    #[error("no shadow extends beyond the object; triangle is degenerate")]
    DegenerateTriangle,
    #[error("object mask is not contained in the object+shadow mask")]
    NotSubset,
    #[error("no correspondence named {0:?}")]
    MissingReference(String),
    #[error("duplicate limb {0:?}")]
    DuplicateLimb(String),
    #[error("limb {limb}: {source}")]
    InLimb {
        limb: String,
        #[source]
        source: Box<StaError>,
    },
    #[error("lengths must be positive (height {0}, shadow {1})")]
    NonPositive(f64, f64),
    #[error("coordinate is not finite")]
    NonFinite,
}

pub type Result<T, E = StaError> = std::result::Result<T, E>;

/// Triangle `{A, B, C}` extracted from a mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowTriangle {
    #[serde(rename = "A")]
    pub a: Point2,
    #[serde(rename = "B")]
    pub b: Point2,
    #[serde(rename = "C")]
    pub c: Point2,
    pub degenerate: bool,
}

/// Parallel light described by its shadow coefficient, elevation and the
/// image-plane direction shadows extend along.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightEstimate {
    pub k: f64,
    pub theta: f64,
    pub azimuth: Point2,
}

impl LightEstimate {
    pub fn from_theta(theta: f64, azimuth: Point2) -> Result<Self> {
        let k = k_from_theta(theta)?;
        check_unit(azimuth)?;
        Ok(Self { k, theta, azimuth })
    }

    pub fn from_k(k: f64, azimuth: Point2) -> Result<Self> {
        let theta = theta_from_k(k)?;
        check_unit(azimuth)?;
        Ok(Self { k, theta, azimuth })
    }

    /// Azimuth from a compass-style angle in radians (0 = +x, π/2 = +y).
    pub fn azimuth_from_angle(angle: f64) -> Point2 {
        Point2::new(angle.cos(), angle.sin())
    }
}

impl Default for LightEstimate {
    /// 45° elevation, shadows towards the lower right.
    fn default() -> Self {
        Self {
            k: 1.0,
            theta: FRAC_PI_4,
            azimuth: Point2::new(SQRT_2 / 2.0, SQRT_2 / 2.0),
        }
    }
}

fn check_unit(azimuth: Point2) -> Result<()> {
    if azimuth.is_finite() && (azimuth.norm() - 1.0).abs() <= UNIT_TOLERANCE {
        Ok(())
    } else {
        Err(StaError::NonUnitAzimuth(azimuth.x, azimuth.y))
    }
}

fn centre_line(bbox: &BoundingBox) -> (Point2, Point2) {
    let cx = bbox.x as f64 + bbox.w as f64 / 2.0;
    (
        Point2::new(cx, bbox.y as f64),
        Point2::new(cx, (bbox.y + bbox.h) as f64),
    )
}

/// Hull vertices strictly inside the bottom band of `bbox`.
fn bottom_candidates(hull: &[(i64, i64)], bbox: &BoundingBox) -> Vec<Point2> {
    let limit = bbox.y as f64 + BOTTOM_FRACTION * bbox.h as f64;
    hull.iter()
        .map(|&(x, y)| Point2::new(x as f64, y as f64))
        .filter(|p| p.y > limit)
        .collect()
}

/// Candidate farthest from `base`; ties go to larger `x`, then larger `y`.
fn farthest_from(base: Point2, candidates: &[Point2]) -> Option<Point2> {
    candidates.iter().copied().reduce(|best, p| {
        let (db, dp) = ((best - base).dot(best - base), (p - base).dot(p - base));
        let better = dp > db || (dp == db && (p.x > best.x || (p.x == best.x && p.y > best.y)));
        if better {
            p
        } else {
            best
        }
    })
}

/// Extracts the shadow triangle of the dominant (largest) component.
///
/// `A`/`B` are the top-centre and bottom-centre of its bounding box. `C` is
/// the hull vertex in the bottom band farthest from `B`; without such a
/// vertex `C = B` and the triangle is flagged degenerate.
pub fn extract_shadow_triangle(mask: &BinaryMask) -> Result<ShadowTriangle> {
    let comp = largest_component(mask).ok_or(StaError::NoContours)?;
    let (a, b) = centre_line(&comp.bbox);
    let hull = convex_hull(&comp.boundary(mask));
    match farthest_from(b, &bottom_candidates(&hull, &comp.bbox)) {
        Some(c) => Ok(ShadowTriangle {
            a,
            b,
            c,
            degenerate: c == b,
        }),
        None => Ok(ShadowTriangle {
            a,
            b,
            c: b,
            degenerate: true,
        }),
    }
}

/// [`extract_shadow_triangle`] on a raw 0/1 buffer.
pub fn extract_shadow_triangle_from_values(width: u32, height: u32, values: Vec<u8>) -> Result<ShadowTriangle> {
    extract_shadow_triangle(&BinaryMask::from_values(width, height, values)?)
}

/// `K = |P1 - P2| / |P2 - P3|`.
pub fn compute_k(p1: Point2, p2: Point2, p3: Point2) -> Result<f64> {
    if !(p1.is_finite() && p2.is_finite() && p3.is_finite()) {
        return Err(StaError::NonFinite);
    }
    let limb = p1.distance(p2);
    let shadow = p2.distance(p3);
    if shadow == 0.0 {
        return Err(StaError::ZeroShadow);
    }
    if limb == 0.0 {
        return Err(StaError::ZeroLimb);
    }
    Ok(limb / shadow)
}

pub fn k_from_theta(theta: f64) -> Result<f64> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(theta.tan())
    } else {
        Err(StaError::OutOfRange(theta))
    }
}

pub fn theta_from_k(k: f64) -> Result<f64> {
    if k > 0.0 && k.is_finite() {
        Ok(k.atan())
    } else {
        Err(StaError::OutOfRange(k))
    }
}

/// Shadow position of `p1` for a limb based at `p2`:
/// `p2 + |p1 - p2| / k · azimuth`.
pub fn project_shadow_point(p1: Point2, p2: Point2, k: f64, azimuth: Point2) -> Result<Point2> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(StaError::NonPositiveK(k));
    }
    check_unit(azimuth)?;
    if !(p1.is_finite() && p2.is_finite()) {
        return Err(StaError::NonFinite);
    }
    Ok(p2 + azimuth * (p1.distance(p2) / k))
}

/// Estimates the light from a background object and its cast shadow.
///
/// `A` and `B` come from the object's own bounding box; `C` is the hull
/// vertex of the object+shadow region in its bottom band that lies on
/// shadow pixels and is farthest from `B`. No such vertex means the scene
/// carries no shadow evidence and [`StaError::DegenerateTriangle`] is
/// returned so callers can fall back to a configured light.
pub fn estimate_light_from_background(
    object_and_shadow: &BinaryMask,
    object: &BinaryMask,
) -> Result<LightEstimate> {
    if !object.is_subset_of(object_and_shadow)? {
        return Err(StaError::NotSubset);
    }
    let obj = largest_component(object).ok_or(StaError::NoContours)?;
    let (a, b) = centre_line(&obj.bbox);
    let whole = largest_component(object_and_shadow).ok_or(StaError::NoContours)?;
    let hull = convex_hull(&whole.boundary(object_and_shadow));
    let shadow_tips: Vec<Point2> = bottom_candidates(&hull, &whole.bbox)
        .into_iter()
        .filter(|p| !object.get(p.x as u32, p.y as u32))
        .collect();
    let c = farthest_from(b, &shadow_tips).ok_or(StaError::DegenerateTriangle)?;
    let k = compute_k(a, b, c).map_err(|_| StaError::DegenerateTriangle)?;
    let dir = c - b;
    Ok(LightEstimate {
        k,
        theta: k.atan(),
        azimuth: dir * (1.0 / dir.norm()),
    })
}

/// A limb, its ground-side end and the tip of its shadow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimbCorrespondence {
    pub limb_name: String,
    pub p1: Point2,
    pub p2: Point2,
    pub p3: Point2,
}

/// Per-limb coefficients compared against the head limb.
#[derive(Debug, Clone, PartialEq)]
pub struct KReport {
    pub reference: String,
    pub reference_k: f64,
    /// `(limb, K)` in input order, reference included.
    pub k: Vec<(String, f64)>,
    /// `(limb, |K - K_ref|)` for every non-reference limb.
    pub deviations: Vec<(String, f64)>,
    pub mean_deviation: f64,
    pub max_deviation: f64,
}

impl KReport {
    pub fn k_of(&self, limb: &str) -> Option<f64> {
        self.k.iter().find(|(n, _)| n == limb).map(|(_, v)| *v)
    }

    pub fn deviation_of(&self, limb: &str) -> Option<f64> {
        self.deviations.iter().find(|(n, _)| n == limb).map(|(_, v)| *v)
    }

    /// Copy with every number rounded to `decimals` places.
    pub fn rounded(&self, decimals: i32) -> KReport {
        let f = 10f64.powi(decimals);
        let r = |v: f64| (v * f).round() / f;
        let rv = |v: &[(String, f64)]| v.iter().map(|(n, x)| (n.clone(), r(*x))).collect();
        KReport {
            reference: self.reference.clone(),
            reference_k: r(self.reference_k),
            k: rv(&self.k),
            deviations: rv(&self.deviations),
            mean_deviation: r(self.mean_deviation),
            max_deviation: r(self.max_deviation),
        }
    }
}

struct OrderedMap<'a>(&'a [(String, f64)]);

impl Serialize for OrderedMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_map(self.0.iter().map(|(k, v)| (k, v)))
    }
}

impl Serialize for KReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(5))?;
        m.serialize_entry("reference", &self.reference)?;
        m.serialize_entry("k", &OrderedMap(&self.k))?;
        m.serialize_entry("deviation", &OrderedMap(&self.deviations))?;
        m.serialize_entry("mean", &self.mean_deviation)?;
        m.serialize_entry("max", &self.max_deviation)?;
        m.end()
    }
}

/// Computes `K` for every correspondence and its deviation from the head
/// limb's `K`.
pub fn validate_k_consistency(correspondences: &[LimbCorrespondence]) -> Result<KReport> {
    let mut k = Vec::with_capacity(correspondences.len());
    for c in correspondences {
        if k.iter().any(|(n, _): &(String, f64)| *n == c.limb_name) {
            return Err(StaError::DuplicateLimb(c.limb_name.clone()));
        }
        let v = compute_k(c.p1, c.p2, c.p3).map_err(|e| StaError::InLimb {
            limb: c.limb_name.clone(),
            source: Box::new(e),
        })?;
        k.push((c.limb_name.clone(), v));
    }
    let reference_k = k
        .iter()
        .find(|(n, _)| n == REFERENCE_LIMB)
        .map(|(_, v)| *v)
        .ok_or_else(|| StaError::MissingReference(REFERENCE_LIMB.to_string()))?;
    let deviations: Vec<(String, f64)> = k
        .iter()
        .filter(|(n, _)| n != REFERENCE_LIMB)
        .map(|(n, v)| (n.clone(), (v - reference_k).abs()))
        .collect();
    let devs: Vec<f64> = deviations.iter().map(|(_, d)| *d).collect();
    Ok(KReport {
        reference: REFERENCE_LIMB.to_string(),
        reference_k,
        mean_deviation: crate::par::pairwise_mean(&devs).unwrap_or(0.0),
        max_deviation: devs.iter().copied().fold(0.0, f64::max),
        k,
        deviations,
    })
}

/// Light elevation from object height and shadow length: `atan(h / L)`.
pub fn verify_physical_relation(limb_height: f64, shadow_length: f64) -> Result<f64> {
    if !(limb_height > 0.0 && shadow_length > 0.0 && limb_height.is_finite() && shadow_length.is_finite()) {
        return Err(StaError::NonPositive(limb_height, shadow_length));
    }
    Ok(limb_height.atan2(shadow_length))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::draw_segment;
    use std::f64::consts::{FRAC_PI_6, PI};

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn rect(w: u32, h: u32, x0: u32, x1: u32, y0: u32, y1: u32) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| (x0..=x1).contains(&x) && (y0..=y1).contains(&y)).unwrap()
    }

    #[test]
    fn rectangle_triangle() {
        let t = extract_shadow_triangle(&rect(64, 100, 10, 30, 20, 80)).unwrap();
        assert_eq!(t.a, pt(20.0, 20.0));
        assert_eq!(t.b, pt(20.0, 80.0));
        assert_eq!(t.c, pt(30.0, 80.0));
        assert!(!t.degenerate);
    }

    #[test]
    fn empty_and_single_row() {
        assert_eq!(
            extract_shadow_triangle(&BinaryMask::new(8, 8).unwrap()),
            Err(StaError::NoContours)
        );
        let t = extract_shadow_triangle(&rect(32, 8, 4, 20, 5, 5)).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.c, t.b);
        assert_eq!(t.a, t.b);
        assert!(matches!(
            extract_shadow_triangle_from_values(2, 1, vec![0, 7]),
            Err(StaError::NonBinaryInput(_))
        ));
    }

    #[test]
    fn dominant_component_wins() {
        let mut m = rect(64, 64, 2, 4, 2, 4);
        for (x, y) in rect(64, 64, 30, 50, 10, 40).ones() {
            m.set(x, y, true);
        }
        let t = extract_shadow_triangle(&m).unwrap();
        assert_eq!(t.a, pt(40.0, 10.0));
    }

    #[test]
    fn triangle_json_keys() {
        let t = extract_shadow_triangle(&rect(64, 100, 10, 30, 20, 80)).unwrap();
        assert_eq!(
            serde_json::to_string(&t).unwrap(),
            r#"{"A":[20.0,20.0],"B":[20.0,80.0],"C":[30.0,80.0],"degenerate":false}"#
        );
    }

    #[test]
    fn k_examples() {
        assert_eq!(compute_k(pt(0.0, 0.0), pt(0.0, 10.0), pt(10.0, 10.0)).unwrap(), 1.0);
        assert_eq!(compute_k(pt(0.0, 0.0), pt(0.0, 6.0), pt(8.0, 6.0)).unwrap(), 0.75);
        assert_eq!(
            compute_k(pt(0.0, 0.0), pt(0.0, 10.0), pt(0.0, 10.0)),
            Err(StaError::ZeroShadow)
        );
        assert_eq!(
            compute_k(pt(0.0, 10.0), pt(0.0, 10.0), pt(3.0, 10.0)),
            Err(StaError::ZeroLimb)
        );
    }

    #[test]
    fn theta_conversions() {
        assert!((k_from_theta(FRAC_PI_4).unwrap() - 1.0).abs() < 1e-15);
        assert!((theta_from_k(1.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!(matches!(k_from_theta(0.0), Err(StaError::OutOfRange(_))));
        assert!(matches!(k_from_theta(FRAC_PI_2), Err(StaError::OutOfRange(_))));
        assert!(matches!(theta_from_k(-1.0), Err(StaError::OutOfRange(_))));
    }

    #[test]
    fn projection_examples() {
        let p = project_shadow_point(pt(0.0, 0.0), pt(0.0, 10.0), 1.0, pt(1.0, 0.0)).unwrap();
        assert_eq!(p, pt(10.0, 10.0));
        let p = project_shadow_point(pt(0.0, 0.0), pt(0.0, 10.0), 2.0, pt(0.0, 1.0)).unwrap();
        assert_eq!(p, pt(0.0, 15.0));
        let p = project_shadow_point(pt(3.0, 4.0), pt(3.0, 4.0), 0.7, pt(0.0, 1.0)).unwrap();
        assert_eq!(p, pt(3.0, 4.0));
        assert_eq!(
            project_shadow_point(pt(0.0, 0.0), pt(0.0, 1.0), 0.0, pt(1.0, 0.0)),
            Err(StaError::NonPositiveK(0.0))
        );
        assert!(matches!(
            project_shadow_point(pt(0.0, 0.0), pt(0.0, 1.0), 1.0, pt(1.0, 1.0)),
            Err(StaError::NonUnitAzimuth(..))
        ));
    }

    fn bar_with_shadow(shadow_len: u32) -> (BinaryMask, BinaryMask) {
        // Bar x∈[50,52], y∈[60,100] (height 40) with a 3-row shadow strip along +x.
        let obj = rect(240, 140, 50, 52, 60, 100);
        let mut both = obj.clone();
        for (x, y) in rect(240, 140, 51, 51 + shadow_len, 98, 100).ones() {
            both.set(x, y, true);
        }
        (both, obj)
    }

    #[test]
    fn light_from_bar_and_strip() {
        let (both, obj) = bar_with_shadow(40);
        let l = estimate_light_from_background(&both, &obj).unwrap();
        assert!((l.k - 1.0).abs() <= 0.05, "k = {}", l.k);
        assert!((l.theta - FRAC_PI_4).abs() < 0.03);
        assert!(l.azimuth.distance(pt(1.0, 0.0)) < 0.1);

        let (both2, obj2) = bar_with_shadow(80);
        let l2 = estimate_light_from_background(&both2, &obj2).unwrap();
        assert!((l2.k - l.k / 2.0).abs() <= 0.05, "{} vs {}", l2.k, l.k);
    }

    #[test]
    fn light_without_shadow_is_degenerate() {
        let obj = rect(64, 64, 10, 14, 10, 50);
        assert_eq!(
            estimate_light_from_background(&obj, &obj),
            Err(StaError::DegenerateTriangle)
        );
        let mut stray = BinaryMask::new(64, 64).unwrap();
        stray.set(60, 60, true);
        assert_eq!(
            estimate_light_from_background(&obj, &stray),
            Err(StaError::NotSubset)
        );
    }

    #[test]
    fn light_recovers_diagonal_shadow() {
        let theta = 30f64.to_radians();
        let az = LightEstimate::azimuth_from_angle(20f64.to_radians());
        let obj = rect(400, 300, 100, 104, 100, 200);
        let base = pt(102.0, 200.0);
        let tip = base + az * (100.0 / theta.tan());
        let mut both = obj.clone();
        draw_segment(&mut both, base, tip, 3).unwrap();
        let l = estimate_light_from_background(&both, &obj).unwrap();
        assert!((l.theta - theta).abs() < 3f64.to_radians());
        let ang = l.azimuth.y.atan2(l.azimuth.x);
        assert!((ang - 20f64.to_radians()).abs() < 5f64.to_radians());
    }

    fn corr(name: &str, k: f64) -> LimbCorrespondence {
        LimbCorrespondence {
            limb_name: name.into(),
            p1: pt(0.0, 0.0),
            p2: pt(0.0, 100.0 * k),
            p3: pt(100.0, 100.0 * k),
        }
    }

    #[test]
    fn k_report_table_values() {
        let r = validate_k_consistency(&[corr("Head", 1.0), corr("L-Elbow", 1.03), corr("R-Knee", 1.01)]).unwrap();
        assert!((r.deviation_of("L-Elbow").unwrap() - 0.03).abs() < 1e-12);
        assert!((r.deviation_of("R-Knee").unwrap() - 0.01).abs() < 1e-12);
        assert!((r.mean_deviation - 0.02).abs() < 1e-12);
        assert!((r.max_deviation - 0.03).abs() < 1e-12);
        assert!(r.max_deviation >= r.mean_deviation);
        let rounded = r.rounded(2);
        assert_eq!(rounded.mean_deviation, 0.02);
        assert_eq!(
            serde_json::to_string(&rounded).unwrap(),
            r#"{"reference":"Head","k":{"Head":1.0,"L-Elbow":1.03,"R-Knee":1.01},"deviation":{"L-Elbow":0.03,"R-Knee":0.01},"mean":0.02,"max":0.03}"#
        );
    }

    #[test]
    fn k_report_errors() {
        assert_eq!(
            validate_k_consistency(&[corr("L-Elbow", 1.0)]),
            Err(StaError::MissingReference("Head".into()))
        );
        let mut bad = corr("R-Wrist", 1.0);
        bad.p3 = bad.p2;
        let e = validate_k_consistency(&[corr("Head", 1.0), bad]).unwrap_err();
        assert!(matches!(e, StaError::InLimb { ref limb, .. } if limb == "R-Wrist"));
        assert!(matches!(
            validate_k_consistency(&[corr("Head", 1.0), corr("Head", 2.0)]),
            Err(StaError::DuplicateLimb(_))
        ));
    }

    #[test]
    fn parallel_projection_is_consistent() {
        let az = LightEstimate::azimuth_from_angle(0.3);
        let limbs = [
            ("Head", pt(50.0, 10.0), pt(50.0, 40.0)),
            ("L-Elbow", pt(30.0, 60.0), pt(45.0, 40.0)),
            ("R-Knee", pt(60.0, 120.0), pt(55.0, 90.0)),
        ];
        let cs: Vec<LimbCorrespondence> = limbs
            .iter()
            .map(|&(n, p1, p2)| LimbCorrespondence {
                limb_name: n.into(),
                p1,
                p2,
                p3: project_shadow_point(p1, p2, 1.3, az).unwrap(),
            })
            .collect();
        let r = validate_k_consistency(&cs).unwrap();
        assert!(r.max_deviation < 1e-12);
    }

    #[test]
    fn physical_relation() {
        assert!((verify_physical_relation(10.0, 10.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((verify_physical_relation(10.0, 10.0 * 3f64.sqrt()).unwrap() - FRAC_PI_6).abs() < 1e-15);
        assert!(matches!(verify_physical_relation(0.0, 1.0), Err(StaError::NonPositive(..))));
        assert!(verify_physical_relation(1.0, 1.0).unwrap() < PI);
    }

    #[test]
    fn light_estimate_invariants() {
        let l = LightEstimate::from_theta(0.6, LightEstimate::azimuth_from_angle(1.0)).unwrap();
        assert!((l.k - l.theta.tan()).abs() < 1e-9);
        let d = LightEstimate::default();
        assert!((d.k - d.theta.tan()).abs() < 1e-9);
        assert!((d.azimuth.norm() - 1.0).abs() < 1e-12);
    }
}
