//! Keypoint body model: nine named keypoints plus a derived torso block,
//! the click-by-click annotation session, and the on-disk annotation record.
//!
//! Coordinates are image pixels with `y` growing downwards. Annotation
//! happens on a fixed canvas (256×256 by default) and records are rescaled
//! explicitly to whatever raster they are used against.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::MaskError;

/// Default annotation canvas edge length in pixels.
pub const DEFAULT_CANVAS: u32 = 256;
/// Default torso half-width as a fraction of the head-to-knee axis length.
pub const DEFAULT_WIDTH_RATIO: f64 = 0.25;
/// Default minimum number of clicks before a session may be committed.
pub const DEFAULT_K_MIN: usize = 9;
/// Fraction of the head-to-knee axis where the torso block starts and ends.
pub const TORSO_SPAN: (f64, f64) = (0.2, 0.8);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("session already committed")]
    SessionClosed,
    #[error("point ({x}, {y}) lies outside the {width}x{height} canvas")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("all 9 keypoints are already placed")]
    SetFull,
    #[error("session has no points to undo")]
    EmptySession,
    #[error("only {have} keypoints placed, at least {need} required")]
    BelowMinimum { have: usize, need: usize },
    #[error("missing keypoint {0}")]
    MissingKeypoint(KeypointName),
    #[error("duplicate keypoint {0}")]
    DuplicateKeypoint(KeypointName),
    #[error("head coincides with the knee midpoint; torso axis is undefined")]
    DegenerateAxis,
    #[error("invalid dimensions {width}x{height}")]
    InvalidDims { width: u32, height: u32 },
    #[error("annotation is incomplete: missing {0:?}")]
    IncompleteAnnotation(Vec<KeypointName>),
    #[error("line thickness must be at least 1, got {0}")]
    InvalidThickness(u32),
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("duplicate skeleton edge {0} - {1}")]
    DuplicateEdge(Anchor, Anchor),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown keypoint name {0:?}")]
    UnknownKeypoint(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// A point in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Rotates the vector by +90 degrees in image coordinates.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// The nine annotated body keypoints, declared in annotation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum KeypointName {
    Head,
    ElbowL,
    ElbowR,
    WristL,
    WristR,
    KneeL,
    KneeR,
    AnkleL,
    AnkleR,
}

impl KeypointName {
    /// Fixed click order used by annotation sessions.
    pub const ALL: [KeypointName; 9] = [
        KeypointName::Head,
        KeypointName::ElbowL,
        KeypointName::ElbowR,
        KeypointName::WristL,
        KeypointName::WristR,
        KeypointName::KneeL,
        KeypointName::KneeR,
        KeypointName::AnkleL,
        KeypointName::AnkleR,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            KeypointName::Head => "Head",
            KeypointName::ElbowL => "ElbowL",
            KeypointName::ElbowR => "ElbowR",
            KeypointName::WristL => "WristL",
            KeypointName::WristR => "WristR",
            KeypointName::KneeL => "KneeL",
            KeypointName::KneeR => "KneeR",
            KeypointName::AnkleL => "AnkleL",
            KeypointName::AnkleR => "AnkleR",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for KeypointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeypointName {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self> {
        KeypointName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| GeometryError::UnknownKeypoint(s.to_string()))
    }
}

impl From<KeypointName> for &'static str {
    fn from(n: KeypointName) -> Self {
        n.as_str()
    }
}

impl TryFrom<String> for KeypointName {
    type Error = GeometryError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Named keypoints on an annotation canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    points: BTreeMap<KeypointName, Point2>,
    canvas_width: u32,
    canvas_height: u32,
}

impl KeypointSet {
    pub fn new(canvas_width: u32, canvas_height: u32) -> Result<Self> {
        if canvas_width == 0 || canvas_height == 0 {
            return Err(GeometryError::InvalidDims {
                width: canvas_width,
                height: canvas_height,
            });
        }
        Ok(Self {
            points: BTreeMap::new(),
            canvas_width,
            canvas_height,
        })
    }

    /// Builds a complete set from points given in [`KeypointName::ALL`] order.
    pub fn from_ordered(canvas_width: u32, canvas_height: u32, points: [Point2; 9]) -> Result<Self> {
        let mut set = Self::new(canvas_width, canvas_height)?;
        for (name, p) in KeypointName::ALL.into_iter().zip(points) {
            set.insert(name, p)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, name: KeypointName, p: Point2) -> Result<()> {
        self.check_bounds(p)?;
        if self.points.contains_key(&name) {
            return Err(GeometryError::DuplicateKeypoint(name));
        }
        self.points.insert(name, p);
        Ok(())
    }

    pub fn check_bounds(&self, p: Point2) -> Result<()> {
        if !p.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let inside = p.x >= 0.0
            && p.y >= 0.0
            && p.x < f64::from(self.canvas_width)
            && p.y < f64::from(self.canvas_height);
        if inside {
            Ok(())
        } else {
            Err(GeometryError::OutOfBounds {
                x: p.x,
                y: p.y,
                width: self.canvas_width,
                height: self.canvas_height,
            })
        }
    }

    pub fn get(&self, name: KeypointName) -> Option<Point2> {
        self.points.get(&name).copied()
    }

    pub fn require(&self, name: KeypointName) -> Result<Point2> {
        self.get(name).ok_or(GeometryError::MissingKeypoint(name))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn missing(&self) -> Vec<KeypointName> {
        KeypointName::ALL
            .into_iter()
            .filter(|n| !self.points.contains_key(n))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.points.len() == KeypointName::ALL.len()
    }

    /// Points in fixed name order.
    pub fn iter(&self) -> impl Iterator<Item = (KeypointName, Point2)> + '_ {
        self.points.iter().map(|(n, p)| (*n, *p))
    }

    pub fn canvas_width(&self) -> u32 {
        self.canvas_width
    }

    pub fn canvas_height(&self) -> u32 {
        self.canvas_height
    }

    /// Applies `f` to every point; the canvas is replaced by `(w, h)`.
    fn map_points(&self, w: u32, h: u32, f: impl Fn(Point2) -> Point2) -> Self {
        Self {
            points: self.points.iter().map(|(n, p)| (*n, f(*p))).collect(),
            canvas_width: w,
            canvas_height: h,
        }
    }
}

/// Torso quadrilateral. Corner order: top-left, top-right, bottom-right,
/// bottom-left, relative to the head-to-knee axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorsoBlock {
    pub corners: [Point2; 4],
}

impl TorsoBlock {
    pub fn top_center(&self) -> Point2 {
        self.corners[0].midpoint(self.corners[1])
    }

    pub fn bottom_center(&self) -> Point2 {
        self.corners[2].midpoint(self.corners[3])
    }

    /// A block collapsed onto a single point.
    pub fn collapsed(at: Point2) -> Self {
        Self { corners: [at; 4] }
    }
}

/// Builds the torso block as an oriented rectangle on the axis running from
/// the head to the knee midpoint.
///
/// The block covers the middle of the axis ([`TORSO_SPAN`]) and extends
/// `width_ratio * axis_length` to either side of it.
pub fn derive_torso_block(kps: &KeypointSet, width_ratio: f64) -> Result<TorsoBlock> {
    if !(width_ratio.is_finite() && width_ratio > 0.0) {
        return Err(GeometryError::InvalidParameter(format!(
            "width_ratio must be positive, got {width_ratio}"
        )));
    }
    let head = kps.require(KeypointName::Head)?;
    let knee_mid = kps
        .require(KeypointName::KneeL)?
        .midpoint(kps.require(KeypointName::KneeR)?);
    let axis = knee_mid - head;
    let len = axis.norm();
    if len <= f64::EPSILON * head.norm().max(1.0) {
        return Err(GeometryError::DegenerateAxis);
    }
    let dir = axis * (1.0 / len);
    let left = dir.perp() * (width_ratio * len);
    let top = head.lerp(knee_mid, TORSO_SPAN.0);
    let bottom = head.lerp(knee_mid, TORSO_SPAN.1);
    Ok(TorsoBlock {
        corners: [top + left, top - left, bottom - left, bottom + left],
    })
}

/// Endpoint of a skeleton edge: a keypoint or a torso-block anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Anchor {
    Keypoint(KeypointName),
    TorsoTop,
    TorsoBottom,
}

impl Anchor {
    /// Number of joints between this anchor and the torso.
    pub fn torso_distance(self) -> u8 {
        use KeypointName::*;
        match self {
            Anchor::TorsoTop | Anchor::TorsoBottom => 0,
            Anchor::Keypoint(Head | ElbowL | ElbowR | KneeL | KneeR) => 1,
            Anchor::Keypoint(WristL | WristR | AnkleL | AnkleR) => 2,
        }
    }

    /// Position along the chain from the ground contacts (ankles) upwards.
    /// Lower ranks are closer to the ground.
    pub fn ground_rank(self) -> u8 {
        use KeypointName::*;
        match self {
            Anchor::Keypoint(AnkleL | AnkleR) => 0,
            Anchor::Keypoint(KneeL | KneeR) => 1,
            Anchor::TorsoBottom => 2,
            Anchor::TorsoTop => 3,
            Anchor::Keypoint(Head | ElbowL | ElbowR) => 4,
            Anchor::Keypoint(WristL | WristR) => 5,
        }
    }

    /// Body-part label in the `L-Elbow` style.
    pub fn label(self) -> &'static str {
        use KeypointName::*;
        match self {
            Anchor::TorsoTop => "torso-top",
            Anchor::TorsoBottom => "torso-bottom",
            Anchor::Keypoint(Head) => "Head",
            Anchor::Keypoint(ElbowL) => "L-Elbow",
            Anchor::Keypoint(ElbowR) => "R-Elbow",
            Anchor::Keypoint(WristL) => "L-Wrist",
            Anchor::Keypoint(WristR) => "R-Wrist",
            Anchor::Keypoint(KneeL) => "L-Knee",
            Anchor::Keypoint(KneeR) => "R-Knee",
            Anchor::Keypoint(AnkleL) => "L-Ankle",
            Anchor::Keypoint(AnkleR) => "R-Ankle",
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Name of the limb an edge represents: the label of its endpoint farthest
/// from the torso, so `torso-top – Head` is `"Head"` and `KneeL – AnkleL` is
/// `"L-Ankle"`.
pub fn limb_name(a: Anchor, b: Anchor) -> String {
    match a.torso_distance().cmp(&b.torso_distance()) {
        std::cmp::Ordering::Less => b.label().to_string(),
        std::cmp::Ordering::Greater => a.label().to_string(),
        std::cmp::Ordering::Equal => format!("{}/{}", a.label(), b.label()),
    }
}

/// Which pairs of anchors are joined by limb segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTopology {
    edges: Vec<(Anchor, Anchor)>,
    include_torso: bool,
}

impl SkeletonTopology {
    pub fn new(edges: Vec<(Anchor, Anchor)>, include_torso: bool) -> Result<Self> {
        for (i, &(a, b)) in edges.iter().enumerate() {
            let dup = edges[..i]
                .iter()
                .any(|&(c, d)| (a, b) == (c, d) || (a, b) == (d, c));
            if dup || a == b {
                return Err(GeometryError::DuplicateEdge(a, b));
            }
        }
        Ok(Self {
            edges,
            include_torso,
        })
    }

    /// The stick figure: head and arms hang off the torso top, legs off the
    /// torso bottom.
    pub fn kplm() -> Self {
        use Anchor::*;
        use KeypointName::*;
        let k = Keypoint;
        Self {
            edges: vec![
                (k(Head), TorsoTop),
                (TorsoTop, k(ElbowL)),
                (TorsoTop, k(ElbowR)),
                (k(ElbowL), k(WristL)),
                (k(ElbowR), k(WristR)),
                (TorsoBottom, k(KneeL)),
                (TorsoBottom, k(KneeR)),
                (k(KneeL), k(AnkleL)),
                (k(KneeR), k(AnkleR)),
            ],
            include_torso: true,
        }
    }

    pub fn edges(&self) -> &[(Anchor, Anchor)] {
        &self.edges
    }

    pub fn include_torso(&self) -> bool {
        self.include_torso
    }

    pub fn uses_torso(&self) -> bool {
        self.include_torso
            || self
                .edges
                .iter()
                .any(|&(a, b)| matches!(a, Anchor::TorsoTop | Anchor::TorsoBottom)
                    || matches!(b, Anchor::TorsoTop | Anchor::TorsoBottom))
    }
}

impl Default for SkeletonTopology {
    fn default() -> Self {
        Self::kplm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Pose {
    #[default]
    Front,
    Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Manual,
    Llm,
    Mediapipe,
}

/// One person's keypoint annotation for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::RecordJson", into = "wire::RecordJson")]
pub struct AnnotationRecord {
    pub image_id: String,
    pub pose: Pose,
    pub keypoints: KeypointSet,
    pub torso_block: Option<TorsoBlock>,
    pub provenance: Provenance,
    pub original_width: u32,
    pub original_height: u32,
}

impl AnnotationRecord {
    pub fn is_complete(&self) -> bool {
        self.keypoints.is_complete()
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(GeometryError::IncompleteAnnotation(self.keypoints.missing()))
        }
    }

    /// The stored torso block, or one derived with `width_ratio`.
    ///
    /// A record whose head sits on the knee midpoint gets a block collapsed
    /// onto that point.
    pub fn resolved_torso(&self, width_ratio: f64) -> Result<TorsoBlock> {
        if let Some(block) = self.torso_block {
            return Ok(block);
        }
        match derive_torso_block(&self.keypoints, width_ratio) {
            Err(GeometryError::DegenerateAxis) => Ok(TorsoBlock::collapsed(
                self.keypoints.require(KeypointName::Head)?,
            )),
            other => other,
        }
    }

    pub fn anchor_position(&self, anchor: Anchor, torso: &TorsoBlock) -> Result<Point2> {
        match anchor {
            Anchor::Keypoint(name) => self.keypoints.require(name),
            Anchor::TorsoTop => Ok(torso.top_center()),
            Anchor::TorsoBottom => Ok(torso.bottom_center()),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation records always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Scales every coordinate from the record's canvas onto a `target_w ×
/// target_h` canvas.
pub fn rescale_annotation(
    rec: &AnnotationRecord,
    target_w: u32,
    target_h: u32,
) -> Result<AnnotationRecord> {
    if target_w == 0 || target_h == 0 {
        return Err(GeometryError::InvalidDims {
            width: target_w,
            height: target_h,
        });
    }
    let sx = f64::from(target_w) / f64::from(rec.keypoints.canvas_width());
    let sy = f64::from(target_h) / f64::from(rec.keypoints.canvas_height());
    let scale = |p: Point2| Point2::new(p.x * sx, p.y * sy);
    Ok(AnnotationRecord {
        keypoints: rec.keypoints.map_points(target_w, target_h, scale),
        torso_block: rec.torso_block.map(|b| TorsoBlock {
            corners: b.corners.map(scale),
        }),
        ..rec.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Active,
    Committed,
}

/// An in-progress click sequence for one image. Transitions return new
/// values; the receiver is never modified.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSession {
    image_id: String,
    pose: Pose,
    canvas_width: u32,
    canvas_height: u32,
    original_width: u32,
    original_height: u32,
    k_min: usize,
    width_ratio: f64,
    points: Vec<(KeypointName, Point2)>,
    state: SessionState,
}

impl AnnotationSession {
    /// Opens a session on a `canvas_width × canvas_height` annotation canvas.
    /// The original image size defaults to the canvas size.
    pub fn new(image_id: impl Into<String>, canvas_width: u32, canvas_height: u32) -> Result<Self> {
        if canvas_width == 0 || canvas_height == 0 {
            return Err(GeometryError::InvalidDims {
                width: canvas_width,
                height: canvas_height,
            });
        }
        Ok(Self {
            image_id: image_id.into(),
            pose: Pose::Front,
            canvas_width,
            canvas_height,
            original_width: canvas_width,
            original_height: canvas_height,
            k_min: DEFAULT_K_MIN,
            width_ratio: DEFAULT_WIDTH_RATIO,
            points: Vec::new(),
            state: SessionState::Active,
        })
    }

    pub fn with_original(mut self, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidDims { width, height });
        }
        self.original_width = width;
        self.original_height = height;
        Ok(self)
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    pub fn with_k_min(mut self, k_min: usize) -> Result<Self> {
        if !(1..=KeypointName::ALL.len()).contains(&k_min) {
            return Err(GeometryError::InvalidParameter(format!(
                "k_min must be within 1..=9, got {k_min}"
            )));
        }
        self.k_min = k_min;
        Ok(self)
    }

    pub fn with_width_ratio(mut self, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "width_ratio must be positive, got {ratio}"
            )));
        }
        self.width_ratio = ratio;
        Ok(self)
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn points(&self) -> &[(KeypointName, Point2)] {
        &self.points
    }

    pub fn canvas(&self) -> (u32, u32) {
        (self.canvas_width, self.canvas_height)
    }

    pub fn original(&self) -> (u32, u32) {
        (self.original_width, self.original_height)
    }

    /// Name the next click will be bound to, if any remain.
    pub fn next_name(&self) -> Option<KeypointName> {
        KeypointName::ALL.get(self.points.len()).copied()
    }

    fn ensure_active(&self) -> Result<()> {
        match self.state {
            SessionState::Active => Ok(()),
            SessionState::Committed => Err(GeometryError::SessionClosed),
        }
    }

    pub fn add_point(&self, p: Point2) -> Result<Self> {
        self.ensure_active()?;
        let name = self.next_name().ok_or(GeometryError::SetFull)?;
        KeypointSet::new(self.canvas_width, self.canvas_height)?.check_bounds(p)?;
        let mut next = self.clone();
        next.points.push((name, p));
        Ok(next)
    }

    pub fn undo(&self) -> Result<Self> {
        self.ensure_active()?;
        if self.points.is_empty() {
            return Err(GeometryError::EmptySession);
        }
        let mut next = self.clone();
        next.points.pop();
        Ok(next)
    }

    /// Record built from the points placed so far, without committing.
    pub fn draft_record(&self) -> Result<AnnotationRecord> {
        let mut keypoints = KeypointSet::new(self.canvas_width, self.canvas_height)?;
        for &(name, p) in &self.points {
            keypoints.insert(name, p)?;
        }
        let torso_block = match derive_torso_block(&keypoints, self.width_ratio) {
            Ok(block) => Some(block),
            Err(GeometryError::DegenerateAxis | GeometryError::MissingKeypoint(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(AnnotationRecord {
            image_id: self.image_id.clone(),
            pose: self.pose,
            keypoints,
            torso_block,
            provenance: Provenance::Manual,
            original_width: self.original_width,
            original_height: self.original_height,
        })
    }

    /// Closes the session if at least `k_min` points are placed, returning
    /// the committed session and the produced record.
    pub fn commit(&self) -> Result<(Self, AnnotationRecord)> {
        self.ensure_active()?;
        if self.points.len() < self.k_min {
            return Err(GeometryError::BelowMinimum {
                have: self.points.len(),
                need: self.k_min,
            });
        }
        let record = self.draft_record()?;
        let mut next = self.clone();
        next.state = SessionState::Committed;
        Ok((next, record))
    }
}

mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub struct Dims {
        pub w: u32,
        pub h: u32,
    }

    #[derive(Serialize, Deserialize)]
    pub struct KeypointJson {
        pub name: KeypointName,
        pub x: f64,
        pub y: f64,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RecordJson {
        pub image_id: String,
        pub pose: Pose,
        pub canvas: Dims,
        pub original: Dims,
        pub provenance: Provenance,
        pub keypoints: Vec<KeypointJson>,
        pub torso_block: Option<[[f64; 2]; 4]>,
    }

    impl From<AnnotationRecord> for RecordJson {
        fn from(r: AnnotationRecord) -> Self {
            RecordJson {
                canvas: Dims {
                    w: r.keypoints.canvas_width(),
                    h: r.keypoints.canvas_height(),
                },
                original: Dims {
                    w: r.original_width,
                    h: r.original_height,
                },
                keypoints: r
                    .keypoints
                    .iter()
                    .map(|(name, p)| KeypointJson { name, x: p.x, y: p.y })
                    .collect(),
                torso_block: r.torso_block.map(|b| b.corners.map(<[f64; 2]>::from)),
                image_id: r.image_id,
                pose: r.pose,
                provenance: r.provenance,
            }
        }
    }

    impl TryFrom<RecordJson> for AnnotationRecord {
        type Error = GeometryError;

        fn try_from(j: RecordJson) -> Result<Self> {
            if j.original.w == 0 || j.original.h == 0 {
                return Err(GeometryError::InvalidDims {
                    width: j.original.w,
                    height: j.original.h,
                });
            }
            let mut keypoints = KeypointSet::new(j.canvas.w, j.canvas.h)?;
            for kp in j.keypoints {
                keypoints.insert(kp.name, Point2::new(kp.x, kp.y))?;
            }
            let torso_block = match j.torso_block {
                Some(c) => {
                    let corners = c.map(Point2::from);
                    if !corners.iter().all(|p| p.is_finite()) {
                        return Err(GeometryError::NonFinite);
                    }
                    Some(TorsoBlock { corners })
                }
                None => None,
            };
            Ok(AnnotationRecord {
                image_id: j.image_id,
                pose: j.pose,
                keypoints,
                torso_block,
                provenance: j.provenance,
                original_width: j.original.w,
                original_height: j.original.h,
            })
        }
    }
}
