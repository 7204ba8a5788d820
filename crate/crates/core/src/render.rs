//! Ground-shadow rendering for a keypoint skeleton.
//!
//! Shadows are chained up from the ground: the ankles touch the ground and
//! are their own shadows; every other point's shadow is its parent's shadow
//! pushed along the light azimuth by `limb length / K`. Each topology edge is
//! projected from the endpoint nearer the ground, so limb shadows stay
//! attached to the leg and torso shadows they hang from.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    limb_name, rescale_annotation, Anchor, AnnotationRecord, GeometryError, KeypointName, Point2,
    SkeletonTopology, TorsoBlock, DEFAULT_WIDTH_RATIO,
};
use crate::mask::{same_dims, BinaryMask, MaskError, RgbImage, SoftMask};
use crate::par::*;
use crate::raster::{draw_segment, fill_polygon};
use crate::sta::{project_shadow_point, LightEstimate, LimbCorrespondence, StaError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sta(#[from] StaError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("blur sigma must be non-negative and finite, got {0}")]
    NegativeSigma(f64),
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaRange(f64),
    #[error("invalid render parameter: {0}")]
    InvalidParams(String),
}

pub type Result<T, E = RenderError> = std::result::Result<T, E>;

/// Shadow appearance and rasterization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    /// Shadow darkness in `[0, 1]`.
    pub alpha: f64,
    /// Gaussian blur standard deviation in pixels.
    pub sigma: f64,
    /// Segment thickness in pixels.
    pub limb_thickness: u32,
    /// Rows above this y-coordinate never receive shadow.
    pub ground_line: Option<f64>,
    /// Torso half-width ratio used when a record has no stored block.
    pub width_ratio: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            alpha: 0.45,
            sigma: 2.0,
            limb_thickness: 5,
            ground_line: None,
            width_ratio: DEFAULT_WIDTH_RATIO,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RenderError::AlphaRange(self.alpha));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(RenderError::NegativeSigma(self.sigma));
        }
        if self.limb_thickness == 0 {
            return Err(GeometryError::InvalidThickness(0).into());
        }
        if !(self.width_ratio > 0.0 && self.width_ratio.is_finite()) {
            return Err(RenderError::InvalidParams(format!(
                "width_ratio must be positive, got {}",
                self.width_ratio
            )));
        }
        if self.ground_line.is_some_and(|g| !g.is_finite()) {
            return Err(RenderError::InvalidParams("ground_line must be finite".into()));
        }
        Ok(())
    }
}

/// One projected limb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowSegment {
    pub limb_name: String,
    /// Ground-side body endpoint the shadow is cast from.
    pub body_anchor: Point2,
    /// Opposite body endpoint.
    pub body_end: Point2,
    pub start: Point2,
    pub end: Point2,
    pub thickness: u32,
}

impl ShadowSegment {
    pub fn limb_length(&self) -> f64 {
        self.body_anchor.distance(self.body_end)
    }

    pub fn shadow_length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// Correspondence whose shadow tip reproduces this segment's length.
    pub fn correspondence(&self) -> LimbCorrespondence {
        LimbCorrespondence {
            limb_name: self.limb_name.clone(),
            p1: self.body_end,
            p2: self.body_anchor,
            p3: self.body_anchor + (self.end - self.start),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowSkeleton {
    pub segments: Vec<ShadowSegment>,
    /// Projected torso block, same corner order as [`TorsoBlock`].
    pub block_quad: [Point2; 4],
    /// Whether `block_quad` should be filled when rendering.
    pub fill_block: bool,
}

impl ShadowSkeleton {
    pub fn correspondences(&self) -> Vec<LimbCorrespondence> {
        self.segments.iter().map(ShadowSegment::correspondence).collect()
    }
}

struct Caster {
    light: LightEstimate,
}

impl Caster {
    /// Shadow of `to`, given that `from` (a body point) casts its shadow at
    /// `from_shadow`.
    fn cast(&self, from: Point2, from_shadow: Point2, to: Point2) -> Result<Point2> {
        let tip = project_shadow_point(to, from, self.light.k, self.light.azimuth)?;
        Ok(from_shadow + (tip - from))
    }
}

/// Shadow positions of every anchor of one body.
struct ShadowChain {
    body: [Point2; 11],
    shadow: [Point2; 11],
}

fn slot(anchor: Anchor) -> usize {
    match anchor {
        Anchor::Keypoint(n) => n.index(),
        Anchor::TorsoTop => 9,
        Anchor::TorsoBottom => 10,
    }
}

impl ShadowChain {
    fn build(rec: &AnnotationRecord, torso: &TorsoBlock, caster: &Caster) -> Result<Self> {
        use KeypointName::*;
        let mut body = [Point2::default(); 11];
        for name in KeypointName::ALL {
            body[name.index()] = rec.keypoints.require(name)?;
        }
        body[9] = torso.top_center();
        body[10] = torso.bottom_center();

        let mut shadow = [Point2::default(); 11];
        let mut hips = [Point2::default(); 2];
        for (i, (ankle, knee)) in [(AnkleL, KneeL), (AnkleR, KneeR)].into_iter().enumerate() {
            let (a, k) = (ankle.index(), knee.index());
            shadow[a] = body[a];
            shadow[k] = caster.cast(body[a], shadow[a], body[k])?;
            hips[i] = caster.cast(body[k], shadow[k], body[10])?;
        }
        shadow[10] = hips[0].midpoint(hips[1]);
        shadow[9] = caster.cast(body[10], shadow[10], body[9])?;
        shadow[Head.index()] = caster.cast(body[9], shadow[9], body[Head.index()])?;
        for (elbow, wrist) in [(ElbowL, WristL), (ElbowR, WristR)] {
            let (e, w) = (elbow.index(), wrist.index());
            shadow[e] = caster.cast(body[9], shadow[9], body[e])?;
            shadow[w] = caster.cast(body[e], shadow[e], body[w])?;
        }
        Ok(Self { body, shadow })
    }

    fn body(&self, a: Anchor) -> Point2 {
        self.body[slot(a)]
    }

    fn shadow(&self, a: Anchor) -> Point2 {
        self.shadow[slot(a)]
    }
}

/// Projects every topology edge and the torso block through `light`.
///
/// Coordinates stay in the record's canvas space; rescale the record first
/// to render against a particular image.
pub fn project_skeleton(
    rec: &AnnotationRecord,
    topo: &SkeletonTopology,
    light: &LightEstimate,
    params: &RenderParams,
) -> Result<ShadowSkeleton> {
    rec.require_complete()?;
    params.validate()?;
    LightEstimate::from_k(light.k, light.azimuth)?;
    let caster = Caster { light: *light };
    let torso = rec.resolved_torso(params.width_ratio)?;
    let chain = ShadowChain::build(rec, &torso, &caster)?;

    let segments = topo
        .edges()
        .iter()
        .map(|&(a, b)| {
            let (anchor, other) = if b.ground_rank() < a.ground_rank() { (b, a) } else { (a, b) };
            let (body_anchor, body_end) = (chain.body(anchor), chain.body(other));
            let start = chain.shadow(anchor);
            Ok(ShadowSegment {
                limb_name: limb_name(a, b),
                body_anchor,
                body_end,
                start,
                end: caster.cast(body_anchor, start, body_end)?,
                thickness: params.limb_thickness,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let bottom = torso.bottom_center();
    let hip_shift = chain.shadow(Anchor::TorsoBottom) - bottom;
    let [tl, tr, br, bl] = torso.corners;
    let (sbl, sbr) = (bl + hip_shift, br + hip_shift);
    let block_quad = [
        caster.cast(bl, sbl, tl)?,
        caster.cast(br, sbr, tr)?,
        sbr,
        sbl,
    ];
    Ok(ShadowSkeleton {
        segments,
        block_quad,
        fill_block: topo.include_torso(),
    })
}

/// [`project_skeleton`] after rescaling the record onto a `width × height`
/// raster.
pub fn project_skeleton_onto(
    rec: &AnnotationRecord,
    width: u32,
    height: u32,
    topo: &SkeletonTopology,
    light: &LightEstimate,
    params: &RenderParams,
) -> Result<ShadowSkeleton> {
    project_skeleton(&rescale_annotation(rec, width, height)?, topo, light, params)
}

/// Rasterizes the union of all shadow segments and the projected block.
pub fn render_shadow_mask(sk: &ShadowSkeleton, out_w: u32, out_h: u32) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(out_w, out_h)?;
    for seg in &sk.segments {
        draw_segment(&mut mask, seg.start, seg.end, seg.thickness)?;
    }
    if sk.fill_block {
        fill_polygon(&mut mask, &sk.block_quad)?;
    }
    Ok(mask)
}

/// Removes shadow above the ground line, if one is set.
pub fn apply_ground_line(mask: &mut BinaryMask, ground_line: Option<f64>) {
    if let Some(g) = ground_line {
        mask.clear_above(g.ceil().clamp(0.0, f64::from(u32::MAX)) as u32);
    }
}

/// Normalized 1-D Gaussian truncated at `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Symmetric reflection: `-1 → 0`, `n → n - 1`.
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian blur of a hard mask with reflective borders.
pub fn soften_mask(m: &BinaryMask, sigma: f64) -> Result<SoftMask> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(RenderError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(SoftMask::from(m));
    }
    let (w, h) = (m.width() as usize, m.height() as usize);
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let src = m.values();

    let mut horiz = vec![0.0; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let line = &src[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            *out = kernel
                .iter()
                .enumerate()
                .map(|(j, k)| k * f64::from(line[reflect(x as i64 + j as i64 - r, w)]))
                .sum();
        }
    });

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (j, k) in kernel.iter().enumerate() {
            let sy = reflect(y as i64 + j as i64 - r, h);
            let line = &horiz[sy * w..(sy + 1) * w];
            for (o, v) in row.iter_mut().zip(line) {
                *o += k * v;
            }
        }
    });
    Ok(SoftMask::from_clamped(m.width(), m.height(), out))
}

/// Darkens `base` by `1 - alpha·shadow` everywhere outside the foreground.
pub fn composite_shadow(
    base: &RgbImage,
    shadow: &SoftMask,
    fg_mask: &BinaryMask,
    alpha: f64,
) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(RenderError::AlphaRange(alpha));
    }
    same_dims(base.dims(), shadow.dims())?;
    same_dims(base.dims(), fg_mask.dims())?;
    let mut out = base.as_raw().to_vec();
    let (fg, s) = (fg_mask.values(), shadow.values());
    out.par_chunks_mut(3).enumerate().for_each(|(i, px)| {
        if fg[i] == 0 {
            let factor = 1.0 - alpha * s[i];
            for c in px.iter_mut() {
                *c = (f64::from(*c) * factor).round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    Ok(RgbImage::from_raw(base.width(), base.height(), out)?)
}
