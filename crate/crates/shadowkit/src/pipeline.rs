//! The per-tuple shadow pipeline: light → projection → rendering →
//! softening → compositing → K-consistency report.

use serde::Serialize;
use shadowkit_core::render::apply_ground_line;
use shadowkit_core::{
    composite_shadow, estimate_light_from_background, project_skeleton_onto, render_shadow_mask,
    soften_mask, validate_k_consistency, AnnotationRecord, BinaryMask, KReport, LightEstimate, RenderParams,
    RgbImage, SkeletonTopology, StaError,
};

use crate::config::Config;
use crate::error::Result;
use crate::manifest::{DatasetTuple, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LightSource {
    /// Given explicitly by the caller.
    Override,
    /// Recovered from the background object and its shadow.
    Estimated,
    /// The configured default.
    Default,
}

/// Per-call adjustments on top of the configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub light: Option<LightEstimate>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ShadowOutput {
    pub image: RgbImage,
    /// Hard rendered shadow outside the foreground object.
    pub shadow_mask: BinaryMask,
    pub light: LightEstimate,
    pub light_source: LightSource,
    pub k_report: KReport,
}

/// Light for a tuple: the override if any, else the background estimate for
/// `bos` tuples, else the configured default. A background without shadow
/// evidence falls back to the default as well.
pub fn resolve_light(tuple: &DatasetTuple, cfg: &Config, over: Option<LightEstimate>) -> Result<(LightEstimate, LightSource)> {
    if let Some(l) = over {
        return Ok((l, LightSource::Override));
    }
    if tuple.split == Split::Bos {
        if let Some((both, obj)) = tuple.read_background_masks()? {
            match estimate_light_from_background(&both, &obj) {
                Ok(l) => return Ok((l, LightSource::Estimated)),
                Err(e @ (StaError::DegenerateTriangle | StaError::NoContours)) => {
                    log::warn!("{}: {e}; using the default light", tuple.tuple_id);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((cfg.default_light()?, LightSource::Default))
}

/// Renders `rec`'s shadow under `light` onto `base`, leaving `fg` untouched.
pub fn render_onto(
    base: &RgbImage,
    fg: &BinaryMask,
    rec: &AnnotationRecord,
    topo: &SkeletonTopology,
    light: &LightEstimate,
    params: &RenderParams,
) -> Result<(RgbImage, BinaryMask, KReport)> {
    let (w, h) = base.dims();
    let skeleton = project_skeleton_onto(rec, w, h, topo, light, params)?;
    let mut mask = render_shadow_mask(&skeleton, w, h)?;
    apply_ground_line(&mut mask, params.ground_line);
    let mask = mask.difference(fg)?;
    let soft = soften_mask(&mask, params.sigma)?;
    let image = composite_shadow(base, &soft, fg, params.alpha)?;
    let k_report = validate_k_consistency(&skeleton.correspondences())?;
    Ok((image, mask, k_report))
}

pub fn run_shadow_pipeline(
    tuple: &DatasetTuple,
    rec: &AnnotationRecord,
    cfg: &Config,
    over: &Overrides,
) -> Result<ShadowOutput> {
    let run = || -> Result<ShadowOutput> {
        let base = tuple.read_composite()?;
        let fg = tuple.read_fg_mask()?;
        let (light, light_source) = resolve_light(tuple, cfg, over.light)?;
        let mut params = cfg.render_params();
        params.alpha = over.alpha.unwrap_or(params.alpha);
        params.sigma = over.sigma.unwrap_or(params.sigma);
        let (image, shadow_mask, k_report) = render_onto(&base, &fg, rec, &cfg.topology(), &light, &params)?;
        Ok(ShadowOutput {
            image,
            shadow_mask,
            light,
            light_source,
            k_report,
        })
    };
    run().map_err(|e| e.in_tuple(&tuple.tuple_id))
}
