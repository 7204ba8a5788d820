//! Keypoint-driven shadow geometry.
//!
//! The crate models a person as nine keypoints plus a torso block, extracts
//! shadow triangles from object/shadow masks to estimate a parallel light,
//! projects the skeleton into a ground shadow, composites it, and scores the
//! result with the usual shadow-generation metrics.
//!
//! Data-parallel loops (blur rows, batch evaluation) run on Rayon when the
//! `parallel` feature is enabled and sequentially otherwise; results are
//! identical either way.

pub mod contour;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod par;
pub mod raster;
pub mod render;
pub mod sta;

pub use geometry::{
    derive_torso_block, rescale_annotation, Anchor, AnnotationRecord, AnnotationSession,
    GeometryError, KeypointName, KeypointSet, Point2, Pose, Provenance, SessionState,
    SkeletonTopology, TorsoBlock,
};
pub use mask::{mask_iou, BinaryMask, MaskError, RgbImage, SoftMask};
pub use raster::rasterize_skeleton;
pub use metrics::{evaluate_tuple, BerCounts, MetricError, MetricReport, MetricSummary};
pub use render::{
    composite_shadow, project_skeleton, project_skeleton_onto, render_shadow_mask, soften_mask,
    RenderError, RenderParams, ShadowSegment, ShadowSkeleton,
};
pub use sta::{
    compute_k, estimate_light_from_background, extract_shadow_triangle, k_from_theta,
    project_shadow_point, theta_from_k, validate_k_consistency, KReport, LightEstimate,
    LimbCorrespondence, ShadowTriangle, StaError,
};
