//! Runtime configuration, read from a TOML file.

use std::net::SocketAddr;
use std::path::Path;

use serde::Deserialize;
use shadowkit_core::geometry::{DEFAULT_CANVAS, DEFAULT_K_MIN, DEFAULT_WIDTH_RATIO};
use shadowkit_core::metrics::LBER_DILATION;
use shadowkit_core::{LightEstimate, Point2, RenderParams, SkeletonTopology};

use crate::error::{line_of, PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyChoice {
    /// Nine limb edges plus the filled torso block.
    Kplm,
    /// Limb edges only.
    KplmNoTorso,
}

impl TopologyChoice {
    pub fn build(self) -> SkeletonTopology {
        let t = SkeletonTopology::kplm();
        match self {
            TopologyChoice::Kplm => t,
            TopologyChoice::KplmNoTorso => {
                SkeletonTopology::new(t.edges().to_vec(), false).expect("default edges are valid")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub alpha: f64,
    pub sigma: f64,
    pub thickness: u32,
    pub ground_line: Option<f64>,
}

impl Default for RenderSection {
    fn default() -> Self {
        let p = RenderParams::default();
        Self {
            alpha: p.alpha,
            sigma: p.sigma,
            thickness: p.limb_thickness,
            ground_line: p.ground_line,
        }
    }
}

/// Fallback light for tuples without usable background evidence.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightSection {
    /// Elevation in radians, within (0, π/2).
    pub theta: f64,
    /// Shadow direction in image coordinates; normalized on load.
    pub azimuth: [f64; 2],
}

impl Default for LightSection {
    fn default() -> Self {
        let l = LightEstimate::default();
        Self {
            theta: l.theta,
            azimuth: [l.azimuth.x, l.azimuth.y],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub k_min: usize,
    pub canvas: [u32; 2],
    pub width_ratio: f64,
    pub topology: TopologyChoice,
    pub render: RenderSection,
    pub light: LightSection,
    pub dilation: u32,
    pub bind: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k_min: DEFAULT_K_MIN,
            canvas: [DEFAULT_CANVAS, DEFAULT_CANVAS],
            width_ratio: DEFAULT_WIDTH_RATIO,
            topology: TopologyChoice::Kplm,
            render: RenderSection::default(),
            light: LightSection::default(),
            dilation: LBER_DILATION,
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::file(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()
            .map_err(|message| PipelineError::Invalid { path: path.to_path_buf(), message })?;
        Ok(cfg)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=9).contains(&self.k_min) {
            return Err(format!("k_min must be within 1..=9, got {}", self.k_min));
        }
        if self.canvas.contains(&0) {
            return Err(format!("canvas must be positive, got {:?}", self.canvas));
        }
        if !(self.width_ratio.is_finite() && self.width_ratio > 0.0) {
            return Err(format!("width_ratio must be positive, got {}", self.width_ratio));
        }
        self.render_params().validate().map_err(|e| e.to_string())?;
        self.default_light().map_err(|e| e.to_string())?;
        self.bind
            .parse::<SocketAddr>()
            .map_err(|e| format!("bind '{}': {e}", self.bind))?;
        Ok(())
    }

    pub fn render_params(&self) -> RenderParams {
        RenderParams {
            alpha: self.render.alpha,
            sigma: self.render.sigma,
            limb_thickness: self.render.thickness,
            ground_line: self.render.ground_line,
            width_ratio: self.width_ratio,
        }
    }

    pub fn default_light(&self) -> Result<LightEstimate> {
        let [x, y] = self.light.azimuth;
        let n = x.hypot(y);
        if !(n.is_finite() && n > 0.0) {
            return Err(shadowkit_core::StaError::NonUnitAzimuth(x, y).into());
        }
        Ok(LightEstimate::from_theta(self.light.theta, Point2::new(x / n, y / n))?)
    }

    pub fn topology(&self) -> SkeletonTopology {
        self.topology.build()
    }
}
