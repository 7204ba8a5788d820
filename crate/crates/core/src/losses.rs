//! Training-loss values over plain arrays.
//!
//! These evaluate the loss formulas of the shadow generator on tensors the
//! caller supplies (noise, predicted noise, masks, discriminator scores,
//! images). Nothing here differentiates or trains. Every reduction is an
//! arithmetic mean computed with fixed-order pairwise summation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::pairwise_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("shape {0:?} does not match {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("mask value {0} outside [0, 1]")]
    MaskRange(f64),
    #[error("loss component {0} is negative")]
    NegativeComponent(f64),
    #[error("input tensor is empty")]
    Empty,
    #[error("feature layer {layer}: shape {pred:?} vs {gt:?}")]
    LayerShapeMismatch {
        layer: usize,
        pred: Vec<usize>,
        gt: Vec<usize>,
    },
    #[error("tensor shape {shape:?} needs {expected} values, got {got}")]
    InvalidTensor {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("tensor contains non-finite values")]
    NonFinite,
}

pub type Result<T, E = LossError> = std::result::Result<T, E>;

/// Dense row-major array of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected = shape.iter().product();
        if expected != values.len() {
            return Err(LossError::InvalidTensor {
                shape,
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFinite);
        }
        Ok(Self { shape, values })
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![value; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(LossError::ShapeMismatch(self.shape.clone(), other.shape.clone()))
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Index into `src` for every element of `target`, numpy-style broadcasting
/// (trailing axes aligned, size-1 axes stretched).
fn broadcast_indices(src: &[usize], target: &[usize]) -> Result<Vec<usize>> {
    let mismatch = || LossError::ShapeMismatch(src.to_vec(), target.to_vec());
    if src.len() > target.len() {
        return Err(mismatch());
    }
    let pad = target.len() - src.len();
    let mut strides = vec![0usize; target.len()];
    let mut stride = 1;
    for i in (0..src.len()).rev() {
        let t = target[pad + i];
        if src[i] == t {
            strides[pad + i] = stride;
        } else if src[i] != 1 {
            return Err(mismatch());
        }
        stride *= src[i];
    }
    let total: usize = target.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; target.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for axis in (0..target.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < target[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    Ok(out)
}

/// Mean of `(w ∘ (eps - eps_hat))²` with `w` a soft shadow mask broadcast to
/// the noise shape.
pub fn masked_weighted_noise_loss(eps: &Tensor, eps_hat: &Tensor, w_fs: &Tensor) -> Result<f64> {
    eps.same_shape(eps_hat)?;
    if eps.is_empty() {
        return Err(LossError::Empty);
    }
    if let Some(&v) = w_fs.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(LossError::MaskRange(v));
    }
    let idx = broadcast_indices(&w_fs.shape, &eps.shape)?;
    let terms: Vec<f64> = eps
        .values
        .iter()
        .zip(&eps_hat.values)
        .zip(idx)
        .map(|((e, h), i)| {
            let d = w_fs.values[i] * (e - h);
            d * d
        })
        .collect();
    Ok(mean(&terms))
}

fn mean_abs_diff(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.same_shape(b)?;
    if a.is_empty() {
        return Err(LossError::Empty);
    }
    let terms: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    Ok(mean(&terms))
}

/// Mean absolute error between a predicted and a reference mask.
pub fn mask_l1_loss(m_hat: &Tensor, m: &Tensor) -> Result<f64> {
    mean_abs_diff(m_hat, m)
}

/// Mean absolute error between a generated and a reference image.
pub fn image_l1_loss(pred: &Tensor, gt: &Tensor) -> Result<f64> {
    mean_abs_diff(pred, gt)
}

fn non_negative(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| v.is_nan() || **v < 0.0) {
        Some(&v) => Err(LossError::NegativeComponent(v)),
        None => Ok(()),
    }
}

/// `l_mwsg + lambda_mask · l_mask`.
pub fn total_diffusion_loss(l_mwsg: f64, l_mask: f64, lambda_mask: f64) -> Result<f64> {
    non_negative(&[l_mwsg, l_mask, lambda_mask])?;
    Ok(l_mwsg + lambda_mask * l_mask)
}

/// Least-squares generator loss: mean of `(score - 1)²` over the patch map.
pub fn adversarial_loss(d_scores: &Tensor) -> Result<f64> {
    if d_scores.is_empty() {
        return Err(LossError::Empty);
    }
    let terms: Vec<f64> = d_scores.values.iter().map(|s| (s - 1.0) * (s - 1.0)).collect();
    Ok(mean(&terms))
}

/// Produces a list of feature maps for an input; the perceptual loss
/// compares them layer by layer.
pub trait FeatureExtractor {
    fn features(&self, x: &Tensor) -> Vec<Tensor>;
}

/// Single layer returning the input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn features(&self, x: &Tensor) -> Vec<Tensor> {
        vec![x.clone()]
    }
}

/// Layers: the input itself, then successive 2× subsamplings of the last two
/// axes (every other row and column, starting at 0).
#[derive(Debug, Clone, Copy)]
pub struct PyramidExtractor {
    pub levels: usize,
}

pub fn subsample2(x: &Tensor) -> Tensor {
    let nd = x.shape.len();
    if nd < 2 {
        let values: Vec<f64> = x.values.iter().step_by(2).copied().collect();
        return Tensor {
            shape: vec![values.len()],
            values,
        };
    }
    let (h, w) = (x.shape[nd - 2], x.shape[nd - 1]);
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let planes = x.values.len() / (h * w).max(1);
    let mut values = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        for y in (0..h).step_by(2) {
            for xx in (0..w).step_by(2) {
                values.push(x.values[p * h * w + y * w + xx]);
            }
        }
    }
    let mut shape = x.shape.clone();
    shape[nd - 2] = oh;
    shape[nd - 1] = ow;
    Tensor { shape, values }
}

impl FeatureExtractor for PyramidExtractor {
    fn features(&self, x: &Tensor) -> Vec<Tensor> {
        let mut out = vec![x.clone()];
        for _ in 1..self.levels {
            let next = subsample2(out.last().expect("non-empty"));
            out.push(next);
        }
        out
    }
}

/// Sum over layers of the mean absolute feature difference.
pub fn perceptual_loss(extractor: &dyn FeatureExtractor, pred: &Tensor, gt: &Tensor) -> Result<f64> {
    let fp = extractor.features(pred);
    let fg = extractor.features(gt);
    if fp.len() != fg.len() {
        return Err(LossError::LayerShapeMismatch {
            layer: fp.len().min(fg.len()),
            pred: vec![fp.len()],
            gt: vec![fg.len()],
        });
    }
    let mut layers = Vec::with_capacity(fp.len());
    for (layer, (a, b)) in fp.iter().zip(&fg).enumerate() {
        if a.shape != b.shape {
            return Err(LossError::LayerShapeMismatch {
                layer,
                pred: a.shape.clone(),
                gt: b.shape.clone(),
            });
        }
        layers.push(mean_abs_diff(a, b)?);
    }
    Ok(pairwise_sum(&layers))
}

/// Trade-off weights for the generator objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_mask: f64,
    pub lambda_adv: f64,
    pub lambda_img: f64,
    pub lambda_perc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_mask: 1.0,
            lambda_adv: 1.0,
            lambda_img: 1.0,
            lambda_perc: 1.0,
        }
    }
}

/// `λ_adv·l_adv + λ_img·l_img + λ_perc·l_perc`.
pub fn total_gan_loss(l_adv: f64, l_img: f64, l_perc: f64, w: &LossWeights) -> Result<f64> {
    non_negative(&[l_adv, l_img, l_perc, w.lambda_adv, w.lambda_img, w.lambda_perc])?;
    Ok(w.lambda_adv * l_adv + w.lambda_img * l_img + w.lambda_perc * l_perc)
}
