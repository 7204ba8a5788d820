//! Shadow-quality metrics.
//!
//! Global metrics cover the whole image; local ones are restricted to a
//! region, normally the ground-truth shadow. RMSE and PSNR work on 8-bit RGB
//! intensities, SSIM on Rec.601 luma with an 11×11 Gaussian window, and the
//! balanced error rate on binary shadow masks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{same_dims, BinaryMask, MaskError, RgbImage};
use crate::par::pairwise_mean;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
/// Default dilation of the ground-truth shadow for the local BER region.
pub const LBER_DILATION: u32 = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    DimMismatch(#[from] MaskError),
    #[error("evaluation region is empty")]
    EmptyRegion,
    #[error("image {0}x{1} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")]
    TooSmall(u32, u32),
    #[error("ground truth has a single class inside the region; BER is undefined")]
    SingleClassRegion,
    #[error("images are identical; PSNR is infinite")]
    InfinitePsnr,
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

fn included(region: Option<&BinaryMask>, i: usize) -> bool {
    region.is_none_or(|r| r.values()[i] != 0)
}

fn check_region(dims: (u32, u32), region: Option<&BinaryMask>) -> Result<()> {
    if let Some(r) = region {
        same_dims(dims, r.dims())?;
        if r.is_empty() {
            return Err(MetricError::EmptyRegion);
        }
    }
    Ok(())
}

/// Sum of squared channel differences and the number of samples included.
fn squared_error(pred: &RgbImage, gt: &RgbImage, region: Option<&BinaryMask>) -> Result<(u64, u64)> {
    same_dims(pred.dims(), gt.dims())?;
    check_region(pred.dims(), region)?;
    let mut sse = 0u64;
    let mut n = 0u64;
    for (i, (p, g)) in pred.as_raw().chunks_exact(3).zip(gt.as_raw().chunks_exact(3)).enumerate() {
        if included(region, i) {
            for c in 0..3 {
                let d = i64::from(p[c]) - i64::from(g[c]);
                sse += (d * d) as u64;
            }
            n += 3;
        }
    }
    Ok((sse, n))
}

/// Root-mean-square intensity error over all channels of included pixels.
pub fn rmse(pred: &RgbImage, gt: &RgbImage, region: Option<&BinaryMask>) -> Result<f64> {
    let (sse, n) = squared_error(pred, gt, region)?;
    Ok((sse as f64 / n as f64).sqrt())
}

/// `20·log10(255) - 10·log10(MSE)` over the whole image.
pub fn psnr(pred: &RgbImage, gt: &RgbImage) -> Result<f64> {
    let (sse, n) = squared_error(pred, gt, None)?;
    if sse == 0 {
        return Err(MetricError::InfinitePsnr);
    }
    Ok(20.0 * 255f64.log10() - 10.0 * (sse as f64 / n as f64).log10())
}

/// Normalized 1-D SSIM window weights.
pub fn ssim_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Valid-mode separable filtering of a `w × h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (j, kj) in k.iter().enumerate() {
            let src = &horiz[(y + j) * ow..(y + j + 1) * ow];
            for (o, v) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += kj * v;
            }
        }
    }
    out
}

/// Mean SSIM over windows whose centre pixel lies in the region (all fully
/// inside the image).
pub fn ssim(pred: &RgbImage, gt: &RgbImage, region: Option<&BinaryMask>) -> Result<f64> {
    same_dims(pred.dims(), gt.dims())?;
    check_region(pred.dims(), region)?;
    let (w, h) = (pred.width() as usize, pred.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall(pred.width(), pred.height()));
    }
    let a = pred.luma();
    let b = gt.luma();
    let k = ssim_window();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        let v: Vec<f64> = a.iter().zip(&b).map(|(x, y)| f(*x, *y)).collect();
        filter_valid(&v, w, h, &k)
    };
    let mu_a = filter_valid(&a, w, h, &k);
    let mu_b = filter_valid(&b, w, h, &k);
    let aa = prod(&|x, _| x * x);
    let bb = prod(&|_, y| y * y);
    let ab = prod(&|x, y| x * y);

    let ow = w - SSIM_WINDOW + 1;
    let half = SSIM_WINDOW / 2;
    let mut values = Vec::with_capacity(mu_a.len());
    for (i, (&ma, &mb)) in mu_a.iter().zip(&mu_b).enumerate() {
        let (cx, cy) = (i % ow + half, i / ow + half);
        if !included(region, cy * w + cx) {
            continue;
        }
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        values.push(
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2)),
        );
    }
    pairwise_mean(&values).ok_or(MetricError::EmptyRegion)
}

/// Confusion counts of a predicted mask against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BerCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl BerCounts {
    /// `0.5 · (FN / (TP + FN) + FP / (FP + TN))`.
    pub fn ber(&self) -> Result<f64> {
        let pos = self.tp + self.fn_;
        let neg = self.fp + self.tn;
        if pos == 0 || neg == 0 {
            return Err(MetricError::SingleClassRegion);
        }
        Ok(0.5 * (self.fn_ as f64 / pos as f64 + self.fp as f64 / neg as f64))
    }
}

pub fn ber_counts(pred: &BinaryMask, gt: &BinaryMask, region: Option<&BinaryMask>) -> Result<BerCounts> {
    pred.ensure_same_dims(gt)?;
    check_region(pred.dims(), region)?;
    let mut c = BerCounts::default();
    for (i, (&p, &g)) in pred.values().iter().zip(gt.values()).enumerate() {
        if !included(region, i) {
            continue;
        }
        match (p != 0, g != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Balanced error rate with `gt` as the reference.
pub fn ber(pred: &BinaryMask, gt: &BinaryMask, region: Option<&BinaryMask>) -> Result<f64> {
    ber_counts(pred, gt, region)?.ber()
}

/// Metrics for one evaluated tuple. Local values and BERs are `None` when
/// their region is empty or single-class; `psnr` is `+inf` for identical
/// images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tuple_id: String,
    pub grmse: f64,
    pub lrmse: Option<f64>,
    pub gssim: f64,
    pub lssim: Option<f64>,
    pub gber: Option<f64>,
    pub lber: Option<f64>,
    pub psnr: f64,
}

fn absent_if<T>(r: Result<T>, absent: impl Fn(&MetricError) -> bool) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if absent(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Evaluates one prediction against its ground truth with the default
/// local-BER dilation.
pub fn evaluate_tuple(
    tuple_id: &str,
    pred: &RgbImage,
    gt: &RgbImage,
    gt_shadow_mask: &BinaryMask,
    pred_shadow_mask: &BinaryMask,
) -> Result<MetricReport> {
    evaluate_tuple_with(tuple_id, pred, gt, gt_shadow_mask, pred_shadow_mask, LBER_DILATION)
}

pub fn evaluate_tuple_with(
    tuple_id: &str,
    pred: &RgbImage,
    gt: &RgbImage,
    gt_shadow_mask: &BinaryMask,
    pred_shadow_mask: &BinaryMask,
    lber_dilation: u32,
) -> Result<MetricReport> {
    same_dims(pred.dims(), gt.dims())?;
    same_dims(pred.dims(), gt_shadow_mask.dims())?;
    same_dims(pred.dims(), pred_shadow_mask.dims())?;
    let empty = |e: &MetricError| matches!(e, MetricError::EmptyRegion);
    let single = |e: &MetricError| matches!(e, MetricError::SingleClassRegion | MetricError::EmptyRegion);
    let local = gt_shadow_mask.dilate_disc(lber_dilation);
    Ok(MetricReport {
        tuple_id: tuple_id.to_string(),
        grmse: rmse(pred, gt, None)?,
        lrmse: absent_if(rmse(pred, gt, Some(gt_shadow_mask)), empty)?,
        gssim: ssim(pred, gt, None)?,
        lssim: absent_if(ssim(pred, gt, Some(gt_shadow_mask)), empty)?,
        gber: absent_if(ber(pred_shadow_mask, gt_shadow_mask, None), single)?,
        lber: absent_if(ber(pred_shadow_mask, gt_shadow_mask, Some(&local)), single)?,
        psnr: match psnr(pred, gt) {
            Ok(v) => v,
            Err(MetricError::InfinitePsnr) => f64::INFINITY,
            Err(e) => return Err(e),
        },
    })
}

/// Per-metric means over a set of reports; absent values are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub grmse: Option<f64>,
    pub lrmse: Option<f64>,
    pub gssim: Option<f64>,
    pub lssim: Option<f64>,
    pub gber: Option<f64>,
    pub lber: Option<f64>,
    /// Mean over finite PSNR values only.
    pub psnr: Option<f64>,
}

pub fn summarize(reports: &[MetricReport]) -> MetricSummary {
    let mean = |f: &dyn Fn(&MetricReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        pairwise_mean(&v)
    };
    MetricSummary {
        count: reports.len(),
        grmse: mean(&|r| Some(r.grmse)),
        lrmse: mean(&|r| r.lrmse),
        gssim: mean(&|r| Some(r.gssim)),
        lssim: mean(&|r| r.lssim),
        gber: mean(&|r| r.gber),
        lber: mean(&|r| r.lber),
        psnr: mean(&|r| Some(r.psnr).filter(|v| v.is_finite())),
    }
}
