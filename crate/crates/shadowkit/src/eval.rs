//! Batch evaluation of predicted images against a manifest.
//!
//! Predictions live in one directory as `<tuple_id>.png`, optionally with a
//! predicted shadow mask `<tuple_id>_mask.png`. Without the mask file the
//! predicted shadow is derived from the composite/prediction difference the
//! same way missing ground-truth masks are.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shadowkit_core::io::{read_mask, read_rgb};
use shadowkit_core::metrics::{evaluate_tuple_with, summarize, MetricReport, MetricSummary};
use shadowkit_core::par::*;

use crate::config::Config;
use crate::error::{PipelineError, Result};
use crate::manifest::{derive_shadow_mask, DatasetTuple, Manifest, Split};

pub const CSV_HEADER: [&str; 8] = ["tuple_id", "grmse", "lrmse", "gssim", "lssim", "gber", "lber", "psnr"];

pub fn prediction_paths(pred_dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (pred_dir.join(format!("{id}.png")), pred_dir.join(format!("{id}_mask.png")))
}

pub fn evaluate_one(tuple: &DatasetTuple, pred_dir: &Path, cfg: &Config) -> Result<MetricReport> {
    let run = || -> Result<MetricReport> {
        let (img_path, mask_path) = prediction_paths(pred_dir, &tuple.tuple_id);
        let pred = read_rgb(&img_path)?;
        let gt = tuple.read_ground_truth()?;
        let gt_mask = tuple.read_gt_shadow_mask()?;
        let pred_mask = if mask_path.is_file() {
            read_mask(&mask_path)?
        } else {
            derive_shadow_mask(&tuple.read_composite()?, &pred, &tuple.read_fg_mask()?)?
        };
        Ok(evaluate_tuple_with(&tuple.tuple_id, &pred, &gt, &gt_mask, &pred_mask, cfg.dilation)?)
    };
    run().map_err(|e| e.in_tuple(&tuple.tuple_id))
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub all: MetricSummary,
    pub bos: MetricSummary,
    pub bos_free: MetricSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub reports: Vec<MetricReport>,
    pub summary: EvalSummary,
}

/// Evaluates every tuple, in parallel; reports keep manifest order.
pub fn evaluate_manifest(manifest: &Manifest, pred_dir: &Path, cfg: &Config) -> Result<Evaluation> {
    let reports = manifest
        .tuples
        .par_iter()
        .map(|t| evaluate_one(t, pred_dir, cfg))
        .collect::<Result<Vec<_>>>()?;
    let split_of = |split: Split| {
        let picked: Vec<MetricReport> = manifest
            .tuples
            .iter()
            .zip(&reports)
            .filter(|(t, _)| t.split == split)
            .map(|(_, r)| r.clone())
            .collect();
        summarize(&picked)
    };
    let summary = EvalSummary {
        all: summarize(&reports),
        bos: split_of(Split::Bos),
        bos_free: split_of(Split::BosFree),
    };
    Ok(Evaluation { reports, summary })
}

fn cell(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v}"),
    }
}

pub fn write_csv<W: Write>(out: W, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| PipelineError::File {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e),
    };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.tuple_id.clone(),
            cell(Some(r.grmse)),
            cell(r.lrmse),
            cell(Some(r.gssim)),
            cell(r.lssim),
            cell(r.gber),
            cell(r.lber),
            cell(Some(r.psnr)),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| PipelineError::File { path: PathBuf::from("<csv>"), source: e })?;
    Ok(())
}
