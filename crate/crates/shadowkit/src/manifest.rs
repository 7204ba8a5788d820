//! Dataset manifests: JSON files listing evaluation tuples and annotation
//! records, with paths relative to the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shadowkit_core::contour::largest_component;
use shadowkit_core::io::{dimensions, read_mask, read_rgb};
use shadowkit_core::{AnnotationRecord, BinaryMask, RgbImage};

use crate::error::{line_of, PipelineError, Result};

/// Channel difference above which a composite/ground-truth pixel counts as
/// shadow when no explicit mask is given.
pub const SHADOW_DIFF_THRESHOLD: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Background holds object/shadow pairs usable for light estimation.
    Bos,
    BosFree,
}

/// One evaluation tuple. Paths are resolved against the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetTuple {
    pub tuple_id: String,
    pub composite: PathBuf,
    pub fg_object_mask: PathBuf,
    pub ground_truth: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_shadow_mask: Option<PathBuf>,
    pub split: Split,
    /// Background object together with its shadow; required for `bos`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg_object_shadow_mask: Option<PathBuf>,
    /// Background object alone; required for `bos`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg_object_mask: Option<PathBuf>,
}

impl DatasetTuple {
    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.composite, &self.fg_object_mask, &self.ground_truth]
            .into_iter()
            .chain(self.gt_shadow_mask.as_ref())
            .chain(self.bg_object_shadow_mask.as_ref())
            .chain(self.bg_object_mask.as_ref())
    }

    pub fn read_composite(&self) -> Result<RgbImage> {
        Ok(read_rgb(&self.composite)?)
    }

    pub fn read_ground_truth(&self) -> Result<RgbImage> {
        Ok(read_rgb(&self.ground_truth)?)
    }

    pub fn read_fg_mask(&self) -> Result<BinaryMask> {
        Ok(read_mask(&self.fg_object_mask)?)
    }

    /// Background masks `(object+shadow, object)` when both are present.
    pub fn read_background_masks(&self) -> Result<Option<(BinaryMask, BinaryMask)>> {
        match (&self.bg_object_shadow_mask, &self.bg_object_mask) {
            (Some(both), Some(obj)) => Ok(Some((read_mask(both)?, read_mask(obj)?))),
            _ => Ok(None),
        }
    }

    /// The ground-truth shadow mask, derived from the image pair when not
    /// given explicitly.
    pub fn read_gt_shadow_mask(&self) -> Result<BinaryMask> {
        match &self.gt_shadow_mask {
            Some(p) => Ok(read_mask(p)?),
            None => derive_shadow_mask(
                &self.read_composite()?,
                &self.read_ground_truth()?,
                &self.read_fg_mask()?,
            ),
        }
    }
}

/// Pixels whose largest channel difference between composite and ground
/// truth exceeds [`SHADOW_DIFF_THRESHOLD`], minus the foreground object,
/// reduced to the largest 8-connected component.
pub fn derive_shadow_mask(composite: &RgbImage, gt: &RgbImage, fg: &BinaryMask) -> Result<BinaryMask> {
    if composite.dims() != gt.dims() || composite.dims() != fg.dims() {
        let (w, h) = composite.dims();
        return Err(shadowkit_core::MaskError::DimMismatch(w, h, gt.width(), gt.height()).into());
    }
    let (w, h) = composite.dims();
    let diff = BinaryMask::from_fn(w, h, |x, y| {
        let (a, b) = (composite.pixel(x, y), gt.pixel(x, y));
        !fg.get(x, y) && (0..3).any(|c| a[c].abs_diff(b[c]) > SHADOW_DIFF_THRESHOLD)
    })?;
    let mut out = BinaryMask::new(w, h)?;
    if let Some(comp) = largest_component(&diff) {
        for (x, y) in comp.pixels {
            out.set(x as u32, y as u32, true);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default)]
    root: Option<PathBuf>,
    tuples: Vec<DatasetTuple>,
    #[serde(default)]
    annotations: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory holding the manifest file.
    pub dir: PathBuf,
    /// Dataset root; tuple paths below are already joined onto it.
    pub root: PathBuf,
    pub tuples: Vec<DatasetTuple>,
    /// Annotation record paths by image id, resolved against `dir`.
    pub annotations: BTreeMap<String, PathBuf>,
}

impl Manifest {
    pub fn tuple(&self, id: &str) -> Result<&DatasetTuple> {
        self.tuples
            .iter()
            .find(|t| t.tuple_id == id)
            .ok_or_else(|| PipelineError::UnknownTuple(id.to_string()))
    }

    /// Where a committed annotation for `id` is written.
    pub fn default_annotation_path(&self, id: &str) -> PathBuf {
        self.dir.join("annotations").join(format!("{id}.json"))
    }

    /// Listed annotation path, else the default location if a file exists.
    pub fn annotation_path(&self, id: &str) -> Option<PathBuf> {
        self.annotations
            .get(id)
            .cloned()
            .or_else(|| Some(self.default_annotation_path(id)).filter(|p| p.is_file()))
    }

    pub fn load_annotation(&self, id: &str) -> Result<AnnotationRecord> {
        let path = self
            .annotation_path(id)
            .ok_or_else(|| PipelineError::MissingFile { path: self.default_annotation_path(id) })?;
        load_annotation(&path)
    }
}

pub fn load_annotation(path: &Path) -> Result<AnnotationRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::file(path, e))?;
    AnnotationRecord::from_json(&text).map_err(|e| PipelineError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Parses and validates a manifest: unique ids, every referenced file
/// present, all rasters of a tuple the same size, background masks present
/// for `bos` tuples.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::file(path, e))?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|e| PipelineError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let root = file.root.map_or_else(|| dir.clone(), |r| dir.join(r));

    let mut seen = HashSet::new();
    let mut tuples = Vec::with_capacity(file.tuples.len());
    for mut t in file.tuples {
        if !seen.insert(t.tuple_id.clone()) {
            let offset = text.find(&format!("\"{}\"", t.tuple_id)).unwrap_or(0);
            let later = text[offset + 1..]
                .find(&format!("\"{}\"", t.tuple_id))
                .map_or(offset, |o| offset + 1 + o);
            return Err(PipelineError::Parse {
                path: path.to_path_buf(),
                line: line_of(&text, later),
                message: format!("duplicate tuple_id '{}'", t.tuple_id),
            });
        }
        if t.split == Split::Bos && (t.bg_object_mask.is_none() || t.bg_object_shadow_mask.is_none()) {
            return Err(PipelineError::Invalid {
                path: path.to_path_buf(),
                message: format!(
                    "tuple '{}' is split 'bos' but lacks bg_object_mask/bg_object_shadow_mask",
                    t.tuple_id
                ),
            });
        }
        for p in [
            Some(&mut t.composite),
            Some(&mut t.fg_object_mask),
            Some(&mut t.ground_truth),
            t.gt_shadow_mask.as_mut(),
            t.bg_object_shadow_mask.as_mut(),
            t.bg_object_mask.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            *p = root.join(&*p);
        }
        check_dims(&t)?;
        tuples.push(t);
    }
    let annotations = file
        .annotations
        .into_iter()
        .map(|(id, p)| {
            let full = dir.join(p);
            if full.is_file() {
                Ok((id, full))
            } else {
                Err(PipelineError::MissingFile { path: full })
            }
        })
        .collect::<Result<_>>()?;
    Ok(Manifest {
        dir,
        root,
        tuples,
        annotations,
    })
}

fn check_dims(t: &DatasetTuple) -> Result<()> {
    let mut want = None;
    for p in t.paths() {
        let (w, h) = dimensions(p).map_err(|e| match e {
            shadowkit_core::io::IoError::NotFound { path } => PipelineError::MissingFile { path },
            e => e.into(),
        })?;
        match want {
            None => want = Some((w, h)),
            Some((ww, wh)) if (ww, wh) != (w, h) => {
                return Err(PipelineError::DimMismatch {
                    id: t.tuple_id.clone(),
                    path: p.clone(),
                    got_w: w,
                    got_h: h,
                    want_w: ww,
                    want_h: wh,
                })
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_mask_keeps_largest_difference_outside_object() {
        let base = RgbImage::filled(8, 4, [200, 200, 200]).unwrap();
        let mut comp = base.clone();
        // Large blob x 4..7, a stray pixel at (0, 0), and an object pixel at (1, 3).
        for x in 4..8 {
            for y in 0..2 {
                comp.put_pixel(x, y, [150, 150, 150]);
            }
        }
        comp.put_pixel(0, 0, [100, 200, 200]);
        comp.put_pixel(1, 3, [0, 0, 0]);
        // Below-threshold change is ignored.
        comp.put_pixel(2, 2, [190, 200, 200]);
        let fg = BinaryMask::from_fn(8, 4, |x, y| (x, y) == (1, 3)).unwrap();
        let m = derive_shadow_mask(&comp, &base, &fg).unwrap();
        assert_eq!(m.count(), 8);
        assert!(m.get(4, 0) && !m.get(0, 0) && !m.get(1, 3) && !m.get(2, 2));
    }
}
