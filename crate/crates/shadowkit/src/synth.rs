//! Synthetic scenes with a known parallel light: a standing person, a
//! background pole with its cast shadow, and a small on-disk dataset built
//! from them.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;
use shadowkit_core::io::{write_mask, write_rgb};
use shadowkit_core::raster::{draw_segment, fill_polygon};
use shadowkit_core::{
    rasterize_skeleton, AnnotationRecord, BinaryMask, KeypointSet, LightEstimate, Point2, Pose, Provenance,
    RgbImage,
};

use crate::config::Config;
use crate::error::{PipelineError, Result};
use crate::pipeline::render_onto;

/// Keypoints of a front-facing standing person, as offsets from the point
/// between the ankles in units of body height (head at -1).
const PERSON: [(f64, f64); 9] = [
    (0.0, -1.0),
    (-0.13, -0.72),
    (0.13, -0.72),
    (-0.17, -0.52),
    (0.17, -0.52),
    (-0.05, -0.28),
    (0.05, -0.28),
    (-0.06, 0.0),
    (0.06, 0.0),
];

/// Standing person whose ankles straddle `feet` on a `canvas × canvas`
/// annotation canvas.
pub fn person(id: &str, canvas: u32, feet: Point2, height: f64) -> Result<AnnotationRecord> {
    let points = PERSON.map(|(dx, dy)| feet + Point2::new(dx, dy) * height);
    Ok(AnnotationRecord {
        image_id: id.to_string(),
        pose: Pose::Front,
        keypoints: KeypointSet::from_ordered(canvas, canvas, points)?,
        torso_block: None,
        provenance: Provenance::Manual,
        original_width: canvas,
        original_height: canvas,
    })
}

/// Vertical pole `width` pixels wide standing on `base` with height
/// `height`, and the same pole plus its shadow cast under `light` as a
/// 3-pixel segment from the base centre.
pub fn pole_with_shadow(
    w: u32,
    h: u32,
    base: Point2,
    height: f64,
    width: f64,
    light: &LightEstimate,
) -> Result<(BinaryMask, BinaryMask)> {
    let half = width / 2.0;
    let mut obj = BinaryMask::new(w, h)?;
    fill_polygon(
        &mut obj,
        &[
            Point2::new(base.x - half, base.y - height),
            Point2::new(base.x + half, base.y - height),
            Point2::new(base.x + half, base.y),
            Point2::new(base.x - half, base.y),
        ],
    )?;
    let mut both = obj.clone();
    draw_segment(&mut both, base, base + light.azimuth * (height / light.k), 3)?;
    Ok((both, obj))
}

/// Base and height of a pole whose whole shadow lies inside the image: the
/// shadow is centred on the image centre, and the pole is shortened until
/// the shadow fits.
fn pole_placement(size: u32, light: &LightEstimate) -> Option<(Point2, f64)> {
    let s = f64::from(size);
    let (lo, hi) = (0.05 * s, 0.95 * s);
    let inside = |p: Point2| (lo..=hi).contains(&p.x) && (lo..=hi).contains(&p.y);
    let mut height = 0.25 * s;
    while height >= 0.08 * s {
        let d = light.azimuth * (height / light.k);
        let base = Point2::new(0.5 * s, 0.5 * s) - d * 0.5;
        if inside(base) && inside(base + d) && base.y - height >= lo {
            return Some((base, height));
        }
        height *= 0.9;
    }
    None
}

fn background(w: u32, h: u32) -> Result<RgbImage> {
    let mut img = RgbImage::new(w, h)?;
    for y in 0..h {
        for x in 0..w {
            let g = 150 + (60 * y / h.max(1)) as u8;
            img.put_pixel(x, y, [g, g.saturating_sub(10), g.saturating_sub(25)]);
        }
    }
    Ok(img)
}

fn paint(img: &mut RgbImage, mask: &BinaryMask, rgb: [u8; 3]) {
    for (x, y) in mask.ones() {
        img.put_pixel(x, y, rgb);
    }
}

fn darken(img: &mut RgbImage, mask: &BinaryMask, factor: f64) {
    for (x, y) in mask.ones() {
        let p = img.pixel(x, y);
        img.put_pixel(x, y, p.map(|c| (f64::from(c) * factor).round() as u8));
    }
}

/// One synthetic tuple of a fixture dataset.
#[derive(Debug, Clone)]
pub struct FixtureTuple {
    pub id: String,
    pub light: LightEstimate,
    pub bos: bool,
}

/// Writes `manifest.json`, images, masks and annotations for `tuples` under
/// `dir`. Every image is `size × size`; the ground truth carries the
/// person's shadow rendered under the tuple's light with `cfg`'s render
/// settings.
pub fn write_fixture(dir: &Path, size: u32, tuples: &[FixtureTuple], cfg: &Config) -> Result<()> {
    let canvas = cfg.canvas[0];
    let scale = f64::from(size) / f64::from(canvas);
    let mut entries = Vec::new();
    let mut annotations = BTreeMap::new();
    for t in tuples {
        let rec = person(&t.id, canvas, Point2::new(0.32, 0.82) * f64::from(canvas), 0.55 * f64::from(canvas))?;
        let fg = rasterize_skeleton(&rec, &cfg.topology(), (7.0 * scale).round().max(1.0) as u32, size, size, cfg.width_ratio)?;
        let mut composite = background(size, size)?;
        let mut entry = json!({
            "tuple_id": t.id,
            "composite": format!("{}/composite.png", t.id),
            "fg_object_mask": format!("{}/fg_mask.png", t.id),
            "ground_truth": format!("{}/gt.png", t.id),
            "split": if t.bos { "bos" } else { "bos_free" },
        });
        if t.bos {
            let (base, height) = pole_placement(size, &t.light).ok_or_else(|| PipelineError::Invalid {
                path: dir.to_path_buf(),
                message: format!("{}: the pole shadow does not fit a {size}x{size} image at this light", t.id),
            })?;
            let (both, obj) = pole_with_shadow(size, size, base, height, 5.0, &t.light)?;
            let shadow = both.difference(&obj)?;
            darken(&mut composite, &shadow, 0.55);
            paint(&mut composite, &obj, [90, 70, 50]);
            write_mask(&dir.join(&t.id).join("bg_both.png"), &both)?;
            write_mask(&dir.join(&t.id).join("bg_obj.png"), &obj)?;
            entry["bg_object_shadow_mask"] = json!(format!("{}/bg_both.png", t.id));
            entry["bg_object_mask"] = json!(format!("{}/bg_obj.png", t.id));
        }
        paint(&mut composite, &fg, [40, 60, 150]);
        let (gt, _, _) = render_onto(&composite, &fg, &rec, &cfg.topology(), &t.light, &cfg.render_params())?;
        write_rgb(&dir.join(&t.id).join("composite.png"), &composite)?;
        write_rgb(&dir.join(&t.id).join("gt.png"), &gt)?;
        write_mask(&dir.join(&t.id).join("fg_mask.png"), &fg)?;
        let ann = dir.join("annotations").join(format!("{}.json", t.id));
        std::fs::create_dir_all(dir.join("annotations")).map_err(|e| PipelineError::file(dir, e))?;
        std::fs::write(&ann, rec.to_json_pretty()).map_err(|e| PipelineError::file(&ann, e))?;
        annotations.insert(t.id.clone(), format!("annotations/{}.json", t.id));
        entries.push(entry);
    }
    let manifest = json!({ "tuples": entries, "annotations": annotations });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("json value"))
        .map_err(|e| PipelineError::file(&path, e))?;
    Ok(())
}

/// Two-tuple fixture: one `bos` tuple at `light`, one `bos_free`.
pub fn demo_tuples(light: LightEstimate) -> Vec<FixtureTuple> {
    vec![
        FixtureTuple { id: "scene_bos".into(), light, bos: true },
        FixtureTuple { id: "scene_free".into(), light, bos: false },
    ]
}
