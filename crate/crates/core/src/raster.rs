//! Scan conversion onto binary masks.
//!
//! Pixel `(i, j)` is centred on the integer coordinate `(i, j)`. Lines use the
//! integer midpoint algorithm between rounded endpoints and are thickened
//! with a square structuring element; polygons set every pixel centre inside
//! or on the boundary.

use crate::geometry::{rescale_annotation, AnnotationRecord, GeometryError, Point2, SkeletonTopology};
use crate::mask::BinaryMask;

/// Integer pixel coordinates of a midpoint (Bresenham) line, inclusive of
/// both endpoints.
pub fn line_pixels(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

fn to_pixel(p: Point2) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// Offsets of a `thickness`-wide square element. Even sizes extend one
/// pixel further towards positive coordinates.
fn square_offsets(thickness: u32) -> std::ops::RangeInclusive<i64> {
    let t = i64::from(thickness);
    -((t - 1) / 2)..=t / 2
}

/// Draws a segment clipped to the mask.
pub fn draw_segment(mask: &mut BinaryMask, a: Point2, b: Point2, thickness: u32) -> Result<(), GeometryError> {
    if thickness == 0 {
        return Err(GeometryError::InvalidThickness(thickness));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let (x0, y0) = to_pixel(a);
    let (x1, y1) = to_pixel(b);
    let offs = square_offsets(thickness);
    for (x, y) in line_pixels(x0, y0, x1, y1) {
        for dy in offs.clone() {
            for dx in offs.clone() {
                mask.set_clipped(x + dx, y + dy);
            }
        }
    }
    Ok(())
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    let ab = b - a;
    let ap = p - a;
    let cross = ab.x * ap.y - ab.y * ap.x;
    let len2 = ab.dot(ab);
    if cross.abs() > 1e-9 * len2.sqrt().max(1.0) {
        return false;
    }
    let t = ap.dot(ab);
    t >= -1e-9 && t <= len2 + 1e-9
}

fn polygon_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

/// Fills a simple polygon. Polygons with (numerically) zero area draw nothing.
pub fn fill_polygon(mask: &mut BinaryMask, poly: &[Point2]) -> Result<(), GeometryError> {
    if poly.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if poly.len() < 3 || polygon_area(poly).abs() < 1e-9 {
        return Ok(());
    }
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in poly {
        x_lo = x_lo.min(p.x);
        x_hi = x_hi.max(p.x);
        y_lo = y_lo.min(p.y);
        y_hi = y_hi.max(p.y);
    }
    let x0 = (x_lo.ceil() as i64).max(0);
    let x1 = (x_hi.floor() as i64).min(i64::from(mask.width()) - 1);
    let y0 = (y_lo.ceil() as i64).max(0);
    let y1 = (y_hi.floor() as i64).min(i64::from(mask.height()) - 1);
    let n = poly.len();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = Point2::new(x as f64, y as f64);
            let mut inside = false;
            let mut boundary = false;
            for i in 0..n {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                if on_segment(p, a, b) {
                    boundary = true;
                    break;
                }
                if (a.y > p.y) != (b.y > p.y) {
                    let xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if p.x < xc {
                        inside = !inside;
                    }
                }
            }
            if inside || boundary {
                mask.set(x as u32, y as u32, true);
            }
        }
    }
    Ok(())
}

/// Renders a record's skeleton as a `out_w × out_h` binary mask.
///
/// The record is first rescaled onto the output raster. Every topology edge
/// becomes a segment of the given thickness; when the topology includes the
/// torso, its block is filled as well.
pub fn rasterize_skeleton(
    rec: &AnnotationRecord,
    topo: &SkeletonTopology,
    thickness: u32,
    out_w: u32,
    out_h: u32,
    width_ratio: f64,
) -> Result<BinaryMask, GeometryError> {
    rec.require_complete()?;
    if thickness == 0 {
        return Err(GeometryError::InvalidThickness(thickness));
    }
    let rec = rescale_annotation(rec, out_w, out_h)?;
    let mut mask = BinaryMask::new(out_w, out_h)?;
    let torso = rec.resolved_torso(width_ratio)?;
    for &(a, b) in topo.edges() {
        let pa = rec.anchor_position(a, &torso)?;
        let pb = rec.anchor_position(b, &torso)?;
        draw_segment(&mut mask, pa, pb, thickness)?;
    }
    if topo.include_torso() {
        fill_polygon(&mut mask, &torso.corners)?;
    }
    Ok(mask)
}
