//! Connected components, boundary extraction and convex hulls on binary
//! masks.

use std::collections::VecDeque;

use crate::mask::BinaryMask;

/// Axis-aligned bounding box in pixel-centre coordinates. `w` and `h` are
/// extents (`max - min`), so a single row has `h == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

/// An 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Pixels in row-major discovery order.
    pub pixels: Vec<(i64, i64)>,
    pub bbox: BoundingBox,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Pixels with at least one 4-neighbour outside the component.
    pub fn boundary(&self, mask: &BinaryMask) -> Vec<(i64, i64)> {
        self.pixels
            .iter()
            .copied()
            .filter(|&(x, y)| {
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| !mask.get_signed(x + dx, y + dy))
            })
            .collect()
    }
}

const NEIGHBOURS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Labels 8-connected components, in row-major order of their first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || mask.values()[start] == 0 {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        let (mut x0, mut x1, mut y0, mut y1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            pixels.push((x, y));
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for (dx, dy) in NEIGHBOURS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !seen[j] && mask.values()[j] != 0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        out.push(Component {
            pixels,
            bbox: BoundingBox {
                x: x0,
                y: y0,
                w: x1 - x0,
                h: y1 - y0,
            },
        });
    }
    out
}

/// Component with the largest pixel count; the first one found wins ties.
pub fn largest_component(mask: &BinaryMask) -> Option<Component> {
    connected_components(mask)
        .into_iter()
        .reduce(|best, c| if c.area() > best.area() { c } else { best })
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Returns hull vertices counter-clockwise (in a
/// y-up frame) without collinear points, starting from the lowest-x point.
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Largest distance between any two points of the set (Feret diameter).
pub fn feret_diameter(points: &[(i64, i64)]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0i64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            let d = (a.0 - b.0).pow(2) + (a.1 - b.1).pow(2);
            best = best.max(d);
        }
    }
    (best as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_use_8_connectivity() {
        let m = BinaryMask::from_values(4, 4, vec![
            1, 0, 0, 0, //
            0, 1, 0, 0, //
            0, 0, 0, 1, //
            0, 0, 0, 1, //
        ])
        .unwrap();
        let cs = connected_components(&m);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].area(), 2);
        assert_eq!(cs[1].bbox, BoundingBox { x: 3, y: 2, w: 0, h: 1 });
    }

    #[test]
    fn largest_prefers_first_on_tie() {
        let m = BinaryMask::from_values(5, 1, vec![1, 1, 0, 1, 1]).unwrap();
        assert_eq!(largest_component(&m).unwrap().bbox.x, 0);
        assert!(largest_component(&BinaryMask::new(3, 3).unwrap()).is_none());
    }

    #[test]
    fn hull_of_square_drops_collinear_points() {
        let pts: Vec<(i64, i64)> = (0..=4)
            .flat_map(|x| (0..=4).map(move |y| (x, y)))
            .collect();
        let mut hull = convex_hull(&pts);
        hull.sort_unstable();
        assert_eq!(hull, vec![(0, 0), (0, 4), (4, 0), (4, 4)]);
        assert_eq!(convex_hull(&[(1, 1), (1, 1)]), vec![(1, 1)]);
    }

    #[test]
    fn boundary_of_filled_rectangle() {
        let m = BinaryMask::from_fn(10, 10, |x, y| (2..7).contains(&x) && (3..6).contains(&y)).unwrap();
        let c = largest_component(&m).unwrap();
        assert_eq!(c.boundary(&m).len(), 5 * 3 - 3);
    }

    #[test]
    fn feret_of_segment() {
        assert!((feret_diameter(&[(0, 0), (3, 4), (1, 1)]) - 5.0).abs() < 1e-12);
    }
}
