use proptest::prelude::*;
use shadowkit_core::contour::largest_component;
use shadowkit_core::geometry::DEFAULT_WIDTH_RATIO;
use shadowkit_core::render::{composite_shadow, project_skeleton, render_shadow_mask, soften_mask};
use shadowkit_core::raster::draw_segment;
use shadowkit_core::sta::{compute_k, extract_shadow_triangle, k_from_theta, project_shadow_point, theta_from_k};
use shadowkit_core::{
    derive_torso_block, mask_iou, AnnotationRecord, BinaryMask, KeypointSet, LightEstimate, Point2, Pose,
    Provenance, RenderParams, RgbImage, SkeletonTopology,
};

fn pt(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn person(dx: f64, dy: f64) -> AnnotationRecord {
    let raw = [
        (100.0, 20.0),
        (80.0, 60.0),
        (120.0, 60.0),
        (75.0, 90.0),
        (125.0, 90.0),
        (95.0, 120.0),
        (105.0, 120.0),
        (95.0, 170.0),
        (105.0, 170.0),
    ];
    AnnotationRecord {
        image_id: "prop".into(),
        pose: Pose::Front,
        keypoints: KeypointSet::from_ordered(256, 256, raw.map(|(x, y)| pt(x + dx, y + dy))).unwrap(),
        torso_block: None,
        provenance: Provenance::Manual,
        original_width: 256,
        original_height: 256,
    }
}

fn mask_strategy(max: u32) -> impl Strategy<Value = BinaryMask> {
    (2..=max, 2..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..=1, (w * h) as usize)
            .prop_map(move |v| BinaryMask::from_values(w, h, v).unwrap())
    })
}

/// Strict hull vertices (no collinear points) by gift wrapping.
fn jarvis_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let d2 = |a: (i64, i64), b: (i64, i64)| (a.0 - b.0).pow(2) + (a.1 - b.1).pow(2);
    let start = *points.iter().min().unwrap();
    if points.iter().all(|&p| p == start) {
        return vec![start];
    }
    let mut hull = vec![start];
    let mut cur = start;
    loop {
        let mut next = if points[0] == cur { points[1] } else { points[0] };
        for &q in points {
            if q == cur {
                continue;
            }
            let c = cross(cur, next, q);
            if c < 0 || (c == 0 && d2(cur, q) > d2(cur, next)) {
                next = q;
            }
        }
        if next == start {
            return hull;
        }
        hull.push(next);
        cur = next;
    }
}

proptest! {
    #[test]
    fn projection_then_k_round_trips(
        x1 in -500.0..500.0f64, y1 in -500.0..500.0f64,
        x2 in -500.0..500.0f64, y2 in -500.0..500.0f64,
        k in 0.05..20.0f64, angle in 0.0..std::f64::consts::TAU,
    ) {
        let (p1, p2) = (pt(x1, y1), pt(x2, y2));
        prop_assume!(p1.distance(p2) > 1e-3);
        let az = LightEstimate::azimuth_from_angle(angle);
        let p3 = project_shadow_point(p1, p2, k, az).unwrap();
        let got = compute_k(p1, p2, p3).unwrap();
        prop_assert!((got - k).abs() <= 1e-9 * k.max(1.0), "{got} vs {k}");
    }

    #[test]
    fn theta_and_k_are_inverse(k in 0.05..20.0f64) {
        let back = k_from_theta(theta_from_k(k).unwrap()).unwrap();
        prop_assert!((back - k).abs() <= 1e-9 * k);
    }

    #[test]
    fn triangle_is_translation_equivariant(m in mask_strategy(12), dx in 0u32..6, dy in 0u32..6) {
        prop_assume!(!m.is_empty());
        let (w, h) = m.dims();
        let shifted = BinaryMask::from_fn(w + dx, h + dy, |x, y| {
            x >= dx && y >= dy && m.get(x - dx, y - dy)
        }).unwrap();
        let a = extract_shadow_triangle(&m).unwrap();
        let b = extract_shadow_triangle(&shifted).unwrap();
        let d = pt(f64::from(dx), f64::from(dy));
        prop_assert_eq!(b.a, a.a + d);
        prop_assert_eq!(b.b, a.b + d);
        prop_assert_eq!(b.c, a.c + d);
        prop_assert_eq!(a.degenerate, b.degenerate);
    }

    #[test]
    fn triangle_invariants(m in mask_strategy(14)) {
        prop_assume!(!m.is_empty());
        let t = extract_shadow_triangle(&m).unwrap();
        prop_assert_eq!(t.a.x, t.b.x);
        prop_assert!(t.a.y <= t.b.y);
        prop_assert_eq!(t.degenerate, t.c == t.b);
        // Gift-wrapping hull over every component pixel as an independent
        // oracle for the set of candidate vertices.
        let comp = largest_component(&m).unwrap();
        let limit = comp.bbox.y as f64 + 0.8 * comp.bbox.h as f64;
        let best = jarvis_hull(&comp.pixels).into_iter()
            .map(|(x, y)| pt(x as f64, y as f64))
            .filter(|p| p.y > limit)
            .map(|p| p.distance(t.b))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
        match best {
            Some(d) => prop_assert!((t.c.distance(t.b) - d).abs() < 1e-12 && m.get(t.c.x as u32, t.c.y as u32)),
            None => prop_assert!(t.degenerate),
        }
    }

    #[test]
    fn torso_rotates_with_keypoints(angle in 0.0..std::f64::consts::TAU) {
        let rec = person(0.0, 0.0);
        let centre = pt(128.0, 128.0);
        let rot = |p: Point2| {
            let d = p - centre;
            centre + pt(d.x * angle.cos() - d.y * angle.sin(), d.x * angle.sin() + d.y * angle.cos())
        };
        let pts: Vec<Point2> = rec.keypoints.iter().map(|(_, p)| rot(p)).collect();
        let rotated = KeypointSet::from_ordered(1024, 1024, [
            pts[0] + pt(300.0, 300.0), pts[1] + pt(300.0, 300.0), pts[2] + pt(300.0, 300.0),
            pts[3] + pt(300.0, 300.0), pts[4] + pt(300.0, 300.0), pts[5] + pt(300.0, 300.0),
            pts[6] + pt(300.0, 300.0), pts[7] + pt(300.0, 300.0), pts[8] + pt(300.0, 300.0),
        ]).unwrap();
        let a = derive_torso_block(&rec.keypoints, DEFAULT_WIDTH_RATIO).unwrap();
        let b = derive_torso_block(&rotated, DEFAULT_WIDTH_RATIO).unwrap();
        for (ca, cb) in a.corners.iter().zip(&b.corners) {
            prop_assert!(rot(*ca).distance(*cb - pt(300.0, 300.0)) < 1e-9);
        }
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in mask_strategy(8), seed in any::<u64>()) {
        let (w, h) = a.dims();
        let b = BinaryMask::from_fn(w, h, |x, y| (u64::from(x * 31 + y * 17) ^ seed) % 3 == 0).unwrap();
        let ab = mask_iou(&a, &b).unwrap();
        prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn soften_is_monotone_and_bounded(a in mask_strategy(10), extra in mask_strategy(10), sigma in 0.0..4.0f64) {
        let (w, h) = a.dims();
        let grown = BinaryMask::from_fn(w, h, |x, y| a.get(x, y) || (x < extra.width() && y < extra.height() && extra.get(x, y))).unwrap();
        let sa = soften_mask(&a, sigma).unwrap();
        let sb = soften_mask(&grown, sigma).unwrap();
        for (x, y) in sa.values().iter().zip(sb.values()) {
            prop_assert!((0.0..=1.0).contains(x));
            prop_assert!(*x <= *y + 1e-12);
        }
    }

    #[test]
    fn composite_never_brightens(
        pixels in proptest::collection::vec(any::<u8>(), 8 * 8 * 3),
        m in proptest::collection::vec(0u8..=1, 64),
        alpha in 0.0..=1.0f64, sigma in 0.0..3.0f64,
    ) {
        let base = RgbImage::from_raw(8, 8, pixels).unwrap();
        let shadow = soften_mask(&BinaryMask::from_values(8, 8, m.clone()).unwrap(), sigma).unwrap();
        let fg = BinaryMask::from_fn(8, 8, |x, _| x == 0).unwrap();
        let out = composite_shadow(&base, &shadow, &fg, alpha).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let (o, b) = (out.pixel(x, y), base.pixel(x, y));
                if x == 0 {
                    prop_assert_eq!(o, b);
                }
                for c in 0..3 {
                    prop_assert!(o[c] <= b[c]);
                }
            }
        }
    }

    #[test]
    fn rendered_shadow_covers_every_segment(
        k in 0.4..3.0f64, angle in -0.6..0.6f64, thickness in 1u32..7,
    ) {
        let rec = person(0.0, 0.0);
        let light = LightEstimate::from_k(k, LightEstimate::azimuth_from_angle(angle)).unwrap();
        let params = RenderParams { limb_thickness: thickness, ..RenderParams::default() };
        let sk = project_skeleton(&rec, &SkeletonTopology::kplm(), &light, &params).unwrap();
        let full = render_shadow_mask(&sk, 256, 256).unwrap();
        for s in &sk.segments {
            let mut one = BinaryMask::new(256, 256).unwrap();
            draw_segment(&mut one, s.start, s.end, thickness).unwrap();
            prop_assert!(one.is_subset_of(&full).unwrap(), "{}", s.limb_name);
        }
    }
}
