//! Parallel versus single-threaded timings of the data-parallel kernels.
//!
//! The "sequential" variant runs the same code inside a one-thread Rayon
//! pool. Building with `--no-default-features` removes Rayon from the
//! library itself, so both variants then take the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shadowkit_core::metrics::{evaluate_tuple, ssim};
use shadowkit_core::render::{composite_shadow, soften_mask};
use shadowkit_core::{BinaryMask, RgbImage};

fn scene(size: u32) -> (RgbImage, RgbImage, BinaryMask) {
    let mask = BinaryMask::from_fn(size, size, |x, y| {
        let (dx, dy) = (f64::from(x) - f64::from(size) * 0.6, f64::from(y) - f64::from(size) * 0.7);
        dx * dx / 4.0 + dy * dy < f64::from(size * size) / 40.0
    })
    .unwrap();
    let data: Vec<u8> = (0..size * size * 3).map(|i| (i * 37 % 251) as u8).collect();
    let base = RgbImage::from_raw(size, size, data).unwrap();
    let soft = soften_mask(&mask, 2.0).unwrap();
    let fg = BinaryMask::new(size, size).unwrap();
    let shaded = composite_shadow(&base, &soft, &fg, 0.45).unwrap();
    (base, shaded, mask)
}

fn modes() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn kernels(c: &mut Criterion) {
    let (base, shaded, mask) = scene(512);
    let soft = soften_mask(&mask, 2.0).unwrap();
    let fg = BinaryMask::new(512, 512).unwrap();
    let mut group = c.benchmark_group("kernels_512");
    for (name, pool) in modes() {
        group.bench_function(BenchmarkId::new("soften_mask", name), |b| {
            b.iter(|| pool.install(|| soften_mask(&mask, 2.0).unwrap()))
        });
        group.bench_function(BenchmarkId::new("composite", name), |b| {
            b.iter(|| pool.install(|| composite_shadow(&base, &soft, &fg, 0.45).unwrap()))
        });
        group.bench_function(BenchmarkId::new("ssim", name), |b| {
            b.iter(|| pool.install(|| ssim(&shaded, &base, None).unwrap()))
        });
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    use shadowkit_core::par::*;
    let tuples: Vec<_> = (0..16).map(|_| scene(192)).collect();
    let mut group = c.benchmark_group("batch_evaluate_16x192");
    for (name, pool) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| {
                pool.install(|| {
                    tuples
                        .par_iter()
                        .map(|(base, shaded, mask)| evaluate_tuple("t", shaded, base, mask, mask).unwrap())
                        .collect::<Vec<_>>()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, kernels, batch);
criterion_main!(benches);
