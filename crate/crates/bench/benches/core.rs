use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use obtrack_bench::{noisy_frames, scattered_boxes};
use obtrack_core::doe::{campaign, default_layout};
use obtrack_core::geometry::iou_3d;
use obtrack_core::{associate, run_trial, RunConfig, Tracker, TrackerConfig};

fn bench_iou(c: &mut Criterion) {
    let boxes = scattered_boxes(64, 1);
    let near: Vec<_> = boxes
        .iter()
        .map(|b| b.clone().with_center([b.center[0] + 0.2, b.center[1] - 0.1, 0.5]).with_yaw(b.yaw() + 0.4))
        .collect();
    c.bench_function("iou_3d/rotated_overlapping", |bench| {
        bench.iter(|| {
            boxes
                .iter()
                .zip(&near)
                .map(|(a, b)| iou_3d(black_box(a), black_box(b)).unwrap())
                .sum::<f64>()
        })
    });
}

fn bench_associate(c: &mut Criterion) {
    let mut group = c.benchmark_group("associate");
    for n in [5, 20, 80] {
        let tracks: Vec<_> = scattered_boxes(n, 2).into_iter().enumerate().map(|(i, b)| (i as u64, b)).collect();
        let objects: Vec<_> = tracks.iter().map(|t| t.1.clone()).collect();
        let dets = noisy_frames(&objects, 1, 0.1, 3).remove(0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| associate(black_box(&dets), black_box(&tracks), 1.0).unwrap())
        });
    }
    group.finish();
}

fn bench_tracker(c: &mut Criterion) {
    let objects = scattered_boxes(5, 4);
    let frames = noisy_frames(&objects, 1000, 0.1, 5);
    c.bench_function("tracker/1000_frames_5_objects", |bench| {
        bench.iter(|| {
            let mut tracker = Tracker::new(TrackerConfig::default(), Default::default()).unwrap();
            for (i, dets) in frames.iter().enumerate() {
                tracker.ingest_map(i as f64 * 0.1, dets.clone()).unwrap();
            }
            tracker
        })
    });
}

fn bench_trial(c: &mut Criterion) {
    let config = RunConfig::default();
    let trials = campaign(&default_layout(), &config.classes).unwrap();
    c.bench_function("pipeline/one_trial", |bench| {
        bench.iter(|| run_trial(black_box(&trials[30]), &config, 7).unwrap())
    });
}

criterion_group!(benches, bench_iou, bench_associate, bench_tracker, bench_trial);
criterion_main!(benches);
