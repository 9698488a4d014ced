//! Seeded workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use obtrack_core::{ClassId, OrientedBox};

const CLASSES: [ClassId; 3] = [ClassId::Mw, ClassId::Msu, ClassId::Sw];

/// `n` boxes scattered over a 20 m square.
pub fn scattered_boxes(n: usize, seed: u64) -> Vec<OrientedBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            OrientedBox::new(
                [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 0.5],
                [rng.random_range(0.6..1.8), rng.random_range(0.6..1.2), 1.0],
                rng.random_range(-3.1..3.1),
                CLASSES[i % CLASSES.len()].clone(),
            )
            .expect("valid box")
        })
        .collect()
}

/// Jittered copies of `objects`, one vector per frame.
pub fn noisy_frames(objects: &[OrientedBox], frames: usize, sigma: f64, seed: u64) -> Vec<Vec<OrientedBox>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..frames)
        .map(|_| {
            objects
                .iter()
                .map(|b| {
                    let c = b.center;
                    b.clone()
                        .with_center([
                            c[0] + rng.random_range(-sigma..sigma),
                            c[1] + rng.random_range(-sigma..sigma),
                            c[2],
                        ])
                        .with_yaw(b.yaw() + rng.random_range(-0.05..0.05))
                })
                .collect()
        })
        .collect()
}
