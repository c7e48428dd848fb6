//! Seeded draws of admissible sample points (x, y).

use crate::expr::point;
use crate::geometry::{SpaceDef, DET_FLOOR};
use crate::linalg::{self, Mat4, Vec4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Per-coordinate `[min, max]` ranges.
pub type Box4 = [[f64; 2]; 4];

/// Directions must satisfy F² ≥ NULL_CONE_MARGIN · |y|² (Euclidean |y|).
pub const NULL_CONE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub seed: u64,
    pub count: usize,
    pub x_box: Box4,
    pub y_box: Box4,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            seed: 1,
            count: 100,
            x_box: [[-1.0, 1.0]; 4],
            y_box: [[0.8, 1.5], [-0.4, 0.4], [-0.4, 0.4], [-0.4, 0.4]],
        }
    }
}

/// Timelike, away from the null cone, nondegenerate metric, and both
/// generating functions differentiable. The signature is deliberately not
/// checked here so that a mismatch surfaces as an error downstream.
pub fn is_admissible(space: &SpaceDef, x: &Vec4, y: &Vec4) -> bool {
    let p = point(x, y);
    let Ok(f) = space.finsler.eval_jet(&p, 2) else {
        return false;
    };
    let f2 = f.value() * f.value();
    let norm2: f64 = y.iter().map(|v| v * v).sum();
    if !(f.value() > 0.0 && f2 >= NULL_CONE_MARGIN * norm2) {
        return false;
    }
    let f2j = &f * &f;
    let g: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * f2j.d(&[4 + i, 4 + j])));
    if !(linalg::det(&g).abs() >= DET_FLOOR) {
        return false;
    }
    space.potential.eval_jet(&p, 2).is_ok()
}

fn draw(rng: &mut ChaCha8Rng, b: &Box4) -> Vec4 {
    std::array::from_fn(|i| {
        let [lo, hi] = b[i];
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    })
}

/// Up to `count` admissible points; gives up after 100 draws per point, so
/// a scene whose box misses the admissible region yields fewer samples.
pub fn admissible_samples(space: &SpaceDef, sampling: &Sampling) -> Vec<(Vec4, Vec4)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut out = Vec::with_capacity(sampling.count);
    let mut attempts = 0;
    while out.len() < sampling.count && attempts < 100 * sampling.count.max(1) {
        attempts += 1;
        let x = draw(&mut rng, &sampling.x_box);
        let y = draw(&mut rng, &sampling.y_box);
        if is_admissible(space, &x, &y) {
            out.push((x, y));
        }
    }
    out
}

/// Raw (unfiltered) draws, used for load-time checks.
pub fn raw_samples(sampling: &Sampling, count: usize) -> Vec<(Vec4, Vec4)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed ^ 0x5eed);
    (0..count)
        .map(|_| (draw(&mut rng, &sampling.x_box), draw(&mut rng, &sampling.y_box)))
        .collect()
}
