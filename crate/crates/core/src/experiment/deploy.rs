use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::Position;

/// Generator for one trial: ChaCha20 keyed by `seed`, stream number `trial`.
/// Trials never share randomness, whatever order they run in.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `k` points uniform over the disk of radius `radius` around `(cx, cy)` at
/// height `z`, drawn in order from `rng`. Each point consumes two uniforms,
/// so the first `j` users of a trial do not depend on `k`.
pub fn deploy_in_disk(
    rng: &mut impl Rng,
    k: usize,
    center: (f64, f64),
    radius: f64,
    z: f64,
) -> Vec<Position> {
    (0..k)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            let r = radius * u.sqrt();
            let theta = 2.0 * PI * v;
            Position::new(center.0 + r * theta.cos(), center.1 + r * theta.sin(), z)
        })
        .collect()
}

/// Users for trial `trial` of a run seeded with `seed`, uniform over the disk
/// of radius `cell_radius` centred below the access point at the origin.
pub fn deploy_users(
    seed: u64,
    trial: u64,
    k: usize,
    cell_radius: f64,
    user_height: f64,
) -> Vec<Position> {
    deploy_in_disk(
        &mut trial_rng(seed, trial),
        k,
        (0.0, 0.0),
        cell_radius,
        user_height,
    )
}

/// `n` points uniform over the rectangle `(x0, x1, y0, y1)` at height `z`.
pub fn deploy_in_rect(
    rng: &mut impl Rng,
    n: usize,
    rect: (f64, f64, f64, f64),
    z: f64,
) -> Vec<Position> {
    let (x0, x1, y0, y1) = rect;
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            Position::new(x0 + (x1 - x0) * u, y0 + (y1 - y0) * v, z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_positions() {
        assert_eq!(
            deploy_users(5, 3, 4, 1.3, 0.85),
            deploy_users(5, 3, 4, 1.3, 0.85)
        );
        assert_ne!(
            deploy_users(5, 3, 4, 1.3, 0.85),
            deploy_users(5, 4, 4, 1.3, 0.85)
        );
        assert_ne!(
            deploy_users(5, 3, 4, 1.3, 0.85),
            deploy_users(6, 3, 4, 1.3, 0.85)
        );
    }

    #[test]
    fn prefix_is_shared_across_k() {
        let two = deploy_users(11, 0, 2, 1.3, 0.85);
        let four = deploy_users(11, 0, 4, 1.3, 0.85);
        assert_eq!(two[..], four[..2]);
    }

    #[test]
    fn points_stay_in_disk() {
        let r = 1.343;
        let pts = deploy_users(1, 0, 10_000, r, 0.85);
        assert!(pts.iter().all(|p| p.x.hypot(p.y) < r && p.z == 0.85));
    }

    #[test]
    fn mean_radius_is_two_thirds() {
        let r = 2.0;
        let pts = deploy_users(42, 0, 100_000, r, 0.0);
        let mean = pts.iter().map(|p| p.x.hypot(p.y)).sum::<f64>() / pts.len() as f64;
        assert!((mean / (2.0 * r / 3.0) - 1.0).abs() < 0.01, "{mean}");
    }
}
