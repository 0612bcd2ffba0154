//! Synthetic kidney-bean phantom masks.
//!
//! The phantom is an ellipsoid with a second, smaller ellipsoid carved out of
//! one face, producing the non-convex hilum concavity that a real organ mask
//! would have. A canonical root position is reported on the concave face.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::voxel::VoxelMask;

/// Shape of the two-ellipsoid phantom. Semi-axes are fractions of the grid
/// half-extent per axis; the carve enters along +x.
#[derive(Clone, Copy, Debug)]
pub struct PhantomShape {
    /// Main ellipsoid semi-axes as fractions of the grid half-extent.
    pub semi_axes_frac: [f64; 3],
    /// Carve ellipsoid semi-axes as fractions of the grid half-extent.
    pub carve_frac: [f64; 3],
    /// Penetration of the carve along +x in units of twice its x semi-axis:
    /// 0 leaves the carve externally tangent (plain ellipsoid), 0.5 centers
    /// it on the surface, 1 embeds it fully.
    pub carve_depth_frac: f64,
    /// Relative jitter applied to all semi-axes from the seed.
    pub jitter: f64,
}

impl Default for PhantomShape {
    fn default() -> Self {
        PhantomShape {
            semi_axes_frac: [0.80, 0.62, 0.62],
            carve_frac: [0.38, 0.38, 0.38],
            carve_depth_frac: 0.55,
            jitter: 0.02,
        }
    }
}

/// A generated phantom mask together with its canonical root position.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub mask: VoxelMask,
    /// Center of the surface voxel closest to the carve center, i.e. a point
    /// on the concave (hilum) face.
    pub root: Vec3,
}

/// Generates a connected kidney-bean-like mask; deterministic per seed.
pub fn generate_phantom(
    dims: [usize; 3],
    spacing: f64,
    shape: &PhantomShape,
    seed: u64,
) -> Result<Phantom> {
    if dims.iter().any(|&d| d < 32) {
        return Err(Error::InvalidParameter(format!("phantom dims must be >= 32 per axis, got {dims:?}")));
    }
    if shape.semi_axes_frac.iter().chain(shape.carve_frac.iter()).any(|&f| !(f >= 0.0) || !f.is_finite())
    {
        return Err(Error::InvalidParameter("phantom semi-axes must be non-negative".into()));
    }
    let mut mask = VoxelMask::new(dims, spacing, Vec3::ZERO)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |rng: &mut ChaCha8Rng, j: f64| 1.0 + j * rng.gen_range(-1.0..1.0);

    let half = Vec3::new(
        dims[0] as f64 * spacing / 2.0,
        dims[1] as f64 * spacing / 2.0,
        dims[2] as f64 * spacing / 2.0,
    );
    let center = mask.origin() + half;
    let axes = [
        shape.semi_axes_frac[0] * half.x * jitter(&mut rng, shape.jitter),
        shape.semi_axes_frac[1] * half.y * jitter(&mut rng, shape.jitter),
        shape.semi_axes_frac[2] * half.z * jitter(&mut rng, shape.jitter),
    ];
    let carve_axes = [
        shape.carve_frac[0] * half.x * jitter(&mut rng, shape.jitter),
        shape.carve_frac[1] * half.y * jitter(&mut rng, shape.jitter),
        shape.carve_frac[2] * half.z * jitter(&mut rng, shape.jitter),
    ];
    if axes.iter().any(|&a| a <= 0.0) {
        return Err(Error::InvalidParameter("degenerate phantom: zero main semi-axis".into()));
    }
    let carve_center = center
        + Vec3::new(axes[0] + carve_axes[0] * (1.0 - 2.0 * shape.carve_depth_frac), 0.0, 0.0);
    let carve_active = carve_axes.iter().all(|&a| a > 0.0);

    let inside_ellipsoid = |p: Vec3, c: Vec3, ax: &[f64; 3]| {
        let dx = (p.x - c.x) / ax[0];
        let dy = (p.y - c.y) / ax[1];
        let dz = (p.z - c.z) / ax[2];
        dx * dx + dy * dy + dz * dz <= 1.0
    };

    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let p = mask.voxel_center([i, j, k]);
                if inside_ellipsoid(p, center, &axes)
                    && !(carve_active && inside_ellipsoid(p, carve_center, &carve_axes))
                {
                    mask.set([i, j, k], true);
                }
            }
        }
    }

    if mask.is_empty_mask() {
        return Err(Error::EmptyMask("phantom shape parameters produced no voxels".into()));
    }
    let components = mask.connected_components();
    if components != 1 {
        return Err(Error::DisconnectedMask { components });
    }

    let root = find_root(&mask, carve_center);
    Ok(Phantom { mask, root })
}

/// Surface voxel center closest to the carve center; ties break toward the
/// lowest linear index.
fn find_root(mask: &VoxelMask, target: Vec3) -> Vec3 {
    let [nx, ny, nz] = mask.dims();
    let mut best: Option<(f64, usize, Vec3)> = None;
    for idx in mask.foreground_voxels() {
        let [i, j, k] = idx;
        let on_surface = i == 0
            || j == 0
            || k == 0
            || i == nx - 1
            || j == ny - 1
            || k == nz - 1
            || !mask.get([i - 1, j, k])
            || !mask.get([i + 1, j, k])
            || !mask.get([i, j - 1, k])
            || !mask.get([i, j + 1, k])
            || !mask.get([i, j, k - 1])
            || !mask.get([i, j, k + 1]);
        if !on_surface {
            continue;
        }
        let c = mask.voxel_center(idx);
        let d2 = c.distance_squared(target);
        let li = mask.linear_index(idx);
        let better = match best {
            None => true,
            Some((bd, bli, _)) => d2 < bd || (d2 == bd && li < bli),
        };
        if better {
            best = Some((d2, li, c));
        }
    }
    best.expect("non-empty mask has surface voxels").2
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn default_phantom_is_connected_with_sane_fill() {
        let p = generate_phantom([64, 64, 64], 100.0, &PhantomShape::default(), 3).unwrap();
        assert_eq!(p.mask.connected_components(), 1);
        let fill = p.mask.count_foreground() as f64 / p.mask.num_voxels() as f64;
        assert!((0.1..=0.5).contains(&fill), "fill fraction {fill}");
        // Root lies inside the grid and on a foreground voxel.
        assert!(p.mask.contains_world(p.root));
    }

    #[test]
    fn zero_carve_depth_matches_analytic_ellipsoid_volume() {
        let shape = PhantomShape { carve_depth_frac: 0.0, jitter: 0.0, ..PhantomShape::default() };
        let spacing = 50.0;
        let p = generate_phantom([64, 64, 64], spacing, &shape, 0).unwrap();
        let half = 32.0 * spacing;
        let (a, b, c) = (0.80 * half, 0.62 * half, 0.62 * half);
        let analytic = 4.0 / 3.0 * PI * a * b * c;
        let measured = p.mask.count_foreground() as f64 * p.mask.voxel_volume();
        let rel = (measured - analytic).abs() / analytic;
        assert!(rel < 0.05, "relative volume error {rel}");
    }

    #[test]
    fn carve_removes_volume_and_root_sits_on_concave_face() {
        let flat = PhantomShape { carve_depth_frac: 0.0, jitter: 0.0, ..PhantomShape::default() };
        let carved = PhantomShape { jitter: 0.0, ..PhantomShape::default() };
        let p0 = generate_phantom([48, 48, 48], 100.0, &flat, 0).unwrap();
        let p1 = generate_phantom([48, 48, 48], 100.0, &carved, 0).unwrap();
        assert!(p1.mask.count_foreground() < p0.mask.count_foreground());
        // The carve enters along +x, so the root must sit on that side.
        let center_x = 24.0 * 100.0;
        assert!(p1.root.x > center_x, "root {:?}", p1.root);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_phantom([64, 64, 64], 90.4, &PhantomShape::default(), 11).unwrap();
        let b = generate_phantom([64, 64, 64], 90.4, &PhantomShape::default(), 11).unwrap();
        assert_eq!(a.mask.data(), b.mask.data());
        assert_eq!(a.root, b.root);
        let c = generate_phantom([64, 64, 64], 90.4, &PhantomShape::default(), 12).unwrap();
        assert_ne!(a.mask.data(), c.mask.data());
    }

    #[test]
    fn degenerate_shape_errors() {
        let shape = PhantomShape { semi_axes_frac: [0.0, 0.0, 0.0], ..PhantomShape::default() };
        assert!(generate_phantom([32, 32, 32], 1.0, &shape, 0).is_err());
    }
}
