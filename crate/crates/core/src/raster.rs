//! Rasterization of vessel trees back to voxel label maps via a tube
//! function, noisy scalar-volume synthesis and maximum intensity projection.
//!
//! The tube value of a point against a segment is the squared distance to
//! the closest point on the (clamped) centerline minus the squared
//! interpolated radius: negative inside the vessel, zero on its surface.
//! Rasterization only evaluates voxels inside each segment's bounding cube,
//! which cannot change the result because the tube value is negative only
//! within one radius of the segment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::tree::VesselTree;
use crate::voxel::VoxelMask;

/// Straight tube with linearly interpolated radius.
#[derive(Clone, Copy, Debug)]
pub struct TubeSegment {
    pub a: Vec3,
    pub b: Vec3,
    pub radius_a: f64,
    pub radius_b: f64,
}

impl TubeSegment {
    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }
}

/// Signed tube value at `p`: `|p - c(τ*)|² - r(τ*)²`, with τ* the closest
/// centerline parameter clamped to the segment. μm².
pub fn tube_value(segment: &TubeSegment, p: Vec3) -> f64 {
    let d = segment.b - segment.a;
    let len = d.norm();
    let u = d / len;
    let tau = (p - segment.a).dot(u).clamp(0.0, len);
    let c = segment.a + u * tau;
    let r = segment.radius_a + (segment.radius_b - segment.radius_a) * (tau / len);
    p.distance_squared(c) - r * r
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RasterDiagnostics {
    /// Segments whose bounding cube extends past the grid.
    pub clipped_segments: usize,
    /// Zero-length segments skipped outright.
    pub degenerate_segments: usize,
}

/// Voxelizes the tree: a voxel is labeled foreground when its center lies
/// strictly inside any vessel segment. Bit-identical to evaluating every
/// segment against every voxel.
pub fn rasterize(
    tree: &VesselTree,
    dims: [usize; 3],
    spacing: f64,
    origin: Vec3,
) -> Result<(VoxelMask, RasterDiagnostics)> {
    let mut mask = VoxelMask::new(dims, spacing, origin)?;
    let mut diag = RasterDiagnostics::default();
    for e in tree.edge_ids() {
        let edge = tree.edge(e);
        if !(edge.radius > 0.0) {
            return Err(Error::NonPositiveRadius(e));
        }
        let segment = TubeSegment {
            a: tree.node(edge.parent).pos,
            b: tree.node(edge.child).pos,
            radius_a: edge.radius,
            radius_b: edge.radius,
        };
        if segment.length() == 0.0 {
            diag.degenerate_segments += 1;
            continue;
        }
        let r = segment.radius_a.max(segment.radius_b);
        let lo = segment.a.min(segment.b) - Vec3::new(r, r, r);
        let hi = segment.a.max(segment.b) + Vec3::new(r, r, r);
        // Voxel index ranges whose centers can fall inside the cube.
        let mut clipped = false;
        let mut lo_idx = [0usize; 3];
        let mut hi_idx = [0usize; 3];
        for axis in 0..3 {
            let lo_f = (lo.component(axis) - origin.component(axis)) / spacing - 0.5;
            let hi_f = (hi.component(axis) - origin.component(axis)) / spacing - 0.5;
            if lo_f < 0.0 || hi_f > (dims[axis] - 1) as f64 {
                clipped = true;
            }
            lo_idx[axis] = lo_f.ceil().max(0.0) as usize;
            hi_idx[axis] = hi_f.floor().min((dims[axis] - 1) as f64).max(0.0) as usize;
        }
        if clipped {
            diag.clipped_segments += 1;
        }
        for k in lo_idx[2]..=hi_idx[2] {
            for j in lo_idx[1]..=hi_idx[1] {
                for i in lo_idx[0]..=hi_idx[0] {
                    if mask.get([i, j, k]) {
                        continue;
                    }
                    if tube_value(&segment, mask.voxel_center([i, j, k])) < 0.0 {
                        mask.set([i, j, k], true);
                    }
                }
            }
        }
    }
    Ok((mask, diag))
}

/// Dense scalar volume on the same grid convention as [`VoxelMask`].
#[derive(Clone, Debug)]
pub struct ScalarVolume {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: Vec3,
    pub data: Vec<f32>,
}

/// Turns a label mask into a noisy scalar volume: foreground 1, background
/// 0, Gaussian noise per voxel, then a fraction `saltpepper_p` of voxels
/// replaced by 0 or 1 equiprobably; everything clamped to [0, 1].
pub fn add_noise(
    label: &VoxelMask,
    gaussian_sigma: f64,
    saltpepper_p: f64,
    seed: u64,
) -> Result<ScalarVolume> {
    if !(gaussian_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {gaussian_sigma}")));
    }
    if !(0.0..=1.0).contains(&saltpepper_p) {
        return Err(Error::InvalidParameter(format!("salt-pepper p must be in [0,1], got {saltpepper_p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = if gaussian_sigma > 0.0 {
        Some(Normal::new(0.0, gaussian_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let mut data = Vec::with_capacity(label.num_voxels());
    for &b in label.data() {
        let mut v = b as f64;
        if let Some(n) = &normal {
            v += n.sample(&mut rng);
        }
        if saltpepper_p > 0.0 && rng.gen::<f64>() < saltpepper_p {
            v = if rng.gen::<bool>() { 1.0 } else { 0.0 };
        }
        data.push(v.clamp(0.0, 1.0) as f32);
    }
    Ok(ScalarVolume { dims: label.dims(), spacing: label.spacing(), origin: label.origin(), data })
}

/// Simple 2-D grayscale image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2d {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

/// Per-pixel maximum along one axis. The image keeps the remaining axes in
/// ascending order: width is the lower remaining axis, height the higher.
pub fn max_intensity_projection(vol: &ScalarVolume, axis: usize) -> Result<Image2d> {
    if axis > 2 {
        return Err(Error::InvalidParameter(format!("axis must be 0, 1 or 2, got {axis}")));
    }
    let (wa, ha) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let width = vol.dims[wa];
    let height = vol.dims[ha];
    let mut data = vec![f32::NEG_INFINITY; width * height];
    let [nx, ny, _nz] = vol.dims;
    for k in 0..vol.dims[2] {
        for j in 0..ny {
            for i in 0..nx {
                let idx = [i, j, k];
                let v = vol.data[i + nx * (j + ny * k)];
                let pixel = idx[wa] + width * idx[ha];
                if v > data[pixel] {
                    data[pixel] = v;
                }
            }
        }
    }
    Ok(Image2d { width, height, data })
}
