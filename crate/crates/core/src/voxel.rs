//! Binary voxel masks, exact Euclidean distance fields, morphological
//! erosion and cortex-shell extraction.
//!
//! Grids are isotropic: one spacing value applies to all three axes, and the
//! voxel-to-world mapping is `world = origin + (index + 0.5) * spacing`.
//! Data is stored x-fastest (index = x + nx*(y + ny*z)).

use crate::error::{Error, Result};
use crate::linalg::Vec3;

/// Dense binary occupancy grid with physical spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelMask {
    dims: [usize; 3],
    spacing: f64,
    origin: Vec3,
    data: Vec<u8>,
}

impl VoxelMask {
    /// Creates an all-background mask. Spacing must be positive and every
    /// dimension at least 1.
    pub fn new(dims: [usize; 3], spacing: f64, origin: Vec3) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!("dims must all be >= 1, got {dims:?}")));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|p| p.checked_mul(dims[2]))
            .ok_or_else(|| Error::InvalidParameter("dims overflow".into()))?;
        Ok(VoxelMask { dims, spacing, origin, data: vec![0u8; n] })
    }

    pub fn from_raw(dims: [usize; 3], spacing: f64, origin: Vec3, data: Vec<u8>) -> Result<Self> {
        let mut mask = VoxelMask::new(dims, spacing, origin)?;
        if data.len() != mask.data.len() {
            return Err(Error::InvalidParameter(format!(
                "payload has {} voxels, dims require {}",
                data.len(),
                mask.data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidParameter(format!("mask bytes must be 0 or 1, got {bad}")));
        }
        mask.data = data;
        Ok(mask)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn num_voxels(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn linear_index(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, idx: [usize; 3]) -> bool {
        self.data[self.linear_index(idx)] != 0
    }

    pub fn set(&mut self, idx: [usize; 3], value: bool) {
        let li = self.linear_index(idx);
        self.data[li] = value as u8;
    }

    /// World position of a voxel center.
    pub fn voxel_center(&self, [i, j, k]: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(
                (i as f64 + 0.5) * self.spacing,
                (j as f64 + 0.5) * self.spacing,
                (k as f64 + 0.5) * self.spacing,
            )
    }

    /// Voxel containing a world position, or None when out of bounds.
    pub fn world_to_voxel(&self, p: Vec3) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.spacing;
        let idx = [rel.x.floor(), rel.y.floor(), rel.z.floor()];
        for (a, &f) in idx.iter().enumerate() {
            if f < 0.0 || f >= self.dims[a] as f64 {
                return None;
            }
        }
        Some([idx[0] as usize, idx[1] as usize, idx[2] as usize])
    }

    /// True when the world position falls inside a foreground voxel.
    pub fn contains_world(&self, p: Vec3) -> bool {
        self.world_to_voxel(p).map(|idx| self.get(idx)).unwrap_or(false)
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }

    /// Physical volume of one voxel in μm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    /// World-space bounds of the whole grid (not just foreground).
    pub fn world_bounds(&self) -> (Vec3, Vec3) {
        let hi = self.origin
            + Vec3::new(
                self.dims[0] as f64 * self.spacing,
                self.dims[1] as f64 * self.spacing,
                self.dims[2] as f64 * self.spacing,
            );
        (self.origin, hi)
    }

    pub fn same_grid(&self, other: &VoxelMask) -> bool {
        self.dims == other.dims && self.spacing == other.spacing && self.origin == other.origin
    }

    /// Iterates foreground voxel indices in x-fastest order.
    pub fn foreground_voxels(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [nx, ny, _] = self.dims;
        self.data.iter().enumerate().filter(|(_, &b)| b != 0).map(move |(li, _)| {
            let i = li % nx;
            let j = (li / nx) % ny;
            let k = li / (nx * ny);
            [i, j, k]
        })
    }

    /// Number of 6-connected components among foreground voxels.
    pub fn connected_components(&self) -> usize {
        let [nx, ny, nz] = self.dims;
        let mut seen = vec![false; self.data.len()];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if self.data[start] == 0 || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(li) = stack.pop() {
                let i = li % nx;
                let j = (li / nx) % ny;
                let k = li / (nx * ny);
                let mut visit = |ni: usize, nj: usize, nk: usize| {
                    let nli = ni + nx * (nj + ny * nk);
                    if self.data[nli] != 0 && !seen[nli] {
                        seen[nli] = true;
                        stack.push(nli);
                    }
                };
                if i > 0 {
                    visit(i - 1, j, k);
                }
                if i + 1 < nx {
                    visit(i + 1, j, k);
                }
                if j > 0 {
                    visit(i, j - 1, k);
                }
                if j + 1 < ny {
                    visit(i, j + 1, k);
                }
                if k > 0 {
                    visit(i, j, k - 1);
                }
                if k + 1 < nz {
                    visit(i, j, k + 1);
                }
            }
        }
        components
    }
}

/// Per-voxel Euclidean distance (μm) to the nearest background voxel center.
#[derive(Clone, Debug)]
pub struct DistanceField {
    dims: [usize; 3],
    spacing: f64,
    origin: Vec3,
    data: Vec<f64>,
}

impl DistanceField {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn value(&self, [i, j, k]: [usize; 3]) -> f64 {
        self.data[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    /// Field value of the voxel containing a world position.
    pub fn sample_world(&self, p: Vec3) -> Result<f64> {
        let rel = (p - self.origin) / self.spacing;
        let idx = [rel.x.floor(), rel.y.floor(), rel.z.floor()];
        for (a, &f) in idx.iter().enumerate() {
            if f < 0.0 || f >= self.dims[a] as f64 {
                return Err(Error::OutOfBounds(p));
            }
        }
        Ok(self.value([idx[0] as usize, idx[1] as usize, idx[2] as usize]))
    }
}

/// Exact squared Euclidean distance transform in voxel units, computed with
/// the separable lower-envelope (parabola) method. Background voxels get 0.
/// Voxels outside the grid are ignored; a mask with no background at all
/// saturates at the squared grid diagonal.
fn distance_transform_sq(mask: &VoxelMask) -> Vec<f64> {
    let [nx, ny, nz] = mask.dims;
    let diag_sq = (nx * nx + ny * ny + nz * nz) as f64;
    let inf = f64::INFINITY;
    let mut d = vec![0.0f64; mask.data.len()];

    // Pass 1: 1-D distance along x per (y, z) row, squared.
    for k in 0..nz {
        for j in 0..ny {
            let row = nx * (j + ny * k);
            let mut prev = inf;
            for i in 0..nx {
                prev = if mask.data[row + i] == 0 { 0.0 } else { prev + 1.0 };
                d[row + i] = prev;
            }
            prev = inf;
            for i in (0..nx).rev() {
                prev = if mask.data[row + i] == 0 { 0.0 } else { prev + 1.0 };
                if prev < d[row + i] {
                    d[row + i] = prev;
                }
            }
            for i in 0..nx {
                let v = d[row + i];
                d[row + i] = if v.is_finite() { v * v } else { inf };
            }
        }
    }

    // Passes 2 and 3: exact 1-D lower envelope along y, then z.
    let mut f = vec![0.0f64; ny.max(nz)];
    let mut out = vec![0.0f64; ny.max(nz)];
    let mut v = vec![0usize; ny.max(nz)];
    let mut z = vec![0.0f64; ny.max(nz) + 1];
    for k in 0..nz {
        for i in 0..nx {
            for j in 0..ny {
                f[j] = d[i + nx * (j + ny * k)];
            }
            envelope_1d(&f[..ny], &mut out[..ny], &mut v, &mut z);
            for j in 0..ny {
                d[i + nx * (j + ny * k)] = out[j];
            }
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            for k in 0..nz {
                f[k] = d[i + nx * (j + ny * k)];
            }
            envelope_1d(&f[..nz], &mut out[..nz], &mut v, &mut z);
            for k in 0..nz {
                d[i + nx * (j + ny * k)] = out[k];
            }
        }
    }

    for value in d.iter_mut() {
        if !value.is_finite() {
            *value = diag_sq;
        }
    }
    d
}

/// 1-D squared-distance transform: out[p] = min_q ((p-q)^2 + f[q]).
/// Entries of f may be +inf (no source in that column).
fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let mut any = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !any {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            any = true;
            continue;
        }
        let mut s;
        loop {
            let vq = v[k];
            s = ((f[q] + (q * q) as f64) - (f[vq] + (vq * vq) as f64)) / (2.0 * (q as f64 - vq as f64));
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                break;
            }
        }
        if s > z[k] {
            k += 1;
        }
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if !any {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (p, out_p) in out.iter_mut().enumerate() {
        while z[k + 1] < p as f64 {
            k += 1;
        }
        let vq = v[k];
        let dq = p as f64 - vq as f64;
        *out_p = dq * dq + f[vq];
    }
}

/// Exact Euclidean distance (μm) from every voxel to the nearest background
/// voxel center. Background voxels map to exactly 0.
pub fn distance_transform(mask: &VoxelMask) -> DistanceField {
    let sq = distance_transform_sq(mask);
    let data = sq.into_iter().map(|d2| d2.sqrt() * mask.spacing).collect();
    DistanceField { dims: mask.dims, spacing: mask.spacing, origin: mask.origin, data }
}

/// Morphological erosion with a discrete ball: a voxel survives when no
/// background voxel center lies within `radius` of its center. Voxels outside
/// the grid count as background, so masks shrink at the grid border.
pub fn erode(mask: &VoxelMask, radius: f64) -> Result<VoxelMask> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("erosion radius must be >= 0, got {radius}")));
    }
    let [nx, ny, nz] = mask.dims;
    let sq = distance_transform_sq(mask);
    let s2 = mask.spacing * mask.spacing;
    let r2 = radius * radius;
    let mut out = mask.clone();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let li = i + nx * (j + ny * k);
                if mask.data[li] == 0 {
                    continue;
                }
                let border = 1 + i.min(nx - 1 - i).min(j.min(ny - 1 - j)).min(k.min(nz - 1 - k));
                let d2 = sq[li].min((border * border) as f64);
                if !(d2 * s2 > r2) {
                    out.data[li] = 0;
                }
            }
        }
    }
    Ok(out)
}

/// Parameters of the cortex-shell approximation.
#[derive(Clone, Copy, Debug)]
pub struct CortexParams {
    /// Shell thickness: erosion radius subtracted from the whole mask, μm.
    pub erosion_radius_r1: f64,
    /// Radius of the exclusion ball around the root position, μm.
    pub exclusion_radius_r2: f64,
    /// Vessel root position (world μm); must lie inside the grid bounds.
    pub root_position: Vec3,
}

/// Approximates the organ cortex as the boundary shell of the whole mask
/// minus a ball around the root: voxels of `whole` that erosion by R1
/// removes and that lie strictly farther than R2 from the root.
pub fn extract_cortex(whole: &VoxelMask, params: &CortexParams) -> Result<VoxelMask> {
    if whole.is_empty_mask() {
        return Err(Error::EmptyMask("whole-organ mask".into()));
    }
    if !(params.erosion_radius_r1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "erosion radius R1 must be > 0, got {}",
            params.erosion_radius_r1
        )));
    }
    if !(params.exclusion_radius_r2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exclusion radius R2 must be >= 0, got {}",
            params.exclusion_radius_r2
        )));
    }
    if whole.world_to_voxel(params.root_position).is_none() {
        return Err(Error::OutOfBounds(params.root_position));
    }

    let eroded = erode(whole, params.erosion_radius_r1)?;
    let r2_sq = params.exclusion_radius_r2 * params.exclusion_radius_r2;
    let [nx, ny, nz] = whole.dims;
    let mut out = VoxelMask::new(whole.dims, whole.spacing, whole.origin)?;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = [i, j, k];
                if !whole.get(idx) || eroded.get(idx) {
                    continue;
                }
                let c = whole.voxel_center(idx);
                if c.distance_squared(params.root_position) > r2_sq {
                    out.set(idx, true);
                }
            }
        }
    }
    if out.is_empty_mask() {
        return Err(Error::EmptyMask(format!(
            "cortex extraction with R1 = {} μm, R2 = {} μm removed every voxel",
            params.erosion_radius_r1, params.exclusion_radius_r2
        )));
    }
    Ok(out)
}
