//! Terminal-node placement by Poisson disk sampling over the cortex, plus
//! terminal radius sampling.
//!
//! Sampling runs over the full bounding cube of the cortex grid and filters
//! to cortex voxels afterwards, so the dart-throwing core stays
//! domain-agnostic. Sampling is single-threaded by construction: dart order
//! matters for determinism.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::voxel::VoxelMask;

/// Terminal sampling parameters.
#[derive(Clone, Debug)]
pub struct SamplingConfig {
    /// Number of terminals to place (N).
    pub n_terminals: usize,
    /// Minimum pairwise distance in μm; None derives it from the cortex
    /// volume and N.
    pub r_min: Option<f64>,
    /// Calibration constant for the derived minimum distance.
    pub r_min_k: f64,
    /// Mean of the terminal radius distribution, μm.
    pub r0_mean: f64,
    /// Standard deviation of the terminal radius distribution, μm.
    pub r0_std: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_terminals: 30_000,
            r_min: None,
            r_min_k: 1.0,
            r0_mean: 10.08,
            r0_std: 0.14,
            seed: 0,
        }
    }
}

/// Sampled terminal positions and radii (same length).
#[derive(Clone, Debug)]
pub struct TerminalSet {
    pub positions: Vec<Vec3>,
    pub radii: Vec<f64>,
}

impl TerminalSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Whether the sampler met the requested count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleStatus {
    Full,
    /// Fewer than half of the requested points were achievable.
    Short { requested: usize, achieved: usize },
}

/// Minimum pairwise distance from cortex volume V and point count n:
/// `k * (V / n)^(1/3)`.
pub fn min_distance_for_count(cortex: &VoxelMask, n: usize, k: f64) -> Result<f64> {
    if cortex.is_empty_mask() {
        return Err(Error::EmptyMask("cortex".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("point count must be >= 1".into()));
    }
    let volume = cortex.count_foreground() as f64 * cortex.voxel_volume();
    Ok(k * (volume / n as f64).cbrt())
}

/// Bridson dart throwing over the grid bounding cube, filtered to cortex
/// voxels, with a deterministic cell-sweep that restarts dart growth until
/// every point of the cube lies within 2·r_min of a sample. Returns at most
/// `n_target` points (uniform random truncation when over-generated).
pub fn poisson_disk_sample(
    cortex: &VoxelMask,
    r_min: f64,
    n_target: usize,
    seed: u64,
) -> Result<(Vec<Vec3>, SampleStatus)> {
    if cortex.is_empty_mask() {
        return Err(Error::EmptyMask("cortex".into()));
    }
    if !(r_min > 0.0) || !r_min.is_finite() {
        return Err(Error::InvalidParameter(format!("r_min must be > 0, got {r_min}")));
    }

    let (lo, hi) = cortex.world_bounds();
    let extent = hi - lo;
    let cell = r_min / 3.0f64.sqrt();
    let grid_dims = [
        (extent.x / cell).ceil().max(1.0) as usize,
        (extent.y / cell).ceil().max(1.0) as usize,
        (extent.z / cell).ceil().max(1.0) as usize,
    ];
    let cell_of = |p: Vec3| -> usize {
        let i = (((p.x - lo.x) / cell) as usize).min(grid_dims[0] - 1);
        let j = (((p.y - lo.y) / cell) as usize).min(grid_dims[1] - 1);
        let k = (((p.z - lo.z) / cell) as usize).min(grid_dims[2] - 1);
        i + grid_dims[0] * (j + grid_dims[1] * k)
    };

    let mut samples: Vec<Vec3> = Vec::new();
    let mut grid: Vec<Vec<u32>> = vec![Vec::new(); grid_dims[0] * grid_dims[1] * grid_dims[2]];
    let mut active: Vec<usize> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let r2 = r_min * r_min;
    let admissible = |p: Vec3, samples: &[Vec3], grid: &[Vec<u32>]| -> bool {
        let ci = ((p.x - lo.x) / cell) as isize;
        let cj = ((p.y - lo.y) / cell) as isize;
        let ck = ((p.z - lo.z) / cell) as isize;
        for dk in -2..=2isize {
            let k = ck + dk;
            if k < 0 || k >= grid_dims[2] as isize {
                continue;
            }
            for dj in -2..=2isize {
                let j = cj + dj;
                if j < 0 || j >= grid_dims[1] as isize {
                    continue;
                }
                for di in -2..=2isize {
                    let i = ci + di;
                    if i < 0 || i >= grid_dims[0] as isize {
                        continue;
                    }
                    let c = i as usize + grid_dims[0] * (j as usize + grid_dims[1] * k as usize);
                    for &s in &grid[c] {
                        if p.distance_squared(samples[s as usize]) < r2 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    };

    let push_sample = |p: Vec3,
                           samples: &mut Vec<Vec3>,
                           grid: &mut Vec<Vec<u32>>,
                           active: &mut Vec<usize>| {
        let id = samples.len();
        samples.push(p);
        grid[cell_of(p)].push(id as u32);
        active.push(id);
    };

    // Initial dart anywhere in the cube.
    let first = Vec3::new(
        lo.x + rng.gen::<f64>() * extent.x,
        lo.y + rng.gen::<f64>() * extent.y,
        lo.z + rng.gen::<f64>() * extent.z,
    );
    push_sample(first, &mut samples, &mut grid, &mut active);

    const K_DARTS: usize = 30;
    loop {
        // Standard Bridson expansion of the active front.
        while !active.is_empty() {
            let slot = rng.gen_range(0..active.len());
            let center = samples[active[slot]];
            let mut placed = false;
            for _ in 0..K_DARTS {
                let dir: [f64; 3] = UnitSphere.sample(&mut rng);
                // Radius distributed uniformly over the annulus volume [r, 2r].
                let u: f64 = rng.gen();
                let rad = r_min * (1.0 + 7.0 * u).cbrt();
                let p = center + Vec3::new(dir[0], dir[1], dir[2]) * rad;
                let in_box = p.x >= lo.x
                    && p.x < hi.x
                    && p.y >= lo.y
                    && p.y < hi.y
                    && p.z >= lo.z
                    && p.z < hi.z;
                if in_box && admissible(p, &samples, &grid) {
                    push_sample(p, &mut samples, &mut grid, &mut active);
                    placed = true;
                    break;
                }
            }
            if !placed {
                active.swap_remove(slot);
            }
        }

        // Deterministic sweep over still-empty cells. If some point of the
        // cube were farther than 2·r_min from every sample, its whole cell
        // (diagonal = r_min) would be admissible and a dart here would land,
        // so convergence of this loop guarantees 2·r_min coverage.
        let mut added = false;
        for c in 0..grid.len() {
            if !grid[c].is_empty() {
                continue;
            }
            let i = c % grid_dims[0];
            let j = (c / grid_dims[0]) % grid_dims[1];
            let k = c / (grid_dims[0] * grid_dims[1]);
            for _ in 0..K_DARTS {
                let p = Vec3::new(
                    lo.x + (i as f64 + rng.gen::<f64>()) * cell,
                    lo.y + (j as f64 + rng.gen::<f64>()) * cell,
                    lo.z + (k as f64 + rng.gen::<f64>()) * cell,
                );
                let in_box = p.x < hi.x && p.y < hi.y && p.z < hi.z;
                if in_box && admissible(p, &samples, &grid) {
                    push_sample(p, &mut samples, &mut grid, &mut active);
                    added = true;
                    break;
                }
            }
        }
        if !added {
            break;
        }
    }

    // Filter to cortex voxels.
    let mut kept: Vec<Vec3> = samples.into_iter().filter(|&p| cortex.contains_world(p)).collect();

    // Uniform random truncation when over-generated, from the same stream.
    if kept.len() > n_target {
        let mut order: Vec<usize> = (0..kept.len()).collect();
        let (selected, _) = order.partial_shuffle(&mut rng, n_target);
        let mut pick: Vec<usize> = selected.to_vec();
        pick.sort_unstable();
        kept = pick.into_iter().map(|i| kept[i]).collect();
    }

    let status = if kept.len() * 2 < n_target {
        SampleStatus::Short { requested: n_target, achieved: kept.len() }
    } else {
        SampleStatus::Full
    };
    Ok((kept, status))
}

/// Independent Gaussian radius draws; non-positive draws are resampled, not
/// clamped. Deterministic per seed.
pub fn sample_terminal_radii(n: usize, mean: f64, std: f64, seed: u64) -> Result<Vec<f64>> {
    if !(mean > 0.0) {
        return Err(Error::InvalidParameter(format!("radius mean must be > 0, got {mean}")));
    }
    if !(std >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius std must be >= 0, got {std}")));
    }
    if std == 0.0 {
        return Ok(vec![mean; n]);
    }
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::InvalidParameter(format!("invalid radius distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = normal.sample(&mut rng);
        if v > 0.0 {
            out.push(v);
        }
    }
    Ok(out)
}

/// Samples terminal positions and radii per the config. Positions use
/// `cfg.seed`, radii `cfg.seed + 1`.
pub fn sample_terminals(cortex: &VoxelMask, cfg: &SamplingConfig) -> Result<(TerminalSet, SampleStatus)> {
    let r_min = match cfg.r_min {
        Some(r) => r,
        None => min_distance_for_count(cortex, cfg.n_terminals, cfg.r_min_k)?,
    };
    let (positions, status) = poisson_disk_sample(cortex, r_min, cfg.n_terminals, cfg.seed)?;
    let radii = sample_terminal_radii(positions.len(), cfg.r0_mean, cfg.r0_std, cfg.seed.wrapping_add(1))?;
    Ok((TerminalSet { positions, radii }, status))
}
