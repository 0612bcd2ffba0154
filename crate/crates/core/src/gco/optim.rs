//! Quasi-Newton minimizer for the node relaxation subproblem.
//!
//! Relaxing a branching node with its neighbors fixed minimizes a weighted
//! sum of distances to fixed anchor points (the cost is linear in each edge
//! length). That objective is convex; BFGS with a backtracking line search
//! converges in a handful of steps. The gradient is singular where the point
//! coincides with an anchor, so a minimum-distance guard stops descent there
//! and leaves the cleanup to the merge pass.

use crate::linalg::Vec3;

/// Fixed neighbor endpoint with its cost coefficient (N/s): the cost
/// contribution of the incident edge is `coeff * |x - pos|`.
#[derive(Clone, Copy, Debug)]
pub struct Anchor {
    pub pos: Vec3,
    pub coeff: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct MinimizeResult {
    pub pos: Vec3,
    pub cost: f64,
    /// Gradient norm dropped below tolerance.
    pub converged: bool,
    /// The line search failed before any progress was made.
    pub stalled: bool,
}

pub fn weber_cost(x: Vec3, anchors: &[Anchor]) -> f64 {
    anchors.iter().map(|a| a.coeff * x.distance(a.pos)).sum()
}

/// Analytic gradient; None when `x` sits within `min_dist` of an anchor.
pub fn weber_gradient(x: Vec3, anchors: &[Anchor], min_dist: f64) -> Option<Vec3> {
    let mut g = Vec3::ZERO;
    for a in anchors {
        let d = x - a.pos;
        let len = d.norm();
        if len <= min_dist {
            return None;
        }
        g += d * (a.coeff / len);
    }
    Some(g)
}

/// 3x3 symmetric matrix as row arrays; enough for the inverse-Hessian state.
type Mat3 = [[f64; 3]; 3];

fn mat_identity(scale: f64) -> Mat3 {
    [[scale, 0.0, 0.0], [0.0, scale, 0.0], [0.0, 0.0, scale]]
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

/// BFGS update H' = (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ.
fn bfgs_update(h: &mut Mat3, s: Vec3, y: Vec3, rho: f64) {
    let hy = mat_vec(h, y);
    let yhy = y.dot(hy);
    let sv = [s.x, s.y, s.z];
    let hyv = [hy.x, hy.y, hy.z];
    for i in 0..3 {
        for j in 0..3 {
            h[i][j] += rho * rho * yhy * sv[i] * sv[j] + rho * sv[i] * sv[j]
                - rho * (sv[i] * hyv[j] + hyv[i] * sv[j]);
        }
    }
}

/// Minimizes the weighted-distance objective from `start`. Never returns a
/// point with higher cost than the start.
pub fn minimize(
    anchors: &[Anchor],
    start: Vec3,
    min_dist: f64,
    grad_tol: f64,
    max_steps: usize,
) -> MinimizeResult {
    let mut x = start;
    let mut fx = weber_cost(x, anchors);
    let mut best = MinimizeResult { pos: x, cost: fx, converged: false, stalled: false };

    let Some(mut g) = weber_gradient(x, anchors, min_dist) else {
        best.stalled = true;
        return best;
    };

    // Scale the first step to the geometry, not the raw gradient magnitude.
    let mean_dist =
        anchors.iter().map(|a| x.distance(a.pos)).sum::<f64>() / anchors.len().max(1) as f64;
    let g0 = g.norm();
    let mut h = mat_identity(if g0 > 0.0 { 0.5 * mean_dist / g0 } else { 1.0 });
    let mut first_update = true;
    let mut made_progress = false;

    for _ in 0..max_steps {
        if g.norm() < grad_tol {
            best.converged = true;
            break;
        }
        let mut dir = -mat_vec(&h, g);
        if g.dot(dir) >= 0.0 {
            // Curvature state went bad; restart from steepest descent.
            h = mat_identity(if g.norm() > 0.0 { 0.5 * mean_dist / g.norm() } else { 1.0 });
            dir = -mat_vec(&h, g);
        }

        // Armijo backtracking.
        let slope = g.dot(dir);
        let mut t = 1.0;
        let mut x_new = x;
        let mut f_new = fx;
        let mut ok = false;
        while t > 1e-14 {
            let cand = x + dir * t;
            let f_cand = weber_cost(cand, anchors);
            if f_cand <= fx + 1e-4 * t * slope {
                x_new = cand;
                f_new = f_cand;
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if !ok {
            best.stalled = !made_progress;
            break;
        }
        made_progress = true;

        let Some(g_new) = weber_gradient(x_new, anchors, min_dist) else {
            // Landed on top of an anchor: cost is still lower, stop here.
            x = x_new;
            fx = f_new;
            break;
        };
        let s = x_new - x;
        let y = g_new - g;
        let sy = s.dot(y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first_update {
                h = mat_identity(sy / y.dot(y));
                first_update = false;
            }
            bfgs_update(&mut h, s, y, 1.0 / sy);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    if fx < best.cost {
        best.pos = x;
        best.cost = fx;
    }
    best
}
