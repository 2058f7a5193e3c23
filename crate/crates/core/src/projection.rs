//! Euclidean projections onto L2 and L1 balls.

/// Projects `v` onto `{u : ||u||_2 <= radius}` by radial scaling.
/// Feasible inputs are returned bit-for-bit unchanged.
pub fn project_l2_ball(v: &mut [f64], radius: f64) {
    let norm = l2_norm(v);
    if norm <= radius {
        return;
    }
    let scale = radius / norm;
    v.iter_mut().for_each(|x| *x *= scale);
}

/// Projects `v` onto `{u : ||u||_1 <= radius}`.
///
/// Sort-and-threshold: sort magnitudes in decreasing order, find the
/// largest prefix whose soft-threshold stays positive, then shrink every
/// magnitude by that threshold. Feasible inputs are returned unchanged.
pub fn project_l1_ball(v: &mut [f64], radius: f64) {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return;
    }
    if radius <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        let shrunk = (x.abs() - theta).max(0.0);
        *x = shrunk.copysign(*x);
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}
