//! Volume and first moments of a ball intersected with a rectangle.

use crate::quadrature::adaptive_vec;

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let (mut v0, mut v1) = (1.0, 2.0);
    if d == 0 {
        return v0;
    }
    for k in 2..=d {
        let v = v0 * 2.0 * std::f64::consts::PI / k as f64;
        v0 = v1;
        v1 = v;
    }
    v1
}

/// `[vol, int u_0, ..., int u_{d-1}]` over `{|u| <= r} ∩ [lo, hi]`, in
/// coordinates centered at the ball's center.
///
/// Each axis is integrated with `u_0 = r sin(theta)`, which removes the
/// square-root edge of the ball, and the panels are split wherever the
/// slice radius crosses the distance to a face, edge or corner of the
/// remaining rectangle (the only places the inner integral has kinks).
pub fn ball_rect_moments(r: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let d = lo.len();
    let mut out = vec![0.0; d + 1];
    if r <= 0.0 {
        return out;
    }
    let a = lo[0].max(-r);
    let b = hi[0].min(r);
    if a >= b {
        return out;
    }
    if d == 1 {
        out[0] = b - a;
        out[1] = 0.5 * (b - a) * (b + a);
        return out;
    }
    let ta = (a / r).clamp(-1.0, 1.0).asin();
    let tb = (b / r).clamp(-1.0, 1.0).asin();
    let mut cuts = vec![ta, tb];
    for s in corner_distances(&lo[1..], &hi[1..]) {
        if s > 0.0 && s < r {
            let t = (s / r).acos();
            for t in [t, -t] {
                if t > ta && t < tb {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let tol = 1e-14 * r.powi(d as i32);
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let part = adaptive_vec(w[0], w[1], d + 1, tol, &mut |t, o: &mut [f64]| {
            let (s, c) = t.sin_cos();
            let u0 = r * s;
            let rho = (r * c).max(0.0);
            let sub = ball_rect_moments(rho, &lo[1..], &hi[1..]);
            let jac = r * c;
            o[0] = sub[0] * jac;
            o[1] = u0 * sub[0] * jac;
            for k in 1..d {
                o[k + 1] = sub[k] * jac;
            }
        });
        for (x, p) in out.iter_mut().zip(part) {
            *x += p;
        }
    }
    out
}

/// Distances from the origin to every face, edge and corner of a
/// rectangle's bounding hyperplanes (finite bounds only).
fn corner_distances(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0f64];
    for (l, h) in lo.iter().zip(hi) {
        let mut next = acc.clone();
        for b in [l, h] {
            if b.is_finite() {
                next.extend(acc.iter().map(|s| s + b * b));
            }
        }
        acc = next;
    }
    acc.into_iter().skip(1).map(f64::sqrt).collect()
}
