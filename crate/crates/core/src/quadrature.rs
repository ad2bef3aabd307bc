//! Gauss–Legendre rules and small adaptive integrators.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over [a, b].
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 10-point rule used by the adaptive integrators.
pub fn gl10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Adaptive bisection quadrature on [a, b]: a panel is accepted once the
/// single-panel and two-half-panel estimates agree to `tol` (absolute).
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, f: &mut F) -> f64 {
    if a >= b {
        return 0.0;
    }
    let rule = gl10();
    let whole = rule.integrate(a, b, &mut *f);
    recurse(rule, a, b, whole, tol, 0, f)
}

fn recurse<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    f: &mut F,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, &mut *f);
    let right = rule.integrate(m, b, &mut *f);
    let refined = left + right;
    if (refined - whole).abs() <= tol || depth >= 40 || m <= a || m >= b {
        return refined;
    }
    recurse(rule, a, m, left, 0.5 * tol, depth + 1, f) + recurse(rule, m, b, right, 0.5 * tol, depth + 1, f)
}

/// Vector-valued version of [`adaptive`]: `f(x, out)` writes `m` components
/// and a panel is accepted when every component has settled.
pub fn adaptive_vec<F: FnMut(f64, &mut [f64])>(a: f64, b: f64, m: usize, tol: f64, f: &mut F) -> Vec<f64> {
    let mut out = vec![0.0; m];
    if a >= b {
        return out;
    }
    let rule = gl10();
    let whole = panel_vec(rule, a, b, m, f);
    recurse_vec(rule, a, b, &whole, tol, 0, f, &mut out);
    out
}

fn panel_vec<F: FnMut(f64, &mut [f64])>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    m: usize,
    f: &mut F,
) -> Vec<f64> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = vec![0.0; m];
    let mut buf = vec![0.0; m];
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        f(mid + half * x, &mut buf);
        for (s, v) in acc.iter_mut().zip(&buf) {
            *s += w * v;
        }
    }
    for s in acc.iter_mut() {
        *s *= half;
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn recurse_vec<F: FnMut(f64, &mut [f64])>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: &[f64],
    tol: f64,
    depth: usize,
    f: &mut F,
    out: &mut [f64],
) {
    let m = 0.5 * (a + b);
    let left = panel_vec(rule, a, m, whole.len(), f);
    let right = panel_vec(rule, m, b, whole.len(), f);
    let settled = whole
        .iter()
        .zip(left.iter().zip(&right))
        .all(|(w, (l, r))| (l + r - w).abs() <= tol);
    if settled || depth >= 40 || m <= a || m >= b {
        for (o, (l, r)) in out.iter_mut().zip(left.iter().zip(&right)) {
            *o += l + r;
        }
        return;
    }
    recurse_vec(rule, a, m, &left, 0.5 * tol, depth + 1, f, out);
    recurse_vec(rule, m, b, &right, 0.5 * tol, depth + 1, f, out);
}

/// Integral over [0, 1] of a function that may be singular at 0, using
/// dyadic panels [2^-(k+1), 2^-k]. Panels are added toward the origin until
/// two successive partial sums differ by less than `rel_tol` relative to the
/// accumulated absolute mass.
///
/// Returns `None` when the partial sums fail to settle within `max_levels`
/// panels, which is how a non-integrable singularity shows up.
pub fn dyadic_toward_zero<F: FnMut(f64) -> f64>(mut f: F, rel_tol: f64, max_levels: usize) -> Option<f64> {
    let rule = gl16();
    let mut total = 0.0;
    let mut abs_total = 0.0;
    let mut hi = 1.0f64;
    let mut settled = 0;
    let mut last_panel = f64::NAN;
    for _ in 0..max_levels {
        let lo = 0.5 * hi;
        let panel = rule.integrate(lo, hi, &mut f);
        if !panel.is_finite() {
            return None;
        }
        // Geometric tail estimate from the panel ratio.
        let ratio = panel / last_panel;
        let tail = if ratio > 0.0 && ratio < 1.0 {
            panel * ratio / (1.0 - ratio)
        } else {
            0.0
        };
        total += panel;
        abs_total += panel.abs();
        last_panel = panel;
        hi = lo;
        let scale = abs_total.max(f64::MIN_POSITIVE);
        if panel.abs() <= rel_tol * scale && tail.abs() <= rel_tol * scale {
            settled += 1;
            if settled >= 4 {
                return Some(total + tail);
            }
        } else {
            settled = 0;
        }
    }
    None
}
