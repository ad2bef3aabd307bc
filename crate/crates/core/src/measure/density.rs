//! Densities on a bounded box.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_vec;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Density {
    /// Piecewise constant on a regular grid over `[lo, hi]`; `values` is in
    /// row-major order (last axis fastest) and normalized to unit mass.
    Histogram {
        lo: Vec<f64>,
        hi: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<f64>,
    },
    /// A density evaluator on `[lo, hi]`. `breaks` lists, per axis, the
    /// coordinates where the evaluator is not smooth; quadrature panels are
    /// split there.
    Function {
        lo: Vec<f64>,
        hi: Vec<f64>,
        f: DensityFn,
        breaks: Vec<Vec<f64>>,
    },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Histogram { lo, hi, shape, .. } => f
                .debug_struct("Histogram")
                .field("lo", lo)
                .field("hi", hi)
                .field("shape", shape)
                .finish_non_exhaustive(),
            Density::Function { lo, hi, .. } => f
                .debug_struct("Function")
                .field("lo", lo)
                .field("hi", hi)
                .finish_non_exhaustive(),
        }
    }
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() || lo.len() != hi.len() {
        return Err(Error::InvalidMeasure(
            "density box bounds must have equal nonzero length".into(),
        ));
    }
    if lo
        .iter()
        .zip(hi)
        .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
    {
        return Err(Error::InvalidMeasure(
            "density box must be finite with lo < hi".into(),
        ));
    }
    Ok(())
}

impl Density {
    /// Histogram density; `weights` are nonnegative bin heights and are
    /// rescaled to unit mass.
    pub fn histogram(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        check_box(&lo, &hi)?;
        if shape.len() != lo.len() || shape.contains(&0) {
            return Err(Error::InvalidMeasure(
                "histogram shape must give a positive bin count per axis".into(),
            ));
        }
        let bins: usize = shape.iter().product();
        if weights.len() != bins {
            return Err(Error::InvalidMeasure(format!(
                "histogram has {bins} bins but {} values",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure(
                "histogram values must be finite and nonnegative".into(),
            ));
        }
        let bin_volume: f64 = lo
            .iter()
            .zip(&hi)
            .zip(&shape)
            .map(|((a, b), s)| (b - a) / *s as f64)
            .product();
        let total: f64 = weights.iter().sum::<f64>() * bin_volume;
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("histogram has zero mass".into()));
        }
        let values = weights.iter().map(|w| w / total).collect();
        Ok(Density::Histogram {
            lo,
            hi,
            shape,
            values,
        })
    }

    /// Density given by an evaluator; its integral over the box must be 1
    /// within `1e-9`.
    pub fn function(lo: Vec<f64>, hi: Vec<f64>, f: DensityFn, breaks: Vec<Vec<f64>>) -> Result<Self> {
        check_box(&lo, &hi)?;
        let breaks = if breaks.is_empty() {
            vec![Vec::new(); lo.len()]
        } else {
            breaks
        };
        if breaks.len() != lo.len() {
            return Err(Error::InvalidMeasure("one break list per axis expected".into()));
        }
        let d = Density::Function {
            lo: lo.clone(),
            hi: hi.clone(),
            f,
            breaks,
        };
        let total = d.moments(&lo, &hi)[0];
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!(
                "density integrates to {total}, expected 1 within 1e-9"
            )));
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.bounds().0.len()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        match self {
            Density::Histogram { lo, hi, .. } | Density::Function { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Density::Histogram { .. } => match self.bin_of(x) {
                Some(i) => self.histogram_values()[i],
                None => 0.0,
            },
            Density::Function { lo, hi, f, .. } => {
                if x.iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (a, b))| *a <= *v && *v <= *b)
                {
                    f(x).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    fn histogram_values(&self) -> &[f64] {
        match self {
            Density::Histogram { values, .. } => values,
            Density::Function { .. } => &[],
        }
    }

    fn bin_of(&self, x: &[f64]) -> Option<usize> {
        let Density::Histogram { lo, hi, shape, .. } = self else {
            return None;
        };
        let mut idx = 0;
        for k in 0..lo.len() {
            if x[k] < lo[k] || x[k] > hi[k] {
                return None;
            }
            let w = (hi[k] - lo[k]) / shape[k] as f64;
            let i = (((x[k] - lo[k]) / w) as usize).min(shape[k] - 1);
            idx = idx * shape[k] + i;
        }
        Some(idx)
    }

    /// `[mass, int x_0, ..., int x_{d-1}]` over the closed rectangle.
    pub fn moments(&self, rlo: &[f64], rhi: &[f64]) -> Vec<f64> {
        match self {
            Density::Histogram { .. } => {
                let mut out = vec![0.0; self.dim() + 1];
                self.for_each_bin_overlap(rlo, rhi, |value, a, b| {
                    let vol: f64 = a.iter().zip(b).map(|(x, y)| y - x).product();
                    let m = value * vol;
                    out[0] += m;
                    for k in 0..a.len() {
                        out[k + 1] += m * 0.5 * (a[k] + b[k]);
                    }
                });
                out
            }
            Density::Function { lo, hi, f, breaks } => {
                let d = lo.len();
                let a: Vec<f64> = (0..d).map(|k| lo[k].max(rlo[k])).collect();
                let b: Vec<f64> = (0..d).map(|k| hi[k].min(rhi[k])).collect();
                if a.iter().zip(&b).any(|(x, y)| x >= y) {
                    return vec![0.0; d + 1];
                }
                let mut point = vec![0.0; d];
                nested_moments(0, &a, &b, breaks, f.as_ref(), &mut point)
            }
        }
    }

    fn for_each_bin_overlap<F: FnMut(f64, &[f64], &[f64])>(&self, rlo: &[f64], rhi: &[f64], mut visit: F) {
        let Density::Histogram {
            lo,
            hi,
            shape,
            values,
        } = self
        else {
            return;
        };
        let d = lo.len();
        let mut ranges = Vec::with_capacity(d);
        for k in 0..d {
            let a = lo[k].max(rlo[k]);
            let b = hi[k].min(rhi[k]);
            if a >= b {
                return;
            }
            let w = (hi[k] - lo[k]) / shape[k] as f64;
            let i0 = (((a - lo[k]) / w).floor() as usize).min(shape[k] - 1);
            let i1 = (((b - lo[k]) / w).ceil() as usize).clamp(i0 + 1, shape[k]);
            ranges.push((i0, i1, a, b, w));
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        loop {
            let mut flat = 0;
            let mut empty = false;
            for k in 0..d {
                let (_, _, ra, rb, w) = ranges[k];
                let x0 = lo[k] + idx[k] as f64 * w;
                a[k] = x0.max(ra);
                b[k] = (x0 + w).min(rb);
                if a[k] >= b[k] {
                    empty = true;
                }
                flat = flat * shape[k] + idx[k];
            }
            if !empty && values[flat] > 0.0 {
                visit(values[flat], &a, &b);
            }
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < ranges[k].1 {
                    break;
                }
                idx[k] = ranges[k].0;
            }
        }
    }

    /// Draw from the density restricted to the rectangle.
    pub fn sample_in<R: Rng + ?Sized>(&self, rlo: &[f64], rhi: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let d = self.dim();
        match self {
            Density::Histogram { .. } => {
                let mut pieces: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
                let mut total = 0.0;
                self.for_each_bin_overlap(rlo, rhi, |value, a, b| {
                    let vol: f64 = a.iter().zip(b).map(|(x, y)| y - x).product();
                    total += value * vol;
                    pieces.push((total, a.to_vec(), b.to_vec()));
                });
                if total <= 0.0 {
                    return Err(Error::Sampling("rectangle carries no density mass".into()));
                }
                let u = rng.random::<f64>() * total;
                let i = pieces.partition_point(|p| p.0 <= u).min(pieces.len() - 1);
                let (_, a, b) = &pieces[i];
                Ok((0..d)
                    .map(|k| a[k] + rng.random::<f64>() * (b[k] - a[k]))
                    .collect())
            }
            Density::Function { lo, hi, f, breaks } => {
                let a: Vec<f64> = (0..d).map(|k| lo[k].max(rlo[k])).collect();
                let b: Vec<f64> = (0..d).map(|k| hi[k].min(rhi[k])).collect();
                if a.iter().zip(&b).any(|(x, y)| x > y) {
                    return Err(Error::Sampling("rectangle misses the density box".into()));
                }
                let envelope = 1.25 * grid_max(&a, &b, breaks, f.as_ref());
                if !(envelope > 0.0 && envelope.is_finite()) {
                    return Err(Error::Sampling("density vanishes on the sampling grid".into()));
                }
                let mut x = vec![0.0; d];
                for _ in 0..1_000_000 {
                    for k in 0..d {
                        x[k] = a[k] + rng.random::<f64>() * (b[k] - a[k]);
                    }
                    if rng.random::<f64>() * envelope < f(&x).max(0.0) {
                        return Ok(x);
                    }
                }
                Err(Error::Sampling("rejection sampler exceeded 1e6 proposals".into()))
            }
        }
    }
}

fn panel_edges(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|t| *t > a && *t < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges
}

fn nested_moments(
    k: usize,
    a: &[f64],
    b: &[f64],
    breaks: &[Vec<f64>],
    f: &(dyn Fn(&[f64]) -> f64 + Send + Sync),
    point: &mut Vec<f64>,
) -> Vec<f64> {
    let d = a.len();
    let vol: f64 = a.iter().zip(b).map(|(x, y)| y - x).product();
    let tol = 1e-13 * vol / (b[k] - a[k]).max(f64::MIN_POSITIVE);
    let mut out = vec![0.0; d + 1];
    let edges = panel_edges(a[k], b[k], &breaks[k]);
    for w in edges.windows(2) {
        let part = adaptive_vec(w[0], w[1], d + 1, tol, &mut |x, o: &mut [f64]| {
            point[k] = x;
            if k + 1 == d {
                let v = f(point).max(0.0);
                o[0] = v;
                for j in 0..d {
                    o[j + 1] = point[j] * v;
                }
            } else {
                let sub = nested_moments(k + 1, a, b, breaks, f, point);
                o.copy_from_slice(&sub);
            }
        });
        for (s, p) in out.iter_mut().zip(part) {
            *s += p;
        }
    }
    out
}

fn grid_max(a: &[f64], b: &[f64], breaks: &[Vec<f64>], f: &(dyn Fn(&[f64]) -> f64 + Send + Sync)) -> f64 {
    let d = a.len();
    let per_axis = if d <= 3 { 17 } else { 7 };
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut pts: Vec<f64> = (0..per_axis)
                .map(|i| a[k] + (b[k] - a[k]) * i as f64 / (per_axis - 1) as f64)
                .collect();
            let edges = panel_edges(a[k], b[k], &breaks[k]);
            pts.extend(edges.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            pts
        })
        .collect();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut best = 0.0f64;
    loop {
        for k in 0..d {
            x[k] = axes[k][idx[k]];
        }
        best = best.max(f(&x));
        let mut k = 0;
        loop {
            if k == d {
                return best;
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn histogram_moments_are_exact() {
        let h = Density::histogram(vec![0.0, 0.0], vec![2.0, 1.0], vec![2, 1], vec![1.0, 3.0]).unwrap();
        let m = h.moments(&[f64::NEG_INFINITY; 2], &[f64::INFINITY; 2]);
        assert!((m[0] - 1.0).abs() < 1e-15);
        // mass 1/4 on [0,1], 3/4 on [1,2]
        assert!((m[1] - (0.25 * 0.5 + 0.75 * 1.5)).abs() < 1e-15);
        let half = h.moments(&[0.5, 0.0], &[1.5, 1.0]);
        assert!((half[0] - (0.125 + 0.375)).abs() < 1e-15);
    }

    #[test]
    fn function_density_quadrature() {
        // f(x, y) = x + y on [0,1]^2 integrates to 1
        let f: DensityFn = Arc::new(|p: &[f64]| p[0] + p[1]);
        let d = Density::function(vec![0.0, 0.0], vec![1.0, 1.0], f, vec![]).unwrap();
        let m = d.moments(&[0.0, 0.0], &[0.5, 1.0]);
        // int_0^.5 int_0^1 (x+y) = 1/8 + 1/4
        assert!((m[0] - 0.375).abs() < 1e-12);
        let bad: DensityFn = Arc::new(|_| 2.0);
        assert!(Density::function(vec![0.0], vec![1.0], bad, vec![]).is_err());
    }

    #[test]
    fn rejection_sampling_stays_in_rect() {
        let f: DensityFn = Arc::new(|p: &[f64]| 2.0 * p[0]);
        let d = Density::function(vec![0.0], vec![1.0], f, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mean = 0.0;
        for _ in 0..20000 {
            let x = d.sample_in(&[0.5], &[1.0], &mut rng).unwrap();
            assert!((0.5..=1.0).contains(&x[0]));
            mean += x[0] / 20000.0;
        }
        // E[X | X >= 1/2] for density 2x is 7/9
        assert!((mean - 7.0 / 9.0).abs() < 0.01);
    }
}
