//! Probability measures accessible through rectangle masses, axis
//! quantiles, restricted sampling and conditional means.

mod ball;
mod density;
mod marginal;

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ball::{ball_rect_moments, unit_ball_volume};
pub use density::{Density, DensityFn};
pub use marginal::Marginal;

/// Closed axis-aligned rectangle; bounds may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Rect {
    pub fn full(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Copy with `hi[axis] = min(hi[axis], t)`.
    pub fn below(&self, axis: usize, t: f64) -> Self {
        let mut r = self.clone();
        r.hi[axis] = r.hi[axis].min(t);
        r
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (a, b)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*a, *b);
        }
    }
}

#[derive(Clone, Debug)]
pub enum MeasureKind {
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    UniformBall {
        center: Vec<f64>,
        radius: f64,
    },
    Product(Vec<Marginal>),
    Density(Density),
    /// Weighted atoms; `points` is flat row-major, `weights` sum to 1.
    Cloud {
        points: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct TargetMeasure {
    dim: usize,
    kind: MeasureKind,
}

const QUANTILE_MASS_TOL: f64 = 1e-10;

impl TargetMeasure {
    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidMeasure(
                "box bounds must have equal nonzero length".into(),
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::InvalidMeasure(
                "box must be finite with lo < hi on every axis".into(),
            ));
        }
        Ok(Self {
            dim: lo.len(),
            kind: MeasureKind::UniformBox { lo, hi },
        })
    }

    pub fn uniform_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMeasure(
                "ball center must be a finite nonempty vector".into(),
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            dim: center.len(),
            kind: MeasureKind::UniformBall { center, radius },
        })
    }

    pub fn product(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidMeasure(
                "product measure needs at least one marginal".into(),
            ));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self {
            dim: marginals.len(),
            kind: MeasureKind::Product(marginals),
        })
    }

    pub fn density(density: Density) -> Self {
        Self {
            dim: density.dim(),
            kind: MeasureKind::Density(density),
        }
    }

    /// Weighted point cloud; `weights = None` means equal weights. Weights
    /// are rescaled to sum to 1.
    pub fn cloud(dim: usize, points: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidMeasure(
                "cloud needs at least one point of the stated dimension".into(),
            ));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("cloud coordinates must be finite".into()));
        }
        let m = points.len() / dim;
        let raw = weights.unwrap_or_else(|| vec![1.0; m]);
        if raw.len() != m {
            return Err(Error::InvalidMeasure(format!(
                "cloud has {m} points but {} weights",
                raw.len()
            )));
        }
        if raw.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidMeasure(
                "cloud weights must be finite and positive".into(),
            ));
        }
        let total: f64 = crate::exact_sum::exact_sum(raw.iter().copied());
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(Self {
            dim,
            kind: MeasureKind::Cloud { points, weights },
        })
    }

    /// Dirac mass at `x`.
    pub fn atom(x: Vec<f64>) -> Result<Self> {
        let dim = x.len();
        Self::cloud(dim, x, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, MeasureKind::Cloud { .. })
    }

    /// Atom locations and weights for clouds.
    pub fn atoms(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            MeasureKind::Cloud { points, weights } => Some((points, weights)),
            _ => None,
        }
    }

    fn check_rect(&self, rect: &Rect) -> Result<()> {
        if rect.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rect.dim(),
            });
        }
        Ok(())
    }

    /// Smallest box containing the support (possibly infinite).
    pub fn support_bounds(&self) -> Rect {
        match &self.kind {
            MeasureKind::UniformBox { lo, hi } => Rect {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            MeasureKind::UniformBall { center, radius } => Rect {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
            },
            MeasureKind::Product(ms) => {
                let (lo, hi) = ms.iter().map(|m| m.support()).unzip();
                Rect { lo, hi }
            }
            MeasureKind::Density(d) => {
                let (lo, hi) = d.bounds();
                Rect {
                    lo: lo.to_vec(),
                    hi: hi.to_vec(),
                }
            }
            MeasureKind::Cloud { points, .. } => {
                let mut r = Rect {
                    lo: vec![f64::INFINITY; self.dim],
                    hi: vec![f64::NEG_INFINITY; self.dim],
                };
                for p in points.chunks(self.dim) {
                    for k in 0..self.dim {
                        r.lo[k] = r.lo[k].min(p[k]);
                        r.hi[k] = r.hi[k].max(p[k]);
                    }
                }
                r
            }
        }
    }

    /// `mu(rect)` for the closed rectangle.
    pub fn mass(&self, rect: &Rect) -> Result<f64> {
        self.check_rect(rect)?;
        Ok(self.moments(rect, false)[0])
    }

    /// `[mass, int x_0, ..., int x_{d-1}]` over the rectangle. When
    /// `with_moments` is false only the mass entry is meaningful.
    fn moments(&self, rect: &Rect, with_moments: bool) -> Vec<f64> {
        let d = self.dim;
        match &self.kind {
            MeasureKind::UniformBox { lo, hi } => {
                let mut out = vec![0.0; d + 1];
                let mut mass = 1.0;
                let mut mids = vec![0.0; d];
                for k in 0..d {
                    let a = lo[k].max(rect.lo[k]);
                    let b = hi[k].min(rect.hi[k]);
                    if a >= b {
                        return out;
                    }
                    mass *= (b - a) / (hi[k] - lo[k]);
                    mids[k] = 0.5 * (a + b);
                }
                out[0] = mass;
                for k in 0..d {
                    out[k + 1] = mass * mids[k];
                }
                out
            }
            MeasureKind::UniformBall { center, radius } => {
                let lo: Vec<f64> = (0..d).map(|k| rect.lo[k] - center[k]).collect();
                let hi: Vec<f64> = (0..d).map(|k| rect.hi[k] - center[k]).collect();
                let m = ball_rect_moments(*radius, &lo, &hi);
                let vol = unit_ball_volume(d) * radius.powi(d as i32);
                let mut out: Vec<f64> = m.iter().map(|v| v / vol).collect();
                for k in 0..d {
                    out[k + 1] += center[k] * out[0];
                }
                out
            }
            MeasureKind::Product(ms) => {
                let masses: Vec<f64> = (0..d)
                    .map(|k| ms[k].interval_mass(rect.lo[k], rect.hi[k]))
                    .collect();
                let mass: f64 = masses.iter().product();
                let mut out = vec![0.0; d + 1];
                out[0] = mass;
                if with_moments && mass > 0.0 {
                    for k in 0..d {
                        out[k + 1] = mass * ms[k].interval_mean(rect.lo[k], rect.hi[k]);
                    }
                }
                out
            }
            MeasureKind::Density(den) => den.moments(&rect.lo, &rect.hi),
            MeasureKind::Cloud { points, weights } => {
                let mut out = vec![0.0; d + 1];
                for (p, w) in points.chunks(d).zip(weights) {
                    if rect.contains(p) {
                        out[0] += w;
                        for k in 0..d {
                            out[k + 1] += w * p[k];
                        }
                    }
                }
                out
            }
        }
    }

    /// Smallest `t` such that `mu(rect ∩ {x_axis <= t}) >= target` (an
    /// absolute mass). Closed forms are used where available, otherwise
    /// bisection to `1e-10` in mass.
    pub fn axis_quantile(&self, rect: &Rect, axis: usize, target: f64) -> Result<f64> {
        self.check_rect(rect)?;
        if axis >= self.dim {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        match &self.kind {
            MeasureKind::UniformBox { lo, hi } => {
                let total = self.mass(rect)?;
                let a = lo[axis].max(rect.lo[axis]);
                let b = hi[axis].min(rect.hi[axis]);
                if total <= 0.0 {
                    return Ok(a);
                }
                let frac = (target / total).clamp(0.0, 1.0);
                Ok((a + frac * (b - a)).min(b))
            }
            MeasureKind::Product(ms) => {
                let other: f64 = (0..self.dim)
                    .filter(|&k| k != axis)
                    .map(|k| ms[k].interval_mass(rect.lo[k], rect.hi[k]))
                    .product();
                let (a, b) = (rect.lo[axis], rect.hi[axis]);
                if other <= 0.0 {
                    return Ok(a.max(ms[axis].support().0));
                }
                let t = ms[axis].interval_quantile(a, b, target / other);
                Ok(t)
            }
            MeasureKind::Cloud { points, weights } => {
                let mut atoms: Vec<(f64, f64)> = points
                    .chunks(self.dim)
                    .zip(weights)
                    .filter(|(p, _)| rect.contains(p))
                    .map(|(p, w)| (p[axis], *w))
                    .collect();
                atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
                let mut cum = 0.0;
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                for (x, w) in &atoms {
                    cum += w;
                    if cum >= target - 1e-14 * total {
                        return Ok(*x);
                    }
                }
                Ok(atoms.last().map(|a| a.0).unwrap_or(rect.lo[axis]))
            }
            _ => self.bisect_quantile(rect, axis, target),
        }
    }

    fn bisect_quantile(&self, rect: &Rect, axis: usize, target: f64) -> Result<f64> {
        let support = self.support_bounds();
        let mut lo = rect.lo[axis].max(support.lo[axis]);
        let mut hi = rect.hi[axis].min(support.hi[axis]);
        let cell = || format!("rect {:?}..{:?}, axis {axis}", rect.lo, rect.hi);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::QuantileNonConvergence { cell: cell() });
        }
        if target <= 0.0 {
            return Ok(lo);
        }
        let f = |t: f64| self.moments(&rect.below(axis, t), false)[0];
        for _ in 0..200 {
            if hi - lo <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if f(mid) >= target - 0.5 * QUANTILE_MASS_TOL {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let reached = f(hi);
        if (reached - target).abs() > QUANTILE_MASS_TOL && reached < target {
            return Err(Error::QuantileNonConvergence { cell: cell() });
        }
        Ok(hi)
    }

    /// Mean of the measure restricted to the rectangle (the conditional
    /// median per axis where the mean diverges), clamped into the
    /// rectangle.
    pub fn conditional_mean(&self, rect: &Rect) -> Result<Vec<f64>> {
        self.check_rect(rect)?;
        let m = self.moments(rect, true);
        if m[0] <= 0.0 {
            return Err(Error::InvalidMeasure("rectangle carries no mass".into()));
        }
        let mut x: Vec<f64> = match &self.kind {
            MeasureKind::Product(ms) => (0..self.dim)
                .map(|k| ms[k].interval_mean(rect.lo[k], rect.hi[k]))
                .collect(),
            _ => m[1..].iter().map(|v| v / m[0]).collect(),
        };
        rect.clamp(&mut x);
        Ok(x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.kind {
            MeasureKind::UniformBox { lo, hi } => Ok((0..self.dim)
                .map(|k| lo[k] + rng.random::<f64>() * (hi[k] - lo[k]))
                .collect()),
            MeasureKind::UniformBall { center, radius } => {
                let mut dir: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r = radius * rng.random::<f64>().powf(1.0 / self.dim as f64);
                for (v, c) in dir.iter_mut().zip(center) {
                    *v = c + r * *v / norm;
                }
                Ok(dir)
            }
            MeasureKind::Cloud { points, weights } => {
                let i = pick_weighted(weights, rng);
                Ok(points[i * self.dim..(i + 1) * self.dim].to_vec())
            }
            _ => self.sample_in(&Rect::full(self.dim), rng),
        }
    }

    /// Draw from the measure restricted to the rectangle (renormalized).
    pub fn sample_in<R: Rng + ?Sized>(&self, rect: &Rect, rng: &mut R) -> Result<Vec<f64>> {
        self.check_rect(rect)?;
        let d = self.dim;
        match &self.kind {
            MeasureKind::UniformBox { lo, hi } => {
                let mut x = vec![0.0; d];
                for k in 0..d {
                    let a = lo[k].max(rect.lo[k]);
                    let b = hi[k].min(rect.hi[k]);
                    if a > b {
                        return Err(Error::Sampling("rectangle misses the box".into()));
                    }
                    x[k] = a + rng.random::<f64>() * (b - a);
                }
                Ok(x)
            }
            MeasureKind::UniformBall { center, radius } => {
                let (a, b) = ball_rect_bbox(center, *radius, rect)
                    .ok_or_else(|| Error::Sampling("rectangle misses the ball".into()))?;
                let mut x = vec![0.0; d];
                let r2 = radius * radius;
                for _ in 0..1_000_000 {
                    let mut s = 0.0;
                    for k in 0..d {
                        x[k] = a[k] + rng.random::<f64>() * (b[k] - a[k]);
                        s += (x[k] - center[k]).powi(2);
                    }
                    if s <= r2 {
                        return Ok(x);
                    }
                }
                Err(Error::Sampling(
                    "ball rejection sampler exceeded 1e6 proposals".into(),
                ))
            }
            MeasureKind::Product(ms) => Ok((0..d)
                .map(|k| ms[k].sample_interval(rect.lo[k], rect.hi[k], rng.random::<f64>()))
                .collect()),
            MeasureKind::Density(den) => den.sample_in(&rect.lo, &rect.hi, rng),
            MeasureKind::Cloud { points, weights } => {
                let (idx, w): (Vec<usize>, Vec<f64>) = points
                    .chunks(d)
                    .zip(weights)
                    .enumerate()
                    .filter(|(_, (p, _))| rect.contains(p))
                    .map(|(i, (_, w))| (i, *w))
                    .unzip();
                if idx.is_empty() {
                    return Err(Error::Sampling("rectangle holds no atoms".into()));
                }
                let i = idx[pick_weighted(&w, rng)];
                Ok(points[i * d..(i + 1) * d].to_vec())
            }
        }
    }

    pub fn from_config(config: &MeasureConfig, base_dir: Option<&Path>) -> Result<Self> {
        let resolve = |p: &str| match base_dir {
            Some(dir) => dir.join(p),
            None => p.into(),
        };
        match config {
            MeasureConfig::UniformBox { lo, hi } => Self::uniform_box(lo.clone(), hi.clone()),
            MeasureConfig::UniformBall { center, radius } => Self::uniform_ball(center.clone(), *radius),
            MeasureConfig::Product { marginals } => Self::product(marginals.clone()),
            MeasureConfig::Atoms { points, weights } => {
                let dim = points.first().map(Vec::len).unwrap_or(0);
                if points.iter().any(|p| p.len() != dim) {
                    return Err(Error::InvalidMeasure("atoms must share one dimension".into()));
                }
                Self::cloud(dim, points.concat(), weights.clone())
            }
            MeasureConfig::Cloud { path, dim } => {
                let (points, weights) = crate::io::read_cloud_csv(&resolve(path), *dim)?;
                Self::cloud(*dim, points, weights)
            }
            MeasureConfig::Density {
                lo,
                hi,
                shape,
                values,
                values_path,
            } => {
                let values = match (values, values_path) {
                    (Some(v), None) => v.clone(),
                    (None, Some(p)) => crate::io::read_values_csv(&resolve(p))?,
                    _ => {
                        return Err(Error::InvalidMeasure(
                            "density needs exactly one of values or values_path".into(),
                        ))
                    }
                };
                Ok(Self::density(Density::histogram(
                    lo.clone(),
                    hi.clone(),
                    shape.clone(),
                    values,
                )?))
            }
        }
    }
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Tight bounding box of `ball ∩ rect`, or `None` if they do not meet.
fn ball_rect_bbox(center: &[f64], radius: f64, rect: &Rect) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = center.len();
    let mut a: Vec<f64> = (0..d).map(|k| rect.lo[k].max(center[k] - radius)).collect();
    let mut b: Vec<f64> = (0..d).map(|k| rect.hi[k].min(center[k] + radius)).collect();
    for _ in 0..3 {
        for k in 0..d {
            let off: f64 = (0..d)
                .filter(|&j| j != k)
                .map(|j| {
                    let c = center[j].clamp(a[j], b[j]);
                    (c - center[j]).powi(2)
                })
                .sum();
            let half = (radius * radius - off).max(0.0).sqrt();
            a[k] = a[k].max(center[k] - half);
            b[k] = b[k].min(center[k] + half);
            if a[k] > b[k] {
                return None;
            }
        }
    }
    Some((a, b))
}

/// Serializable measure description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    UniformBall {
        center: Vec<f64>,
        radius: f64,
    },
    Product {
        marginals: Vec<Marginal>,
    },
    Atoms {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// CSV with one point per row and an optional trailing weight column.
    Cloud {
        path: String,
        dim: usize,
    },
    /// Histogram density on a regular grid over `[lo, hi]`.
    Density {
        lo: Vec<f64>,
        hi: Vec<f64>,
        shape: Vec<usize>,
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        values_path: Option<String>,
    },
}
