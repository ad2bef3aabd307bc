//! Discrete pair energies, their gradient, cross/partial energies and
//! potentials.
//!
//! Every pair sum goes through [`ExactSum`], so results do not depend on
//! the order of the points or on how the work is split across threads.

mod continuum;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_sum::ExactSum;
use crate::kernel::Kernel;

pub use continuum::{continuum_energy_1d, continuum_energy_mc, McEstimate};

/// Rows per rayon task; below this the pair loop runs on the calling thread.
const PAR_THRESHOLD: usize = 384;

/// `n` points in `R^dim`, stored row-major; each carries weight `1/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

/// Read access shared by configurations and sub-configurations.
pub trait Points {
    fn dim(&self) -> usize;
    fn coords(&self) -> &[f64];
    /// The `n` in the weight `1/n` carried by each point.
    fn denominator(&self) -> usize;

    fn len(&self) -> usize {
        self.coords().len() / self.dim()
    }

    fn is_empty(&self) -> bool {
        self.coords().is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords()[i * d..(i + 1) * d]
    }
}

fn validate_coords(dim: usize, coords: &[f64]) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if coords.len() % dim != 0 {
        return Err(Error::InvalidArgument(format!(
            "{} coordinates do not split into points of dimension {dim}",
            coords.len()
        )));
    }
    if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "coordinate {} of point {} is not finite",
            i % dim,
            i / dim
        )));
    }
    Ok(())
}

impl Configuration {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        validate_coords(dim, &coords)?;
        if coords.is_empty() {
            return Err(Error::InvalidArgument(
                "a configuration needs at least one point".into(),
            ));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        Self::new(dim, points.concat())
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn centroid(&self) -> Vec<f64> {
        centroid(&self.coords, self.dim)
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut coords = self.coords.clone();
        for p in coords.chunks_mut(self.dim) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        Self {
            dim: self.dim,
            coords,
        }
    }

    /// Copy with center of mass moved to the origin.
    pub fn centered(&self) -> Self {
        let c: Vec<f64> = self.centroid().iter().map(|v| -v).collect();
        self.translated(&c)
    }

    /// Points reordered so that point `k` of the result is point `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let coords = perm.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        Self {
            dim: self.dim,
            coords,
        }
    }

    /// Largest distance of a point from the center of mass.
    pub fn radius(&self) -> f64 {
        let c = self.centroid();
        self.points().map(|p| dist(p, &c)).fold(0.0, f64::max)
    }
}

impl Points for Configuration {
    fn dim(&self) -> usize {
        self.dim
    }
    fn coords(&self) -> &[f64] {
        &self.coords
    }
    fn denominator(&self) -> usize {
        self.n()
    }
}

/// Points weighted `1/denominator` each, with `len <= denominator`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubConfiguration {
    dim: usize,
    coords: Vec<f64>,
    denominator: usize,
}

impl SubConfiguration {
    pub fn new(dim: usize, coords: Vec<f64>, denominator: usize) -> Result<Self> {
        validate_coords(dim, &coords)?;
        if coords.len() / dim > denominator {
            return Err(Error::InvalidArgument(format!(
                "{} points exceed denominator {denominator}",
                coords.len() / dim
            )));
        }
        Ok(Self {
            dim,
            coords,
            denominator,
        })
    }

    /// The selected points of `cfg`, keeping its denominator.
    pub fn from_indices(cfg: &Configuration, indices: &[usize]) -> Self {
        let coords = indices
            .iter()
            .flat_map(|&i| cfg.point(i).iter().copied())
            .collect();
        Self {
            dim: cfg.dim,
            coords,
            denominator: cfg.n(),
        }
    }

    /// Split `cfg` into the points with `mask[i] == true` and the rest.
    pub fn split(cfg: &Configuration, mask: &[bool]) -> (Self, Self) {
        let (a, b): (Vec<usize>, Vec<usize>) = (0..cfg.n()).partition(|&i| mask[i]);
        (Self::from_indices(cfg, &a), Self::from_indices(cfg, &b))
    }

    /// The same points as a configuration with its own `1/len` weights.
    pub fn to_configuration(&self) -> Result<Configuration> {
        Configuration::new(self.dim, self.coords.clone())
    }
}

impl Points for SubConfiguration {
    fn dim(&self) -> usize {
        self.dim
    }
    fn coords(&self) -> &[f64] {
        &self.coords
    }
    fn denominator(&self) -> usize {
        self.denominator
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyValue {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub value: f64,
    /// Number of ordered pairs summed.
    pub pair_count: u64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub min_pair_distance: f64,
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn centroid(coords: &[f64], dim: usize) -> Vec<f64> {
    let n = coords.len() / dim;
    (0..dim)
        .map(|k| crate::exact_sum::exact_sum(coords.iter().skip(k).step_by(dim).copied()) / n as f64)
        .collect()
}

/// Largest pair distance.
pub(crate) fn diameter_coords(coords: &[f64], dim: usize) -> f64 {
    let n = coords.len() / dim;
    let row = |i: usize| {
        let xi = &coords[i * dim..(i + 1) * dim];
        (i + 1..n)
            .map(|j| dist(xi, &coords[j * dim..(j + 1) * dim]))
            .fold(0.0, f64::max)
    };
    if n < PAR_THRESHOLD {
        (0..n).map(row).fold(0.0, f64::max)
    } else {
        (0..n).into_par_iter().map(row).reduce(|| 0.0, f64::max)
    }
}

fn check_kernel_dim<P: Points + ?Sized>(p: &P, kernel: &Kernel) -> Result<()> {
    if p.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            found: p.dim(),
        });
    }
    Ok(())
}

/// Exact sum of `g(|x_i - x_j|)` over unordered pairs `i < j`, and the
/// smallest pair distance.
pub(crate) fn unordered_pair_sum(coords: &[f64], dim: usize, kernel: &Kernel) -> (ExactSum, f64) {
    let n = coords.len() / dim;
    let row = |i: usize| {
        let mut acc = ExactSum::new();
        let mut dmin = f64::INFINITY;
        let xi = &coords[i * dim..(i + 1) * dim];
        for j in i + 1..n {
            let r = dist(xi, &coords[j * dim..(j + 1) * dim]);
            dmin = dmin.min(r);
            acc.add(kernel.radial(r));
        }
        (acc, dmin)
    };
    let merge = |(mut a, da): (ExactSum, f64), (b, db): (ExactSum, f64)| {
        a.merge(&b);
        (a, da.min(db))
    };
    if n < PAR_THRESHOLD {
        (0..n).map(row).fold((ExactSum::new(), f64::INFINITY), merge)
    } else {
        (0..n)
            .into_par_iter()
            .map(row)
            .reduce(|| (ExactSum::new(), f64::INFINITY), merge)
    }
}

/// Exact sum of `g(|p - q|)` over all `p` in `a`, `q` in `b`.
fn bipartite_sum(a: &[f64], b: &[f64], dim: usize, kernel: &Kernel) -> (ExactSum, f64) {
    let mut acc = ExactSum::new();
    let mut dmin = f64::INFINITY;
    for p in a.chunks(dim) {
        for q in b.chunks(dim) {
            let r = dist(p, q);
            dmin = dmin.min(r);
            acc.add(kernel.radial(r));
        }
    }
    (acc, dmin)
}

/// `(1/n^2) sum_{i != j} g(x_i - x_j)`.
pub fn discrete_energy(cfg: &Configuration, kernel: &Kernel) -> Result<EnergyValue> {
    check_kernel_dim(cfg, kernel)?;
    let n = cfg.n();
    let (s, dmin) = unordered_pair_sum(&cfg.coords, cfg.dim, kernel);
    Ok(EnergyValue {
        value: 2.0 * s.value() / (n as f64 * n as f64),
        pair_count: (n as u64) * (n as u64 - 1),
        min_pair_distance: dmin,
    })
}

fn check_pair<A: Points, B: Points>(a: &A, b: &B, kernel: &Kernel) -> Result<()> {
    check_kernel_dim(a, kernel)?;
    check_kernel_dim(b, kernel)?;
    if a.denominator() != b.denominator() {
        return Err(Error::InvalidArgument(format!(
            "sub-configurations have different denominators {} and {}",
            a.denominator(),
            b.denominator()
        )));
    }
    Ok(())
}

/// `(1/n^2) sum_i sum_j g(P_i - Q_j)` for two families sharing the
/// denominator `n`.
pub fn cross_energy(a: &SubConfiguration, b: &SubConfiguration, kernel: &Kernel) -> Result<EnergyValue> {
    check_pair(a, b, kernel)?;
    let n = a.denominator as f64;
    let (s, dmin) = bipartite_sum(&a.coords, &b.coords, a.dim, kernel);
    Ok(EnergyValue {
        value: s.value() / (n * n),
        pair_count: (a.len() * b.len()) as u64,
        min_pair_distance: dmin,
    })
}

/// `(1/n^2) sum_{i != j} g(P_i - P_j)` over the points of `a`.
pub fn partial_energy(a: &SubConfiguration, kernel: &Kernel) -> Result<EnergyValue> {
    check_kernel_dim(a, kernel)?;
    let n = a.denominator as f64;
    let m = a.len() as u64;
    let (s, dmin) = unordered_pair_sum(&a.coords, a.dim, kernel);
    Ok(EnergyValue {
        value: 2.0 * s.value() / (n * n),
        pair_count: m * m.saturating_sub(1),
        min_pair_distance: dmin,
    })
}

/// Gradient of the discrete energy, flat row-major like the coordinates.
pub fn gradient(cfg: &Configuration, kernel: &Kernel) -> Result<Vec<f64>> {
    check_kernel_dim(cfg, kernel)?;
    gradient_coords(&cfg.coords, cfg.dim, kernel)
}

pub(crate) fn gradient_coords(coords: &[f64], dim: usize, kernel: &Kernel) -> Result<Vec<f64>> {
    let n = coords.len() / dim;
    let scale = 2.0 / (n as f64 * n as f64);
    let singular = kernel.singular_at_origin();
    let row = |i: usize| -> Result<Vec<f64>> {
        let xi = &coords[i * dim..(i + 1) * dim];
        let mut g = vec![0.0; dim];
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = &coords[j * dim..(j + 1) * dim];
            let r = dist(xi, xj);
            if r == 0.0 {
                if singular {
                    return Err(Error::GradientUndefined {
                        i: i.min(j),
                        j: i.max(j),
                    });
                }
                continue;
            }
            let s = kernel.radial_derivative(r) / r;
            for k in 0..dim {
                g[k] += s * (xi[k] - xj[k]);
            }
        }
        for v in g.iter_mut() {
            *v *= scale;
        }
        Ok(g)
    };
    let rows: Vec<Vec<f64>> = if n < PAR_THRESHOLD {
        (0..n).map(row).collect::<Result<_>>()?
    } else {
        (0..n).into_par_iter().map(row).collect::<Result<_>>()?
    };
    Ok(rows.concat())
}

/// `(1/n) sum_i g(x_i - x)` over the points (skipping `exclude`), with `n`
/// the points' denominator.
pub fn potential<P: Points>(p: &P, kernel: &Kernel, x: &[f64], exclude: Option<usize>) -> Result<f64> {
    check_kernel_dim(p, kernel)?;
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: x.len(),
        });
    }
    let mut acc = ExactSum::new();
    for i in 0..p.len() {
        if Some(i) == exclude {
            continue;
        }
        acc.add(kernel.radial(dist(p.point(i), x)));
    }
    Ok(acc.value() / p.denominator() as f64)
}

/// Both sides of `E^K(pi_n) <= E^K_n(pi_n) + K/n` for the truncated kernel
/// `g ∧ K`: `lhs` counts the self-pairs at `g_K(0)`, `rhs` adds `K/n`.
pub fn truncated_energy_gap(cfg: &Configuration, kernel: &Kernel, level: f64) -> Result<(f64, f64)> {
    check_kernel_dim(cfg, kernel)?;
    let truncated = kernel.truncate(level)?;
    let n = cfg.n() as f64;
    let e = discrete_energy(cfg, &truncated)?.value;
    let at_origin = truncated.value_at_origin();
    Ok((e + at_origin / n, e + level / n))
}
