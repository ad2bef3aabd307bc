//! Equal-mass rectangle quantization of a probability measure.
//!
//! The measure is cut into `l` strips of equal mass along axis 0, each strip
//! into `l` pieces along axis 1, and so on, giving `l^N` closed rectangles
//! of mass `1/l^N` with `l = ceil(n^(1/N))`. One representative is chosen
//! per cell and the first `n` cells (lexicographic in the split indices)
//! form the output configuration.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{unordered_pair_sum, Configuration};
use crate::error::{Error, Result};
use crate::exact_sum::{exact_sum, ExactSum};
use crate::kernel::Kernel;
use crate::measure::{pick_weighted, Rect, TargetMeasure};
use crate::rng::substream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Mean of each cell's restricted measure.
    ConditionalMean,
    /// Best of `k` independent draws of the whole tuple, then greedy passes.
    BestOfK,
    /// Best-of-k with the conditional-mean tuple as an extra candidate.
    Hybrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeSettings {
    pub strategy: Strategy,
    /// Candidate tuples drawn from the product of the cell measures. They
    /// also feed the Monte-Carlo estimate of the averaged cross energy;
    /// 0 skips that estimate (conditional-mean only).
    pub candidates: usize,
    /// Coordinate-wise redraw passes after the best candidate is chosen.
    pub greedy_passes: usize,
    pub seed: u64,
}

impl Default for QuantizeSettings {
    fn default() -> Self {
        Self {
            strategy: Strategy::ConditionalMean,
            candidates: 64,
            greedy_passes: 1,
            seed: 0,
        }
    }
}

/// What a cell holds of the measure.
#[derive(Clone, Debug, PartialEq)]
pub enum CellContent {
    /// The measure restricted to the cell rectangle (measures without atoms).
    Region,
    /// Atoms of a cloud with the share of their weight assigned to the cell.
    Atoms { indices: Vec<usize>, weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub rect: Rect,
    pub mass: f64,
    /// Strip index along each axis.
    pub index: Vec<usize>,
    pub content: CellContent,
    pub representative: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct MassPartition<'a> {
    pub mu: &'a TargetMeasure,
    pub l: usize,
    pub n: usize,
    /// `l^N` cells in lexicographic order of `index`.
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantizeReport {
    pub l: usize,
    pub cells: usize,
    pub dropped: usize,
    pub strategy: Strategy,
    /// `(1/L^2) sum_{i != j} g(x_i - x_j)` over all `L = l^N` representatives.
    #[serde(rename = "achieved_G", serialize_with = "crate::io::ser_f64")]
    pub achieved_g: f64,
    /// Sample mean of the same sum over independent tuples drawn from the
    /// product of the cell measures, i.e. an estimate of
    /// `sum_{i != j} E(mu_i, mu_j)`.
    #[serde(serialize_with = "crate::io::ser_opt_f64")]
    pub bound_estimate: Option<f64>,
    #[serde(serialize_with = "crate::io::ser_opt_f64")]
    pub bound_stderr: Option<f64>,
    pub bound_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Quantized {
    pub configuration: Configuration,
    pub report: QuantizeReport,
}

/// Smallest `l` with `l^dim >= n`.
pub fn per_axis_count(n: usize, dim: usize) -> usize {
    let fits = |l: usize| -> bool {
        let mut p: u128 = 1;
        for _ in 0..dim {
            p = p.saturating_mul(l as u128);
        }
        p >= n as u128
    };
    let mut l = (n as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
    while l > 1 && fits(l - 1) {
        l -= 1;
    }
    while !fits(l) {
        l += 1;
    }
    l
}

/// Thresholds `a_1 = -inf <= a_2 <= ... <= a_{l+1} = +inf` cutting the
/// restriction of `mu` to `cell` into `l` strips of equal mass along `axis`;
/// `a_h` is the least `t` whose cumulative mass reaches `(h-1)/l`.
pub fn strip_thresholds(mu: &TargetMeasure, axis: usize, l: usize, cell: &Rect) -> Result<Vec<f64>> {
    if l == 0 {
        return Err(Error::InvalidArgument("strip count must be positive".into()));
    }
    let mass = mu.mass(cell)?;
    if mass <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "cell {:?}..{:?} carries no mass",
            cell.lo, cell.hi
        )));
    }
    let mut out = Vec::with_capacity(l + 1);
    out.push(f64::NEG_INFINITY);
    for h in 1..l {
        let t = mu.axis_quantile(cell, axis, h as f64 * mass / l as f64)?;
        // bisection noise must not reorder the thresholds
        let prev = *out.last().unwrap();
        out.push(if t < prev { prev } else { t });
    }
    out.push(f64::INFINITY);
    Ok(out)
}

fn strip(rect: &Rect, axis: usize, a: f64, b: f64) -> Rect {
    let mut r = rect.clone();
    r.lo[axis] = r.lo[axis].max(a);
    r.hi[axis] = r.hi[axis].min(b);
    r
}

/// Splits weighted atoms into `l` strips of equal mass along `axis`,
/// cutting an atom's weight where a strip boundary falls on it.
fn split_atoms(
    points: &[f64],
    dim: usize,
    indices: &[usize],
    weights: &[f64],
    axis: usize,
    l: usize,
) -> (Vec<f64>, Vec<(Vec<usize>, Vec<f64>)>) {
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by(|&a, &b| {
        let (ia, ib) = (indices[a], indices[b]);
        points[ia * dim + axis]
            .total_cmp(&points[ib * dim + axis])
            .then(ia.cmp(&ib))
    });
    let total = exact_sum(weights.iter().copied());
    let share = total / l as f64;
    let snap = 1e-14 * total;
    let mut thresholds = vec![f64::NEG_INFINITY];
    let mut strips: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); l];
    let mut h = 0;
    let mut filled = 0.0;
    for &k in &order {
        let x = points[indices[k] * dim + axis];
        let mut rest = weights[k];
        while rest > 0.0 {
            let room = share - filled;
            if h == l - 1 || rest <= room + snap {
                strips[h].0.push(indices[k]);
                strips[h].1.push(rest);
                filled += rest;
                rest = 0.0;
                if h < l - 1 && filled >= share - snap {
                    thresholds.push(x);
                    h += 1;
                    filled = 0.0;
                }
            } else {
                strips[h].0.push(indices[k]);
                strips[h].1.push(room);
                rest -= room;
                thresholds.push(x);
                h += 1;
                filled = 0.0;
            }
        }
    }
    // every strip but the last is closed off by an atom, so this only pads
    // when rounding leaves the last boundaries unset
    while thresholds.len() < l {
        let last = *thresholds.last().unwrap();
        thresholds.push(last);
    }
    thresholds.push(f64::INFINITY);
    (thresholds, strips)
}

/// Equal-mass partition of `mu` into `l^N` closed rectangles.
pub fn partition(mu: &TargetMeasure, n: usize) -> Result<MassPartition<'_>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let dim = mu.dim();
    let l = per_axis_count(n, dim);
    let mut cells = Vec::new();
    let root = match mu.atoms() {
        Some((_, w)) => CellContent::Atoms {
            indices: (0..w.len()).collect(),
            weights: w.to_vec(),
        },
        None => CellContent::Region,
    };
    split_cell(mu, Rect::full(dim), root, Vec::new(), l, &mut cells)?;
    Ok(MassPartition { mu, l, n, cells })
}

fn split_cell(
    mu: &TargetMeasure,
    rect: Rect,
    content: CellContent,
    index: Vec<usize>,
    l: usize,
    out: &mut Vec<Cell>,
) -> Result<()> {
    let axis = index.len();
    if axis == mu.dim() {
        let mass = match &content {
            CellContent::Region => mu.mass(&rect)?,
            CellContent::Atoms { weights, .. } => exact_sum(weights.iter().copied()),
        };
        out.push(Cell {
            rect,
            mass,
            index,
            content,
            representative: None,
        });
        return Ok(());
    }
    match content {
        CellContent::Region => {
            let thresholds = strip_thresholds(mu, axis, l, &rect).map_err(|e| match e {
                Error::InvalidArgument(_) => Error::QuantileNonConvergence {
                    cell: format!("{:?}..{:?} at axis {axis}", rect.lo, rect.hi),
                },
                other => other,
            })?;
            for h in 0..l {
                let mut idx = index.clone();
                idx.push(h);
                let child = strip(&rect, axis, thresholds[h], thresholds[h + 1]);
                split_cell(mu, child, CellContent::Region, idx, l, out)?;
            }
        }
        CellContent::Atoms { indices, weights } => {
            let (points, _) = mu.atoms().expect("atom content implies a cloud");
            let (thresholds, strips) = split_atoms(points, mu.dim(), &indices, &weights, axis, l);
            for (h, (ids, ws)) in strips.into_iter().enumerate() {
                let mut idx = index.clone();
                idx.push(h);
                let child = strip(&rect, axis, thresholds[h], thresholds[h + 1]);
                split_cell(
                    mu,
                    child,
                    CellContent::Atoms {
                        indices: ids,
                        weights: ws,
                    },
                    idx,
                    l,
                    out,
                )?;
            }
        }
    }
    Ok(())
}

impl Cell {
    fn conditional_mean(&self, mu: &TargetMeasure) -> Result<Vec<f64>> {
        let mut x = match &self.content {
            CellContent::Region => mu.conditional_mean(&self.rect)?,
            CellContent::Atoms { indices, weights } => {
                let (points, _) = mu.atoms().expect("atom content implies a cloud");
                let d = mu.dim();
                let total = exact_sum(weights.iter().copied());
                (0..d)
                    .map(|k| {
                        exact_sum(indices.iter().zip(weights).map(|(&i, w)| w * points[i * d + k])) / total
                    })
                    .collect()
            }
        };
        self.rect.clamp(&mut x);
        Ok(x)
    }

    fn sample(&self, mu: &TargetMeasure, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let mut x = match &self.content {
            CellContent::Region => mu.sample_in(&self.rect, rng)?,
            CellContent::Atoms { indices, weights } => {
                let (points, _) = mu.atoms().expect("atom content implies a cloud");
                let d = mu.dim();
                let i = indices[pick_weighted(weights, rng)];
                points[i * d..(i + 1) * d].to_vec()
            }
        };
        self.rect.clamp(&mut x);
        Ok(x)
    }
}

/// `(1/L^2) sum_{i != j} g(z_i - z_j)` for a flattened tuple of `L` points.
fn normalized_pair_sum(coords: &[f64], dim: usize, kernel: &Kernel) -> f64 {
    let cells = (coords.len() / dim) as f64;
    2.0 * unordered_pair_sum(coords, dim, kernel).0.value() / (cells * cells)
}

fn draw_tuple(part: &MassPartition<'_>, rngs: &mut [ChaCha8Rng]) -> Result<Vec<f64>> {
    let rows: Vec<Result<Vec<f64>>> = part
        .cells
        .par_iter()
        .zip(rngs.par_iter_mut())
        .map(|(c, rng)| c.sample(part.mu, rng))
        .collect();
    let mut out = Vec::with_capacity(part.cells.len() * part.mu.dim());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Fills every cell's representative and returns the report (with
/// `dropped` computed from `part.n`).
///
/// Cell `i` draws from substream `i` of `settings.seed`: first its share
/// of the candidate tuples, then the greedy redraws.
pub fn select_representatives(
    part: &mut MassPartition<'_>,
    kernel: &Kernel,
    settings: &QuantizeSettings,
) -> Result<QuantizeReport> {
    let dim = part.mu.dim();
    if kernel.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            found: dim,
        });
    }
    let k = settings.candidates;
    if k == 0 && settings.strategy != Strategy::ConditionalMean {
        return Err(Error::InvalidArgument(format!(
            "{:?} needs at least one candidate tuple",
            settings.strategy
        )));
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..part.cells.len())
        .map(|i| substream(settings.seed, i as u64))
        .collect();

    // Independent tuples from the product of the cell measures; a tuple
    // with an infinite pair term is redrawn, at most k times in total.
    let mut samples: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
    let mut failures = 0;
    while samples.len() < k {
        let z = draw_tuple(part, &mut rngs)?;
        let g = normalized_pair_sum(&z, dim, kernel);
        if g.is_finite() {
            samples.push((g, z));
        } else {
            failures += 1;
            if failures >= k.max(1) {
                if settings.strategy == Strategy::ConditionalMean {
                    break;
                }
                return Err(Error::Selection(format!(
                    "{failures} candidate tuples had an infinite pair sum (coincident draws under a singular kernel)"
                )));
            }
        }
    }
    let (bound_estimate, bound_stderr) = if samples.len() >= 2 && failures == 0 {
        let m = samples.len() as f64;
        let mean = exact_sum(samples.iter().map(|s| s.0)) / m;
        let var = exact_sum(samples.iter().map(|s| (s.0 - mean) * (s.0 - mean))) / (m - 1.0);
        (Some(mean), Some((var / m).sqrt()))
    } else if failures > 0 {
        (Some(f64::INFINITY), Some(f64::INFINITY))
    } else {
        (samples.first().map(|s| s.0), None)
    };

    let mean_tuple = || -> Result<Vec<f64>> {
        let rows: Vec<Result<Vec<f64>>> = part
            .cells
            .par_iter()
            .map(|c| c.conditional_mean(part.mu))
            .collect();
        rows.into_iter().collect::<Result<Vec<_>>>().map(|v| v.concat())
    };
    let chosen = match settings.strategy {
        Strategy::ConditionalMean => mean_tuple()?,
        Strategy::BestOfK | Strategy::Hybrid => {
            // first minimum wins ties
            let mut best = samples
                .iter()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|s| (s.0, s.1.clone()))
                .expect("at least one finite candidate");
            if settings.strategy == Strategy::Hybrid {
                let z = mean_tuple()?;
                let g = normalized_pair_sum(&z, dim, kernel);
                if g <= best.0 {
                    best = (g, z);
                }
            }
            let mut z = best.1;
            for _ in 0..settings.greedy_passes {
                greedy_pass(part, kernel, &mut z, &mut rngs)?;
            }
            z
        }
    };
    let achieved_g = normalized_pair_sum(&chosen, dim, kernel);
    for (c, x) in part.cells.iter_mut().zip(chosen.chunks(dim)) {
        c.representative = Some(x.to_vec());
    }
    Ok(QuantizeReport {
        l: part.l,
        cells: part.cells.len(),
        dropped: part.cells.len() - part.n,
        strategy: settings.strategy,
        achieved_g,
        bound_estimate,
        bound_stderr,
        bound_samples: samples.len(),
        seed: settings.seed,
    })
}

/// Redraws each cell's point once, keeping the draw when it lowers the
/// pair sum.
fn greedy_pass(
    part: &MassPartition<'_>,
    kernel: &Kernel,
    z: &mut [f64],
    rngs: &mut [ChaCha8Rng],
) -> Result<()> {
    let dim = part.mu.dim();
    let cells = part.cells.len();
    for i in 0..cells {
        let cand = part.cells[i].sample(part.mu, &mut rngs[i])?;
        let row_sum = |x: &[f64]| -> f64 {
            let mut acc = ExactSum::new();
            for j in (0..cells).filter(|&j| j != i) {
                acc.add(kernel.radial(crate::energy::dist(x, &z[j * dim..(j + 1) * dim])));
            }
            acc.value()
        };
        let old = row_sum(&z[i * dim..(i + 1) * dim]);
        let new = row_sum(&cand);
        if new.is_finite() && new < old {
            z[i * dim..(i + 1) * dim].copy_from_slice(&cand);
        }
    }
    Ok(())
}

/// Partition, representative selection, and the first `n` representatives
/// in cell order.
pub fn quantize(
    mu: &TargetMeasure,
    n: usize,
    kernel: &Kernel,
    settings: &QuantizeSettings,
) -> Result<Quantized> {
    let mut part = partition(mu, n)?;
    let report = select_representatives(&mut part, kernel, settings)?;
    let coords: Vec<f64> = part
        .cells
        .iter()
        .take(n)
        .flat_map(|c| c.representative.clone().expect("selected"))
        .collect();
    Ok(Quantized {
        configuration: Configuration::new(mu.dim(), coords)?,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::Strategy;
    use super::*;
    use crate::energy::{discrete_energy, Points};
    use crate::measure::Marginal;
    use proptest::prelude::*;

    fn pl12(dim: usize) -> Kernel {
        Kernel::power_law(dim, 1.0, 2.0).unwrap()
    }

    fn unit_box(dim: usize) -> TargetMeasure {
        TargetMeasure::uniform_box(vec![0.0; dim], vec![1.0; dim]).unwrap()
    }

    #[test]
    fn per_axis_counts() {
        assert_eq!(per_axis_count(1, 3), 1);
        assert_eq!(per_axis_count(4, 2), 2);
        assert_eq!(per_axis_count(5, 2), 3);
        assert_eq!(per_axis_count(1000, 3), 10);
        assert_eq!(per_axis_count(1001, 3), 11);
        assert_eq!(per_axis_count(1024, 2), 32);
        assert_eq!(per_axis_count(7, 1), 7);
    }

    #[test]
    fn uniform_quartiles() {
        let t = strip_thresholds(&unit_box(1), 0, 4, &Rect::full(1)).unwrap();
        assert_eq!(t, vec![f64::NEG_INFINITY, 0.25, 0.5, 0.75, f64::INFINITY]);
    }

    #[test]
    fn atom_thresholds_sit_on_the_atom() {
        let mu = TargetMeasure::atom(vec![0.0]).unwrap();
        let t = strip_thresholds(&mu, 0, 5, &Rect::full(1)).unwrap();
        assert!(t[1..5].iter().all(|v| *v == 0.0));
        let part = partition(&mu, 5).unwrap();
        assert_eq!(part.cells.len(), 5);
        for c in &part.cells {
            assert!((c.mass - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn step_cdf_median() {
        let mu = TargetMeasure::cloud(1, (1..=8).map(f64::from).collect(), None).unwrap();
        let t = strip_thresholds(&mu, 0, 2, &Rect::full(1)).unwrap();
        assert_eq!(t[1], 4.0);
    }

    #[test]
    fn uniform_square_four_cells() {
        let mu = unit_box(2);
        let part = partition(&mu, 4).unwrap();
        assert_eq!(part.l, 2);
        let rects: Vec<(Vec<f64>, Vec<f64>)> = part
            .cells
            .iter()
            .map(|c| {
                let mut r = c.rect.clone();
                r.lo.iter_mut().for_each(|v| *v = v.max(0.0));
                r.hi.iter_mut().for_each(|v| *v = v.min(1.0));
                (r.lo, r.hi)
            })
            .collect();
        assert_eq!(rects[0], (vec![0.0, 0.0], vec![0.5, 0.5]));
        assert_eq!(rects[1], (vec![0.0, 0.5], vec![0.5, 1.0]));
        assert_eq!(rects[2], (vec![0.5, 0.0], vec![1.0, 0.5]));
        assert_eq!(rects[3], (vec![0.5, 0.5], vec![1.0, 1.0]));
        for c in &part.cells {
            assert!((c.mass - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_cell_is_everything() {
        let mu = unit_box(3);
        let part = partition(&mu, 1).unwrap();
        assert_eq!(part.cells.len(), 1);
        assert_eq!(part.cells[0].rect, Rect::full(3));
        assert_eq!(part.cells[0].mass, 1.0);
        let q = quantize(&unit_box(3), 1, &pl12(3), &QuantizeSettings::default()).unwrap();
        assert_eq!(q.report.achieved_g, 0.0);
        assert_eq!(q.configuration.coords(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn cloud_cells_have_exact_mass() {
        // 97 points: every cell boundary cuts through an atom
        let pts: Vec<f64> = (0..97 * 2).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let mu = TargetMeasure::cloud(2, pts, None).unwrap();
        let part = partition(&mu, 9).unwrap();
        assert_eq!(part.cells.len(), 9);
        let total = exact_sum(part.cells.iter().map(|c| c.mass));
        assert!((total - 1.0).abs() < 1e-12);
        for c in &part.cells {
            assert!((c.mass - 1.0 / 9.0).abs() < 1e-12, "{}", c.mass);
            let (points, _) = mu.atoms().unwrap();
            if let CellContent::Atoms { indices, .. } = &c.content {
                for &i in indices {
                    assert!(c.rect.contains(&points[i * 2..i * 2 + 2]));
                }
            }
        }
    }

    #[test]
    fn quarter_means() {
        let q = quantize(&unit_box(1), 4, &pl12(1), &QuantizeSettings::default()).unwrap();
        assert_eq!(q.configuration.coords(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(q.report.dropped, 0);
    }

    #[test]
    fn dropped_cells_come_last() {
        let q = quantize(&unit_box(2), 5, &pl12(2), &QuantizeSettings::default()).unwrap();
        assert_eq!(q.report.l, 3);
        assert_eq!(q.report.dropped, 4);
        assert_eq!(q.configuration.n(), 5);
        // first strip (x < 1/3) fully kept, then the bottom two of the second
        let xs: Vec<f64> = q.configuration.points().map(|p| p[0]).collect();
        assert!(xs[..3].iter().all(|x| *x < 1.0 / 3.0));
        assert!(xs[3..].iter().all(|x| *x > 1.0 / 3.0 && *x < 2.0 / 3.0));
    }

    #[test]
    fn dirac_gives_repeated_point() {
        let mu = TargetMeasure::atom(vec![1.5, -2.0]).unwrap();
        for strategy in [Strategy::ConditionalMean, Strategy::BestOfK, Strategy::Hybrid] {
            let s = QuantizeSettings {
                strategy,
                candidates: 4,
                ..Default::default()
            };
            let q = quantize(&mu, 7, &pl12(2), &s).unwrap();
            assert_eq!(q.configuration.n(), 7);
            assert!(q.configuration.points().all(|p| p == [1.5, -2.0]));
        }
    }

    #[test]
    fn singular_kernel_on_atom_cannot_select() {
        let mu = TargetMeasure::atom(vec![0.0]).unwrap();
        let k = Kernel::power_law(1, -0.5, 1.0).unwrap();
        let s = QuantizeSettings {
            strategy: Strategy::BestOfK,
            candidates: 3,
            ..Default::default()
        };
        assert!(matches!(quantize(&mu, 4, &k, &s), Err(Error::Selection(_))));
    }

    #[test]
    fn best_of_k_beats_sample_mean() {
        let s = QuantizeSettings {
            strategy: Strategy::BestOfK,
            candidates: 64,
            greedy_passes: 1,
            seed: 3,
        };
        let q = quantize(&unit_box(2), 16, &pl12(2), &s).unwrap();
        let r = &q.report;
        assert!(r.achieved_g <= r.bound_estimate.unwrap(), "{r:?}");
        assert_eq!(r.bound_samples, 64);
        let again = quantize(&unit_box(2), 16, &pl12(2), &s).unwrap();
        assert_eq!(q.configuration, again.configuration);
    }

    #[test]
    fn hybrid_no_worse_than_conditional_mean() {
        let k = pl12(2);
        let cm = quantize(&unit_box(2), 25, &k, &QuantizeSettings::default()).unwrap();
        let hy = quantize(
            &unit_box(2),
            25,
            &k,
            &QuantizeSettings {
                strategy: Strategy::Hybrid,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(hy.report.achieved_g <= cm.report.achieved_g);
    }

    #[test]
    fn thousand_point_interval_energy() {
        let q = quantize(&unit_box(1), 1000, &pl12(1), &QuantizeSettings::default()).unwrap();
        let e = discrete_energy(&q.configuration, &pl12(1)).unwrap().value;
        assert!((e + 0.25).abs() < 0.01, "{e}");
    }

    #[test]
    fn heavy_tails_use_medians() {
        let mu = TargetMeasure::product(vec![
            Marginal::Cauchy { loc: 0.0, scale: 1.0 },
            Marginal::Normal { mean: 0.0, sd: 1.0 },
        ])
        .unwrap();
        let q = quantize(&mu, 9, &pl12(2), &QuantizeSettings::default()).unwrap();
        let part = partition(&mu, 9).unwrap();
        for (c, p) in part.cells.iter().zip(q.configuration.points()) {
            assert!(p.iter().all(|v| v.is_finite()));
            assert!(c.rect.contains(p));
            assert!((c.mass - 1.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ball_cells_meet_mass_tolerance() {
        let mu = TargetMeasure::uniform_ball(vec![0.0, 0.0], 1.0).unwrap();
        let part = partition(&mu, 16).unwrap();
        for c in &part.cells {
            assert!((c.mass - 1.0 / 16.0).abs() < 1e-9, "{}", c.mass);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn representatives_lie_in_their_cells(
            n in 1usize..40,
            dim in 1usize..3,
            seed in 0u64..1000,
            which in 0usize..3,
        ) {
            let mu = match which {
                0 => unit_box(dim),
                1 => TargetMeasure::uniform_ball(vec![0.0; dim], 2.0).unwrap(),
                _ => {
                    let pts: Vec<f64> = (0..30 * dim).map(|i| ((i * 37 + seed as usize) % 11) as f64).collect();
                    TargetMeasure::cloud(dim, pts, None).unwrap()
                }
            };
            let s = QuantizeSettings { strategy: Strategy::Hybrid, candidates: 4, greedy_passes: 1, seed };
            let mut part = partition(&mu, n).unwrap();
            select_representatives(&mut part, &pl12(dim), &s).unwrap();
            let l = part.l;
            let cells = l.pow(dim as u32);
            prop_assert_eq!(part.cells.len(), cells);
            let total = exact_sum(part.cells.iter().map(|c| c.mass));
            prop_assert!((total - 1.0).abs() < 1e-12);
            for c in &part.cells {
                prop_assert!((c.mass - 1.0 / cells as f64).abs() < 1e-9);
                prop_assert!(c.rect.contains(c.representative.as_ref().unwrap()));
            }
        }

        #[test]
        fn thresholds_are_monotone(l in 1usize..12, seed in 0u64..100) {
            let pts: Vec<f64> = (0..25).map(|i| ((i * 13 + seed as usize) % 7) as f64).collect();
            let mu = TargetMeasure::cloud(1, pts, None).unwrap();
            let t = strip_thresholds(&mu, 0, l, &Rect::full(1)).unwrap();
            prop_assert_eq!(t.len(), l + 1);
            prop_assert!(t.windows(2).all(|w| w[0] <= w[1]));
            let ball = TargetMeasure::uniform_ball(vec![0.0, 0.0], 1.0).unwrap();
            let t = strip_thresholds(&ball, 1, l, &Rect::full(2)).unwrap();
            prop_assert!(t.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
