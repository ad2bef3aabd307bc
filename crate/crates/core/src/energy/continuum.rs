//! Continuum energy `∫∫ g(x - y) dmu(x) dmu(y)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::{Density, MeasureKind, TargetMeasure};
use crate::quadrature;
use crate::rng::substream;

const CHUNK: usize = 1 << 15;
const BATCHES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub estimate: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
    pub reliable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Monte-Carlo estimate from `samples` independent pairs `(x, y) ~ mu ⊗ mu`.
///
/// Chunk `c` of the pairs draws from substream `c` of `seed`, so the
/// estimate does not depend on the thread count. The estimate is flagged
/// unreliable when a pair hits an infinite kernel value or when the batch
/// means disagree far beyond their standard error (heavy-tailed integrand).
pub fn continuum_energy_mc(
    mu: &TargetMeasure,
    kernel: &Kernel,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if mu.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            found: mu.dim(),
        });
    }
    if samples < 2 * BATCHES {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples, got {samples}",
            2 * BATCHES
        )));
    }
    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<Result<(Vec<f64>, usize)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut vals = Vec::with_capacity(count);
            let mut infinite = 0;
            let mut diff = vec![0.0; mu.dim()];
            for _ in 0..count {
                let x = mu.sample(&mut rng)?;
                let y = mu.sample(&mut rng)?;
                for k in 0..diff.len() {
                    diff[k] = x[k] - y[k];
                }
                let v = kernel.radial(crate::kernel::norm(&diff));
                if !v.is_finite() {
                    infinite += 1;
                }
                vals.push(v);
            }
            Ok((vals, infinite))
        })
        .collect();
    let mut values = Vec::with_capacity(samples);
    let mut infinite = 0;
    for r in per_chunk {
        let (v, inf) = r?;
        values.extend(v);
        infinite += inf;
    }
    if infinite > 0 {
        return Ok(McEstimate {
            estimate: f64::INFINITY,
            std_error: f64::INFINITY,
            samples,
            seed,
            reliable: false,
            diagnostic: Some(format!(
                "{infinite} of {samples} pairs hit an infinite kernel value (atoms under a singular kernel)"
            )),
        });
    }
    let n = values.len() as f64;
    let mean = crate::exact_sum::exact_sum(values.iter().copied()) / n;
    let var = crate::exact_sum::exact_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    let std_error = (var / n).sqrt();
    let batch = values.len() / BATCHES;
    let batch_means: Vec<f64> = (0..BATCHES)
        .map(|b| values[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64)
        .collect();
    let batch_se = std_error * (BATCHES as f64).sqrt();
    let worst = batch_means.iter().map(|m| (m - mean).abs()).fold(0.0, f64::max);
    let reliable = worst <= 6.0 * batch_se + 1e-12 * mean.abs().max(1e-300);
    Ok(McEstimate {
        estimate: mean,
        std_error,
        samples,
        seed,
        reliable,
        diagnostic: (!reliable).then(|| {
            format!(
                "batch means deviate by {worst:.3e}, {:.1} batch standard errors",
                worst / batch_se
            )
        }),
    })
}

/// Deterministic continuum energy of a one-dimensional absolutely
/// continuous measure with bounded support.
///
/// Writes the energy as `2 ∫_0^L g(u) A(u) du` with the autocorrelation
/// `A(u) = ∫ f(y) f(y + u) dy`; the possible singularity of `g` at 0 is
/// handled with dyadic refinement and the kinks of `A` are used as panel
/// edges.
pub fn continuum_energy_1d(mu: &TargetMeasure, kernel: &Kernel) -> Result<f64> {
    if mu.dim() != 1 || kernel.dim() != 1 {
        return Err(Error::InvalidArgument(
            "product quadrature is only available in one dimension".into(),
        ));
    }
    let (lo, hi, breaks): (f64, f64, Vec<f64>) = match mu.kind() {
        MeasureKind::UniformBox { lo, hi } => (lo[0], hi[0], vec![]),
        MeasureKind::UniformBall { center, radius } => (center[0] - radius, center[0] + radius, vec![]),
        MeasureKind::Product(ms) => {
            let (a, b) = ms[0].support();
            (a, b, vec![])
        }
        MeasureKind::Density(d) => {
            let (lo, hi) = d.bounds();
            let breaks = match d {
                Density::Histogram { shape, .. } => {
                    let w = (hi[0] - lo[0]) / shape[0] as f64;
                    (1..shape[0]).map(|i| lo[0] + i as f64 * w).collect()
                }
                Density::Function { breaks, .. } => breaks[0].clone(),
            };
            (lo[0], hi[0], breaks)
        }
        MeasureKind::Cloud { .. } => {
            return Err(Error::InvalidArgument(
                "product quadrature needs a measure with a density".into(),
            ))
        }
    };
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument(
            "product quadrature needs bounded support".into(),
        ));
    }
    let pdf = |x: f64| -> f64 {
        match mu.kind() {
            MeasureKind::UniformBox { .. } | MeasureKind::UniformBall { .. } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            MeasureKind::Product(ms) => ms[0].pdf(x),
            MeasureKind::Density(d) => d.eval(&[x]),
            MeasureKind::Cloud { .. } => 0.0,
        }
    };
    let mut nodes: Vec<f64> = vec![lo, hi];
    nodes.extend(breaks.iter().copied());
    let len = hi - lo;
    // kinks of A sit at differences of density breakpoints
    let mut kinks: Vec<f64> = Vec::new();
    for a in &nodes {
        for b in &nodes {
            let u = b - a;
            if u > 1e-14 * len && u < len {
                kinks.push(u);
            }
        }
    }
    kinks.push(len);
    kinks.sort_by(f64::total_cmp);
    kinks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * len);
    let autocorr = |u: f64| -> f64 {
        let mut edges = vec![lo, hi - u];
        edges.extend(breaks.iter().copied());
        edges.extend(breaks.iter().map(|b| b - u));
        edges.retain(|e| *e >= lo && *e <= hi - u);
        edges.sort_by(f64::total_cmp);
        edges
            .windows(2)
            .map(|w| quadrature::adaptive(w[0], w[1], 1e-14, &mut |y| pdf(y) * pdf(y + u)))
            .sum()
    };
    let first = kinks[0];
    let near =
        quadrature::dyadic_toward_zero(|t| kernel.radial(t * first) * autocorr(t * first), 1e-12, 1100)
            .ok_or_else(|| {
                Error::Integrability("energy integral does not settle near the diagonal".into())
            })?
            * first;
    let mut total = near;
    for w in kinks.windows(2) {
        total += quadrature::adaptive(w[0], w[1], 1e-13, &mut |u| kernel.radial(u) * autocorr(u));
    }
    Ok(2.0 * total)
}
