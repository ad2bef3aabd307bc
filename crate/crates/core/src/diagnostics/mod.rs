//! Optimality and convergence diagnostics: potential equalization,
//! clustering, bounded-Lipschitz distances, support diameter and energy
//! traces along `n`.

mod bl;
mod cluster;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{continuum_energy_1d, continuum_energy_mc, diameter_coords, discrete_energy, potential};
use crate::energy::{Configuration, McEstimate, Points};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::TargetMeasure;
use crate::minimizer::{minimize, Init, MinimizeSettings};
use crate::quantizer::{quantize, QuantizeSettings};
use crate::rng::substream;

pub use bl::{bl_distance, bl_distance_1d, BlEstimate, BlScheme, MeasureRef};
pub use cluster::{cluster_classify, Classification, Cluster, ClusterReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeScheme {
    /// Probe spheres around the center of mass, radii in units of the
    /// configuration radius.
    pub radius_factors: Vec<f64>,
    pub per_sphere: usize,
    pub seed: u64,
}

impl Default for ProbeScheme {
    fn default() -> Self {
        Self {
            radius_factors: vec![1.25, 1.5, 2.0, 3.0],
            per_sphere: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElReport {
    /// Per-particle potentials with the particle itself left out.
    pub potentials: Vec<f64>,
    /// Their mean, which equals the discrete energy.
    pub mean_potential: f64,
    pub potential_spread: f64,
    /// `min (psi(probe) - mean_potential)` over the probes.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub exterior_min_gap: f64,
    pub probe_scheme: String,
}

/// Self-excluded potentials `psi_i = (1/n) sum_{j != i} g(x_j - x_i)` and
/// the potential at probe points outside the configuration.
pub fn el_residual(cfg: &Configuration, kernel: &Kernel, probes: &ProbeScheme) -> Result<ElReport> {
    let n = cfg.n();
    let dim = cfg.dim();
    let potentials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| potential(cfg, kernel, cfg.point(i), Some(i)))
        .collect::<Result<_>>()?;
    let mean_potential = crate::exact_sum::exact_sum(potentials.iter().copied()) / n as f64;
    let (lo, hi) = potentials
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let center = cfg.centroid();
    let radius = cfg.radius().max(f64::MIN_POSITIVE);
    let gaps: Vec<f64> = probes
        .radius_factors
        .par_iter()
        .enumerate()
        .map(|(s, factor)| -> Result<f64> {
            let mut rng = substream(probes.seed, s as u64);
            let mut worst = f64::INFINITY;
            for _ in 0..probes.per_sphere {
                let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (v, c) in dir.iter_mut().zip(&center) {
                    *v = c + factor * radius * *v / norm;
                }
                worst = worst.min(potential(cfg, kernel, &dir, None)? - mean_potential);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(ElReport {
        mean_potential,
        potential_spread: hi - lo,
        exterior_min_gap: gaps.into_iter().fold(f64::INFINITY, f64::min),
        probe_scheme: format!(
            "{} random directions on spheres of radius {:?} x {radius:.6e} around the center of mass, seed {}",
            probes.per_sphere, probes.radius_factors, probes.seed
        ),
        potentials,
    })
}

/// Largest pair distance.
pub fn support_diameter(cfg: &Configuration) -> f64 {
    diameter_coords(cfg.coords(), cfg.dim())
}

#[derive(Clone, Debug)]
pub struct GammaSettings {
    pub quantize: QuantizeSettings,
    pub minimize: MinimizeSettings,
    pub bl: BlScheme,
    /// Pair count for the Monte-Carlo continuum energy.
    pub target_samples: usize,
    pub target_seed: u64,
}

impl Default for GammaSettings {
    fn default() -> Self {
        Self {
            quantize: QuantizeSettings::default(),
            minimize: MinimizeSettings::default(),
            bl: BlScheme::default(),
            target_samples: 1_000_000,
            target_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaRow {
    pub n: usize,
    pub energy_quantized: f64,
    pub energy_minimized: Option<f64>,
    pub bl_distance: f64,
    /// Diameter of the quantized configuration.
    pub diameter: f64,
    pub diameter_minimized: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaTrace {
    pub rows: Vec<GammaRow>,
    pub target_energy: McEstimate,
    /// Deterministic continuum energy, when the measure is one-dimensional
    /// with a bounded density.
    pub target_quadrature: Option<f64>,
    /// Last minimized energy.
    pub ell_p_estimate: Option<f64>,
}

/// Quantized (and optionally minimized) energies along `n_list`, with the
/// bounded-Lipschitz distance of each quantization to `mu` and the target
/// continuum energy. Minimization starts restart 0 from the quantized
/// configuration, so each minimized energy is at most the quantized one.
pub fn gamma_trace(
    kernel: &Kernel,
    mu: &TargetMeasure,
    n_list: &[usize],
    with_minimization: bool,
    settings: &GammaSettings,
) -> Result<GammaTrace> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("n_list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_list must be increasing".into()));
    }
    if kernel.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            found: mu.dim(),
        });
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let q = quantize(mu, n, kernel, &settings.quantize)?;
        let cfg = q.configuration;
        let energy_quantized = discrete_energy(&cfg, kernel)?.value;
        let bl_distance = bl_distance(MeasureRef::Config(&cfg), MeasureRef::Measure(mu), &settings.bl)?.value;
        let (energy_minimized, diameter_minimized) = if with_minimization {
            let s = MinimizeSettings {
                init: Init::QuantizerSeeded {
                    measure: mu.clone(),
                    settings: settings.quantize.clone(),
                },
                ..settings.minimize.clone()
            };
            let r = minimize(kernel, n, &s)?;
            (Some(r.energy), Some(support_diameter(&r.config)))
        } else {
            (None, None)
        };
        rows.push(GammaRow {
            n,
            energy_quantized,
            energy_minimized,
            bl_distance,
            diameter: support_diameter(&cfg),
            diameter_minimized,
        });
    }
    let target_energy = continuum_energy_mc(mu, kernel, settings.target_samples, settings.target_seed)?;
    let target_quadrature = if mu.dim() == 1 && !mu.is_atomic() {
        continuum_energy_1d(mu, kernel).ok()
    } else {
        None
    };
    let ell_p_estimate = rows.last().and_then(|r| r.energy_minimized);
    Ok(GammaTrace {
        rows,
        target_energy,
        target_quadrature,
        ell_p_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl12(dim: usize) -> Kernel {
        Kernel::power_law(dim, 1.0, 2.0).unwrap()
    }

    #[test]
    fn optimal_pair_potentials() {
        let cfg = Configuration::new(2, vec![-0.5, 0.0, 0.5, 0.0]).unwrap();
        let r = el_residual(&cfg, &pl12(2), &ProbeScheme::default()).unwrap();
        assert_eq!(r.potentials, vec![-0.25, -0.25]);
        assert_eq!(r.potential_spread, 0.0);
        assert_eq!(r.mean_potential, discrete_energy(&cfg, &pl12(2)).unwrap().value);
        assert!(r.exterior_min_gap.is_finite());
    }

    #[test]
    fn symmetric_polygon_has_no_spread() {
        // square with vertices on the axes: every pair distance is exact
        let cfg = Configuration::new(2, vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]).unwrap();
        let r = el_residual(&cfg, &pl12(2), &ProbeScheme::default()).unwrap();
        assert!(r.potential_spread <= 1e-12);
    }

    #[test]
    fn random_configuration_has_spread() {
        let cfg = Configuration::new(2, vec![0.0, 0.0, 0.3, 1.1, -0.7, 0.2, 2.0, -0.4]).unwrap();
        let r = el_residual(&cfg, &pl12(2), &ProbeScheme::default()).unwrap();
        assert!(r.potential_spread > 1e-3);
    }

    #[test]
    fn diameters() {
        assert_eq!(
            support_diameter(&Configuration::new(2, vec![3.0, 4.0]).unwrap()),
            0.0
        );
        assert_eq!(
            support_diameter(&Configuration::new(1, vec![0.0, 1.0]).unwrap()),
            1.0
        );
        let s = 2.5;
        let tri = Configuration::new(2, vec![0.0, 0.0, s, 0.0, s / 2.0, s * 3f64.sqrt() / 2.0]).unwrap();
        assert!((support_diameter(&tri) - s).abs() < 1e-15);
    }

    #[test]
    fn dirac_trace_is_flat_zero() {
        let mu = TargetMeasure::atom(vec![0.0, 0.0]).unwrap();
        let s = GammaSettings {
            target_samples: 1000,
            ..Default::default()
        };
        let t = gamma_trace(&pl12(2), &mu, &[1, 4, 9], false, &s).unwrap();
        assert!(t
            .rows
            .iter()
            .all(|r| r.energy_quantized == 0.0 && r.bl_distance == 0.0));
        assert_eq!(t.target_energy.estimate, 0.0);
    }

    #[test]
    fn minimized_rows_stay_below_quantized() {
        let mu = TargetMeasure::uniform_box(vec![0.0], vec![1.0]).unwrap();
        let s = GammaSettings {
            minimize: MinimizeSettings {
                restarts: 2,
                max_iters: 400,
                ..Default::default()
            },
            target_samples: 20_000,
            ..Default::default()
        };
        let t = gamma_trace(&pl12(1), &mu, &[4, 8, 16], true, &s).unwrap();
        for r in &t.rows {
            assert!(r.energy_minimized.unwrap() <= r.energy_quantized + 1e-12, "{r:?}");
        }
        assert!((t.target_quadrature.unwrap() + 0.25).abs() < 1e-12);
        assert!(gamma_trace(&pl12(1), &mu, &[], false, &s).is_err());
    }
}
