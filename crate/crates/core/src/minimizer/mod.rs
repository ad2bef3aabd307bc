//! Multi-start gradient descent on the discrete energy.
//!
//! Each restart runs Barzilai-Borwein steps safeguarded by Armijo
//! backtracking, refuses steps that bring two points closer than
//! `1e-9 * diameter`, and periodically tries [`repair_outliers`]. The
//! best restart is translated so its center of mass is the origin.

mod repair;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    diameter_coords, discrete_energy, gradient_coords, unordered_pair_sum, Configuration, Points,
};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::TargetMeasure;
use crate::quantizer::{quantize, QuantizeSettings};
use crate::rng::substream;

pub use repair::{repair_outliers, RepairEvent, RepairSettings};

/// Collision guard: minimal pair distance relative to the diameter.
const COLLISION_FRACTION: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum Init {
    /// Every restart draws i.i.d. `N(0, scale^2)` coordinates.
    RandomGaussian { scale: f64 },
    /// Restart 0 starts from the quantization of the measure.
    QuantizerSeeded {
        measure: TargetMeasure,
        settings: QuantizeSettings,
    },
    /// Restart 0 starts from the given configuration.
    User(Configuration),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepRule {
    /// First trial step, multiplied by `n` since per-point gradients
    /// carry a `1/n` factor.
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeSettings {
    pub restarts: usize,
    pub max_iters: usize,
    /// Threshold on the largest per-point gradient norm.
    pub grad_tol: f64,
    pub init: Init,
    pub step_rule: StepRule,
    pub repair: RepairSettings,
    pub seed: u64,
}

impl Default for MinimizeSettings {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 5000,
            grad_tol: 1e-9,
            init: Init::RandomGaussian { scale: 1.0 },
            step_rule: StepRule::default(),
            repair: RepairSettings::default(),
            seed: 0,
        }
    }
}

impl MinimizeSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        let s = &self.step_rule;
        if !(s.initial_step > 0.0 && s.shrink > 0.0 && s.shrink < 1.0) {
            return bad("step rule needs initial_step > 0 and shrink in (0, 1)");
        }
        if !(s.sufficient_decrease > 0.0 && s.sufficient_decrease < 1.0) {
            return bad("sufficient_decrease must lie in (0, 1)");
        }
        if let Init::RandomGaussian { scale } = self.init {
            if !(scale > 0.0 && scale.is_finite()) {
                return bad("init scale must be positive");
            }
        }
        self.repair.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Largest per-point gradient norm at or below `grad_tol`.
    Converged,
    MaxIters,
    /// No step passed the line search (rounding floor or collision guard).
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult {
    /// Center of mass at the origin.
    pub config: Configuration,
    /// `discrete_energy(config)`.
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Restarts that finished with a finite energy.
    pub restarts_used: usize,
    pub best_restart: usize,
    pub restart_energies: Vec<f64>,
    pub history: Vec<HistoryEntry>,
    pub repair_events: Vec<RepairEvent>,
}

struct Run {
    coords: Vec<f64>,
    energy: f64,
    grad_norm: f64,
    iterations: usize,
    stop: StopReason,
    history: Vec<HistoryEntry>,
    repairs: Vec<RepairEvent>,
}

fn max_point_norm(g: &[f64], dim: usize) -> f64 {
    g.chunks(dim)
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy_of(coords: &[f64], dim: usize, kernel: &Kernel) -> (f64, f64) {
    let n = (coords.len() / dim) as f64;
    let (s, dmin) = unordered_pair_sum(coords, dim, kernel);
    (2.0 * s.value() / (n * n), dmin)
}

fn descend(kernel: &Kernel, start: Vec<f64>, dim: usize, settings: &MinimizeSettings) -> Result<Run> {
    let n = start.len() / dim;
    let rule = &settings.step_rule;
    let mut x = start;
    let (mut e, _) = energy_of(&x, dim, kernel);
    if !e.is_finite() {
        return Err(Error::Optimization(format!("starting energy is {e}")));
    }
    let mut g = gradient_coords(&x, dim, kernel)?;
    let mut gn = max_point_norm(&g, dim);
    let mut history = Vec::new();
    let mut repairs = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut t = rule.initial_step * n as f64;
    let mut stop = StopReason::MaxIters;
    let mut iterations = 0;

    let try_repair = |x: &[f64], iteration: usize| -> Result<Option<(Vec<f64>, RepairEvent)>> {
        if !settings.repair.enabled {
            return Ok(None);
        }
        let cfg = Configuration::new(dim, x.to_vec())?;
        let (out, ev) = repair_outliers(&cfg, kernel, &settings.repair)?;
        Ok(ev.map(|mut ev| {
            ev.iteration = iteration;
            (out.into_coords(), ev)
        }))
    };

    while iterations < settings.max_iters {
        let periodic = settings.repair.every > 0 && iterations > 0 && iterations % settings.repair.every == 0;
        if gn <= settings.grad_tol || periodic {
            if let Some((nx, ev)) = try_repair(&x, iterations)? {
                x = nx;
                e = ev.energy_after;
                g = gradient_coords(&x, dim, kernel)?;
                gn = max_point_norm(&g, dim);
                prev = None;
                t = rule.initial_step * n as f64;
                repairs.push(ev);
                iterations += 1;
                history.push(HistoryEntry {
                    energy: e,
                    grad_norm: gn,
                });
                continue;
            }
            if gn <= settings.grad_tol {
                stop = StopReason::Converged;
                break;
            }
        }
        if let Some((xp, gp)) = &prev {
            let s: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                t = dot(&s, &s) / sy;
            } else {
                t *= 2.0;
            }
        }
        t = t.clamp(1e-300, 1e300);
        let gg = dot(&g, &g);
        let guard = COLLISION_FRACTION * diameter_coords(&x, dim);
        let mut accepted = None;
        for _ in 0..=rule.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            if trial.iter().all(|v| v.is_finite()) {
                let (et, dmin) = energy_of(&trial, dim, kernel);
                if dmin >= guard && et.is_finite() {
                    let decrease = rule.sufficient_decrease * t * gg;
                    if et <= e - decrease {
                        accepted = Some((trial, et, None));
                        break;
                    }
                    // Below the rounding level of E the Armijo test is
                    // noise; accept a step that keeps E within rounding
                    // and shrinks the gradient.
                    let floor = 16.0 * f64::EPSILON * e.abs().max(f64::MIN_POSITIVE);
                    if decrease < floor && et <= e + floor {
                        let gt = gradient_coords(&trial, dim, kernel)?;
                        if max_point_norm(&gt, dim) < gn {
                            accepted = Some((trial, et, Some(gt)));
                            break;
                        }
                    }
                }
            }
            t *= rule.shrink;
        }
        let Some((trial, et, gt)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        let gt = match gt {
            Some(gt) => gt,
            None => gradient_coords(&trial, dim, kernel)?,
        };
        prev = Some((std::mem::replace(&mut x, trial), std::mem::replace(&mut g, gt)));
        e = et;
        gn = max_point_norm(&g, dim);
        iterations += 1;
        history.push(HistoryEntry {
            energy: e,
            grad_norm: gn,
        });
    }
    if stop == StopReason::MaxIters && gn <= settings.grad_tol {
        stop = StopReason::Converged;
    }
    Ok(Run {
        coords: x,
        energy: e,
        grad_norm: gn,
        iterations,
        stop,
        history,
        repairs,
    })
}

fn gaussian(n: usize, dim: usize, scale: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = substream(seed, stream);
    (0..n * dim)
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect::<Vec<f64>>()
}

/// Best of `settings.restarts` descents on `E_n`. Restart `r` draws its
/// random start from substream `r` of the seed; restart 0 uses the
/// quantizer or user start when one is configured. Lowest energy wins,
/// then lower gradient norm, then lower restart index.
pub fn minimize(kernel: &Kernel, n: usize, settings: &MinimizeSettings) -> Result<MinimizeResult> {
    settings.validate()?;
    let dim = kernel.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if n == 1 {
        let config = Configuration::new(dim, vec![0.0; dim])?;
        return Ok(MinimizeResult {
            config,
            energy: 0.0,
            grad_norm: 0.0,
            iterations: 0,
            stop: StopReason::Converged,
            restarts_used: 1,
            best_restart: 0,
            restart_energies: vec![0.0],
            history: Vec::new(),
            repair_events: Vec::new(),
        });
    }
    let seeded: Option<Configuration> = match &settings.init {
        Init::RandomGaussian { .. } => None,
        Init::QuantizerSeeded {
            measure,
            settings: qs,
        } => Some(quantize(measure, n, kernel, qs)?.configuration),
        Init::User(cfg) => Some(cfg.clone()),
    };
    if let Some(cfg) = &seeded {
        if cfg.dim() != dim || cfg.n() != n {
            return Err(Error::InvalidArgument(format!(
                "initial configuration has {} points in dimension {}, expected {n} in {dim}",
                cfg.n(),
                cfg.dim()
            )));
        }
    }
    let scale = match (&settings.init, &seeded) {
        (Init::RandomGaussian { scale }, _) => *scale,
        (_, Some(cfg)) => cfg.radius().max(1e-3),
        _ => 1.0,
    };
    let runs: Vec<Result<Run>> = (0..settings.restarts)
        .into_par_iter()
        .map(|r| {
            let start = match (&seeded, r) {
                (Some(cfg), 0) => cfg.coords().to_vec(),
                _ => gaussian(n, dim, scale, settings.seed, r as u64),
            };
            descend(kernel, start, dim, settings)
        })
        .collect();
    let mut restart_energies = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, Run)> = None;
    let mut failures = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) if run.energy.is_finite() => {
                restart_energies.push(run.energy);
                let better = match &best {
                    None => true,
                    Some((_, b)) => {
                        run.energy < b.energy || (run.energy == b.energy && run.grad_norm < b.grad_norm)
                    }
                };
                if better {
                    best = Some((r, run));
                }
            }
            Ok(run) => {
                restart_energies.push(run.energy);
                failures.push(format!("restart {r}: energy {}", run.energy));
            }
            Err(err) if err.is_numerical() || matches!(err, Error::Optimization(_)) => {
                restart_energies.push(f64::NAN);
                failures.push(format!("restart {r}: {err}"));
            }
            Err(err) => return Err(err),
        }
    }
    let Some((best_restart, run)) = best else {
        return Err(Error::Optimization(format!(
            "all restarts failed: {}",
            failures.join("; ")
        )));
    };
    let config = Configuration::new(dim, run.coords)?.centered();
    let energy = discrete_energy(&config, kernel)?.value;
    let grad_norm = max_point_norm(&gradient_coords(config.coords(), dim, kernel)?, dim);
    Ok(MinimizeResult {
        config,
        energy,
        grad_norm,
        iterations: run.iterations,
        stop: run.stop,
        restarts_used: restart_energies.iter().filter(|e| e.is_finite()).count(),
        best_restart,
        restart_energies,
        history: run.history,
        repair_events: run.repairs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub diameter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub rows: Vec<TraceRow>,
    /// Diameters grow at every step and more than double overall: the
    /// minimizing sequence may be escaping to infinity.
    pub outward_drift: bool,
}

/// `m_n` estimates along `n_list`. With `warm_start`, each `n` after the
/// first starts restart 0 from the quantization of the previous minimizer's
/// empirical measure, jittered by a thousandth of its diameter so split
/// atoms do not coincide.
pub fn energy_trace(
    kernel: &Kernel,
    n_list: &[usize],
    settings: &MinimizeSettings,
    warm_start: bool,
) -> Result<EnergyTrace> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("n_list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_list must be increasing".into()));
    }
    let dim = kernel.dim();
    let mut rows = Vec::with_capacity(n_list.len());
    let mut previous: Option<Configuration> = None;
    for &n in n_list {
        let mut s = settings.clone();
        if let (true, Some(prev)) = (warm_start, &previous) {
            let cloud = TargetMeasure::cloud(dim, prev.coords().to_vec(), None)?;
            let q = quantize(&cloud, n, kernel, &QuantizeSettings::default())?.configuration;
            let jitter = 1e-3 * diameter_coords(prev.coords(), dim).max(1e-12);
            let noise = gaussian(n, dim, jitter, settings.seed, u64::MAX - n as u64);
            let coords = q.coords().iter().zip(&noise).map(|(a, b)| a + b).collect();
            s.init = Init::User(Configuration::new(dim, coords)?);
        }
        let res = minimize(kernel, n, &s)?;
        rows.push(TraceRow {
            n,
            energy: res.energy,
            grad_norm: res.grad_norm,
            diameter: diameter_coords(res.config.coords(), dim),
        });
        previous = Some(res.config);
    }
    let outward_drift = rows.len() >= 3
        && rows.windows(2).all(|w| w[1].diameter > w[0].diameter)
        && rows.last().unwrap().diameter > 2.0 * rows[0].diameter;
    Ok(EnergyTrace { rows, outward_drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::dist;

    fn pl12(dim: usize) -> Kernel {
        Kernel::power_law(dim, 1.0, 2.0).unwrap()
    }

    #[test]
    fn pair_sits_at_unit_distance() {
        let s = MinimizeSettings {
            restarts: 16,
            ..Default::default()
        };
        let r = minimize(&pl12(2), 2, &s).unwrap();
        assert!((r.energy + 0.25).abs() < 1e-9, "{}", r.energy);
        let d = dist(r.config.point(0), r.config.point(1));
        assert!((d - 1.0).abs() < 1e-6, "{d}");
        assert!(r.config.centroid().iter().all(|c| c.abs() < 1e-12));
        assert_eq!(r.stop, StopReason::Converged);
        assert_eq!(r.restart_energies.len(), 16);
    }

    #[test]
    fn single_point_is_origin() {
        let r = minimize(&pl12(3), 1, &MinimizeSettings::default()).unwrap();
        assert_eq!(r.config.coords(), &[0.0, 0.0, 0.0]);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let k = Kernel::morse(2, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = minimize(&k, 2, &MinimizeSettings::default()).unwrap();
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn history_never_rises_beyond_rounding() {
        let s = MinimizeSettings {
            restarts: 2,
            ..Default::default()
        };
        let r = minimize(&pl12(2), 6, &s).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-14 * w[0].energy.abs());
        }
        assert!(r.history.len() <= s.max_iters);
        assert!(r.grad_norm < 1e-8);
    }

    #[test]
    fn quantizer_start_is_an_upper_bound() {
        let mu = TargetMeasure::uniform_box(vec![0.0], vec![1.0]).unwrap();
        let k = pl12(1);
        let q = quantize(&mu, 12, &k, &QuantizeSettings::default()).unwrap();
        let eq = discrete_energy(&q.configuration, &k).unwrap().value;
        let s = MinimizeSettings {
            restarts: 3,
            init: Init::QuantizerSeeded {
                measure: mu,
                settings: QuantizeSettings::default(),
            },
            ..Default::default()
        };
        let r = minimize(&k, 12, &s).unwrap();
        assert!(r.energy <= eq + 1e-12);
    }

    #[test]
    fn reruns_are_identical() {
        let s = MinimizeSettings {
            restarts: 4,
            seed: 11,
            ..Default::default()
        };
        let a = minimize(&pl12(2), 5, &s).unwrap();
        let b = minimize(&pl12(2), 5, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_kernel_keeps_points_apart() {
        let k = Kernel::power_law(2, -1.0, 2.0).unwrap();
        let s = MinimizeSettings {
            restarts: 2,
            max_iters: 500,
            ..Default::default()
        };
        let r = minimize(&k, 7, &s).unwrap();
        assert!(r.energy.is_finite());
        assert!(discrete_energy(&r.config, &k).unwrap().min_pair_distance > 0.0);
    }

    #[test]
    fn trace_is_nonincreasing_in_n() {
        let s = MinimizeSettings {
            restarts: 6,
            ..Default::default()
        };
        let t = energy_trace(&pl12(1), &[2, 4, 8], &s, false).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-6, "{t:?}");
        }
        assert!(energy_trace(&pl12(1), &[4, 2], &s, false).is_err());
        let zero = Kernel::morse(1, 2.0, 2.0, 1.0, 1.0).unwrap();
        let t = energy_trace(&zero, &[2, 3], &s, true).unwrap();
        assert!(t.rows.iter().all(|r| r.energy == 0.0));
    }

    #[test]
    fn rejects_bad_settings() {
        let s = MinimizeSettings {
            restarts: 0,
            ..Default::default()
        };
        assert!(minimize(&pl12(2), 3, &s).is_err());
        let s = MinimizeSettings {
            init: Init::User(Configuration::new(2, vec![0.0; 6]).unwrap()),
            ..Default::default()
        };
        assert!(minimize(&pl12(2), 4, &s).is_err());
    }
}
