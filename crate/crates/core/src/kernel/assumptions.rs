//! Sampled checks of the standing kernel assumptions: lower bound and
//! local integrability, nonnegative limit at infinity, decrease near the
//! origin, and a negative-energy witness.

use serde::{Deserialize, Serialize};

use super::Kernel;
use crate::energy::{continuum_energy_mc, McEstimate};
use crate::error::Result;
use crate::measure::TargetMeasure;
use crate::quadrature;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionScheme {
    /// Geometric radius grid for the lower bound: `grid_points` radii
    /// between `grid_min` and `grid_max`, plus `r = 0`.
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    /// Far radii `far_start * 2^k`, `k < far_count`.
    pub far_start: f64,
    pub far_count: usize,
    /// Radii sampled in `(0, r̄)` for the monotonicity check.
    pub monotone_samples: usize,
    /// Pair count for the witness energy.
    pub witness_samples: usize,
    pub seed: u64,
}

impl Default for AssumptionScheme {
    fn default() -> Self {
        Self {
            grid_min: 1e-6,
            grid_max: 1e3,
            grid_points: 4000,
            far_start: 10.0,
            far_count: 21,
            monotone_samples: 2000,
            witness_samples: 200_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    pub pass: bool,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub inf_estimate: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub argmin_radius: f64,
    pub scheme: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrabilityCheck {
    pub pass: bool,
    /// `∫_{B_1} |g|`, absent when the radial quadrature diverges.
    #[serde(serialize_with = "crate::io::ser_opt_f64")]
    pub integral: Option<f64>,
    pub scheme: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailCheck {
    pub pass: bool,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub min_value: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub tail_value: f64,
    /// Tail negative but increasing toward 0 over the last radii.
    pub rising_to_zero: bool,
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneCheck {
    pub pass: bool,
    pub near_origin_radius: f64,
    /// First sampled pair `(r, s)`, `r < s`, with `g(s) > g(r)`.
    pub first_violation: Option<(f64, f64)>,
    pub scheme: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessCheck {
    pub pass: bool,
    pub energy: McEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub h1_lower_bound: LowerBoundCheck,
    pub h1_local_integrability: IntegrabilityCheck,
    pub h2_liminf_at_infinity: TailCheck,
    pub h3_monotone_near_origin: MonotoneCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h4_witness_energy: Option<WitnessCheck>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.h1_lower_bound.pass
            && self.h1_local_integrability.pass
            && self.h2_liminf_at_infinity.pass
            && self.h3_monotone_near_origin.pass
            && self.h4_witness_energy.as_ref().is_none_or(|w| w.pass)
    }
}

fn geometric(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let ratio = (hi / lo).ln() / (count.max(2) - 1) as f64;
    (0..count).map(move |k| lo * (ratio * k as f64).exp())
}

/// Evaluates the four assumptions on sampled radii; the `h4` entry needs a
/// witness measure and is omitted without one.
pub fn check_assumptions(
    kernel: &Kernel,
    witness: Option<&TargetMeasure>,
    scheme: &AssumptionScheme,
) -> Result<AssumptionReport> {
    // lower bound
    let mut inf = kernel.value_at_origin();
    let mut argmin = 0.0;
    let mut last = f64::NAN;
    let mut falling_at_end = false;
    let mut last_radius = 0.0;
    for r in geometric(scheme.grid_min, scheme.grid_max, scheme.grid_points) {
        last_radius = r;
        let v = kernel.radial(r);
        if v < inf {
            inf = v;
            argmin = r;
        }
        falling_at_end = v < last;
        last = v;
    }
    let lower = LowerBoundCheck {
        pass: inf.is_finite() && !(argmin >= last_radius && falling_at_end),
        inf_estimate: inf,
        argmin_radius: argmin,
        scheme: format!(
            "r = 0 and {} geometric radii in [{:e}, {:e}]",
            scheme.grid_points, scheme.grid_min, scheme.grid_max
        ),
    };

    // local integrability: |S^{N-1}| ∫_0^1 |g(r)| r^{N-1} dr
    let n = kernel.dim();
    let radial =
        quadrature::dyadic_toward_zero(|r| kernel.radial(r).abs() * r.powi(n as i32 - 1), 1e-8, 1100);
    let sphere = n as f64 * crate::measure::unit_ball_volume(n);
    let integrability = IntegrabilityCheck {
        pass: radial.is_some(),
        integral: radial.map(|v| v * sphere),
        scheme: "dyadic panels [2^-(k+1), 2^-k] with 16-point Gauss-Legendre, relative tolerance 1e-8".into(),
    };

    // limit at infinity
    let radii: Vec<f64> = (0..scheme.far_count)
        .map(|k| scheme.far_start * 2f64.powi(k as i32))
        .collect();
    let values: Vec<f64> = radii.iter().map(|&r| kernel.radial(r)).collect();
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_value = values.iter().rev().take(3).copied().fold(f64::INFINITY, f64::min);
    let scale = values
        .iter()
        .map(|v| v.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    // A negative tail still passes when it is visibly climbing to 0.
    let last3: Vec<f64> = values.iter().rev().take(3).copied().collect();
    let rising_to_zero = last3.len() == 3
        && last3[0] >= last3[1]
        && last3[1] >= last3[2]
        && last3[0].abs() <= 1e-2 * min_value.abs();
    let tail = TailCheck {
        pass: tail_value >= -1e-12 * scale.max(1.0) || rising_to_zero,
        rising_to_zero,
        min_value,
        tail_value,
        radii,
    };

    // decrease on (0, r̄)
    let rbar = kernel.near_origin_radius();
    let m = scheme.monotone_samples.max(2);
    let mut samples: Vec<f64> = (1..m).map(|k| rbar * k as f64 / m as f64).collect();
    samples.extend(geometric(rbar * 1e-9, rbar / m as f64, m / 4).filter(|r| *r < rbar));
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let mut violation = None;
    for w in samples.windows(2) {
        let (a, b) = (kernel.radial(w[0]), kernel.radial(w[1]));
        if b > a + 1e-12 * a.abs().max(1.0) {
            violation = Some((w[0], w[1]));
            break;
        }
    }
    let monotone = MonotoneCheck {
        pass: violation.is_none(),
        near_origin_radius: rbar,
        first_violation: violation,
        scheme: format!("{} uniform and {} geometric radii in (0, {rbar})", m - 1, m / 4),
    };

    let witness = match witness {
        Some(mu) => {
            let energy = continuum_energy_mc(mu, kernel, scheme.witness_samples, scheme.seed)?;
            Some(WitnessCheck {
                pass: energy.reliable && energy.estimate + 3.0 * energy.std_error < 0.0,
                energy,
            })
        }
        None => None,
    };

    Ok(AssumptionReport {
        h1_lower_bound: lower,
        h1_local_integrability: integrability,
        h2_liminf_at_infinity: tail,
        h3_monotone_near_origin: monotone,
        h4_witness_energy: witness,
    })
}
