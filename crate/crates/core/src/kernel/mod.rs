//! Radial interaction kernels.

mod assumptions;
mod table;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

pub use assumptions::{
    check_assumptions, AssumptionReport, AssumptionScheme, IntegrabilityCheck, LowerBoundCheck,
    MonotoneCheck, TailCheck, WitnessCheck,
};
pub use table::RadialTable;

#[derive(Clone, Debug, PartialEq)]
pub enum KernelShape {
    /// `r^beta/beta - r^alpha/alpha`, with `r^0/0` read as `ln r`.
    PowerLaw {
        alpha: f64,
        beta: f64,
    },
    /// `c1 exp(-r/l1) - c2 exp(-r/l2)`.
    Morse {
        c1: f64,
        c2: f64,
        l1: f64,
        l2: f64,
    },
    /// `min(inner, level)`.
    Truncated {
        inner: Box<Kernel>,
        level: f64,
    },
    Tabulated(RadialTable),
}

/// A radial kernel `g(v) = g_r(|v|)` on `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    shape: KernelShape,
    dim: usize,
    near_origin_radius: f64,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidKernel("dimension must be at least 1".into()));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidKernel(format!(
            "near_origin_radius must be finite and positive, got {r}"
        )));
    }
    Ok(())
}

impl Kernel {
    pub fn power_law(dim: usize, alpha: f64, beta: f64) -> Result<Self> {
        check_dim(dim)?;
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidKernel("power-law exponents must be finite".into()));
        }
        if !(-(dim as f64) < alpha && alpha < beta) {
            return Err(Error::InvalidKernel(format!(
                "power law needs -{dim} < alpha < beta, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self {
            shape: KernelShape::PowerLaw { alpha, beta },
            dim,
            near_origin_radius: 1.0,
        })
    }

    pub fn morse(dim: usize, c1: f64, c2: f64, l1: f64, l2: f64) -> Result<Self> {
        check_dim(dim)?;
        for (name, v) in [("c1", c1), ("c2", c2), ("l1", l1), ("l2", l2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "morse {name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(Self {
            shape: KernelShape::Morse { c1, c2, l1, l2 },
            dim,
            near_origin_radius: morse_decreasing_radius(c1, c2, l1, l2),
        })
    }

    pub fn truncated(inner: Kernel, level: f64) -> Result<Self> {
        if !level.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "truncation level must be finite, got {level}"
            )));
        }
        let dim = inner.dim;
        let near_origin_radius = inner.near_origin_radius;
        Ok(Self {
            shape: KernelShape::Truncated {
                inner: Box::new(inner),
                level,
            },
            dim,
            near_origin_radius,
        })
    }

    pub fn tabulated(dim: usize, table: RadialTable, near_origin_radius: f64) -> Result<Self> {
        check_dim(dim)?;
        check_radius(near_origin_radius)?;
        Ok(Self {
            shape: KernelShape::Tabulated(table),
            dim,
            near_origin_radius,
        })
    }

    /// The constant kernel `g = c`.
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        let table = RadialTable::new(vec![0.0, 1.0], vec![c, c])?;
        Self::tabulated(dim, table, 1.0)
    }

    pub fn with_near_origin_radius(mut self, r: f64) -> Result<Self> {
        check_radius(r)?;
        self.near_origin_radius = r;
        Ok(self)
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn near_origin_radius(&self) -> f64 {
        self.near_origin_radius
    }

    /// `g_r(r)` for `r >= 0`.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        match &self.shape {
            KernelShape::PowerLaw { alpha, beta } => power_term(r, *beta) - power_term(r, *alpha),
            KernelShape::Morse { c1, c2, l1, l2 } => c1 * (-r / l1).exp() - c2 * (-r / l2).exp(),
            KernelShape::Truncated { inner, level } => inner.radial(r).min(*level),
            KernelShape::Tabulated(t) => t.eval(r).0,
        }
    }

    /// `g_r'(r)` for `r > 0`.
    #[inline]
    pub fn radial_derivative(&self, r: f64) -> f64 {
        match &self.shape {
            KernelShape::PowerLaw { alpha, beta } => power_slope(r, *beta) - power_slope(r, *alpha),
            KernelShape::Morse { c1, c2, l1, l2 } => -c1 / l1 * (-r / l1).exp() + c2 / l2 * (-r / l2).exp(),
            KernelShape::Truncated { inner, level } => {
                if inner.radial(r) < *level {
                    inner.radial_derivative(r)
                } else {
                    0.0
                }
            }
            KernelShape::Tabulated(t) => t.eval(r).1,
        }
    }

    /// `g(0)`, possibly `+inf`.
    pub fn value_at_origin(&self) -> f64 {
        self.radial(0.0)
    }

    pub fn singular_at_origin(&self) -> bool {
        self.value_at_origin() == f64::INFINITY
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        self.check_vector(v)?;
        Ok(self.radial(norm(v)))
    }

    pub fn grad(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(v)?;
        let r = norm(v);
        if r == 0.0 {
            return Err(Error::GradientUndefined { i: 0, j: 0 });
        }
        let s = self.radial_derivative(r) / r;
        Ok(v.iter().map(|x| s * x).collect())
    }

    /// Central symmetrization `(g(v) + g(-v))/2`. Every built-in kernel is
    /// radial, so this is the identity.
    pub fn symmetrize(&self) -> Kernel {
        self.clone()
    }

    pub fn truncate(&self, level: f64) -> Result<Kernel> {
        Kernel::truncated(self.clone(), level)
    }

    /// Average of `g` over the cube `[-eta/2, eta/2]^dim`.
    ///
    /// The cube is split into `2 dim` pyramids with apex at the origin. On
    /// each, the substitution `z = t (h, y)` turns the singular part into
    /// the radial integral `F(rho) = int_0^rho g(s) s^(dim-1) ds`, which is
    /// evaluated with dyadic refinement toward `s = 0`.
    pub fn local_avg_integral(&self, eta: f64) -> Result<f64> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cube side must be finite and positive, got {eta}"
            )));
        }
        let n = self.dim;
        let h = 0.5 * eta;
        let inner =
            quadrature::dyadic_toward_zero(|t| self.radial(t * h) * t.powi(n as i32 - 1), 1e-10, 1100)
                .ok_or_else(|| {
                    Error::Integrability(format!(
                        "radial integral near 0 does not settle (cube side {eta})"
                    ))
                })?;
        let f_h = h.powi(n as i32) * inner;
        if n == 1 {
            return Ok(f_h / h);
        }
        // I(rho) = rho^-n F(rho), F(rho) = F(h) + int_h^rho g s^(n-1) ds.
        let radial_tail = |rho: f64| -> f64 {
            if rho <= h {
                return f_h;
            }
            let rule = quadrature::gl16();
            let panels = 4;
            let w = (rho - h) / panels as f64;
            let mut s = 0.0;
            for k in 0..panels {
                let a = h + k as f64 * w;
                s += rule.integrate(a, a + w, |x| self.radial(x) * x.powi(n as i32 - 1));
            }
            f_h + s
        };
        let face_integrand = |y: &[f64]| -> f64 {
            let rho = (h * h + y.iter().map(|c| c * c).sum::<f64>()).sqrt();
            radial_tail(rho) / rho.powi(n as i32)
        };
        let face = integrate_box(&face_integrand, n - 1, h);
        let total = 2.0 * n as f64 * h * 2f64.powi(n as i32 - 1) * face;
        let avg = total / eta.powi(n as i32);
        if !avg.is_finite() {
            return Err(Error::Integrability(format!(
                "cube average is not finite (cube side {eta})"
            )));
        }
        Ok(avg)
    }

    pub fn from_config(config: &KernelConfig, base_dir: Option<&Path>) -> Result<Self> {
        let with_radius = |k: Kernel, r: Option<f64>| match r {
            Some(r) => k.with_near_origin_radius(r),
            None => Ok(k),
        };
        match config {
            KernelConfig::PowerLaw {
                dim,
                power_alpha,
                power_beta,
                near_origin_radius,
            } => with_radius(
                Kernel::power_law(*dim, *power_alpha, *power_beta)?,
                *near_origin_radius,
            ),
            KernelConfig::Morse {
                dim,
                morse_c1,
                morse_c2,
                morse_l1,
                morse_l2,
                near_origin_radius,
            } => with_radius(
                Kernel::morse(*dim, *morse_c1, *morse_c2, *morse_l1, *morse_l2)?,
                *near_origin_radius,
            ),
            KernelConfig::Truncated {
                trunc_level,
                inner,
                near_origin_radius,
            } => {
                let inner = Kernel::from_config(inner, base_dir)?;
                with_radius(Kernel::truncated(inner, *trunc_level)?, *near_origin_radius)
            }
            KernelConfig::TabulatedRadial {
                dim,
                radial_samples,
                table,
                near_origin_radius,
            } => {
                let table = match (radial_samples, table) {
                    (Some(s), None) => RadialTable::new(s.radii.clone(), s.values.clone())?,
                    (None, Some(path)) => {
                        let path = match base_dir {
                            Some(dir) => dir.join(path),
                            None => path.into(),
                        };
                        let (radii, values) = crate::io::read_radial_csv(&path)?;
                        RadialTable::new(radii, values)?
                    }
                    _ => {
                        return Err(Error::InvalidKernel(
                            "tabulated_radial needs exactly one of radial_samples or table".into(),
                        ))
                    }
                };
                Kernel::tabulated(*dim, table, *near_origin_radius)
            }
        }
    }

    pub fn to_config(&self) -> KernelConfig {
        let r = Some(self.near_origin_radius);
        match &self.shape {
            KernelShape::PowerLaw { alpha, beta } => KernelConfig::PowerLaw {
                dim: self.dim,
                power_alpha: *alpha,
                power_beta: *beta,
                near_origin_radius: r,
            },
            KernelShape::Morse { c1, c2, l1, l2 } => KernelConfig::Morse {
                dim: self.dim,
                morse_c1: *c1,
                morse_c2: *c2,
                morse_l1: *l1,
                morse_l2: *l2,
                near_origin_radius: r,
            },
            KernelShape::Truncated { inner, level } => KernelConfig::Truncated {
                trunc_level: *level,
                inner: Box::new(inner.to_config()),
                near_origin_radius: r,
            },
            KernelShape::Tabulated(t) => KernelConfig::TabulatedRadial {
                dim: self.dim,
                radial_samples: Some(RadialSamples {
                    radii: t.radii().to_vec(),
                    values: t.values().to_vec(),
                }),
                table: None,
                near_origin_radius: self.near_origin_radius,
            },
        }
    }
}

/// Serializable kernel description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    PowerLaw {
        dim: usize,
        power_alpha: f64,
        power_beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        near_origin_radius: Option<f64>,
    },
    Morse {
        dim: usize,
        morse_c1: f64,
        morse_c2: f64,
        morse_l1: f64,
        morse_l2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        near_origin_radius: Option<f64>,
    },
    Truncated {
        trunc_level: f64,
        inner: Box<KernelConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        near_origin_radius: Option<f64>,
    },
    TabulatedRadial {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radial_samples: Option<RadialSamples>,
        /// Path to a two-column `radius,value` CSV.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<String>,
        near_origin_radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSamples {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn power_term(r: f64, p: f64) -> f64 {
    if p == 0.0 {
        r.ln()
    } else if p == 1.0 {
        r
    } else if p == 2.0 {
        0.5 * r * r
    } else if p == -1.0 {
        -1.0 / r
    } else {
        r.powf(p) / p
    }
}

#[inline]
fn power_slope(r: f64, p: f64) -> f64 {
    if p == 1.0 {
        1.0
    } else if p == 2.0 {
        r
    } else if p == 0.0 {
        1.0 / r
    } else {
        r.powf(p - 1.0)
    }
}

/// Largest radius below which the Morse profile is decreasing. When the
/// profile is not decreasing next to 0 the smaller length scale is returned
/// and the assumption checker reports the failure.
fn morse_decreasing_radius(c1: f64, c2: f64, l1: f64, l2: f64) -> f64 {
    // g' < 0 iff ln(c1 l2 / (c2 l1)) > r (1/l1 - 1/l2)
    let a = (c1 * l2 / (c2 * l1)).ln();
    let b = 1.0 / l1 - 1.0 / l2;
    if b > 0.0 && a > 0.0 {
        a / b
    } else if b <= 0.0 && a > 0.0 {
        l1.max(l2)
    } else {
        l1.min(l2)
    }
}

/// Integral of a smooth function over `[0, h]^d`: nested adaptive
/// quadrature for `d <= 2`, a tensor Gauss–Legendre rule beyond.
fn integrate_box(f: &dyn Fn(&[f64]) -> f64, d: usize, h: f64) -> f64 {
    let tol = 1e-11 * h.powi(d as i32);
    match d {
        0 => f(&[]),
        1 => quadrature::adaptive(0.0, h, tol, &mut |y| f(&[y])),
        2 => quadrature::adaptive(0.0, h, tol, &mut |y0| {
            quadrature::adaptive(0.0, h, tol / h, &mut |y1| f(&[y0, y1]))
        }),
        _ => {
            let rule = quadrature::GaussLegendre::new(8);
            let m = rule.nodes.len();
            let mut idx = vec![0usize; d];
            let mut point = vec![0.0; d];
            let mut total = 0.0;
            loop {
                let mut w = 1.0;
                for (k, &i) in idx.iter().enumerate() {
                    point[k] = 0.5 * h * (rule.nodes[i] + 1.0);
                    w *= 0.5 * h * rule.weights[i];
                }
                total += w * f(&point);
                let mut k = 0;
                loop {
                    if k == d {
                        return total;
                    }
                    idx[k] += 1;
                    if idx[k] < m {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
    }
}
