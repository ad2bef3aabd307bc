//! One-dimensional marginals for product measures.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Cauchy, Continuous, ContinuousCDF, Exp, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Cauchy { loc: f64, scale: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Marginal::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Marginal::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Marginal::Cauchy { loc, scale } => loc.is_finite() && scale.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!(
                "bad marginal parameters: {self:?}"
            )))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Normal { mean, sd } => normal(mean, sd).cdf(x),
            Marginal::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    Exp::new(rate).unwrap().cdf(x)
                }
            }
            Marginal::Cauchy { loc, scale } => Cauchy::new(loc, scale).unwrap().cdf(x),
        }
    }

    /// Smallest `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match *self {
            Marginal::Uniform { lo, hi } => lo + p * (hi - lo),
            Marginal::Normal { mean, sd } => normal(mean, sd).inverse_cdf(p),
            Marginal::Exponential { rate } => {
                if p == 0.0 {
                    0.0
                } else {
                    Exp::new(rate).unwrap().inverse_cdf(p)
                }
            }
            Marginal::Cauchy { loc, scale } => Cauchy::new(loc, scale).unwrap().inverse_cdf(p),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Marginal::Normal { mean, sd } => normal(mean, sd).pdf(x),
            Marginal::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    Exp::new(rate).unwrap().pdf(x)
                }
            }
            Marginal::Cauchy { loc, scale } => Cauchy::new(loc, scale).unwrap().pdf(x),
        }
    }

    /// Mass of `[a, b]`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// Smallest `t` in `[a, b]` with mass of `[a, t]` at least `m`.
    pub fn interval_quantile(&self, a: f64, b: f64, m: f64) -> f64 {
        let fa = self.cdf(a);
        let fb = self.cdf(b);
        let t = self.quantile((fa + m).min(fb));
        t.clamp(a, b)
    }

    /// Inverse-CDF draw conditioned on `[a, b]`, with `u` uniform on `[0, 1)`.
    pub fn sample_interval(&self, a: f64, b: f64, u: f64) -> f64 {
        let fa = self.cdf(a);
        let fb = self.cdf(b);
        self.quantile(fa + u * (fb - fa)).clamp(a, b)
    }

    /// Mean conditioned on `[a, b]`, or the conditional median when the
    /// mean does not exist.
    pub fn interval_mean(&self, a: f64, b: f64) -> f64 {
        let mean = match *self {
            Marginal::Uniform { lo, hi } => 0.5 * (a.max(lo) + b.min(hi)),
            Marginal::Normal { mean, sd } => {
                let (za, zb) = ((a - mean) / sd, (b - mean) / sd);
                let std = normal(0.0, 1.0);
                let z = std.cdf(zb) - std.cdf(za);
                if z > 1e-300 {
                    mean + sd * (std.pdf(za) - std.pdf(zb)) / z
                } else {
                    // both ends deep in one tail: the mass piles up at the near end
                    if za > 0.0 {
                        a
                    } else {
                        b
                    }
                }
            }
            Marginal::Exponential { rate } => {
                let a = a.max(0.0);
                if b.is_infinite() {
                    a + 1.0 / rate
                } else {
                    // E[X | a <= X <= b] for the exponential law
                    let w = b - a;
                    let e = (-rate * w).exp();
                    a + 1.0 / rate - w * e / (1.0 - e)
                }
            }
            Marginal::Cauchy { loc, scale } => {
                if a.is_finite() && b.is_finite() {
                    let (za, zb) = ((a - loc) / scale, (b - loc) / scale);
                    let z = zb.atan() - za.atan();
                    loc + scale * ((1.0 + zb * zb) / (1.0 + za * za)).ln() / (2.0 * z)
                } else {
                    f64::NAN
                }
            }
        };
        if mean.is_finite() {
            mean.clamp(a, b)
        } else {
            self.sample_interval(a, b, 0.5)
        }
    }

    /// Bounds of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lo, hi } => (lo, hi),
            Marginal::Exponential { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

fn normal(mean: f64, sd: f64) -> Normal {
    Normal::new(mean, sd).unwrap()
}
