//! Monotone piecewise-cubic (Fritsch–Carlson) radial profile.

use crate::error::{Error, Result};

/// A radial profile sampled on a strictly increasing radius grid.
///
/// Between samples the profile is a shape-preserving Hermite cubic, so a
/// monotone data set yields a monotone profile. Beyond the last radius the
/// last value is held. Below the first radius the first value is held,
/// except when the first sample is `+inf` at radius 0: then the first
/// finite segment is continued linearly toward the origin and only `r = 0`
/// itself evaluates to `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialTable {
    radii: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl RadialTable {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::InvalidKernel(format!(
                "tabulated kernel has {} radii but {} values",
                radii.len(),
                values.len()
            )));
        }
        if radii.len() < 2 {
            return Err(Error::InvalidKernel(
                "tabulated kernel needs at least two samples".into(),
            ));
        }
        if radii[0] < 0.0 || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidKernel(
                "tabulated radii must be finite and nonnegative".into(),
            ));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKernel(
                "tabulated radius grid must be strictly increasing".into(),
            ));
        }
        for (i, v) in values.iter().enumerate() {
            let origin_inf = i == 0 && radii[0] == 0.0 && *v == f64::INFINITY;
            if !v.is_finite() && !origin_inf {
                return Err(Error::InvalidKernel(format!(
                    "tabulated value at radius {} must be finite (only r = 0 may be +inf)",
                    radii[i]
                )));
            }
        }
        let singular = values[0] == f64::INFINITY;
        if singular && radii.len() < 3 {
            return Err(Error::InvalidKernel(
                "a tabulated kernel singular at 0 needs at least two finite samples".into(),
            ));
        }
        let mut table = Self {
            radii,
            values,
            slopes: Vec::new(),
        };
        table.slopes = table.compute_slopes();
        Ok(table)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn singular_at_origin(&self) -> bool {
        self.values[0] == f64::INFINITY
    }

    fn first_finite(&self) -> usize {
        usize::from(self.singular_at_origin())
    }

    fn compute_slopes(&self) -> Vec<f64> {
        let start = self.first_finite();
        let r = &self.radii[start..];
        let v = &self.values[start..];
        let m = r.len();
        let h: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..m - 1).map(|k| (v[k + 1] - v[k]) / h[k]).collect();
        let mut d = vec![0.0; m];
        if m == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..m - 1 {
                if delta[k - 1] * delta[k] <= 0.0 {
                    d[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d[m - 1] = edge_slope(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
        }
        let mut slopes = vec![0.0; self.radii.len()];
        slopes[start..].copy_from_slice(&d);
        slopes
    }

    /// Value and radial derivative at `r >= 0`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let start = self.first_finite();
        let r0 = self.radii[start];
        let last = self.radii.len() - 1;
        if r >= self.radii[last] {
            return (self.values[last], 0.0);
        }
        if r <= r0 {
            if self.singular_at_origin() {
                if r == 0.0 {
                    return (f64::INFINITY, f64::NEG_INFINITY);
                }
                let d = self.slopes[start];
                return (self.values[start] + d * (r - r0), d);
            }
            return (self.values[0], 0.0);
        }
        let k = self.radii.partition_point(|&x| x <= r) - 1;
        let (x0, x1) = (self.radii[k], self.radii[k + 1]);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let deriv = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
        (value, deriv)
    }
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}
