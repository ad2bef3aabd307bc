//! Relocation of far-away points next to the bulk of a configuration.

use serde::{Deserialize, Serialize};

use crate::energy::{centroid, discrete_energy, dist, potential, Configuration, Points, SubConfiguration};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairSettings {
    pub enabled: bool,
    /// `R` is this quantile of the distances from the center of mass.
    pub bulk_radius_quantile: f64,
    /// Points farther than `far_factor * R` are outliers.
    pub far_factor: f64,
    /// Side of the relocation cube; `None` tries a ladder of sides below
    /// `min(r̄, 2R)` and keeps the best.
    pub grid_side: Option<f64>,
    /// The cube center sits `offset * R` beyond the farthest bulk point.
    pub offset: f64,
    /// Try a repair every this many descent iterations (0: only at
    /// stationary points).
    pub every: usize,
}

impl Default for RepairSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            bulk_radius_quantile: 0.5,
            far_factor: 1.75,
            grid_side: None,
            offset: 0.1,
            every: 25,
        }
    }
}

impl RepairSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.bulk_radius_quantile > 0.0 && self.bulk_radius_quantile < 1.0) {
            return Err(Error::InvalidArgument(
                "bulk_radius_quantile must lie in (0, 1)".into(),
            ));
        }
        if !(self.far_factor > 1.0) {
            return Err(Error::InvalidArgument("far_factor must exceed 1".into()));
        }
        if let Some(eta) = self.grid_side {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidArgument("grid_side must be positive".into()));
            }
        }
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return Err(Error::InvalidArgument("offset must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepairEvent {
    /// Descent iteration at which the move was made (0 outside a descent).
    pub iteration: usize,
    pub moved: usize,
    pub grid_side: f64,
    pub energy_before: f64,
    pub energy_after: f64,
}

impl RepairEvent {
    pub fn delta(&self) -> f64 {
        self.energy_after - self.energy_before
    }
}

/// Moves the outliers of `cfg` onto the lowest-potential sites of a small
/// grid placed just outside the bulk. Returns the original configuration
/// and `None` unless the energy strictly decreases.
pub fn repair_outliers(
    cfg: &Configuration,
    kernel: &Kernel,
    settings: &RepairSettings,
) -> Result<(Configuration, Option<RepairEvent>)> {
    settings.validate()?;
    let n = cfg.n();
    let dim = cfg.dim();
    let unchanged = || Ok((cfg.clone(), None));
    if n < 2 {
        return unchanged();
    }
    let c = cfg.centroid();
    let radii: Vec<f64> = cfg.points().map(|p| dist(p, &c)).collect();
    let mut sorted = radii.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((settings.bulk_radius_quantile * n as f64).ceil() as usize).clamp(1, n) - 1;
    let r = sorted[rank];
    if r <= 0.0 {
        return unchanged();
    }
    let (outliers, bulk): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| radii[i] > settings.far_factor * r);
    if outliers.is_empty() || bulk.is_empty() {
        return unchanged();
    }
    let bulk_cfg = SubConfiguration::from_indices(cfg, &bulk);
    let cb = centroid(bulk_cfg.coords(), dim);
    let (far, r_bulk) = (0..bulk_cfg.len())
        .map(|k| (k, dist(bulk_cfg.point(k), &cb)))
        .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if r_bulk <= 0.0 {
        return unchanged();
    }
    let xbar = bulk_cfg.point(far);
    let center: Vec<f64> = (0..dim)
        .map(|k| xbar[k] + settings.offset * r * (xbar[k] - cb[k]) / r_bulk)
        .collect();

    let a = outliers.len();
    let per_axis = crate::quantizer::per_axis_count(a, dim);
    let sides: Vec<f64> = match settings.grid_side {
        Some(eta) => vec![eta],
        None => {
            let top = 0.99 * kernel.near_origin_radius().min(2.0 * r);
            (0..6).map(|j| top / 2f64.powi(j)).collect()
        }
    };
    let before = discrete_energy(cfg, kernel)?.value;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for eta in sides {
        let mut sites: Vec<(f64, usize, Vec<f64>)> = Vec::new();
        let total = per_axis.pow(dim as u32);
        for s in 0..total {
            let mut rem = s;
            let mut y = center.clone();
            for v in y.iter_mut() {
                let i = rem % per_axis;
                rem /= per_axis;
                *v += eta * ((i as f64 + 0.5) / per_axis as f64 - 0.5);
            }
            let psi = potential(&bulk_cfg, kernel, &y, None)?;
            sites.push((psi, s, y));
        }
        sites.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        let mut coords = cfg.coords().to_vec();
        for (&i, site) in outliers.iter().zip(&sites) {
            coords[i * dim..(i + 1) * dim].copy_from_slice(&site.2);
        }
        let trial = Configuration::new(dim, coords)?;
        let e = discrete_energy(&trial, kernel)?.value;
        if e.is_finite() && best.as_ref().is_none_or(|b| e < b.0) {
            best = Some((e, eta, trial.into_coords()));
        }
    }
    match best {
        Some((e, eta, coords)) if e < before => Ok((
            Configuration::new(dim, coords)?,
            Some(RepairEvent {
                iteration: 0,
                moved: a,
                grid_side: eta,
                energy_before: before,
                energy_after: e,
            }),
        )),
        _ => unchanged(),
    }
}
