use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use riesz_core::diagnostics::{
    cluster_classify, el_residual, gamma_trace, ClusterReport, ElReport, GammaSettings,
};
use riesz_core::energy::discrete_energy;
use riesz_core::io::format_configuration;
use riesz_core::kernel::check_assumptions;
use riesz_core::minimizer::{energy_trace, minimize, RepairEvent, StopReason};
use riesz_core::quantizer::quantize;
use riesz_core::{Configuration, EnergyValue, KernelConfig, Points};
use serde::Serialize;

use crate::config::Loaded;
use crate::error::{CliError, CliResult};
use crate::svg;

pub struct Output {
    pub dir: PathBuf,
    pub svg: bool,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: PathBuf, svg: bool) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
        Ok(Self {
            dir,
            svg,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let p = self.dir.join(name);
        fs::write(&p, contents).map_err(CliError::io(&p))?;
        self.written.push(p);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
        s.push('\n');
        self.write(name, &s)
    }

    /// Cluster-colored scatter when `--svg` is set and the points are 2D.
    fn scatter(&mut self, name: &str, cfg: &Configuration, gap_factor: f64, title: &str) -> CliResult<()> {
        if !self.svg_enabled(cfg.dim()) {
            return Ok(());
        }
        let labels = cluster_labels(cfg, gap_factor)?;
        self.write(name, &svg::scatter(cfg, &labels, title))
    }

    fn svg_enabled(&self, dim: usize) -> bool {
        if self.svg && dim != 2 {
            eprintln!("note: --svg ignored for dim = {dim}");
        }
        self.svg && dim == 2
    }
}

fn cluster_labels(cfg: &Configuration, gap_factor: f64) -> CliResult<Vec<usize>> {
    let report = cluster_classify(cfg, gap_factor)?;
    Ok(labels_of(&report, cfg.n()))
}

fn labels_of(report: &ClusterReport, n: usize) -> Vec<usize> {
    let mut labels = vec![0; n];
    for (c, cl) in report.clusters.iter().enumerate() {
        for &i in &cl.indices {
            labels[i] = c;
        }
    }
    labels
}

fn e16(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt16(v: Option<f64>) -> String {
    v.map(e16).unwrap_or_default()
}

pub fn check_kernel(l: &Loaded, out: &mut Output) -> CliResult<()> {
    let kernel = l.kernel()?;
    let witness = l
        .config
        .witness
        .as_ref()
        .map(|m| riesz_core::TargetMeasure::from_config(m, l.base_dir.as_deref()))
        .transpose()?;
    let report = check_assumptions(&kernel, witness.as_ref(), &l.config.assumptions)?;
    let mark = |p: bool| if p { "pass" } else { "FAIL" };
    println!(
        "h1 lower bound         {}  inf g ~ {:.6e} at r = {:.6e}",
        mark(report.h1_lower_bound.pass),
        report.h1_lower_bound.inf_estimate,
        report.h1_lower_bound.argmin_radius
    );
    println!(
        "h1 local integrability {}",
        mark(report.h1_local_integrability.pass)
    );
    println!(
        "h2 liminf at infinity  {}  tail g = {:.6e}",
        mark(report.h2_liminf_at_infinity.pass),
        report.h2_liminf_at_infinity.tail_value
    );
    println!(
        "h3 monotone near 0     {}  r̄ = {}",
        mark(report.h3_monotone_near_origin.pass),
        report.h3_monotone_near_origin.near_origin_radius
    );
    match &report.h4_witness_energy {
        Some(w) => println!(
            "h4 witness energy      {}  E = {:.6e} ± {:.1e}",
            mark(w.pass),
            w.energy.estimate,
            w.energy.std_error
        ),
        None => println!("h4 witness energy      skipped (no [witness] block)"),
    }
    out.json("assumptions.json", &report)?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(CliError::Failed("kernel assumption check failed".into()))
    }
}

pub fn quantize_cmd(l: &Loaded, n: Option<usize>, out: &mut Output) -> CliResult<()> {
    let kernel = l.kernel()?;
    let mu = l.require_measure()?;
    let n = l.n(n)?;
    let q = quantize(&mu, n, &kernel, &l.config.quantize)?;
    out.write("configuration.csv", &format_configuration(&q.configuration))?;
    out.json("quantize.json", &q.report)?;
    out.scatter(
        "quantize.svg",
        &q.configuration,
        l.config.diagnose.gap_factor,
        &format!("quantized, n = {n}"),
    )?;
    println!(
        "n = {n}, l = {}, dropped = {}, achieved_G = {:.6e}",
        q.report.l, q.report.dropped, q.report.achieved_g
    );
    Ok(())
}

#[derive(Serialize)]
struct RepairSummary<'a> {
    count: usize,
    deltas: Vec<f64>,
    events: &'a [RepairEvent],
}

#[derive(Serialize)]
struct MinimizeReport<'a> {
    n: usize,
    dim: usize,
    kernel: KernelConfig,
    energy: EnergyValue,
    grad_norm: f64,
    iterations: usize,
    stop: StopReason,
    restarts_used: usize,
    best_restart: usize,
    restart_energies: &'a [f64],
    repair_events: RepairSummary<'a>,
    seed: u64,
}

pub fn minimize_cmd(l: &Loaded, n: Option<usize>, out: &mut Output) -> CliResult<()> {
    let kernel = l.kernel()?;
    let measure = l.measure()?;
    let n = l.n(n)?;
    let settings = l.minimize_settings(measure.as_ref())?;
    let r = minimize(&kernel, n, &settings)?;
    let report = MinimizeReport {
        n,
        dim: kernel.dim(),
        kernel: kernel.to_config(),
        energy: discrete_energy(&r.config, &kernel)?,
        grad_norm: r.grad_norm,
        iterations: r.iterations,
        stop: r.stop,
        restarts_used: r.restarts_used,
        best_restart: r.best_restart,
        restart_energies: &r.restart_energies,
        repair_events: RepairSummary {
            count: r.repair_events.len(),
            deltas: r.repair_events.iter().map(RepairEvent::delta).collect(),
            events: &r.repair_events,
        },
        seed: settings.seed,
    };
    out.write("configuration.csv", &format_configuration(&r.config))?;
    out.json("minimize.json", &report)?;
    let mut hist = String::from("iteration,energy,grad_norm\n");
    for (k, h) in r.history.iter().enumerate() {
        writeln!(hist, "{},{},{}", k + 1, e16(h.energy), e16(h.grad_norm)).unwrap();
    }
    out.write("history.csv", &hist)?;
    out.scatter(
        "minimize.svg",
        &r.config,
        l.config.diagnose.gap_factor,
        &format!("minimizer, n = {n}"),
    )?;
    println!(
        "n = {n}, energy = {:.12e}, grad_norm = {:.3e}, iterations = {}, stop = {:?}",
        r.energy, r.grad_norm, r.iterations, r.stop
    );
    Ok(())
}

pub fn trace_cmd(l: &Loaded, n_list: Option<Vec<usize>>, out: &mut Output) -> CliResult<()> {
    let n_list = l.n_list(n_list)?;
    let kernel = l.kernel()?;
    let measure = l.measure()?;
    let tb = &l.config.trace;
    let dim = kernel.dim();
    match measure {
        Some(mu) => {
            let settings = GammaSettings {
                quantize: l.config.quantize.clone(),
                minimize: l.minimize_settings(Some(&mu))?,
                bl: l.config.bl.clone(),
                target_samples: tb.target_samples,
                target_seed: tb.seed,
            };
            let t = gamma_trace(&kernel, &mu, &n_list, tb.with_minimization, &settings)?;
            let target = t.target_quadrature.unwrap_or(t.target_energy.estimate);
            let mut csv = String::from(
                "n,energy_quantized,energy_minimized,bl_distance,diameter,diameter_minimized,target_energy\n",
            );
            for r in &t.rows {
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    r.n,
                    e16(r.energy_quantized),
                    opt16(r.energy_minimized),
                    e16(r.bl_distance),
                    e16(r.diameter),
                    opt16(r.diameter_minimized),
                    e16(target)
                )
                .unwrap();
            }
            out.write("trace.csv", &csv)?;
            out.json("trace.json", &t)?;
            if out.svg_enabled(dim) {
                let mut series = vec![(
                    "quantized",
                    t.rows
                        .iter()
                        .map(|r| (r.n as f64, r.energy_quantized))
                        .collect::<Vec<_>>(),
                )];
                if tb.with_minimization {
                    series.push((
                        "minimized",
                        t.rows
                            .iter()
                            .filter_map(|r| r.energy_minimized.map(|e| (r.n as f64, e)))
                            .collect(),
                    ));
                }
                series.push(("target", t.rows.iter().map(|r| (r.n as f64, target)).collect()));
                out.write(
                    "trace_energy.svg",
                    &svg::line_chart("energy along n", "n", "energy", &series),
                )?;
                let last = *n_list.last().unwrap();
                let cfg = quantize(&mu, last, &kernel, &l.config.quantize)?.configuration;
                out.scatter(
                    "trace_config.svg",
                    &cfg,
                    l.config.diagnose.gap_factor,
                    &format!("quantized, n = {last}"),
                )?;
            }
            for r in &t.rows {
                println!(
                    "n = {:>6}  E_q = {:.8}  E_min = {}  bl = {:.3e}",
                    r.n,
                    r.energy_quantized,
                    r.energy_minimized
                        .map(|e| format!("{e:.8}"))
                        .unwrap_or_else(|| "-".into()),
                    r.bl_distance
                );
            }
            println!("target energy = {target:.8}");
        }
        None => {
            let settings = l.minimize_settings(None)?;
            let t = energy_trace(&kernel, &n_list, &settings, tb.warm_start)?;
            let mut csv = String::from("n,energy,grad_norm,diameter\n");
            for r in &t.rows {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    r.n,
                    e16(r.energy),
                    e16(r.grad_norm),
                    e16(r.diameter)
                )
                .unwrap();
            }
            out.write("trace.csv", &csv)?;
            out.json("trace.json", &t)?;
            if out.svg_enabled(dim) {
                let series = [(
                    "minimized",
                    t.rows.iter().map(|r| (r.n as f64, r.energy)).collect(),
                )];
                out.write(
                    "trace_energy.svg",
                    &svg::line_chart("energy along n", "n", "energy", &series),
                )?;
            }
            for r in &t.rows {
                println!(
                    "n = {:>6}  E = {:.10}  diameter = {:.4}",
                    r.n, r.energy, r.diameter
                );
            }
            if t.outward_drift {
                println!("warning: diameters keep growing along n");
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseReport<'a> {
    input: &'a str,
    n: usize,
    dim: usize,
    energy: EnergyValue,
    el: ElReport,
    cluster: ClusterReport,
}

pub fn diagnose_cmd(l: &Loaded, input: Option<&Path>, out: &mut Output) -> CliResult<()> {
    let path = match (input, &l.config.configuration) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => l.resolve(p),
        (None, None) => {
            return Err(CliError::Usage(
                "no configuration file: pass one or set `configuration` in the config".into(),
            ))
        }
    };
    let cfg = riesz_core::io::read_configuration(&path)?;
    let kernel = l.kernel()?;
    if kernel.dim() != cfg.dim() {
        return Err(riesz_core::Error::DimensionMismatch {
            expected: kernel.dim(),
            found: cfg.dim(),
        }
        .into());
    }
    let el = el_residual(&cfg, &kernel, &l.config.probes)?;
    let cluster = cluster_classify(&cfg, l.config.diagnose.gap_factor)?;
    let labels = labels_of(&cluster, cfg.n());
    println!(
        "potential spread = {:.3e}, exterior min gap = {:.3e}",
        el.potential_spread, el.exterior_min_gap
    );
    println!(
        "classification = {:?}, clusters = {}, lambda = {:.4}",
        cluster.classification,
        cluster.clusters.len(),
        cluster.lambda
    );
    let report = DiagnoseReport {
        input: &path.display().to_string(),
        n: cfg.n(),
        dim: cfg.dim(),
        energy: discrete_energy(&cfg, &kernel)?,
        el,
        cluster,
    };
    out.json("diagnose.json", &report)?;
    if out.svg_enabled(cfg.dim()) {
        out.write("diagnose.svg", &svg::scatter(&cfg, &labels, "clusters"))?;
    }
    Ok(())
}
