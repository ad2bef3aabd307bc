//! Experiment config files (TOML).
//!
//! Relative paths inside a config file resolve against the file's
//! directory. The top-level `seed` (or `--seed`) is copied into every
//! block that does not set its own; `--seed` overrides them all.

use std::path::{Path, PathBuf};

use riesz_core::diagnostics::{BlScheme, ProbeScheme};
use riesz_core::kernel::AssumptionScheme;
use riesz_core::minimizer::{Init, MinimizeSettings, RepairSettings, StepRule};
use riesz_core::quantizer::QuantizeSettings;
use riesz_core::{Kernel, KernelConfig, MeasureConfig, TargetMeasure};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 0;
const DEFAULT_OUT: &str = "riesz-out";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Gaussian,
    /// Quantization of the `[measure]` block.
    Quantizer,
    /// Configuration CSV at `init_path`.
    File,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeBlock {
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init: InitKind,
    pub init_scale: f64,
    pub init_path: Option<PathBuf>,
    pub step_rule: StepRule,
    pub repair: RepairSettings,
    pub seed: u64,
}

impl Default for MinimizeBlock {
    fn default() -> Self {
        let d = MinimizeSettings::default();
        Self {
            restarts: d.restarts,
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            init: InitKind::Gaussian,
            init_scale: 1.0,
            init_path: None,
            step_rule: d.step_rule,
            repair: d.repair,
            seed: d.seed,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceBlock {
    /// Also minimize at each `n` (needs `[measure]`).
    pub with_minimization: bool,
    /// Without `[measure]`: start each `n` from the previous minimizer.
    pub warm_start: bool,
    /// Pair count for the Monte-Carlo target energy.
    pub target_samples: usize,
    pub seed: u64,
}

impl Default for TraceBlock {
    fn default() -> Self {
        Self {
            with_minimization: false,
            warm_start: false,
            target_samples: 1_000_000,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseBlock {
    /// Single-linkage threshold in units of the median nearest-neighbour
    /// distance.
    pub gap_factor: f64,
}

impl Default for DiagnoseBlock {
    fn default() -> Self {
        Self { gap_factor: 3.0 }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    /// Configuration CSV for `diagnose`.
    pub configuration: Option<PathBuf>,
    pub kernel: Option<KernelConfig>,
    pub measure: Option<MeasureConfig>,
    /// Witness measure for the negative-energy check.
    pub witness: Option<MeasureConfig>,
    #[serde(default)]
    pub assumptions: AssumptionScheme,
    #[serde(default)]
    pub quantize: QuantizeSettings,
    #[serde(default)]
    pub minimize: MinimizeBlock,
    #[serde(default)]
    pub bl: BlScheme,
    #[serde(default)]
    pub probes: ProbeScheme,
    #[serde(default)]
    pub trace: TraceBlock,
    #[serde(default)]
    pub diagnose: DiagnoseBlock,
}

const SEEDED_BLOCKS: [&str; 6] = ["assumptions", "quantize", "minimize", "bl", "probes", "trace"];

#[derive(Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.config.out) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.resolve(p),
            (None, None) => PathBuf::from(DEFAULT_OUT),
        }
    }

    pub fn kernel(&self) -> CliResult<Kernel> {
        let k = self
            .config
            .kernel
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no [kernel] block".into()))?;
        Ok(Kernel::from_config(k, self.base_dir.as_deref())?)
    }

    pub fn measure(&self) -> CliResult<Option<TargetMeasure>> {
        self.config
            .measure
            .as_ref()
            .map(|m| TargetMeasure::from_config(m, self.base_dir.as_deref()))
            .transpose()
            .map_err(CliError::from)
    }

    pub fn require_measure(&self) -> CliResult<TargetMeasure> {
        self.measure()?
            .ok_or_else(|| CliError::Usage("config has no [measure] block".into()))
    }

    pub fn n(&self, flag: Option<usize>) -> CliResult<usize> {
        match flag.or(self.config.n) {
            Some(0) => Err(CliError::Usage("n must be positive".into())),
            Some(n) => Ok(n),
            None => Err(CliError::Usage(
                "no point count: set `n` in the config or pass --n".into(),
            )),
        }
    }

    pub fn n_list(&self, flag: Option<Vec<usize>>) -> CliResult<Vec<usize>> {
        let list = flag
            .or_else(|| self.config.n_list.clone())
            .ok_or_else(|| CliError::Usage("no `n_list` in the config and no --n-list".into()))?;
        if list.is_empty() {
            return Err(CliError::Usage("n_list is empty".into()));
        }
        if list.contains(&0) || list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage(
                "n_list must be positive and strictly increasing".into(),
            ));
        }
        Ok(list)
    }

    pub fn minimize_settings(&self, measure: Option<&TargetMeasure>) -> CliResult<MinimizeSettings> {
        let b = &self.config.minimize;
        let init = match b.init {
            InitKind::Gaussian => Init::RandomGaussian { scale: b.init_scale },
            InitKind::Quantizer => Init::QuantizerSeeded {
                measure: measure
                    .cloned()
                    .ok_or_else(|| CliError::Usage("init = \"quantizer\" needs a [measure] block".into()))?,
                settings: self.config.quantize.clone(),
            },
            InitKind::File => {
                let p = b
                    .init_path
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("init = \"file\" needs init_path".into()))?;
                Init::User(riesz_core::io::read_configuration(&self.resolve(p))?)
            }
        };
        let s = MinimizeSettings {
            restarts: b.restarts,
            max_iters: b.max_iters,
            grad_tol: b.grad_tol,
            init,
            step_rule: b.step_rule.clone(),
            repair: b.repair.clone(),
            seed: b.seed,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Reads `path` (or starts from an empty config) and applies the seed rule.
pub fn load(path: Option<&Path>, seed_flag: Option<u64>) -> CliResult<Loaded> {
    let (table, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(CliError::io(p))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Usage(format!("{}: {e}", p.display())))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (table, Some(dir))
        }
        None => (toml::Table::new(), None),
    };
    let own_seed: Vec<&str> = SEEDED_BLOCKS
        .into_iter()
        .filter(|b| {
            table
                .get(*b)
                .and_then(|v| v.as_table())
                .is_some_and(|t| t.contains_key("seed"))
        })
        .collect();
    let label = path.map(|p| p.display().to_string()).unwrap_or_default();
    let mut config: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("{label}: {e}")))?;
    let seed = seed_flag.or(config.seed).unwrap_or(DEFAULT_SEED);
    let set = |block: &str| seed_flag.is_some() || !own_seed.contains(&block);
    if set("assumptions") {
        config.assumptions.seed = seed;
    }
    if set("quantize") {
        config.quantize.seed = seed;
    }
    if set("minimize") {
        config.minimize.seed = seed;
    }
    if set("bl") {
        config.bl.seed = seed;
    }
    if set("probes") {
        config.probes.seed = seed;
    }
    if set("trace") {
        config.trace.seed = seed;
    }
    Ok(Loaded {
        config,
        base_dir,
        seed,
    })
}
