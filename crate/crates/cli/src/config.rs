//! Run configuration, read from a JSON file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every section except `feeder` has defaults.

use std::path::{Path, PathBuf};

use gridshare_core::billing::{Tariff, TariffRates};
use gridshare_core::percolation::{evenly_spaced, ClusterStatistic, Normalization, PercolationConfig};
use gridshare_core::profiles::{GeneratorParams, PeriodSpec};
use serde::{Deserialize, Serialize};

use crate::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Feeds the profile generator and every percolation run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub input: InputSource,
    #[serde(default)]
    pub period: PeriodSection,
    #[serde(default)]
    pub tariff: TariffRates,
    #[serde(default)]
    pub correlation: CorrelationSection,
    #[serde(default)]
    pub percolation: PercolationSection,
    pub feeder: FeederSection,
    /// `auto` picks the block with the highest threshold; otherwise a block
    /// label such as `MG-3`.
    #[serde(default = "default_selected")]
    pub selected_microgrid: String,
    #[serde(default)]
    pub savings_denominator: SavingsDenominator,
    #[serde(default)]
    pub include_amortization: bool,
    #[serde(default)]
    pub grid_series: GridSeries,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_selected() -> String {
    "auto".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    Synthetic {
        n_houses: usize,
        days: usize,
        #[serde(default)]
        params: GeneratorParams,
    },
    Csv {
        intervals: PathBuf,
        assets: PathBuf,
    },
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Synthetic {
            n_houses: 340,
            days: 365,
            params: GeneratorParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodSection {
    pub peak_start_hour: u8,
    pub peak_end_hour: u8,
}

impl Default for PeriodSection {
    fn default() -> Self {
        Self {
            peak_start_hour: 8,
            peak_end_hour: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSection {
    pub threshold: f64,
    pub abs_correlation: bool,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        Self {
            threshold: 0.7,
            abs_correlation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PercolationSection {
    pub realizations: usize,
    pub grid_points: usize,
    pub normalization: Normalization,
    pub cluster_statistic: ClusterStatistic,
}

impl Default for PercolationSection {
    fn default() -> Self {
        Self {
            realizations: 200,
            grid_points: 41,
            normalization: Normalization::Standard,
            cluster_statistic: ClusterStatistic::Largest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederSection {
    pub asset_dir: PathBuf,
    #[serde(default = "default_switch_config")]
    pub switch_config: String,
    /// When set, `partition` also enumerates up to this many distinct
    /// partitions over all switch states.
    #[serde(default)]
    pub enumerate: Option<usize>,
    /// When set with `enumerate`, marks enumerated partitions whose every
    /// block generates at least this fraction of its yearly consumption.
    #[serde(default)]
    pub self_sufficiency_fraction: Option<f64>,
}

fn default_switch_config() -> String {
    "default".into()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SavingsDenominator {
    #[default]
    WithoutSharing,
    WithoutDer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSeries {
    /// Two points per day: peak and off-peak.
    #[default]
    Period,
    /// One point per day.
    Daily,
}

impl RunConfig {
    /// Reads, resolves and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ValidationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ValidationError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        join(&mut self.feeder.asset_dir);
        if let InputSource::Csv { intervals, assets } = &mut self.input {
            join(intervals);
            join(assets);
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.tariff()?;
        self.period_spec()?;
        self.percolation_config()?;
        let c = self.correlation.threshold;
        if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
            return Err(ValidationError(format!("correlation.threshold must lie in [0, 1], got {c}")));
        }
        if !self.feeder.asset_dir.is_dir() {
            return Err(ValidationError(format!(
                "feeder asset directory {} does not exist",
                self.feeder.asset_dir.display()
            )));
        }
        if let Some(f) = self.feeder.self_sufficiency_fraction {
            if !(f.is_finite() && f >= 0.0) {
                return Err(ValidationError(format!("self_sufficiency_fraction must be non-negative, got {f}")));
            }
        }
        match &self.input {
            InputSource::Synthetic { n_houses, days, params } => {
                if *n_houses == 0 || *days == 0 {
                    return Err(ValidationError("synthetic input needs n_houses >= 1 and days >= 1".into()));
                }
                params.validate().map_err(|e| ValidationError(e.to_string()))?;
            }
            InputSource::Csv { intervals, assets } => {
                for p in [intervals, assets] {
                    if !p.is_file() {
                        return Err(ValidationError(format!("input file {} does not exist", p.display())));
                    }
                }
            }
        }
        let sel = &self.selected_microgrid;
        let valid_label = sel
            .strip_prefix("MG-")
            .and_then(|n| n.parse::<usize>().ok())
            .is_some_and(|n| n >= 1);
        if sel != "auto" && !valid_label {
            return Err(ValidationError(format!(
                "selected_microgrid must be \"auto\" or a label like \"MG-3\", got {sel:?}"
            )));
        }
        Ok(())
    }

    pub fn tariff(&self) -> Result<Tariff, ValidationError> {
        Tariff::try_from(self.tariff.clone()).map_err(|e| ValidationError(format!("tariff: {e}")))
    }

    pub fn period_spec(&self) -> Result<PeriodSpec, ValidationError> {
        PeriodSpec::new(self.period.peak_start_hour, self.period.peak_end_hour)
            .map_err(|e| ValidationError(e.to_string()))
    }

    pub fn percolation_config(&self) -> Result<PercolationConfig, ValidationError> {
        let p = &self.percolation;
        if p.grid_points < 3 {
            return Err(ValidationError("percolation.grid_points must be at least 3".into()));
        }
        let cfg = PercolationConfig {
            realizations: p.realizations,
            p_grid: evenly_spaced(p.grid_points),
            seed: self.seed,
            normalization: p.normalization,
            cluster_statistic: p.cluster_statistic,
        };
        cfg.validate().map_err(|e| ValidationError(e.to_string()))?;
        Ok(cfg)
    }
}
