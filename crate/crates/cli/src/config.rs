use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ampcmp::classify::Shrinkage;
use ampcmp::compare::Task;
use ampcmp::pipeline::{BandSet, P300Params, WorkloadParams};
use ampcmp::synth::{AmpConfig, NbackConfig, OddballConfig, Polarity};
use ampcmp::EventCode;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TaskArg {
    P300,
    Workload,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::P300 => Task::P300,
            TaskArg::Workload => Task::Workload,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub max_lag_s: f64,
    pub classify: bool,
    pub long_csv: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            max_lag_s: 0.5,
            classify: true,
            long_csv: false,
        }
    }
}

/// Everything a run needs. Loaded from `--config` when given, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<TaskArg>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub bundles: Vec<PathBuf>,
    pub gdf: Vec<PathBuf>,
    /// GDF event type → event code; required for GDF input.
    pub event_map: BTreeMap<u16, EventCode>,
    pub features: Option<PathBuf>,
    pub generate: bool,
    pub oddball: OddballConfig,
    pub nback: NbackConfig,
    pub amp_a: AmpConfig,
    pub amp_b: AmpConfig,
    pub p300: P300Params,
    pub workload: WorkloadParams,
    pub compare: CompareOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: None,
            seed: 0,
            out: None,
            bundles: Vec::new(),
            gdf: Vec::new(),
            event_map: BTreeMap::new(),
            features: None,
            generate: false,
            oddball: OddballConfig::default(),
            nback: NbackConfig::default(),
            amp_a: AmpConfig::reference(),
            amp_b: AmpConfig::consumer(),
            p300: P300Params::default(),
            workload: WorkloadParams::default(),
            compare: CompareOptions::default(),
        }
    }
}

/// Where the recordings of a run come from.
pub enum Input<'a> {
    Bundles(&'a [PathBuf]),
    Gdf(&'a [PathBuf]),
    Features(&'a Path),
    Generate,
}

impl RunConfig {
    pub fn task(&self) -> Result<TaskArg, CliError> {
        self.task.ok_or_else(|| CliError::Config("--task is required".into()))
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Config("--out is required".into()))
    }

    /// The single configured input source.
    pub fn input(&self) -> Result<Input<'_>, CliError> {
        let mut found = Vec::new();
        if !self.bundles.is_empty() {
            found.push(Input::Bundles(&self.bundles));
        }
        if !self.gdf.is_empty() {
            found.push(Input::Gdf(&self.gdf));
        }
        if let Some(f) = &self.features {
            found.push(Input::Features(f));
        }
        if self.generate {
            found.push(Input::Generate);
        }
        match found.len() {
            1 => Ok(found.pop().expect("one input")),
            0 => Err(CliError::Config(
                "no input: give --bundle, --gdf, --features or --generate".into(),
            )),
            _ => Err(CliError::Config("give exactly one kind of input".into())),
        }
    }

    pub fn has_input(&self) -> bool {
        !self.bundles.is_empty() || !self.gdf.is_empty() || self.features.is_some() || self.generate
    }
}

fn parse_polarity(s: &str) -> Result<Polarity, String> {
    match s {
        "1" | "+1" | "normal" => Ok(Polarity::Normal),
        "-1" | "inverted" => Ok(Polarity::Inverted),
        _ => Err(format!("polarity must be 1 or -1, got {s:?}")),
    }
}

fn parse_shrinkage(s: &str) -> Result<Shrinkage, String> {
    if s == "auto" {
        return Ok(Shrinkage::Auto);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| (0.0..=1.0).contains(v))
        .map(Shrinkage::Fixed)
        .ok_or_else(|| format!("shrinkage must be \"auto\" or a number in [0, 1], got {s:?}"))
}

fn parse_bands(s: &str) -> Result<BandSet, String> {
    match s {
        "5" | "five" => Ok(BandSet::Five),
        "3" | "three" => Ok(BandSet::Three),
        _ => Err(format!("bands must be 3 or 5, got {s:?}")),
    }
}

/// `768=target,0x301=distractor`.
pub fn parse_event_map(s: &str) -> Result<BTreeMap<u16, EventCode>, String> {
    let mut map = BTreeMap::new();
    for item in s.split(',').filter(|i| !i.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| format!("event map entry {item:?} is not TYPE=CODE"))?;
        let k = k.trim();
        let typ = match k.strip_prefix("0x").or_else(|| k.strip_prefix("0X")) {
            Some(hex) => u16::from_str_radix(hex, 16),
            None => k.parse(),
        }
        .map_err(|_| format!("bad GDF event type {k:?}"))?;
        let code = EventCode::from_name(v.trim()).ok_or_else(|| format!("unknown event code {v:?}"))?;
        map.insert(typ, code);
    }
    Ok(map)
}

/// Flags shared by every command. Dotted names address nested config
/// fields.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Recording bundle directory (repeatable).
    #[arg(long = "bundle")]
    pub bundles: Vec<PathBuf>,
    /// GDF file (repeatable).
    #[arg(long)]
    pub gdf: Vec<PathBuf>,
    /// GDF event types, e.g. `768=target,769=distractor`.
    #[arg(long, value_parser = parse_event_map)]
    pub event_map: Option<BTreeMap<u16, EventCode>>,
    /// Feature table (CSV with a `label` column of 0/1).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Generate the session in memory instead of reading files.
    #[arg(long)]
    pub generate: bool,

    #[arg(long = "oddball.n-letters")]
    pub oddball_n_letters: Option<usize>,
    #[arg(long = "oddball.erp-uv")]
    pub oddball_erp_uv: Option<f64>,
    #[arg(long = "oddball.noise-uv")]
    pub oddball_noise_uv: Option<f64>,
    #[arg(long = "nback.n-trials")]
    pub nback_n_trials: Option<usize>,
    #[arg(long = "nback.alpha-ratio")]
    pub nback_alpha_ratio: Option<f64>,
    #[arg(long = "nback.noise-uv")]
    pub nback_noise_uv: Option<f64>,

    #[arg(long = "amp-a.rate")]
    pub amp_a_rate: Option<f64>,
    #[arg(long = "amp-a.lag-ms")]
    pub amp_a_lag_ms: Option<f64>,
    #[arg(long = "amp-a.noise-uv")]
    pub amp_a_noise_uv: Option<f64>,
    #[arg(long = "amp-a.polarity", value_parser = parse_polarity, allow_hyphen_values = true)]
    pub amp_a_polarity: Option<Polarity>,
    #[arg(long = "amp-b.rate")]
    pub amp_b_rate: Option<f64>,
    #[arg(long = "amp-b.lag-ms")]
    pub amp_b_lag_ms: Option<f64>,
    #[arg(long = "amp-b.noise-uv")]
    pub amp_b_noise_uv: Option<f64>,
    #[arg(long = "amp-b.polarity", value_parser = parse_polarity, allow_hyphen_values = true)]
    pub amp_b_polarity: Option<Polarity>,

    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Workload band set: 3 (δ θ α) or 5 (δ θ α β γ).
    #[arg(long, value_parser = parse_bands)]
    pub bands: Option<BandSet>,
    #[arg(long = "p300.filters")]
    pub p300_filters: Option<usize>,
    #[arg(long = "workload.filters")]
    pub workload_filters: Option<usize>,
    /// `auto` (Ledoit-Wolf) or a fixed value in [0, 1].
    #[arg(long, value_parser = parse_shrinkage)]
    pub shrinkage: Option<Shrinkage>,

    #[arg(long = "max-lag-ms")]
    pub max_lag_ms: Option<f64>,
    /// Skip the classification part of `compare`.
    #[arg(long)]
    pub no_classify: bool,
    /// Also write plot-ready long-format CSVs from `compare`.
    #[arg(long)]
    pub long_csv: bool,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if self.task.is_some() {
            cfg.task = self.task;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if !self.bundles.is_empty() {
            cfg.bundles = self.bundles.clone();
        }
        if !self.gdf.is_empty() {
            cfg.gdf = self.gdf.clone();
        }
        set(&mut cfg.event_map, self.event_map.clone());
        if self.features.is_some() {
            cfg.features = self.features.clone();
        }
        cfg.generate |= self.generate;

        set(&mut cfg.oddball.n_letters, self.oddball_n_letters);
        set(&mut cfg.oddball.erp_amplitude_uv, self.oddball_erp_uv);
        set(&mut cfg.oddball.background_noise_uv, self.oddball_noise_uv);
        set(&mut cfg.nback.n_trials, self.nback_n_trials);
        set(&mut cfg.nback.alpha_suppression_ratio, self.nback_alpha_ratio);
        set(&mut cfg.nback.background_noise_uv, self.nback_noise_uv);
        cfg.oddball.seed = cfg.seed;
        cfg.nback.seed = cfg.seed;

        for (amp, rate, lag_ms, noise, pol) in [
            (&mut cfg.amp_a, self.amp_a_rate, self.amp_a_lag_ms, self.amp_a_noise_uv, self.amp_a_polarity),
            (&mut cfg.amp_b, self.amp_b_rate, self.amp_b_lag_ms, self.amp_b_noise_uv, self.amp_b_polarity),
        ] {
            set(&mut amp.sample_rate_hz, rate);
            set(&mut amp.lag_s, lag_ms.map(|ms| ms / 1000.0));
            set(&mut amp.noise_std_uv, noise);
            set(&mut amp.polarity, pol);
        }

        for folds in [&mut cfg.p300.folds, &mut cfg.workload.folds] {
            set(folds, self.folds);
        }
        for repeats in [&mut cfg.p300.repeats, &mut cfg.workload.repeats] {
            set(repeats, self.repeats);
        }
        set(&mut cfg.workload.bands, self.bands);
        set(&mut cfg.p300.n_filters, self.p300_filters);
        set(&mut cfg.workload.n_filters, self.workload_filters);
        set(&mut cfg.p300.shrinkage, self.shrinkage);
        set(&mut cfg.compare.max_lag_s, self.max_lag_ms.map(|ms| ms / 1000.0));
        if self.no_classify {
            cfg.compare.classify = false;
        }
        cfg.compare.long_csv |= self.long_csv;
        Ok(cfg)
    }
}
