use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ampcmp::classify::{crossval_auroc, wilcoxon_signed_rank, CvResult, WilcoxonResult};
use ampcmp::compare::{compare_session, CompareConfig, ComparisonReport};
use ampcmp::gdf_io::{read_bundle, read_gdf, write_bundle};
use ampcmp::pipeline::{p300_crossval_epochs, p300_epochs, workload_crossval, workload_feature_count};
use ampcmp::synth::{
    amp_seed, generate_nback_session, generate_oddball_session, render_pair, AmpConfig, Polarity, SOURCE_RATE_HZ,
};
use ampcmp::{EventCode, EventList, Recording};
use log::info;
use ndarray::Array2;
use serde::Serialize;

use crate::config::{Input, RunConfig, TaskArg};
use crate::error::CliError;
use crate::tables;

pub struct Session {
    pub name: String,
    pub recording: Recording,
    pub events: EventList,
}

fn generate(cfg: &RunConfig, task: TaskArg) -> Result<(Recording, EventList), CliError> {
    Ok(match task {
        TaskArg::P300 => generate_oddball_session(&cfg.oddball)?,
        TaskArg::Workload => generate_nback_session(&cfg.nback)?,
    })
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_sessions(cfg: &RunConfig, task: TaskArg) -> Result<Vec<Session>, CliError> {
    match cfg.input()? {
        Input::Bundles(dirs) => dirs
            .iter()
            .map(|d| {
                let (recording, events) = read_bundle(d)?;
                Ok(Session {
                    name: dir_name(d),
                    recording,
                    events,
                })
            })
            .collect(),
        Input::Gdf(files) => {
            if cfg.event_map.is_empty() {
                return Err(CliError::Config("GDF input needs --event-map".into()));
            }
            files
                .iter()
                .map(|f| {
                    let file = read_gdf(f, &cfg.event_map)?;
                    Ok(Session {
                        name: f
                            .file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_default(),
                        recording: file.recording,
                        events: file.events,
                    })
                })
                .collect()
        }
        Input::Generate => {
            let (source, events) = generate(cfg, task)?;
            let (a, b) = render_pair(&source, &cfg.amp_a, &cfg.amp_b, cfg.seed)?;
            Ok(vec![
                Session {
                    name: "amp_a".into(),
                    recording: a,
                    events: events.clone(),
                },
                Session {
                    name: "amp_b".into(),
                    recording: b,
                    events,
                },
            ])
        }
        Input::Features(_) => Err(CliError::Config("--features is only accepted by classify".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct AmpManifest {
    bundle: String,
    config: AmpConfig,
    noise_seed: u64,
    /// Lag in output samples.
    lag_samples: i64,
    polarity: Polarity,
    noise_std_uv: f64,
    n_samples: usize,
}

#[derive(Serialize)]
struct ExpectedComparison {
    /// Lag of B behind A at the lower of the two rates.
    lag_samples: i64,
    polarity: Polarity,
}

#[derive(Serialize)]
struct Manifest<'a> {
    task: TaskArg,
    seed: u64,
    source_rate_hz: f64,
    n_events: usize,
    event_counts: BTreeMap<EventCode, usize>,
    generator: serde_json::Value,
    amplifiers: BTreeMap<&'a str, AmpManifest>,
    expected_comparison: ExpectedComparison,
}

fn event_counts(events: &EventList) -> BTreeMap<EventCode, usize> {
    let mut counts = BTreeMap::new();
    for e in events.iter() {
        *counts.entry(e.code).or_insert(0) += 1;
    }
    counts
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let task = cfg.task()?;
    let out = cfg.out()?;
    if cfg.has_input() && !cfg.generate {
        return Err(CliError::Config("simulate takes no input files".into()));
    }
    let (source, events) = generate(cfg, task)?;
    info!("generated {} events, {:.1} s", events.len(), source.duration_s());
    let (a, b) = render_pair(&source, &cfg.amp_a, &cfg.amp_b, cfg.seed)?;

    let mut amplifiers = BTreeMap::new();
    for (i, (name, amp, rec)) in [("amp_a", &cfg.amp_a, &a), ("amp_b", &cfg.amp_b, &b)].into_iter().enumerate() {
        write_bundle(&out.join(name), rec, &events)?;
        amplifiers.insert(
            name,
            AmpManifest {
                bundle: name.into(),
                config: amp.clone(),
                noise_seed: amp_seed(cfg.seed, i as u64),
                lag_samples: (amp.lag_s * amp.sample_rate_hz).round() as i64,
                polarity: amp.polarity,
                noise_std_uv: amp.noise_std_uv,
                n_samples: rec.n_samples(),
            },
        );
    }
    let rate = cfg.amp_a.sample_rate_hz.min(cfg.amp_b.sample_rate_hz);
    let same = cfg.amp_a.polarity == cfg.amp_b.polarity;
    let generator = match task {
        TaskArg::P300 => serde_json::to_value(&cfg.oddball)?,
        TaskArg::Workload => serde_json::to_value(&cfg.nback)?,
    };
    let manifest = Manifest {
        task,
        seed: cfg.seed,
        source_rate_hz: SOURCE_RATE_HZ,
        n_events: events.len(),
        event_counts: event_counts(&events),
        generator,
        amplifiers,
        expected_comparison: ExpectedComparison {
            lag_samples: ((cfg.amp_b.lag_s - cfg.amp_a.lag_s) * rate).round() as i64,
            polarity: if same { Polarity::Normal } else { Polarity::Inverted },
        },
    };
    write_json(&out.join("manifest.json"), &manifest)
}

#[derive(Serialize)]
struct AmpResult {
    name: String,
    mean: f64,
    sd: f64,
    cv: CvResult,
}

#[derive(Serialize)]
struct ClassifyOutput {
    pipeline: String,
    feature_count: usize,
    folds: usize,
    repeats: usize,
    seed: u64,
    amplifiers: Vec<AmpResult>,
    /// Paired over repeats, first input minus second; only for two inputs.
    wilcoxon: Option<WilcoxonResult>,
}

/// Reads a feature table: one row per trial, a `label` column holding 0/1
/// (or false/true), every other column a feature.
pub fn read_feature_table(path: &Path) -> Result<(Array2<f64>, Vec<bool>), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.is_io_error() {
        true => CliError::Io(format!("{}: {e}", path.display())),
        false => CliError::Data(e.to_string()),
    })?;
    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| CliError::Data("feature table has no label column".into()))?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            let field = field.trim();
            if col == label_col {
                labels.push(match field {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => return Err(CliError::Data(format!("row {}: bad label {other:?}", row + 1))),
                });
            } else {
                let v: f64 = field
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| CliError::Data(format!("row {}: bad value {field:?}", row + 1)))?;
                values.push(v);
            }
        }
    }
    let n_features = headers.len() - 1;
    let x = Array2::from_shape_vec((labels.len(), n_features), values)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok((x, labels))
}

pub fn classify(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out()?;
    let seed = cfg.seed;
    let (pipeline, feature_count, folds, repeats, results) = if let Input::Features(path) = cfg.input()? {
        let (x, labels) = read_feature_table(path)?;
        let cv = crossval_auroc(x.view(), &labels, cfg.p300.folds, cfg.p300.repeats, seed)?;
        (
            "features".to_string(),
            x.ncols(),
            cfg.p300.folds,
            cfg.p300.repeats,
            vec![(dir_name(path), cv)],
        )
    } else {
        let task = cfg.task()?;
        let sessions = load_sessions(cfg, task)?;
        let mut results = Vec::new();
        let mut feature_count = 0;
        for s in &sessions {
            info!("classifying {}", s.name);
            let cv = match task {
                TaskArg::P300 => {
                    let epochs = p300_epochs(&s.recording, &s.events, &cfg.p300)?;
                    feature_count = cfg.p300.n_filters * epochs.n_samples();
                    p300_crossval_epochs(&epochs, &cfg.p300, seed)?
                }
                TaskArg::Workload => {
                    feature_count = workload_feature_count(&cfg.workload);
                    workload_crossval(&s.recording, &s.events, &cfg.workload, seed)?
                }
            };
            results.push((s.name.clone(), cv));
        }
        let (name, folds, repeats) = match task {
            TaskArg::P300 => ("p300", cfg.p300.folds, cfg.p300.repeats),
            TaskArg::Workload => (cfg.workload.bands.name(), cfg.workload.folds, cfg.workload.repeats),
        };
        (name.to_string(), feature_count, folds, repeats, results)
    };

    fs::create_dir_all(out)?;
    let rows: Vec<(&str, &str, &CvResult)> = results
        .iter()
        .map(|(name, cv)| (pipeline.as_str(), name.as_str(), cv))
        .collect();
    tables::write_auroc_table(&out.join("auroc.csv"), &rows)?;
    let wilcoxon = match results.as_slice() {
        [(_, a), (_, b)] => Some(wilcoxon_signed_rank(
            &a.per_repeat_auroc
                .iter()
                .copied()
                .zip(b.per_repeat_auroc.iter().copied())
                .collect::<Vec<_>>(),
        )),
        _ => None,
    };
    let output = ClassifyOutput {
        pipeline,
        feature_count,
        folds,
        repeats,
        seed,
        amplifiers: results
            .into_iter()
            .map(|(name, cv)| AmpResult {
                name,
                mean: cv.mean(),
                sd: cv.sd(),
                cv,
            })
            .collect(),
        wilcoxon,
    };
    write_json(&out.join("classify.json"), &output)
}

pub fn compare(cfg: &RunConfig) -> Result<ComparisonReport, CliError> {
    let task = cfg.task()?;
    let out = cfg.out()?;
    let sessions = load_sessions(cfg, task)?;
    let [a, b] = sessions.as_slice() else {
        return Err(CliError::Config(format!("compare needs two recordings, got {}", sessions.len())));
    };
    if a.events != b.events {
        return Err(CliError::Data(format!(
            "sessions are not comparable: {} and {} carry different events",
            a.name, b.name
        )));
    }
    let compare_cfg = CompareConfig {
        max_lag_s: cfg.compare.max_lag_s,
        classify: cfg.compare.classify,
        cv_seed: cfg.seed,
        p300: cfg.p300.clone(),
        workload: cfg.workload.clone(),
        ..CompareConfig::default()
    };
    let report = compare_session(&a.recording, &b.recording, &a.events, task.into(), &compare_cfg)?;

    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &report)?;
    let names = [a.name.as_str(), b.name.as_str()];
    tables::write_correlation_table(&out.join("correlations.csv"), &report)?;
    if !report.classification.is_empty() {
        let mut rows = Vec::new();
        for (pipeline, pc) in &report.classification {
            rows.push((pipeline.as_str(), names[0], &pc.cv.amp_a));
            rows.push((pipeline.as_str(), names[1], &pc.cv.amp_b));
        }
        tables::write_auroc_table(&out.join("auroc.csv"), &rows)?;
    }
    if cfg.compare.long_csv {
        if report.traces.erp.is_some() {
            tables::write_erp_long(&out.join("erp_long.csv"), &report, names)?;
        }
        if !report.traces.spectra.is_empty() {
            tables::write_spectra_long(&out.join("spectra_long.csv"), &report, names)?;
        }
    }
    Ok(report)
}

#[derive(Serialize)]
struct InspectOutput {
    path: PathBuf,
    format: &'static str,
    sample_rate_hz: f64,
    channel_labels: Vec<String>,
    n_samples: usize,
    duration_s: f64,
    n_events: usize,
    event_counts: BTreeMap<EventCode, usize>,
    unmapped_events: usize,
}

pub fn inspect(path: &Path, event_map: &BTreeMap<u16, EventCode>, out: Option<&Path>) -> Result<String, CliError> {
    let (format, rec, events, unmapped) = if path.is_dir() {
        let (rec, events) = read_bundle(path)?;
        ("bundle", rec, events, 0)
    } else {
        let f = read_gdf(path, event_map)?;
        ("gdf", f.recording, f.events, f.unmapped_events)
    };
    let summary = InspectOutput {
        path: path.to_path_buf(),
        format,
        sample_rate_hz: rec.sample_rate_hz(),
        channel_labels: rec.channel_labels().to_vec(),
        n_samples: rec.n_samples(),
        duration_s: rec.duration_s(),
        n_events: events.len(),
        event_counts: event_counts(&events),
        unmapped_events: unmapped,
    };
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("inspect.json"), &text)?;
    }
    Ok(text)
}
