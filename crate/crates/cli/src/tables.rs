//! CSV outputs: wide tables (one row per condition) and long tables for
//! plotting.

use std::path::Path;

use ampcmp::classify::CvResult;
use ampcmp::compare::ComparisonReport;

use crate::error::CliError;

/// `condition,amplifier,1..R,mean,sd`, one row per (pipeline, amplifier).
pub fn write_auroc_table(path: &Path, rows: &[(&str, &str, &CvResult)]) -> Result<(), CliError> {
    let repeats = rows.iter().map(|r| r.2.repeats()).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["condition".to_string(), "amplifier".to_string()];
    header.extend((1..=repeats).map(|i| i.to_string()));
    header.extend(["mean".to_string(), "sd".to_string()]);
    w.write_record(&header)?;
    for (condition, amplifier, cv) in rows {
        let mut rec = vec![condition.to_string(), amplifier.to_string()];
        rec.extend(cv.per_repeat_auroc.iter().map(|v| v.to_string()));
        rec.extend(std::iter::repeat_n(String::new(), repeats - cv.repeats()));
        rec.extend([cv.mean().to_string(), cv.sd().to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `condition,<channel>...,mean,sd`: the ERP row for the P300 task, one row
/// per condition for the workload task. Zero-variance channels stay empty.
pub fn write_correlation_table(path: &Path, report: &ComparisonReport) -> Result<(), CliError> {
    let labels = &report.traces.channel_labels;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["condition".to_string()];
    header.extend(labels.iter().cloned());
    header.extend(["mean".to_string(), "sd".to_string()]);
    w.write_record(&header)?;
    let rows = report
        .erp
        .iter()
        .map(|c| ("erp", c))
        .chain(report.spectra.iter().map(|(k, c)| (k.as_str(), c)));
    for (condition, corr) in rows {
        let mut rec = vec![condition.to_string()];
        rec.extend(labels.iter().map(|l| corr.r.get(l).map(|r| r.to_string()).unwrap_or_default()));
        rec.extend([corr.mean.to_string(), corr.sd.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `channel,time_s,amplifier,value_uv` for the aligned ERP averages.
pub fn write_erp_long(path: &Path, report: &ComparisonReport, names: [&str; 2]) -> Result<(), CliError> {
    let Some(erp) = &report.traces.erp else {
        return Ok(());
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["channel", "time_s", "amplifier", "value_uv"])?;
    for (c, label) in report.traces.channel_labels.iter().enumerate() {
        for (name, m) in [(names[0], &erp.amp_a), (names[1], &erp.amp_b)] {
            for (t, v) in report.traces.erp_times_s.iter().zip(m.row(c)) {
                w.write_record([label.as_str(), &t.to_string(), name, &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `condition,channel,freq_hz,amplifier,power_db`.
pub fn write_spectra_long(path: &Path, report: &ComparisonReport, names: [&str; 2]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition", "channel", "freq_hz", "amplifier", "power_db"])?;
    for (condition, pair) in &report.traces.spectra {
        for (c, label) in report.traces.channel_labels.iter().enumerate() {
            for (name, m) in [(names[0], &pair.amp_a), (names[1], &pair.amp_b)] {
                for (f, v) in report.traces.freqs_hz.iter().zip(m.row(c)) {
                    w.write_record([condition.as_str(), label.as_str(), &f.to_string(), name, &v.to_string()])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
