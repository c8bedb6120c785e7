//! Event-locked epoching and overlap pruning.

use ndarray::{s, Array3, Axis};

use super::DspError;
use crate::recording::{EventCode, EventList, Recording};

/// Trials × channels × samples, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    data: Array3<f64>,
    labels: Vec<EventCode>,
    start_samples: Vec<usize>,
    t0_s: f64,
    sample_rate_hz: f64,
    channel_labels: Vec<String>,
    dropped: usize,
}

impl EpochSet {
    /// Builds an epoch set directly. `start_samples` holds each trial's first
    /// sample index in the source recording.
    pub fn new(
        data: Array3<f64>,
        labels: Vec<EventCode>,
        start_samples: Vec<usize>,
        t0_s: f64,
        sample_rate_hz: f64,
        channel_labels: Vec<String>,
    ) -> Result<Self, DspError> {
        let (trials, channels, _) = data.dim();
        if labels.len() != trials || start_samples.len() != trials {
            return Err(DspError::ShapeMismatch(format!(
                "{} labels / {} starts for {trials} trials",
                labels.len(),
                start_samples.len()
            )));
        }
        if channel_labels.len() != channels {
            return Err(DspError::ShapeMismatch(format!(
                "{} channel labels for {channels} channels",
                channel_labels.len()
            )));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(DspError::ShapeMismatch(format!("sample rate {sample_rate_hz}")));
        }
        Ok(Self {
            data,
            labels,
            start_samples,
            t0_s,
            sample_rate_hz,
            channel_labels,
            dropped: 0,
        })
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn labels(&self) -> &[EventCode] {
        &self.labels
    }

    pub fn start_samples(&self) -> &[usize] {
        &self.start_samples
    }

    pub fn t0_s(&self) -> f64 {
        self.t0_s
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    /// Events skipped because their window fell outside the recording (or,
    /// after pruning, because they overlapped a kept epoch).
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn n_trials(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_samples(&self) -> usize {
        self.data.dim().2
    }

    pub fn count(&self, code: EventCode) -> usize {
        self.labels.iter().filter(|&&c| c == code).count()
    }

    /// Keeps the given trials, in the given order.
    pub fn select(&self, indices: &[usize]) -> EpochSet {
        EpochSet {
            data: self.data.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            start_samples: indices.iter().map(|&i| self.start_samples[i]).collect(),
            t0_s: self.t0_s,
            sample_rate_hz: self.sample_rate_hz,
            channel_labels: self.channel_labels.clone(),
            dropped: self.dropped,
        }
    }

    /// Same trials with a new data tensor and channel labels (spatial filtering).
    pub(crate) fn with_channels(&self, data: Array3<f64>, channel_labels: Vec<String>) -> EpochSet {
        debug_assert_eq!(data.dim().0, self.n_trials());
        EpochSet {
            data,
            labels: self.labels.clone(),
            start_samples: self.start_samples.clone(),
            t0_s: self.t0_s,
            sample_rate_hz: self.sample_rate_hz,
            channel_labels,
            dropped: self.dropped,
        }
    }
}

/// Slices `[onset + t0, onset + t1)` around every event whose code is in
/// `codes`. Onsets snap to the nearest sample; events whose window does not
/// fit inside the recording are dropped and counted.
pub fn epochize(
    rec: &Recording,
    events: &EventList,
    codes: &[EventCode],
    t0_s: f64,
    t1_s: f64,
) -> Result<EpochSet, DspError> {
    if !(t0_s < t1_s) {
        return Err(DspError::BadWindow { t0_s, t1_s });
    }
    let fs = rec.sample_rate_hz();
    let len = ((t1_s - t0_s) * fs).round() as usize;
    let offset = (t0_s * fs).round() as i64;
    let n = rec.n_samples() as i64;
    if len == 0 {
        return Err(DspError::BadWindow { t0_s, t1_s });
    }

    let mut starts = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for e in events.iter().filter(|e| codes.contains(&e.code)) {
        let start = (e.onset_s * fs).round() as i64 + offset;
        if start < 0 || start + len as i64 > n {
            dropped += 1;
            continue;
        }
        starts.push(start as usize);
        labels.push(e.code);
    }
    if starts.is_empty() {
        return Err(DspError::NoEventsSelected { dropped });
    }

    let samples = rec.samples();
    let mut data = Array3::zeros((starts.len(), rec.n_channels(), len));
    for (mut trial, &start) in data.axis_iter_mut(Axis(0)).zip(&starts) {
        trial.assign(&samples.slice(s![.., start..start + len]));
    }
    let mut set = EpochSet::new(
        data,
        labels,
        starts,
        t0_s,
        fs,
        rec.channel_labels().to_vec(),
    )?;
    set.dropped = dropped;
    Ok(set)
}

/// Greedy scan in onset order: an epoch is kept iff its window does not
/// intersect the window of the last kept epoch.
pub fn prune_overlaps(epochs: &EpochSet) -> EpochSet {
    let len = epochs.n_samples();
    let mut kept = Vec::new();
    let mut free_from = 0usize;
    for (i, &start) in epochs.start_samples.iter().enumerate() {
        if kept.is_empty() || start >= free_from {
            kept.push(i);
            free_from = start + len;
        }
    }
    let mut out = epochs.select(&kept);
    out.dropped = epochs.dropped + (epochs.n_trials() - kept.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Event;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn ramp_recording(fs: f64, n: usize) -> Recording {
        let data = Array2::from_shape_fn((2, n), |(c, i)| (i + c * 100_000) as f64);
        Recording::new(fs, vec!["Cz".into(), "Pz".into()], data, 0.0).unwrap()
    }

    fn events(onsets: &[f64], code: EventCode) -> EventList {
        EventList::new(onsets.iter().map(|&t| Event { onset_s: t, code }).collect()).unwrap()
    }

    #[test]
    fn index_arithmetic() {
        let rec = ramp_recording(125.0, 125 * 20);
        let ep = epochize(&rec, &events(&[10.0], EventCode::Target), &[EventCode::Target], 0.0, 1.0)
            .unwrap();
        assert_eq!(ep.n_samples(), 125);
        assert_eq!(ep.start_samples(), &[1250]);
        assert_eq!(ep.data()[[0, 0, 0]], 1250.0);
        assert_eq!(ep.data()[[0, 1, 124]], 101_374.0);
    }

    #[test]
    fn window_past_end_is_dropped_and_counted() {
        let rec = ramp_recording(125.0, 125 * 20);
        let ev = events(&[5.0, 19.8], EventCode::Target);
        let ep = epochize(&rec, &ev, &[EventCode::Target], 0.0, 1.0).unwrap();
        assert_eq!(ep.n_trials(), 1);
        assert_eq!(ep.dropped(), 1);
        let pre = epochize(&rec, &events(&[0.2], EventCode::Target), &[EventCode::Target], -0.5, 1.0);
        assert!(matches!(pre, Err(DspError::NoEventsSelected { dropped: 1 })));
    }

    #[test]
    fn onset_snaps_to_nearest_sample() {
        let rec = ramp_recording(100.0, 1000);
        let ev = events(&[1.004, 2.006], EventCode::Target);
        let ep = epochize(&rec, &ev, &[EventCode::Target], 0.0, 0.5).unwrap();
        assert_eq!(ep.start_samples(), &[100, 201]);
    }

    #[test]
    fn code_filter_and_empty_selection() {
        let rec = ramp_recording(100.0, 1000);
        let ev = events(&[1.0, 2.0], EventCode::Distractor);
        assert!(matches!(
            epochize(&rec, &ev, &[EventCode::Target], 0.0, 1.0),
            Err(DspError::NoEventsSelected { dropped: 0 })
        ));
    }

    #[test]
    fn regular_schedule_keeps_every_fifth() {
        let rec = ramp_recording(125.0, 125 * 30);
        let onsets: Vec<f64> = (0..100).map(|i| 1.0 + i as f64 * 0.2).collect();
        let ep = epochize(&rec, &events(&onsets, EventCode::Distractor), &[EventCode::Distractor], 0.0, 1.0)
            .unwrap();
        let pruned = prune_overlaps(&ep);
        let expected: Vec<usize> = (0..100).step_by(5).map(|i| ep.start_samples()[i]).collect();
        assert_eq!(pruned.start_samples(), expected.as_slice());
        assert_eq!(pruned.dropped(), 80);
    }

    #[test]
    fn spaced_onsets_all_kept() {
        let rec = ramp_recording(125.0, 125 * 30);
        let onsets: Vec<f64> = (0..10).map(|i| 1.0 + i as f64 * 1.5).collect();
        let ep = epochize(&rec, &events(&onsets, EventCode::Target), &[EventCode::Target], 0.0, 1.0)
            .unwrap();
        assert_eq!(prune_overlaps(&ep).n_trials(), 10);
    }

    proptest! {
        #[test]
        fn pruned_windows_are_disjoint(gaps in prop::collection::vec(0u32..300, 1..80), len_s in 0.1f64..2.0) {
            let fs = 125.0;
            let mut t = 0.0;
            let onsets: Vec<f64> = gaps.iter().map(|g| { t += *g as f64 / 100.0; t }).collect();
            let n = ((t + len_s + 1.0) * fs) as usize;
            let rec = ramp_recording(fs, n);
            let ep = epochize(&rec, &events(&onsets, EventCode::Target), &[EventCode::Target], 0.0, len_s).unwrap();
            let pruned = prune_overlaps(&ep);
            let len = pruned.n_samples();
            for w in pruned.start_samples().windows(2) {
                prop_assert!(w[0] + len <= w[1]);
            }
            prop_assert_eq!(pruned.n_trials() + pruned.dropped(), onsets.len());
        }
    }
}
