use crate::datagen::{
    generate_segment, window_record, DatasetManifest, RecordSplit, Standardizer, SyntheticSpec,
    WindowedSample,
};
use crate::error::{Error, Result};
use crate::nncore::Real;
use crate::online::StreamEvent;
use crate::seeds::derive_seed;

use super::config::{DataSource, ExperimentConfig, SegmentSpec};

/// Data source resolved for one trial.
#[derive(Debug, Clone)]
pub enum TrialData {
    Synthetic(SyntheticSpec),
    Manifest(DatasetManifest),
}

impl TrialData {
    pub fn new(config: &ExperimentConfig, trial_seed: u64) -> Result<Self> {
        Ok(match &config.data {
            DataSource::Synthetic(spec) => {
                let mut spec = spec.clone();
                spec.seed = derive_seed(trial_seed, "data", &[spec.seed]);
                TrialData::Synthetic(spec)
            }
            DataSource::Manifest { path } => TrialData::Manifest(DatasetManifest::load(path)?),
        })
    }
}

fn span(window: usize, step: usize, count: usize) -> usize {
    window + (count - 1) * step
}

/// Manifest windows for `(condition, fault)` belonging to `split`; records
/// marked `any` contribute their first half offline and second half online.
fn manifest_windows(
    m: &DatasetManifest,
    condition: usize,
    fault: usize,
    split: RecordSplit,
    window: usize,
    step: usize,
) -> Result<Vec<WindowedSample>> {
    let mut out = Vec::new();
    for rec in m.records_for(condition, fault, split) {
        let mut w = window_record(&m.load_record(rec)?, window, step)?;
        if rec.split == RecordSplit::Any {
            let half = w.len() / 2;
            w = match split {
                RecordSplit::Online => w.split_off(half),
                _ => {
                    w.truncate(half);
                    w
                }
            };
        }
        out.extend(w);
    }
    Ok(out)
}

/// Raw (unstandardized) offline windows for every offline condition and
/// fault class.
pub fn offline_windows(config: &ExperimentConfig, data: &TrialData) -> Result<Vec<WindowedSample>> {
    let (_, n_faults, _) = config.data_shape()?;
    let mut out = Vec::new();
    for &c in &config.offline_conditions {
        for f in 0..n_faults {
            let windows = match data {
                TrialData::Synthetic(spec) => {
                    let len = span(config.window, config.step, config.offline_windows_per_cell);
                    window_record(
                        &generate_segment(spec, c, f, len, 0, 0)?,
                        config.window,
                        config.step,
                    )?
                }
                TrialData::Manifest(m) => {
                    manifest_windows(m, c, f, RecordSplit::Offline, config.window, config.step)?
                }
            };
            if windows.is_empty() {
                return Err(Error::Coverage {
                    condition: c,
                    fault: f,
                });
            }
            out.extend(windows);
        }
    }
    Ok(out)
}

/// One label run inside a segment: the healthy prefix (part 0) or the
/// faulty suffix (part 1).
struct SegmentPart {
    segment: usize,
    condition: usize,
    fault: usize,
    count: usize,
    /// First sample of the run on the recording's time axis.
    start: usize,
    part: u64,
}

/// `count` consecutive online windows of `(condition, fault)`.
fn online_windows(
    config: &ExperimentConfig,
    data: &TrialData,
    p: SegmentPart,
) -> Result<Vec<WindowedSample>> {
    let SegmentPart {
        segment,
        condition,
        fault,
        count,
        start,
        part,
    } = p;
    if count == 0 {
        return Ok(Vec::new());
    }
    match data {
        TrialData::Synthetic(spec) => {
            let len = span(config.window, config.step, count);
            // time continues past the offline recording; each part has its own noise
            let stream = 1 + 2 * segment as u64 + part;
            let rec = generate_segment(spec, condition, fault, len, start, stream)?;
            window_record(&rec, config.window, config.step)
        }
        TrialData::Manifest(m) => {
            let mut w = manifest_windows(
                m,
                condition,
                fault,
                RecordSplit::Online,
                config.window,
                config.step,
            )?;
            if w.len() < count {
                return Err(Error::config(format!(
                    "segment {segment}: condition {condition} fault {fault} has {} online windows, needs {count}",
                    w.len()
                )));
            }
            w.truncate(count);
            Ok(w)
        }
    }
}

/// Events of segment `index`, numbered from `t0`: healthy windows up to the
/// injection index, then the segment's fault, in recording order.
pub fn build_segment<T: Real>(
    config: &ExperimentConfig,
    data: &TrialData,
    standardizer: &Standardizer,
    index: usize,
    t0: usize,
) -> Result<Vec<StreamEvent<T>>> {
    let seg: &SegmentSpec = config
        .online_sequence
        .get(index)
        .ok_or_else(|| Error::config(format!("no segment {index}")))?;
    let n_healthy = seg.injection_index();
    let n_fault = seg.length - n_healthy;
    let offline_len = span(config.window, config.step, config.offline_windows_per_cell);
    let healthy = online_windows(
        config,
        data,
        SegmentPart {
            segment: index,
            condition: seg.condition,
            fault: config.healthy_label,
            count: n_healthy,
            start: offline_len,
            part: 0,
        },
    )?;
    let faulty = online_windows(
        config,
        data,
        SegmentPart {
            segment: index,
            condition: seg.condition,
            fault: seg.fault_label,
            count: n_fault,
            start: offline_len + n_healthy * config.step,
            part: 1,
        },
    )?;
    let labels = std::iter::repeat_n(config.healthy_label, healthy.len())
        .chain(std::iter::repeat_n(seg.fault_label, faulty.len()));
    healthy
        .iter()
        .chain(&faulty)
        .zip(labels)
        .enumerate()
        .map(|(i, (w, label))| {
            Ok(StreamEvent {
                t: t0 + i,
                features: standardizer.apply(&w.features)?,
                hidden_label: label,
                condition_id: seg.condition,
            })
        })
        .collect()
}

/// The whole online stream, segments in configured order.
pub fn build_stream<T: Real>(
    config: &ExperimentConfig,
    trial_seed: u64,
    standardizer: &Standardizer,
) -> Result<Vec<StreamEvent<T>>> {
    let data = TrialData::new(config, trial_seed)?;
    let mut out = Vec::new();
    for i in 0..config.online_sequence.len() {
        let t0 = out.len();
        out.extend(build_segment(config, &data, standardizer, i, t0)?);
    }
    Ok(out)
}
