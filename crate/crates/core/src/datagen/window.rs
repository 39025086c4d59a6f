use super::{SignalRecord, WindowedSample};
use crate::error::{Error, Result};

/// Number of windows: `floor((len - window) / step) + 1`, zero when `window > len`.
pub fn window_count(len: usize, window: usize, step: usize) -> usize {
    if window == 0 || step == 0 || window > len {
        0
    } else {
        (len - window) / step + 1
    }
}

/// Slides a `window`-long frame over the record with stride `step`.
pub fn window_record(
    rec: &SignalRecord,
    window: usize,
    step: usize,
) -> Result<Vec<WindowedSample>> {
    if window == 0 || step == 0 {
        return Err(Error::contract("window and step must be >= 1"));
    }
    if window > rec.len() {
        return Err(Error::EmptyInput(format!(
            "record of length {} is shorter than window {}",
            rec.len(),
            window
        )));
    }
    let k = rec.n_channels();
    let count = window_count(rec.len(), window, step);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * step;
        let mut features = Vec::with_capacity(k * window);
        for ch in rec.channels.rows() {
            features.extend(
                ch.slice(ndarray::s![start..start + window])
                    .iter()
                    .map(|&v| v as f32),
            );
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("window features"));
        }
        out.push(WindowedSample {
            features,
            fault_label: rec.fault_label,
            condition_id: rec.condition_id,
            source_index: start,
        });
    }
    Ok(out)
}
