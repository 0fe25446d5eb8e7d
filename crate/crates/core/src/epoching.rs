//! 30-second epoch grid and odd-width windows centered on an epoch.
//!
//! Windows that would run past either end of the recording are clipped to
//! the available epochs; the clipped width is reported as `effective_n` so
//! features can account for it.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::RrSeries;
use crate::signal_io::SignalTrace;

pub const DEFAULT_EPOCH_LEN_S: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpochingError {
    #[error("recording of {duration_s} s is shorter than one {epoch_len_s} s epoch")]
    RecordingTooShort { duration_s: f64, epoch_len_s: f64 },
    #[error("window width {0} must be odd and positive")]
    EvenWidth(usize),
    #[error("center epoch {center} outside a grid of {n_epochs} epochs")]
    CenterOutOfRange { center: usize, n_epochs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochGrid {
    pub epoch_len_s: f64,
    pub n_epochs: usize,
}

impl EpochGrid {
    pub fn span_s(&self) -> f64 {
        self.n_epochs as f64 * self.epoch_len_s
    }

    pub fn epoch_start_s(&self, epoch: usize) -> f64 {
        epoch as f64 * self.epoch_len_s
    }

    /// Grid epoch containing time `t`, if any.
    pub fn epoch_of(&self, t: f64) -> Option<usize> {
        if t < 0.0 {
            return None;
        }
        let e = (t / self.epoch_len_s).floor() as usize;
        (e < self.n_epochs).then_some(e)
    }

    /// Window of `n` epochs centered on `center`, clipped to the grid.
    pub fn window(&self, center: usize, n: usize) -> Result<EpochWindow, EpochingError> {
        if n == 0 || n.is_multiple_of(2) {
            return Err(EpochingError::EvenWidth(n));
        }
        if center >= self.n_epochs {
            return Err(EpochingError::CenterOutOfRange {
                center,
                n_epochs: self.n_epochs,
            });
        }
        let half_width = n / 2;
        let first = center.saturating_sub(half_width);
        let last = (center + half_width).min(self.n_epochs - 1);
        Ok(EpochWindow {
            center,
            half_width,
            first,
            last,
        })
    }
}

pub fn build_epoch_grid(duration_s: f64, epoch_len_s: f64) -> Result<EpochGrid, EpochingError> {
    if !(epoch_len_s > 0.0) || !(duration_s >= epoch_len_s) {
        return Err(EpochingError::RecordingTooShort {
            duration_s,
            epoch_len_s,
        });
    }
    Ok(EpochGrid {
        epoch_len_s,
        n_epochs: (duration_s / epoch_len_s).floor() as usize,
    })
}

/// Requested window `center ± half_width`, clipped to `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochWindow {
    pub center: usize,
    pub half_width: usize,
    pub first: usize,
    pub last: usize,
}

impl EpochWindow {
    pub fn requested_n(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn effective_n(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_clipped(&self) -> bool {
        self.effective_n() < self.requested_n()
    }

    pub fn epochs(&self) -> Range<usize> {
        self.first..self.last + 1
    }

    /// `[start, end)` in seconds.
    pub fn span_s(&self, grid: &EpochGrid) -> (f64, f64) {
        (grid.epoch_start_s(self.first), grid.epoch_start_s(self.last + 1))
    }
}

/// Usable RR intervals grouped by the epoch holding their first peak.
/// Interval times are kept alongside values for resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochedRr {
    times: Vec<f64>,
    values: Vec<f64>,
    /// `bounds[e]..bounds[e + 1]` indexes epoch `e`'s intervals.
    bounds: Vec<usize>,
}

impl EpochedRr {
    pub fn new(rr: &RrSeries, grid: &EpochGrid) -> Self {
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut bounds = vec![0; grid.n_epochs + 1];
        let mut counts = vec![0usize; grid.n_epochs];
        for (t, v) in rr.usable() {
            if let Some(e) = grid.epoch_of(t) {
                times.push(t);
                values.push(v);
                counts[e] += 1;
            }
        }
        for e in 0..grid.n_epochs {
            bounds[e + 1] = bounds[e] + counts[e];
        }
        Self { times, values, bounds }
    }

    pub fn n_epochs(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn epoch(&self, e: usize) -> &[f64] {
        &self.values[self.bounds[e]..self.bounds[e + 1]]
    }

    /// All interval values in the window, time-ordered.
    pub fn window_values(&self, w: &EpochWindow) -> &[f64] {
        &self.values[self.bounds[w.first]..self.bounds[w.last + 1]]
    }

    pub fn window_times(&self, w: &EpochWindow) -> &[f64] {
        &self.times[self.bounds[w.first]..self.bounds[w.last + 1]]
    }

    /// Per-epoch value slices of the window, in epoch order.
    pub fn window_epochs<'a>(&'a self, w: &EpochWindow) -> impl Iterator<Item = &'a [f64]> + 'a {
        w.epochs().map(move |e| self.epoch(e))
    }
}

/// Usable RR values whose first peak falls inside the window's span.
pub fn window_rr_values(rr: &RrSeries, grid: &EpochGrid, w: &EpochWindow) -> Vec<f64> {
    let (start, end) = w.span_s(grid);
    rr.usable()
        .filter(|(t, _)| *t >= start && *t < end)
        .map(|(_, v)| v)
        .collect()
}

/// Sample index range of `trace` falling inside the window's span.
pub fn window_sample_range(trace: &SignalTrace, grid: &EpochGrid, w: &EpochWindow) -> Range<usize> {
    let (start, end) = w.span_s(grid);
    let rate = trace.sample_rate_hz;
    let to_index = |t: f64| -> usize {
        let i = ((t - trace.start_time_s) * rate).ceil();
        (i.max(0.0) as usize).min(trace.samples.len())
    };
    to_index(start)..to_index(end)
}

pub fn window_samples<'a>(trace: &'a SignalTrace, grid: &EpochGrid, w: &EpochWindow) -> &'a [f64] {
    &trace.samples[window_sample_range(trace, grid, w)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::rr_from_peaks;

    #[test]
    fn grid_floor_rule() {
        assert_eq!(build_epoch_grid(3600.0, 30.0).unwrap().n_epochs, 120);
        assert_eq!(build_epoch_grid(3605.0, 30.0).unwrap().n_epochs, 120);
        assert!(matches!(
            build_epoch_grid(29.0, 30.0),
            Err(EpochingError::RecordingTooShort { .. })
        ));
    }

    #[test]
    fn window_clips_at_edges() {
        let g = build_epoch_grid(3600.0, 30.0).unwrap();
        let w = g.window(0, 9).unwrap();
        assert_eq!((w.first, w.last, w.effective_n()), (0, 4, 5));
        assert!(w.is_clipped());
        let w = g.window(119, 9).unwrap();
        assert_eq!((w.first, w.last), (115, 119));
        assert!(g.window(5, 4).is_err());
        assert!(g.window(120, 1).is_err());
    }

    fn regular_rr(period_samples: usize, n_peaks: usize) -> RrSeries {
        let peaks: Vec<usize> = (0..n_peaks).map(|k| k * period_samples).collect();
        rr_from_peaks(&peaks, 200.0).unwrap()
    }

    #[test]
    fn three_epoch_window_is_ninety_seconds() {
        let rr = regular_rr(160, 400);
        let g = build_epoch_grid(300.0, 30.0).unwrap();
        let w = g.window(1, 3).unwrap();
        let vals = window_rr_values(&rr, &g, &w);
        // first peaks at 0, 0.8, ..., 89.6 s
        assert_eq!(vals.len(), 113);
        let direct: Vec<f64> = (0..rr.len())
            .filter(|&i| rr.peak_times_s[i] < 90.0)
            .map(|i| rr.intervals_s[i])
            .collect();
        assert_eq!(vals, direct);
    }

    #[test]
    fn epoched_view_matches_direct_windowing() {
        let rr = regular_rr(173, 600);
        let g = build_epoch_grid(500.0, 30.0).unwrap();
        let er = EpochedRr::new(&rr, &g);
        for center in 0..g.n_epochs {
            for n in [1, 3, 9] {
                let w = g.window(center, n).unwrap();
                assert_eq!(er.window_values(&w), &window_rr_values(&rr, &g, &w)[..]);
            }
        }
        let total: usize = (0..g.n_epochs).map(|e| er.epoch(e).len()).sum();
        assert_eq!(total, rr.usable().filter(|(t, _)| *t < g.span_s()).count());
    }

    #[test]
    fn sample_windows_partition_the_trace() {
        let t = SignalTrace::new("THOR", 25.0, (0..25 * 95).map(|i| i as f64).collect());
        let g = build_epoch_grid(t.duration_s(), 30.0).unwrap();
        let mut covered = 0;
        for e in 0..g.n_epochs {
            let w = g.window(e, 1).unwrap();
            let r = window_sample_range(&t, &g, &w);
            assert_eq!(r.start, covered);
            covered = r.end;
            assert_eq!(r.len(), 750);
        }
        assert_eq!(covered, 25 * 90);
    }
}
