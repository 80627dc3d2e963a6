//! Per-town success-rate time series (tumbling windows) and run summaries,
//! with deterministic text serialization.

use std::fmt::Write as _;

use crate::model::{SimTime, TaskFate};

/// One tumbling-window sample of a town's task success rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessWindow {
    pub town: u32,
    pub window_start: SimTime,
    pub window_end: SimTime,
    pub completed: u64,
    pub succeeded: u64,
    /// `None` when no task resolved in the window; we do not fabricate a
    /// rate for empty windows.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct WindowCounts {
    completed: u64,
    succeeded: u64,
}

#[derive(Debug, Clone)]
struct TownMetrics {
    id: u32,
    generated: u64,
    succeeded: u64,
    failed_deadline: u64,
    failed_no_target: u64,
    failed_node_destroyed: u64,
    windows: Vec<WindowCounts>,
}

/// Per-town totals for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TownSummary {
    pub town: u32,
    pub generated: u64,
    pub succeeded: u64,
    pub failed_deadline: u64,
    pub failed_no_target: u64,
    pub failed_node_destroyed: u64,
    pub pending_at_end: u64,
}

impl TownSummary {
    pub fn resolved(&self) -> u64 {
        self.succeeded + self.failed_deadline + self.failed_no_target + self.failed_node_destroyed
    }
}

/// Whole-run totals plus the configuration needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub duration: SimTime,
    pub window: SimTime,
    pub towns: Vec<TownSummary>,
    pub overall_success_rate: Option<f64>,
}

impl RunSummary {
    /// Deterministic key/value serialization.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "seed = {}", self.seed).unwrap();
        writeln!(out, "duration = {:.3}", self.duration).unwrap();
        writeln!(out, "window = {:.3}", self.window).unwrap();
        match self.overall_success_rate {
            Some(r) => writeln!(out, "overall_success_rate = {r:.6}").unwrap(),
            None => writeln!(out, "overall_success_rate =").unwrap(),
        }
        for t in &self.towns {
            writeln!(out).unwrap();
            writeln!(out, "[town.{}]", t.town).unwrap();
            writeln!(out, "generated = {}", t.generated).unwrap();
            writeln!(out, "succeeded = {}", t.succeeded).unwrap();
            writeln!(out, "failed_deadline = {}", t.failed_deadline).unwrap();
            writeln!(out, "failed_no_target = {}", t.failed_no_target).unwrap();
            writeln!(out, "failed_node_destroyed = {}", t.failed_node_destroyed).unwrap();
            writeln!(out, "pending_at_end = {}", t.pending_at_end).unwrap();
        }
        out
    }
}

/// Accumulates task resolutions during a run; read out once at the end.
#[derive(Debug, Clone)]
pub struct MetricsCollector {
    window: SimTime,
    duration: SimTime,
    towns: Vec<TownMetrics>,
}

impl MetricsCollector {
    /// `town_ids` in scenario order; windows tile `[0, duration)`.
    pub fn new(town_ids: &[u32], duration: SimTime, window: SimTime) -> Self {
        assert!(window > 0.0 && duration > 0.0);
        let n_windows = (duration / window).ceil() as usize;
        Self {
            window,
            duration,
            towns: town_ids
                .iter()
                .map(|&id| TownMetrics {
                    id,
                    generated: 0,
                    succeeded: 0,
                    failed_deadline: 0,
                    failed_no_target: 0,
                    failed_node_destroyed: 0,
                    windows: vec![WindowCounts::default(); n_windows],
                })
                .collect(),
        }
    }

    pub fn window_width(&self) -> SimTime {
        self.window
    }

    pub fn record_generated(&mut self, town_ix: usize) {
        self.towns[town_ix].generated += 1;
    }

    /// Counts a resolved task in the window containing its resolution time
    /// (completion time, or creation time for immediate failures). Results
    /// returning marginally after the horizon land in the last window.
    pub fn record(&mut self, town_ix: usize, fate: TaskFate, resolution_time: SimTime) {
        let town = &mut self.towns[town_ix];
        match fate {
            TaskFate::Succeeded => town.succeeded += 1,
            TaskFate::FailedDeadline => town.failed_deadline += 1,
            TaskFate::FailedNoTarget => town.failed_no_target += 1,
            TaskFate::FailedNodeDestroyed => town.failed_node_destroyed += 1,
        }
        let ix = ((resolution_time / self.window) as usize).min(town.windows.len() - 1);
        let w = &mut town.windows[ix];
        w.completed += 1;
        if fate == TaskFate::Succeeded {
            w.succeeded += 1;
        }
    }

    pub fn time_series(&self, town_ix: usize) -> Vec<SuccessWindow> {
        let town = &self.towns[town_ix];
        town.windows
            .iter()
            .enumerate()
            .map(|(i, w)| SuccessWindow {
                town: town.id,
                window_start: i as f64 * self.window,
                window_end: ((i + 1) as f64 * self.window).min(self.duration),
                completed: w.completed,
                succeeded: w.succeeded,
                rate: (w.completed > 0).then(|| w.succeeded as f64 / w.completed as f64),
            })
            .collect()
    }

    pub fn town_count(&self) -> usize {
        self.towns.len()
    }

    pub fn summary(&self, seed: u64) -> RunSummary {
        let towns: Vec<TownSummary> = self
            .towns
            .iter()
            .map(|t| {
                let resolved =
                    t.succeeded + t.failed_deadline + t.failed_no_target + t.failed_node_destroyed;
                TownSummary {
                    town: t.id,
                    generated: t.generated,
                    succeeded: t.succeeded,
                    failed_deadline: t.failed_deadline,
                    failed_no_target: t.failed_no_target,
                    failed_node_destroyed: t.failed_node_destroyed,
                    pending_at_end: t.generated - resolved,
                }
            })
            .collect();
        let resolved: u64 = towns.iter().map(TownSummary::resolved).sum();
        let succeeded: u64 = towns.iter().map(|t| t.succeeded).sum();
        RunSummary {
            seed,
            duration: self.duration,
            window: self.window,
            towns,
            overall_success_rate: (resolved > 0).then(|| succeeded as f64 / resolved as f64),
        }
    }

    /// Time-series CSV: towns grouped, windows ascending. Empty windows
    /// serialize with an empty rate field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("town,window_start,window_end,completed,succeeded,rate\n");
        for town_ix in 0..self.towns.len() {
            for w in self.time_series(town_ix) {
                let rate = match w.rate {
                    Some(r) => format!("{r:.6}"),
                    None => String::new(),
                };
                writeln!(
                    out,
                    "{},{:.3},{:.3},{},{},{}",
                    w.town, w.window_start, w.window_end, w.completed, w.succeeded, rate
                )
                .unwrap();
            }
        }
        out
    }
}

/// Mean of the defined window rates with `window_start` in `[from, to)`.
pub fn mean_rate(series: &[SuccessWindow], from: SimTime, to: SimTime) -> Option<f64> {
    let rates: Vec<f64> = series
        .iter()
        .filter(|w| w.window_start >= from && w.window_start < to)
        .filter_map(|w| w.rate)
        .collect();
    if rates.is_empty() {
        None
    } else {
        Some(rates.iter().sum::<f64>() / rates.len() as f64)
    }
}
