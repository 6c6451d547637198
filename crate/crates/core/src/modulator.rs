//! Synchronization path: zero-cross detection of the coil current and the
//! counter-based phase-shifted gate signal.
//!
//! Each rising zero crossing of the coil current restarts the PWM counter.
//! The gate turns on `(0.25 + D)·Ts` ahead of the following rising crossing,
//! i.e. `(0.75 - D)·Ts` after the crossing that restarted the counter, and
//! stays on for half a period. In gate-relative time `τ` the coil current is
//! then `-|I|·cos(2π·fs·τ - 2πD)` while the switch is off.

use std::fmt::Write as _;

use crate::circuit::CoilSource;
use crate::error::{Error, Result};

/// Largest admissible phase-shift ratio.
pub const D_MAX: f64 = 0.25;
/// Counter clock of the default controller (Hz).
pub const DEFAULT_CLOCK_HZ: f64 = 150e6;

/// A rising zero crossing of the coil current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncEvent {
    pub t: f64,
}

/// One switch-on interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateInterval {
    pub t_on: f64,
    pub t_off: f64,
}

/// Gate signal over a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule {
    pub intervals: Vec<GateInterval>,
    pub d: f64,
    pub ts: f64,
    /// End of the last synchronization period covered.
    pub horizon: f64,
}

impl GateSchedule {
    /// CSV with header `t_on,t_off`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_on,t_off\n");
        for g in &self.intervals {
            let _ = writeln!(out, "{:e},{:e}", g.t_on, g.t_off);
        }
        out
    }
}

/// PWM counter restarted by every sync edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterModel {
    /// Ticks per switching period; `None` places edges exactly.
    pub counter_max: Option<u64>,
    /// Delay between the current zero crossing and the sync edge (s).
    pub prop_delay: f64,
}

impl Default for CounterModel {
    fn default() -> Self {
        Self::exact()
    }
}

impl CounterModel {
    pub fn exact() -> Self {
        Self {
            counter_max: None,
            prop_delay: 0.0,
        }
    }

    /// Counter running at `clock_hz` for a switching frequency `fs`.
    pub fn for_clock(clock_hz: f64, fs: f64) -> Self {
        Self {
            counter_max: Some((clock_hz / fs).round() as u64),
            prop_delay: 0.0,
        }
    }

    pub fn with_prop_delay(mut self, delay: f64) -> Self {
        self.prop_delay = delay;
        self
    }

    /// Compare values `(cmp_on, cmp_off)` in ticks after the counter
    /// restart. `cmp_off` exceeds `counter_max` when the on-interval runs
    /// into the next counter period.
    pub fn compare_ticks(&self, d: f64) -> Option<(u64, u64)> {
        self.counter_max.map(|max| {
            let on = ((0.75 - d) * max as f64).round() as u64;
            (on, on + (max as f64 / 2.0).round() as u64)
        })
    }
}

/// Limits a raw controller output to `[0, 0.25]`; the flag reports whether
/// the limit was active.
pub fn clamp_phase_ratio(d_raw: f64) -> (f64, bool) {
    let d = d_raw.clamp(0.0, D_MAX);
    (d, d != d_raw)
}

/// Rising zero crossings of the coil current in `[0, horizon)`, computed
/// from the source phase. Amplitude steps keep the phase and so do not
/// move the crossings.
pub fn detect_zero_crossings(src: &CoilSource, fs: f64, horizon: f64) -> Vec<SyncEvent> {
    let ts = 1.0 / fs;
    let first = (-src.phase_origin / ts).ceil() as i64;
    (first..)
        .map(|k| src.phase_origin + k as f64 * ts)
        .take_while(|&t| t < horizon)
        .map(|t| SyncEvent { t })
        .collect()
}

/// Switch-on interval owned by the sync edge at `sync_t`.
pub fn gate_interval(sync_t: f64, d: f64, ts: f64, counter: &CounterModel) -> GateInterval {
    let t0 = sync_t + counter.prop_delay;
    match counter.compare_ticks(d) {
        Some((on, off)) => {
            let tick = ts / counter.counter_max.unwrap_or(1) as f64;
            GateInterval {
                t_on: t0 + on as f64 * tick,
                t_off: t0 + off as f64 * tick,
            }
        }
        None => {
            let t_on = t0 + (0.75 - d) * ts;
            GateInterval {
                t_on,
                t_off: t_on + 0.5 * ts,
            }
        }
    }
}

/// Gate schedule for a constant phase ratio.
pub fn gate_schedule(
    events: &[SyncEvent],
    d: f64,
    ts: f64,
    counter: &CounterModel,
) -> Result<GateSchedule> {
    if !(0.0..=D_MAX).contains(&d) {
        return Err(Error::PhaseOutOfRange(d));
    }
    let intervals = events
        .iter()
        .map(|e| gate_interval(e.t, d, ts, counter))
        .collect();
    Ok(GateSchedule {
        intervals,
        d,
        ts,
        horizon: events.last().map_or(0.0, |e| e.t + ts),
    })
}

/// Constant-`d` schedule covering the first `n_cycles` sync periods.
pub fn periodic_schedule(
    src: &CoilSource,
    fs: f64,
    d: f64,
    n_cycles: usize,
    counter: &CounterModel,
) -> Result<GateSchedule> {
    let ts = 1.0 / fs;
    let first = (-src.phase_origin / ts).ceil() as i64;
    let events: Vec<_> = (0..n_cycles as i64)
        .map(|k| SyncEvent {
            t: src.phase_origin + (first + k) as f64 * ts,
        })
        .collect();
    gate_schedule(&events, d, ts, counter)
}
