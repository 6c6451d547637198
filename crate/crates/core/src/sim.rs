//! Time-domain integration of the two-mode rectifier.
//!
//! State is `(v_Cf, i_Lf, v_o)`. While the switch conducts (Mode 1) the
//! capacitor across it is held at zero and the coil current flows through
//! the switch; while it is open (Mode 2) the coil current charges `Cf` and
//! the `Lf`–`Cf` tank rings into the output capacitor.
//!
//! Integration is classical fixed-step RK4. Every segment between two gate
//! edges is divided into an integer number of equal steps, so no step ever
//! straddles a mode change. At each Mode 2 → Mode 1 edge any voltage left on
//! `Cf` is discarded through the ideal switch and logged; that residual is
//! the ZVS figure of merit.

use std::fmt::Write as _;

use crate::analytic;
use crate::circuit::{CoilSource, ReceiverState, SwitchMode, ValidatedParams};
use crate::error::{Error, Result};
use crate::modulator::GateSchedule;

/// Integration and steady-state settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Nominal step (s); segments are split into equal steps no longer
    /// than this.
    pub dt: f64,
    pub n_cycles_max: usize,
    /// Relative cycle-to-cycle change accepted as periodic.
    pub ss_tolerance: f64,
    /// Record every n-th step in transient runs.
    pub record_stride: usize,
}

impl SimConfig {
    /// `dt = Ts/1000`, tolerance 1e-6, at most 20000 cycles.
    pub fn for_fs(fs: f64) -> Self {
        Self {
            dt: 1.0 / fs / 1000.0,
            n_cycles_max: 20_000,
            ss_tolerance: 1e-6,
            record_stride: 1,
        }
    }

    pub fn with_steps_per_cycle(mut self, fs: f64, n: usize) -> Self {
        self.dt = 1.0 / fs / n as f64;
        self
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let max_dt = 1.0 / fs / 500.0;
        if !(self.dt > 0.0 && self.dt <= max_dt * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange {
                name: "dt",
                value: self.dt,
                lo: 0.0,
                hi: max_dt,
            });
        }
        if self.ss_tolerance.is_nan() || self.ss_tolerance <= 0.0 {
            return Err(Error::Invalid(vec![crate::error::Violation::NonPositiveValue(
                "ss_tolerance",
            )]));
        }
        if self.record_stride == 0 || self.n_cycles_max == 0 {
            return Err(Error::Usage(
                "record_stride and n_cycles_max must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Time derivatives of the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub dvcf: f64,
    pub dilf: f64,
    pub dvo: f64,
}

/// Mode equations of the rectifier for coil current `ils`.
pub fn derivatives(
    state: &ReceiverState,
    mode: SwitchMode,
    params: &ValidatedParams,
    ils: f64,
) -> StateRate {
    rates(
        state.vcf,
        state.ilf,
        state.vo,
        mode,
        &Coeffs::new(params, 1.0 / params.r),
        ils,
    )
}

#[derive(Debug, Clone, Copy)]
struct Coeffs {
    inv_lf: f64,
    inv_cf: f64,
    inv_co: f64,
    g_load: f64,
}

impl Coeffs {
    fn new(p: &ValidatedParams, g_load: f64) -> Self {
        Self {
            inv_lf: 1.0 / p.lf,
            inv_cf: 1.0 / p.cf,
            inv_co: 1.0 / p.co,
            g_load,
        }
    }
}

#[inline(always)]
fn rates(vcf: f64, ilf: f64, vo: f64, mode: SwitchMode, c: &Coeffs, ils: f64) -> StateRate {
    let dvo = (ilf - vo * c.g_load) * c.inv_co;
    match mode {
        SwitchMode::Mode1 => StateRate {
            dvcf: 0.0,
            dilf: -vo * c.inv_lf,
            dvo,
        },
        SwitchMode::Mode2 => StateRate {
            dvcf: (ils - ilf) * c.inv_cf,
            dilf: (vcf - vo) * c.inv_lf,
            dvo,
        },
    }
}

/// A sampled waveform. All columns have equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub vcf: Vec<f64>,
    pub ilf: Vec<f64>,
    pub vo: Vec<f64>,
    pub ils: Vec<f64>,
    pub gate: Vec<u8>,
    /// Phase ratio in force, present for closed-loop and perturbed runs.
    pub d: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, s: &ReceiverState, ils: f64, mode: SwitchMode) {
        self.t.push(s.t);
        self.vcf.push(s.vcf);
        self.ilf.push(s.ilf);
        self.vo.push(s.vo);
        self.ils.push(ils);
        self.gate.push(mode.gate());
    }

    /// CSV with header `t,vcf,ilf,vo,ils,gate` (plus `D` when present).
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 96);
        out.push_str("t,vcf,ilf,vo,ils,gate");
        if self.d.is_some() {
            out.push_str(",D");
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                self.t[k], self.vcf[k], self.ilf[k], self.vo[k], self.ils[k], self.gate[k]
            );
            if let Some(d) = &self.d {
                let _ = write!(out, ",{}", d[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Voltage discarded from `Cf` at a turn-on edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampEvent {
    pub t: f64,
    pub vcf: f64,
}

/// Output of [`run_transient`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transient {
    pub series: TimeSeries,
    pub clamps: Vec<ClampEvent>,
    pub final_state: ReceiverState,
}

/// Fixed-step integrator holding the running state.
#[derive(Debug, Clone)]
pub struct Engine {
    params: ValidatedParams,
    src: CoilSource,
    coeffs: Coeffs,
    dt: f64,
    state: ReceiverState,
}

impl Engine {
    pub fn new(params: ValidatedParams, src: CoilSource, dt: f64, init: ReceiverState) -> Self {
        Self {
            coeffs: Coeffs::new(&params, 1.0 / params.r),
            params,
            src,
            dt,
            state: init,
        }
    }

    pub fn state(&self) -> ReceiverState {
        self.state
    }

    pub fn set_state(&mut self, s: ReceiverState) {
        self.state = s;
    }

    pub fn params(&self) -> &ValidatedParams {
        &self.params
    }

    pub fn source(&self) -> &CoilSource {
        &self.src
    }

    /// Load resistance from now on; `f64::INFINITY` disconnects the load.
    pub fn set_load(&mut self, r: f64) {
        self.coeffs.g_load = 1.0 / r;
    }

    pub fn ils_now(&self) -> f64 {
        self.src.ils_at(self.params.fs, self.state.t)
    }

    /// Discards the voltage on `Cf` and returns it.
    pub fn clamp(&mut self) -> f64 {
        std::mem::replace(&mut self.state.vcf, 0.0)
    }

    /// Integrates to `t_end` in `mode`, calling `record` with the state at
    /// the start of every step.
    pub fn advance(
        &mut self,
        t_end: f64,
        mode: SwitchMode,
        record: &mut impl FnMut(&ReceiverState, f64, SwitchMode),
    ) -> Result<()> {
        if let Some((t_step, _)) = self.src.amplitude_step {
            if t_step > self.state.t && t_step < t_end {
                self.advance_smooth(t_step, mode, record)?;
            }
        }
        self.advance_smooth(t_end, mode, record)
    }

    fn advance_smooth(
        &mut self,
        t_end: f64,
        mode: SwitchMode,
        record: &mut impl FnMut(&ReceiverState, f64, SwitchMode),
    ) -> Result<()> {
        let t0 = self.state.t;
        let span = t_end - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let n = ((span / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let fs = self.params.fs;
        let c = self.coeffs;
        let src = self.src;
        let (mut vcf, mut ilf, mut vo) = (self.state.vcf, self.state.ilf, self.state.vo);
        if mode == SwitchMode::Mode1 {
            vcf = 0.0;
        }
        let mut ils_a = src.ils_at(fs, t0);
        for k in 0..n {
            let t = t0 + k as f64 * h;
            record(
                &ReceiverState { t, vcf, ilf, vo },
                ils_a,
                mode,
            );
            let t_next = t0 + (k + 1) as f64 * h;
            let (ils_m, ils_b) = match mode {
                SwitchMode::Mode2 => (src.ils_at(fs, t + 0.5 * h), src.ils_at(fs, t_next)),
                SwitchMode::Mode1 => (0.0, 0.0),
            };
            let k1 = rates(vcf, ilf, vo, mode, &c, ils_a);
            let k2 = rates(
                vcf + 0.5 * h * k1.dvcf,
                ilf + 0.5 * h * k1.dilf,
                vo + 0.5 * h * k1.dvo,
                mode,
                &c,
                ils_m,
            );
            let k3 = rates(
                vcf + 0.5 * h * k2.dvcf,
                ilf + 0.5 * h * k2.dilf,
                vo + 0.5 * h * k2.dvo,
                mode,
                &c,
                ils_m,
            );
            let k4 = rates(
                vcf + h * k3.dvcf,
                ilf + h * k3.dilf,
                vo + h * k3.dvo,
                mode,
                &c,
                ils_b,
            );
            vcf += h / 6.0 * (k1.dvcf + 2.0 * k2.dvcf + 2.0 * k3.dvcf + k4.dvcf);
            ilf += h / 6.0 * (k1.dilf + 2.0 * k2.dilf + 2.0 * k3.dilf + k4.dilf);
            vo += h / 6.0 * (k1.dvo + 2.0 * k2.dvo + 2.0 * k3.dvo + k4.dvo);
            ils_a = match mode {
                SwitchMode::Mode2 => ils_b,
                SwitchMode::Mode1 => src.ils_at(fs, t_next),
            };
        }
        self.state = ReceiverState {
            t: t_end,
            vcf,
            ilf,
            vo,
        };
        if self.state.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { t: t_end })
        }
    }

    /// Runs one switching cycle starting at a turn-on edge: Mode 1 for
    /// `on_time`, then Mode 2 until `t_on + ts`. Returns the voltage on `Cf`
    /// just before the next turn-on, which is left unclamped.
    pub fn cycle(
        &mut self,
        t_on: f64,
        on_time: f64,
        ts: f64,
        record: &mut impl FnMut(&ReceiverState, f64, SwitchMode),
    ) -> Result<f64> {
        self.state.t = t_on;
        self.advance(t_on + on_time, SwitchMode::Mode1, record)?;
        self.advance(t_on + ts, SwitchMode::Mode2, record)?;
        Ok(self.state.vcf)
    }
}

fn no_record(_: &ReceiverState, _: f64, _: SwitchMode) {}

/// Integrates from `init` to the end of the gate schedule.
pub fn run_transient(
    params: &ValidatedParams,
    src: &CoilSource,
    gate: &GateSchedule,
    cfg: &SimConfig,
    init: ReceiverState,
) -> Result<Transient> {
    cfg.validate(params.fs)?;
    let mut eng = Engine::new(*params, *src, cfg.dt, init);
    let mut series = TimeSeries::default();
    let mut clamps = Vec::new();
    let stride = cfg.record_stride;
    let mut step = 0usize;
    let mut rec = |s: &ReceiverState, ils: f64, mode: SwitchMode| {
        if step.is_multiple_of(stride) {
            series.push(s, ils, mode);
        }
        step += 1;
    };
    let horizon = gate.horizon;
    for iv in &gate.intervals {
        if iv.t_off <= eng.state().t {
            continue;
        }
        if iv.t_on >= horizon {
            break;
        }
        if eng.state().t < iv.t_on {
            eng.advance(iv.t_on, SwitchMode::Mode2, &mut rec)?;
        }
        let t = eng.state().t;
        let v = eng.clamp();
        clamps.push(ClampEvent { t, vcf: v });
        eng.advance(iv.t_off.min(horizon), SwitchMode::Mode1, &mut rec)?;
    }
    let last_mode = if gate
        .intervals
        .iter()
        .any(|iv| iv.t_on <= eng.state().t && eng.state().t < iv.t_off)
    {
        SwitchMode::Mode1
    } else {
        SwitchMode::Mode2
    };
    eng.advance(horizon, last_mode, &mut rec)?;
    let fin = eng.state();
    series.push(&fin, eng.ils_now(), last_mode);
    Ok(Transient {
        series,
        clamps,
        final_state: fin,
    })
}

/// One converged steady-state cycle, from a turn-on edge to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    /// Samples at every step plus the closing point; the last row holds the
    /// unclamped `Cf` voltage at the next turn-on.
    pub series: TimeSeries,
    pub ts: f64,
    pub io_avg: f64,
    pub vo_avg: f64,
    pub p_avg: f64,
    pub zvs_on_voltage: f64,
    pub zvs_off_voltage: f64,
    pub vcf_peak: f64,
    pub vo_ripple_pp: f64,
    /// Cycle-map iterations until convergence, excluding probe cycles.
    pub cycles: usize,
}

impl PeriodicOrbit {
    /// State at the turn-on edge that starts the orbit.
    pub fn start_state(&self) -> ReceiverState {
        ReceiverState {
            t: self.series.t[0],
            vcf: 0.0,
            ilf: self.series.ilf[0],
            vo: self.series.vo[0],
        }
    }

    /// Switch voltage normalized by `vo_avg`, sampled at `u = k/n`.
    pub fn normalized_vcf(&self) -> Vec<f64> {
        let n = self.series.len() - 1;
        self.series.vcf[..n].iter().map(|v| v / self.vo_avg).collect()
    }
}

/// Cycle averages `(io_avg, vo_avg, p_avg)` of an orbit, trapezoidal over
/// exactly one period.
pub fn cycle_averages(orbit: &PeriodicOrbit) -> (f64, f64, f64) {
    averages(&orbit.series, orbit.ts)
}

fn trapz(t: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    (1..t.len())
        .map(|k| 0.5 * (f(k) + f(k - 1)) * (t[k] - t[k - 1]))
        .sum()
}

fn averages(s: &TimeSeries, ts: f64) -> (f64, f64, f64) {
    let io = trapz(&s.t, |k| s.ilf[k]) / ts;
    let vo = trapz(&s.t, |k| s.vo[k]) / ts;
    let p = trapz(&s.t, |k| s.vcf[k] * s.ils[k]) / ts;
    (io, vo, p)
}

/// ZVS figures of an orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZvsReport {
    pub on_voltage: f64,
    pub off_voltage: f64,
    pub vcf_peak: f64,
    pub zvs_ok: bool,
}

/// Fraction of the switch-voltage peak tolerated at a switching instant.
pub const ZVS_FRACTION: f64 = 0.02;

pub fn zvs_report(orbit: &PeriodicOrbit) -> ZvsReport {
    let limit = ZVS_FRACTION * orbit.vcf_peak;
    ZvsReport {
        on_voltage: orbit.zvs_on_voltage,
        off_voltage: orbit.zvs_off_voltage,
        vcf_peak: orbit.vcf_peak,
        zvs_ok: orbit.zvs_on_voltage.abs() < limit && orbit.zvs_off_voltage.abs() < limit,
    }
}

/// One application of the cycle map to `(i_Lf, v_o)` at a turn-on edge.
fn map_once(eng: &mut Engine, t_on: f64, on_time: f64, ts: f64, x: [f64; 2]) -> Result<[f64; 2]> {
    eng.set_state(ReceiverState {
        t: t_on,
        vcf: 0.0,
        ilf: x[0],
        vo: x[1],
    });
    eng.cycle(t_on, on_time, ts, &mut no_record)?;
    let s = eng.state();
    Ok([s.ilf, s.vo])
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Solves `(I − A)·step = r` for the 2×2 map matrix `A`; `None` when the
/// map has a neutral mode.
fn fixed_point_step(a: [[f64; 2]; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let m = [[1.0 - a[0][0], -a[0][1]], [-a[1][0], 1.0 - a[1][1]]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if det.is_nan() || det.abs() <= 1e-13 * scale * scale {
        return None;
    }
    let step = [
        (m[1][1] * r[0] - m[0][1] * r[1]) / det,
        (m[0][0] * r[1] - m[1][0] * r[0]) / det,
    ];
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Iterates whole switching cycles from a cold start until the cycle map
/// is stationary, then records one cycle.
pub fn find_steady_state(
    params: &ValidatedParams,
    src: &CoilSource,
    gate: &GateSchedule,
    cfg: &SimConfig,
) -> Result<PeriodicOrbit> {
    let t0 = gate.intervals.first().map_or(0.0, |iv| iv.t_on);
    find_steady_state_from(params, src, gate, cfg, ReceiverState::zero_at(t0))
}

/// As [`find_steady_state`], starting from `init` at the first turn-on
/// edge of `gate`. Only the first interval and the period of `gate` are
/// used; the schedule is taken to repeat.
///
/// With the gate timing fixed the cycle map is affine in `(i_Lf, v_o)`,
/// so its matrix is measured once from two probe cycles and each iterate
/// is extrapolated to the fixed point of that affine model. Convergence is
/// declared when both the cycle-to-cycle change and the remaining distance
/// to the fixed point fall below `ss_tolerance` relative to the state.
/// Probe cycles are not counted in [`PeriodicOrbit::cycles`].
pub fn find_steady_state_from(
    params: &ValidatedParams,
    src: &CoilSource,
    gate: &GateSchedule,
    cfg: &SimConfig,
    init: ReceiverState,
) -> Result<PeriodicOrbit> {
    cfg.validate(params.fs)?;
    let first = gate
        .intervals
        .first()
        .ok_or_else(|| Error::Usage("empty gate schedule".into()))?;
    let ts = gate.ts;
    let on_time = first.t_off - first.t_on;
    let t_on = first.t_on;
    let mut eng = Engine::new(*params, *src, cfg.dt, init);
    let mut x = [init.ilf, init.vo];
    let mut matrix: Option<[[f64; 2]; 2]> = None;
    let mut probed = false;
    for n in 1..=cfg.n_cycles_max {
        let fx = map_once(&mut eng, t_on, on_time, ts, x)?;
        let r = [fx[0] - x[0], fx[1] - x[1]];
        let size = norm(fx).max(norm(x));
        if size == 0.0 {
            return Ok(record_orbit(&mut eng, t_on, x, on_time, ts, n));
        }
        let rel = norm(r) / size;
        if !probed {
            probed = true;
            let h = [1.0f64.max(x[0].abs()) * 1e-2, 1.0f64.max(x[1].abs()) * 1e-2];
            let mut a = [[0.0; 2]; 2];
            for j in 0..2 {
                let mut xp = x;
                xp[j] += h[j];
                let fp = map_once(&mut eng, t_on, on_time, ts, xp)?;
                a[0][j] = (fp[0] - fx[0]) / h[j];
                a[1][j] = (fp[1] - fx[1]) / h[j];
            }
            matrix = Some(a);
        }
        let step = matrix.and_then(|a| fixed_point_step(a, r));
        let remaining = step.map_or(0.0, |s| norm(s) / size);
        if rel < cfg.ss_tolerance && remaining < cfg.ss_tolerance {
            return Ok(record_orbit(&mut eng, t_on, x, on_time, ts, n));
        }
        x = match step {
            Some(s) => [x[0] + s[0], x[1] + s[1]],
            None => fx,
        };
    }
    Err(Error::NoConvergence(cfg.n_cycles_max))
}

fn record_orbit(
    eng: &mut Engine,
    t_on: f64,
    x: [f64; 2],
    on_time: f64,
    ts: f64,
    cycles: usize,
) -> PeriodicOrbit {
    eng.set_state(ReceiverState {
        t: t_on,
        vcf: 0.0,
        ilf: x[0],
        vo: x[1],
    });
    let mut series = TimeSeries::default();
    let v_end = eng
        .cycle(t_on, on_time, ts, &mut |s, ils, m| series.push(s, ils, m))
        .expect("cycle already integrated once without error");
    let fin = eng.state();
    series.push(&fin, eng.ils_now(), SwitchMode::Mode2);
    // vcf at the turn-off edge, i.e. the first Mode 2 sample
    let off_idx = series.gate.iter().position(|&g| g == 0).unwrap_or(0);
    let (io, vo, p) = averages(&series, ts);
    let vcf_peak = series.vcf.iter().copied().fold(f64::MIN, f64::max);
    let (vo_min, vo_max) = series
        .vo
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    PeriodicOrbit {
        zvs_off_voltage: series.vcf[off_idx],
        series,
        ts,
        io_avg: io,
        vo_avg: vo,
        p_avg: p,
        zvs_on_voltage: v_end,
        vcf_peak,
        vo_ripple_pp: vo_max - vo_min,
        cycles,
    }
}

/// RMS difference between the orbit's normalized switch voltage and the
/// closed-form waveform, in units of `vo_avg`.
pub fn vcf_shape_error(orbit: &PeriodicOrbit) -> f64 {
    let v = orbit.normalized_vcf();
    let t0 = orbit.series.t[0];
    let sq: f64 = v
        .iter()
        .zip(&orbit.series.t)
        .map(|(x, t)| {
            let u = ((t - t0) / orbit.ts).clamp(0.0, 1.0 - 1e-15);
            (x - analytic::vcf_shape(u, 1.0)).powi(2)
        })
        .sum();
    (sq / v.len() as f64).sqrt()
}

/// THD (dB) of the simulated switch voltage over the orbit.
pub fn vcf_thd_db(orbit: &PeriodicOrbit) -> f64 {
    let n = orbit.series.len() - 1;
    analytic::thd_db(&orbit.series.vcf[..n])
}
