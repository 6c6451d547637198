//! Output-voltage regulation through the phase-shift ratio.
//!
//! Averaging the rectifier over a switching period gives a first-order
//! plant from `D` to `v_o` with gain `5·|I_Ls|·cos(2πD0)·R` and a pole at
//! `R·Co`. A PI compensator whose zero cancels that pole turns the loop
//! into a pure integrator crossing over at `fc`.
//!
//! The regulator runs once per switching cycle. It samples `v_o` at the
//! sync edge and the new phase ratio takes effect from that cycle's gate.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::{self, K_LIN};
use crate::circuit::{CircuitParams, CoilSource, ReceiverState, SwitchMode, ValidatedParams};
use crate::error::{Error, Result};
use crate::modulator::{self, clamp_phase_ratio, CounterModel, D_MAX};
use crate::sim::{self, Engine, SimConfig, TimeSeries};

/// Default crossover frequency of the compensated loop (Hz).
pub const DEFAULT_FC: f64 = 100.0;
/// Relative band around the reference used for settling time.
pub const SETTLING_BAND: f64 = 0.004;
/// Default phase-ratio perturbation for numeric Bode extraction.
pub const DEFAULT_PERTURBATION: f64 = 0.005;

/// Averaged small-signal plant `v_o/D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantModel {
    /// Output current per unit `D`: `5·|I_Ls|·cos(2πD0)` (A).
    pub gain: f64,
    /// Load resistance (Ω).
    pub r: f64,
    pub co: f64,
}

impl PlantModel {
    /// Low-frequency gain in volts per unit `D`.
    pub fn dc_gain(&self) -> f64 {
        self.gain * self.r
    }

    pub fn pole_rc(&self) -> f64 {
        self.r * self.co
    }

    pub fn pole_hz(&self) -> f64 {
        1.0 / (2.0 * PI * self.pole_rc())
    }

    pub fn tf(&self) -> Rational {
        Rational::new(vec![self.dc_gain()], vec![1.0, self.pole_rc()])
    }
}

fn check_operating_point(d0: f64) -> Result<()> {
    if d0 == D_MAX {
        return Err(Error::DegenerateOperatingPoint(d0));
    }
    if !(0.0..D_MAX).contains(&d0) {
        return Err(Error::PhaseOutOfRange(d0));
    }
    Ok(())
}

/// Plant linearized at phase ratio `d0`, using the load and output
/// capacitor of `params`.
pub fn plant_tf(params: &CircuitParams, ils_amp: f64, d0: f64) -> Result<PlantModel> {
    check_operating_point(d0)?;
    Ok(PlantModel {
        gain: K_LIN * ils_amp * (2.0 * PI * d0).cos(),
        r: params.r,
        co: params.co,
    })
}

/// PI gains in unit-`D` per volt, with the actuator limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    /// Per second.
    pub ki: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl PiGains {
    pub fn new(kp: f64, ki: f64) -> Self {
        Self {
            kp,
            ki,
            d_min: 0.0,
            d_max: D_MAX,
        }
    }

    pub fn tf(&self) -> Rational {
        Rational::new(vec![self.ki, self.kp], vec![0.0, 1.0])
    }
}

/// Gains placing the loop crossover at `fc` with the compensator zero on
/// the plant pole.
pub fn pi_gains(fc: f64, params: &CircuitParams, ils_amp: f64, d0: f64, r: f64) -> Result<PiGains> {
    if !(fc > 0.0 && fc.is_finite()) {
        return Err(Error::OutOfRange {
            name: "fc",
            value: fc,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    check_operating_point(d0)?;
    let kp = 2.0 * PI * fc * params.co / (K_LIN * ils_amp * (2.0 * PI * d0).cos());
    Ok(PiGains::new(kp, kp / (r * params.co)))
}

/// Rational function of `s`; coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(c: &[f64], s: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * s + k)
}

impl Rational {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Self {
        Self { num, den }
    }

    pub fn series(&self, other: &Rational) -> Rational {
        Rational::new(poly_mul(&self.num, &other.num), poly_mul(&self.den, &other.den))
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    pub fn at_hz(&self, f: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, 2.0 * PI * f))
    }
}

/// Loop transfer of plant and compensator, `T(s) = G_PI(s)·G(s)`. With
/// gains from [`pi_gains`] on the same plant this equals `2π·fc/s`.
pub fn closed_loop_tf(plant: &PlantModel, gains: &PiGains) -> Rational {
    gains.tf().series(&plant.tf())
}

/// One row of a Bode table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodePoint {
    pub f_hz: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrequencyResponse {
    pub rows: Vec<BodePoint>,
}

impl FrequencyResponse {
    fn from_complex(points: impl IntoIterator<Item = (f64, Complex64)>) -> Self {
        let mut rows: Vec<BodePoint> = Vec::new();
        for (f, h) in points {
            let mut phase = h.arg().to_degrees();
            if let Some(prev) = rows.last() {
                phase -= 360.0 * ((phase - prev.phase_deg) / 360.0).round();
            }
            rows.push(BodePoint {
                f_hz: f,
                mag_db: 20.0 * h.norm().log10(),
                phase_deg: phase,
            });
        }
        Self { rows }
    }

    /// CSV with header `f_hz,mag_db,phase_deg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("f_hz,mag_db,phase_deg\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.f_hz, r.mag_db, r.phase_deg);
        }
        out
    }
}

fn check_grid(f_grid: &[f64]) -> Result<()> {
    if f_grid.is_empty() {
        return Err(Error::Usage("empty frequency grid".into()));
    }
    if f_grid.iter().any(|f| !(*f > 0.0 && f.is_finite())) || f_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("frequency grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Magnitude and phase of `tf` on `f_grid`.
pub fn bode(tf: &Rational, f_grid: &[f64]) -> Result<FrequencyResponse> {
    check_grid(f_grid)?;
    Ok(FrequencyResponse::from_complex(
        f_grid.iter().map(|&f| (f, tf.at_hz(f))),
    ))
}

/// `n` logarithmically spaced frequencies from `fmin` to `fmax`.
pub fn log_grid(fmin: f64, fmax: f64, n: usize) -> Result<Vec<f64>> {
    if !(fmin > 0.0 && fmax > fmin && fmax.is_finite()) {
        return Err(Error::Usage(format!("need 0 < fmin < fmax, got {fmin} and {fmax}")));
    }
    match n {
        0 => Err(Error::Usage("need at least one point".into())),
        1 => Ok(vec![fmin]),
        _ => {
            let (a, b) = (fmin.log10(), fmax.log10());
            Ok((0..n)
                .map(|k| {
                    if k == n - 1 {
                        fmax
                    } else {
                        10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
                    }
                })
                .collect())
        }
    }
}

/// Regulator memory between updates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    pub integrator: f64,
    pub last_d: f64,
    pub saturated: bool,
}

impl PiState {
    /// State that holds `d` with zero error.
    pub fn holding(d: f64) -> Self {
        Self {
            integrator: d,
            last_d: d,
            saturated: false,
        }
    }
}

/// One regulator update. The integrator only moves while the previous
/// output was inside the limits, or when the error pulls it back inside.
pub fn pi_step(state: PiState, gains: &PiGains, vref: f64, vo_meas: f64, dt_ctrl: f64) -> (f64, PiState) {
    let e = vref - vo_meas;
    let releasing = (state.last_d >= gains.d_max && e < 0.0) || (state.last_d <= gains.d_min && e > 0.0);
    let integrator = if !state.saturated || releasing {
        state.integrator + gains.ki * e * dt_ctrl
    } else {
        state.integrator
    };
    let raw = gains.kp * e + integrator;
    let (d, clamped) = clamp_phase_ratio(raw);
    let d = d.clamp(gains.d_min, gains.d_max);
    (
        d,
        PiState {
            integrator,
            last_d: d,
            saturated: clamped || d != raw,
        },
    )
}

/// Sample of the averaged closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedSample {
    pub t: f64,
    pub vo: f64,
    pub d: f64,
}

/// Regulates the cycle-averaged model `Co·dvo/dt = 0.795·|I_Ls|·sin(2πD) − vo/R`
/// with one PI update per `dt_ctrl`, starting from `vo0` and regulator
/// state `pi0`.
#[allow(clippy::too_many_arguments)]
pub fn averaged_closed_loop(
    params: &CircuitParams,
    ils_amp: f64,
    gains: &PiGains,
    vref: f64,
    vo0: f64,
    pi0: PiState,
    t_end: f64,
    dt_ctrl: f64,
) -> Vec<AveragedSample> {
    let f = |vo: f64, d: f64| (analytic::operating_point(ils_amp, 1.0, d).0 - vo / params.r) / params.co;
    let n = (t_end / dt_ctrl).round() as usize;
    let mut vo = vo0;
    let mut st = pi0;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..n {
        let t = k as f64 * dt_ctrl;
        let (d, next) = pi_step(st, gains, vref, vo, dt_ctrl);
        st = next;
        out.push(AveragedSample { t, vo, d });
        let h = dt_ctrl;
        let k1 = f(vo, d);
        let k2 = f(vo + 0.5 * h * k1, d);
        let k3 = f(vo + 0.5 * h * k2, d);
        let k4 = f(vo + h * k3, d);
        vo += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push(AveragedSample {
        t: n as f64 * dt_ctrl,
        vo,
        d: st.last_d,
    });
    out
}

/// Drives the switched simulator one sync period at a time with a phase
/// ratio chosen at each sync edge.
struct CycleDriver {
    eng: Engine,
    ts: f64,
    counter: CounterModel,
    /// Next sync edge.
    sync: f64,
    /// Turn-off edge of a gate interval still open at `sync`.
    pending_off: Option<f64>,
}

impl CycleDriver {
    /// Starts from `state` at the turn-on edge of the cycle synced at
    /// `sync0` with phase ratio `d0`.
    #[allow(clippy::too_many_arguments)]
    fn at_turn_on(
        params: ValidatedParams,
        src: CoilSource,
        dt: f64,
        counter: CounterModel,
        sync0: f64,
        d0: f64,
        state: ReceiverState,
        record: &mut impl FnMut(&ReceiverState, f64, SwitchMode),
    ) -> Result<Self> {
        let ts = params.ts();
        let iv = modulator::gate_interval(sync0, d0, ts, &counter);
        let mut eng = Engine::new(params, src, dt, ReceiverState { t: iv.t_on, ..state });
        eng.clamp();
        let sync = sync0 + ts;
        eng.advance(iv.t_off.min(sync), SwitchMode::Mode1, record)?;
        Ok(Self {
            eng,
            ts,
            counter,
            sync,
            pending_off: (iv.t_off > sync).then_some(iv.t_off),
        })
    }

    /// Runs the period starting at the current sync edge with ratio `d`.
    fn period(&mut self, d: f64, record: &mut impl FnMut(&ReceiverState, f64, SwitchMode)) -> Result<()> {
        let iv = modulator::gate_interval(self.sync, d, self.ts, &self.counter);
        if let Some(off) = self.pending_off.take() {
            self.eng.advance(off.min(iv.t_on), SwitchMode::Mode1, record)?;
        }
        self.eng.advance(iv.t_on, SwitchMode::Mode2, record)?;
        self.eng.clamp();
        self.sync += self.ts;
        self.eng.advance(iv.t_off.min(self.sync), SwitchMode::Mode1, record)?;
        self.pending_off = (iv.t_off > self.sync).then_some(iv.t_off);
        Ok(())
    }
}

fn first_sync(src: &CoilSource, ts: f64) -> f64 {
    src.phase_origin + (-src.phase_origin / ts).ceil() * ts
}

/// Periodic orbit at constant `d` with the gate synced to `src`.
fn orbit_at(params: &ValidatedParams, src: &CoilSource, d: f64, cfg: &SimConfig, counter: &CounterModel) -> Result<sim::PeriodicOrbit> {
    let g = modulator::periodic_schedule(src, params.fs, d, 1, counter)?;
    sim::find_steady_state(params, src, &g, cfg)
}

/// Phase ratio whose steady state delivers `vref`, by bisection on the
/// switched model. Returns the ratio and its orbit.
pub fn regulated_operating_point(
    params: &ValidatedParams,
    src: &CoilSource,
    vref: f64,
    cfg: &SimConfig,
) -> Result<(f64, sim::PeriodicOrbit)> {
    let counter = CounterModel::exact();
    let vo_at = |d: f64| orbit_at(params, src, d, cfg, &counter);
    let mut lo = 0.0;
    let lo_orbit = vo_at(lo)?;
    if lo_orbit.vo_avg >= vref {
        return Err(Error::Usage(format!(
            "vref = {vref} V is below the {:.3} V delivered at D = 0",
            lo_orbit.vo_avg
        )));
    }
    // output voltage peaks slightly below D = 0.25 when the tank is detuned
    let scan: Vec<f64> = (1..=25).map(|k| k as f64 * 0.01).collect();
    let mut hi = None;
    for &d in &scan {
        if vo_at(d)?.vo_avg >= vref {
            hi = Some(d);
            break;
        }
        lo = d;
    }
    let mut hi = hi.ok_or_else(|| {
        Error::Usage(format!("vref = {vref} V is above what the coil current can deliver"))
    })?;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if vo_at(mid)?.vo_avg < vref {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = 0.5 * (lo + hi);
    Ok((d, vo_at(d)?))
}

/// Closed-loop test scenario. Load and reference changes act at the first
/// sync edge at or after `t_step`; coil-current steps act at `t_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Load resistance steps from `r1` to `r2`; `f64::INFINITY` is an open
    /// output.
    LoadStep { r1: f64, r2: f64, t_step: f64 },
    /// Coil-current amplitude (peak) steps from `amp1` to `amp2`.
    SourceStep { amp1: f64, amp2: f64, t_step: f64 },
    /// Reference steps from `v1` to `v2`.
    ReferenceStep { v1: f64, v2: f64, t_step: f64 },
}

impl Scenario {
    pub fn t_step(&self) -> f64 {
        match *self {
            Scenario::LoadStep { t_step, .. }
            | Scenario::SourceStep { t_step, .. }
            | Scenario::ReferenceStep { t_step, .. } => t_step,
        }
    }
}

/// Settings shared by closed-loop runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopConfig {
    /// Reference after any reference step (V).
    pub vref: f64,
    pub t_end: f64,
    pub sim: SimConfig,
    pub counter: CounterModel,
}

/// Response figures measured after the scenario event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    /// Largest `|vo − vref|` after a disturbance, or the excursion beyond
    /// the new reference after a reference step (V).
    pub overshoot: f64,
    /// `|mean(vo) − vref|` over the last 100 cycles (V).
    pub steady_state_error: f64,
    /// Time from the event until `vo` last leaves a 0.4 % band (s).
    pub settling_time: f64,
    /// Phase ratio that held `vref` before the event.
    pub d_initial: f64,
    pub d_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    /// Switched waveforms with a `D` column.
    pub series: TimeSeries,
    /// `(t, vo, D)` at every sync edge.
    pub per_cycle: Vec<(f64, f64, f64)>,
    pub summary: StepSummary,
}

/// Regulates the switched rectifier through `scenario`, starting from the
/// periodic steady state that holds the initial reference under the
/// initial conditions.
pub fn simulate_closed_loop(
    params: &CircuitParams,
    src: &CoilSource,
    gains: &PiGains,
    scenario: Scenario,
    cfg: &ClosedLoopConfig,
) -> Result<ClosedLoopRun> {
    cfg.sim.validate(params.fs)?;
    let ts = params.ts();
    let t_step = scenario.t_step();
    let (r1, r2) = match scenario {
        Scenario::LoadStep { r1, r2, .. } => (r1, r2),
        _ => (params.r, params.r),
    };
    let (v1, v2) = match scenario {
        Scenario::ReferenceStep { v1, v2, .. } => (v1, v2),
        _ => (cfg.vref, cfg.vref),
    };
    // the load check accepts an open output; everything else must validate
    let with_r = |r: f64| -> Result<ValidatedParams> {
        let probe = CircuitParams {
            r: if r.is_infinite() { 1.0 } else { r },
            ..*params
        };
        probe.validate()?;
        Ok(ValidatedParams::assume_valid(CircuitParams { r, ..*params }))
    };
    let p1 = with_r(r1)?;
    with_r(r2)?;
    let (src_pre, src_run) = match scenario {
        Scenario::SourceStep { amp1, amp2, .. } => (
            CoilSource {
                amplitude: amp1,
                amplitude_step: None,
                ..*src
            },
            CoilSource {
                amplitude: amp1,
                ..*src
            }
            .with_amplitude_step(t_step, amp2),
        ),
        _ => (*src, *src),
    };
    let (d0, orbit) = regulated_operating_point(&p1, &src_pre, v1, &cfg.sim)?;

    let sync0 = first_sync(&src_run, ts);
    let stride = cfg.sim.record_stride;
    let mut series = TimeSeries {
        d: Some(Vec::new()),
        ..TimeSeries::default()
    };
    let mut step = 0usize;
    let mut d_now = d0;
    let mut vref_now = v1;
    let mut after_event = false;
    let mut peak = 0.0f64;
    let mut rec = |s: &ReceiverState, ils: f64, mode: SwitchMode, d: f64, vref: f64, after: bool| {
        if step.is_multiple_of(stride) {
            series.t.push(s.t);
            series.vcf.push(s.vcf);
            series.ilf.push(s.ilf);
            series.vo.push(s.vo);
            series.ils.push(ils);
            series.gate.push(mode.gate());
            series.d.as_mut().unwrap().push(d);
        }
        step += 1;
        if after {
            let dev = match scenario {
                Scenario::ReferenceStep { .. } => (s.vo - vref) * (v2 - v1).signum(),
                _ => (s.vo - vref).abs(),
            };
            peak = peak.max(dev);
        }
    };
    let start = orbit.start_state();
    let mut driver = CycleDriver::at_turn_on(
        p1,
        src_run,
        cfg.sim.dt,
        cfg.counter,
        sync0,
        d0,
        start,
        &mut |s, i, m| rec(s, i, m, d0, v1, false),
    )?;
    let mut state = PiState::holding(d0);
    let mut per_cycle = Vec::new();
    let mut t_event = None;
    while driver.sync < cfg.t_end {
        let t = driver.sync;
        if !after_event && t >= t_step {
            after_event = true;
            match scenario {
                Scenario::LoadStep { r2, .. } => driver.eng.set_load(r2),
                Scenario::ReferenceStep { v2, .. } => vref_now = v2,
                Scenario::SourceStep { .. } => {}
            }
            t_event = Some(match scenario {
                Scenario::SourceStep { .. } => t_step,
                _ => t,
            });
        }
        let vo = driver.eng.state().vo;
        let (d, next) = pi_step(state, gains, vref_now, vo, ts);
        state = next;
        d_now = d;
        per_cycle.push((t, vo, d));
        let (vr, after) = (vref_now, after_event);
        driver.period(d, &mut |s, i, m| rec(s, i, m, d, vr, after))?;
    }
    let fin = driver.eng.state();
    rec(&fin, driver.eng.ils_now(), SwitchMode::Mode2, d_now, vref_now, after_event);

    let t_event = t_event.unwrap_or(cfg.t_end);
    let tail = &per_cycle[per_cycle.len().saturating_sub(100)..];
    let mean = tail.iter().map(|c| c.1).sum::<f64>() / tail.len().max(1) as f64;
    let band = SETTLING_BAND * v2;
    let settling_time = per_cycle
        .iter()
        .filter(|c| c.0 >= t_event && (c.1 - v2).abs() > band)
        .map(|c| c.0 - t_event + ts)
        .fold(0.0, f64::max);
    Ok(ClosedLoopRun {
        series,
        summary: StepSummary {
            overshoot: peak.max(0.0),
            steady_state_error: (mean - v2).abs(),
            settling_time,
            d_initial: d0,
            d_final: d_now,
        },
        per_cycle,
    })
}

/// Extracts `v_o/D` from the switched simulator by superimposing
/// `amplitude·sin(2πft)` on `d0`, one update per cycle. Each frequency
/// settles for five output time constants and is then correlated over an
/// integer number of perturbation periods. Frequencies run in parallel.
pub fn numeric_frequency_response(
    params: &ValidatedParams,
    src: &CoilSource,
    d0: f64,
    f_grid: &[f64],
    amplitude: f64,
    cfg: &SimConfig,
) -> Result<FrequencyResponse> {
    check_grid(f_grid)?;
    check_operating_point(d0)?;
    if !(amplitude > 0.0 && d0 - amplitude >= 0.0 && d0 + amplitude <= D_MAX) {
        return Err(Error::OutOfRange {
            name: "amplitude",
            value: amplitude,
            lo: 0.0,
            hi: d0.min(D_MAX - d0),
        });
    }
    cfg.validate(params.fs)?;
    let counter = CounterModel::exact();
    let orbit = orbit_at(params, src, d0, cfg, &counter)?;
    let ts = params.ts();
    let settle = (5.0 * params.r * params.co / ts).ceil() as usize;
    let points: Vec<Result<(f64, Complex64)>> = f_grid
        .par_iter()
        .map(|&f| {
            let per_period = 1.0 / (f * ts);
            let n_periods = (0.02 * f).ceil().max(1.0);
            let window = (n_periods * per_period).round() as usize;
            let sync0 = first_sync(src, ts);
            let mut drv = CycleDriver::at_turn_on(
                *params,
                *src,
                cfg.dt,
                counter,
                sync0,
                d0,
                orbit.start_state(),
                &mut |_, _, _| {},
            )?;
            let w = 2.0 * PI * f;
            let t_start = drv.sync;
            let mut vo_acc = Vec::with_capacity(window);
            let mut d_acc = Vec::with_capacity(window);
            for k in 0..settle + window {
                let t = drv.sync - t_start;
                let d = d0 + amplitude * (w * t).sin();
                if k >= settle {
                    vo_acc.push((t, drv.eng.state().vo));
                    d_acc.push(d);
                }
                drv.period(d, &mut |_, _, _| {})?;
            }
            let corr = |xs: &mut dyn Iterator<Item = (f64, f64)>| -> Complex64 {
                let v: Vec<(f64, f64)> = xs.collect();
                let mean = v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64;
                v.iter()
                    .map(|&(t, x)| Complex64::from_polar(x - mean, -w * t))
                    .sum()
            };
            let hv = corr(&mut vo_acc.iter().copied());
            let hd = corr(&mut vo_acc.iter().map(|x| x.0).zip(d_acc.iter().copied()));
            Ok((f, hv / hd))
        })
        .collect();
    let mut pts = Vec::with_capacity(points.len());
    for p in points {
        pts.push(p?);
    }
    Ok(FrequencyResponse::from_complex(pts))
}
