//! Command-line front end.
//!
//! Every command writes CSV to `--out` and a short `key = value` report to
//! standard output. Exit status is 0 on success, 2 for usage and
//! configuration errors and 3 when the numerics fail.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::analytic;
use crate::circuit::{CircuitParams, CoilSource, ReceiverState};
use crate::config::{ConfigMap, RunConfig};
use crate::control::{self, ClosedLoopConfig, PiGains, Scenario};
use crate::design::{self, DesignSpec};
use crate::error::{Error, Result};
use crate::modulator::{self, CounterModel};
use crate::sim;

#[derive(Debug, Parser)]
#[command(name = "wpt-rx", version, about = "Class-E regulated wireless power receiver toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Size Lf, Cf and Co over the admissible admittance band.
    Design(DesignArgs),
    /// Periodic steady state at a fixed phase ratio.
    Steady(SteadyArgs),
    /// Closed-loop scenario or open-loop transient.
    Simulate(SimulateArgs),
    /// Plant and loop Bode tables.
    Bode(BodeArgs),
    /// Steady states over a parameter range.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a configuration value, e.g. `--set r=48`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut map = ConfigMap::load(&self.config).map_err(|e| match e {
            Error::Io(io) => Error::Usage(format!("cannot read {}: {io}", self.config.display())),
            other => other,
        })?;
        for o in &self.overrides {
            map.set(o)?;
        }
        map.resolve()
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub fs: f64,
    /// Largest coil current amplitude (A, peak).
    #[arg(long)]
    pub ils_max: f64,
    /// Smallest output voltage (V).
    #[arg(long)]
    pub vo_min: f64,
    /// Allowed output ripple (%).
    #[arg(long)]
    pub ripple: f64,
    /// Position of the chosen design in the band, 0 to 1.
    #[arg(long, default_value_t = 0.5)]
    pub y_fraction: f64,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Region CSV; printed to stdout (report to stderr) when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Phase-shift ratio.
    #[arg(long = "D", alias = "d")]
    pub d: f64,
    /// Load resistance, overriding the config.
    #[arg(long = "R", alias = "r")]
    pub r: Option<f64>,
    /// Quantize gate edges with a counter clocked at this rate (Hz).
    #[arg(long)]
    pub clock: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    #[value(name = "load_step")]
    LoadStep,
    #[value(name = "source_step")]
    SourceStep,
    #[value(name = "reference_step")]
    ReferenceStep,
    #[value(name = "open_loop")]
    OpenLoop,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, value_enum)]
    pub scenario: ScenarioName,
    /// Phase ratio for `open_loop`.
    #[arg(long = "D", alias = "d")]
    pub d: Option<f64>,
    #[arg(long, default_value_t = 0.35)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.02)]
    pub t_step: f64,
    /// Load before a `load_step` (Ω); the config load applies after it.
    #[arg(long, default_value_t = 1000.0)]
    pub r_from: f64,
    /// Coil current amplitude before a `source_step` (A, peak); defaults to
    /// 0.625 of the configured amplitude.
    #[arg(long)]
    pub amp_from: Option<f64>,
    /// Reference before a `reference_step` (V); defaults to 0.9·vo_nominal.
    #[arg(long)]
    pub vref_from: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub stride: usize,
    #[arg(long)]
    pub clock: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BodeArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 0.1)]
    pub fmin: f64,
    #[arg(long, default_value_t = 1e4)]
    pub fmax: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Operating point; defaults to the one delivering vo_nominal.
    #[arg(long)]
    pub d0: Option<f64>,
    /// Also extract the response from the switched simulator.
    #[arg(long)]
    pub numeric: bool,
    /// Points of the numeric grid, spread over [max(fmin, 1 Hz), min(fmax, 1 kHz)].
    #[arg(long, default_value_t = 7)]
    pub numeric_points: usize,
    #[arg(long, default_value_t = control::DEFAULT_PERTURBATION)]
    pub amplitude: f64,
    /// Output prefix; writes `<out>_plant.csv`, `<out>_loop.csv` and with
    /// `--numeric` `<out>_numeric.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "R", alias = "r")]
    R,
    #[value(name = "D", alias = "d")]
    D,
    #[value(name = "ils")]
    Ils,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long)]
    pub steps: usize,
    /// Fixed phase ratio for open-loop sweeps of R or ils.
    #[arg(long = "D", alias = "d")]
    pub d: Option<f64>,
    /// Regulate vo_nominal at every point instead of holding D.
    #[arg(long)]
    pub closed_loop: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command, writing the report to `report`.
pub fn run(cli: &Cli, report: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Design(a) => cmd_design(a, report),
        Command::Steady(a) => cmd_steady(a, report),
        Command::Simulate(a) => cmd_simulate(a, report),
        Command::Bode(a) => cmd_bode(a, report),
        Command::Sweep(a) => cmd_sweep(a, report),
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn counter_for(clock: Option<f64>, fs: f64) -> Result<CounterModel> {
    match clock {
        None => Ok(CounterModel::exact()),
        Some(c) if c > fs && c.is_finite() => Ok(CounterModel::for_clock(c, fs)),
        Some(c) => Err(Error::OutOfRange {
            name: "clock",
            value: c,
            lo: fs,
            hi: f64::INFINITY,
        }),
    }
}

/// Phase ratio that the averaged current law predicts for `vo_nominal` at
/// load `r` and coil current `ils`.
fn nominal_phase(p: &CircuitParams, ils: f64, r: f64) -> Result<f64> {
    analytic::phase_for_current(ils, p.vo_nominal / r)
        .filter(|d| *d < modulator::D_MAX)
        .ok_or_else(|| {
            Error::Usage(format!(
                "vo_nominal = {} V at R = {r} Ω needs more than the {ils} A coil current can deliver; \
                 lower vo_nominal or set kp and ki",
                p.vo_nominal
            ))
        })
}

fn gains_for(cfg: &RunConfig, ils: f64, r: f64) -> Result<PiGains> {
    match (cfg.kp, cfg.ki) {
        (Some(kp), Some(ki)) => Ok(PiGains::new(kp, ki)),
        _ => {
            let d0 = nominal_phase(&cfg.params, ils, r)?;
            control::pi_gains(cfg.fc, &cfg.params, ils, d0, r)
        }
    }
}

fn cmd_design(a: &DesignArgs, report: &mut dyn Write) -> Result<()> {
    let spec = DesignSpec {
        ils_max: a.ils_max,
        vo_min: a.vo_min,
        fs: a.fs,
        ripple_pct: a.ripple,
    };
    let chosen = design::design_at_fraction(&spec, a.y_fraction)?;
    let region = design::feasible_region(&spec, a.points)?;
    let co = design::recommended_co(&region);
    let text = format!(
        "y = {:e}\nlf = {:e}\ncf = {:e}\nco_min = {:e}\ny_min = {:e}\ny_max = {:e}\n",
        chosen.y, chosen.lf, chosen.cf, co, chosen.band.0, chosen.band.1
    );
    let csv = design::region_csv(&region);
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            report.write_all(text.as_bytes())?;
        }
        None => {
            eprint!("{text}");
            report.write_all(csv.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_steady(a: &SteadyArgs, report: &mut dyn Write) -> Result<()> {
    let cfg = a.cfg.load()?;
    let mut params = cfg.params;
    if let Some(r) = a.r {
        params.r = r;
    }
    let params = params.validate()?;
    let counter = counter_for(a.clock, params.fs)?;
    let src = CoilSource::new(params.ils_amp);
    let gate = modulator::periodic_schedule(&src, params.fs, a.d, 1, &counter)?;
    let orbit = sim::find_steady_state(&params, &src, &gate, &cfg.sim)?;
    let z = sim::zvs_report(&orbit);
    write_file(&a.out, &orbit.series.to_csv())?;
    writeln!(report, "D = {}", a.d)?;
    writeln!(report, "R = {}", params.r)?;
    writeln!(report, "vo_avg = {:.6}", orbit.vo_avg)?;
    writeln!(report, "io_avg = {:.6}", orbit.io_avg)?;
    writeln!(report, "p_avg = {:.6}", orbit.p_avg)?;
    writeln!(report, "vcf_peak = {:.6}", orbit.vcf_peak)?;
    writeln!(report, "zvs_on_voltage = {:.6}", z.on_voltage)?;
    writeln!(report, "zvs_off_voltage = {:.6}", z.off_voltage)?;
    writeln!(report, "zvs_ok = {}", z.zvs_ok)?;
    writeln!(report, "vo_ripple_pp = {:.6e}", orbit.vo_ripple_pp)?;
    writeln!(report, "thd_vcf_db = {:.4}", sim::vcf_thd_db(&orbit))?;
    writeln!(report, "cycles = {}", orbit.cycles)?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, report: &mut dyn Write) -> Result<()> {
    let cfg = a.cfg.load()?;
    let p = cfg.params;
    let sim_cfg = sim::SimConfig {
        record_stride: a.stride,
        ..cfg.sim
    };
    sim_cfg.validate(p.fs)?;
    let counter = counter_for(a.clock, p.fs)?;
    if !(a.t_end > 0.0 && a.t_end.is_finite()) {
        return Err(Error::Usage(format!("--t-end must be positive, got {}", a.t_end)));
    }
    let src = CoilSource::new(p.ils_amp);
    if a.scenario == ScenarioName::OpenLoop {
        let d = a
            .d
            .ok_or_else(|| Error::Usage("open_loop needs --D".into()))?;
        let params = p.validate()?;
        let n = (a.t_end * p.fs).ceil() as usize;
        let gate = modulator::periodic_schedule(&src, p.fs, d, n, &counter)?;
        let run = sim::run_transient(&params, &src, &gate, &sim_cfg, ReceiverState::default())?;
        write_file(&a.out, &run.series.to_csv())?;
        let fin = run.final_state;
        writeln!(report, "scenario = open_loop")?;
        writeln!(report, "D = {d}")?;
        writeln!(report, "vo_final = {:.6}", fin.vo)?;
        writeln!(report, "samples = {}", run.series.len())?;
        return Ok(());
    }
    let (scenario, name, ils_gain) = match a.scenario {
        ScenarioName::LoadStep => (
            Scenario::LoadStep {
                r1: a.r_from,
                r2: p.r,
                t_step: a.t_step,
            },
            "load_step",
            p.ils_amp,
        ),
        ScenarioName::SourceStep => (
            Scenario::SourceStep {
                amp1: a.amp_from.unwrap_or(0.625 * p.ils_amp),
                amp2: p.ils_amp,
                t_step: a.t_step,
            },
            "source_step",
            p.ils_amp,
        ),
        ScenarioName::ReferenceStep => (
            Scenario::ReferenceStep {
                v1: a.vref_from.unwrap_or(0.9 * p.vo_nominal),
                v2: p.vo_nominal,
                t_step: a.t_step,
            },
            "reference_step",
            p.ils_amp,
        ),
        ScenarioName::OpenLoop => unreachable!(),
    };
    let gains = gains_for(&cfg, ils_gain, p.r)?;
    let cl = ClosedLoopConfig {
        vref: p.vo_nominal,
        t_end: a.t_end,
        sim: sim_cfg,
        counter,
    };
    let run = control::simulate_closed_loop(&p, &src, &gains, scenario, &cl)?;
    write_file(&a.out, &run.series.to_csv())?;
    let s = run.summary;
    writeln!(report, "scenario = {name}")?;
    writeln!(report, "kp = {:.6}", gains.kp)?;
    writeln!(report, "ki = {:.6}", gains.ki)?;
    writeln!(report, "overshoot_v = {:.6}", s.overshoot)?;
    writeln!(report, "overshoot_pct = {:.4}", 100.0 * s.overshoot / p.vo_nominal)?;
    writeln!(report, "steady_state_error_v = {:.6}", s.steady_state_error)?;
    writeln!(report, "settling_time_s = {:.6}", s.settling_time)?;
    writeln!(report, "d_initial = {:.6}", s.d_initial)?;
    writeln!(report, "d_final = {:.6}", s.d_final)?;
    Ok(())
}

fn suffixed(prefix: &Path, tag: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!("_{tag}.csv"));
    prefix.with_file_name(name)
}

fn cmd_bode(a: &BodeArgs, report: &mut dyn Write) -> Result<()> {
    let cfg = a.cfg.load()?;
    let p = cfg.params;
    let grid = control::log_grid(a.fmin, a.fmax, a.points)?;
    let d0 = match a.d0 {
        Some(d) => d,
        None => nominal_phase(&p, p.ils_amp, p.r)?,
    };
    let plant = control::plant_tf(&p, p.ils_amp, d0)?;
    let gains = match (cfg.kp, cfg.ki) {
        (Some(kp), Some(ki)) => PiGains::new(kp, ki),
        _ => control::pi_gains(cfg.fc, &p, p.ils_amp, d0, p.r)?,
    };
    let plant_fr = control::bode(&plant.tf(), &grid)?;
    let loop_fr = control::bode(&control::closed_loop_tf(&plant, &gains), &grid)?;
    write_file(&suffixed(&a.out, "plant"), &plant_fr.to_csv())?;
    write_file(&suffixed(&a.out, "loop"), &loop_fr.to_csv())?;
    writeln!(report, "d0 = {d0:.6}")?;
    writeln!(report, "dc_gain_v = {:.6}", plant.dc_gain())?;
    writeln!(report, "pole_hz = {:.6}", plant.pole_hz())?;
    writeln!(report, "kp = {:.6}", gains.kp)?;
    writeln!(report, "ki = {:.6}", gains.ki)?;
    writeln!(report, "rows = {}", grid.len())?;
    if a.numeric {
        let lo = a.fmin.max(1.0);
        let hi = a.fmax.min(1000.0);
        if lo >= hi {
            return Err(Error::Usage("numeric grid needs fmax > 1 Hz and fmin < 1 kHz".into()));
        }
        let ngrid = control::log_grid(lo, hi, a.numeric_points)?;
        let params = p.validate()?;
        let sim_cfg = sim::SimConfig {
            dt: cfg.sim.dt.max(p.ts() / 500.0),
            ..cfg.sim
        };
        let fr = control::numeric_frequency_response(
            &params,
            &CoilSource::new(p.ils_amp),
            d0,
            &ngrid,
            a.amplitude,
            &sim_cfg,
        )?;
        write_file(&suffixed(&a.out, "numeric"), &fr.to_csv())?;
        let analytic_fr = control::bode(&plant.tf(), &ngrid)?;
        let worst = fr
            .rows
            .iter()
            .zip(&analytic_fr.rows)
            .map(|(n, a)| (n.mag_db - a.mag_db).abs())
            .fold(0.0, f64::max);
        writeln!(report, "numeric_rows = {}", fr.rows.len())?;
        writeln!(report, "numeric_max_mag_error_db = {worst:.4}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct SweepRow {
    value: f64,
    d: f64,
    vo: f64,
    io: f64,
    p: f64,
    zvs_on: f64,
    zvs_ok: bool,
    reg_error: Option<f64>,
    ok: bool,
}

fn sweep_point(cfg: &RunConfig, param: SweepParam, value: f64, d_fixed: Option<f64>, closed: bool) -> Result<SweepRow> {
    let mut p = cfg.params;
    let mut d = d_fixed;
    match param {
        SweepParam::R => p.r = value,
        SweepParam::Ils => p.ils_amp = value,
        SweepParam::D => d = Some(value),
    }
    let params = p.validate()?;
    let src = CoilSource::new(p.ils_amp);
    let (d, orbit, reg_error) = if closed {
        let (d, orbit) = control::regulated_operating_point(&params, &src, p.vo_nominal, &cfg.sim)?;
        let err = orbit.vo_avg - p.vo_nominal;
        (d, orbit, Some(err))
    } else {
        let d = d.ok_or_else(|| Error::Usage("open-loop sweep needs --D".into()))?;
        let gate = modulator::periodic_schedule(&src, p.fs, d, 1, &CounterModel::exact())?;
        (d, sim::find_steady_state(&params, &src, &gate, &cfg.sim)?, None)
    };
    let z = sim::zvs_report(&orbit);
    Ok(SweepRow {
        value,
        d,
        vo: orbit.vo_avg,
        io: orbit.io_avg,
        p: orbit.p_avg,
        zvs_on: z.on_voltage,
        zvs_ok: z.zvs_ok,
        reg_error,
        ok: true,
    })
}

fn cmd_sweep(a: &SweepArgs, report: &mut dyn Write) -> Result<()> {
    let cfg = a.cfg.load()?;
    if a.steps == 0 || !a.from.is_finite() || !a.to.is_finite() {
        return Err(Error::Usage("need --steps ≥ 1 and finite --from/--to".into()));
    }
    if a.closed_loop && a.param == SweepParam::D {
        return Err(Error::Usage("a closed-loop sweep cannot also sweep D".into()));
    }
    if !a.closed_loop && a.param != SweepParam::D && a.d.is_none() {
        return Err(Error::Usage("open-loop sweep needs --D".into()));
    }
    let values: Vec<f64> = (0..a.steps)
        .map(|k| {
            if a.steps == 1 {
                a.from
            } else {
                a.from + (a.to - a.from) * k as f64 / (a.steps - 1) as f64
            }
        })
        .collect();
    let results: Vec<(f64, Result<SweepRow>)> = values
        .par_iter()
        .map(|&v| (v, sweep_point(&cfg, a.param, v, a.d, a.closed_loop)))
        .collect();
    let mut csv = String::from("value,D,vo_avg,io_avg,p_avg,zvs_on,zvs_ok,reg_error,ok\n");
    let mut failed = Vec::new();
    for (v, r) in &results {
        match r {
            Ok(row) => {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    row.value,
                    row.d,
                    row.vo,
                    row.io,
                    row.p,
                    row.zvs_on,
                    row.zvs_ok,
                    row.reg_error.map(|e| e.to_string()).unwrap_or_default(),
                    row.ok
                ));
            }
            Err(e) => {
                csv.push_str(&format!("{v},,,,,,,,false\n"));
                failed.push(format!("{v}: {e}"));
            }
        }
    }
    write_file(&a.out, &csv)?;
    let ok: Vec<&SweepRow> = results.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    writeln!(report, "points = {}", results.len())?;
    writeln!(report, "failed = {}", failed.len())?;
    if !ok.is_empty() {
        let (lo, hi) = ok
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r.io), hi.max(r.io)));
        writeln!(report, "io_spread_pct = {:.4}", 100.0 * (hi - lo) / hi.abs().max(f64::MIN_POSITIVE))?;
        writeln!(report, "zvs_ok_all = {}", ok.iter().all(|r| r.zvs_ok))?;
        if a.closed_loop {
            let worst = ok
                .iter()
                .filter_map(|r| r.reg_error)
                .fold(0.0f64, |m, e| m.max(e.abs()));
            writeln!(report, "max_reg_error_v = {worst:.6e}")?;
        }
    }
    if let Some(first) = failed.first() {
        return Err(Error::SweepFailed {
            failed: failed.len(),
            first: first.clone(),
        });
    }
    Ok(())
}
