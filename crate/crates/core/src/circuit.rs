//! Circuit parameters, the receiver-coil current source and the
//! instantaneous receiver state.
//!
//! The coil current is an ideal sinusoid: with a series-compensated receiver
//! coil its amplitude and phase do not depend on what the rectifier does, so
//! nothing in [`CoilSource`] can see the rectifier components.

use std::f64::consts::PI;
use std::ops::Deref;

use crate::error::{Error, Result, Violation};

/// Component values and drive parameters of the receiver, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Resonant inductor (H).
    pub lf: f64,
    /// Resonant capacitor across the switch (F).
    pub cf: f64,
    /// Output capacitor (F).
    pub co: f64,
    /// Load resistance (Ω).
    pub r: f64,
    /// Switching frequency, equal to the coil current frequency (Hz).
    pub fs: f64,
    /// Peak amplitude of the receiver-coil current (A).
    pub ils_amp: f64,
    /// Receiver coil inductance (H), carried as metadata only.
    pub ls: Option<f64>,
    /// Receiver series compensation capacitor (F), metadata only.
    pub cs: Option<f64>,
    /// Nominal output voltage (V).
    pub vo_nominal: f64,
}

impl CircuitParams {
    /// The 200 kHz, 24 V laboratory prototype. The coil current is the
    /// 1.6 A peak-to-peak upper value used in the line-step experiment.
    pub fn prototype() -> Self {
        Self {
            lf: 5.3e-6,
            cf: 76e-9,
            co: 3300e-6,
            r: 36.0,
            fs: 200e3,
            ils_amp: 0.8,
            ls: Some(164e-6),
            cs: Some(3.86e-9),
            vo_nominal: 24.0,
        }
    }

    pub fn ts(&self) -> f64 {
        1.0 / self.fs
    }

    /// Characteristic admittance √(Cf/Lf) in siemens.
    pub fn admittance(&self) -> f64 {
        (self.cf / self.lf).sqrt()
    }

    /// Resonant frequency of the Lf–Cf tank (Hz).
    pub fn resonance_hz(&self) -> f64 {
        1.0 / (2.0 * PI * (self.lf * self.cf).sqrt())
    }

    /// Checks every invariant and collects all violations.
    pub fn validate(self) -> Result<ValidatedParams> {
        let mut violations = Vec::new();
        let mut check = |name: &'static str, v: f64| {
            if v.is_nan() || v <= 0.0 {
                violations.push(Violation::NonPositiveValue(name));
            } else if !v.is_finite() {
                violations.push(Violation::NonFinite(name));
            }
        };
        check("lf", self.lf);
        check("cf", self.cf);
        check("co", self.co);
        check("r", self.r);
        check("fs", self.fs);
        check("ils_amp", self.ils_amp);
        check("vo_nominal", self.vo_nominal);
        if let Some(ls) = self.ls {
            check("ls", ls);
        }
        if let Some(cs) = self.cs {
            check("cs", cs);
        }
        if violations.is_empty() {
            Ok(ValidatedParams(self))
        } else {
            Err(Error::Invalid(violations))
        }
    }
}

/// Parameters that passed [`CircuitParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(CircuitParams);

impl ValidatedParams {
    pub fn into_inner(self) -> CircuitParams {
        self.0
    }

    /// Same parameters with a different load, re-validated.
    pub fn with_load(self, r: f64) -> Result<Self> {
        CircuitParams { r, ..self.0 }.validate()
    }

    /// Wraps parameters whose only departure from validity is an open
    /// (infinite) load.
    pub(crate) fn assume_valid(p: CircuitParams) -> Self {
        Self(p)
    }

    /// Same parameters with a different output capacitor, re-validated.
    pub fn with_output_cap(self, co: f64) -> Result<Self> {
        CircuitParams { co, ..self.0 }.validate()
    }
}

impl Deref for ValidatedParams {
    type Target = CircuitParams;

    fn deref(&self) -> &CircuitParams {
        &self.0
    }
}

/// Ideal sinusoidal receiver-coil current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilSource {
    /// Peak amplitude (A).
    pub amplitude: f64,
    /// Time of a rising zero crossing (s).
    pub phase_origin: f64,
    /// Optional `(time, new amplitude)`; the phase is continuous across it.
    pub amplitude_step: Option<(f64, f64)>,
}

impl CoilSource {
    pub fn new(amplitude: f64) -> Self {
        Self {
            amplitude,
            phase_origin: 0.0,
            amplitude_step: None,
        }
    }

    pub fn with_phase_origin(mut self, t: f64) -> Self {
        self.phase_origin = t;
        self
    }

    pub fn with_amplitude_step(mut self, t: f64, amplitude: f64) -> Self {
        self.amplitude_step = Some((t, amplitude));
        self
    }

    /// Amplitude in force at time `t`.
    pub fn amplitude_at(&self, t: f64) -> f64 {
        match self.amplitude_step {
            Some((t_step, a)) if t >= t_step => a,
            _ => self.amplitude,
        }
    }

    /// Instantaneous coil current at `t` for a source running at `fs`.
    pub fn ils_at(&self, fs: f64, t: f64) -> f64 {
        let phase = 2.0 * PI * (fs * (t - self.phase_origin)).fract();
        self.amplitude_at(t) * phase.sin()
    }
}

/// Conduction state of the single switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchMode {
    /// Switch on; the capacitor across it is shorted.
    Mode1,
    /// Switch off; the Lf–Cf tank rings.
    Mode2,
}

impl SwitchMode {
    /// Gate level, 1 while the switch conducts.
    pub fn gate(self) -> u8 {
        match self {
            SwitchMode::Mode1 => 1,
            SwitchMode::Mode2 => 0,
        }
    }
}

/// Instantaneous circuit state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReceiverState {
    pub t: f64,
    pub vcf: f64,
    pub ilf: f64,
    pub vo: f64,
}

impl ReceiverState {
    pub fn zero_at(t: f64) -> Self {
        Self {
            t,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.vcf.is_finite() && self.ilf.is_finite() && self.vo.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn prototype_is_valid() {
        assert!(CircuitParams::prototype().validate().is_ok());
    }

    #[test]
    fn zero_inductance_rejected() {
        let p = CircuitParams {
            lf: 0.0,
            ..CircuitParams::prototype()
        };
        match p.validate() {
            Err(Error::Invalid(v)) => assert_eq!(v, vec![Violation::NonPositiveValue("lf")]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_load_rejected() {
        let p = CircuitParams {
            r: -1.0,
            ..CircuitParams::prototype()
        };
        match p.validate() {
            Err(Error::Invalid(v)) => assert_eq!(v, vec![Violation::NonPositiveValue("r")]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_violation_is_reported() {
        let p = CircuitParams {
            lf: 0.0,
            fs: -2.0,
            r: f64::INFINITY,
            ..CircuitParams::prototype()
        };
        match p.validate() {
            Err(Error::Invalid(v)) => {
                assert_eq!(v.len(), 3);
                assert!(v.contains(&Violation::NonFinite("r")));
                assert!(v.contains(&Violation::NonPositiveValue("fs")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coil_current_zero_and_peak() {
        let src = CoilSource::new(0.8).with_phase_origin(1e-6);
        let fs = 200e3;
        assert!(src.ils_at(fs, 1e-6).abs() < 1e-15);
        assert_relative_eq!(src.ils_at(fs, 1e-6 + 1.25e-6), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn amplitude_step_takes_effect() {
        let fs = 200e3;
        let ts = 1.0 / fs;
        let t_step = 12e-6;
        let src = CoilSource::new(0.5).with_amplitude_step(t_step, 0.8);
        // Peak scan over the cycle that follows the step.
        let peak = (0..10_000)
            .map(|k| t_step + ts * k as f64 / 10_000.0)
            .map(|t| src.ils_at(fs, t).abs())
            .fold(0.0, f64::max);
        assert!((peak - 0.8).abs() < 1e-6, "peak {peak}");
        let before = (0..10_000)
            .map(|k| ts * k as f64 / 10_000.0)
            .map(|t| src.ils_at(fs, t).abs())
            .fold(0.0, f64::max);
        assert!((before - 0.5).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn coil_current_is_periodic(t in 0.0f64..5e-4, amp in 0.01f64..10.0, origin in 0.0f64..5e-6) {
            let fs = 200e3;
            let src = CoilSource::new(amp).with_phase_origin(origin);
            let a = src.ils_at(fs, t);
            let b = src.ils_at(fs, t + 1.0 / fs);
            prop_assert!((a - b).abs() < 1e-12 * amp);
        }
    }
}
