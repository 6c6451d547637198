//! Component sizing for the rectifier tank and output capacitor.
//!
//! The characteristic admittance `Y = √(Cf/Lf)` is bounded by the worst-case
//! ratio of coil current to output voltage; the tank resonance is pinned at
//! `1.29·fs`. Together these fix `Lf` and `Cf` for every admissible `Y`, and
//! the output capacitor follows from `Cf` and the allowed ripple.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::analytic::{K_RES, K_RIPPLE};
use crate::error::{Error, Result, Violation};

/// Lower admittance bound as a multiple of `ils_max / vo_min`.
pub const Y_LOW: f64 = 2.5;
/// Upper admittance bound as a multiple of `ils_max / vo_min`.
pub const Y_HIGH: f64 = 5.0;

/// Design targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    /// Largest expected coil current amplitude (A, peak).
    pub ils_max: f64,
    /// Smallest regulated output voltage (V).
    pub vo_min: f64,
    /// Switching frequency (Hz).
    pub fs: f64,
    /// Allowed output ripple in percent (1.0 means 1 %).
    pub ripple_pct: f64,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        for (name, v) in [
            ("ils_max", self.ils_max),
            ("vo_min", self.vo_min),
            ("fs", self.fs),
            ("ripple_pct", self.ripple_pct),
        ] {
            if v.is_nan() || v <= 0.0 {
                violations.push(Violation::NonPositiveValue(name));
            } else if !v.is_finite() {
                violations.push(Violation::NonFinite(name));
            }
        }
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        if self.ripple_pct >= 100.0 {
            return Err(Error::OutOfRange {
                name: "ripple_pct",
                value: self.ripple_pct,
                lo: 0.0,
                hi: 100.0,
            });
        }
        Ok(())
    }
}

/// One sized design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignResult {
    /// Characteristic admittance √(Cf/Lf) (S).
    pub y: f64,
    pub lf: f64,
    pub cf: f64,
    /// Smallest output capacitor meeting the ripple target (F).
    pub co_min: f64,
    /// Admissible admittance band `(Ymin, Ymax)`.
    pub band: (f64, f64),
}

/// Admissible characteristic-admittance band `(Ymin, Ymax)`.
pub fn admittance_band(spec: &DesignSpec) -> (f64, f64) {
    let base = spec.ils_max / spec.vo_min;
    (Y_LOW * base, Y_HIGH * base)
}

/// Angular tank resonance for a switching frequency.
pub fn tank_omega(fs: f64) -> f64 {
    2.0 * PI * K_RES * fs
}

/// `(Lf, Cf)` with admittance `y` and resonance at `1.29·fs`.
pub fn solve_lf_cf(y: f64, fs: f64) -> (f64, f64) {
    let w = tank_omega(fs);
    (1.0 / (y * w), y / w)
}

/// Smallest output capacitor for a ripple of `ripple_pct` percent.
pub fn min_output_cap(cf: f64, ripple_pct: f64) -> f64 {
    K_RIPPLE * cf / (ripple_pct / 100.0)
}

/// Relative deviation of a tank's resonance from `1.29·fs`; positive when
/// the tank resonates above the target.
pub fn resonance_deviation(lf: f64, cf: f64, fs: f64) -> f64 {
    let f_res = 1.0 / (2.0 * PI * (lf * cf).sqrt());
    f_res / (K_RES * fs) - 1.0
}

/// Sizes the design at a fraction of the admittance band, 0 at `Ymin` and
/// 1 at `Ymax`.
pub fn design_at_fraction(spec: &DesignSpec, fraction: f64) -> Result<DesignResult> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::OutOfRange {
            name: "y_fraction",
            value: fraction,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let band = admittance_band(spec);
    Ok(point(spec, band, band.0 + fraction * (band.1 - band.0)))
}

fn point(spec: &DesignSpec, band: (f64, f64), y: f64) -> DesignResult {
    let (lf, cf) = solve_lf_cf(y, spec.fs);
    DesignResult {
        y,
        lf,
        cf,
        co_min: min_output_cap(cf, spec.ripple_pct),
        band,
    }
}

/// Samples the admittance band uniformly with `n_points ≥ 2` points.
pub fn feasible_region(spec: &DesignSpec, n_points: usize) -> Result<Vec<DesignResult>> {
    spec.validate()?;
    if n_points < 2 {
        return Err(Error::Usage(format!("need at least 2 points, got {n_points}")));
    }
    let band = admittance_band(spec);
    let step = (band.1 - band.0) / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|k| {
            let y = if k == n_points - 1 {
                band.1
            } else {
                band.0 + step * k as f64
            };
            point(spec, band, y)
        })
        .collect())
}

/// Output capacitor recommended for a region: the requirement of its
/// largest `Cf`.
pub fn recommended_co(region: &[DesignResult]) -> f64 {
    region.iter().map(|d| d.co_min).fold(0.0, f64::max)
}

/// Design table as CSV, header `Y,Lf,Cf,Co_min`.
pub fn region_csv(region: &[DesignResult]) -> String {
    let mut out = String::from("Y,Lf,Cf,Co_min\n");
    for d in region {
        let _ = writeln!(out, "{:e},{:e},{:e},{:e}", d.y, d.lf, d.cf, d.co_min);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec() -> DesignSpec {
        DesignSpec {
            ils_max: 0.8,
            vo_min: 24.0,
            fs: 200e3,
            ripple_pct: 1.0,
        }
    }

    #[test]
    fn band_for_prototype_targets() {
        let (lo, hi) = admittance_band(&spec());
        assert_relative_eq!(lo, 0.083_333, epsilon = 1e-6);
        assert_relative_eq!(hi, 0.166_667, epsilon = 1e-6);
        let y_proto = (76e-9f64 / 5.3e-6).sqrt();
        assert_relative_eq!(y_proto, 0.1198, epsilon = 1e-4);
        assert!(lo < y_proto && y_proto < hi);
    }

    #[test]
    fn band_scales_with_current() {
        let s = spec();
        let doubled = DesignSpec {
            ils_max: 1.6,
            ..s
        };
        let (a, b) = admittance_band(&s);
        let (c, d) = admittance_band(&doubled);
        assert_relative_eq!(c, 2.0 * a);
        assert_relative_eq!(d, 2.0 * b);
    }

    #[test]
    fn tank_for_prototype_admittance() {
        let (lf, cf) = solve_lf_cf(0.1198, 200e3);
        assert_relative_eq!(cf, 73.9e-9, epsilon = 0.05e-9);
        assert_relative_eq!(lf, 5.15e-6, epsilon = 0.005e-6);
        assert_relative_eq!(lf * cf, 3.806e-13, epsilon = 0.001e-13);
    }

    #[test]
    fn prototype_resonance_within_three_percent() {
        let dev = resonance_deviation(5.3e-6, 76e-9, 200e3);
        // 250.8 kHz = 1.254 fs
        assert_relative_eq!(1.0 / (2.0 * PI * (5.3e-6f64 * 76e-9).sqrt()), 250.77e3, epsilon = 10.0);
        assert!(dev < 0.0 && dev.abs() < 0.03, "deviation {dev}");
    }

    #[test]
    fn output_cap_examples() {
        assert_relative_eq!(min_output_cap(76e-9, 1.0), 41.1e-6, epsilon = 0.05e-6);
        assert_relative_eq!(min_output_cap(76e-9, 0.1), 411e-6, epsilon = 0.5e-6);
        assert!(3300e-6 >= min_output_cap(76e-9, 0.0125));
    }

    #[test]
    fn two_point_region_is_band_endpoints() {
        let s = spec();
        let r = feasible_region(&s, 2).unwrap();
        let w = tank_omega(s.fs);
        let (lo, hi) = admittance_band(&s);
        assert_eq!(r.len(), 2);
        assert_relative_eq!(r[0].cf, lo / w, max_relative = 1e-14);
        assert_relative_eq!(r[1].cf, hi / w, max_relative = 1e-14);
    }

    #[test]
    fn region_spans() {
        let r = feasible_region(&spec(), 11).unwrap();
        let (cf_min, cf_max) = (r[0].cf, r[10].cf);
        assert_relative_eq!(cf_min, 51.4e-9, epsilon = 0.05e-9);
        assert_relative_eq!(cf_max, 102.8e-9, epsilon = 0.05e-9);
        assert_relative_eq!(r[10].lf, 3.70e-6, epsilon = 0.005e-6);
        assert_relative_eq!(r[0].lf, 7.40e-6, epsilon = 0.005e-6);
        assert_relative_eq!(recommended_co(&r), r[10].co_min);
    }

    #[test]
    fn midpoint_design() {
        let d = design_at_fraction(&spec(), 0.5).unwrap();
        assert_relative_eq!(d.y, 0.125, epsilon = 1e-12);
        assert_relative_eq!(d.cf, 77.1e-9, epsilon = 0.05e-9);
        assert_relative_eq!(d.lf, 4.94e-6, epsilon = 0.005e-6);
        let co = recommended_co(&feasible_region(&spec(), 21).unwrap());
        assert_relative_eq!(co, 55.6e-6, epsilon = 0.05e-6);
    }

    #[test]
    fn invalid_specs() {
        let s = DesignSpec {
            ripple_pct: 0.0,
            ..spec()
        };
        assert!(s.validate().is_err());
        let s = DesignSpec {
            ripple_pct: 100.0,
            ..spec()
        };
        assert!(s.validate().is_err());
        assert!(feasible_region(&spec(), 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = region_csv(&feasible_region(&spec(), 2).unwrap());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "Y,Lf,Cf,Co_min");
        assert_eq!(lines.len(), 3);
    }

    proptest! {
        #[test]
        fn admittance_round_trip(y in 1e-3f64..10.0, fs in 1e3f64..1e7) {
            let (lf, cf) = solve_lf_cf(y, fs);
            prop_assert!(((cf / lf).sqrt() / y - 1.0).abs() < 1e-12);
            prop_assert!(resonance_deviation(lf, cf, fs).abs() < 1e-9);
        }

        #[test]
        fn larger_admittance_means_larger_cf(y in 1e-3f64..10.0, k in 1.001f64..3.0) {
            let (lf1, cf1) = solve_lf_cf(y, 200e3);
            let (lf2, cf2) = solve_lf_cf(y * k, 200e3);
            prop_assert!(cf2 > cf1 && lf2 < lf1);
        }

        #[test]
        fn region_points_respect_band_and_resonance(ils in 0.1f64..5.0, vo in 1.0f64..100.0, n in 2usize..30) {
            let s = DesignSpec { ils_max: ils, vo_min: vo, fs: 200e3, ripple_pct: 1.0 };
            for d in feasible_region(&s, n).unwrap() {
                let y = (d.cf / d.lf).sqrt();
                prop_assert!(y >= d.band.0 * (1.0 - 1e-12) && y <= d.band.1 * (1.0 + 1e-12));
                prop_assert!(resonance_deviation(d.lf, d.cf, s.fs).abs() < 1e-9);
            }
        }
    }
}
