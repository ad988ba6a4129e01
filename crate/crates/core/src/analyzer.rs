//! Synchronous harmonic analysis over whole fundamental periods.
//!
//! With a rectangular window spanning exactly `P` periods, harmonic `h` falls
//! on DFT bin `h·P` and leakage between harmonics is zero. Coefficients are
//! evaluated per order against an exact twiddle table (`n·h·P mod N`), so no
//! phasor recurrence error accumulates over long windows.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};

/// IEEE-519 convention for the highest order included in THD.
pub const DEFAULT_MAX_ORDER: usize = 50;

/// Aggregate current THD limit.
pub const IEEE519_THD_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicSpectrum {
    pub fundamental_hz: f64,
    /// `1..=H`.
    pub orders: Vec<usize>,
    /// RMS magnitude per order.
    pub magnitudes: Vec<f64>,
    /// Phase per order, cosine reference.
    pub phases_rad: Vec<f64>,
    /// Mean of the window; excluded from THD.
    pub dc: f64,
    /// NaN when the fundamental is exactly zero.
    pub thd: f64,
    pub rms_total: f64,
}

impl HarmonicSpectrum {
    pub fn max_order(&self) -> usize {
        self.orders.len()
    }

    /// RMS magnitude of order `h` (1-based).
    pub fn magnitude(&self, h: usize) -> f64 {
        self.magnitudes[h - 1]
    }

    pub fn phase(&self, h: usize) -> f64 {
        self.phases_rad[h - 1]
    }

    /// `order,frequency_hz,magnitude_rms,phase_rad`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("order,frequency_hz,magnitude_rms,phase_rad\n");
        for ((h, m), p) in self.orders.iter().zip(&self.magnitudes).zip(&self.phases_rad) {
            let _ = writeln!(out, "{},{},{},{}", h, *h as f64 * self.fundamental_hz, m, p);
        }
        out
    }
}

/// Number of whole fundamental periods in a window of `n` samples.
fn whole_periods(n: usize, sample_rate_hz: f64, fundamental_hz: f64) -> Result<usize> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::domain("sample rate must be > 0"));
    }
    if !(fundamental_hz.is_finite() && fundamental_hz > 0.0) {
        return Err(Error::domain("fundamental must be > 0"));
    }
    let periods = n as f64 * fundamental_hz / sample_rate_hz;
    let rounded = periods.round();
    if rounded < 1.0 || (periods - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::Window(format!(
            "{n} samples at {sample_rate_hz} Hz span {periods} fundamental periods; \
             a whole number is required"
        )));
    }
    Ok(rounded as usize)
}

pub fn spectrum(
    samples: &[f64],
    sample_rate_hz: f64,
    fundamental_hz: f64,
    max_order: usize,
) -> Result<HarmonicSpectrum> {
    spectrum_with(Execution::default(), samples, sample_rate_hz, fundamental_hz, max_order)
}

/// Harmonic decomposition of `samples`, which must span a whole number of
/// fundamental periods with at least `2·max_order` points per period.
pub fn spectrum_with(
    exec: Execution,
    samples: &[f64],
    sample_rate_hz: f64,
    fundamental_hz: f64,
    max_order: usize,
) -> Result<HarmonicSpectrum> {
    if max_order < 1 {
        return Err(Error::domain("max_order must be >= 1"));
    }
    let n = samples.len();
    let periods = whole_periods(n, sample_rate_hz, fundamental_hz)?;
    if n < 2 * max_order * periods {
        return Err(Error::domain(format!(
            "order {max_order} exceeds Nyquist: {} points per period, need >= {}",
            n as f64 / periods as f64,
            2 * max_order
        )));
    }

    let (cos_table, sin_table): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|m| {
            let a = 2.0 * PI * m as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .unzip();

    let coeffs = map_range(exec, max_order, |k| {
        let bin = (k + 1) * periods;
        let (mut re, mut im) = (0.0, 0.0);
        let mut idx = 0usize;
        for &x in samples {
            re += x * cos_table[idx];
            im -= x * sin_table[idx];
            idx += bin;
            if idx >= n {
                idx %= n;
            }
        }
        // peak amplitude 2|X|/N, RMS = peak/√2
        let scale = 2.0 / n as f64;
        let (re, im) = (re * scale, im * scale);
        ((re * re + im * im).sqrt() / 2f64.sqrt(), im.atan2(re))
    });

    let dc = samples.iter().sum::<f64>() / n as f64;
    let rms_total = (samples.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let (magnitudes, phases_rad): (Vec<f64>, Vec<f64>) = coeffs.into_iter().unzip();
    let thd = thd_from(&magnitudes).unwrap_or(f64::NAN);
    Ok(HarmonicSpectrum {
        fundamental_hz,
        orders: (1..=max_order).collect(),
        magnitudes,
        phases_rad,
        dc,
        thd,
        rms_total,
    })
}

fn thd_from(magnitudes: &[f64]) -> Result<f64> {
    let fundamental = magnitudes.first().copied().unwrap_or(0.0);
    if !(fundamental > 0.0) {
        return Err(Error::domain("fundamental magnitude is zero"));
    }
    let harmonic = magnitudes[1..].iter().map(|m| m * m).sum::<f64>().sqrt();
    Ok(harmonic / fundamental)
}

/// `√(Σ_{h≥2} mag_h²) / mag_1`.
pub fn thd_of(spectrum: &HarmonicSpectrum) -> Result<f64> {
    thd_from(&spectrum.magnitudes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerReport {
    pub active_power_w: f64,
    pub apparent_power_va: f64,
    pub true_power_factor: f64,
    pub displacement_power_factor: f64,
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Active, apparent and power-factor figures for one voltage/current pair.
pub fn power_report(v: &[f64], i: &[f64], sample_rate_hz: f64, fundamental_hz: f64) -> Result<PowerReport> {
    if v.len() != i.len() {
        return Err(Error::domain("voltage and current windows differ in length"));
    }
    whole_periods(v.len(), sample_rate_hz, fundamental_hz)?;
    let n = v.len() as f64;
    let active_power_w = v.iter().zip(i).map(|(a, b)| a * b).sum::<f64>() / n;
    let apparent_power_va = rms(v) * rms(i);
    if !(apparent_power_va > 0.0) {
        return Err(Error::domain("apparent power is zero"));
    }
    let sv = spectrum_with(Execution::Sequential, v, sample_rate_hz, fundamental_hz, 1)?;
    let si = spectrum_with(Execution::Sequential, i, sample_rate_hz, fundamental_hz, 1)?;
    if !(sv.magnitude(1) > 0.0 && si.magnitude(1) > 0.0) {
        return Err(Error::domain("zero fundamental; displacement angle undefined"));
    }
    Ok(PowerReport {
        active_power_w,
        apparent_power_va,
        true_power_factor: active_power_w / apparent_power_va,
        displacement_power_factor: (sv.phase(1) - si.phase(1)).cos(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ieee519Check {
    pub thd: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Passes only when THD is strictly below `thd_limit`.
pub fn ieee519_check(spectrum: &HarmonicSpectrum, thd_limit: f64) -> Ieee519Check {
    let thd = thd_of(spectrum).unwrap_or(f64::NAN);
    Ieee519Check {
        thd,
        limit: thd_limit,
        pass: thd < thd_limit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FS: f64 = 100_000.0;
    const F1: f64 = 50.0;

    fn tone(n: usize, parts: &[(f64, f64, f64)]) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 / FS;
                parts
                    .iter()
                    .map(|&(h, a, p)| a * (2.0 * PI * h * F1 * t + p).cos())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn pure_sine() {
        let x = tone(10_000, &[(1.0, 2f64.sqrt(), 0.3)]);
        let s = spectrum(&x, FS, F1, 50).unwrap();
        assert_relative_eq!(s.magnitude(1), 1.0, max_relative = 1e-12);
        assert!(s.magnitudes[1..].iter().all(|&m| m < 1e-12));
        assert!(s.thd < 1e-12);
        assert_relative_eq!(s.phase(1), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn two_tone_thd() {
        let a = 2f64.sqrt();
        let x = tone(10_000, &[(1.0, a, 0.0), (5.0, 0.1 * a, 1.0)]);
        let s = spectrum(&x, FS, F1, 50).unwrap();
        assert!((s.thd - 0.1).abs() < 1e-9, "{}", s.thd);
        assert_eq!(thd_of(&s).unwrap(), s.thd);
    }

    #[test]
    fn window_and_nyquist_errors() {
        let x = vec![0.0; 10_001];
        assert!(matches!(spectrum(&x, FS, F1, 10), Err(Error::Window(_))));
        let x = vec![1.0; 100];
        // 100 samples per period supports H = 50 but not 51
        assert!(spectrum(&x, 5000.0, F1, 50).is_ok());
        assert!(matches!(spectrum(&x, 5000.0, F1, 51), Err(Error::Domain(_))));
    }

    #[test]
    fn thd_of_requires_fundamental() {
        let s = spectrum(&vec![0.0; 2000], FS, F1, 5).unwrap();
        assert!(thd_of(&s).is_err());
        assert!(s.thd.is_nan());
        assert!(!ieee519_check(&s, 0.05).pass);
    }

    #[test]
    fn fundamental_only_has_zero_thd() {
        let s = HarmonicSpectrum {
            fundamental_hz: 50.0,
            orders: vec![1, 2, 3],
            magnitudes: vec![3.0, 0.0, 0.0],
            phases_rad: vec![0.0; 3],
            dc: 0.0,
            thd: 0.0,
            rms_total: 3.0,
        };
        assert_eq!(thd_of(&s).unwrap(), 0.0);
    }

    #[test]
    fn limit_is_strict() {
        let mut s = spectrum(&tone(2000, &[(1.0, 1.0, 0.0)]), FS, F1, 3).unwrap();
        s.magnitudes = vec![1.0, 0.03, 0.04];
        let exact = ieee519_check(&s, thd_of(&s).unwrap());
        assert!(!exact.pass);
        assert!(ieee519_check(&s, 0.0500001).pass);
    }

    #[test]
    fn power_factor_cases() {
        let a = 2f64.sqrt();
        let v = tone(4000, &[(1.0, a * 230.0, 0.0)]);
        let p = power_report(&v, &v, FS, F1).unwrap();
        assert_relative_eq!(p.true_power_factor, 1.0, max_relative = 1e-12);
        assert_relative_eq!(p.displacement_power_factor, 1.0, max_relative = 1e-12);

        let i = tone(4000, &[(1.0, a * 10.0, -PI / 3.0)]);
        let p = power_report(&v, &i, FS, F1).unwrap();
        assert_relative_eq!(p.displacement_power_factor, 0.5, max_relative = 1e-12);
        assert_relative_eq!(p.true_power_factor, 0.5, max_relative = 1e-9);
        assert_relative_eq!(p.active_power_w, 230.0 * 10.0 * 0.5, max_relative = 1e-9);

        let zero = vec![0.0; 4000];
        assert!(power_report(&v, &zero, FS, F1).is_err());
        assert!(power_report(&v, &v[..3999], FS, F1).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = spectrum(&tone(2000, &[(1.0, 1.0, 0.0)]), FS, F1, 2).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("order,frequency_hz,magnitude_rms,phase_rad"));
        assert!(lines.next().unwrap().starts_with("1,50,"));
        assert!(lines.next().unwrap().starts_with("2,100,"));
    }
}
