//! Frequency-domain impedance of filter branches, banks and the bank seen in
//! parallel with the source inductance.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::filter_design::{FilterBank, FilterBranch, HighPassFilter, SingleTunedFilter};

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("frequency must be > 0, got {f}")))
    }
}

/// `R + j(ωL − 1/(ωC))`.
pub fn st_impedance(filter: &SingleTunedFilter, f: f64) -> Result<Complex64> {
    check_frequency(f)?;
    let w = 2.0 * PI * f;
    Ok(Complex64::new(
        filter.resistance_ohm,
        w * filter.inductance_h - 1.0 / (w * filter.capacitance_f),
    ))
}

/// `1/(jωC) + (R ‖ jωL)`.
pub fn hp_impedance(filter: &HighPassFilter, f: f64) -> Result<Complex64> {
    check_frequency(f)?;
    let w = 2.0 * PI * f;
    let zc = Complex64::new(0.0, -1.0 / (w * filter.capacitance_f));
    let y_parallel = Complex64::new(1.0 / filter.resistance_ohm, -1.0 / (w * filter.inductance_h));
    Ok(zc + y_parallel.inv())
}

pub fn branch_impedance(branch: &FilterBranch, f: f64) -> Result<Complex64> {
    match branch {
        FilterBranch::SingleTuned(st) => st_impedance(st, f),
        FilterBranch::HighPass(hp) => hp_impedance(hp, f),
    }
}

/// Sum of branch admittances.
pub fn bank_admittance(bank: &FilterBank, f: f64) -> Result<Complex64> {
    if bank.is_empty() {
        return Err(Error::domain("filter bank has no branches"));
    }
    bank.branches()
        .iter()
        .try_fold(Complex64::new(0.0, 0.0), |acc, b| Ok(acc + branch_impedance(b, f)?.inv()))
}

pub fn bank_impedance(bank: &FilterBank, f: f64) -> Result<Complex64> {
    Ok(bank_admittance(bank, f)?.inv())
}

/// Impedance sampled on an increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceCurve {
    frequencies_hz: Vec<f64>,
    impedances: Vec<Complex64>,
}

impl ImpedanceCurve {
    pub fn new(frequencies_hz: Vec<f64>, impedances: Vec<Complex64>) -> Result<Self> {
        if frequencies_hz.len() != impedances.len() {
            return Err(Error::domain("frequency and impedance lists differ in length"));
        }
        if frequencies_hz.len() < 2 {
            return Err(Error::domain("an impedance curve needs at least two points"));
        }
        if frequencies_hz[0] <= 0.0 || frequencies_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("frequencies must be positive and strictly increasing"));
        }
        Ok(ImpedanceCurve {
            frequencies_hz,
            impedances,
        })
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn impedances(&self) -> &[Complex64] {
        &self.impedances
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.impedances.iter().map(|z| z.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `frequency_hz,re_ohms,im_ohms,abs_ohms`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,re_ohms,im_ohms,abs_ohms\n");
        for (f, z) in self.frequencies_hz.iter().zip(&self.impedances) {
            let _ = writeln!(out, "{},{},{},{}", f, z.re, z.im, z.norm());
        }
        out
    }
}

/// Uniform grid from `f_start` to `f_end` inclusive.
pub fn linear_grid(f_start: f64, f_end: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(f_start.is_finite() && f_end.is_finite() && f_start > 0.0 && f_end > f_start) {
        return Err(Error::domain(format!(
            "frequency range must satisfy 0 < start < end, got {f_start}..{f_end}"
        )));
    }
    if n_points < 2 {
        return Err(Error::domain("scan needs at least two points"));
    }
    let span = f_end - f_start;
    let steps = (n_points - 1) as f64;
    let mut grid: Vec<f64> = (0..n_points)
        .map(|i| f_start + span * i as f64 / steps)
        .collect();
    grid[n_points - 1] = f_end;
    Ok(grid)
}

/// Driving-point impedance at the filter bus: the bank alone when
/// `source_inductance_h` is zero, otherwise the bank in parallel with the
/// source inductance.
pub fn scan(
    bank: &FilterBank,
    source_inductance_h: f64,
    f_start: f64,
    f_end: f64,
    n_points: usize,
) -> Result<ImpedanceCurve> {
    scan_with(Execution::default(), bank, source_inductance_h, f_start, f_end, n_points)
}

pub fn scan_with(
    exec: Execution,
    bank: &FilterBank,
    source_inductance_h: f64,
    f_start: f64,
    f_end: f64,
    n_points: usize,
) -> Result<ImpedanceCurve> {
    if !(source_inductance_h.is_finite() && source_inductance_h >= 0.0) {
        return Err(Error::domain("source inductance must be >= 0"));
    }
    if bank.is_empty() {
        return Err(Error::domain("filter bank has no branches"));
    }
    let grid = linear_grid(f_start, f_end, n_points)?;
    let impedances = map_range(exec, grid.len(), |i| {
        driving_point(bank, source_inductance_h, grid[i])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    ImpedanceCurve::new(grid, impedances)
}

fn driving_point(bank: &FilterBank, source_inductance_h: f64, f: f64) -> Result<Complex64> {
    if source_inductance_h == 0.0 {
        return bank_impedance(bank, f);
    }
    let y_source = Complex64::new(0.0, 2.0 * PI * f * source_inductance_h).inv();
    Ok((bank_admittance(bank, f)? + y_source).inv())
}

/// Local extrema of `|Z|` on the scan grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    /// Local minima of `|Z|`.
    pub series_resonances_hz: Vec<f64>,
    /// Local maxima of `|Z|`.
    pub parallel_resonances_hz: Vec<f64>,
}

pub fn find_resonances(curve: &ImpedanceCurve) -> ResonanceReport {
    grid_extrema(curve.frequencies_hz(), &curve.magnitudes())
}

/// Interior extrema of `mags` sampled at `freqs`. Runs of equal values are
/// treated as one extremum, reported at the lowest frequency of the run, so
/// the result does not depend on the traversal direction.
fn grid_extrema(freqs: &[f64], mags: &[f64]) -> ResonanceReport {
    let n = mags.len();
    let mut report = ResonanceReport::default();
    let mut i = 1;
    while i + 1 < n {
        // extend over a plateau
        let mut j = i;
        while j + 1 < n && mags[j + 1] == mags[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let left = mags[i - 1];
        let right = mags[j + 1];
        let v = mags[i];
        let lowest = freqs[i..=j].iter().copied().fold(f64::INFINITY, f64::min);
        if v < left && v < right {
            report.series_resonances_hz.push(lowest);
        } else if v > left && v > right {
            report.parallel_resonances_hz.push(lowest);
        }
        i = j + 1;
    }
    report.series_resonances_hz.sort_by(f64::total_cmp);
    report.parallel_resonances_hz.sort_by(f64::total_cmp);
    report
}
