//! Time-domain simulation of a three-phase source feeding a six-pulse diode
//! bridge through line inductance, with an optional shunt filter bank at the
//! point of common coupling (PCC).
//!
//! Topology, per phase `x ∈ {a, b, c}`:
//!
//! ```text
//!  v_src_x ──Ls──┬── PCC_x ──┬── D(x→P), D(N→x)   bridge
//!                │           └── filter branches to neutral
//! ```
//!
//! The rectifier front-end inductance `L_L` sits by default between each PCC
//! and its bridge leg, with `C_dc ‖ R_L` directly across the bridge output.
//! [`InductorPlacement::DcSide`] moves it into the positive DC rail instead.

mod mna;
mod waveform;

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::filter_design::{FilterBank, FilterBranch, SystemBasis};
use mna::{Circuit, DiodeId, Loss, Node, ReactiveId, ResistorId, SourceId, Transient, GROUND};

pub use waveform::{PowerTrace, RunMeta, WaveformSet, CHANNEL_IDS};

/// Where the rectifier front-end inductance is connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InductorPlacement {
    /// One inductor per phase between the PCC and the bridge leg.
    #[default]
    AcSide,
    /// A single smoothing inductor in the positive DC rail.
    DcSide,
}

/// Diode-bridge load: front-end inductance and the parallel R-C on the DC bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectifierLoad {
    #[serde(rename = "dc_inductance_h")]
    pub front_end_inductance_h: f64,
    pub load_resistance_ohm: f64,
    pub load_capacitance_f: f64,
    #[serde(default)]
    pub inductor_placement: InductorPlacement,
}

impl Default for RectifierLoad {
    /// 23 mH front-end inductance, 50 µF ‖ 78 Ω load.
    fn default() -> Self {
        RectifierLoad {
            front_end_inductance_h: 0.023,
            load_resistance_ohm: 78.0,
            load_capacitance_f: 50e-6,
            inductor_placement: InductorPlacement::AcSide,
        }
    }
}

impl RectifierLoad {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [
            ("dc_inductance_h", self.front_end_inductance_h),
            ("load_resistance_ohm", self.load_resistance_ohm),
            ("load_capacitance_f", self.load_capacitance_f),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{path}.{name}"), "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt_s: f64,
    pub duration_s: f64,
    pub diode_on_ohm: f64,
    pub diode_off_ohm: f64,
    pub max_switch_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_s: 1e-5,
            duration_s: 0.5,
            diode_on_ohm: 1e-3,
            diode_off_ohm: 1e6,
            max_switch_iterations: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, path: &str, basis: &SystemBasis) -> Result<()> {
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(Error::invalid(format!("{path}.dt_s"), "must be > 0"));
        }
        let periods = self.duration_s * basis.fundamental_hz;
        if !(self.duration_s.is_finite() && periods >= 10.0 - 1e-9) {
            return Err(Error::invalid(
                format!("{path}.duration_s"),
                format!("must cover at least 10 fundamental periods, got {periods:.3}"),
            ));
        }
        if self.dt_s >= self.duration_s {
            return Err(Error::invalid(format!("{path}.dt_s"), "must be smaller than duration_s"));
        }
        if !(self.diode_on_ohm.is_finite() && self.diode_on_ohm > 0.0) {
            return Err(Error::invalid(format!("{path}.diode_on_ohm"), "must be > 0"));
        }
        if !(self.diode_off_ohm.is_finite() && self.diode_off_ohm / self.diode_on_ohm >= 1e6) {
            return Err(Error::invalid(
                format!("{path}.diode_off_ohm"),
                "must be at least 1e6 times diode_on_ohm",
            ));
        }
        if self.max_switch_iterations < 1 {
            return Err(Error::invalid(format!("{path}.max_switch_iterations"), "must be >= 1"));
        }
        Ok(())
    }

    /// Number of recorded samples, `t = 0, dt, …, duration − dt`.
    pub fn n_samples(&self) -> usize {
        (self.duration_s / self.dt_s).round() as usize
    }
}

/// A complete simulation case.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub basis: SystemBasis,
    pub load: RectifierLoad,
    pub bank: Option<FilterBank>,
    pub solver: SolverConfig,
}

impl Scenario {
    /// Default source, load and solver settings without filters.
    pub fn baseline() -> Self {
        Scenario {
            basis: SystemBasis::default(),
            load: RectifierLoad::default(),
            bank: None,
            solver: SolverConfig::default(),
        }
    }

    /// [`Scenario::baseline`] with the tabulated reference filter bank.
    pub fn filtered() -> Self {
        Scenario {
            bank: Some(crate::filter_design::reference_bank()),
            ..Scenario::baseline()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate("basis")?;
        self.load.validate("load")?;
        self.solver.validate("solver", &self.basis)?;
        if let Some(bank) = &self.bank {
            let rel = (bank.fundamental_hz() - self.basis.fundamental_hz).abs()
                / self.basis.fundamental_hz;
            if rel > 1e-12 {
                return Err(Error::invalid(
                    "bank.fundamental_hz",
                    "must equal basis.fundamental_hz",
                ));
            }
        }
        Ok(())
    }
}

const PHASES: [&str; 3] = ["a", "b", "c"];

/// Where each output channel is read from in the circuit.
struct Probes {
    sources: [SourceId; 3],
    pcc: [Node; 3],
    line: [Option<ReactiveId>; 3],
    upper: [DiodeId; 3],
    lower: [DiodeId; 3],
    filter_heads: [Vec<Head>; 3],
    dc_neg: Node,
    dc_mid: Node,
}

#[derive(Debug, Clone, Copy)]
enum Head {
    Resistor(ResistorId),
    Reactive(ReactiveId),
}

fn arr3<T>(v: Vec<T>) -> [T; 3] {
    v.try_into().unwrap_or_else(|_| unreachable!("three phases"))
}

fn build(s: &Scenario) -> (Circuit, Probes) {
    let mut c = Circuit::new();
    let amplitude = s.basis.phase_vrms() * 2f64.sqrt();
    let omega = 2.0 * PI * s.basis.fundamental_hz;

    let ac_side = s.load.inductor_placement == InductorPlacement::AcSide;
    let dc_pos = c.node();
    let dc_neg = c.node();
    let dc_mid = if ac_side { dc_pos } else { c.node() };

    let mut sources = Vec::new();
    let mut pcc = Vec::new();
    let mut line = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut filter_heads: [Vec<Head>; 3] = Default::default();

    for (k, heads) in filter_heads.iter_mut().enumerate() {
        let phase = -2.0 * PI * k as f64 / 3.0;
        let p = c.node();
        if s.basis.source_inductance_h > 0.0 {
            let src = c.node();
            sources.push(c.sine_source(src, GROUND, amplitude, omega, phase));
            line.push(Some(c.inductor(src, p, s.basis.source_inductance_h)));
        } else {
            sources.push(c.sine_source(p, GROUND, amplitude, omega, phase));
            line.push(None);
        }
        pcc.push(p);
        let leg = if ac_side {
            let leg = c.node();
            c.inductor(p, leg, s.load.front_end_inductance_h);
            leg
        } else {
            p
        };
        upper.push(c.diode(leg, dc_pos));
        lower.push(c.diode(dc_neg, leg));

        if let Some(bank) = &s.bank {
            for branch in bank.branches() {
                match branch {
                    FilterBranch::SingleTuned(st) => {
                        let n1 = c.node();
                        let n2 = c.node();
                        heads.push(Head::Resistor(c.resistor(p, n1, st.resistance_ohm, Loss::Filter)));
                        c.inductor(n1, n2, st.inductance_h);
                        c.capacitor(n2, GROUND, st.capacitance_f);
                    }
                    FilterBranch::HighPass(hp) => {
                        let m = c.node();
                        heads.push(Head::Reactive(c.capacitor(p, m, hp.capacitance_f)));
                        c.resistor(m, GROUND, hp.resistance_ohm, Loss::Filter);
                        c.inductor(m, GROUND, hp.inductance_h);
                    }
                }
            }
        }
    }

    if !ac_side {
        c.inductor(dc_pos, dc_mid, s.load.front_end_inductance_h);
    }
    c.capacitor(dc_mid, dc_neg, s.load.load_capacitance_f);
    c.resistor(dc_mid, dc_neg, s.load.load_resistance_ohm, Loss::Load);

    let probes = Probes {
        sources: arr3(sources),
        pcc: arr3(pcc),
        line: arr3(line),
        upper: arr3(upper),
        lower: arr3(lower),
        filter_heads,
        dc_neg,
        dc_mid,
    };
    (c, probes)
}

/// Simulates `scenario` from zero initial state and records every channel
/// at every step.
pub fn run(scenario: &Scenario) -> Result<WaveformSet> {
    scenario.validate()?;
    let cfg = scenario.solver;
    let (circuit, probes) = build(scenario);
    let mut engine = Transient::new(circuit, cfg.dt_s, cfg.diode_on_ohm, cfg.diode_off_ohm)?;
    let n = cfg.n_samples();
    let mut rec = waveform::Recorder::new(n);
    let mut meta = RunMeta {
        dt_s: cfg.dt_s,
        duration_s: cfg.duration_s,
        n_samples: n,
        flagged_steps: Vec::new(),
        max_switch_iterations_used: 0,
    };

    record_sample(&engine, &probes, &mut rec);
    for _ in 1..n {
        let out = engine.advance(cfg.max_switch_iterations)?;
        meta.max_switch_iterations_used = meta.max_switch_iterations_used.max(out.iterations);
        if !out.converged {
            meta.flagged_steps.push(rec.len());
        }
        record_sample(&engine, &probes, &mut rec);
    }
    if !meta.flagged_steps.is_empty() {
        log::warn!(
            "{} step(s) hit the switch-iteration cap of {}",
            meta.flagged_steps.len(),
            cfg.max_switch_iterations
        );
    }
    Ok(rec.finish(1.0 / cfg.dt_s, meta))
}

/// Runs independent scenarios, in parallel when `exec` allows it.
pub fn run_batch(exec: Execution, scenarios: &[Scenario]) -> Vec<Result<WaveformSet>> {
    map_range(exec, scenarios.len(), |i| run(&scenarios[i]))
}

fn record_sample(e: &Transient, p: &Probes, rec: &mut waveform::Recorder) {
    let mut row = [0.0; CHANNEL_IDS.len()];
    for k in 0..3 {
        let i_bridge = e.diode_current(p.upper[k]) - e.diode_current(p.lower[k]);
        let i_filter: f64 = p.filter_heads[k]
            .iter()
            .map(|h| match *h {
                Head::Resistor(id) => e.resistor_current(id),
                Head::Reactive(id) => e.reactive_current(id),
            })
            .sum();
        let i_src = match p.line[k] {
            Some(id) => e.reactive_current(id),
            None => e.source_current(p.sources[k]),
        };
        row[k] = e.source_voltage(p.sources[k]);
        row[3 + k] = e.node_voltage(p.pcc[k]);
        row[6 + k] = i_src;
        row[9 + k] = i_bridge;
        row[12 + k] = i_filter;
    }
    row[15] = e.node_voltage(p.dc_mid) - e.node_voltage(p.dc_neg);
    row[16] = p.upper.iter().map(|&d| e.diode_current(d)).sum();
    rec.push(&row, e.power_sample());
}

/// The last `n_cycles` whole fundamental periods of `w`.
pub fn steady_state_window(w: &WaveformSet, basis: &SystemBasis, n_cycles: usize) -> Result<Range<usize>> {
    let spp = samples_per_period(w.sample_rate_hz(), basis.fundamental_hz)?;
    if n_cycles == 0 {
        return Err(Error::Range("n_cycles must be >= 1".into()));
    }
    let len = w.len();
    let needed = (n_cycles + 2) * spp;
    if len < needed {
        return Err(Error::Range(format!(
            "{n_cycles} cycles plus two settling periods need {needed} samples, run has {len}"
        )));
    }
    Ok(len - n_cycles * spp..len)
}

/// Samples per fundamental period, which must be an integer.
pub fn samples_per_period(sample_rate_hz: f64, fundamental_hz: f64) -> Result<usize> {
    let spp = sample_rate_hz / fundamental_hz;
    let rounded = spp.round();
    if rounded < 1.0 || (spp - rounded).abs() > 1e-6 * rounded {
        return Err(Error::Config(format!(
            "time step does not divide the fundamental period ({spp} samples per period); \
             choose dt = T1/k for an integer k"
        )));
    }
    Ok(rounded as usize)
}

/// Energy bookkeeping over a sample window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyAudit {
    pub source_j: f64,
    pub load_dissipation_j: f64,
    pub filter_dissipation_j: f64,
    pub diode_dissipation_j: f64,
    pub stored_change_j: f64,
    /// `source − dissipation − stored change`.
    pub imbalance_j: f64,
    /// `imbalance / source`, zero when no energy was delivered.
    pub relative_imbalance: f64,
}

impl EnergyAudit {
    pub fn dissipation_j(&self) -> f64 {
        self.load_dissipation_j + self.filter_dissipation_j + self.diode_dissipation_j
    }
}

/// Integrates the recorded power terms over `window` with the trapezoidal
/// rule. Requires a waveform produced by [`run`].
pub fn energy_audit(w: &WaveformSet, scenario: &Scenario, window: Range<usize>) -> Result<EnergyAudit> {
    let trace = w
        .power()
        .ok_or_else(|| Error::domain("waveform carries no power trace (not produced by run)"))?;
    if window.start >= window.end || window.end > w.len() {
        return Err(Error::Range(format!("window {window:?} outside 0..{}", w.len())));
    }
    let dt = 1.0 / w.sample_rate_hz();
    let integrate = |p: &[f64]| -> f64 {
        p[window.clone()].windows(2).map(|s| 0.5 * (s[0] + s[1]) * dt).sum()
    };
    let source_j = integrate(&trace.source_w);
    let load_dissipation_j = integrate(&trace.load_w);
    let filter_dissipation_j = if scenario.bank.is_some() {
        integrate(&trace.filter_w)
    } else {
        0.0
    };
    let diode_dissipation_j = integrate(&trace.diode_w);
    let stored_change_j = trace.stored_j[window.end - 1] - trace.stored_j[window.start];
    let imbalance_j =
        source_j - load_dissipation_j - filter_dissipation_j - diode_dissipation_j - stored_change_j;
    let relative_imbalance = if source_j.abs() > 0.0 {
        imbalance_j / source_j
    } else {
        0.0
    };
    Ok(EnergyAudit {
        source_j,
        load_dissipation_j,
        filter_dissipation_j,
        diode_dissipation_j,
        stored_change_j,
        imbalance_j,
        relative_imbalance,
    })
}

/// Channel id for quantity `prefix` on phase index `k`.
pub fn phase_channel(prefix: &str, k: usize) -> String {
    format!("{prefix}_{}", PHASES[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(mut s: Scenario) -> Scenario {
        s.solver.duration_s = 0.2;
        s
    }

    #[test]
    fn window_arithmetic() {
        let s = Scenario::baseline();
        let w = WaveformSet::from_channels(
            1e5,
            CHANNEL_IDS.iter().map(|c| (c.to_string(), vec![0.0; 50000])).collect(),
        )
        .unwrap();
        assert_eq!(steady_state_window(&w, &s.basis, 5).unwrap(), 40000..50000);
        assert!(matches!(steady_state_window(&w, &s.basis, 24), Err(Error::Range(_))));
        assert_eq!(samples_per_period(1e5, 50.0).unwrap(), 2000);
        assert!(matches!(samples_per_period(1.0 / 3e-5, 50.0), Err(Error::Config(_))));
    }

    #[test]
    fn validation_paths() {
        let mut s = Scenario::baseline();
        s.solver.duration_s = 0.1;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("solver.duration_s"), "{err}");

        let mut s = Scenario::baseline();
        s.solver.diode_off_ohm = 10.0;
        assert!(s.validate().unwrap_err().to_string().contains("diode_off_ohm"));

        let mut s = Scenario::baseline();
        s.load.load_resistance_ohm = 0.0;
        assert!(s.validate().unwrap_err().to_string().contains("load.load_resistance_ohm"));
    }

    #[test]
    fn unexcited_run_is_silent() {
        let mut s = short(Scenario::filtered());
        s.basis.source_vrms = 0.0;
        let w = run(&s).unwrap();
        for id in CHANNEL_IDS {
            let peak = w.channel(id).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(peak < 1e-9 * 311.0, "{id}: {peak}");
        }
        let win = steady_state_window(&w, &s.basis, 5).unwrap();
        let a = energy_audit(&w, &s, win).unwrap();
        assert!(a.source_j.abs() < 1e-12 && a.dissipation_j().abs() < 1e-12);
        assert!(a.stored_change_j.abs() < 1e-12);
    }

    #[test]
    fn no_bank_means_no_filter_current() {
        let s = short(Scenario::baseline());
        let w = run(&s).unwrap();
        for k in 0..3 {
            assert!(w.channel(&phase_channel("i_filter", k)).unwrap().iter().all(|&v| v == 0.0));
        }
        let win = steady_state_window(&w, &s.basis, 5).unwrap();
        assert_eq!(energy_audit(&w, &s, win).unwrap().filter_dissipation_j, 0.0);
    }

    #[test]
    fn zero_line_inductance_is_supported() {
        let mut s = short(Scenario::baseline());
        s.basis.source_inductance_h = 0.0;
        let w = run(&s).unwrap();
        let v = w.channel("v_src_a").unwrap();
        let p = w.channel("v_pcc_a").unwrap();
        assert!(v.iter().zip(p).skip(1).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn deterministic() {
        let s = short(Scenario::filtered());
        assert_eq!(run(&s).unwrap(), run(&s).unwrap());
    }
}
