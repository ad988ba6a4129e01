//! Closed-form sizing of shunt harmonic filters.
//!
//! Two branch types are supported:
//!
//! * the single-tuned filter, a series R-L-C branch whose reactances cancel at
//!   `order × fundamental`, with `Q = √(L/C) / R`;
//! * the second-order high-pass filter, a capacitor in series with a parallel
//!   R‖L section, with `Q = R / X_L` evaluated at the corner frequency.
//!
//! All design routines take the branch capacitance directly. The VAR-driven
//! path goes through [`capacitor_from_reactive_power`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the configured source voltage is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoltageReference {
    /// `source_vrms` is the phase-to-neutral RMS voltage.
    #[default]
    Phase,
    /// `source_vrms` is the line-to-line RMS voltage.
    Line,
}

/// Electrical context shared by design and simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBasis {
    pub fundamental_hz: f64,
    pub source_vrms: f64,
    pub source_inductance_h: f64,
    #[serde(default, skip_serializing_if = "is_phase_reference")]
    pub voltage_reference: VoltageReference,
}

fn is_phase_reference(r: &VoltageReference) -> bool {
    *r == VoltageReference::Phase
}

impl Default for SystemBasis {
    /// 50 Hz, 220 V per phase, 1.6 mH line inductance.
    fn default() -> Self {
        SystemBasis {
            fundamental_hz: 50.0,
            source_vrms: 220.0,
            source_inductance_h: 0.0016,
            voltage_reference: VoltageReference::Phase,
        }
    }
}

impl SystemBasis {
    pub fn new(fundamental_hz: f64, source_vrms: f64, source_inductance_h: f64) -> Result<Self> {
        let basis = SystemBasis {
            fundamental_hz,
            source_vrms,
            source_inductance_h,
            voltage_reference: VoltageReference::Phase,
        };
        basis.validate("basis")?;
        Ok(basis)
    }

    pub fn with_voltage_reference(mut self, reference: VoltageReference) -> Self {
        self.voltage_reference = reference;
        self
    }

    /// Checks the invariants, reporting failures under `path`.
    ///
    /// A zero source voltage is accepted so that unexcited runs can be set up.
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.fundamental_hz.is_finite() && self.fundamental_hz > 0.0) {
            return Err(Error::invalid(format!("{path}.fundamental_hz"), "must be > 0"));
        }
        if !(self.source_vrms.is_finite() && self.source_vrms >= 0.0) {
            return Err(Error::invalid(format!("{path}.source_vrms"), "must be >= 0"));
        }
        if !(self.source_inductance_h.is_finite() && self.source_inductance_h >= 0.0) {
            return Err(Error::invalid(
                format!("{path}.source_inductance_h"),
                "must be >= 0",
            ));
        }
        Ok(())
    }

    /// Phase-to-neutral RMS voltage seen by a wye-connected shunt branch.
    pub fn phase_vrms(&self) -> f64 {
        match self.voltage_reference {
            VoltageReference::Phase => self.source_vrms,
            VoltageReference::Line => self.source_vrms / 3f64.sqrt(),
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.fundamental_hz
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.fundamental_hz
    }
}

/// Recommended quality-factor band. Leaving it is a warning, never an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityRange {
    pub min: f64,
    pub max: f64,
}

impl QualityRange {
    pub const SINGLE_TUNED: QualityRange = QualityRange { min: 20.0, max: 100.0 };
    pub const HIGH_PASS: QualityRange = QualityRange { min: 0.5, max: 5.0 };

    pub fn contains(&self, q: f64) -> bool {
        q >= self.min && q <= self.max
    }
}

/// A design result together with any advisory warnings raised while
/// producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

/// Series R-L-C shunt branch tuned to one harmonic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleTunedFilter {
    pub order: f64,
    pub capacitance_f: f64,
    pub inductance_h: f64,
    pub resistance_ohm: f64,
    pub quality_factor: f64,
}

impl SingleTunedFilter {
    /// Builds a branch from measured or tabulated components. The order and
    /// quality factor are recomputed from `R`, `L`, `C`.
    pub fn from_components(
        fundamental_hz: f64,
        capacitance_f: f64,
        inductance_h: f64,
        resistance_ohm: f64,
    ) -> Result<Self> {
        positive("capacitance", capacitance_f)?;
        positive("inductance", inductance_h)?;
        positive("resistance", resistance_ohm)?;
        positive("fundamental", fundamental_hz)?;
        let tuned = resonant_hz(inductance_h, capacitance_f);
        Ok(SingleTunedFilter {
            order: tuned / fundamental_hz,
            capacitance_f,
            inductance_h,
            resistance_ohm,
            quality_factor: (inductance_h / capacitance_f).sqrt() / resistance_ohm,
        })
    }

    /// Frequency at which the inductive and capacitive reactances cancel.
    pub fn tuned_hz(&self) -> f64 {
        resonant_hz(self.inductance_h, self.capacitance_f)
    }

    /// Characteristic reactance `√(L/C)`.
    pub fn characteristic_ohm(&self) -> f64 {
        (self.inductance_h / self.capacitance_f).sqrt()
    }
}

/// Capacitor in series with a parallel R‖L damping section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighPassFilter {
    pub capacitance_f: f64,
    pub inductance_h: f64,
    pub resistance_ohm: f64,
    pub quality_factor: f64,
    pub corner_hz: f64,
}

impl HighPassFilter {
    /// Builds a branch from components, recomputing corner and quality factor.
    pub fn from_components(capacitance_f: f64, inductance_h: f64, resistance_ohm: f64) -> Result<Self> {
        positive("capacitance", capacitance_f)?;
        positive("inductance", inductance_h)?;
        positive("resistance", resistance_ohm)?;
        let corner_hz = resonant_hz(inductance_h, capacitance_f);
        Ok(HighPassFilter {
            capacitance_f,
            inductance_h,
            resistance_ohm,
            quality_factor: resistance_ohm / (2.0 * PI * corner_hz * inductance_h),
            corner_hz,
        })
    }
}

/// One shunt branch of a filter bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterBranch {
    SingleTuned(SingleTunedFilter),
    HighPass(HighPassFilter),
}

impl FilterBranch {
    pub fn capacitance_f(&self) -> f64 {
        match self {
            FilterBranch::SingleTuned(f) => f.capacitance_f,
            FilterBranch::HighPass(f) => f.capacitance_f,
        }
    }

    /// Tuned frequency for single-tuned branches, corner for high-pass.
    pub fn characteristic_hz(&self) -> f64 {
        match self {
            FilterBranch::SingleTuned(f) => f.tuned_hz(),
            FilterBranch::HighPass(f) => f.corner_hz,
        }
    }
}

/// Ordered set of shunt branches connected at the same bus.
///
/// Single-tuned branches come first in strictly increasing order, followed by
/// at most one high-pass branch cornered above all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    fundamental_hz: f64,
    branches: Vec<FilterBranch>,
}

impl FilterBank {
    pub fn new(fundamental_hz: f64, branches: Vec<FilterBranch>) -> Result<Self> {
        positive("fundamental", fundamental_hz)?;
        let mut last_tuned: Option<f64> = None;
        let mut seen_high_pass = false;
        for (i, branch) in branches.iter().enumerate() {
            match branch {
                FilterBranch::SingleTuned(st) => {
                    if seen_high_pass {
                        return Err(Error::invalid(
                            format!("branches[{i}]"),
                            "single-tuned branches must precede the high-pass branch",
                        ));
                    }
                    let tuned = st.tuned_hz();
                    if let Some(prev) = last_tuned {
                        if tuned <= prev {
                            return Err(Error::invalid(
                                format!("branches[{i}].order"),
                                format!(
                                    "tuned orders must be strictly increasing ({:.4} after {:.4})",
                                    tuned / fundamental_hz,
                                    prev / fundamental_hz
                                ),
                            ));
                        }
                    }
                    last_tuned = Some(tuned);
                }
                FilterBranch::HighPass(hp) => {
                    if seen_high_pass {
                        return Err(Error::invalid(
                            format!("branches[{i}]"),
                            "at most one high-pass branch is allowed",
                        ));
                    }
                    seen_high_pass = true;
                    if let Some(prev) = last_tuned {
                        if hp.corner_hz <= prev {
                            return Err(Error::invalid(
                                format!("branches[{i}].corner_hz"),
                                format!(
                                    "corner {:.4} Hz must lie above the highest tuned frequency {:.4} Hz",
                                    hp.corner_hz, prev
                                ),
                            ));
                        }
                    }
                }
            }
        }
        Ok(FilterBank {
            fundamental_hz,
            branches,
        })
    }

    pub fn fundamental_hz(&self) -> f64 {
        self.fundamental_hz
    }

    pub fn branches(&self) -> &[FilterBranch] {
        &self.branches
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BankDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BankDoc = serde_json::from_str(text)?;
        doc.into_bank("bank")
    }
}

fn positive(what: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be finite and > 0, got {value}")))
    }
}

fn resonant_hz(l: f64, c: f64) -> f64 {
    1.0 / (2.0 * PI * (l * c).sqrt())
}

/// Capacitive reactance `1 / (2π f C)` at the fundamental.
pub fn capacitive_reactance(c: f64, basis: &SystemBasis) -> Result<f64> {
    positive("capacitance", c)?;
    Ok(1.0 / (basis.omega() * c))
}

/// Fundamental-frequency reactive power of a wye-connected capacitor, `V² / X_c`.
pub fn reactive_power_of_capacitor(c: f64, basis: &SystemBasis) -> Result<f64> {
    let xc = capacitive_reactance(c, basis)?;
    let v = basis.phase_vrms();
    Ok(v * v / xc)
}

/// Capacitance that supplies `q_var` at the fundamental; inverse of
/// [`reactive_power_of_capacitor`].
pub fn capacitor_from_reactive_power(q_var: f64, basis: &SystemBasis) -> Result<f64> {
    positive("reactive power", q_var)?;
    let v = basis.phase_vrms();
    positive("phase voltage", v)?;
    let xc = v * v / q_var;
    Ok(1.0 / (basis.omega() * xc))
}

/// Inductance that resonates with `c` at `order × fundamental`.
pub fn tune_inductor(c: f64, order: f64, basis: &SystemBasis) -> Result<f64> {
    positive("capacitance", c)?;
    if !(order.is_finite() && order >= 1.0) {
        return Err(Error::domain(format!("harmonic order must be >= 1, got {order}")));
    }
    let w = basis.omega() * order;
    Ok(1.0 / (w * w * c))
}

/// Series resistance giving quality factor `q`: `R = √(L/C) / q`.
pub fn resistor_from_quality(l: f64, c: f64, q: f64) -> Result<f64> {
    positive("inductance", l)?;
    positive("capacitance", c)?;
    positive("quality factor", q)?;
    Ok((l / c).sqrt() / q)
}

pub fn design_single_tuned(
    basis: &SystemBasis,
    order: f64,
    c: f64,
    q: f64,
) -> Result<Design<SingleTunedFilter>> {
    design_single_tuned_in_range(basis, order, c, q, QualityRange::SINGLE_TUNED)
}

/// Sizes a single-tuned branch for `order` around capacitor `c`.
pub fn design_single_tuned_in_range(
    basis: &SystemBasis,
    order: f64,
    c: f64,
    q: f64,
    range: QualityRange,
) -> Result<Design<SingleTunedFilter>> {
    if !(order.is_finite() && order >= 2.0) {
        return Err(Error::domain(format!(
            "single-tuned order must be >= 2, got {order}"
        )));
    }
    let l = tune_inductor(c, order, basis)?;
    let r = resistor_from_quality(l, c, q)?;
    let mut warnings = Vec::new();
    if !range.contains(q) {
        warnings.push(format!(
            "single-tuned order {order}: quality factor {q} outside recommended range [{}, {}]",
            range.min, range.max
        ));
    }
    Ok(Design {
        value: SingleTunedFilter {
            order,
            capacitance_f: c,
            inductance_h: l,
            resistance_ohm: r,
            quality_factor: q,
        },
        warnings,
    })
}

pub fn design_high_pass(
    basis: &SystemBasis,
    corner_hz: f64,
    c: f64,
    q: f64,
) -> Result<Design<HighPassFilter>> {
    design_high_pass_in_range(basis, corner_hz, c, q, QualityRange::HIGH_PASS)
}

/// Sizes a second-order high-pass branch: `L` resonates with `c` at the
/// corner, `R = q · X_L(corner)`.
pub fn design_high_pass_in_range(
    basis: &SystemBasis,
    corner_hz: f64,
    c: f64,
    q: f64,
    range: QualityRange,
) -> Result<Design<HighPassFilter>> {
    basis.validate("basis")?;
    positive("corner frequency", corner_hz)?;
    positive("capacitance", c)?;
    positive("quality factor", q)?;
    let w = 2.0 * PI * corner_hz;
    let l = 1.0 / (w * w * c);
    let r = q * w * l;
    let mut warnings = Vec::new();
    if !range.contains(q) {
        warnings.push(format!(
            "high-pass: quality factor {q} outside recommended range [{}, {}]",
            range.min, range.max
        ));
    }
    Ok(Design {
        value: HighPassFilter {
            capacitance_f: c,
            inductance_h: l,
            resistance_ohm: r,
            quality_factor: q,
            corner_hz,
        },
        warnings,
    })
}

/// Characteristic orders of a six-pulse converter handled by tuned branches.
pub const SIX_PULSE_TUNED_ORDERS: [u32; 4] = [5, 7, 11, 13];

/// Per-branch parameters of a six-pulse filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct SixPulseBankSpec {
    pub c_per_branch: f64,
    /// One quality factor per entry of [`SIX_PULSE_TUNED_ORDERS`].
    pub single_tuned_q: [f64; 4],
    pub high_pass_corner_hz: f64,
    pub high_pass_q: f64,
}

/// Bank of single-tuned branches (one `(order, q)` pair each) plus an
/// optional `(corner_hz, q)` high-pass branch, all sharing capacitance `c`.
pub fn design_bank(
    basis: &SystemBasis,
    c: f64,
    tuned: &[(f64, f64)],
    high_pass: Option<(f64, f64)>,
) -> Result<Design<FilterBank>> {
    let mut branches = Vec::with_capacity(tuned.len() + 1);
    let mut warnings = Vec::new();
    for &(order, q) in tuned {
        let d = design_single_tuned(basis, order, c, q)?;
        warnings.extend(d.warnings);
        branches.push(FilterBranch::SingleTuned(d.value));
    }
    if let Some((corner, q)) = high_pass {
        let d = design_high_pass(basis, corner, c, q)?;
        warnings.extend(d.warnings);
        branches.push(FilterBranch::HighPass(d.value));
    }
    Ok(Design {
        value: FilterBank::new(basis.fundamental_hz, branches)?,
        warnings,
    })
}

/// Four single-tuned branches at the 5th, 7th, 11th and 13th harmonics plus
/// one high-pass branch, all sharing the same capacitance.
pub fn design_bank_six_pulse(
    basis: &SystemBasis,
    spec: &SixPulseBankSpec,
) -> Result<Design<FilterBank>> {
    let tuned: Vec<(f64, f64)> = SIX_PULSE_TUNED_ORDERS
        .iter()
        .map(|&h| f64::from(h))
        .zip(spec.single_tuned_q)
        .collect();
    design_bank(
        basis,
        spec.c_per_branch,
        &tuned,
        Some((spec.high_pass_corner_hz, spec.high_pass_q)),
    )
}

// ---- JSON document ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BankDoc {
    pub fundamental_hz: f64,
    pub branches: Vec<BranchDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub(crate) enum BranchDoc {
    SingleTuned {
        order: f64,
        c_farads: f64,
        l_henries: f64,
        r_ohms: f64,
        q: f64,
    },
    HighPass {
        corner_hz: f64,
        c_farads: f64,
        l_henries: f64,
        r_ohms: f64,
        q: f64,
    },
}

/// Relative tolerance for derived fields (`order`, `corner_hz`, `q`) stored
/// alongside the components in a bank document.
const DERIVED_FIELD_RTOL: f64 = 1e-6;

fn check_derived(path: String, stored: f64, computed: f64) -> Result<()> {
    if !stored.is_finite() || (stored - computed).abs() > DERIVED_FIELD_RTOL * computed.abs() {
        return Err(Error::invalid(
            path,
            format!("value {stored} inconsistent with components (computed {computed})"),
        ));
    }
    Ok(())
}

fn component(path: String, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(path, format!("must be finite and > 0, got {value}")))
    }
}

impl BankDoc {
    pub(crate) fn into_bank(self, path: &str) -> Result<FilterBank> {
        let f1 = component(format!("{path}.fundamental_hz"), self.fundamental_hz)?;
        let mut branches = Vec::with_capacity(self.branches.len());
        for (i, b) in self.branches.into_iter().enumerate() {
            let p = format!("{path}.branches[{i}]");
            let branch = match b {
                BranchDoc::SingleTuned {
                    order,
                    c_farads,
                    l_henries,
                    r_ohms,
                    q,
                } => {
                    let st = SingleTunedFilter::from_components(
                        f1,
                        component(format!("{p}.c_farads"), c_farads)?,
                        component(format!("{p}.l_henries"), l_henries)?,
                        component(format!("{p}.r_ohms"), r_ohms)?,
                    )?;
                    check_derived(format!("{p}.order"), order, st.order)?;
                    check_derived(format!("{p}.q"), q, st.quality_factor)?;
                    if st.order < 2.0 {
                        return Err(Error::invalid(format!("{p}.order"), "must be >= 2"));
                    }
                    FilterBranch::SingleTuned(SingleTunedFilter { order, quality_factor: q, ..st })
                }
                BranchDoc::HighPass {
                    corner_hz,
                    c_farads,
                    l_henries,
                    r_ohms,
                    q,
                } => {
                    let hp = HighPassFilter::from_components(
                        component(format!("{p}.c_farads"), c_farads)?,
                        component(format!("{p}.l_henries"), l_henries)?,
                        component(format!("{p}.r_ohms"), r_ohms)?,
                    )?;
                    check_derived(format!("{p}.corner_hz"), corner_hz, hp.corner_hz)?;
                    check_derived(format!("{p}.q"), q, hp.quality_factor)?;
                    FilterBranch::HighPass(HighPassFilter {
                        corner_hz,
                        quality_factor: q,
                        ..hp
                    })
                }
            };
            branches.push(branch);
        }
        FilterBank::new(f1, branches).map_err(|e| match e {
            Error::Validation { path: sub, reason } => Error::invalid(format!("{path}.{sub}"), reason),
            other => other,
        })
    }
}

impl From<&FilterBank> for BankDoc {
    fn from(bank: &FilterBank) -> Self {
        BankDoc {
            fundamental_hz: bank.fundamental_hz,
            branches: bank
                .branches
                .iter()
                .map(|b| match b {
                    FilterBranch::SingleTuned(st) => BranchDoc::SingleTuned {
                        order: st.order,
                        c_farads: st.capacitance_f,
                        l_henries: st.inductance_h,
                        r_ohms: st.resistance_ohm,
                        q: st.quality_factor,
                    },
                    FilterBranch::HighPass(hp) => BranchDoc::HighPass {
                        corner_hz: hp.corner_hz,
                        c_farads: hp.capacitance_f,
                        l_henries: hp.inductance_h,
                        r_ohms: hp.resistance_ohm,
                        q: hp.quality_factor,
                    },
                })
                .collect(),
        }
    }
}

/// The bank of tabulated component values used in the reference study
/// (11.09 µF per branch at 50 Hz), with order, corner and quality factor
/// recomputed from the rounded components.
pub fn reference_bank() -> FilterBank {
    const C: f64 = 11.09e-6;
    const F1: f64 = 50.0;
    let st = |l: f64, r: f64| {
        FilterBranch::SingleTuned(SingleTunedFilter::from_components(F1, C, l, r).expect("valid"))
    };
    let branches = vec![
        st(0.0365, 0.54),
        st(0.0186, 0.38),
        st(0.0075, 0.24),
        st(0.0054, 0.21),
        FilterBranch::HighPass(HighPassFilter::from_components(C, 0.0031, 49.66).expect("valid")),
    ];
    FilterBank::new(F1, branches).expect("reference bank is ordered")
}
