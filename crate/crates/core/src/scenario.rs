//! JSON scenario documents.
//!
//! ```json
//! {
//!   "basis":  { "fundamental_hz": 50, "source_vrms": 220, "source_inductance_h": 0.0016 },
//!   "load":   { "dc_inductance_h": 0.023, "load_resistance_ohm": 78, "load_capacitance_f": 5e-5 },
//!   "bank":   { "fundamental_hz": 50, "branches": [ ... ] },
//!   "solver": { "dt_s": 1e-5, "duration_s": 0.5, "diode_on_ohm": 0.001,
//!               "diode_off_ohm": 1e6, "max_switch_iterations": 10 }
//! }
//! ```
//!
//! `bank` is optional. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filter_design::{BankDoc, SystemBasis};
use crate::simulator::{RectifierLoad, Scenario, SolverConfig};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    basis: SystemBasis,
    load: RectifierLoad,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bank: Option<BankDoc>,
    solver: SolverConfig,
}

/// Parses and validates a scenario document. Validation failures name the
/// offending field path, syntax errors carry line and column.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = serde_json::from_str(text)?;
    let bank = doc.bank.map(|b| b.into_bank("bank")).transpose()?;
    let scenario = Scenario {
        basis: doc.basis,
        load: doc.load,
        bank,
        solver: doc.solver,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn scenario_to_json(scenario: &Scenario) -> Result<String> {
    let doc = ScenarioDoc {
        basis: scenario.basis,
        load: scenario.load,
        bank: scenario.bank.as_ref().map(BankDoc::from),
        solver: scenario.solver,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Bundled reference scenario without filters.
pub const BASELINE_JSON: &str = include_str!("../scenarios/baseline.json");
/// Bundled reference scenario with the tabulated filter bank.
pub const FILTERED_JSON: &str = include_str!("../scenarios/filtered.json");
