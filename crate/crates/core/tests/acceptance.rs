//! Acceptance checks. Prints one `PASS` or `FAIL` line per criterion.
//!
//! A criterion listed in `KNOWN_UNMET` is still evaluated and reported; it
//! only stops counting against the exit status while it keeps failing. If it
//! starts passing the run fails so the list gets pruned.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use harmflow::analyzer::{self, HarmonicSpectrum, PowerReport};
use harmflow::filter_design::{
    capacitor_from_reactive_power, reactive_power_of_capacitor, tune_inductor, FilterBank,
    FilterBranch, HighPassFilter, SingleTunedFilter, SystemBasis,
};
use harmflow::network;
use harmflow::simulator::{self, Scenario, WaveformSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_UNMET: &[&str] = &["power_factor"];

const C: f64 = 11.09e-6;
const F1: f64 = 50.0;
const CYCLES: usize = 5;

struct Run {
    scenario: Scenario,
    wave: WaveformSet,
    elapsed: Duration,
}

impl Run {
    fn simulate(scenario: Scenario) -> Run {
        let start = Instant::now();
        let wave = simulator::run(&scenario).expect("simulation");
        Run {
            scenario,
            wave,
            elapsed: start.elapsed(),
        }
    }

    fn window(&self) -> std::ops::Range<usize> {
        simulator::steady_state_window(&self.wave, &self.scenario.basis, CYCLES).unwrap()
    }

    fn channel(&self, id: &str) -> &[f64] {
        &self.wave.require(id).unwrap()[self.window()]
    }

    fn spectrum(&self, id: &str) -> HarmonicSpectrum {
        analyzer::spectrum(self.channel(id), self.wave.sample_rate_hz(), F1, analyzer::DEFAULT_MAX_ORDER)
            .unwrap()
    }

    fn power(&self) -> PowerReport {
        analyzer::power_report(self.channel("v_pcc_a"), self.channel("i_src_a"), self.wave.sample_rate_hz(), F1)
            .unwrap()
    }
}

fn halved(mut s: Scenario) -> Scenario {
    s.solver.dt_s /= 2.0;
    s
}

fn baseline() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| Run::simulate(Scenario::baseline()))
}

fn filtered() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| Run::simulate(Scenario::filtered()))
}

fn baseline_fine() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| Run::simulate(halved(Scenario::baseline())))
}

fn filtered_fine() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| Run::simulate(halved(Scenario::filtered())))
}

/// Long enough for the lightly damped tuned branches to settle, which the
/// 0.5 s runs are not.
fn settled(mut s: Scenario) -> Scenario {
    s.solver.duration_s = 2.0;
    s
}

fn baseline_settled() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| Run::simulate(settled(Scenario::baseline())))
}

fn filtered_settled() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| Run::simulate(settled(Scenario::filtered())))
}

fn basis() -> SystemBasis {
    SystemBasis::default()
}

/// Displayed digits of the inductor column: four decimals, truncated.
fn as_displayed(x: f64) -> String {
    format!("{:.4}", (x * 1e4).trunc() / 1e4)
}

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn tabulated_inductors() -> Outcome {
    let printed = ["0.0365", "0.0186", "0.0075", "0.0054"];
    let mut shown = Vec::new();
    let mut pass = true;
    for (h, want) in [5.0, 7.0, 11.0, 13.0].into_iter().zip(printed) {
        let l = tune_inductor(C, h, &basis()).unwrap();
        pass &= as_displayed(l) == want;
        shown.push(format!("h{h}: {l:.7} -> {}", as_displayed(l)));
    }
    outcome(pass, shown.join(", "))
}

fn high_pass_consistency() -> Outcome {
    let hp = HighPassFilter::from_components(C, 0.0031, 49.66).unwrap();
    let pass = (2.9..=3.1).contains(&hp.quality_factor) && (hp.corner_hz - 858.0).abs() < 2.0;
    outcome(
        pass,
        format!("corner {:.1} Hz, q {:.3}", hp.corner_hz, hp.quality_factor),
    )
}

fn baseline_thd() -> Outcome {
    let run = baseline();
    let thd = 100.0 * run.spectrum("i_src_a").thd;
    let secs = run.elapsed.as_secs_f64();
    outcome(
        (thd - 20.77).abs() <= 3.0 && secs < 10.0,
        format!("THD {thd:.2}% (target 20.77 +/- 3), run {secs:.2} s"),
    )
}

fn filtered_thd() -> Outcome {
    let run = filtered();
    let thd = 100.0 * run.spectrum("i_src_a").thd;
    let secs = run.elapsed.as_secs_f64();
    outcome(
        thd < 5.0 && (thd - 4.32).abs() <= 1.5 && secs < 10.0,
        format!("THD {thd:.2}% (limit 5, target 4.32 +/- 1.5), run {secs:.2} s"),
    )
}

fn spectral_shape() -> Outcome {
    let s = baseline().spectrum("i_src_a");
    let f = s.magnitude(1);
    let mut ranked: Vec<usize> = (2..=s.max_order()).collect();
    ranked.sort_by(|a, b| s.magnitude(*b).total_cmp(&s.magnitude(*a)));
    let top_two = {
        let mut t = [ranked[0], ranked[1]];
        t.sort();
        t
    };
    let worst_excluded = (2..=s.max_order())
        .filter(|h| h % 2 == 0 || h % 3 == 0)
        .map(|h| (h, 100.0 * s.magnitude(h) / f))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    outcome(
        top_two == [5, 7] && worst_excluded.1 < 1.0,
        format!(
            "largest orders {:?}, worst even/triplen order {} at {:.3}% of fundamental",
            top_two, worst_excluded.0, worst_excluded.1
        ),
    )
}

fn power_factor() -> Outcome {
    let b = baseline().power();
    let f = filtered().power();
    let pass = f.displacement_power_factor >= 0.95
        && f.displacement_power_factor > b.displacement_power_factor;
    outcome(
        pass,
        format!(
            "displacement PF filtered {:.4} vs baseline {:.4} (true PF {:.4} vs {:.4})",
            f.displacement_power_factor,
            b.displacement_power_factor,
            f.true_power_factor,
            b.true_power_factor
        ),
    )
}

/// Direct correlation against `cos`/`sin` of the harmonic, with no shared
/// tables or index arithmetic.
fn naive_rms(x: &[f64], fs: f64, h: usize) -> f64 {
    let n = x.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let arg = 2.0 * PI * h as f64 * F1 * k as f64 / fs;
        a += v * arg.cos();
        b += v * arg.sin();
    }
    (2.0 / n) * (a * a + b * b).sqrt() / 2f64.sqrt()
}

fn dft_oracle(failures: &mut Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let fs = 10_000.0;
    let max_order = 25;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let periods = rng.random_range(1..=4);
        let n = periods * (fs / F1) as usize;
        let tones: Vec<(usize, f64, f64)> = (0..rng.random_range(1..=6))
            .map(|_| {
                (
                    rng.random_range(1..=max_order),
                    rng.random_range(0.0..100.0),
                    rng.random_range(-PI..PI),
                )
            })
            .collect();
        let dc = rng.random_range(-5.0..5.0);
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                dc + tones
                    .iter()
                    .map(|&(h, a, p)| a * (2.0 * PI * h as f64 * F1 * t + p).cos())
                    .sum::<f64>()
            })
            .collect();
        let s = analyzer::spectrum(&x, fs, F1, max_order).unwrap();
        let scale = s.magnitudes.iter().copied().fold(1e-300, f64::max);
        for h in 1..=max_order {
            worst = worst.max((s.magnitude(h) - naive_rms(&x, fs, h)).abs() / scale);
        }
    }
    if worst >= 1e-9 {
        failures.push(format!("DFT oracle worst relative error {worst:.2e}"));
    }
}

/// The reference bank with inductors at their exact tuning values.
fn designed_bank() -> FilterBank {
    let mut branches: Vec<FilterBranch> = [(5.0, 0.54), (7.0, 0.38), (11.0, 0.24), (13.0, 0.21)]
        .into_iter()
        .map(|(h, r)| {
            let l = tune_inductor(C, h, &basis()).unwrap();
            FilterBranch::SingleTuned(SingleTunedFilter::from_components(F1, C, l, r).unwrap())
        })
        .collect();
    branches.push(FilterBranch::HighPass(
        HighPassFilter::from_components(C, 0.0031, 49.66).unwrap(),
    ));
    FilterBank::new(F1, branches).unwrap()
}

fn tuned_impedance(failures: &mut Vec<String>) {
    for bank in [designed_bank(), harmflow::filter_design::reference_bank()] {
        for b in bank.branches() {
            if let FilterBranch::SingleTuned(st) = b {
                let z = network::st_impedance(st, st.tuned_hz()).unwrap().norm();
                let err = (z - st.resistance_ohm).abs() / st.resistance_ohm;
                if err >= 1e-9 {
                    failures.push(format!("|Z| at {:.1} Hz off R by {err:.2e}", st.tuned_hz()));
                }
            }
        }
    }
}

fn var_round_trip(failures: &mut Vec<String>) {
    let mut c = 1e-9;
    while c <= 1e-2 {
        let q = reactive_power_of_capacitor(c, &basis()).unwrap();
        let back = capacitor_from_reactive_power(q, &basis()).unwrap();
        let err = (back - c).abs() / c;
        if err >= 1e-12 {
            failures.push(format!("C/VAR round trip at {c:e} F off by {err:.2e}"));
        }
        c *= 1.7;
    }
}

fn energy(failures: &mut Vec<String>) {
    for (name, coarse, fine) in [
        ("baseline", baseline(), baseline_fine()),
        ("filtered", filtered(), filtered_fine()),
    ] {
        let a = simulator::energy_audit(&coarse.wave, &coarse.scenario, coarse.window()).unwrap();
        let b = simulator::energy_audit(&fine.wave, &fine.scenario, fine.window()).unwrap();
        for audit in [&a, &b] {
            if audit.relative_imbalance.abs() >= 1e-3 {
                failures.push(format!("{name} energy imbalance {:.2e}", audit.relative_imbalance));
            }
        }
        let ratio = a.imbalance_j.abs() / b.imbalance_j.abs();
        if ratio < 3.2 {
            failures.push(format!("{name} imbalance shrinks only {ratio:.2}x when dt halves"));
        }
    }
}

fn kcl(failures: &mut Vec<String>) {
    for (name, run) in [("baseline", baseline()), ("filtered", filtered())] {
        for p in ["a", "b", "c"] {
            let src = run.wave.require(&format!("i_src_{p}")).unwrap();
            let bridge = run.wave.require(&format!("i_bridge_{p}")).unwrap();
            let filt = run.wave.require(&format!("i_filter_{p}")).unwrap();
            let peak = src.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let worst = (0..src.len())
                .map(|k| (src[k] - bridge[k] - filt[k]).abs())
                .fold(0.0f64, f64::max);
            if worst >= 1e-6 * peak {
                failures.push(format!("{name} phase {p} KCL residual {worst:.2e} A (peak {peak:.2})"));
            }
        }
    }
}

fn thd_refinement(failures: &mut Vec<String>) {
    for (name, coarse, fine) in [
        ("baseline", baseline(), baseline_fine()),
        ("filtered", filtered(), filtered_fine()),
    ] {
        let d = 100.0 * (coarse.spectrum("i_src_a").thd - fine.spectrum("i_src_a").thd).abs();
        if d >= 0.1 {
            failures.push(format!("{name} THD moves {d:.3} pp when dt halves"));
        }
    }
}

/// Value of the window-periodic signal `x` at fractional index `pos`.
fn periodic_at(x: &[f64], pos: f64) -> f64 {
    let n = x.len() as f64;
    let p = pos.rem_euclid(n);
    let i = p.floor() as usize;
    let frac = p - i as f64;
    x[i] * (1.0 - frac) + x[(i + 1) % x.len()] * frac
}

fn symmetry(failures: &mut Vec<String>) {
    for (name, run) in [("baseline", baseline_settled()), ("filtered", filtered_settled())] {
        let a = run.channel("i_src_a");
        let rms_a = (a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt();
        let third = run.wave.sample_rate_hz() / F1 / 3.0;
        for (p, lag) in [("b", 1.0), ("c", 2.0)] {
            let x = run.channel(&format!("i_src_{p}"));
            let err = (0..a.len())
                .map(|k| (x[k] - periodic_at(a, k as f64 - lag * third)).powi(2))
                .sum::<f64>()
                / a.len() as f64;
            let rel = err.sqrt() / rms_a;
            if rel >= 5e-3 {
                failures.push(format!("{name} phase {p} differs from shifted phase a by {:.3}% RMS", 100.0 * rel));
            }
        }
    }
}

fn property_suite() -> Outcome {
    let mut failures = Vec::new();
    dft_oracle(&mut failures);
    tuned_impedance(&mut failures);
    var_round_trip(&mut failures);
    energy(&mut failures);
    kcl(&mut failures);
    thd_refinement(&mut failures);
    symmetry(&mut failures);
    if failures.is_empty() {
        outcome(
            true,
            "DFT oracle, tuned |Z|, C/VAR round trip, energy audit, KCL, dt refinement, phase symmetry",
        )
    } else {
        outcome(false, failures.join("; "))
    }
}

fn frequency_scan() -> Outcome {
    let bank = designed_bank();
    let alone = network::scan(&bank, 0.0, 50.0, 1000.0, 951).unwrap();
    let step = alone.frequencies_hz()[1] - alone.frequencies_hz()[0];
    let series = network::find_resonances(&alone).series_resonances_hz;
    let located = [250.0, 350.0, 550.0, 650.0]
        .iter()
        .all(|f| series.iter().any(|s| (s - f).abs() <= step + 1e-9));
    let with_source = network::scan(&bank, basis().source_inductance_h, 50.0, 1000.0, 951).unwrap();
    let parallel = network::find_resonances(&with_source).parallel_resonances_hz;
    let below = parallel.iter().any(|&f| f < 250.0);
    outcome(
        located && below,
        format!("series {series:?} Hz; parallel with source inductance {parallel:?} Hz"),
    )
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("tabulated_inductors", tabulated_inductors),
        ("high_pass_consistency", high_pass_consistency),
        ("baseline_thd", baseline_thd),
        ("filtered_thd", filtered_thd),
        ("spectral_shape", spectral_shape),
        ("power_factor", power_factor),
        ("property_suite", property_suite),
        ("frequency_scan", frequency_scan),
    ];
    let mut regressions = Vec::new();
    for (name, check) in criteria {
        let o = check();
        let known = KNOWN_UNMET.contains(&name);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unmet)",
            (false, false) => "FAIL",
        };
        println!("{tag} {name}: {}", o.detail);
        if o.pass == known {
            regressions.push(name);
        }
    }
    if !regressions.is_empty() {
        eprintln!("unexpected outcome for: {}", regressions.join(", "));
        std::process::exit(1);
    }
}
