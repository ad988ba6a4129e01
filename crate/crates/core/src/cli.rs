//! Batch command-line surface.
//!
//! Exit codes: `0` success, `2` input or validation error, `3` numerical
//! failure in the solver.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analyzer::{self, HarmonicSpectrum, Ieee519Check, PowerReport};
use crate::error::{Error, Result};
use crate::exec;
use crate::filter_design::{self, FilterBank, SystemBasis};
use crate::network;
use crate::scenario::parse_scenario;
use crate::simulator::{self, RunMeta, WaveformSet};
use crate::svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Caps the worker pool used by parallel evaluations (default 1).
pub const THREADS_ENV: &str = "HARMFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "harmflow", version, about = "Passive harmonic filter design and rectifier harmonic analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Size a shunt filter bank and print it as JSON.
    Design(DesignArgs),
    /// Run a time-domain simulation of a scenario file.
    Simulate(SimulateArgs),
    /// Harmonic spectrum, THD and power factor of one waveform channel.
    Analyze(AnalyzeArgs),
    /// Impedance-versus-frequency scan of a filter bank.
    Scan(ScanArgs),
    /// Side-by-side comparison of a baseline and a filtered run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct BasisArgs {
    /// Fundamental frequency in Hz.
    #[arg(long, default_value_t = 50.0)]
    f1: f64,
    /// Per-phase RMS source voltage.
    #[arg(long, default_value_t = 220.0)]
    vrms: f64,
    /// Source inductance per phase in henries.
    #[arg(long, default_value_t = 0.0016)]
    ls: f64,
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Capacitance of every branch in farads.
    #[arg(long)]
    c: f64,
    /// Tuned harmonic orders.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 7.0, 11.0, 13.0])]
    orders: Vec<f64>,
    /// Quality factor per tuned order.
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<f64>,
    /// High-pass corner frequency in Hz.
    #[arg(long)]
    hp_corner: f64,
    /// High-pass quality factor.
    #[arg(long)]
    hp_q: f64,
    #[command(flatten)]
    basis: BasisArgs,
    /// Write the bank here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Waveform CSV output; metadata goes next to it as `<stem>.meta.json`.
    #[arg(long)]
    out: PathBuf,
    /// Record wall-clock time in the metadata (makes it non-reproducible).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// Channel to analyse.
    #[arg(long, default_value = "i_src_a")]
    channel: String,
    /// Voltage channel for power-factor figures.
    #[arg(long)]
    v_channel: Option<String>,
    #[arg(long, default_value_t = 50.0)]
    f1: f64,
    /// Highest harmonic order.
    #[arg(long, default_value_t = analyzer::DEFAULT_MAX_ORDER)]
    max_order: usize,
    /// Number of trailing fundamental periods analysed.
    #[arg(long, default_value_t = 5)]
    cycles: usize,
    #[arg(long, default_value_t = analyzer::IEEE519_THD_LIMIT)]
    thd_limit: f64,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Waveform CSV written by `simulate`.
    waveform: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Directory for spectrum.csv, spectrum.svg and summary.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Filter bank JSON (as written by `design`).
    bank: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    f_start: f64,
    #[arg(long, default_value_t = 1000.0)]
    f_end: f64,
    #[arg(long, default_value_t = 951)]
    points: usize,
    /// Source inductance in parallel with the bank; 0 scans the bank alone.
    #[arg(long, default_value_t = 0.0)]
    ls: f64,
    /// Directory for impedance.csv and resonances.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    baseline: PathBuf,
    filtered: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Directory for report.json and spectra.svg.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                let _ = writeln!(stderr, "error: {THREADS_ENV} must be a positive integer, got `{v}`");
                return EXIT_INPUT;
            }
        },
        Err(_) => 1,
    };
    let mut out: Vec<u8> = Vec::new();
    let mut err: Vec<u8> = Vec::new();
    let result = exec::with_thread_cap(threads, || dispatch(cli.command, &mut out, &mut err));
    let _ = stdout.write_all(&out);
    let _ = stderr.write_all(&err);
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Solver { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

fn dispatch(cmd: Command, out: &mut Vec<u8>, err: &mut Vec<u8>) -> Result<()> {
    match cmd {
        Command::Design(a) => cmd_design(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, err),
        Command::Analyze(a) => cmd_analyze(a, err),
        Command::Scan(a) => cmd_scan(a, err),
        Command::Report(a) => cmd_report(a, err),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Rounds to four significant figures for human-facing lines.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = 3 - x.abs().log10().floor() as i32;
    if digits > 0 {
        format!("{:.*}", digits as usize, x)
    } else {
        let scale = 10f64.powi(-digits);
        format!("{}", (x / scale).round() * scale)
    }
}

fn cmd_design(a: DesignArgs, out: &mut Vec<u8>, err: &mut Vec<u8>) -> Result<()> {
    let basis = SystemBasis::new(a.basis.f1, a.basis.vrms, a.basis.ls)?;
    if a.q.len() != a.orders.len() {
        return Err(Error::invalid(
            "--q",
            format!("expected {} values (one per order), got {}", a.orders.len(), a.q.len()),
        ));
    }
    let tuned: Vec<(f64, f64)> = a.orders.iter().copied().zip(a.q.iter().copied()).collect();
    let design = filter_design::design_bank(&basis, a.c, &tuned, Some((a.hp_corner, a.hp_q)))?;
    for w in &design.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let text = design.value.to_json()? + "\n";
    match a.out {
        Some(path) => write_file(&path, &text)?,
        None => out.extend_from_slice(text.as_bytes()),
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    scenario: String,
    sample_rate_hz: f64,
    channels: Vec<&'a str>,
    #[serde(flatten)]
    run: &'a RunMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

fn meta_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.meta.json"))
}

fn cmd_simulate(a: SimulateArgs, err: &mut Vec<u8>) -> Result<()> {
    let scenario = parse_scenario(&read(&a.scenario)?)?;
    let started = Instant::now();
    let w = simulator::run(&scenario)?;
    let wall = started.elapsed().as_secs_f64();

    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let file = fs::File::create(&a.out).map_err(|e| Error::Parse(format!("{}: {e}", a.out.display())))?;
    let mut buf = BufWriter::new(file);
    w.write_csv(&mut buf)?;
    buf.flush()?;

    let run = w.meta().expect("simulator output carries metadata");
    let meta = SimulationMeta {
        scenario: a.scenario.display().to_string(),
        sample_rate_hz: w.sample_rate_hz(),
        channels: w.channel_names().iter().map(String::as_str).collect(),
        run,
        wall_time_s: a.wall_time.then_some(wall),
    };
    write_file(&meta_path(&a.out), &json(&meta)?)?;
    if !run.flagged_steps.is_empty() {
        let _ = writeln!(
            err,
            "warning: {} step(s) reached the switch-iteration cap",
            run.flagged_steps.len()
        );
    }
    let _ = writeln!(err, "simulated {} samples in {}s", w.len(), sig4(wall));
    Ok(())
}

/// Analysis of one channel over a steady-state window.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelSummary {
    pub channel: String,
    pub window_start: usize,
    pub window_end: usize,
    pub thd: f64,
    pub rms: f64,
    pub fundamental_rms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerReport>,
    pub ieee519: Ieee519Check,
}

fn summarize(w: &WaveformSet, opts: &WindowArgs) -> Result<(ChannelSummary, HarmonicSpectrum)> {
    let samples = w.require(&opts.channel)?;
    let basis = SystemBasis {
        fundamental_hz: opts.f1,
        ..SystemBasis::default()
    };
    basis.validate("--f1")?;
    let window = simulator::steady_state_window(w, &basis, opts.cycles)?;
    let spectrum = analyzer::spectrum(&samples[window.clone()], w.sample_rate_hz(), opts.f1, opts.max_order)?;
    let power = match &opts.v_channel {
        Some(v) => {
            let v = w.require(v)?;
            Some(analyzer::power_report(
                &v[window.clone()],
                &samples[window.clone()],
                w.sample_rate_hz(),
                opts.f1,
            )?)
        }
        None => None,
    };
    let ieee519 = analyzer::ieee519_check(&spectrum, opts.thd_limit);
    Ok((
        ChannelSummary {
            channel: opts.channel.clone(),
            window_start: window.start,
            window_end: window.end,
            thd: spectrum.thd,
            rms: spectrum.rms_total,
            fundamental_rms: spectrum.magnitude(1),
            power,
            ieee519,
        },
        spectrum,
    ))
}

fn load_waveform(path: &Path) -> Result<WaveformSet> {
    WaveformSet::from_csv(&read(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn verdict(c: &Ieee519Check) -> &'static str {
    if c.pass {
        "pass"
    } else {
        "fail"
    }
}

fn cmd_analyze(a: AnalyzeArgs, err: &mut Vec<u8>) -> Result<()> {
    let w = load_waveform(&a.waveform)?;
    let (summary, spectrum) = summarize(&w, &a.window)?;
    ensure_dir(&a.out_dir)?;
    write_file(&a.out_dir.join("spectrum.csv"), &spectrum.to_csv())?;
    write_file(
        &a.out_dir.join("spectrum.svg"),
        &svg::spectrum_chart(&spectrum, &format!("{} harmonic spectrum", summary.channel)),
    )?;
    write_file(&a.out_dir.join("summary.json"), &json(&summary)?)?;
    let _ = writeln!(
        err,
        "{}: THD {}% (IEEE-519 {}), RMS {}",
        summary.channel,
        sig4(100.0 * summary.thd),
        verdict(&summary.ieee519),
        sig4(summary.rms)
    );
    Ok(())
}

fn cmd_scan(a: ScanArgs, err: &mut Vec<u8>) -> Result<()> {
    let bank = FilterBank::from_json(&read(&a.bank)?)?;
    let curve = network::scan(&bank, a.ls, a.f_start, a.f_end, a.points)?;
    let report = network::find_resonances(&curve);
    ensure_dir(&a.out_dir)?;
    write_file(&a.out_dir.join("impedance.csv"), &curve.to_csv())?;
    write_file(&a.out_dir.join("resonances.json"), &json(&report)?)?;
    let _ = writeln!(
        err,
        "{} series and {} parallel resonance(s)",
        report.series_resonances_hz.len(),
        report.parallel_resonances_hz.len()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct Delta {
    thd: f64,
    rms: f64,
    fundamental_rms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_power_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    displacement_power_factor: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Report {
    baseline: ChannelSummary,
    filtered: ChannelSummary,
    /// `filtered − baseline`.
    delta: Delta,
    ieee519_flipped: bool,
}

fn cmd_report(a: ReportArgs, err: &mut Vec<u8>) -> Result<()> {
    let base = load_waveform(&a.baseline)?;
    let filt = load_waveform(&a.filtered)?;
    let rel = (base.sample_rate_hz() - filt.sample_rate_hz()).abs() / base.sample_rate_hz();
    if rel > 1e-9 {
        return Err(Error::invalid(
            "filtered",
            format!(
                "sample rate {} Hz differs from baseline {} Hz",
                filt.sample_rate_hz(),
                base.sample_rate_hz()
            ),
        ));
    }
    let (bs, bspec) = summarize(&base, &a.window)?;
    let (fs, fspec) = summarize(&filt, &a.window)?;
    let pf_delta = |f: fn(&PowerReport) -> f64| match (&fs.power, &bs.power) {
        (Some(x), Some(y)) => Some(f(x) - f(y)),
        _ => None,
    };
    let delta = Delta {
        thd: fs.thd - bs.thd,
        rms: fs.rms - bs.rms,
        fundamental_rms: fs.fundamental_rms - bs.fundamental_rms,
        true_power_factor: pf_delta(|p| p.true_power_factor),
        displacement_power_factor: pf_delta(|p| p.displacement_power_factor),
    };
    let report = Report {
        ieee519_flipped: bs.ieee519.pass != fs.ieee519.pass,
        baseline: bs,
        filtered: fs,
        delta,
    };
    ensure_dir(&a.out_dir)?;
    write_file(&a.out_dir.join("report.json"), &json(&report)?)?;
    write_file(
        &a.out_dir.join("spectra.svg"),
        &svg::spectra_chart(
            &[("baseline", &bspec), ("filtered", &fspec)],
            &format!("{} spectrum, baseline vs filtered", a.window.channel),
        ),
    )?;
    let _ = writeln!(
        err,
        "THD {}% ({}) -> {}% ({})",
        sig4(100.0 * report.baseline.thd),
        verdict(&report.baseline.ieee519),
        sig4(100.0 * report.filtered.thd),
        verdict(&report.filtered.ieee519)
    );
    Ok(())
}
