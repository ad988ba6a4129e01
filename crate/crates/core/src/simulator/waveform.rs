use std::io::Write;

use serde::{Deserialize, Serialize};

use super::mna::PowerSample;
use crate::error::{Error, Result};

/// Channels recorded by [`super::run`], in CSV column order.
pub const CHANNEL_IDS: [&str; 17] = [
    "v_src_a", "v_src_b", "v_src_c", "v_pcc_a", "v_pcc_b", "v_pcc_c", "i_src_a", "i_src_b",
    "i_src_c", "i_bridge_a", "i_bridge_b", "i_bridge_c", "i_filter_a", "i_filter_b",
    "i_filter_c", "v_dc", "i_dc",
];

/// Run bookkeeping written alongside the waveforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dt_s: f64,
    pub duration_s: f64,
    pub n_samples: usize,
    /// Sample indices whose diode states did not settle within the
    /// iteration cap.
    pub flagged_steps: Vec<usize>,
    pub max_switch_iterations_used: usize,
}

/// Instantaneous power terms per sample, used by the energy audit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerTrace {
    pub source_w: Vec<f64>,
    pub load_w: Vec<f64>,
    pub filter_w: Vec<f64>,
    pub diode_w: Vec<f64>,
    pub stored_j: Vec<f64>,
}

/// Multichannel fixed-rate time series.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    sample_rate_hz: f64,
    names: Vec<String>,
    data: Vec<Vec<f64>>,
    power: Option<PowerTrace>,
    meta: Option<RunMeta>,
}

impl WaveformSet {
    pub fn from_channels(sample_rate_hz: f64, channels: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::domain("sample rate must be > 0"));
        }
        let len = channels.first().map(|c| c.1.len()).unwrap_or(0);
        if len < 2 {
            return Err(Error::domain("waveforms need at least two samples"));
        }
        if channels.iter().any(|c| c.1.len() != len) {
            return Err(Error::domain("channels differ in length"));
        }
        let (names, data) = channels.into_iter().unzip();
        Ok(WaveformSet {
            sample_rate_hz,
            names,
            data,
            power: None,
            meta: None,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel_names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, id: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == id)
            .map(|k| self.data[k].as_slice())
    }

    /// Like [`WaveformSet::channel`], but the error lists available channels.
    pub fn require(&self, id: &str) -> Result<&[f64]> {
        self.channel(id).ok_or_else(|| {
            Error::domain(format!(
                "unknown channel `{id}`; available: {}",
                self.names.join(", ")
            ))
        })
    }

    pub fn power(&self) -> Option<&PowerTrace> {
        self.power.as_ref()
    }

    pub fn meta(&self) -> Option<&RunMeta> {
        self.meta.as_ref()
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate_hz
    }

    /// CSV with a `t_s` column followed by one column per channel.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t_s")?;
        for n in &self.names {
            write!(out, ",{n}")?;
        }
        writeln!(out)?;
        let dt = 1.0 / self.sample_rate_hz;
        for k in 0..self.len() {
            write!(out, "{}", k as f64 * dt)?;
            for col in &self.data {
                write!(out, ",{}", col[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parses the layout written by [`WaveformSet::write_csv`]. The sample
    /// rate is recovered from the mean time step.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty waveform file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t_s") {
            return Err(Error::Parse("line 1: first column must be `t_s`".into()));
        }
        if cols.len() < 2 {
            return Err(Error::Parse("line 1: no channels".into()));
        }
        let mut time = Vec::new();
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); cols.len() - 1];
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut parse = |col: usize| -> Result<f64> {
                let f = fields.next().ok_or_else(|| {
                    Error::Parse(format!("line {}: missing column `{}`", lineno + 1, cols[col]))
                })?;
                f.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}, column `{}`: {e}", lineno + 1, cols[col]))
                })
            };
            time.push(parse(0)?);
            for (k, col) in data.iter_mut().enumerate() {
                col.push(parse(k + 1)?);
            }
            if fields.next().is_some() {
                return Err(Error::Parse(format!("line {}: too many columns", lineno + 1)));
            }
        }
        if time.len() < 2 {
            return Err(Error::Parse("waveform needs at least two samples".into()));
        }
        let span = time[time.len() - 1] - time[0];
        if !(span > 0.0) {
            return Err(Error::Parse("time column must increase".into()));
        }
        let dt = span / (time.len() - 1) as f64;
        let channels = cols[1..].iter().map(|s| s.to_string()).zip(data).collect();
        WaveformSet::from_channels(1.0 / dt, channels)
    }
}

/// Column-wise accumulator used during a run.
pub(crate) struct Recorder {
    data: Vec<Vec<f64>>,
    power: PowerTrace,
}

impl Recorder {
    pub(crate) fn new(capacity: usize) -> Self {
        let col = || Vec::with_capacity(capacity);
        Recorder {
            data: (0..CHANNEL_IDS.len()).map(|_| col()).collect(),
            power: PowerTrace {
                source_w: col(),
                load_w: col(),
                filter_w: col(),
                diode_w: col(),
                stored_j: col(),
            },
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.data[0].len()
    }

    pub(crate) fn push(&mut self, row: &[f64; CHANNEL_IDS.len()], p: PowerSample) {
        for (col, v) in self.data.iter_mut().zip(row) {
            col.push(*v);
        }
        self.power.source_w.push(p.source_w);
        self.power.load_w.push(p.load_w);
        self.power.filter_w.push(p.filter_w);
        self.power.diode_w.push(p.diode_w);
        self.power.stored_j.push(p.stored_j);
    }

    pub(crate) fn finish(self, sample_rate_hz: f64, meta: RunMeta) -> WaveformSet {
        WaveformSet {
            sample_rate_hz,
            names: CHANNEL_IDS.iter().map(|s| s.to_string()).collect(),
            data: self.data,
            power: Some(self.power),
            meta: Some(meta),
        }
    }
}
