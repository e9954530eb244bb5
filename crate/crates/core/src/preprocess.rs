//! Mastoid re-referencing, band filtering, and filter-delay removal.

use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, Recording};
use crate::dsp::butterworth::{FilterKind, SosCascade};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocConfig {
    pub hp_cutoff: f64,
    pub lp_cutoff: f64,
    pub filter_order: usize,
    /// Seconds of leading signal discarded after filtering.
    pub delay: f64,
    pub enable_reref: bool,
    pub enable_filter: bool,
    pub enable_trim: bool,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            hp_cutoff: 1.0,
            lp_cutoff: 50.0,
            filter_order: 4,
            delay: 0.040,
            enable_reref: true,
            enable_filter: true,
            enable_trim: true,
        }
    }
}

impl PreprocConfig {
    pub fn bypass() -> Self {
        Self { enable_reref: false, enable_filter: false, enable_trim: false, ..Self::default() }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if ![2, 4, 6, 8].contains(&self.filter_order) {
            return Err(Error::Config(format!("filter_order {} must be one of 2, 4, 6, 8", self.filter_order)));
        }
        if !(self.hp_cutoff > 0.0 && self.hp_cutoff < self.lp_cutoff) {
            return Err(Error::Config(format!(
                "cutoffs must satisfy 0 < hp ({}) < lp ({})",
                self.hp_cutoff, self.lp_cutoff
            )));
        }
        if self.lp_cutoff >= fs / 2.0 {
            return Err(Error::Config(format!("lp_cutoff {} Hz must be below Nyquist {} Hz", self.lp_cutoff, fs / 2.0)));
        }
        if !(self.delay >= 0.0) || !self.delay.is_finite() {
            return Err(Error::Config(format!("delay {} must be non-negative", self.delay)));
        }
        Ok(())
    }

    /// Leading samples removed by [`trim_delay`]: `round(delay·fs)`, halves away from zero.
    pub fn delay_samples(&self, fs: f64) -> usize {
        (self.delay * fs).round() as usize
    }
}

/// Last pre-processing stage applied to a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Raw,
    Ref,
    Filt,
    Prep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocRecording {
    pub rec: Recording,
    pub stage: Stage,
}

impl PreprocRecording {
    pub fn raw(rec: Recording) -> Self {
        Self { rec, stage: Stage::Raw }
    }

    /// Wraps data that was pre-processed elsewhere (e.g. a saved prep CSV).
    pub fn prepared(rec: Recording) -> Self {
        Self { rec, stage: Stage::Prep }
    }
}

/// `x_i − (x_A1 + x_A2)/2` on every channel, mastoids included.
pub fn re_reference(rec: &Recording) -> Result<PreprocRecording> {
    let a1 = rec.channel(Channel::A1);
    let a2 = rec.channel(Channel::A2);
    if a1.len() != rec.n_samples() || a2.len() != rec.n_samples() {
        return Err(Error::Structural("mastoid channels A1/A2 missing or mismatched".into()));
    }
    let mean: Vec<f64> = a1.iter().zip(a2).map(|(a, b)| (a + b) / 2.0).collect();
    // Mastoids as ±(A1 − A2)/2 so their sum is exactly zero and a second
    // pass subtracts an exact zero.
    let half_diff: Vec<f64> = a1.iter().zip(a2).map(|(a, b)| (a - b) / 2.0).collect();
    let out = rec.map_channels(|c, w| match c {
        Channel::A1 => half_diff.clone(),
        Channel::A2 => half_diff.iter().map(|v| -v).collect(),
        _ => w.iter().zip(&mean).map(|(x, m)| x - m).collect(),
    })?;
    Ok(PreprocRecording { rec: out, stage: Stage::Ref })
}

/// Causal `HPF(LPF(x))` per channel.
pub fn band_filter(input: &PreprocRecording, cfg: &PreprocConfig) -> Result<PreprocRecording> {
    if input.stage > Stage::Ref {
        return Err(Error::Structural(format!("band_filter expects a raw or re-referenced recording, got {:?}", input.stage)));
    }
    let fs = input.rec.fs();
    cfg.validate(fs)?;
    let n = input.rec.n_samples();
    if n < 3 * cfg.filter_order {
        return Err(Error::Length(format!(
            "waveform of {n} samples is shorter than 3 × filter order ({})",
            3 * cfg.filter_order
        )));
    }
    let lpf = SosCascade::butterworth(FilterKind::Lowpass, cfg.filter_order, cfg.lp_cutoff, fs)?;
    let hpf = SosCascade::butterworth(FilterKind::Highpass, cfg.filter_order, cfg.hp_cutoff, fs)?;
    let out = input.rec.map_channels(|_, w| hpf.filter(&lpf.filter(w)))?;
    Ok(PreprocRecording { rec: out, stage: Stage::Filt })
}

/// Drops `round(delay·fs)` leading samples from every channel.
pub fn trim_delay(input: &PreprocRecording, cfg: &PreprocConfig) -> Result<PreprocRecording> {
    if !(cfg.delay >= 0.0) || !cfg.delay.is_finite() {
        return Err(Error::Config(format!("delay {} must be non-negative", cfg.delay)));
    }
    let d = cfg.delay_samples(input.rec.fs());
    if d >= input.rec.n_samples() {
        return Err(Error::Length("delay exceeds recording".into()));
    }
    let out = input.rec.map_channels(|_, w| w[d..].to_vec())?;
    Ok(PreprocRecording { rec: out, stage: Stage::Prep })
}

/// The full chain; disabled stages are skipped and the tag of the last
/// applied stage carries through.
pub fn preprocess(rec: &Recording, cfg: &PreprocConfig) -> Result<PreprocRecording> {
    let mut cur = if cfg.enable_reref { re_reference(rec)? } else { PreprocRecording::raw(rec.clone()) };
    if cfg.enable_filter {
        cur = band_filter(&cur, cfg)?;
    }
    if cfg.enable_trim {
        cur = trim_delay(&cur, cfg)?;
    }
    Ok(cur)
}
