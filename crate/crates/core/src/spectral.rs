//! Framed magnitude spectrograms: Hann-windowed STFT frames, magnitudes of
//! the bins whose centre frequency lies inside the configured band.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dataset::Channel;
use crate::dsp::fft::FftPlan;
use crate::dsp::window::hann;
use crate::error::{Error, Result};
use crate::preprocess::PreprocRecording;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Magnitude,
    /// `ln(1 + |X|)`
    LogMagnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub window_len: usize,
    pub hop: usize,
    pub band: [f64; 2],
    pub feature_kind: FeatureKind,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { window_len: 256, hop: 128, band: [1.0, 50.0], feature_kind: FeatureKind::LogMagnitude }
    }
}

/// Fewest frames an interval slice should yield before framing is shrunk.
const MIN_INTERVAL_FRAMES: usize = 4;

impl SpectralConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.window_len == 0 || !self.window_len.is_power_of_two() {
            return Err(Error::Config(format!("window_len {} must be a power of two", self.window_len)));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::Config(format!("hop {} must lie in 1..={}", self.hop, self.window_len)));
        }
        let [lo, hi] = self.band;
        if !(lo < hi && hi <= fs / 2.0) {
            return Err(Error::Config(format!("band [{lo}, {hi}] must satisfy f_lo < f_hi ≤ fs/2 = {}", fs / 2.0)));
        }
        Ok(())
    }

    pub fn frame_count(&self, n: usize) -> Option<usize> {
        (n >= self.window_len).then(|| (n - self.window_len) / self.hop + 1)
    }

    /// FFT bin indices kept for sample rate `fs`.
    pub fn retained_bins(&self, fs: f64) -> Vec<usize> {
        let n = self.window_len as f64;
        (0..=self.window_len / 2)
            .filter(|&k| {
                let f = k as f64 * fs / n;
                f >= self.band[0] && f <= self.band[1]
            })
            .collect()
    }

    /// Framing for short interval slices: switches to 128/64 when the
    /// configured window would give fewer than four frames.
    pub fn for_interval(&self, n: usize) -> SpectralConfig {
        match self.frame_count(n) {
            Some(t) if t >= MIN_INTERVAL_FRAMES => self.clone(),
            _ => SpectralConfig { window_len: 128, hop: 64, ..self.clone() },
        }
    }
}

/// Hann-weighted windows `w_t[m] = x[t·hop + m]·hann[m]`.
pub fn frame_signal<T: Real>(x: &[T], cfg: &SpectralConfig) -> Result<Vec<Vec<T>>> {
    let t = cfg
        .frame_count(x.len())
        .ok_or_else(|| Error::Length("signal shorter than window".into()))?;
    if cfg.hop == 0 {
        return Err(Error::Config("hop must be positive".into()));
    }
    let w = hann::<T>(cfg.window_len);
    Ok((0..t)
        .map(|i| {
            let start = i * cfg.hop;
            x[start..start + cfg.window_len].iter().zip(&w).map(|(&a, &b)| a * b).collect()
        })
        .collect())
}

/// Time frames × (channels · bins), frame-major, then channel, then bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    pub frames: usize,
    pub channels: Vec<Channel>,
    /// Retained bin centre frequencies, Hz, ascending.
    pub bins: Vec<f64>,
    pub fs: f64,
    pub data: Vec<f64>,
}

impl SpectralTensor {
    pub fn n_features(&self) -> usize {
        self.channels.len() * self.bins.len()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let f = self.n_features();
        &self.data[t * f..(t + 1) * f]
    }

    /// Features of one channel (by position in `channels`) at frame `t`.
    pub fn block(&self, t: usize, channel_pos: usize) -> &[f64] {
        let nb = self.bins.len();
        &self.frame(t)[channel_pos * nb..(channel_pos + 1) * nb]
    }
}

pub fn spectral_features(
    rec: &PreprocRecording,
    cfg: &SpectralConfig,
    channel_subset: &[Channel],
) -> Result<SpectralTensor> {
    if channel_subset.is_empty() {
        return Err(Error::Config("channel subset is empty".into()));
    }
    let fs = rec.rec.fs();
    cfg.validate(fs)?;
    let kept = cfg.retained_bins(fs);
    if kept.is_empty() {
        return Err(Error::Config(format!("band {:?} retains no FFT bins at fs={fs}", cfg.band)));
    }
    let plan = FftPlan::<f64>::new(cfg.window_len)?;
    let frames = cfg
        .frame_count(rec.rec.n_samples())
        .ok_or_else(|| Error::Length("signal shorter than window".into()))?;
    let nb = kept.len();
    let nf = channel_subset.len() * nb;
    let mut data = vec![0.0; frames * nf];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.window_len];
    for (ci, &c) in channel_subset.iter().enumerate() {
        for (t, win) in frame_signal(rec.rec.channel(c), cfg)?.into_iter().enumerate() {
            for (b, v) in buf.iter_mut().zip(win) {
                *b = Complex::new(v, 0.0);
            }
            plan.process(&mut buf, false)?;
            let row = &mut data[t * nf + ci * nb..t * nf + (ci + 1) * nb];
            for (dst, &k) in row.iter_mut().zip(&kept) {
                let m = buf[k].norm();
                *dst = match cfg.feature_kind {
                    FeatureKind::Magnitude => m,
                    FeatureKind::LogMagnitude => m.ln_1p(),
                };
            }
        }
    }
    let bins = kept.iter().map(|&k| k as f64 * fs / cfg.window_len as f64).collect();
    Ok(SpectralTensor { frames, channels: channel_subset.to_vec(), bins, fs, data })
}
