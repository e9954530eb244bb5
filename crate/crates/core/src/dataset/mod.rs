//! EEG recordings, labels, and their on-disk form.

mod csv_io;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, read_manifest, save_csv, write_manifest, Manifest};
pub use synth::{gen_synthetic, SynthSpec};

/// The 21 electrodes of the 10–20 montage, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Fp1,
    Fp2,
    F7,
    F3,
    Fz,
    F4,
    F8,
    T3,
    C3,
    Cz,
    C4,
    T4,
    T5,
    P3,
    Pz,
    P4,
    T6,
    O1,
    O2,
    A1,
    A2,
}

impl Channel {
    pub const COUNT: usize = 21;

    pub const ALL: [Channel; 21] = [
        Channel::Fp1,
        Channel::Fp2,
        Channel::F7,
        Channel::F3,
        Channel::Fz,
        Channel::F4,
        Channel::F8,
        Channel::T3,
        Channel::C3,
        Channel::Cz,
        Channel::C4,
        Channel::T4,
        Channel::T5,
        Channel::P3,
        Channel::Pz,
        Channel::P4,
        Channel::T6,
        Channel::O1,
        Channel::O2,
        Channel::A1,
        Channel::A2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Fp1 => "Fp1",
            Channel::Fp2 => "Fp2",
            Channel::F7 => "F7",
            Channel::F3 => "F3",
            Channel::Fz => "Fz",
            Channel::F4 => "F4",
            Channel::F8 => "F8",
            Channel::T3 => "T3",
            Channel::C3 => "C3",
            Channel::Cz => "Cz",
            Channel::C4 => "C4",
            Channel::T4 => "T4",
            Channel::T5 => "T5",
            Channel::P3 => "P3",
            Channel::Pz => "Pz",
            Channel::P4 => "P4",
            Channel::T6 => "T6",
            Channel::O1 => "O1",
            Channel::O2 => "O2",
            Channel::A1 => "A1",
            Channel::A2 => "A2",
        }
    }

    /// Homologous electrode on the opposite hemisphere; midline sites and Pz map to themselves.
    pub fn mirror(self) -> Channel {
        use Channel::*;
        match self {
            Fp1 => Fp2,
            Fp2 => Fp1,
            F7 => F8,
            F8 => F7,
            C3 => C4,
            C4 => C3,
            P3 => P4,
            P4 => P3,
            O1 => O2,
            O2 => O1,
            F3 => F4,
            F4 => F3,
            T3 => T4,
            T4 => T3,
            T5 => T6,
            T6 => T5,
            A1 => A2,
            A2 => A1,
            Fz => Fz,
            Cz => Cz,
            Pz => Pz,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Channel::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Schema(format!("unknown channel `{s}`")))
    }
}

/// Six basic emotions, indexed alphabetically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
}

impl Emotion {
    pub const COUNT: usize = 6;

    pub const ALL: [Emotion; 6] =
        [Emotion::Anger, Emotion::Disgust, Emotion::Fear, Emotion::Joy, Emotion::Sadness, Emotion::Surprise];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Emotion::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Emotion::ALL
            .iter()
            .copied()
            .find(|e| e.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Label(format!("unknown label `{t}`")))
    }
}

/// Label string written for unlabeled (test) recordings.
pub const UNKNOWN_LABEL: &str = "unknown";

/// One subject/trial: 21 equal-length waveforms in µV.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    subject_id: String,
    trial_id: String,
    label: Option<Emotion>,
    fs: f64,
    channels: Vec<Vec<f64>>,
}

impl Recording {
    /// `channels` is indexed by [`Channel::index`].
    pub fn new(
        subject_id: impl Into<String>,
        trial_id: impl Into<String>,
        label: Option<Emotion>,
        fs: f64,
        channels: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let rec = Self { subject_id: subject_id.into(), trial_id: trial_id.into(), label, fs, channels };
        rec.validate()?;
        Ok(rec)
    }

    /// Builds a recording from a per-channel closure.
    pub fn from_fn(
        subject_id: impl Into<String>,
        trial_id: impl Into<String>,
        label: Option<Emotion>,
        fs: f64,
        mut f: impl FnMut(Channel) -> Vec<f64>,
    ) -> Result<Self> {
        let channels = Channel::ALL.iter().map(|&c| f(c)).collect();
        Self::new(subject_id, trial_id, label, fs, channels)
    }

    fn validate(&self) -> Result<()> {
        let who = format!("{},{}", self.subject_id, self.trial_id);
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return Err(Error::Structural(format!("{who}: sampling rate {} must be positive", self.fs)));
        }
        if self.channels.len() != Channel::COUNT {
            return Err(Error::Structural(format!(
                "{who}: expected {} channels, got {}",
                Channel::COUNT,
                self.channels.len()
            )));
        }
        let n = self.channels[0].len();
        if n == 0 {
            return Err(Error::Structural(format!("{who}: empty waveform")));
        }
        for (c, w) in Channel::ALL.iter().zip(&self.channels) {
            if w.len() != n {
                return Err(Error::Structural(format!("{who},{c}: length {} differs from {n}", w.len())));
            }
            if let Some(i) = w.iter().position(|v| !v.is_finite()) {
                return Err(Error::Structural(format!("{who},{c}: non-finite sample at index {i}")));
            }
        }
        Ok(())
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn trial_id(&self) -> &str {
        &self.trial_id
    }

    pub fn label(&self) -> Option<Emotion> {
        self.label
    }

    pub fn with_label(mut self, label: Option<Emotion>) -> Self {
        self.label = label;
        self
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn n_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.channels[c.index()]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    /// Applies `f` to every waveform. The result is re-validated.
    pub fn map_channels(&self, mut f: impl FnMut(Channel, &[f64]) -> Vec<f64>) -> Result<Recording> {
        let channels = Channel::ALL.iter().zip(&self.channels).map(|(&c, w)| f(c, w)).collect();
        Recording::new(self.subject_id.clone(), self.trial_id.clone(), self.label, self.fs, channels)
    }

    /// Swaps every waveform with its homologous counterpart.
    pub fn mirrored(&self) -> Recording {
        let channels = Channel::ALL.iter().map(|c| self.channels[c.mirror().index()].clone()).collect();
        Recording { channels, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub recordings: Vec<Recording>,
    pub split: Split,
}

impl Dataset {
    /// Checks the dataset-level invariants: train/validation sets are
    /// non-empty and every recording shares one sampling rate.
    pub fn new(recordings: Vec<Recording>, split: Split) -> Result<Self> {
        let ds = Self { recordings, split };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.recordings.is_empty() && self.split != Split::Test {
            return Err(Error::Dataset("empty dataset".into()));
        }
        if let Some(first) = self.recordings.first() {
            if self.recordings.iter().any(|r| r.fs() != first.fs()) {
                return Err(Error::Dataset("inconsistent sampling rate".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn fs(&self) -> Option<f64> {
        self.recordings.first().map(Recording::fs)
    }

    pub fn is_labeled(&self) -> bool {
        self.recordings.iter().all(|r| r.label().is_some())
    }

    /// Recording count per emotion index.
    pub fn class_counts(&self) -> [usize; Emotion::COUNT] {
        let mut counts = [0; Emotion::COUNT];
        for e in self.recordings.iter().filter_map(Recording::label) {
            counts[e.index()] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_lookup_is_case_insensitive_and_total() {
        for c in Channel::ALL {
            assert_eq!(c.name().to_uppercase().parse::<Channel>().unwrap(), c);
            assert_eq!(c.name().to_lowercase().parse::<Channel>().unwrap(), c);
            assert_eq!(c.mirror().mirror(), c);
        }
        let mut names: Vec<_> = Channel::ALL.iter().map(|c| c.name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 21);
        assert!("Oz".parse::<Channel>().is_err());
    }

    #[test]
    fn emotion_index_bijection() {
        for (i, e) in Emotion::ALL.iter().enumerate() {
            assert_eq!(e.index(), i);
            assert_eq!(Emotion::from_index(i), Some(*e));
            assert_eq!(e.name().parse::<Emotion>().unwrap(), *e);
        }
        assert_eq!("joy".parse::<Emotion>().unwrap().index(), 3);
        assert!(matches!("contempt".parse::<Emotion>(), Err(Error::Label(_))));
    }

    #[test]
    fn recording_rejects_bad_input() {
        let ok = |_c: Channel| vec![0.0; 4];
        assert!(Recording::from_fn("s", "t", None, 300.0, ok).is_ok());
        assert!(Recording::from_fn("s", "t", None, 0.0, ok).is_err());
        assert!(Recording::from_fn("s", "t", None, 300.0, |_| vec![]).is_err());
        assert!(Recording::from_fn("s", "t", None, 300.0, |c| vec![0.0; if c == Channel::O2 { 3 } else { 4 }]).is_err());
        assert!(Recording::from_fn("s", "t", None, 300.0, |_| vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn dataset_invariants() {
        let r = |fs| Recording::from_fn("s", "t", None, fs, |_| vec![0.0; 4]).unwrap();
        assert!(Dataset::new(vec![], Split::Train).is_err());
        assert!(Dataset::new(vec![], Split::Test).is_ok());
        let err = Dataset::new(vec![r(300.0), r(250.0)], Split::Train).unwrap_err();
        assert_eq!(err.to_string(), "inconsistent sampling rate");
    }
}
