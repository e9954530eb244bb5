//! Eight-way temporal segmentation and the per-interval train/eval scan.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Recording};
use crate::error::{Error, Result};
use crate::harness::{evaluate_prepared, prepare_preprocessed, train_prepared, ExperimentConfig};
use crate::model::Variant;
use crate::preprocess::{preprocess, PreprocRecording};
use crate::rng::derive_seed;

pub const N_INTERVALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub j: usize,
    /// Seconds.
    pub start: f64,
    pub end: f64,
    /// Half-open sample range `[start_sample, end_sample)`.
    pub start_sample: usize,
    pub end_sample: usize,
}

impl IntervalSpec {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `Interval_j = [j·T/8, (j+1)·T/8)` for `j = 0..8`. Sample bounds are
/// `round(time·fs)` clipped to `n = round(T·fs)`; the last interval ends at `n`.
pub fn make_intervals(total_time: f64, fs: f64) -> Result<Vec<IntervalSpec>> {
    if !(total_time > 0.0) || !(fs > 0.0) {
        return Err(Error::Config("total_time and fs must be positive".into()));
    }
    let n = (total_time * fs).round() as usize;
    let bound = |j: usize| -> (f64, usize) {
        let t = j as f64 * total_time / N_INTERVALS as f64;
        let s = if j == N_INTERVALS { n } else { ((t * fs).round() as usize).min(n) };
        (t, s)
    };
    Ok((0..N_INTERVALS)
        .map(|j| {
            let (start, start_sample) = bound(j);
            let (end, end_sample) = bound(j + 1);
            IntervalSpec { j, start, end, start_sample, end_sample }
        })
        .collect())
}

/// Restricts every channel to the interval's sample range.
pub fn slice_recording(rec: &PreprocRecording, iv: &IntervalSpec) -> Result<PreprocRecording> {
    if iv.end_sample > rec.rec.n_samples() || iv.start_sample >= iv.end_sample {
        return Err(Error::Interval(format!(
            "interval {} [{}, {}) is empty or exceeds {} samples",
            iv.j,
            iv.start_sample,
            iv.end_sample,
            rec.rec.n_samples()
        )));
    }
    let out = rec.rec.map_channels(|_, w| w[iv.start_sample..iv.end_sample].to_vec())?;
    Ok(PreprocRecording { rec: out, stage: rec.stage })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub variant: Variant,
    pub j: usize,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    /// `ok` or `skipped: <reason>`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalScanReport {
    pub entries: Vec<ScanEntry>,
}

impl TemporalScanReport {
    pub fn for_variant(&self, v: Variant) -> impl Iterator<Item = &ScanEntry> {
        self.entries.iter().filter(move |e| e.variant == v)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |a| a.to_string());
        let mut s = String::from("variant,j,train_acc,val_acc,status\n");
        for e in &self.entries {
            let status = if e.status.contains(',') { format!("\"{}\"", e.status) } else { e.status.clone() };
            s += &format!("{},{},{},{},{}\n", e.variant, e.j, opt(e.train_acc), opt(e.val_acc), status);
        }
        s
    }
}

fn slices(recs: &[PreprocRecording], j: usize) -> Result<Vec<PreprocRecording>> {
    recs.iter()
        .map(|r| {
            let ivs = make_intervals(r.rec.duration(), r.rec.fs())?;
            slice_recording(r, &ivs[j])
        })
        .collect()
}

fn run_interval(
    train: &[PreprocRecording],
    val: &[PreprocRecording],
    j: usize,
    cfg: &ExperimentConfig,
) -> Result<(f64, f64)> {
    let tr = slices(train, j)?;
    let va = slices(val, j)?;
    let n = tr.iter().chain(&va).map(|r| r.rec.n_samples()).min().unwrap_or(0);
    let spectral = cfg.spectral.for_interval(n);
    let frames = spectral.frame_count(n).unwrap_or(0);
    if frames < cfg.model.min_frames() {
        return Err(Error::Interval(format!(
            "{n}-sample interval yields {frames} frames with window {}; model needs {}",
            spectral.window_len,
            cfg.model.min_frames()
        )));
    }
    let tr = prepare_preprocessed(&tr, &spectral, cfg.variant)?;
    let va = prepare_preprocessed(&va, &spectral, cfg.variant)?;
    let run = ExperimentConfig { seed: derive_seed(cfg.seed, 100 + j as u64), spectral, ..cfg.clone() };
    let (params, val_report) = train_prepared(&tr, &va, &run)?;
    let train_report = evaluate_prepared(&tr, &params)?;
    Ok((train_report.accuracy, val_report.accuracy))
}

/// Trains a fresh model per interval and variant on interval slices of the
/// pre-processed recordings. Intervals that cannot be framed or trained are
/// reported as skipped rather than aborting the scan.
pub fn temporal_scan(
    train: &Dataset,
    val: &Dataset,
    base: &ExperimentConfig,
    variants: &[Variant],
) -> Result<TemporalScanReport> {
    base.validate()?;
    let prep = |ds: &Dataset| ds.recordings.iter().map(|r: &Recording| preprocess(r, &base.preproc)).collect::<Result<Vec<_>>>();
    let (tr, va) = (prep(train)?, prep(val)?);
    let mut entries = Vec::with_capacity(variants.len() * N_INTERVALS);
    for &variant in variants {
        let cfg = ExperimentConfig { variant, ..base.clone() };
        for j in 0..N_INTERVALS {
            let entry = match run_interval(&tr, &va, j, &cfg) {
                Ok((t, v)) => ScanEntry { variant, j, train_acc: Some(t), val_acc: Some(v), status: "ok".into() },
                Err(e @ (Error::Interval(_) | Error::Length(_) | Error::Shape(_))) => {
                    ScanEntry { variant, j, train_acc: None, val_acc: None, status: format!("skipped: {e}") }
                }
                Err(e) => return Err(e),
            };
            entries.push(entry);
        }
    }
    Ok(TemporalScanReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Channel;
    use proptest::prelude::*;

    #[test]
    fn fifteen_second_bounds() {
        let iv = make_intervals(15.0, 300.0).unwrap();
        assert_eq!(iv.len(), 8);
        assert_eq!((iv[0].start, iv[0].end), (0.0, 1.875));
        assert_eq!((iv[7].start, iv[7].end), (13.125, 15.0));
    }

    #[test]
    fn prep_length_partition() {
        let iv = make_intervals(4488.0 / 300.0, 300.0).unwrap();
        let lens: Vec<usize> = iv.iter().map(IntervalSpec::len).collect();
        assert!(lens.iter().all(|l| *l == 561 || *l == 562), "{lens:?}");
        assert_eq!(lens.iter().sum::<usize>(), 4488);
    }

    #[test]
    fn slices_reassemble() {
        let rec = Recording::from_fn("s", "t", None, 300.0, |c| (0..997).map(|i| (i * (c.index() + 1)) as f64 * 0.25).collect()).unwrap();
        let pr = PreprocRecording::prepared(rec.clone());
        let iv = make_intervals(rec.duration(), 300.0).unwrap();
        let parts: Vec<PreprocRecording> = iv.iter().map(|i| slice_recording(&pr, i).unwrap()).collect();
        assert_eq!(parts[0].rec.channel(Channel::Cz)[0], rec.channel(Channel::Cz)[0]);
        for c in Channel::ALL {
            let joined: Vec<f64> = parts.iter().flat_map(|p| p.rec.channel(c).to_vec()).collect();
            assert_eq!(joined, rec.channel(c));
        }
        let flat = PreprocRecording::prepared(Recording::from_fn("s", "t", None, 300.0, |_| vec![2.0; 80]).unwrap());
        let part = slice_recording(&flat, &make_intervals(80.0 / 300.0, 300.0).unwrap()[3]).unwrap();
        assert!(part.rec.channel(Channel::O1).iter().all(|&v| v == 2.0));
    }

    #[test]
    fn empty_slice_is_an_error() {
        let rec = PreprocRecording::prepared(Recording::from_fn("s", "t", None, 300.0, |_| vec![0.0; 4]).unwrap());
        let iv = make_intervals(4.0 / 300.0, 300.0).unwrap();
        assert!(iv.iter().any(|i| matches!(slice_recording(&rec, i), Err(Error::Interval(_)))));
    }

    #[test]
    fn csv_has_fixed_columns() {
        let r = TemporalScanReport {
            entries: vec![ScanEntry { variant: Variant::Bi, j: 0, train_acc: Some(50.0), val_acc: None, status: "skipped: x, y".into() }],
        };
        assert_eq!(r.to_csv(), "variant,j,train_acc,val_acc,status\nbi,0,50,,\"skipped: x, y\"\n");
    }

    proptest! {
        #[test]
        fn intervals_partition_samples(n in 8usize..20_000, fs in prop_oneof![Just(300.0), Just(256.0), Just(128.0)]) {
            let total = n as f64 / fs;
            let iv = make_intervals(total, fs).unwrap();
            prop_assert_eq!(iv[0].start_sample, 0);
            prop_assert_eq!(iv[7].end_sample, n);
            for w in iv.windows(2) {
                prop_assert_eq!(w[0].end_sample, w[1].start_sample);
            }
            let lens: Vec<usize> = iv.iter().map(IntervalSpec::len).collect();
            let (lo, hi) = (lens.iter().min().unwrap(), lens.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "{:?}", lens);
        }

        #[test]
        fn doubling_time_doubles_bounds(total in 0.5f64..100.0) {
            let a = make_intervals(total, 300.0).unwrap();
            let b = make_intervals(2.0 * total, 300.0).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((2.0 * x.start - y.start).abs() <= 1e-12 * y.end);
                prop_assert!((2.0 * x.end - y.end).abs() <= 1e-12 * y.end);
            }
        }
    }
}
