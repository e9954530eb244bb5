//! Canonical CSV layout: one row per (subject, trial, channel),
//! `subject,trial,label,channel,s0,s1,...`, with sampling rate, units and
//! split stored in a sidecar JSON manifest.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Channel, Dataset, Emotion, Recording, Split, UNKNOWN_LABEL};
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 4] = ["subject", "trial", "label", "channel"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fs_hz: f64,
    pub units: String,
    pub split: Split,
}

impl Manifest {
    pub fn new(fs_hz: f64, split: Split) -> Self {
        Self { fs_hz, units: "microvolt".into(), split }
    }

    /// Sidecar manifest path for a CSV file: same stem, `.json` extension.
    pub fn path_for(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let m: Manifest = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if m.units != "microvolt" {
        return Err(Error::Config(format!("unsupported units `{}` (expected microvolt)", m.units)));
    }
    if !(m.fs_hz > 0.0) || !m.fs_hz.is_finite() {
        return Err(Error::Config(format!("manifest fs_hz {} must be positive", m.fs_hz)));
    }
    Ok(m)
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, m)?;
    w.write_all(b"\n")?;
    Ok(())
}

struct Group {
    subject: String,
    trial: String,
    label: Option<Emotion>,
    channels: Vec<Option<Vec<f64>>>,
}

/// Loads a dataset. Rows of one (subject, trial) may appear in any channel
/// order; recordings come out in first-appearance order.
pub fn load_csv(path: &Path, manifest: &Path) -> Result<Dataset> {
    let m = read_manifest(manifest)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(BufReader::new(File::open(path)?));
    let header = rdr.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len() + 1
        || header.iter().take(4).zip(FIXED_COLUMNS).any(|(h, want)| h.trim() != want)
    {
        return Err(Error::Schema(format!(
            "header must start with `subject,trial,label,channel,s0`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    for (i, h) in header.iter().skip(4).enumerate() {
        if h.trim() != format!("s{i}") {
            return Err(Error::Schema(format!("sample column {i} is named `{h}`, expected `s{i}`")));
        }
    }
    let n_samples = header.len() - 4;

    let mut groups: Vec<Group> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        // Line 1 is the header.
        let row = i + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse { row, msg: format!("expected {} fields, found {}", header.len(), rec.len()) });
        }
        let subject = rec[0].trim().to_string();
        let trial = rec[1].trim().to_string();
        let label_str = rec[2].trim();
        let label = if label_str.eq_ignore_ascii_case(UNKNOWN_LABEL) {
            None
        } else {
            Some(label_str.parse::<Emotion>().map_err(|_| {
                Error::Label(format!("row {row}: unknown label `{label_str}` for {subject},{trial}"))
            })?)
        };
        let channel: Channel = rec[3]
            .parse()
            .map_err(|_| Error::Schema(format!("row {row}: unknown channel `{}` in {subject},{trial}", &rec[3])))?;
        let samples = rec
            .iter()
            .skip(4)
            .enumerate()
            .map(|(k, s)| match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(Error::Parse { row, msg: format!("non-finite sample s{k}") }),
                Err(_) => Err(Error::Parse { row, msg: format!("non-numeric sample s{k} `{s}`") }),
            })
            .collect::<Result<Vec<f64>>>()?;

        let key = (subject.clone(), trial.clone());
        let gi = *index.entry(key).or_insert_with(|| {
            groups.push(Group { subject: subject.clone(), trial: trial.clone(), label, channels: vec![None; Channel::COUNT] });
            groups.len() - 1
        });
        let g = &mut groups[gi];
        if g.label != label {
            return Err(Error::Schema(format!("row {row}: conflicting labels within {subject},{trial}")));
        }
        let slot = &mut g.channels[channel.index()];
        if slot.is_some() {
            return Err(Error::Schema(format!("duplicate channel row {subject},{trial},{channel}")));
        }
        *slot = Some(samples);
    }

    let recordings = groups
        .into_iter()
        .map(|g| {
            let mut channels = Vec::with_capacity(Channel::COUNT);
            for (c, w) in Channel::ALL.iter().zip(g.channels) {
                match w {
                    Some(w) => channels.push(w),
                    None => {
                        return Err(Error::Schema(format!("missing channel row {},{},{c}", g.subject, g.trial)))
                    }
                }
            }
            debug_assert!(channels.iter().all(|w| w.len() == n_samples));
            Recording::new(g.subject, g.trial, g.label, m.fs_hz, channels)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(recordings, m.split)
}

/// Writes `ds` to `path` and its manifest to [`Manifest::path_for`].
///
/// Samples use 17 significant digits, so a reload is bit-exact.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    ds.validate()?;
    let n = ds.recordings[0].n_samples();
    if let Some(r) = ds.recordings.iter().find(|r| r.n_samples() != n) {
        return Err(Error::Dataset(format!(
            "inconsistent sample count: {},{} has {} samples, expected {n}",
            r.subject_id(),
            r.trial_id(),
            r.n_samples()
        )));
    }

    let mut w = csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..n).map(|i| format!("s{i}")));
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(n + 4);
    for r in &ds.recordings {
        let label = r.label().map_or(UNKNOWN_LABEL, Emotion::name);
        for c in Channel::ALL {
            row.clear();
            row.extend([r.subject_id().to_string(), r.trial_id().to_string(), label.to_string(), c.name().to_string()]);
            row.extend(r.channel(c).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    write_manifest(&Manifest::new(ds.fs().unwrap(), ds.split), &Manifest::path_for(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, body: &str) -> (PathBuf, PathBuf) {
        let csv = dir.join("d.csv");
        fs::write(&csv, body).unwrap();
        let man = dir.join("d.json");
        write_manifest(&Manifest::new(300.0, Split::Train), &man).unwrap();
        (csv, man)
    }

    fn body(n: usize, skip: Option<Channel>, label: &str) -> String {
        let mut s = String::from("subject,trial,label,channel");
        for i in 0..n {
            s += &format!(",s{i}");
        }
        s.push('\n');
        for c in Channel::ALL.iter().rev() {
            if Some(*c) == skip {
                continue;
            }
            s += &format!("s01,t01,{label},{c}");
            for i in 0..n {
                s += &format!(",{}", i as f64 * 0.5);
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn loads_single_trial() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, man) = write(dir.path(), &body(30, None, "joy"));
        let ds = load_csv(&csv, &man).unwrap();
        assert_eq!(ds.len(), 1);
        let r = &ds.recordings[0];
        assert_eq!(r.label().unwrap().index(), 3);
        assert_eq!(r.n_samples(), 30);
        assert_eq!(r.channel(Channel::O2)[4], 2.0);
    }

    #[test]
    fn missing_channel_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, man) = write(dir.path(), &body(5, Some(Channel::O2), "joy"));
        let err = load_csv(&csv, &man).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        assert!(err.to_string().contains("s01,t01,O2"), "{err}");
    }

    #[test]
    fn duplicate_channel_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = body(3, None, "fear");
        b += "s01,t01,fear,Cz,1,2,3\n";
        let (csv, man) = write(dir.path(), &b);
        let err = load_csv(&csv, &man).unwrap_err();
        assert!(err.to_string().contains("s01,t01,Cz"), "{err}");
    }

    #[test]
    fn bad_values_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, man) = write(dir.path(), &body(3, None, "contempt"));
        assert!(matches!(load_csv(&csv, &man), Err(Error::Label(_))));

        let b = body(3, None, "joy").replacen(",0.5,", ",abc,", 1);
        let (csv, man) = write(dir.path(), &b);
        assert!(matches!(load_csv(&csv, &man), Err(Error::Parse { row: 2, .. })));

        let b = body(3, None, "joy").replacen(",0.5,", ",inf,", 1);
        let (csv, man) = write(dir.path(), &b);
        assert!(matches!(load_csv(&csv, &man), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_label_is_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, man) = write(dir.path(), &body(3, None, "unknown"));
        let ds = load_csv(&csv, &man).unwrap();
        assert_eq!(ds.recordings[0].label(), None);
    }

    #[test]
    fn save_rejects_empty_and_mixed_fs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let empty = Dataset { recordings: vec![], split: Split::Test };
        assert_eq!(save_csv(&empty, &p).unwrap_err().to_string(), "empty dataset");
        let r = |fs| Recording::from_fn("s", "t", None, fs, |_| vec![1.0; 3]).unwrap();
        let mixed = Dataset { recordings: vec![r(300.0), r(256.0)], split: Split::Train };
        assert_eq!(save_csv(&mixed, &p).unwrap_err().to_string(), "inconsistent sampling rate");
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let r = Recording::from_fn("s", "t", None, 300.0, |_| vec![1.0; 3]).unwrap();
        let ds = Dataset { recordings: vec![r], split: Split::Train };
        let err = save_csv(&ds, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
