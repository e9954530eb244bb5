//! Left/right hemisphere electrode streams.
//!
//! Midline Fz and Cz feed both streams. Pz, the recording reference, feeds
//! neither. Within a stream, position `i` on the left is the homologue of
//! position `i` on the right.

use std::collections::BTreeSet;

use crate::dataset::Channel;
use crate::error::Result;
use crate::preprocess::PreprocRecording;
use crate::spectral::{spectral_features, SpectralConfig, SpectralTensor};

use Channel::*;

pub const LEFT: [Channel; 11] = [Fp1, F7, C3, P3, O1, F3, T3, T5, Fz, Cz, A1];
pub const RIGHT: [Channel; 11] = [Fp2, F8, C4, P4, O2, F4, T4, T6, Fz, Cz, A2];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HemiPartition {
    pub left: Vec<Channel>,
    pub right: Vec<Channel>,
}

impl Default for HemiPartition {
    fn default() -> Self {
        Self { left: LEFT.to_vec(), right: RIGHT.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub left_size: usize,
    pub right_size: usize,
    pub intersection: BTreeSet<Channel>,
    /// Channels covered by neither stream.
    pub uncovered: BTreeSet<Channel>,
    pub violations: Vec<String>,
}

impl PartitionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl HemiPartition {
    pub fn check(&self) -> PartitionReport {
        let l: BTreeSet<Channel> = self.left.iter().copied().collect();
        let r: BTreeSet<Channel> = self.right.iter().copied().collect();
        let intersection: BTreeSet<Channel> = l.intersection(&r).copied().collect();
        let union: BTreeSet<Channel> = l.union(&r).copied().collect();
        let uncovered: BTreeSet<Channel> = Channel::ALL.iter().copied().filter(|c| !union.contains(c)).collect();

        let mut violations = Vec::new();
        if self.left.len() != 11 || self.right.len() != 11 {
            violations.push(format!("stream sizes {}/{} (expected 11/11)", self.left.len(), self.right.len()));
        }
        if l.len() != self.left.len() || r.len() != self.right.len() {
            violations.push("duplicate channel within a stream".into());
        }
        if intersection != BTreeSet::from([Fz, Cz]) {
            violations.push(format!("intersection {intersection:?} (expected {{Fz, Cz}})"));
        }
        if uncovered != BTreeSet::from([Pz]) {
            violations.push(format!("uncovered {uncovered:?} (expected {{Pz}})"));
        }
        PartitionReport { left_size: self.left.len(), right_size: self.right.len(), intersection, uncovered, violations }
    }
}

/// Verifies the default partition.
pub fn partition_check() -> PartitionReport {
    HemiPartition::default().check()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HemiPair {
    pub left: SpectralTensor,
    pub right: SpectralTensor,
}

pub fn split(rec: &PreprocRecording, cfg: &SpectralConfig) -> Result<HemiPair> {
    Ok(HemiPair { left: spectral_features(rec, cfg, &LEFT)?, right: spectral_features(rec, cfg, &RIGHT)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Recording;

    fn prep(f: impl FnMut(Channel) -> Vec<f64>) -> PreprocRecording {
        PreprocRecording::prepared(Recording::from_fn("s", "t", None, 300.0, f).unwrap())
    }

    fn noise(c: Channel) -> Vec<f64> {
        (0..300).map(|i| (((i + 1) * (c.index() + 5) * 7919) % 101) as f64 - 50.0).collect()
    }

    #[test]
    fn default_partition() {
        let r = partition_check();
        assert!(r.ok(), "{:?}", r.violations);
        assert_eq!(r.left_size, 11);
        assert_eq!(r.intersection, BTreeSet::from([Fz, Cz]));
        assert_eq!(r.uncovered, BTreeSet::from([Pz]));
        for (l, rr) in LEFT.iter().zip(RIGHT) {
            assert_eq!(l.mirror(), rr);
        }
    }

    #[test]
    fn broken_partition_reported() {
        let mut p = HemiPartition::default();
        p.left.pop();
        let r = p.check();
        assert!(!r.ok());
        assert!(r.uncovered.contains(&A1));
    }

    #[test]
    fn widths_and_exclusions() {
        let cfg = SpectralConfig::default();
        let pair = split(&prep(noise), &cfg).unwrap();
        assert_eq!(pair.left.n_features(), 11 * 42);
        assert_eq!(pair.right.n_features(), 11 * 42);

        let pz_only = split(&prep(|c| if c == Pz { noise(c) } else { vec![0.0; 300] }), &cfg).unwrap();
        assert!(pz_only.left.data.iter().chain(&pz_only.right.data).all(|&v| v == 0.0));

        let fz_only = split(&prep(|c| if c == Fz { noise(c) } else { vec![0.0; 300] }), &cfg).unwrap();
        let pos = LEFT.iter().position(|&c| c == Fz).unwrap();
        assert!(fz_only.left.block(0, pos).iter().any(|&v| v > 0.0));
        assert_eq!(fz_only.left.block(0, pos), fz_only.right.block(0, pos));
    }

    #[test]
    fn mirror_swaps_streams() {
        let cfg = SpectralConfig::default();
        let rec = prep(noise);
        let a = split(&rec, &cfg).unwrap();
        let b = split(&PreprocRecording::prepared(rec.rec.mirrored()), &cfg).unwrap();
        assert_eq!(a.left.data, b.right.data);
        assert_eq!(a.right.data, b.left.data);
    }
}
