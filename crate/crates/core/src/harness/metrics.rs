use serde::{Deserialize, Serialize};

use crate::dataset::Emotion;

const C: usize = Emotion::COUNT;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Percent correct.
    pub accuracy: f64,
    pub n: usize,
    /// `confusion[true][pred]` counts.
    pub confusion: [[usize; C]; C],
    /// Row-normalised percentages; empty rows stay zero.
    pub confusion_pct: [[f64; C]; C],
    /// Percent recall per true class; `None` when the class is absent.
    pub per_class_recall: [Option<f64>; C],
    #[serde(default)]
    pub loss_curve: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Emotion, Emotion)>) -> Self {
        let mut confusion = [[0usize; C]; C];
        let mut n = 0;
        for (t, p) in pairs {
            confusion[t.index()][p.index()] += 1;
            n += 1;
        }
        let correct: usize = (0..C).map(|i| confusion[i][i]).sum();
        let mut confusion_pct = [[0.0; C]; C];
        let mut per_class_recall = [None; C];
        for i in 0..C {
            let row: usize = confusion[i].iter().sum();
            if row > 0 {
                for j in 0..C {
                    confusion_pct[i][j] = 100.0 * confusion[i][j] as f64 / row as f64;
                }
                per_class_recall[i] = Some(confusion_pct[i][i]);
            }
        }
        let accuracy = if n == 0 { 0.0 } else { 100.0 * correct as f64 / n as f64 };
        Self { accuracy, n, confusion, confusion_pct, per_class_recall, loss_curve: Vec::new(), warnings: Vec::new() }
    }

    pub fn correct(&self) -> usize {
        (0..C).map(|i| self.confusion[i][i]).sum()
    }

    /// Ground-truth count per class (confusion row sums).
    pub fn class_totals(&self) -> [usize; C] {
        let mut out = [0; C];
        for (i, row) in self.confusion.iter().enumerate() {
            out[i] = row.iter().sum();
        }
        out
    }

    pub fn confusion_csv(&self, percent: bool) -> String {
        let mut s = String::from("true\\pred");
        for e in Emotion::ALL {
            s += &format!(",{e}");
        }
        s.push('\n');
        for e in Emotion::ALL {
            s += e.name();
            for j in 0..C {
                if percent {
                    s += &format!(",{:.1}", self.confusion_pct[e.index()][j]);
                } else {
                    s += &format!(",{}", self.confusion[e.index()][j]);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn loss_curve_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
        for r in &self.loss_curve {
            s += &format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.val_acc);
        }
        s
    }
}
