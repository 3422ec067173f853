//! Accuracy, confusion matrix and per-class precision/recall.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use loopgrade_core::datagen::Label;

use crate::{ClassifyError, Model, Samples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    /// Rows are true OK/NOK, columns predicted OK/NOK.
    pub confusion: [[usize; 2]; 2],
    /// Indexed OK, NOK. Zero when the class is never predicted.
    pub precision: [f64; 2],
    /// Indexed OK, NOK. Zero when the class is absent.
    pub recall: [f64; 2],
}

fn idx(l: Label) -> usize {
    match l {
        Label::Ok => 0,
        Label::Nok => 1,
    }
}

fn frac(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl EvalReport {
    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Self {
        let mut confusion = [[0usize; 2]; 2];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[idx(t)][idx(p)] += 1;
        }
        let n: usize = confusion.iter().flatten().sum();
        let correct = confusion[0][0] + confusion[1][1];
        let col = |c: usize| confusion[0][c] + confusion[1][c];
        let row = |r: usize| confusion[r][0] + confusion[r][1];
        Self {
            samples: n,
            accuracy: frac(correct, n),
            confusion,
            precision: [frac(confusion[0][0], col(0)), frac(confusion[1][1], col(1))],
            recall: [frac(confusion[0][0], row(0)), frac(confusion[1][1], row(1))],
        }
    }

    pub fn to_text(&self) -> String {
        let c = &self.confusion;
        let mut s = String::new();
        let _ = writeln!(s, "samples   {}", self.samples);
        let _ = writeln!(s, "accuracy  {:.4}", self.accuracy);
        let _ = writeln!(s);
        let _ = writeln!(s, "true \\ predicted      OK     NOK");
        let _ = writeln!(s, "OK                {:>6}  {:>6}", c[0][0], c[0][1]);
        let _ = writeln!(s, "NOK               {:>6}  {:>6}", c[1][0], c[1][1]);
        let _ = writeln!(s);
        let _ = writeln!(s, "class  precision  recall");
        let _ = writeln!(s, "OK     {:>9.4}  {:>6.4}", self.precision[0], self.recall[0]);
        let _ = writeln!(s, "NOK    {:>9.4}  {:>6.4}", self.precision[1], self.recall[1]);
        s
    }
}

pub fn evaluate(model: &Model, data: &Samples) -> Result<EvalReport, ClassifyError> {
    let predicted: Vec<Label> = model.predict_samples(data)?.iter().map(|p| p.label).collect();
    Ok(EvalReport::from_labels(&data.y, &predicted))
}
