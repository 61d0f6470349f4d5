//! Pixel-wise scoring of a predicted lesion mask against a reference mask.
//!
//! Recall is `tp / (tp + fn)`, precision is `tp / (tp + fp)`. A zero
//! denominator yields 0 with the matching `undefined` flag set, so batch
//! runs never abort on one degenerate image.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Row-major lesion (`true`) / healthy (`false`) labeling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-healthy mask.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask holds {} flags, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// 0 for healthy, 255 for lesion.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    /// Parses a 0/255 byte plane; any other value is rejected.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask plane holds {} bytes, expected {}",
                bytes.len(),
                width * height
            )));
        }
        let mut bits = Vec::with_capacity(bytes.len());
        for (i, &v) in bytes.iter().enumerate() {
            match v {
                0 => bits.push(false),
                255 => bits.push(true),
                value => {
                    return Err(Error::MalformedMask {
                        x: i % width,
                        y: i / width,
                        value,
                    })
                }
            }
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion_counts(pred: &BinaryMask, reference: &BinaryMask) -> Result<ConfusionCounts> {
    if pred.dims() != reference.dims() {
        return Err(Error::dims(pred.dims(), reference.dims()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &r) in pred.bits.iter().zip(&reference.bits) {
        match (p, r) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub recall: f64,
    pub precision: f64,
    pub recall_undefined: bool,
    pub precision_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
    Metrics {
        recall,
        precision,
        recall_undefined,
        precision_undefined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub id: String,
    pub recall: f64,
    pub precision: f64,
    pub recall_undefined: bool,
    pub precision_undefined: bool,
}

impl EvalRow {
    pub fn new(id: impl Into<String>, m: Metrics) -> Self {
        Self {
            id: id.into(),
            recall: m.recall,
            precision: m.precision,
            recall_undefined: m.recall_undefined,
            precision_undefined: m.precision_undefined,
        }
    }
}

/// Per-image rows plus their arithmetic-mean recall and precision (fractions).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub average_recall: f64,
    pub average_precision: f64,
}

impl EvalTable {
    pub fn from_rows(rows: Vec<EvalRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParams("evaluation needs at least one case".into()));
        }
        let n = rows.len() as f64;
        let average_recall = rows.iter().map(|r| r.recall).sum::<f64>() / n;
        let average_precision = rows.iter().map(|r| r.precision).sum::<f64>() / n;
        Ok(Self {
            rows,
            average_recall,
            average_precision,
        })
    }

    pub fn average_recall_percent(&self) -> f64 {
        self.average_recall * 100.0
    }

    pub fn average_precision_percent(&self) -> f64 {
        self.average_precision * 100.0
    }

    /// `id,recall,precision` in percent with two decimals, closed by an `AVERAGE` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,recall,precision\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.2},{:.2}", r.id, r.recall * 100.0, r.precision * 100.0);
        }
        let _ = writeln!(
            out,
            "AVERAGE,{:.2},{:.2}",
            self.average_recall_percent(),
            self.average_precision_percent()
        );
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            id: &'a str,
            recall: f64,
            precision: f64,
            undefined_recall: bool,
            undefined_precision: bool,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            rows: Vec<Row<'a>>,
            average_recall: f64,
            average_precision: f64,
        }
        let doc = Doc {
            rows: self
                .rows
                .iter()
                .map(|r| Row {
                    id: &r.id,
                    recall: round2(r.recall * 100.0),
                    precision: round2(r.precision * 100.0),
                    undefined_recall: r.recall_undefined,
                    undefined_precision: r.precision_undefined,
                })
                .collect(),
            average_recall: round2(self.average_recall_percent()),
            average_precision: round2(self.average_precision_percent()),
        };
        serde_json::to_string_pretty(&doc).expect("table serializes") + "\n"
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Scores each `(id, prediction, reference)` case in input order.
pub fn batch_evaluate<S: AsRef<str>>(cases: &[(S, &BinaryMask, &BinaryMask)]) -> Result<EvalTable> {
    let rows = cases
        .iter()
        .map(|(id, pred, reference)| {
            let counts = confusion_counts(pred, reference).map_err(|e| Error::Case {
                id: id.as_ref().to_string(),
                source: Box::new(e),
            })?;
            Ok(EvalRow::new(id.as_ref(), metrics(&counts)))
        })
        .collect::<Result<Vec<_>>>()?;
    EvalTable::from_rows(rows)
}
