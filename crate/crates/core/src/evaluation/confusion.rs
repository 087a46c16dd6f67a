use std::path::Path;

use crate::error::{Error, Result};
use crate::label::{parse_label, ClassLabel, NUM_CLASSES};

/// Prediction-versus-reference counts. `counts[p][r]` is the number of
/// items predicted `p` whose reference label is `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

/// One-vs-rest cell counts for a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn confusion(pairs: &[(ClassLabel, ClassLabel)]) -> Result<ConfusionMatrix> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for &(predicted, reference) in pairs {
        counts[predicted.index()][reference.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn get(&self, predicted: ClassLabel, reference: ClassLabel) -> u64 {
        self.counts[predicted.index()][reference.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, predicted: ClassLabel) -> u64 {
        self.counts[predicted.index()].iter().sum()
    }

    pub fn column_sum(&self, reference: ClassLabel) -> u64 {
        self.counts.iter().map(|row| row[reference.index()]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn binary(&self, class: ClassLabel) -> BinaryCounts {
        let tp = self.get(class, class);
        let fp = self.row_sum(class) - tp;
        let fn_ = self.column_sum(class) - tp;
        let tn = self.total() - tp - fp - fn_;
        BinaryCounts { tp, fp, fn_, tn }
    }

    /// Applies a relabeling: class `i` becomes `perm[i]` on both axes.
    pub fn permuted(&self, perm: &[usize; NUM_CLASSES]) -> ConfusionMatrix {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for p in 0..NUM_CLASSES {
            for r in 0..NUM_CLASSES {
                counts[perm[p]][perm[r]] = self.counts[p][r];
            }
        }
        ConfusionMatrix { counts }
    }

    /// TSV with reference labels across and predictions down.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("prediction");
        for l in ClassLabel::ALL {
            out.push('\t');
            out.push_str(l.code());
        }
        out.push('\n');
        for p in ClassLabel::ALL {
            out.push_str(p.code());
            for r in ClassLabel::ALL {
                out.push_str(&format!("\t{}", self.get(p, r)));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the confusion-matrix TSV: a header whose first cell is free text
/// and whose remaining six cells name the reference classes, then six rows
/// each starting with the predicted class. Rows and columns may come in any
/// order but each class must appear exactly once on each axis.
pub fn parse_confusion(text: &str) -> Result<ConfusionMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::EmptyDataset)?;
    let cells: Vec<&str> = header.split('\t').collect();
    if cells.len() != NUM_CLASSES + 1 {
        return Err(Error::Parse {
            line: hline,
            message: format!("header needs {} cells, got {}", NUM_CLASSES + 1, cells.len()),
        });
    }
    let columns: Vec<ClassLabel> = cells[1..]
        .iter()
        .map(|c| parse_label(c).map_err(|e| Error::at_line(hline, e)))
        .collect::<Result<_>>()?;
    let mut seen_col = [false; NUM_CLASSES];
    for c in &columns {
        if std::mem::replace(&mut seen_col[c.index()], true) {
            return Err(Error::Parse {
                line: hline,
                message: format!("reference class {c} repeated"),
            });
        }
    }
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut seen_row = [false; NUM_CLASSES];
    for (line, row) in lines {
        let cells: Vec<&str> = row.split('\t').collect();
        if cells.len() != NUM_CLASSES + 1 {
            return Err(Error::Parse {
                line,
                message: format!("row needs {} cells, got {}", NUM_CLASSES + 1, cells.len()),
            });
        }
        let predicted = parse_label(cells[0]).map_err(|e| Error::at_line(line, e))?;
        if std::mem::replace(&mut seen_row[predicted.index()], true) {
            return Err(Error::Parse {
                line,
                message: format!("prediction row {predicted} repeated"),
            });
        }
        for (cell, &reference) in cells[1..].iter().zip(&columns) {
            counts[predicted.index()][reference.index()] =
                cell.trim().parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid count {cell:?}"),
                })?;
        }
    }
    if seen_row.iter().any(|s| !s) {
        return Err(Error::Parse {
            line: hline,
            message: "every class needs a prediction row".into(),
        });
    }
    Ok(ConfusionMatrix { counts })
}

pub fn load_confusion(path: impl AsRef<Path>) -> Result<ConfusionMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_confusion(&text)
}
