use crate::error::{Error, Result};
use crate::ingest::manifest::Labeled;
use crate::label::ClassLabel;
use crate::random::RandomStream;

/// Number of validation records for a class of size `n`: `n * fraction`
/// rounded half up, at least one when the class has two or more members.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    // The epsilon keeps products such as 10 * 0.25 on the "half" side.
    let rounded = (n as f64 * fraction + 0.5 + 1e-9).floor() as usize;
    let count = if n >= 2 { rounded.max(1) } else { rounded };
    count.min(n)
}

/// Stratified random split into `(train, validation)`.
///
/// Classes are visited in canonical order; within a class the validation
/// members are drawn without replacement from `rng`. Both outputs keep the
/// input order.
pub fn split_dataset<T: Labeled + Clone>(
    records: &[T],
    validation_fraction: f64,
    rng: &mut RandomStream,
) -> Result<(Vec<T>, Vec<T>)> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::Range(format!(
            "validation fraction {validation_fraction} must lie in (0, 1)"
        )));
    }
    let mut is_validation = vec![false; records.len()];
    for class in ClassLabel::ALL {
        let members: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label() == class)
            .map(|(i, _)| i)
            .collect();
        let k = validation_count(members.len(), validation_fraction);
        for pick in rng.sample_indices(members.len(), k) {
            is_validation[members[pick]] = true;
        }
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (record, &val) in records.iter().zip(&is_validation) {
        if val {
            validation.push(record.clone());
        } else {
            train.push(record.clone());
        }
    }
    Ok((train, validation))
}
