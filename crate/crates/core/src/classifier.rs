//! Patch classifiers: anything that turns a patch into a [`ProbVector`].

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::{ProbVector, NUM_CLASSES};
use crate::nnet::{predict, TinyResNet};
use crate::preprocess::{prepare, ConformTarget, NormalizationStats};
use crate::raster::RasterImage;

/// Sum tolerance above which a recorded row is rejected outright.
pub const RECORDED_REJECT_TOLERANCE: f64 = 1e-2;

pub const PREDICTIONS_HEADER: [&str; 7] =
    ["patch_id", "p_hp", "p_ssp", "p_tsa", "p_ta", "p_tvv", "p_normal"];

#[derive(Debug, Clone, PartialEq)]
pub struct PatchPrediction {
    pub patch_id: String,
    pub probabilities: ProbVector,
}

/// Network-backed classifier: conform, normalize, run the network, softmax.
#[derive(Debug, Clone)]
pub struct NetworkClassifier {
    pub model: TinyResNet,
    pub stats: NormalizationStats,
    pub target: ConformTarget,
}

#[derive(Debug, Clone)]
pub enum ClassifierHandle {
    /// Same vector for every patch.
    Constant(ProbVector),
    /// Replays a table of externally produced predictions.
    Recorded(HashMap<String, ProbVector>),
    Network(Box<NetworkClassifier>),
}

impl ClassifierHandle {
    pub fn recorded(rows: Vec<PatchPrediction>) -> Result<Self> {
        let mut table = HashMap::with_capacity(rows.len());
        for row in rows {
            if table.contains_key(&row.patch_id) {
                return Err(Error::DuplicateId(row.patch_id));
            }
            table.insert(row.patch_id, row.probabilities);
        }
        Ok(ClassifierHandle::Recorded(table))
    }

    pub fn network(model: TinyResNet, stats: NormalizationStats, target: ConformTarget) -> Self {
        ClassifierHandle::Network(Box::new(NetworkClassifier {
            model,
            stats,
            target,
        }))
    }

    /// Classifies one patch. Recorded handles look up `patch_id`; an id of
    /// the form `scope/local` falls back to `local` when the scoped id is
    /// absent.
    pub fn classify(&self, patch: &RasterImage, patch_id: &str) -> Result<PatchPrediction> {
        let probabilities = match self {
            ClassifierHandle::Constant(p) => *p,
            ClassifierHandle::Recorded(table) => {
                let local = patch_id.rsplit_once('/').map(|(_, l)| l);
                table
                    .get(patch_id)
                    .or_else(|| local.and_then(|l| table.get(l)))
                    .copied()
                    .ok_or_else(|| Error::MissingPrediction(patch_id.to_string()))?
            }
            ClassifierHandle::Network(net) => {
                let input = prepare(patch, net.target, &net.stats)?;
                predict(&net.model, &input)?
            }
        };
        Ok(PatchPrediction {
            patch_id: patch_id.to_string(),
            probabilities,
        })
    }

    /// Classifies patches in parallel. Output order matches input order;
    /// on failure the error of the earliest failing patch is returned.
    pub fn classify_batch(&self, patches: &[(String, RasterImage)]) -> Result<Vec<PatchPrediction>> {
        let results: Vec<Result<PatchPrediction>> = patches
            .par_iter()
            .map(|(id, patch)| self.classify(patch, id))
            .collect();
        results
            .into_iter()
            .zip(patches)
            .map(|(r, (id, _))| {
                r.map_err(|e| match e {
                    Error::MissingPrediction(_) => e,
                    other => Error::Patch {
                        patch_id: id.clone(),
                        source: Box::new(other),
                    },
                })
            })
            .collect()
    }
}

/// Parses the recorded-predictions TSV. Rows are renormalized when their
/// sum is within [`RECORDED_REJECT_TOLERANCE`] of one and rejected beyond.
pub fn parse_predictions(text: &str) -> Result<Vec<PatchPrediction>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if !header_seen {
            let lower: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
            if lower != PREDICTIONS_HEADER {
                return Err(Error::Parse {
                    line,
                    message: format!("expected header `{}`", PREDICTIONS_HEADER.join("\\t")),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 1 + NUM_CLASSES {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", 1 + NUM_CLASSES, fields.len()),
            });
        }
        let mut values = [0.0; NUM_CLASSES];
        for (v, f) in values.iter_mut().zip(&fields[1..]) {
            *v = f.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid probability {f:?}"),
            })?;
        }
        let probabilities = ProbVector::renormalized(values, RECORDED_REJECT_TOLERANCE)
            .map_err(|e| Error::at_line(line, e))?;
        rows.push(PatchPrediction {
            patch_id: fields[0].to_string(),
            probabilities,
        });
    }
    if !header_seen {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PatchPrediction>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_predictions(&text)
}

pub fn format_predictions(rows: &[PatchPrediction]) -> String {
    let mut out = PREDICTIONS_HEADER.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.patch_id);
        for v in row.probabilities.values() {
            out.push('\t');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ClassLabel;
    use crate::nnet::ArchConfig;
    use crate::random::RandomStream;

    fn patch(seed: u64) -> RasterImage {
        let mut rng = RandomStream::new(seed);
        RasterImage::from_fn(8, 8, |_, _| [0; 3].map(|_| rng.below(256) as u8)).unwrap()
    }

    #[test]
    fn constant_handle() {
        let h = ClassifierHandle::Constant(ProbVector::one_hot(ClassLabel::Ta));
        let p = h.classify(&patch(0), "a").unwrap();
        assert_eq!(p.probabilities.values(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn recorded_lookup() {
        let v = ProbVector::new([0.2, 0.2, 0.2, 0.2, 0.1, 0.1]).unwrap();
        let h = ClassifierHandle::recorded(vec![PatchPrediction {
            patch_id: "p1".into(),
            probabilities: v,
        }])
        .unwrap();
        assert_eq!(h.classify(&patch(0), "p1").unwrap().probabilities, v);
        assert_eq!(h.classify(&patch(0), "slide9/p1").unwrap().probabilities, v);
        match h.classify(&patch(0), "p2") {
            Err(Error::MissingPrediction(id)) => assert_eq!(id, "p2"),
            other => panic!("unexpected {other:?}"),
        }
        let dup = vec![
            PatchPrediction { patch_id: "p".into(), probabilities: v },
            PatchPrediction { patch_id: "p".into(), probabilities: v },
        ];
        assert!(matches!(ClassifierHandle::recorded(dup), Err(Error::DuplicateId(_))));
    }

    fn network_handle() -> ClassifierHandle {
        let model = TinyResNet::new(&ArchConfig::default(), &mut RandomStream::new(1)).unwrap();
        let stats = NormalizationStats { mean: [128.0; 3], std: [64.0; 3] };
        ClassifierHandle::network(model, stats, ConformTarget::new(8, 8).unwrap())
    }

    #[test]
    fn network_is_deterministic() {
        let h = network_handle();
        let img = patch(4);
        let a = h.classify(&img, "x").unwrap();
        let b = h.classify(&img, "x").unwrap();
        assert_eq!(
            a.probabilities.values().map(f64::to_bits),
            b.probabilities.values().map(f64::to_bits)
        );
        // A larger patch is conformed internally.
        let big = RasterImage::from_fn(20, 13, |x, y| [x as u8, y as u8, 9]).unwrap();
        assert!(h.classify(&big, "y").is_ok());
    }

    #[test]
    fn batch_matches_sequential() {
        let h = network_handle();
        assert!(h.classify_batch(&[]).unwrap().is_empty());
        let patches: Vec<(String, RasterImage)> = (0..12).map(|i| (format!("p{i}"), patch(i))).collect();
        let batch = h.classify_batch(&patches).unwrap();
        for ((id, img), got) in patches.iter().zip(&batch) {
            let one = h.classify(img, id).unwrap();
            assert_eq!(&one, got);
        }
        let c = ClassifierHandle::Constant(ProbVector::uniform());
        let out = c.classify_batch(&patches[..3]).unwrap();
        let ids: Vec<_> = out.iter().map(|p| p.patch_id.as_str()).collect();
        assert_eq!(ids, ["p0", "p1", "p2"]);
    }

    #[test]
    fn batch_reports_first_missing() {
        let v = ProbVector::uniform();
        let h = ClassifierHandle::recorded(vec![PatchPrediction { patch_id: "a".into(), probabilities: v }]).unwrap();
        let patches: Vec<_> = ["a", "b", "c"].iter().map(|id| (id.to_string(), patch(0))).collect();
        match h.classify_batch(&patches) {
            Err(Error::MissingPrediction(id)) => assert_eq!(id, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn predictions_file() {
        let text = "patch_id\tp_hp\tp_ssp\tp_tsa\tp_ta\tp_tvv\tp_normal\np1\t0.2\t0.2\t0.2\t0.2\t0.1\t0.1\np2\t0.2\t0.2\t0.2\t0.2\t0.1\t0.105\n";
        let rows = parse_predictions(text).unwrap();
        assert_eq!(rows.len(), 2);
        let sum: f64 = rows[1].probabilities.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let bad = "patch_id\tp_hp\tp_ssp\tp_tsa\tp_ta\tp_tvv\tp_normal\np1\t0.3\t0.2\t0.2\t0.2\t0.1\t0.1\n";
        assert!(matches!(parse_predictions(bad), Err(Error::AtLine { line: 2, .. })));
        let again = parse_predictions(&format_predictions(&rows)).unwrap();
        assert_eq!(again, rows);
    }
}
