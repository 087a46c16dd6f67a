mod common;

use common::{check_decision_case, random_votes};
use polypscope::classifier::{ClassifierHandle, PatchPrediction};
use polypscope::inference::{aggregate, classify_slide, predict_patches, DecisionThresholds};
use polypscope::tiler::PatchSpec;
use polypscope::{ClassLabel, ProbVector, RandomStream, RasterImage};

#[test]
fn randomized_invariance_and_monotonicity() {
    let root = RandomStream::new(77);
    for i in 0..300 {
        check_decision_case(&mut root.derive_index(i)).unwrap();
    }
}

#[test]
fn tallies_account_for_every_patch() {
    let root = RandomStream::new(3);
    for i in 0..100 {
        let votes = random_votes(&mut root.derive_index(i), 30);
        let d = aggregate(&votes, &DecisionThresholds::default());
        assert_eq!(d.tallies.values().iter().sum::<usize>(), votes.len());
        assert_eq!(d.total_patches, votes.len());
    }
}

#[test]
fn recorded_predictions_drive_a_slide() {
    let img = RasterImage::zeros(100, 100).unwrap();
    let spec = PatchSpec::new(60, 60, 1.0 / 3.0).unwrap();
    let tsa = ProbVector::new([0.05, 0.05, 0.8, 0.04, 0.03, 0.03]).unwrap();
    let rows: Vec<PatchPrediction> = ["0_0", "40_0", "0_40", "40_40"]
        .iter()
        .map(|id| PatchPrediction { patch_id: id.to_string(), probabilities: tsa })
        .collect();
    let handle = ClassifierHandle::recorded(rows).unwrap();
    let d = classify_slide(&img, &handle, &spec, &DecisionThresholds::default()).unwrap();
    // Four votes fall short of five.
    assert_eq!(d.tallies[ClassLabel::Tsa], 4);
    assert_eq!(d.predicted, ClassLabel::Normal);
    let relaxed = DecisionThresholds::new(4, 0.7).unwrap();
    assert_eq!(classify_slide(&img, &handle, &spec, &relaxed).unwrap().predicted, ClassLabel::Tsa);

    let scoped = predict_patches(&img, &handle, &spec, Some("s1")).unwrap();
    assert_eq!(scoped[0].patch_id, "s1/0_0");
}
