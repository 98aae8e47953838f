#![allow(dead_code)]

use irispad::pad2d::{extract_features, resolve_scales, train_ensemble, Ensemble, EnsembleRecipe, LabeledFeatures, PadScale, DEFAULT_ROI};
use irispad::pad3d::Decision;
use irispad::synthgen::{render_pair, Lens, SynthSpec};

/// Two small scales keep feature extraction cheap in tests.
pub const SMALL_SCALES: [&str; 2] = ["8x5", "8x9"];

pub fn small_scales() -> Vec<PadScale> {
    resolve_scales(&SMALL_SCALES).unwrap()
}

/// Ensemble trained on left images of `identities` captured bare, with a
/// textured lens and with an opaque lens.
pub fn train_small(identities: std::ops::Range<u64>, seed: u64) -> Ensemble {
    let scales = small_scales();
    let mut rows = Vec::new();
    for id in identities {
        for lens in [Lens::None, Lens::Textured, Lens::Opaque] {
            let pair = render_pair(&SynthSpec::capture(id, 0, lens)).unwrap();
            let features = extract_features(&pair.left, &scales, DEFAULT_ROI).unwrap();
            let label = if lens == Lens::None { Decision::Live } else { Decision::Attack };
            rows.push(LabeledFeatures { label, features });
        }
        // balance the classes with a second bare capture
        let pair = render_pair(&SynthSpec::capture(id, 1, Lens::None)).unwrap();
        rows.push(LabeledFeatures {
            label: Decision::Live,
            features: extract_features(&pair.left, &scales, DEFAULT_ROI).unwrap(),
        });
    }
    train_ensemble(&rows, &EnsembleRecipe::default(), seed).unwrap()
}
