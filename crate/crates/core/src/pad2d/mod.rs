//! Texture-based PAD: multi-scale BSIF histograms classified by a small
//! majority-vote ensemble that stops as soon as the outcome is fixed.

mod classifier;
mod features;
mod train;

pub use classifier::{Classifier, DecisionTree, LinearSvm, Mlp, RandomForest, TreeNode};
pub use features::{
    default_scales, extract_features, format_feature_csv, parse_feature_csv, read_feature_csv, resolve_scale,
    resolve_scales, FeatureVector, LabeledFeatures, PadScale, DEFAULT_ROI,
};
pub use train::{train_ensemble, EnsembleRecipe, MemberSpec};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::imaging::IrisImage;
use crate::pad3d::{Decision, PadOutcome, PadSource};
use classifier::{read_classifier, ModelReader};

/// Threshold on the attack-vote fraction; consistent with the majority rule
/// for odd ensembles.
pub const VOTE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Classifier>,
}

impl Ensemble {
    pub fn new(members: Vec<Classifier>) -> Result<Self> {
        if members.is_empty() || members.len() % 2 == 0 {
            return Err(Error::InvalidEnsemble(format!("{} members, need an odd count", members.len())));
        }
        let dim = members[0].dim();
        for m in &members {
            m.validate()?;
            if m.dim() != dim {
                return Err(Error::InvalidEnsemble(format!("member dims {} and {}", dim, m.dim())));
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Classifier] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "ENSEMBLE 1 {}", self.members.len()).unwrap();
        for m in &self.members {
            m.write_text(&mut out);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = ModelReader::new(text);
        let (_, head) = reader.expect("ENSEMBLE")?;
        let count = match head.as_slice() {
            ["1", n] => n
                .parse::<usize>()
                .map_err(|_| Error::MalformedModelFile(format!("bad member count {n:?}")))?,
            _ => return Err(Error::MalformedModelFile("expected header \"ENSEMBLE 1 <count>\"".into())),
        };
        let members = (0..count)
            .map(|_| read_classifier(&mut reader))
            .collect::<Result<Vec<_>>>()?;
        if !reader.at_end() {
            return Err(Error::MalformedModelFile("trailing data after last member".into()));
        }
        Self::new(members)
    }

    /// Early-stopped majority vote on a feature vector.
    pub fn vote(&self, features: &FeatureVector) -> Result<VoteTally> {
        if features.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "features have {} values, ensemble expects {}",
                features.dim(),
                self.dim()
            )));
        }
        Ok(early_stop_vote(self.len(), |i| self.members[i].vote(&features.values)))
    }
}

pub fn save_ensemble(e: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, e.to_text()).map_err(|err| Error::io(path, err))
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<Ensemble> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|err| Error::io(path, err))?;
    Ensemble::parse(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoteTally {
    pub decision: Decision,
    pub attack: usize,
    pub live: usize,
}

impl VoteTally {
    pub fn evaluated(&self) -> usize {
        self.attack + self.live
    }

    /// Fraction of evaluated members voting attack.
    pub fn attack_fraction(&self) -> f64 {
        self.attack as f64 / self.evaluated() as f64
    }
}

/// Polls members in order and stops once either side holds more than half
/// of `count` votes. With an odd `count` this always happens.
pub fn early_stop_vote(count: usize, mut vote: impl FnMut(usize) -> Decision) -> VoteTally {
    let mut tally = VoteTally {
        decision: Decision::Live,
        attack: 0,
        live: 0,
    };
    for i in 0..count {
        match vote(i) {
            Decision::Attack => tally.attack += 1,
            Decision::Live => tally.live += 1,
        }
        if 2 * tally.attack > count {
            tally.decision = Decision::Attack;
            return tally;
        }
        if 2 * tally.live > count {
            return tally;
        }
    }
    tally.decision = if tally.attack > tally.live {
        Decision::Attack
    } else {
        Decision::Live
    };
    tally
}

/// Reference: every member votes.
pub fn exhaustive_vote(count: usize, mut vote: impl FnMut(usize) -> Decision) -> Decision {
    let attack = (0..count).filter(|&i| vote(i).is_attack()).count();
    if 2 * attack > count {
        Decision::Attack
    } else {
        Decision::Live
    }
}

/// Detailed texture PAD result.
#[derive(Debug, Clone, PartialEq)]
pub struct Pad2dReport {
    pub outcome: PadOutcome,
    pub tally: VoteTally,
}

pub fn ospad2d_report(img: &IrisImage, ensemble: &Ensemble, scales: &[PadScale], roi: usize) -> Result<Pad2dReport> {
    let never = AtomicBool::new(false);
    ospad2d_cancellable(img, ensemble, scales, roi, &never).map(|r| r.expect("not cancelled"))
}

pub fn ospad2d_decide(img: &IrisImage, ensemble: &Ensemble, scales: &[PadScale], roi: usize) -> Result<PadOutcome> {
    ospad2d_report(img, ensemble, scales, roi).map(|r| r.outcome)
}

/// Like [`ospad2d_report`] but returns `Ok(None)` if `cancel` is raised
/// before the vote completes.
pub fn ospad2d_cancellable(
    img: &IrisImage,
    ensemble: &Ensemble,
    scales: &[PadScale],
    roi: usize,
    cancel: &AtomicBool,
) -> Result<Option<Pad2dReport>> {
    let mut features = FeatureVector { values: Vec::new() };
    for scale in scales {
        if cancel.load(Ordering::Relaxed) {
            return Ok(None);
        }
        features
            .values
            .extend(extract_features(img, std::slice::from_ref(scale), roi)?.values);
    }
    if scales.is_empty() {
        extract_features(img, scales, roi)?;
    }
    if cancel.load(Ordering::Relaxed) {
        return Ok(None);
    }
    let tally = ensemble.vote(&features)?;
    let outcome = PadOutcome {
        score: tally.attack_fraction(),
        threshold: VOTE_THRESHOLD,
        decision: tally.decision,
        source: PadSource::Pad2d,
    };
    Ok(Some(Pad2dReport { outcome, tally }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pattern(bits: u32, n: usize) -> impl Fn(usize) -> Decision {
        move |i| {
            if i < n && bits >> i & 1 == 1 {
                Decision::Attack
            } else {
                Decision::Live
            }
        }
    }

    #[test]
    fn stops_once_majority_is_fixed() {
        let t = early_stop_vote(3, pattern(0b011, 3));
        assert_eq!((t.decision, t.evaluated()), (Decision::Attack, 2));
        let t = early_stop_vote(3, pattern(0, 3));
        assert_eq!((t.decision, t.evaluated()), (Decision::Live, 2));
        let t = early_stop_vote(5, pattern(0b10101, 5));
        assert_eq!((t.decision, t.evaluated()), (Decision::Attack, 5));
    }

    #[test]
    fn early_stop_matches_exhaustive_on_all_patterns() {
        for n in [1usize, 3, 5, 7] {
            for bits in 0..1u32 << n {
                let mut calls = 0;
                let early = early_stop_vote(n, |i| {
                    calls += 1;
                    pattern(bits, n)(i)
                });
                assert_eq!(early.decision, exhaustive_vote(n, pattern(bits, n)));
                assert!(calls <= n);
                let score_says_attack = early.attack_fraction() >= VOTE_THRESHOLD;
                assert_eq!(score_says_attack, early.decision.is_attack());
            }
        }
    }

    #[test]
    fn random_five_member_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let bits: u32 = rng.random_range(0..32);
            assert_eq!(early_stop_vote(5, pattern(bits, 5)).decision, exhaustive_vote(5, pattern(bits, 5)));
        }
    }

    fn toy_ensemble() -> Ensemble {
        let svm = Classifier::LinearSvm(LinearSvm {
            weights: vec![1.0, -0.5, 0.25],
            bias: 0.1,
        });
        let mlp = Classifier::Mlp(Mlp {
            dim: 3,
            hidden: 2,
            w1: vec![0.5, 1.0 / 3.0, -1.0, 2.0, 0.0, 1e-7],
            b1: vec![0.0, -0.3],
            w2: vec![1.5, -2.0],
            b2: 0.2,
        });
        let forest = Classifier::RandomForest(RandomForest {
            dim: 3,
            trees: vec![DecisionTree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 2,
                        threshold: 0.125,
                        left: 1,
                        right: 2,
                    },
                    TreeNode::Leaf(Decision::Live),
                    TreeNode::Leaf(Decision::Attack),
                ],
            }],
        });
        Ensemble::new(vec![svm, mlp, forest]).unwrap()
    }

    #[test]
    fn model_text_roundtrip_preserves_predictions() {
        let e = toy_ensemble();
        let back = Ensemble::parse(&e.to_text()).unwrap();
        assert_eq!(back, e);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            for (a, b) in e.members().iter().zip(back.members()) {
                assert_eq!(a.vote(&x), b.vote(&x));
            }
        }
    }

    #[test]
    fn malformed_models_rejected() {
        let text = toy_ensemble().to_text();
        assert_eq!(Ensemble::parse("").unwrap_err().name(), "MalformedModelFile");
        assert_eq!(
            Ensemble::parse(&text.replace("ENSEMBLE 1", "ENSEMBLE 2")).unwrap_err().name(),
            "MalformedModelFile"
        );
        assert_eq!(
            Ensemble::parse(&format!("{text}KIND junk\n")).unwrap_err().name(),
            "MalformedModelFile"
        );
        let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(Ensemble::parse(&truncated).is_err());
        let even = text.replacen("ENSEMBLE 1 3", "ENSEMBLE 1 2", 1);
        let even: String = even.lines().take_while(|l| !l.starts_with("KIND random")).map(|l| format!("{l}\n")).collect();
        assert_eq!(Ensemble::parse(&even).unwrap_err().name(), "InvalidEnsemble");
    }

    #[test]
    fn dimension_checked_at_vote() {
        let e = toy_ensemble();
        let err = e.vote(&FeatureVector { values: vec![0.0; 4] }).unwrap_err();
        assert_eq!(err.name(), "DimensionMismatch");
    }
}
