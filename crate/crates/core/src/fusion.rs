//! Cascaded 3D + 2D PAD.
//!
//! The photometric detector runs first. An attack verdict is final and the
//! texture ensemble is never consulted; otherwise the ensemble decides.
//! The fused decision is therefore `attack3d OR attack2d`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;

use crate::error::Result;
use crate::imaging::{BinaryMask, IrisImage};
use crate::pad2d::{ospad2d_cancellable, ospad2d_report, Ensemble, PadScale, VOTE_THRESHOLD};
use crate::pad3d::{ospad3d_decide, Decision, IlluminationGeometry, PadOutcome, PadSource};

/// What the 3D stage produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage3d {
    Decided(PadOutcome),
    /// The stage failed (error name and message); 2D decided alone.
    Failed { name: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionReport {
    pub stage3d: Stage3d,
    /// `None` when the 3D stage already called attack.
    pub stage2d: Option<PadOutcome>,
    /// Score is 1.0 on a 3D attack, otherwise the 2D attack-vote fraction;
    /// threshold 0.5.
    pub fused: PadOutcome,
}

impl FusionReport {
    pub fn degraded(&self) -> bool {
        matches!(self.stage3d, Stage3d::Failed { .. })
    }

    /// `score3d decision3d decision2d|skipped fused_decision`
    pub fn line(&self) -> String {
        let (score, d3) = match &self.stage3d {
            Stage3d::Decided(o) => (o.score.to_string(), o.decision.as_str().to_string()),
            Stage3d::Failed { name, .. } => ("nan".to_string(), format!("error:{name}")),
        };
        let d2 = self.stage2d.map_or("skipped", |o| o.decision.as_str());
        format!("{score} {d3} {d2} {}", self.fused.decision)
    }
}

fn fused(decision: Decision, score: f64) -> PadOutcome {
    PadOutcome {
        score,
        threshold: VOTE_THRESHOLD,
        decision,
        source: PadSource::Fusion,
    }
}

/// The cascade over arbitrary stage implementations. `stage2d` is called
/// at most once and not at all after a 3D attack.
pub fn cascade(
    stage3d: impl FnOnce() -> Result<PadOutcome>,
    stage2d: impl FnOnce() -> Result<PadOutcome>,
) -> Result<FusionReport> {
    let first = match stage3d() {
        Ok(o) if o.decision.is_attack() => {
            return Ok(FusionReport {
                stage3d: Stage3d::Decided(o),
                stage2d: None,
                fused: fused(Decision::Attack, 1.0),
            })
        }
        Ok(o) => Stage3d::Decided(o),
        Err(e) => Stage3d::Failed {
            name: e.name(),
            message: e.to_string(),
        },
    };
    let second = stage2d()?;
    Ok(FusionReport {
        stage3d: first,
        stage2d: Some(second),
        fused: fused(second.decision, second.score),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn ospad_fusion_decide(
    left: &IrisImage,
    right: &IrisImage,
    mask: &BinaryMask,
    geom: &IlluminationGeometry,
    tau3: f64,
    ensemble: &Ensemble,
    scales: &[PadScale],
    roi: usize,
) -> Result<FusionReport> {
    cascade(
        || ospad3d_decide(left, right, mask, geom, tau3),
        || ospad2d_report(left, ensemble, scales, roi).map(|r| r.outcome),
    )
}

/// Starts the texture stage alongside the photometric one and cancels it on
/// a 3D attack. Decisions are identical to [`ospad_fusion_decide`].
#[allow(clippy::too_many_arguments)]
pub fn ospad_fusion_decide_eager(
    left: &IrisImage,
    right: &IrisImage,
    mask: &BinaryMask,
    geom: &IlluminationGeometry,
    tau3: f64,
    ensemble: &Ensemble,
    scales: &[PadScale],
    roi: usize,
) -> Result<FusionReport> {
    let cancel = AtomicBool::new(false);
    thread::scope(|s| {
        let texture = s.spawn(|| ospad2d_cancellable(left, ensemble, scales, roi, &cancel));
        let photometric = ospad3d_decide(left, right, mask, geom, tau3);
        if matches!(&photometric, Ok(o) if o.decision.is_attack()) {
            cancel.store(true, Ordering::Relaxed);
        }
        let texture = texture.join().expect("texture stage panicked");
        cascade(
            || photometric,
            || texture.map(|r| r.expect("only cancelled after a 3D attack").outcome),
        )
    })
}
