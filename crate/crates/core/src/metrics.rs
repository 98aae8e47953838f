//! Score-distribution and PAD error-rate metrics.
//!
//! Recognition scores are distances (lower = same eye). PAD scores are
//! attack likelihoods (higher = attack); a bona fide/attack score set maps
//! onto [`ScoreSet`] with bona fide as `genuine` and attacks as `imposter`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pad3d::Decision;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, imposter: Vec<f64>) -> Self {
        Self { genuine, imposter }
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.genuine.is_empty() {
            return Err(Error::EmptyClass("genuine".into()));
        }
        if self.imposter.is_empty() {
            return Err(Error::EmptyClass("imposter".into()));
        }
        Ok(())
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    (mu, var)
}

/// Decidability `|mu1 - mu2| / sqrt((var1 + var2) / 2)` with population
/// variances. Two point masses at different locations give infinity.
pub fn dprime(s: &ScoreSet) -> Result<f64> {
    if s.genuine.len() < 2 || s.imposter.len() < 2 {
        return Err(Error::DegenerateDistributions(format!(
            "need two scores per class, have {} and {}",
            s.genuine.len(),
            s.imposter.len()
        )));
    }
    let (m1, v1) = mean_var(&s.genuine);
    let (m2, v2) = mean_var(&s.imposter);
    let pooled = ((v1 + v2) / 2.0).sqrt();
    if pooled == 0.0 {
        return if m1 == m2 {
            Err(Error::DegenerateDistributions("both classes constant and equal".into()))
        } else {
            Ok(f64::INFINITY)
        };
    }
    Ok((m1 - m2).abs() / pooled)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of imposter scores `<= threshold`.
    pub fmr: f64,
    /// Fraction of genuine scores `> threshold`.
    pub fnmr: f64,
}

fn sentinel_gap(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

/// Thresholds in ascending order: just below the smallest score, every
/// distinct score, just above the largest.
pub fn roc(s: &ScoreSet) -> Result<Vec<RocPoint>> {
    s.check_nonempty()?;
    let mut g = s.genuine.clone();
    let mut i = s.imposter.clone();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    let mut ts: Vec<f64> = g.iter().chain(&i).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let lo = ts[0] - sentinel_gap(ts[0]);
    let hi = ts[ts.len() - 1] + sentinel_gap(ts[ts.len() - 1]);
    let mut thresholds = Vec::with_capacity(ts.len() + 2);
    thresholds.push(lo);
    thresholds.extend(ts);
    thresholds.push(hi);

    let (ng, ni) = (g.len() as f64, i.len() as f64);
    Ok(thresholds
        .into_iter()
        .map(|t| {
            let imp_le = i.partition_point(|&x| x <= t);
            let gen_le = g.partition_point(|&x| x <= t);
            RocPoint {
                threshold: t,
                fmr: imp_le as f64 / ni,
                fnmr: (g.len() - gen_le) as f64 / ng,
            }
        })
        .collect())
}

/// Equal error rate. Scanning thresholds upward, FMR - FNMR goes from -1 to
/// +1; at the first point where it is >= 0 either the rates are equal (that
/// value is returned) or the crossing lies between this point and the
/// previous one, and the result is (FMR + FNMR) / 2 of the linear
/// interpolation at the bracket midpoint.
pub fn eer(s: &ScoreSet) -> Result<f64> {
    let curve = roc(s)?;
    eer_from_roc(&curve)
}

pub fn eer_from_roc(curve: &[RocPoint]) -> Result<f64> {
    let k = curve
        .iter()
        .position(|p| p.fmr - p.fnmr >= 0.0)
        .ok_or_else(|| Error::DegenerateDistributions("ROC never crosses".into()))?;
    let p = curve[k];
    if p.fmr == p.fnmr || k == 0 {
        return Ok(0.5 * (p.fmr + p.fnmr));
    }
    let q = curve[k - 1];
    let mid_fmr = (q.fmr + p.fmr) / 2.0;
    let mid_fnmr = (q.fnmr + p.fnmr) / 2.0;
    Ok((mid_fmr + mid_fnmr) / 2.0)
}

/// Smallest FNMR over thresholds whose FMR is at most `target_fmr`.
pub fn fnmr_at_fmr(s: &ScoreSet, target_fmr: f64) -> Result<f64> {
    roc(s)?
        .iter()
        .filter(|p| p.fmr <= target_fmr)
        .map(|p| p.fnmr)
        .min_by(f64::total_cmp)
        .ok_or(Error::UnreachableOperatingPoint(target_fmr))
}

/// Per-class PAD decisions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PadLabels {
    /// Decisions made on bona fide presentations.
    pub bona_fide: Vec<Decision>,
    /// Decisions made on attack presentations.
    pub attack: Vec<Decision>,
}

impl PadLabels {
    pub fn push(&mut self, truth: Decision, decided: Decision) {
        match truth {
            Decision::Live => self.bona_fide.push(decided),
            Decision::Attack => self.attack.push(decided),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadRates {
    pub accuracy: f64,
    /// Attacks called live / attacks.
    pub apcer: f64,
    /// Bona fide called attack / bona fide.
    pub bpcer: f64,
    pub attacks: usize,
    pub bona_fide: usize,
}

pub fn pad_rates(p: &PadLabels) -> Result<PadRates> {
    if p.attack.is_empty() {
        return Err(Error::EmptyClass("attack".into()));
    }
    if p.bona_fide.is_empty() {
        return Err(Error::EmptyClass("bona fide".into()));
    }
    let missed = p.attack.iter().filter(|d| !d.is_attack()).count();
    let false_alarms = p.bona_fide.iter().filter(|d| d.is_attack()).count();
    let (na, nb) = (p.attack.len(), p.bona_fide.len());
    Ok(PadRates {
        accuracy: (na + nb - missed - false_alarms) as f64 / (na + nb) as f64,
        apcer: missed as f64 / na as f64,
        bpcer: false_alarms as f64 / nb as f64,
        attacks: na,
        bona_fide: nb,
    })
}

/// Contents of a labeled CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum LabeledCsv {
    /// `genuine`/`imposter` distances.
    Recognition(ScoreSet),
    /// `bonafide`/`attack` attack-likelihood scores (bona fide as genuine).
    PadScores(ScoreSet),
    /// `bonafide`/`attack` with `live`/`attack` decisions.
    PadDecisions(PadLabels),
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::MalformedScoreFile(format!("line {}: {msg}", line + 1))
}

/// Parses `label,score` or `label,decision` rows. An optional header
/// starting with `label` is skipped. Mixing label vocabularies is an error.
pub fn parse_labeled_csv(text: &str) -> Result<LabeledCsv> {
    #[derive(PartialEq, Clone, Copy)]
    enum Kind {
        Rec,
        PadScore,
        PadDecision,
    }
    let mut kind = None;
    let mut set = ScoreSet::default();
    let mut labels = PadLabels::default();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (no == 0 && line.starts_with("label")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [label, value] = fields.as_slice() else {
            return Err(bad(no, "expected two fields"));
        };
        let (row_kind, positive) = match *label {
            "genuine" => (Kind::Rec, true),
            "imposter" | "impostor" => (Kind::Rec, false),
            "bonafide" | "bona-fide" | "live" => (Kind::PadScore, true),
            "attack" => (Kind::PadScore, false),
            other => return Err(bad(no, format!("unknown label {other:?}"))),
        };
        let row_kind = match (row_kind, Decision::parse(value)) {
            (Kind::PadScore, Some(_)) => Kind::PadDecision,
            (k, _) => k,
        };
        if *kind.get_or_insert(row_kind) != row_kind {
            return Err(bad(no, "mixed label or value kinds"));
        }
        match row_kind {
            Kind::PadDecision => {
                let truth = if positive { Decision::Live } else { Decision::Attack };
                labels.push(truth, Decision::parse(value).expect("checked above"));
            }
            _ => {
                let v: f64 = value.parse().map_err(|_| bad(no, format!("{value:?} is not a score")))?;
                if !v.is_finite() {
                    return Err(bad(no, "non-finite score"));
                }
                if positive {
                    set.genuine.push(v)
                } else {
                    set.imposter.push(v)
                }
            }
        }
    }
    match kind {
        None => Err(Error::MalformedScoreFile("no rows".into())),
        Some(Kind::Rec) => Ok(LabeledCsv::Recognition(set)),
        Some(Kind::PadScore) => Ok(LabeledCsv::PadScores(set)),
        Some(Kind::PadDecision) => Ok(LabeledCsv::PadDecisions(labels)),
    }
}

pub fn read_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledCsv> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_csv(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecognitionSummary {
    pub dprime: f64,
    pub eer: f64,
    pub fnmr_at_1: f64,
    pub fnmr_at_01: f64,
}

pub fn summarize(s: &ScoreSet) -> Result<RecognitionSummary> {
    Ok(RecognitionSummary {
        dprime: dprime(s)?,
        eer: eer(s)?,
        fnmr_at_1: fnmr_at_fmr(s, 0.01)?,
        fnmr_at_01: fnmr_at_fmr(s, 0.001)?,
    })
}

/// Aligned table: d', EER and FNMR at FMR 1% and 0.1%, rates in percent.
pub fn format_recognition_table(rows: &[(String, RecognitionSummary)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Comparison".len());
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>17}  {:>19}",
        "Comparison", "d'", "EER(%)", "FNMR(%)@FMR=1%", "FNMR(%)@FMR=0.1%"
    )
    .unwrap();
    for (name, s) in rows {
        writeln!(
            out,
            "{:<width$}  {:>7.3}  {:>7.2}  {:>17.2}  {:>19.2}",
            name,
            s.dprime,
            100.0 * s.eer,
            100.0 * s.fnmr_at_1,
            100.0 * s.fnmr_at_01
        )
        .unwrap();
    }
    out
}

/// Aligned table: accuracy, APCER, BPCER in percent.
pub fn format_pad_table(rows: &[(String, PadRates)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Method".len());
    let mut out = String::new();
    writeln!(out, "{:<width$}  {:>11}  {:>8}  {:>8}", "Method", "Accuracy(%)", "APCER(%)", "BPCER(%)").unwrap();
    for (name, r) in rows {
        writeln!(
            out,
            "{:<width$}  {:>11.2}  {:>8.2}  {:>8.2}",
            name,
            100.0 * r.accuracy,
            100.0 * r.apcer,
            100.0 * r.bpcer
        )
        .unwrap();
    }
    out
}

pub fn format_roc_csv(curve: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fmr,fnmr\n");
    for p in curve {
        writeln!(out, "{},{},{}", p.threshold, p.fmr, p.fnmr).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Rates at `t` by direct counting.
    fn rates_at(s: &ScoreSet, t: f64) -> (f64, f64) {
        let fmr = s.imposter.iter().filter(|&&x| x <= t).count() as f64 / s.imposter.len() as f64;
        let fnmr = s.genuine.iter().filter(|&&x| x > t).count() as f64 / s.genuine.len() as f64;
        (fmr, fnmr)
    }

    /// Every threshold that can change a rate: each score, plus one point
    /// below everything and one above.
    fn oracle_thresholds(s: &ScoreSet) -> Vec<f64> {
        let all: Vec<f64> = s.genuine.iter().chain(&s.imposter).copied().collect();
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut ts = vec![lo - 1.0, hi + 1.0];
        ts.extend(all);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    fn oracle_eer(s: &ScoreSet) -> f64 {
        let pts: Vec<(f64, f64)> = oracle_thresholds(s).into_iter().map(|t| rates_at(s, t)).collect();
        for k in 0..pts.len() {
            let (fmr, fnmr) = pts[k];
            if fmr >= fnmr {
                if fmr == fnmr {
                    return fmr;
                }
                let (a, b) = pts[k - 1];
                let mid_fmr = (a + fmr) / 2.0;
                let mid_fnmr = (b + fnmr) / 2.0;
                return (mid_fmr + mid_fnmr) / 2.0;
            }
        }
        unreachable!()
    }

    fn oracle_fnmr_at(s: &ScoreSet, target: f64) -> f64 {
        oracle_thresholds(s)
            .into_iter()
            .map(|t| rates_at(s, t))
            .filter(|(fmr, _)| *fmr <= target)
            .map(|(_, fnmr)| fnmr)
            .fold(f64::INFINITY, f64::min)
    }

    fn oracle_dprime(s: &ScoreSet) -> f64 {
        let stats = |v: &[f64]| {
            let mut sum = 0.0;
            for x in v {
                sum += x;
            }
            let m = sum / v.len() as f64;
            let mut ss = 0.0;
            for x in v {
                ss += (x - m).powi(2);
            }
            (m, ss / v.len() as f64)
        };
        let (a, va) = stats(&s.genuine);
        let (b, vb) = stats(&s.imposter);
        (a - b).abs() / ((va + vb) / 2.0).sqrt()
    }

    fn random_set(rng: &mut ChaCha8Rng) -> ScoreSet {
        let ng = rng.random_range(2..=25);
        let ni = rng.random_range(2..=25);
        // coarse grid so ties occur
        let g = (0..ng).map(|_| rng.random_range(0..20) as f64 / 40.0).collect();
        let i = (0..ni).map(|_| rng.random_range(8..30) as f64 / 40.0).collect();
        ScoreSet::new(g, i)
    }

    #[test]
    fn dprime_examples() {
        let s = ScoreSet::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]);
        assert_eq!(dprime(&s).unwrap(), 0.0);
        let s = ScoreSet::new(vec![-1.0, 1.0], vec![0.0, 2.0]);
        assert_eq!(dprime(&s).unwrap(), 1.0);
        let s = ScoreSet::new(vec![0.2, 0.2], vec![0.4, 0.4]);
        assert_eq!(dprime(&s).unwrap(), f64::INFINITY);
        let s = ScoreSet::new(vec![0.2, 0.2], vec![0.2, 0.2]);
        assert_eq!(dprime(&s).unwrap_err().name(), "DegenerateDistributions");
    }

    #[test]
    fn dprime_sampling_matches_closed_form() {
        // one draw of 10^4 per class has sd ~0.046 around the closed form,
        // so average 16 seeded draws
        let g = Normal::new(0.2, 0.05).unwrap();
        let i = Normal::new(0.47, 0.02).unwrap();
        let closed = 0.27 / ((0.05f64.powi(2) + 0.02f64.powi(2)) / 2.0).sqrt();
        let mean = (0..16u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = ScoreSet::new(
                    (0..10_000).map(|_| g.sample(&mut rng)).collect(),
                    (0..10_000).map(|_| i.sample(&mut rng)).collect(),
                );
                dprime(&s).unwrap()
            })
            .sum::<f64>()
            / 16.0;
        assert!((mean - closed).abs() < 0.05, "{mean} vs {closed}");
    }

    #[test]
    fn separated_and_identical_sets() {
        let sep = ScoreSet::new(vec![0.1, 0.2, 0.25], vec![0.4, 0.5]);
        assert!(roc(&sep).unwrap().iter().any(|p| p.fmr == 0.0 && p.fnmr == 0.0));
        assert_eq!(eer(&sep).unwrap(), 0.0);
        assert_eq!(fnmr_at_fmr(&sep, 0.01).unwrap(), 0.0);

        let same = ScoreSet::new(vec![0.1, 0.3, 0.3, 0.7], vec![0.1, 0.3, 0.3, 0.7]);
        for p in roc(&same).unwrap() {
            assert_eq!(p.fmr, 1.0 - p.fnmr);
        }
        assert_eq!(eer(&same).unwrap(), 0.5);

        let flat = ScoreSet::new(vec![0.4; 5], vec![0.4; 5]);
        assert_eq!(fnmr_at_fmr(&flat, 0.01).unwrap(), 1.0);
    }

    #[test]
    fn six_point_roc_matches_oracle() {
        let s = ScoreSet::new(vec![0.1, 0.3, 0.35], vec![0.3, 0.4, 0.6]);
        let curve = roc(&s).unwrap();
        let ts = oracle_thresholds(&s);
        assert_eq!(curve.len(), ts.len());
        for (p, t) in curve.iter().zip(&ts) {
            assert_eq!((p.fmr, p.fnmr), rates_at(&s, *t));
        }
    }

    #[test]
    fn handcrafted_ten_score_eer() {
        let s = ScoreSet::new(vec![0.1, 0.2, 0.3, 0.45, 0.5], vec![0.35, 0.4, 0.55, 0.6, 0.7]);
        // t=0.4: FMR 0.4, FNMR 0.4 -> crossing exactly
        assert_eq!(eer(&s).unwrap(), 0.4);
        assert_eq!(eer(&s).unwrap(), oracle_eer(&s));
        let s = ScoreSet::new(vec![0.1, 0.2, 0.3, 0.4, 0.5], vec![0.35, 0.45, 0.55, 0.6, 0.7]);
        assert_eq!(eer(&s).unwrap(), oracle_eer(&s));
    }

    #[test]
    fn randomized_sets_match_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let s = random_set(&mut rng);
            assert_eq!(eer(&s).unwrap(), oracle_eer(&s));
            for target in [0.01, 0.1, 0.25, 0.5] {
                assert_eq!(fnmr_at_fmr(&s, target).unwrap(), oracle_fnmr_at(&s, target));
            }
            let d = dprime(&s).unwrap();
            assert!((d - oracle_dprime(&s)).abs() <= 1e-12 * d.max(1.0));
        }
    }

    #[test]
    fn pad_rate_examples() {
        let mut p = PadLabels::default();
        p.bona_fide = vec![Decision::Live; 4];
        p.attack = vec![Decision::Attack; 4];
        let r = pad_rates(&p).unwrap();
        assert_eq!((r.accuracy, r.apcer, r.bpcer), (1.0, 0.0, 0.0));
        p.attack = vec![Decision::Live; 4];
        let r = pad_rates(&p).unwrap();
        assert_eq!((r.accuracy, r.apcer, r.bpcer), (0.5, 1.0, 0.0));
        p.bona_fide.clear();
        assert_eq!(pad_rates(&p).unwrap_err().name(), "EmptyClass");
    }

    #[test]
    fn fusion_table_row_from_counts() {
        let mut p = PadLabels::default();
        for k in 0..535 {
            p.push(Decision::Attack, if k < 34 { Decision::Live } else { Decision::Attack });
        }
        for k in 0..534 {
            p.push(Decision::Live, if k < 22 { Decision::Attack } else { Decision::Live });
        }
        let r = pad_rates(&p).unwrap();
        let table = format_pad_table(&[("OSPAD-fusion".into(), r)]);
        assert!(table.lines().nth(1).unwrap().ends_with("94.76      6.36      4.12"), "{table}");
    }

    #[test]
    fn csv_kinds() {
        match parse_labeled_csv("label,score\ngenuine,0.1\nimposter,0.5\n").unwrap() {
            LabeledCsv::Recognition(s) => assert_eq!(s, ScoreSet::new(vec![0.1], vec![0.5])),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_labeled_csv("bonafide,0.1\nattack,0.9\n").unwrap(), LabeledCsv::PadScores(_)));
        match parse_labeled_csv("bonafide,live\nattack,live\nattack,attack\n").unwrap() {
            LabeledCsv::PadDecisions(p) => {
                assert_eq!(p.bona_fide, vec![Decision::Live]);
                assert_eq!(p.attack, vec![Decision::Live, Decision::Attack]);
            }
            other => panic!("{other:?}"),
        }
        for bad in ["genuine,0.1\nattack,0.2\n", "genuine,x\n", "who,1\n", "", "genuine,1,2\n"] {
            assert_eq!(parse_labeled_csv(bad).unwrap_err().name(), "MalformedScoreFile", "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn dprime_affine_invariant(seed in any::<u64>(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_set(&mut rng);
            prop_assume!(dprime(&s).is_ok_and(f64::is_finite));
            let t = ScoreSet::new(
                s.genuine.iter().map(|x| a * x + b).collect(),
                s.imposter.iter().map(|x| a * x + b).collect(),
            );
            prop_assert!((dprime(&s).unwrap() - dprime(&t).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn roc_is_monotone(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let curve = roc(&random_set(&mut rng)).unwrap();
            for w in curve.windows(2) {
                prop_assert!(w[0].threshold < w[1].threshold);
                prop_assert!(w[0].fmr <= w[1].fmr);
                prop_assert!(w[0].fnmr >= w[1].fnmr);
            }
            prop_assert_eq!((curve[0].fmr, curve[0].fnmr), (0.0, 1.0));
            let last = curve[curve.len() - 1];
            prop_assert_eq!((last.fmr, last.fnmr), (1.0, 0.0));
        }

        #[test]
        fn eer_zero_iff_separable(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_set(&mut rng);
            let gmax = s.genuine.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let imin = s.imposter.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(eer(&s).unwrap() == 0.0, gmax < imin);
            let same = ScoreSet::new(s.genuine.clone(), s.genuine.clone());
            let e = eer(&same).unwrap();
            prop_assert!((0.0..=0.5).contains(&e));
        }

        #[test]
        fn accuracy_identity(na in 1usize..200, nb in 1usize..200, ea in 0usize..200, eb in 0usize..200) {
            let (ea, eb) = (ea.min(na), eb.min(nb));
            let mut p = PadLabels::default();
            for k in 0..na {
                p.push(Decision::Attack, if k < ea { Decision::Live } else { Decision::Attack });
            }
            for k in 0..nb {
                p.push(Decision::Live, if k < eb { Decision::Attack } else { Decision::Live });
            }
            let r = pad_rates(&p).unwrap();
            let rhs = 1.0 - (r.apcer * na as f64 + r.bpcer * nb as f64) / (na + nb) as f64;
            prop_assert!((r.accuracy - rhs).abs() <= 4.0 * f64::EPSILON);
        }
    }
}
