//! Detection metrics.
//!
//! A follow-up is accepted when `score >= threshold`. A false accept is an
//! accepted human-directed example, a false reject a rejected device-directed
//! one. FAR is taken over negatives, FRR over positives.

pub mod stats;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no examples to evaluate")]
    Empty,
    #[error("truth label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("score {score} for `{pair_id}` is outside [0, 1]")]
    BadScore { pair_id: String, score: f64 },
    #[error("evaluation needs both device-directed and human-directed examples")]
    MissingClass,
    #[error("target FRR {0} must lie strictly between 0 and 1")]
    BadTarget(f64),
    #[error("FRR target {target} is finer than 1/{positives}; nearest point has FRR {}", nearest.frr)]
    Unattainable {
        target: f64,
        positives: usize,
        nearest: OperatingPoint,
    },
    #[error("error vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired test needs at least 2 pairs, got {0}")]
    TooFew(usize),
    #[error("confidence {0} must lie strictly between 0 and 1")]
    BadConfidence(f64),
    #[error("pair `{0}` appears in only one system")]
    Unpaired(String),
    #[error("pair `{0}` appears more than once")]
    DuplicatePair(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub pair_id: String,
    pub truth: u8,
    pub score: f64,
}

impl ScoredExample {
    pub fn new(pair_id: impl Into<String>, truth: u8, score: f64) -> Self {
        ScoredExample {
            pair_id: pair_id.into(),
            truth,
            score,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    /// `FP / (FP + TN)`, absent without negatives.
    pub fn far(&self) -> Option<f64> {
        ratio(self.fp, self.negatives())
    }

    /// `FN / (FN + TP)`, absent without positives.
    pub fn frr(&self) -> Option<f64> {
        ratio(self.fn_, self.positives())
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target_frr: f64,
    pub threshold: f64,
    pub frr: f64,
    pub far: f64,
    /// False when the target is finer than the positive-count resolution;
    /// the point is then the nearest achievable one.
    pub attainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub far: Option<f64>,
    pub frr: Option<f64>,
    pub eer: Option<f64>,
    pub far_at_op: Vec<OperatingPoint>,
    pub counts: Counts,
    pub threshold: Option<f64>,
    pub fallback_rate: Option<f64>,
}

/// Count-based FAR/FRR for `(truth, predicted)` pairs.
pub fn far_frr(predictions: &[(u8, u8)]) -> Result<MetricsReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = Counts::default();
    for &(truth, pred) in predictions {
        match (truth, pred) {
            (1, 1) => counts.tp += 1,
            (1, 0) => counts.fn_ += 1,
            (0, 1) => counts.fp += 1,
            (0, 0) => counts.tn += 1,
            (t, p) => return Err(EvalError::BadLabel(if t > 1 { t } else { p })),
        }
    }
    Ok(MetricsReport {
        far: counts.far(),
        frr: counts.frr(),
        eer: None,
        far_at_op: Vec::new(),
        counts,
        threshold: None,
        fallback_rate: None,
    })
}

/// Binarises `scores` at `threshold` and counts errors.
pub fn far_frr_at(scores: &[ScoredExample], threshold: f64) -> Result<MetricsReport, EvalError> {
    let preds: Vec<(u8, u8)> = scores
        .iter()
        .map(|s| (s.truth, u8::from(s.score >= threshold)))
        .collect();
    let mut report = far_frr(&preds)?;
    report.threshold = Some(threshold);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub frr: f64,
    pub far: f64,
}

/// Error trade-off over every distinct threshold, in increasing threshold
/// order. FRR never decreases and FAR never increases along the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
    pub positives: usize,
    pub negatives: usize,
}

/// Threshold above every valid score; rejects everything.
pub const REJECT_ALL: f64 = 1.0 + f64::EPSILON;

fn validate(scores: &[ScoredExample]) -> Result<(usize, usize), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut pos = 0;
    for s in scores {
        if s.truth > 1 {
            return Err(EvalError::BadLabel(s.truth));
        }
        if !(0.0..=1.0).contains(&s.score) {
            return Err(EvalError::BadScore {
                pair_id: s.pair_id.clone(),
                score: s.score,
            });
        }
        pos += usize::from(s.truth);
    }
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::MissingClass);
    }
    Ok((pos, neg))
}

/// Sweeps every distinct score plus `0` and [`REJECT_ALL`].
pub fn sweep(scores: &[ScoredExample]) -> Result<DetCurve, EvalError> {
    let (positives, negatives) = validate(scores)?;
    let mut pos: Vec<f64> = scores.iter().filter(|s| s.truth == 1).map(|s| s.score).collect();
    let mut neg: Vec<f64> = scores.iter().filter(|s| s.truth == 0).map(|s| s.score).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);

    let mut thresholds: Vec<f64> = scores.iter().map(|s| s.score).collect();
    thresholds.push(0.0);
    thresholds.push(REJECT_ALL);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let points = thresholds
        .into_iter()
        .map(|t| {
            let rejected_pos = pos.partition_point(|&s| s < t);
            let accepted_neg = neg.len() - neg.partition_point(|&s| s < t);
            DetPoint {
                threshold: t,
                frr: rejected_pos as f64 / positives as f64,
                far: accepted_neg as f64 / negatives as f64,
            }
        })
        .collect();
    Ok(DetCurve {
        points,
        positives,
        negatives,
    })
}

/// Rate where FAR equals FRR, linearly interpolated between the two
/// operating points that bracket the crossing when no point lies on it.
pub fn eer(curve: &DetCurve) -> Result<f64, EvalError> {
    if curve.positives == 0 || curve.negatives == 0 {
        return Err(EvalError::MissingClass);
    }
    let mut prev: Option<&DetPoint> = None;
    for p in &curve.points {
        let d = p.far - p.frr;
        if d == 0.0 {
            return Ok(p.far);
        }
        if d < 0.0 {
            let Some(a) = prev else {
                return Ok(p.frr.min(p.far));
            };
            let da = a.far - a.frr;
            let lambda = da / (da - d);
            return Ok(a.far + lambda * (p.far - a.far));
        }
        prev = Some(p);
    }
    Err(EvalError::MissingClass)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpSelection {
    /// The highest threshold whose FRR does not exceed the target.
    #[default]
    Conservative,
    /// Linear interpolation between the points bracketing the target FRR.
    Interpolate,
}

/// FAR at the operating point for `target_frr`.
///
/// When fewer than `1 / target_frr` positives exist no non-zero FRR fits
/// under the target; that case is an [`EvalError::Unattainable`] carrying the
/// nearest achievable point.
pub fn far_at_frr(
    curve: &DetCurve,
    target_frr: f64,
    selection: OpSelection,
) -> Result<OperatingPoint, EvalError> {
    if !(target_frr > 0.0 && target_frr < 1.0) {
        return Err(EvalError::BadTarget(target_frr));
    }
    let idx = curve
        .points
        .iter()
        .rposition(|p| p.frr <= target_frr)
        .ok_or(EvalError::MissingClass)?;
    let at = curve.points[idx];
    let mut op = OperatingPoint {
        target_frr,
        threshold: at.threshold,
        frr: at.frr,
        far: at.far,
        attainable: true,
    };
    if (curve.positives as f64) * target_frr < 1.0 {
        op.attainable = false;
        return Err(EvalError::Unattainable {
            target: target_frr,
            positives: curve.positives,
            nearest: op,
        });
    }
    if selection == OpSelection::Interpolate && at.frr < target_frr {
        if let Some(next) = curve.points.get(idx + 1) {
            let lambda = (target_frr - at.frr) / (next.frr - at.frr);
            op.threshold = at.threshold + lambda * (next.threshold - at.threshold);
            op.far = at.far + lambda * (next.far - at.far);
            op.frr = target_frr;
        }
    }
    Ok(op)
}

/// Full report for a scored system: point metrics at `threshold`, plus EER
/// and operating points unless `hard_labels` is set. Unattainable operating
/// points are kept with `attainable = false`.
pub fn report(
    scores: &[ScoredExample],
    threshold: f64,
    op_targets: &[f64],
    selection: OpSelection,
    hard_labels: bool,
) -> Result<(MetricsReport, Option<DetCurve>), EvalError> {
    let mut out = far_frr_at(scores, threshold)?;
    if hard_labels {
        return Ok((out, None));
    }
    let curve = sweep(scores)?;
    out.eer = Some(eer(&curve)?);
    for &target in op_targets {
        match far_at_frr(&curve, target, selection) {
            Ok(op) => out.far_at_op.push(op),
            Err(EvalError::Unattainable { nearest, .. }) => out.far_at_op.push(nearest),
            Err(e) => return Err(e),
        }
    }
    Ok((out, Some(curve)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub confidence: f64,
    pub significant: bool,
    pub ci: (f64, f64),
    /// All differences were equal, so the statistic is undefined; `t` is
    /// reported as 0 and the test as not significant.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64], confidence: f64) -> Result<TTestResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFew(n));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(EvalError::BadConfidence(confidence));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let sd = libm::sqrt(var);
    let df = nf - 1.0;
    if sd == 0.0 {
        return Ok(TTestResult {
            n,
            mean_diff: mean,
            sd_diff: 0.0,
            t: 0.0,
            df,
            p_value: 1.0,
            confidence,
            significant: false,
            ci: (mean, mean),
            degenerate: true,
        });
    }
    let se = sd / libm::sqrt(nf);
    let t = mean / se;
    let p_value = stats::t_two_sided_p(t, df);
    let crit = stats::t_quantile(0.5 + confidence / 2.0, df);
    Ok(TTestResult {
        n,
        mean_diff: mean,
        sd_diff: sd,
        t,
        df,
        p_value,
        confidence,
        significant: p_value < 1.0 - confidence,
        ci: (mean - crit * se, mean + crit * se),
        degenerate: false,
    })
}

/// Pairs two systems' examples by `pair_id`, in the order of `a`.
pub fn align_by_pair_id<'a>(
    a: &'a [ScoredExample],
    b: &'a [ScoredExample],
) -> Result<Vec<(&'a ScoredExample, &'a ScoredExample)>, EvalError> {
    let mut index: BTreeMap<&str, &ScoredExample> = BTreeMap::new();
    for s in b {
        if index.insert(s.pair_id.as_str(), s).is_some() {
            return Err(EvalError::DuplicatePair(s.pair_id.clone()));
        }
    }
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(a.len());
    for s in a {
        if seen.insert(s.pair_id.as_str(), ()).is_some() {
            return Err(EvalError::DuplicatePair(s.pair_id.clone()));
        }
        let other = index
            .get(s.pair_id.as_str())
            .ok_or_else(|| EvalError::Unpaired(s.pair_id.clone()))?;
        out.push((s, *other));
    }
    if out.len() != b.len() {
        let missing = b
            .iter()
            .find(|s| !seen.contains_key(s.pair_id.as_str()))
            .map(|s| s.pair_id.clone())
            .unwrap_or_default();
        return Err(EvalError::Unpaired(missing));
    }
    Ok(out)
}

/// Which mistakes count as errors in a paired comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    #[default]
    All,
    FalseAcceptOnly,
}

/// 0/1 error indicator for each example at `threshold`.
pub fn error_indicators(scores: &[&ScoredExample], threshold: f64, kind: ErrorKind) -> Vec<f64> {
    scores
        .iter()
        .map(|s| {
            let pred = u8::from(s.score >= threshold);
            let wrong = match kind {
                ErrorKind::All => pred != s.truth,
                ErrorKind::FalseAcceptOnly => pred == 1 && s.truth == 0,
            };
            f64::from(u8::from(wrong))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn scored(pos: &[f64], neg: &[f64]) -> Vec<ScoredExample> {
        pos.iter()
            .map(|&s| (1, s))
            .chain(neg.iter().map(|&s| (0, s)))
            .enumerate()
            .map(|(i, (t, s))| ScoredExample::new(format!("p{i}"), t, s))
            .collect()
    }

    #[test]
    fn hand_counted_confusion() {
        let r = far_frr(&[(1, 1), (1, 0), (0, 0), (0, 1)]).unwrap();
        assert_eq!(r.frr, Some(0.5));
        assert_eq!(r.far, Some(0.5));
        assert_eq!(
            r.counts,
            Counts {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn degenerate_predictions() {
        let perfect = far_frr(&[(1, 1), (0, 0)]).unwrap();
        assert_eq!((perfect.far, perfect.frr), (Some(0.0), Some(0.0)));
        let accept_all = far_frr(&[(1, 1), (0, 1), (0, 1)]).unwrap();
        assert_eq!((accept_all.far, accept_all.frr), (Some(1.0), Some(0.0)));
        let no_neg = far_frr(&[(1, 1)]).unwrap();
        assert_eq!(no_neg.far, None);
        assert_eq!(far_frr(&[]), Err(EvalError::Empty));
        assert_eq!(far_frr(&[(2, 1)]), Err(EvalError::BadLabel(2)));
    }

    #[test]
    fn symmetric_construction() {
        let s = scored(&[0.6, 0.8, 0.2, 0.9], &[0.4, 0.2, 0.8, 0.1]);
        let curve = sweep(&s).unwrap();
        assert_eq!(eer(&curve).unwrap(), 0.25);
        let op = far_at_frr(&curve, 0.25, OpSelection::Conservative).unwrap();
        assert_eq!(op.far, 0.25);
        assert_eq!(op.threshold, 0.6);
    }

    #[test]
    fn separated_scores() {
        let pos: Vec<f64> = (0..10).map(|i| 0.6 + 0.01 * i as f64).collect();
        let neg: Vec<f64> = (0..10).map(|i| 0.1 + 0.01 * i as f64).collect();
        let curve = sweep(&scored(&pos, &neg)).unwrap();
        assert!(curve.points.iter().any(|p| p.frr == 0.0 && p.far == 0.0));
        assert_eq!(eer(&curve).unwrap(), 0.0);
        assert_eq!(far_at_frr(&curve, 0.10, OpSelection::Conservative).unwrap().far, 0.0);
    }

    #[test]
    fn equal_scores_give_two_operating_points() {
        let curve = sweep(&scored(&[0.5, 0.5], &[0.5])).unwrap();
        let mut ops: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.frr, p.far)).collect();
        ops.dedup();
        assert_eq!(ops, vec![(0.0, 1.0), (1.0, 0.0)]);
    }

    #[test]
    fn sweep_errors() {
        assert_eq!(sweep(&[]), Err(EvalError::Empty));
        assert_eq!(sweep(&scored(&[0.3], &[])), Err(EvalError::MissingClass));
        assert!(matches!(
            sweep(&scored(&[1.3], &[0.1])),
            Err(EvalError::BadScore { .. })
        ));
    }

    #[test]
    fn interpolated_crossing() {
        // one positive, one negative, overlapping: crossing lies between points
        let curve = sweep(&scored(&[0.3], &[0.7])).unwrap();
        assert_eq!(eer(&curve).unwrap(), 1.0);
        let curve = sweep(&scored(&[0.3, 0.9], &[0.7, 0.1, 0.2])).unwrap();
        let e = eer(&curve).unwrap();
        assert!(e > 0.0 && e < 1.0);
    }

    #[test]
    fn unattainable_target() {
        let curve = sweep(&scored(&[0.9, 0.8, 0.7, 0.6], &[0.1])).unwrap();
        match far_at_frr(&curve, 0.1, OpSelection::Conservative) {
            Err(EvalError::Unattainable {
                positives, nearest, ..
            }) => {
                assert_eq!(positives, 4);
                assert_eq!(nearest.frr, 0.0);
                assert!(!nearest.attainable);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            far_at_frr(&curve, 0.0, OpSelection::Conservative),
            Err(EvalError::BadTarget(0.0))
        );
    }

    #[test]
    fn interpolated_operating_point() {
        let s = scored(&[0.6, 0.8, 0.2, 0.9], &[0.4, 0.2, 0.8, 0.1]);
        let curve = sweep(&s).unwrap();
        let op = far_at_frr(&curve, 0.625, OpSelection::Interpolate).unwrap();
        // between (frr 0.5, far 0.25) at 0.8 and (frr 0.75, far 0.0) at 0.9
        assert_eq!(op.far, 0.125);
        assert_eq!(op.frr, 0.625);
        let op = far_at_frr(&curve, 0.625, OpSelection::Conservative).unwrap();
        assert_eq!(op.far, 0.25);
    }

    #[test]
    fn ttest_closed_form() {
        let a = [1.0, 1.0, 1.0, 1.0, 0.0];
        let b = [0.0; 5];
        let r = paired_ttest(&a, &b, 0.95).unwrap();
        assert!((r.t - 4.0).abs() < 1e-9);
        assert_eq!(r.df, 4.0);
        assert!(r.significant);
        assert!(r.ci.0 < r.mean_diff && r.mean_diff < r.ci.1);
    }

    #[test]
    fn ttest_degenerate_and_errors() {
        let a = [1.0, 0.0, 1.0];
        let r = paired_ttest(&a, &a, 0.95).unwrap();
        assert_eq!(r.t, 0.0);
        assert!(!r.significant);
        let r = paired_ttest(&[1.0, 1.0], &[0.0, 0.0], 0.95).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.t, 0.0);
        assert_eq!(paired_ttest(&[1.0], &[1.0], 0.95), Err(EvalError::TooFew(1)));
        assert_eq!(
            paired_ttest(&[1.0, 0.0], &[1.0], 0.95),
            Err(EvalError::LengthMismatch(2, 1))
        );
    }

    #[test]
    fn alignment_by_pair_id() {
        let a = vec![ScoredExample::new("x", 1, 0.9), ScoredExample::new("y", 0, 0.1)];
        let b = vec![ScoredExample::new("y", 0, 0.6), ScoredExample::new("x", 1, 0.2)];
        let pairs = align_by_pair_id(&a, &b).unwrap();
        assert_eq!(pairs[0].1.score, 0.2);
        let c = vec![ScoredExample::new("x", 1, 0.9)];
        assert!(matches!(align_by_pair_id(&a, &c), Err(EvalError::Unpaired(_))));
        assert!(matches!(align_by_pair_id(&c, &a), Err(EvalError::Unpaired(_))));
    }

    #[test]
    fn error_indicator_kinds() {
        let s = scored(&[0.2, 0.9], &[0.7, 0.1]);
        let refs: Vec<&ScoredExample> = s.iter().collect();
        assert_eq!(error_indicators(&refs, 0.5, ErrorKind::All), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(
            error_indicators(&refs, 0.5, ErrorKind::FalseAcceptOnly),
            vec![0.0, 0.0, 1.0, 0.0]
        );
    }
}
