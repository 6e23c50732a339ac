//! Performance metrics and the three privacy quantities: vulnerability,
//! its percentage change under obfuscation, and the privacy-performance
//! trade-off.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Default cut-off at or above which a classifier is called vulnerable.
pub const DEFAULT_VULNERABILITY_THRESHOLD: f64 = 1.4;
/// Binary datasets at or above this imbalance ratio are scored with AP.
pub const AP_IMBALANCE_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    AveragePrecision,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::AveragePrecision => "average_precision",
        }
    }

    /// Average precision for binary datasets with imbalance ratio ≥ 2,
    /// accuracy otherwise.
    pub fn for_dataset(d: &Dataset) -> Metric {
        if d.n_classes() == 2 && d.imbalance_ratio() >= AP_IMBALANCE_RATIO {
            Metric::AveragePrecision
        } else {
            Metric::Accuracy
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    #[default]
    Auto,
    Accuracy,
    AveragePrecision,
}

impl MetricChoice {
    pub fn resolve(self, d: &Dataset) -> Metric {
        match self {
            MetricChoice::Auto => Metric::for_dataset(d),
            MetricChoice::Accuracy => Metric::Accuracy,
            MetricChoice::AveragePrecision => Metric::AveragePrecision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfValue {
    pub metric: Metric,
    pub value: f64,
    pub n_evaluated: usize,
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<PerfValue> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("accuracy of zero points".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(PerfValue {
        metric: Metric::Accuracy,
        value: hits as f64 / truth.len() as f64,
        n_evaluated: truth.len(),
    })
}

/// Average precision of a ranking: `Σ_k (R_k − R_{k−1}) · P_k` over
/// descending score thresholds. Points sharing a score enter the ranking
/// together.
pub fn average_precision(scores: &[f64], truth: &[bool]) -> Result<PerfValue> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: truth.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Precondition("average precision needs finite scores".into()));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 || positives == truth.len() {
        return Err(Error::Precondition(
            "average precision needs both positive and negative examples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let total = positives as f64;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            tp += usize::from(truth[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / total;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(PerfValue {
        metric: Metric::AveragePrecision,
        value: ap,
        n_evaluated: scores.len(),
    })
}

/// Performance on seen (probe) data over performance on unseen data.
pub fn vulnerability(train_perf: &PerfValue, test_perf: &PerfValue) -> Result<f64> {
    if train_perf.metric != test_perf.metric {
        return Err(Error::MetricMismatch(train_perf.metric.name(), test_perf.metric.name()));
    }
    if test_perf.value <= 0.0 {
        return Err(Error::UndefinedVulnerability);
    }
    Ok(train_perf.value / test_perf.value)
}

/// Percentage reduction of vulnerability after obfuscation; negative when
/// obfuscation made it worse.
pub fn vul_change(vul: f64, vul_obf: f64) -> Result<f64> {
    if !(vul > 0.0) {
        return Err(Error::NonPositive { name: "vul", value: vul });
    }
    Ok(100.0 * (vul - vul_obf) / vul)
}

/// `(vul / vul_obf) · (perf_obf / perf)`; above 1 the obfuscation pays off.
pub fn pp_tradeoff(vul: f64, vul_obf: f64, perf: f64, perf_obf: f64) -> Result<f64> {
    for (name, value) in [("vul", vul), ("vul_obf", vul_obf), ("perf", perf), ("perf_obf", perf_obf)] {
        if !(value > 0.0) {
            return Err(Error::NonPositive { name, value });
        }
    }
    Ok((vul / vul_obf) * (perf_obf / perf))
}

pub fn classify_vulnerable(vul: f64, threshold: f64) -> bool {
    vul >= threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnRecord {
    pub dataset: String,
    pub classifier: String,
    pub train_perf: PerfValue,
    pub test_perf: PerfValue,
    pub vul: f64,
    pub flagged_vulnerable: bool,
}

impl VulnRecord {
    pub fn new(
        dataset: &str,
        classifier: &str,
        train_perf: PerfValue,
        test_perf: PerfValue,
        threshold: f64,
    ) -> Result<Self> {
        let vul = vulnerability(&train_perf, &test_perf)?;
        Ok(VulnRecord {
            dataset: dataset.into(),
            classifier: classifier.into(),
            train_perf,
            test_perf,
            vul,
            flagged_vulnerable: classify_vulnerable(vul, threshold),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRecord {
    pub vul: f64,
    pub vul_obf: f64,
    pub perf: f64,
    pub perf_obf: f64,
    pub vul_change: f64,
    pub pp_tradeoff: f64,
}

impl TradeoffRecord {
    pub fn new(vul: f64, vul_obf: f64, perf: f64, perf_obf: f64) -> Result<Self> {
        Ok(TradeoffRecord {
            vul,
            vul_obf,
            perf,
            perf_obf,
            vul_change: vul_change(vul, vul_obf)?,
            pp_tradeoff: pp_tradeoff(vul, vul_obf, perf, perf_obf)?,
        })
    }

    /// Derived fields equal a fresh recomputation from the raw ones.
    pub fn is_consistent(&self) -> bool {
        TradeoffRecord::new(self.vul, self.vul_obf, self.perf, self.perf_obf)
            .map(|r| r == *self)
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn acc(v: f64) -> PerfValue {
        PerfValue {
            metric: Metric::Accuracy,
            value: v,
            n_evaluated: 100,
        }
    }

    /// Brute-force AP: walk every distinct threshold and evaluate the
    /// precision/recall of "score ≥ threshold" directly.
    fn ap_oracle(scores: &[f64], truth: &[bool]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let p = truth.iter().filter(|&&t| t).count() as f64;
        let mut prev = 0.0;
        let mut total = 0.0;
        for t in thresholds {
            let sel: Vec<bool> = scores.iter().zip(truth).filter(|(s, _)| **s >= t).map(|(_, &y)| y).collect();
            let tp = sel.iter().filter(|&&y| y).count() as f64;
            let recall = tp / p;
            total += (recall - prev) * tp / sel.len() as f64;
            prev = recall;
        }
        total
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap().value, 1.0);
        assert_eq!(accuracy(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap().value, 0.5);
        assert_eq!(accuracy(&[1], &[0]).unwrap().value, 0.0);
        assert!(matches!(accuracy(&[1], &[0, 1]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(accuracy(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn ap_examples() {
        let perfect = average_precision(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(perfect.value, 1.0);
        // negative ranked first: AP = 1 · (1/2)
        let reversed = average_precision(&[0.2, 0.9], &[true, false]).unwrap();
        assert_eq!(reversed.value, 0.5);
        assert!(average_precision(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn ap_groups_ties() {
        // all tied: a single threshold, precision = prevalence
        let ap = average_precision(&[0.5; 4], &[true, false, false, false]).unwrap();
        assert_eq!(ap.value, 0.25);
    }

    #[test]
    fn random_scores_give_prevalence() {
        use rand::Rng;
        let mut rng = crate::seed::rng(5);
        let n = 20000;
        let truth: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.3).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let prevalence = truth.iter().filter(|&&t| t).count() as f64 / n as f64;
        let ap = average_precision(&scores, &truth).unwrap().value;
        assert!((ap - prevalence).abs() < 0.02, "{ap} vs {prevalence}");
    }

    #[test]
    fn vulnerability_examples() {
        assert_eq!(vulnerability(&acc(0.9), &acc(0.9)).unwrap(), 1.0);
        let v = vulnerability(&acc(0.888), &acc(0.60)).unwrap();
        assert!((v - 1.48).abs() < 1e-12);
        assert!(matches!(vulnerability(&acc(0.5), &acc(0.0)), Err(Error::UndefinedVulnerability)));
        let ap = PerfValue {
            metric: Metric::AveragePrecision,
            ..acc(0.5)
        };
        assert!(matches!(vulnerability(&acc(0.5), &ap), Err(Error::MetricMismatch(..))));
    }

    #[test]
    fn vul_change_examples() {
        assert_eq!(vul_change(2.0, 1.0).unwrap(), 50.0);
        let c = vul_change(1.48, 1.02).unwrap();
        assert!((c - 31.19).abs() <= 0.5, "{c}");
        let c = vul_change(0.93, 0.95).unwrap();
        assert!((c + 2.15).abs() < 0.01 && c < 0.0, "{c}");
        assert!(vul_change(0.0, 1.0).is_err());
    }

    #[test]
    fn pp_tradeoff_examples() {
        assert_eq!(pp_tradeoff(1.3, 1.3, 0.7, 0.7).unwrap(), 1.0);
        let pp = pp_tradeoff(1.48, 1.02, 0.60, 0.467).unwrap();
        assert!((pp - 1.13).abs() < 0.005, "{pp}");
        assert_eq!(pp_tradeoff(2.0, 1.0, 0.8, 0.4).unwrap(), 1.0);
        assert!(pp_tradeoff(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn vulnerability_flag() {
        let t = DEFAULT_VULNERABILITY_THRESHOLD;
        assert!(classify_vulnerable(1.48, t));
        assert!(!classify_vulnerable(1.0, t));
        assert!(!classify_vulnerable(1.39, t));
        let r = VulnRecord::new("d", "c", acc(0.9), acc(0.6), t).unwrap();
        assert!(r.flagged_vulnerable && (r.vul - 1.5).abs() < 1e-12);
    }

    #[test]
    fn tradeoff_record_recomputes() {
        let r = TradeoffRecord::new(1.48, 1.02, 0.6, 0.467).unwrap();
        assert!(r.is_consistent());
        let mut tampered = r;
        tampered.pp_tradeoff += 1e-9;
        assert!(!tampered.is_consistent());
    }

    proptest! {
        #[test]
        fn ap_matches_threshold_oracle(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s)).collect();
            let truth: Vec<bool> = data.iter().map(|(_, t)| *t).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let ap = average_precision(&scores, &truth).unwrap().value;
            prop_assert!((ap - ap_oracle(&scores, &truth)).abs() < 1e-12);
        }

        #[test]
        fn ap_is_invariant_to_monotone_transforms(
            data in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s).collect();
            let truth: Vec<bool> = data.iter().map(|(_, t)| *t).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
            let a = average_precision(&scores, &truth).unwrap().value;
            let b = average_precision(&squashed, &truth).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn perfect_ranking_is_one(pos in 1usize..20, neg in 1usize..20) {
            let mut scores = vec![2.0; pos];
            scores.extend(vec![1.0; neg]);
            let mut truth = vec![true; pos];
            truth.extend(vec![false; neg]);
            prop_assert_eq!(average_precision(&scores, &truth).unwrap().value, 1.0);
        }

        #[test]
        fn accuracy_is_one_minus_hamming(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..50)) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let hamming = p.iter().zip(&t).filter(|(a, b)| a != b).count() as f64;
            let a = accuracy(&p, &t).unwrap().value;
            prop_assert!((a - (1.0 - hamming / t.len() as f64)).abs() < 1e-12);
        }

        #[test]
        fn vul_change_is_scale_free(v in 0.1f64..5.0, vo in 0.1f64..5.0, a in 0.1f64..10.0) {
            let base = vul_change(v, vo).unwrap();
            prop_assert!((vul_change(a * v, a * vo).unwrap() - base).abs() < 1e-9);
        }

        #[test]
        fn pp_tradeoff_is_scale_free(
            v in 0.1f64..5.0, vo in 0.1f64..5.0, p in 0.05f64..1.0, po in 0.05f64..1.0,
            a in 0.1f64..10.0, b in 0.1f64..10.0,
        ) {
            let base = pp_tradeoff(v, vo, p, po).unwrap();
            let scaled = pp_tradeoff(a * v, a * vo, b * p, b * po).unwrap();
            prop_assert!((scaled - base).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
