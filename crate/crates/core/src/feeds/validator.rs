use serde::{Deserialize, Serialize};

use super::{SignalKind, SourceReport};
use crate::error::{Error, Result};
use crate::time::Timestamp;

const MAD_CUTOFF: f64 = 3.0;
const EXACT_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedSignal {
    pub kind: SignalKind,
    pub timestamp: Timestamp,
    pub consensus_value: f64,
    /// Agreeing sources over total sources.
    pub confidence: f64,
    /// Sorted source ids.
    pub rejected_sources: Vec<String>,
    /// Set when only one source reported.
    pub low_evidence: bool,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Median/MAD consensus over the reports for one `(kind, timestamp)`.
///
/// A source agrees when its deviation from the overall median is within
/// 3·MAD; with MAD = 0 only exact matches agree. The consensus is the
/// median of the agreeing values.
pub fn validate(reports: &[SourceReport]) -> Result<ValidatedSignal> {
    let first = reports.first().ok_or(Error::NoSources)?;
    if let Some(r) = reports
        .iter()
        .find(|r| r.kind != first.kind || r.timestamp != first.timestamp)
    {
        return Err(Error::MixedReports(format!(
            "{}@{} mixed with {}@{}",
            first.kind.as_str(),
            first.timestamp,
            r.kind.as_str(),
            r.timestamp
        )));
    }
    if let Some(r) = reports.iter().find(|r| !r.value.is_finite()) {
        return Err(Error::MixedReports(format!("non-finite value from {}", r.source_id)));
    }

    let values = sorted(reports.iter().map(|r| r.value).collect());
    let center = median(&values);
    let mad = median(&sorted(values.iter().map(|v| (v - center).abs()).collect()));
    let tol = if mad > 0.0 { MAD_CUTOFF * mad } else { EXACT_MATCH_TOL };

    let mut agreeing = Vec::with_capacity(reports.len());
    let mut rejected = Vec::new();
    for r in reports {
        if (r.value - center).abs() <= tol {
            agreeing.push(r.value);
        } else {
            rejected.push(r.source_id.clone());
        }
    }
    rejected.sort();

    Ok(ValidatedSignal {
        kind: first.kind,
        timestamp: first.timestamp,
        consensus_value: median(&sorted(agreeing.clone())),
        confidence: agreeing.len() as f64 / reports.len() as f64,
        rejected_sources: rejected,
        low_evidence: reports.len() == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reports(values: &[f64]) -> Vec<SourceReport> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| SourceReport {
                source_id: format!("s{i}"),
                kind: SignalKind::EventDemand,
                timestamp: Timestamp(0),
                value: v,
                reliability_prior: 0.9,
            })
            .collect()
    }

    #[test]
    fn unanimous() {
        let v = validate(&reports(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(v.consensus_value, 5.0);
        assert_eq!(v.confidence, 1.0);
        assert!(v.rejected_sources.is_empty());
    }

    #[test]
    fn rejects_single_outlier() {
        let v = validate(&reports(&[5.0, 5.1, 4.9, 50.0])).unwrap();
        assert_eq!(v.rejected_sources, vec!["s3".to_string()]);
        assert_eq!(v.confidence, 0.75);
        // Median of the three agreeing values.
        assert_eq!(v.consensus_value, 5.0);
        assert!((v.consensus_value - 5.05).abs() <= 0.05 + 1e-12);
    }

    #[test]
    fn single_source_is_low_evidence() {
        let v = validate(&reports(&[7.0])).unwrap();
        assert_eq!(v.consensus_value, 7.0);
        assert_eq!(v.confidence, 1.0);
        assert!(v.low_evidence);
    }

    #[test]
    fn zero_mad_accepts_exact_matches_only() {
        let v = validate(&reports(&[2.0, 2.0, 2.0, 2.0 + 1e-6, 9.0])).unwrap();
        assert_eq!(v.consensus_value, 2.0);
        assert_eq!(v.rejected_sources, vec!["s3".to_string(), "s4".to_string()]);
    }

    #[test]
    fn empty_and_mixed_inputs_fail() {
        assert!(matches!(validate(&[]), Err(Error::NoSources)));
        let mut r = reports(&[1.0, 1.0]);
        r[1].kind = SignalKind::RainRate;
        assert!(matches!(validate(&r), Err(Error::MixedReports(_))));
    }

    proptest! {
        #[test]
        fn permutation_invariant(vals in prop::collection::vec(-100.0f64..100.0, 1..9), seed in any::<u64>()) {
            let base = reports(&vals);
            let mut shuffled = base.clone();
            // Deterministic Fisher-Yates driven by the seed.
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            prop_assert_eq!(validate(&base).unwrap(), validate(&shuffled).unwrap());
        }

        #[test]
        fn confidence_bounds(vals in prop::collection::vec(-100.0f64..100.0, 1..12)) {
            let v = validate(&reports(&vals)).unwrap();
            let n = vals.len() as f64;
            prop_assert!(v.confidence >= 1.0 / n && v.confidence <= 1.0);
            prop_assert_eq!(v.confidence == 1.0, v.rejected_sources.is_empty());
            prop_assert!(v.consensus_value.is_finite());
        }

        #[test]
        fn minority_outliers_do_not_move_consensus(
            truth in 1.0f64..5.0,
            honest_noise in prop::collection::vec(-0.05f64..0.05, 3..7),
            outliers in prop::collection::vec((any::<bool>(), 5.0f64..1e6), 1..4),
        ) {
            let n_honest = honest_noise.len();
            // c corrupt out of n = h + c sources stays within floor((n - 1) / 2) iff c < h.
            let outliers = &outliers[..outliers.len().min(n_honest - 1)];
            let mut vals: Vec<f64> = honest_noise.iter().map(|e| truth + e).collect();
            for (up, mag) in outliers {
                vals.push(if *up { truth + mag } else { truth - mag });
            }
            let envelope = honest_noise.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let v = validate(&reports(&vals)).unwrap();
            prop_assert!((v.consensus_value - truth).abs() <= envelope + 1e-12);
            for k in 0..outliers.len() {
                let id = format!("s{}", n_honest + k);
                prop_assert!(v.rejected_sources.contains(&id));
            }
        }
    }
}
