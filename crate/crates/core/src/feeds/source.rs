use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GroundTruth, SignalKind, SourceReport};
use crate::noise::NoiseStreams;
use crate::time::Timestamp;

/// How a mock source distorts the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub bias_rel: f64,
    pub sigma_rel: f64,
    pub sigma_abs: f64,
    /// Probability that a report is replaced by an outlier.
    pub outlier_rate: f64,
    /// Outlier offset in multiples of the signal range.
    pub outlier_scale: f64,
    pub reliability_prior: f64,
}

impl NoiseProfile {
    pub fn exact() -> Self {
        Self {
            bias_rel: 0.0,
            sigma_rel: 0.0,
            sigma_abs: 0.0,
            outlier_rate: 0.0,
            outlier_scale: 0.0,
            reliability_prior: 1.0,
        }
    }

    pub fn honest(sigma_rel: f64, sigma_abs: f64) -> Self {
        Self {
            sigma_rel,
            sigma_abs,
            reliability_prior: 0.9,
            ..Self::exact()
        }
    }

    pub fn corrupt(outlier_rate: f64, outlier_scale: f64) -> Self {
        Self {
            outlier_rate,
            outlier_scale,
            reliability_prior: 0.5,
            ..Self::honest(0.01, 0.01)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedSource {
    pub source_id: String,
    pub profile: NoiseProfile,
}

impl FeedSource {
    /// One report for `(kind, t)`, drawn from the source's keyed stream.
    pub fn report(&self, kind: SignalKind, t: Timestamp, truth: f64, streams: &NoiseStreams) -> SourceReport {
        let p = &self.profile;
        let channel = format!("feed/{}/{}", self.source_id, kind.as_str());
        let mut rng = streams.rng(t.minutes(), &channel);
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let mut value = truth * (1.0 + p.bias_rel) + truth.abs() * p.sigma_rel * z1 + p.sigma_abs * z2;
        if p.outlier_rate > 0.0 && rng.random::<f64>() < p.outlier_rate {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            value = truth + sign * p.outlier_scale * kind.range();
        }
        SourceReport {
            source_id: self.source_id.clone(),
            kind,
            timestamp: t,
            value,
            reliability_prior: p.reliability_prior,
        }
    }
}

/// Report stream of one source for one signal kind over `timestamps`.
pub fn generate_feed(
    truth: &GroundTruth,
    source: &FeedSource,
    kind: SignalKind,
    timestamps: impl IntoIterator<Item = Timestamp>,
    streams: &NoiseStreams,
) -> Vec<SourceReport> {
    timestamps
        .into_iter()
        .map(|t| source.report(kind, t, truth.value(kind, t), streams))
        .collect()
}
