use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Critical,
    Risk,
    Optimization,
    Efficiency,
    Hold,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Critical => "critical",
            Tier::Risk => "risk",
            Tier::Optimization => "optimization",
            Tier::Efficiency => "efficiency",
            Tier::Hold => "hold",
        }
    }

    /// Integer power deltas (dB) the tier may emit.
    pub fn legal_deltas(self) -> std::ops::RangeInclusive<i32> {
        match self {
            Tier::Critical | Tier::Risk => 1..=3,
            Tier::Optimization => -2..=2,
            Tier::Efficiency => -3..=-1,
            Tier::Hold => 0..=0,
        }
    }

    /// Tier legality of a (delta, grant) pair. Deltas must be whole dB and
    /// only Critical may request emergency PRBs.
    pub fn is_legal(self, power_delta_db: f64, emergency_prb_grant: bool) -> bool {
        if !power_delta_db.is_finite() || power_delta_db.fract() != 0.0 {
            return false;
        }
        if emergency_prb_grant && self != Tier::Critical {
            return false;
        }
        let r = self.legal_deltas();
        (f64::from(*r.start())..=f64::from(*r.end())).contains(&power_delta_db)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "critical" => Tier::Critical,
            "risk" => Tier::Risk,
            "optimization" => Tier::Optimization,
            "efficiency" => Tier::Efficiency,
            "hold" => Tier::Hold,
            other => return Err(Error::ScenarioParse(format!("unknown tier {other:?}"))),
        })
    }
}

/// SINR boundaries γ₁ < γ₂ < γ₃ < γ₄ in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyThresholds {
    pub gamma1_db: f64,
    pub gamma2_db: f64,
    pub gamma3_db: f64,
    pub gamma4_db: f64,
}

impl Default for PolicyThresholds {
    fn default() -> Self {
        Self {
            gamma1_db: 15.0,
            gamma2_db: 18.0,
            gamma3_db: 20.0,
            gamma4_db: 25.0,
        }
    }
}

impl PolicyThresholds {
    pub fn validate(&self) -> Result<()> {
        let g = [self.gamma1_db, self.gamma2_db, self.gamma3_db, self.gamma4_db];
        if g.iter().all(|x| x.is_finite()) && g.windows(2).all(|w| w[0] < w[1]) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "thresholds must be finite and strictly increasing, got {g:?}"
            )))
        }
    }

    /// All four boundaries moved by `margin_db`.
    pub fn shifted(&self, margin_db: f64) -> Self {
        Self {
            gamma1_db: self.gamma1_db + margin_db,
            gamma2_db: self.gamma2_db + margin_db,
            gamma3_db: self.gamma3_db + margin_db,
            gamma4_db: self.gamma4_db + margin_db,
        }
    }
}

/// Half-open bands; a boundary value belongs to the upper tier.
pub fn classify_tier(sinr_db: f64, th: &PolicyThresholds) -> Tier {
    if sinr_db < th.gamma1_db {
        Tier::Critical
    } else if sinr_db < th.gamma2_db {
        Tier::Risk
    } else if sinr_db < th.gamma3_db {
        Tier::Optimization
    } else {
        Tier::Efficiency
    }
}
