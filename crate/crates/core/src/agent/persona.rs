use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaName {
    #[serde(alias = "strategic")]
    StrategicCoordinator,
    #[serde(alias = "tactical")]
    TacticalCoordinator,
    EnergyBalancer,
}

impl PersonaName {
    pub fn as_str(self) -> &'static str {
        match self {
            PersonaName::StrategicCoordinator => "strategic",
            PersonaName::TacticalCoordinator => "tactical",
            PersonaName::EnergyBalancer => "energy_balancer",
        }
    }
}

impl fmt::Display for PersonaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PersonaName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "strategic" | "strategic_coordinator" => Ok(PersonaName::StrategicCoordinator),
            "tactical" | "tactical_coordinator" => Ok(PersonaName::TacticalCoordinator),
            "energy" | "energy_balancer" => Ok(PersonaName::EnergyBalancer),
            _ => Err(Error::InvalidConfig(format!("unknown persona {s:?}"))),
        }
    }
}

/// Multipliers on the four reward terms (SINR change, threshold, action,
/// power penalty).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub sinr: f64,
    pub threshold: f64,
    pub action: f64,
    pub power: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            sinr: 1.0,
            threshold: 1.0,
            action: 1.0,
            power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub name: PersonaName,
    /// Added to every γ boundary before classifying.
    pub threshold_margin_db: f64,
    /// Weight of the projected SINR in the stress estimate.
    pub forecast_weight: f64,
    pub reward_weights: RewardWeights,
}

impl Default for Persona {
    fn default() -> Self {
        Self::strategic()
    }
}

impl Persona {
    pub fn strategic() -> Self {
        Self {
            name: PersonaName::StrategicCoordinator,
            threshold_margin_db: 2.0,
            forecast_weight: 0.8,
            reward_weights: RewardWeights::default(),
        }
    }

    pub fn tactical() -> Self {
        Self {
            name: PersonaName::TacticalCoordinator,
            threshold_margin_db: 0.0,
            forecast_weight: 0.4,
            reward_weights: RewardWeights::default(),
        }
    }

    pub fn energy_balancer() -> Self {
        Self {
            name: PersonaName::EnergyBalancer,
            threshold_margin_db: -1.0,
            forecast_weight: 0.4,
            reward_weights: RewardWeights {
                power: 2.0,
                ..RewardWeights::default()
            },
        }
    }

    pub fn named(name: PersonaName) -> Self {
        match name {
            PersonaName::StrategicCoordinator => Self::strategic(),
            PersonaName::TacticalCoordinator => Self::tactical(),
            PersonaName::EnergyBalancer => Self::energy_balancer(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.reward_weights;
        let weights_ok = [w.sinr, w.threshold, w.action, w.power]
            .iter()
            .all(|x| x.is_finite() && *x >= 0.0);
        if !weights_ok {
            return Err(Error::InvalidConfig("persona reward weights must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.forecast_weight) {
            return Err(Error::InvalidConfig("persona forecast_weight must lie in [0, 1]".into()));
        }
        if !self.threshold_margin_db.is_finite() {
            return Err(Error::InvalidConfig("persona threshold_margin_db must be finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for p in [Persona::strategic(), Persona::tactical(), Persona::energy_balancer()] {
            p.validate().unwrap();
            assert_eq!(Persona::named(p.name), p);
            assert_eq!(p.name.as_str().parse::<PersonaName>().unwrap(), p.name);
        }
    }

    #[test]
    fn rejects_negative_weight() {
        let mut p = Persona::tactical();
        p.reward_weights.power = -1.0;
        assert!(p.validate().is_err());
    }
}
