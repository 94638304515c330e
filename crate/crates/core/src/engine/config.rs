use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{UavParams, UavPolicy, UgvParams};
use crate::gossip::{TopicTable, EXPERIENCE, GOAL_CLAIM, GOAL_VISITED, MAP_PATCH, ROBOT_STATUS};
use crate::network::LinkModel;
use crate::world::{Cell, CostTable, GeneratorParams};

/// A configuration problem, located by a dotted field path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSource {
    Generate {
        #[serde(default)]
        params: GeneratorParams,
        /// World seed; the master seed is used when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

impl Default for WorldSource {
    fn default() -> Self {
        WorldSource::Generate {
            params: GeneratorParams::default(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Roster {
    pub ugv_count: usize,
    pub ugv: UgvParams,
    pub uav: UavParams,
    pub policy: UavPolicy,
    /// Explicit UGV start cells; chosen near the origin when absent.
    pub starts: Option<Vec<Cell>>,
}

impl Default for Roster {
    fn default() -> Self {
        Roster {
            ugv_count: 3,
            ugv: UgvParams::default(),
            uav: UavParams::default(),
            policy: UavPolicy::default(),
            starts: None,
        }
    }
}

fn default_dt() -> f64 {
    0.1
}

fn default_sample_period() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub world: WorldSource,
    #[serde(default)]
    pub roster: Roster,
    #[serde(default)]
    pub link: LinkModel,
    #[serde(default)]
    pub topics: TopicTable,
    #[serde(default)]
    pub costs: CostTable,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// End the run as soon as every goal has been visited.
    #[serde(default)]
    pub stop_when_all_visited: bool,
    /// Give every UGV the full aerial map at time zero.
    #[serde(default)]
    pub prior_map: bool,
    /// Seconds between position samples.
    #[serde(default = "default_sample_period")]
    pub sample_period: f64,
}

impl ScenarioConfig {
    pub fn new(duration: f64) -> Self {
        ScenarioConfig {
            name: String::new(),
            world: WorldSource::default(),
            roster: Roster::default(),
            link: LinkModel::default(),
            topics: TopicTable::default(),
            costs: CostTable::default(),
            dt: default_dt(),
            duration,
            seed: 0,
            stop_when_all_visited: false,
            prior_map: false,
            sample_period: default_sample_period(),
        }
    }

    /// Parses a scenario from JSON text.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            let message = e.to_string();
            // serde reports unknown or missing fields by name; surface that as the field path
            let field = ["unknown field `", "missing field `"]
                .iter()
                .find_map(|p| message.split(p).nth(1).and_then(|r| r.split('`').next()))
                .unwrap_or("scenario")
                .to_string();
            ConfigError::new(field, message)
        })
    }

    /// Resolves a relative world file path against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let WorldSource::File { path } = &mut self.world {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64, field: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("must be positive and finite, got {v}")))
            }
        };
        let non_negative = |v: f64, field: &str| {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("must be non-negative, got {v}")))
            }
        };
        positive(self.dt, "dt")?;
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(ConfigError::new("duration", "must be non-negative and finite"));
        }
        positive(self.sample_period, "sample_period")?;
        let r = &self.roster;
        if r.ugv_count == 0 {
            return Err(ConfigError::new("roster.ugv_count", "at least one UGV is required"));
        }
        if let Some(starts) = &r.starts {
            if starts.len() != r.ugv_count {
                return Err(ConfigError::new(
                    "roster.starts",
                    format!("{} start cells for {} UGVs", starts.len(), r.ugv_count),
                ));
            }
        }
        positive(r.ugv.speed, "roster.ugv.speed")?;
        if !(0.0..1.0).contains(&r.ugv.speed_jitter) {
            return Err(ConfigError::new("roster.ugv.speed_jitter", "must lie in [0, 1)"));
        }
        positive(r.ugv.status_period, "roster.ugv.status_period")?;
        positive(r.uav.speed, "roster.uav.speed")?;
        positive(r.uav.sensor_radius, "roster.uav.sensor_radius")?;
        positive(r.uav.sensor_period, "roster.uav.sensor_period")?;
        non_negative(r.policy.t_explore, "roster.policy.t_explore")?;
        positive(r.policy.t_relay, "roster.policy.t_relay")?;
        non_negative(r.policy.s_max, "roster.policy.s_max")?;
        non_negative(r.policy.min_explore, "roster.policy.min_explore")?;
        self.link
            .validate()
            .map_err(|(f, m)| ConfigError::new(format!("link.{f}"), m))?;
        self.costs.validate().map_err(|m| ConfigError::new("costs", m))?;
        for name in [MAP_PATCH, EXPERIENCE, GOAL_CLAIM, GOAL_VISITED, ROBOT_STATUS] {
            if self.topics.lookup(name).is_none() {
                return Err(ConfigError::new("topics", format!("topic {name:?} is required")));
            }
        }
        Ok(())
    }
}
