//! Location and activity vocabularies for the context log.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LOCATIONS: [&str; 10] = [
    "home",
    "office",
    "campus",
    "gym",
    "store",
    "restaurant",
    "transit",
    "outdoors",
    "friend_home",
    "other",
];

pub const DEFAULT_ACTIVITIES: [&str; 16] = [
    "sleeping",
    "eating",
    "cooking",
    "dishwashing",
    "chores",
    "writing",
    "working",
    "meeting",
    "movies",
    "exercising",
    "walking",
    "commuting",
    "shopping",
    "socializing",
    "hygiene",
    "other",
];

/// Arousal levels offered by the survey.
pub const AROUSAL_LEVELS: std::ops::RangeInclusive<u8> = 1..=5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vocabulary {
    pub locations: Vec<String>,
    pub activities: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            locations: DEFAULT_LOCATIONS.iter().map(|s| s.to_string()).collect(),
            activities: DEFAULT_ACTIVITIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Vocabulary {
    pub fn validate(&self) -> Result<()> {
        for (kind, list) in [("location", &self.locations), ("activity", &self.activities)] {
            if list.is_empty() {
                return Err(Error::Config(format!("{kind} vocabulary is empty")));
            }
            let mut seen = std::collections::HashSet::new();
            for token in list {
                if token.is_empty() || token.contains([',', ';', '\n', '"']) {
                    return Err(Error::Config(format!("invalid {kind} token {token:?}")));
                }
                if !seen.insert(token) {
                    return Err(Error::Config(format!("duplicate {kind} token {token:?}")));
                }
            }
        }
        // activity sets are stored as 32-bit masks on the timeline
        if self.activities.len() > 32 {
            return Err(Error::Config("at most 32 activities are supported".into()));
        }
        Ok(())
    }

    pub fn location_index(&self, token: &str) -> Result<usize> {
        self.locations
            .iter()
            .position(|l| l == token)
            .ok_or_else(|| Error::UnknownToken {
                kind: "location",
                token: token.to_string(),
            })
    }

    pub fn activity_index(&self, token: &str) -> Result<usize> {
        self.activities
            .iter()
            .position(|a| a == token)
            .ok_or_else(|| Error::UnknownToken {
                kind: "activity",
                token: token.to_string(),
            })
    }

    pub fn has_activity(&self, token: &str) -> bool {
        self.activities.iter().any(|a| a == token)
    }
}
