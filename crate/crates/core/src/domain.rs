//! Small enums shared across the pipeline stages.

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ::serde::Serialize, ::serde::Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::error::Error;

            fn from_str(s: &str) -> ::std::result::Result<Self, $crate::error::Error> {
                match s.trim() {
                    $($token => Ok($name::$variant),)+
                    other => Err($crate::error::Error::UnknownToken { kind: $kind, token: other.to_string() }),
                }
            }
        }
    };
}

token_enum!(
    /// Wrist the device is worn on.
    Hand, "hand" {
        Left => "left",
        Right => "right",
    }
);

impl Hand {
    pub fn other(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Hand::Left => 0,
            Hand::Right => 1,
        }
    }
}

token_enum!(
    /// Physiological channel of an export.
    Channel, "channel" {
        HeartRate => "heart_rate",
        Steps => "steps",
        Calories => "calories",
        Altitude => "altitude",
    }
);

token_enum!(
    /// Classification target.
    HandRole, "hand role" {
        Dominant => "dominant",
        Nondominant => "nondominant",
    }
);

impl HandRole {
    /// Class index used by the classifiers: dominant is the positive class.
    pub fn class(self) -> usize {
        match self {
            HandRole::Dominant => 1,
            HandRole::Nondominant => 0,
        }
    }

    pub fn from_class(class: usize) -> HandRole {
        if class == 1 {
            HandRole::Dominant
        } else {
            HandRole::Nondominant
        }
    }
}

token_enum!(
    /// Wrist configuration of the devices while the data was recorded.
    DeviceSetting, "device setting" {
        DefaultBothNondominant => "default_both_nondominant",
        ConfiguredPerHand => "configured_per_hand",
    }
);

token_enum!(
    WearFlag, "wear flag" {
        None => "none",
        Removed => "removed",
        Worn => "worn",
    }
);

impl Default for WearFlag {
    fn default() -> Self {
        WearFlag::None
    }
}

token_enum!(
    /// Coarse part of the day attached to every second of the timeline.
    TimeOfDay, "time of day" {
        Morning => "Morning",
        Noon => "Noon",
        Afternoon => "Afternoon",
        Evening => "Evening",
    }
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for h in Hand::ALL {
            assert_eq!(h.as_str().parse::<Hand>().unwrap(), *h);
        }
        for c in Channel::ALL {
            assert_eq!(c.as_str().parse::<Channel>().unwrap(), *c);
        }
        assert!("elbow".parse::<Hand>().is_err());
    }

    #[test]
    fn dominant_is_positive_class() {
        assert_eq!(HandRole::Dominant.class(), 1);
        assert_eq!(HandRole::from_class(0), HandRole::Nondominant);
    }
}

pub(crate) use token_enum;
