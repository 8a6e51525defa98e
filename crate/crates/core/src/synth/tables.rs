//! Lookup tables from DSL tokens to simulator presets.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::dsl::{RoadType, TimeOfDay, Weather};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Town {
    Town02,
    Town04,
    Town05,
}

impl Town {
    pub fn as_str(self) -> &'static str {
        match self {
            Town::Town02 => "Town02",
            Town::Town04 => "Town04",
            Town::Town05 => "Town05",
        }
    }

    /// Lanes per direction of the realized straight/curve road.
    pub fn lanes_per_direction(self) -> u32 {
        match self {
            Town::Town04 => 2,
            Town::Town02 | Town::Town05 => 1,
        }
    }
}

impl fmt::Display for Town {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Simulation hour for a time-of-day token.
pub fn map_time(time: TimeOfDay) -> Result<u32, SynthError> {
    match time {
        TimeOfDay::Daytime => Ok(12),
        TimeOfDay::Nighttime => Ok(22),
        TimeOfDay::NotMentioned => Err(SynthError::UnsupportedToken {
            field: "time_of_day",
            token: time.as_str().to_string(),
        }),
    }
}

/// Weather preset for a weather/time pair. `not_mentioned` time reads as day.
pub fn map_weather(weather: Weather, time: TimeOfDay) -> &'static str {
    let night = time == TimeOfDay::Nighttime;
    match (weather, night) {
        (Weather::Sunny | Weather::NotMentioned, false) => "ClearNoon",
        (Weather::Sunny | Weather::NotMentioned, true) => "ClearNight",
        (Weather::Cloudy | Weather::Overcast | Weather::Windy, false) => "CloudyNoon",
        (Weather::Cloudy | Weather::Overcast | Weather::Windy, true) => "CloudyNight",
        (Weather::Rainy, false) => "HardRainNoon",
        (Weather::Rainy, true) => "HardRainNight",
        (Weather::Snowy, false) => "SoftRainNoon",
        (Weather::Snowy, true) => "SoftRainNight",
        (Weather::Foggy, false) => "WetCloudyNoon",
        (Weather::Foggy, true) => "WetCloudyNight",
    }
}

/// Map asset for a road type and its total lane count (both directions).
///
/// Lane counts the town cannot realize snap to the nearest supported layout
/// and come back with a warning.
pub fn select_map(road_type: RoadType, lanes: u32) -> (Town, Option<String>) {
    let snap = |town: Town, realized: u32| {
        (
            town,
            Some(format!(
                "{road_type} with {lanes} lanes snapped to {town} ({realized} lanes)"
            )),
        )
    };
    match road_type {
        RoadType::Intersection | RoadType::TIntersection => (Town::Town05, None),
        RoadType::Straight => match lanes {
            2 => (Town::Town02, None),
            4 => (Town::Town04, None),
            0 | 1 => snap(Town::Town02, 2),
            _ => snap(Town::Town04, 4),
        },
        RoadType::Curve => match lanes {
            2 => (Town::Town02, None),
            _ => snap(Town::Town02, 2),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_mappings() {
        assert_eq!(map_time(TimeOfDay::Daytime).unwrap(), 12);
        assert_eq!(map_time(TimeOfDay::Nighttime).unwrap(), 22);
        assert!(map_time(TimeOfDay::NotMentioned).is_err());
        assert_eq!(map_weather(Weather::Sunny, TimeOfDay::Nighttime), "ClearNight");
        assert_eq!(map_weather(Weather::Cloudy, TimeOfDay::Daytime), "CloudyNoon");
        assert_eq!(map_weather(Weather::Rainy, TimeOfDay::Daytime), "HardRainNoon");
        assert_eq!(select_map(RoadType::Straight, 2), (Town::Town02, None));
        assert_eq!(select_map(RoadType::Straight, 4), (Town::Town04, None));
        assert_eq!(select_map(RoadType::Curve, 2), (Town::Town02, None));
        assert_eq!(select_map(RoadType::Intersection, 2).0, Town::Town05);
        assert_eq!(select_map(RoadType::TIntersection, 2).0, Town::Town05);
    }

    #[test]
    fn tables_are_total() {
        for &w in Weather::ALL {
            for &t in TimeOfDay::ALL {
                assert!(!map_weather(w, t).is_empty());
            }
        }
        for &r in RoadType::ALL {
            for lanes in 1..=16 {
                let (town, warning) = select_map(r, lanes);
                if r.is_junction() {
                    assert_eq!(town, Town::Town05);
                    assert!(warning.is_none());
                }
            }
        }
        assert!(select_map(RoadType::Straight, 3).1.is_some());
        assert!(select_map(RoadType::Curve, 4).1.is_some());
    }
}
