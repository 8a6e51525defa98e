//! Registry of the evaluable California Vehicle Code sections.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleCategory {
    RightOfWay,
    Signal,
    StopSign,
    Speed,
    Overtaking,
    LaneManeuver,
    Headway,
    LaneKeeping,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSpec {
    pub rule_id: u32,
    pub category: RuleCategory,
    pub title: &'static str,
    pub parameters: BTreeMap<&'static str, f64>,
}

/// Every supported section, in registry order.
pub const SUPPORTED: [u32; 13] = [
    21453, 21460, 21461, 21800, 21801, 21802, 21803, 21804, 22107, 22108, 22349, 22350, 22450,
];

pub const TIME_HEADWAY_S: f64 = 2.0;
pub const SPEED_MARGIN_MPS: f64 = 0.5;
pub const SUSTAIN_S: f64 = 1.0;
pub const STOP_ZONE_M: f64 = 5.0;
pub const STOP_SPEED_MPS: f64 = 0.1;
pub const ONCOMING_RANGE_M: f64 = 30.0;
pub const JUNCTION_PROXIMITY_M: f64 = 2.0;
pub const PRIORITY_WINDOW_S: f64 = 2.0;
pub const TIE_WINDOW_S: f64 = 0.5;
pub const LANE_KEEP_SUSTAIN_S: f64 = 0.5;
/// Prima facie maximum on two-way, single-lane roads (55 mph).
pub const MAX_TWO_LANE_MPS: f64 = 24.59;
/// Statewide maximum elsewhere (65 mph).
pub const MAX_HIGHWAY_MPS: f64 = 29.06;
pub const DEFAULT_SPEED_LIMIT_MPS: f64 = 13.89;

pub fn is_supported(rule_id: u32) -> bool {
    SUPPORTED.contains(&rule_id)
}

/// `CVC_<code>` tokens of every supported section.
pub fn rule_tokens() -> Vec<String> {
    SUPPORTED.iter().map(|c| format!("CVC_{c}")).collect()
}

pub fn rule(rule_id: u32) -> Option<RuleSpec> {
    use RuleCategory::*;
    let (category, title, params): (RuleCategory, &'static str, &[(&'static str, f64)]) =
        match rule_id {
            21453 => (Signal, "red signal: stop at the limit line", &[]),
            21460 => (Overtaking, "double solid lines: no crossing to the left", &[]),
            21461 => (
                Overtaking,
                "unsafe passing toward oncoming traffic",
                &[("oncoming_range_m", ONCOMING_RANGE_M)],
            ),
            21800 => (
                RightOfWay,
                "intersection priority",
                &[("priority_window_s", PRIORITY_WINDOW_S), ("tie_window_s", TIE_WINDOW_S)],
            ),
            21801 => (
                RightOfWay,
                "left turn yields to oncoming traffic",
                &[("priority_window_s", PRIORITY_WINDOW_S)],
            ),
            21802 => (
                RightOfWay,
                "stop sign: yield after stopping",
                &[("priority_window_s", PRIORITY_WINDOW_S)],
            ),
            21803 => (
                RightOfWay,
                "yield-controlled approach",
                &[("priority_window_s", PRIORITY_WINDOW_S)],
            ),
            21804 => (
                RightOfWay,
                "entering the highway from outside the road",
                &[("priority_window_s", PRIORITY_WINDOW_S)],
            ),
            22107 => (
                LaneManeuver,
                "unsafe lane change",
                &[("time_headway_s", TIME_HEADWAY_S)],
            ),
            22108 => (
                LaneManeuver,
                "lane change next to the junction",
                &[("junction_proximity_m", JUNCTION_PROXIMITY_M)],
            ),
            22349 => (
                Speed,
                "maximum speed",
                &[
                    ("two_lane_max_mps", MAX_TWO_LANE_MPS),
                    ("highway_max_mps", MAX_HIGHWAY_MPS),
                    ("margin_mps", SPEED_MARGIN_MPS),
                    ("sustain_s", SUSTAIN_S),
                ],
            ),
            22350 => (
                Speed,
                "basic speed law",
                &[
                    ("margin_mps", SPEED_MARGIN_MPS),
                    ("sustain_s", SUSTAIN_S),
                    ("time_headway_s", TIME_HEADWAY_S),
                ],
            ),
            22450 => (
                StopSign,
                "stop at the limit line",
                &[("stop_zone_m", STOP_ZONE_M), ("stop_speed_mps", STOP_SPEED_MPS)],
            ),
            _ => return None,
        };
    Some(RuleSpec {
        rule_id,
        category,
        title,
        parameters: params.iter().copied().collect(),
    })
}

pub fn all_rules() -> Vec<RuleSpec> {
    SUPPORTED.iter().filter_map(|&c| rule(c)).collect()
}

/// Reporting family of a section. Folding the five right-of-way sections into
/// one family gives nine families for the thirteen sections.
pub fn family(rule_id: u32) -> &'static str {
    match rule_id {
        21800..=21804 => "right_of_way",
        21453 => "red_signal",
        22450 => "stop_sign",
        22349 => "maximum_speed",
        22350 => "basic_speed",
        21460 => "solid_line",
        21461 => "unsafe_passing",
        22107 => "lane_change",
        22108 => "lane_change_signal",
        _ => "unknown",
    }
}
