//! Observed versus expected distinct-violation counts per road type.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::monitor::ViolationReport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub road_type: String,
    pub observed_count: usize,
    pub expected_count: usize,
    pub exact_match: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub rows: Vec<AgreementRow>,
}

impl AgreementTable {
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(|r| r.exact_match)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("road_type,observed_count,expected_count,exact_match\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.road_type, r.observed_count, r.expected_count, r.exact_match
            );
        }
        out
    }
}

/// Rows follow the order of `expected`. The first report of each group is
/// the representative one.
pub fn compare_violation_counts(
    reports: &BTreeMap<String, Vec<ViolationReport>>,
    expected: &[(String, usize)],
) -> Result<AgreementTable, EvalError> {
    let mut rows = Vec::with_capacity(expected.len());
    for (road_type, expected_count) in expected {
        let rep = reports
            .get(road_type)
            .and_then(|v| v.first())
            .ok_or_else(|| EvalError::MissingRoadType(road_type.clone()))?;
        let observed_count = rep.distinct_rules().len();
        rows.push(AgreementRow {
            road_type: road_type.clone(),
            observed_count,
            expected_count: *expected_count,
            exact_match: observed_count == *expected_count,
        });
    }
    Ok(AgreementTable { rows })
}
