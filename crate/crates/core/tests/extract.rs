use std::path::{Path, PathBuf};

use crashscene::dsl::{parse_and_validate, validate_spec, Weather};
use crashscene::extract::{
    build_validation_prompt, extract_and_validate, extract_batch, ClientConfig, CrashReport,
    ExtractError, FixtureTransport,
};

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/extract")
}

fn report(name: &str) -> CrashReport {
    CrashReport::load(&dir().join(format!("reports/case_{name}.json"))).unwrap()
}

fn transport() -> FixtureTransport {
    FixtureTransport::from_json(&std::fs::read_to_string(dir().join("transcripts.json")).unwrap()).unwrap()
}

#[test]
fn valid_reply_passes_through() {
    let t = transport();
    let r = report("ok");
    assert!(r.sketch.is_some());
    let x = extract_and_validate(&r, &ClientConfig::default(), &t).unwrap();
    assert_eq!(x.spec.scenario_id, "case_ok");
    assert_eq!((x.extraction_attempts, x.validation_attempts), (1, 1));
    assert!(!x.validation_fallback);
    assert!(validate_spec(&x.spec).is_empty());
}

#[test]
fn invalid_enum_then_valid_is_one_retry() {
    let t = transport();
    let x = extract_and_validate(&report("retry"), &ClientConfig::default(), &t).unwrap();
    assert_eq!(x.retries(), 1);
    assert_eq!(x.spec.environment.weather, Weather::Sunny);
    assert_eq!(t.calls("case_retry"), 3);
}

#[test]
fn malformed_replies_exhaust_after_three_attempts() {
    let t = transport();
    let cfg = ClientConfig { max_retries: 2, ..ClientConfig::default() };
    match extract_and_validate(&report("broken"), &cfg, &t) {
        Err(ExtractError::Exhausted { attempts, issues, .. }) => {
            assert_eq!(attempts, 3);
            assert!(!issues.is_empty());
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(t.calls("case_broken"), 3);
}

#[test]
fn validation_pass_revises_unsupported_weather() {
    let t = transport();
    let x = extract_and_validate(&report("revise"), &ClientConfig::default(), &t).unwrap();
    assert_eq!(x.spec.environment.weather, Weather::Rainy);
}

#[test]
fn invalid_validation_reply_keeps_the_draft() {
    let t = transport();
    let x = extract_and_validate(&report("fallback"), &ClientConfig::default(), &t).unwrap();
    assert!(x.validation_fallback);
    assert_eq!(x.validation_attempts, 3);
    assert!(validate_spec(&x.spec).is_empty());
}

#[test]
fn validation_prompt_lists_draft_values_verbatim() {
    let draft = parse_and_validate(
        "environment:\n  weather: sunny\n  time_of_day: daytime\nroad_network:\n  road_type: straight\n  number_of_ways: 2\n  number_of_lanes: 1\nactors:\n  ego:\n    actor_id: ego\n    actor_type: car\n    behavior: go_forward\n  npcs:\n    - actor_id: npc1\n      actor_type: car\n      behavior: go_forward\n      position:\n        reference: ego\n        spatial_relation: front\n        heading_relation: opposite_direction\noracle:\n  - CVC_21461: wrong_side_driving\n    description: x\n    violating_actor: npc1\n",
    )
    .unwrap();
    let r = report("revise");
    let b = build_validation_prompt(&draft, &r);
    let checks = b.user_parts.last().unwrap().text().unwrap();
    let env_road = checks
        .lines()
        .filter(|l| l.starts_with("- check /environment") || l.starts_with("- check /road_network"))
        .count();
    assert_eq!(env_road, 5);
    assert!(checks.contains("/environment/weather = sunny"));
    assert_eq!(b, build_validation_prompt(&draft, &r));
}

#[test]
fn transport_errors_carry_the_case() {
    let t = FixtureTransport::default();
    match extract_and_validate(&report("ok"), &ClientConfig::default(), &t) {
        Err(ExtractError::Transport { case_id, .. }) => assert_eq!(case_id, "case_ok"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn batch_keeps_order_and_is_deterministic() {
    let names = ["ok", "retry", "broken", "revise", "fallback"];
    let reports: Vec<_> = names.iter().map(|n| report(n)).collect();
    let cfg = ClientConfig { max_in_flight: 3, ..ClientConfig::default() };
    let run = || {
        extract_batch(&reports, &cfg, &transport())
            .into_iter()
            .map(|r| r.map(|x| x.source).map_err(|e| e.to_string()))
            .collect::<Vec<_>>()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a[2].is_err());
    assert!(a[0].as_ref().unwrap().contains("case_ok"));
}
