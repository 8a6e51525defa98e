//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use crashscene::batch::ExecMode;
use crashscene::dsl::*;
use crashscene::eval::*;
use crashscene::extract::{extract_batch, ClientConfig, CrashReport, ExtractError, FixtureTransport};
use crashscene::normalize::*;
use crashscene::pipeline::{run_document, PipelineConfig, ScenarioRun};
use crashscene::sampler::{sample_batch, sample_instance, stream, unit_interval};
use crashscene::sim::Obb;
use crashscene::synth::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_mappings() -> Outcome {
    ensure(map_time(TimeOfDay::Daytime) == Ok(12), "daytime")?;
    ensure(map_time(TimeOfDay::Nighttime) == Ok(22), "nighttime")?;
    ensure(map_weather(Weather::Sunny, TimeOfDay::Nighttime) == "ClearNight", "ClearNight")?;
    ensure(map_weather(Weather::Cloudy, TimeOfDay::Daytime) == "CloudyNoon", "CloudyNoon")?;
    ensure(select_map(RoadType::Straight, 2) == (Town::Town02, None), "straight-2")?;
    ensure(select_map(RoadType::Straight, 4) == (Town::Town04, None), "straight-4")?;
    ensure(select_map(RoadType::Curve, 2) == (Town::Town02, None), "curve-2")?;
    for lanes in 1..=8 {
        ensure(select_map(RoadType::Intersection, lanes).0 == Town::Town05, "intersection")?;
        ensure(select_map(RoadType::TIntersection, lanes).0 == Town::Town05, "t_intersection")?;
    }
    Ok("all 8 published mappings".into())
}

fn c2_defaults() -> Outcome {
    let doc = TABLE1[0].1
        .replace("    speed_mps: 10.0\n  npcs", "  npcs")
        .replace("actor_type: car\n      behavior", "actor_type: truck\n      behavior")
        .replace("        heading_relation: opposite_direction\n", "");
    let n = normalize_document(&doc, &SynonymTable::builtin(), 0).map_err(|e| format!("{e:?}"))?;
    let ego = &n.spec.actors.ego;
    let npc = &n.spec.actors.npcs[0];
    ensure(ego.speed_mps == Some(10.0), "ego speed")?;
    ensure(ego.model_id.as_deref() == Some("vehicle.lincoln.mkz_2017"), "ego model")?;
    ensure(npc.model_id.as_deref() == Some("vehicle.carlamotors.european_hgv"), "truck model")?;
    ensure(
        npc.position.as_ref().and_then(|p| p.heading_relation) == Some(HeadingRelation::OppositeDirection),
        "heading default",
    )?;
    let s = widen_to_range(10.0, RangeKind::Speed);
    ensure((s.low, s.high) == (8.0, 12.0), "speed range")?;
    let d = widen_to_range(10.0, RangeKind::InitDist);
    ensure((d.low, d.high) == (15.0, 20.0), "init range")?;
    Ok("10 m/s, mkz_2017, european_hgv, opposite_direction, [8, 12], [15, 20]".into())
}

fn table1_runs(mode: ExecMode) -> Result<Vec<ScenarioRun>, String> {
    let cfg = PipelineConfig {
        mode,
        ..PipelineConfig::default()
    };
    TABLE1
        .iter()
        .map(|(name, doc, _)| run_document(name, doc, &cfg, None).map_err(|e| format!("{name}: {e}")))
        .collect()
}

fn c3_triggering(runs: &[ScenarioRun], secs: f64) -> Outcome {
    let mut counts = Vec::new();
    for ((name, _, expected), run) in TABLE1.iter().zip(runs) {
        ensure(run.outcomes.len() == 2000, format!("{name}: {} instances", run.outcomes.len()))?;
        let seeds_ok = run.outcomes.iter().enumerate().all(|(i, o)| o.instance.instance_seed == i as u64);
        ensure(seeds_ok, format!("{name}: seeds are not 0..1999"))?;
        ensure(run.hit_count() == 2000, format!("{name}: {} / 2000 targeted hits", run.hit_count()))?;
        let rep = run.representative().unwrap().distinct_rules().len();
        ensure(rep == *expected, format!("{name}: {rep} distinct rules, expected {expected}"))?;
        let all_equal = run.outcomes.iter().all(|o| o.report.distinct_rules().len() == *expected);
        ensure(all_equal, format!("{name}: some instance differs from {expected}"))?;
        counts.push(rep.to_string());
    }
    ensure(secs <= 600.0, format!("took {secs:.0}s"))?;
    Ok(format!("12000/12000 hits, counts ({}), {secs:.0}s", counts.join(", ")))
}

fn c4_determinism(first: &[ScenarioRun]) -> Outcome {
    let mode = match ExecMode::default() {
        ExecMode::Sequential => ExecMode::Sequential,
        ExecMode::Parallel { .. } => ExecMode::Parallel { workers: Some(3) },
    };
    let second = table1_runs(mode)?;
    for (a, b) in first.iter().zip(&second) {
        ensure(a.compiled.program.source_text == b.compiled.program.source_text, format!("{}: scenic", a.name))?;
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            ensure(x.trace_digest == y.trace_digest, format!("{} seed {}: trace", a.name, x.instance.instance_seed))?;
            ensure(
                x.report.to_canonical_json() == y.report.to_canonical_json(),
                format!("{} seed {}: report", a.name, x.instance.instance_seed),
            )?;
        }
        ensure(a.artifact_digest() == b.artifact_digest(), format!("{}: artifact digest", a.name))?;
    }
    Ok("scenic, trace and report hashes identical across reruns".into())
}

fn c5_round_trip() -> Outcome {
    let corpus = golden_corpus();
    ensure(corpus.len() == 50, format!("{} corpus documents", corpus.len()))?;
    for (name, text) in &corpus {
        let s = parse_and_validate(text).map_err(|e| format!("{name}: {e:?}"))?;
        let out = serialize_dsl(&s);
        ensure(parse_dsl(&out).ok().as_ref() == Some(&s), format!("{name}: round trip"))?;
        ensure(serialize_dsl(&parse_dsl(&out).unwrap()) == out, format!("{name}: fixpoint"))?;
    }
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        },
        rng,
    );
    let kinds: Vec<usize> = (0..DEFECT_KINDS).collect();
    let strategy = (
        valid_spec(),
        proptest::sample::subsequence(kinds, 1..=DEFECT_KINDS),
    );
    runner
        .run(&strategy, |(spec, defects)| {
            let text = serialize_dsl(&spec);
            let back = parse_dsl(&text).map_err(|e| proptest::test_runner::TestCaseError::fail(format!("{e:?}")))?;
            proptest::prop_assert_eq!(&back, &spec);
            proptest::prop_assert_eq!(serialize_dsl(&back), text);
            let mut broken = spec;
            for &k in &defects {
                inject_defect(&mut broken, k);
            }
            let n = validate_spec(&broken).len();
            proptest::prop_assert!(n >= defects.len(), "{} defects, {n} issues", defects.len());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("50 corpus documents + 1000 generated specs; k defects gave >= k issues".into())
}

fn load_rq1(dir: &str) -> Result<Vec<ScenarioSpec>, String> {
    let root = fixture_dir("rq1").join(dir);
    let mut paths: Vec<_> = fs::read_dir(&root).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .iter()
        .map(|p| parse_and_validate(&fs::read_to_string(p).unwrap()).map_err(|e| format!("{}: {e:?}", p.display())))
        .collect()
}

fn c6_rq1() -> Outcome {
    let (cand, gold) = (load_rq1("candidate")?, load_rq1("golden")?);
    ensure(cand.len() == 50 && gold.len() == 50, "corpus size")?;
    let per: Vec<_> = cand.iter().zip(&gold).map(|(c, g)| compare_specs(c, g)).collect();
    let agg = aggregate_accuracy(&per).map_err(|e| e.to_string())?;
    let exact = |t: Tally, want: f64| t.matched as f64 == want * t.total as f64;
    ensure(exact(agg.environment, 1.0), "environment")?;
    ensure(exact(agg.road_network, 1.0), "road_network")?;
    ensure(agg.oracle.matched * 100 == 98 * agg.oracle.total, format!("oracle {:?}", agg.oracle))?;
    ensure(agg.actor.matched * 100 == 97 * agg.actor.total, format!("actor {:?}", agg.actor))?;
    let overall = format!("{:.2}", agg.overall());
    ensure(overall == "0.99", format!("overall {}", agg.overall()))?;
    Ok(format!(
        "environment 1.00, road_network 1.00, oracle {:.2}, actor {:.2}, overall {overall} ({}/{})",
        agg.oracle.fraction(),
        agg.actor.fraction(),
        agg.overall_tally().matched,
        agg.overall_tally().total
    ))
}

fn c7_kappa() -> Outcome {
    let mut done = 0u64;
    let mut attempt = 0u64;
    let mut worst: f64 = 0.0;
    while done < 100 {
        attempt += 1;
        let draw = |label: &str, i: u64, n: usize| (unit_interval(stream(attempt, label, i)) * n as f64) as usize;
        let (c, raters, items) = if done < 50 { (4, 3, 6) } else { (2 + draw("c", 0, 4), 2 + draw("r", 0, 5), 1 + draw("n", 0, 12)) };
        let ratings: Vec<Vec<usize>> = (0..items)
            .map(|i| (0..raters).map(|r| draw("v", (i * 16 + r) as u64, c)).collect())
            .collect();
        let m = RatingsMatrix::numbered(c, ratings).map_err(|e| e.to_string())?;
        match (fleiss_kappa(&m), brute_force_kappa(&m)) {
            (Ok((a, _)), Ok((b, _))) => {
                worst = worst.max((a - b).abs());
                ensure((a - b).abs() <= 1e-9, format!("matrix {attempt}: {a} vs {b}"))?;
                done += 1;
            }
            (Err(EvalError::UndefinedKappa), Err(EvalError::UndefinedKappa)) => {}
            (a, b) => return Err(format!("matrix {attempt}: {a:?} vs {b:?}")),
        }
    }
    let unanimous = RatingsMatrix::numbered(4, vec![vec![0; 3], vec![2; 3], vec![3; 3], vec![1; 3]])
        .map_err(|e| e.to_string())?;
    ensure(fleiss_kappa(&unanimous).map(|k| k.0) == Ok(1.0), "unanimous")?;
    ensure(KappaBand::of(0.68) == KappaBand::Substantial, "0.68 band")?;
    Ok(format!("100 matrices, max |dk| {worst:.1e}; unanimous 1.0; 0.68 substantial"))
}

fn c8_collisions() -> Outcome {
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(Config::default(), rng);
    let strategy = (random_obb(), random_obb());
    let (mut agree, mut band, mut overlapping) = (0, 0, 0);
    for i in 0..1000 {
        let (a, b): (Obb, Obb) = proptest::strategy::ValueTree::current(
            &proptest::strategy::Strategy::new_tree(&strategy, &mut runner).unwrap(),
        );
        let sat = a.overlaps(&b);
        overlapping += sat as usize;
        if sat == sampled_overlap(&a, &b) {
            agree += 1;
        } else if in_boundary_band(&a, &b, 0.01) {
            band += 1;
        } else {
            return Err(format!("pair {i}: SAT {sat} outside the 1 cm band: {a:?} {b:?}"));
        }
    }
    Ok(format!("{agree} agree, {band} boundary-band, {overlapping} overlapping of 1000"))
}

fn c9_sampler() -> Outcome {
    let n = normalize_document(TABLE1[0].1, &SynonymTable::builtin(), 0).map_err(|e| format!("{e:?}"))?;
    let t = build_template(&n).map_err(|e| e.to_string())?;
    let r = t.free("ego_speed").ok_or("no ego_speed")?;
    ensure((r.low, r.high) == (8.0, 12.0), "ego_speed range")?;
    let batch = sample_batch(&t, 2000, 0);
    let xs: Vec<f64> = batch.iter().map(|i| i.bindings["ego_speed"]).collect();
    ensure(xs.iter().all(|&x| (8.0..=12.0).contains(&x)), "out of bounds")?;
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    ensure((9.9..=10.1).contains(&mean), format!("mean {mean}"))?;
    for inst in &batch {
        let again = sample_instance(&t, inst.instance_seed);
        let same = inst.bindings.iter().all(|(k, v)| again.bindings[k].to_bits() == v.to_bits());
        ensure(same, format!("seed {} not reproducible", inst.instance_seed))?;
    }
    Ok(format!("mean {mean:.4}, all in [8, 12], bitwise reproducible"))
}

fn c10_extraction() -> Outcome {
    let dir = fixture_dir("extract");
    let transport = FixtureTransport::from_json(&fs::read_to_string(dir.join("transcripts.json")).unwrap())
        .map_err(|e| e.to_string())?;
    let names = ["ok", "retry", "broken", "revise", "fallback"];
    let reports: Vec<CrashReport> = names
        .iter()
        .map(|n| CrashReport::load(&dir.join(format!("reports/case_{n}.json"))))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let out = extract_batch(&reports, &ClientConfig::default(), &transport);
    let mut tally = BTreeMap::new();
    for (name, r) in names.iter().zip(&out) {
        match r {
            Ok(x) => {
                ensure(validate_spec(&x.spec).is_empty(), format!("{name}: issues"))?;
                *tally.entry("ok").or_insert(0) += 1;
            }
            Err(ExtractError::Exhausted { attempts: 3, .. }) => *tally.entry("exhausted").or_insert(0) += 1,
            Err(e) => return Err(format!("{name}: {e}")),
        }
    }
    let retry = out[1].as_ref().map_err(|e| e.to_string())?;
    ensure(retry.retries() == 1, "retry path")?;
    ensure(out[0].as_ref().map(|x| x.retries()).ok() == Some(0), "success path")?;
    ensure(matches!(out[2], Err(ExtractError::Exhausted { .. })), "exhaustion path")?;
    Ok(format!("{} valid extractions (1 after a retry), {} exhausted after 3 attempts", tally["ok"], tally["exhausted"]))
}

fn main() {
    let quiet_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let guard = |f: &dyn Fn() -> Outcome| -> Outcome {
        catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        })
    };

    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 mapping fidelity", guard(&c1_mappings)),
        ("2 defaults and widening", guard(&c2_defaults)),
    ];
    let start = Instant::now();
    let runs = table1_runs(ExecMode::default());
    let secs = start.elapsed().as_secs_f64();
    match &runs {
        Ok(runs) => {
            results.push(("3 end-to-end violation triggering", guard(&|| c3_triggering(runs, secs))));
            results.push(("4 determinism", guard(&|| c4_determinism(runs))));
        }
        Err(e) => {
            results.push(("3 end-to-end violation triggering", Err(e.clone())));
            results.push(("4 determinism", Err("criterion 3 runs failed".into())));
        }
    }
    results.push(("5 round trip and validation", guard(&c5_round_trip)));
    results.push(("6 RQ1 scoring reproduction", guard(&c6_rq1)));
    results.push(("7 Fleiss kappa", guard(&c7_kappa)));
    results.push(("8 collision detection", guard(&c8_collisions)));
    results.push(("9 sampler statistics", guard(&c9_sampler)));
    results.push(("10 offline extraction loop", guard(&c10_extraction)));
    std::panic::set_hook(quiet_hook);

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
