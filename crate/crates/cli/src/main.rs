//! `crashscene` command line: every pipeline stage as a subcommand, plus the
//! end-to-end `pipeline` driver.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crashscene::batch::{map_slice, ExecMode};
use crashscene::dsl::{parse_and_validate, parse_dsl, serialize_dsl, validate_spec, ValidationIssue};
use crashscene::eval::{
    aggregate_accuracy, compare_specs, compare_violation_counts, fleiss_kappa, RatingsMatrix,
};
use crashscene::extract::{
    extract_and_validate, ChatTransport, ClientConfig, CrashReport, FixtureTransport,
    HttpTransport,
};
use crashscene::monitor::{monitor, summary_csv, ViolationReport};
use crashscene::normalize::{normalize_document, SynonymTable};
use crashscene::pipeline::{atomic_write, run_document, seed_file, slug, PipelineConfig};
use crashscene::sampler::{read_manifest, sample_batch_with, write_manifest};
use crashscene::sim::{build_geometry, simulate_with, SimConfig, Trace};
use crashscene::synth::{build_template, render_scenic, ScenarioTemplate};

#[derive(Parser)]
#[command(name = "crashscene", version, about = "Crash-report scenario compiler, simulator and rule monitor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Instances per scenario.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// First instance seed; seeds are consecutive.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (1 runs sequentially).
    #[arg(long)]
    workers: Option<usize>,
    /// Synonym table replacing the built-in one.
    #[arg(long)]
    synonyms: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ClientOpts {
    /// Replay fixture transcripts instead of calling an endpoint.
    #[arg(long)]
    offline: bool,
    /// Transcript JSON (case id to replies) for offline mode.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value_t = 2)]
    max_retries: usize,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a document and print its canonical form.
    Parse { file: PathBuf },
    /// Parse and cross-check a document; prints issues as JSON.
    Validate { file: PathBuf },
    /// Fold synonyms, fill defaults and print the resolved document.
    Normalize {
        file: PathBuf,
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write provenance JSON here.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Compile a document into template.json and a Scenic program.
    Synth {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw instances from a template; prints JSON Lines.
    Sample {
        template: PathBuf,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate every instance of a manifest into trace files.
    Simulate {
        template: PathBuf,
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check traces against the template's rules and oracle.
    Monitor {
        template: PathBuf,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Write reports/ and summary.csv here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score extraction accuracy, rater agreement or violation counts.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Turn crash reports into DSL documents.
    Extract {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        client: ClientOpts,
    },
    /// Run documents (or crash reports) through every stage.
    Pipeline {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        client: ClientOpts,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Field-level accuracy of candidate documents against golden ones,
    /// paired by file name.
    Accuracy {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear-weighted Fleiss kappa of a ratings CSV.
    Kappa {
        ratings: PathBuf,
        /// Ordered category labels.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        categories: Vec<String>,
    },
    /// Distinct-rule counts of pipeline runs against expected counts.
    Counts {
        /// Pipeline output directory.
        #[arg(long)]
        runs: PathBuf,
        /// CSV of `road_type,expected_count`; road_type names a run.
        #[arg(long)]
        expected: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Processing outcome; configuration errors travel as `Err`.
enum Status {
    Ok,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes()).map_err(Into::into)
}

fn print_issues(issues: &[ValidationIssue]) {
    println!("{}", serde_json::to_string_pretty(issues).expect("issues serialize"));
}

fn synonyms(path: Option<&Path>) -> Result<SynonymTable> {
    match path {
        None => Ok(SynonymTable::builtin()),
        Some(p) => SynonymTable::parse(&read(p)?).with_context(|| format!("synonym table {}", p.display())),
    }
}

fn load_template(path: &Path) -> Result<ScenarioTemplate> {
    ScenarioTemplate::from_json(&read(path)?).with_context(|| format!("template {}", path.display()))
}

fn stem(path: &Path) -> String {
    slug(&path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

fn run(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Parse { file } => match parse_dsl(&read(&file)?) {
            Ok(spec) => {
                print!("{}", serialize_dsl(&spec));
                Ok(Status::Ok)
            }
            Err(issues) => {
                print_issues(&issues);
                Ok(Status::Failed)
            }
        },
        Command::Validate { file } => {
            let issues = match parse_dsl(&read(&file)?) {
                Ok(spec) => validate_spec(&spec),
                Err(issues) => issues,
            };
            print_issues(&issues);
            Ok(if issues.is_empty() { Status::Ok } else { Status::Failed })
        }
        Command::Normalize {
            file,
            synonyms: table,
            seed,
            provenance,
        } => {
            let table = synonyms(table.as_deref())?;
            match normalize_document(&read(&file)?, &table, seed) {
                Ok(n) => {
                    print!("{}", serialize_dsl(&n.spec));
                    if let Some(p) = provenance {
                        let json = serde_json::to_string_pretty(&n.provenance)?;
                        write(&p, &format!("{json}\n"))?;
                    }
                    Ok(Status::Ok)
                }
                Err(issues) => {
                    print_issues(&issues);
                    Ok(Status::Failed)
                }
            }
        }
        Command::Synth {
            file,
            out,
            synonyms: table,
            seed,
        } => {
            let table = synonyms(table.as_deref())?;
            let n = match normalize_document(&read(&file)?, &table, seed) {
                Ok(n) => n,
                Err(issues) => {
                    print_issues(&issues);
                    return Ok(Status::Failed);
                }
            };
            let template = match build_template(&n) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return Ok(Status::Failed);
                }
            };
            let program = render_scenic(&template);
            write(&out.join("template.json"), &template.to_canonical_json_pretty())?;
            write(&out.join(format!("{}.scenic", stem(&file))), &program.source_text)?;
            for w in &template.warnings {
                eprintln!("warning: {w}");
            }
            Ok(Status::Ok)
        }
        Command::Sample {
            template,
            samples,
            seed,
            out,
        } => {
            if samples == 0 {
                bail!("--samples must be at least 1");
            }
            let t = load_template(&template)?;
            let text = write_manifest(&sample_batch_with(&t, samples, seed, ExecMode::default()));
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(Status::Ok)
        }
        Command::Simulate {
            template,
            instances,
            out,
            workers,
        } => {
            let t = load_template(&template)?;
            let geometry = build_geometry(&t);
            let list = read_manifest(&read(&instances)?)
                .with_context(|| format!("manifest {}", instances.display()))?;
            let results = map_slice(&list, ExecMode::with_workers(workers), |i| {
                let trace = simulate_with(i, &geometry, SimConfig::default())?.quantized();
                atomic_write(&out.join(seed_file(i.instance_seed, "jsonl")), trace.to_jsonl().as_bytes())?;
                Ok::<_, anyhow::Error>(())
            });
            let mut status = Status::Ok;
            for (i, r) in list.iter().zip(results) {
                if let Err(e) = r {
                    eprintln!("seed {}: {e:#}", i.instance_seed);
                    status = Status::Failed;
                }
            }
            Ok(status)
        }
        Command::Monitor {
            template,
            traces,
            out,
        } => {
            let t = load_template(&template)?;
            let geometry = build_geometry(&t);
            let mut reports = Vec::new();
            let mut status = Status::Ok;
            for p in &traces {
                let trace = Trace::from_jsonl(&read(p)?).with_context(|| format!("trace {}", p.display()))?;
                match monitor(&trace, &t.params.oracle, &geometry) {
                    Ok(r) => reports.push(r),
                    Err(e) => {
                        eprintln!("{}: {e}", p.display());
                        status = Status::Failed;
                    }
                }
            }
            reports.sort_by_key(|r| r.instance_seed);
            match out {
                Some(dir) => {
                    for r in &reports {
                        write(&dir.join("reports").join(seed_file(r.instance_seed, "json")), &r.to_canonical_json())?;
                    }
                    write(&dir.join("summary.csv"), &summary_csv(&reports))?;
                }
                None => {
                    for r in &reports {
                        print!("{}", r.to_canonical_json());
                    }
                }
            }
            Ok(status)
        }
        Command::Eval(e) => eval(e),
        Command::Extract { reports, out, client } => {
            let (cfg, transport) = client_setup(&client)?;
            let mut status = Status::Ok;
            for p in &reports {
                match CrashReport::load(p).map_err(anyhow::Error::from).and_then(|r| {
                    extract_and_validate(&r, &cfg, transport.as_ref()).map(|x| (r, x)).map_err(Into::into)
                }) {
                    Ok((r, x)) => {
                        write(&out.join(format!("{}.yaml", slug(&r.case_id))), &serialize_dsl(&x.spec))?;
                        eprintln!(
                            "{}: {} extraction attempt(s), {} validation attempt(s){}",
                            r.case_id,
                            x.extraction_attempts,
                            x.validation_attempts,
                            if x.validation_fallback { ", kept draft" } else { "" }
                        );
                    }
                    Err(e) => {
                        eprintln!("{}: {e:#}", p.display());
                        status = Status::Failed;
                    }
                }
            }
            Ok(status)
        }
        Command::Pipeline {
            inputs,
            out,
            run,
            client,
        } => pipeline(&inputs, &out, &run, &client),
    }
}

fn client_setup(c: &ClientOpts) -> Result<(ClientConfig, Box<dyn ChatTransport>)> {
    let mut cfg = ClientConfig {
        api_key_env: c.api_key_env.clone(),
        max_retries: c.max_retries,
        timeout_s: c.timeout,
        ..ClientConfig::default()
    };
    if let Some(e) = &c.endpoint {
        cfg.endpoint_url = e.clone();
    }
    if let Some(m) = &c.model {
        cfg.model_name = m.clone();
    }
    let transport: Box<dyn ChatTransport> = if c.offline {
        let path = c
            .transcripts
            .as_ref()
            .ok_or_else(|| anyhow!("--offline needs --transcripts FILE"))?;
        Box::new(FixtureTransport::from_json(&read(path)?).with_context(|| format!("transcripts {}", path.display()))?)
    } else {
        Box::new(HttpTransport::new(&cfg))
    };
    Ok((cfg, transport))
}

fn eval(cmd: EvalCommand) -> Result<Status> {
    match cmd {
        EvalCommand::Accuracy {
            candidates,
            golden,
            out,
        } => {
            let mut names: Vec<PathBuf> = fs::read_dir(&golden)
                .with_context(|| format!("listing {}", golden.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "yaml" || x == "yml"))
                .collect();
            names.sort();
            let mut results = Vec::new();
            let mut status = Status::Ok;
            for g in &names {
                let c = candidates.join(g.file_name().expect("listed file"));
                let (ct, gt) = (read(&c)?, read(g)?);
                match (parse_and_validate(&ct), parse_and_validate(&gt)) {
                    (Ok(cs), Ok(gs)) => results.push(compare_specs(&cs, &gs)),
                    (c_res, g_res) => {
                        for (p, r) in [(&c, c_res), (g, g_res)] {
                            if let Err(issues) = r {
                                eprintln!("{}: {} issue(s), pair skipped", p.display(), issues.len());
                            }
                        }
                        status = Status::Failed;
                    }
                }
            }
            let agg = aggregate_accuracy(&results)?;
            print!("{}", agg.to_csv());
            if let Some(dir) = out {
                write(&dir.join("accuracy.csv"), &agg.to_csv())?;
                write(&dir.join("accuracy.json"), &agg.to_json())?;
            }
            Ok(status)
        }
        EvalCommand::Kappa {
            ratings,
            categories,
        } => {
            let m = RatingsMatrix::from_csv(&read(&ratings)?, categories)?;
            let (k, band) = fleiss_kappa(&m)?;
            println!("kappa,band\n{k:.6},{}", band.as_str());
            Ok(Status::Ok)
        }
        EvalCommand::Counts {
            runs,
            expected,
            out,
        } => {
            let mut rows = Vec::new();
            for (n, line) in read(&expected)?.lines().enumerate().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let (name, count) = line
                    .split_once(',')
                    .ok_or_else(|| anyhow!("{}:{}: expected `road_type,count`", expected.display(), n + 1))?;
                rows.push((name.trim().to_string(), count.trim().parse::<usize>()?));
            }
            let mut reports: BTreeMap<String, Vec<ViolationReport>> = BTreeMap::new();
            for (name, _) in &rows {
                let dir = runs.join(slug(name)).join("reports");
                let Ok(entries) = fs::read_dir(&dir) else { continue };
                let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
                files.sort();
                if let Some(first) = files.first() {
                    let r: ViolationReport = serde_json::from_str(&read(first)?)?;
                    reports.insert(name.clone(), vec![r]);
                }
            }
            let table = compare_violation_counts(&reports, &rows)?;
            print!("{}", table.to_csv());
            if let Some(dir) = out {
                write(&dir.join("agreement.csv"), &table.to_csv())?;
            }
            Ok(if table.all_match() { Status::Ok } else { Status::Failed })
        }
    }
}

struct InputResult {
    input: String,
    name: String,
    error: Option<String>,
    instances: usize,
    hits: usize,
}

fn pipeline(inputs: &[PathBuf], out: &Path, run: &RunOpts, client: &ClientOpts) -> Result<Status> {
    if run.samples == 0 {
        bail!("--samples must be at least 1");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cfg = PipelineConfig {
        samples: run.samples,
        base_seed: run.seed,
        mode: ExecMode::with_workers(run.workers),
        sim: SimConfig::default(),
        synonyms: synonyms(run.synonyms.as_deref())?,
    };
    let needs_client = inputs.iter().any(|p| p.extension().is_some_and(|x| x == "json"));
    let client = if needs_client { Some(client_setup(client)?) } else { None };

    let mut results = Vec::new();
    for input in inputs {
        let mut res = InputResult {
            input: input.display().to_string(),
            name: stem(input),
            error: None,
            instances: 0,
            hits: 0,
        };
        let doc = if input.extension().is_some_and(|x| x == "json") {
            let (ccfg, transport) = client.as_ref().expect("client set up for report inputs");
            CrashReport::load(input)
                .map_err(anyhow::Error::from)
                .and_then(|r| {
                    res.name = slug(&r.case_id);
                    extract_and_validate(&r, ccfg, transport.as_ref()).map_err(Into::into)
                })
                .and_then(|x| {
                    let text = serialize_dsl(&x.spec);
                    write(&out.join(&res.name).join("extracted.yaml"), &text)?;
                    Ok(text)
                })
        } else {
            read(input)
        };
        let outcome =
            doc.and_then(|d| run_document(&res.name, &d, &cfg, Some(out)).map_err(anyhow::Error::from));
        match outcome {
            Ok(r) => {
                res.instances = r.outcomes.len();
                res.hits = r.hit_count();
            }
            Err(e) => res.error = Some(format!("{e:#}")),
        }
        if let Some(e) = &res.error {
            eprintln!("{}: {e}", res.input);
        } else {
            eprintln!("{}: {}/{} targeted hits", res.name, res.hits, res.instances);
        }
        results.push(res);
    }

    let mut csv = String::from("input,scenario,status,instances,targeted_hits,error\n");
    for r in &results {
        let status = if r.error.is_some() { "failed" } else { "ok" };
        let err = r.error.as_deref().unwrap_or("").replace('"', "'");
        csv.push_str(&format!(
            "\"{}\",{},{status},{},{},\"{err}\"\n",
            r.input, r.name, r.instances, r.hits
        ));
    }
    write(&out.join("pipeline_summary.csv"), &csv)?;
    Ok(if results.iter().all(|r| r.error.is_none()) {
        Status::Ok
    } else {
        Status::Failed
    })
}
