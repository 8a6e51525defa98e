//! Crash report to DSL document via a chat-completion model: extraction
//! prompt, schema-checked retries, then an evidence-grounding validation
//! pass.

mod prompt;
mod transport;

pub use prompt::{
    build_extraction_prompt, build_validation_prompt, exemplars, field_checks, ChatMessage,
    Exemplar, FieldCheck, Part, PromptBundle, Role,
};
pub use transport::{
    reply_text, request_body, ChatTransport, FixtureTransport, HttpTransport, TransportError,
};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::{fs, io};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_and_validate, ScenarioSpec, ValidationIssue};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("case {case_id}: {reason}")]
    InvalidReport { case_id: String, reason: String },
    #[error("case {case_id}: {source}")]
    Transport {
        case_id: String,
        #[source]
        source: TransportError,
    },
    #[error("case {case_id}: no valid document after {attempts} attempt(s), {} issue(s) left", issues.len())]
    Exhausted {
        case_id: String,
        attempts: usize,
        issues: Vec<ValidationIssue>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sketch {
    pub media_type: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashReport {
    pub case_id: String,
    pub summary_text: String,
    pub sketch: Option<Sketch>,
    pub rule_context: Vec<String>,
}

/// On-disk report: JSON with an optional sketch path relative to the file.
#[derive(Deserialize)]
struct ReportFile {
    case_id: String,
    summary_text: String,
    #[serde(default)]
    sketch_path: Option<String>,
    #[serde(default)]
    rule_context: Vec<String>,
}

fn media_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

impl CrashReport {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if self.summary_text.trim().is_empty() {
            return Err(ExtractError::InvalidReport {
                case_id: self.case_id.clone(),
                reason: "summary_text is empty".into(),
            });
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ExtractError> {
        let io_err = |p: &Path| {
            let p = p.to_path_buf();
            move |source| ExtractError::Io { path: p, source }
        };
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let file: ReportFile = serde_json::from_str(&text).map_err(|e| ExtractError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let sketch = match file.sketch_path {
            Some(rel) => {
                let p = path.parent().unwrap_or(Path::new(".")).join(rel);
                Some(Sketch {
                    media_type: media_type(&p).to_string(),
                    bytes: fs::read(&p).map_err(io_err(&p))?,
                })
            }
            None => None,
        };
        let report = CrashReport {
            case_id: file.case_id,
            summary_text: file.summary_text,
            sketch,
            rule_context: file.rule_context,
        };
        report.validate()?;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_retries: usize,
    pub timeout_s: f64,
    /// Upper bound on concurrent endpoint requests in [`extract_batch`].
    pub max_in_flight: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 2,
            timeout_s: 60.0,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub spec: ScenarioSpec,
    /// Model calls in the extraction phase; retries = attempts - 1.
    pub extraction_attempts: usize,
    pub validation_attempts: usize,
    /// The validation pass never produced a valid document, so the draft
    /// was kept.
    pub validation_fallback: bool,
    /// Final document text as returned by the model.
    pub source: String,
}

impl Extraction {
    pub fn retries(&self) -> usize {
        self.extraction_attempts - 1
    }
}

/// Model replies often wrap the document in a fenced block.
pub fn strip_fences(reply: &str) -> &str {
    let t = reply.trim();
    let Some(start) = t.find("```") else {
        return t;
    };
    let body = &t[start + 3..];
    let body = body.split_once('\n').map_or("", |(_, rest)| rest);
    match body.rfind("```") {
        Some(end) => &body[..end],
        None => body,
    }
}

fn issue_feedback(issues: &[ValidationIssue]) -> String {
    let mut t = String::from(
        "The document is not valid under the DSL schema. Issues:",
    );
    for i in issues {
        t.push_str(&format!("\n- {} [{}] {}", i.path, i.kind, i.message));
        if let Some(a) = &i.allowed {
            t.push_str(&format!(" (allowed: {})", a.join(", ")));
        }
    }
    t.push_str("\nReply with the complete corrected document only.");
    t
}

struct Attempted {
    spec: Result<(ScenarioSpec, String), Vec<ValidationIssue>>,
    attempts: usize,
}

/// Calls the model until a reply parses and validates, at most
/// `max_retries + 1` times, feeding the issues back after each failure.
fn converse(
    case_id: &str,
    mut messages: Vec<ChatMessage>,
    max_retries: usize,
    transport: &dyn ChatTransport,
) -> Result<Attempted, ExtractError> {
    let mut last = Vec::new();
    for attempt in 1..=max_retries + 1 {
        let reply = transport
            .complete(case_id, &messages)
            .map_err(|source| ExtractError::Transport {
                case_id: case_id.to_string(),
                source,
            })?;
        let doc = strip_fences(&reply).to_string();
        match parse_and_validate(&doc) {
            Ok(spec) => {
                return Ok(Attempted {
                    spec: Ok((spec, doc)),
                    attempts: attempt,
                })
            }
            Err(issues) => {
                messages.push(ChatMessage::text(Role::Assistant, reply));
                messages.push(ChatMessage::text(Role::User, issue_feedback(&issues)));
                last = issues;
            }
        }
    }
    Ok(Attempted {
        spec: Err(last),
        attempts: max_retries + 1,
    })
}

pub fn extract_and_validate(
    report: &CrashReport,
    cfg: &ClientConfig,
    transport: &dyn ChatTransport,
) -> Result<Extraction, ExtractError> {
    report.validate()?;
    let id = &report.case_id;
    let first = converse(id, build_extraction_prompt(report).to_messages(), cfg.max_retries, transport)?;
    let (draft, draft_src) = first.spec.map_err(|issues| ExtractError::Exhausted {
        case_id: id.clone(),
        attempts: first.attempts,
        issues,
    })?;
    let second = converse(
        id,
        build_validation_prompt(&draft, report).to_messages(),
        cfg.max_retries,
        transport,
    )?;
    let (spec, source, fallback) = match second.spec {
        Ok((spec, src)) => (spec, src, false),
        Err(_) => (draft, draft_src, true),
    };
    Ok(Extraction {
        spec,
        extraction_attempts: first.attempts,
        validation_attempts: second.attempts,
        validation_fallback: fallback,
        source,
    })
}

/// Runs reports with at most `cfg.max_in_flight` concurrent requests;
/// results keep the input order.
pub fn extract_batch(
    reports: &[CrashReport],
    cfg: &ClientConfig,
    transport: &dyn ChatTransport,
) -> Vec<Result<Extraction, ExtractError>> {
    let workers = cfg.max_in_flight.clamp(1, reports.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Extraction, ExtractError>>>> =
        reports.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(r) = reports.get(i) else { break };
                let out = extract_and_validate(r, cfg, transport);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(sketch: bool) -> CrashReport {
        CrashReport {
            case_id: "c1".into(),
            summary_text: "V2 crossed the centre line in heavy rain.".into(),
            sketch: sketch.then(|| Sketch {
                media_type: "image/png".into(),
                bytes: vec![0x89, b'P', b'N', b'G'],
            }),
            rule_context: vec!["CVC 21461: obey lane markings.".into()],
        }
    }

    #[test]
    fn extraction_bundle_contract() {
        let b = build_extraction_prompt(&report(true));
        assert_eq!(b.image_count(), 1);
        assert!(b.exemplars.len() >= 2);
        for w in crate::dsl::Weather::tokens() {
            assert!(b.system_text.contains(&w), "{w}");
        }
        assert!(b.system_text.contains("number_of_ways"));
        assert_eq!(b, build_extraction_prompt(&report(true)));
        assert_eq!(build_extraction_prompt(&report(false)).image_count(), 0);
        let msgs = b.to_messages();
        assert_eq!(msgs.len(), 1 + 2 * b.exemplars.len() + 1);
    }

    #[test]
    fn exemplars_are_valid_documents() {
        for e in exemplars() {
            parse_and_validate(&e.dsl).unwrap();
        }
    }

    #[test]
    fn fences_are_stripped() {
        assert_eq!(strip_fences("```yaml\na: 1\n```\n"), "a: 1\n");
        assert_eq!(strip_fences("  a: 1  "), "a: 1");
        assert_eq!(strip_fences("Here:\n```\nb: 2\n```"), "b: 2\n");
    }

    #[test]
    fn empty_summary_rejected() {
        let mut r = report(false);
        r.summary_text = "  ".into();
        assert!(matches!(r.validate(), Err(ExtractError::InvalidReport { .. })));
    }
}
