use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::thread;

use serde_json::{json, Value};

use scriptevo::benchgen::{generate_benchmark, BenchmarkSet, GenOptions, TaskInstance, TaskKind};
use scriptevo::corpus::{synth_corpus, Corpus, ScriptStage, SynthConfig};
use scriptevo::harness::{eval_external, ExternalEndpoint};
use scriptevo::scorer::{parser_for, read_responses, score_responses, Answer, ParseStatus, ResponseLine};

/// Captures every log line so tests can check what was (not) written.
struct Capture;

static LINES: OnceLock<Mutex<Vec<String>>> = OnceLock::new();

impl log::Log for Capture {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }
    fn log(&self, rec: &log::Record) {
        LINES.get_or_init(Default::default).lock().unwrap().push(rec.args().to_string());
    }
    fn flush(&self) {}
}

fn init_log() {
    static ONCE: OnceLock<()> = OnceLock::new();
    ONCE.get_or_init(|| {
        log::set_boxed_logger(Box::new(Capture)).unwrap();
        log::set_max_level(log::LevelFilter::Trace);
    });
}

fn logged() -> Vec<String> {
    LINES.get_or_init(Default::default).lock().unwrap().clone()
}

struct Request {
    auth: Option<String>,
    body: Value,
}

type Handler = dyn Fn(usize, &Request) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server: one request per connection.
struct Mock {
    url: String,
    hits: Arc<AtomicUsize>,
    seen: Arc<Mutex<Vec<Request>>>,
}

fn serve(handler: Arc<Handler>) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let seen = Arc::new(Mutex::new(Vec::new()));
    let (h, s) = (hits.clone(), seen.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { return };
            let (handler, h, s) = (handler.clone(), h.clone(), s.clone());
            thread::spawn(move || handle(stream, &*handler, &h, &s));
        }
    });
    Mock { url, hits, seen }
}

fn handle(stream: TcpStream, handler: &Handler, hits: &AtomicUsize, seen: &Mutex<Vec<Request>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    let mut auth = None;
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
            break;
        }
        let (k, v) = line.trim_end().split_once(':').unwrap();
        match k.to_ascii_lowercase().as_str() {
            "content-length" => len = v.trim().parse().unwrap(),
            "authorization" => auth = Some(v.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    let req = Request {
        auth,
        body: serde_json::from_slice(&body).unwrap(),
    };
    let n = hits.fetch_add(1, Ordering::SeqCst);
    let (status, text) = handler(n, &req);
    seen.lock().unwrap().push(req);
    let reply = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
    let mut stream = stream;
    stream.write_all(reply.as_bytes()).unwrap();
}

fn chat(content: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn fixture(kind: TaskKind, n: usize) -> (Corpus, BenchmarkSet) {
    let corpus = synth_corpus(&SynthConfig::new(7, 12)).unwrap();
    let bench = generate_benchmark(&corpus, &BTreeMap::from([(kind, n)]), &GenOptions::new(3)).unwrap();
    (corpus, bench)
}

fn endpoint(url: &str) -> ExternalEndpoint {
    ExternalEndpoint {
        base_url: url.into(),
        model: "mock-model".into(),
        backoff_ms: 1,
        timeout_secs: 10.0,
        ..Default::default()
    }
}

#[test]
fn echoed_stage_name_parses_for_every_instance() {
    init_log();
    let (corpus, bench) = fixture(TaskKind::T1_1, 20);
    let mock = serve(Arc::new(|_, _| (200, chat("Regular Script"))));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("responses.jsonl");
    let summary = eval_external(&endpoint(&mock.url), &bench.instances, &corpus, &out).unwrap();
    assert_eq!((summary.requested, summary.attempts, summary.failed), (20, 20, 0));

    let lines = read_responses(&out).unwrap();
    assert_eq!(lines.len(), 20);
    let records = score_responses(&bench, &lines, &parser_for(&corpus)).unwrap();
    for r in &records {
        assert_eq!(r.parsed.status, ParseStatus::Parsed);
        assert_eq!(r.parsed.value, Some(Answer::Stage(ScriptStage::Regular)));
    }

    // wire format: model, one text part, one PNG data URL per image
    let seen = mock.seen.lock().unwrap();
    let body = &seen[0].body;
    assert_eq!(body["model"], "mock-model");
    let parts = body["messages"][0]["content"].as_array().unwrap();
    assert_eq!(parts[0]["type"], "text");
    assert_eq!(parts.len(), 2);
    let url = parts[1]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/png;base64,"));
    assert!(seen[0].auth.is_none());
}

#[test]
fn rate_limited_twice_then_answered() {
    init_log();
    let (corpus, bench) = fixture(TaskKind::T2_1, 10);
    let inst: Vec<TaskInstance> = bench.instances[..1].to_vec();
    let mock = serve(Arc::new(|n, _| if n < 2 { (429, "{}".into()) } else { (200, chat("一")) }));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let summary = eval_external(&endpoint(&mock.url), &inst, &corpus, &out).unwrap();
    assert_eq!(summary.attempts, 3);
    assert_eq!(summary.failed, 0);
    assert_eq!(mock.hits.load(Ordering::SeqCst), 3);
    let lines = read_responses(&out).unwrap();
    assert_eq!(lines, vec![ResponseLine { instance_id: inst[0].instance_id.clone(), raw_response: "一".into() }]);
    let id = &inst[0].instance_id;
    let attempts = logged().iter().filter(|l| l.starts_with(&format!("{id}: attempt"))).count();
    assert_eq!(attempts, 3);
}

#[test]
fn resume_sends_only_missing_instances() {
    init_log();
    let (corpus, bench) = fixture(TaskKind::T1_2, 100);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    // a run interrupted after 50 answers, in completion order
    let mut first: Vec<&TaskInstance> = bench.instances.iter().collect();
    first.reverse();
    let mut partial = String::new();
    for inst in &first[..50] {
        partial.push_str(&serde_json::to_string(&ResponseLine { instance_id: inst.instance_id.clone(), raw_response: "yes".into() }).unwrap());
        partial.push('\n');
    }
    std::fs::write(&out, partial).unwrap();

    let mock = serve(Arc::new(|_, _| (200, chat("no"))));
    let summary = eval_external(&endpoint(&mock.url), &bench.instances, &corpus, &out).unwrap();
    assert_eq!(mock.hits.load(Ordering::SeqCst), 50);
    assert_eq!((summary.skipped, summary.requested), (50, 50));

    let lines = read_responses(&out).unwrap();
    let ids: Vec<&str> = lines.iter().map(|l| l.instance_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(ids, sorted, "sorted, no duplicates");
    assert_eq!(lines.len(), 100);
    assert_eq!(lines.iter().filter(|l| l.raw_response == "yes").count(), 50);

    // a second resume has nothing left to send
    let again = eval_external(&endpoint(&mock.url), &bench.instances, &corpus, &out).unwrap();
    assert_eq!(again.requested, 0);
    assert_eq!(mock.hits.load(Ordering::SeqCst), 50);
}

#[test]
fn auth_failure_records_empty_response_and_hides_token() {
    init_log();
    let secret = "sk-test-4f1d9c7e-never-log-me";
    std::env::set_var("SCRIPTEVO_MOCK_TOKEN", secret);
    let (corpus, bench) = fixture(TaskKind::T1_1, 10);
    let expected = format!("Bearer {secret}");
    let mock = serve(Arc::new(move |_, r: &Request| {
        if r.auth.as_deref() == Some(expected.as_str()) {
            (401, r#"{"error": "bad key"}"#.into())
        } else {
            (500, "{}".into())
        }
    }));
    let mut ep = endpoint(&mock.url);
    ep.token_env = Some("SCRIPTEVO_MOCK_TOKEN".into());
    ep.concurrency = 3;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let summary = eval_external(&ep, &bench.instances, &corpus, &out).unwrap();
    assert_eq!(summary.failed, 10);
    assert_eq!(mock.hits.load(Ordering::SeqCst), 10, "401 is not retried");
    let lines = read_responses(&out).unwrap();
    assert!(lines.iter().all(|l| l.raw_response.is_empty()));
    let records = score_responses(&bench, &lines, &parser_for(&corpus)).unwrap();
    assert!(records.iter().all(|r| r.score == 0.0));
    assert!(logged().iter().all(|l| !l.contains(secret)));
    assert!(!format!("{ep:?}").contains(secret));
}

#[test]
fn persistent_server_errors_give_up_after_retries() {
    init_log();
    let (corpus, bench) = fixture(TaskKind::T1_1, 10);
    let mock = serve(Arc::new(|_, _| (503, "{}".into())));
    let mut ep = endpoint(&mock.url);
    ep.max_retries = 2;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let summary = eval_external(&ep, &bench.instances[..2], &corpus, &out).unwrap();
    assert_eq!((summary.attempts, summary.failed), (6, 2));
    assert_eq!(read_responses(&out).unwrap().len(), 2);
}

#[test]
fn missing_token_variable_fails_before_any_request() {
    let (corpus, bench) = fixture(TaskKind::T1_1, 10);
    let mock = serve(Arc::new(|_, _| (200, chat("Seal"))));
    let mut ep = endpoint(&mock.url);
    ep.token_env = Some("SCRIPTEVO_DEFINITELY_UNSET".into());
    let dir = tempfile::tempdir().unwrap();
    let err = eval_external(&ep, &bench.instances, &corpus, &dir.path().join("r.jsonl")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert_eq!(mock.hits.load(Ordering::SeqCst), 0);
}
