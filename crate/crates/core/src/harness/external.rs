//! OpenAI-compatible chat client for evaluating external models.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::thread;
use std::time::Duration;

use base64::Engine;
use crossbeam_channel::unbounded;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::benchgen::TaskInstance;
use crate::corpus::{Corpus, GlyphBitmap};
use crate::error::{Error, Result};
use crate::scorer::{read_responses, write_responses, ResponseLine};

/// Where and how to reach an external model. The bearer token itself is
/// never stored here, only the name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalEndpoint {
    /// Either the API root (`/chat/completions` is appended) or the full
    /// completions URL.
    pub base_url: String,
    pub model: String,
    pub token_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub concurrency: usize,
    /// First retry delay; doubled on each further attempt.
    pub backoff_ms: u64,
}

impl Default for ExternalEndpoint {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: String::new(),
            token_env: None,
            timeout_secs: 60.0,
            max_retries: 5,
            concurrency: 4,
            backoff_ms: 500,
        }
    }
}

impl ExternalEndpoint {
    pub fn url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    fn token(&self) -> Result<Option<String>> {
        match &self.token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::Remote(format!("environment variable {var} is not set"))),
        }
    }
}

/// Counters from one `eval_external` call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExternalSummary {
    /// Instances already present in the output file.
    pub skipped: usize,
    /// Instances sent in this call.
    pub requested: usize,
    /// HTTP attempts across all instances, retries included.
    pub attempts: usize,
    /// Instances recorded with an empty response after an error.
    pub failed: usize,
}

/// 8-bit grayscale PNG of a bitmap at native size, ink black on white.
pub fn bitmap_png(bitmap: &GlyphBitmap) -> Result<Vec<u8>> {
    let data: Vec<u8> = bitmap.pixels().iter().map(|&p| if p != 0 { 0 } else { 255 }).collect();
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, bitmap.width() as u32, bitmap.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| Error::Format(format!("png encoding: {e}"));
        let mut w = enc.write_header().map_err(png_err)?;
        w.write_image_data(&data).map_err(png_err)?;
    }
    Ok(buf)
}

/// Chat-completions request body: the instruction, then one image part per
/// glyph in presentation order.
pub fn request_body(model: &str, inst: &TaskInstance, corpus: &Corpus) -> Result<Value> {
    let mut content = vec![json!({"type": "text", "text": inst.instruction})];
    for r in &inst.image_refs {
        let png = bitmap_png(corpus.resolve(r)?)?;
        let b64 = base64::engine::general_purpose::STANDARD.encode(png);
        content.push(json!({
            "type": "image_url",
            "image_url": {"url": format!("data:image/png;base64,{b64}")}
        }));
    }
    Ok(json!({
        "model": model,
        "messages": [{"role": "user", "content": content}],
        "temperature": 0,
    }))
}

/// Text of the first choice; content given as a list of parts is joined.
fn reply_text(v: &Value) -> String {
    match &v["choices"][0]["message"]["content"] {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(""),
        _ => String::new(),
    }
}

struct Outcome {
    line: ResponseLine,
    attempts: usize,
    failed: bool,
}

fn retryable(status: u16) -> bool {
    status == 429 || status >= 500
}

fn send_one(
    agent: &ureq::Agent,
    ep: &ExternalEndpoint,
    token: Option<&str>,
    id: &str,
    body: &Value,
) -> (String, usize, bool) {
    let url = ep.url();
    let mut attempt = 0;
    loop {
        attempt += 1;
        let mut req = agent.post(&url);
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let retry = match req.send_json(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                log::info!("{id}: attempt {attempt} status {status}");
                if (200..300).contains(&status) {
                    return match resp.body_mut().read_json::<Value>() {
                        Ok(v) => (reply_text(&v), attempt, false),
                        Err(e) => {
                            log::warn!("{id}: unreadable reply body: {e}");
                            (String::new(), attempt, true)
                        }
                    };
                }
                if !retryable(status) {
                    log::warn!("{id}: giving up on status {status}");
                    return (String::new(), attempt, true);
                }
                true
            }
            Err(e) => {
                log::info!("{id}: attempt {attempt} transport error: {e}");
                true
            }
        };
        if !retry || attempt > ep.max_retries as usize {
            log::warn!("{id}: no answer after {attempt} attempts");
            return (String::new(), attempt, true);
        }
        let delay = ep.backoff_ms.saturating_mul(1u64 << (attempt - 1).min(16));
        thread::sleep(Duration::from_millis(delay));
    }
}

/// Queries the endpoint for every instance not yet answered in `out`,
/// appending lines as they complete, then rewrites `out` sorted by id with
/// one line per instance. HTTP and auth failures become empty responses.
pub fn eval_external(
    ep: &ExternalEndpoint,
    instances: &[TaskInstance],
    corpus: &Corpus,
    out: &Path,
) -> Result<ExternalSummary> {
    if ep.concurrency == 0 {
        return Err(Error::Config("concurrency must be at least 1".into()));
    }
    let token = ep.token()?;
    let done: BTreeSet<String> = if out.exists() {
        read_responses(out)?.into_iter().map(|l| l.instance_id).collect()
    } else {
        BTreeSet::new()
    };
    let mut summary = ExternalSummary::default();
    let mut jobs = Vec::new();
    let mut seen = BTreeSet::new();
    for inst in instances {
        if done.contains(&inst.instance_id) || !seen.insert(inst.instance_id.clone()) {
            summary.skipped += done.contains(&inst.instance_id) as usize;
            continue;
        }
        jobs.push((inst.instance_id.clone(), request_body(&ep.model, inst, corpus)?));
    }
    summary.requested = jobs.len();

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(ep.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| Error::io(out, e))?;
    let mut writer = BufWriter::new(file);

    let (job_tx, job_rx) = unbounded::<(String, Value)>();
    let (res_tx, res_rx) = unbounded::<Outcome>();
    for job in jobs {
        job_tx.send(job).expect("receiver alive");
    }
    drop(job_tx);
    thread::scope(|s| -> Result<()> {
        for _ in 0..ep.concurrency {
            let (job_rx, res_tx) = (job_rx.clone(), res_tx.clone());
            let (agent, token) = (&agent, token.as_deref());
            s.spawn(move || {
                for (id, body) in job_rx {
                    let (text, attempts, failed) = send_one(agent, ep, token, &id, &body);
                    let line = ResponseLine {
                        instance_id: id,
                        raw_response: text,
                    };
                    if res_tx.send(Outcome { line, attempts, failed }).is_err() {
                        return;
                    }
                }
            });
        }
        drop(res_tx);
        // single writer: lines land on disk as they complete
        for o in res_rx {
            summary.attempts += o.attempts;
            summary.failed += o.failed as usize;
            serde_json::to_writer(&mut writer, &o.line)?;
            writer.write_all(b"\n").map_err(|e| Error::io(out, e))?;
            writer.flush().map_err(|e| Error::io(out, e))?;
        }
        Ok(())
    })?;
    drop(writer);

    // finalize: one line per id, sorted
    let mut by_id: BTreeMap<String, ResponseLine> = BTreeMap::new();
    for l in read_responses(out)? {
        by_id.entry(l.instance_id.clone()).or_insert(l);
    }
    let lines: Vec<ResponseLine> = by_id.into_values().collect();
    write_responses(out, &lines)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_appends_completions_path_once() {
        let mut ep = ExternalEndpoint {
            base_url: "http://h/v1/".into(),
            ..Default::default()
        };
        assert_eq!(ep.url(), "http://h/v1/chat/completions");
        ep.base_url = "http://h/v1/chat/completions".into();
        assert_eq!(ep.url(), "http://h/v1/chat/completions");
    }

    #[test]
    fn png_decodes_to_the_bitmap() {
        let mut b = GlyphBitmap::blank(5, 3);
        b.set(1, 2, 1);
        let bytes = bitmap_png(&b).unwrap();
        let dec = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut r = dec.read_info().unwrap();
        let mut buf = vec![0; r.output_buffer_size().unwrap()];
        let info = r.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (5, 3));
        assert_eq!(buf[2 * 5 + 1], 0);
        assert_eq!(buf.iter().filter(|&&p| p == 255).count(), 14);
    }

    #[test]
    fn reply_text_accepts_part_lists() {
        let v = json!({"choices": [{"message": {"content": [{"type": "text", "text": "Seal"}, {"text": " Script"}]}}]});
        assert_eq!(reply_text(&v), "Seal Script");
        assert_eq!(reply_text(&json!({})), "");
    }

    #[test]
    fn missing_token_variable_is_named_not_leaked() {
        let ep = ExternalEndpoint {
            token_env: Some("SCRIPTEVO_TEST_UNSET_TOKEN".into()),
            ..Default::default()
        };
        let e = ep.token().unwrap_err().to_string();
        assert!(e.contains("SCRIPTEVO_TEST_UNSET_TOKEN"));
    }
}
