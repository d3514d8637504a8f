//! Command-line front end. Every subcommand writes its outputs plus a
//! `run_manifest.json` into `--out`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::benchgen::{generate_benchmark, split_benchmark, BenchmarkSet, GenOptions, Split, TaskKind, TemplateConfig};
use crate::corpus::{corpus_stats, load_corpus, manifest_path_for, save_corpus, synth_corpus, Corpus, GlyphRef, SynthConfig};
use crate::curriculum::{run_curriculum, CurriculumConfig, ModelBundle, Variant};
use crate::embed::{build_index, EncoderParams};
use crate::error::{Error, Result};
use crate::harness::{answer_all, eval_external, ExternalEndpoint};
use crate::project::{project_glyphs, projection_csv};
use crate::scorer::{aggregate, compare_reports, parser_for, read_responses, score_responses, write_responses, Report};
use crate::seed::scoped;

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "scriptevo", version, about = "Script-evolution corpus, benchmark and curriculum toolkit")]
pub struct Cli {
    /// Log filter, e.g. `info` or `scriptevo=debug`.
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic staged corpus.
    Synth(SynthArgs),
    /// Validate a manifest of external glyphs and store the accepted ones.
    Ingest(IngestArgs),
    /// Generate and split a benchmark from a corpus.
    Gen(GenArgs),
    /// Re-split an existing benchmark.
    Split(SplitArgs),
    /// Train one curriculum variant.
    Train(TrainArgs),
    /// Answer benchmark instances with a trained bundle.
    Answer(AnswerArgs),
    /// Query an OpenAI-compatible chat endpoint; resumable.
    EvalExternal(ExternalArgs),
    /// Score a responses file.
    Score(ScoreArgs),
    /// Compare reports with paired signed-rank tests.
    Report(ReportArgs),
    /// 2D PCA of glyph embeddings.
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub chars: usize,
    /// Inclusive range, e.g. `2..3`.
    #[arg(long, default_value = "2..2")]
    pub variants: String,
    /// Five presence probabilities, oracle bone first.
    #[arg(long, value_delimiter = ',', num_args = 5)]
    pub presence: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// `all=300`, `T1.1=100,T2.1=50`, or a file holding either form.
    #[arg(long, default_value = "all=300")]
    pub counts: String,
    /// TOML with a `[templates]` table keyed by task id.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Draw T2.4/T3.3 distractors from the most similar glyphs.
    #[arg(long)]
    pub similar_distractors: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long, default_value = "Full")]
    pub variant: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSel {
    Test,
    Train,
    All,
}

impl SplitSel {
    fn select<'a>(self, bench: &'a BenchmarkSet) -> Vec<&'a crate::benchgen::TaskInstance> {
        bench
            .instances
            .iter()
            .filter(|i| match self {
                SplitSel::All => true,
                SplitSel::Test => i.split == Split::Test,
                SplitSel::Train => i.split == Split::Train,
            })
            .collect()
    }
}

#[derive(Debug, Args)]
pub struct AnswerArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitSel,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExternalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub base_url: String,
    #[arg(long)]
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[arg(long)]
    pub token_env: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 5)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 60.0)]
    pub timeout_secs: f64,
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitSel,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `name=path/to/report.json`, or a path whose parent directory names it.
    #[arg(long = "report", required = true)]
    pub reports: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Project every glyph of these characters.
    #[arg(long, value_delimiter = ',')]
    pub chars: Vec<String>,
    /// JSONL of `{char_id, stage, variant}` refs, projected in file order.
    #[arg(long)]
    pub glyphs: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Written next to every output so a run can be repeated exactly.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub corpus_fingerprint: Option<String>,
    pub tool_version: String,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            config: Value::Null,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            corpus_fingerprint: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.into(), path.display().to_string());
        self
    }

    fn write(mut self, dir: &Path) -> Result<()> {
        self.outputs.sort();
        let path = dir.join(MANIFEST_NAME);
        let mut body = serde_json::to_string_pretty(&self)?;
        body.push('\n');
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let (corpus, report) = load_corpus(&manifest_path_for(path))?;
    for r in &report.rejected {
        log::warn!("rejected glyph {}: {}", r.glyph, r.reason);
    }
    Ok(corpus)
}

/// `lo..hi` or a single number.
fn parse_range(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Config(format!("bad variant range {s:?}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    Ok((lo, hi))
}

/// Per-kind counts from `all=N`, `T1.1=N,...` (later entries win), or a
/// file containing either form on one or more lines.
pub fn parse_counts(spec: &str) -> Result<BTreeMap<TaskKind, usize>> {
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?
    } else {
        spec.to_string()
    };
    let mut out = BTreeMap::new();
    for item in text.split([',', '\n']).map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("count {item:?} is not key=value")))?;
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("count {item:?} is not a number")))?;
        if k.trim().eq_ignore_ascii_case("all") {
            for kind in TaskKind::ALL {
                out.insert(kind, n);
            }
        } else {
            out.insert(k.parse::<TaskKind>().map_err(|e| Error::Config(e.to_string()))?, n);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no task counts given".into()));
    }
    Ok(out)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let seed = scoped(a.seed, "synth");
    let mut cfg = SynthConfig::new(seed, a.chars);
    cfg.variants_per_stage = parse_range(&a.variants)?;
    if let Some(p) = &a.presence {
        cfg.stage_presence_prob = p.as_slice().try_into().map_err(|_| Error::Config("need 5 presence probabilities".into()))?;
    }
    let corpus = synth_corpus(&cfg)?;
    ensure_dir(&a.out)?;
    save_corpus(&corpus, &a.out)?;
    let stats = corpus_stats(&corpus);
    write_file(&a.out.join("stats.json"), &serde_json::to_string_pretty(&stats)?)?;
    log::info!("synthesized {} characters, {} glyphs", stats.characters, stats.total_glyphs);
    let mut m = RunManifest::new("synth");
    m.config = serde_json::to_value(&cfg)?;
    m.seeds = BTreeMap::from([("seed".into(), a.seed), ("synth".into(), seed)]);
    m.outputs = vec!["manifest.jsonl".into(), "corpus.json".into(), "glyphs/".into(), "stats.json".into()];
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let (corpus, report) = load_corpus(&manifest_path_for(&a.manifest))?;
    ensure_dir(&a.out)?;
    save_corpus(&corpus, &a.out)?;
    write_file(&a.out.join("load_report.json"), &serde_json::to_string_pretty(&report)?)?;
    write_file(&a.out.join("stats.json"), &serde_json::to_string_pretty(&corpus_stats(&corpus))?)?;
    log::info!("accepted {} glyphs, rejected {}", report.accepted, report.rejected.len());
    let mut m = RunManifest::new("ingest").input("manifest", &a.manifest);
    m.outputs = vec!["manifest.jsonl".into(), "corpus.json".into(), "glyphs/".into(), "load_report.json".into(), "stats.json".into()];
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let counts = parse_counts(&a.counts)?;
    let seed = scoped(a.seed, "gen");
    let index_seed = scoped(a.seed, "gen-index");
    let index = if a.similar_distractors {
        Some(build_index(&corpus, &EncoderParams::init(index_seed))?)
    } else {
        None
    };
    let mut opts = GenOptions::new(seed);
    opts.similarity = index.as_ref();
    if let Some(t) = &a.templates {
        opts.templates = TemplateConfig::from_toml_file(t)?;
    }
    let bench = generate_benchmark(&corpus, &counts, &opts)?;
    ensure_dir(&a.out)?;
    bench.write_jsonl(&a.out.join("benchmark.jsonl"))?;
    log::info!("generated {} instances", bench.instances.len());
    let mut m = RunManifest::new("gen").input("corpus", &a.corpus);
    m.config = json!({
        "counts": counts.iter().map(|(k, v)| (k.id().to_string(), *v)).collect::<BTreeMap<_, _>>(),
        "templates": opts.templates.templates,
        "similar_distractors": a.similar_distractors,
    });
    m.seeds = BTreeMap::from([("seed".into(), a.seed), ("gen".into(), seed)]);
    if a.similar_distractors {
        m.seeds.insert("gen-index".into(), index_seed);
    }
    m.outputs = vec!["benchmark.jsonl".into()];
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    let bench = BenchmarkSet::read_jsonl(&a.bench)?;
    let fp = bench.corpus_fingerprint.clone();
    let seed = scoped(a.seed, "split");
    let mut out = split_benchmark(bench.instances, seed);
    out.corpus_fingerprint = fp.clone();
    ensure_dir(&a.out)?;
    out.write_jsonl(&a.out.join("benchmark.jsonl"))?;
    let mut m = RunManifest::new("split").input("bench", &a.bench);
    m.seeds = BTreeMap::from([("seed".into(), a.seed), ("split".into(), seed)]);
    m.outputs = vec!["benchmark.jsonl".into()];
    m.corpus_fingerprint = fp;
    m.write(&a.out)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let bench = BenchmarkSet::read_jsonl(&a.bench)?;
    let variant: Variant = a.variant.parse()?;
    let cfg = match &a.config {
        Some(p) => CurriculumConfig::from_toml_file(p)?,
        None => CurriculumConfig::default(),
    };
    let seed = scoped(a.seed, "train");
    let run = run_curriculum(&corpus, &bench, variant, &cfg, seed)?;
    ensure_dir(&a.out)?;
    run.bundle.save(&a.out.join("bundle.sevo"))?;
    run.write_logs(&a.out)?;
    log::info!("trained {} ({})", variant.label(), run.bundle.hash()?);
    let mut m = RunManifest::new("train").input("corpus", &a.corpus).input("bench", &a.bench);
    m.config = json!({"variant": variant.name(), "curriculum": cfg});
    m.seeds = BTreeMap::from([("seed".into(), a.seed), ("train".into(), seed)]);
    m.outputs = vec!["bundle.sevo".into(), "stage3_fit.csv".into()];
    if !run.stage1.is_empty() {
        m.outputs.push("stage1_loss.csv".into());
    }
    if !run.stage2.is_empty() {
        m.outputs.push("stage2_loss.csv".into());
    }
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

fn check_fingerprint(bundle: &ModelBundle, corpus: &Corpus) {
    if bundle.provenance.corpus_fingerprint.as_deref() != Some(corpus.fingerprint().as_str()) {
        log::warn!("bundle was trained on a different corpus; evaluating out of distribution");
    }
}

fn cmd_answer(a: &AnswerArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let bench = BenchmarkSet::read_jsonl(&a.bench)?;
    let bundle = ModelBundle::load(&a.bundle)?;
    check_fingerprint(&bundle, &corpus);
    let lines = answer_all(&bundle, a.split.select(&bench), &corpus)?;
    ensure_dir(&a.out)?;
    write_responses(&a.out.join("responses.jsonl"), &lines)?;
    log::info!("answered {} instances", lines.len());
    let mut m = RunManifest::new("answer")
        .input("bundle", &a.bundle)
        .input("corpus", &a.corpus)
        .input("bench", &a.bench);
    m.config = json!({"split": a.split, "bundle_hash": bundle.hash()?});
    m.outputs = vec!["responses.jsonl".into()];
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

fn cmd_external(a: &ExternalArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let bench = BenchmarkSet::read_jsonl(&a.bench)?;
    let ep = ExternalEndpoint {
        base_url: a.base_url.clone(),
        model: a.model.clone(),
        token_env: a.token_env.clone(),
        timeout_secs: a.timeout_secs,
        max_retries: a.max_retries,
        concurrency: a.concurrency,
        backoff_ms: a.backoff_ms,
    };
    let instances: Vec<_> = a.split.select(&bench).into_iter().cloned().collect();
    ensure_dir(&a.out)?;
    let summary = eval_external(&ep, &instances, &corpus, &a.out.join("responses.jsonl"))?;
    log::info!(
        "external: {} requested, {} skipped, {} attempts, {} failed",
        summary.requested, summary.skipped, summary.attempts, summary.failed
    );
    let mut m = RunManifest::new("eval-external").input("corpus", &a.corpus).input("bench", &a.bench);
    m.config = json!({"endpoint": ep, "split": a.split});
    m.outputs = vec!["responses.jsonl".into()];
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let bench = BenchmarkSet::read_jsonl(&a.bench)?;
    let responses = read_responses(&a.responses)?;
    let records = score_responses(&bench, &responses, &parser_for(&corpus))?;
    let report = aggregate(&records, &bench)?;
    report.write_dir(&a.out)?;
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r)?);
        body.push('\n');
    }
    write_file(&a.out.join("records.jsonl"), &body)?;
    log::info!("overall accuracy {:.4}", report.overall);
    let mut m = RunManifest::new("score")
        .input("corpus", &a.corpus)
        .input("bench", &a.bench)
        .input("responses", &a.responses);
    m.outputs = ["report.json", "per_task.csv", "per_stage.csv", "confusion_T1.1.csv", "records.jsonl"]
        .map(String::from)
        .to_vec();
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

fn report_name(spec: &str) -> (String, PathBuf) {
    if let Some((name, path)) = spec.split_once('=') {
        return (name.to_string(), PathBuf::from(path));
    }
    let path = PathBuf::from(spec);
    let name = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    (name, path)
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut named = Vec::new();
    let mut m = RunManifest::new("report");
    for spec in &a.reports {
        let (name, path) = report_name(spec);
        let path = if path.is_dir() { path.join("report.json") } else { path };
        m = m.input(&name, &path);
        named.push((name, Report::from_json_file(&path)?));
    }
    let cmp = compare_reports(&named)?;
    ensure_dir(&a.out)?;
    write_file(&a.out.join("comparison.csv"), &cmp.table_csv())?;
    write_file(&a.out.join("wilcoxon.csv"), &cmp.pairs_csv())?;
    m.outputs = vec!["comparison.csv".into(), "wilcoxon.csv".into()];
    m.write(&a.out)
}

fn cmd_project(a: &ProjectArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let bundle = ModelBundle::load(&a.bundle)?;
    let mut refs: Vec<GlyphRef> = Vec::new();
    for c in &a.chars {
        let e = corpus
            .entry(c)
            .ok_or_else(|| Error::Config(format!("character {c} is not in the corpus")))?;
        refs.extend(e.refs());
    }
    if let Some(p) = &a.glyphs {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            refs.push(serde_json::from_str(line).map_err(|e| Error::Manifest {
                path: p.clone(),
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
    }
    let points = project_glyphs(&bundle.encoder, &corpus, &refs)?;
    ensure_dir(&a.out)?;
    write_file(&a.out.join("projection.csv"), &projection_csv(&points))?;
    let mut m = RunManifest::new("project").input("bundle", &a.bundle).input("corpus", &a.corpus);
    if let Some(p) = &a.glyphs {
        m = m.input("glyphs", p);
    }
    m.config = json!({"chars": a.chars, "bundle_hash": bundle.hash()?});
    m.outputs = vec!["projection.csv".into()];
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.write(&a.out)
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Answer(a) => cmd_answer(a),
        Command::EvalExternal(a) => cmd_external(a),
        Command::Score(a) => cmd_score(a),
        Command::Report(a) => cmd_report(a),
        Command::Project(a) => cmd_project(a),
    }
}

/// One JSON object per log line on stderr.
fn init_logging(filter: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(filter)
        .format(|buf, rec| {
            let line = json!({
                "level": rec.level().as_str(),
                "target": rec.target(),
                "msg": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .try_init();
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(&cli.log);
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_forms() {
        let all = parse_counts("all=300").unwrap();
        assert_eq!(all.len(), 11);
        assert!(all.values().all(|&n| n == 300));
        let some = parse_counts("all=10,T2.1=50").unwrap();
        assert_eq!(some[&TaskKind::T2_1], 50);
        assert_eq!(some[&TaskKind::T1_1], 10);
        assert!(parse_counts("T9.9=3").is_err());
        assert!(parse_counts("T1.1").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..3").unwrap(), (2, 3));
        assert_eq!(parse_range("4").unwrap(), (4, 4));
        assert!(parse_range("a..b").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["scriptevo", "bogus"]), 1);
        assert_eq!(run(["scriptevo", "synth", "--chars", "3"]), 1);
    }

    #[test]
    fn report_names() {
        assert_eq!(report_name("full=a/b.json").0, "full");
        assert_eq!(report_name("runs/s1/report.json").0, "s1");
    }
}
