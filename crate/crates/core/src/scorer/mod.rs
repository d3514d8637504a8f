//! Response parsing, per-instance scoring and report aggregation.

mod parse;
mod wilcoxon;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchgen::{AnswerKey, BenchmarkSet, TaskInstance, TaskKind};
use crate::corpus::{Corpus, ScriptStage};
use crate::error::{Error, Result};

pub use parse::{Answer, ParseStatus, ParsedAnswer, ResponseParser};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

/// One line of a responses file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseLine {
    pub instance_id: String,
    pub raw_response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance_id: String,
    pub kind: TaskKind,
    pub raw_response: String,
    pub parsed: ParsedAnswer,
    pub score: f64,
    pub stage_tags: Vec<ScriptStage>,
}

/// A parser whose recognition vocabulary is every corpus character.
pub fn parser_for(corpus: &Corpus) -> ResponseParser {
    ResponseParser::new(corpus.char_ids())
}

/// 1 or 0 by canonical equality; T3.2 scores the fraction of positions
/// whose predicted stage matches, aligned from the left.
pub fn score_instance(instance: &TaskInstance, parsed: &ParsedAnswer) -> f64 {
    let Some(value) = parsed.value.as_ref().filter(|_| parsed.status == ParseStatus::Parsed)
    else {
        return 0.0;
    };
    let hit = match (&instance.answer_key, value) {
        (AnswerKey::Sequence(key), Answer::Sequence(pred)) => {
            if key.is_empty() {
                return 0.0;
            }
            let correct = key.iter().zip(pred).filter(|(k, p)| k == p).count();
            return correct as f64 / key.len() as f64;
        }
        (AnswerKey::Text(key), Answer::Stage(s)) => key.parse::<ScriptStage>().ok() == Some(*s),
        (AnswerKey::Text(key), Answer::Character(c)) => key == c,
        (AnswerKey::Text(key), Answer::Binary(b)) => key == if *b { "yes" } else { "no" },
        (AnswerKey::Text(key), Answer::Option(l)) => key == l,
        _ => false,
    };
    if hit {
        1.0
    } else {
        0.0
    }
}

/// Parses and scores every response. Ids missing from the benchmark are
/// rejected together.
pub fn score_responses(
    bench: &BenchmarkSet,
    responses: &[ResponseLine],
    parser: &ResponseParser,
) -> Result<Vec<EvalRecord>> {
    let unknown: Vec<String> = responses
        .iter()
        .filter(|r| bench.get(&r.instance_id).is_none())
        .map(|r| r.instance_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownInstances(unknown));
    }
    let mut records: Vec<EvalRecord> = responses
        .iter()
        .map(|r| {
            let inst = bench.get(&r.instance_id).expect("checked above");
            let parsed = parser.parse(inst.kind, &r.raw_response);
            EvalRecord {
                instance_id: r.instance_id.clone(),
                kind: inst.kind,
                raw_response: r.raw_response.clone(),
                score: score_instance(inst, &parsed),
                parsed,
                stage_tags: inst.image_refs.iter().map(|g| g.stage).collect(),
            }
        })
        .collect();
    records.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok(records)
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseLine>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes responses sorted by id.
pub fn write_responses(path: &Path, responses: &[ResponseLine]) -> Result<()> {
    let mut sorted: Vec<&ResponseLine> = responses.iter().collect();
    sorted.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let mut out = String::new();
    for r in sorted {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub n: usize,
    pub accuracy: f64,
    pub parsed: usize,
    pub multi_candidate_failure: usize,
    pub unparseable: usize,
}

/// Confusion column for responses with no single parsed stage.
pub const NO_ANSWER: &str = "no_answer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub per_task: BTreeMap<TaskKind, TaskScore>,
    /// Unweighted mean of the per-task accuracies.
    pub overall: f64,
    /// Accuracy by the stage of the shown glyph, for T1.1 and T2.1.
    pub per_stage: BTreeMap<TaskKind, BTreeMap<ScriptStage, TaskScore>>,
    /// T1.1 style confusion: true stage -> predicted stage or `no_answer`.
    pub style_confusion: BTreeMap<ScriptStage, BTreeMap<String, usize>>,
}

#[derive(Default)]
struct Tally {
    n: usize,
    sum: f64,
    parsed: usize,
    multi: usize,
    unparseable: usize,
}

impl Tally {
    fn add(&mut self, r: &EvalRecord) {
        self.n += 1;
        self.sum += r.score;
        match r.parsed.status {
            ParseStatus::Parsed => self.parsed += 1,
            ParseStatus::MultiCandidateFailure => self.multi += 1,
            ParseStatus::Unparseable => self.unparseable += 1,
        }
    }

    fn finish(&self) -> TaskScore {
        TaskScore {
            n: self.n,
            accuracy: if self.n == 0 { 0.0 } else { self.sum / self.n as f64 },
            parsed: self.parsed,
            multi_candidate_failure: self.multi,
            unparseable: self.unparseable,
        }
    }
}

pub fn aggregate(records: &[EvalRecord], bench: &BenchmarkSet) -> Result<Report> {
    let unknown: Vec<String> = records
        .iter()
        .filter(|r| bench.get(&r.instance_id).is_none())
        .map(|r| r.instance_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownInstances(unknown));
    }

    let mut tasks: BTreeMap<TaskKind, Tally> = BTreeMap::new();
    let mut stages: BTreeMap<TaskKind, BTreeMap<ScriptStage, Tally>> = BTreeMap::new();
    let mut confusion: BTreeMap<ScriptStage, BTreeMap<String, usize>> = ScriptStage::ALL
        .iter()
        .map(|s| {
            let mut row: BTreeMap<String, usize> = ScriptStage::ALL
                .iter()
                .map(|p| (p.name().to_string(), 0))
                .collect();
            row.insert(NO_ANSWER.to_string(), 0);
            (*s, row)
        })
        .collect();

    for r in records {
        tasks.entry(r.kind).or_default().add(r);
        if matches!(r.kind, TaskKind::T1_1 | TaskKind::T2_1) {
            if let Some(&s) = r.stage_tags.first() {
                stages.entry(r.kind).or_default().entry(s).or_default().add(r);
            }
        }
        if r.kind == TaskKind::T1_1 {
            let truth = r.stage_tags[0];
            let col = match (&r.parsed.status, &r.parsed.value) {
                (ParseStatus::Parsed, Some(Answer::Stage(p))) => p.name().to_string(),
                _ => NO_ANSWER.to_string(),
            };
            *confusion
                .get_mut(&truth)
                .expect("all stages present")
                .entry(col)
                .or_default() += 1;
        }
    }

    let per_task: BTreeMap<TaskKind, TaskScore> =
        tasks.iter().map(|(k, t)| (*k, t.finish())).collect();
    let overall = if per_task.is_empty() {
        0.0
    } else {
        per_task.values().map(|t| t.accuracy).sum::<f64>() / per_task.len() as f64
    };
    let per_stage = stages
        .iter()
        .map(|(k, m)| (*k, m.iter().map(|(s, t)| (*s, t.finish())).collect()))
        .collect();
    Ok(Report {
        per_task,
        overall,
        per_stage,
        style_confusion: confusion,
    })
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn per_task_csv(&self) -> String {
        let mut out =
            String::from("task,n,accuracy,parsed,multi_candidate_failure,unparseable\n");
        for (k, t) in &self.per_task {
            out.push_str(&format!(
                "{k},{},{:.6},{},{},{}\n",
                t.n, t.accuracy, t.parsed, t.multi_candidate_failure, t.unparseable
            ));
        }
        out.push_str(&format!("overall,,{:.6},,,\n", self.overall));
        out
    }

    pub fn per_stage_csv(&self) -> String {
        let mut out = String::from("task,stage,n,accuracy\n");
        for (k, m) in &self.per_stage {
            for (s, t) in m {
                out.push_str(&format!("{k},{},{},{:.6}\n", s.name(), t.n, t.accuracy));
            }
        }
        out
    }

    pub fn confusion_csv(&self) -> String {
        let mut cols: Vec<String> = ScriptStage::ALL.iter().map(|s| s.name().to_string()).collect();
        cols.push(NO_ANSWER.to_string());
        let mut out = format!("true\\predicted,{}\n", cols.join(","));
        for (s, row) in &self.style_confusion {
            let cells: Vec<String> = cols
                .iter()
                .map(|c| row.get(c).copied().unwrap_or(0).to_string())
                .collect();
            out.push_str(&format!("{},{}\n", s.name(), cells.join(",")));
        }
        out
    }

    /// `report.json`, `per_task.csv`, `per_stage.csv`, `confusion_T1.1.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("report.json", self.to_json()?),
            ("per_task.csv", self.per_task_csv()),
            ("per_stage.csv", self.per_stage_csv()),
            ("confusion_T1.1.csv", self.confusion_csv()),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            let mut f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            f.write_all(body.as_bytes()).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Side-by-side comparison of reports that cover the same tasks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub names: Vec<String>,
    pub tasks: Vec<TaskKind>,
    /// `accuracy[i][t]` of report `i` on task `t`.
    pub accuracy: Vec<Vec<f64>>,
    pub pairs: Vec<PairTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    pub test: WilcoxonResult,
}

pub fn compare_reports(named: &[(String, Report)]) -> Result<Comparison> {
    if named.len() < 2 {
        return Err(Error::Config("need at least two reports to compare".into()));
    }
    let tasks: BTreeSet<TaskKind> = named[0].1.per_task.keys().copied().collect();
    for (name, r) in &named[1..] {
        let other: BTreeSet<TaskKind> = r.per_task.keys().copied().collect();
        if other != tasks {
            return Err(Error::Config(format!(
                "report {name} covers a different task set than {}",
                named[0].0
            )));
        }
    }
    let tasks: Vec<TaskKind> = tasks.into_iter().collect();
    let accuracy: Vec<Vec<f64>> = named
        .iter()
        .map(|(_, r)| tasks.iter().map(|k| r.per_task[k].accuracy).collect())
        .collect();
    let mut pairs = Vec::new();
    for i in 0..named.len() {
        for j in i + 1..named.len() {
            pairs.push(PairTest {
                a: named[i].0.clone(),
                b: named[j].0.clone(),
                test: wilcoxon_signed_rank(&accuracy[i], &accuracy[j])?,
            });
        }
    }
    Ok(Comparison {
        names: named.iter().map(|(n, _)| n.clone()).collect(),
        tasks,
        accuracy,
        pairs,
    })
}

impl Comparison {
    pub fn table_csv(&self) -> String {
        let mut out = format!("task,{}\n", self.names.join(","));
        for (t, k) in self.tasks.iter().enumerate() {
            let cells: Vec<String> = self.accuracy.iter().map(|a| format!("{:.6}", a[t])).collect();
            out.push_str(&format!("{k},{}\n", cells.join(",")));
        }
        let means: Vec<String> = self
            .accuracy
            .iter()
            .map(|a| format!("{:.6}", a.iter().sum::<f64>() / a.len().max(1) as f64))
            .collect();
        out.push_str(&format!("average,{}\n", means.join(",")));
        out
    }

    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("a,b,n,w_plus,w_minus,p_two_sided,p_a_greater\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6}\n",
                p.a, p.b, p.test.n, p.test.w_plus, p.test.w_minus, p.test.p_two_sided, p.test.p_greater
            ));
        }
        out
    }
}
