//! Benchmark generation for the eleven script-evolution tasks.
//!
//! Task families:
//! * T1.x style: identify the stage of a glyph (QA), compare styles of a
//!   same-character (T1.2) or different-character (T1.3) pair, pick the
//!   glyph written in a queried stage (T1.4).
//! * T2.x recognition: name the modern character (QA), same-character
//!   judgement within one stage (T2.2) or across stages (T2.3), pick the
//!   character among four options (T2.4).
//! * T3.x evolution: recognize a character from its whole path (T3.1),
//!   label the stages of a shuffled path (T3.2), fill a missing stage (T3.3).

mod generate;
mod split;
mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Corpus, GlyphRef, ScriptStage};
use crate::error::{Error, Result};

pub use generate::{
    gen_evolution_tasks, gen_recognition_tasks, gen_style_tasks, generate_benchmark, GenOptions,
};
pub use split::{split_benchmark, test_count};
pub use template::{count_placeholders, render_instruction, RenderArgs, TemplateConfig};

pub const OPTION_LABELS: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskKind {
    T1_1,
    T1_2,
    T1_3,
    T1_4,
    T2_1,
    T2_2,
    T2_3,
    T2_4,
    T3_1,
    T3_2,
    T3_3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskFormat {
    QA,
    Binary,
    MCQ4,
    Ordering,
}

impl TaskKind {
    pub const ALL: [TaskKind; 11] = [
        TaskKind::T1_1,
        TaskKind::T1_2,
        TaskKind::T1_3,
        TaskKind::T1_4,
        TaskKind::T2_1,
        TaskKind::T2_2,
        TaskKind::T2_3,
        TaskKind::T2_4,
        TaskKind::T3_1,
        TaskKind::T3_2,
        TaskKind::T3_3,
    ];
    pub const STYLE: [TaskKind; 4] = [TaskKind::T1_1, TaskKind::T1_2, TaskKind::T1_3, TaskKind::T1_4];
    pub const RECOGNITION: [TaskKind; 4] =
        [TaskKind::T2_1, TaskKind::T2_2, TaskKind::T2_3, TaskKind::T2_4];
    pub const EVOLUTION: [TaskKind; 3] = [TaskKind::T3_1, TaskKind::T3_2, TaskKind::T3_3];

    pub fn id(self) -> &'static str {
        match self {
            TaskKind::T1_1 => "T1.1",
            TaskKind::T1_2 => "T1.2",
            TaskKind::T1_3 => "T1.3",
            TaskKind::T1_4 => "T1.4",
            TaskKind::T2_1 => "T2.1",
            TaskKind::T2_2 => "T2.2",
            TaskKind::T2_3 => "T2.3",
            TaskKind::T2_4 => "T2.4",
            TaskKind::T3_1 => "T3.1",
            TaskKind::T3_2 => "T3.2",
            TaskKind::T3_3 => "T3.3",
        }
    }

    pub fn format(self) -> TaskFormat {
        use TaskKind::*;
        match self {
            T1_1 | T2_1 | T3_1 => TaskFormat::QA,
            T1_2 | T1_3 | T2_2 | T2_3 => TaskFormat::Binary,
            T1_4 | T2_4 | T3_3 => TaskFormat::MCQ4,
            T3_2 => TaskFormat::Ordering,
        }
    }

    /// QA kinds whose answer is a modern character rather than a stage.
    pub fn answers_character(self) -> bool {
        matches!(self, TaskKind::T2_1 | TaskKind::T3_1)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('_', ".");
        TaskKind::ALL
            .iter()
            .copied()
            .find(|k| k.id().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| Error::Format(format!("unknown task kind {s:?}")))
    }
}

impl Serialize for TaskKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for TaskKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionEntry {
    pub label: String,
    pub content: String,
}

/// A stage name, a character, "yes"/"no" or an option letter; for
/// ordering tasks, the true stage of each presented image in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerKey {
    Text(String),
    Sequence(Vec<ScriptStage>),
}

impl AnswerKey {
    pub fn text(&self) -> Option<&str> {
        match self {
            AnswerKey::Text(s) => Some(s),
            AnswerKey::Sequence(_) => None,
        }
    }

    pub fn sequence(&self) -> Option<&[ScriptStage]> {
        match self {
            AnswerKey::Sequence(s) => Some(s),
            AnswerKey::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub instance_id: String,
    pub kind: TaskKind,
    pub format: TaskFormat,
    pub instruction: String,
    pub image_refs: Vec<GlyphRef>,
    pub options: Option<Vec<OptionEntry>>,
    pub answer_key: AnswerKey,
    pub split: Split,
    pub gen_seed: u64,
}

impl TaskInstance {
    /// Image index an option points at, for image-valued options.
    pub fn option_image(&self, label: &str) -> Option<usize> {
        let content = &self
            .options
            .as_ref()?
            .iter()
            .find(|o| o.label == label)?
            .content;
        content
            .strip_prefix("image ")?
            .parse::<usize>()
            .ok()
            .and_then(|n| n.checked_sub(1))
    }
}

pub fn instance_id(kind: TaskKind, index: usize) -> String {
    format!("{}-{index:06}", kind.id())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSet {
    pub instances: Vec<TaskInstance>,
    pub corpus_fingerprint: Option<String>,
}

impl BenchmarkSet {
    pub fn new(mut instances: Vec<TaskInstance>, corpus_fingerprint: Option<String>) -> Self {
        instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        Self {
            instances,
            corpus_fingerprint,
        }
    }

    pub fn per_task_counts(&self) -> BTreeMap<TaskKind, usize> {
        let mut m = BTreeMap::new();
        for i in &self.instances {
            *m.entry(i.kind).or_default() += 1;
        }
        m
    }

    pub fn get(&self, id: &str) -> Option<&TaskInstance> {
        self.instances
            .binary_search_by(|i| i.instance_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.instances[i])
    }

    pub fn of_split(&self, split: Split) -> impl Iterator<Item = &TaskInstance> {
        self.instances.iter().filter(move |i| i.split == split)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for inst in &self.instances {
            out.push_str(&serde_json::to_string(inst)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut instances = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let inst: TaskInstance = serde_json::from_str(&line).map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            if !ids.insert(inst.instance_id.clone()) {
                return Err(Error::Manifest {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("duplicate instance_id {}", inst.instance_id),
                });
            }
            instances.push(inst);
        }
        Ok(Self::new(instances, None))
    }
}

/// Checks the structural invariants of one instance against its corpus.
pub fn validate_instance(inst: &TaskInstance, corpus: &Corpus) -> Result<()> {
    let bad = |msg: String| Err(Error::generation(inst.instance_id.clone(), msg));
    if inst.format != inst.kind.format() {
        return bad(format!("format {:?} does not match kind", inst.format));
    }
    for r in &inst.image_refs {
        if corpus.glyph(r).is_none() {
            return bad(format!("image {r} does not resolve"));
        }
    }
    match inst.kind.format() {
        TaskFormat::Binary => {
            if !matches!(inst.answer_key.text(), Some("yes" | "no")) {
                return bad("binary answer must be yes or no".into());
            }
            if inst.image_refs.len() != 2 {
                return bad("binary tasks show two images".into());
            }
            let same_char = inst.image_refs[0].char_id == inst.image_refs[1].char_id;
            let same_stage = inst.image_refs[0].stage == inst.image_refs[1].stage;
            let yes = inst.answer_key.text() == Some("yes");
            let consistent = match inst.kind {
                TaskKind::T1_2 => same_char && yes == same_stage,
                TaskKind::T1_3 => !same_char && yes == same_stage,
                TaskKind::T2_2 => same_stage && yes == same_char,
                TaskKind::T2_3 => !same_stage && yes == same_char,
                _ => unreachable!(),
            };
            if !consistent {
                return bad("answer key disagrees with the image pair".into());
            }
        }
        TaskFormat::MCQ4 => {
            let Some(opts) = &inst.options else {
                return bad("missing options".into());
            };
            if opts.len() != 4 {
                return bad(format!("{} options instead of 4", opts.len()));
            }
            let contents: BTreeSet<&str> = opts.iter().map(|o| o.content.as_str()).collect();
            if contents.len() != 4 {
                return bad("options are not mutually distinct".into());
            }
            let key = inst.answer_key.text().unwrap_or_default();
            if opts.iter().filter(|o| o.label == key).count() != 1 {
                return bad(format!("answer {key:?} does not name exactly one option"));
            }
            if inst.kind == TaskKind::T2_4 {
                let probe = &inst.image_refs[0].char_id;
                let hits = opts.iter().filter(|o| &o.content == probe).count();
                let answer = opts.iter().find(|o| o.label == key).map(|o| &o.content);
                if hits != 1 || answer != Some(probe) {
                    return bad("T2.4 options must hold the probe character exactly once".into());
                }
            }
        }
        TaskFormat::Ordering => {
            let Some(seq) = inst.answer_key.sequence() else {
                return bad("ordering answer must be a stage sequence".into());
            };
            if inst.image_refs.len() < 2 || seq.len() != inst.image_refs.len() {
                return bad("ordering needs at least two images, one key entry each".into());
            }
            if seq.windows(2).all(|w| w[0] < w[1]) {
                return bad("presented order is already chronological".into());
            }
            if seq.iter().zip(&inst.image_refs).any(|(s, r)| *s != r.stage) {
                return bad("ordering key disagrees with the presented images".into());
            }
        }
        TaskFormat::QA => {
            if inst.image_refs.is_empty() {
                return bad("no images".into());
            }
        }
    }
    Ok(())
}
