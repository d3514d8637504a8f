//! Containment-based answer extraction.

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::benchgen::{TaskFormat, TaskKind, OPTION_LABELS};
use crate::corpus::ScriptStage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    MultiCandidateFailure,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Stage(ScriptStage),
    Character(String),
    Binary(bool),
    Option(String),
    Sequence(Vec<ScriptStage>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub status: ParseStatus,
    pub value: Option<Answer>,
}

impl ParsedAnswer {
    pub fn unparseable() -> Self {
        Self {
            status: ParseStatus::Unparseable,
            value: None,
        }
    }

    pub fn failure() -> Self {
        Self {
            status: ParseStatus::MultiCandidateFailure,
            value: None,
        }
    }

    pub fn parsed(value: Answer) -> Self {
        Self {
            status: ParseStatus::Parsed,
            value: Some(value),
        }
    }

    fn from_candidates(mut found: Vec<Answer>) -> Self {
        found.dedup();
        let mut distinct: Vec<Answer> = Vec::new();
        for a in found {
            if !distinct.contains(&a) {
                distinct.push(a);
            }
        }
        match distinct.len() {
            0 => Self::unparseable(),
            1 => Self::parsed(distinct.pop().expect("one")),
            _ => Self::failure(),
        }
    }
}

/// Alias table. ASCII aliases match on word boundaries, CJK ones anywhere.
const STAGE_ALIASES: [(ScriptStage, &[&str]); 5] = [
    (
        ScriptStage::OracleBone,
        &[
            r"oracle[\s_-]*bone(?:[\s_-]*(?:script|inscriptions?))?",
            r"oracle",
            r"jiaguwen",
            "甲骨文",
            "甲骨",
        ],
    ),
    (
        ScriptStage::Bronze,
        &[
            r"bronze(?:[\s_-]*(?:script|inscriptions?))?",
            r"jinwen",
            "金文",
        ],
    ),
    (
        ScriptStage::Seal,
        &[
            r"(?:small[\s_-]*)?seal(?:[\s_-]*script)?",
            r"zhuanshu",
            "小篆",
            "篆书",
            "篆書",
        ],
    ),
    (
        ScriptStage::Clerical,
        &[r"clerical(?:[\s_-]*script)?", r"lishu", "隶书", "隸書"],
    ),
    (
        ScriptStage::Regular,
        &[
            r"regular(?:[\s_-]*script)?",
            r"standard[\s_-]*script",
            r"kaishu",
            "楷书",
            "楷書",
        ],
    ),
];

/// Response parser bound to a recognition vocabulary.
#[derive(Debug, Clone)]
pub struct ResponseParser {
    stage_re: Regex,
    option_re: Regex,
    binary_re: Regex,
    separator_re: Regex,
    vocabulary: Vec<String>,
}

impl ResponseParser {
    /// `vocabulary` holds every character a recognition answer may name.
    pub fn new<I, S>(vocabulary: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let groups: Vec<String> = STAGE_ALIASES
            .iter()
            .map(|(_, aliases)| {
                let alts: Vec<String> = aliases
                    .iter()
                    .map(|a| {
                        if a.is_ascii() {
                            format!(r"\b{a}\b")
                        } else {
                            a.to_string()
                        }
                    })
                    .collect();
                format!("({})", alts.join("|"))
            })
            .collect();
        let stage_re = Regex::new(&format!("(?i){}", groups.join("|"))).expect("static regex");
        let letters = OPTION_LABELS.join("");
        let option_re = Regex::new(&format!(r"\b([{letters}])\b")).expect("static regex");
        let binary_re = Regex::new(r"(?i)\b(yes|no)\b|(不是|不同|否)|(是|相同)").expect("static regex");
        let separator_re =
            Regex::new(r"(?i)^(?:[\s,;:.、，；→>=\-]|\bthen\b|\band\b|\bfollowed by\b)*$")
                .expect("static regex");
        let mut vocabulary: Vec<String> = vocabulary
            .into_iter()
            .map(Into::into)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|s: &String| !s.is_empty())
            .collect();
        vocabulary.sort();
        Self {
            stage_re,
            option_re,
            binary_re,
            separator_re,
            vocabulary,
        }
    }

    /// Stage mentions with their byte spans, in text order.
    fn stage_mentions(&self, raw: &str) -> Vec<(usize, usize, ScriptStage)> {
        self.stage_re
            .captures_iter(raw)
            .map(|c| {
                let (gi, m) = (1..=STAGE_ALIASES.len())
                    .find_map(|g| c.get(g).map(|m| (g, m)))
                    .expect("one group matched");
                (m.start(), m.end(), STAGE_ALIASES[gi - 1].0)
            })
            .collect()
    }

    pub fn parse(&self, kind: TaskKind, raw: &str) -> ParsedAnswer {
        let raw = raw.trim();
        if raw.is_empty() {
            return ParsedAnswer::unparseable();
        }
        match kind.format() {
            TaskFormat::QA if kind.answers_character() => {
                let found = self
                    .vocabulary
                    .iter()
                    .filter(|c| raw.contains(c.as_str()))
                    .map(|c| Answer::Character(c.clone()))
                    .collect();
                ParsedAnswer::from_candidates(found)
            }
            TaskFormat::QA => ParsedAnswer::from_candidates(
                self.stage_mentions(raw)
                    .into_iter()
                    .map(|(_, _, s)| Answer::Stage(s))
                    .collect(),
            ),
            TaskFormat::MCQ4 => ParsedAnswer::from_candidates(
                self.option_re
                    .captures_iter(raw)
                    .map(|c| Answer::Option(c[1].to_string()))
                    .collect(),
            ),
            TaskFormat::Binary => ParsedAnswer::from_candidates(
                self.binary_re
                    .captures_iter(raw)
                    .map(|c| {
                        let yes = match c.get(1) {
                            Some(m) => m.as_str().eq_ignore_ascii_case("yes"),
                            None => c.get(3).is_some(),
                        };
                        Answer::Binary(yes)
                    })
                    .collect(),
            ),
            TaskFormat::Ordering => self.parse_sequence(raw),
        }
    }

    /// Maximal runs of stage names joined only by separators. Each run is
    /// one candidate sequence.
    fn parse_sequence(&self, raw: &str) -> ParsedAnswer {
        let mentions = self.stage_mentions(raw);
        let mut runs: Vec<Vec<ScriptStage>> = Vec::new();
        let mut prev_end: Option<usize> = None;
        for (start, end, stage) in mentions {
            let joined = prev_end.is_some_and(|p| self.separator_re.is_match(&raw[p..start]));
            match runs.last_mut() {
                Some(run) if joined => run.push(stage),
                _ => runs.push(vec![stage]),
            }
            prev_end = Some(end);
        }
        ParsedAnswer::from_candidates(runs.into_iter().map(Answer::Sequence).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ScriptStage::*;

    fn parser() -> ResponseParser {
        ResponseParser::new(["日", "月", "水"])
    }

    #[test]
    fn style_names_and_aliases() {
        let p = parser();
        assert_eq!(
            p.parse(TaskKind::T1_1, "This is Seal Script."),
            ParsedAnswer::parsed(Answer::Stage(Seal))
        );
        assert_eq!(
            p.parse(TaskKind::T1_1, "looks like an oracle bone inscription"),
            ParsedAnswer::parsed(Answer::Stage(OracleBone))
        );
        assert_eq!(
            p.parse(TaskKind::T1_1, "楷书"),
            ParsedAnswer::parsed(Answer::Stage(Regular))
        );
        assert_eq!(
            p.parse(TaskKind::T1_1, "Either Bronze or Seal").status,
            ParseStatus::MultiCandidateFailure
        );
        assert_eq!(
            p.parse(TaskKind::T1_1, "I cannot tell.").status,
            ParseStatus::Unparseable
        );
        // repeated mention of the same stage is still one candidate
        assert_eq!(
            p.parse(TaskKind::T1_1, "Seal script. Definitely seal.").status,
            ParseStatus::Parsed
        );
    }

    #[test]
    fn option_letters() {
        let p = parser();
        assert_eq!(
            p.parse(TaskKind::T2_4, "Answer: B"),
            ParsedAnswer::parsed(Answer::Option("B".into()))
        );
        assert_eq!(
            p.parse(TaskKind::T3_3, "(C)"),
            ParsedAnswer::parsed(Answer::Option("C".into()))
        );
        assert_eq!(
            p.parse(TaskKind::T1_4, "A or D").status,
            ParseStatus::MultiCandidateFailure
        );
        assert_eq!(p.parse(TaskKind::T1_4, "none").status, ParseStatus::Unparseable);
    }

    #[test]
    fn binary_lexicon() {
        let p = parser();
        assert_eq!(
            p.parse(TaskKind::T1_2, "Yes, they are."),
            ParsedAnswer::parsed(Answer::Binary(true))
        );
        assert_eq!(
            p.parse(TaskKind::T2_2, "No."),
            ParsedAnswer::parsed(Answer::Binary(false))
        );
        assert_eq!(
            p.parse(TaskKind::T2_3, "不是"),
            ParsedAnswer::parsed(Answer::Binary(false))
        );
        assert_eq!(
            p.parse(TaskKind::T2_3, "yes or no").status,
            ParseStatus::MultiCandidateFailure
        );
        assert_eq!(p.parse(TaskKind::T1_3, "nothing").status, ParseStatus::Unparseable);
    }

    #[test]
    fn recognition_vocabulary() {
        let p = parser();
        assert_eq!(
            p.parse(TaskKind::T2_1, "It is 日."),
            ParsedAnswer::parsed(Answer::Character("日".into()))
        );
        assert_eq!(
            p.parse(TaskKind::T3_1, "日 or 月").status,
            ParseStatus::MultiCandidateFailure
        );
    }

    #[test]
    fn ordering_runs() {
        let p = parser();
        assert_eq!(
            p.parse(TaskKind::T3_2, "Bronze→Regular→Oracle"),
            ParsedAnswer::parsed(Answer::Sequence(vec![Bronze, Regular, OracleBone]))
        );
        assert_eq!(
            p.parse(TaskKind::T3_2, "The order is: seal script, then clerical and regular."),
            ParsedAnswer::parsed(Answer::Sequence(vec![Seal, Clerical, Regular]))
        );
        assert_eq!(
            p.parse(TaskKind::T3_2, "Seal -> Bronze. Alternatively Bronze -> Seal.").status,
            ParseStatus::MultiCandidateFailure
        );
    }
}
