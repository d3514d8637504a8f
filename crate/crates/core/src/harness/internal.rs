//! Answer policies that turn a trained bundle into response text.

use rayon::prelude::*;

use crate::benchgen::{TaskInstance, TaskKind, OPTION_LABELS};
use crate::corpus::{Corpus, ScriptStage};
use crate::curriculum::{assign_stages, GlyphFeatures, ModelBundle, Policy};
use crate::error::{Error, Result};
use crate::scorer::{Answer, ParseStatus, ResponseLine, ResponseParser};

fn policy(bundle: &ModelBundle) -> Policy<'_> {
    Policy {
        encoder: &bundle.encoder,
        recognizer: &bundle.recognizer,
        heads: &bundle.heads,
    }
}

/// Highest score wins; ties go to the earliest option.
fn best_option(scores: &[f64]) -> &'static str {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    OPTION_LABELS[best]
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// The stage named in an instruction, read the same way a response is.
fn queried_stage(inst: &TaskInstance) -> Result<ScriptStage> {
    let parser = ResponseParser::new(Vec::<String>::new());
    let parsed = parser.parse(TaskKind::T1_1, &inst.instruction);
    match (parsed.status, parsed.value) {
        (ParseStatus::Parsed, Some(Answer::Stage(s))) => Ok(s),
        _ => Err(Error::Format(format!(
            "{}: instruction does not name exactly one stage",
            inst.instance_id
        ))),
    }
}

/// Deterministic response for one instance. Only the glyph bitmaps, the
/// instruction and the options are consulted; reference metadata is not.
pub fn answer_internal(bundle: &ModelBundle, inst: &TaskInstance, corpus: &Corpus) -> Result<String> {
    let p = policy(bundle);
    let feats: Vec<GlyphFeatures> = inst
        .image_refs
        .iter()
        .map(|r| p.features(corpus.resolve(r)?))
        .collect::<Result<_>>()?;
    let need = |n: usize| -> Result<()> {
        if feats.len() < n {
            return Err(Error::Format(format!(
                "{}: expected at least {n} images",
                inst.instance_id
            )));
        }
        Ok(())
    };
    Ok(match inst.kind {
        TaskKind::T1_1 => {
            need(1)?;
            let post = p.stage_posterior(&feats[0]);
            ScriptStage::ALL[argmax(&post)].display_name().to_string()
        }
        TaskKind::T1_2 | TaskKind::T1_3 | TaskKind::T2_2 | TaskKind::T2_3 => {
            need(2)?;
            let c = p.pair_components(inst.kind, &feats[0], &feats[1]);
            if p.binary_head(inst.kind).decide(c) { "yes" } else { "no" }.to_string()
        }
        TaskKind::T1_4 => {
            need(4)?;
            let s = queried_stage(inst)?.ordinal();
            let scores: Vec<f64> = feats[..4].iter().map(|f| p.stage_posterior(f)[s]).collect();
            best_option(&scores).to_string()
        }
        TaskKind::T2_1 => {
            need(1)?;
            bundle.recognizer.vocab[argmax(&feats[0].probs)].clone()
        }
        TaskKind::T2_4 => {
            need(1)?;
            let opts = inst.options.as_deref().unwrap_or_default();
            let scores: Vec<f64> = opts.iter().map(|o| p.char_log_prob(&feats[0], &o.content)).collect();
            if scores.len() != 4 {
                return Err(Error::Format(format!("{}: expected 4 options", inst.instance_id)));
            }
            best_option(&scores).to_string()
        }
        TaskKind::T3_1 => {
            need(1)?;
            let mut total = vec![0.0; bundle.recognizer.len()];
            for f in &feats {
                for (t, q) in total.iter_mut().zip(&f.probs) {
                    *t += q.max(f64::MIN_POSITIVE).ln();
                }
            }
            bundle.recognizer.vocab[argmax(&total)].clone()
        }
        TaskKind::T3_2 => {
            need(2)?;
            let scores: Vec<[f64; 5]> = feats.iter().map(|f| p.stage_log_scores(f)).collect();
            assign_stages(&scores)
                .iter()
                .map(|s| s.display_name())
                .collect::<Vec<_>>()
                .join(" → ")
        }
        TaskKind::T3_3 => {
            need(5)?;
            let n_ctx = feats.len() - 4;
            let scores: Vec<f64> = feats[n_ctx..]
                .iter()
                .map(|o| p.gap_score(p.gap_components(o, &feats[..n_ctx])))
                .collect();
            best_option(&scores).to_string()
        }
    })
}

/// Answers every instance in parallel; output is sorted by instance id.
pub fn answer_all<'a, I>(bundle: &ModelBundle, instances: I, corpus: &Corpus) -> Result<Vec<ResponseLine>>
where
    I: IntoIterator<Item = &'a TaskInstance>,
{
    let list: Vec<&TaskInstance> = instances.into_iter().collect();
    let mut out: Vec<ResponseLine> = list
        .par_iter()
        .map(|inst| {
            Ok(ResponseLine {
                instance_id: inst.instance_id.clone(),
                raw_response: answer_internal(bundle, inst, corpus)?,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok(out)
}
