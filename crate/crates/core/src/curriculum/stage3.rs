//! Stage 3: fit task heads on a small train-split sample per kind.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::bundle::ModelBundle;
use super::heads::{BinaryHead, GlyphFeatures, Policy, ProbeInput, StageProbe, TaskHeads};
use crate::benchgen::{AnswerKey, Split, TaskInstance, TaskKind};
use crate::corpus::{Corpus, GlyphRef, ScriptStage};
use crate::error::{Error, Result};
use crate::seed::{hash64, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage3Config {
    pub samples_per_task: usize,
    pub probe_input: ProbeInput,
}

impl Default for Stage3Config {
    fn default() -> Self {
        Self {
            samples_per_task: 200,
            probe_input: ProbeInput::default(),
        }
    }
}

/// Fit diagnostics for one binary head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryFit {
    pub kind: TaskKind,
    pub weight: f64,
    pub threshold: f64,
    pub train_accuracy: f64,
    pub score_min: f64,
    pub score_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Stage3Log {
    pub samples: BTreeMap<TaskKind, usize>,
    pub probe_samples: usize,
    pub binary: Vec<BinaryFit>,
    pub gap_weight: f64,
    pub gap_accuracy: Option<f64>,
}

/// Mixing weights searched for the two-channel heads, embedding share first.
fn weight_grid() -> impl Iterator<Item = f64> {
    (0..=10).rev().map(|i| i as f64 / 10.0)
}

struct FeatureCache<'a> {
    policy: Policy<'a>,
    corpus: &'a Corpus,
    map: HashMap<GlyphRef, GlyphFeatures>,
}

impl<'a> FeatureCache<'a> {
    fn get(&mut self, r: &GlyphRef) -> Result<&GlyphFeatures> {
        if !self.map.contains_key(r) {
            let f = self.policy.features(self.corpus.resolve(r)?)?;
            self.map.insert(r.clone(), f);
        }
        Ok(&self.map[r])
    }
}

/// Up to `n` train instances of each kind, chosen by seed.
fn select(
    train: &[TaskInstance],
    n: usize,
    seed: u64,
) -> BTreeMap<TaskKind, Vec<&TaskInstance>> {
    let mut by_kind: BTreeMap<TaskKind, Vec<&TaskInstance>> = BTreeMap::new();
    for inst in train {
        by_kind.entry(inst.kind).or_default().push(inst);
    }
    for (kind, list) in by_kind.iter_mut() {
        list.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        if list.len() < n {
            log::warn!("stage3: only {} train samples for {kind}, using all", list.len());
            continue;
        }
        let mut r = rng(hash64(seed, &[b"stage3", kind.id().as_bytes()]));
        let mut picks = sample(&mut r, list.len(), n).into_vec();
        picks.sort_unstable();
        *list = picks.into_iter().map(|i| list[i]).collect();
    }
    by_kind
}

fn fit_binary(kind: TaskKind, comps: &[((f64, f64), bool)]) -> Option<BinaryFit> {
    let has_both = comps.iter().any(|(_, y)| *y) && comps.iter().any(|(_, y)| !*y);
    if !has_both {
        return None;
    }
    let mut best: Option<BinaryFit> = None;
    for w in weight_grid() {
        let head = BinaryHead {
            weight: w,
            threshold: 0.0,
        };
        let scores: Vec<(f64, bool)> = comps.iter().map(|(c, y)| (head.score(*c), *y)).collect();
        let mean = |label: bool| {
            let xs: Vec<f64> = scores.iter().filter(|(_, y)| *y == label).map(|(s, _)| *s).collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        let threshold = ((mean(true) + mean(false)) / 2.0).min(1.0 - 1e-9);
        let correct = scores.iter().filter(|(s, y)| (*s > threshold) == *y).count();
        let fit = BinaryFit {
            kind,
            weight: w,
            threshold,
            train_accuracy: correct as f64 / scores.len() as f64,
            score_min: scores.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min),
            score_max: scores.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max),
        };
        if best.as_ref().is_none_or(|b| fit.train_accuracy > b.train_accuracy) {
            best = Some(fit);
        }
    }
    best
}

fn option_index(inst: &TaskInstance) -> Option<usize> {
    inst.answer_key.text().and_then(|k| inst.option_image(k))
}

/// Fits the heads of `bundle` on train-split instances. Encoder and
/// recognizer are carried over unchanged. Any test-split instance in
/// `train` is a hard error.
pub fn stage3_train(
    bundle: &ModelBundle,
    corpus: &Corpus,
    train: &[TaskInstance],
    cfg: &Stage3Config,
) -> Result<(ModelBundle, Stage3Log)> {
    if let Some(leak) = train.iter().find(|i| i.split == Split::Test) {
        return Err(Error::Leakage(leak.instance_id.clone()));
    }
    let mut out = bundle.clone();
    out.provenance.stages_run.push(3);
    let mut heads = TaskHeads {
        probe_input: cfg.probe_input,
        ..TaskHeads::default()
    };
    let mut log = Stage3Log {
        gap_weight: heads.gap_weight,
        ..Default::default()
    };
    if cfg.samples_per_task == 0 {
        out.heads = heads;
        return Ok((out, log));
    }

    let chosen = select(train, cfg.samples_per_task, bundle.provenance.seed);
    heads.samples = chosen.iter().map(|(k, v)| (*k, v.len())).collect();
    log.samples = heads.samples.clone();

    // stage probe from T1.1 and T3.2 answer keys
    let base = TaskHeads {
        probe_input: cfg.probe_input,
        ..TaskHeads::default()
    };
    let mut cache = FeatureCache {
        policy: Policy {
            encoder: &bundle.encoder,
            recognizer: &bundle.recognizer,
            heads: &base,
        },
        corpus,
        map: HashMap::new(),
    };
    let base_policy = cache.policy;
    let mut probe_samples: Vec<(Vec<f64>, ScriptStage)> = Vec::new();
    for kind in [TaskKind::T1_1, TaskKind::T3_2] {
        for inst in chosen.get(&kind).into_iter().flatten() {
            let labels: Vec<ScriptStage> = match &inst.answer_key {
                AnswerKey::Text(t) => t.parse().into_iter().collect(),
                AnswerKey::Sequence(s) => s.clone(),
            };
            for (r, s) in inst.image_refs.iter().zip(labels) {
                let f = cache.get(r)?;
                probe_samples.push((base_policy.probe_features(f).to_vec(), s));
            }
        }
    }
    log.probe_samples = probe_samples.len();
    heads.stage_probe = StageProbe::fit(&probe_samples);

    let fitted_probe = heads.clone();
    let policy = Policy {
        encoder: &bundle.encoder,
        recognizer: &bundle.recognizer,
        heads: &fitted_probe,
    };
    for kind in [TaskKind::T1_2, TaskKind::T1_3, TaskKind::T2_2, TaskKind::T2_3] {
        let mut comps = Vec::new();
        for inst in chosen.get(&kind).into_iter().flatten() {
            let a = cache.get(&inst.image_refs[0])?.clone();
            let b = cache.get(&inst.image_refs[1])?;
            comps.push((policy.pair_components(kind, &a, b), inst.answer_key.text() == Some("yes")));
        }
        if let Some(fit) = fit_binary(kind, &comps) {
            log.binary.push(fit);
        }
    }
    for fit in &log.binary {
        heads.binary.insert(
            fit.kind,
            BinaryHead {
                weight: fit.weight,
                threshold: fit.threshold,
            },
        );
    }

    // T3.3: pick the mixing weight with the best train accuracy
    let mut gap_rows: Vec<(Vec<(f64, f64)>, usize)> = Vec::new();
    for inst in chosen.get(&TaskKind::T3_3).into_iter().flatten() {
        let Some(answer) = option_index(inst) else { continue };
        let n_ctx = inst.image_refs.len() - 4;
        let context: Vec<GlyphFeatures> = inst.image_refs[..n_ctx]
            .iter()
            .map(|r| cache.get(r).cloned())
            .collect::<Result<_>>()?;
        let mut options = Vec::with_capacity(4);
        for r in &inst.image_refs[n_ctx..] {
            options.push(policy.gap_components(cache.get(r)?, &context));
        }
        gap_rows.push((options, answer - n_ctx));
    }
    if !gap_rows.is_empty() {
        let mut best = (f64::NEG_INFINITY, 1.0);
        for w in weight_grid() {
            let correct = gap_rows
                .iter()
                .filter(|(opts, a)| {
                    let scores: Vec<f64> = opts.iter().map(|c| w * c.0 + (1.0 - w) * c.1).collect();
                    super::stage2::argmax(&scores) == *a
                })
                .count();
            let acc = correct as f64 / gap_rows.len() as f64;
            if acc > best.0 {
                best = (acc, w);
            }
        }
        heads.gap_weight = best.1;
        log.gap_weight = best.1;
        log.gap_accuracy = Some(best.0);
    }

    out.heads = heads;
    Ok((out, log))
}
