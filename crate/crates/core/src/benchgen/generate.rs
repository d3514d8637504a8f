use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index::sample, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::template::{render_instruction, RenderArgs, TemplateConfig};
use super::{
    instance_id, split_benchmark, AnswerKey, BenchmarkSet, OptionEntry, Split, TaskInstance,
    TaskKind, OPTION_LABELS,
};
use crate::corpus::{CharacterEntry, Corpus, GlyphRef, ScriptStage};
use crate::embed::{cosine, topk_negatives, SimilarityIndex};
use crate::error::{Error, Result};
use crate::seed::{instance_seed, rng, scoped};

/// Retry budget for rejection sampling of constrained pairs.
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone)]
pub struct GenOptions<'a> {
    pub seed: u64,
    pub templates: TemplateConfig,
    /// When present, T2.4 and T3.3 distractors are the most similar
    /// glyphs instead of uniform draws.
    pub similarity: Option<&'a SimilarityIndex>,
}

impl GenOptions<'_> {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            templates: TemplateConfig::default(),
            similarity: None,
        }
    }
}

/// Sampling pools derived once from the corpus.
struct Pools<'c> {
    chars: Vec<&'c CharacterEntry>,
    by_stage: BTreeMap<ScriptStage, Vec<usize>>,
    multi_variant: Vec<(usize, ScriptStage)>,
    multi_stage: Vec<usize>,
    path3: Vec<usize>,
}

impl<'c> Pools<'c> {
    fn new(corpus: &'c Corpus) -> Self {
        let chars: Vec<&CharacterEntry> = corpus.entries().iter().collect();
        let mut by_stage: BTreeMap<ScriptStage, Vec<usize>> = BTreeMap::new();
        let mut multi_variant = Vec::new();
        let mut multi_stage = Vec::new();
        let mut path3 = Vec::new();
        for (i, e) in chars.iter().enumerate() {
            for s in e.stages() {
                by_stage.entry(s).or_default().push(i);
                if e.glyphs(s).len() >= 2 {
                    multi_variant.push((i, s));
                }
            }
            if e.stage_count() >= 2 {
                multi_stage.push(i);
            }
            if e.stage_count() >= 3 {
                path3.push(i);
            }
        }
        Self {
            chars,
            by_stage,
            multi_variant,
            multi_stage,
            path3,
        }
    }

    fn glyph(&self, c: usize, stage: ScriptStage, rng: &mut impl Rng) -> GlyphRef {
        let gs = self.chars[c].glyphs(stage);
        let g = &gs[rng.gen_range(0..gs.len())];
        GlyphRef::new(self.chars[c].char_id.clone(), stage, g.variant)
    }

    fn first_glyph(&self, c: usize, stage: ScriptStage) -> GlyphRef {
        GlyphRef::new(
            self.chars[c].char_id.clone(),
            stage,
            self.chars[c].glyphs(stage)[0].variant,
        )
    }

    fn stages(&self, c: usize) -> Vec<ScriptStage> {
        self.chars[c].stages().collect()
    }

    fn any_glyph(&self, rng: &mut impl Rng) -> GlyphRef {
        let c = rng.gen_range(0..self.chars.len());
        let stages = self.stages(c);
        let s = stages[rng.gen_range(0..stages.len())];
        self.glyph(c, s, rng)
    }

    /// Two distinct variants of one character at one stage.
    fn variant_pair(&self, rng: &mut impl Rng) -> (GlyphRef, GlyphRef) {
        let (c, s) = self.multi_variant[rng.gen_range(0..self.multi_variant.len())];
        let gs = self.chars[c].glyphs(s);
        let picks = sample(rng, gs.len(), 2);
        let id = &self.chars[c].char_id;
        (
            GlyphRef::new(id.clone(), s, gs[picks.index(0)].variant),
            GlyphRef::new(id.clone(), s, gs[picks.index(1)].variant),
        )
    }

    /// One character at two different stages.
    fn stage_pair(&self, rng: &mut impl Rng) -> (GlyphRef, GlyphRef) {
        let c = self.multi_stage[rng.gen_range(0..self.multi_stage.len())];
        let stages = self.stages(c);
        let picks = sample(rng, stages.len(), 2);
        (
            self.glyph(c, stages[picks.index(0)], rng),
            self.glyph(c, stages[picks.index(1)], rng),
        )
    }

    fn shared_stages(&self) -> Vec<ScriptStage> {
        self.by_stage
            .iter()
            .filter(|(_, cs)| cs.len() >= 2)
            .map(|(s, _)| *s)
            .collect()
    }

    /// Two different characters at the same stage.
    fn same_stage_strangers(&self, rng: &mut impl Rng) -> Option<(GlyphRef, GlyphRef)> {
        let shared = self.shared_stages();
        let s = *shared.choose(rng)?;
        let cs = &self.by_stage[&s];
        let picks = sample(rng, cs.len(), 2);
        Some((
            self.glyph(cs[picks.index(0)], s, rng),
            self.glyph(cs[picks.index(1)], s, rng),
        ))
    }

    /// Two different characters at different stages.
    fn cross_stage_strangers(&self, rng: &mut impl Rng) -> Option<(GlyphRef, GlyphRef)> {
        if self.chars.len() < 2 {
            return None;
        }
        for _ in 0..MAX_ATTEMPTS {
            let picks = sample(rng, self.chars.len(), 2);
            let (a, b) = (picks.index(0), picks.index(1));
            let sa = *self.stages(a).choose(rng)?;
            let sb_options: Vec<ScriptStage> =
                self.stages(b).into_iter().filter(|s| *s != sa).collect();
            if let Some(&sb) = sb_options.choose(rng) {
                return Some((self.glyph(a, sa, rng), self.glyph(b, sb, rng)));
            }
        }
        None
    }
}

fn need(kind: TaskKind, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::generation(kind, format!("need {what}")))
    }
}

fn yes_no(positive: bool) -> AnswerKey {
    AnswerKey::Text(if positive { "yes" } else { "no" }.to_string())
}

/// Places `correct` at a random letter and fills the other letters with
/// `distractors` in order. Returns the ordered contents and the answer label.
fn arrange_options<T: Clone>(
    correct: T,
    distractors: &[T],
    rng: &mut impl Rng,
) -> (Vec<T>, &'static str) {
    let pos = rng.gen_range(0..4);
    let mut out = Vec::with_capacity(4);
    let mut d = distractors.iter();
    for i in 0..4 {
        if i == pos {
            out.push(correct.clone());
        } else {
            out.push(d.next().expect("three distractors").clone());
        }
    }
    (out, OPTION_LABELS[pos])
}

fn image_options(first_image: usize) -> Vec<OptionEntry> {
    OPTION_LABELS
        .iter()
        .enumerate()
        .map(|(i, l)| OptionEntry {
            label: l.to_string(),
            content: format!("image {}", first_image + i + 1),
        })
        .collect()
}

struct Draft {
    images: Vec<GlyphRef>,
    options: Option<Vec<OptionEntry>>,
    answer: AnswerKey,
    stage: Option<ScriptStage>,
}

fn finish(
    kind: TaskKind,
    index: usize,
    gen_seed: u64,
    draft: Draft,
    templates: &TemplateConfig,
) -> Result<TaskInstance> {
    let instruction = render_instruction(
        kind,
        templates,
        &RenderArgs {
            n_images: draft.images.len(),
            stage: draft.stage,
            options: draft.options.as_deref(),
        },
    )?;
    Ok(TaskInstance {
        instance_id: instance_id(kind, index),
        kind,
        format: kind.format(),
        instruction,
        image_refs: draft.images,
        options: draft.options,
        answer_key: draft.answer,
        split: Split::Train,
        gen_seed,
    })
}

fn generate_kind(
    kind: TaskKind,
    count: usize,
    pools: &Pools<'_>,
    opts: &GenOptions<'_>,
) -> Result<Vec<TaskInstance>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    check_preconditions(kind, count, pools)?;
    (0..count)
        .map(|i| {
            let gen_seed = instance_seed(opts.seed, kind.id(), i as u64);
            let mut r = rng(gen_seed);
            // balanced by construction: even indices are positives
            let positive = i % 2 == 0;
            let draft = draft_instance(kind, positive, pools, opts, &mut r)?;
            finish(kind, i, gen_seed, draft, &opts.templates)
        })
        .collect()
}

fn check_preconditions(kind: TaskKind, count: usize, p: &Pools<'_>) -> Result<()> {
    use TaskKind::*;
    let n_chars = p.chars.len();
    let populated = p.by_stage.len();
    need(kind, n_chars >= 1, "at least 1 character")?;
    let needs_negatives = count >= 2;
    match kind {
        T1_1 | T2_1 => Ok(()),
        T1_2 => {
            need(kind, !p.multi_variant.is_empty(), "a stage with ≥2 variants of one character")?;
            need(
                kind,
                !needs_negatives || !p.multi_stage.is_empty(),
                "a character with ≥2 stages",
            )
        }
        T1_3 => {
            need(kind, n_chars >= 2, "≥2 characters")?;
            need(kind, !p.shared_stages().is_empty(), "a stage shared by ≥2 characters")?;
            need(kind, !needs_negatives || populated >= 2, "≥2 populated stages")
        }
        T1_4 => {
            need(kind, populated >= 2, "≥2 populated stages")?;
            need(kind, n_chars >= 2, "≥2 characters")
        }
        T2_2 => {
            need(kind, !p.multi_variant.is_empty(), "a stage with ≥2 variants of one character")?;
            need(
                kind,
                !needs_negatives || !p.shared_stages().is_empty(),
                "a stage shared by ≥2 characters",
            )
        }
        T2_3 => {
            need(kind, !p.multi_stage.is_empty(), "a character with ≥2 stages")?;
            need(kind, !needs_negatives || n_chars >= 2, "≥2 characters")
        }
        T2_4 => need(kind, n_chars >= 4, "≥4 characters"),
        T3_1 => need(kind, !p.multi_stage.is_empty(), "a character with ≥2 stages"),
        T3_2 => need(kind, !p.path3.is_empty(), "a character with ≥3 stages"),
        T3_3 => {
            let ok = p.path3.iter().any(|&c| {
                p.stages(c)
                    .iter()
                    .any(|s| p.by_stage.get(s).is_some_and(|cs| cs.len() >= 4))
            });
            need(
                kind,
                ok,
                "a character with ≥3 stages, one of them shared by ≥4 characters",
            )
        }
    }
}

fn draft_instance(
    kind: TaskKind,
    positive: bool,
    p: &Pools<'_>,
    opts: &GenOptions<'_>,
    r: &mut ChaCha8Rng,
) -> Result<Draft> {
    use TaskKind::*;
    let pair = |images: (GlyphRef, GlyphRef), positive: bool| Draft {
        images: vec![images.0, images.1],
        options: None,
        answer: yes_no(positive),
        stage: None,
    };
    let fail = |what: &str| Error::generation(kind, format!("could not sample {what}"));
    Ok(match kind {
        T1_1 => {
            let g = p.any_glyph(r);
            Draft {
                answer: AnswerKey::Text(g.stage.name().to_string()),
                images: vec![g],
                options: None,
                stage: None,
            }
        }
        T2_1 => {
            let g = p.any_glyph(r);
            Draft {
                answer: AnswerKey::Text(g.char_id.clone()),
                images: vec![g],
                options: None,
                stage: None,
            }
        }
        T1_2 => {
            if positive {
                pair(p.variant_pair(r), true)
            } else {
                pair(p.stage_pair(r), false)
            }
        }
        T1_3 => {
            if positive {
                pair(p.same_stage_strangers(r).ok_or_else(|| fail("pair"))?, true)
            } else {
                pair(p.cross_stage_strangers(r).ok_or_else(|| fail("pair"))?, false)
            }
        }
        T2_2 => {
            if positive {
                pair(p.variant_pair(r), true)
            } else {
                pair(p.same_stage_strangers(r).ok_or_else(|| fail("pair"))?, false)
            }
        }
        T2_3 => {
            if positive {
                pair(p.stage_pair(r), true)
            } else {
                pair(p.cross_stage_strangers(r).ok_or_else(|| fail("pair"))?, false)
            }
        }
        T1_4 => draft_stage_choice(p, r)?,
        T2_4 => draft_character_choice(p, opts.similarity, r)?,
        T3_1 => {
            let c = p.multi_stage[r.gen_range(0..p.multi_stage.len())];
            let images = p.stages(c).into_iter().map(|s| p.first_glyph(c, s)).collect();
            Draft {
                images,
                options: None,
                answer: AnswerKey::Text(p.chars[c].char_id.clone()),
                stage: None,
            }
        }
        T3_2 => {
            let c = p.path3[r.gen_range(0..p.path3.len())];
            let chronological = p.stages(c);
            let mut shown = chronological.clone();
            while shown == chronological {
                shown.shuffle(r);
            }
            Draft {
                images: shown.iter().map(|s| p.first_glyph(c, *s)).collect(),
                options: None,
                answer: AnswerKey::Sequence(shown),
                stage: None,
            }
        }
        T3_3 => draft_missing_stage(p, opts.similarity, r)?,
    })
}

fn draft_stage_choice(p: &Pools<'_>, r: &mut ChaCha8Rng) -> Result<Draft> {
    let stages: Vec<ScriptStage> = p.by_stage.keys().copied().collect();
    let queried = *stages.choose(r).expect("populated stages checked");
    let mut others: Vec<ScriptStage> = stages.into_iter().filter(|s| *s != queried).collect();
    others.shuffle(r);
    let distractor_stages: Vec<ScriptStage> = others.iter().copied().cycle().take(3).collect();

    let correct_char = *p.by_stage[&queried].choose(r).expect("stage populated");
    let mut used: BTreeSet<usize> = BTreeSet::from([correct_char]);
    let correct = p.glyph(correct_char, queried, r);
    let mut distractors = Vec::with_capacity(3);
    for s in distractor_stages {
        let cs = &p.by_stage[&s];
        let fresh: Vec<usize> = cs.iter().copied().filter(|c| !used.contains(c)).collect();
        let c = *fresh.choose(r).or_else(|| cs.choose(r)).expect("stage populated");
        used.insert(c);
        let mut g = p.glyph(c, s, r);
        // distinct images even when a character repeats
        for _ in 0..MAX_ATTEMPTS {
            if !distractors.contains(&g) {
                break;
            }
            g = p.glyph(c, s, r);
        }
        distractors.push(g);
    }
    let (images, _) = arrange_options(correct.clone(), &distractors, r);
    let pos = images.iter().position(|g| *g == correct).expect("placed");
    Ok(Draft {
        images,
        options: Some(image_options(0)),
        answer: AnswerKey::Text(OPTION_LABELS[pos].to_string()),
        stage: Some(queried),
    })
}

fn draft_character_choice(
    p: &Pools<'_>,
    similarity: Option<&SimilarityIndex>,
    r: &mut ChaCha8Rng,
) -> Result<Draft> {
    let probe = p.any_glyph(r);
    let distractors: Vec<String> = match similarity {
        Some(index) => {
            let ranked = topk_negatives(index, &probe, index.len())?;
            let mut seen = BTreeSet::new();
            ranked
                .into_iter()
                .filter(|g| seen.insert(g.char_id.clone()))
                .map(|g| g.char_id)
                .take(3)
                .collect()
        }
        None => {
            let others: Vec<&str> = p
                .chars
                .iter()
                .map(|e| e.char_id.as_str())
                .filter(|c| *c != probe.char_id)
                .collect();
            sample(r, others.len(), 3)
                .iter()
                .map(|i| others[i].to_string())
                .collect()
        }
    };
    if distractors.len() < 3 {
        return Err(Error::generation(TaskKind::T2_4, "need ≥4 characters"));
    }
    let (contents, label) = arrange_options(probe.char_id.clone(), &distractors, r);
    let options = OPTION_LABELS
        .iter()
        .zip(contents)
        .map(|(l, c)| OptionEntry {
            label: l.to_string(),
            content: c,
        })
        .collect();
    Ok(Draft {
        images: vec![probe],
        options: Some(options),
        answer: AnswerKey::Text(label.to_string()),
        stage: None,
    })
}

fn draft_missing_stage(
    p: &Pools<'_>,
    similarity: Option<&SimilarityIndex>,
    r: &mut ChaCha8Rng,
) -> Result<Draft> {
    for _ in 0..MAX_ATTEMPTS {
        let c = p.path3[r.gen_range(0..p.path3.len())];
        let stages = p.stages(c);
        let removable: Vec<ScriptStage> = stages
            .iter()
            .copied()
            .filter(|s| p.by_stage[s].len() >= 4)
            .collect();
        let Some(&missing) = removable.choose(r) else {
            continue;
        };
        let context: Vec<GlyphRef> = stages
            .iter()
            .filter(|s| **s != missing)
            .map(|s| p.first_glyph(c, *s))
            .collect();
        let truth = p.first_glyph(c, missing);
        let candidates: Vec<GlyphRef> = p.by_stage[&missing]
            .iter()
            .filter(|&&o| o != c)
            .map(|&o| p.first_glyph(o, missing))
            .collect();
        let distractors: Vec<GlyphRef> = match similarity {
            Some(index) => {
                let t = index
                    .get(&truth)
                    .ok_or_else(|| Error::NotIndexed(truth.to_string()))?;
                let mut scored: Vec<(f64, GlyphRef)> = candidates
                    .into_iter()
                    .map(|g| {
                        let e = index.get(&g).ok_or_else(|| Error::NotIndexed(g.to_string()))?;
                        Ok((cosine(t, e), g))
                    })
                    .collect::<Result<_>>()?;
                scored.sort_by(|a, b| {
                    crate::embed::index_rank_order((a.0, &a.1), (b.0, &b.1))
                });
                scored.into_iter().take(3).map(|(_, g)| g).collect()
            }
            None => sample(r, candidates.len(), 3)
                .iter()
                .map(|i| candidates[i].clone())
                .collect(),
        };
        let (option_images, label) = arrange_options(truth, &distractors, r);
        let n_context = context.len();
        let mut images = context;
        images.extend(option_images);
        return Ok(Draft {
            images,
            options: Some(image_options(n_context)),
            answer: AnswerKey::Text(label.to_string()),
            stage: Some(missing),
        });
    }
    Err(Error::generation(
        TaskKind::T3_3,
        "character pool too small for the path constraints",
    ))
}

fn generate_family(
    family: &[TaskKind],
    corpus: &Corpus,
    counts: &BTreeMap<TaskKind, usize>,
    opts: &GenOptions<'_>,
) -> Result<Vec<TaskInstance>> {
    let pools = Pools::new(corpus);
    let per_kind: Vec<Vec<TaskInstance>> = family
        .par_iter()
        .map(|k| generate_kind(*k, counts.get(k).copied().unwrap_or(0), &pools, opts))
        .collect::<Result<_>>()?;
    let mut out: Vec<TaskInstance> = per_kind.into_iter().flatten().collect();
    out.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok(out)
}

fn check_family_preconditions(corpus: &Corpus, family: &str) -> Result<()> {
    let populated: BTreeSet<ScriptStage> = corpus.entries().iter().flat_map(|e| e.stages()).collect();
    if corpus.len() < 2 || populated.len() < 2 {
        return Err(Error::generation(
            family,
            "need ≥2 characters and ≥2 populated stages",
        ));
    }
    Ok(())
}

/// T1.1-T1.4.
pub fn gen_style_tasks(
    corpus: &Corpus,
    counts: &BTreeMap<TaskKind, usize>,
    opts: &GenOptions<'_>,
) -> Result<Vec<TaskInstance>> {
    if TaskKind::STYLE.iter().any(|k| counts.get(k).copied().unwrap_or(0) > 0) {
        let pools = Pools::new(corpus);
        for k in TaskKind::STYLE {
            let n = counts.get(&k).copied().unwrap_or(0);
            if n > 0 {
                check_preconditions(k, n, &pools)?;
            }
        }
        check_family_preconditions(corpus, "style tasks")?;
    }
    generate_family(&TaskKind::STYLE, corpus, counts, opts)
}

/// T2.1-T2.4.
pub fn gen_recognition_tasks(
    corpus: &Corpus,
    counts: &BTreeMap<TaskKind, usize>,
    opts: &GenOptions<'_>,
) -> Result<Vec<TaskInstance>> {
    if TaskKind::RECOGNITION.iter().any(|k| counts.get(k).copied().unwrap_or(0) > 0) {
        let pools = Pools::new(corpus);
        for k in TaskKind::RECOGNITION {
            let n = counts.get(&k).copied().unwrap_or(0);
            if n > 0 {
                check_preconditions(k, n, &pools)?;
            }
        }
        check_family_preconditions(corpus, "recognition tasks")?;
    }
    generate_family(&TaskKind::RECOGNITION, corpus, counts, opts)
}

/// T3.1-T3.3.
pub fn gen_evolution_tasks(
    corpus: &Corpus,
    counts: &BTreeMap<TaskKind, usize>,
    opts: &GenOptions<'_>,
) -> Result<Vec<TaskInstance>> {
    generate_family(&TaskKind::EVOLUTION, corpus, counts, opts)
}

/// All requested kinds, split 9:1 per kind with a seed scoped from
/// `opts.seed`.
pub fn generate_benchmark(
    corpus: &Corpus,
    counts: &BTreeMap<TaskKind, usize>,
    opts: &GenOptions<'_>,
) -> Result<BenchmarkSet> {
    let mut all = gen_style_tasks(corpus, counts, opts)?;
    all.extend(gen_recognition_tasks(corpus, counts, opts)?);
    all.extend(gen_evolution_tasks(corpus, counts, opts)?);
    let mut set = split_benchmark(all, scoped(opts.seed, "split"));
    set.corpus_fingerprint = Some(corpus.fingerprint());
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::validate_instance;
    use crate::corpus::{synth_corpus, Glyph, SynthConfig};

    fn corpus() -> Corpus {
        synth_corpus(&SynthConfig::new(7, 30)).unwrap()
    }

    fn counts(kind: TaskKind, n: usize) -> BTreeMap<TaskKind, usize> {
        BTreeMap::from([(kind, n)])
    }

    #[test]
    fn single_character_cannot_make_t13() {
        let full = corpus();
        let one = Corpus::new(vec![full.entries()[0].clone()], "one", None).unwrap();
        let err = gen_style_tasks(&one, &counts(TaskKind::T1_3, 4), &GenOptions::new(1))
            .unwrap_err();
        assert!(err.to_string().contains("≥2 characters"), "{err}");
    }

    #[test]
    fn binary_sets_are_balanced() {
        let c = corpus();
        let out = gen_style_tasks(&c, &counts(TaskKind::T1_2, 1000), &GenOptions::new(3)).unwrap();
        let yes = out
            .iter()
            .filter(|i| i.answer_key == AnswerKey::Text("yes".into()))
            .count();
        assert!((499..=501).contains(&yes), "{yes}");
        for inst in &out {
            assert_eq!(inst.image_refs[0].char_id, inst.image_refs[1].char_id);
            validate_instance(inst, &c).unwrap();
        }
    }

    #[test]
    fn t13_pairs_differ_in_character() {
        let c = corpus();
        let out = gen_style_tasks(&c, &counts(TaskKind::T1_3, 200), &GenOptions::new(5)).unwrap();
        for inst in &out {
            assert_ne!(inst.image_refs[0].char_id, inst.image_refs[1].char_id);
            validate_instance(inst, &c).unwrap();
        }
    }

    #[test]
    fn t12_positive_uses_two_variants_of_one_stage() {
        let c = corpus();
        let out = gen_style_tasks(&c, &counts(TaskKind::T1_2, 10), &GenOptions::new(3)).unwrap();
        let pos = out
            .iter()
            .find(|i| i.answer_key == AnswerKey::Text("yes".into()))
            .unwrap();
        let (a, b) = (&pos.image_refs[0], &pos.image_refs[1]);
        assert_eq!((a.char_id.as_str(), a.stage), (b.char_id.as_str(), b.stage));
        assert_ne!(a.variant, b.variant);
    }

    #[test]
    fn recognition_kinds_validate() {
        let c = corpus();
        let all: BTreeMap<TaskKind, usize> =
            TaskKind::RECOGNITION.iter().map(|k| (*k, 60)).collect();
        let out = gen_recognition_tasks(&c, &all, &GenOptions::new(2)).unwrap();
        assert_eq!(out.len(), 240);
        for inst in &out {
            validate_instance(inst, &c).unwrap();
            if inst.kind == TaskKind::T2_3 && inst.answer_key.text() == Some("no") {
                assert_ne!(inst.image_refs[0].char_id, inst.image_refs[1].char_id);
                assert_ne!(inst.image_refs[0].stage, inst.image_refs[1].stage);
            }
        }
    }

    #[test]
    fn t24_validator_rejects_repeated_answer() {
        let c = corpus();
        let mut inst = gen_recognition_tasks(&c, &counts(TaskKind::T2_4, 1), &GenOptions::new(2))
            .unwrap()
            .remove(0);
        let probe = inst.image_refs[0].char_id.clone();
        let opts = inst.options.as_mut().unwrap();
        let wrong = opts.iter().position(|o| o.content != probe).unwrap();
        opts[wrong].content = probe;
        assert!(validate_instance(&inst, &c).is_err());
    }

    #[test]
    fn shuffled_paths_never_chronological() {
        let c = corpus();
        let out = gen_evolution_tasks(&c, &counts(TaskKind::T3_2, 100), &GenOptions::new(11)).unwrap();
        assert_eq!(out.len(), 100);
        for inst in &out {
            let seq = inst.answer_key.sequence().unwrap();
            assert!(!seq.windows(2).all(|w| w[0] < w[1]));
            validate_instance(inst, &c).unwrap();
        }
    }

    #[test]
    fn partial_path_keeps_its_stages() {
        let full = corpus();
        let e = &full.entries()[0];
        let keep = [ScriptStage::OracleBone, ScriptStage::Bronze, ScriptStage::Regular];
        let partial = CharacterEntry {
            char_id: e.char_id.clone(),
            variants: keep
                .iter()
                .map(|s| (*s, e.glyphs(*s).to_vec()))
                .collect::<BTreeMap<ScriptStage, Vec<Glyph>>>(),
        };
        let c = Corpus::new(vec![partial], "p", None).unwrap();
        let out = gen_evolution_tasks(&c, &counts(TaskKind::T3_2, 5), &GenOptions::new(1)).unwrap();
        for inst in out {
            let mut seq = inst.answer_key.sequence().unwrap().to_vec();
            assert_ne!(seq, keep.to_vec());
            seq.sort();
            assert_eq!(seq, keep.to_vec());
        }
    }

    #[test]
    fn missing_stage_has_one_true_option() {
        let c = corpus();
        let out = gen_evolution_tasks(&c, &counts(TaskKind::T3_3, 50), &GenOptions::new(4)).unwrap();
        for inst in &out {
            validate_instance(inst, &c).unwrap();
            // five-stage corpus: four context images and four options
            assert_eq!(inst.image_refs.len(), 8);
            let owner = &inst.image_refs[0].char_id;
            let hits: Vec<usize> = (4..8)
                .filter(|&i| &inst.image_refs[i].char_id == owner)
                .collect();
            assert_eq!(hits.len(), 1);
            let label = inst.answer_key.text().unwrap();
            assert_eq!(inst.option_image(label), Some(hits[0]));
            let missing = inst.image_refs[hits[0]].stage;
            assert!(inst.image_refs[..4].iter().all(|g| g.stage != missing));
        }
    }

    #[test]
    fn generation_is_pure() {
        let c = corpus();
        let all: BTreeMap<TaskKind, usize> = TaskKind::ALL.iter().map(|k| (*k, 20)).collect();
        let a = generate_benchmark(&c, &all, &GenOptions::new(9)).unwrap();
        let b = generate_benchmark(&c, &all, &GenOptions::new(9)).unwrap();
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        assert_eq!(a.instances.len(), 220);
        for inst in &a.instances {
            validate_instance(inst, &c).unwrap();
        }
    }

    #[test]
    fn similarity_mode_picks_nearest_characters() {
        let c = corpus();
        let params = crate::embed::EncoderParams::init(1);
        let index = crate::embed::build_index(&c, &params).unwrap();
        let mut opts = GenOptions::new(6);
        opts.similarity = Some(&index);
        let out = gen_recognition_tasks(&c, &counts(TaskKind::T2_4, 20), &opts).unwrap();
        for inst in &out {
            validate_instance(inst, &c).unwrap();
            let probe = &inst.image_refs[0];
            let ranked = topk_negatives(&index, probe, index.len()).unwrap();
            let mut nearest = Vec::new();
            for g in ranked {
                if !nearest.contains(&g.char_id) {
                    nearest.push(g.char_id);
                }
            }
            let got: BTreeSet<&str> = inst
                .options
                .as_ref()
                .unwrap()
                .iter()
                .map(|o| o.content.as_str())
                .filter(|c| *c != probe.char_id)
                .collect();
            let want: BTreeSet<&str> = nearest.iter().take(3).map(String::as_str).collect();
            assert_eq!(got, want);
        }
    }
}
