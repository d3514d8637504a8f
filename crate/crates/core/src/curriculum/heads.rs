//! Shallow task heads fitted in Stage 3. They read only encoder
//! embeddings and recognizer probabilities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::recognizer::Recognizer;
use crate::benchgen::TaskKind;
use crate::corpus::{GlyphBitmap, ScriptStage};
use crate::embed::{cosine_raw, encode, EncoderParams};
use crate::error::Result;

/// Feature space the stage probe is fitted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProbeInput {
    /// Recognizer log-probabilities.
    #[default]
    Recognizer,
    Embedding,
}

/// Nearest-centroid stage classifier with a shared isotropic variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageProbe {
    /// Indexed by stage ordinal; `None` for stages without samples.
    pub centroids: Vec<Option<Vec<f64>>>,
    pub sigma2: f64,
}

impl Default for StageProbe {
    fn default() -> Self {
        Self {
            centroids: vec![None; ScriptStage::ALL.len()],
            sigma2: 1.0,
        }
    }
}

impl StageProbe {
    pub fn fit(samples: &[(Vec<f64>, ScriptStage)]) -> Self {
        let Some(dim) = samples.first().map(|(f, _)| f.len()) else {
            return Self::default();
        };
        let mut sums = vec![vec![0.0; dim]; ScriptStage::ALL.len()];
        let mut counts = vec![0usize; ScriptStage::ALL.len()];
        for (f, s) in samples {
            counts[s.ordinal()] += 1;
            for (a, x) in sums[s.ordinal()].iter_mut().zip(f) {
                *a += x;
            }
        }
        let centroids: Vec<Option<Vec<f64>>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &n)| (n > 0).then(|| s.into_iter().map(|x| x / n as f64).collect()))
            .collect();
        let spread: f64 = samples
            .iter()
            .map(|(f, s)| sq_dist(f, centroids[s.ordinal()].as_ref().expect("has samples")))
            .sum();
        let sigma2 = spread / (samples.len() * dim) as f64;
        Self {
            centroids,
            sigma2: if sigma2 > 0.0 { sigma2 } else { 1.0 },
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.centroids.iter().any(Option::is_some)
    }

    /// Log-posterior up to a constant; stages without a centroid get
    /// `-inf` unless nothing was fitted, in which case all are equal.
    pub fn log_scores(&self, f: &[f64]) -> [f64; 5] {
        let mut out = [0.0; 5];
        if !self.is_fitted() {
            return out;
        }
        for (o, c) in out.iter_mut().zip(&self.centroids) {
            *o = match c {
                Some(c) => -sq_dist(f, c) / (2.0 * self.sigma2),
                None => f64::NEG_INFINITY,
            };
        }
        out
    }

    pub fn posterior(&self, f: &[f64]) -> [f64; 5] {
        let l = self.log_scores(f);
        let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p = l.map(|x| (x - m).exp());
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        p
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `score = weight * embedding cosine + (1 - weight) * auxiliary cosine`,
/// answering yes above `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryHead {
    pub weight: f64,
    pub threshold: f64,
}

impl Default for BinaryHead {
    fn default() -> Self {
        Self {
            weight: 1.0,
            threshold: 0.5,
        }
    }
}

impl BinaryHead {
    pub fn score(&self, c: (f64, f64)) -> f64 {
        self.weight * c.0 + (1.0 - self.weight) * c.1
    }

    pub fn decide(&self, c: (f64, f64)) -> bool {
        self.score(c) > self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHeads {
    pub probe_input: ProbeInput,
    pub stage_probe: StageProbe,
    pub binary: BTreeMap<TaskKind, BinaryHead>,
    /// Embedding share of the T3.3 option score.
    pub gap_weight: f64,
    /// Training samples used per kind.
    pub samples: BTreeMap<TaskKind, usize>,
}

impl Default for TaskHeads {
    fn default() -> Self {
        Self {
            probe_input: ProbeInput::default(),
            stage_probe: StageProbe::default(),
            binary: BTreeMap::new(),
            gap_weight: 1.0,
            samples: BTreeMap::new(),
        }
    }
}

/// What a head sees of one glyph.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphFeatures {
    pub embedding: Vec<f64>,
    pub probs: Vec<f64>,
    /// `ln` of `probs`, floored at the smallest positive double.
    pub log_probs: Vec<f64>,
}

/// Read-only view of a model for answering.
#[derive(Debug, Clone, Copy)]
pub struct Policy<'a> {
    pub encoder: &'a EncoderParams,
    pub recognizer: &'a Recognizer,
    pub heads: &'a TaskHeads,
}

impl Policy<'_> {
    pub fn features(&self, bitmap: &GlyphBitmap) -> Result<GlyphFeatures> {
        let embedding = encode(self.encoder, bitmap)?.into_vec();
        let probs = self.recognizer.probs(&embedding);
        let log_probs = probs.iter().map(|p| p.max(f64::MIN_POSITIVE).ln()).collect();
        Ok(GlyphFeatures {
            embedding,
            probs,
            log_probs,
        })
    }

    pub fn probe_features<'f>(&self, f: &'f GlyphFeatures) -> &'f [f64] {
        match self.heads.probe_input {
            ProbeInput::Recognizer => &f.log_probs,
            ProbeInput::Embedding => &f.embedding,
        }
    }

    pub fn stage_posterior(&self, f: &GlyphFeatures) -> [f64; 5] {
        self.heads.stage_probe.posterior(self.probe_features(f))
    }

    pub fn stage_log_scores(&self, f: &GlyphFeatures) -> [f64; 5] {
        self.heads.stage_probe.log_scores(self.probe_features(f))
    }

    /// Embedding cosine and the kind's auxiliary cosine: stage posteriors
    /// for style pairs, recognizer probabilities for character pairs.
    pub fn pair_components(&self, kind: TaskKind, a: &GlyphFeatures, b: &GlyphFeatures) -> (f64, f64) {
        let ce = cosine_raw(&a.embedding, &b.embedding);
        let cx = match kind {
            TaskKind::T1_2 | TaskKind::T1_3 => {
                cosine_raw(&self.stage_posterior(a), &self.stage_posterior(b))
            }
            _ => cosine_raw(&a.probs, &b.probs),
        };
        (ce, cx)
    }

    pub fn binary_head(&self, kind: TaskKind) -> BinaryHead {
        self.heads.binary.get(&kind).copied().unwrap_or_default()
    }

    /// Mean similarity of a gap candidate to the context glyphs.
    pub fn gap_components(&self, option: &GlyphFeatures, context: &[GlyphFeatures]) -> (f64, f64) {
        let n = context.len().max(1) as f64;
        let ce = context.iter().map(|c| cosine_raw(&option.embedding, &c.embedding)).sum::<f64>() / n;
        let cx = context.iter().map(|c| cosine_raw(&option.probs, &c.probs)).sum::<f64>() / n;
        (ce, cx)
    }

    pub fn gap_score(&self, c: (f64, f64)) -> f64 {
        let w = self.heads.gap_weight;
        w * c.0 + (1.0 - w) * c.1
    }

    /// Log-probability of a character, `-inf` outside the vocabulary.
    pub fn char_log_prob(&self, f: &GlyphFeatures, char_id: &str) -> f64 {
        match self.recognizer.index_of(char_id) {
            Some(i) => f.log_probs[i],
            None => f64::NEG_INFINITY,
        }
    }
}

/// Assigns distinct stages to glyphs so that the summed log scores are
/// maximal; exhaustive over injective maps (at most 5!/0! = 120).
pub fn assign_stages(scores: &[[f64; 5]]) -> Vec<ScriptStage> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    if n > ScriptStage::ALL.len() {
        // more glyphs than stages: independent argmax
        return scores
            .iter()
            .map(|s| ScriptStage::ALL[super::stage2::argmax(s)])
            .collect();
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(n);
    let mut used = [false; 5];
    fn rec(
        scores: &[[f64; 5]],
        current: &mut Vec<usize>,
        used: &mut [bool; 5],
        total: f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if current.len() == scores.len() {
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                *best = Some((total, current.clone()));
            }
            return;
        }
        let i = current.len();
        for s in 0..5 {
            if used[s] {
                continue;
            }
            // -inf entries are allowed; a path is only kept if strictly better
            used[s] = true;
            current.push(s);
            rec(scores, current, used, total + scores[i][s], best);
            current.pop();
            used[s] = false;
        }
    }
    rec(scores, &mut current, &mut used, 0.0, &mut best);
    let picks = match best {
        Some((_, p)) => p,
        // every assignment scored -inf: fall back to chronological order
        None => (0..n).collect(),
    };
    picks.into_iter().map(|s| ScriptStage::ALL[s]).collect()
}
