//! Stage 1: contrastive glyph pretraining of the encoder.

use rand::seq::{index::sample, SliceRandom};
use serde::{Deserialize, Serialize};

use super::loss::{contrastive_loss, ContrastiveBatch, NegativeSample};
use crate::corpus::{Corpus, GlyphRef};
use crate::embed::{
    backward, build_index, cosine, forward, topk_negatives, EncoderParams, ForwardTrace,
    SimilarityIndex,
};
use crate::error::{Error, Result};
use crate::seed::{hash64, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub epochs: usize,
    pub lr: f64,
    pub tau: f64,
    /// Hard negatives per positive.
    pub k: usize,
    /// Rebuild the mining index every `refresh` epochs; 0 mines once.
    pub refresh: usize,
    /// Cap on positives per character per step.
    pub max_positives: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 1e-2,
            tau: 0.07,
            k: 5,
            refresh: 1,
            max_positives: 16,
        }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("stage1.tau must be > 0, got {}", self.tau)));
        }
        if self.k == 0 {
            return Err(Error::Config("stage1.k must be ≥ 1".into()));
        }
        if self.max_positives < 2 {
            return Err(Error::Config("stage1.max_positives must be ≥ 2".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("stage1.lr must be ≥ 0, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage1Epoch {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct Stage1Outcome {
    pub params: EncoderParams,
    pub log: Vec<Stage1Epoch>,
}

/// Mean same-character cross-stage cosine minus mean cosine to the `k`
/// mined negatives, both measured on `index`.
pub fn separation_margin(index: &SimilarityIndex, k: usize) -> Result<f64> {
    let entries = index.entries();
    let (mut pos_sum, mut pos_n) = (0.0, 0usize);
    for (i, (a, ea)) in entries.iter().enumerate() {
        for (b, eb) in &entries[i + 1..] {
            if a.char_id == b.char_id && a.stage != b.stage {
                pos_sum += cosine(ea, eb);
                pos_n += 1;
            }
        }
    }
    let (mut neg_sum, mut neg_n) = (0.0, 0usize);
    for (r, e) in entries {
        for n in topk_negatives(index, r, k)? {
            neg_sum += cosine(e, index.get(&n).expect("indexed"));
            neg_n += 1;
        }
    }
    if pos_n == 0 || neg_n == 0 {
        return Err(Error::Training(
            "margin needs a character with ≥2 stages and ≥2 characters".into(),
        ));
    }
    Ok(pos_sum / pos_n as f64 - neg_sum / neg_n as f64)
}

fn trace_of(params: &EncoderParams, corpus: &Corpus, r: &GlyphRef) -> Result<ForwardTrace> {
    forward(params, corpus.resolve(r)?)
}

/// One update on one character's batch. Returns the batch loss.
fn character_step(
    params: &mut EncoderParams,
    corpus: &Corpus,
    index: &SimilarityIndex,
    positives: &[GlyphRef],
    cfg: &Stage1Config,
) -> Result<f64> {
    let pos_traces: Vec<ForwardTrace> = positives
        .iter()
        .map(|r| trace_of(params, corpus, r))
        .collect::<Result<_>>()?;
    let mut neg_refs: Vec<Vec<GlyphRef>> = Vec::with_capacity(positives.len());
    let mut neg_traces: Vec<Vec<ForwardTrace>> = Vec::with_capacity(positives.len());
    for r in positives {
        let refs = topk_negatives(index, r, cfg.k)?;
        neg_traces.push(
            refs.iter()
                .map(|n| trace_of(params, corpus, n))
                .collect::<Result<_>>()?,
        );
        neg_refs.push(refs);
    }
    let batch = ContrastiveBatch {
        anchor_char: positives[0].char_id.clone(),
        positives: pos_traces
            .iter()
            .map(|t| t.embedding.as_slice().to_vec())
            .collect(),
        negatives: neg_refs
            .iter()
            .zip(&neg_traces)
            .map(|(refs, traces)| {
                refs.iter()
                    .zip(traces)
                    .map(|(r, t)| NegativeSample {
                        char_id: r.char_id.clone(),
                        vector: t.embedding.as_slice().to_vec(),
                    })
                    .collect()
            })
            .collect(),
        tau: cfg.tau,
    };
    let out = contrastive_loss(&batch)?;
    if cfg.lr == 0.0 {
        return Ok(out.loss);
    }
    let mut grads = EncoderParams::zeros();
    for (t, g) in pos_traces.iter().zip(&out.grad_positives) {
        backward(params, t, g, &mut grads);
    }
    for (ts, gs) in neg_traces.iter().zip(&out.grad_negatives) {
        for (t, g) in ts.iter().zip(gs) {
            backward(params, t, g, &mut grads);
        }
    }
    params.step(&grads, cfg.lr);
    Ok(out.loss)
}

/// Trains only the encoder, one gradient step per eligible character per
/// epoch in a seeded order. Characters with fewer than two glyphs are
/// skipped.
pub fn stage1_train(
    corpus: &Corpus,
    init: &EncoderParams,
    cfg: &Stage1Config,
    seed: u64,
) -> Result<Stage1Outcome> {
    cfg.validate()?;
    let eligible: Vec<Vec<GlyphRef>> = corpus
        .entries()
        .iter()
        .map(|e| e.refs().collect::<Vec<_>>())
        .filter(|refs| refs.len() >= 2)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Training(
            "stage 1 needs a character with at least two glyphs".into(),
        ));
    }
    if corpus.len() < 2 {
        return Err(Error::Training("stage 1 needs at least two characters".into()));
    }

    let mut params = init.clone();
    let mut index = build_index(corpus, &params)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if epoch > 0 && cfg.refresh > 0 && epoch % cfg.refresh == 0 {
            index = build_index(corpus, &params)?;
        }
        let epoch_bytes = (epoch as u64).to_le_bytes();
        let mut order: Vec<usize> = (0..eligible.len()).collect();
        order.shuffle(&mut rng(hash64(seed, &[b"stage1-order", &epoch_bytes])));
        let mut total = 0.0;
        for &ci in &order {
            let refs = &eligible[ci];
            let positives: Vec<GlyphRef> = if refs.len() > cfg.max_positives {
                let mut r = rng(hash64(
                    seed,
                    &[b"stage1-cap", &epoch_bytes, refs[0].char_id.as_bytes()],
                ));
                let mut picks = sample(&mut r, refs.len(), cfg.max_positives).into_vec();
                picks.sort_unstable();
                picks.into_iter().map(|i| refs[i].clone()).collect()
            } else {
                refs.clone()
            };
            total += character_step(&mut params, corpus, &index, &positives, cfg)?;
        }
        let mean_loss = total / order.len() as f64;
        if !params.is_finite() || !mean_loss.is_finite() {
            return Err(Error::Training(format!("stage 1 diverged at epoch {}", epoch + 1)));
        }
        log::info!("stage1 epoch {} loss {mean_loss:.6}", epoch + 1);
        log.push(Stage1Epoch {
            epoch: epoch + 1,
            mean_loss,
        });
    }
    Ok(Stage1Outcome { params, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthConfig};

    fn small() -> Corpus {
        synth_corpus(&SynthConfig::new(3, 8)).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let c = small();
        let init = EncoderParams::init(1);
        let cfg = Stage1Config {
            epochs: 2,
            lr: 0.0,
            ..Default::default()
        };
        let out = stage1_train(&c, &init, &cfg, 5).unwrap();
        assert_eq!(out.params, init);
        assert_eq!(out.log.len(), 2);
    }

    #[test]
    fn deterministic_in_seed() {
        let c = small();
        let init = EncoderParams::init(1);
        let cfg = Stage1Config {
            epochs: 2,
            ..Default::default()
        };
        let a = stage1_train(&c, &init, &cfg, 5).unwrap();
        let b = stage1_train(&c, &init, &cfg, 5).unwrap();
        assert_eq!(a.params.to_bytes(), b.params.to_bytes());
    }

    #[test]
    fn singleton_corpus_is_rejected() {
        let c = small();
        let one = Corpus::new(vec![c.entries()[0].clone()], "one", None).unwrap();
        let init = EncoderParams::init(1);
        assert!(matches!(
            stage1_train(&one, &init, &Stage1Config::default(), 0),
            Err(Error::Training(_))
        ));
    }
}
