//! Stage 2: character recognition on a frozen encoder.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::recognizer::Recognizer;
use crate::corpus::Corpus;
use crate::embed::{encode, EncoderParams};
use crate::error::{Error, Result};
use crate::seed::{hash64, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Config {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self { epochs: 30, lr: 1e-3 }
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("stage2.lr must be ≥ 0, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage2Epoch {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct Stage2Outcome {
    pub recognizer: Recognizer,
    pub log: Vec<Stage2Epoch>,
}

/// Per-sample SGD on cross-entropy over every corpus glyph. The encoder is
/// borrowed immutably; only the head changes.
pub fn stage2_train(
    corpus: &Corpus,
    encoder: &EncoderParams,
    init: &Recognizer,
    cfg: &Stage2Config,
    seed: u64,
) -> Result<Stage2Outcome> {
    cfg.validate()?;
    if init.is_empty() {
        return Err(Error::Training("recognizer vocabulary is empty".into()));
    }
    let samples: Vec<(Vec<f64>, usize)> = corpus
        .refs()
        .into_par_iter()
        .map(|r| {
            let target = init.index_of(&r.char_id).ok_or_else(|| {
                Error::Training(format!("character {} missing from the vocabulary", r.char_id))
            })?;
            Ok((encode(encoder, corpus.resolve(&r)?)?.into_vec(), target))
        })
        .collect::<Result<_>>()?;

    let mut head = init.clone();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng(hash64(seed, &[b"stage2-order", &(epoch as u64).to_le_bytes()])));
        let mut total = 0.0;
        for &i in &order {
            let (z, t) = &samples[i];
            total += head.sgd_step(z, *t, cfg.lr);
        }
        let correct = samples
            .iter()
            .filter(|(z, t)| argmax(&head.logits(z)) == *t)
            .count();
        let entry = Stage2Epoch {
            epoch: epoch + 1,
            mean_loss: total / samples.len() as f64,
            train_accuracy: correct as f64 / samples.len() as f64,
        };
        log::info!(
            "stage2 epoch {} loss {:.6} acc {:.4}",
            entry.epoch,
            entry.mean_loss,
            entry.train_accuracy
        );
        log.push(entry);
    }
    Ok(Stage2Outcome {
        recognizer: head,
        log,
    })
}

/// First index of the maximum.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthConfig};

    #[test]
    fn encoder_is_untouched_and_head_learns() {
        let c = synth_corpus(&SynthConfig::new(2, 6)).unwrap();
        let enc = EncoderParams::init(3);
        let before = enc.to_bytes();
        let vocab: Vec<String> = c.char_ids().map(String::from).collect();
        let init = Recognizer::init(vocab, 4).unwrap();
        let out = stage2_train(&c, &enc, &init, &Stage2Config::default(), 9).unwrap();
        assert_eq!(enc.to_bytes(), before);
        assert!(out.log.last().unwrap().mean_loss < out.log[0].mean_loss);
    }

    #[test]
    fn one_class_is_trivially_right() {
        let c = synth_corpus(&SynthConfig::new(2, 6)).unwrap();
        let one = Corpus::new(vec![c.entries()[0].clone()], "one", None).unwrap();
        let init = Recognizer::init(vec![one.entries()[0].char_id.clone()], 4).unwrap();
        let cfg = Stage2Config { epochs: 1, lr: 1e-3 };
        let out = stage2_train(&one, &EncoderParams::init(1), &init, &cfg, 0).unwrap();
        assert_eq!(out.log[0].train_accuracy, 1.0);
    }
}
