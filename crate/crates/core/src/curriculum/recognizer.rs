use rand::Rng;

use crate::embed::EMBED_DIM;
use crate::error::{Error, Result};
use crate::seed::rng;

/// Affine map from an embedding to one score per vocabulary character.
/// `w` is row-major, one row of `EMBED_DIM` weights per character.
#[derive(Debug, Clone, PartialEq)]
pub struct Recognizer {
    pub vocab: Vec<String>,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Recognizer {
    /// Uniform in `[-s, s]`, `s = 1/sqrt(EMBED_DIM)`.
    pub fn init(vocab: Vec<String>, seed: u64) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Training("recognizer vocabulary is empty".into()));
        }
        let mut r = rng(seed);
        let s = 1.0 / (EMBED_DIM as f64).sqrt();
        let w = (0..vocab.len() * EMBED_DIM).map(|_| r.gen_range(-s..=s)).collect();
        let b = (0..vocab.len()).map(|_| r.gen_range(-s..=s)).collect();
        Ok(Self { vocab, w, b })
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn index_of(&self, char_id: &str) -> Option<usize> {
        self.vocab.binary_search_by(|c| c.as_str().cmp(char_id)).ok()
    }

    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.w
            .chunks_exact(EMBED_DIM)
            .zip(&self.b)
            .map(|(row, b)| b + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn probs(&self, z: &[f64]) -> Vec<f64> {
        softmax(&self.logits(z))
    }

    /// Cross-entropy of `target` and its gradient step, applied in place.
    pub(crate) fn sgd_step(&mut self, z: &[f64], target: usize, lr: f64) -> f64 {
        let p = self.probs(z);
        let loss = -p[target].max(f64::MIN_POSITIVE).ln();
        for (c, pc) in p.iter().enumerate() {
            let g = pc - if c == target { 1.0 } else { 0.0 };
            if g == 0.0 {
                continue;
            }
            self.b[c] -= lr * g;
            for (w, x) in self.w[c * EMBED_DIM..(c + 1) * EMBED_DIM].iter_mut().zip(z) {
                *w -= lr * g * x;
            }
        }
        loss
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.w
            .iter()
            .chain(&self.b)
            .flat_map(|x| x.to_le_bytes())
            .collect()
    }

    pub fn from_bytes(vocab: Vec<String>, bytes: &[u8]) -> Result<Self> {
        let v = vocab.len();
        if bytes.len() != 8 * v * (EMBED_DIM + 1) {
            return Err(Error::Format(format!(
                "recognizer blob has {} bytes for a vocabulary of {v}",
                bytes.len()
            )));
        }
        let xs: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let (w, b) = xs.split_at(v * EMBED_DIM);
        Ok(Self {
            vocab,
            w: w.to_vec(),
            b: b.to_vec(),
        })
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_length_is_vocabulary_size() {
        let r = Recognizer::init(vec!["日".into(), "月".into(), "水".into()], 1).unwrap();
        let p = r.probs(&[0.1; EMBED_DIM]);
        assert_eq!(p.len(), 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bytes_round_trip() {
        let r = Recognizer::init(vec!["日".into(), "月".into()], 4).unwrap();
        let back = Recognizer::from_bytes(r.vocab.clone(), &r.to_bytes()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn step_raises_target_probability() {
        let mut r = Recognizer::init(vec!["a".into(), "b".into()], 2).unwrap();
        let z = vec![0.125; EMBED_DIM];
        let before = r.probs(&z)[1];
        r.sgd_step(&z, 1, 0.1);
        assert!(r.probs(&z)[1] > before);
    }

    #[test]
    fn empty_vocabulary_rejected() {
        assert!(Recognizer::init(vec![], 0).is_err());
    }
}
