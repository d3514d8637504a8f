//! Multi-positive contrastive loss with per-positive hard negatives.
//!
//! For positives `P` and negative sets `N_i`:
//!
//! ```text
//! L = -1/|P| * sum_i log( S_i+ / (S_i+ + S_i-) )
//! S_i+ = sum_{j != i} exp(cos(z_i, z_j) / tau)
//! S_i- = sum_{n in N_i} exp(cos(z_i, z_n) / tau)
//! ```

use crate::embed::{cosine_raw, dot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    pub char_id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub anchor_char: String,
    pub positives: Vec<Vec<f64>>,
    /// `negatives[i]` are the mined negatives of `positives[i]`.
    pub negatives: Vec<Vec<NegativeSample>>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grad_positives: Vec<Vec<f64>>,
    pub grad_negatives: Vec<Vec<Vec<f64>>>,
}

impl ContrastiveBatch {
    pub fn validate(&self) -> Result<()> {
        if self.positives.len() < 2 {
            return Err(Error::Training(format!(
                "contrastive batch for {} needs at least 2 positives, got {}",
                self.anchor_char,
                self.positives.len()
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Training(format!("temperature must be > 0, got {}", self.tau)));
        }
        if self.negatives.len() != self.positives.len() {
            return Err(Error::Training("one negative set per positive required".into()));
        }
        let dim = self.positives[0].len();
        let all_vectors = self
            .positives
            .iter()
            .chain(self.negatives.iter().flatten().map(|n| &n.vector));
        for v in all_vectors {
            if v.len() != dim {
                return Err(Error::Training("embedding dimensions differ".into()));
            }
        }
        if let Some(n) = self
            .negatives
            .iter()
            .flatten()
            .find(|n| n.char_id == self.anchor_char)
        {
            return Err(Error::Training(format!(
                "negative drawn from the anchor character {}",
                n.char_id
            )));
        }
        Ok(())
    }
}

/// d cos(a, b) / d a
fn cosine_grad(a: &[f64], b: &[f64]) -> Vec<f64> {
    let na2 = dot(a, a);
    let nb2 = dot(b, b);
    let (na, nb) = (na2.sqrt(), nb2.sqrt());
    if na == 0.0 || nb == 0.0 {
        return vec![0.0; a.len()];
    }
    let c = dot(a, b) / (na * nb);
    a.iter()
        .zip(b)
        .map(|(ai, bi)| bi / (na * nb) - c * ai / na2)
        .collect()
}

fn axpy(acc: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * v;
    }
}

/// Loss value and exact gradients with respect to every input vector.
pub fn contrastive_loss(batch: &ContrastiveBatch) -> Result<ContrastiveOutput> {
    batch.validate()?;
    let p = &batch.positives;
    let n_pos = p.len();
    let dim = p[0].len();
    let tau = batch.tau;
    let scale = 1.0 / n_pos as f64;

    let mut grad_pos = vec![vec![0.0; dim]; n_pos];
    let mut grad_neg: Vec<Vec<Vec<f64>>> = batch
        .negatives
        .iter()
        .map(|ns| vec![vec![0.0; dim]; ns.len()])
        .collect();
    let mut loss = 0.0;

    for i in 0..n_pos {
        let pos_logits: Vec<(usize, f64)> = (0..n_pos)
            .filter(|&j| j != i)
            .map(|j| (j, cosine_raw(&p[i], &p[j]) / tau))
            .collect();
        let neg_logits: Vec<f64> = batch.negatives[i]
            .iter()
            .map(|n| cosine_raw(&p[i], &n.vector) / tau)
            .collect();
        let m = pos_logits
            .iter()
            .map(|(_, l)| *l)
            .chain(neg_logits.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        let pos_exp: Vec<f64> = pos_logits.iter().map(|(_, l)| (l - m).exp()).collect();
        let neg_exp: Vec<f64> = neg_logits.iter().map(|l| (l - m).exp()).collect();
        let s_pos: f64 = pos_exp.iter().sum();
        let s_neg: f64 = neg_exp.iter().sum();
        let total = s_pos + s_neg;
        loss += total.ln() - s_pos.ln();

        // d l_i / d logit
        for (&(j, _), &e) in pos_logits.iter().zip(&pos_exp) {
            let d = scale * (e / total - e / s_pos) / tau;
            axpy(&mut grad_pos[i], d, &cosine_grad(&p[i], &p[j]));
            axpy(&mut grad_pos[j], d, &cosine_grad(&p[j], &p[i]));
        }
        for (k, (neg, &e)) in batch.negatives[i].iter().zip(&neg_exp).enumerate() {
            let d = scale * (e / total) / tau;
            axpy(&mut grad_pos[i], d, &cosine_grad(&p[i], &neg.vector));
            axpy(&mut grad_neg[i][k], d, &cosine_grad(&neg.vector, &p[i]));
        }
    }

    Ok(ContrastiveOutput {
        loss: loss * scale,
        grad_positives: grad_pos,
        grad_negatives: grad_neg,
    })
}
