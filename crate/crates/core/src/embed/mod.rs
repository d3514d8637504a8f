//! Glyph encoder, cosine similarity and the exhaustive similar-glyph index
//! used for hard-negative mining and similarity-hard distractors.

mod encoder;
mod index;

pub use encoder::{
    backward, encode, forward, Embedding, EncoderParams, ForwardTrace, EMBED_DIM, HIDDEN_DIM,
    INPUT_DIM,
};
pub use index::{build_index, topk_negatives, SimilarityIndex};
pub(crate) use index::rank_order as index_rank_order;

/// Dot product of two unit embeddings, clamped into `[-1, 1]`.
pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    dot(a.as_slice(), b.as_slice()).clamp(-1.0, 1.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity of arbitrary non-zero vectors.
pub(crate) fn cosine_raw(a: &[f64], b: &[f64]) -> f64 {
    let na = encoder::norm(a);
    let nb = encoder::norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis(i: usize) -> Embedding {
        let mut v = vec![0.0; EMBED_DIM];
        v[i] = 1.0;
        Embedding::normalized(v)
    }

    #[test]
    fn self_and_orthogonal() {
        let v = Embedding::normalized((0..EMBED_DIM).map(|i| i as f64 + 1.0).collect());
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&basis(0), &basis(1)), 0.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            a in proptest::collection::vec(-1.0f64..1.0, EMBED_DIM),
            b in proptest::collection::vec(-1.0f64..1.0, EMBED_DIM),
        ) {
            let (a, b) = (Embedding::normalized(a), Embedding::normalized(b));
            prop_assert_eq!(cosine(&a, &b), cosine(&b, &a));
            prop_assert!(cosine(&a, &b).abs() <= 1.0 + 1e-9);
            prop_assert!((encoder::norm(a.as_slice()) - 1.0).abs() < 1e-6);
        }
    }
}
