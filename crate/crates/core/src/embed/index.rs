use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::{cosine, encode, Embedding, EncoderParams, EMBED_DIM};
use crate::corpus::{Corpus, GlyphRef};
use crate::error::{Error, Result};

/// One embedding per corpus glyph, searched exhaustively.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    entries: Vec<(GlyphRef, Embedding)>,
    lookup: HashMap<GlyphRef, usize>,
}

impl SimilarityIndex {
    pub fn from_entries(entries: Vec<(GlyphRef, Embedding)>) -> Self {
        let lookup = entries
            .iter()
            .enumerate()
            .map(|(i, (r, _))| (r.clone(), i))
            .collect();
        Self { entries, lookup }
    }

    pub fn entries(&self) -> &[(GlyphRef, Embedding)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, r: &GlyphRef) -> Option<&Embedding> {
        self.lookup.get(r).map(|&i| &self.entries[i].1)
    }

    pub fn position(&self, r: &GlyphRef) -> Option<usize> {
        self.lookup.get(r).copied()
    }

    /// CSV rows of `char_id,stage,variant,e0..e63`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("char_id,stage,variant");
        for i in 0..EMBED_DIM {
            out.push_str(&format!(",e{i}"));
        }
        out.push('\n');
        for (r, e) in &self.entries {
            out.push_str(&format!("{},{},{}", r.char_id, r.stage, r.variant));
            for x in e.as_slice() {
                out.push_str(&format!(",{x:?}"));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = |msg: &str| Error::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                msg: msg.to_string(),
            };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 + EMBED_DIM {
                return Err(bad("wrong column count"));
            }
            let stage = cols[1].parse().map_err(|_| bad("bad stage"))?;
            let variant = cols[2].parse().map_err(|_| bad("bad variant"))?;
            let v: Vec<f64> = cols[3..]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad float"))?;
            entries.push((
                GlyphRef::new(cols[0], stage, variant),
                Embedding::from_unit(v),
            ));
        }
        Ok(Self::from_entries(entries))
    }
}

/// Embeds every corpus glyph once, in canonical reference order.
pub fn build_index(corpus: &Corpus, params: &EncoderParams) -> Result<SimilarityIndex> {
    let refs = corpus.refs();
    let entries = refs
        .into_par_iter()
        .map(|r| {
            let e = encode(params, corpus.resolve(&r)?)?;
            Ok((r, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityIndex::from_entries(entries))
}

/// Highest cosine first; equal cosines fall back to the smaller reference.
pub(crate) fn rank_order(a: (f64, &GlyphRef), b: (f64, &GlyphRef)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(b.1))
}

/// The `k` most similar glyphs whose character differs from the query's.
pub fn topk_negatives(
    index: &SimilarityIndex,
    query: &GlyphRef,
    k: usize,
) -> Result<Vec<GlyphRef>> {
    let q = index
        .get(query)
        .ok_or_else(|| Error::NotIndexed(query.to_string()))?;
    let mut scored: Vec<(f64, &GlyphRef)> = index
        .entries
        .iter()
        .filter(|(r, _)| r.char_id != query.char_id)
        .map(|(r, e)| (cosine(q, e), r))
        .collect();
    if k < scored.len() {
        scored.select_nth_unstable_by(k, |a, b| rank_order(*a, *b));
        scored.truncate(k);
    }
    scored.sort_by(|a, b| rank_order(*a, *b));
    Ok(scored.into_iter().map(|(_, r)| r.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ScriptStage;

    fn unit(v: &[f64]) -> Embedding {
        let mut full = vec![0.0; EMBED_DIM];
        full[..v.len()].copy_from_slice(v);
        Embedding::normalized(full)
    }

    #[test]
    fn own_character_is_excluded() {
        let idx = SimilarityIndex::from_entries(vec![
            (GlyphRef::new("日", ScriptStage::Seal, 0), unit(&[1.0])),
            (GlyphRef::new("日", ScriptStage::Regular, 0), unit(&[1.0, 0.1])),
        ]);
        let q = GlyphRef::new("日", ScriptStage::Seal, 0);
        assert!(topk_negatives(&idx, &q, 3).unwrap().is_empty());
    }

    #[test]
    fn ties_prefer_smaller_reference() {
        let q = GlyphRef::new("日", ScriptStage::Seal, 0);
        let idx = SimilarityIndex::from_entries(vec![
            (q.clone(), unit(&[1.0])),
            (GlyphRef::new("目", ScriptStage::Seal, 0), unit(&[1.0, 1.0])),
            (GlyphRef::new("田", ScriptStage::Seal, 0), unit(&[1.0, -1.0])),
        ]);
        let got = topk_negatives(&idx, &q, 1).unwrap();
        // "田" (U+7530) sorts before "目" (U+76EE)
        assert_eq!(got, vec![GlyphRef::new("田", ScriptStage::Seal, 0)]);
    }

    #[test]
    fn unknown_query_is_an_error() {
        let idx = SimilarityIndex::from_entries(vec![]);
        let q = GlyphRef::new("日", ScriptStage::Seal, 0);
        assert!(matches!(
            topk_negatives(&idx, &q, 1),
            Err(Error::NotIndexed(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let idx = SimilarityIndex::from_entries(vec![
            (GlyphRef::new("日", ScriptStage::Seal, 0), unit(&[0.3, 0.4])),
            (GlyphRef::new("月", ScriptStage::Bronze, 2), unit(&[-1.0, 0.5, 2.0])),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("idx.csv");
        idx.write_csv(&p).unwrap();
        let back = SimilarityIndex::read_csv(&p).unwrap();
        assert_eq!(back.entries(), idx.entries());
    }
}
