//! Staged glyph corpus: characters mapped to per-stage lists of binarized
//! facsimiles.

mod io;
pub mod pbm;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_corpus, manifest_path_for, save_corpus, LoadReport, Rejection, MANIFEST_FILE};
pub use synth::{synth_corpus, SynthConfig};

/// Side length of the canonical square canvas.
pub const CANVAS: usize = 32;
pub const CANVAS_PIXELS: usize = CANVAS * CANVAS;

/// The five historical script stages, in chronological order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ScriptStage {
    OracleBone,
    Bronze,
    Seal,
    Clerical,
    Regular,
}

impl ScriptStage {
    pub const ALL: [ScriptStage; 5] = [
        ScriptStage::OracleBone,
        ScriptStage::Bronze,
        ScriptStage::Seal,
        ScriptStage::Clerical,
        ScriptStage::Regular,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        Self::ALL.get(ordinal).copied()
    }

    /// Identifier used in manifests and answer keys.
    pub fn name(self) -> &'static str {
        match self {
            ScriptStage::OracleBone => "OracleBone",
            ScriptStage::Bronze => "Bronze",
            ScriptStage::Seal => "Seal",
            ScriptStage::Clerical => "Clerical",
            ScriptStage::Regular => "Regular",
        }
    }

    /// Human-readable name used in instructions and emitted answers.
    pub fn display_name(self) -> &'static str {
        match self {
            ScriptStage::OracleBone => "Oracle Bone Script",
            ScriptStage::Bronze => "Bronze Inscription",
            ScriptStage::Seal => "Seal Script",
            ScriptStage::Clerical => "Clerical Script",
            ScriptStage::Regular => "Regular Script",
        }
    }
}

impl fmt::Display for ScriptStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScriptStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let folded: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_lowercase();
        Ok(match folded.as_str() {
            "oraclebone" | "oracle" | "oraclebonescript" => ScriptStage::OracleBone,
            "bronze" | "bronzeinscription" => ScriptStage::Bronze,
            "seal" | "sealscript" => ScriptStage::Seal,
            "clerical" | "clericalscript" => ScriptStage::Clerical,
            "regular" | "regularscript" => ScriptStage::Regular,
            _ => return Err(Error::Format(format!("unknown script stage {s:?}"))),
        })
    }
}

/// Outcome of [`validate_glyph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationResult {
    Ok,
    Blank,
    NonBinary,
    BadDims,
}

/// Row-major raster; 0 is background, 1 is ink.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlyphBitmap {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GlyphBitmap {
    /// Wraps raw pixels. Only the length is checked here; binarization and
    /// blankness are the business of [`validate_glyph`].
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Bitmap(format!(
                "{} pixels do not fill a {width}x{height} grid",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    /// Indices of ink pixels, row-major.
    pub fn ink_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0)
            .map(|(i, _)| i)
    }

    /// Max-pool down to `size`x`size`, then re-binarize at 0.5.
    /// Each output cell covers the source rows/cols that overlap it.
    pub fn downsample(&self, size: usize) -> GlyphBitmap {
        if self.width == size && self.height == size {
            return self.clone();
        }
        let mut out = GlyphBitmap::blank(size, size);
        for oy in 0..size {
            let y0 = oy * self.height / size;
            let y1 = ((oy + 1) * self.height).div_ceil(size).max(y0 + 1);
            for ox in 0..size {
                let x0 = ox * self.width / size;
                let x1 = ((ox + 1) * self.width).div_ceil(size).max(x0 + 1);
                let mut m = 0u8;
                for y in y0..y1.min(self.height) {
                    for x in x0..x1.min(self.width) {
                        m = m.max(self.get(x, y));
                    }
                }
                let v = if f64::from(m) >= 0.5 { 1 } else { 0 };
                out.set(ox, oy, v);
            }
        }
        out
    }
}

/// Checks the bitmap invariants against the canonical canvas.
pub fn validate_glyph(bitmap: &GlyphBitmap) -> ValidationResult {
    if bitmap.width != CANVAS || bitmap.height != CANVAS {
        return ValidationResult::BadDims;
    }
    if bitmap.pixels.iter().any(|&p| p > 1) {
        return ValidationResult::NonBinary;
    }
    if bitmap.ink_count() == 0 {
        return ValidationResult::Blank;
    }
    ValidationResult::Ok
}

/// Intersection-over-union of the ink sets of two same-sized bitmaps.
pub fn pixel_overlap(a: &GlyphBitmap, b: &GlyphBitmap) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.pixels.iter().zip(&b.pixels) {
        let (p, q) = (p != 0, q != 0);
        inter += usize::from(p && q);
        union += usize::from(p || q);
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Address of one glyph in a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GlyphRef {
    pub char_id: String,
    pub stage: ScriptStage,
    pub variant: u32,
}

impl GlyphRef {
    pub fn new(char_id: impl Into<String>, stage: ScriptStage, variant: u32) -> Self {
        Self {
            char_id: char_id.into(),
            stage,
            variant,
        }
    }
}

impl fmt::Display for GlyphRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.char_id, self.stage, self.variant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    pub variant: u32,
    pub bitmap: GlyphBitmap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterEntry {
    pub char_id: String,
    /// Variants per populated stage, sorted by variant index.
    pub variants: BTreeMap<ScriptStage, Vec<Glyph>>,
}

impl CharacterEntry {
    pub fn stages(&self) -> impl Iterator<Item = ScriptStage> + '_ {
        self.variants
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(s, _)| *s)
    }

    pub fn stage_count(&self) -> usize {
        self.stages().count()
    }

    pub fn glyphs(&self, stage: ScriptStage) -> &[Glyph] {
        self.variants.get(&stage).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn refs(&self) -> impl Iterator<Item = GlyphRef> + '_ {
        self.variants.iter().flat_map(move |(stage, glyphs)| {
            glyphs
                .iter()
                .map(move |g| GlyphRef::new(self.char_id.clone(), *stage, g.variant))
        })
    }

    pub fn glyph_count(&self) -> usize {
        self.variants.values().map(Vec::len).sum()
    }
}

/// An immutable, validated corpus. Entries are kept sorted by `char_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<CharacterEntry>,
    pub provenance: String,
    pub seed: Option<u64>,
}

impl Corpus {
    /// Builds a corpus, enforcing unique character ids, valid bitmaps and at
    /// least one populated stage per character.
    pub fn new(
        mut entries: Vec<CharacterEntry>,
        provenance: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        entries.sort_by(|a, b| a.char_id.cmp(&b.char_id));
        for pair in entries.windows(2) {
            if pair[0].char_id == pair[1].char_id {
                return Err(Error::DuplicateGlyph(format!(
                    "character {} appears twice",
                    pair[0].char_id
                )));
            }
        }
        for e in &mut entries {
            e.variants.retain(|_, v| !v.is_empty());
            if e.variants.is_empty() {
                return Err(Error::Bitmap(format!(
                    "character {} has no glyphs",
                    e.char_id
                )));
            }
            for (stage, glyphs) in &mut e.variants {
                glyphs.sort_by_key(|g| g.variant);
                for pair in glyphs.windows(2) {
                    if pair[0].variant == pair[1].variant {
                        return Err(Error::DuplicateGlyph(
                            GlyphRef::new(e.char_id.clone(), *stage, pair[0].variant)
                                .to_string(),
                        ));
                    }
                }
                for g in glyphs.iter() {
                    let v = validate_glyph(&g.bitmap);
                    if v != ValidationResult::Ok {
                        return Err(Error::Bitmap(format!(
                            "{} failed validation: {v:?}",
                            GlyphRef::new(e.char_id.clone(), *stage, g.variant)
                        )));
                    }
                }
            }
        }
        Ok(Self {
            entries,
            provenance: provenance.into(),
            seed,
        })
    }

    pub fn entries(&self) -> &[CharacterEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, char_id: &str) -> Option<&CharacterEntry> {
        self.entries
            .binary_search_by(|e| e.char_id.as_str().cmp(char_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn glyph(&self, r: &GlyphRef) -> Option<&GlyphBitmap> {
        let glyphs = self.entry(&r.char_id)?.variants.get(&r.stage)?;
        glyphs
            .binary_search_by_key(&r.variant, |g| g.variant)
            .ok()
            .map(|i| &glyphs[i].bitmap)
    }

    pub fn resolve(&self, r: &GlyphRef) -> Result<&GlyphBitmap> {
        self.glyph(r)
            .ok_or_else(|| Error::Format(format!("glyph {r} does not resolve in the corpus")))
    }

    /// Every glyph reference in canonical (sorted) order.
    pub fn refs(&self) -> Vec<GlyphRef> {
        self.entries.iter().flat_map(CharacterEntry::refs).collect()
    }

    pub fn glyph_count(&self) -> usize {
        self.entries.iter().map(CharacterEntry::glyph_count).sum()
    }

    pub fn char_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.char_id.as_str())
    }

    /// SHA-256 over the canonical serialization of every glyph.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::new();
        for e in &self.entries {
            for (stage, glyphs) in &e.variants {
                for g in glyphs {
                    bytes.extend_from_slice(e.char_id.as_bytes());
                    bytes.push(0);
                    bytes.push(stage.ordinal() as u8);
                    bytes.extend_from_slice(&g.variant.to_le_bytes());
                    bytes.extend_from_slice(&pbm::encode(&g.bitmap));
                }
            }
        }
        crate::seed::fingerprint(&bytes)
    }
}

/// Glyph counts per stage plus how many characters cover 1..=5 stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub stage_counts: BTreeMap<ScriptStage, usize>,
    pub coverage_histogram: BTreeMap<usize, usize>,
    pub total_glyphs: usize,
    pub characters: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stage_counts: BTreeMap<ScriptStage, usize> =
        ScriptStage::ALL.iter().map(|s| (*s, 0)).collect();
    let mut coverage_histogram = BTreeMap::new();
    for e in corpus.entries() {
        for (stage, glyphs) in &e.variants {
            *stage_counts.entry(*stage).or_default() += glyphs.len();
        }
        *coverage_histogram.entry(e.stage_count()).or_default() += 1;
    }
    CorpusStats {
        stage_counts,
        coverage_histogram,
        total_glyphs: corpus.glyph_count(),
        characters: corpus.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with_ink(n: usize) -> GlyphBitmap {
        let mut px = vec![0u8; CANVAS_PIXELS];
        for p in px.iter_mut().take(n) {
            *p = 1;
        }
        GlyphBitmap::new(CANVAS, CANVAS, px).unwrap()
    }

    #[test]
    fn validation_classes() {
        assert_eq!(validate_glyph(&grid_with_ink(40)), ValidationResult::Ok);
        assert_eq!(validate_glyph(&grid_with_ink(0)), ValidationResult::Blank);
        let mut bad = grid_with_ink(40);
        bad.set(3, 3, 2);
        assert_eq!(validate_glyph(&bad), ValidationResult::NonBinary);
        let small = GlyphBitmap::new(16, 16, vec![1; 256]).unwrap();
        assert_eq!(validate_glyph(&small), ValidationResult::BadDims);
    }

    #[test]
    fn stage_order_matches_history() {
        let mut sorted = ScriptStage::ALL.to_vec();
        sorted.reverse();
        sorted.sort();
        assert_eq!(sorted, ScriptStage::ALL.to_vec());
        for (i, s) in ScriptStage::ALL.iter().enumerate() {
            assert_eq!(s.ordinal(), i);
            assert_eq!(s.name().parse::<ScriptStage>().unwrap(), *s);
        }
    }

    #[test]
    fn downsample_keeps_thin_strokes() {
        let mut big = GlyphBitmap::blank(64, 64);
        for y in 0..64 {
            big.set(17, y, 1);
        }
        let small = big.downsample(CANVAS);
        assert_eq!(small.width(), CANVAS);
        for y in 0..CANVAS {
            assert_eq!(small.get(8, y), 1);
        }
        assert_eq!(small.ink_count(), CANVAS);
    }

    #[test]
    fn single_regular_character_histogram() {
        let entry = CharacterEntry {
            char_id: "日".into(),
            variants: BTreeMap::from([(
                ScriptStage::Regular,
                vec![Glyph {
                    variant: 0,
                    bitmap: grid_with_ink(10),
                }],
            )]),
        };
        let corpus = Corpus::new(vec![entry], "test", None).unwrap();
        let stats = corpus_stats(&corpus);
        assert_eq!(stats.coverage_histogram, BTreeMap::from([(1, 1)]));
        assert_eq!(stats.stage_counts.values().sum::<usize>(), stats.total_glyphs);
    }

    #[test]
    fn corpus_rejects_duplicate_characters() {
        let entry = CharacterEntry {
            char_id: "日".into(),
            variants: BTreeMap::from([(
                ScriptStage::Seal,
                vec![Glyph {
                    variant: 0,
                    bitmap: grid_with_ink(10),
                }],
            )]),
        };
        let err = Corpus::new(vec![entry.clone(), entry], "t", None).unwrap_err();
        assert!(matches!(err, Error::DuplicateGlyph(_)));
    }
}
