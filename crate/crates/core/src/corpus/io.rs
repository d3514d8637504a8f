use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    pbm, validate_glyph, CharacterEntry, Corpus, Glyph, GlyphRef, ScriptStage, ValidationResult,
    CANVAS,
};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const META_FILE: &str = "corpus.json";

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLine {
    char_id: String,
    stage: String,
    variant: u32,
    bitmap_path: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusMeta {
    provenance: String,
    seed: Option<u64>,
}

/// A glyph listed in the manifest but left out of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub glyph: GlyphRef,
    /// One of `missing`, `corrupted`, `blank`, `non_binary`, `bad_dims`.
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

/// Reads a JSONL manifest (plus an optional `corpus.json` sidecar) into a
/// validated corpus. Glyphs that are missing, unreadable or fail
/// validation are dropped and listed in the report.
pub fn load_corpus(manifest_path: &Path) -> Result<(Corpus, LoadReport)> {
    let file = fs::File::open(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut by_char: BTreeMap<String, BTreeMap<ScriptStage, Vec<Glyph>>> = BTreeMap::new();
    let mut report = LoadReport::default();

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(manifest_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| Error::Manifest {
            path: manifest_path.to_path_buf(),
            line: lineno,
            msg,
        };
        let rec: ManifestLine =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let stage: ScriptStage = rec.stage.parse().map_err(|e: Error| malformed(e.to_string()))?;
        if rec.char_id.is_empty() {
            return Err(malformed("empty char_id".into()));
        }
        let key = GlyphRef::new(rec.char_id.clone(), stage, rec.variant);
        if !seen.insert(key.clone()) {
            return Err(Error::DuplicateGlyph(key.to_string()));
        }

        let path = base.join(&rec.bitmap_path);
        let reason = match fs::read(&path) {
            Err(_) => Some("missing".to_string()),
            Ok(bytes) => match pbm::decode(&bytes) {
                Err(_) => Some("corrupted".to_string()),
                Ok(bm) => {
                    let bm = if bm.width() > CANVAS && bm.height() > CANVAS {
                        bm.downsample(CANVAS)
                    } else {
                        bm
                    };
                    match validate_glyph(&bm) {
                        ValidationResult::Ok => {
                            by_char
                                .entry(rec.char_id.clone())
                                .or_default()
                                .entry(stage)
                                .or_default()
                                .push(Glyph {
                                    variant: rec.variant,
                                    bitmap: bm,
                                });
                            None
                        }
                        other => Some(
                            serde_json::to_value(other)?
                                .as_str()
                                .unwrap_or("invalid")
                                .to_string(),
                        ),
                    }
                }
            },
        };
        match reason {
            Some(reason) => {
                log::warn!("rejected glyph {key}: {reason}");
                report.rejected.push(Rejection { glyph: key, reason });
            }
            None => report.accepted += 1,
        }
    }

    let meta_path = base.join(META_FILE);
    let meta = match fs::read(&meta_path) {
        Ok(bytes) => serde_json::from_slice::<CorpusMeta>(&bytes)?,
        Err(_) => CorpusMeta {
            provenance: manifest_path.display().to_string(),
            seed: None,
        },
    };
    let entries = by_char
        .into_iter()
        .map(|(char_id, variants)| CharacterEntry { char_id, variants })
        .collect();
    Ok((Corpus::new(entries, meta.provenance, meta.seed)?, report))
}

/// File stem for a glyph; character ids are hex-encoded by code point so
/// that the file names stay ASCII.
fn glyph_file_name(r: &GlyphRef) -> String {
    let hex: Vec<String> = r.char_id.chars().map(|c| format!("{:x}", c as u32)).collect();
    format!("u{}_{}_{}.pbm", hex.join("-"), r.stage, r.variant)
}

/// Writes `dir/manifest.jsonl`, `dir/corpus.json` and one P4 file per glyph
/// under `dir/glyphs/`. Returns the manifest path.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    let glyph_dir = dir.join("glyphs");
    fs::create_dir_all(&glyph_dir).map_err(|e| Error::io(&glyph_dir, e))?;
    let mut manifest = String::new();
    for e in corpus.entries() {
        for (stage, glyphs) in &e.variants {
            for g in glyphs {
                let r = GlyphRef::new(e.char_id.clone(), *stage, g.variant);
                let rel = format!("glyphs/{}", glyph_file_name(&r));
                let path = dir.join(&rel);
                fs::write(&path, pbm::encode(&g.bitmap)).map_err(|e| Error::io(&path, e))?;
                let line = ManifestLine {
                    char_id: e.char_id.clone(),
                    stage: stage.name().to_string(),
                    variant: g.variant,
                    bitmap_path: rel,
                };
                manifest.push_str(&serde_json::to_string(&line)?);
                manifest.push('\n');
            }
        }
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    let meta = CorpusMeta {
        provenance: corpus.provenance.clone(),
        seed: corpus.seed,
    };
    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?)
        .map_err(|e| Error::io(&meta_path, e))?;
    Ok(manifest_path)
}

/// Accepts either a manifest file or a directory containing `manifest.jsonl`.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}
