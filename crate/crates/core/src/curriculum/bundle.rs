//! Versioned binary model bundle.
//!
//! Layout: magic `SEVOBNDL`, `u32` format version, `u64` header length, a
//! JSON header (provenance, vocabulary, heads), then the encoder and
//! recognizer parameters as little-endian `f64`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::heads::TaskHeads;
use super::recognizer::Recognizer;
use crate::corpus::Corpus;
use crate::embed::EncoderParams;
use crate::error::{Error, Result};
use crate::seed::{fingerprint, scoped};

const MAGIC: &[u8; 8] = b"SEVOBNDL";
pub const BUNDLE_VERSION: u32 = 1;

/// Which training stages a bundle went through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    Full,
    Stage1Only,
    Stage2Only,
    SFTOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::Stage1Only,
        Variant::Stage2Only,
        Variant::SFTOnly,
    ];

    pub fn stages(self) -> &'static [u8] {
        match self {
            Variant::Full => &[1, 2, 3],
            Variant::Stage1Only => &[1, 3],
            Variant::Stage2Only => &[2, 3],
            Variant::SFTOnly => &[3],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "Full",
            Variant::Stage1Only => "Stage1Only",
            Variant::Stage2Only => "Stage2Only",
            Variant::SFTOnly => "SFTOnly",
        }
    }

    /// e.g. `Full(1+2+3)`.
    pub fn label(self) -> String {
        let s: Vec<String> = self.stages().iter().map(u8::to_string).collect();
        format!("{}({})", self.name(), s.join("+"))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub variant: Variant,
    pub stages_run: Vec<u8>,
    pub seed: u64,
    pub corpus_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub encoder: EncoderParams,
    pub recognizer: Recognizer,
    pub heads: TaskHeads,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Header {
    provenance: Provenance,
    vocab: Vec<String>,
    heads: TaskHeads,
    encoder_bytes: u64,
    recognizer_bytes: u64,
}

/// Seed of the initial encoder for a run seed.
pub fn encoder_seed(seed: u64) -> u64 {
    scoped(seed, "encoder-init")
}

/// Seed of the initial recognizer for a run seed.
pub fn recognizer_seed(seed: u64) -> u64 {
    scoped(seed, "recognizer-init")
}

impl ModelBundle {
    /// Untrained bundle with default heads; no stage has run yet.
    pub fn fresh(corpus: &Corpus, seed: u64, variant: Variant) -> Result<Self> {
        let vocab: Vec<String> = corpus.char_ids().map(String::from).collect();
        Ok(Self {
            encoder: EncoderParams::init(encoder_seed(seed)),
            recognizer: Recognizer::init(vocab, recognizer_seed(seed))?,
            heads: TaskHeads::default(),
            provenance: Provenance {
                variant,
                stages_run: Vec::new(),
                seed,
                corpus_fingerprint: Some(corpus.fingerprint()),
            },
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let enc = self.encoder.to_bytes();
        let rec = self.recognizer.to_bytes();
        let header = serde_json::to_vec(&Header {
            provenance: self.provenance.clone(),
            vocab: self.recognizer.vocab.clone(),
            heads: self.heads.clone(),
            encoder_bytes: enc.len() as u64,
            recognizer_bytes: rec.len() as u64,
        })?;
        let mut out = Vec::with_capacity(20 + header.len() + enc.len() + rec.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&enc);
        out.extend_from_slice(&rec);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("bundle: {m}"));
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != BUNDLE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let rest = &bytes[20..];
        if rest.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&rest[..hlen])?;
        let body = &rest[hlen..];
        let (el, rl) = (header.encoder_bytes as usize, header.recognizer_bytes as usize);
        if body.len() != el + rl {
            return Err(bad("parameter section has the wrong length"));
        }
        Ok(Self {
            encoder: EncoderParams::from_bytes(&body[..el])?,
            recognizer: Recognizer::from_bytes(header.vocab, &body[el..])?,
            heads: header.heads,
            provenance: header.provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the serialized bundle.
    pub fn hash(&self) -> Result<String> {
        Ok(fingerprint(&self.to_bytes()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthConfig};

    #[test]
    fn round_trip() {
        let c = synth_corpus(&SynthConfig::new(1, 4)).unwrap();
        let b = ModelBundle::fresh(&c, 5, Variant::Full).unwrap();
        let back = ModelBundle::from_bytes(&b.to_bytes().unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(ModelBundle::from_bytes(b"not a bundle at all, sorry").is_err());
    }

    #[test]
    fn variant_labels() {
        assert_eq!(Variant::Full.label(), "Full(1+2+3)");
        assert_eq!("stage2only".parse::<Variant>().unwrap(), Variant::Stage2Only);
    }
}
