use rand::Rng;

use crate::corpus::{GlyphBitmap, CANVAS, CANVAS_PIXELS};
use crate::error::{Error, Result};
use crate::seed::rng;

pub const INPUT_DIM: usize = CANVAS_PIXELS;
pub const HIDDEN_DIM: usize = 256;
pub const EMBED_DIM: usize = 64;

/// Two-layer glyph encoder: `1024 -> 256 (tanh) -> 64`, L2-normalized.
///
/// `w1` is stored pixel-major (`w1[pixel * HIDDEN_DIM + h]`) so that the
/// forward pass over a sparse binary input is a sum of columns. `w2` is
/// stored output-major (`w2[o * HIDDEN_DIM + h]`).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl EncoderParams {
    /// Uniform init in `[-s, s]`, `s = 1/sqrt(fan_in)`, per layer.
    pub fn init(seed: u64) -> Self {
        let mut r = rng(seed);
        let s1 = 1.0 / (INPUT_DIM as f64).sqrt();
        let s2 = 1.0 / (HIDDEN_DIM as f64).sqrt();
        let mut draw = |n: usize, s: f64| -> Vec<f64> {
            (0..n).map(|_| r.gen_range(-s..=s)).collect()
        };
        let w1 = draw(INPUT_DIM * HIDDEN_DIM, s1);
        let b1 = draw(HIDDEN_DIM, s1);
        let w2 = draw(EMBED_DIM * HIDDEN_DIM, s2);
        let b2 = draw(EMBED_DIM, s2);
        Self { w1, b1, w2, b2 }
    }

    pub fn zeros() -> Self {
        Self {
            w1: vec![0.0; INPUT_DIM * HIDDEN_DIM],
            b1: vec![0.0; HIDDEN_DIM],
            w2: vec![0.0; EMBED_DIM * HIDDEN_DIM],
            b2: vec![0.0; EMBED_DIM],
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Little-endian dump of all parameters, in field order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * self.len());
        for v in [&self.w1, &self.b1, &self.w2, &self.b2] {
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut p = Self::zeros();
        if bytes.len() != 8 * p.len() {
            return Err(Error::Format(format!(
                "encoder blob has {} bytes, expected {}",
                bytes.len(),
                8 * p.len()
            )));
        }
        let mut chunks = bytes.chunks_exact(8);
        for v in [&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2] {
            for x in v.iter_mut() {
                *x = f64::from_le_bytes(chunks.next().expect("length checked").try_into().unwrap());
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self -= lr * grads`.
    pub fn step(&mut self, grads: &EncoderParams, lr: f64) {
        let pairs = [
            (&mut self.w1, &grads.w1),
            (&mut self.b1, &grads.b1),
            (&mut self.w2, &grads.w2),
            (&mut self.b2, &grads.b2),
        ];
        for (p, g) in pairs {
            for (x, d) in p.iter_mut().zip(g.iter()) {
                *x -= lr * d;
            }
        }
    }
}

/// Unit-norm encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `v`. A zero vector maps to the first basis vector so that
    /// the output is always unit length.
    pub fn normalized(mut v: Vec<f64>) -> Self {
        let n = norm(&v);
        if n > 0.0 && n.is_finite() {
            v.iter_mut().for_each(|x| *x /= n);
        } else {
            v.iter_mut().for_each(|x| *x = 0.0);
            if let Some(first) = v.first_mut() {
                *first = 1.0;
            }
        }
        Embedding(v)
    }

    /// Wraps a vector that is already unit length (deserialization).
    pub(crate) fn from_unit(v: Vec<f64>) -> Self {
        Embedding(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    ink: Vec<usize>,
    hidden: Vec<f64>,
    norm: f64,
    pub embedding: Embedding,
}

fn check_canvas(bitmap: &GlyphBitmap) -> Result<()> {
    if bitmap.width() != CANVAS || bitmap.height() != CANVAS {
        return Err(Error::Bitmap(format!(
            "encoder expects {CANVAS}x{CANVAS}, got {}x{}",
            bitmap.width(),
            bitmap.height()
        )));
    }
    Ok(())
}

pub fn forward(params: &EncoderParams, bitmap: &GlyphBitmap) -> Result<ForwardTrace> {
    check_canvas(bitmap)?;
    let ink: Vec<usize> = bitmap.ink_indices().collect();
    let mut hidden = params.b1.clone();
    for &px in &ink {
        let col = &params.w1[px * HIDDEN_DIM..(px + 1) * HIDDEN_DIM];
        for (h, w) in hidden.iter_mut().zip(col) {
            *h += w;
        }
    }
    hidden.iter_mut().for_each(|h| *h = h.tanh());
    let pre_norm: Vec<f64> = (0..EMBED_DIM)
        .map(|o| {
            let row = &params.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
            params.b2[o] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
        })
        .collect();
    let n = norm(&pre_norm);
    let embedding = Embedding::normalized(pre_norm);
    Ok(ForwardTrace {
        ink,
        hidden,
        norm: n,
        embedding,
    })
}

/// Flatten, affine, tanh, affine, L2-normalize.
pub fn encode(params: &EncoderParams, bitmap: &GlyphBitmap) -> Result<Embedding> {
    Ok(forward(params, bitmap)?.embedding)
}

/// Accumulates into `grads` the parameter gradient given `d loss / d z`.
pub fn backward(
    params: &EncoderParams,
    trace: &ForwardTrace,
    grad_z: &[f64],
    grads: &mut EncoderParams,
) {
    if trace.norm == 0.0 || !trace.norm.is_finite() {
        return;
    }
    let z = trace.embedding.as_slice();
    let zg: f64 = z.iter().zip(grad_z).map(|(a, b)| a * b).sum();
    let grad_u: Vec<f64> = grad_z
        .iter()
        .zip(z)
        .map(|(g, zi)| (g - zi * zg) / trace.norm)
        .collect();

    let mut grad_h = vec![0.0; HIDDEN_DIM];
    for (o, &gu) in grad_u.iter().enumerate() {
        if gu == 0.0 {
            continue;
        }
        grads.b2[o] += gu;
        let row = &params.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
        let grow = &mut grads.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
        for h in 0..HIDDEN_DIM {
            grow[h] += gu * trace.hidden[h];
            grad_h[h] += gu * row[h];
        }
    }
    let grad_pre: Vec<f64> = grad_h
        .iter()
        .zip(&trace.hidden)
        .map(|(g, h)| g * (1.0 - h * h))
        .collect();
    for (b, g) in grads.b1.iter_mut().zip(&grad_pre) {
        *b += g;
    }
    for &px in &trace.ink {
        let col = &mut grads.w1[px * HIDDEN_DIM..(px + 1) * HIDDEN_DIM];
        for (c, g) in col.iter_mut().zip(&grad_pre) {
            *c += g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthConfig};

    fn sample_bitmaps(n: usize) -> Vec<GlyphBitmap> {
        let c = synth_corpus(&SynthConfig::new(5, n)).unwrap();
        c.refs()
            .iter()
            .map(|r| c.glyph(r).unwrap().clone())
            .collect()
    }

    #[test]
    fn output_is_unit_norm_and_deterministic() {
        let p = EncoderParams::init(1);
        for bm in sample_bitmaps(3) {
            let a = encode(&p, &bm).unwrap();
            assert!((norm(a.as_slice()) - 1.0).abs() < 1e-6);
            let b = encode(&p, &bm).unwrap();
            assert_eq!(
                a.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn zero_w2_with_bias_is_constant() {
        let mut p = EncoderParams::init(2);
        p.w2.iter_mut().for_each(|w| *w = 0.0);
        p.b2 = (0..EMBED_DIM).map(|i| i as f64 - 10.0).collect();
        let bms = sample_bitmaps(2);
        let first = encode(&p, &bms[0]).unwrap();
        for bm in &bms[1..] {
            assert_eq!(encode(&p, bm).unwrap(), first);
        }
    }

    #[test]
    fn rejects_non_canonical_size() {
        let p = EncoderParams::init(0);
        let bm = GlyphBitmap::new(8, 8, vec![1; 64]).unwrap();
        assert!(encode(&p, &bm).is_err());
    }

    #[test]
    fn bytes_round_trip() {
        let p = EncoderParams::init(9);
        assert_eq!(EncoderParams::from_bytes(&p.to_bytes()).unwrap(), p);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // loss = c . z for a fixed random c
        let p = EncoderParams::init(3);
        let bm = &sample_bitmaps(1)[0];
        let mut r = rng(11);
        let c: Vec<f64> = (0..EMBED_DIM).map(|_| r.gen_range(-1.0..1.0)).collect();
        let loss = |p: &EncoderParams| -> f64 {
            let z = encode(p, bm).unwrap();
            z.as_slice().iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let trace = forward(&p, bm).unwrap();
        let mut g = EncoderParams::zeros();
        backward(&p, &trace, &c, &mut g);
        let h = 1e-6;
        let ink: Vec<usize> = bm.ink_indices().take(3).collect();
        let mut checks = vec![];
        for &px in &ink {
            checks.push(("w1", px * HIDDEN_DIM + 7));
        }
        checks.extend([("b1", 5), ("w2", 3 * HIDDEN_DIM + 9), ("b2", 4)]);
        for (field, idx) in checks {
            let mut plus = p.clone();
            let mut minus = p.clone();
            let (vp, vm, gv) = match field {
                "w1" => (&mut plus.w1, &mut minus.w1, g.w1[idx]),
                "b1" => (&mut plus.b1, &mut minus.b1, g.b1[idx]),
                "w2" => (&mut plus.w2, &mut minus.w2, g.w2[idx]),
                _ => (&mut plus.b2, &mut minus.b2, g.b2[idx]),
            };
            vp[idx] += h;
            vm[idx] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (fd - gv).abs() <= 1e-6 * (1.0 + fd.abs()),
                "{field}[{idx}]: fd {fd} vs analytic {gv}"
            );
        }
    }
}
