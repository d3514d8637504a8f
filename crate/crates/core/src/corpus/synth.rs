//! Procedural corpora. Each character owns a latent stroke skeleton; the
//! glyph for a stage is that skeleton pushed through a stage-indexed
//! distortion that straightens and regularizes strokes as the ordinal
//! grows. Variants add a small seeded jitter on top.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CharacterEntry, Corpus, Glyph, GlyphBitmap, ScriptStage, CANVAS};
use crate::error::{Error, Result};
use crate::seed::{hash64, rng};

/// First code point handed out to synthetic characters (CJK Unified Ideographs).
const FIRST_CODE_POINT: u32 = 0x4E00;
const MAX_CHARS: usize = 0x9FFF - 0x4E00 + 1;
const CURVE_SEGMENTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_chars: usize,
    /// Inclusive range of variants drawn per populated stage.
    pub variants_per_stage: (u32, u32),
    /// Independent presence probability per stage, oracle bone first.
    pub stage_presence_prob: [f64; 5],
}

impl SynthConfig {
    pub fn new(seed: u64, n_chars: usize) -> Self {
        Self {
            seed,
            n_chars,
            variants_per_stage: (2, 2),
            stage_presence_prob: [1.0; 5],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_chars == 0 || self.n_chars > MAX_CHARS {
            return Err(Error::Config(format!(
                "n_chars must be in 1..={MAX_CHARS}, got {}",
                self.n_chars
            )));
        }
        let (lo, hi) = self.variants_per_stage;
        if hi == 0 || lo > hi {
            return Err(Error::Config(format!(
                "degenerate variants_per_stage range {lo}..={hi}"
            )));
        }
        if self
            .stage_presence_prob
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::Config(
                "stage presence probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: f64,
    y: f64,
}

impl Point {
    fn lerp(self, o: Point, t: f64) -> Point {
        Point {
            x: self.x + (o.x - self.x) * t,
            y: self.y + (o.y - self.y) * t,
        }
    }
}

/// Quadratic Bezier stroke in unit canvas coordinates.
#[derive(Debug, Clone, Copy)]
struct Stroke {
    start: Point,
    ctrl: Point,
    end: Point,
}

#[derive(Debug, Clone)]
struct Skeleton {
    strokes: Vec<Stroke>,
    wobble_freq: f64,
    wobble_phase: f64,
}

/// Per-stage rendering style. Later stages are straighter, less wobbly
/// and more axis-aligned; each stage also has its own proportions and
/// brush weight.
struct StageStyle {
    straighten: f64,
    wobble: f64,
    scale_x: f64,
    scale_y: f64,
    brush: f64,
}

fn stage_style(stage: ScriptStage) -> StageStyle {
    let r = stage.ordinal() as f64 / 4.0;
    let (scale_x, scale_y, brush) = match stage {
        ScriptStage::OracleBone => (0.86, 1.0, 0.62),
        ScriptStage::Bronze => (0.94, 0.98, 1.35),
        ScriptStage::Seal => (0.84, 1.08, 0.9),
        ScriptStage::Clerical => (1.1, 0.84, 1.15),
        ScriptStage::Regular => (1.0, 1.0, 1.0),
    };
    StageStyle {
        straighten: r,
        wobble: 0.035 * (1.0 - r),
        scale_x,
        scale_y,
        brush,
    }
}

fn sample_skeleton(rng: &mut impl Rng) -> Skeleton {
    let n = rng.gen_range(3..=6);
    let strokes = (0..n)
        .map(|_| {
            let start = Point {
                x: rng.gen_range(0.15..0.85),
                y: rng.gen_range(0.15..0.85),
            };
            let len = rng.gen_range(0.25..0.6);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let end = Point {
                x: (start.x + len * angle.cos()).clamp(0.1, 0.9),
                y: (start.y + len * angle.sin()).clamp(0.1, 0.9),
            };
            let mid = start.lerp(end, 0.5);
            let (dx, dy) = (end.x - start.x, end.y - start.y);
            let bend = rng.gen_range(-0.35..0.35);
            let ctrl = Point {
                x: mid.x - dy * bend,
                y: mid.y + dx * bend,
            };
            Stroke { start, ctrl, end }
        })
        .collect();
    Skeleton {
        strokes,
        wobble_freq: rng.gen_range(2.0..5.0),
        wobble_phase: rng.gen_range(0.0..std::f64::consts::TAU),
    }
}

/// Applies the stage distortion and variant jitter, returning polylines.
fn stage_polylines(
    skel: &Skeleton,
    style: &StageStyle,
    jitter: &mut impl Rng,
    jitter_scale: f64,
) -> Vec<Vec<Point>> {
    let center = Point { x: 0.5, y: 0.5 };
    let place = |p: Point| Point {
        x: center.x + (p.x - center.x) * style.scale_x,
        y: center.y + (p.y - center.y) * style.scale_y,
    };
    let mut jit = |p: Point| Point {
        x: p.x + jitter.gen_range(-1.0..=1.0) * jitter_scale,
        y: p.y + jitter.gen_range(-1.0..=1.0) * jitter_scale,
    };
    skel.strokes
        .iter()
        .map(|s| {
            // straighten: pull the direction toward its dominant axis and the
            // control point toward the chord midpoint
            let (dx, dy) = (s.end.x - s.start.x, s.end.y - s.start.y);
            let snapped = if dx.abs() >= dy.abs() {
                (dx.signum() * dx.hypot(dy), 0.0)
            } else {
                (0.0, dy.signum() * dx.hypot(dy))
            };
            let t = 0.7 * style.straighten;
            let end = Point {
                x: s.start.x + dx + (snapped.0 - dx) * t,
                y: s.start.y + dy + (snapped.1 - dy) * t,
            };
            let ctrl = s.ctrl.lerp(s.start.lerp(end, 0.5), style.straighten);
            let (start, ctrl, end) = (jit(place(s.start)), jit(place(ctrl)), jit(place(end)));
            let (nx, ny) = {
                let (ex, ey) = (end.x - start.x, end.y - start.y);
                let l = ex.hypot(ey).max(1e-9);
                (-ey / l, ex / l)
            };
            (0..=CURVE_SEGMENTS)
                .map(|i| {
                    let u = i as f64 / CURVE_SEGMENTS as f64;
                    let a = start.lerp(ctrl, u);
                    let b = ctrl.lerp(end, u);
                    let p = a.lerp(b, u);
                    let w = style.wobble
                        * (skel.wobble_freq * u * std::f64::consts::PI + skel.wobble_phase).sin();
                    Point {
                        x: p.x + nx * w,
                        y: p.y + ny * w,
                    }
                })
                .collect()
        })
        .collect()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0)
    };
    (p.x - (a.x + t * vx)).hypot(p.y - (a.y + t * vy))
}

fn rasterize(polylines: &[Vec<Point>], brush_px: f64) -> GlyphBitmap {
    let size = CANVAS as f64;
    let scaled: Vec<Vec<Point>> = polylines
        .iter()
        .map(|pl| {
            pl.iter()
                .map(|p| Point {
                    x: p.x * size,
                    y: p.y * size,
                })
                .collect()
        })
        .collect();
    let mut bm = GlyphBitmap::blank(CANVAS, CANVAS);
    for y in 0..CANVAS {
        for x in 0..CANVAS {
            let c = Point {
                x: x as f64 + 0.5,
                y: y as f64 + 0.5,
            };
            let hit = scaled.iter().any(|pl| {
                pl.windows(2)
                    .any(|w| segment_distance(c, w[0], w[1]) <= brush_px)
            });
            if hit {
                bm.set(x, y, 1);
            }
        }
    }
    if bm.ink_count() == 0 {
        // brushes thinner than half a pixel can slip between pixel centers
        let p = scaled[0][0];
        let x = (p.x as usize).min(CANVAS - 1);
        let y = (p.y as usize).min(CANVAS - 1);
        bm.set(x, y, 1);
    }
    bm
}

/// Deterministic synthetic corpus; a pure function of `config`.
pub fn synth_corpus(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let (vlo, vhi) = config.variants_per_stage;
    let mut entries = Vec::with_capacity(config.n_chars);
    for i in 0..config.n_chars {
        let char_id = char::from_u32(FIRST_CODE_POINT + i as u32)
            .expect("CJK block code point")
            .to_string();
        let idx = (i as u64).to_le_bytes();
        let skeleton = sample_skeleton(&mut rng(hash64(config.seed, &[b"skeleton", &idx])));

        let mut layout = rng(hash64(config.seed, &[b"layout", &idx]));
        let mut present: Vec<bool> = config
            .stage_presence_prob
            .iter()
            .map(|&p| layout.gen_bool(p))
            .collect();
        if !present.iter().any(|&p| p) {
            let forced = layout.gen_range(0..present.len());
            present[forced] = true;
        }
        let mut variants = BTreeMap::new();
        for stage in ScriptStage::ALL {
            if !present[stage.ordinal()] {
                continue;
            }
            let n_var = layout.gen_range(vlo..=vhi).max(1);
            let style = stage_style(stage);
            let glyphs = (0..n_var)
                .map(|v| {
                    let mut jitter = rng(hash64(
                        config.seed,
                        &[b"jitter", &idx, &[stage.ordinal() as u8], &v.to_le_bytes()],
                    ));
                    let lines = stage_polylines(&skeleton, &style, &mut jitter, 0.012);
                    Glyph {
                        variant: v,
                        bitmap: rasterize(&lines, style.brush),
                    }
                })
                .collect();
            variants.insert(stage, glyphs);
        }
        entries.push(CharacterEntry { char_id, variants });
    }
    Corpus::new(
        entries,
        format!("synthetic(seed={}, n_chars={})", config.seed, config.n_chars),
        Some(config.seed),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{pixel_overlap, validate_glyph, ValidationResult};

    #[test]
    fn full_presence_populates_every_stage() {
        let c = synth_corpus(&SynthConfig::new(7, 50)).unwrap();
        assert_eq!(c.len(), 50);
        for e in c.entries() {
            assert_eq!(e.stage_count(), 5);
            for s in ScriptStage::ALL {
                for g in e.glyphs(s) {
                    assert_eq!(validate_glyph(&g.bitmap), ValidationResult::Ok);
                }
            }
        }
    }

    #[test]
    fn pure_in_seed() {
        let a = synth_corpus(&SynthConfig::new(7, 20)).unwrap();
        let b = synth_corpus(&SynthConfig::new(7, 20)).unwrap();
        assert_eq!(a, b);
        let c = synth_corpus(&SynthConfig::new(8, 20)).unwrap();
        let differs = a.refs().iter().any(|r| a.glyph(r) != c.glyph(r));
        assert!(differs);
    }

    #[test]
    fn zero_presence_still_forces_one_stage() {
        let mut cfg = SynthConfig::new(1, 30);
        cfg.stage_presence_prob = [0.0; 5];
        let c = synth_corpus(&cfg).unwrap();
        assert!(c.entries().iter().all(|e| e.stage_count() == 1));
    }

    #[test]
    fn degenerate_configs_rejected() {
        let mut cfg = SynthConfig::new(1, 10);
        cfg.variants_per_stage = (0, 0);
        assert!(synth_corpus(&cfg).is_err());
        assert!(synth_corpus(&SynthConfig::new(1, 0)).is_err());
        let mut cfg = SynthConfig::new(1, 10);
        cfg.stage_presence_prob[2] = 1.5;
        assert!(synth_corpus(&cfg).is_err());
    }

    #[test]
    fn adjacent_stages_overlap_more_than_strangers() {
        let c = synth_corpus(&SynthConfig::new(7, 40)).unwrap();
        let mut same = Vec::new();
        for e in c.entries() {
            for w in ScriptStage::ALL.windows(2) {
                same.push(pixel_overlap(
                    &e.glyphs(w[0])[0].bitmap,
                    &e.glyphs(w[1])[0].bitmap,
                ));
            }
        }
        let mut cross = Vec::new();
        for (i, a) in c.entries().iter().enumerate() {
            for b in &c.entries()[i + 1..] {
                for s in ScriptStage::ALL {
                    cross.push(pixel_overlap(&a.glyphs(s)[0].bitmap, &b.glyphs(s)[0].bitmap));
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&same) > mean(&cross), "{} vs {}", mean(&same), mean(&cross));
    }
}
