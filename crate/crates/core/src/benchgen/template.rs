//! Instruction templates. Placeholders:
//!
//! * `<image>`  one image slot
//! * `<images>` a run of image slots whose length fills the remaining images
//! * `{stage}`  display name of the queried or missing stage
//! * `{options}` text options, one `X. content` line each

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OptionEntry, TaskKind};
use crate::corpus::ScriptStage;
use crate::error::{Error, Result};

const IMAGE: &str = "<image>";
const IMAGES: &str = "<images>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateConfig {
    pub templates: BTreeMap<String, String>,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        let style_pair = "<image> <image>\nAre these two glyphs written in the same script style? Answer yes or no.";
        let char_pair = "<image> <image>\nDo these two glyphs represent the same character? Answer yes or no.";
        let pairs: [(TaskKind, &str); 11] = [
            (TaskKind::T1_1, "<image>\nWhich script style is this glyph written in? Choose one of: Oracle Bone Script, Bronze Inscription, Seal Script, Clerical Script, Regular Script."),
            (TaskKind::T1_2, style_pair),
            (TaskKind::T1_3, style_pair),
            (TaskKind::T1_4, "Which of the following glyphs is written in {stage}?\nA. <image>\nB. <image>\nC. <image>\nD. <image>\nAnswer with the option letter."),
            (TaskKind::T2_1, "<image>\nWhich modern Chinese character does this ancient glyph correspond to?"),
            (TaskKind::T2_2, char_pair),
            (TaskKind::T2_3, char_pair),
            (TaskKind::T2_4, "<image>\nWhich modern Chinese character does this ancient glyph correspond to?\n{options}\nAnswer with the option letter."),
            (TaskKind::T3_1, "<images>\nThese glyphs show one character evolving from its earliest to its latest form. Which modern Chinese character is it?"),
            (TaskKind::T3_2, "<images>\nThese glyphs of one character are shuffled. Name the script style of each glyph in the order shown, joined by \u{2192}."),
            (TaskKind::T3_3, "<images>\nThese glyphs trace one character's evolution, but its {stage} form is missing. Which option fills the gap?\nA. <image>\nB. <image>\nC. <image>\nD. <image>\nAnswer with the option letter."),
        ];
        Self {
            templates: pairs
                .into_iter()
                .map(|(k, t)| (k.id().to_string(), t.to_string()))
                .collect(),
        }
    }
}

impl TemplateConfig {
    /// Reads a TOML file with a `[templates]` table keyed by task id.
    /// Kinds missing from the file keep their default template.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: TemplateConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (k, v) in parsed.templates {
            let kind: TaskKind = k.parse()?;
            cfg.templates.insert(kind.id().to_string(), v);
        }
        Ok(cfg)
    }

    pub fn get(&self, kind: TaskKind) -> Option<&str> {
        self.templates.get(kind.id()).map(String::as_str)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RenderArgs<'a> {
    pub n_images: usize,
    pub stage: Option<ScriptStage>,
    pub options: Option<&'a [OptionEntry]>,
}

/// Expands a template; the number of image slots must equal `n_images`.
pub fn render_instruction(
    kind: TaskKind,
    templates: &TemplateConfig,
    args: &RenderArgs<'_>,
) -> Result<String> {
    let err = |msg: String| Error::Template {
        kind: kind.to_string(),
        msg,
    };
    let template = templates
        .get(kind)
        .ok_or_else(|| err("no template configured".into()))?;

    let mut text = template.to_string();
    if text.contains("{stage}") {
        let stage = args
            .stage
            .ok_or_else(|| err("template names a stage but none was given".into()))?;
        text = text.replace("{stage}", stage.display_name());
    }
    if text.contains("{options}") {
        let opts = args
            .options
            .ok_or_else(|| err("template lists options but none were given".into()))?;
        let lines: Vec<String> = opts
            .iter()
            .map(|o| format!("{}. {}", o.label, o.content))
            .collect();
        text = text.replace("{options}", &lines.join("\n"));
    }

    let runs = text.matches(IMAGES).count();
    let singles = text.matches(IMAGE).count();
    match runs {
        0 => {
            if singles != args.n_images {
                return Err(err(format!(
                    "{singles} image placeholders but {} images",
                    args.n_images
                )));
            }
        }
        1 => {
            if args.n_images < singles + 1 {
                return Err(err(format!(
                    "{} images cannot fill {singles} fixed slots plus a run",
                    args.n_images
                )));
            }
            let run = vec![IMAGE; args.n_images - singles].join(" ");
            text = text.replace(IMAGES, &run);
        }
        _ => return Err(err("at most one <images> run is allowed".into())),
    }
    Ok(text)
}

/// Number of image slots in rendered text.
pub fn count_placeholders(text: &str) -> usize {
    text.matches(IMAGE).count()
}
