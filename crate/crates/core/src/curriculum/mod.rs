//! Three-stage curriculum: contrastive glyph pretraining, recognition
//! fine-tuning with a frozen encoder, and task-head fitting.

mod bundle;
mod heads;
mod loss;
mod recognizer;
mod stage1;
mod stage2;
mod stage3;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchgen::{BenchmarkSet, Split, TaskInstance};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::seed::scoped;

pub use bundle::{encoder_seed, recognizer_seed, ModelBundle, Provenance, Variant, BUNDLE_VERSION};
pub use heads::{
    assign_stages, BinaryHead, GlyphFeatures, Policy, ProbeInput, StageProbe, TaskHeads,
};
pub use loss::{contrastive_loss, ContrastiveBatch, ContrastiveOutput, NegativeSample};
pub use recognizer::{softmax, Recognizer};
pub use stage1::{separation_margin, stage1_train, Stage1Config, Stage1Epoch, Stage1Outcome};
pub use stage2::{stage2_train, Stage2Config, Stage2Epoch, Stage2Outcome};
pub use stage3::{stage3_train, BinaryFit, Stage3Config, Stage3Log};

/// Training configuration, read from TOML:
///
/// ```toml
/// [stage1]
/// epochs = 20
/// lr = 0.01
/// tau = 0.07
/// k = 5
/// refresh = 1        # 0 mines negatives once
/// max_positives = 16
///
/// [stage2]
/// epochs = 30
/// lr = 0.001
///
/// [stage3]
/// samples_per_task = 200
/// probe_input = "recognizer"   # or "embedding"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub stage3: Stage3Config,
}

impl CurriculumConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.stage2.validate()
    }
}

#[derive(Debug, Clone)]
pub struct CurriculumRun {
    pub bundle: ModelBundle,
    pub stage1: Vec<Stage1Epoch>,
    pub stage2: Vec<Stage2Epoch>,
    pub stage3: Stage3Log,
}

impl CurriculumRun {
    /// `stage1_loss.csv`, `stage2_loss.csv` and `stage3_fit.csv` for the
    /// stages that ran.
    pub fn write_logs(&self, dir: &Path) -> Result<()> {
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        if !self.stage1.is_empty() {
            let mut s = String::from("epoch,mean_loss\n");
            for e in &self.stage1 {
                s.push_str(&format!("{},{:.9}\n", e.epoch, e.mean_loss));
            }
            write("stage1_loss.csv", s)?;
        }
        if !self.stage2.is_empty() {
            let mut s = String::from("epoch,mean_loss,train_accuracy\n");
            for e in &self.stage2 {
                s.push_str(&format!("{},{:.9},{:.6}\n", e.epoch, e.mean_loss, e.train_accuracy));
            }
            write("stage2_loss.csv", s)?;
        }
        let mut s = String::from("task,weight,threshold,train_accuracy,score_min,score_max\n");
        for b in &self.stage3.binary {
            s.push_str(&format!(
                "{},{},{:.9},{:.6},{:.9},{:.9}\n",
                b.kind, b.weight, b.threshold, b.train_accuracy, b.score_min, b.score_max
            ));
        }
        if let Some(acc) = self.stage3.gap_accuracy {
            s.push_str(&format!("T3.3,{},,{acc:.6},,\n", self.stage3.gap_weight));
        }
        write("stage3_fit.csv", s)
    }
}

/// Runs exactly the stages of `variant`, in order, from a fresh model.
pub fn run_curriculum(
    corpus: &Corpus,
    bench: &BenchmarkSet,
    variant: Variant,
    cfg: &CurriculumConfig,
    seed: u64,
) -> Result<CurriculumRun> {
    cfg.validate()?;
    let mut bundle = ModelBundle::fresh(corpus, seed, variant)?;
    let mut run = CurriculumRun {
        bundle: bundle.clone(),
        stage1: Vec::new(),
        stage2: Vec::new(),
        stage3: Stage3Log::default(),
    };
    let stages = variant.stages();
    if stages.contains(&1) {
        let out = stage1_train(corpus, &bundle.encoder, &cfg.stage1, scoped(seed, "stage1"))?;
        bundle.encoder = out.params;
        bundle.provenance.stages_run.push(1);
        run.stage1 = out.log;
    }
    if stages.contains(&2) {
        let out = stage2_train(
            corpus,
            &bundle.encoder,
            &bundle.recognizer,
            &cfg.stage2,
            scoped(seed, "stage2"),
        )?;
        bundle.recognizer = out.recognizer;
        bundle.provenance.stages_run.push(2);
        run.stage2 = out.log;
    }
    let train: Vec<TaskInstance> = bench.of_split(Split::Train).cloned().collect();
    let (bundle, log) = stage3_train(&bundle, corpus, &train, &cfg.stage3)?;
    run.bundle = bundle;
    run.stage3 = log;
    Ok(run)
}
