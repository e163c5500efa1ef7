//! Experiment steps shared by the command line and the test suites.

use ddsd_core::backend::{parse_answer_with_fallback, Backend, BackendConfig, BackendError, BackendKind, MockBackend, MockOptions};
use ddsd_core::classifier::{self, LoraSpec, TrainConfig};
use ddsd_core::corpus::{CorpusError, DatasetRecord, Split};
use ddsd_core::eval::ScoredExample;
use ddsd_core::promptgen::{self, FollowupMode, PromptConfig};

use crate::checkpoint::Checkpoint;
use crate::remote::{fan_out, RemoteBackend};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("pair `{pair_id}`")]
    Backend { pair_id: String, source: BackendError },
    #[error(transparent)]
    Classifier(#[from] classifier::ClassifierError),
    #[error("{0}")]
    Invalid(String),
}

pub type SharedBackend = Box<dyn Backend + Sync + Send>;

pub fn make_backend(config: BackendConfig, mock: MockOptions) -> Result<SharedBackend, BackendError> {
    Ok(match config.kind {
        BackendKind::Mock => Box::new(MockBackend::new(config, mock)?),
        BackendKind::Remote => Box::new(RemoteBackend::new(config)?),
    })
}

/// Which records an inference pass covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    Only(Split),
}

impl Subset {
    pub fn select<'a>(&self, records: &'a [DatasetRecord]) -> Vec<&'a DatasetRecord> {
        records
            .iter()
            .filter(|r| match self {
                Subset::All => true,
                Subset::Only(s) => r.split == Some(*s),
            })
            .collect()
    }
}

pub fn hypotheses_for(config: &PromptConfig) -> usize {
    match config.followup_mode {
        FollowupMode::OneBest => 1,
        FollowupMode::NBest(n) => n,
    }
}

/// Rendered prompts, in record order.
pub fn render_prompts(records: &[&DatasetRecord], config: &PromptConfig) -> Result<Vec<String>, PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::Invalid(e.to_string()))?;
    let n = hypotheses_for(config);
    records
        .iter()
        .map(|r| Ok(promptgen::render(&r.to_pair(n)?, config).text))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptingRun {
    pub scores: Vec<ScoredExample>,
    pub fallbacks: usize,
}

impl PromptingRun {
    pub fn fallback_rate(&self) -> f64 {
        if self.scores.is_empty() {
            0.0
        } else {
            self.fallbacks as f64 / self.scores.len() as f64
        }
    }
}

/// Prompting-based detection: generate, parse the last line, emit 0/1.
pub fn infer_prompting(
    backend: &(dyn Backend + Sync),
    records: &[&DatasetRecord],
    config: &PromptConfig,
    max_in_flight: usize,
    fallback_label: u8,
) -> Result<PromptingRun, PipelineError> {
    let prompts = render_prompts(records, config)?;
    let answers = fan_out(&prompts, max_in_flight, |p| backend.generate(p));
    let mut scores = Vec::with_capacity(records.len());
    let mut fallbacks = 0;
    for (r, answer) in records.iter().zip(answers) {
        let raw = answer.map_err(|source| PipelineError::Backend {
            pair_id: r.pair_id.clone(),
            source,
        })?;
        let parsed = parse_answer_with_fallback(&raw, fallback_label);
        fallbacks += usize::from(parsed.was_fallback);
        scores.push(ScoredExample::new(r.pair_id.clone(), r.label, f64::from(parsed.label)));
    }
    Ok(PromptingRun { scores, fallbacks })
}

pub fn embed_all(
    backend: &(dyn Backend + Sync),
    records: &[&DatasetRecord],
    config: &PromptConfig,
    max_in_flight: usize,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let prompts = render_prompts(records, config)?;
    fan_out(&prompts, max_in_flight, |p| backend.embed(p))
        .into_iter()
        .zip(records)
        .map(|(v, r)| {
            v.map_err(|source| PipelineError::Backend {
                pair_id: r.pair_id.clone(),
                source,
            })
        })
        .collect()
}

/// Trains a head on the training records' embeddings.
pub fn train_classifier(
    backend: &(dyn Backend + Sync),
    records: &[&DatasetRecord],
    prompt_config: &PromptConfig,
    train_config: &TrainConfig,
    lora: Option<&LoraSpec>,
    max_in_flight: usize,
) -> Result<Checkpoint, PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::Invalid("no training records".into()));
    }
    let embeddings = embed_all(backend, records, prompt_config, max_in_flight)?;
    let dataset: Vec<(Vec<f64>, u8)> = embeddings.into_iter().zip(records).map(|(e, r)| (e, r.label)).collect();
    let model = classifier::train(&dataset, train_config, lora)?;
    Ok(Checkpoint {
        model,
        train_config: train_config.clone(),
        lora: lora.copied(),
        prompt_config: *prompt_config,
        backend: backend.identity(),
    })
}

/// Classifier-based detection: probability of device-directed speech.
pub fn infer_classifier(
    backend: &(dyn Backend + Sync),
    checkpoint: &Checkpoint,
    records: &[&DatasetRecord],
    max_in_flight: usize,
) -> Result<Vec<ScoredExample>, PipelineError> {
    if backend.embedding_dim() != checkpoint.model.input_dim() {
        return Err(PipelineError::Invalid(format!(
            "backend embeds {} dims, checkpoint expects {}",
            backend.embedding_dim(),
            checkpoint.model.input_dim()
        )));
    }
    let embeddings = embed_all(backend, records, &checkpoint.prompt_config, max_in_flight)?;
    embeddings
        .iter()
        .zip(records)
        .map(|(e, r)| Ok(ScoredExample::new(r.pair_id.clone(), r.label, checkpoint.model.score(e)?)))
        .collect()
}
