//! Deterministic stand-in for an instruction-tuned LLM.
//!
//! `generate` answers `1` when the follow-up's top hypothesis contains a
//! command keyword. `embed` returns a structured vector:
//!
//! | block        | contents                                                     |
//! |--------------|--------------------------------------------------------------|
//! | keywords     | cost-weighted presence of each command keyword / chitchat cue |
//! | topics       | cost-weighted presence of each topic's vocabulary             |
//! | context      | context flag, per-topic initial/follow-up agreement, mismatch |
//! | uncertainty  | n-best cost gaps (zero when no costs are rendered)           |
//! | noise        | normal noise keyed on the follow-up block and the mock seed  |
//!
//! Only the context block depends on the initial query.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Backend, BackendConfig, BackendError};
use crate::hash::fnv1a;
use crate::vocab::{self, CHITCHAT_CUES, COMMAND_KEYWORDS, TOPICS};

#[derive(Debug, Clone, PartialEq)]
pub struct MockOptions {
    /// Prefix every answer with a sentence of reasoning.
    pub verbose: bool,
    /// Answer with an unparseable sentence for roughly one prompt in `n`.
    pub descriptive_period: Option<u64>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for MockOptions {
    fn default() -> Self {
        MockOptions {
            verbose: false,
            descriptive_period: None,
            noise_scale: 0.3,
            seed: 0,
        }
    }
}

/// Index ranges of each feature block inside a mock embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingLayout {
    pub keywords: Range<usize>,
    pub topics: Range<usize>,
    pub context: Range<usize>,
    pub uncertainty: Range<usize>,
    pub noise: Range<usize>,
}

impl EmbeddingLayout {
    pub const UNCERTAINTY_DIMS: usize = 3;

    pub fn new(dim: usize) -> Self {
        let kw = COMMAND_KEYWORDS.len() + CHITCHAT_CUES.len();
        let t = TOPICS.len();
        let keywords = 0..kw;
        let topics = kw..kw + t;
        let context = topics.end..topics.end + t + 2;
        let uncertainty = context.end..context.end + Self::UNCERTAINTY_DIMS;
        let noise = uncertainty.end..dim.max(uncertainty.end);
        EmbeddingLayout {
            keywords,
            topics,
            context,
            uncertainty,
            noise,
        }
    }

    /// Smallest embedding that holds every structured block.
    pub fn min_dim() -> usize {
        Self::new(0).uncertainty.end
    }
}

/// The pieces of a rendered prompt the mock reads back.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedParts<'a> {
    pub initial: Option<&'a str>,
    pub followup_block: &'a str,
    pub hypotheses: Vec<(&'a str, Option<f64>)>,
}

/// Splits a prompt produced by [`crate::promptgen`] into its initial query
/// and follow-up hypotheses. Text that does not follow the layout is read as
/// a bare follow-up.
pub fn parse_rendered(prompt: &str) -> RenderedParts<'_> {
    let utterance = prompt.rsplit_once("\n\n").map_or(prompt, |(_, u)| u);
    let (initial, followup_block) = if let Some(rest) = utterance.strip_prefix("Query 1: ") {
        match rest.split_once(" | Query 2: ") {
            Some((init, fu)) => (Some(init), fu),
            None => (None, utterance),
        }
    } else if let Some(fu) = utterance.strip_prefix("Query 2: ") {
        (None, fu)
    } else {
        (None, utterance)
    };
    let hypotheses = followup_block.lines().map(split_cost).collect();
    RenderedParts {
        initial,
        followup_block,
        hypotheses,
    }
}

fn split_cost(line: &str) -> (&str, Option<f64>) {
    if let Some(body) = line.strip_suffix(']') {
        if let Some((text, cost)) = body.rsplit_once(" [") {
            if let Ok(c) = cost.parse::<f64>() {
                return (text, Some(c));
            }
        }
    }
    (line, None)
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    config: BackendConfig,
    options: MockOptions,
    layout: EmbeddingLayout,
}

impl MockBackend {
    pub fn new(config: BackendConfig, options: MockOptions) -> Result<Self, BackendError> {
        config.validate()?;
        if config.embedding_dim < EmbeddingLayout::min_dim() {
            return Err(BackendError::Validation(format!(
                "mock embeddings need at least {} dims, got {}",
                EmbeddingLayout::min_dim(),
                config.embedding_dim
            )));
        }
        if options.noise_scale.is_nan() || options.noise_scale < 0.0 {
            return Err(BackendError::Validation("noise_scale must be non-negative".into()));
        }
        if options.descriptive_period == Some(0) {
            return Err(BackendError::Validation("descriptive_period must be positive".into()));
        }
        let layout = EmbeddingLayout::new(config.embedding_dim);
        Ok(MockBackend {
            config,
            options,
            layout,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn options(&self) -> &MockOptions {
        &self.options
    }

    pub fn layout(&self) -> &EmbeddingLayout {
        &self.layout
    }
}

fn hypothesis_weights(hyps: &[(&str, Option<f64>)]) -> Vec<f64> {
    let costs: Option<Vec<f64>> = hyps.iter().map(|(_, c)| *c).collect();
    match costs {
        Some(costs) if !costs.is_empty() => {
            let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let raw: Vec<f64> = costs.iter().map(|c| libm::exp(best - c)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        }
        _ => vec![1.0 / hyps.len().max(1) as f64; hyps.len()],
    }
}

fn uncertainty_features(hyps: &[(&str, Option<f64>)]) -> [f64; EmbeddingLayout::UNCERTAINTY_DIMS] {
    let costs: Option<Vec<f64>> = hyps.iter().map(|(_, c)| *c).collect();
    let Some(costs) = costs else {
        return [0.0; 3];
    };
    if costs.len() < 2 {
        return [1.0, 1.0, 0.0];
    }
    let gap = |c: f64| (c - costs[0]).clamp(0.0, 10.0) / 10.0;
    let top = &costs[1..costs.len().min(4)];
    let mean_gap = top.iter().map(|&c| gap(c)).sum::<f64>() / top.len() as f64;
    let close = costs[1..].iter().filter(|&&c| c - costs[0] < 2.0).count() as f64
        / (costs.len() - 1) as f64;
    [gap(costs[1]), mean_gap, close]
}

impl Backend for MockBackend {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::Validation("empty prompt".into()));
        }
        if let Some(period) = self.options.descriptive_period {
            if (fnv1a(prompt.as_bytes()) ^ self.options.seed).is_multiple_of(period) {
                return Ok("It sounds like the user is asking a friend.".into());
            }
        }
        let parts = parse_rendered(prompt);
        let top = parts.hypotheses.first().map_or("", |h| h.0);
        let directed = vocab::contains_any(top, COMMAND_KEYWORDS);
        let answer = match (self.options.verbose, directed) {
            (false, true) => "1",
            (false, false) => "0",
            (true, true) => "I think this is directed to the assistant.\n1",
            (true, false) => "I think this is directed to another person.\n0",
        };
        Ok(answer.into())
    }

    fn embed(&self, prompt: &str) -> Result<Vec<f64>, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::Validation("empty prompt".into()));
        }
        let parts = parse_rendered(prompt);
        let layout = &self.layout;
        let mut v = vec![0.0; self.config.embedding_dim];
        let weights = hypothesis_weights(&parts.hypotheses);

        let keywords = COMMAND_KEYWORDS.iter().chain(CHITCHAT_CUES);
        for (slot, kw) in layout.keywords.clone().zip(keywords) {
            v[slot] = parts
                .hypotheses
                .iter()
                .zip(&weights)
                .filter(|((text, _), _)| vocab::contains_any(text, &[kw]))
                .map(|(_, w)| w)
                .sum();
        }
        for (t, topic) in TOPICS.iter().enumerate() {
            v[layout.topics.start + t] = parts
                .hypotheses
                .iter()
                .zip(&weights)
                .filter(|((text, _), _)| vocab::contains_any(text, topic.words))
                .map(|(_, w)| w)
                .sum();
        }

        if let Some(initial) = parts.initial {
            let ctx = layout.context.start;
            v[ctx] = 1.0;
            let mut mismatch = 0.0;
            for t in vocab::topics_in(initial) {
                for u in 0..TOPICS.len() {
                    let followup_topic = v[layout.topics.start + u];
                    if u == t {
                        v[ctx + 1 + t] = followup_topic;
                    } else {
                        mismatch += followup_topic;
                    }
                }
            }
            v[ctx + 1 + TOPICS.len()] = mismatch.min(1.0);
        }

        let unc = uncertainty_features(&parts.hypotheses);
        v[layout.uncertainty.clone()].copy_from_slice(&unc);

        if self.options.noise_scale > 0.0 {
            let seed = fnv1a(parts.followup_block.as_bytes()) ^ self.options.seed;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for x in &mut v[layout.noise.clone()] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = z * self.options.noise_scale;
            }
        }
        Ok(v)
    }

    fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn identity(&self) -> String {
        format!(
            "mock(dim={}, seed={}, noise={}, verbose={}, descriptive_period={:?})",
            self.config.embedding_dim,
            self.options.seed,
            self.options.noise_scale,
            self.options.verbose,
            self.options.descriptive_period
        )
    }
}
