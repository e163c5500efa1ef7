//! Task-prompt and utterance-prompt rendering.
//!
//! A full prompt is the fixed task instruction, a blank line, then the
//! utterance prompt built from the initial query's 1-best and the follow-up's
//! 1-best or n-best list. Output is byte-stable and covered by golden files.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Split;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("initial query text is empty")]
    EmptyInitial,
    #[error("follow-up has no hypotheses")]
    NoHypotheses,
    #[error("hypothesis {index} contains a newline")]
    NewlineInHypothesis { index: usize },
    #[error("initial query contains a newline")]
    NewlineInInitial,
    #[error("hypotheses are not sorted by ascending cost at index {index}")]
    Unsorted { index: usize },
    #[error("hypothesis {index} has a non-finite cost")]
    NonFiniteCost { index: usize },
    #[error("n-best size must be at least 1")]
    ZeroNBest,
    #[error("unknown prompt configuration tag `{0}`")]
    UnknownTag(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FollowupMode {
    OneBest,
    NBest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContextMode {
    FollowupOnly,
    WithContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub followup_mode: FollowupMode,
    pub context_mode: ContextMode,
    pub include_task_prompt: bool,
    pub cost_decimals: usize,
}

impl PromptConfig {
    pub fn new(followup_mode: FollowupMode, context_mode: ContextMode) -> Self {
        PromptConfig {
            followup_mode,
            context_mode,
            include_task_prompt: true,
            cost_decimals: 1,
        }
    }

    pub fn with_task_prompt(mut self, include: bool) -> Self {
        self.include_task_prompt = include;
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        match self.followup_mode {
            FollowupMode::NBest(0) => Err(PromptError::ZeroNBest),
            _ => Ok(()),
        }
    }

    /// Grid tag: `1`, `8`, `1-1`, `1-8`, ... The part after the dash is the
    /// follow-up setting; a leading `1-` means the initial query is included.
    pub fn tag(&self) -> String {
        let followup = match self.followup_mode {
            FollowupMode::OneBest => String::from("1"),
            FollowupMode::NBest(n) => format!("{n}"),
        };
        match self.context_mode {
            ContextMode::FollowupOnly => followup,
            ContextMode::WithContext => format!("1-{followup}"),
        }
    }

    /// Inverse of [`PromptConfig::tag`]. `1` is 1-best; any other count is
    /// an n-best list of that size.
    pub fn from_tag(tag: &str) -> Result<Self, PromptError> {
        let unknown = || PromptError::UnknownTag(tag.into());
        let (context, followup) = match tag.split_once('-') {
            Some(("1", rest)) => (ContextMode::WithContext, rest),
            Some(_) => return Err(unknown()),
            None => (ContextMode::FollowupOnly, tag),
        };
        let n: usize = followup.parse().map_err(|_| unknown())?;
        let mode = match n {
            0 => return Err(PromptError::ZeroNBest),
            1 => FollowupMode::OneBest,
            n => FollowupMode::NBest(n),
        };
        Ok(PromptConfig::new(mode, context))
    }

    /// The four rows of the standard experiment grid with an `n`-best size.
    pub fn grid(n: usize) -> [PromptConfig; 4] {
        use ContextMode::*;
        use FollowupMode::*;
        [
            PromptConfig::new(OneBest, FollowupOnly),
            PromptConfig::new(NBest(n), FollowupOnly),
            PromptConfig::new(OneBest, WithContext),
            PromptConfig::new(NBest(n), WithContext),
        ]
    }
}

impl fmt::Display for PromptConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowupHypothesis {
    pub text: String,
    pub cost: f64,
}

impl FollowupHypothesis {
    pub fn new(text: impl Into<String>, cost: f64) -> Self {
        FollowupHypothesis {
            text: text.into(),
            cost,
        }
    }
}

/// An initial query and its follow-up, ready for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct UtterancePair {
    pair_id: String,
    speaker_id: String,
    initial_onebest: String,
    followup_hypotheses: Vec<FollowupHypothesis>,
    label: Option<u8>,
    split: Option<Split>,
}

impl UtterancePair {
    pub fn new(
        pair_id: impl Into<String>,
        speaker_id: impl Into<String>,
        initial_onebest: impl Into<String>,
        followup_hypotheses: Vec<FollowupHypothesis>,
    ) -> Result<Self, PromptError> {
        let initial_onebest = initial_onebest.into();
        if initial_onebest.trim().is_empty() {
            return Err(PromptError::EmptyInitial);
        }
        if initial_onebest.contains(['\n', '\r']) {
            return Err(PromptError::NewlineInInitial);
        }
        if followup_hypotheses.is_empty() {
            return Err(PromptError::NoHypotheses);
        }
        for (index, h) in followup_hypotheses.iter().enumerate() {
            if h.text.contains(['\n', '\r']) {
                return Err(PromptError::NewlineInHypothesis { index });
            }
            if !h.cost.is_finite() {
                return Err(PromptError::NonFiniteCost { index });
            }
            if index > 0 && followup_hypotheses[index - 1].cost > h.cost {
                return Err(PromptError::Unsorted { index });
            }
        }
        Ok(UtterancePair {
            pair_id: pair_id.into(),
            speaker_id: speaker_id.into(),
            initial_onebest,
            followup_hypotheses,
            label: None,
            split: None,
        })
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }

    pub fn pair_id(&self) -> &str {
        &self.pair_id
    }

    pub fn speaker_id(&self) -> &str {
        &self.speaker_id
    }

    pub fn initial_onebest(&self) -> &str {
        &self.initial_onebest
    }

    pub fn followup_hypotheses(&self) -> &[FollowupHypothesis] {
        &self.followup_hypotheses
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn split(&self) -> Option<Split> {
        self.split
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub text: String,
    pub config: PromptConfig,
    pub pair_id: String,
}

const OPENING_WITH_CONTEXT: &str = "In this task, we provide a pair of queries made by human in the following format: 'Query 1: <text> | Query 2: <text>'. Query 1 is directed toward the voice assistant. Query 2 is the follow-up query made by human.";

const OPENING_FOLLOWUP_ONLY: &str = "In this task, we provide a query made by human in the following format: 'Query 2: <text>'. Query 2 is the follow-up query made by human.";

const NBEST_EXPLANATION: &str = " For Query 2, we provided an n-best list of ASR hypotheses for the spoken utterance. Each of the hypothesis is separated by a newline character. The cost of each hypothesis is at the end in the format '[cost]' where a low cost indicates that we are more confident about that ASR hypothesis.";

const INSTRUCTIONS: &str = " Determine whether Query 2 is directed towards a voice assistant or a human being. Typical spoken utterances directed towards the voice assistant are commands to fulfill a task or queries to get some information. Answer only from the following categories ['1', '0'] where '1' indicates that the utterance is directed towards the voice assistant and '0' indicates that the utterance is directed towards a human being. In your answer the last line should contain nothing else but the number '0' or '1'.";

/// The fixed task instruction for `config`, or `""` when disabled.
pub fn render_task_prompt(config: &PromptConfig) -> String {
    if !config.include_task_prompt {
        return String::new();
    }
    let mut out = String::from(match config.context_mode {
        ContextMode::WithContext => OPENING_WITH_CONTEXT,
        ContextMode::FollowupOnly => OPENING_FOLLOWUP_ONLY,
    });
    if let FollowupMode::NBest(_) = config.followup_mode {
        out.push_str(NBEST_EXPLANATION);
    }
    out.push_str(INSTRUCTIONS);
    out
}

/// `Query 1: <initial> | Query 2: <follow-up>`, or just the `Query 2` clause
/// without context. N-best follow-ups are one hypothesis per line, each
/// suffixed with ` [cost]`.
pub fn render_utterance_prompt(pair: &UtterancePair, config: &PromptConfig) -> String {
    let hyps = pair.followup_hypotheses();
    let followup = match config.followup_mode {
        FollowupMode::OneBest => hyps[0].text.clone(),
        FollowupMode::NBest(n) => hyps
            .iter()
            .take(n.max(1))
            .map(|h| format!("{} [{:.*}]", h.text, config.cost_decimals, h.cost))
            .collect::<Vec<_>>()
            .join("\n"),
    };
    match config.context_mode {
        ContextMode::WithContext => {
            format!("Query 1: {} | Query 2: {}", pair.initial_onebest(), followup)
        }
        ContextMode::FollowupOnly => format!("Query 2: {followup}"),
    }
}

/// Task prompt, one blank line, utterance prompt. An empty task prompt
/// yields the utterance prompt unchanged.
pub fn assemble(task: &str, utterance: &str) -> String {
    if task.is_empty() {
        String::from(utterance)
    } else {
        format!("{task}\n\n{utterance}")
    }
}

pub fn render(pair: &UtterancePair, config: &PromptConfig) -> RenderedPrompt {
    let text = assemble(
        &render_task_prompt(config),
        &render_utterance_prompt(pair, config),
    );
    RenderedPrompt {
        text,
        config: *config,
        pair_id: String::from(pair.pair_id()),
    }
}
