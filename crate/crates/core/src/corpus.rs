//! Dataset records, speaker-disjoint splits and a synthetic corpus.
//!
//! The synthetic generator produces (initial query, follow-up) pairs in the
//! shape of a follow-up conversation dataset. Roughly one follow-up in five
//! is device-directed. A configurable share of follow-ups uses topic phrases
//! such as "how cold is it outside" that occur under both labels: they are
//! directed when they continue the initial query's topic and human-directed
//! otherwise, so only a model that sees the initial query can resolve them.
//!
//! Every follow-up gets a chain lattice whose cheapest path is the intended
//! text. Confusion arcs swap single words for sound-alikes at a higher cost.
//! Directed speech gets wider cost margins than side speech, which is where
//! n-best lists carry information that the 1-best does not.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{self, Arc, Lattice, LatticeError};
use crate::promptgen::{FollowupHypothesis, PromptError, UtterancePair};
use crate::vocab::{CHITCHAT, TOPICS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("speaker-disjoint splitting needs at least 3 speakers, found {0}")]
    TooFewSpeakers(usize),
    #[error("record `{pair_id}`")]
    Lattice {
        pair_id: String,
        source: LatticeError,
    },
    #[error("record `{pair_id}`")]
    Prompt {
        pair_id: String,
        source: PromptError,
    },
    #[error("record `{0}` has no follow-up hypotheses")]
    EmptyFollowup(String),
    #[error("invalid synthetic corpus configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialQuery {
    pub onebest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
}

/// The follow-up as a lattice in the text format or as a ready list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Followup {
    Lattice(String),
    Hypotheses(Vec<FollowupHypothesis>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub pair_id: String,
    pub speaker_id: String,
    pub initial: InitialQuery,
    pub followup: Followup,
    /// 1 when the follow-up is addressed to the assistant. The initial query
    /// always is.
    pub label: u8,
    #[serde(default)]
    pub split: Option<Split>,
}

impl DatasetRecord {
    /// Up to `n` follow-up hypotheses, cheapest first.
    pub fn followup_hypotheses(&self, n: usize) -> Result<Vec<FollowupHypothesis>, CorpusError> {
        let mut hyps = match &self.followup {
            Followup::Lattice(doc) => {
                let lat = lattice::parse_lattice(doc).map_err(|source| CorpusError::Lattice {
                    pair_id: self.pair_id.clone(),
                    source,
                })?;
                lattice::nbest(&lat, n)
                    .into_iter()
                    .map(|h| FollowupHypothesis::new(h.text, h.total_cost))
                    .collect()
            }
            Followup::Hypotheses(list) => {
                let mut list = list.clone();
                list.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.text.cmp(&b.text)));
                list
            }
        };
        hyps.truncate(n);
        if hyps.is_empty() {
            return Err(CorpusError::EmptyFollowup(self.pair_id.clone()));
        }
        Ok(hyps)
    }

    /// The record as a renderable pair carrying up to `n` hypotheses.
    pub fn to_pair(&self, n: usize) -> Result<UtterancePair, CorpusError> {
        let hyps = self.followup_hypotheses(n)?;
        let mut pair = UtterancePair::new(
            self.pair_id.clone(),
            self.speaker_id.clone(),
            self.initial.onebest.clone(),
            hyps,
        )
        .map_err(|source| CorpusError::Prompt {
            pair_id: self.pair_id.clone(),
            source,
        })?
        .with_label(self.label);
        if let Some(split) = self.split {
            pair = pair.with_split(split);
        }
        Ok(pair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let r = self.as_array();
        let sum: f64 = r.iter().sum();
        if r.iter().any(|v| v.is_nan() || *v < 0.0) || libm::fabs(sum - 1.0) > 1e-9 {
            return Err(CorpusError::BadRatios(r));
        }
        Ok(())
    }
}

/// Assigns splits by speaker so that no speaker spans two splits.
///
/// Speakers are shuffled with `seed`; the first three seed the test, val and
/// train splits, and each later speaker joins whichever split is furthest
/// below its target share of records.
pub fn split(records: &mut [DatasetRecord], ratios: SplitRatios, seed: u64) -> Result<(), CorpusError> {
    ratios.validate()?;
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records.iter() {
        *sizes.entry(r.speaker_id.as_str()).or_default() += 1;
    }
    if sizes.len() < 3 {
        return Err(CorpusError::TooFewSpeakers(sizes.len()));
    }
    let mut speakers: Vec<(&str, usize)> = sizes.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    speakers.shuffle(&mut rng);

    let total = records.len() as f64;
    let targets = ratios.as_array();
    let mut filled = [0usize; 3];
    let mut assignment: BTreeMap<String, Split> = BTreeMap::new();
    for (i, (speaker, size)) in speakers.iter().enumerate() {
        let slot = if i < 3 {
            2 - i
        } else {
            (0..3)
                .max_by(|&a, &b| {
                    let da = targets[a] * total - filled[a] as f64;
                    let db = targets[b] * total - filled[b] as f64;
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap_or(0)
        };
        filled[slot] += size;
        assignment.insert(speaker.to_string(), Split::ALL[slot]);
    }
    for r in records.iter_mut() {
        r.split = assignment.get(&r.speaker_id).copied();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_pairs: usize,
    pub num_speakers: usize,
    /// Share of device-directed follow-ups.
    pub directed_ratio: f64,
    /// Share of follow-ups drawn from the context-dependent phrase pool.
    pub ambiguity_fraction: f64,
    /// Share of human-directed ambiguous follow-ups that stay on the initial
    /// query's topic, so that context does not settle every case.
    pub on_topic_side_talk: f64,
    /// Word positions per follow-up that get confusion arcs.
    pub n_confusions: usize,
    /// Cost margin range of confusions in directed follow-ups.
    pub directed_margin: (f64, f64),
    /// Cost margin range of confusions in human-directed follow-ups.
    pub undirected_margin: (f64, f64),
    /// Restrict generation to the first `topics` built-in topics.
    pub topics: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_pairs: 1000,
            num_speakers: 100,
            directed_ratio: 0.2,
            ambiguity_fraction: 0.3,
            on_topic_side_talk: 0.15,
            n_confusions: 3,
            directed_margin: (1.5, 6.0),
            undirected_margin: (0.3, 4.0),
            topics: TOPICS.len(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::Config(m));
        if !(0.0..=1.0).contains(&self.directed_ratio) {
            return bad(format!("directed_ratio {} outside [0, 1]", self.directed_ratio));
        }
        if !(0.0..=1.0).contains(&self.ambiguity_fraction) {
            return bad(format!("ambiguity_fraction {} outside [0, 1]", self.ambiguity_fraction));
        }
        if !(0.0..=1.0).contains(&self.on_topic_side_talk) {
            return bad(format!("on_topic_side_talk {} outside [0, 1]", self.on_topic_side_talk));
        }
        if self.num_speakers == 0 {
            return bad("num_speakers must be positive".into());
        }
        if !(2..=TOPICS.len()).contains(&self.topics) {
            return bad(format!("topics must lie in 2..={}", TOPICS.len()));
        }
        for (name, (lo, hi)) in [
            ("directed_margin", self.directed_margin),
            ("undirected_margin", self.undirected_margin),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!("{name} must satisfy 0 < lo <= hi"));
            }
        }
        Ok(())
    }
}

// Sound-alike substitutions; words without an entry get a stretched
// vowel or a plural.
const CONFUSIONS: &[(&str, &[&str])] = &[
    ("bit", &["bet", "pit"]),
    ("turn", &["term", "tern"]),
    ("up", &["op"]),
    ("song", &["sung", "some"]),
    ("play", &["plate", "pray"]),
    ("next", &["text", "nest"]),
    ("rain", &["reign", "lane"]),
    ("time", &["dime", "tide"]),
    ("list", &["lift", "lest"]),
    ("set", &["sit", "sat"]),
    ("read", &["red", "reed"]),
    ("clue", &["glue", "blue"]),
    ("map", &["nap", "mop"]),
    ("cold", &["gold", "called"]),
    ("show", &["so", "shoe"]),
    ("stop", &["step", "shop"]),
    ("you", &["ewe", "yew"]),
    ("the", &["a", "de"]),
    ("is", &["as", "his"]),
    ("it", &["at", "eat"]),
    ("where", &["wear", "ware"]),
];

const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

fn confusions_for(word: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
    if let Some((_, alts)) = CONFUSIONS.iter().find(|(w, _)| *w == word) {
        return alts.iter().map(|s| s.to_string()).collect();
    }
    let plural = format!("{word}s");
    let mut out = match word.char_indices().find(|(_, c)| VOWELS.contains(c)) {
        Some((i, v)) => alloc::vec![format!("{}{v}{}", &word[..i], &word[i..]), plural],
        None => alloc::vec![plural],
    };
    out.shuffle(rng);
    out
}

fn round1(x: f64) -> f64 {
    libm::round(x * 10.0) / 10.0
}

/// Chain lattice for `text`; every word arc is cheaper than the confusion
/// arcs beside it, so the 1-best path spells `text`.
fn followup_lattice(text: &str, margin: (f64, f64), n_confusions: usize, rng: &mut ChaCha8Rng) -> Lattice {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut positions: Vec<usize> = (0..words.len()).collect();
    positions.shuffle(rng);
    let confused: BTreeSet<usize> = positions.into_iter().take(n_confusions).collect();

    let mut arcs = Vec::new();
    for (i, word) in words.iter().enumerate() {
        let acoustic = -round1(rng.random_range(6.0..14.0));
        let lm = -round1(rng.random_range(1.0..4.0));
        arcs.push(Arc::new(i, i + 1, word, acoustic, lm));
        if confused.contains(&i) {
            let alts = confusions_for(word, rng);
            let k = rng.random_range(1..=alts.len());
            for alt in alts.iter().take(k) {
                let extra = round1(rng.random_range(margin.0..=margin.1)).max(0.1);
                arcs.push(Arc::new(i, i + 1, alt, round1(acoustic + extra), lm));
            }
        }
    }
    Lattice::new(words.len() + 1, 0, [words.len()], arcs).expect("chain lattice is valid")
}

/// Generates `config.num_pairs` records with no split assigned.
pub fn generate(config: &SynthConfig) -> Result<Vec<DatasetRecord>, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let topics = &TOPICS[..config.topics];
    let width = digits(config.num_pairs);
    let speaker_width = digits(config.num_speakers);

    let mut out = Vec::with_capacity(config.num_pairs);
    for i in 0..config.num_pairs {
        let directed = rng.random_bool(config.directed_ratio);
        let ambiguous = rng.random_bool(config.ambiguity_fraction);
        let initial_topic = rng.random_range(0..topics.len());
        let initial = *topics[initial_topic]
            .initial_queries
            .choose(&mut rng)
            .expect("topics have initial queries");
        let followup = match (ambiguous, directed) {
            (true, true) => *topics[initial_topic].ambiguous.choose(&mut rng).expect("non-empty"),
            (true, false) if rng.random_bool(config.on_topic_side_talk) => {
                *topics[initial_topic].ambiguous.choose(&mut rng).expect("non-empty")
            }
            (true, false) => {
                let mut other = rng.random_range(0..topics.len() - 1);
                if other >= initial_topic {
                    other += 1;
                }
                *topics[other].ambiguous.choose(&mut rng).expect("non-empty")
            }
            (false, true) => *topics[initial_topic].commands.choose(&mut rng).expect("non-empty"),
            (false, false) => *CHITCHAT.choose(&mut rng).expect("non-empty"),
        };
        let margin = if directed {
            config.directed_margin
        } else {
            config.undirected_margin
        };
        let lat = followup_lattice(followup, margin, config.n_confusions, &mut rng);
        let speaker = rng.random_range(0..config.num_speakers);
        out.push(DatasetRecord {
            pair_id: format!("pair-{i:0width$}"),
            speaker_id: format!("spk-{speaker:0speaker_width$}"),
            initial: InitialQuery {
                onebest: initial.to_string(),
                lattice: None,
            },
            followup: Followup::Lattice(lat.to_text()),
            label: u8::from(directed),
            split: None,
        });
    }
    Ok(out)
}

fn digits(n: usize) -> usize {
    let mut d = 1;
    let mut v = n.saturating_sub(1);
    while v >= 10 {
        v /= 10;
        d += 1;
    }
    d
}
