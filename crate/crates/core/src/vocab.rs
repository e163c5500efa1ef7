//! Vocabulary shared by the synthetic corpus generator and the mock backend.
//!
//! Follow-ups come in three surface classes:
//!
//! * commands, which always contain a [`COMMAND_KEYWORDS`] token;
//! * chitchat, which contains chitchat cues but no command keyword and no
//!   topic word;
//! * ambiguous forms, which mention one topic and nothing else. Whether they
//!   are addressed to the assistant depends on the topic of the initial query.

pub struct Topic {
    pub name: &'static str,
    pub words: &'static [&'static str],
    pub initial_queries: &'static [&'static str],
    pub commands: &'static [&'static str],
    pub ambiguous: &'static [&'static str],
}

pub const TOPICS: &[Topic] = &[
    Topic {
        name: "music",
        words: &[
            "music", "song", "songs", "album", "track", "volume", "band", "playlist", "singer",
            "sings", "radio", "jazz",
        ],
        initial_queries: &[
            "Hey VA, play music",
            "Hey VA, play some jazz radio",
            "Hey VA, shuffle my playlist",
            "Hey VA, play the new album by that band",
        ],
        commands: &[
            "turn it up a bit",
            "play the next song",
            "skip this track",
            "turn the volume down",
            "pause the music",
            "play it again",
            "add this song to my playlist",
            "stop the music",
        ],
        ambiguous: &[
            "who sings this song",
            "what album is this from",
            "is this the same band",
            "how long is this track",
        ],
    },
    Topic {
        name: "weather",
        words: &[
            "weather", "rain", "raining", "cold", "warm", "sunny", "forecast", "umbrella", "snow",
            "temperature", "outside", "wind",
        ],
        initial_queries: &[
            "Hey VA, what's the weather today",
            "Hey VA, will it rain tomorrow",
            "Hey VA, what's the forecast for saturday",
            "Hey VA, what's the temperature outside",
        ],
        commands: &[
            "show me the hourly forecast",
            "read the forecast for tomorrow",
            "set a weather alert",
            "show the temperature in celsius",
        ],
        ambiguous: &[
            "is it going to rain later",
            "how cold is it outside",
            "will it snow on friday",
            "should i bring an umbrella",
        ],
    },
    Topic {
        name: "timer",
        words: &[
            "timer", "minutes", "seconds", "alarm", "clock", "hour", "time", "countdown", "oven",
        ],
        initial_queries: &[
            "Hey VA, set a timer for ten minutes",
            "Hey VA, set an alarm for seven",
            "Hey VA, start a countdown for the oven",
        ],
        commands: &[
            "add five more minutes",
            "cancel the timer",
            "pause the timer",
            "set another alarm for eight",
            "stop the alarm",
            "show the remaining time",
        ],
        ambiguous: &[
            "how much time is left",
            "how many minutes was that",
            "is the oven timer done",
            "what time is it now",
        ],
    },
    Topic {
        name: "puzzle",
        words: &[
            "clue", "across", "letter", "letters", "puzzle", "crossword", "answer", "word",
            "hint", "grid",
        ],
        initial_queries: &[
            "Hey VA, what is a five letter word for happy",
            "Hey VA, give me a hint for seven across",
            "Hey VA, open the crossword puzzle",
        ],
        commands: &[
            "what's the next clue",
            "read the clue again",
            "show me a hint",
            "spell the answer",
            "repeat the last clue",
            "open the next puzzle",
        ],
        ambiguous: &[
            "how many letters is that",
            "what is the clue for seven down",
            "is the answer a word",
            "does that fit in the grid",
        ],
    },
    Topic {
        name: "navigation",
        words: &[
            "route", "traffic", "station", "exit", "directions", "map", "highway", "miles",
            "drive", "airport",
        ],
        initial_queries: &[
            "Hey VA, get directions to the airport",
            "Hey VA, how is the traffic on the highway",
            "Hey VA, find the nearest gas station",
        ],
        commands: &[
            "start navigation",
            "show me the route on the map",
            "cancel the route",
            "open the map",
            "read the next directions",
        ],
        ambiguous: &[
            "how far is the station",
            "which exit do we take",
            "is there traffic ahead",
            "how many miles is it",
        ],
    },
    Topic {
        name: "shopping",
        words: &[
            "milk", "eggs", "bread", "list", "grocery", "groceries", "store", "cart", "order",
            "coffee", "shopping",
        ],
        initial_queries: &[
            "Hey VA, add milk to my shopping list",
            "Hey VA, what's on my grocery list",
            "Hey VA, reorder coffee from the store",
        ],
        commands: &[
            "add eggs to the list",
            "read my list",
            "remove bread from the list",
            "open my cart",
            "show my last order",
        ],
        ambiguous: &[
            "do we still have eggs",
            "how much is the coffee",
            "is the store still closed",
            "did the order arrive",
        ],
    },
];

pub const CHITCHAT: &[&str] = &[
    "how was your weekend",
    "did you call your mom back",
    "i think we should leave soon",
    "that was a funny movie",
    "can you pass me the salt",
    "are you coming to dinner",
    "i love this place",
    "tell your friend i said hi",
    "what do you want for lunch",
    "yeah that sounds good",
    "where did you put my keys",
    "lol no way",
    "she said she would be late",
    "honey where are the kids",
    "okay see you later",
    "my back hurts a bit",
    "that is so annoying",
    "who was at the door",
];

pub const COMMAND_KEYWORDS: &[&str] = &[
    "turn", "play", "set", "skip", "add", "show", "stop", "pause", "remind", "open", "start",
    "read", "next", "cancel", "repeat", "spell", "remove",
];

pub const CHITCHAT_CUES: &[&str] = &[
    "you", "your", "weekend", "mom", "dinner", "lunch", "love", "honey", "kids", "lol", "yeah",
    "friend", "movie", "she", "keys",
];

/// Lower-cased word tokens; apostrophes stay inside words.
pub fn tokens(text: &str) -> impl Iterator<Item = alloc::string::String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

pub fn contains_any(text: &str, words: &[&str]) -> bool {
    tokens(text).any(|t| words.contains(&t.as_str()))
}

/// Index of every topic whose vocabulary appears in `text`.
pub fn topics_in(text: &str) -> impl Iterator<Item = usize> + '_ {
    TOPICS
        .iter()
        .enumerate()
        .filter(move |(_, t)| contains_any(text, t.words))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn commands_carry_a_keyword_and_no_chitchat_cue() {
        for topic in TOPICS {
            for c in topic.commands {
                assert!(contains_any(c, COMMAND_KEYWORDS), "{c}");
                assert!(!contains_any(c, CHITCHAT_CUES), "{c}");
            }
        }
    }

    #[test]
    fn ambiguous_forms_name_exactly_their_own_topic() {
        for (i, topic) in TOPICS.iter().enumerate() {
            for a in topic.ambiguous {
                assert!(!contains_any(a, COMMAND_KEYWORDS), "{a}");
                assert!(!contains_any(a, CHITCHAT_CUES), "{a}");
                assert_eq!(topics_in(a).collect::<Vec<_>>(), [i], "{a}");
            }
        }
    }

    #[test]
    fn initial_queries_name_exactly_their_own_topic() {
        for (i, topic) in TOPICS.iter().enumerate() {
            for q in topic.initial_queries {
                assert_eq!(topics_in(q).collect::<Vec<_>>(), [i], "{q}");
            }
        }
    }

    #[test]
    fn chitchat_is_topic_and_command_free() {
        for c in CHITCHAT {
            assert!(!contains_any(c, COMMAND_KEYWORDS), "{c}");
            assert!(contains_any(c, CHITCHAT_CUES) || topics_in(c).next().is_none(), "{c}");
            assert_eq!(topics_in(c).count(), 0, "{c}");
        }
    }

    #[test]
    fn tokenizer_lowercases_and_keeps_apostrophes() {
        let t: Vec<_> = tokens("Hey VA, what's the weather?").collect();
        assert_eq!(t, ["hey", "va", "what's", "the", "weather"]);
    }
}
