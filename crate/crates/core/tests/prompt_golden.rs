use ddsd_core::promptgen::{self, FollowupHypothesis, PromptConfig, UtterancePair};

fn table_one_pair() -> UtterancePair {
    UtterancePair::new(
        "example-1",
        "spk",
        "Hey VA, play music",
        vec![
            FollowupHypothesis::new("turn it up a bit", -81.4),
            FollowupHypothesis::new("turn it up a bet", -78.1),
            FollowupHypothesis::new("term it up a pit", -75.9),
        ],
    )
    .unwrap()
}

fn golden(tag: &str) -> String {
    let path = format!("{}/tests/golden/prompt_{tag}.txt", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn all_four_configurations_match_golden_files() {
    let pair = table_one_pair();
    for cfg in PromptConfig::grid(8) {
        let tag = cfg.tag();
        let rendered = promptgen::render(&pair, &cfg);
        assert_eq!(rendered.text, golden(&tag), "configuration {tag}");
        assert_eq!(rendered.pair_id, "example-1");
    }
}

#[test]
fn tags_resolve_to_the_same_prompts() {
    let pair = table_one_pair();
    for tag in ["1", "8", "1-1", "1-8"] {
        let cfg = PromptConfig::from_tag(tag).unwrap();
        assert_eq!(promptgen::render(&pair, &cfg).text, golden(tag));
    }
}

#[test]
fn golden_files_carry_the_expected_layout() {
    assert!(golden("1-8").ends_with(
        "Query 1: Hey VA, play music | Query 2: turn it up a bit [-81.4]\nturn it up a bet [-78.1]\nterm it up a pit [-75.9]"
    ));
    assert!(golden("8").contains("we provided an n-best list of ASR hypotheses"));
    assert!(!golden("1").contains("n-best"));
    let one_one = golden("1-1");
    let (_, utterance) = one_one.rsplit_once("\n\n").unwrap();
    assert!(!utterance.contains(" ["));
    for tag in ["1", "8", "1-1", "1-8"] {
        assert!(golden(tag).ends_with(if tag.ends_with('1') { "turn it up a bit" } else { "[-75.9]" }));
    }
}
