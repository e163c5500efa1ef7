//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ddsd::pipeline::{self, Subset};
use ddsd_core::backend::{BackendConfig, MockOptions};
use ddsd_core::classifier::{
    apply_lora, cross_entropy_loss, forward, gradient, lora_param_count, LinearHead, LoraAdapter, LoraBackbone, Matrix,
    TrainConfig,
};
use ddsd_core::corpus::{self, Split, SplitRatios, SynthConfig};
use ddsd_core::eval::{self, stats, OpSelection, ScoredExample};
use ddsd_core::lattice::{self, Arc, Lattice, EPSILON};
use ddsd_core::promptgen::{self, FollowupHypothesis, PromptConfig, UtterancePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- 1: n-best against brute force ----

const WORDS: [&str; 7] = ["a", "b", "c", "up", "it", "bit", EPSILON];

fn random_lattice(rng: &mut ChaCha8Rng) -> Lattice {
    let nodes = rng.random_range(2..=12);
    let mut arcs = Vec::new();
    for i in 0..nodes - 1 {
        arcs.push(Arc::new(i, i + 1, WORDS[rng.random_range(0..WORDS.len())], -rng.random_range(0..20) as f64 * 0.5, -1.0));
    }
    for _ in 0..rng.random_range(0..16) {
        let src = rng.random_range(0..nodes - 1);
        let dst = rng.random_range(src + 1..nodes);
        for _ in 0..rng.random_range(1..=3) {
            let word = WORDS[rng.random_range(0..WORDS.len())];
            // quarter steps keep many exact cost ties
            let ac = rng.random_range(-40..10) as f64 * 0.25;
            let lm = rng.random_range(-8..4) as f64 * 0.25;
            arcs.push(Arc::new(src, dst, word, ac, lm));
        }
    }
    let mut finals = vec![nodes - 1];
    if nodes > 2 && rng.random_bool(0.3) {
        finals.push(rng.random_range(1..nodes - 1));
    }
    Lattice::new(nodes, 0, finals, arcs).expect("forward arcs form a valid lattice")
}

fn brute_force(lat: &Lattice, n: usize) -> Vec<(String, f64)> {
    fn walk(lat: &Lattice, node: usize, words: &mut Vec<String>, cost: f64, best: &mut BTreeMap<String, f64>) {
        if lat.is_final(node) {
            let text = words.iter().filter(|w| *w != EPSILON).cloned().collect::<Vec<_>>().join(" ");
            let slot = best.entry(text).or_insert(f64::INFINITY);
            *slot = slot.min(cost);
        }
        for &a in lat.outgoing(node) {
            let arc = &lat.arcs()[a];
            words.push(arc.word.clone());
            walk(lat, arc.dst, words, cost + arc.cost(), best);
            words.pop();
        }
    }
    let mut best = BTreeMap::new();
    walk(lat, lat.start(), &mut Vec::new(), 0.0, &mut best);
    let mut all: Vec<(String, f64)> = best.into_iter().collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(n);
    all
}

fn c1_nbest() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let lat = random_lattice(&mut rng);
        let n = rng.random_range(1..=8);
        let got: Vec<(String, f64)> = lattice::nbest(&lat, n).into_iter().map(|h| (h.text, h.total_cost)).collect();
        let want = brute_force(&lat, n);
        ensure(got == want, || format!("lattice {case}, n={n}: {got:?} != {want:?}"))?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
    Ok(format!("1000 lattices in {t:.2?}"))
}

// ---- 2: prompt goldens ----

fn c2_prompts() -> Check {
    let pair = UtterancePair::new(
        "example-1",
        "spk",
        "Hey VA, play music",
        vec![
            FollowupHypothesis::new("turn it up a bit", -81.4),
            FollowupHypothesis::new("turn it up a bet", -78.1),
            FollowupHypothesis::new("term it up a pit", -75.9),
        ],
    )
    .map_err(|e| e.to_string())?;
    let golden_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    for tag in ["1", "8", "1-1", "1-8"] {
        let config = PromptConfig::from_tag(tag).map_err(|e| e.to_string())?;
        let text = promptgen::render(&pair, &config).text;
        let golden = std::fs::read_to_string(golden_dir.join(format!("prompt_{tag}.txt"))).map_err(|e| e.to_string())?;
        ensure(text == golden, || format!("config {tag} differs from its golden file"))?;
    }
    let full = promptgen::render(&pair, &PromptConfig::from_tag("1-8").unwrap()).text;
    ensure(
        full.contains("Query 1: Hey VA, play music | Query 2: turn it up a bit [-81.4]\nturn it up a bet [-78.1]\nterm it up a pit [-75.9]"),
        || "utterance layout".into(),
    )?;
    Ok("4 configurations byte-exact".into())
}

// ---- 3: metrics ----

fn labelled(pos: &[f64], neg: &[f64]) -> Vec<ScoredExample> {
    let p = pos.iter().enumerate().map(|(i, &s)| ScoredExample::new(format!("p{i}"), 1, s));
    let n = neg.iter().enumerate().map(|(i, &s)| ScoredExample::new(format!("n{i}"), 0, s));
    p.chain(n).collect()
}

fn c3_metrics() -> Check {
    let r = eval::far_frr(&[(1, 1), (1, 0), (0, 0), (0, 1)]).map_err(|e| e.to_string())?;
    ensure((r.far, r.frr) == (Some(0.5), Some(0.5)), || format!("fixture gave {:?}/{:?}", r.far, r.frr))?;

    let separated = labelled(&[0.9, 0.8, 0.95], &[0.1, 0.3, 0.2]);
    let e = eval::eer(&eval::sweep(&separated).unwrap()).unwrap();
    ensure(e == 0.0, || format!("separated EER {e}"))?;

    let sym = labelled(&[0.6, 0.8, 0.2, 0.9], &[0.4, 0.2, 0.8, 0.1]);
    // exhaustive thresholds: every distinct score plus the ends
    let mut thresholds: Vec<f64> = sym.iter().map(|s| s.score).collect();
    thresholds.extend([f64::NEG_INFINITY, f64::INFINITY]);
    let mut equal_points = Vec::new();
    // lowest false-accept count among thresholds with FRR <= 1/4
    let mut best_far_under: Option<(usize, usize)> = None;
    for &t in &thresholds {
        let fr = sym.iter().filter(|s| s.truth == 1 && s.score < t).count();
        let fa = sym.iter().filter(|s| s.truth == 0 && s.score >= t).count();
        if fr == fa {
            equal_points.push(fr);
        }
        if fr <= 1 && best_far_under.is_none_or(|(_, b)| fa < b) {
            best_far_under = Some((fr, fa));
        }
    }
    ensure(equal_points.contains(&1), || format!("enumeration crossings {equal_points:?}"))?;
    ensure(best_far_under == Some((1, 1)), || format!("enumerated OP {best_far_under:?}"))?;
    let curve = eval::sweep(&sym).unwrap();
    let e = eval::eer(&curve).unwrap();
    ensure(e == 0.25, || format!("symmetric EER {e}"))?;
    let op = eval::far_at_frr(&curve, 0.25, OpSelection::Conservative).map_err(|e| e.to_string())?;
    ensure(op.far == 0.25 && op.frr == 0.25, || format!("FAR@FRR0.25 {op:?}"))?;
    Ok("0.5/0.5, EER 0, EER 0.25, FAR@FRR 0.25 = 0.25".into())
}

// ---- 4: gradients ----

fn c4_gradients() -> Check {
    let start = Instant::now();
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let dim = rng.random_range(1..=32);
        let mut head = LinearHead::zeros(dim);
        for w in &mut head.weights {
            *w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        }
        head.bias = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = rng.random_range(0..=1u8);
        let g = gradient(&head, &x, y).map_err(|e| e.to_string())?;
        let loss = |hd: &LinearHead| cross_entropy_loss(forward(hd, &x).unwrap(), y);
        let mut probe = |analytic: f64, bump: &dyn Fn(&mut LinearHead, f64)| {
            let mut plus = head.clone();
            bump(&mut plus, h);
            let mut minus = head.clone();
            bump(&mut minus, -h);
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            rel
        };
        for i in 0..dim {
            for k in 0..2 {
                let rel = probe(g.weights[i][k], &|hd, d| hd.weights[i][k] += d);
                ensure(rel < 1e-5, || format!("case {case} w[{i}][{k}] rel {rel}"))?;
            }
        }
        for k in 0..2 {
            let rel = probe(g.bias[k], &|hd, d| hd.bias[k] += d);
            ensure(rel < 1e-5, || format!("case {case} b[{k}] rel {rel}"))?;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(5), || format!("took {t:?}"))?;
    Ok(format!("worst relative error {worst:.2e} in {t:.2?}"))
}

// ---- 5: end-to-end determinism through the CLI ----

fn run_cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_ddsd"))
        .args(args)
        .env_remove("DDSD_ENDPOINT")
        .env_remove("DDSD_MODEL")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || {
        format!("ddsd {}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr))
    })
}

fn pipeline_once(dir: &Path) -> Result<(), String> {
    let d = dir.to_str().unwrap();
    let data = dir.join("dataset.jsonl");
    run_cli(&["synth", "--pairs", "2000", "--speakers", "200", "--seed", "7", "--out-dir", d])?;
    run_cli(&[
        "infer",
        "--dataset",
        data.to_str().unwrap(),
        "--grid",
        "1,8,1-1,1-8",
        "--mock-verbose",
        "--mock-descriptive-period",
        "25",
        "--split",
        "all",
        "--seed",
        "7",
        "--out-dir",
        d,
    ])?;
    for tag in ["1", "8", "1-1", "1-8"] {
        let scores = dir.join(format!("scores_{tag}.csv"));
        run_cli(&["eval", "--scores", scores.to_str().unwrap(), "--out-dir", d])?;
    }
    Ok(())
}

/// Labels straight from the dataset JSON and predictions straight from the
/// CSV text, counted without the library.
fn recount(dir: &Path, tag: &str) -> Result<(f64, f64), String> {
    let mut labels = HashMap::new();
    for line in std::fs::read_to_string(dir.join("dataset.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        labels.insert(v["pair_id"].as_str().unwrap().to_string(), v["label"].as_u64().unwrap());
    }
    let (mut pos, mut neg, mut fr, mut fa) = (0u64, 0u64, 0u64, 0u64);
    let text = std::fs::read_to_string(dir.join(format!("scores_{tag}.csv"))).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let label = labels[cols[0]];
        ensure(cols[1] == label.to_string(), || format!("truth column disagrees for {}", cols[0]))?;
        let predicted = cols[2].parse::<f64>().unwrap() >= 0.5;
        match (label, predicted) {
            (1, p) => {
                pos += 1;
                fr += u64::from(!p);
            }
            (_, p) => {
                neg += 1;
                fa += u64::from(p);
            }
        }
    }
    ensure(pos + neg == 2000, || format!("{} scored pairs", pos + neg))?;
    Ok((fa as f64 / neg as f64, fr as f64 / pos as f64))
}

fn c5_determinism() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    pipeline_once(&a)?;
    pipeline_once(&b)?;
    let mut compared = 0;
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap();
        if name.starts_with("manifest_") {
            continue;
        }
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        ensure(x == y, || format!("{name} differs between runs"))?;
        compared += 1;
    }
    for tag in ["1", "8", "1-1", "1-8"] {
        let (far, frr) = recount(&a, tag)?;
        let report: toml::Value = toml::from_str(&std::fs::read_to_string(a.join(format!("metrics_{tag}.toml"))).unwrap())
            .map_err(|e| e.to_string())?;
        let (rf, rr) = (report["far"].as_float().unwrap(), report["frr"].as_float().unwrap());
        ensure(rf == far && rr == frr, || format!("{tag}: report {rf}/{rr}, recount {far}/{frr}"))?;
    }
    Ok(format!("{compared} output files bit-identical, 4 recounts exact"))
}

// ---- 6 and 7: direction of effect on the synthetic corpus ----

struct GridResult {
    far_at_10: BTreeMap<String, f64>,
    eer: BTreeMap<String, f64>,
    elapsed: Duration,
    test_pairs: usize,
}

fn grid_experiment() -> Result<GridResult, String> {
    let start = Instant::now();
    let synth = SynthConfig {
        num_pairs: 10_000,
        num_speakers: 500,
        ambiguity_fraction: 0.5,
        seed: 2024,
        ..SynthConfig::default()
    };
    let mut records = corpus::generate(&synth).map_err(|e| e.to_string())?;
    corpus::split(&mut records, SplitRatios::default(), synth.seed).map_err(|e| e.to_string())?;
    let backend_config = BackendConfig {
        embedding_dim: 256,
        ..BackendConfig::default()
    };
    let mock = MockOptions {
        noise_scale: 0.3,
        seed: synth.seed,
        ..MockOptions::default()
    };
    let backend = pipeline::make_backend(backend_config, mock).map_err(|e| e.to_string())?;
    let train = Subset::Only(Split::Train).select(&records);
    let test = Subset::Only(Split::Test).select(&records);
    let train_config = TrainConfig {
        learning_rate: 0.5,
        epochs: 5,
        seed: synth.seed,
        ..TrainConfig::default()
    };
    let mut out = GridResult {
        far_at_10: BTreeMap::new(),
        eer: BTreeMap::new(),
        elapsed: Duration::ZERO,
        test_pairs: test.len(),
    };
    for config in PromptConfig::grid(8).map(|c| c.with_task_prompt(false)) {
        let ck = pipeline::train_classifier(backend.as_ref(), &train, &config, &train_config, None, 8)
            .map_err(|e| e.to_string())?;
        let scores = pipeline::infer_classifier(backend.as_ref(), &ck, &test, 8).map_err(|e| e.to_string())?;
        let curve = eval::sweep(&scores).map_err(|e| e.to_string())?;
        let op = eval::far_at_frr(&curve, 0.10, OpSelection::Conservative).map_err(|e| e.to_string())?;
        out.far_at_10.insert(config.tag(), op.far);
        out.eer.insert(config.tag(), eval::eer(&curve).map_err(|e| e.to_string())?);
    }
    out.elapsed = start.elapsed();
    Ok(out)
}

fn c6_context(g: &GridResult) -> Check {
    let (without, with) = (g.far_at_10["8"], g.far_at_10["1-8"]);
    let reduction = (without - with) / without;
    let detail = format!(
        "FAR@10%FRR 8 {:.4} -> 1-8 {:.4} ({:.1}% reduction, {} test pairs, {:.1?})",
        without,
        with,
        reduction * 100.0,
        g.test_pairs,
        g.elapsed
    );
    ensure(reduction >= 0.20, || detail.clone())?;
    ensure(g.elapsed < Duration::from_secs(120), || detail.clone())?;
    Ok(detail)
}

fn c7_uncertainty(g: &GridResult) -> Check {
    let (one, eight) = (g.eer["1"], g.eer["8"]);
    let detail = format!("EER 1 {one:.4}, 8 {eight:.4}; with context 1-1 {:.4}, 1-8 {:.4}", g.eer["1-1"], g.eer["1-8"]);
    ensure(eight <= one, || detail.clone())?;
    Ok(detail)
}

// ---- 8: significance ----

fn c8_significance() -> Check {
    let a = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let same = eval::paired_ttest(&a, &a, 0.95).map_err(|e| e.to_string())?;
    ensure(same.t == 0.0 && !same.significant, || format!("self comparison {same:?}"))?;
    let r = eval::paired_ttest(&[1.0, 1.0, 1.0, 1.0, 0.0], &[0.0; 5], 0.95).map_err(|e| e.to_string())?;
    ensure((r.t - 4.0).abs() < 1e-9, || format!("t = {}", r.t))?;
    // Two-sided p-values from scipy.stats.t.sf.
    let probes: [(f64, f64, f64); 20] = [
        (0.0, 1.0, 1.0),
        (0.5, 1.0, 0.7048327646991336),
        (-1.3, 2.0, 0.3232470318160404),
        (2.0, 3.0, 0.1393259685588431),
        (4.0, 4.0, 0.01613008990009254),
        (1.0, 5.0, 0.36321746764912255),
        (-2.5, 6.0, 0.04652823228416728),
        (0.25, 7.0, 0.8097655858478519),
        (3.1, 8.0, 0.014665764637047688),
        (-0.8, 10.0, 0.4423004191415415),
        (1.96, 12.0, 0.07363242589274918),
        (2.2, 15.0, 0.04389557512749647),
        (-3.5, 20.0, 0.002255123153057165),
        (0.1, 25.0, 0.9211419366152563),
        (1.5, 30.0, 0.14406592912864605),
        (2.7, 40.0, 0.010113679670874547),
        (-1.1, 60.0, 0.2757260162774474),
        (5.0, 99.0, 2.481396013040949e-06),
        (1.645, 200.0, 0.10154057274275922),
        (12.0, 3.0, 0.001245015800789336),
    ];
    let mut worst: f64 = 0.0;
    for (t, df, p) in probes {
        let got = stats::t_two_sided_p(t, df);
        worst = worst.max((got - p).abs());
        ensure((got - p).abs() < 1e-6, || format!("t={t} df={df}: {got} vs {p}"))?;
    }
    Ok(format!("t(a,a)=0, t=4 case exact, 20 p-values within {worst:.1e}"))
}

// ---- 9: parameter accounting ----

fn c9_parameters() -> Check {
    let head = LinearHead::zeros(4096).param_count();
    ensure(head == 8194, || format!("head has {head}"))?;
    ensure(lora_param_count(8, 4096, 4096) == 65_536, || "formula".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let big = LoraAdapter::init(8, 16.0, 4096, 4096, &mut rng);
    ensure(big.param_count() == 65_536, || format!("adapter has {}", big.param_count()))?;
    ensure(big.down.as_slice().len() + big.up.as_slice().len() == 65_536, || "stored entries".into())?;

    let base = Matrix::random_normal(64, 48, 0.2, &mut rng);
    let adapter = LoraAdapter::init(8, 16.0, 48, 64, &mut rng);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let merged = apply_lora(&base, &adapter).map_err(|e| e.to_string())?;
    ensure(bits(merged.as_slice()) == bits(base.as_slice()), || "merged weights moved".into())?;
    let backbone = LoraBackbone::new(base.clone(), adapter).map_err(|e| e.to_string())?;
    for _ in 0..20 {
        let x: Vec<f64> = (0..48).map(|_| rng.random_range(-2.0..2.0)).collect();
        let adapted = backbone.forward(&x).map_err(|e| e.to_string())?;
        let frozen = base.matvec(&x).map_err(|e| e.to_string())?;
        ensure(bits(&adapted) == bits(&frozen), || "adapted outputs moved".into())?;
    }
    Ok("8194 head, 65536 adapter, zero adapter bit-exact".into())
}

// ---- 10: speaker-disjoint splits ----

fn c10_splits() -> Check {
    let synth = SynthConfig {
        num_pairs: 20_000,
        num_speakers: 1000,
        seed: 99,
        ..SynthConfig::default()
    };
    let make = || -> Result<Vec<corpus::DatasetRecord>, String> {
        let mut r = corpus::generate(&synth).map_err(|e| e.to_string())?;
        corpus::split(&mut r, SplitRatios::default(), 99).map_err(|e| e.to_string())?;
        Ok(r)
    };
    let records = make()?;
    let mut speakers: HashMap<Split, HashSet<&str>> = HashMap::new();
    let mut counts: HashMap<Split, usize> = HashMap::new();
    for r in &records {
        let s = r.split.ok_or("unsplit record")?;
        speakers.entry(s).or_default().insert(&r.speaker_id);
        *counts.entry(s).or_default() += 1;
    }
    let total_speakers: HashSet<&str> = records.iter().map(|r| r.speaker_id.as_str()).collect();
    ensure(total_speakers.len() == 1000, || format!("{} speakers", total_speakers.len()))?;
    for (i, a) in Split::ALL.iter().enumerate() {
        for b in &Split::ALL[i + 1..] {
            let overlap = speakers[a].intersection(&speakers[b]).count();
            ensure(overlap == 0, || format!("{a:?}/{b:?} share {overlap} speakers"))?;
        }
    }
    let mut realized = Vec::new();
    for (s, want) in Split::ALL.iter().zip([0.7, 0.1, 0.2]) {
        let got = counts[s] as f64 / records.len() as f64;
        ensure((got - want).abs() <= 0.03, || format!("{s:?} holds {got:.3}"))?;
        realized.push(format!("{got:.3}"));
    }
    ensure(make()? == records, || "split not deterministic".into())?;
    Ok(format!("no overlap, ratios {}", realized.join("/")))
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let grid = panic::catch_unwind(grid_experiment).unwrap_or_else(|_| Err("experiment panicked".into()));
    let from_grid = |f: fn(&GridResult) -> Check| -> Check {
        match &grid {
            Ok(g) => f(g),
            Err(e) => Err(format!("experiment failed: {e}")),
        }
    };
    let results: Vec<(&str, Check)> = vec![
        ("C1 n-best oracle equivalence", guarded(c1_nbest)),
        ("C2 prompt fidelity", guarded(c2_prompts)),
        ("C3 metric exactness", guarded(c3_metrics)),
        ("C4 gradient correctness", guarded(c4_gradients)),
        ("C5 end-to-end determinism", guarded(c5_determinism)),
        ("C6 context benefit", guarded(|| from_grid(c6_context))),
        ("C7 ASR-uncertainty benefit", guarded(|| from_grid(c7_uncertainty))),
        ("C8 significance machinery", guarded(c8_significance)),
        ("C9 parameter accounting", guarded(c9_parameters)),
        ("C10 split integrity", guarded(c10_splits)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
