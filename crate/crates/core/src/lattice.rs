//! ASR word lattices and n-best extraction.
//!
//! A [`Lattice`] is an acyclic word graph whose arcs carry an acoustic and a
//! language-model cost. The cost of a path is the sum of `acoustic + lm` over
//! its arcs, accumulated in path order. Lower is more confident; negative
//! costs are legal and are never renormalised.
//!
//! Text format, one item per line, `#` starts a comment:
//!
//! ```text
//! LATTICE <node_count> <start_node>
//! <src> <dst> <word> <acoustic_cost> <lm_cost>
//! FINAL <node>
//! ```

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write as _;

/// Reserved token for arcs that emit no word.
pub const EPSILON: &str = "<eps>";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("lattice has a cycle through node {node}")]
    Cycle { node: usize },
    #[error("no path from start node {start} reaches a final node")]
    NoPath { start: usize },
    #[error("invalid lattice: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub src: usize,
    pub dst: usize,
    pub word: String,
    pub acoustic_cost: f64,
    pub lm_cost: f64,
}

impl Arc {
    pub fn new(src: usize, dst: usize, word: &str, acoustic_cost: f64, lm_cost: f64) -> Self {
        Arc {
            src,
            dst,
            word: word.to_string(),
            acoustic_cost,
            lm_cost,
        }
    }

    /// Combined arc cost, `acoustic + lm`.
    pub fn cost(&self) -> f64 {
        self.acoustic_cost + self.lm_cost
    }

    pub fn is_epsilon(&self) -> bool {
        self.word == EPSILON
    }
}

/// A validated, trimmed lattice.
///
/// Construction rejects cycles and lattices without a start-to-final path,
/// then drops every arc touching a node that is unreachable from the start
/// or cannot reach a final node.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    node_count: usize,
    start: usize,
    finals: BTreeSet<usize>,
    arcs: Vec<Arc>,
    outgoing: Vec<Vec<usize>>,
    topo: Vec<usize>,
    live: Vec<bool>,
}

/// One decoded word sequence and the cost of the path that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub words: Vec<String>,
    pub text: String,
    pub total_cost: f64,
    /// Indices into [`Lattice::arcs`] of the underlying path.
    pub path: Vec<usize>,
}

impl Lattice {
    pub fn new(
        node_count: usize,
        start: usize,
        finals: impl IntoIterator<Item = usize>,
        arcs: Vec<Arc>,
    ) -> Result<Self, LatticeError> {
        if node_count == 0 {
            return Err(LatticeError::Invalid("node_count must be positive".into()));
        }
        if start >= node_count {
            return Err(LatticeError::Invalid(format!(
                "start node {start} out of range for {node_count} nodes"
            )));
        }
        let finals: BTreeSet<usize> = finals.into_iter().collect();
        if finals.is_empty() {
            return Err(LatticeError::Invalid("no final nodes".into()));
        }
        if let Some(&f) = finals.iter().find(|&&f| f >= node_count) {
            return Err(LatticeError::Invalid(format!("final node {f} out of range")));
        }
        for arc in &arcs {
            check_arc(arc, node_count).map_err(LatticeError::Invalid)?;
        }

        let topo_all = topological_order(node_count, &arcs)?;

        let mut forward = vec![false; node_count];
        forward[start] = true;
        for &v in &topo_all {
            if forward[v] {
                for arc in arcs.iter().filter(|a| a.src == v) {
                    forward[arc.dst] = true;
                }
            }
        }
        let mut backward = vec![false; node_count];
        for &f in &finals {
            backward[f] = true;
        }
        for &v in topo_all.iter().rev() {
            if arcs.iter().any(|a| a.src == v && backward[a.dst]) {
                backward[v] = true;
            }
        }
        let live: Vec<bool> = (0..node_count).map(|v| forward[v] && backward[v]).collect();
        if !live[start] {
            return Err(LatticeError::NoPath { start });
        }

        let arcs: Vec<Arc> = arcs
            .into_iter()
            .filter(|a| live[a.src] && live[a.dst])
            .collect();
        let finals: BTreeSet<usize> = finals.into_iter().filter(|&f| live[f]).collect();
        let mut outgoing = vec![Vec::new(); node_count];
        for (i, arc) in arcs.iter().enumerate() {
            outgoing[arc.src].push(i);
        }
        let topo = topo_all.into_iter().filter(|&v| live[v]).collect();

        Ok(Lattice {
            node_count,
            start,
            finals,
            arcs,
            outgoing,
            topo,
            live,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    /// Arcs that survived pruning, in document order.
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Indices into [`Lattice::arcs`] leaving `node`.
    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    /// Nodes dropped during pruning.
    pub fn dead_nodes(&self) -> Vec<usize> {
        (0..self.node_count).filter(|&v| !self.live[v]).collect()
    }

    pub fn is_final(&self, node: usize) -> bool {
        self.finals.contains(&node)
    }

    /// Number of distinct start-to-final paths (saturating).
    pub fn path_count(&self) -> u128 {
        let mut count = vec![0u128; self.node_count];
        for &v in self.topo.iter().rev() {
            let mut c: u128 = if self.is_final(v) { 1 } else { 0 };
            for &a in &self.outgoing[v] {
                c = c.saturating_add(count[self.arcs[a].dst]);
            }
            count[v] = c;
        }
        count[self.start]
    }

    /// Cost of a path given as arc indices, summed in path order.
    pub fn path_cost(&self, path: &[usize]) -> f64 {
        path.iter().fold(0.0, |acc, &a| acc + self.arcs[a].cost())
    }

    /// Builds the hypothesis for a path given as arc indices.
    pub fn hypothesis(&self, path: Vec<usize>) -> Hypothesis {
        let words: Vec<String> = path
            .iter()
            .map(|&a| &self.arcs[a])
            .filter(|a| !a.is_epsilon())
            .map(|a| a.word.clone())
            .collect();
        Hypothesis {
            text: words.join(" "),
            total_cost: self.path_cost(&path),
            words,
            path,
        }
    }

    /// Serialises to the text format. Costs use the shortest representation
    /// that parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "LATTICE {} {}", self.node_count, self.start);
        for a in &self.arcs {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                a.src, a.dst, a.word, a.acoustic_cost, a.lm_cost
            );
        }
        for f in &self.finals {
            let _ = writeln!(out, "FINAL {f}");
        }
        out
    }

    /// Minimum-cost suffix from every node to a final node, `+inf` for dead
    /// nodes.
    fn cost_to_final(&self) -> Vec<f64> {
        let mut h = vec![f64::INFINITY; self.node_count];
        for &v in self.topo.iter().rev() {
            let mut best = if self.is_final(v) { 0.0 } else { f64::INFINITY };
            for &a in &self.outgoing[v] {
                let arc = &self.arcs[a];
                let c = arc.cost() + h[arc.dst];
                if c < best {
                    best = c;
                }
            }
            h[v] = best;
        }
        h
    }
}

fn check_arc(arc: &Arc, node_count: usize) -> Result<(), String> {
    if arc.src >= node_count || arc.dst >= node_count {
        return Err(format!(
            "arc {} -> {} references a node outside 0..{node_count}",
            arc.src, arc.dst
        ));
    }
    if arc.word.is_empty() || arc.word.chars().any(char::is_whitespace) {
        return Err(format!("arc {} -> {} has an empty or blank word", arc.src, arc.dst));
    }
    if !arc.acoustic_cost.is_finite() || !arc.lm_cost.is_finite() {
        return Err(format!("arc {} -> {} has a non-finite cost", arc.src, arc.dst));
    }
    Ok(())
}

// Kahn's algorithm; ties resolved by node id so the order is reproducible.
fn topological_order(node_count: usize, arcs: &[Arc]) -> Result<Vec<usize>, LatticeError> {
    let mut indegree = vec![0usize; node_count];
    let mut succ = vec![Vec::new(); node_count];
    for arc in arcs {
        indegree[arc.dst] += 1;
        succ[arc.src].push(arc.dst);
    }
    let mut ready: BTreeSet<usize> = (0..node_count).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(node_count);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.insert(w);
            }
        }
    }
    if order.len() < node_count {
        let node = (0..node_count).find(|&v| indegree[v] > 0).unwrap_or(0);
        return Err(LatticeError::Cycle { node });
    }
    Ok(order)
}

/// Parses the text lattice format and validates the result.
pub fn parse_lattice(document: &str) -> Result<Lattice, LatticeError> {
    let mut header: Option<(usize, usize)> = None;
    let mut arcs = Vec::new();
    let mut finals = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in document.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let err = |message: String| LatticeError::Parse { line, message };

        match (header, fields[0]) {
            (None, "LATTICE") => {
                if fields.len() != 3 {
                    return Err(err("expected `LATTICE <node_count> <start_node>`".into()));
                }
                let n = parse_index(fields[1]).map_err(&err)?;
                let s = parse_index(fields[2]).map_err(&err)?;
                header = Some((n, s));
            }
            (None, _) => return Err(err("expected LATTICE header before any arc".into())),
            (Some(_), "LATTICE") => return Err(err("duplicate LATTICE header".into())),
            (Some((n, _)), "FINAL") => {
                if fields.len() != 2 {
                    return Err(err("expected `FINAL <node>`".into()));
                }
                let f = parse_index(fields[1]).map_err(&err)?;
                if f >= n {
                    return Err(err(format!("final node {f} out of range for {n} nodes")));
                }
                finals.push(f);
            }
            (Some((n, _)), _) => {
                if fields.len() != 5 {
                    return Err(err(format!(
                        "expected `<src> <dst> <word> <acoustic_cost> <lm_cost>`, got {} fields",
                        fields.len()
                    )));
                }
                let src = parse_index(fields[0]).map_err(&err)?;
                let dst = parse_index(fields[1]).map_err(&err)?;
                if src >= n || dst >= n {
                    return Err(err(format!("arc {src} -> {dst} out of range for {n} nodes")));
                }
                let acoustic = parse_cost(fields[3]).map_err(&err)?;
                let lm = parse_cost(fields[4]).map_err(&err)?;
                arcs.push(Arc::new(src, dst, fields[2], acoustic, lm));
            }
        }
    }

    let (node_count, start) = header.ok_or(LatticeError::Parse {
        line: last_line.max(1),
        message: "missing LATTICE header".into(),
    })?;
    if finals.is_empty() {
        return Err(LatticeError::Parse {
            line: last_line.max(1),
            message: "no FINAL line".into(),
        });
    }
    Lattice::new(node_count, start, finals, arcs)
}

fn parse_index(field: &str) -> Result<usize, String> {
    field
        .parse::<usize>()
        .map_err(|_| format!("`{field}` is not a node id"))
}

fn parse_cost(field: &str) -> Result<f64, String> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{field}` is not a finite decimal cost")),
    }
}

/// The least-cost path. Equal costs are resolved by lexicographic text order.
pub fn best_path(lattice: &Lattice) -> Hypothesis {
    nbest(lattice, 1)
        .into_iter()
        .next()
        .expect("validated lattice has at least one path")
}

struct Frontier {
    priority: f64,
    prefix: f64,
    node: usize,
    trail: Option<usize>,
    complete: bool,
    seq: u64,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // Reversed so that `BinaryHeap` pops the cheapest entry first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| self.complete.cmp(&other.complete))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// The `n` least-cost distinct word sequences, cheapest first.
///
/// Paths are expanded best-first using exact cost-to-final scores, so the
/// search only touches paths that can still make the list. Paths emitting
/// the same text are merged, keeping the cheapest. Equal costs are ordered by
/// text. Returns fewer than `n` entries when the lattice has fewer distinct
/// texts.
pub fn nbest(lattice: &Lattice, n: usize) -> Vec<Hypothesis> {
    if n == 0 {
        return Vec::new();
    }
    let to_final = lattice.cost_to_final();
    // (parent trail, arc index)
    let mut trails: Vec<(Option<usize>, usize)> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Frontier {
        priority: to_final[lattice.start],
        prefix: 0.0,
        node: lattice.start,
        trail: None,
        complete: false,
        seq,
    });

    let mut found: BTreeMap<String, Hypothesis> = BTreeMap::new();
    while let Some(entry) = heap.pop() {
        if found.len() >= n {
            let cutoff = nth_cost(&found, n);
            // Suffix scores are summed back-to-front while prefixes are
            // summed front-to-back; the slack covers that rounding gap.
            if entry.priority > cutoff + 1e-9 * (1.0 + libm::fabs(cutoff)) {
                break;
            }
        }
        if entry.complete {
            let hyp = lattice.hypothesis(unwind(&trails, entry.trail));
            match found.get(&hyp.text) {
                Some(existing) if existing.total_cost <= hyp.total_cost => {}
                _ => {
                    found.insert(hyp.text.clone(), hyp);
                }
            }
            continue;
        }
        if lattice.is_final(entry.node) {
            seq += 1;
            heap.push(Frontier {
                priority: entry.prefix,
                complete: true,
                seq,
                ..entry
            });
        }
        for &a in lattice.outgoing(entry.node) {
            let arc = &lattice.arcs[a];
            let prefix = entry.prefix + arc.cost();
            trails.push((entry.trail, a));
            seq += 1;
            heap.push(Frontier {
                priority: prefix + to_final[arc.dst],
                prefix,
                node: arc.dst,
                trail: Some(trails.len() - 1),
                complete: false,
                seq,
            });
        }
    }

    let mut out: Vec<Hypothesis> = found.into_values().collect();
    out.sort_by(|a, b| {
        a.total_cost
            .total_cmp(&b.total_cost)
            .then_with(|| a.text.cmp(&b.text))
    });
    out.truncate(n);
    out
}

fn nth_cost(found: &BTreeMap<String, Hypothesis>, n: usize) -> f64 {
    let mut costs: Vec<f64> = found.values().map(|h| h.total_cost).collect();
    costs.sort_by(f64::total_cmp);
    costs[n - 1]
}

fn unwind(trails: &[(Option<usize>, usize)], mut at: Option<usize>) -> Vec<usize> {
    let mut path = Vec::new();
    while let Some(i) = at {
        let (parent, arc) = trails[i];
        path.push(arc);
        at = parent;
    }
    path.reverse();
    path
}
