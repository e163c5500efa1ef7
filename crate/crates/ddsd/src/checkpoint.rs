//! Plain-text model checkpoints.
//!
//! ```text
//! ddsd-checkpoint 1
//! input_dim 512
//! prompt_config {"followup_mode":{"NBest":8},...}
//! backend mock(dim=512, ...)
//! train_config {"learning_rate":0.5,...}
//! lora {"rank":8,"alpha":16.0,"hidden_dim":64}
//! loss_trace 0.41 0.22 0.18
//! matrix head_weights 512 2
//! <one row per line, values separated by spaces>
//! matrix head_bias 1 2
//! ...
//! end
//! ```
//!
//! Numbers are written in Rust's shortest round-trip form, so a save/load
//! cycle reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ddsd_core::classifier::{LinearHead, LoraAdapter, LoraBackbone, LoraSpec, Matrix, TrainConfig, TrainedModel};
use ddsd_core::promptgen::PromptConfig;

const MAGIC: &str = "ddsd-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TrainedModel,
    pub train_config: TrainConfig,
    pub lora: Option<LoraSpec>,
    /// How training prompts were rendered; inference must match it.
    pub prompt_config: PromptConfig,
    pub backend: String,
}

fn write_matrix(out: &mut String, name: &str, rows: usize, cols: usize, values: &[f64]) {
    let _ = writeln!(out, "matrix {name} {rows} {cols}");
    for row in values.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn to_text(ck: &Checkpoint) -> String {
    let m = &ck.model;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "input_dim {}", m.input_dim());
    let _ = writeln!(
        out,
        "prompt_config {}",
        serde_json::to_string(&ck.prompt_config).expect("config serializes")
    );
    let _ = writeln!(out, "backend {}", ck.backend.replace('\n', " "));
    let _ = writeln!(
        out,
        "train_config {}",
        serde_json::to_string(&ck.train_config).expect("config serializes")
    );
    if let Some(spec) = &ck.lora {
        let _ = writeln!(out, "lora {}", serde_json::to_string(spec).expect("spec serializes"));
    }
    let trace: Vec<String> = m.loss_trace.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "loss_trace {}", trace.join(" "));
    let weights: Vec<f64> = m.head.weights.iter().flatten().copied().collect();
    write_matrix(&mut out, "head_weights", m.head.dim(), 2, &weights);
    write_matrix(&mut out, "head_bias", 1, 2, &m.head.bias);
    if let Some(b) = &m.backbone {
        write_matrix(&mut out, "base", b.base.rows(), b.base.cols(), b.base.as_slice());
        let a = &b.adapter;
        write_matrix(&mut out, "lora_down", a.down.rows(), a.down.cols(), a.down.as_slice());
        write_matrix(&mut out, "lora_up", a.up.rows(), a.up.cols(), a.up.as_slice());
    }
    out.push_str("end\n");
    out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, CheckpointError> {
        Err(CheckpointError::Format {
            line: self.line,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Result<&'a str, CheckpointError> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => {
                self.line += 1;
                self.err("unexpected end of file")
            }
        }
    }

    fn field(&mut self, key: &str) -> Result<&'a str, CheckpointError> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ if l == key => Ok(""),
            _ => self.err(format!("expected `{key}`")),
        }
    }

    fn numbers(&self, text: &str) -> Result<Vec<f64>, CheckpointError> {
        text.split_whitespace()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => self.err(format!("bad number `{t}`")),
            })
            .collect()
    }

    fn matrix(&mut self, name: &str) -> Result<Matrix, CheckpointError> {
        let header = self.field("matrix")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [n, r, c] = parts[..] else {
            return self.err("matrix header needs a name and two dims");
        };
        if n != name {
            return self.err(format!("expected matrix `{name}`, found `{n}`"));
        }
        let (Ok(rows), Ok(cols)) = (r.parse::<usize>(), c.parse::<usize>()) else {
            return self.err("bad matrix dims");
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let l = self.next()?;
            let row = self.numbers(l)?;
            if row.len() != cols {
                return self.err(format!("expected {cols} values, found {}", row.len()));
            }
            data.extend(row);
        }
        Matrix::from_vec(rows, cols, data).or_else(|e| self.err(e.to_string()))
    }
}

pub fn parse(text: &str) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
        line: 0,
    };
    let version = r.field(MAGIC)?;
    if version != VERSION.to_string() {
        return r.err(format!("unsupported version `{version}`"));
    }
    let input_dim: usize = match r.field("input_dim")?.parse() {
        Ok(d) => d,
        Err(_) => return r.err("bad input_dim"),
    };
    let prompt_config: PromptConfig = match serde_json::from_str(r.field("prompt_config")?) {
        Ok(c) => c,
        Err(e) => return r.err(format!("prompt_config: {e}")),
    };
    let backend = r.field("backend")?.to_string();
    let train_config: TrainConfig = match serde_json::from_str(r.field("train_config")?) {
        Ok(c) => c,
        Err(e) => return r.err(format!("train_config: {e}")),
    };

    let mut next = r.next()?;
    let lora = match next.strip_prefix("lora ") {
        Some(json) => {
            let spec: LoraSpec = match serde_json::from_str(json) {
                Ok(s) => s,
                Err(e) => return r.err(format!("lora: {e}")),
            };
            next = r.next()?;
            Some(spec)
        }
        None => None,
    };
    let loss_trace = match next.strip_prefix("loss_trace") {
        Some(rest) => r.numbers(rest)?,
        None => return r.err("expected `loss_trace`"),
    };

    let w = r.matrix("head_weights")?;
    let b = r.matrix("head_bias")?;
    if w.cols() != 2 || b.rows() != 1 || b.cols() != 2 {
        return r.err("head matrices have the wrong shape");
    }
    let head = LinearHead {
        weights: w.as_slice().chunks_exact(2).map(|p| [p[0], p[1]]).collect(),
        bias: [b.get(0, 0), b.get(0, 1)],
    };
    let backbone = match &lora {
        Some(spec) => {
            let base = r.matrix("base")?;
            let down = r.matrix("lora_down")?;
            let up = r.matrix("lora_up")?;
            let adapter = LoraAdapter::new(spec.alpha, down, up).or_else(|e| r.err(e.to_string()))?;
            Some(LoraBackbone::new(base, adapter).or_else(|e| r.err(e.to_string()))?)
        }
        None => None,
    };
    if r.next()? != "end" {
        return r.err("expected `end`");
    }
    let model = TrainedModel {
        head,
        backbone,
        l2_normalize: train_config.l2_normalize,
        loss_trace,
    };
    if model.input_dim() != input_dim {
        return r.err(format!("input_dim {input_dim} disagrees with matrices ({})", model.input_dim()));
    }
    if let (Some(b), Some(spec)) = (&model.backbone, &lora) {
        if b.hidden_dim() != spec.hidden_dim || b.adapter.rank != spec.rank || model.head.dim() != spec.hidden_dim {
            return r.err("adapter matrices disagree with the lora spec");
        }
    }
    Ok(Checkpoint {
        model,
        train_config,
        lora,
        prompt_config,
        backend,
    })
}

pub fn save(ck: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, to_text(ck)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}
