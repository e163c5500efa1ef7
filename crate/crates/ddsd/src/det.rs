//! DET curve export: CSV points and an SVG plot.

use std::fmt::Write as _;

use ddsd_core::eval::{DetCurve, DetPoint};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Axis {
    Linear,
    /// Standard normal deviate, the usual DET scale.
    #[default]
    Probit,
}

pub fn to_csv(curve: &DetCurve) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["threshold", "frr", "far"]).expect("in-memory write");
    for p in &curve.points {
        w.serialize((p.threshold, p.frr, p.far)).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8");
    format!("# positives={} negatives={}\n{body}", curve.positives, curve.negatives)
}

pub fn from_csv(text: &str) -> Result<DetCurve, String> {
    let first = text.lines().next().unwrap_or("");
    let counts = first
        .strip_prefix("# ")
        .ok_or("missing `# positives=.. negatives=..` line")?;
    let mut positives = None;
    let mut negatives = None;
    for kv in counts.split_whitespace() {
        match kv.split_once('=') {
            Some(("positives", v)) => positives = v.parse().ok(),
            Some(("negatives", v)) => negatives = v.parse().ok(),
            _ => return Err(format!("unexpected `{kv}`")),
        }
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, row) in r.deserialize::<(f64, f64, f64)>().enumerate() {
        let (threshold, frr, far) = row.map_err(|e| format!("row {}: {e}", i + 1))?;
        points.push(DetPoint { threshold, frr, far });
    }
    Ok(DetCurve {
        points,
        positives: positives.ok_or("bad positives count")?,
        negatives: negatives.ok_or("bad negatives count")?,
    })
}

const SIZE: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PROBIT_FLOOR: f64 = 1e-3;

struct Scale {
    axis: Axis,
    normal: Normal,
}

impl Scale {
    fn new(axis: Axis) -> Self {
        Scale {
            axis,
            normal: Normal::standard(),
        }
    }

    /// Position of rate `p` in [0, 1] along an axis.
    fn unit(&self, p: f64) -> f64 {
        match self.axis {
            Axis::Linear => p.clamp(0.0, 1.0),
            Axis::Probit => {
                let lo = self.normal.inverse_cdf(PROBIT_FLOOR);
                let hi = self.normal.inverse_cdf(1.0 - PROBIT_FLOOR);
                let z = self.normal.inverse_cdf(p.clamp(PROBIT_FLOOR, 1.0 - PROBIT_FLOOR));
                (z - lo) / (hi - lo)
            }
        }
    }

    fn ticks(&self) -> &'static [f64] {
        match self.axis {
            Axis::Linear => &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            Axis::Probit => &[0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.8, 0.95, 0.99],
        }
    }
}

pub fn to_svg(curve: &DetCurve, axis: Axis, title: &str) -> String {
    let scale = Scale::new(axis);
    let x = |far: f64| MARGIN + scale.unit(far) * SIZE;
    let y = |frr: f64| MARGIN + (1.0 - scale.unit(frr)) * SIZE;
    let full = SIZE + 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#444"/>"##
    );
    for &t in scale.ticks() {
        let (tx, ty) = (x(t), y(t));
        let label = format!("{}", t * 100.0);
        let _ = writeln!(
            s,
            r##"<line x1="{tx:.2}" y1="{MARGIN}" x2="{tx:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            MARGIN + SIZE
        );
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#ddd"/>"##,
            MARGIN + SIZE
        );
        let _ = writeln!(
            s,
            r#"<text x="{tx:.2}" y="{:.2}" font-size="10" text-anchor="middle">{label}</text>"#,
            MARGIN + SIZE + 14.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{label}</text>"#,
            MARGIN - 6.0,
            ty + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">False accept rate (%)</text>"#,
        MARGIN + SIZE / 2.0,
        full - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">False reject rate (%)</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    let pts: Vec<String> = curve
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.far), y(p.frr)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#c0392b" stroke-width="2" points="{}"/>"##,
        pts.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
